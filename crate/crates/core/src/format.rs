//! Plain-text dataset files.
//!
//! ```text
//! mmm-dataset 1
//! manifold grassmannian 6 2          # or: sphere D | spd p
//! points 260
//! provenance spec II 130 0.025 7     # or: provenance external
//! labels 2                           # cluster count, or: labels none
//! data
//! 1 0.99 0.01 ...                    # one-based label (or -) then the
//! ...                                # ambient entries in row-major order
//! ```
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so a save/load roundtrip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cluster::ClusterLabels;
use crate::error::{Error, Result};
use crate::linalg::{flatten_row_major, unflatten_row_major};
use crate::manifold::{ManifoldId, ManifoldPoint};
use crate::synth::{Dataset, DatasetSpec, Provenance};

pub const MAGIC: &str = "mmm-dataset";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = match dataset.manifold {
        ManifoldId::Sphere { dim } => writeln!(out, "manifold sphere {dim}"),
        ManifoldId::Grassmannian { p, l } => writeln!(out, "manifold grassmannian {p} {l}"),
        ManifoldId::Spd { p } => writeln!(out, "manifold spd {p}"),
    };
    let _ = writeln!(out, "points {}", dataset.points.len());
    let _ = match &dataset.provenance {
        Provenance::Spec(s) => writeln!(
            out,
            "provenance spec {} {} {} {}",
            s.id, s.points_per_cluster, s.noise_sigma, s.seed
        ),
        Provenance::External => writeln!(out, "provenance external"),
    };
    let _ = match &dataset.truth {
        Some(t) => writeln!(out, "labels {}", t.k()),
        None => writeln!(out, "labels none"),
    };
    out.push_str("data\n");
    for (i, p) in dataset.points.iter().enumerate() {
        match &dataset.truth {
            Some(t) => {
                let _ = write!(out, "{}", t.labels()[i] + 1);
            }
            None => out.push('-'),
        }
        for v in flatten_row_major(p.data()) {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    fs::write(path, write_dataset(dataset))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    /// Next line and its starting byte offset.
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        if self.pos >= self.text.len() {
            return None;
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(k) => (&rest[..k], k + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some((start, line.trim_end_matches('\r')))
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line().ok_or_else(|| Error::Parse {
            offset: self.text.len(),
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    /// The fields after `key` on the next line.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (offset, line) = self.expect(key)?;
        let mut fields = line.split_whitespace();
        if fields.next() != Some(key) {
            return Err(Error::Parse {
                offset,
                message: format!("expected '{key}' line"),
            });
        }
        Ok((offset, fields.collect()))
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, offset: usize, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Parse {
        offset,
        message: format!("invalid {what} '{field}'"),
    })
}

fn arity(fields: &[&str], n: usize, offset: usize, key: &str) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(Error::Parse {
            offset,
            message: format!("'{key}' takes {n} value(s), found {}", fields.len()),
        })
    }
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = Lines { text, pos: 0 };

    let (offset, header) = lines.expect("header")?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        return Err(Error::Parse {
            offset,
            message: format!("missing '{MAGIC}' header"),
        });
    }
    let version: u32 = parse_num(fields.next().unwrap_or(""), offset, "format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }

    let (offset, fields) = lines.keyed("manifold")?;
    let manifold = match fields.first().copied() {
        Some("sphere") => {
            arity(&fields, 2, offset, "manifold sphere")?;
            ManifoldId::Sphere {
                dim: parse_num(fields[1], offset, "dimension")?,
            }
        }
        Some("grassmannian") => {
            arity(&fields, 3, offset, "manifold grassmannian")?;
            ManifoldId::Grassmannian {
                p: parse_num(fields[1], offset, "dimension")?,
                l: parse_num(fields[2], offset, "dimension")?,
            }
        }
        Some("spd") => {
            arity(&fields, 2, offset, "manifold spd")?;
            ManifoldId::Spd {
                p: parse_num(fields[1], offset, "dimension")?,
            }
        }
        Some(tag) => {
            return Err(Error::Parse {
                offset,
                message: format!("unknown manifold tag '{tag}'"),
            })
        }
        None => {
            return Err(Error::Parse {
                offset,
                message: "missing manifold tag".into(),
            })
        }
    };
    manifold.check().map_err(|e| Error::Parse {
        offset,
        message: e.to_string(),
    })?;

    let (offset, fields) = lines.keyed("points")?;
    arity(&fields, 1, offset, "points")?;
    let count: usize = parse_num(fields[0], offset, "point count")?;

    let (offset, fields) = lines.keyed("provenance")?;
    let provenance = match fields.first().copied() {
        Some("external") => {
            arity(&fields, 1, offset, "provenance external")?;
            Provenance::External
        }
        Some("spec") => {
            arity(&fields, 5, offset, "provenance spec")?;
            Provenance::Spec(DatasetSpec {
                id: fields[1].parse().map_err(|_| Error::Parse {
                    offset,
                    message: format!("unknown dataset id '{}'", fields[1]),
                })?,
                points_per_cluster: parse_num(fields[2], offset, "points per cluster")?,
                noise_sigma: parse_num(fields[3], offset, "noise level")?,
                seed: parse_num(fields[4], offset, "seed")?,
            })
        }
        other => {
            return Err(Error::Parse {
                offset,
                message: format!("unknown provenance '{}'", other.unwrap_or("")),
            })
        }
    };

    let (offset, fields) = lines.keyed("labels")?;
    arity(&fields, 1, offset, "labels")?;
    let k: Option<usize> = match fields[0] {
        "none" => None,
        f => Some(parse_num(f, offset, "cluster count")?),
    };

    let (offset, fields) = lines.keyed("data")?;
    arity(&fields, 0, offset, "data")?;

    let (rows, cols) = manifold.ambient_shape();
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let (offset, line) = lines.expect("data row")?;
        if !lines.text[..lines.pos].ends_with('\n') {
            return Err(Error::Parse {
                offset,
                message: "truncated data row (missing newline)".into(),
            });
        }
        let mut fields = line.split_whitespace();
        let label = fields.next().unwrap_or("");
        match (k, label) {
            (None, "-") => {}
            (Some(k), l) => {
                let l: usize = parse_num(l, offset, "label")?;
                if l == 0 || l > k {
                    return Err(Error::Parse {
                        offset,
                        message: format!("label {l} outside 1..={k}"),
                    });
                }
                labels.push(l - 1);
            }
            (None, l) => {
                return Err(Error::Parse {
                    offset,
                    message: format!("expected '-' for an unlabeled point, found '{l}'"),
                })
            }
        }
        let values = fields
            .map(|f| parse_num::<f64>(f, offset, "number"))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != rows * cols {
            return Err(Error::Parse {
                offset,
                message: format!("expected {} values, found {}", rows * cols, values.len()),
            });
        }
        let point =
            ManifoldPoint::from_raw(manifold, unflatten_row_major(&values, rows, cols)).map_err(|e| Error::Parse {
                offset,
                message: e.to_string(),
            })?;
        points.push(point);
    }
    while let Some((offset, line)) = lines.next_line() {
        if !line.trim().is_empty() {
            return Err(Error::Parse {
                offset,
                message: "trailing content after the last data row".into(),
            });
        }
    }
    let truth = k.map(|k| ClusterLabels::new(labels, k)).transpose()?;
    Ok(Dataset {
        manifold,
        points,
        truth,
        provenance,
    })
}

//! CSV rows and the JSON summary.

use std::io::{Read, Write};

use geoclust::eval::{summarize, Summary, TrialResult};
use geoclust::synth::DatasetId;
use serde::Serialize;

use crate::config::{ExperimentConfig, MethodConfig};
use crate::runner::Row;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

const BASE_COLUMNS: [&str; 9] = [
    "dataset",
    "method",
    "trial",
    "seed",
    "rate",
    "affinity_ms",
    "spectral_ms",
    "total_ms",
    "error",
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad results file, record {record}: {message}")]
    Malformed { record: usize, message: String },
}

/// Writes rows as CSV. A `sigma` column follows `dataset` when any row has
/// a noise level.
pub fn write_csv(rows: &[Row], out: impl Write) -> Result<(), ReportError> {
    let with_sigma = rows.iter().any(|r| r.sigma.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    if with_sigma {
        header.insert(1, "sigma");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut record = vec![
            r.dataset.to_string(),
            r.method.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.rate.map(|v| v.to_string()).unwrap_or_default(),
            r.affinity_ms.to_string(),
            r.spectral_ms.to_string(),
            r.total_ms.to_string(),
            r.error.clone().unwrap_or_default(),
        ];
        if with_sigma {
            record.insert(1, r.sigma.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<Row>, ReportError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut idx = Vec::new();
    for name in BASE_COLUMNS {
        idx.push(col(name).ok_or_else(|| ReportError::Malformed {
            record: 0,
            message: format!("missing column '{name}'"),
        })?);
    }
    let sigma_idx = col("sigma");
    let mut rows = Vec::new();
    for (n, record) in r.records().enumerate() {
        let record = record?;
        let bad = |message: String| ReportError::Malformed { record: n + 1, message };
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("invalid {what} '{s}'"))
        }
        let opt = |s: &str, what: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        let parsed = (|| -> Result<Row, String> {
            Ok(Row {
                dataset: num::<DatasetId>(field(0), "dataset")?,
                method: field(1).to_string(),
                trial: num(field(2), "trial")?,
                seed: num(field(3), "seed")?,
                sigma: match sigma_idx {
                    Some(k) => opt(record.get(k).unwrap_or(""), "sigma")?,
                    None => None,
                },
                rate: opt(field(4), "rate")?,
                affinity_ms: num(field(5), "affinity_ms")?,
                spectral_ms: num(field(6), "spectral_ms")?,
                total_ms: num(field(7), "total_ms")?,
                error: Some(field(8).to_string()).filter(|e| !e.is_empty()),
            })
        })();
        rows.push(parsed.map_err(bad)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub method: String,
    pub mean: f64,
    pub std: f64,
    /// Successful trials.
    pub trials: usize,
    pub failures: usize,
    pub mean_total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRatio {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub gct: String,
    pub smc: String,
    /// Summed GCT total time over summed SMC total time.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultsSummary {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub rows: usize,
    pub summary: Vec<SummaryRow>,
    pub time_ratios: Vec<TimeRatio>,
}

/// Rows sharing a (dataset, sigma) key, in first-seen order.
type Groups<'a> = Vec<((DatasetId, Option<f64>), Vec<&'a Row>)>;

fn groups(rows: &[Row]) -> Groups<'_> {
    let mut out: Groups<'_> = Vec::new();
    for r in rows {
        let key = (r.dataset, r.sigma);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => out.push((key, vec![r])),
        }
    }
    out
}

fn to_trial(r: &Row) -> Option<TrialResult> {
    Some(TrialResult {
        method: r.method.clone(),
        dataset: r.dataset.to_string(),
        trial: r.trial,
        seed: r.seed,
        rate: r.rate?,
        affinity_ms: r.affinity_ms,
        spectral_ms: r.spectral_ms,
        total_ms: r.total_ms,
    })
}

/// Mean ± std per (dataset, sigma, method) over successful trials.
pub fn summary_rows(rows: &[Row]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for ((dataset, sigma), group) in groups(rows) {
        let trials: Vec<TrialResult> = group.iter().filter_map(|r| to_trial(r)).collect();
        let stats: Vec<Summary> = summarize(&trials);
        let mut methods: Vec<&str> = Vec::new();
        for r in &group {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        for m in methods {
            let failures = group.iter().filter(|r| r.method == m && r.rate.is_none()).count();
            let s = stats.iter().find(|s| s.method == m);
            out.push(SummaryRow {
                dataset: dataset.to_string(),
                sigma,
                method: m.to_string(),
                mean: s.map_or(f64::NAN, |s| s.mean),
                std: s.map_or(f64::NAN, |s| s.std),
                trials: s.map_or(0, |s| s.trials),
                failures,
                mean_total_ms: s.map_or(f64::NAN, |s| s.mean_total_ms),
            });
        }
    }
    out
}

/// GCT/SMC total-time ratios for every pair of GCT and SMC entries.
pub fn time_ratios(rows: &[Row], config: &ExperimentConfig) -> Vec<TimeRatio> {
    let labels = |pick: fn(&MethodConfig) -> bool| -> Vec<String> {
        config
            .methods
            .iter()
            .filter(|m| pick(m))
            .map(MethodConfig::label)
            .collect()
    };
    let gcts = labels(|m| matches!(m, MethodConfig::Gct { .. }));
    let smcs = labels(|m| matches!(m, MethodConfig::Smc { .. }));
    let mut out = Vec::new();
    for ((dataset, sigma), group) in groups(rows) {
        let total = |label: &str| -> f64 {
            group
                .iter()
                .filter(|r| r.method == label && r.rate.is_some())
                .map(|r| r.total_ms)
                .sum()
        };
        for g in &gcts {
            for s in &smcs {
                out.push(TimeRatio {
                    dataset: dataset.to_string(),
                    sigma,
                    gct: g.clone(),
                    smc: s.clone(),
                    ratio: total(g) / total(s),
                });
            }
        }
    }
    out
}

pub fn results_summary(rows: &[Row], config: &ExperimentConfig) -> ResultsSummary {
    ResultsSummary {
        version: ARTIFACT_VERSION,
        config: config.clone(),
        rows: rows.len(),
        summary: summary_rows(rows),
        time_ratios: time_ratios(rows, config),
    }
}

/// Plain-text table of the summary, one line per (dataset, sigma, method).
pub fn format_summary(summary: &ResultsSummary) -> String {
    let mut s = String::new();
    for r in &summary.summary {
        let sigma = r.sigma.map(|v| format!(" sigma={v}")).unwrap_or_default();
        let failed = if r.failures > 0 {
            format!(" ({} failed)", r.failures)
        } else {
            String::new()
        };
        s.push_str(&format!(
            "{:<4}{sigma} {:<12} {:.3} ± {:.3}  n={}{failed}  {:.1} ms\n",
            r.dataset, r.method, r.mean, r.std, r.trials, r.mean_total_ms
        ));
    }
    for t in &summary.time_ratios {
        let sigma = t.sigma.map(|v| format!(" sigma={v}")).unwrap_or_default();
        s.push_str(&format!(
            "{:<4}{sigma} time {}/{} = {:.2}\n",
            t.dataset, t.gct, t.smc, t.ratio
        ));
    }
    s
}

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldId, ManifoldPoint};

/// Euclidean embedding used by EKM, one row per point:
/// - sphere: the ambient unit vector;
/// - SPD: upper triangle with off-diagonal entries scaled by `√2`, so the
///   Euclidean norm is the Frobenius norm;
/// - Grassmannian: the projection matrix `XXᵀ`, flattened.
pub fn embed_euclidean(points: &[ManifoldPoint]) -> Result<DMatrix<f64>> {
    let Some(first) = points.first() else {
        return Ok(DMatrix::zeros(0, 0));
    };
    let manifold = first.manifold();
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|pt| {
            if pt.manifold() != manifold {
                return Err(Error::ManifoldMismatch(manifold, pt.manifold()));
            }
            let x = pt.data();
            Ok(match manifold {
                ManifoldId::Sphere { .. } => x.iter().copied().collect(),
                ManifoldId::Spd { p } => {
                    let mut v = Vec::with_capacity(p * (p + 1) / 2);
                    for r in 0..p {
                        v.push(x[(r, r)]);
                        for c in r + 1..p {
                            v.push(SQRT_2 * x[(r, c)]);
                        }
                    }
                    v
                }
                ManifoldId::Grassmannian { .. } => {
                    let proj = x * x.transpose();
                    proj.transpose().iter().copied().collect()
                }
            })
        })
        .collect::<Result<_>>()?;
    let m = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]))
}

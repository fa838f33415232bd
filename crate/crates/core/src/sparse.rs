//! Distance-weighted sparse coding with an affine constraint:
//!
//! ```text
//! minimize    ‖q − Σ_j s_j y_j‖² + Σ_j w_j |s_j|
//! subject to  Σ_j s_j = 1
//! ```
//!
//! where `y_j` are the log images of a point's neighbors, `q` is the image of
//! the point itself (the zero vector) and `w_j = exp(‖q − y_j‖ / σ_d)`.
//!
//! The solver is an exact pairwise coordinate descent: each step moves mass
//! `t` from coordinate `b` to coordinate `a`, which keeps `Σ s_j` fixed, and
//! picks `t` by exact minimization of the one-dimensional piecewise quadratic.
//! The pair is the one with the most negative directional derivative. The
//! objective never increases, and the iterate satisfies the constraint at
//! every step. Since the one-dimensional optimality conditions for every pair
//! are intervals that pairwise intersect, a point with no descent pair is a
//! global minimizer.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SparseCodeProblem {
    pub query: DVector<f64>,
    /// One candidate per column.
    pub candidates: DMatrix<f64>,
    pub weights: Vec<f64>,
}

impl SparseCodeProblem {
    /// Problem with the exponential distance weights `exp(‖q − y_j‖ / σ_d)`.
    pub fn new(query: DVector<f64>, candidates: DMatrix<f64>, sigma_d: f64) -> Self {
        let weights = candidates
            .column_iter()
            .map(|y| ((&query - y).norm() / sigma_d).exp())
            .collect();
        Self {
            query,
            candidates,
            weights,
        }
    }

    pub fn with_weights(query: DVector<f64>, candidates: DMatrix<f64>, weights: Vec<f64>) -> Self {
        Self {
            query,
            candidates,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.ncols() == 0
    }

    pub fn objective(&self, coefficients: &[f64]) -> f64 {
        let fit: f64 = (0..self.query.len())
            .map(|r| {
                let combo: f64 = coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, s)| s * self.candidates[(r, j)])
                    .sum();
                (self.query[r] - combo).powi(2)
            })
            .sum();
        let penalty: f64 = coefficients.iter().zip(&self.weights).map(|(c, w)| w * c.abs()).sum();
        fit + penalty
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the most negative pairwise directional derivative is above `-tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the objective value after every iteration.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Optimality residual at the returned iterate.
    pub kkt_residual: f64,
    /// Objective after each iteration, starting with the initial point
    /// (empty unless requested).
    pub trace: Vec<f64>,
}

/// Precomputed quadratic form `f(s) = sᵀQs − 2cᵀs + qᵀq`.
struct Quadratic<'a> {
    gram: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
    weights: &'a [f64],
}

impl Quadratic<'_> {
    fn value(&self, s: &DVector<f64>) -> f64 {
        let quad = s.dot(&(&self.gram * s));
        let penalty: f64 = s.iter().zip(self.weights).map(|(c, w)| w * c.abs()).sum();
        quad - 2.0 * self.linear.dot(s) + self.constant + penalty
    }
}

/// Best descent pair `(a, b, derivative)` for moving mass from `b` to `a`,
/// using the gradient `g` of the smooth part.
fn steepest_pair(s: &DVector<f64>, g: &DVector<f64>, w: &[f64]) -> (usize, usize, f64) {
    // Right derivative of increasing s_j and of decreasing s_j.
    let up = |j: usize| if s[j] >= 0.0 { g[j] + w[j] } else { g[j] - w[j] };
    let down = |j: usize| if s[j] <= 0.0 { -g[j] + w[j] } else { -g[j] - w[j] };
    let k = s.len();
    let mut best = (0, 0, f64::INFINITY);
    // Best two "down" candidates so that a != b is always available.
    let mut downs: Vec<(f64, usize)> = (0..k).map(|j| (down(j), j)).collect();
    downs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    for a in 0..k {
        let (db, b) = if downs[0].1 != a { downs[0] } else { downs[1] };
        let d = up(a) + db;
        if d < best.2 {
            best = (a, b, d);
        }
    }
    best
}

/// Exact minimizer over `t` of
/// `φ(t) = t·slope + t²·curv + w_a|s_a + t| + w_b|s_b − t|`.
fn line_search(sa: f64, sb: f64, wa: f64, wb: f64, slope: f64, curv: f64) -> f64 {
    let phi = |t: f64| t * slope + t * t * curv + wa * (sa + t).abs() + wb * (sb - t).abs();
    let mut knots = [-sa, sb];
    knots.sort_by(f64::total_cmp);
    let mut candidates = vec![0.0, knots[0], knots[1]];
    if curv > 0.0 {
        // Stationary point inside each of the three pieces.
        let pieces = [
            (f64::NEG_INFINITY, knots[0]),
            (knots[0], knots[1]),
            (knots[1], f64::INFINITY),
        ];
        for (lo, hi) in pieces {
            let mid = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + 1.0
            } else {
                hi - 1.0
            };
            let sign_a = if sa + mid >= 0.0 { 1.0 } else { -1.0 };
            let sign_b = if sb - mid >= 0.0 { 1.0 } else { -1.0 };
            let t = -(slope + wa * sign_a - wb * sign_b) / (2.0 * curv);
            candidates.push(t.clamp(lo, hi));
        }
    }
    let mut best_t = 0.0;
    let mut best = phi(0.0);
    for t in candidates {
        if !t.is_finite() {
            continue;
        }
        let v = phi(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    best_t
}

/// Solves the weighted, sum-to-one constrained sparse coding problem.
///
/// Returns [`Error::MaxIterExceeded`] carrying the best iterate when the
/// optimality residual is still above `tol` after `max_iter` steps.
pub fn solve_sparse_code(problem: &SparseCodeProblem, options: &SolverOptions) -> Result<SparseCode> {
    let k = problem.len();
    if k == 0 {
        return Err(Error::EmptyCandidates);
    }
    if problem.weights.len() != k || problem.candidates.nrows() != problem.query.len() {
        return Err(Error::InvalidParameter(
            "sparse coding problem dimensions disagree".into(),
        ));
    }
    let y = &problem.candidates;
    let quad = Quadratic {
        gram: y.tr_mul(y),
        linear: y.tr_mul(&problem.query),
        constant: problem.query.norm_squared(),
        weights: &problem.weights,
    };
    let w = &problem.weights;

    // Start from all mass on the cheapest candidate.
    let start = (0..k)
        .min_by(|&a, &b| w[a].total_cmp(&w[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    let mut s = DVector::zeros(k);
    s[start] = 1.0;
    if k == 1 {
        let objective = quad.value(&s);
        return Ok(SparseCode {
            coefficients: vec![1.0],
            objective,
            iterations: 0,
            kkt_residual: 0.0,
            trace: if options.record_trace {
                vec![objective]
            } else {
                Vec::new()
            },
        });
    }

    let mut grad = 2.0 * (&quad.gram * &s - &quad.linear);
    let mut objective = quad.value(&s);
    let mut trace = Vec::new();
    if options.record_trace {
        trace.push(objective);
    }
    let mut iterations = 0;
    let mut residual;
    loop {
        let (a, b, deriv) = steepest_pair(&s, &grad, w);
        residual = (-deriv).max(0.0);
        if residual < options.tol || iterations >= options.max_iter {
            break;
        }
        let slope = grad[a] - grad[b];
        let curv = (quad.gram[(a, a)] + quad.gram[(b, b)] - 2.0 * quad.gram[(a, b)]).max(0.0);
        let t = line_search(s[a], s[b], w[a], w[b], slope, curv);
        if t == 0.0 {
            // No representable improvement left along the best direction.
            break;
        }
        let mut next = s.clone();
        next[a] += t;
        next[b] -= t;
        let value = quad.value(&next);
        if value > objective {
            break;
        }
        for j in 0..k {
            grad[j] += 2.0 * t * (quad.gram[(j, a)] - quad.gram[(j, b)]);
        }
        s = next;
        objective = value;
        iterations += 1;
        if options.record_trace {
            trace.push(objective);
        }
    }

    let code = SparseCode {
        coefficients: s.iter().copied().collect(),
        objective,
        iterations,
        kkt_residual: residual,
        trace,
    };
    if residual >= options.tol && iterations >= options.max_iter {
        return Err(Error::MaxIterExceeded(Box::new(code)));
    }
    Ok(code)
}

/// Grid-search reference minimizer for at most three candidates.
///
/// Searches the affine set `Σ s_j = 1` inside `[-3, 3]^k` on a grid of the
/// given step (aligned at `-3`, so halving the step refines the grid). Meant
/// as an independent check of [`solve_sparse_code`].
pub fn brute_force_code_oracle(problem: &SparseCodeProblem, grid_step: f64) -> Result<SparseCode> {
    let k = problem.len();
    if k == 0 {
        return Err(Error::EmptyCandidates);
    }
    if k > 3 {
        return Err(Error::InvalidParameter(format!(
            "oracle supports at most 3 candidates, got {k}"
        )));
    }
    if grid_step <= 0.0 {
        return Err(Error::InvalidParameter("grid step must be positive".into()));
    }
    let steps = (6.0 / grid_step).round() as i64;
    let at = |i: i64| -3.0 + 6.0 * i as f64 / steps as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |s: Vec<f64>| {
        let v = problem.objective(&s);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, s));
        }
    };
    match k {
        1 => consider(vec![1.0]),
        2 => {
            for i in 0..=steps {
                let s0 = at(i);
                let s1 = 1.0 - s0;
                if (-3.0..=3.0).contains(&s1) {
                    consider(vec![s0, s1]);
                }
            }
        }
        _ => {
            for i in 0..=steps {
                for j in 0..=steps {
                    let (s0, s1) = (at(i), at(j));
                    let s2 = 1.0 - s0 - s1;
                    if (-3.0..=3.0).contains(&s2) {
                        consider(vec![s0, s1, s2]);
                    }
                }
            }
        }
    }
    let (objective, coefficients) = best.ok_or(Error::EmptyCandidates)?;
    Ok(SparseCode {
        coefficients,
        objective,
        iterations: 0,
        kkt_residual: f64::NAN,
        trace: Vec::new(),
    })
}

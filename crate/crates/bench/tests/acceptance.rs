//! Acceptance checks, one line per criterion.
//!
//! Not part of the default `cargo test` run because some criteria fail; run
//! it with `cargo test --release -p geoclust-bench --test acceptance`.
//! `ACCEPTANCE=1,5` selects a subset.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use geoclust::cluster::{run_method, spectral_cluster, AffinityMatrix, ClusterLabels, Method, TgctParams};
use geoclust::eval::clustering_rate;
use geoclust::local::{
    build_neighborhoods, estimate_dimension_gap, gram_eigen, local_covariance, pairwise_distances, TangentEstimate,
};
use geoclust::manifold::{exp_map, geodesic_distance, log_map};
use geoclust::sparse::{solve_sparse_code, SolverOptions, SparseCodeProblem};
use geoclust::ManifoldPoint;
use geoclust_bench::report::{summary_rows, time_ratios, SummaryRow};
use geoclust_bench::runner::WORKERS_ENV;
use geoclust_bench::{run_benchmark, run_sweep, ExperimentConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: &[String], detail: String) -> Self {
        let detail = if failures.is_empty() {
            detail
        } else {
            format!("{detail}; failing: {}", failures.join("; "))
        };
        Outcome {
            pass: failures.is_empty(),
            detail,
        }
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let mut c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    c.experiment.output = None;
    c
}

fn mean(rows: &[SummaryRow], dataset: &str, sigma: Option<f64>, method: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.dataset == dataset && r.sigma == sigma && r.method == method && r.failures == 0)
        .map(|r| r.mean)
}

struct Rates {
    rows: Vec<SummaryRow>,
    cells: usize,
    seconds: f64,
}

fn rates_run(cache: &mut Option<Rates>) -> &Rates {
    cache.get_or_insert_with(|| {
        let c = config("rates.toml");
        let start = Instant::now();
        let rows = run_benchmark(&c).expect("rates run");
        Rates {
            cells: rows.len(),
            rows: summary_rows(&rows),
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

fn criterion_1(cache: &mut Option<Rates>) -> Outcome {
    let t = rates_run(cache);
    let targets = [
        ("I", 1.00),
        ("II", 0.98),
        ("III", 0.98),
        ("IV", 0.95),
        ("V", 0.98),
        ("VI", 0.96),
    ];
    let mut failures = Vec::new();
    let mut means = Vec::new();
    for (ds, target) in targets {
        let Some(gct) = mean(&t.rows, ds, None, "GCT") else {
            failures.push(format!("{ds} GCT has failed cells"));
            continue;
        };
        means.push(format!("{ds} {gct:.3}"));
        if (gct - target).abs() > 0.05 {
            failures.push(format!("{ds} GCT {gct:.3} not within 0.05 of {target:.2}"));
        }
        for r in t.rows.iter().filter(|r| r.dataset == ds && r.method != "GCT") {
            if r.failures > 0 || r.mean > gct {
                failures.push(format!("{ds} GCT {gct:.3} < {} {:.3}", r.method, r.mean));
            }
        }
    }
    Outcome::new(
        &failures,
        format!("GCT means {} ({} cells, {:.0} s)", means.join(", "), t.cells, t.seconds),
    )
}

fn criterion_2(cache: &mut Option<Rates>) -> Outcome {
    let t = rates_run(cache);
    let mut failures = Vec::new();
    let mut seen = Vec::new();
    for (method, bound, datasets) in [
        ("EKM", 0.70, &["I", "II", "IV", "V"][..]),
        ("SCR", 0.75, &["I", "V", "VI"][..]),
    ] {
        for &ds in datasets {
            match mean(&t.rows, ds, None, method) {
                Some(m) => {
                    seen.push(format!("{method} {ds} {m:.3}"));
                    if m > bound {
                        failures.push(format!("{method} {ds} {m:.3} > {bound:.2}"));
                    }
                }
                None => failures.push(format!("{method} {ds} has failed cells")),
            }
        }
    }
    Outcome::new(&failures, seen.join(", "))
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut seen = Vec::new();

    let ii = summary_rows(&run_sweep(&config("sweep_grassmann.toml")).expect("II sweep"));
    match mean(&ii, "II", Some(0.1), "GCT") {
        Some(m) => {
            seen.push(format!("II GCT@0.1 {m:.3}"));
            if m < 0.90 {
                failures.push(format!("II GCT@0.1 {m:.3} < 0.90"));
            }
        }
        None => failures.push("II GCT@0.1 missing or failed".into()),
    }

    let vi = summary_rows(&run_sweep(&config("sweep_sphere.toml")).expect("VI sweep"));
    for sigma in [0.025, 0.05, 0.075, 0.1] {
        let (Some(gct), Some(smc)) = (mean(&vi, "VI", Some(sigma), "GCT"), mean(&vi, "VI", Some(sigma), "SMC")) else {
            failures.push(format!("VI @{sigma} missing or failed"));
            continue;
        };
        seen.push(format!("VI@{sigma} GCT {gct:.3} SMC-lin {smc:.3}"));
        if gct < 0.85 {
            failures.push(format!("VI GCT@{sigma} {gct:.3} < 0.85"));
        }
        if sigma > 0.05 && smc >= 0.7 {
            failures.push(format!("VI SMC-lin@{sigma} {smc:.3} >= 0.70"));
        }
    }
    Outcome::new(&failures, seen.join(", "))
}

fn criterion_4() -> Outcome {
    // Serial by config; timing is per cell.
    let c = config("runtime.toml");
    let rows = run_benchmark(&c).expect("runtime run");
    let ratios = time_ratios(&rows, &c);
    let mut failures = Vec::new();
    let mut seen = Vec::new();
    for r in &ratios {
        // "SMC" uses the benchmark's weight mode per dataset; "SMC-exp" is
        // reported for reference.
        seen.push(format!("{} GCT/{} {:.2}", r.dataset, r.smc, r.ratio));
        if r.smc == "SMC" && (r.ratio.is_nan() || r.ratio > 1.5) {
            failures.push(format!("{} ratio {:.2} > 1.5", r.dataset, r.ratio));
        }
    }
    if !rows.iter().all(|r| r.error.is_none()) {
        failures.push("failed cells".into());
    }
    Outcome::new(&failures, seen.join(", "))
}

fn haar_rotation(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(3, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..3 {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

fn criterion_5() -> Outcome {
    let params = TgctParams {
        r: 0.3,
        eta: 0.15,
        sigma_d: 0.5,
        sigma_a: 0.4,
    };
    let mut failures = Vec::new();
    let mut rates = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = haar_rotation(&mut rng);
        // Circles in the xy and xz planes, crossing at ±x.
        let mut raw = Vec::new();
        for circle in 0..2 {
            for _ in 0..100 {
                let t = 2.0 * PI * rng.random::<f64>();
                let v = if circle == 0 {
                    DVector::from_vec(vec![t.cos(), t.sin(), 0.0])
                } else {
                    DVector::from_vec(vec![t.cos(), 0.0, t.sin()])
                };
                raw.push(&q * v);
            }
        }
        let points: Vec<ManifoldPoint> = raw
            .iter()
            .map(|v| ManifoldPoint::sphere(v.as_slice()).unwrap())
            .collect();
        let crossing = q.column(0).into_owned();
        let keep: Vec<usize> = (0..raw.len())
            .filter(|&i| {
                let d = raw[i].dot(&crossing).clamp(-1.0, 1.0).acos();
                d > params.r && PI - d > params.r
            })
            .collect();
        let truth = ClusterLabels::new((0..200).map(|i| i / 100).collect(), 2).unwrap();
        let out = run_method(&Method::Tgct(params), &points, 2, seed).expect("tgct");
        let rate = clustering_rate(&out.labels.subset(&keep), &truth.subset(&keep)).unwrap();
        rates.push(format!("{rate:.3}"));
        if rate < 1.0 {
            failures.push(format!("seed {seed} rate {rate:.3} on {} points", keep.len()));
        }
    }
    Outcome::new(&failures, format!("subset rates {}", rates.join(" ")))
}

// Geometry oracles, written independently of the library's routines.

fn sphere_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    2.0 * ((x - y).norm() / 2.0).min(1.0).asin()
}

fn grassmann_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let svd = (x.transpose() * y).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let (a, b) = (x * u, y * vt.transpose());
    (0..a.ncols())
        .map(|i| 2.0 * ((a.column(i) - b.column(i)).norm() / 2.0).min(1.0).asin())
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt()
}

fn spd_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let l = x.clone().cholesky().expect("spd").l();
    let li = l.clone().try_inverse().unwrap();
    let m = &li * y * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    m.symmetric_eigenvalues()
        .iter()
        .map(|v| v.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}

fn oracle_distance(x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
    match x.manifold() {
        geoclust::ManifoldId::Sphere { .. } => sphere_distance(x.data(), y.data()),
        geoclust::ManifoldId::Grassmannian { .. } => grassmann_distance(x.data(), y.data()),
        geoclust::ManifoldId::Spd { .. } => spd_distance(x.data(), y.data()),
    }
}

fn random_point(kind: usize, rng: &mut ChaCha8Rng) -> ManifoldPoint {
    let mut gauss = |r, c| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    match kind {
        0 => ManifoldPoint::sphere(gauss(3, 1).as_slice()).unwrap(),
        1 => ManifoldPoint::grassmannian(gauss(5, 2).qr().q()).unwrap(),
        _ => {
            let a = gauss(3, 3);
            ManifoldPoint::spd(&a * a.transpose() + DMatrix::identity(3, 3) * 0.5).unwrap()
        }
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    let names = ["sphere", "grassmannian", "spd"];
    let (mut worst_roundtrip, mut worst_norm) = (0.0_f64, 0.0_f64);
    for (kind, name) in names.iter().enumerate() {
        for _ in 0..100 {
            let x = random_point(kind, &mut rng);
            let y = random_point(kind, &mut rng);
            let v = log_map(&x, &y).expect("log");
            let z = exp_map(&x, &v).expect("exp");
            let d = oracle_distance(&x, &y);
            let roundtrip = oracle_distance(&z, &y);
            let norm_err = (v.norm().unwrap() - d)
                .abs()
                .max((geodesic_distance(&x, &y).unwrap() - d).abs());
            worst_roundtrip = worst_roundtrip.max(roundtrip);
            worst_norm = worst_norm.max(norm_err);
            if roundtrip >= 1e-8 {
                failures.push(format!("{name} roundtrip {roundtrip:.1e}"));
            }
            if norm_err >= 1e-10 {
                failures.push(format!("{name} |‖log‖ - d| {norm_err:.1e}"));
            }
        }
    }

    let mut worst_gauge = 0.0_f64;
    for _ in 0..100 {
        let x = random_point(1, &mut rng);
        let y = random_point(1, &mut rng);
        let r = random_point(1, &mut rng).data().rows(0, 2).into_owned().qr().q();
        let s = random_point(1, &mut rng).data().rows(0, 2).into_owned().qr().q();
        let xr = ManifoldPoint::grassmannian(x.data() * &r).unwrap();
        let ys = ManifoldPoint::grassmannian(y.data() * &s).unwrap();
        let dd = (geodesic_distance(&xr, &ys).unwrap() - geodesic_distance(&x, &y).unwrap()).abs();
        let dl = (log_map(&xr, &ys).unwrap().data() - log_map(&x, &y).unwrap().data() * &r).amax();
        worst_gauge = worst_gauge.max(dd).max(dl);
    }
    if worst_gauge >= 1e-9 {
        failures.push(format!("gauge {worst_gauge:.1e}"));
    }

    let mut worst_affine = 0.0_f64;
    let mut tested = 0;
    while tested < 100 {
        let a = DMatrix::identity(3, 3) + DMatrix::from_fn(3, 3, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let sv = a.singular_values();
        if sv.min() <= 0.0 || sv.max() / sv.min() > 10.0 {
            continue;
        }
        tested += 1;
        let x = random_point(2, &mut rng);
        let y = random_point(2, &mut rng);
        let move_ = |p: &ManifoldPoint| ManifoldPoint::spd(&a * p.data() * a.transpose()).unwrap();
        let dd = (geodesic_distance(&move_(&x), &move_(&y)).unwrap() - geodesic_distance(&x, &y).unwrap()).abs();
        let moved_log = &a * log_map(&x, &y).unwrap().data() * a.transpose();
        let dl = (log_map(&move_(&x), &move_(&y)).unwrap().data() - moved_log).amax();
        worst_affine = worst_affine.max(dd).max(dl);
    }
    if worst_affine >= 1e-8 {
        failures.push(format!("affine {worst_affine:.1e}"));
    }

    let mut worst_gram = 0.0_f64;
    for (dim, k) in [(3, 20), (20, 3), (6, 6), (9, 4), (4, 9)] {
        for _ in 0..10 {
            let x = DMatrix::from_fn(dim, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let full = &x * x.transpose();
            let mut dense: Vec<f64> = full.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
            dense.sort_by(|a, b| b.total_cmp(a));
            let g = gram_eigen(&x).unwrap();
            for (i, v) in g.values.iter().enumerate() {
                worst_gram = worst_gram.max((v - dense[i]).abs());
            }
            for (c, col) in g.vectors.column_iter().enumerate() {
                worst_gram = worst_gram.max((&full * col - col * g.values[c]).amax());
            }
        }
    }
    if worst_gram >= 1e-8 {
        failures.push(format!("gram {worst_gram:.1e}"));
    }

    let mut worst_tangent = 0.0_f64;
    for _ in 0..5 {
        let q = haar_rotation(&mut rng);
        let ts: Vec<f64> = (0..300).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        let points: Vec<ManifoldPoint> = ts
            .iter()
            .map(|t| ManifoldPoint::sphere((&q * DVector::from_vec(vec![t.cos(), t.sin(), 0.0])).as_slice()).unwrap())
            .collect();
        let nbhd = build_neighborhoods(&pairwise_distances(&points).unwrap(), 0.1);
        for (i, t) in ts.iter().enumerate() {
            if nbhd.neighbors(i).len() < 2 {
                continue;
            }
            let cov = local_covariance(&points, &nbhd, i).unwrap();
            let est = TangentEstimate::from_covariance(&cov, estimate_dimension_gap(&cov.eigenvalues, 2));
            let tangent = &q * DVector::from_vec(vec![-t.sin(), t.cos(), 0.0]);
            // Sphere log coordinates are ambient, so the true tangent applies directly.
            let angle = if est.dim() == 1 {
                est.angle(&tangent).min(PI / 2.0)
            } else {
                PI / 2.0
            };
            worst_tangent = worst_tangent.max(angle);
        }
    }
    if worst_tangent >= 0.05 {
        failures.push(format!("tangent angle {worst_tangent:.3}"));
    }

    Outcome::new(
        &failures,
        format!(
            "roundtrip {worst_roundtrip:.1e}, ‖log‖ {worst_norm:.1e}, gauge {worst_gauge:.1e}, affine {worst_affine:.1e}, \
             gram {worst_gram:.1e}, tangent {worst_tangent:.1e}"
        ),
    )
}

/// Exact minimum for a few candidates: on its support with fixed signs the
/// optimum solves an equality-constrained least-squares system, so enumerate
/// every support and sign pattern and keep the best feasible objective.
fn exact_code_objective(p: &SparseCodeProblem) -> f64 {
    let k = p.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let m = support.len();
        for signs in 0u32..(1 << m) {
            let sign = |a: usize| if signs & (1 << a) != 0 { -1.0 } else { 1.0 };
            let y = DMatrix::from_fn(p.query.len(), m, |r, a| p.candidates[(r, support[a])]);
            let mut kkt = DMatrix::zeros(m + 1, m + 1);
            kkt.view_mut((0, 0), (m, m)).copy_from(&(y.transpose() * &y * 2.0));
            let mut rhs = DVector::zeros(m + 1);
            let yq = y.transpose() * &p.query;
            for a in 0..m {
                kkt[(a, m)] = 1.0;
                kkt[(m, a)] = 1.0;
                rhs[a] = 2.0 * yq[a] - p.weights[support[a]] * sign(a);
            }
            rhs[m] = 1.0;
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let mut s = vec![0.0; k];
            for a in 0..m {
                s[support[a]] = sol[a];
            }
            best = best.min(p.objective(&s));
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let traced = SolverOptions {
        record_trace: true,
        ..SolverOptions::default()
    };
    let mut failures = Vec::new();
    let (mut worst_gap, mut worst_sum) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let y = DMatrix::from_fn(4, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let p = SparseCodeProblem::new(q, y, 1.0);
        let code = solve_sparse_code(&p, &traced).expect("solve");
        worst_gap = worst_gap.max((code.objective - exact_code_objective(&p)).abs());
        worst_sum = worst_sum.max((code.coefficients.iter().sum::<f64>() - 1.0).abs());
        if !code.trace.windows(2).all(|w| w[1] <= w[0]) {
            failures.push("non-monotone trace".into());
        }
    }
    // Larger problems for the constraint and the traces.
    for _ in 0..200 {
        let k = rng.random_range(2..40);
        let dim = rng.random_range(2..10);
        let y = DMatrix::from_fn(dim, k, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let q = DVector::from_fn(dim, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let code = solve_sparse_code(&SparseCodeProblem::new(q, y, 0.5), &traced).expect("solve");
        worst_sum = worst_sum.max((code.coefficients.iter().sum::<f64>() - 1.0).abs());
        if !code.trace.windows(2).all(|w| w[1] <= w[0]) {
            failures.push("non-monotone trace".into());
        }
    }
    if worst_gap > 1e-6 {
        failures.push(format!("objective gap {worst_gap:.1e}"));
    }
    if worst_sum >= 1e-10 {
        failures.push(format!("constraint residual {worst_sum:.1e}"));
    }
    failures.dedup();
    Outcome::new(
        &failures,
        format!("objective gap {worst_gap:.1e}, constraint residual {worst_sum:.1e}"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    for instance in 0..50 {
        let k = rng.random_range(2..=4);
        let mut truth = Vec::new();
        for c in 0..k {
            let size = rng.random_range(3..=15);
            truth.extend(std::iter::repeat_n(c, size));
        }
        let n = truth.len();
        // Random node order; each component gets a random spanning tree plus
        // random extra edges.
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut w = DMatrix::zeros(n, n);
        let add = |w: &mut DMatrix<f64>, a: usize, b: usize, v: f64| {
            w[(order[a], order[b])] = v;
            w[(order[b], order[a])] = v;
        };
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| truth[i] == c).collect();
            for (m, &node) in members.iter().enumerate().skip(1) {
                let parent = members[rng.random_range(0..m)];
                let v = rng.random_range(0.1..1.0);
                add(&mut w, node, parent, v);
            }
            for a in 0..members.len() {
                for b in a + 1..members.len() {
                    if rng.random::<f64>() < 0.3 {
                        let v = rng.random_range(0.1..1.0);
                        add(&mut w, members[a], members[b], v);
                    }
                }
            }
        }
        let mut labels = vec![0; n];
        for (i, &node) in order.iter().enumerate() {
            labels[node] = truth[i];
        }
        let truth = ClusterLabels::new(labels, k).unwrap();
        let pred = spectral_cluster(&AffinityMatrix::new(w).unwrap(), k, instance).expect("spectral");
        let rate = clustering_rate(&pred, &truth).unwrap();
        if rate < 1.0 {
            failures.push(format!("instance {instance} (K = {k}) rate {rate:.3}"));
        }
    }
    Outcome::new(&failures, format!("{} of 50 recovered", 50 - failures.len()))
}

fn main() -> ExitCode {
    // The configs fix the worker count; timings depend on it.
    std::env::remove_var(WORKERS_ENV);
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let names = [
        "rate regression",
        "baseline sanity",
        "noise robustness",
        "runtime ratio",
        "TGCT on two great circles",
        "geometry suite",
        "solver suite",
        "spectral exactness",
    ];
    let mut cache = None;
    let mut failed = 0;
    for (i, name) in names.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let outcome = match n {
            1 => criterion_1(&mut cache),
            2 => criterion_2(&mut cache),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            _ => criterion_8(),
        };
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {n} ({name}): {} | {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

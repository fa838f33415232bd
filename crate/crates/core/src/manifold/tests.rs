use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_point(rng: &mut ChaCha8Rng, m: ManifoldId) -> ManifoldPoint {
    let (r, c) = m.ambient_shape();
    let g = gaussian(rng, r, c);
    let data = match m {
        ManifoldId::Spd { p } => &g * g.transpose() + DMatrix::identity(p, p) * 0.5,
        _ => g,
    };
    ManifoldPoint::new(m, data).unwrap()
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    crate::linalg::orthonormalize(&gaussian(rng, n, n))
}

#[test]
fn sphere_log_example() {
    let x = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
    let y = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
    let v = log_map(&x, &y).unwrap();
    let expected = DMatrix::from_column_slice(3, 1, &[FRAC_PI_2, 0.0, 0.0]);
    assert!((v.data() - expected).norm() < 1e-15);
    assert!((geodesic_distance(&x, &y).unwrap() - FRAC_PI_2).abs() < 1e-15);

    let back = exp_map(&x, &v).unwrap();
    assert!((back.data() - y.data()).norm() < 1e-15);
}

#[test]
fn spd_log_exp_at_identity() {
    let id = ManifoldPoint::spd(DMatrix::identity(3, 3)).unwrap();
    let e2 = std::f64::consts::E.powi(2);
    let target = ManifoldPoint::spd(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![e2, 1.0, 1.0]))).unwrap();
    let v = log_map(&id, &target).unwrap();
    let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0, 0.0]));
    assert!((v.data() - &expected).norm() < 1e-12);
    assert!((geodesic_distance(&id, &target).unwrap() - 2.0).abs() < 1e-12);

    let back = exp_map(&id, &v).unwrap();
    assert!((back.data() - target.data()).norm() < 1e-12);
}

#[test]
fn grassmann_line_example() {
    let x = ManifoldPoint::grassmannian(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
    let y = ManifoldPoint::grassmannian(DMatrix::from_column_slice(2, 1, &[FRAC_PI_4.cos(), FRAC_PI_4.sin()])).unwrap();
    let v = log_map(&x, &y).unwrap();
    assert!(v.data()[(0, 0)].abs() < 1e-15);
    assert!((v.data()[(1, 0)] - FRAC_PI_4).abs() < 1e-15);
    assert!((v.norm().unwrap() - FRAC_PI_4).abs() < 1e-15);
    assert!((geodesic_distance(&x, &y).unwrap() - FRAC_PI_4).abs() < 1e-15);
}

#[test]
fn exp_of_zero_is_base() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in [
        ManifoldId::Sphere { dim: 2 },
        ManifoldId::Grassmannian { p: 6, l: 2 },
        ManifoldId::Spd { p: 3 },
    ] {
        let x = random_point(&mut rng, m);
        let y = exp_map(&x, &TangentVector::zero(&x)).unwrap();
        assert!((y.data() - x.data()).norm() < 1e-14, "{m}");
        assert!(log_map(&x, &x).unwrap().data().norm() < 1e-12, "{m}");
        assert!(geodesic_distance(&x, &x).unwrap() < 1e-7, "{m}");
    }
}

#[test]
fn sphere_cut_locus() {
    let x = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
    let y = ManifoldPoint::sphere(&[0.0, 0.0, -1.0]).unwrap();
    assert!(matches!(log_map(&x, &y), Err(Error::CutLocus)));
    assert_eq!(geodesic_distance(&x, &y).unwrap(), PI);
}

#[test]
fn grassmann_cut_locus() {
    let x = ManifoldPoint::grassmannian(DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
    let y = ManifoldPoint::grassmannian(DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])).unwrap();
    assert!(matches!(log_map(&x, &y), Err(Error::CutLocus)));
    assert!((geodesic_distance(&x, &y).unwrap() - FRAC_PI_2).abs() < 1e-15);
}

#[test]
fn mismatch_and_tangency_errors() {
    let x = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
    let y = ManifoldPoint::sphere(&[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert!(matches!(log_map(&x, &y), Err(Error::ManifoldMismatch(..))));
    assert!(matches!(geodesic_distance(&x, &y), Err(Error::ManifoldMismatch(..))));

    let normal = TangentVector::new(x.clone(), DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 0.5])).unwrap();
    assert!(matches!(exp_map(&x, &normal), Err(Error::TangencyViolation(_))));
}

#[test]
fn projection_examples() {
    let x = ManifoldPoint::sphere(&[0.0, 0.0, 1.0]).unwrap();
    let p = project_to_tangent(&x, &DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 5.0])).unwrap();
    assert_eq!(p.data().norm(), 0.0);
    let w = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.0]);
    assert_eq!(project_to_tangent(&x, &w).unwrap().data(), &w);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_point(&mut rng, ManifoldId::Grassmannian { p: 6, l: 2 });
    let a = gaussian(&mut rng, 2, 2);
    let killed = project_to_tangent(&g, &(g.data() * a)).unwrap();
    assert!(killed.data().norm() < 1e-14);

    let w = gaussian(&mut rng, 6, 2);
    let once = project_to_tangent(&g, &w).unwrap();
    let twice = project_to_tangent(&g, once.data()).unwrap();
    assert!((once.data() - twice.data()).norm() < 1e-14);
    assert!(once.tangency_residual() < 1e-14);

    let s = random_point(&mut rng, ManifoldId::Spd { p: 3 });
    assert!(matches!(project_to_tangent(&s, &w), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn validation_diagnostics() {
    let ok = ManifoldPoint::from_raw(
        ManifoldId::Sphere { dim: 2 },
        DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
    )
    .unwrap();
    assert!(validate(&ok).is_ok());

    let long = ManifoldPoint::from_raw(
        ManifoldId::Sphere { dim: 2 },
        DMatrix::from_column_slice(3, 1, &[0.0, 1.1, 0.0]),
    )
    .unwrap();
    let diag = validate(&long).unwrap_err();
    match diag.violations.as_slice() {
        [Violation::NormError(e)] => assert!((e - 0.1).abs() < 1e-12),
        other => panic!("unexpected {other:?}"),
    }

    let indefinite = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, -0.01]));
    let bad = ManifoldPoint::from_raw(ManifoldId::Spd { p: 3 }, indefinite.clone()).unwrap();
    let diag = validate(&bad).unwrap_err();
    assert!(
        matches!(diag.violations[0], Violation::NotPositiveDefinite { min_eigenvalue } if (min_eigenvalue + 0.01).abs() < 1e-12)
    );
    assert!(ManifoldPoint::spd(indefinite).is_err());

    let skew = ManifoldPoint::from_raw(
        ManifoldId::Grassmannian { p: 3, l: 2 },
        DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
    )
    .unwrap();
    assert!(matches!(
        validate(&skew).unwrap_err().violations[0],
        Violation::OrthonormalityError(_)
    ));
}

#[test]
fn constructors_normalize() {
    let x = ManifoldPoint::sphere(&[3.0, 4.0, 0.0]).unwrap();
    assert!(validate(&x).is_ok());
    let g = ManifoldPoint::grassmannian(DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 2.0, 1.0])).unwrap();
    assert!(validate(&g).is_ok());
    let s = ManifoldPoint::spd(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.3, 2.0])).unwrap();
    assert!(validate(&s).is_ok());
    assert!(ManifoldPoint::sphere(&[0.0, 0.0]).is_err());
    assert!(ManifoldPoint::grassmannian(DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0])).is_err());
    assert!(ManifoldId::Grassmannian { p: 2, l: 2 }.check().is_err());
}

/// Pairs of random points with distance safely inside the injectivity radius.
fn close_pairs(rng: &mut ChaCha8Rng, m: ManifoldId, count: usize) -> Vec<(ManifoldPoint, ManifoldPoint)> {
    let mut out = Vec::new();
    while out.len() < count {
        let x = random_point(rng, m);
        let y = random_point(rng, m);
        let ok = match m {
            ManifoldId::Sphere { .. } => geodesic_distance(&x, &y).unwrap() < 0.95 * PI,
            ManifoldId::Grassmannian { .. } => principal_angles(&x, &y).unwrap().iter().all(|&t| t < 0.95 * FRAC_PI_2),
            ManifoldId::Spd { .. } => true,
        };
        if ok {
            out.push((x, y));
        }
    }
    out
}

const MANIFOLDS: [ManifoldId; 3] = [
    ManifoldId::Sphere { dim: 2 },
    ManifoldId::Grassmannian { p: 6, l: 2 },
    ManifoldId::Spd { p: 3 },
];

#[test]
fn log_exp_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in MANIFOLDS {
        for (x, y) in close_pairs(&mut rng, m, 100) {
            let v = log_map(&x, &y).unwrap();
            let z = exp_map(&x, &v).unwrap();
            let w = log_map(&x, &z).unwrap();
            assert!((w.data() - v.data()).norm() < 1e-8, "{m}");
            assert!(geodesic_distance(&z, &y).unwrap() < 1e-7, "{m}");
        }
    }
}

#[test]
fn distance_matches_independent_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (x, y) in close_pairs(&mut rng, ManifoldId::Grassmannian { p: 6, l: 2 }, 50) {
        let v = log_map(&x, &y).unwrap();
        // Principal angles as arccos of the singular values of XᵀY.
        let sv = (x.data().transpose() * y.data()).singular_values();
        let angles: f64 = sv.iter().map(|c| c.min(1.0).acos().powi(2)).sum::<f64>().sqrt();
        assert!((v.norm().unwrap() - angles).abs() < 1e-10);
        assert!((geodesic_distance(&x, &y).unwrap() - angles).abs() < 1e-10);
    }
    for (x, y) in close_pairs(&mut rng, ManifoldId::Spd { p: 3 }, 50) {
        // Generalized eigenvalues of (y, x) via the Cholesky factor of x.
        let chol = x.data().clone().cholesky().unwrap();
        let l_inv = chol.l().try_inverse().unwrap();
        let c = &l_inv * y.data() * l_inv.transpose();
        let eig = nalgebra::SymmetricEigen::new((&c + c.transpose()) * 0.5);
        let d: f64 = eig.eigenvalues.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt();
        let v = log_map(&x, &y).unwrap();
        assert!((v.norm().unwrap() - d).abs() < 1e-10);
        assert!((geodesic_distance(&x, &y).unwrap() - d).abs() < 1e-10);
    }
    for (x, y) in close_pairs(&mut rng, ManifoldId::Sphere { dim: 2 }, 50) {
        let d = x.data().dot(y.data()).clamp(-1.0, 1.0).acos();
        assert!((log_map(&x, &y).unwrap().norm().unwrap() - d).abs() < 1e-10);
    }
}

#[test]
fn distance_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for m in MANIFOLDS {
        for _ in 0..50 {
            let (a, b, c) = (
                random_point(&mut rng, m),
                random_point(&mut rng, m),
                random_point(&mut rng, m),
            );
            let ab = geodesic_distance(&a, &b).unwrap();
            let ba = geodesic_distance(&b, &a).unwrap();
            let bc = geodesic_distance(&b, &c).unwrap();
            let ac = geodesic_distance(&a, &c).unwrap();
            assert!((ab - ba).abs() < 1e-10, "{m}");
            assert!(ab >= 0.0);
            assert!(ac <= ab + bc + 1e-8, "{m}");
        }
    }
}

#[test]
fn grassmann_gauge_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (x, y) in close_pairs(&mut rng, ManifoldId::Grassmannian { p: 6, l: 2 }, 50) {
        let r1 = random_orthogonal(&mut rng, 2);
        let r2 = random_orthogonal(&mut rng, 2);
        let m = x.manifold();
        let xr = ManifoldPoint::from_raw(m, x.data() * &r1).unwrap();
        let yr = ManifoldPoint::from_raw(m, y.data() * &r2).unwrap();
        let d = geodesic_distance(&x, &y).unwrap();
        assert!((geodesic_distance(&xr, &yr).unwrap() - d).abs() < 1e-9);
        // Rotating the target leaves the log unchanged; rotating the base
        // rotates its representation by the same gauge.
        let v = log_map(&x, &y).unwrap();
        assert!((log_map(&x, &yr).unwrap().data() - v.data()).norm() < 1e-9);
        assert!((log_map(&xr, &y).unwrap().data() - v.data() * &r1).norm() < 1e-9);
        assert!(geodesic_distance(&x, &xr).unwrap() < 1e-7);
    }
}

#[test]
fn spd_affine_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = ManifoldId::Spd { p: 3 };
    for _ in 0..50 {
        let (x, y) = (random_point(&mut rng, m), random_point(&mut rng, m));
        let a = gaussian(&mut rng, 3, 3) + DMatrix::identity(3, 3) * 0.1;
        let xa = ManifoldPoint::spd(a.transpose() * x.data() * &a).unwrap();
        let ya = ManifoldPoint::spd(a.transpose() * y.data() * &a).unwrap();
        let d = geodesic_distance(&x, &y).unwrap();
        assert!((geodesic_distance(&xa, &ya).unwrap() - d).abs() < 1e-8 * d.max(1.0));
    }
}

#[test]
fn coords_are_isometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for m in MANIFOLDS {
        let (x, y) = close_pairs(&mut rng, m, 1).pop().unwrap();
        let chart = Chart::new(&x).unwrap();
        let coords = chart.log_coords(&y).unwrap();
        let v = chart.log(&y).unwrap();
        assert!((coords.norm() - chart.distance(&y).unwrap()).abs() < 1e-12, "{m}");
        assert!((chart.coords_of(v.data()) - &coords).norm() < 1e-10, "{m}");
        assert!((chart.ambient_of(&coords) - v.data()).norm() < 1e-10, "{m}");
    }
}

#[test]
fn log_pair_matches_one_sided_logs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for m in MANIFOLDS {
        for (x, y) in close_pairs(&mut rng, m, 100) {
            let cx = Chart::new(&x).unwrap();
            let cy = Chart::new(&y).unwrap();
            let (fwd, back) = cx.log_pair_coords(&cy).unwrap();
            assert!((fwd - cx.log_coords(&y).unwrap()).norm() < 1e-9, "{m}");
            assert!((back - cy.log_coords(&x).unwrap()).norm() < 1e-9, "{m}");
        }
    }
}

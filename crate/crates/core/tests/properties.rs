use geoclust::cluster::{spectral_embedding, AffinityMatrix};
use geoclust::linalg::{sym_eigen_desc, Tridiagonal};
use geoclust::manifold::{exp_map, geodesic_distance, log_map, validate};
use geoclust::sparse::{solve_sparse_code, SolverOptions, SparseCodeProblem};
use geoclust::synth::{generate, DatasetId, DatasetSpec};
use geoclust::ManifoldPoint;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn point(kind: usize, rng: &mut ChaCha8Rng) -> ManifoldPoint {
    match kind {
        0 => ManifoldPoint::sphere(gauss(rng, 4, 1).as_slice()).unwrap(),
        1 => ManifoldPoint::grassmannian(gauss(rng, 6, 3).qr().q()).unwrap(),
        _ => {
            let a = gauss(rng, 3, 3);
            ManifoldPoint::spd(&a * a.transpose() + DMatrix::identity(3, 3) * 0.2).unwrap()
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_symmetric_and_matches_log_norm(kind in 0usize..3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (point(kind, &mut rng), point(kind, &mut rng));
        let d = geodesic_distance(&x, &y).unwrap();
        prop_assert!((d - geodesic_distance(&y, &x).unwrap()).abs() < 1e-9);
        prop_assert!((log_map(&x, &y).unwrap().norm().unwrap() - d).abs() < 1e-9);
        prop_assert!(geodesic_distance(&x, &x).unwrap() < 1e-7);
    }

    #[test]
    fn exp_stays_on_the_manifold(kind in 0usize..3, seed in any::<u64>(), t in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (point(kind, &mut rng), point(kind, &mut rng));
        let v = log_map(&x, &y).unwrap();
        let scaled = geoclust::TangentVector::new(x.clone(), v.data() * t).unwrap();
        let z = exp_map(&x, &scaled).unwrap();
        prop_assert!(validate(&z).is_ok());
        // Points along the geodesic split the distance.
        let (a, b) = (geodesic_distance(&x, &z).unwrap(), geodesic_distance(&z, &y).unwrap());
        prop_assert!((a + b - geodesic_distance(&x, &y).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn tridiagonal_top_pairs_match_dense(n in 2usize..40, k in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = gauss(&mut rng, n, n);
        let m = (&a + a.transpose()) * 0.5;
        let (dense, _) = sym_eigen_desc(&m).unwrap();
        let t = Tridiagonal::new(&m);
        let values = t.top_eigenvalues(k.min(n), 1e-9);
        for (v, d) in values.iter().zip(&dense) {
            prop_assert!((v - d).abs() < 1e-10);
        }
        let u = t.eigenvectors(&values);
        for (c, &l) in values.iter().enumerate() {
            prop_assert!((&m * u.column(c) - u.column(c) * l).norm() < 1e-8);
        }
    }

    #[test]
    fn sparse_codes_are_feasible(k in 1usize..30, dim in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = gauss(&mut rng, dim, k) * 0.5;
        let q = DVector::from_fn(dim, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let p = SparseCodeProblem::new(q, y, 1.0);
        let code = solve_sparse_code(&p, &SolverOptions::default()).unwrap();
        prop_assert!((code.coefficients.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        // No single candidate does better.
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            prop_assert!(code.objective <= p.objective(&e) + 1e-9);
        }
    }

    #[test]
    fn embedding_is_permutation_equivariant(n in 4usize..30, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let w = (&w + w.transpose()) * 0.5;
        let w = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[(i, j)] });
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let wp = DMatrix::from_fn(n, n, |i, j| w[(perm[i], perm[j])]);
        let u = spectral_embedding(&AffinityMatrix::new(w).unwrap(), 2).unwrap();
        let up = spectral_embedding(&AffinityMatrix::new(wp).unwrap(), 2).unwrap();
        // Compare Gram matrices of the rows, which ignore the eigenvector basis.
        let g = &u * u.transpose();
        let gp = &up * up.transpose();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((gp[(i, j)] - g[(perm[i], perm[j])]).abs() < 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn datasets_are_deterministic_and_valid(id in prop::sample::select(DatasetId::ALL.to_vec()), seed in any::<u64>()) {
        let spec = DatasetSpec::new(id, seed).with_points_per_cluster(20);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        prop_assert_eq!(a.len(), 40);
        prop_assert!(a.points.iter().zip(&b.points).all(|(p, q)| p.data() == q.data()));
        prop_assert!(a.points.iter().all(|p| validate(p).is_ok()));
    }
}

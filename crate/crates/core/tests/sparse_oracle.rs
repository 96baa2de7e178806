use lgm::sparse::{constrain_moments, factorize, Constraints, SparseSym};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sparse SPD matrix: random off-diagonal pattern, diagonally dominant.
fn random_spd(n: usize, density: f64, seed: u64) -> SparseSym {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let mut rowabs = vec![0.0; n];
    for i in 0..n {
        for j in 0..i {
            if rng.gen::<f64>() < density {
                let v: f64 = rng.gen_range(-1.0..1.0);
                t.push((i, j, v));
                rowabs[i] += v.abs();
                rowabs[j] += v.abs();
            }
        }
    }
    for (i, r) in rowabs.iter().enumerate() {
        t.push((i, i, r + rng.gen_range(0.1..2.0)));
    }
    SparseSym::from_triplets(n, &t).unwrap()
}

fn dense(q: &SparseSym) -> DMatrix<f64> {
    let a = q.to_dense();
    DMatrix::from_fn(q.n(), q.n(), |i, j| a[i][j])
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logdet_matches_dense(n in 1usize..60, density in 0.0f64..0.3, seed in any::<u64>()) {
        let q = random_spd(n, density, seed);
        let f = factorize(&q, 0.0).unwrap();
        let want = dense(&q).cholesky().unwrap().l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>();
        prop_assert!(rel_close(f.logdet(), want, 1e-9));
    }

    #[test]
    fn solve_matches_dense(n in 1usize..60, density in 0.0f64..0.3, seed in any::<u64>()) {
        let q = random_spd(n, density, seed);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = factorize(&q, 0.0).unwrap().solve(&b).unwrap();
        let want = dense(&q).cholesky().unwrap().solve(&DVector::from_vec(b));
        for (got, w) in x.iter().zip(want.iter()) {
            prop_assert!(rel_close(*got, *w, 1e-9));
        }
    }

    #[test]
    fn partial_inverse_matches_dense(n in 1usize..60, density in 0.0f64..0.3, seed in any::<u64>()) {
        let q = random_spd(n, density, seed);
        let f = factorize(&q, 0.0).unwrap();
        let s = f.partial_inverse();
        let inv = dense(&q).try_inverse().unwrap();
        for (i, d) in s.diag().iter().enumerate() {
            prop_assert!(rel_close(*d, inv[(i, i)], 1e-9));
        }
        for (i, j, v) in s.entries() {
            prop_assert!(rel_close(v, inv[(i, j)], 1e-9));
        }
        // every nonzero of Q is in the pattern
        for (i, j, _) in q.iter() {
            prop_assert!(s.get(i, j).is_some());
        }
    }

    #[test]
    fn jitter_shifts_the_diagonal(n in 1usize..30, seed in any::<u64>()) {
        let q = random_spd(n, 0.2, seed);
        let f = factorize(&q, 0.5).unwrap();
        let shifted = dense(&q) + DMatrix::identity(n, n) * 0.5;
        let want = shifted.determinant().ln();
        prop_assert!(rel_close(f.logdet(), want, 1e-9));
    }

    #[test]
    fn constrained_moments_match_dense(n in 2usize..40, seed in any::<u64>()) {
        let q = random_spd(n, 0.2, seed);
        let f = factorize(&q, 0.0).unwrap();
        let mean: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let var = f.partial_inverse().diag();
        let mut c = Constraints::default();
        c.push_sum_to_zero(n, 0, n);
        let mut row = vec![0.0; n];
        row[0] = 1.0;
        row[n - 1] = -2.0;
        c.push(row, 0.3);
        let (m, v, corr) = constrain_moments(&f, &mean, &var, &c).unwrap();

        let sigma = dense(&q).try_inverse().unwrap();
        let cm = DMatrix::from_fn(2, n, |i, j| c.rows()[i][j]);
        let w = &cm * &sigma * cm.transpose();
        let winv = w.clone().try_inverse().unwrap();
        let mu = DVector::from_vec(mean.clone());
        let e = DVector::from_vec(c.rhs().to_vec());
        let want_m = &mu - &sigma * cm.transpose() * &winv * (&cm * &mu - e);
        let want_s = &sigma - &sigma * cm.transpose() * &winv * &cm * &sigma;
        for i in 0..n {
            prop_assert!(rel_close(m[i], want_m[i], 1e-9));
            prop_assert!((v[i] - want_s[(i, i)]).abs() < 1e-9 * (1.0 + sigma[(i, i)]));
        }
        prop_assert!(rel_close(corr.logdet_w(), w.determinant().ln(), 1e-9));
        for r in c.residual(&m) {
            prop_assert!(r.abs() < 1e-9);
        }
    }
}

#[test]
fn sum_to_zero_on_two_iid_nodes() {
    let f = factorize(&SparseSym::identity(2), 0.0).unwrap();
    let mut c = Constraints::default();
    c.push_sum_to_zero(2, 0, 2);
    let (m, v, _) = constrain_moments(&f, &[1.0, 1.0], &[1.0, 1.0], &c).unwrap();
    for i in 0..2 {
        assert!(m[i].abs() < 1e-12);
        assert!((v[i] - 0.5).abs() < 1e-12);
    }
}

#[test]
fn samples_have_the_right_covariance() {
    let q = random_spd(6, 0.5, 11);
    let f = factorize(&q, 0.0).unwrap();
    let sigma = dense(&q).try_inverse().unwrap();
    let mean = vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 40_000;
    let mut sum = DVector::zeros(6);
    let mut outer = DMatrix::zeros(6, 6);
    for _ in 0..m {
        let x = DVector::from_vec(f.sample(&mean, &mut rng).unwrap());
        sum += &x;
        outer += &x * x.transpose();
    }
    let xbar = sum / m as f64;
    let cov = outer / m as f64 - &xbar * xbar.transpose();
    for i in 0..6 {
        let se = (sigma[(i, i)] / m as f64).sqrt();
        assert!((xbar[i] - mean[i]).abs() < 5.0 * se);
        for j in 0..6 {
            let se = ((sigma[(i, i)] * sigma[(j, j)] + sigma[(i, j)].powi(2)) / m as f64).sqrt();
            assert!((cov[(i, j)] - sigma[(i, j)]).abs() < 5.0 * se);
        }
    }
}

#[test]
fn constrained_samples_satisfy_constraints() {
    let q = random_spd(8, 0.3, 3);
    let f = factorize(&q, 0.0).unwrap();
    let mut c = Constraints::default();
    c.push_sum_to_zero(8, 0, 8);
    let corr = lgm::sparse::ConstraintCorrection::new(&f, &c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let mut x = f.sample(&[0.0; 8], &mut rng).unwrap();
        corr.correct(&mut x);
        assert!(x.iter().sum::<f64>().abs() < 1e-10);
    }
}

fn tridiag3() -> SparseSym {
    SparseSym::from_triplets(
        3,
        &[
            (0, 0, 2.0),
            (1, 1, 2.0),
            (2, 2, 2.0),
            (1, 0, -1.0),
            (2, 1, -1.0),
        ],
    )
    .unwrap()
}

#[test]
fn small_closed_forms() {
    let f = factorize(&tridiag3(), 0.0).unwrap();
    assert!((f.logdet() - 4f64.ln()).abs() < 1e-12);
    let d = f.partial_inverse().diag();
    for (got, want) in d.iter().zip([0.75, 1.0, 0.75]) {
        assert!((got - want).abs() < 1e-12);
    }
    let s = factorize(&SparseSym::diagonal(&[2.0, 4.0]), 0.0)
        .unwrap()
        .partial_inverse()
        .diag();
    assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.25).abs() < 1e-15);
    let i3 = factorize(&SparseSym::identity(3), 0.0).unwrap();
    assert_eq!(i3.logdet(), 0.0);
    assert_eq!(i3.solve(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    let two = factorize(&SparseSym::identity(3).scaled(2.0), 0.0).unwrap();
    for v in two.solve(&[2.0, 2.0, 2.0]).unwrap() {
        assert!((v - 1.0).abs() < 1e-15);
    }
    assert!(i3.solve(&[1.0]).is_err());
}

#[test]
fn intrinsic_structure_is_not_positive_definite() {
    let rw1 = SparseSym::from_triplets(
        3,
        &[
            (0, 0, 1.0),
            (1, 1, 2.0),
            (2, 2, 1.0),
            (1, 0, -1.0),
            (2, 1, -1.0),
        ],
    )
    .unwrap();
    assert!(matches!(
        factorize(&rw1, 0.0),
        Err(lgm::Error::NotPositiveDefinite { .. })
    ));
    assert!(factorize(&rw1, 1e-5).is_ok());
}

#[test]
fn identity_draws_have_identity_covariance() {
    let n = 3;
    let f = factorize(&SparseSym::identity(n), 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = 100_000;
    let mut outer = DMatrix::<f64>::zeros(n, n);
    for _ in 0..m {
        let x = DVector::from_vec(f.sample(&[0.0; 3], &mut rng).unwrap());
        outer += &x * x.transpose();
    }
    let cov = outer / m as f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            // Var of x_i x_j is 2 on the diagonal and 1 off it
            let se = (if i == j { 2.0 } else { 1.0 } / m as f64).sqrt();
            assert!(
                (cov[(i, j)] - want).abs() < 3.0 * se,
                "cov[{i},{j}] = {}",
                cov[(i, j)]
            );
        }
    }
}

#[test]
fn four_identity_draws_have_sd_one_half() {
    let f = factorize(&SparseSym::identity(2).scaled(4.0), 0.0).unwrap();
    let m = 100_000;
    let draws: Vec<f64> = (0..m)
        .map(|k| f.sample_canonical(&[0.0, 0.0], k as u64).unwrap()[0])
        .collect();
    let var = draws.iter().map(|x| x * x).sum::<f64>() / m as f64;
    // sd of the variance estimate is √(2/m)·0.25
    assert!((var - 0.25).abs() < 3.0 * 0.25 * (2.0 / m as f64).sqrt());
    assert_eq!(
        f.sample_canonical(&[1.0, 2.0], 77).unwrap(),
        f.sample_canonical(&[1.0, 2.0], 77).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn logdet_does_not_depend_on_the_ordering(n in 1usize..50, seed in any::<u64>()) {
        let q = random_spd(n, 0.15, seed);
        let natural = std::sync::Arc::new(lgm::sparse::Symbolic::with_ordering(&q, (0..n).collect()));
        let reversed = std::sync::Arc::new(lgm::sparse::Symbolic::with_ordering(&q, (0..n).rev().collect()));
        let amd = factorize(&q, 0.0).unwrap().logdet();
        prop_assert!(rel_close(natural.factor(&q, 0.0).unwrap().logdet(), amd, 1e-9));
        prop_assert!(rel_close(reversed.factor(&q, 0.0).unwrap().logdet(), amd, 1e-9));
    }

    #[test]
    fn solve_inverts_multiply(n in 1usize..60, seed in any::<u64>()) {
        let q = random_spd(n, 0.1, seed);
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let back = factorize(&q, 0.0).unwrap().solve(&q.mul_vec(&x)).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn kriging_keeps_satisfied_means_and_shrinks_variances(n in 2usize..40, seed in any::<u64>()) {
        let q = random_spd(n, 0.2, seed);
        let f = factorize(&q, 0.0).unwrap();
        let mean: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let var = f.partial_inverse().diag();
        let mut c = Constraints::default();
        let row: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { 0.5 }).collect();
        let e = row.iter().zip(&mean).map(|(a, b)| a * b).sum();
        c.push(row, e);
        let (m, v, _) = constrain_moments(&f, &mean, &var, &c).unwrap();
        for i in 0..n {
            prop_assert!((m[i] - mean[i]).abs() < 1e-12);
            prop_assert!(v[i] <= var[i] + 1e-15);
        }
    }
}

use lgm::priors::{PriorSpec, Transform};
use proptest::prelude::*;

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(
        f,
        a,
        b,
        fa,
        fm,
        fb,
        (b - a) / 6.0 * (fa + 4.0 * fm + fb),
        tol,
        50,
    )
}

fn mass(spec: &PriorSpec, t: Transform, eig: Option<&[f64]>, lo: f64, hi: f64) -> f64 {
    let p = spec.resolve(t, eig).unwrap();
    // dense knots near 0 so narrow peaks are not skipped by the coarse pass
    let f = |x: f64| p.log_density(x).exp();
    let mut total = 0.0;
    let mut knots: Vec<f64> = (0..=40).map(|i| lo + (hi - lo) * i as f64 / 40.0).collect();
    knots.extend((-40..=40).map(|i| i as f64 * 0.5));
    knots.retain(|k| *k >= lo && *k <= hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    for w in knots.windows(2) {
        total += simpson(&f, w[0], w[1], 1e-10);
    }
    total
}

#[test]
fn pc_prec_integrates_to_one_over_precision() {
    let spec = PriorSpec::parse("pc.prec", &[1.0, 0.01]).unwrap();
    let p = spec.resolve(Transform::LogPrecision, None).unwrap();
    // density of τ itself, integrated on a log-spaced split of (0, ∞)
    let f = |tau: f64| {
        if tau <= 0.0 {
            0.0
        } else {
            p.log_density(tau.ln()).exp() / tau
        }
    };
    let mut total = 0.0;
    let mut a = 1e-30;
    while a < 1e30 {
        total += simpson(&f, a, a * 10.0, 1e-12);
        a *= 10.0;
    }
    assert!((total - 1.0).abs() < 1e-6, "mass {total}");
}

#[test]
fn every_prior_is_normalized_on_the_internal_scale() {
    let eig = [0.2, 0.5, 0.9, 1.3, 2.1, 3.0];
    let cases: Vec<(PriorSpec, Transform, Option<&[f64]>, f64, f64)> = vec![
        (
            PriorSpec::parse("pc.prec", &[1.0, 0.01]).unwrap(),
            Transform::LogPrecision,
            None,
            -40.0,
            80.0,
        ),
        (
            PriorSpec::parse("pc.prec", &[0.5, 0.01]).unwrap(),
            Transform::LogPrecision,
            None,
            -40.0,
            80.0,
        ),
        (
            PriorSpec::parse("loggamma", &[1.0, 5e-5]).unwrap(),
            Transform::LogPrecision,
            None,
            -60.0,
            20.0,
        ),
        (
            PriorSpec::parse("loggamma", &[1.0, 0.01]).unwrap(),
            Transform::LogPrecision,
            None,
            -60.0,
            20.0,
        ),
        (
            PriorSpec::parse("pc.cor1", &[0.9, 0.9]).unwrap(),
            Transform::Fisher,
            None,
            -60.0,
            80.0,
        ),
        (
            PriorSpec::parse("pc.cor1", &[0.5, 0.7]).unwrap(),
            Transform::Fisher,
            None,
            -60.0,
            80.0,
        ),
        // d grows like √|θ| here, so the tails are long
        (
            PriorSpec::parse("pc.cor0", &[0.5, 0.5]).unwrap(),
            Transform::Fisher,
            None,
            -3000.0,
            3000.0,
        ),
        (
            PriorSpec::parse("pc", &[0.5, 0.5]).unwrap(),
            Transform::Logit,
            Some(&eig),
            -80.0,
            80.0,
        ),
        (
            PriorSpec::parse("pc", &[0.5, 0.8]).unwrap(),
            Transform::Logit,
            Some(&eig),
            -80.0,
            80.0,
        ),
        (
            PriorSpec::parse("gaussian", &[1.0, 0.2]).unwrap(),
            Transform::Identity,
            None,
            -60.0,
            60.0,
        ),
    ];
    for (spec, t, eig, lo, hi) in cases {
        let m = mass(&spec, t, eig, lo, hi);
        assert!((m - 1.0).abs() < 1e-5, "{spec:?}: mass {m}");
    }
}

#[test]
fn pc_cor1_tail_statement() {
    let p = PriorSpec::parse("pc.cor1", &[0.9, 0.9])
        .unwrap()
        .resolve(Transform::Fisher, None)
        .unwrap();
    let f = |x: f64| p.log_density(x).exp();
    let cut = Transform::Fisher.to_internal(0.9).unwrap();
    let upper = simpson(&f, cut, 80.0, 1e-12);
    assert!((upper - 0.9).abs() < 1e-6, "P(rho > 0.9) = {upper}");
}

#[test]
fn pc_tail_statements_hold() {
    let prec = PriorSpec::parse("pc.prec", &[1.0, 0.01])
        .unwrap()
        .resolve(Transform::LogPrecision, None)
        .unwrap();
    // σ > 1 ⇔ θ < 0
    let p = simpson(&|x| prec.log_density(x).exp(), -60.0, 0.0, 1e-12);
    assert!((p - 0.01).abs() < 1e-7);

    let cor0 = PriorSpec::parse("pc.cor0", &[0.5, 0.3])
        .unwrap()
        .resolve(Transform::Fisher, None)
        .unwrap();
    let cut = Transform::Fisher.to_internal(0.5).unwrap();
    let inner = simpson(&|x| cor0.log_density(x).exp(), -cut, cut, 1e-12);
    assert!((1.0 - inner - 0.3).abs() < 1e-6);

    let eig = [0.2, 0.5, 0.9, 1.3, 2.1, 3.0];
    let mix = PriorSpec::parse("pc", &[0.5, 0.5])
        .unwrap()
        .resolve(Transform::Logit, Some(&eig))
        .unwrap();
    let below = simpson(&|x| mix.log_density(x).exp(), -80.0, 0.0, 1e-12);
    assert!((below - 0.5).abs() < 1e-6);
}

#[test]
fn table_prior_is_normalized_by_trapezoid() {
    let x: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| -0.5 * v * v + 3.0).collect();
    let mut param = x.clone();
    param.extend(&y);
    let p = PriorSpec::parse("table", &param)
        .unwrap()
        .resolve(Transform::LogPrecision, None)
        .unwrap();
    let trap: f64 = x
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (p.log_density(w[0]).exp() + p.log_density(w[1]).exp()))
        .sum();
    assert!((trap - 1.0).abs() < 1e-12);
    assert_eq!(p.log_density(-4.5), f64::NEG_INFINITY);
}

#[test]
fn pc_prec_median_matches_quadrature() {
    let p = PriorSpec::parse("pc.prec", &[1.0, 0.01])
        .unwrap()
        .resolve(Transform::LogPrecision, None)
        .unwrap();
    let below = simpson(&|x| p.log_density(x).exp(), -60.0, p.median(), 1e-12);
    assert!((below - 0.5).abs() < 1e-8);
}

proptest! {
    #[test]
    fn transforms_round_trip(tau in 1e-6f64..1e6, rho in -0.999f64..0.999, phi in 1e-6f64..0.999_999) {
        for (t, v) in [(Transform::LogPrecision, tau), (Transform::Fisher, rho), (Transform::Logit, phi), (Transform::Identity, rho)] {
            let back = t.from_internal(t.to_internal(v).unwrap());
            prop_assert!((back - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn transform_derivatives_match_finite_differences(theta in -8.0f64..8.0) {
        for t in [Transform::LogPrecision, Transform::Fisher, Transform::Logit, Transform::Identity] {
            let h = 1e-5;
            let fd = (t.from_internal(theta + h) - t.from_internal(theta - h)) / (2.0 * h);
            prop_assert!((fd - t.derivative(theta)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn spec_round_trips_through_name_and_params(u in 0.01f64..0.99, alpha in 0.01f64..0.99) {
        for name in ["pc.prec", "pc.cor1", "pc.cor0", "pc", "loggamma", "gaussian"] {
            let s = PriorSpec::parse(name, &[u, alpha]).unwrap();
            prop_assert_eq!(PriorSpec::parse(s.name(), &s.params()).unwrap(), s);
        }
    }
}

mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use usm::priors::*;
use usm::PriorModel;

fn lap(theta: f64) -> PriorModel<f64> {
    PriorModel::laplacian(theta).unwrap()
}

fn moe(kappa: f64, beta: f64) -> PriorModel<f64> {
    PriorModel::moe(kappa, beta).unwrap()
}

fn joe(theta1: f64, theta2: f64) -> PriorModel<f64> {
    PriorModel::joe(theta1, theta2).unwrap()
}

/// Mass of the density on `[0, t]`, by geometric panels starting at `h`.
fn one_sided_mass(f: &dyn Fn(f64) -> f64, h: f64, t: f64) -> f64 {
    let mut total = simpson(f, 0.0, h.min(t), 1e-13);
    let mut lo = h;
    while lo < t {
        let hi = (2.0 * lo).min(t);
        total += simpson(f, lo, hi, 1e-13);
        lo = hi;
    }
    total
}

#[test]
fn densities_integrate_to_one() {
    let mut r = rng(21);
    for _ in 0..10 {
        let theta = r.random_range(0.5..50.0);
        let lap = lap(theta);
        let t = 1e-9f64.ln() / -theta;
        let mass = 2.0 * one_sided_mass(&|a| lap.pdf(a), 0.1 / theta, t);
        assert!((mass - 1.0).abs() < 1e-6, "laplacian {theta}: {mass}");

        let (kappa, beta) = (r.random_range(1.5..8.0), r.random_range(0.01..2.0));
        let moe = moe(kappa, beta);
        let t = beta * (1e-9f64.powf(-1.0 / kappa) - 1.0);
        let mass = 2.0 * one_sided_mass(&|a| moe.pdf(a), 0.1 * beta, t);
        assert!((mass - 1.0).abs() < 1e-6, "moe {kappa},{beta}: {mass}");

        let t1 = r.random_range(0.5..20.0);
        let t2 = t1 * r.random_range(1.5..200.0);
        let joe = joe(t1, t2);
        let t = 25.0 / t1;
        let mass = 2.0 * one_sided_mass(&|a| joe.pdf(a), 0.1 / t2, t);
        assert!((mass - 1.0).abs() < 1e-6, "joe {t1},{t2}: {mass}");
    }
}

#[test]
fn abs_cdf_matches_quadrature() {
    for m in [
        lap(7.0),
        moe(2.8, 0.07),
        joe(20.0, 100.0),
    ] {
        for t in [1e-3, 0.02, 0.3, 2.0] {
            let q = 2.0 * one_sided_mass(&|a| m.pdf(a), 1e-4, t);
            assert!((m.abs_cdf(t) - q).abs() < 1e-9, "{} at {t}", m.name());
        }
    }
}

#[test]
fn pdf_examples() {
    assert!((moe(2.8, 0.07).pdf(0.0) - 20.0).abs() < 1e-12);
    assert!((joe(20.0, 100.0).pdf(0.0) - 80.0 / (2.0 * 5f64.ln())).abs() < 1e-10);
    assert!((moe(3.0, 1.0).pdf(1.0) - 0.09375).abs() < 1e-15);
}

#[test]
fn joe_is_continuous_at_zero() {
    let mut r = rng(22);
    for _ in 0..20 {
        let t1: f64 = r.random_range(0.1..50.0);
        let m = joe(t1, t1 * r.random_range(1.01..100.0));
        let (a, b) = (m.pdf(1e-10), m.pdf(0.0));
        assert!((a - b).abs() <= 1e-6 * b);
    }
}

#[test]
fn joe_derivative_near_zero() {
    let m = joe(20.0, 100.0);
    assert_eq!(m.reg_deriv(0.0).unwrap(), 60.0);
    assert!((m.reg_deriv(1e-8).unwrap() - 60.0).abs() < 1e-4);
    let tail = m.reg_value(5.0).unwrap() - 100.0 - 5f64.ln();
    assert!(tail.abs() < 1e-12, "{tail}");
}

#[test]
fn derivatives_match_finite_differences() {
    let mut r = rng(23);
    let models = [
        lap(3.0),
        moe(2.8, 0.07),
        moe(5.0, 1.3),
        joe(20.0, 100.0),
        joe(0.7, 3.0),
    ];
    for m in &models {
        for _ in 0..20 {
            let t: f64 = r.random_range(0.01..3.0);
            let h = 1e-5 * t;
            let fd = central_difference(&|s| m.reg_value(s).unwrap(), t, h);
            let d = m.reg_deriv(t).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs(), "{} at {t}: {fd} vs {d}", m.name());
        }
    }
    assert!(models[1].reg_value(-1.0).is_err());
}

#[test]
fn regularizers_are_negative_log_densities() {
    // MOE's ψ drops the factor κ+1 of its negative log density
    for (m, scale) in [(moe(2.8, 0.07), 3.8), (joe(2.0, 40.0), 1.0)] {
        let base = scale * m.reg_value(0.5).unwrap() + m.pdf(0.5).ln();
        for t in [0.01, 0.2, 1.0, 3.0] {
            let v = scale * m.reg_value(t).unwrap() + m.pdf(t).ln();
            assert!((v - base).abs() < 1e-9, "{}", m.name());
        }
    }
}

#[test]
fn moments_match_quadrature() {
    let p = MoeParams::<f64>::new(3.0, 0.1).unwrap();
    assert!((moe_moment(&p, 1).unwrap() - 0.05).abs() < 1e-15);
    let m = PriorModel::from(p);
    // a = β(1/u − 1) maps the half line onto (0, 1]
    let q = simpson(
        &|u| {
            let a = 0.1 * (1.0 / u - 1.0);
            2.0 * a * a * m.pdf(a) * 0.1 / (u * u)
        },
        1e-9,
        1.0,
        1e-14,
    );
    assert!((moe_moment(&p, 2).unwrap() - 0.01).abs() < 1e-15);
    assert!((q - 0.01).abs() < 1e-10, "{q}");
    assert!(matches!(
        moe_moment(&MoeParams::<f64>::new(2.0, 1.0).unwrap(), 2),
        Err(usm::Error::UndefinedMoment { .. })
    ));

    let j = JoeParams::<f64>::new(2.0, 4.0).unwrap();
    let m = PriorModel::from(j);
    let q = 2.0 * one_sided_mass(&|a| a * a * m.pdf(a), 0.01, 30.0);
    let mu2 = joe_moment(&j, 2).unwrap();
    assert!((mu2 - 0.270505).abs() < 1e-6);
    assert!((q - mu2).abs() < 1e-8);
    assert!((joe_moment(&JoeParams::<f64>::new(1.0, std::f64::consts::E).unwrap(), 1).unwrap() - 0.632121).abs() < 1e-6);
}

#[test]
fn moment_fit_examples() {
    let p = moe_fit_moments(0.05f64, 0.01).unwrap();
    assert!((p.kappa() - 3.0).abs() < 1e-12 && (p.beta() - 0.1).abs() < 1e-12);
    assert!(moe_fit_moments(0.05f64, 0.005).is_err());
    let j = JoeParams::<f64>::new(2.0, 4.0).unwrap();
    let f = joe_fit_moments(joe_moment(&j, 1).unwrap(), joe_moment(&j, 2).unwrap()).unwrap();
    assert!((f.theta1() - 2.0).abs() < 2e-6 && (f.theta2() - 4.0).abs() < 4e-6);
    assert!(joe_fit_moments(0.5f64, 0.25).is_err());
}

#[test]
fn estimators_and_rates() {
    assert_eq!(laplacian_mle(&[0.5f64, -0.25, 0.25]).unwrap().theta(), 3.0);
    assert_eq!(laplacian_mle(&[1.0f64]).unwrap().theta(), 1.0);
    assert!(laplacian_mle::<f64>(&[]).is_err());
    assert!(laplacian_mle(&[0.0f64, 0.0]).is_err());
    let c = cmoe_from_samples(&[0.04f64, 0.10], 2).unwrap();
    assert!((c.kappa() - 2.0).abs() < 1e-15 && (c.beta() - 0.14).abs() < 1e-15);
    let c = cmoe_from_samples(&[0.5f64], 1).unwrap();
    assert_eq!((c.kappa(), c.beta()), (1.0, 0.5));
    assert!((moe(2.8, 0.07).expected_rate() - 40.0).abs() < 1e-12);
    assert!((joe(1.0, std::f64::consts::E).expected_rate() - 1.718281828).abs() < 1e-8);
    assert_eq!(lap(27.2).expected_rate(), 27.2);
}

#[test]
fn moe_sample_mean() {
    let m = moe(4.0, 0.3);
    let p = MoeParams::<f64>::new(4.0, 0.3).unwrap();
    let mut r = rng(24);
    let n = 1_000_000;
    let draws: Vec<f64> = (0..n).map(|_| m.sample(&mut r).abs()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let mu1 = moe_moment(&p, 1).unwrap();
    let sd = (moe_moment(&p, 2).unwrap() - mu1 * mu1).sqrt();
    assert!((mean - mu1).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {mu1}");
}

proptest! {
    #[test]
    fn moe_round_trip(kappa in 2.1f64..10.0, beta in 0.01f64..10.0) {
        let p = MoeParams::<f64>::new(kappa, beta).unwrap();
        let f = moe_fit_moments(moe_moment(&p, 1).unwrap(), moe_moment(&p, 2).unwrap()).unwrap();
        prop_assert!((f.kappa() - kappa).abs() <= 1e-12 * kappa);
        prop_assert!((f.beta() - beta).abs() <= 1e-12 * beta);
    }

    #[test]
    fn joe_round_trip(t1 in 0.1f64..50.0, ratio in 1.2f64..500.0) {
        let p = JoeParams::<f64>::new(t1, t1 * ratio).unwrap();
        let f = joe_fit_moments(joe_moment(&p, 1).unwrap(), joe_moment(&p, 2).unwrap()).unwrap();
        prop_assert!((f.theta1() - t1).abs() <= 1e-6 * t1);
        prop_assert!((f.theta2() - t1 * ratio).abs() <= 1e-6 * t1 * ratio);
    }

    #[test]
    fn moe_regularizer_is_concave(beta in 0.01f64..2.0, t in 0.0f64..5.0, h in 1e-3f64..1.0) {
        let m = moe(2.8, beta);
        let f = |s: f64| m.reg_value(s).unwrap();
        prop_assert!(f(t) - 2.0 * f(t + h) + f(t + 2.0 * h) <= 1e-12);
    }

    #[test]
    fn samples_are_symmetric_in_sign(seed in 0u64..50) {
        let m = joe(2.0, 40.0);
        let mut r = rng(seed);
        let pos = (0..2000).filter(|_| m.sample(&mut r) > 0.0).count();
        prop_assert!((pos as i64 - 1000).abs() < 200);
    }
}

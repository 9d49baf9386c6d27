//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use ndarray::Array2;
use rand::Rng;
use usm::coder::{lla_code, omp, scalar_threshold, weighted_l1, zeta_moe, CodeOptions, OmpStop};
use usm::dictlearn::{dict_gradient, dict_objective};
use usm::empirics::{kld_bits, quantize_hist, regret_bits, DEFAULT_DELTA};
use usm::experiments::{
    add_noise, denoise_image, heterogeneous_laplacian, overcomplete_dct, run_recovery, synthetic_image,
    DenoiseOptions, RecoveryConfig,
};
use usm::model::{extract_patches, reassemble_raw};
use usm::priors::{
    cmoe_from_samples, joe_fit_moments, joe_moment, laplacian_mle, moe_fit, moe_fit_moments, moe_moment,
};
use usm::{Image, JoeParams, MoeParams, PriorModel};

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn zeta_anchors() -> Outcome {
    let p = MoeParams::<f64>::new(2.8, 0.07).unwrap();
    let z0 = zeta_moe(0.0, &p).unwrap();
    let zm = zeta_moe(0.07 / 1.8, &p).unwrap();
    let pass = (z0 - 0.1984).abs() <= 5e-4 && (zm - 0.0847).abs() <= 5e-4;
    outcome(pass, format!("zeta(0) = {z0:.5}, zeta(beta/(kappa-1)) = {zm:.5}"))
}

fn moment_round_trips() -> Outcome {
    let mut r = rng(2);
    let (mut worst_moe, mut worst_joe) = (0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..200 {
        let (kappa, beta): (f64, f64) = (r.random_range(2.1..10.0), r.random_range(0.01..10.0));
        let p = MoeParams::new(kappa, beta).unwrap();
        match moe_fit_moments(moe_moment(&p, 1).unwrap(), moe_moment(&p, 2).unwrap()) {
            Ok(f) => {
                worst_moe = worst_moe
                    .max((f.kappa() - kappa).abs() / kappa)
                    .max((f.beta() - beta).abs() / beta)
            }
            Err(_) => failures += 1,
        }
        let t1: f64 = r.random_range(0.1..50.0);
        let t2 = t1 * r.random_range(1.2..500.0);
        let j = JoeParams::new(t1, t2).unwrap();
        match joe_fit_moments(joe_moment(&j, 1).unwrap(), joe_moment(&j, 2).unwrap()) {
            Ok(f) => {
                worst_joe = worst_joe
                    .max((f.theta1() - t1).abs() / t1)
                    .max((f.theta2() - t2).abs() / t2)
            }
            Err(_) => failures += 1,
        }
    }
    let pass = failures == 0 && worst_moe <= 1e-6 && worst_joe <= 1e-6;
    outcome(
        pass,
        format!("200 draws: worst relative error MOE {worst_moe:.2e}, JOE {worst_joe:.2e}, {failures} fit failures"),
    )
}

fn solver_oracles() -> Outcome {
    let mut r = rng(3);
    let mut worst_obj = 0.0f64;
    for _ in 0..100 {
        let d = gaussian_dict(&mut r, 5, 8);
        let x = gaussian_vec(&mut r, 5);
        let w: Vec<f64> = (0..8).map(|_| r.random_range(0.05..1.0)).collect();
        let got = weighted_l1(x.view(), &d, &w, &CodeOptions::default()).unwrap();
        let dm = d.view().to_owned();
        let oracle = cd_weighted_l1(&dm, &x, &w, 1e-12);
        worst_obj = worst_obj.max((got.objective - weighted_l1_objective(&dm, &x, &oracle, &w)).abs());
    }
    let mut worst_thr = 0.0f64;
    for i in 0..100 {
        let model = match i % 3 {
            0 => PriorModel::moe(r.random_range(1.5..6.0), r.random_range(0.01..0.5)).unwrap(),
            1 => {
                let t1: f64 = r.random_range(0.5..5.0);
                PriorModel::joe(t1, t1 * r.random_range(2.0..50.0)).unwrap()
            }
            _ => PriorModel::laplacian(1.0).unwrap(),
        };
        let x: f64 = r.random_range(-2.0..2.0);
        let lambda = r.random_range(0.01..1.0);
        let f = |a: f64| (x - a).powi(2) + lambda * model.reg_value(a.abs()).unwrap();
        let grid = grid_argmin(&f, -x.abs(), x.abs(), 1e-4);
        worst_thr = worst_thr.max((scalar_threshold(x, lambda, &model) - grid).abs());
    }
    let pass = worst_obj <= 1e-7 && worst_thr <= 1e-4;
    outcome(
        pass,
        format!("worst objective gap to CD oracle {worst_obj:.2e}; worst threshold gap to 1e-4 grid {worst_thr:.2e}"),
    )
}

fn universal_fit_dominance() -> Outcome {
    let mut wins = 0;
    let (mut lap_sum, mut moe_sum) = (0.0, 0.0);
    for seed in 0..20 {
        let a = heterogeneous_laplacian(100, 1000, 5.0, 25.0, 1000 + seed).unwrap();
        let v: Vec<f64> = a.view().iter().copied().collect();
        let h = quantize_hist(&v, DEFAULT_DELTA).unwrap();
        let lap = kld_bits(&h, &PriorModel::Laplacian(laplacian_mle(&v).unwrap()));
        let Ok(moe) = moe_fit(&v) else { continue };
        let moe = kld_bits(&h, &PriorModel::Moe(moe));
        lap_sum += lap / 20.0;
        moe_sum += moe / 20.0;
        if moe < lap {
            wins += 1;
        }
    }
    outcome(
        wins >= 18,
        format!("MOE KLD below Laplacian in {wins}/20 seeds (mean {moe_sum:.4} vs {lap_sum:.4} bits)"),
    )
}

fn lla_monotonicity() -> Outcome {
    let mut r = rng(5);
    let m = PriorModel::moe(2.8, 0.07).unwrap();
    let mut monotone = 0;
    let mut worst_rise = f64::NEG_INFINITY;
    for _ in 0..100 {
        let d = gaussian_dict(&mut r, 16, 32);
        let x = gaussian_vec(&mut r, 16) * 0.3;
        let opts = CodeOptions::with_lambda(r.random_range(0.01..0.2));
        let res = lla_code(x.view(), &d, &m, &opts).unwrap();
        let rise = res.trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        worst_rise = worst_rise.max(rise);
        if res.trace.len() == 5 && rise <= 1e-9 {
            monotone += 1;
        }
    }
    outcome(
        monotone == 100,
        format!("{monotone}/100 five-round traces non-increasing; largest step change {worst_rise:.2e}"),
    )
}

fn recovery_direction() -> Outcome {
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in 0..5 {
        let cfg = RecoveryConfig { seed, ..RecoveryConfig::default() };
        let rep = run_recovery(&cfg).unwrap();
        let ok = cfg
            .sigmas
            .iter()
            .all(|&s| rep.accuracy(s, "moe").unwrap() >= rep.accuracy(s, "l1").unwrap());
        if ok {
            good += 1;
        }
        let mean = |m: &str| cfg.sigmas.iter().map(|&s| rep.accuracy(s, m).unwrap()).sum::<f64>() / cfg.sigmas.len() as f64;
        lines.push(format!("seed {seed}: mean accuracy l1 {:.3} moe {:.3}", mean("l1"), mean("moe")));
    }
    outcome(
        good >= 4,
        format!("MOE >= l1 at every sigma in {good}/5 seeds ({})", lines.join("; ")),
    )
}

fn denoising_direction() -> Outcome {
    let sigma = 20.0 / 255.0;
    let d0 = overcomplete_dct(8, 16).unwrap();
    let opts = DenoiseOptions { adapt_iters: 2, ..DenoiseOptions::default() };
    let l1 = PriorModel::laplacian(1.0).unwrap();
    let moe = PriorModel::moe(2.8, 0.07).unwrap();
    let (mut within, mut ahead) = (0, 0);
    let mut gains = Vec::new();
    for seed in 0..10 {
        let clean = synthetic_image(64, seed).unwrap();
        let noisy = add_noise(&clean, sigma, seed).unwrap();
        let a = denoise_image(&noisy, sigma, &d0, &l1, &opts, Some(&clean)).unwrap();
        let b = denoise_image(&noisy, sigma, &d0, &moe, &opts, Some(&clean)).unwrap();
        let gain = b.image_psnr.unwrap() - a.image_psnr.unwrap();
        if gain >= -0.05 {
            within += 1;
        }
        if gain > 0.0 {
            ahead += 1;
        }
        gains.push(format!("{gain:+.2}"));
    }
    outcome(
        within == 10 && ahead > 5,
        format!("PSNR(MOE) - PSNR(l1) in dB per seed [{}]; {within}/10 within 0.05 dB, {ahead}/10 ahead", gains.join(", ")),
    )
}

fn regret_sublinearity() -> Outcome {
    let truth = PriorModel::laplacian(10.0).unwrap();
    let mut per_n = Vec::new();
    for n in [100usize, 10_000] {
        let mut total = 0.0;
        for seed in 0..20 {
            // Q is fitted once, from an independent pilot sample
            let mut r = rng(8000 + seed);
            let pilot: Vec<f64> = (0..1000).map(|_| truth.sample(&mut r)).collect();
            let q = PriorModel::Moe(cmoe_from_samples(&pilot, pilot.len()).unwrap());
            let mut r = rng(9000 + seed);
            let v: Vec<f64> = (0..n).map(|_| truth.sample(&mut r)).collect();
            total += regret_bits(&v, &q).unwrap() / n as f64;
        }
        per_n.push(total / 20.0);
    }
    let ratio = per_n[0] / per_n[1];
    outcome(
        ratio >= 2.0,
        format!(
            "mean regret per sample {:.5} bits at n=100, {:.5} at n=10^4, ratio {ratio:.1}",
            per_n[0], per_n[1]
        ),
    )
}

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

fn conservation() -> Outcome {
    let mut r = rng(9);
    let mut worst_mass = 0.0f64;
    for _ in 0..10 {
        let theta: f64 = r.random_range(0.5..50.0);
        let lap = PriorModel::laplacian(theta).unwrap();
        let m = 2.0 * one_sided_mass(&|a| lap.pdf(a), 0.1 / theta, 1e-9f64.ln() / -theta);
        worst_mass = worst_mass.max((m - 1.0).abs());
        let (kappa, beta): (f64, f64) = (r.random_range(1.5..8.0), r.random_range(0.01..2.0));
        let moe = PriorModel::moe(kappa, beta).unwrap();
        let t = beta * (1e-9f64.powf(-1.0 / kappa) - 1.0);
        let m = 2.0 * one_sided_mass(&|a| moe.pdf(a), 0.1 * beta, t);
        worst_mass = worst_mass.max((m - 1.0).abs());
        let t1: f64 = r.random_range(0.5..20.0);
        let t2 = t1 * r.random_range(1.5..200.0);
        let joe = PriorModel::joe(t1, t2).unwrap();
        let m = 2.0 * one_sided_mass(&|a| joe.pdf(a), 0.1 / t2, 25.0 / t1);
        worst_mass = worst_mass.max((m - 1.0).abs());
    }

    let mut worst_patch = 0.0f64;
    for seed in 0..5 {
        let mut r = rng(90 + seed);
        let img = Image::new(Array2::from_shape_fn((20, 23), |_| r.random_range(0.0f64..1.0))).unwrap();
        for stride in 1..=8 {
            let (p, g) = extract_patches(&img, 8, stride, true).unwrap();
            let back = reassemble_raw(&p, &g).unwrap();
            for (a, b) in back.pixels().iter().zip(img.pixels().iter()) {
                worst_patch = worst_patch.max((a - b).abs());
            }
        }
    }

    let mut worst_omp = 0.0f64;
    for _ in 0..20 {
        let d = gaussian_dict(&mut r, 64, 256);
        let x = gaussian_vec(&mut r, 64);
        let xn = x.dot(&x).sqrt();
        for l in [1, 5, 10, 20] {
            let (res, set) = omp(x.view(), &d, OmpStop::MaxNonzeros(l)).unwrap();
            let resid = &x - &d.view().dot(&res.coeffs);
            for &k in set.indices() {
                worst_omp = worst_omp.max(d.atom(k).dot(&resid).abs() / xn);
            }
        }
    }

    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let mut gm = |m: usize, n: usize| Array2::from_shape_fn((m, n), |_| r.random_range(-1.0..1.0));
        let (d, x, a, dir) = (gm(6, 9) * 0.3, gm(6, 15), gm(9, 15), gm(6, 9));
        let mu = r.random_range(0.0..2.0);
        let analytic = (&dict_gradient(d.view(), x.view(), a.view(), mu) * &dir).sum();
        let f = |h: f64| {
            let p = &d + &(&dir * h);
            dict_objective(p.view(), x.view(), a.view(), mu)
        };
        let numeric = central_difference(&f, 0.0, 1e-6);
        worst_grad = worst_grad.max((analytic - numeric).abs() / analytic.abs().max(1e-8));
    }

    let pass = worst_mass <= 1e-6 && worst_patch <= 1e-12 && worst_omp <= 1e-10 && worst_grad <= 1e-4;
    outcome(
        pass,
        format!(
            "density mass error {worst_mass:.1e}, patch identity {worst_patch:.1e}, OMP residual correlation {worst_omp:.1e}, gradient relative error {worst_grad:.1e}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("zeta anchor values", Duration::from_secs(1), zeta_anchors),
        ("moment round trips", Duration::from_secs(1), moment_round_trips),
        ("solver oracle equivalence", Duration::from_secs(10), solver_oracles),
        ("universal fit dominance", Duration::from_secs(30), universal_fit_dominance),
        ("LLA monotonicity", Duration::from_secs(10), lla_monotonicity),
        ("support recovery direction", Duration::from_secs(300), recovery_direction),
        ("denoising direction", Duration::from_secs(600), denoising_direction),
        ("regret sublinearity", Duration::from_secs(30), regret_sublinearity),
        ("conservation and identities", Duration::from_secs(30), conservation),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {} [{:.2}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

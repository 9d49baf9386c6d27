use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use usm::coder::Coder;
use usm::dictlearn::{incoherence, learn, LearnOptions};
use usm::empirics::{fit_report, FitOptions};
use usm::experiments::{
    add_noise, classify_batch, denoise_image, error_rate, gen_sparse_instances, overcomplete_dct,
    planted_classes, run_recovery, DenoiseOptions, RecoveryConfig, RecoveryMethod,
};
use usm::model::{
    decode_pgm, encode_pgm, extract_patches, psnr, read_matrix, read_pgm, write_matrix, MatrixFormat,
};
use usm::{CodeOptions, CoeffMatrix, Dictionary, Error, Image, PriorModel, SampleMatrix};

use crate::args::{ClassifyArgs, CodeArgs, Command, Common, DenoiseArgs, FitArgs, LearnArgs, RecoverArgs};
use crate::Failure;

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Code(a) => cmd_code(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Recover(a) => cmd_recover(a),
        Command::Classify(a) => cmd_classify(a),
    }
}

/// Errors reading inputs are usage errors.
fn input<T>(r: usm::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

/// Parameter and shape errors are usage errors; anything else is a runtime failure.
fn compute<T>(r: usm::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::InvalidParameter(_) | Error::DimensionMismatch(_) => Failure::Usage(e.to_string()),
        _ => Failure::Runtime(e.to_string()),
    })
}

fn output<T>(r: usm::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Runtime(e.to_string()))
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        usage(format!("--{name} must be positive, got {v}"))
    }
}

fn setup(common: &Common) -> Result<(), Failure> {
    if let Some(n) = common.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    fs::create_dir_all(&common.out_dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", common.out_dir.display())))
}

fn out_path(explicit: &Option<PathBuf>, common: &Common, name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| common.out_dir.join(name))
}

fn artifact(common: &Common, name: &str) -> PathBuf {
    common.out_dir.join(name)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn save_matrix(path: &Path, m: &SampleMatrix<f64>) -> Result<(), Failure> {
    output(write_matrix(m, path, MatrixFormat::from_path(path)))
}

fn save_coeffs(path: &Path, a: CoeffMatrix<f64>) -> Result<(), Failure> {
    save_matrix(path, &output(SampleMatrix::new(a.into_array()))?)
}

fn save_dict(path: &Path, d: Dictionary<f64>) -> Result<(), Failure> {
    save_matrix(path, &output(SampleMatrix::new(d.into_array()))?)
}

fn save_pgm(path: &Path, img: &Image<f64>) -> Result<(), Failure> {
    fs::write(path, encode_pgm(img)).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// The image as it reads back from an 8-bit PGM.
fn as_saved(img: &Image<f64>) -> Result<Image<f64>, Failure> {
    output(decode_pgm(&encode_pgm(img)))
}

fn read_dict(path: &Path) -> Result<Dictionary<f64>, Failure> {
    let m = input(read_matrix::<f64>(path))?;
    input(Dictionary::new(m.into_array())).map_err(|f| match f {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    setup(&args.common)?;
    positive("delta", args.delta)?;
    if args.cmoe_n0 == 0 {
        return usage("--cmoe-n0 must be at least 1");
    }
    let a = CoeffMatrix::new(input(read_matrix::<f64>(&args.coeffs))?.into_array());
    let opts = FitOptions {
        delta: args.delta,
        include_zeros: args.include_zeros,
        min_row_nonzeros: args.min_row_nonzeros,
        cmoe_n0: args.cmoe_n0,
    };
    let report = compute(fit_report(&a, &opts))?;
    let out = out_path(&args.out, &args.common, "fit_report.csv");
    write_text(&out, &report.to_csv())?;
    print!("{}", report.to_text());
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_code(args: CodeArgs) -> Result<(), Failure> {
    setup(&args.common)?;
    let x = input(read_matrix::<f64>(&args.data))?;
    let d = read_dict(&args.dict)?;
    if x.rows() != d.rows() {
        return usage(format!(
            "data has {} rows but the dictionary has {}",
            x.rows(),
            d.rows()
        ));
    }
    let c = positive("C", args.c)?;
    let m = x.rows() as f64;
    let (mut opts, mode) = match (args.lambda, args.epsilon, args.sigma, args.sigma255) {
        (Some(l), ..) => (CodeOptions::with_lambda(l), format!("lambda = {l}")),
        (_, Some(e), ..) => (CodeOptions::with_epsilon(e), format!("epsilon = {e}")),
        (_, _, Some(s), _) | (_, _, _, Some(s)) => {
            let s = if args.sigma.is_some() { s } else { s / 255.0 };
            let e = c * m * s * s;
            (CodeOptions::with_epsilon(e), format!("sigma = {s}, epsilon = {e}"))
        }
        _ => return usage("one of --lambda, --epsilon, --sigma, --sigma255 is required"),
    };
    opts.lla_iters = args.lla_iters;
    compute(opts.validate())?;

    let coder = Coder::new(&d);
    let results = (0..x.cols())
        .into_par_iter()
        .map(|j| {
            let col = x.column(j);
            let prior = args.prior.resolve(col.iter())?;
            coder.code(col, &prior, &opts)
        })
        .collect::<usm::Result<Vec<_>>>();
    let results = compute(results)?;

    let values: Vec<f64> = results.iter().flat_map(|r| r.coeffs.iter().copied()).collect();
    let coeffs = output(SampleMatrix::from_column_major(d.atoms(), x.cols(), values))?;
    let out = out_path(&args.out, &args.common, "coeffs.usm");
    save_matrix(&out, &coeffs)?;

    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&usm::CodeResult<f64>) -> f64| results.iter().map(f).sum::<f64>() / n;
    let nonzeros = mean(&|r| r.coeffs.iter().filter(|v| **v != 0.0).count() as f64);
    let unconverged = results.iter().filter(|r| !r.converged).count();
    println!("coded {} samples with {} ({mode})", results.len(), args.prior);
    println!(
        "mean objective {:.6e}, mean residual {:.6e}, mean nonzeros {nonzeros:.2}, unconverged {unconverged}",
        mean(&|r| r.objective),
        mean(&|r| r.residual_sq)
    );
    println!("coefficients written to {}", out.display());

    if args.common.save_artifacts {
        let mut csv = String::from("sample,objective,residual_sq,lambda,converged\n");
        for (j, r) in results.iter().enumerate() {
            let _ = writeln!(csv, "{j},{},{},{},{}", r.objective, r.residual_sq, r.lambda, r.converged);
        }
        write_text(&artifact(&args.common, "code_stats.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_learn(args: LearnArgs) -> Result<(), Failure> {
    setup(&args.common)?;
    let x = input(read_matrix::<f64>(&args.data))?;
    if args.k > x.cols() {
        return usage(format!("--K {} exceeds the {} training samples", args.k, x.cols()));
    }
    let prior = compute(args.prior.resolve(&x.to_column_major()))?;
    let opts = LearnOptions {
        lambda: args.lambda,
        mu: args.mu,
        outer_iters: args.iters,
        seed: args.common.seed,
        lla_iters: args.lla_iters,
        ..LearnOptions::new(args.k, prior)
    };
    compute(opts.validate())?;
    let mut learned = compute(learn(&x, &opts))?;
    let norms: Vec<f64> = (0..args.k).map(|k| learned.dict.atom(k).dot(&learned.dict.atom(k)).sqrt()).collect();
    let first = learned.trace.first().copied().unwrap_or(f64::NAN);
    let last = learned.trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "learned {} atoms from {} samples with {}: objective {first:.6e} -> {last:.6e}, incoherence {:.4} -> {:.4}",
        args.k,
        x.cols(),
        args.prior,
        incoherence(&learned.initial),
        incoherence(&learned.dict)
    );
    // atoms are written at unit norm; coefficient rows absorb the scale so DA is unchanged
    let mut coeffs = learned.coeffs.view_mut();
    for (k, n) in norms.iter().enumerate() {
        coeffs.row_mut(k).mapv_inplace(|v| v * n);
    }
    let unit = compute(Dictionary::normalized(learned.dict.into_array()))?;
    let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &n| (lo.min(n), hi.max(n)));
    println!("atom norms before rescaling to 1: min {lo:.4}, max {hi:.4}");
    if args.common.save_artifacts {
        let mut csv = String::from("step,objective\n");
        for (i, v) in learned.trace.iter().enumerate() {
            let _ = writeln!(csv, "{i},{v}");
        }
        write_text(&artifact(&args.common, "trace.csv"), &csv)?;
        save_coeffs(&artifact(&args.common, "coeffs.usm"), learned.coeffs)?;
        save_dict(&artifact(&args.common, "initial_dictionary.usm"), learned.initial)?;
    }
    let out = out_path(&args.out, &args.common, "dictionary.usm");
    save_dict(&out, unit)?;
    println!("dictionary written to {}", out.display());
    Ok(())
}

fn cmd_denoise(args: DenoiseArgs) -> Result<(), Failure> {
    setup(&args.common)?;
    let sigma = match (args.sigma, args.sigma255) {
        (Some(s), _) => positive("sigma", s)?,
        (_, Some(s)) => positive("sigma255", s)? / 255.0,
        _ => return usage("one of --sigma, --sigma255 is required"),
    };
    let img = input(read_pgm::<f64>(&args.image))?;
    let (noisy, reference) = if args.add_noise {
        // the saved noisy PGM is exactly what gets denoised
        let noisy = as_saved(&compute(add_noise(&img, sigma, args.common.seed))?)?;
        (noisy, Some(img))
    } else {
        let r = args.reference.as_ref().map(|p| input(read_pgm::<f64>(p))).transpose()?;
        (img, r)
    };
    if let Some(r) = &reference {
        if (r.width(), r.height()) != (noisy.width(), noisy.height()) {
            return usage("reference and input images differ in size");
        }
    }
    let d0 = match &args.dict {
        Some(p) => read_dict(p)?,
        None => compute(overcomplete_dct(args.side, args.dct_per_axis))?,
    };
    if d0.rows() != args.side * args.side {
        return usage(format!(
            "dictionary has {} rows; {}x{} patches need {}",
            d0.rows(),
            args.side,
            args.side,
            args.side * args.side
        ));
    }
    let prior: PriorModel<f64> = match args.prior {
        crate::prior::PriorSpec::Fixed(m) => m,
        spec => {
            let (patches, _) = compute(extract_patches(&noisy, args.side, 1, true))?;
            compute(spec.resolve(&patches.to_column_major()))?
        }
    };
    let opts = DenoiseOptions {
        side: args.side,
        c: positive("C", args.c)?,
        adapt_iters: args.adapt_iters,
        mu: args.mu,
    };
    let res = compute(denoise_image(&noisy, sigma, &d0, &prior, &opts, reference.as_ref()))?;
    let saved = as_saved(&res.image)?;
    let out = out_path(&args.out, &args.common, "denoised.pgm");
    save_pgm(&out, &saved)?;
    match &reference {
        Some(r) => println!(
            "PSNR {:.2} dB against the reference (noisy input {:.2} dB, coded patches {:.2} dB)",
            compute(psnr(&saved, r))?,
            compute(psnr(&noisy, r))?,
            res.patch_psnr.unwrap_or(f64::NAN)
        ),
        None => println!("PSNR {:.2} dB against the input", compute(psnr(&saved, &noisy))?),
    }
    println!("denoised image written to {}", out.display());
    if args.common.save_artifacts {
        if args.add_noise {
            save_pgm(&artifact(&args.common, "noisy.pgm"), &noisy)?;
        }
        save_dict(&artifact(&args.common, "dictionary.usm"), res.dict)?;
        save_coeffs(&artifact(&args.common, "coeffs.usm"), res.coeffs)?;
    }
    Ok(())
}

fn recovery_method(name: &str, args: &RecoverArgs) -> Result<RecoveryMethod, Failure> {
    let model = match name.trim() {
        "l1" => PriorModel::laplacian(1.0),
        "moe" => PriorModel::moe(args.moe.0, args.moe.1),
        "joe" => PriorModel::joe(args.joe.0, args.joe.1),
        "l0" => return Ok(RecoveryMethod::Omp),
        other => return usage(format!("unknown method `{other}`; use l1, moe, joe or l0")),
    };
    compute(model).map(RecoveryMethod::Prior)
}

fn cmd_recover(args: RecoverArgs) -> Result<(), Failure> {
    setup(&args.common)?;
    let methods = args
        .methods
        .iter()
        .map(|m| recovery_method(m, &args))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = RecoveryConfig {
        m: args.m,
        k: args.k,
        n: args.n,
        l: args.l,
        sigmas: args.sigmas.clone(),
        t: args.t,
        c: args.c,
        target_std: args.target_std,
        methods,
        seed: args.common.seed,
    };
    compute(cfg.validate())?;
    let report = compute(run_recovery(&cfg))?;
    let csv = report.to_csv();
    let out = out_path(&args.out, &args.common, "recovery.csv");
    write_text(&out, &csv)?;
    print!("{csv}");
    eprintln!("report written to {}", out.display());
    if args.common.save_artifacts {
        let inst = compute(gen_sparse_instances(&cfg))?;
        save_dict(&artifact(&args.common, "dictionary.usm"), inst.dict)?;
        save_matrix(&artifact(&args.common, "clean.usm"), &inst.clean)?;
        save_coeffs(&artifact(&args.common, "truth.usm"), inst.truth)?;
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<usize>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| {
                Failure::Usage(format!("{}:{}: `{}` is not a class index", path.display(), i + 1, l.trim()))
            })
        })
        .collect()
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), Failure> {
    setup(&args.common)?;
    let (samples, dicts, labels) = match &args.data {
        Some(path) => {
            if args.dicts.len() < 2 {
                return usage("--dicts needs at least 2 dictionaries");
            }
            let x = input(read_matrix::<f64>(path))?;
            let dicts = args.dicts.iter().map(|p| read_dict(p)).collect::<Result<Vec<_>, _>>()?;
            if let Some(d) = dicts.iter().find(|d| d.rows() != x.rows()) {
                return usage(format!("a dictionary has {} rows but samples have {}", d.rows(), x.rows()));
            }
            let labels = args.labels.as_ref().map(|p| read_labels(p)).transpose()?;
            if let Some(l) = &labels {
                if l.len() != x.cols() {
                    return usage(format!("{} labels for {} samples", l.len(), x.cols()));
                }
            }
            (x, dicts, labels)
        }
        None => {
            let p = compute(planted_classes(
                args.classes,
                args.m,
                args.k,
                args.per_class,
                args.sparsity,
                args.noise,
                args.common.seed,
            ))?;
            if args.common.save_artifacts {
                save_matrix(&artifact(&args.common, "samples.usm"), &p.samples)?;
                for (c, d) in p.dicts.iter().enumerate() {
                    save_dict(&artifact(&args.common, &format!("dict_{c}.usm")), d.clone())?;
                }
                let text: String = p.labels.iter().map(|l| format!("{l}\n")).collect();
                write_text(&artifact(&args.common, "labels.csv"), &text)?;
            }
            (p.samples, p.dicts, Some(p.labels))
        }
    };
    let prior = compute(args.prior.resolve(&samples.to_column_major()))?;
    let predicted = compute(classify_batch(&samples, &dicts, args.lambda, &prior))?;

    let mut csv = String::from(if labels.is_some() { "sample,predicted,label\n" } else { "sample,predicted\n" });
    for (j, p) in predicted.iter().enumerate() {
        match &labels {
            Some(l) => writeln!(csv, "{j},{p},{}", l[j]),
            None => writeln!(csv, "{j},{p}"),
        }
        .expect("writing to a String");
    }
    let out = out_path(&args.out, &args.common, "classes.csv");
    write_text(&out, &csv)?;
    println!("classified {} samples into {} classes with {}", predicted.len(), dicts.len(), args.prior);
    if let Some(l) = &labels {
        println!("error rate {:.4}", error_rate(&predicted, l));
    }
    println!("predictions written to {}", out.display());
    Ok(())
}

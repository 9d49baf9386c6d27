//! Model fit in bits: quantized histograms, entropy, KLD, codelengths and
//! codelength regret.
//!
//! Bin `m` covers `[mΔ − Δ/2, mΔ + Δ/2)`; values go to `round(v/Δ)` with
//! halves rounded away from zero. Everything here is reported in bits.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::priors::{cmoe_from_samples, joe_fit, laplacian_mle, moe_fit};
use crate::{CoeffMatrix, Error, PriorModel, Result, Scalar};

/// Default bin width, 2⁻⁸.
pub const DEFAULT_DELTA: f64 = 1.0 / 256.0;

/// Below this many nonzeros a row's MOE falls back to the global fit.
pub const MIN_ROW_NONZEROS: usize = 30;

const MASS_FLOOR: f64 = 1e-300;

fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Histogram over origin-centered bins of width Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantHist {
    delta: f64,
    first: i64,
    counts: Vec<f64>,
    total: f64,
}

impl QuantHist {
    /// Builds a histogram from per-bin weights, starting at bin `first`.
    pub fn from_weights(delta: f64, first: i64, weights: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("bin weights must be finite and >= 0".into()));
        }
        let lo = weights.iter().position(|&w| w > 0.0);
        let hi = weights.iter().rposition(|&w| w > 0.0);
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Err(Error::Estimation("histogram has no mass".into()));
        };
        let counts = weights[lo..=hi].to_vec();
        let total = counts.iter().sum();
        Ok(Self {
            delta,
            first: first + lo as i64,
            counts,
            total,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Number of bins between the first and last nonempty ones.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(m, count)` for every bin in range, empty ones included.
    pub fn bins(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.first + i as i64, c))
    }

    pub fn count(&self, m: i64) -> f64 {
        let i = m - self.first;
        if i < 0 || i as usize >= self.counts.len() {
            0.0
        } else {
            self.counts[i as usize]
        }
    }
}

/// Bin index `round(v/Δ)`, halves away from zero.
pub fn bin_index(v: f64, delta: f64) -> i64 {
    (v / delta).round() as i64
}

pub fn quantize_hist<T: Scalar>(values: &[T], delta: f64) -> Result<QuantHist> {
    if values.is_empty() {
        return Err(Error::Estimation("cannot build a histogram of no values".into()));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    let mut idx = Vec::with_capacity(values.len());
    for v in values {
        let v = v.as_f64();
        if !v.is_finite() {
            return Err(Error::InvalidParameter("histogram values must be finite".into()));
        }
        idx.push(bin_index(v, delta));
    }
    let lo = *idx.iter().min().unwrap();
    let hi = *idx.iter().max().unwrap();
    let mut counts = vec![0.0; (hi - lo + 1) as usize];
    for m in idx {
        counts[(m - lo) as usize] += 1.0;
    }
    QuantHist::from_weights(delta, lo, counts)
}

/// `−Σ p_m log₂ p_m` over nonempty bins.
pub fn entropy_bits(h: &QuantHist) -> f64 {
    let mut e = 0.0;
    for (_, c) in h.bins() {
        if c > 0.0 {
            let p = c / h.total;
            e -= p * p.ln();
        }
    }
    bits(e)
}

fn simpson9(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = (b - a) / 8.0;
    let mut s = f(a) + f(b);
    for i in 1..8 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Model probability of bin `m`, by 9-node Simpson integration of the
/// density. The zero bin is split at the origin where the density has a cusp.
pub fn bin_mass<T: Scalar>(model: &PriorModel<T>, m: i64, delta: f64) -> f64 {
    let pdf = |a: f64| model.pdf(T::lit(a)).as_f64();
    let mass = if m == 0 {
        2.0 * simpson9(pdf, 0.0, 0.5 * delta)
    } else {
        let c = (m.unsigned_abs() as f64) * delta;
        simpson9(pdf, c - 0.5 * delta, c + 0.5 * delta)
    };
    mass.max(MASS_FLOOR)
}

/// `Σ p_m log₂(p_m / q_m)` with `q_m` the model mass of bin `m`.
pub fn kld_bits<T: Scalar>(h: &QuantHist, model: &PriorModel<T>) -> f64 {
    let mut k = 0.0;
    for (m, c) in h.bins() {
        if c > 0.0 {
            let p = c / h.total;
            k += p * (p.ln() - bin_mass(model, m, h.delta).ln());
        }
    }
    bits(k)
}

/// `Σ_j −log₂(Δ·pdf(a_j))`.
pub fn codelength_bits<T: Scalar>(values: &[T], model: &PriorModel<T>, delta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Estimation("no values to code".into()));
    }
    let ld = delta.ln();
    let nats: f64 = values
        .iter()
        .map(|&v| -(ld + model.pdf(v).as_f64().ln()))
        .sum();
    Ok(bits(nats))
}

/// Codelength under `q` minus codelength under the Laplacian MLE of the
/// same values. Δ cancels.
pub fn regret_bits<T: Scalar>(values: &[T], q: &PriorModel<T>) -> Result<f64> {
    let mle = PriorModel::Laplacian(laplacian_mle(values)?);
    Ok(codelength_bits(values, q, 1.0)? - codelength_bits(values, &mle, 1.0)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub delta: f64,
    /// Include zero coefficients in the histograms (fits always skip them).
    pub include_zeros: bool,
    pub min_row_nonzeros: usize,
    pub cmoe_n0: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            include_zeros: false,
            min_row_nonzeros: MIN_ROW_NONZEROS,
            cmoe_n0: 2,
        }
    }
}

/// One line of a fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub model: String,
    /// `global`, `per-row` (count-weighted mean over rows) or `row:<k>`.
    pub scope: String,
    pub params: String,
    /// Values in the histogram the KLD is measured against.
    pub n: usize,
    pub kld_bits: Option<f64>,
    /// `ok`, `fallback`, `degenerate` or `failed: <reason>`.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub entropy_bits: f64,
    pub rows: Vec<FitRow>,
}

impl FitReport {
    pub fn row(&self, model: &str, scope: &str) -> Option<&FitRow> {
        self.rows.iter().find(|r| r.model == model && r.scope == scope)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,scope,params,n,kld_bits,status\n");
        for r in &self.rows {
            let kld = r.kld_bits.map_or(String::new(), |v| format!("{v:.6}"));
            let _ = writeln!(s, "{},{},{},{},{},{}", r.model, r.scope, r.params, r.n, kld, r.status);
        }
        s
    }

    /// Summary table of the global and per-row aggregate lines.
    pub fn to_text(&self) -> String {
        let mut s = format!("empirical entropy: {:.4} bits\n", self.entropy_bits);
        let _ = writeln!(s, "{:<22} {:<8} {:>10} {:>12}  params", "model", "scope", "n", "KLD (bits)");
        for r in self.rows.iter().filter(|r| !r.scope.starts_with("row:")) {
            let kld = r.kld_bits.map_or("-".to_string(), |v| format!("{v:.4}"));
            let status = if r.status == "ok" { "" } else { &r.status };
            let line = format!("{:<22} {:<8} {:>10} {:>12}  {} {status}", r.model, r.scope, r.n, kld, r.params);
            let _ = writeln!(s, "{}", line.trim_end());
        }
        let degenerate = self.rows.iter().filter(|r| r.status == "degenerate").count();
        if degenerate > 0 {
            let _ = writeln!(s, "{degenerate} rows without nonzero coefficients skipped");
        }
        s
    }
}

fn describe<T: Scalar>(m: &PriorModel<T>) -> String {
    match m {
        PriorModel::Laplacian(p) => format!("theta={:.6}", p.theta()),
        PriorModel::Moe(p) => format!("kappa={:.6};beta={:.6}", p.kappa(), p.beta()),
        PriorModel::Joe(p) => format!("theta1={:.6};theta2={:.6}", p.theta1(), p.theta2()),
    }
}

fn fitted<T: Scalar>(
    name: &str,
    scope: &str,
    fit: std::result::Result<PriorModel<T>, String>,
    h: &QuantHist,
    status: &str,
) -> FitRow {
    match fit {
        Ok(m) => FitRow {
            model: name.into(),
            scope: scope.into(),
            params: describe(&m),
            n: h.total() as usize,
            kld_bits: Some(kld_bits(h, &m)),
            status: status.into(),
        },
        Err(e) => FitRow {
            model: name.into(),
            scope: scope.into(),
            params: String::new(),
            n: h.total() as usize,
            kld_bits: None,
            status: format!("failed: {e}").replace(',', ";"),
        },
    }
}

fn hist_values<T: Scalar>(values: impl Iterator<Item = T>, include_zeros: bool) -> Vec<T> {
    values.filter(|v| include_zeros || *v != T::zero()).collect()
}

/// KLDs of Laplacian, MOE, JOE and CMOE fits against the global and per-row
/// empirical histograms of the coefficients. Fits use nonzero values only.
pub fn fit_report<T: Scalar>(a: &CoeffMatrix<T>, opts: &FitOptions) -> Result<FitReport> {
    let view = a.view();
    // column-major, i.e. sample by sample
    let stream: Vec<T> = view.t().iter().copied().collect();
    let nonzero: Vec<T> = stream.iter().copied().filter(|v| *v != T::zero()).collect();
    if nonzero.is_empty() {
        return Err(Error::Estimation("coefficient matrix has no nonzero entries".into()));
    }
    let global_h = quantize_hist(&hist_values(stream.iter().copied(), opts.include_zeros), opts.delta)?;
    let lap = laplacian_mle(&nonzero).map(PriorModel::from).map_err(|e| e.to_string());
    let moe = moe_fit(&nonzero).map(PriorModel::from).map_err(|e| e.to_string());
    let joe = joe_fit(&nonzero).map(PriorModel::from).map_err(|e| e.to_string());
    let cmoe = cmoe_from_samples(&nonzero, opts.cmoe_n0).map(PriorModel::from).map_err(|e| e.to_string());
    let mut rows = vec![
        fitted("laplacian", "global", lap.clone(), &global_h, "ok"),
        fitted("moe", "global", moe.clone(), &global_h, "ok"),
        fitted("joe", "global", joe, &global_h, "ok"),
        fitted(&format!("cmoe(n0={})", opts.cmoe_n0), "global", cmoe, &global_h, "ok"),
    ];

    let per_row: Vec<Vec<FitRow>> = (0..a.rows())
        .into_par_iter()
        .map(|k| {
            let scope = format!("row:{k}");
            let row = view.row(k);
            let nz: Vec<T> = row.iter().copied().filter(|v| *v != T::zero()).collect();
            if nz.is_empty() {
                return vec![FitRow {
                    model: "-".into(),
                    scope,
                    params: String::new(),
                    n: 0,
                    kld_bits: None,
                    status: "degenerate".into(),
                }];
            }
            let h = match quantize_hist(&hist_values(row.iter().copied(), opts.include_zeros), opts.delta) {
                Ok(h) => h,
                Err(e) => {
                    return vec![FitRow {
                        model: "-".into(),
                        scope,
                        params: String::new(),
                        n: 0,
                        kld_bits: None,
                        status: format!("failed: {e}"),
                    }]
                }
            };
            let row_moe = if nz.len() >= opts.min_row_nonzeros {
                moe_fit(&nz).map(PriorModel::from).ok()
            } else {
                None
            };
            let (row_moe, moe_status) = match row_moe {
                Some(m) => (Ok(m), "ok"),
                None => (moe.clone(), "fallback"),
            };
            vec![
                fitted("laplacian", &scope, laplacian_mle(&nz).map(PriorModel::from).map_err(|e| e.to_string()), &h, "ok"),
                fitted("moe", &scope, row_moe, &h, moe_status),
                fitted("laplacian-global", &scope, lap.clone(), &h, "ok"),
                fitted("moe-global", &scope, moe.clone(), &h, "ok"),
            ]
        })
        .collect();
    let detail: Vec<FitRow> = per_row.into_iter().flatten().collect();

    for (name, label) in [
        ("laplacian", "laplacian(per-row fit)"),
        ("moe", "moe(per-row fit)"),
        ("laplacian-global", "laplacian(global fit)"),
        ("moe-global", "moe(global fit)"),
    ] {
        let mut weight = 0.0;
        let mut acc = 0.0;
        let mut failed = 0;
        for r in detail.iter().filter(|r| r.model == name) {
            match r.kld_bits {
                Some(k) => {
                    acc += k * r.n as f64;
                    weight += r.n as f64;
                }
                None => failed += 1,
            }
        }
        rows.push(FitRow {
            model: label.into(),
            scope: "per-row".into(),
            params: String::new(),
            n: weight as usize,
            kld_bits: (weight > 0.0).then(|| acc / weight),
            status: if failed == 0 { "ok".into() } else { format!("failed: {failed} rows") },
        });
    }
    rows.extend(detail);
    Ok(FitReport {
        entropy_bits: entropy_bits(&global_h),
        rows,
    })
}

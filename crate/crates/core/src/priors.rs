//! Coefficient priors and the regularizers they induce.
//!
//! Each model is a mixture of exponentials `∫ θe^{−θ|a|}/2 · w(θ) dθ`:
//!
//! - Laplacian: `w` is a point mass at θ.
//! - MOE: `w` is Gamma(κ, β), giving `½κβ^κ(|a|+β)^{−(κ+1)}`.
//! - JOE: `w ∝ 1/θ` on `[θ₁, θ₂]`.
//! - CMOE: the Gamma weight obtained by conditioning the improper `1/θ`
//!   weight on the first `n₀` magnitudes, i.e. MOE(n₀, Σ|a_j|).
//!
//! Regularizers are `ψ = −log density` with additive constants dropped and
//! the Laplacian rate folded into λ, so ψ(t) = t, log(t+β) and
//! `log t − log(e^{−θ₁t} − e^{−θ₂t})` respectively. All logarithms here are
//! natural.

use rand::Rng;
use rand_distr::{Distribution, Exp1, OpenClosed01};

use crate::{Error, Result, Scalar};

fn check_positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianParams<T> {
    theta: T,
}

impl<T: Scalar> LaplacianParams<T> {
    pub fn new(theta: T) -> Result<Self> {
        check_positive("theta", theta)?;
        Ok(Self { theta })
    }

    pub fn theta(&self) -> T {
        self.theta
    }
}

/// Mixture of exponentials with Gamma(κ, β) mixing weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoeParams<T> {
    kappa: T,
    beta: T,
}

impl<T: Scalar> MoeParams<T> {
    pub fn new(kappa: T, beta: T) -> Result<Self> {
        check_positive("kappa", kappa)?;
        check_positive("beta", beta)?;
        Ok(Self { kappa, beta })
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn beta(&self) -> T {
        self.beta
    }
}

/// Mixture of exponentials with Jeffreys weight `1/θ` on `[θ₁, θ₂]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JoeParams<T> {
    theta1: T,
    theta2: T,
}

impl<T: Scalar> JoeParams<T> {
    pub fn new(theta1: T, theta2: T) -> Result<Self> {
        check_positive("theta1", theta1)?;
        check_positive("theta2", theta2)?;
        if theta1 >= theta2 {
            return Err(Error::InvalidParameter(format!(
                "need theta1 < theta2, got [{theta1}, {theta2}]"
            )));
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn theta1(&self) -> T {
        self.theta1
    }

    pub fn theta2(&self) -> T {
        self.theta2
    }

    /// ln(θ₂/θ₁).
    pub fn log_ratio(&self) -> T {
        (self.theta2 / self.theta1).ln()
    }

    fn width(&self) -> T {
        self.theta2 - self.theta1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorModel<T> {
    Laplacian(LaplacianParams<T>),
    Moe(MoeParams<T>),
    Joe(JoeParams<T>),
}

impl<T: Scalar> From<LaplacianParams<T>> for PriorModel<T> {
    fn from(p: LaplacianParams<T>) -> Self {
        PriorModel::Laplacian(p)
    }
}

impl<T: Scalar> From<MoeParams<T>> for PriorModel<T> {
    fn from(p: MoeParams<T>) -> Self {
        PriorModel::Moe(p)
    }
}

impl<T: Scalar> From<JoeParams<T>> for PriorModel<T> {
    fn from(p: JoeParams<T>) -> Self {
        PriorModel::Joe(p)
    }
}

/// `(1 − e^{−x})/x`, equal to 1 at `x = 0`.
fn one_minus_exp_over<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        -(-x).exp_m1() / x
    }
}

impl<T: Scalar> PriorModel<T> {
    pub fn laplacian(theta: T) -> Result<Self> {
        LaplacianParams::new(theta).map(Self::Laplacian)
    }

    pub fn moe(kappa: T, beta: T) -> Result<Self> {
        MoeParams::new(kappa, beta).map(Self::Moe)
    }

    pub fn joe(theta1: T, theta2: T) -> Result<Self> {
        JoeParams::new(theta1, theta2).map(Self::Joe)
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorModel::Laplacian(_) => "laplacian",
            PriorModel::Moe(_) => "moe",
            PriorModel::Joe(_) => "joe",
        }
    }

    /// Symmetric density at `a`.
    pub fn pdf(&self, a: T) -> T {
        let t = a.abs();
        let half = T::lit(0.5);
        match *self {
            PriorModel::Laplacian(p) => half * p.theta * (-p.theta * t).exp(),
            PriorModel::Moe(p) => {
                half * p.kappa / p.beta * (T::one() + t / p.beta).powf(-(p.kappa + T::one()))
            }
            PriorModel::Joe(p) => {
                // e^{−θ₁t}·(1 − e^{−Δt})/t with the t→0 limit Δ
                let w = p.width();
                (-p.theta1 * t).exp() * w * one_minus_exp_over(w * t) / (T::lit(2.0) * p.log_ratio())
            }
        }
    }

    /// One-sided cumulative mass on `[0, t]`, i.e. `P(|a| ≤ t)`.
    pub fn abs_cdf(&self, t: T) -> T {
        let t = t.max(T::zero());
        match *self {
            PriorModel::Laplacian(p) => -(-p.theta * t).exp_m1(),
            PriorModel::Moe(p) => T::one() - (T::one() + t / p.beta).powf(-p.kappa),
            PriorModel::Joe(p) => {
                // ∫₀ᵗ (e^{−θ₁a} − e^{−θ₂a})/a da = ln(θ₂/θ₁) − E₁(θ₁t) + E₁(θ₂t)
                let e1 = |x: f64| exp_integral_e1(x);
                let (t1, t2) = (p.theta1.as_f64(), p.theta2.as_f64());
                let tf = t.as_f64();
                if tf == 0.0 {
                    return T::zero();
                }
                let lr = (t2 / t1).ln();
                T::lit((lr - e1(t1 * tf) + e1(t2 * tf)) / lr).clamp(T::zero(), T::one())
            }
        }
    }

    /// Regularizer ψ(t) for `t ≥ 0`.
    pub fn reg_value(&self, t: T) -> Result<T> {
        check_nonneg(t)?;
        Ok(self.psi(t))
    }

    /// Derivative ψ′(t) for `t ≥ 0`; at 0 it is the right limit.
    pub fn reg_deriv(&self, t: T) -> Result<T> {
        check_nonneg(t)?;
        Ok(self.dpsi(t))
    }

    pub(crate) fn psi(&self, t: T) -> T {
        match *self {
            PriorModel::Laplacian(_) => t,
            PriorModel::Moe(p) => (t + p.beta).ln(),
            PriorModel::Joe(p) => {
                // θ₁t + log t − log(1 − e^{−Δt}) written without cancellation
                let w = p.width();
                p.theta1 * t - w.ln() - one_minus_exp_over(w * t).ln()
            }
        }
    }

    pub(crate) fn dpsi(&self, t: T) -> T {
        match *self {
            PriorModel::Laplacian(_) => T::one(),
            PriorModel::Moe(p) => T::one() / (t + p.beta),
            PriorModel::Joe(p) => {
                let w = p.width();
                let x = w * t;
                if x < T::lit(0.05) {
                    // 1/t − Δ/(e^{Δt} − 1) via the Bernoulli series of x/(eˣ − 1)
                    let x2 = x * x;
                    let series = T::lit(0.5)
                        - x / T::lit(12.0)
                        + x * x2 / T::lit(720.0)
                        - x * x2 * x2 / T::lit(30240.0)
                        + x * x2 * x2 * x2 / T::lit(1209600.0);
                    p.theta1 + w * series
                } else {
                    p.theta1 + T::one() / t - w / x.exp_m1()
                }
            }
        }
    }

    /// Mean of θ under the mixing weight.
    pub fn expected_rate(&self) -> T {
        match *self {
            PriorModel::Laplacian(p) => p.theta,
            PriorModel::Moe(p) => p.kappa / p.beta,
            PriorModel::Joe(p) => p.width() / p.log_ratio(),
        }
    }

    /// Draws one symmetric sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let magnitude: f64 = match *self {
            PriorModel::Laplacian(p) => {
                let e: f64 = Exp1.sample(rng);
                e / p.theta.as_f64()
            }
            PriorModel::Moe(p) => {
                // inverse of the one-sided CDF 1 − (β/(a+β))^κ
                let u: f64 = OpenClosed01.sample(rng);
                p.beta.as_f64() * (u.powf(-1.0 / p.kappa.as_f64()) - 1.0)
            }
            PriorModel::Joe(p) => {
                let u: f64 = rng.random();
                let theta = p.theta1.as_f64() * (p.log_ratio().as_f64() * u).exp();
                let e: f64 = Exp1.sample(rng);
                e / theta
            }
        };
        let v = T::lit(magnitude);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    }
}

fn check_nonneg<T: Scalar>(t: T) -> Result<()> {
    if t >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "regularizer argument must be nonnegative, got {t}"
        )))
    }
}

/// Exponential integral E₁(x) for x > 0.
fn exp_integral_e1(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER - x.ln() + sum
    } else if x > 700.0 {
        0.0
    } else {
        // continued fraction (modified Lentz)
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// θ̂ = (number of nonzero values) / Σ|values|.
pub fn laplacian_mle<T: Scalar>(values: &[T]) -> Result<LaplacianParams<T>> {
    let (count, sum) = values
        .iter()
        .filter(|v| **v != T::zero())
        .fold((0usize, T::zero()), |(n, s), v| (n + 1, s + v.abs()));
    if count == 0 {
        return Err(Error::Estimation(
            "Laplacian fit needs at least one nonzero value".into(),
        ));
    }
    LaplacianParams::new(T::of_count(count) / sum)
}

/// Non-central moment `E|a|^i = βⁱ·i! / ∏_{j=1..i}(κ − j)`, defined for κ > i.
pub fn moe_moment<T: Scalar>(p: &MoeParams<T>, order: u32) -> Result<T> {
    if order == 0 || p.kappa <= T::lit(order as f64) {
        return Err(Error::UndefinedMoment {
            order,
            kappa: p.kappa.as_f64(),
        });
    }
    let mut m = T::one();
    for j in 1..=order {
        let j = T::lit(j as f64);
        m = m * p.beta * j / (p.kappa - j);
    }
    Ok(m)
}

/// Method of moments: κ̂ = 2(μ₂ − μ₁²)/(μ₂ − 2μ₁²), β̂ = (κ̂ − 1)μ₁.
pub fn moe_fit_moments<T: Scalar>(mu1: T, mu2: T) -> Result<MoeParams<T>> {
    if !(mu1 > T::zero()) || !mu1.is_finite() || !mu2.is_finite() {
        return Err(Error::Estimation(format!(
            "MOE fit needs a positive first moment, got mu1 = {mu1}"
        )));
    }
    let m1sq = mu1 * mu1;
    let denom = mu2 - T::lit(2.0) * m1sq;
    if !(denom > T::zero()) {
        return Err(Error::Estimation(format!(
            "MOE fit needs mu2 > 2*mu1^2 (heavier than Laplacian tails), got mu1 = {mu1}, mu2 = {mu2}"
        )));
    }
    let kappa = T::lit(2.0) * (mu2 - m1sq) / denom;
    MoeParams::new(kappa, (kappa - T::one()) * mu1)
        .map_err(|e| Error::Estimation(e.to_string()))
}

/// Sample first and second moments of the nonzero magnitudes.
pub fn abs_moments<T: Scalar>(values: &[T]) -> Result<(T, T)> {
    let mut n = 0usize;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for v in values.iter().filter(|v| **v != T::zero()) {
        let a = v.abs().as_f64();
        n += 1;
        s1 += a;
        s2 += a * a;
    }
    if n == 0 {
        return Err(Error::Estimation("no nonzero values".into()));
    }
    Ok((T::lit(s1 / n as f64), T::lit(s2 / n as f64)))
}

pub fn moe_fit<T: Scalar>(values: &[T]) -> Result<MoeParams<T>> {
    let (mu1, mu2) = abs_moments(values)?;
    moe_fit_moments(mu1, mu2)
}

/// CMOE: MOE(n₀, Σ_{j<n₀}|a_j|) from the first `n0` samples.
pub fn cmoe_from_samples<T: Scalar>(samples: &[T], n0: usize) -> Result<MoeParams<T>> {
    if n0 == 0 {
        return Err(Error::InvalidParameter("n0 must be at least 1".into()));
    }
    if samples.len() < n0 {
        return Err(Error::Estimation(format!(
            "CMOE needs {n0} samples, got {}",
            samples.len()
        )));
    }
    let head = &samples[..n0];
    if head.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation("non-finite sample".into()));
    }
    let sum: T = head.iter().map(|v| v.abs()).sum();
    if !(sum > T::zero()) {
        return Err(Error::Estimation("CMOE needs a nonzero sample".into()));
    }
    MoeParams::new(T::of_count(n0), sum)
}

/// `E|a|^i = (i−1)!/ln(θ₂/θ₁) · (θ₁^{−i} − θ₂^{−i})`.
pub fn joe_moment<T: Scalar>(p: &JoeParams<T>, order: u32) -> Result<T> {
    if order == 0 {
        return Err(Error::InvalidParameter("moment order must be >= 1".into()));
    }
    let fact: f64 = (1..order).map(|j| j as f64).product();
    let i = order as i32;
    Ok(T::lit(fact) * (p.theta1.powi(-i) - p.theta2.powi(-i)) / p.log_ratio())
}

/// θ₁ and θ₂ from the first two moments once the ratio r = θ₂/θ₁ is fixed.
pub fn joe_fit_fixed_ratio<T: Scalar>(mu1: T, mu2: T, ratio: T) -> Result<JoeParams<T>> {
    if !(ratio > T::one()) {
        return Err(Error::Estimation(format!("ratio must exceed 1, got {ratio}")));
    }
    if !(mu1 > T::zero() && mu2 > T::zero()) {
        return Err(Error::Estimation("moments must be positive".into()));
    }
    let lr = ratio.ln();
    let theta1 = T::lit(2.0) * mu1 / (mu2 + lr * mu1 * mu1);
    JoeParams::new(theta1, theta1 * ratio).map_err(|e| Error::Estimation(e.to_string()))
}

/// Method of moments for JOE. The ratio r = θ₂/θ₁ solves
/// `r(μ₂ − μ₁² ln r) = μ₂ + μ₁² ln r`; the smallest root above 1 is taken.
pub fn joe_fit_moments<T: Scalar>(mu1: T, mu2: T) -> Result<JoeParams<T>> {
    let (m1, m2) = (mu1.as_f64(), mu2.as_f64());
    if !(m1 > 0.0 && m2 > 0.0) || !m1.is_finite() || !m2.is_finite() {
        return Err(Error::Estimation(format!(
            "JOE fit needs positive moments, got mu1 = {m1}, mu2 = {m2}"
        )));
    }
    if m2 <= m1 * m1 {
        return Err(Error::Estimation(format!(
            "JOE fit needs positive variance, got mu1 = {m1}, mu2 = {m2}"
        )));
    }
    // in terms of u = r − 1: g(u) = u·μ₂ − (2 + u)·μ₁²·ln(1 + u)
    let sq = m1 * m1;
    let g = |s: f64| {
        let u = s.exp();
        u * m2 - (2.0 + u) * sq * u.ln_1p()
    };
    let (lo, hi) = (1e-9f64.ln(), (1e9f64 - 1.0).ln());
    const GRID: usize = 512;
    let mut prev_s = lo;
    let mut prev_g = g(lo);
    let mut bracket = None;
    for i in 1..=GRID {
        let s = lo + (hi - lo) * i as f64 / GRID as f64;
        let gs = g(s);
        if (prev_g > 0.0 && gs <= 0.0) || (prev_g < 0.0 && gs >= 0.0) {
            bracket = Some((prev_s, s));
            break;
        }
        prev_s = s;
        prev_g = gs;
    }
    let (mut a, mut b) = bracket.ok_or_else(|| {
        Error::Estimation(format!(
            "no sign change for the JOE ratio equation in (1, 1e9] (mu1 = {m1}, mu2 = {m2}); \
             fix the ratio instead"
        ))
    })?;
    let ga = g(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (g(mid) > 0.0) == (ga > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    let ratio = 1.0 + (0.5 * (a + b)).exp();
    joe_fit_fixed_ratio(mu1, mu2, T::lit(ratio))
}

pub fn joe_fit<T: Scalar>(values: &[T]) -> Result<JoeParams<T>> {
    let (mu1, mu2) = abs_moments(values)?;
    joe_fit_moments(mu1, mu2)
}

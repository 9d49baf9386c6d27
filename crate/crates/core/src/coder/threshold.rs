use crate::{PriorModel, Scalar};

/// `argmin_a (x − a)² + t|a|`, i.e. `sign(x)·max(|x| − t/2, 0)`.
pub fn soft_threshold<T: Scalar>(x: T, t: T) -> T {
    let m = x.abs() - t * T::lit(0.5);
    if m > T::zero() {
        m.copysign(x)
    } else {
        T::zero()
    }
}

/// Global minimizer of `(x − a)² + λψ(|a|)`.
///
/// Stationary points on the positive branch are compared against `a = 0`;
/// ties go to zero.
pub fn scalar_threshold<T: Scalar>(x: T, lambda: T, model: &PriorModel<T>) -> T {
    if !(lambda > T::zero()) {
        return x;
    }
    let ax = x.abs();
    let f = |a: T| (ax - a) * (ax - a) + lambda * model.psi(a);
    let mut best = T::zero();
    let mut best_val = f(T::zero());
    let mut consider = |a: T| {
        if a > T::zero() && a <= ax {
            let v = f(a);
            if v < best_val {
                best_val = v;
                best = a;
            }
        }
    };
    match model {
        PriorModel::Laplacian(_) => consider(ax - lambda * T::lit(0.5)),
        PriorModel::Moe(p) => {
            // 2(a − x)(a + β) + λ = 0; the larger root is the local minimum
            let disc = (ax + p.beta()) * (ax + p.beta()) - T::lit(2.0) * lambda;
            if disc >= T::zero() {
                consider(((ax - p.beta()) + disc.sqrt()) * T::lit(0.5));
            }
        }
        PriorModel::Joe(_) => {
            for a in stationary_minima(ax, |a| T::lit(2.0) * (a - ax) + lambda * model.dpsi(a)) {
                consider(a);
            }
        }
    }
    best.copysign(x)
}

/// Sign changes of `h` from negative to positive on `(0, hi]`, refined by bisection.
fn stationary_minima<T: Scalar>(hi: T, h: impl Fn(T) -> T) -> Vec<T> {
    const GRID: usize = 256;
    let mut out = Vec::new();
    if !(hi > T::zero()) {
        return out;
    }
    let step = hi / T::of_count(GRID);
    let mut prev_t = T::zero();
    let mut prev_h = h(prev_t);
    for i in 1..=GRID {
        let t = step * T::of_count(i);
        let ht = h(t);
        if prev_h < T::zero() && ht >= T::zero() {
            let (mut lo, mut up) = (prev_t, t);
            for _ in 0..200 {
                let mid = (lo + up) * T::lit(0.5);
                if mid <= lo || mid >= up {
                    break;
                }
                if h(mid) < T::zero() {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            out.push((lo + up) * T::lit(0.5));
        }
        prev_t = t;
        prev_h = ht;
    }
    out
}

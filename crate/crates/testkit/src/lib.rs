//! Reference oracles for the mkf test suites.
//!
//! Nothing here calls into `mkf-core`: each oracle reaches its answer by a
//! different route than the implementation it checks.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Scalar linear-Gaussian model in the same shape as `FilterParams`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarModel {
    pub f: f64,
    pub h: f64,
    pub gu: f64,
    pub q: f64,
    pub r: f64,
    pub x0: f64,
    pub p0: f64,
}

impl ScalarModel {
    pub fn random_walk(q: f64, r: f64, x0: f64, p0: f64) -> Self {
        ScalarModel {
            f: 1.0,
            h: 1.0,
            gu: 0.0,
            q,
            r,
            x0,
            p0,
        }
    }
}

/// Batch maximum-a-posteriori estimate of the whole state sequence.
///
/// Minimizes
///
/// ```text
/// J(x) = (x_0 - m_0)^2 / P_0 + sum_{k>=1} (x_k - f x_{k-1} - gu)^2 / q
///      + sum_k (y_k - h x_k)^2 / r
/// ```
///
/// where `m_0 = f*x0 + gu` and `P_0 = f^2*p0 + q` are the moments of the
/// first predicted state. The normal equations, scaled by `q*r`, are
/// tridiagonal and are solved with the Thomas algorithm followed by iterative
/// refinement. The refinement residual is formed from `q`, `r`, `y` and the
/// state increments in double-double arithmetic rather than from the rounded
/// matrix entries, which would otherwise lose the `1/r` term next to `2/q`
/// when `q << r`. Requires q > 0, r > 0.
pub fn batch_map_smooth(y: &[f64], m: &ScalarModel) -> Vec<f64> {
    assert!(m.q > 0.0 && m.r > 0.0, "batch oracle needs q > 0 and r > 0");
    let n = y.len();
    assert!(n > 0);
    let prior_var = m.f * m.f * m.p0 + m.q;
    let prior_mean = m.f * m.x0 + m.gu;
    let prior_w = m.q * m.r / prior_var;

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        diag[k] = m.q * m.h * m.h;
        if k == 0 {
            diag[k] += prior_w;
        } else {
            diag[k] += m.r;
        }
        if k + 1 < n {
            diag[k] += m.r * m.f * m.f;
            off[k] = -m.r * m.f;
        }
    }

    let mut x = vec![0.0; n];
    for _ in 0..6 {
        let res = residual(y, m, prior_mean, prior_w, &x);
        let dx = thomas(&diag, &off, &res);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    x
}

/// Symmetric tridiagonal solve (Thomas algorithm).
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = if n > 1 { off[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for k in 1..n {
        denom = diag[k] - off[k - 1] * c[k - 1];
        if k + 1 < n {
            c[k] = off[k] / denom;
        }
        d[k] = (rhs[k] - off[k - 1] * d[k - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = d[k] - c[k] * x[k + 1];
    }
    x
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Unevaluated sum `hi + lo` carrying about twice the f64 precision.
#[derive(Debug, Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from(a: f64) -> Dd {
        Dd(a, 0.0)
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let (hi, lo) = two_sum(s, e + self.1 + o.1);
        Dd(hi, lo)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.0, b);
        let (hi, lo) = two_sum(p, e + self.1 * b);
        Dd(hi, lo)
    }
}

/// `q*r*(b - A x)` for the normal equations of [`batch_map_smooth`], with
/// every term built from the model inputs in double-double.
fn residual(y: &[f64], m: &ScalarModel, prior_mean: f64, prior_w: f64, x: &[f64]) -> Vec<f64> {
    let n = y.len();
    // process innovation x_k - f x_{k-1} - gu
    let w = |k: usize| {
        Dd::from(x[k])
            .add(Dd::from(x[k - 1]).mul(m.f).neg())
            .add(Dd::from(-m.gu))
    };
    (0..n)
        .map(|k| {
            // q h (y_k - h x_k)
            let meas = Dd::from(y[k])
                .add(Dd::from(x[k]).mul(m.h).neg())
                .mul(m.h)
                .mul(m.q);
            let mut acc = meas;
            if k == 0 {
                acc = acc.add(Dd::from(x[0]).add(Dd::from(-prior_mean)).mul(prior_w).neg());
            } else {
                acc = acc.add(w(k).mul(m.r).neg());
            }
            if k + 1 < n {
                acc = acc.add(w(k + 1).mul(m.f).mul(m.r));
            }
            acc.0 + acc.1
        })
        .collect()
}

/// Exact rational evaluation of one predict/update cycle, rounded once to
/// f64 at the end: `[x_prior, p_prior, gain, x_post, p_post]`.
///
/// Returns `None` when the gain denominator is exactly zero.
#[allow(clippy::too_many_arguments)]
pub fn exact_kf_step(
    x_prev: f64,
    p_prev: f64,
    y: f64,
    f: f64,
    h: f64,
    gu: f64,
    q: f64,
    r: f64,
) -> Option<[f64; 5]> {
    let q_ = |v: f64| BigRational::from_float(v).expect("finite input");
    let (x_prev, p_prev, y, f, h, gu, q, r) = (
        q_(x_prev),
        q_(p_prev),
        q_(y),
        q_(f),
        q_(h),
        q_(gu),
        q_(q),
        q_(r),
    );
    let p_prior = &f * &p_prev * &f + &q;
    let denom = &h * &p_prior * &h + &r;
    if denom.is_zero() {
        return None;
    }
    let gain = &p_prior * &h / &denom;
    let x_prior = &f * &x_prev + &gu;
    let x_post = &x_prior + &gain * (&y - &h * &x_prior);
    let one = BigRational::from_integer(BigInt::from(1));
    let p_post = (one - &gain * &h) * &p_prior;
    let to = |v: &BigRational| v.to_f64().expect("representable");
    Some([
        to(&x_prior),
        to(&p_prior),
        to(&gain),
        to(&x_post),
        to(&p_post),
    ])
}

/// `max |a - b| / max |b|`, with the denominator floored at `floor`.
pub fn rel_max_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(floor);
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Index of the largest element; first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_step() {
        let out = exact_kf_step(0.0, 1.0, 2.0, 1.0, 1.0, 0.0, 0.1, 1.0).unwrap();
        assert_eq!(out[1], 1.1);
        assert!((out[2] - 1.1 / 2.1).abs() < 1e-16);
        assert!((out[3] - 2.2 / 2.1).abs() < 1e-15);
        assert!((out[4] - 1.1 * (1.0 - 1.1 / 2.1)).abs() < 1e-15);
    }

    #[test]
    fn zero_denominator() {
        assert!(exact_kf_step(0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0).is_none());
    }

    #[test]
    fn map_of_single_observation_is_precision_weighted_mean() {
        // x ~ N(m0, P0), y = x + v, v ~ N(0, r)
        let m = ScalarModel::random_walk(0.5, 2.0, 1.0, 1.5);
        let x = batch_map_smooth(&[3.0], &m);
        let p0 = 1.5 + 0.5;
        let expect = (1.0 / p0 + 3.0 / 2.0) / (1.0 / p0 + 1.0 / 2.0);
        assert!((x[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn map_is_exact_on_noiseless_constant() {
        let m = ScalarModel::random_walk(1e-3, 1.0, 4.0, 1.0);
        let x = batch_map_smooth(&[4.0; 50], &m);
        assert!(x.iter().all(|v| (v - 4.0).abs() < 1e-13));
    }
}

//! Gamma and Bessel functions of real order and positive real argument.
//!
//! Orders are restricted to `|order| < 1` in the public surface. `J` uses the
//! ascending series below [`SERIES_SWITCH`] and the Hankel asymptotic
//! expansion above it. `K` uses the reflection combination of `I_{±ν}` for
//! `x <= 2` and Steed's continued fraction (Temme's CF2) beyond, where the
//! reflection combination cancels catastrophically.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{brent, CompensatedSum};

/// Argument at which `J` switches from the ascending series to the Hankel expansion.
pub const SERIES_SWITCH: f64 = 12.0;

const K_CF_SWITCH: f64 = 2.0;
const MAX_TERMS: usize = 2000;

/// Relative accuracy target for special-function evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnAccuracy {
    pub rel_tol: f64,
}

impl Default for FnAccuracy {
    fn default() -> Self {
        Self { rel_tol: 1e-12 }
    }
}

impl FnAccuracy {
    pub fn new(rel_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1e-6) {
            return Err(Error::Validation(format!(
                "function accuracy rel_tol = {rel_tol} must lie in (0, 1e-6)"
            )));
        }
        Ok(Self { rel_tol })
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

fn check_pole(x: f64) -> Result<()> {
    if x <= 0.0 && x == x.round() {
        Err(Error::Pole(x))
    } else {
        Ok(())
    }
}

/// Γ(x) for real `x` away from the non-positive integers.
pub fn gamma(x: f64) -> Result<f64> {
    check_pole(x)?;
    Ok(gamma_unchecked(x))
}

pub(crate) fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x)
    }
}

/// ln|Γ(x)|, usable for large arguments where Γ itself overflows.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_pole(x)?;
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin().abs()).ln() - ln_gamma_unchecked(1.0 - x)
    } else {
        let x = x - 1.0;
        let t = x + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln()
    }
}

fn check_order(func: &'static str, order: f64, lo: f64, hi: f64) -> Result<()> {
    if !(order > lo && order < hi) {
        return Err(Error::Domain {
            func,
            msg: format!("order {order} outside ({lo}, {hi})"),
        });
    }
    Ok(())
}

fn check_arg(func: &'static str, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            func,
            msg: format!("argument {x} must be positive and finite"),
        });
    }
    Ok(())
}

/// Ascending series Σ s^k (x/2)^{2k+μ} / (k! Γ(k+μ+1)) with s = -1 for J, +1 for I.
fn ascending_series(order: f64, x: f64, sign: f64) -> f64 {
    let half = 0.5 * x;
    let q = sign * half * half;
    let mut term = half.powf(order) / gamma_unchecked(order + 1.0);
    let mut sum = CompensatedSum::new();
    sum.add(term);
    let mut peak = term.abs();
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + order));
        sum.add(term);
        peak = peak.max(term.abs());
        if term.abs() <= 1e-18 * peak && kf > half {
            break;
        }
    }
    sum.value()
}

/// Hankel asymptotic expansion of J_μ(x) for large x.
pub(crate) fn j_asymptotic(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut p = CompensatedSum::new();
    let mut q = CompensatedSum::new();
    // a_k = Π_{j≤k} (μ - (2j-1)²) / (k! 8^k x^k)
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    p.add(1.0);
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        if a.abs() > prev || a == 0.0 {
            break;
        }
        prev = a.abs();
        // P takes even k with alternating sign, Q odd k.
        match k % 4 {
            0 => p.add(a),
            1 => q.add(a),
            2 => p.add(-a),
            _ => q.add(-a),
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let omega = x - (0.5 * order + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p.value() * omega.cos() - q.value() * omega.sin())
}

pub(crate) fn j_any_order(order: f64, x: f64) -> f64 {
    if x < SERIES_SWITCH {
        j_series(order, x)
    } else {
        j_asymptotic(order, x)
    }
}

pub(crate) fn j_series(order: f64, x: f64) -> f64 {
    ascending_series(order, x, -1.0)
}

pub(crate) fn i_any_order(order: f64, x: f64) -> f64 {
    ascending_series(order, x, 1.0)
}

/// Bessel function of the first kind J_order(x), |order| < 1, x > 0.
pub fn bessel_j(order: f64, x: f64) -> Result<f64> {
    check_order("bessel_j", order, -1.0, 1.0)?;
    check_arg("bessel_j", x)?;
    Ok(j_any_order(order, x))
}

/// Modified Bessel function of the first kind I_order(x), |order| < 1, x > 0.
pub fn bessel_i(order: f64, x: f64) -> Result<f64> {
    check_order("bessel_i", order, -1.0, 1.0)?;
    check_arg("bessel_i", x)?;
    Ok(i_any_order(order, x))
}

/// Modified Bessel function of the second kind K_order(x), 0 < order < 1, x > 0.
pub fn bessel_k(order: f64, x: f64) -> Result<f64> {
    check_order("bessel_k", order, 0.0, 1.0)?;
    check_arg("bessel_k", x)?;
    if x <= K_CF_SWITCH {
        Ok(k_reflection(order, x))
    } else if order <= 0.5 {
        Ok(k_steed(order, x).0)
    } else {
        // K_ν = K_{(ν-1)+1}, with ν-1 ∈ (-1/2, 0)
        Ok(k_steed(order - 1.0, x).1)
    }
}

/// K_ν = π/(2 sin νπ) (I_{-ν} - I_ν).
pub(crate) fn k_reflection(order: f64, x: f64) -> f64 {
    PI / (2.0 * (order * PI).sin()) * (i_any_order(-order, x) - i_any_order(order, x))
}

/// Steed's continued fraction for (K_μ(x), K_{μ+1}(x)), |μ| ≤ 1/2, x ≳ 2.
pub(crate) fn k_steed(mu: f64, x: f64) -> (f64, f64) {
    let xi = 1.0 / x;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k_mu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) * xi;
    (k_mu, k_mu1)
}

/// The first `count` positive zeros of J_order, ascending.
pub fn bessel_j_zeros(order: f64, count: usize) -> Result<Vec<f64>> {
    bessel_j_zeros_with(order, count, FnAccuracy::default())
}

pub fn bessel_j_zeros_with(order: f64, count: usize, acc: FnAccuracy) -> Result<Vec<f64>> {
    check_order("bessel_j_zeros", order, -1.0, 1.0)?;
    if count == 0 {
        return Err(Error::Domain {
            func: "bessel_j_zeros",
            msg: "count must be at least 1".into(),
        });
    }
    let f = |x: f64| j_any_order(order, x);
    let mut zeros = Vec::with_capacity(count);
    // Zeros of J_μ are at least ~π/2 apart for |μ| < 1, so a step of 0.2 never
    // straddles two of them.
    let step = 0.2;
    let mut a = 1e-3;
    let mut fa = f(a);
    while zeros.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let (root, _) =
                brent(f, a, b, fa, fb, acc.rel_tol * b * 1e-2, 200).ok_or_else(|| {
                    Error::Domain {
                        func: "bessel_j_zeros",
                        msg: format!("root refinement failed in [{a}, {b}]"),
                    }
                })?;
            zeros.push(root);
        }
        a = b;
        fa = fb;
    }
    Ok(zeros)
}

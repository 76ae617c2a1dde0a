//! Tr{e^{-tA^θ} - e^{-tA^∞}} from paired spectral sums.
//!
//! With λ_n^θ and λ_n^∞ interlacing (λ_{n-1}^∞ < λ_n^θ ≤ λ_n^∞), the paired
//! terms beyond the last computed index M-1 telescope:
//! Σ_{n≥M} [e^{-tλ_n^θ} - e^{-tλ_n^∞}] ≤ e^{-tλ_{M-1}^∞}, and each term is ≥ 0.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::series::{FractionalSeries, TermKey, Variable};
use crate::error::{Error, Result};
use crate::model::{ExtensionParam, ProblemSpec};
use crate::numerics::{geometric_grid, CompensatedSum};
use crate::specfun::gamma;
use crate::spectrum::{eigenvalues, SpectrumResult};

/// Tail bounds below this are never rejected.
pub const TAIL_FLOOR: f64 = 1e-12;
/// Tail bounds may not exceed this fraction of |value|.
pub const TAIL_REL: f64 = 1e-3;
/// λ_max = CUTOFF_FACTOR / t_min.
pub const CUTOFF_FACTOR: f64 = 40.0;
/// Relative accuracy assumed for every computed eigenvalue.
const EIGEN_REL_ERR: f64 = 1e-12;

/// 40 points, logarithmic on [1e-3, 1].
pub fn default_t_grid() -> Vec<f64> {
    geometric_grid(1e-3, 1.0, 40)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCurve {
    pub extension: ExtensionParam,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_bounds: Vec<f64>,
}

impl TraceCurve {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// First point whose tail bound is neither below the floor nor small
    /// relative to the value.
    pub fn invariant_violation(&self) -> Option<usize> {
        self.values
            .iter()
            .zip(&self.tail_bounds)
            .position(|(v, b)| !(*b <= TAIL_FLOOR || *b <= TAIL_REL * v.abs()))
    }

    /// Restriction to t in [lo, hi].
    pub fn window(&self, lo: f64, hi: f64) -> TraceCurve {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.t_grid[i] >= lo && self.t_grid[i] <= hi)
            .collect();
        TraceCurve {
            extension: self.extension,
            t_grid: idx.iter().map(|&i| self.t_grid[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            tail_bounds: idx.iter().map(|&i| self.tail_bounds[i]).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value,tail_bound\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{:e},{:e},{:e}",
                self.t_grid[i], self.values[i], self.tail_bounds[i]
            );
        }
        s
    }

    pub fn from_csv(text: &str, extension: ExtensionParam) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "t,value,tail_bound" => {}
            other => {
                return Err(Error::Validation(format!(
                    "trace CSV header must be t,value,tail_bound, found {other:?}"
                )))
            }
        }
        let mut curve = TraceCurve {
            extension,
            t_grid: vec![],
            values: vec![],
            tail_bounds: vec![],
        };
        for (i, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::Validation(format!("trace CSV row {}: bad number {s:?}", i + 1))
                })
            };
            if cols.len() != 3 {
                return Err(Error::Validation(format!(
                    "trace CSV row {} needs 3 columns",
                    i + 1
                )));
            }
            curve.t_grid.push(parse(cols[0])?);
            curve.values.push(parse(cols[1])?);
            curve.tail_bounds.push(parse(cols[2])?);
        }
        check_t_grid(&curve.t_grid)?;
        Ok(curve)
    }
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Validation("empty t grid".into()));
    }
    if !t_grid.iter().all(|t| *t > 0.0 && t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Validation(
            "t grid must be positive, finite and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Computes both spectra up to 40/t_min and sums them.
pub fn heat_trace_diff(
    spec: &ProblemSpec,
    theta: ExtensionParam,
    t_grid: &[f64],
) -> Result<TraceCurve> {
    heat_trace_diff_with_cutoff(spec, theta, t_grid, None)
}

/// As [`heat_trace_diff`] with an explicit λ_max (at least 40/t_min).
pub fn heat_trace_diff_with_cutoff(
    spec: &ProblemSpec,
    theta: ExtensionParam,
    t_grid: &[f64],
    lambda_max: Option<f64>,
) -> Result<TraceCurve> {
    if theta == ExtensionParam::Infinity {
        return Err(Error::Validation("heat trace needs a finite θ".into()));
    }
    check_t_grid(t_grid)?;
    let needed = CUTOFF_FACTOR / t_grid[0];
    let lambda_max = lambda_max.unwrap_or(needed);
    if lambda_max < needed * (1.0 - 1e-12) {
        return Err(Error::Validation(format!(
            "lambda_max = {lambda_max} below 40/t_min = {needed}"
        )));
    }
    let (a, b) = rayon::join(
        || eigenvalues(spec, theta, lambda_max),
        || eigenvalues(spec, ExtensionParam::Infinity, lambda_max),
    );
    heat_trace_from_spectra(&a?, &b?, t_grid)
}

/// Paired sum over two precomputed spectra.
pub fn heat_trace_from_spectra(
    theta: &SpectrumResult,
    inf: &SpectrumResult,
    t_grid: &[f64],
) -> Result<TraceCurve> {
    check_t_grid(t_grid)?;
    let m = theta.len().min(inf.len());
    if m == 0 {
        return Err(Error::InsufficientSpectrum("no eigenvalues to pair".into()));
    }
    let (lt, li) = (&theta.eigenvalues[..m], &inf.eigenvalues[..m]);
    let points: Vec<(f64, f64)> = t_grid
        .par_iter()
        .map(|&t| {
            let mut sum = CompensatedSum::new();
            let mut err = CompensatedSum::new();
            for (&a, &b) in lt.iter().zip(li) {
                // e^{-ta} - e^{-tb} without cancellation.
                let ea = (-t * a).exp();
                sum.add(-ea * (-t * (b - a)).exp_m1());
                err.add(t * EIGEN_REL_ERR * (a.abs() * ea + b.abs() * (-t * b).exp()));
            }
            let tail = (-t * li[m - 1]).exp();
            (sum.value(), tail + err.value())
        })
        .collect();
    let curve = TraceCurve {
        extension: theta.extension,
        t_grid: t_grid.to_vec(),
        values: points.iter().map(|p| p.0).collect(),
        tail_bounds: points.iter().map(|p| p.1).collect(),
    };
    if let Some(i) = curve.invariant_violation() {
        return Err(Error::InsufficientSpectrum(format!(
            "tail bound {:e} too large against value {:e} at t = {} ({m} pairs up to λ = {})",
            curve.tail_bounds[i],
            curve.values[i],
            curve.t_grid[i],
            li[m - 1]
        )));
    }
    Ok(curve)
}

/// Term map z^{-s} → t^{s-1}/Γ(s).
pub fn heat_trace_from_resolvent_series(series: &FractionalSeries) -> Result<FractionalSeries> {
    if series.variable != Variable::Z {
        return Err(Error::Series("expected a z-series".into()));
    }
    let mut out = FractionalSeries::zero(Variable::T, series.nu, series.truncation_order - 1.0);
    for (k, c) in &series.terms {
        let s = k.exponent.value(series.nu);
        if !(s > 0.0) {
            return Err(Error::Series(format!(
                "exponent z^-{s} is not positive; its inverse transform is distributional"
            )));
        }
        let mut e = k.exponent;
        e.p -= 2;
        let key = TermKey {
            exponent: e,
            theta_power: k.theta_power,
        };
        *out.terms.entry(key).or_insert(0.0) += c / gamma(s)?;
    }
    Ok(out)
}

/// ∫₀^∞ e^{-zt} Tr(t) dt from a trace curve: Simpson in ln t over the grid,
/// the value at t_min held constant below it, and the exact spectral sum
/// beyond t_max.
pub fn laplace_transform(
    curve: &TraceCurve,
    theta: &SpectrumResult,
    inf: &SpectrumResult,
    z: f64,
) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain {
            func: "laplace_transform",
            msg: format!("z = {z} must be positive"),
        });
    }
    let n = curve.len();
    if n < 3 {
        return Err(Error::Quadrature("need at least 3 points".into()));
    }
    let u: Vec<f64> = curve.t_grid.iter().map(|t| t.ln()).collect();
    let g: Vec<f64> = (0..n)
        .map(|i| {
            let t = curve.t_grid[i];
            (-z * t).exp() * curve.values[i] * t
        })
        .collect();
    let body = simpson(&u, &g);
    let (t0, t1) = (curve.t_grid[0], curve.t_grid[n - 1]);
    let head = curve.values[0] * -(-z * t0).exp_m1() / z;
    let m = theta.len().min(inf.len());
    let mut tail = CompensatedSum::new();
    for (&a, &b) in theta.eigenvalues[..m].iter().zip(&inf.eigenvalues[..m]) {
        tail.add((-(z + a) * t1).exp() / (z + a) - (-(z + b) * t1).exp() / (z + b));
    }
    Ok(head + body + tail.value())
}

/// Composite Simpson on a non-uniform grid.
fn simpson(x: &[f64], f: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (x[i + 1] - x[i], x[i + 2] - x[i + 1]);
        let hs = h0 + h1;
        s += hs / 6.0
            * (f[i] * (2.0 - h1 / h0)
                + f[i + 1] * hs * hs / (h0 * h1)
                + f[i + 2] * (2.0 - h0 / h1));
        i += 2;
    }
    if i + 1 < n {
        // Odd interval count: parabola through the last three points.
        let (x0, x1, x2) = (x[n - 3], x[n - 2], x[n - 1]);
        let (h0, h1) = (x1 - x0, x2 - x1);
        s += h1 / 6.0
            * (-f[n - 3] * h1 * h1 / (h0 * (h0 + h1))
                + f[n - 2] * (3.0 + h1 / h0)
                + f[n - 1] * (2.0 * h1 + 3.0 * h0) / (h0 + h1));
    }
    s
}

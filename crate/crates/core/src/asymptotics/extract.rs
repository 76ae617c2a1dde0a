//! Large-z series of H and of the base resolvent trace, and the small-t
//! expansion they predict.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{weighted_lsq, MAX_FIT_COND};
use super::series::{
    krein_factor, series_inverse, series_mul, FractionalSeries, LatticeExponent, Variable,
};
use crate::error::{Error, Result};
use crate::green_krein::{free_krein_constant, resolvent_trace_diff, KreinFunction};
use crate::heattrace::heat_trace_from_resolvent_series;
use crate::model::{BoundaryMode, ExtensionParam, ProblemSpec};

/// |h₀ - 1| allowed before the fixed-h₀ refit.
pub const H0_GATE: f64 = 1e-6;
/// Default truncation of predicted t-series.
pub const DEFAULT_TRUNCATION: f64 = 3.0;

fn check_z_grid(z_grid: &[f64]) -> Result<()> {
    if z_grid.len() < 12 {
        return Err(Error::Validation(format!(
            "z grid needs at least 12 points, got {}",
            z_grid.len()
        )));
    }
    if !z_grid.iter().all(|z| *z > 0.0 && z.is_finite()) || z_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Validation(
            "z grid must be positive and ascending".into(),
        ));
    }
    if z_grid[z_grid.len() - 1] / z_grid[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Validation(
            "z grid must span at least two decades".into(),
        ));
    }
    Ok(())
}

fn half_line(spec: &ProblemSpec) -> ProblemSpec {
    spec.with_mode(BoundaryMode::HalfLine)
}

/// Columns z^{-k/2} for k in ks.
fn powers(z_grid: &[f64], ks: impl Iterator<Item = i32>) -> Vec<Vec<f64>> {
    ks.map(|k| z_grid.iter().map(|z| z.powf(-0.5 * k as f64)).collect())
        .collect()
}

fn fit_columns(columns: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let w = vec![1.0; y.len()];
    let l = weighted_lsq(columns, y, &w)?;
    if l.cond > MAX_FIT_COND {
        return Err(Error::Fit(format!(
            "design condition number {:e} too large; lower max_k or widen the z grid",
            l.cond
        )));
    }
    Ok(l.coeffs)
}

/// H(z) ≈ 1 + Σ_{k=1}^{max_k} h_k z^{-k/2} fitted to
/// Ĥ = 4^ν Γ(1+ν)/Γ(1-ν) z^{-ν}/K(z) on the half-line.
pub fn extract_h_series(
    spec: &ProblemSpec,
    z_grid: &[f64],
    max_k: usize,
) -> Result<FractionalSeries> {
    check_z_grid(z_grid)?;
    if max_k == 0 || max_k + 2 > z_grid.len() {
        return Err(Error::Validation(format!(
            "max_k = {max_k} not feasible for the grid"
        )));
    }
    let hl = half_line(spec);
    let nu = hl.nu();
    let c = free_krein_constant(nu);
    let k = KreinFunction::sample(&hl, z_grid)?;
    let h_hat: Vec<f64> = z_grid
        .iter()
        .zip(&k.values)
        .map(|(z, k)| c * z.powf(-nu) / k)
        .collect();
    let all = fit_columns(&powers(z_grid, 0..=max_k as i32), &h_hat)?;
    if (all[0] - 1.0).abs() > H0_GATE {
        return Err(Error::Fit(format!(
            "h0 = {} differs from 1 by more than {H0_GATE:e}; K normalisation is off",
            all[0]
        )));
    }
    let rest: Vec<f64> = h_hat.iter().map(|h| h - 1.0).collect();
    let h = fit_columns(&powers(z_grid, 1..=max_k as i32), &rest)?;
    let mut coeffs = vec![(0, 1.0)];
    coeffs.extend(h.iter().enumerate().map(|(i, h)| (i as i32 + 1, *h)));
    Ok(FractionalSeries::half_integer(
        Variable::Z,
        nu,
        0.5 * max_k as f64,
        &coeffs,
    ))
}

/// Tr[(A⁰+z)⁻¹ - (A^∞+z)⁻¹] ≈ Σ_{k=2}^{max_k} c_k z^{-k/2} on the half-line.
pub fn extract_base_trace_series(
    spec: &ProblemSpec,
    z_grid: &[f64],
    max_k: usize,
) -> Result<FractionalSeries> {
    check_z_grid(z_grid)?;
    if max_k < 2 || max_k + 1 > z_grid.len() {
        return Err(Error::Validation(format!(
            "max_k = {max_k} not feasible for the grid"
        )));
    }
    let hl = half_line(spec);
    let values = z_grid
        .par_iter()
        .map(|&z| resolvent_trace_diff(&hl, ExtensionParam::Finite(0.0), z))
        .collect::<Result<Vec<_>>>()?;
    let c = fit_columns(&powers(z_grid, 2..=max_k as i32), &values)?;
    let coeffs: Vec<(i32, f64)> = c
        .iter()
        .enumerate()
        .map(|(i, c)| (i as i32 + 2, *c))
        .collect();
    Ok(FractionalSeries::half_integer(
        Variable::Z,
        hl.nu(),
        0.5 * max_k as f64,
        &coeffs,
    ))
}

/// One labelled term of the predicted small-t expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    /// "a_n" for t^{n/2}, "b_{N,n}" for θ^N t^{νN + n/2 - 1/2}.
    pub label: String,
    pub p: i32,
    pub q: i32,
    pub theta_power: u32,
    /// Power of t.
    pub value: f64,
    /// Full coefficient, θ^N included.
    pub coefficient: f64,
    /// a_n or b_{N,n} itself (θ^N divided out); absent when θ = 0.
    pub bare: Option<f64>,
    /// Set when an anomalous exponent lands on a half-integer.
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatExpansion {
    pub theta: ExtensionParam,
    pub series: FractionalSeries,
    pub terms: Vec<ExpansionTerm>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionJson {
    pub nu: f64,
    pub theta: String,
    pub truncation_order: f64,
    pub terms: Vec<ExpansionTerm>,
    pub warnings: Vec<String>,
}

impl HeatExpansion {
    pub fn to_json(&self) -> ExpansionJson {
        ExpansionJson {
            nu: self.series.nu,
            theta: self.theta.label(),
            truncation_order: self.series.truncation_order,
            terms: self.terms.clone(),
            warnings: self.warnings.clone(),
        }
    }

    /// Coefficient of t^{p/2+qν}, summed over θ powers.
    pub fn coefficient(&self, e: LatticeExponent) -> f64 {
        self.series.coeff_any_theta(e)
    }
}

fn is_half_integer(v: f64) -> bool {
    let d = 2.0 * v;
    (d - d.round()).abs() < 2.0 * super::series::COLLISION_TOL
}

/// Composes base(z)·1/(1 + θK(z)) with K = c z^{-ν} H⁻¹ and maps the result
/// term by term to t. `truncation` bounds the t-exponents kept.
pub fn predict_heat_expansion(
    nu: f64,
    theta: ExtensionParam,
    h_series: &FractionalSeries,
    base_series: &FractionalSeries,
    truncation: f64,
) -> Result<HeatExpansion> {
    for (name, s) in [("H", h_series), ("base", base_series)] {
        if s.variable != Variable::Z || s.nu != nu {
            return Err(Error::Series(format!(
                "{name} series must be a z-series with ν = {nu}"
            )));
        }
    }
    let z_trunc = truncation + 1.0;
    if base_series.truncation_order + 1e-12 < z_trunc
        || h_series.truncation_order + 1e-12 < truncation
    {
        return Err(Error::Series(format!(
            "inputs (H to {}, base to {}) cannot support t-truncation {truncation}",
            h_series.truncation_order, base_series.truncation_order
        )));
    }
    let base = base_series.with_truncation(z_trunc);
    let trace_z = match theta {
        ExtensionParam::Infinity => FractionalSeries::zero(Variable::Z, nu, z_trunc),
        ExtensionParam::Finite(th) => {
            let h_inv = series_inverse(&h_series.with_truncation(z_trunc))?;
            let lead = FractionalSeries::monomial(
                Variable::Z,
                nu,
                z_trunc,
                LatticeExponent::new(0, 1),
                free_krein_constant(nu),
            );
            let k = series_mul(&lead, &h_inv)?;
            series_mul(&base, &krein_factor(&k, th)?)?
        }
    };
    let series = heat_trace_from_resolvent_series(&trace_z)?;
    let th = match theta {
        ExtensionParam::Finite(t) => t,
        ExtensionParam::Infinity => f64::INFINITY,
    };
    let mut terms: Vec<ExpansionTerm> = series
        .terms
        .iter()
        .map(|(k, c)| {
            let (p, q, n_th) = (k.exponent.p, k.exponent.q, k.theta_power);
            let value = k.exponent.value(nu);
            let label = if n_th == 0 && q == 0 {
                format!("a_{p}")
            } else {
                format!("b_{{{n_th},{}}}", p + 1)
            };
            let bare = if n_th == 0 {
                Some(*c)
            } else if th != 0.0 && th.is_finite() {
                Some(c / th.powi(n_th as i32))
            } else {
                None
            };
            ExpansionTerm {
                label,
                p,
                q,
                theta_power: n_th,
                value,
                coefficient: *c,
                bare,
                collision: q != 0 && is_half_integer(value),
            }
        })
        .collect();
    terms.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then(a.theta_power.cmp(&b.theta_power))
    });
    let warnings = terms
        .iter()
        .filter(|t| t.collision)
        .map(|t| {
            format!(
                "{} at t^{} coincides with a half-integer power",
                t.label, t.value
            )
        })
        .collect();
    Ok(HeatExpansion {
        theta,
        series,
        terms,
        warnings,
    })
}

//! Weighted least-squares fits of trace curves onto powers of t.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::series::{LatticeExponent, COLLISION_TOL};
use crate::error::{Error, Result};
use crate::heattrace::{TraceCurve, TAIL_FLOOR};
use crate::numerics::golden_section;

/// Coefficients are withheld above this condition number.
pub const MAX_FIT_COND: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Lsq {
    pub coeffs: Vec<f64>,
    pub residual_norm: f64,
    pub max_abs_residual: f64,
    pub cond: f64,
}

/// min ‖W(Ac - y)‖ via SVD of the column-normalised weighted design.
/// `columns[j][i]` is basis function j at sample i.
pub(crate) fn weighted_lsq(columns: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Lsq> {
    let (m, n) = (y.len(), columns.len());
    if n == 0 || m < n {
        return Err(Error::Fit(format!("{n} basis functions for {m} samples")));
    }
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut norms = vec![0.0; n];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..m {
            a[(i, j)] = w[i] * col[i];
        }
        norms[j] = a.column(j).norm();
        if norms[j] == 0.0 {
            return Err(Error::Fit(format!(
                "basis function {j} vanishes on the grid"
            )));
        }
        a.column_mut(j).scale_mut(1.0 / norms[j]);
    }
    let b = DVector::from_iterator(m, y.iter().zip(w).map(|(y, w)| y * w));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let x = svd
        .solve(&b, smax * f64::EPSILON * m as f64)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let coeffs: Vec<f64> = (0..n).map(|j| x[j] / norms[j]).collect();
    let mut r2 = 0.0;
    let mut rmax: f64 = 0.0;
    for i in 0..m {
        let fit: f64 = (0..n).map(|j| coeffs[j] * columns[j][i]).sum();
        let r = fit - y[i];
        r2 += (w[i] * r).powi(2);
        rmax = rmax.max(r.abs());
    }
    Ok(Lsq {
        coeffs,
        residual_norm: r2.sqrt(),
        max_abs_residual: rmax,
        cond,
    })
}

/// One fitted power of t; colliding lattice exponents share a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTerm {
    pub exponents: Vec<LatticeExponent>,
    pub value: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeExponentEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Search range for the exponent standing in for ν in p/2 + q·e.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeExponent {
    pub seed: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FreeExponent {
    pub fn seeded(seed: f64) -> Self {
        Self {
            seed,
            lo: 0.02,
            hi: 0.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// ν used for the lattice values (the free estimate when one was fitted).
    pub nu: f64,
    pub terms: Vec<FitTerm>,
    pub residual_norm: f64,
    pub max_abs_residual: f64,
    pub condition_number: f64,
    /// Coefficients zeroed because the design was too ill-conditioned.
    pub suppressed: bool,
    pub free_exponent: Option<FreeExponentEstimate>,
    pub t_min: f64,
    pub t_max: f64,
}

impl FitReport {
    /// Coefficient of the column containing `e`, if any.
    pub fn coefficient(&self, e: LatticeExponent) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.exponents.contains(&e))
            .map(|t| t.coefficient)
    }
}

/// Groups exponents with values within COLLISION_TOL; returns (value, members).
fn merge(basis: &[LatticeExponent], nu: f64) -> Vec<(f64, Vec<LatticeExponent>)> {
    let mut sorted: Vec<LatticeExponent> = basis.to_vec();
    sorted.sort_by(|a, b| a.value(nu).total_cmp(&b.value(nu)).then(a.cmp(b)));
    sorted.dedup();
    let mut groups: Vec<(f64, Vec<LatticeExponent>)> = Vec::new();
    for e in sorted {
        let v = e.value(nu);
        match groups.last_mut() {
            Some((gv, members)) if (v - *gv).abs() < COLLISION_TOL => members.push(e),
            _ => groups.push((v, vec![e])),
        }
    }
    groups
}

struct Prepared {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

fn fit_at(
    p: &Prepared,
    basis: &[LatticeExponent],
    nu: f64,
    skip: Option<usize>,
) -> Result<(Vec<(f64, Vec<LatticeExponent>)>, Lsq)> {
    let keep: Vec<usize> = (0..p.t.len()).filter(|&i| Some(i) != skip).collect();
    let groups = merge(basis, nu);
    let columns: Vec<Vec<f64>> = groups
        .iter()
        .map(|(v, _)| keep.iter().map(|&i| p.t[i].powf(*v)).collect())
        .collect();
    let y: Vec<f64> = keep.iter().map(|&i| p.y[i]).collect();
    let w: Vec<f64> = keep.iter().map(|&i| p.w[i]).collect();
    let lsq = weighted_lsq(&columns, &y, &w)?;
    Ok((groups, lsq))
}

fn best_exponent(
    p: &Prepared,
    basis: &[LatticeExponent],
    free: &FreeExponent,
    skip: Option<usize>,
) -> Result<f64> {
    let cost = |e: f64| {
        fit_at(p, basis, e, skip)
            .map(|(_, l)| l.residual_norm)
            .unwrap_or(f64::INFINITY)
    };
    // Coarse scan, then golden section around the best cell.
    let n = 96;
    let h = (free.hi - free.lo) / n as f64;
    let mut best = (
        free.seed.clamp(free.lo, free.hi),
        cost(free.seed.clamp(free.lo, free.hi)),
    );
    for i in 0..=n {
        let e = free.lo + i as f64 * h;
        let c = cost(e);
        if c < best.1 {
            best = (e, c);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Fit(
            "no admissible exponent in the search range".into(),
        ));
    }
    let (a, b) = ((best.0 - h).max(free.lo), (best.0 + h).min(free.hi));
    let (e, c) = golden_section(cost, a, b, 1e-10);
    Ok(if c <= best.1 { e } else { best.0 })
}

/// Fits `curve` onto {t^{p/2 + qν}} for the given lattice basis. With
/// `free`, ν is replaced by an exponent optimised on the residual and a
/// leave-one-out jackknife interval is reported for it.
pub fn fit_trace_curve(
    curve: &TraceCurve,
    nu: f64,
    basis: &[LatticeExponent],
    free: Option<FreeExponent>,
) -> Result<FitReport> {
    if curve.is_empty() {
        return Err(Error::Fit("empty trace curve".into()));
    }
    if let Some(i) = curve.invariant_violation() {
        return Err(Error::Fit(format!(
            "tail bound violated at t = {}",
            curve.t_grid[i]
        )));
    }
    let p = Prepared {
        t: curve.t_grid.clone(),
        y: curve.values.clone(),
        w: curve
            .tail_bounds
            .iter()
            .map(|b| 1.0 / b.max(TAIL_FLOOR))
            .collect(),
    };
    let (nu_used, free_est) = match free {
        None => (nu, None),
        Some(f) => {
            let e = best_exponent(&p, basis, &f, None)?;
            let n = p.t.len();
            let local = FreeExponent {
                seed: e,
                lo: (e - 0.1).max(f.lo),
                hi: (e + 0.1).min(f.hi),
            };
            let loo: Vec<f64> = (0..n)
                .map(|i| best_exponent(&p, basis, &local, Some(i)))
                .collect::<Result<_>>()?;
            let mean = loo.iter().sum::<f64>() / n as f64;
            let var =
                (n as f64 - 1.0) / n as f64 * loo.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            let se = var.sqrt();
            (
                e,
                Some(FreeExponentEstimate {
                    estimate: e,
                    std_error: se,
                    ci_low: e - 1.96 * se,
                    ci_high: e + 1.96 * se,
                }),
            )
        }
    };
    let (groups, lsq) = fit_at(&p, basis, nu_used, None)?;
    let suppressed = lsq.cond > MAX_FIT_COND;
    let terms = groups
        .into_iter()
        .zip(&lsq.coeffs)
        .map(|((value, exponents), c)| FitTerm {
            exponents,
            value,
            coefficient: if suppressed { 0.0 } else { *c },
        })
        .collect();
    Ok(FitReport {
        nu: nu_used,
        terms,
        residual_norm: lsq.residual_norm,
        max_abs_residual: lsq.max_abs_residual,
        condition_number: lsq.cond,
        suppressed,
        free_exponent: free_est,
        t_min: p.t[0],
        t_max: p.t[p.t.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExtensionParam;
    use crate::numerics::geometric_grid;
    use approx::assert_relative_eq;

    fn curve(t: Vec<f64>, f: impl Fn(f64) -> f64) -> TraceCurve {
        TraceCurve {
            extension: ExtensionParam::Finite(1.0),
            values: t.iter().map(|&t| f(t)).collect(),
            tail_bounds: vec![1e-16; t.len()],
            t_grid: t,
        }
    }

    #[test]
    fn synthetic_exact_fit() {
        let c = curve(geometric_grid(1e-3, 1.0, 40), |t| 2.0 + 3.0 * t.powf(0.3));
        let basis = [LatticeExponent::new(0, 0), LatticeExponent::new(0, 1)];
        let r = fit_trace_curve(&c, 0.3, &basis, None).unwrap();
        assert_relative_eq!(r.terms[0].coefficient, 2.0, epsilon = 1e-10);
        assert_relative_eq!(r.terms[1].coefficient, 3.0, epsilon = 1e-10);
        assert!(!r.suppressed);
        assert!(r.residual_norm.is_finite() && r.condition_number >= 1.0);
    }

    #[test]
    fn synthetic_free_exponent() {
        let c = curve(geometric_grid(1e-3, 1.0, 40), |t| 2.0 + 3.0 * t.powf(0.3));
        let basis = [LatticeExponent::new(0, 0), LatticeExponent::new(0, 1)];
        let r = fit_trace_curve(&c, 0.5, &basis, Some(FreeExponent::seeded(0.5))).unwrap();
        let f = r.free_exponent.unwrap();
        assert!((f.estimate - 0.3).abs() < 0.005, "{f:?}");
        assert!(f.ci_low <= 0.3 + 1e-6 && f.ci_high >= 0.3 - 1e-6);
        assert_relative_eq!(r.nu, f.estimate);
    }

    #[test]
    fn calogero_taylor_coefficients() {
        // sinh(2νt)/sinh(2t) = ν + (2/3)ν(ν²-1)t² + O(t⁴).
        let nu = 0.3;
        let c = curve(geometric_grid(1e-3, 0.2, 40), |t| {
            (2.0 * nu * t).sinh() / (2.0 * t).sinh()
        });
        let basis = [
            LatticeExponent::new(0, 0),
            LatticeExponent::new(4, 0),
            LatticeExponent::new(8, 0),
        ];
        let r = fit_trace_curve(&c, nu, &basis, None).unwrap();
        assert_relative_eq!(r.terms[0].coefficient, nu, epsilon = 1e-4);
        assert_relative_eq!(
            r.terms[1].coefficient,
            2.0 / 3.0 * nu * (nu * nu - 1.0),
            epsilon = 1e-4
        );
    }

    #[test]
    fn colliding_exponents_share_a_column() {
        let c = curve(geometric_grid(1e-3, 1.0, 20), |t| 1.0 + t.sqrt());
        let basis = [
            LatticeExponent::new(0, 0),
            LatticeExponent::new(1, 0),
            LatticeExponent::new(0, 2),
        ];
        let r = fit_trace_curve(&c, 0.25, &basis, None).unwrap();
        assert_eq!(r.terms.len(), 2);
        assert_eq!(r.terms[1].exponents.len(), 2);
        assert_relative_eq!(
            r.coefficient(LatticeExponent::new(0, 2)).unwrap(),
            1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn ill_conditioned_fit_is_suppressed() {
        let c = curve(geometric_grid(0.5, 0.5001, 10), |t| t);
        let basis: Vec<_> = (0..6).map(|p| LatticeExponent::new(p, 0)).collect();
        let r = fit_trace_curve(&c, 0.3, &basis, None).unwrap();
        assert!(r.suppressed && r.condition_number > MAX_FIT_COND);
        assert!(r.terms.iter().all(|t| t.coefficient == 0.0));
    }

    #[test]
    fn too_many_columns_is_an_error() {
        let c = curve(vec![0.1, 0.2], |t| t);
        let basis: Vec<_> = (0..3).map(|p| LatticeExponent::new(p, 0)).collect();
        assert!(matches!(
            fit_trace_curve(&c, 0.3, &basis, None),
            Err(Error::Fit(_))
        ));
    }
}

//! Resolvent kernels of the extensions, the Krein function and trace
//! differences of resolvents.
//!
//! With L_θ the solution satisfying the boundary condition at the origin and
//! R the solution selected at the far end,
//!
//! ```text
//! G_θ(x, x'; λ) = -L_θ(x<) R(x>) / W(L_θ, R),
//! G_θ - G_∞ = (G_0 - G_∞) / (1 + θ K(λ)),   K = -α/β,
//! ```
//!
//! where R ≈ α u₋ + β u₊ near the origin.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BoundaryMode, ExtensionParam, ProblemSpec};
use crate::numerics::{gauss_legendre, CompensatedSum};
use crate::ode::State;
use crate::singular_ode::{connection_coefficients, far_point, solve_l, solve_r, Solution};

/// |W| below this fraction of |L R'| + |L' R| is treated as an eigenvalue hit.
const COLLISION_RATIO: f64 = 1e-12;

/// Resolvent kernel of one extension at one λ.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub extension: ExtensionParam,
    pub lambda: f64,
    l: Solution,
    r: Solution,
    /// Wronskian of the scaled states at the reference point.
    w_scaled: f64,
    w_log_scale: f64,
}

impl GreenKernel {
    pub fn new(spec: &ProblemSpec, extension: ExtensionParam, lambda: f64) -> Result<Self> {
        let r = solve_r(spec, lambda)?;
        Self::with_r(spec, extension, lambda, r)
    }

    /// Kernel sharing an already constructed far-end solution.
    pub fn with_r(
        spec: &ProblemSpec,
        extension: ExtensionParam,
        lambda: f64,
        r: Solution,
    ) -> Result<Self> {
        let l = solve_l(spec, extension, lambda)?;
        let x_w = reference_point(spec, lambda)?;
        let a = l.state_at(x_w)?;
        let b = r.state_at(x_w)?;
        let w_scaled = a.psi * b.dpsi - a.dpsi * b.psi;
        let size = (a.psi * b.dpsi).abs() + (a.dpsi * b.psi).abs();
        if !(w_scaled.abs() > COLLISION_RATIO * size) {
            return Err(Error::EigenvalueCollision {
                lambda,
                wronskian: w_scaled.abs() / size,
            });
        }
        Ok(Self {
            extension,
            lambda,
            l,
            r,
            w_scaled,
            w_log_scale: a.log_scale + b.log_scale,
        })
    }

    /// W(L, R) with the scales applied (may overflow to ±inf for extreme λ).
    pub fn wronskian(&self) -> f64 {
        self.w_scaled * self.w_log_scale.exp()
    }

    fn combine(&self, l: &State, r: &State) -> f64 {
        -l.psi * r.psi / self.w_scaled * (l.log_scale + r.log_scale - self.w_log_scale).exp()
    }

    /// G(x, x'), symmetric by construction.
    pub fn eval(&self, x: f64, x_prime: f64) -> Result<f64> {
        let (lo, hi) = if x <= x_prime {
            (x, x_prime)
        } else {
            (x_prime, x)
        };
        let l = self.l.state_at(lo)?;
        let r = self.r.state_at(hi)?;
        Ok(self.combine(&l, &r))
    }

    /// G(x, x) at every point, using one sweep per solution.
    pub fn diagonal(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let l = self.l.states_at(xs)?;
        let r = self.r.states_at(xs)?;
        Ok(l.iter().zip(&r).map(|(a, b)| self.combine(a, b)).collect())
    }
}

/// Point where both L and R are well represented: one decay length from the
/// origin, kept inside the wall or the far seed.
fn reference_point(spec: &ProblemSpec, lambda: f64) -> Result<f64> {
    let decay = if lambda < 0.0 {
        1.0 / (-lambda).sqrt()
    } else {
        1.0
    };
    Ok(match spec.mode {
        BoundaryMode::Wall => decay.min(0.5 * spec.trunc_radius),
        BoundaryMode::HalfLine => decay.min(0.5 * far_point(spec, -lambda)?),
    })
}

/// G_θ(x, x'; λ).
pub fn green(
    spec: &ProblemSpec,
    extension: ExtensionParam,
    lambda: f64,
    x: f64,
    x_prime: f64,
) -> Result<f64> {
    GreenKernel::new(spec, extension, lambda)?.eval(x, x_prime)
}

/// K(λ = -z) = -α/β for the far-end solution R in the problem's boundary mode.
pub fn krein_k(spec: &ProblemSpec, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain {
            func: "krein_k",
            msg: format!("z = {z} must be positive"),
        });
    }
    let r = solve_r(spec, -z)?;
    let cc = connection_coefficients(spec, -z, &r)?;
    if cc.beta == 0.0 || (cc.beta / cc.alpha).abs() < 1e-14 {
        return Err(Error::KreinPole { z });
    }
    Ok(-cc.alpha / cc.beta)
}

/// Closed form of K for V = 0 on the half-line: 4^ν Γ(1+ν)/Γ(1-ν) z^{-ν}.
pub fn free_krein_constant(nu: f64) -> f64 {
    use crate::specfun::gamma_unchecked;
    4f64.powf(nu) * gamma_unchecked(1.0 + nu) / gamma_unchecked(1.0 - nu)
}

/// K sampled on a z grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinFunction {
    pub nu: f64,
    pub z: Vec<f64>,
    pub values: Vec<f64>,
}

impl KreinFunction {
    pub fn sample(spec: &ProblemSpec, z_grid: &[f64]) -> Result<Self> {
        let values = z_grid
            .par_iter()
            .map(|&z| krein_k(spec, z))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            nu: spec.nu(),
            z: z_grid.to_vec(),
            values,
        })
    }
}

/// Normalized defect of the Krein identity:
/// [G_θ - G_∞ - (G_0 - G_∞)/(1 + θK)] / max(|G_θ|, |G_∞|).
pub fn krein_residual(
    spec: &ProblemSpec,
    theta: f64,
    lambda: f64,
    x: f64,
    x_prime: f64,
) -> Result<f64> {
    krein_residual_with(spec, theta, lambda, x, x_prime, |k| k)
}

/// Same as [`krein_residual`] with a transformation applied to K before use;
/// the identity map gives the genuine check, anything else a negative control.
pub fn krein_residual_with<F: Fn(f64) -> f64>(
    spec: &ProblemSpec,
    theta: f64,
    lambda: f64,
    x: f64,
    x_prime: f64,
    k_map: F,
) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::Domain {
            func: "krein_residual",
            msg: format!("lambda = {lambda} must be negative"),
        });
    }
    let r = solve_r(spec, lambda)?;
    let g_t = GreenKernel::with_r(spec, ExtensionParam::Finite(theta), lambda, r.clone())?
        .eval(x, x_prime)?;
    let g_inf =
        GreenKernel::with_r(spec, ExtensionParam::Infinity, lambda, r.clone())?.eval(x, x_prime)?;
    let g_0 =
        GreenKernel::with_r(spec, ExtensionParam::Finite(0.0), lambda, r)?.eval(x, x_prime)?;
    let k = k_map(krein_k(spec, -lambda)?);
    let defect = (g_t - g_inf) - (g_0 - g_inf) / (1.0 + theta * k);
    Ok(defect / g_t.abs().max(g_inf.abs()))
}

/// Upper integration limit for diagonal traces.
fn trace_extent(spec: &ProblemSpec, z: f64) -> Result<f64> {
    match spec.mode {
        BoundaryMode::Wall => Ok(spec.trunc_radius),
        BoundaryMode::HalfLine => far_point(spec, z),
    }
}

/// Geometric quadrature cells accumulating at the origin.
fn trace_cells(x_min: f64, x_hi: f64, z: f64) -> Vec<(f64, f64)> {
    let w_max = (0.5 / z.sqrt()).min(x_hi / 16.0);
    let mut cells = Vec::new();
    let mut a = x_min;
    while a < x_hi {
        let b = (2.0 * a).min(a + w_max).min(x_hi);
        let b = if x_hi - b < 1e-12 * x_hi { x_hi } else { b };
        cells.push((a, b));
        a = b;
    }
    cells
}

/// ∫₀^{x_hi} f(x) dx where f(x) ~ C x^{1-2ν} near 0, with f evaluated in
/// batches. Two Gauss rules are compared as a convergence check.
fn integrate_from_origin<F>(nu: f64, x_min: f64, x_hi: f64, z: f64, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let cells = trace_cells(x_min, x_hi, z);
    let (n1, w1) = gauss_legendre(10);
    let (n2, w2) = gauss_legendre(13);
    let mut xs = vec![x_min];
    for &(a, b) in &cells {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        xs.extend(n1.iter().map(|t| m + h * t));
        xs.extend(n2.iter().map(|t| m + h * t));
    }
    let vals = f(&xs)?;
    let head = vals[0] * x_min / (2.0 - 2.0 * nu);
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    s1.add(head);
    s2.add(head);
    let mut idx = 1;
    for &(a, b) in &cells {
        let h = 0.5 * (b - a);
        for w in &w1 {
            s1.add(h * w * vals[idx]);
            idx += 1;
        }
        for w in &w2 {
            s2.add(h * w * vals[idx]);
            idx += 1;
        }
    }
    let (i1, i2) = (s1.value(), s2.value());
    if !((i1 - i2).abs() <= 1e-10 * i2.abs().max(1e-300) + 1e-15) {
        return Err(Error::Quadrature(format!(
            "Gauss rules disagree: {i1:e} vs {i2:e} (z = {z})"
        )));
    }
    Ok(i2)
}

/// Tr[(A^ext - λ)^{-1} - (A^∞ - λ)^{-1}] at λ = -z by integrating the
/// diagonal of the kernel difference.
pub fn resolvent_trace_diff(spec: &ProblemSpec, extension: ExtensionParam, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain {
            func: "resolvent_trace_diff",
            msg: format!("z = {z} must be positive"),
        });
    }
    if extension == ExtensionParam::Infinity {
        return Ok(0.0);
    }
    let lambda = -z;
    let r = solve_r(spec, lambda)?;
    let g_e = GreenKernel::with_r(spec, extension, lambda, r.clone())?;
    let g_inf = GreenKernel::with_r(spec, ExtensionParam::Infinity, lambda, r)?;
    let x_hi = trace_extent(spec, z)?;
    let x_min = 1e-6 * x_hi.min(1.0 / z.sqrt());
    integrate_from_origin(spec.nu(), x_min, x_hi, z, |xs| {
        let a = g_e.diagonal(xs)?;
        let b = g_inf.diagonal(xs)?;
        Ok(a.iter().zip(&b).map(|(a, b)| a - b).collect())
    })
}

/// Finite-θ trace difference from the θ = 0 one through the Krein factor.
pub fn resolvent_trace_diff_via_krein(spec: &ProblemSpec, theta: f64, z: f64) -> Result<f64> {
    let base = resolvent_trace_diff(spec, ExtensionParam::Finite(0.0), z)?;
    let k = krein_k(spec, z)?;
    Ok(base / (1.0 + theta * k))
}

//! Discrete spectra of A^θ on [0, R] with a Dirichlet wall at R.
//!
//! L_θ is launched from its origin data and carried to the wall while its
//! zeros are counted. The Prüfer phase ϑ(λ) = π·#zeros(0, R) + angle(L(R), L'(R))
//! increases monotonically with λ, the n-th eigenvalue solves ϑ = (n+1)π and
//! floor(ϑ/π) counts the eigenvalues below λ.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryMode, ExtensionParam, ProblemSpec};
use crate::numerics::brent;
use crate::singular_ode::solve_l;

/// Default lower end of the search window for λ.
pub const DEFAULT_Z_MAX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub extension: ExtensionParam,
    pub eigenvalues: Vec<f64>,
    /// |ϑ(λ_n) - (n+1)π| at each returned eigenvalue.
    pub residuals: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Prüfer phase of L_θ at the wall for spectral parameter λ.
pub fn phase(spec: &ProblemSpec, extension: ExtensionParam, lambda: f64) -> Result<f64> {
    let r = spec.trunc_radius;
    let l = solve_l(spec, extension, lambda)?;
    let (seed, traj) = l.sweep_from_origin(r)?;
    // L > 0 next to the origin, so a negative seed means one zero below it.
    let mut zeros = traj.sign_changes as f64;
    if seed.psi < 0.0 {
        zeros += 1.0;
    }
    let end = traj.end;
    let s = lambda.abs().sqrt().max(1.0 / r);
    let angle = if end.psi == 0.0 {
        PI
    } else {
        let a = end.psi.atan2(end.dpsi / s);
        if a <= 0.0 {
            a + PI
        } else {
            a
        }
    };
    Ok(PI * zeros + angle)
}

/// Number of eigenvalues strictly below λ.
pub fn count_below(spec: &ProblemSpec, extension: ExtensionParam, lambda: f64) -> Result<usize> {
    Ok((phase(spec, extension, lambda)? / PI).floor() as usize)
}

/// (1/π) ∫₀^R sqrt(max(λ - V, 0)) dx.
pub fn weyl_count(spec: &ProblemSpec, lambda: f64) -> f64 {
    let n = 2000;
    let r = spec.trunc_radius;
    let h = r / n as f64;
    let f = |x: f64| (lambda - spec.potential_at(x)).max(0.0).sqrt();
    let mut s = 0.5 * (f(0.0) + f(r));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h / PI
}

/// All eigenvalues of A^ext in [-DEFAULT_Z_MAX, lambda_max].
pub fn eigenvalues(
    spec: &ProblemSpec,
    extension: ExtensionParam,
    lambda_max: f64,
) -> Result<SpectrumResult> {
    eigenvalues_in(spec, extension, -DEFAULT_Z_MAX, lambda_max)
}

/// All eigenvalues in [lambda_min, lambda_max]; fails if any lies below lambda_min.
pub fn eigenvalues_in(
    spec: &ProblemSpec,
    extension: ExtensionParam,
    lambda_min: f64,
    lambda_max: f64,
) -> Result<SpectrumResult> {
    if spec.mode != BoundaryMode::Wall {
        return Err(Error::Validation(
            "spectra require the wall boundary mode".into(),
        ));
    }
    if !(lambda_max > lambda_min) {
        return Err(Error::Validation(format!(
            "empty spectral window [{lambda_min}, {lambda_max}]"
        )));
    }
    let below = phase(spec, extension, lambda_min)?;
    if below >= PI {
        return Err(Error::Spectrum(format!(
            "{} eigenvalue(s) below the window start {lambda_min}; lower it (z_max)",
            (below / PI).floor()
        )));
    }
    let top = phase(spec, extension, lambda_max)?;
    let count = (top / PI).floor() as usize;
    let weyl = weyl_count(spec, lambda_max);
    if (count as f64 - weyl).abs() > 3.0 + 0.02 * weyl {
        return Err(Error::Spectrum(format!(
            "eigenvalue count {count} below {lambda_max} outside the Weyl window around {weyl:.1}"
        )));
    }
    let scale = 1.0 / (spec.trunc_radius * spec.trunc_radius);
    let mut eigenvalues: Vec<f64> = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let f = |lambda: f64, target: f64| -> f64 {
        match phase(spec, extension, lambda) {
            Ok(p) => p - target,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let (mut a, mut fa_phase) = (lambda_min, below);
    for n in 0..count {
        let target = (n + 1) as f64 * PI;
        let mut fa = fa_phase - target;
        // Guess from the last spacing, expand until the phase passes the target.
        let mut step = match eigenvalues.len() {
            0 => 10.0 * scale,
            1 => (eigenvalues[0] - lambda_min).abs().max(scale),
            k => (eigenvalues[k - 1] - eigenvalues[k - 2]).max(1e-3 * scale),
        };
        let (b, fb) = loop {
            let b = (a + step).min(lambda_max);
            let fb = f(b, target);
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            if fb > 0.0 || b >= lambda_max {
                break (b, fb);
            }
            a = b;
            fa = fb;
            step *= 2.0;
        };
        let xtol = 1e-13 * b.abs().max(scale);
        let (root, _) = brent(|l| f(l, target), a, b, fa, fb, xtol, 200).ok_or_else(|| {
            Error::Spectrum(format!(
                "root refinement failed for eigenvalue {n} in [{a}, {b}]"
            ))
        })?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let res = f(root, target).abs();
        eigenvalues.push(root);
        residuals.push(res);
        a = root;
        fa_phase = target;
    }
    Ok(SpectrumResult {
        extension,
        eigenvalues,
        residuals,
        lambda_min,
        lambda_max,
    })
}

/// The two scale-invariant extensions for which the harmonic ladder is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalogeroBranch {
    ThetaZero,
    ThetaInfinity,
}

/// Ladder of -∂² + (ν² - 1/4)/x² + x² on the half-line: 4n + 2 ∓ 2ν.
pub fn eigenvalues_calogero(nu: f64, branch: CalogeroBranch, count: usize) -> Vec<f64> {
    let shift = match branch {
        CalogeroBranch::ThetaZero => -2.0 * nu,
        CalogeroBranch::ThetaInfinity => 2.0 * nu,
    };
    (0..count).map(|n| 4.0 * n as f64 + 2.0 + shift).collect()
}

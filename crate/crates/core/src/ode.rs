//! Adaptive Taylor-series integrator for ψ'' = Q(x) ψ with
//! Q = (ν² - 1/4)/x² + V(x) - λ.
//!
//! Multiplying by x² gives x² ψ'' = P(x) ψ with P a polynomial, so the Taylor
//! coefficients of ψ about any x0 > 0 follow from a three-term recursion. Step
//! length is bounded by a fraction of the distance to the singular point, by
//! the local wavelength (so a step holds at most one zero of ψ) and by the
//! local growth rate; the series order adapts until the tail drops below the
//! tolerance.

use crate::error::{Error, Result};
use crate::model::ProblemSpec;

const MAX_ORDER: usize = 64;
const MIN_ORDER: usize = 8;
/// Largest |h|/x0; the series about x0 converges for |h| < x0.
const RADIUS_FRACTION: f64 = 0.35;
/// Largest h·sqrt(-Q) in oscillatory regions. Below π, so a step never holds two zeros.
const OSCILLATION_LIMIT: f64 = 2.5;
/// Largest h·sqrt(Q) in evanescent regions.
const GROWTH_LIMIT: f64 = 6.0;
const RESCALE_HI: f64 = 1e100;
const RESCALE_LO: f64 = 1e-100;

/// Solution state with a separate logarithmic scale so that exponentially
/// growing solutions never overflow: the true values are `exp(log_scale) * (psi, dpsi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub x: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub log_scale: f64,
}

impl State {
    pub fn new(x: f64, psi: f64, dpsi: f64) -> Self {
        Self {
            x,
            psi,
            dpsi,
            log_scale: 0.0,
        }
    }

    /// Values with the scale applied; overflow error when they are not representable.
    pub fn unscaled(&self) -> Result<(f64, f64)> {
        let f = self.log_scale.exp();
        let (p, d) = (self.psi * f, self.dpsi * f);
        if !p.is_finite() || !d.is_finite() {
            return Err(Error::Overflow(format!(
                "solution magnitude exp({:.1}) at x = {}",
                self.log_scale, self.x
            )));
        }
        Ok((p, d))
    }

    fn renormalize(&mut self) {
        let m = self.psi.abs().max(self.dpsi.abs());
        if m > RESCALE_HI || (m < RESCALE_LO && m > 0.0) {
            self.psi /= m;
            self.dpsi /= m;
            self.log_scale += m.ln();
        }
    }
}

/// Outcome of one integration sweep.
#[derive(Debug, Clone, Copy)]
pub struct Trajectory {
    pub end: State,
    /// Sum of local relative truncation estimates.
    pub error: f64,
    /// Sign changes of ψ strictly between the start and the end point.
    pub sign_changes: usize,
    pub steps: usize,
}

/// Integrator bound to one problem and one spectral parameter λ.
#[derive(Debug, Clone)]
pub struct Integrator {
    /// Coefficients of P(x) = (ν² - 1/4) + x² (V(x) - λ).
    p: Vec<f64>,
    v: Vec<f64>,
    c: f64,
    lambda: f64,
    tol: f64,
}

impl Integrator {
    pub fn new(spec: &ProblemSpec, lambda: f64) -> Self {
        let c = spec.order.singular_coeff();
        let v = spec.potential.coeffs.clone();
        let mut p = vec![0.0; v.len().max(1) + 2];
        p[0] = c;
        for (j, vj) in v.iter().enumerate() {
            p[j + 2] += vj;
        }
        p[2] -= lambda;
        while p.len() > 1 && *p.last().unwrap() == 0.0 {
            p.pop();
        }
        Self {
            p,
            v,
            c,
            lambda,
            tol: spec.tolerances.ode,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn q(&self, x: f64) -> f64 {
        let v = self.v.iter().rev().fold(0.0, |a, &c| a * x + c);
        self.c / (x * x) + v - self.lambda
    }

    /// Integrate from `start` to `x_end`, stopping exactly at each point of
    /// `stops` (which must be ordered in the direction of integration and lie
    /// between the two ends) and handing the state to `on_stop`.
    pub fn run<F>(
        &self,
        start: State,
        x_end: f64,
        stops: &[f64],
        mut on_stop: F,
    ) -> Result<Trajectory>
    where
        F: FnMut(usize, &State),
    {
        if !(start.x > 0.0 && x_end > 0.0) || !start.x.is_finite() || !x_end.is_finite() {
            return Err(Error::StepUnderflow {
                x: x_end.min(start.x),
            });
        }
        let mut state = start;
        let mut traj = Trajectory {
            end: start,
            error: 0.0,
            sign_changes: 0,
            steps: 0,
        };
        let mut last_sign = sign(state.psi);
        for (i, &target) in stops.iter().chain(std::iter::once(&x_end)).enumerate() {
            self.advance(&mut state, target, &mut traj, &mut last_sign)?;
            if i < stops.len() {
                on_stop(i, &state);
            }
        }
        traj.end = state;
        Ok(traj)
    }

    fn advance(
        &self,
        state: &mut State,
        target: f64,
        traj: &mut Trajectory,
        last_sign: &mut i8,
    ) -> Result<()> {
        let dir = if target >= state.x { 1.0 } else { -1.0 };
        while (target - state.x) * dir > 0.0 {
            let x0 = state.x;
            let remaining = (target - x0).abs();
            let mut h = self.step_bound(x0, dir).min(remaining);
            loop {
                if h < 1e-13 * x0 {
                    return Err(Error::StepUnderflow { x: x0 });
                }
                let last = h == remaining;
                match self.taylor_step(x0, state.psi, state.dpsi, dir * h) {
                    Some((psi, dpsi, err)) => {
                        state.psi = psi;
                        state.dpsi = dpsi;
                        state.x = if last { target } else { x0 + dir * h };
                        traj.error += err;
                        traj.steps += 1;
                        break;
                    }
                    None => h *= 0.5,
                }
            }
            // Sign changes at the end point itself are not counted until the
            // solution leaves it, which keeps the count for the open interval.
            let s = sign(state.psi);
            if s != 0 {
                if *last_sign != 0 && s != *last_sign {
                    traj.sign_changes += 1;
                }
                *last_sign = s;
            }
            if !state.psi.is_finite() || !state.dpsi.is_finite() {
                return Err(Error::Overflow(format!(
                    "non-finite solution at x = {}",
                    state.x
                )));
            }
            state.renormalize();
        }
        Ok(())
    }

    /// Largest admissible |h| from x0 in direction `dir`.
    fn step_bound(&self, x0: f64, dir: f64) -> f64 {
        let h_rad = RADIUS_FRACTION * x0;
        let mut neg: f64 = 0.0;
        let mut pos: f64 = 0.0;
        for f in [0.0, 0.5, 1.0] {
            let q = self.q(x0 + dir * f * h_rad);
            neg = neg.max(-q);
            pos = pos.max(q);
        }
        let mut h = h_rad;
        if neg > 0.0 {
            h = h.min(OSCILLATION_LIMIT / neg.sqrt());
        }
        if pos > 0.0 {
            h = h.min(GROWTH_LIMIT / pos.sqrt());
        }
        h
    }

    /// One Taylor step of signed length h; `None` when the series has not
    /// converged within the maximum order.
    fn taylor_step(&self, x0: f64, psi: f64, dpsi: f64, h: f64) -> Option<(f64, f64, f64)> {
        let n = self.p.len();
        // Taylor coefficients of P about x0, scaled by h^{j+2}/x0².
        let mut pt = [0.0f64; 16];
        pt[..n].copy_from_slice(&self.p);
        for i in 0..n.saturating_sub(1) {
            for j in (i..n - 1).rev() {
                pt[j] += x0 * pt[j + 1];
            }
        }
        let mut hp = h * h / (x0 * x0);
        for v in pt.iter_mut().take(n) {
            *v *= hp;
            hp *= h;
        }
        let rho = h / x0;
        let mut b = [0.0f64; MAX_ORDER + 2];
        b[0] = psi;
        b[1] = h * dpsi;
        let mut scale = b[0].abs() + b[1].abs();
        if scale == 0.0 {
            return Some((0.0, 0.0, 0.0));
        }
        let mut sum = b[0] + b[1];
        let mut dsum = b[1];
        for k in 0..MAX_ORDER {
            let kf = k as f64;
            let mut conv = 0.0;
            for j in 0..=k.min(n - 1) {
                conv += pt[j] * b[k - j];
            }
            let next = (conv
                - 2.0 * rho * kf * (kf + 1.0) * b[k + 1]
                - rho * rho * kf * (kf - 1.0) * b[k])
                / ((kf + 1.0) * (kf + 2.0));
            b[k + 2] = next;
            sum += next;
            dsum += (kf + 2.0) * next;
            scale = scale.max(next.abs());
            let m = k + 2;
            if m >= MIN_ORDER {
                let tail = 2.0 * (m as f64) * (b[m].abs() + b[m - 1].abs());
                if tail <= self.tol * scale {
                    return Some((sum, dsum / h, tail / scale));
                }
            }
        }
        None
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

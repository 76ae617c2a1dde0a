//! Solutions of (A - λ)ψ = 0 near and away from the regular singular point.
//!
//! Near the origin every solution is α u₋ + β u₊ with
//! u± = x^{1/2 ± ν} (1 + c₂x² + …). Origin-seeded solutions are started from
//! the series at a small matching point and carried outward by the Taylor
//! integrator; decaying solutions are seeded far out (or at the wall) and
//! carried inward.

use crate::error::{Error, Result};
use crate::model::{BoundaryMode, ExtensionParam, ProblemSpec};
use crate::numerics::CompensatedSum;
use crate::ode::{Integrator, State, Trajectory};

/// Series order used for seeding and matching.
pub const FROBENIUS_ORDER: usize = 48;
pub const MAX_HALVINGS: usize = 20;
pub const MAX_COND: f64 = 1e8;
/// Largest tolerated Σ|terms| / |Σ terms| for a series evaluation.
const MAX_CANCELLATION: f64 = 1e2;
/// Truncation tolerance for origin seeds.
const SEED_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// σ = 1/2 - ν
    Minus,
    /// σ = 1/2 + ν
    Plus,
}

/// Truncated Frobenius solution x^σ Σ_{k≤K} c_k x^k with c₀ = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusBranch {
    pub branch: Branch,
    pub sigma: f64,
    pub lambda: f64,
    pub coeffs: Vec<f64>,
}

impl FrobeniusBranch {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// (ψ, ψ') at x.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let mut s = CompensatedSum::new();
        let mut ds = CompensatedSum::new();
        let mut xp = 1.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            let t = c * xp;
            s.add(t);
            ds.add((self.sigma + k as f64) * t);
            xp *= x;
        }
        let xs = x.powf(self.sigma);
        (xs * s.value(), xs / x * ds.value())
    }

    /// Relative size of the last two retained terms.
    pub fn truncation_estimate(&self, x: f64) -> f64 {
        let k = self.order();
        let tail = (self.coeffs[k] * x.powi(k as i32)).abs()
            + (self.coeffs[k - 1] * x.powi(k as i32 - 1)).abs();
        let (mut sum, mut abs) = (0.0, 0.0);
        let mut xp = 1.0;
        for c in &self.coeffs {
            sum += c * xp;
            abs += (c * xp).abs();
            xp *= x;
        }
        if sum == 0.0 {
            return f64::INFINITY;
        }
        tail.max(0.0) / sum.abs()
            + if abs / sum.abs() > MAX_CANCELLATION {
                f64::INFINITY
            } else {
                0.0
            }
    }
}

/// Coefficients of the Frobenius branch for spectral parameter λ.
pub fn frobenius_series(
    spec: &ProblemSpec,
    lambda: f64,
    branch: Branch,
    order: usize,
) -> Result<FrobeniusBranch> {
    let nu = spec.nu();
    let (sigma, two_nu) = match branch {
        Branch::Minus => (0.5 - nu, -2.0 * nu),
        Branch::Plus => (0.5 + nu, 2.0 * nu),
    };
    let order = order.max(8);
    let v = &spec.potential.coeffs;
    let w = |m: usize| -> f64 {
        let vm = v.get(m).copied().unwrap_or(0.0);
        if m == 0 {
            vm - lambda
        } else {
            vm
        }
    };
    let mut c = vec![0.0; order + 1];
    c[0] = 1.0;
    for k in 1..=order {
        let mut rhs = CompensatedSum::new();
        if k >= 2 {
            for m in 0..=k - 2 {
                let wm = w(m);
                if wm != 0.0 {
                    rhs.add(wm * c[k - 2 - m]);
                }
            }
        }
        let rhs = rhs.value();
        let kf = k as f64;
        let denom = kf * (kf + two_nu);
        if denom.abs() < 1e-9 {
            if rhs != 0.0 {
                return Err(Error::Resonance { nu });
            }
            c[k] = 0.0;
            continue;
        }
        c[k] = rhs / denom;
        if !c[k].is_finite() {
            return Err(Error::Overflow(format!(
                "Frobenius coefficient c_{k} diverged"
            )));
        }
    }
    Ok(FrobeniusBranch {
        branch,
        sigma,
        lambda,
        coeffs: c,
    })
}

/// Value and derivative at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSample {
    pub x: f64,
    pub psi: f64,
    pub dpsi: f64,
}

/// Seed (ψ, ψ') from the series at x_m, rejecting points where the series is
/// not accurate to `tol`.
pub fn seed_at(fb: &FrobeniusBranch, x_m: f64, tol: f64) -> Result<SolutionSample> {
    let est = fb.truncation_estimate(x_m);
    if !(est < tol) {
        return Err(Error::Truncation {
            x: x_m,
            estimate: est,
        });
    }
    let (psi, dpsi) = fb.eval(x_m);
    Ok(SolutionSample { x: x_m, psi, dpsi })
}

/// Advance a sample to `x_end`; returns the sample and the accumulated error estimate.
pub fn integrate(
    spec: &ProblemSpec,
    lambda: f64,
    start: SolutionSample,
    x_end: f64,
) -> Result<(SolutionSample, f64)> {
    let it = Integrator::new(spec, lambda);
    let t = it.run(
        State::new(start.x, start.psi, start.dpsi),
        x_end,
        &[],
        |_, _| {},
    )?;
    let (psi, dpsi) = t.end.unscaled()?;
    Ok((
        SolutionSample {
            x: t.end.x,
            psi,
            dpsi,
        },
        t.error,
    ))
}

/// Largest point x ≤ x_start (halving) at which both branches are accurate.
pub(crate) fn matching_point(
    minus: &FrobeniusBranch,
    plus: &FrobeniusBranch,
    x_start: f64,
    tol: f64,
) -> Result<f64> {
    let mut x = x_start;
    let mut est = f64::INFINITY;
    for _ in 0..=MAX_HALVINGS {
        est = minus
            .truncation_estimate(x)
            .max(plus.truncation_estimate(x));
        if est < tol {
            return Ok(x);
        }
        x *= 0.5;
    }
    Err(Error::Truncation {
        x: x * 2.0,
        estimate: est,
    })
}

/// Initial matching point: 0.1·min(1, R), capped by the local wavelength 1/sqrt|λ|.
pub(crate) fn initial_matching_point(spec: &ProblemSpec, lambda: f64) -> f64 {
    let mut x = 0.1 * spec.trunc_radius.min(1.0);
    if spec.mode == BoundaryMode::HalfLine {
        x = 0.1;
    }
    if lambda != 0.0 {
        x = x.min(0.5 / lambda.abs().sqrt());
    }
    x
}

#[derive(Debug, Clone)]
enum Seed {
    /// ψ = a u₋ + b u₊, evaluated from the series below `x_seed`.
    Origin {
        a: f64,
        b: f64,
        minus: FrobeniusBranch,
        plus: FrobeniusBranch,
        x_seed: f64,
    },
    /// Arbitrary state, integrated in either direction.
    Point(State),
}

/// A solution of (A - λ)ψ = 0 that can be evaluated anywhere in (0, ∞).
#[derive(Debug, Clone)]
pub struct Solution {
    lambda: f64,
    integrator: Integrator,
    seed: Seed,
}

impl Solution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Sample with the scale applied.
    pub fn at(&self, x: f64) -> Result<SolutionSample> {
        let s = self.state_at(x)?;
        let (psi, dpsi) = s.unscaled()?;
        Ok(SolutionSample { x, psi, dpsi })
    }

    pub fn sample_many(&self, xs: &[f64]) -> Result<Vec<SolutionSample>> {
        self.states_at(xs)?
            .into_iter()
            .map(|s| {
                let (psi, dpsi) = s.unscaled()?;
                Ok(SolutionSample { x: s.x, psi, dpsi })
            })
            .collect()
    }

    /// Seed state and the outward sweep from it to `x_end`; only for
    /// solutions defined by their data at the origin.
    pub(crate) fn sweep_from_origin(&self, x_end: f64) -> Result<(State, Trajectory)> {
        match &self.seed {
            Seed::Origin {
                a,
                b,
                minus,
                plus,
                x_seed,
            } => {
                let (m, dm) = minus.eval(*x_seed);
                let (p, dp) = plus.eval(*x_seed);
                let start = State::new(*x_seed, a * m + b * p, a * dm + b * dp);
                let t = self.integrator.run(start, x_end, &[], |_, _| {})?;
                Ok((start, t))
            }
            Seed::Point(_) => Err(Error::Domain {
                func: "Solution::sweep_from_origin",
                msg: "solution is not seeded at the origin".into(),
            }),
        }
    }

    pub fn state_at(&self, x: f64) -> Result<State> {
        Ok(self.states_at(&[x])?[0])
    }

    /// States at arbitrary points (any order), computed in at most two sweeps.
    pub fn states_at(&self, xs: &[f64]) -> Result<Vec<State>> {
        let mut out = vec![State::new(0.0, 0.0, 0.0); xs.len()];
        let (origin, start) = match &self.seed {
            Seed::Origin {
                a,
                b,
                minus,
                plus,
                x_seed,
            } => {
                let (m, dm) = minus.eval(*x_seed);
                let (p, dp) = plus.eval(*x_seed);
                let mut below = Vec::new();
                for (i, &x) in xs.iter().enumerate() {
                    if x <= *x_seed {
                        below.push(i);
                    }
                }
                for i in below {
                    let x = xs[i];
                    let (m, dm) = minus.eval(x);
                    let (p, dp) = plus.eval(x);
                    out[i] = State::new(x, a * m + b * p, a * dm + b * dp);
                }
                (
                    Some(*x_seed),
                    State::new(*x_seed, a * m + b * p, a * dm + b * dp),
                )
            }
            Seed::Point(s) => (None, *s),
        };
        let mut up: Vec<usize> = Vec::new();
        let mut down: Vec<usize> = Vec::new();
        for (i, &x) in xs.iter().enumerate() {
            if !(x > 0.0) {
                return Err(Error::Domain {
                    func: "Solution::states_at",
                    msg: format!("x = {x} must be positive"),
                });
            }
            if origin.is_some_and(|xs0| x <= xs0) {
                continue;
            }
            if x >= start.x {
                up.push(i);
            } else {
                down.push(i);
            }
        }
        up.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
        down.sort_by(|&i, &j| xs[j].total_cmp(&xs[i]));
        for group in [up, down] {
            if group.is_empty() {
                continue;
            }
            let stops: Vec<f64> = group.iter().map(|&i| xs[i]).collect();
            let (end, inner) = stops.split_last().unwrap();
            let t = self
                .integrator
                .run(start, *end, inner, |k, s| out[group[k]] = *s)?;
            out[*group.last().unwrap()] = t.end;
        }
        Ok(out)
    }
}

/// Solution through a given sample.
pub fn solve_from_sample(spec: &ProblemSpec, lambda: f64, s: SolutionSample) -> Solution {
    Solution {
        lambda,
        integrator: Integrator::new(spec, lambda),
        seed: Seed::Point(State::new(s.x, s.psi, s.dpsi)),
    }
}

/// Solution with origin data a·u₋ + b·u₊.
pub fn solve_origin(spec: &ProblemSpec, lambda: f64, a: f64, b: f64) -> Result<Solution> {
    let minus = frobenius_series(spec, lambda, Branch::Minus, FROBENIUS_ORDER)?;
    let plus = frobenius_series(spec, lambda, Branch::Plus, FROBENIUS_ORDER)?;
    let x_seed = matching_point(
        &minus,
        &plus,
        initial_matching_point(spec, lambda),
        SEED_TOL,
    )?;
    Ok(Solution {
        lambda,
        integrator: Integrator::new(spec, lambda),
        seed: Seed::Origin {
            a,
            b,
            minus,
            plus,
            x_seed,
        },
    })
}

/// L_θ ~ x^{1/2-ν} + θ x^{1/2+ν} (finite θ) or x^{1/2+ν} (θ = ∞).
pub fn solve_l(spec: &ProblemSpec, extension: ExtensionParam, lambda: f64) -> Result<Solution> {
    match extension {
        ExtensionParam::Finite(theta) => solve_origin(spec, lambda, 1.0, theta),
        ExtensionParam::Infinity => solve_origin(spec, lambda, 0.0, 1.0),
    }
}

/// Point x_far where the decay action ∫₀^x sqrt(max(V + z, 0)) reaches c_far.
pub fn far_point(spec: &ProblemSpec, z: f64) -> Result<f64> {
    let c_far = spec.far_cutoff;
    let dx = c_far / z.sqrt() / 400.0;
    let f = |x: f64| (spec.potential_at(x) + z).max(0.0).sqrt();
    let mut action = 0.0;
    let mut x = 0.0;
    let mut fx = f(0.0);
    for _ in 0..4_000_000 {
        let x1 = x + dx;
        let f1 = f(x1);
        let inc = 0.5 * dx * (fx + f1);
        if action + inc >= c_far {
            // linear interpolation inside the last cell
            let frac = (c_far - action) / inc;
            return Ok(x + frac * dx);
        }
        action += inc;
        x = x1;
        fx = f1;
    }
    Err(Error::TurningPoint { x })
}

/// Decaying solution on the half-line for λ = -z, seeded with WKB data at x_far.
pub fn solve_r_halfline(spec: &ProblemSpec, z: f64) -> Result<Solution> {
    let x_far = far_point(spec, z)?;
    solve_r_halfline_from(spec, z, x_far)
}

pub fn solve_r_halfline_from(spec: &ProblemSpec, z: f64, x_far: f64) -> Result<Solution> {
    if !(z > 0.0) {
        return Err(Error::Domain {
            func: "solve_r_halfline",
            msg: format!("z = {z} must be positive"),
        });
    }
    let lambda = -z;
    let q = spec.q(lambda, x_far);
    let h = 1e-4 * x_far;
    let dq = (spec.q(lambda, x_far + h) - spec.q(lambda, x_far - h)) / (2.0 * h);
    if !(q > 0.0) || dq.abs() > 0.5 * q.powf(1.5) {
        return Err(Error::TurningPoint { x: x_far });
    }
    let slope = -q.sqrt() - dq / (4.0 * q);
    Ok(Solution {
        lambda,
        integrator: Integrator::new(spec, lambda),
        seed: Seed::Point(State::new(x_far, 1.0, slope)),
    })
}

/// Solution vanishing at the wall x = R, seeded with (ψ, ψ') = (0, -1).
pub fn solve_r_dirichlet(spec: &ProblemSpec, lambda: f64) -> Result<Solution> {
    Ok(Solution {
        lambda,
        integrator: Integrator::new(spec, lambda),
        seed: Seed::Point(State::new(spec.trunc_radius, 0.0, -1.0)),
    })
}

/// The solution selected by the boundary condition at the far end for λ.
pub fn solve_r(spec: &ProblemSpec, lambda: f64) -> Result<Solution> {
    match spec.mode {
        BoundaryMode::HalfLine => solve_r_halfline(spec, -lambda),
        BoundaryMode::Wall => solve_r_dirichlet(spec, lambda),
    }
}

/// ψ ≈ α u₋ + β u₊ near the origin. `log_scale` is the common logarithmic
/// scale of α and β (the solution's true values are exp(log_scale) times larger).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub cond: f64,
    pub x_match: f64,
    pub log_scale: f64,
}

impl ConnectionCoeffs {
    /// β/α, the extension parameter of the solution's boundary data.
    pub fn theta(&self) -> f64 {
        self.beta / self.alpha
    }
}

fn solve_2x2(minus: &FrobeniusBranch, plus: &FrobeniusBranch, s: &State) -> (f64, f64, f64) {
    let x = s.x;
    let (m, dm) = minus.eval(x);
    let (p, dp) = plus.eval(x);
    // Rows (ψ, xψ') keep both rows of comparable size.
    let (a11, a12, a21, a22) = (m, p, x * dm, x * dp);
    let det = a11 * a22 - a12 * a21;
    let (r1, r2) = (s.psi, x * s.dpsi);
    let alpha = (r1 * a22 - a12 * r2) / det;
    let beta = (a11 * r2 - a21 * r1) / det;
    (alpha, beta, cond_2x2(a11, a12, a21, a22))
}

/// Spectral condition number of a 2×2 matrix.
pub(crate) fn cond_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let fro2 = a * a + b * b + c * c + d * d;
    let det = (a * d - b * c).abs();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s_max = ((fro2 + disc) / 2.0).sqrt();
    let s_min = det / s_max;
    s_max / s_min
}

/// Match `sol` against the Frobenius basis at an adaptively chosen point and
/// confirm that halving the point leaves (α, β) unchanged.
pub fn connection_coefficients(
    spec: &ProblemSpec,
    lambda: f64,
    sol: &Solution,
) -> Result<ConnectionCoeffs> {
    let minus = frobenius_series(spec, lambda, Branch::Minus, FROBENIUS_ORDER)?;
    let plus = frobenius_series(spec, lambda, Branch::Plus, FROBENIUS_ORDER)?;
    let tol = spec.tolerances.matching;
    let x_m = matching_point(
        &minus,
        &plus,
        initial_matching_point(spec, lambda),
        1e-3 * tol,
    )?;
    let states = sol.states_at(&[x_m, 0.5 * x_m])?;
    let (alpha, beta, cond) = solve_2x2(&minus, &plus, &states[0]);
    if !(cond <= MAX_COND) {
        return Err(Error::Conditioning { cond });
    }
    // Express the half-point result on the scale of the first one.
    let (a2, b2, _) = solve_2x2(&minus, &plus, &states[1]);
    let rel = (states[1].log_scale - states[0].log_scale).exp();
    let (a2, b2) = (a2 * rel, b2 * rel);
    let w = x_m.powf(2.0 * spec.nu());
    let shift = ((alpha - a2).abs() + (beta - b2).abs() * w) / (alpha.abs() + beta.abs() * w);
    if !(shift <= tol) {
        return Err(Error::Unstable(format!(
            "relative shift {shift:e} between x_m = {x_m:e} and x_m/2"
        )));
    }
    Ok(ConnectionCoeffs {
        alpha,
        beta,
        cond,
        x_match: x_m,
        log_scale: states[0].log_scale,
    })
}

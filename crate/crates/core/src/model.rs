//! Problem definition: the order ν, the polynomial potential, the extension
//! parameter θ and the numerical policy shared by every solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::FnAccuracy;

/// Half-width of the excluded band around ν = 1/2 when V is not identically zero.
pub const RESONANCE_EPS: f64 = 1e-6;
/// Default admissible range of ν; widened to (0, 1) by `allow_extreme_nu`.
pub const DEFAULT_NU_RANGE: (f64, f64) = (0.05, 0.95);
pub const MAX_DEGREE: usize = 8;
pub const MIN_FAR_CUTOFF: f64 = 30.0;

/// The order ν of the inverse-square term (ν² - 1/4)/x².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub nu: f64,
}

impl Order {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Validation(format!("order out of (0,1): nu = {nu}")));
        }
        Ok(Self { nu })
    }

    /// Coefficient ν² - 1/4 of the 1/x² term.
    pub fn singular_coeff(&self) -> f64 {
        self.nu * self.nu - 0.25
    }

    pub fn is_half(&self) -> bool {
        (self.nu - 0.5).abs() <= RESONANCE_EPS
    }
}

/// Polynomial potential V(x) = Σ v_j x^j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub coeffs: Vec<f64>,
    pub lower_bound_check_radius: f64,
}

impl Potential {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self {
            coeffs,
            lower_bound_check_radius: 1.0,
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Degree after trailing zeros are dropped; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Coefficient v_j, zero beyond the stored list.
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }
}

/// Self-adjoint extension: L_θ ~ x^{1/2-ν} + θ x^{1/2+ν} near 0, or the
/// Friedrichs extension selecting x^{1/2+ν}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtensionParam {
    Finite(f64),
    Infinity,
}

impl ExtensionParam {
    /// File-name friendly label: the number, or `inf`.
    pub fn label(&self) -> String {
        match self {
            ExtensionParam::Finite(t) => format!("{t}"),
            ExtensionParam::Infinity => "inf".to_string(),
        }
    }
}

impl std::fmt::Display for ExtensionParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for ExtensionParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(ExtensionParam::Infinity);
        }
        let v: f64 = t.parse().map_err(|_| {
            Error::Validation(format!("theta must be a real number or \"inf\", got {s:?}"))
        })?;
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "theta must be finite or \"inf\", got {s:?}"
            )));
        }
        Ok(ExtensionParam::Finite(v))
    }
}

/// Whether the boundary condition at the origin is scale invariant.
pub fn is_scale_invariant(e: ExtensionParam) -> bool {
    matches!(e, ExtensionParam::Infinity) || e == ExtensionParam::Finite(0.0)
}

/// Half-line problems seed the decaying solution far out; wall problems put a
/// Dirichlet condition at the truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryMode {
    HalfLine,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(with = "fn_acc_serde")]
    pub function: FnAccuracy,
    /// Local relative tolerance of the Taylor integrator.
    pub ode: f64,
    /// Tolerance for Frobenius truncation and matching-point stability.
    pub matching: f64,
}

mod fn_acc_serde {
    use super::FnAccuracy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &FnAccuracy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.rel_tol)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FnAccuracy, D::Error> {
        Ok(FnAccuracy {
            rel_tol: f64::deserialize(d)?,
        })
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            function: FnAccuracy::default(),
            ode: 1e-15,
            matching: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub order: Order,
    pub potential: Potential,
    pub trunc_radius: f64,
    pub far_cutoff: f64,
    pub mode: BoundaryMode,
    pub tolerances: Tolerances,
    pub allow_extreme_nu: bool,
}

impl ProblemSpec {
    /// Wall-mode problem with default tolerances, validated.
    pub fn new(nu: f64, coeffs: Vec<f64>, trunc_radius: f64) -> Result<Self> {
        validate(&Self::unchecked(nu, coeffs, trunc_radius))
    }

    /// Same problem on the half-line.
    pub fn half_line(nu: f64, coeffs: Vec<f64>) -> Result<Self> {
        let mut s = Self::unchecked(nu, coeffs, 1.0);
        s.mode = BoundaryMode::HalfLine;
        validate(&s)
    }

    /// Raw construction without validation; pass the result through [`validate`].
    pub fn unchecked(nu: f64, coeffs: Vec<f64>, trunc_radius: f64) -> Self {
        Self {
            order: Order { nu },
            potential: Potential::new(coeffs),
            trunc_radius,
            far_cutoff: 36.0,
            mode: BoundaryMode::Wall,
            tolerances: Tolerances::default(),
            allow_extreme_nu: false,
        }
    }

    pub fn nu(&self) -> f64 {
        self.order.nu
    }

    pub fn with_mode(&self, mode: BoundaryMode) -> Self {
        let mut s = self.clone();
        s.mode = mode;
        s
    }

    pub fn with_radius(&self, r: f64) -> Result<Self> {
        let mut s = self.clone();
        s.trunc_radius = r;
        validate(&s)
    }

    pub fn potential_at(&self, x: f64) -> f64 {
        eval_potential(&self.potential, x)
    }

    /// Q(x) = (ν² - 1/4)/x² + V(x) - λ, so that ψ'' = Q ψ.
    pub fn q(&self, lambda: f64, x: f64) -> f64 {
        self.order.singular_coeff() / (x * x) + self.potential_at(x) - lambda
    }
}

/// Check every invariant and return the normalized problem.
pub fn validate(spec: &ProblemSpec) -> Result<ProblemSpec> {
    let nu = spec.order.nu;
    Order::new(nu)?;
    let (lo, hi) = DEFAULT_NU_RANGE;
    if !spec.allow_extreme_nu && !(lo..=hi).contains(&nu) {
        return Err(Error::Validation(format!(
            "order nu = {nu} outside the default range [{lo}, {hi}]; set allow_extreme_nu to override"
        )));
    }
    if spec.potential.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Validation(
            "potential coefficients must be finite".into(),
        ));
    }
    let mut coeffs = spec.potential.coeffs.clone();
    while coeffs.last() == Some(&0.0) {
        coeffs.pop();
    }
    if coeffs.len() > MAX_DEGREE + 1 {
        return Err(Error::Validation(format!(
            "potential degree {} exceeds the maximum {MAX_DEGREE}",
            coeffs.len() - 1
        )));
    }
    if spec.order.is_half() && !coeffs.is_empty() {
        return Err(Error::Validation(format!(
            "nu = {nu} is resonant: the Frobenius exponents 1/2 - nu and 1/2 + nu differ by 1, \
             which produces logarithmic solutions unless V is identically zero"
        )));
    }
    let r = spec.trunc_radius;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Validation(format!(
            "trunc_radius must be positive, got {r}"
        )));
    }
    if !(spec.far_cutoff >= MIN_FAR_CUTOFF && spec.far_cutoff.is_finite()) {
        return Err(Error::Validation(format!(
            "far_cutoff must be at least {MIN_FAR_CUTOFF}, got {}",
            spec.far_cutoff
        )));
    }
    let t = &spec.tolerances;
    FnAccuracy::new(t.function.rel_tol)?;
    if !(t.ode > 0.0 && t.ode < 1e-6) || !(t.matching > 0.0 && t.matching < 1e-3) {
        return Err(Error::Validation(
            "tolerances must be positive and small".into(),
        ));
    }
    let potential = Potential {
        coeffs,
        lower_bound_check_radius: r,
    };
    check_lower_bound(&potential, spec.mode)?;
    Ok(ProblemSpec {
        potential,
        ..spec.clone()
    })
}

/// Sample V on [0, check_radius]; on the half-line the polynomial must also be
/// bounded below as x → ∞.
fn check_lower_bound(p: &Potential, mode: BoundaryMode) -> Result<()> {
    let r = p.lower_bound_check_radius;
    for i in 0..=1000 {
        let x = r * i as f64 / 1000.0;
        if !eval_potential(p, x).is_finite() {
            return Err(Error::Validation(format!(
                "potential is not finite at x = {x}"
            )));
        }
    }
    if mode == BoundaryMode::HalfLine && p.degree() > 0 && p.coeff(p.degree()) < 0.0 {
        return Err(Error::Validation(
            "potential is unbounded below on the half-line (negative leading coefficient)".into(),
        ));
    }
    Ok(())
}

/// Horner evaluation of V(x).
pub fn eval_potential(p: &Potential, x: f64) -> f64 {
    p.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

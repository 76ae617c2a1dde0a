//! Formal series whose exponents live on the lattice {p/2 + qν}.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two exponents closer than this are treated as numerically equal.
pub const COLLISION_TOL: f64 = 1e-9;

/// Values within this of the truncation order are still retained.
const TRUNC_SLACK: f64 = 1e-12;

/// Exponent p/2 + qν.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeExponent {
    pub p: i32,
    pub q: i32,
}

impl LatticeExponent {
    pub const ZERO: LatticeExponent = LatticeExponent { p: 0, q: 0 };

    pub fn new(p: i32, q: i32) -> Self {
        Self { p, q }
    }

    pub fn value(&self, nu: f64) -> f64 {
        0.5 * self.p as f64 + self.q as f64 * nu
    }
}

impl std::ops::Add for LatticeExponent {
    type Output = LatticeExponent;
    fn add(self, o: Self) -> Self {
        Self::new(self.p + o.p, self.q + o.q)
    }
}

impl fmt::Display for LatticeExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.p, self.q) {
            (p, 0) => write!(f, "{p}/2"),
            (0, q) => write!(f, "{q}ν"),
            (p, q) => write!(f, "{p}/2+{q}ν"),
        }
    }
}

/// z-series mean Σ c·z^{-value}, t-series mean Σ c·t^{+value}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Z,
    T,
}

/// Key of a term: exponent plus the power of θ it carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub exponent: LatticeExponent,
    pub theta_power: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalSeries {
    pub variable: Variable,
    pub nu: f64,
    /// Largest exponent value retained.
    pub truncation_order: f64,
    pub terms: BTreeMap<TermKey, f64>,
}

/// Flat JSON row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub p: i32,
    pub q: i32,
    pub value: f64,
    pub coefficient: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_power: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub variable: Variable,
    pub nu: f64,
    pub truncation_order: f64,
    pub terms: Vec<SeriesTerm>,
}

impl FractionalSeries {
    pub fn zero(variable: Variable, nu: f64, truncation_order: f64) -> Self {
        Self {
            variable,
            nu,
            truncation_order,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(variable: Variable, nu: f64, truncation_order: f64) -> Self {
        Self::monomial(variable, nu, truncation_order, LatticeExponent::ZERO, 1.0)
    }

    pub fn monomial(
        variable: Variable,
        nu: f64,
        truncation_order: f64,
        e: LatticeExponent,
        c: f64,
    ) -> Self {
        let mut s = Self::zero(variable, nu, truncation_order);
        s.add_term(e, 0, c);
        s
    }

    /// Σ c_k·var^{∓k/2} from (k, c_k) pairs.
    pub fn half_integer(
        variable: Variable,
        nu: f64,
        truncation_order: f64,
        coeffs: &[(i32, f64)],
    ) -> Self {
        let mut s = Self::zero(variable, nu, truncation_order);
        for &(k, c) in coeffs {
            s.add_term(LatticeExponent::new(k, 0), 0, c);
        }
        s
    }

    pub fn value_of(&self, e: LatticeExponent) -> f64 {
        e.value(self.nu)
    }

    /// Adds c to a term, dropping it when beyond the truncation order.
    pub fn add_term(&mut self, exponent: LatticeExponent, theta_power: u32, c: f64) {
        if exponent.value(self.nu) > self.truncation_order + TRUNC_SLACK {
            return;
        }
        *self
            .terms
            .entry(TermKey {
                exponent,
                theta_power,
            })
            .or_insert(0.0) += c;
    }

    pub fn coeff(&self, exponent: LatticeExponent, theta_power: u32) -> f64 {
        self.terms
            .get(&TermKey {
                exponent,
                theta_power,
            })
            .copied()
            .unwrap_or(0.0)
    }

    /// Sum over θ powers of the coefficients attached to one exponent.
    pub fn coeff_any_theta(&self, exponent: LatticeExponent) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| k.exponent == exponent)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Removes terms with |c| ≤ tol.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.abs() > tol);
        self
    }

    pub fn with_truncation(&self, truncation_order: f64) -> Self {
        let mut s = Self::zero(self.variable, self.nu, truncation_order);
        for (k, c) in &self.terms {
            s.add_term(k.exponent, k.theta_power, *c);
        }
        s
    }

    pub fn scaled(&self, f: f64) -> Self {
        let mut s = self.clone();
        s.terms.values_mut().for_each(|c| *c *= f);
        s
    }

    /// Numerical value at x (z or t).
    pub fn evaluate(&self, x: f64) -> f64 {
        let sign = match self.variable {
            Variable::Z => -1.0,
            Variable::T => 1.0,
        };
        self.terms
            .iter()
            .map(|(k, c)| c * x.powf(sign * k.exponent.value(self.nu)))
            .sum()
    }

    /// Distinct exponent pairs whose values coincide within COLLISION_TOL.
    pub fn collisions(&self) -> Vec<(LatticeExponent, LatticeExponent)> {
        let mut exps: Vec<LatticeExponent> = self.terms.keys().map(|k| k.exponent).collect();
        exps.dedup();
        exps.sort();
        exps.dedup();
        let mut out = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for b in &exps[i + 1..] {
                if (a.value(self.nu) - b.value(self.nu)).abs() < COLLISION_TOL {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> SeriesJson {
        let with_theta = self.terms.keys().any(|k| k.theta_power > 0);
        let mut terms: Vec<SeriesTerm> = self
            .terms
            .iter()
            .map(|(k, c)| SeriesTerm {
                p: k.exponent.p,
                q: k.exponent.q,
                value: k.exponent.value(self.nu),
                coefficient: *c,
                theta_power: with_theta.then_some(k.theta_power),
            })
            .collect();
        terms.sort_by(|a, b| {
            a.value
                .total_cmp(&b.value)
                .then(a.q.cmp(&b.q))
                .then(a.theta_power.cmp(&b.theta_power))
        });
        SeriesJson {
            variable: self.variable,
            nu: self.nu,
            truncation_order: self.truncation_order,
            terms,
        }
    }

    pub fn from_json(j: &SeriesJson) -> Self {
        let mut s = Self::zero(j.variable, j.nu, j.truncation_order);
        for t in &j.terms {
            s.add_term(
                LatticeExponent::new(t.p, t.q),
                t.theta_power.unwrap_or(0),
                t.coefficient,
            );
        }
        s
    }
}

fn check_compatible(a: &FractionalSeries, b: &FractionalSeries) -> Result<()> {
    if a.variable != b.variable {
        return Err(Error::Series(format!(
            "variable mismatch: {:?} vs {:?}",
            a.variable, b.variable
        )));
    }
    if a.nu != b.nu {
        return Err(Error::Series(format!(
            "order mismatch: ν = {} vs {}",
            a.nu, b.nu
        )));
    }
    Ok(())
}

pub fn series_add(a: &FractionalSeries, b: &FractionalSeries) -> Result<FractionalSeries> {
    check_compatible(a, b)?;
    let mut s =
        FractionalSeries::zero(a.variable, a.nu, a.truncation_order.min(b.truncation_order));
    for (k, c) in a.terms.iter().chain(&b.terms) {
        s.add_term(k.exponent, k.theta_power, *c);
    }
    Ok(s)
}

pub fn series_mul(a: &FractionalSeries, b: &FractionalSeries) -> Result<FractionalSeries> {
    check_compatible(a, b)?;
    let mut s =
        FractionalSeries::zero(a.variable, a.nu, a.truncation_order.min(b.truncation_order));
    for (ka, ca) in &a.terms {
        for (kb, cb) in &b.terms {
            s.add_term(
                ka.exponent + kb.exponent,
                ka.theta_power + kb.theta_power,
                ca * cb,
            );
        }
    }
    Ok(s)
}

/// Smallest positive exponent value among the non-unit terms.
fn min_positive_value(r: &FractionalSeries) -> Result<Option<f64>> {
    let mut lo: Option<f64> = None;
    for k in r.terms.keys() {
        let v = k.exponent.value(r.nu);
        if !(v > COLLISION_TOL) {
            return Err(Error::Series(format!(
                "term {} has non-positive exponent {v}",
                k.exponent
            )));
        }
        lo = Some(lo.map_or(v, |l: f64| l.min(v)));
    }
    Ok(lo)
}

/// Neumann-series inverse 1/(c₀(1 + r)) = c₀⁻¹ Σ (-r)^k.
pub fn series_inverse(a: &FractionalSeries) -> Result<FractionalSeries> {
    let unit = TermKey {
        exponent: LatticeExponent::ZERO,
        theta_power: 0,
    };
    let c0 = a.terms.get(&unit).copied().unwrap_or(0.0);
    if c0 == 0.0 {
        return Err(Error::Series("no unit term to invert".into()));
    }
    let mut r = a.scaled(1.0 / c0);
    r.terms.remove(&unit);
    r = r.scaled(-1.0);
    let one = FractionalSeries::one(a.variable, a.nu, a.truncation_order);
    let Some(step) = min_positive_value(&r)? else {
        return Ok(one.scaled(1.0 / c0));
    };
    let powers = (a.truncation_order / step).floor() as usize + 1;
    let mut sum = one.clone();
    let mut term = one;
    for _ in 0..powers {
        term = series_mul(&term, &r)?;
        if term.is_empty() {
            break;
        }
        sum = series_add(&sum, &term)?;
    }
    Ok(sum.scaled(1.0 / c0))
}

/// 1/(1 + θK) = Σ_N (-θ)^N K^N. Each term of K^N is stored with theta_power
/// N and its coefficient already multiplied by (-θ)^N.
pub fn krein_factor(k_series: &FractionalSeries, theta: f64) -> Result<FractionalSeries> {
    if k_series.variable != Variable::Z {
        return Err(Error::Series("Krein factor needs a z-series".into()));
    }
    let leading = k_series
        .terms
        .keys()
        .map(|k| k.exponent)
        .min_by(|a, b| a.value(k_series.nu).total_cmp(&b.value(k_series.nu)));
    if leading != Some(LatticeExponent::new(0, 1)) {
        return Err(Error::Series(format!(
            "K series must lead with z^-ν, found {:?}",
            leading.map(|e| e.to_string())
        )));
    }
    let nu = k_series.nu;
    let trunc = k_series.truncation_order;
    let mut out = FractionalSeries::one(Variable::Z, nu, trunc);
    if theta == 0.0 {
        return Ok(out);
    }
    let n_max = (trunc / nu).floor() as u32;
    let mut k_pow = FractionalSeries::one(Variable::Z, nu, trunc);
    for n in 1..=n_max {
        k_pow = series_mul(&k_pow, k_series)?;
        let f = (-theta).powi(n as i32);
        for (k, c) in &k_pow.terms {
            out.add_term(k.exponent, k.theta_power + n, c * f);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_krein::free_krein_constant;
    use approx::assert_relative_eq;

    fn z(nu: f64, trunc: f64, terms: &[((i32, i32), f64)]) -> FractionalSeries {
        let mut s = FractionalSeries::zero(Variable::Z, nu, trunc);
        for &((p, q), c) in terms {
            s.add_term(LatticeExponent::new(p, q), 0, c);
        }
        s
    }

    #[test]
    fn unit_is_neutral() {
        let s = z(0.3, 3.0, &[((0, 0), 2.0), ((1, 1), -0.5), ((3, 0), 4.0)]);
        let one = FractionalSeries::one(Variable::Z, 0.3, 3.0);
        assert_eq!(series_mul(&one, &s).unwrap(), s);
    }

    #[test]
    fn exponents_add_on_the_lattice() {
        let a = z(0.3, 3.0, &[((0, 1), 1.0)]);
        let b = z(0.3, 3.0, &[((1, 0), 1.0)]);
        let p = series_mul(&a, &b).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.coeff(LatticeExponent::new(1, 1), 0), 1.0);
    }

    #[test]
    fn binomial_square() {
        let a = z(0.3, 3.0, &[((0, 0), 1.0), ((1, 0), 1.0)]);
        let p = series_mul(&a, &a).unwrap();
        assert_eq!(p.coeff(LatticeExponent::ZERO, 0), 1.0);
        assert_eq!(p.coeff(LatticeExponent::new(1, 0), 0), 2.0);
        assert_eq!(p.coeff(LatticeExponent::new(2, 0), 0), 1.0);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn variable_mismatch_is_rejected() {
        let a = z(0.3, 3.0, &[((0, 0), 1.0)]);
        let b = FractionalSeries::one(Variable::T, 0.3, 3.0);
        assert!(matches!(series_mul(&a, &b), Err(Error::Series(_))));
    }

    #[test]
    fn truncation_is_respected() {
        let a = z(0.3, 1.0, &[((0, 0), 1.0), ((1, 0), 1.0)]);
        let b = z(0.3, 3.0, &[((0, 0), 1.0), ((1, 0), 1.0), ((4, 0), 1.0)]);
        let p = series_mul(&a, &b).unwrap();
        assert_eq!(p.truncation_order, 1.0);
        assert!(p.terms.keys().all(|k| k.exponent.value(0.3) <= 1.0));
    }

    #[test]
    fn inverse_of_one_and_geometric() {
        let one = FractionalSeries::one(Variable::Z, 0.3, 3.0);
        assert_eq!(series_inverse(&one).unwrap(), one);
        let h1 = 0.7;
        let a = z(0.3, 3.0, &[((0, 0), 1.0), ((1, 0), h1)]);
        let inv = series_inverse(&a).unwrap();
        for k in 0..=6 {
            assert_relative_eq!(
                inv.coeff(LatticeExponent::new(k, 0), 0),
                (-h1).powi(k),
                max_relative = 1e-14
            );
        }
        assert_eq!(inv.len(), 7);
    }

    #[test]
    fn inverse_needs_unit_term() {
        let a = z(0.3, 3.0, &[((1, 0), 1.0)]);
        assert!(series_inverse(&a).is_err());
    }

    #[test]
    fn krein_factor_geometric() {
        let c = free_krein_constant(0.3);
        let k = z(0.3, 3.0, &[((0, 1), c)]);
        let f0 = krein_factor(&k, 0.0).unwrap();
        assert_eq!(f0, FractionalSeries::one(Variable::Z, 0.3, 3.0));
        let theta = 1.0;
        let f = krein_factor(&k, theta).unwrap();
        assert_relative_eq!(
            f.coeff(LatticeExponent::new(0, 1), 1),
            -c * theta,
            max_relative = 1e-15
        );
        for n in 0..=10 {
            assert_relative_eq!(
                f.coeff(LatticeExponent::new(0, n), n as u32),
                (-theta * c).powi(n),
                max_relative = 1e-13
            );
        }
        assert_relative_eq!(c, 1.0480, epsilon = 5e-4);
    }

    #[test]
    fn krein_factor_leading_exponent_checked() {
        let k = z(0.3, 3.0, &[((1, 0), 1.0)]);
        assert!(krein_factor(&k, 1.0).is_err());
    }

    #[test]
    fn first_order_theta_coefficient_is_linear() {
        let k = z(0.3, 3.0, &[((0, 1), 1.2), ((1, 1), 0.4)]);
        let a = krein_factor(&k, 0.05).unwrap();
        let b = krein_factor(&k, 0.1).unwrap();
        for e in [LatticeExponent::new(0, 1), LatticeExponent::new(1, 1)] {
            assert_relative_eq!(b.coeff(e, 1), 2.0 * a.coeff(e, 1), max_relative = 1e-14);
        }
    }

    #[test]
    fn collisions_flagged() {
        let s = z(0.25, 3.0, &[((1, 0), 1.0), ((0, 2), 1.0), ((0, 1), 1.0)]);
        assert_eq!(
            s.collisions(),
            vec![(LatticeExponent::new(0, 2), LatticeExponent::new(1, 0))]
        );
        let s = z(0.3, 3.0, &[((1, 0), 1.0), ((0, 2), 1.0)]);
        assert!(s.collisions().is_empty());
    }

    #[test]
    fn json_round_trip() {
        let mut s = z(0.3, 3.0, &[((0, 0), 1.0), ((1, 1), -0.5)]);
        s.add_term(LatticeExponent::new(0, 2), 2, 0.25);
        let j = s.to_json();
        let text = serde_json::to_string(&j).unwrap();
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(FractionalSeries::from_json(&back), s);
        assert!(text.contains("\"theta_power\""));
    }
}

//! Exact fractional calculus on finite sums of power functions.
//!
//! A [`MonomialSum`] holds `Σ cᵢ t^{αᵢ}` with every `αᵢ > -1`. The
//! Riemann–Liouville integral, the RL/Caputo/Hilfer derivatives and the
//! ordinary derivative all map such sums to sums of the same kind (or fail
//! with a domain error when a term would leave `L¹(0, 1)`), so every
//! operator identity in the crate can be checked coefficient by coefficient.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gamma::{gamma_ratio, rgamma};

/// Exponents closer than this are the same term.
pub const EXPONENT_TOLERANCE: f64 = 1e-12;

/// Relative size below which the sum of two merged coefficients is zero.
pub const CANCELLATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub alpha: f64,
}

impl Monomial {
    pub fn new(coeff: f64, alpha: f64) -> Self {
        Monomial { coeff, alpha }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.alpha == 0.0 {
            self.coeff
        } else {
            self.coeff * t.powf(self.alpha)
        }
    }
}

/// Ordered, merged sum of monomials.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonomialSum {
    terms: Vec<Monomial>,
}

/// Value of a sum as `t → 0⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitAtZero {
    Finite(f64),
    /// A term with negative exponent and nonzero coefficient is present.
    Divergent {
        alpha: f64,
        coeff: f64,
    },
}

impl MonomialSum {
    pub fn zero() -> Self {
        MonomialSum { terms: Vec::new() }
    }

    /// Validated constructor: every exponent must exceed -1 and every
    /// coefficient must be finite.
    pub fn new(terms: impl IntoIterator<Item = Monomial>) -> Result<Self> {
        let terms: Vec<Monomial> = terms.into_iter().collect();
        for m in &terms {
            check_term(m)?;
        }
        Ok(Self::normalized(terms))
    }

    pub fn monomial(coeff: f64, alpha: f64) -> Result<Self> {
        Self::new([Monomial::new(coeff, alpha)])
    }

    pub fn constant(c: f64) -> Self {
        Self::normalized(vec![Monomial::new(c, 0.0)])
    }

    /// Sorts, merges equal exponents and drops vanishing coefficients.
    pub(crate) fn normalized(mut terms: Vec<Monomial>) -> Self {
        terms.retain(|m| m.coeff != 0.0);
        for m in terms.iter_mut() {
            if m.alpha.abs() <= EXPONENT_TOLERANCE {
                m.alpha = 0.0;
            }
        }
        terms.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap_or(Ordering::Equal));
        let mut merged: Vec<Monomial> = Vec::with_capacity(terms.len());
        // running magnitude of what was merged into the last slot
        let mut scale: Vec<f64> = Vec::with_capacity(terms.len());
        for m in terms {
            match merged.last_mut() {
                Some(last) if (last.alpha - m.alpha).abs() <= EXPONENT_TOLERANCE => {
                    last.coeff += m.coeff;
                    let s = scale.last_mut().unwrap();
                    *s = s.max(m.coeff.abs());
                }
                _ => {
                    scale.push(m.coeff.abs());
                    merged.push(m);
                }
            }
        }
        let terms = merged
            .into_iter()
            .zip(scale)
            .filter(|(m, s)| m.coeff != 0.0 && m.coeff.abs() > CANCELLATION_TOLERANCE * s)
            .map(|(m, _)| m)
            .collect();
        MonomialSum { terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn lowest_exponent(&self) -> Option<f64> {
        self.terms.first().map(|m| m.alpha)
    }

    /// Coefficient of `t^alpha` (zero when absent).
    pub fn coefficient_of(&self, alpha: f64) -> f64 {
        self.terms
            .iter()
            .find(|m| (m.alpha - alpha).abs() <= EXPONENT_TOLERANCE)
            .map_or(0.0, |m| m.coeff)
    }

    pub fn add(&self, other: &MonomialSum) -> MonomialSum {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::normalized(terms)
    }

    pub fn sub(&self, other: &MonomialSum) -> MonomialSum {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> MonomialSum {
        Self::normalized(
            self.terms
                .iter()
                .map(|m| Monomial::new(m.coeff * c, m.alpha))
                .collect(),
        )
    }

    /// Pointwise value `Σ cᵢ t^{αᵢ}`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!(
                "evaluation point t = {t} must be >= 0"
            )));
        }
        if t == 0.0 {
            return match self.limit_at_zero() {
                LimitAtZero::Finite(v) => Ok(v),
                LimitAtZero::Divergent { alpha, .. } => {
                    Err(Error::domain(format!("t^{alpha} is singular at t = 0")))
                }
            };
        }
        Ok(self.terms.iter().map(|m| m.eval(t)).sum())
    }

    pub fn limit_at_zero(&self) -> LimitAtZero {
        let mut value = 0.0;
        for m in &self.terms {
            if m.alpha < 0.0 {
                return LimitAtZero::Divergent {
                    alpha: m.alpha,
                    coeff: m.coeff,
                };
            }
            if m.alpha == 0.0 {
                value += m.coeff;
            }
        }
        LimitAtZero::Finite(value)
    }

    /// Largest coefficientwise discrepancy `|a - b| / max(|a|, |b|, 1)`
    /// over the union of exponents.
    pub fn max_discrepancy(&self, other: &MonomialSum) -> f64 {
        let mut worst: f64 = 0.0;
        let (a, b) = (&self.terms, &other.terms);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let (ca, cb) = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if (x.alpha - y.alpha).abs() <= EXPONENT_TOLERANCE => {
                    i += 1;
                    j += 1;
                    (x.coeff, y.coeff)
                }
                (Some(x), Some(y)) if x.alpha < y.alpha => {
                    i += 1;
                    (x.coeff, 0.0)
                }
                (Some(_), Some(y)) => {
                    j += 1;
                    (0.0, y.coeff)
                }
                (Some(x), None) => {
                    i += 1;
                    (x.coeff, 0.0)
                }
                (None, Some(y)) => {
                    j += 1;
                    (0.0, y.coeff)
                }
                (None, None) => unreachable!(),
            };
            let d = (ca - cb).abs() / ca.abs().max(cb.abs()).max(1.0);
            worst = worst.max(d);
        }
        worst
    }

    /// True when both sums carry the same exponent set.
    pub fn same_exponents(&self, other: &MonomialSum) -> bool {
        self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(x, y)| (x.alpha - y.alpha).abs() <= EXPONENT_TOLERANCE)
    }
}

fn check_term(m: &Monomial) -> Result<()> {
    if !m.coeff.is_finite() {
        return Err(Error::domain(format!(
            "coefficient {} is not finite",
            m.coeff
        )));
    }
    if !m.alpha.is_finite() || m.alpha <= -1.0 {
        return Err(Error::domain(format!(
            "exponent {} must be finite and > -1",
            m.alpha
        )));
    }
    Ok(())
}

/// `J^order f` for any `order >= 0` (order 0 is the identity).
pub(crate) fn integral_of_order(f: &MonomialSum, order: f64) -> Result<MonomialSum> {
    if order == 0.0 {
        return Ok(f.clone());
    }
    let mut out = Vec::with_capacity(f.len());
    for m in f.terms() {
        if m.alpha <= -1.0 {
            return Err(Error::domain(format!(
                "J^{order} of t^{} diverges (exponent <= -1)",
                m.alpha
            )));
        }
        let c = m.coeff * gamma_ratio(m.alpha + 1.0, m.alpha + order + 1.0);
        out.push(Monomial::new(c, m.alpha + order));
    }
    Ok(MonomialSum::normalized(out))
}

/// Riemann–Liouville integral `J^rho f`, `rho > 0`.
pub fn rl_integral(f: &MonomialSum, rho: f64) -> Result<MonomialSum> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!(
            "integral order rho = {rho} must be > 0"
        )));
    }
    integral_of_order(f, rho)
}

/// First derivative; constants vanish.
pub fn derivative(f: &MonomialSum) -> Result<MonomialSum> {
    let mut out = Vec::with_capacity(f.len());
    for m in f.terms() {
        if m.alpha == 0.0 {
            continue;
        }
        if m.alpha - 1.0 <= -1.0 {
            return Err(Error::domain(format!(
                "d/dt of t^{} leaves L1 (exponent {} <= -1)",
                m.alpha,
                m.alpha - 1.0
            )));
        }
        out.push(Monomial::new(m.coeff * m.alpha, m.alpha - 1.0));
    }
    Ok(MonomialSum::normalized(out))
}

/// RL derivative of order in (0, 1]; order 1 is the ordinary derivative.
pub(crate) fn rl_derivative_of_order(f: &MonomialSum, order: f64) -> Result<MonomialSum> {
    let mut out = Vec::with_capacity(f.len());
    for m in f.terms() {
        // 1/Γ vanishes on t^{order-1}
        let c = m.coeff * gamma_ratio_reciprocal(m.alpha + 1.0, m.alpha - order + 1.0);
        if c == 0.0 {
            continue;
        }
        let e = m.alpha - order;
        if e <= -1.0 {
            return Err(Error::domain(format!(
                "RL derivative of order {order} maps t^{} to t^{e}, outside L1",
                m.alpha
            )));
        }
        out.push(Monomial::new(c, e));
    }
    Ok(MonomialSum::normalized(out))
}

fn gamma_ratio_reciprocal(a: f64, b: f64) -> f64 {
    if rgamma(b) == 0.0 {
        0.0
    } else {
        gamma_ratio(a, b)
    }
}

/// Riemann–Liouville derivative `d/dt J^{1-rho} f`, `0 < rho < 1`.
pub fn rl_derivative(f: &MonomialSum, rho: f64) -> Result<MonomialSum> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!(
            "derivative order rho = {rho} must lie in (0, 1)"
        )));
    }
    rl_derivative_of_order(f, rho)
}

/// Caputo derivative `D^rho (f - f(0))`.
pub fn caputo_derivative(f: &MonomialSum, rho: f64) -> Result<MonomialSum> {
    if let Some(m) = f.terms().iter().find(|m| m.alpha < 0.0) {
        return Err(Error::domain(format!(
            "Caputo derivative needs f(0) finite, but t^{} is present",
            m.alpha
        )));
    }
    let shifted = f.sub(&MonomialSum::constant(f.coefficient_of(0.0)));
    rl_derivative(&shifted, rho)
}

/// Hilfer derivative `J^{nu(1-rho)} d/dt J^{(1-rho)(1-nu)} f`.
pub fn hilfer_derivative(f: &MonomialSum, rho: f64, nu: f64) -> Result<MonomialSum> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!(
            "Hilfer order rho = {rho} must lie in (0, 1)"
        )));
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::domain(format!(
            "Hilfer type nu = {nu} must lie in [0, 1]"
        )));
    }
    let inner = integral_of_order(f, (1.0 - rho) * (1.0 - nu))?;
    let d = derivative(&inner)?;
    integral_of_order(&d, nu * (1.0 - rho))
}

/// Evaluates `f` at `t`.
pub fn eval(f: &MonomialSum, t: f64) -> Result<f64> {
    f.eval(t)
}

impl fmt::Display for MonomialSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, m) in self.terms.iter().enumerate() {
            if i == 0 {
                write!(f, "{}*t^{}", m.coeff, m.alpha)?;
            } else if m.coeff < 0.0 {
                write!(f, " - {}*t^{}", -m.coeff, m.alpha)?;
            } else {
                write!(f, " + {}*t^{}", m.coeff, m.alpha)?;
            }
        }
        Ok(())
    }
}

impl FromStr for MonomialSum {
    type Err = Error;

    /// Parses `"c1*t^a1 + c2*t^a2 - ..."`; also accepts `t`, `t^2`, `3`,
    /// `2*t`, `-t^0.5` and parenthesised exponents `t^(-0.5)`.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty monomial string".into()));
        }
        let chars: Vec<char> = compact.chars().collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut depth = 0;
        for i in 0..chars.len() {
            match chars[i] {
                '(' => depth += 1,
                ')' => depth -= 1,
                '+' | '-' if i > start && depth == 0 => {
                    let prev = chars[i - 1];
                    let exponent_sign = prev == '^'
                        || ((prev == 'e' || prev == 'E')
                            && i >= 2
                            && (chars[i - 2].is_ascii_digit() || chars[i - 2] == '.'));
                    if !exponent_sign {
                        pieces.push(&compact[start..i]);
                        start = i;
                    }
                }
                _ => {}
            }
        }
        pieces.push(&compact[start..]);
        let mut terms = Vec::with_capacity(pieces.len());
        for p in pieces {
            terms.push(parse_term(p)?);
        }
        MonomialSum::new(terms)
    }
}

fn parse_term(p: &str) -> Result<Monomial> {
    let body = p.strip_prefix('+').unwrap_or(p);
    let bad = || Error::Parse(format!("cannot parse monomial term '{p}'"));
    match body.find('t') {
        None => {
            let c: f64 = body.parse().map_err(|_| bad())?;
            Ok(Monomial::new(c, 0.0))
        }
        Some(pos) => {
            let (head, tail) = body.split_at(pos);
            let head = head.strip_suffix('*').unwrap_or(head);
            let coeff = match head {
                "" => 1.0,
                "-" => -1.0,
                h => h.parse().map_err(|_| bad())?,
            };
            let tail = &tail[1..];
            let alpha = if tail.is_empty() {
                1.0
            } else {
                let e = tail.strip_prefix('^').ok_or_else(bad)?;
                let e = e
                    .strip_prefix('(')
                    .and_then(|x| x.strip_suffix(')'))
                    .unwrap_or(e);
                e.parse().map_err(|_| bad())?
            };
            Ok(Monomial::new(coeff, alpha))
        }
    }
}

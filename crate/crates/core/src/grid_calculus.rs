//! Fractional integrals and derivatives of functions sampled on a uniform
//! grid `t_j = j h`, `h = t_max / (n - 1)`.
//!
//! All integral operators are product-integration rules: the sampled factor
//! is reconstructed piecewise linearly and the kernel is integrated exactly
//! against each hat function. Power-type behaviour at the origin, which
//! linear reconstruction resolves poorly, is split off as explicit terms
//! `c t^α` and carried through the operators analytically.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gamma::{gamma, gamma_ratio, rgamma};
use crate::power_calculus::{MonomialSum, EXPONENT_TOLERANCE};

/// `coeff · t^alpha`, kept analytically next to the sampled part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coeff: f64,
    pub alpha: f64,
}

impl PowerTerm {
    pub fn eval(&self, t: f64) -> f64 {
        if t == 0.0 {
            return if self.alpha.abs() <= EXPONENT_TOLERANCE {
                self.coeff
            } else if self.alpha > 0.0 {
                0.0
            } else {
                self.coeff.signum() * f64::INFINITY
            };
        }
        self.coeff * t.powf(self.alpha)
    }

    /// Terms that linear interpolation already resolves to second order.
    fn is_smooth(&self) -> bool {
        let a = self.alpha;
        a >= 1.0 - EXPONENT_TOLERANCE || a.abs() <= EXPONENT_TOLERANCE
    }
}

/// A function on a uniform grid over `[0, t_max]`: sampled regular part
/// plus origin terms `c t^α` with non-integer `α < 1`.
///
/// The regular samples are finite. When some origin term has `α < 0` the
/// value reported at node 0 is `±∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    regular: Vec<f64>,
    origin: Vec<PowerTerm>,
    t_max: f64,
}

impl GridFn {
    /// Wraps raw samples. A non-finite node 0 is read as a singular term
    /// `c t^σ` fitted to the first few nodes.
    pub fn new(samples: Vec<f64>, t_max: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::usage(format!(
                "a grid needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::domain(format!("t_max = {t_max} must be > 0")));
        }
        if samples[0].is_nan() {
            return Err(Error::domain("sample 0 is NaN"));
        }
        if let Some(j) = samples[1..].iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("sample {} is not finite", j + 1)));
        }
        if samples[0].is_finite() {
            return GridFn::from_parts(samples, Vec::new(), t_max);
        }
        let h = t_max / (samples.len() - 1) as f64;
        let (f1, f2) = (samples[1], *samples.get(2).unwrap_or(&f64::NAN));
        // c t^σ + d on nodes 1, 2, 4 when available, else c t^σ
        let (sigma, coeff) = match samples.get(4) {
            Some(&f4) => {
                let r = (f4 - f2) / (f2 - f1);
                let sigma = r.log2();
                (sigma, (f2 - f1) / (h.powf(sigma) * (r - 1.0)))
            }
            None => {
                let sigma = (f2 / f1).log2();
                (sigma, f1 / h.powf(sigma))
            }
        };
        if !(sigma < 0.0 && sigma > -1.0) || !coeff.is_finite() {
            return Err(Error::domain(
                "singular sample at t = 0 is not followed by an integrable power law",
            ));
        }
        let term = PowerTerm {
            coeff,
            alpha: sigma,
        };
        let mut regular: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if j == 0 {
                    0.0
                } else {
                    v - term.eval(j as f64 * h)
                }
            })
            .collect();
        regular[0] = 2.0 * regular[1] - regular.get(2).copied().unwrap_or(regular[1]);
        GridFn::from_parts(regular, vec![term], t_max)
    }

    /// Builds from a regular part and origin terms. Terms that are smooth
    /// enough for linear interpolation are folded into the samples.
    pub fn from_parts(regular: Vec<f64>, origin: Vec<PowerTerm>, t_max: f64) -> Result<Self> {
        if regular.len() < 2 {
            return Err(Error::usage("a grid needs at least 2 samples"));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::domain(format!("t_max = {t_max} must be > 0")));
        }
        if let Some(j) = regular.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("regular sample {j} is not finite")));
        }
        let mut g = GridFn {
            regular,
            origin: Vec::new(),
            t_max,
        };
        for term in origin {
            g.push_term(term);
        }
        Ok(g)
    }

    fn push_term(&mut self, mut term: PowerTerm) {
        if term.coeff == 0.0 {
            return;
        }
        if term.alpha.abs() <= EXPONENT_TOLERANCE {
            term.alpha = 0.0;
        }
        if term.is_smooth() {
            for j in 0..self.n() {
                let t = self.t(j);
                self.regular[j] += term.eval(t);
            }
            return;
        }
        match self
            .origin
            .iter_mut()
            .find(|o| (o.alpha - term.alpha).abs() <= EXPONENT_TOLERANCE)
        {
            Some(o) => o.coeff += term.coeff,
            None => self.origin.push(term),
        }
        self.origin.retain(|o| o.coeff != 0.0);
    }

    /// Samples `f` at the grid nodes; see [`GridFn::new`] for `f(0) = ±∞`.
    pub fn from_fn<F: Fn(f64) -> f64>(t_max: f64, n: usize, f: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage("a grid needs at least 2 samples"));
        }
        let h = t_max / (n - 1) as f64;
        let samples = (0..n)
            .map(|j| {
                if j + 1 == n {
                    f(t_max)
                } else {
                    f(j as f64 * h)
                }
            })
            .collect();
        GridFn::new(samples, t_max)
    }

    /// Samples a monomial sum, keeping its non-smooth terms exact.
    pub fn from_monomials(f: &MonomialSum, t_max: f64, n: usize) -> Result<Self> {
        let mut g = GridFn::zeros(t_max, n)?;
        for m in f.terms() {
            g.push_term(PowerTerm {
                coeff: m.coeff,
                alpha: m.alpha,
            });
        }
        Ok(g)
    }

    pub fn zeros(t_max: f64, n: usize) -> Result<Self> {
        GridFn::from_parts(vec![0.0; n], Vec::new(), t_max)
    }

    pub fn n(&self) -> usize {
        self.regular.len()
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn h(&self) -> f64 {
        self.t_max / (self.regular.len() - 1) as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        if j + 1 == self.regular.len() {
            self.t_max
        } else {
            j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n()).map(move |j| self.t(j))
    }

    pub fn regular(&self) -> &[f64] {
        &self.regular
    }

    pub fn origin_terms(&self) -> &[PowerTerm] {
        &self.origin
    }

    /// Value at node `j`; node 0 is `±∞` when an origin term is singular.
    pub fn value(&self, j: usize) -> f64 {
        let t = self.t(j);
        if j == 0 {
            if let Some(worst) = self
                .origin
                .iter()
                .filter(|o| o.alpha < 0.0)
                .min_by(|a, b| a.alpha.total_cmp(&b.alpha))
            {
                return worst.eval(0.0);
            }
        }
        self.regular[j] + self.origin.iter().map(|o| o.eval(t)).sum::<f64>()
    }

    pub fn samples(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.value(j)).collect()
    }

    pub fn same_grid(&self, other: &GridFn) -> bool {
        self.n() == other.n() && (self.t_max - other.t_max).abs() <= 1e-14 * self.t_max
    }

    pub fn has_singular_origin(&self) -> bool {
        self.origin.iter().any(|o| o.alpha < 0.0)
    }

    /// Samples with singular origin terms replaced at node 0 by the value
    /// that gives the linear reconstruction the exact first-cell mass.
    pub fn mass_matched_samples(&self) -> Vec<f64> {
        let h = self.h();
        let mut s = self.samples();
        s[0] = self.regular[0]
            + self
                .origin
                .iter()
                .map(|o| {
                    if o.alpha < 0.0 {
                        o.coeff * h.powf(o.alpha) * (1.0 - o.alpha) / (1.0 + o.alpha)
                    } else {
                        0.0
                    }
                })
                .sum::<f64>();
        s
    }

    /// Applies `f(t, value)` to the total samples and resamples.
    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<GridFn> {
        let samples = self
            .samples()
            .into_iter()
            .enumerate()
            .map(|(j, v)| f(self.t(j), v))
            .collect();
        GridFn::new(samples, self.t_max)
    }

    pub fn add_scaled(&self, other: &GridFn, c: f64) -> Result<GridFn> {
        if !self.same_grid(other) {
            return Err(Error::usage("grid mismatch"));
        }
        let mut out = self.clone();
        for (a, b) in out.regular.iter_mut().zip(&other.regular) {
            *a += c * b;
        }
        for o in &other.origin {
            out.push_term(PowerTerm {
                coeff: c * o.coeff,
                alpha: o.alpha,
            });
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> GridFn {
        let mut out = self.clone();
        out.regular.iter_mut().for_each(|v| *v *= c);
        out.origin.iter_mut().for_each(|o| o.coeff *= c);
        out.origin.retain(|o| o.coeff != 0.0);
        out
    }

    /// Every other node of the grid, or `None` when `n - 1` is odd or the
    /// result would have fewer than 3 nodes.
    pub fn coarsen(&self) -> Option<GridFn> {
        let n = self.n();
        if !(n - 1).is_multiple_of(2) || n < 5 {
            return None;
        }
        Some(GridFn {
            regular: self.regular.iter().step_by(2).copied().collect(),
            origin: self.origin.clone(),
            t_max: self.t_max,
        })
    }

    /// Adds `term` on top of the current function.
    pub fn with_term(&self, term: PowerTerm) -> GridFn {
        let mut out = self.clone();
        out.push_term(term);
        out
    }

    /// Largest `|self(t_j) - reference(t_j)|` over nodes with `t_j ∈ [lo, hi]`.
    pub fn max_abs_error_on<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, reference: F) -> f64 {
        (0..self.n())
            .filter(|&j| self.t(j) >= lo && self.t(j) <= hi)
            .map(|j| (self.value(j) - reference(self.t(j))).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative error against `reference` over `[lo, hi]`.
    pub fn max_rel_error_on<F: Fn(f64) -> f64>(&self, lo: f64, hi: f64, reference: F) -> f64 {
        (0..self.n())
            .filter(|&j| self.t(j) >= lo && self.t(j) <= hi)
            .map(|j| {
                let r = reference(self.t(j));
                (self.value(j) - r).abs() / r.abs().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// Linear interpolation of the regular part plus exact origin terms.
    pub fn interpolate(&self, t: f64) -> f64 {
        let h = self.h();
        let x = (t / h).clamp(0.0, (self.n() - 1) as f64);
        let j = (x.floor() as usize).min(self.n() - 2);
        let w = x - j as f64;
        let r = (1.0 - w) * self.regular[j] + w * self.regular[j + 1];
        r + self.origin.iter().map(|o| o.eval(t)).sum::<f64>()
    }

    /// CSV with header `t,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value\n");
        for j in 0..self.n() {
            out.push_str(&format!("{},{}\n", self.t(j), self.value(j)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GridFn> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty CSV".into()))?;
        if header.trim().replace(' ', "") != "t,value" {
            return Err(Error::Parse(format!(
                "expected header 't,value', found '{header}'"
            )));
        }
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.map(str::trim)
                    .ok_or_else(|| Error::Parse(format!("row {} is incomplete", i + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))
            };
            ts.push(parse(it.next())?);
            vs.push(parse(it.next())?);
        }
        if ts.len() < 2 {
            return Err(Error::Parse("CSV needs at least 2 rows".into()));
        }
        let t_max = *ts.last().unwrap();
        let h = t_max / (ts.len() - 1) as f64;
        for (j, t) in ts.iter().enumerate() {
            if (t - j as f64 * h).abs() > 1e-9 * t_max.max(1.0) {
                return Err(Error::Parse(format!(
                    "row {} at t = {t} is off the uniform grid starting at 0",
                    j + 1
                )));
            }
        }
        GridFn::new(vs, t_max)
    }

    pub fn read_csv(path: &Path) -> Result<GridFn> {
        GridFn::from_csv(&crate::error::read_text(path)?)
    }
}

/// Product-integration weights of a convolution kernel `k` on the grid:
/// `left[m] = ∫_{mh}^{(m+1)h} k(s) ((m+1)h - s)/h ds`,
/// `right[m] = ∫_{mh}^{(m+1)h} k(s) (s - mh)/h ds`.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl KernelWeights {
    /// Weights for `scale · s^beta`, `beta > -1`, from exact moments.
    pub fn power(beta: f64, scale: f64, h: f64, cells: usize) -> Result<Self> {
        if !(beta > -1.0) {
            return Err(Error::domain(format!(
                "kernel exponent {beta} must be > -1"
            )));
        }
        let q = beta + 2.0;
        let factor = scale * h.powf(beta + 1.0) * gamma(beta + 1.0) * rgamma(q + 1.0);
        let mut left = Vec::with_capacity(cells);
        let mut right = Vec::with_capacity(cells);
        for m in 0..cells {
            left.push(factor * forward_remainder(q, m as f64));
            right.push(factor * backward_remainder(q, (m + 1) as f64));
        }
        Ok(KernelWeights { left, right })
    }

    /// Weights from samples of the first and second antiderivatives of the
    /// kernel (`k1(t) = ∫_0^t k`, `k2(t) = ∫_0^t k1`, both vanishing at 0).
    pub fn from_antiderivatives(k1: &[f64], k2: &[f64], h: f64) -> Result<Self> {
        if k1.len() != k2.len() || k1.len() < 2 {
            return Err(Error::usage("antiderivative samples must share a grid"));
        }
        let cells = k1.len() - 1;
        let mut left = Vec::with_capacity(cells);
        let mut right = Vec::with_capacity(cells);
        for m in 0..cells {
            let d2 = k2[m + 1] - k2[m];
            left.push((d2 - h * k1[m]) / h);
            right.push((h * k1[m + 1] - d2) / h);
        }
        Ok(KernelWeights { left, right })
    }
}

/// `(m+1)^q - m^q - q m^{q-1}` without cancellation for large m.
fn forward_remainder(q: f64, m: f64) -> f64 {
    if m < 16.0 {
        let lower = if m == 0.0 {
            0.0
        } else {
            m.powf(q) + q * m.powf(q - 1.0)
        };
        return (m + 1.0).powf(q) - lower;
    }
    // Σ_{k≥2} C(q,k) m^{q-k}
    binomial_tail(q, m, 1.0)
}

/// `q M^{q-1} - M^q + (M-1)^q` without cancellation for large M.
fn backward_remainder(q: f64, big_m: f64) -> f64 {
    if big_m < 17.0 {
        return q * big_m.powf(q - 1.0) - big_m.powf(q) + (big_m - 1.0).powf(q);
    }
    // Σ_{k≥2} (-1)^k C(q,k) M^{q-k}
    binomial_tail(q, big_m, -1.0)
}

fn binomial_tail(q: f64, m: f64, sign: f64) -> f64 {
    let base = m.powf(q);
    let mut binom = q; // C(q,1)
    let mut power = sign / m;
    let mut sum = 0.0;
    for k in 2..60 {
        let kf = k as f64;
        binom *= (q - kf + 1.0) / kf;
        power *= sign / m;
        let term = binom * power;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() || binom == 0.0 {
            break;
        }
    }
    sum * base
}

/// `(k ∗ f)(t_j)` with `f` reconstructed piecewise linearly and the kernel
/// entering through its exact cell moments. Singular origin terms of `f`
/// enter through their first-cell mass.
pub fn convolve_with_weights(f: &GridFn, w: &KernelWeights) -> Result<GridFn> {
    let n = f.n();
    if w.left.len() < n - 1 {
        return Err(Error::usage(
            "kernel weights cover fewer cells than the grid",
        ));
    }
    let s = f.mass_matched_samples();
    let mut out = vec![0.0; n];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for m in 0..j {
            acc += w.left[m] * s[j - m] + w.right[m] * s[j - m - 1];
        }
        *slot = acc;
    }
    GridFn::from_parts(out, Vec::new(), f.t_max())
}

/// Riemann–Liouville integral `J^rho f` on the grid.
pub fn rl_integral_grid(f: &GridFn, rho: f64) -> Result<GridFn> {
    if !(rho > 0.0) {
        return Err(Error::domain(format!(
            "integral order rho = {rho} must be > 0"
        )));
    }
    let mut origin = Vec::with_capacity(f.origin.len() + 1);
    for o in &f.origin {
        if o.alpha <= -1.0 {
            return Err(Error::domain(format!(
                "t^{} is not integrable at the origin",
                o.alpha
            )));
        }
        origin.push(PowerTerm {
            coeff: o.coeff * gamma_ratio(o.alpha + 1.0, o.alpha + rho + 1.0),
            alpha: o.alpha + rho,
        });
    }
    // the constant f(0) is integrated exactly, the rest vanishes at 0
    let r0 = f.regular[0];
    origin.push(PowerTerm {
        coeff: r0 * rgamma(rho + 1.0),
        alpha: rho,
    });
    let shifted: Vec<f64> = f.regular.iter().map(|v| v - r0).collect();
    let w = KernelWeights::power(rho - 1.0, rgamma(rho), f.h(), f.n() - 1)?;
    let s = shifted;
    let n = f.n();
    let mut out = vec![0.0; n];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for m in 0..j {
            acc += w.left[m] * s[j - m] + w.right[m] * s[j - m - 1];
        }
        *slot = acc;
    }
    GridFn::from_parts(out, origin, f.t_max())
}

/// Derivative: central differences on the regular part (one-sided second
/// order at both ends), exact on origin terms.
pub fn differentiate(g: &GridFn) -> GridFn {
    let n = g.n();
    let h = g.h();
    let s = &g.regular;
    let mut out = vec![0.0; n];
    if n == 2 {
        let d = (s[1] - s[0]) / h;
        out = vec![d, d];
    } else {
        out[0] = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * h);
        for j in 1..n - 1 {
            out[j] = (s[j + 1] - s[j - 1]) / (2.0 * h);
        }
        out[n - 1] = (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * h);
    }
    let mut d = GridFn {
        regular: out,
        origin: Vec::new(),
        t_max: g.t_max(),
    };
    for o in &g.origin {
        d.push_term(PowerTerm {
            coeff: o.coeff * o.alpha,
            alpha: o.alpha - 1.0,
        });
    }
    d
}

/// Riemann–Liouville derivative `d/dt J^{1-rho} f`, `0 < rho < 1`.
pub fn rl_derivative_grid(f: &GridFn, rho: f64) -> Result<GridFn> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!(
            "derivative order rho = {rho} must lie in (0, 1)"
        )));
    }
    let g = rl_integral_grid(f, 1.0 - rho)?;
    Ok(differentiate(&g))
}

/// Minimum grid size for the origin extrapolation.
pub const MIN_EXTRAPOLATION_NODES: usize = 65;

/// Estimates `lim_{t→0⁺} g(t)`.
///
/// Origin terms with positive exponent vanish in the limit and singular ones
/// make it diverge. The regular part is extrapolated under the model
/// `a + b t^σ` from node triples `(m, 2m, 4m)`, `m = 2, 4, 8, 16`; the finest
/// estimate is returned. If the estimates move apart as `m` decreases the
/// extrapolation is reported as nonconvergent.
pub fn extrapolate_to_origin(g: &GridFn, sigma: Option<f64>) -> Result<f64> {
    if let Some(o) = g.origin.iter().find(|o| o.alpha < 0.0) {
        return Err(Error::domain(format!(
            "limit at t = 0 diverges like {} t^{}",
            o.coeff, o.alpha
        )));
    }
    let s = &g.regular;
    if s.len() < MIN_EXTRAPOLATION_NODES {
        return Err(Error::usage(format!(
            "origin extrapolation needs at least {MIN_EXTRAPOLATION_NODES} nodes"
        )));
    }
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let estimate = |m: usize| -> f64 {
        let (g1, g2, g4) = (s[m], s[2 * m], s[4 * m]);
        match sigma {
            Some(sig) if sig > 0.0 => {
                let r = 2f64.powf(sig);
                (r * g1 - g2) / (r - 1.0)
            }
            _ => {
                let d1 = g2 - g1;
                let d2 = g4 - g2;
                if d1.abs() <= 1e-13 * scale {
                    return g1;
                }
                let r = d2 / d1;
                if !(r > 1.0) || !r.is_finite() {
                    // no decaying power law fits; fall back to a linear model
                    return g1 - d1;
                }
                g1 - d1 / (r - 1.0)
            }
        }
    };
    let est: Vec<f64> = [2usize, 4, 8, 16]
        .iter()
        .filter(|&&m| 4 * m < s.len())
        .map(|&m| estimate(m))
        .collect();
    let d_fine = (est[0] - est[1]).abs();
    let d_coarse = (est[1] - est[2]).abs();
    let floor = 1e-9 * scale;
    if d_fine > floor && d_fine > 2.0 * d_coarse.max(floor) {
        return Err(Error::numerical(
            "origin extrapolation does not converge",
            d_fine,
        ));
    }
    Ok(est[0])
}

/// `lim_{t→0⁺} (J^mu f)(t)`, `0 < mu ≤ 1`. `sigma` is the leading exponent of
/// `J^mu f - limit` when known.
pub fn boundary_functional(f: &GridFn, mu: f64, sigma: Option<f64>) -> Result<f64> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::domain(format!("mu = {mu} must lie in (0, 1]")));
    }
    let g = rl_integral_grid(f, mu)?;
    extrapolate_to_origin(&g, sigma)
}

/// `(f ∗ g)(t) = ∫_0^t f(t-τ) g(τ) dτ` for bounded samples (trapezoidal
/// product rule, exact for linear integrands).
pub fn convolve(f: &GridFn, g: &GridFn) -> Result<GridFn> {
    if !f.same_grid(g) {
        return Err(Error::usage("convolution operands must share a grid"));
    }
    if f.has_singular_origin() || g.has_singular_origin() {
        return Err(Error::usage(
            "bounded convolution got a singular origin; use convolve_with_weights",
        ));
    }
    let n = f.n();
    let h = f.h();
    let (a, b) = (f.samples(), g.samples());
    let mut out = vec![0.0; n];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.5 * (a[j] * b[0] + a[0] * b[j]);
        for i in 1..j {
            acc += a[j - i] * b[i];
        }
        *slot = h * acc;
    }
    GridFn::from_parts(out, Vec::new(), f.t_max())
}

/// `(scale · t^beta) ∗ f` with exact moment weights for the power factor.
pub fn convolve_power_kernel(f: &GridFn, beta: f64, scale: f64) -> Result<GridFn> {
    let w = KernelWeights::power(beta, scale, f.h(), f.n() - 1)?;
    convolve_with_weights(f, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::gamma_ratio;

    #[test]
    fn integral_of_one_is_exact() {
        let f = GridFn::from_fn(1.0, 33, |_| 1.0).unwrap();
        let g = rl_integral_grid(&f, 1.0).unwrap();
        assert!(g.max_abs_error_on(0.0, 1.0, |t| t) < 1e-12);
    }

    #[test]
    fn half_integral_of_t_is_exact_for_linear_data() {
        let f = GridFn::from_fn(1.0, 1025, |t| t).unwrap();
        let g = rl_integral_grid(&f, 0.5).unwrap();
        let c = gamma_ratio(2.0, 2.5);
        let err = (g.samples()[1024] - c).abs() / c;
        assert!(err < 1e-4, "{err}");
        assert!(g.max_abs_error_on(0.0, 1.0, |t| c * t.powf(1.5)) < 1e-12);
    }

    #[test]
    fn remainders_match_direct_formula() {
        for &q in &[1.3, 1.5, 2.7] {
            for &m in &[16.0, 40.0, 100.0] {
                let direct = (m + 1.0f64).powf(q) - m.powf(q) - q * m.powf(q - 1.0);
                assert!((forward_remainder(q, m) - direct).abs() < 1e-9 * direct.abs());
                let mm: f64 = m + 1.0;
                let direct = q * mm.powf(q - 1.0) - mm.powf(q) + (mm - 1.0).powf(q);
                assert!((backward_remainder(q, mm) - direct).abs() < 1e-9 * direct.abs());
            }
        }
    }

    #[test]
    fn derivative_of_t() {
        let f = GridFn::from_fn(1.0, 1025, |t| t).unwrap();
        let d = rl_derivative_grid(&f, 0.5).unwrap();
        let c = gamma_ratio(2.0, 1.5);
        let err = d.max_rel_error_on(0.1, 1.0, |t| c * t.sqrt());
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn derivative_of_constant() {
        let rho = 0.3;
        let f = GridFn::from_fn(1.0, 1025, |_| 2.0).unwrap();
        let d = rl_derivative_grid(&f, rho).unwrap();
        let err = d.max_rel_error_on(0.1, 1.0, |t| 2.0 * t.powf(-rho) * rgamma(1.0 - rho));
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn kernel_monomial_is_annihilated() {
        let rho = 0.5;
        let f = GridFn::from_fn(1.0, 4097, |t| t.powf(rho - 1.0)).unwrap();
        assert!(f.has_singular_origin());
        let d = rl_derivative_grid(&f, rho).unwrap();
        let err = d.max_abs_error_on(0.1, 1.0, |_| 0.0);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn fitted_singularity_with_smooth_background() {
        let f = GridFn::from_fn(1.0, 1025, |t| t.powf(-0.3) + t.exp()).unwrap();
        let series = |t: f64, shift: f64| -> f64 {
            (0..30)
                .map(|k| t.powf(k as f64 + shift - 1.0) * rgamma(k as f64 + shift))
                .sum()
        };
        let g = rl_integral_grid(&f, 0.5).unwrap();
        let exact = |t: f64| gamma_ratio(0.7, 1.2) * t.powf(0.2) + series(t, 1.5);
        assert!(g.max_abs_error_on(0.0, 1.0, exact) < 5e-4);
        let d = rl_derivative_grid(&f, 0.5).unwrap();
        let exact = |t: f64| gamma_ratio(0.7, 0.2) * t.powf(-0.8) + series(t, 0.5);
        assert!(d.max_abs_error_on(0.05, 1.0, exact) < 5e-4);
    }

    #[test]
    fn boundary_functional_examples() {
        let f = GridFn::from_fn(1.0, 2049, |t| t.powf(-0.5)).unwrap();
        let c = boundary_functional(&f, 0.5, None).unwrap();
        assert!((c - std::f64::consts::PI.sqrt()).abs() < 1e-3, "{c}");

        let f = GridFn::from_fn(1.0, 2049, |t| t).unwrap();
        assert!(boundary_functional(&f, 0.3, None).unwrap().abs() < 1e-6);
        assert!(boundary_functional(&f, 0.3, Some(1.3)).unwrap().abs() < 1e-9);

        let f = GridFn::from_fn(1.0, 2049, |_| 1.0).unwrap();
        assert!(boundary_functional(&f, 1.0, None).unwrap().abs() < 1e-9);
        assert!(boundary_functional(&f, 0.0, None).is_err());
    }

    #[test]
    fn bounded_convolution_is_exact_on_polynomials() {
        let one = GridFn::from_fn(1.0, 257, |_| 1.0).unwrap();
        let t = GridFn::from_fn(1.0, 257, |t| t).unwrap();
        assert!(
            convolve(&one, &one)
                .unwrap()
                .max_abs_error_on(0.0, 1.0, |t| t)
                < 1e-12
        );
        assert!(
            convolve(&t, &one)
                .unwrap()
                .max_abs_error_on(0.0, 1.0, |t| 0.5 * t * t)
                < 1e-10
        );
        let other = GridFn::from_fn(2.0, 257, |t| t).unwrap();
        assert!(matches!(convolve(&t, &other), Err(Error::Usage(_))));
    }

    #[test]
    fn power_kernel_convolution_is_the_rl_integral() {
        let rho = 0.6;
        let f = GridFn::from_fn(1.0, 513, |t| t).unwrap();
        let a = convolve_power_kernel(&f, rho - 1.0, rgamma(rho)).unwrap();
        let b = rl_integral_grid(&f, rho).unwrap();
        assert!(a.max_abs_error_on(0.0, 1.0, |t| b.interpolate(t)) < 1e-8);
    }

    #[test]
    fn coarsen_keeps_every_other_node() {
        let f = GridFn::from_fn(2.0, 9, |t| t * t).unwrap();
        let c = f.coarsen().unwrap();
        assert_eq!(c.n(), 5);
        assert_eq!(c.value(4), 4.0);
        assert_eq!(c.value(1), 0.25);
        assert!(GridFn::zeros(1.0, 4).unwrap().coarsen().is_none());
    }

    #[test]
    fn csv_round_trip() {
        let f = GridFn::from_fn(2.0, 9, |t| (t * 1.7).sin() / 3.0).unwrap();
        let back = GridFn::from_csv(&f.to_csv()).unwrap();
        assert_eq!(back, f);
        assert!(GridFn::from_csv("x,y\n0,1\n1,2\n").is_err());
        assert!(GridFn::from_csv("t,value\n0,1\n0.7,2\n2,3\n").is_err());
    }
}

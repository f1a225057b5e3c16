//! Biorthogonal system for `u_xx` on `[0, 1]` with `u(1) = 0`,
//! `u_x(0) = u_x(1)`.
//!
//! `X₀ = 2(1-x)`, `X_{1k} = 4(1-x)cos(λ_k x)`, `X_{2k} = 4 sin(λ_k x)` and
//! `Y₀ = 1`, `Y_{1k} = cos(λ_k x)`, `Y_{2k} = x sin(λ_k x)` with
//! `λ_k = 2πk` satisfy `∫ X_i Y_j = δ_ij`. `X_{2k}` is an eigenfunction,
//! `X_{2k}'' = -λ_k² X_{2k}`, while `X_{1k}` is an associated function:
//! `X_{1k}'' = -λ_k² X_{1k} + 2λ_k X_{2k}`.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EigenKind {
    Zero,
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EigenIndex {
    pub kind: EigenKind,
    /// 0 for `Zero`, otherwise ≥ 1.
    pub k: usize,
}

impl EigenIndex {
    pub const ZERO: EigenIndex = EigenIndex {
        kind: EigenKind::Zero,
        k: 0,
    };

    pub fn one(k: usize) -> Result<Self> {
        EigenIndex::new(EigenKind::One, k)
    }

    pub fn two(k: usize) -> Result<Self> {
        EigenIndex::new(EigenKind::Two, k)
    }

    pub fn new(kind: EigenKind, k: usize) -> Result<Self> {
        match (kind, k) {
            (EigenKind::Zero, _) => Ok(EigenIndex::ZERO),
            (_, 0) => Err(Error::usage("mode index k must be >= 1")),
            _ => Ok(EigenIndex { kind, k }),
        }
    }

    /// `λ_k`, or 0 for the zero mode.
    pub fn frequency(&self) -> f64 {
        match self.kind {
            EigenKind::Zero => 0.0,
            _ => 2.0 * PI * self.k as f64,
        }
    }

    /// All indices up to truncation `k_max`: `0, (1,1), (2,1), …`.
    pub fn all(k_max: usize) -> Vec<EigenIndex> {
        let mut v = vec![EigenIndex::ZERO];
        for k in 1..=k_max {
            v.push(EigenIndex {
                kind: EigenKind::One,
                k,
            });
            v.push(EigenIndex {
                kind: EigenKind::Two,
                k,
            });
        }
        v
    }
}

impl fmt::Display for EigenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EigenKind::Zero => write!(f, "0"),
            EigenKind::One => write!(f, "1,{}", self.k),
            EigenKind::Two => write!(f, "2,{}", self.k),
        }
    }
}

/// `λ_k = 2πk`.
pub fn eigenvalue(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::usage("eigenvalue index k must be >= 1"));
    }
    Ok(2.0 * PI * k as f64)
}

fn check_x(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::usage(format!("x = {x} lies outside [0, 1]")));
    }
    Ok(())
}

/// `X_idx(x)`.
pub fn eval_x(idx: EigenIndex, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(x_unchecked(idx, x, 0))
}

/// `Y_idx(x)`.
pub fn eval_y(idx: EigenIndex, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(y_unchecked(idx, x, 0))
}

/// `d^order/dx^order X_idx`, `order ≤ 2`.
pub fn eval_x_derivative(idx: EigenIndex, x: f64, order: u8) -> Result<f64> {
    check_x(x)?;
    if order > 2 {
        return Err(Error::usage("derivative order must be 0, 1 or 2"));
    }
    Ok(x_unchecked(idx, x, order))
}

/// `d^order/dx^order Y_idx`, `order ≤ 2`.
pub fn eval_y_derivative(idx: EigenIndex, x: f64, order: u8) -> Result<f64> {
    check_x(x)?;
    if order > 2 {
        return Err(Error::usage("derivative order must be 0, 1 or 2"));
    }
    Ok(y_unchecked(idx, x, order))
}

fn x_unchecked(idx: EigenIndex, x: f64, order: u8) -> f64 {
    let l = idx.frequency();
    let (s, c) = (l * x).sin_cos();
    match (idx.kind, order) {
        (EigenKind::Zero, 0) => 2.0 * (1.0 - x),
        (EigenKind::Zero, 1) => -2.0,
        (EigenKind::Zero, _) => 0.0,
        (EigenKind::One, 0) => 4.0 * (1.0 - x) * c,
        (EigenKind::One, 1) => -4.0 * c - 4.0 * l * (1.0 - x) * s,
        (EigenKind::One, _) => 8.0 * l * s - 4.0 * l * l * (1.0 - x) * c,
        (EigenKind::Two, 0) => 4.0 * s,
        (EigenKind::Two, 1) => 4.0 * l * c,
        (EigenKind::Two, _) => -4.0 * l * l * s,
    }
}

fn y_unchecked(idx: EigenIndex, x: f64, order: u8) -> f64 {
    let l = idx.frequency();
    let (s, c) = (l * x).sin_cos();
    match (idx.kind, order) {
        (EigenKind::Zero, 0) => 1.0,
        (EigenKind::Zero, _) => 0.0,
        (EigenKind::One, 0) => c,
        (EigenKind::One, 1) => -l * s,
        (EigenKind::One, _) => -l * l * c,
        (EigenKind::Two, 0) => x * s,
        (EigenKind::Two, 1) => s + l * x * c,
        (EigenKind::Two, _) => 2.0 * l * c - l * l * x * s,
    }
}

/// `∫₀¹ X_a Y_b dx` by Gauss–Legendre of the given order.
pub fn inner(a: EigenIndex, b: EigenIndex, order: usize) -> f64 {
    GaussLegendre::new(order).integrate(0.0, 1.0, |x| x_unchecked(a, x, 0) * y_unchecked(b, x, 0))
}

/// Coefficients `a₀`, `a_{1k}`, `a_{2k}` for `k = 1..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    pub a0: f64,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn zeros(k_max: usize) -> Self {
        SpectralCoeffs {
            a0: 0.0,
            a1: vec![0.0; k_max],
            a2: vec![0.0; k_max],
        }
    }

    pub fn new(a0: f64, a1: Vec<f64>, a2: Vec<f64>) -> Result<Self> {
        if a1.len() != a2.len() || a1.is_empty() {
            return Err(Error::usage("a1 and a2 must both have K >= 1 entries"));
        }
        if !a0.is_finite() || a1.iter().chain(&a2).any(|v| !v.is_finite()) {
            return Err(Error::domain("spectral coefficients must be finite"));
        }
        Ok(SpectralCoeffs { a0, a1, a2 })
    }

    pub fn k_max(&self) -> usize {
        self.a1.len()
    }

    pub fn get(&self, idx: EigenIndex) -> f64 {
        match idx.kind {
            EigenKind::Zero => self.a0,
            EigenKind::One => self.a1.get(idx.k - 1).copied().unwrap_or(0.0),
            EigenKind::Two => self.a2.get(idx.k - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn set(&mut self, idx: EigenIndex, v: f64) {
        match idx.kind {
            EigenKind::Zero => self.a0 = v,
            EigenKind::One => self.a1[idx.k - 1] = v,
            EigenKind::Two => self.a2[idx.k - 1] = v,
        }
    }

    /// Same coefficients at truncation `k_max`, padding with zeros.
    pub fn resized(&self, k_max: usize) -> Self {
        let mut out = SpectralCoeffs::zeros(k_max);
        out.a0 = self.a0;
        for k in 0..k_max.min(self.k_max()) {
            out.a1[k] = self.a1[k];
            out.a2[k] = self.a2[k];
        }
        out
    }

    pub fn add_scaled(&self, other: &SpectralCoeffs, c: f64) -> SpectralCoeffs {
        let k = self.k_max().max(other.k_max());
        let mut out = self.resized(k);
        for idx in EigenIndex::all(k) {
            out.set(idx, out.get(idx) + c * other.get(idx));
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SpectralCoeffs) -> f64 {
        let k = self.k_max().max(other.k_max());
        EigenIndex::all(k)
            .into_iter()
            .map(|i| (self.get(i) - other.get(i)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `kind,k,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,k,value\n");
        for idx in EigenIndex::all(self.k_max()) {
            let kind = match idx.kind {
                EigenKind::Zero => 0,
                EigenKind::One => 1,
                EigenKind::Two => 2,
            };
            out.push_str(&format!("{kind},{},{}\n", idx.k, self.get(idx)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim().replace(' ', "") == "kind,k,value" => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header 'kind,k,value', found {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("row {} needs 3 fields", i + 1)));
            }
            let bad = |e: &dyn fmt::Display| Error::Parse(format!("row {}: {e}", i + 1));
            let kind: u8 = f[0].parse().map_err(|e| bad(&e))?;
            let k: usize = f[1].parse().map_err(|e| bad(&e))?;
            let v: f64 = f[2].parse().map_err(|e| bad(&e))?;
            let kind = match kind {
                0 => EigenKind::Zero,
                1 => EigenKind::One,
                2 => EigenKind::Two,
                _ => return Err(bad(&"kind must be 0, 1 or 2")),
            };
            rows.push((EigenIndex::new(kind, k)?, v));
        }
        let k_max = rows.iter().map(|(i, _)| i.k).max().unwrap_or(0).max(1);
        let mut out = SpectralCoeffs::zeros(k_max);
        for (idx, v) in rows {
            out.set(idx, v);
        }
        Ok(out)
    }
}

/// Gauss–Legendre order used by [`project`]: at least `8K`.
pub fn projection_order(k_max: usize) -> usize {
    (8 * k_max).max(64)
}

/// `a_j = ∫₀¹ g Y_j dx` for all indices up to `k_max`.
pub fn project<G: Fn(f64) -> f64 + Sync>(g: G, k_max: usize) -> Result<SpectralCoeffs> {
    project_with_order(g, k_max, projection_order(k_max))
}

pub fn project_with_order<G: Fn(f64) -> f64 + Sync>(
    g: G,
    k_max: usize,
    order: usize,
) -> Result<SpectralCoeffs> {
    if k_max < 1 {
        return Err(Error::usage("truncation K must be >= 1"));
    }
    let rule = GaussLegendre::new(order);
    // nodes on [0, 1] and g sampled once
    let xs: Vec<f64> = rule.nodes.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let ws: Vec<f64> = rule.weights.iter().map(|w| 0.5 * w).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    if let Some(i) = gs.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "function is not finite at x = {}",
            xs[i]
        )));
    }
    let values: Vec<(EigenIndex, f64)> = EigenIndex::all(k_max)
        .into_par_iter()
        .map(|idx| {
            let s = xs
                .iter()
                .zip(&ws)
                .zip(&gs)
                .map(|((&x, &w), &gv)| w * gv * y_unchecked(idx, x, 0))
                .sum();
            (idx, s)
        })
        .collect();
    let mut out = SpectralCoeffs::zeros(k_max);
    for (idx, v) in values {
        out.set(idx, v);
    }
    Ok(out)
}

/// `a₀X₀(x) + Σ a_{1k}X_{1k}(x) + Σ a_{2k}X_{2k}(x)`.
pub fn reconstruct(c: &SpectralCoeffs, x: f64) -> Result<f64> {
    reconstruct_derivative(c, x, 0)
}

/// `order`th x-derivative of the series.
pub fn reconstruct_derivative(c: &SpectralCoeffs, x: f64, order: u8) -> Result<f64> {
    check_x(x)?;
    if order > 2 {
        return Err(Error::usage("derivative order must be 0, 1 or 2"));
    }
    Ok(EigenIndex::all(c.k_max())
        .into_iter()
        .map(|idx| c.get(idx) * x_unchecked(idx, x, order))
        .sum())
}

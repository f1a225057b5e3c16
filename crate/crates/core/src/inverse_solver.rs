//! Inverse source problem for the two-level fractional heat equation
//!
//! ```text
//! D^{(ρ,ν₁,ν₂)} u = u_xx + f(x),   u(1,t) = 0,   u_x(0,t) = u_x(1,t),
//! J^{1-ξ₂} d/dt J^{1-ξ₁} u|_{t=0} = φ,   J^{1-ξ₁} u|_{t=0} = ψ,   u(x,T) = φ̄.
//! ```
//!
//! Expanding in the biorthogonal system of [`crate::spectral`] gives one
//! fractional ODE per mode. With `e₁ = ρ+ν₁-1`, `e₂ = ρ+ν₁+ν₂-2`:
//!
//! ```text
//! U_j(t)   = φ_j t^{e₁} E_{ρ,e₁+1}(-λ²t^ρ) + ψ_j t^{e₂} E_{ρ,e₂+1}(-λ²t^ρ) + f_j t^ρ E_{ρ,ρ+1}(-λ²t^ρ)
//! U_{2k}  += 2λ_k (U_{1k} ∗ t^{ρ-1} E_{ρ,ρ}(-λ_k² t^ρ))
//! ```
//!
//! and `f_j` follows from `U_j(T) = φ̄_j`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::{gamma, rgamma};
use crate::grid_calculus::{
    convolve_with_weights, differentiate, rl_derivative_grid, GridFn, KernelWeights, PowerTerm,
};
use crate::level_derivative::LevelParams;
use crate::mittag_leffler::{ml2_eval, ml_eval, ml_kernel_samples};
use crate::power_calculus::MonomialSum;
use crate::spectral::{self, EigenIndex, EigenKind, SpectralCoeffs};

/// Smallest time grid accepted for the convolution.
pub const MIN_TIME_NODES: usize = 65;

const EXPONENT_TOL: f64 = 1e-12;

/// How the coupling convolution of `U_{2k}` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvolutionMethod {
    /// Product integration on the time grid with exact kernel moments.
    #[default]
    Grid,
    /// `t^{β-1}E_{ρ,β} ∗ t^{ρ-1}E_{ρ,ρ} = t^{β+ρ-1}E²_{ρ,β+ρ}`.
    ClosedForm,
}

/// A function of `x ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub enum FunctionData {
    Coefficients(SpectralCoeffs),
    Monomials(MonomialSum),
    /// Samples on a uniform grid over `[0, 1]`, linearly interpolated.
    Samples(GridFn),
}

impl FunctionData {
    pub fn zero() -> Self {
        FunctionData::Coefficients(SpectralCoeffs::zeros(1))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            FunctionData::Coefficients(c) => spectral::reconstruct(c, x),
            FunctionData::Monomials(m) => m.eval(x),
            FunctionData::Samples(g) => Ok(g.interpolate(x)),
        }
    }

    /// Coefficients against `{Y_j}` up to `k_max`.
    pub fn coefficients(&self, k_max: usize) -> Result<SpectralCoeffs> {
        match self {
            FunctionData::Coefficients(c) => Ok(c.resized(k_max)),
            _ => spectral::project(|x| self.eval(x).unwrap_or(f64::NAN), k_max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InverseProblemSpec {
    pub params: LevelParams,
    pub t_final: f64,
    pub phi: FunctionData,
    pub psi: FunctionData,
    pub final_data: FunctionData,
    pub k_max: usize,
    pub n_t: usize,
    pub convolution: ConvolutionMethod,
}

impl InverseProblemSpec {
    /// Zero initial data, grid convolution.
    pub fn new(
        params: LevelParams,
        t_final: f64,
        final_data: FunctionData,
        k_max: usize,
        n_t: usize,
    ) -> Result<Self> {
        let spec = InverseProblemSpec {
            params,
            t_final,
            phi: FunctionData::zero(),
            psi: FunctionData::zero(),
            final_data,
            k_max,
            n_t,
            convolution: ConvolutionMethod::Grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.n() != 2 {
            return Err(Error::admissibility(format!(
                "inverse problem needs n = 2 level orders (got {})",
                self.params.n()
            )));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::domain(format!("T = {} must be > 0", self.t_final)));
        }
        if self.k_max < 1 {
            return Err(Error::usage("truncation K must be >= 1"));
        }
        if self.n_t < MIN_TIME_NODES {
            return Err(Error::usage(format!(
                "n_t = {} must be >= {MIN_TIME_NODES}",
                self.n_t
            )));
        }
        Ok(())
    }
}

/// `coeff · t^{β-1} E_{ρ,β}(-λ²t^ρ)`, or with `E²_{ρ,β}` when `prabhakar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlTerm {
    pub coeff: f64,
    pub beta: f64,
    pub prabhakar: bool,
}

impl MlTerm {
    pub fn plain(coeff: f64, beta: f64) -> Self {
        MlTerm {
            coeff,
            beta,
            prabhakar: false,
        }
    }

    pub fn eval(&self, rho: f64, lambda2: f64, t: f64) -> Result<f64> {
        if self.coeff == 0.0 {
            return Ok(0.0);
        }
        if t == 0.0 {
            let a = self.beta - 1.0;
            return Ok(if a.abs() <= EXPONENT_TOL {
                self.coeff
            } else if a > 0.0 {
                0.0
            } else {
                let lead = self.coeff * rgamma(self.beta);
                if lead == 0.0 {
                    return Err(Error::domain("limit at t = 0 needs a higher series term"));
                }
                lead.signum() * f64::INFINITY
            });
        }
        let z = -lambda2 * t.powf(rho);
        let e = if self.prabhakar {
            ml2_eval(rho, self.beta, z)?
        } else {
            ml_eval(rho, self.beta, z)?
        };
        Ok(self.coeff * t.powf(self.beta - 1.0) * e)
    }

    /// `D^ρ`: `β → β - ρ`.
    pub fn rl_derivative(&self, rho: f64) -> MlTerm {
        MlTerm {
            beta: self.beta - rho,
            ..*self
        }
    }

    /// `J^μ`: `β → β + μ`.
    pub fn rl_integral(&self, mu: f64) -> MlTerm {
        MlTerm {
            beta: self.beta + mu,
            ..*self
        }
    }

    /// Power-series terms `c t^α` with `α ≤ 0`.
    fn series_head(&self, rho: f64, lambda2: f64) -> Vec<PowerTerm> {
        let mut out = Vec::new();
        for m in 0..=64i32 {
            let alpha = self.beta - 1.0 + m as f64 * rho;
            if alpha > EXPONENT_TOL {
                break;
            }
            let mult = if self.prabhakar { (m + 1) as f64 } else { 1.0 };
            let coeff = self.coeff * (-lambda2).powi(m) * mult * rgamma(alpha + 1.0);
            if coeff != 0.0 {
                out.push(PowerTerm { coeff, alpha });
            }
        }
        out
    }

    /// Series terms that are unbounded at 0; these are kept exact on grids.
    /// Terms with `0 < α < 1` stay in the samples: for `λ²t^ρ ≫ 1` their
    /// coefficients grow like `λ^{2m}` and the remainder would be far from
    /// smooth.
    fn singular_series(&self, rho: f64, lambda2: f64) -> Vec<PowerTerm> {
        self.series_head(rho, lambda2)
            .into_iter()
            .filter(|o| o.alpha < -EXPONENT_TOL)
            .collect()
    }

    /// Value at every node of the uniform grid over `[0, t_max]`.
    fn samples(&self, rho: f64, lambda2: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
        if self.coeff == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let b = ml_kernel_samples(rho, self.beta, lambda2, t_max, n)?;
        let mut out: Vec<f64> = if self.prabhakar {
            // t^{β-1}E²_{ρ,β} = [t · t^{β-2}E_{ρ,β-1} + (ρ-β+1) t^{β-1}E_{ρ,β}] / ρ
            let a = ml_kernel_samples(rho, self.beta - 1.0, lambda2, t_max, n)?;
            let h = t_max / (n - 1) as f64;
            (0..n)
                .map(|j| {
                    let t = if j + 1 == n { t_max } else { j as f64 * h };
                    self.coeff * (t * a[j] + (rho - self.beta + 1.0) * b[j]) / rho
                })
                .collect()
        } else {
            b.iter().map(|v| self.coeff * v).collect()
        };
        out[0] = self.eval(rho, lambda2, 0.0)?;
        Ok(out)
    }

    /// The term as a grid function with its singular series terms exact.
    pub fn to_grid(&self, rho: f64, lambda2: f64, t_max: f64, n: usize) -> Result<GridFn> {
        let raw = self.samples(rho, lambda2, t_max, n)?;
        let origin = self.singular_series(rho, lambda2);
        let h = t_max / (n - 1) as f64;
        let mut regular: Vec<f64> = raw
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let t = if j + 1 == n { t_max } else { j as f64 * h };
                v - origin.iter().map(|o| o.eval(t)).sum::<f64>()
            })
            .collect();
        // what is left at t = 0 is the t⁰ coefficient, if any
        regular[0] = self
            .series_head(rho, lambda2)
            .iter()
            .filter(|o| o.alpha.abs() <= EXPONENT_TOL)
            .map(|o| o.coeff)
            .sum();
        GridFn::from_parts(regular, origin, t_max)
    }
}

fn sum_terms(terms: &[MlTerm], rho: f64, lambda2: f64, t: f64) -> Result<f64> {
    terms.iter().map(|m| m.eval(rho, lambda2, t)).sum()
}

fn sum_grid(terms: &[MlTerm], rho: f64, lambda2: f64, t_max: f64, n: usize) -> Result<GridFn> {
    let mut g = GridFn::zeros(t_max, n)?;
    for m in terms {
        g = g.add_scaled(&m.to_grid(rho, lambda2, t_max, n)?, 1.0)?;
    }
    Ok(g)
}

/// The three closed-form terms of a mode with data `(φ_j, ψ_j, f_j)`.
pub fn mode_terms(p: &LevelParams, phi: f64, psi: f64, f: f64) -> [MlTerm; 3] {
    let (rho, nu) = (p.rho(), p.nus());
    [
        MlTerm::plain(phi, rho + nu[0]),
        MlTerm::plain(psi, rho + nu[0] + nu[1] - 1.0),
        MlTerm::plain(f, rho + 1.0),
    ]
}

/// Exact coupling `2λ (Σ terms) ∗ t^{ρ-1}E_{ρ,ρ}` for plain terms.
fn coupling_closed_form(rho: f64, lambda: f64, u1: &[MlTerm]) -> Vec<MlTerm> {
    u1.iter()
        .filter(|m| m.coeff != 0.0)
        .map(|m| MlTerm {
            coeff: 2.0 * lambda * m.coeff,
            beta: m.beta + rho,
            prabhakar: true,
        })
        .collect()
}

fn check_time(p: &LevelParams, terms: &[MlTerm], t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("t = {t} must be >= 0")));
    }
    if t == 0.0 && terms.iter().any(|m| m.coeff != 0.0 && m.beta - 1.0 <= 0.0) {
        let (e1, e2) = (p.correction_exponent(1), p.correction_exponent(2));
        return Err(Error::domain(format!(
            "U(0) needs both singular exponents > 0 (e1 = {e1}, e2 = {e2})"
        )));
    }
    Ok(())
}

/// `U₀(t)`.
pub fn time_coeff_u0(p: &LevelParams, phi0: f64, psi0: f64, f0: f64, t: f64) -> Result<f64> {
    let terms = mode_terms(p, phi0, psi0, f0);
    check_time(p, &terms, t)?;
    sum_terms(&terms, p.rho(), 0.0, t)
}

/// `U_{1k}(t)`.
pub fn time_coeff_u1k(
    p: &LevelParams,
    k: usize,
    phi: f64,
    psi: f64,
    f: f64,
    t: f64,
) -> Result<f64> {
    let l = spectral::eigenvalue(k)?;
    let terms = mode_terms(p, phi, psi, f);
    check_time(p, &terms, t)?;
    sum_terms(&terms, p.rho(), l * l, t)
}

/// `U_{1k}` on the uniform grid with `n` nodes over `[0, t_max]`.
pub fn time_coeff_u1k_grid(
    p: &LevelParams,
    k: usize,
    (phi, psi, f): (f64, f64, f64),
    t_max: f64,
    n: usize,
) -> Result<GridFn> {
    let l = spectral::eigenvalue(k)?;
    sum_grid(&mode_terms(p, phi, psi, f), p.rho(), l * l, t_max, n)
}

/// `U_{2k}` on the grid of `u1k`. `coupling` multiplies `2λ_k`; 1 is the
/// equation, 0 decouples the mode.
pub fn time_coeff_u2k(
    p: &LevelParams,
    k: usize,
    (phi, psi, f): (f64, f64, f64),
    u1k: &GridFn,
    coupling: f64,
) -> Result<GridFn> {
    let l = spectral::eigenvalue(k)?;
    let own = sum_grid(
        &mode_terms(p, phi, psi, f),
        p.rho(),
        l * l,
        u1k.t_max(),
        u1k.n(),
    )?;
    if coupling == 0.0 {
        return Ok(own);
    }
    let conv = convolve_ml_kernel(u1k, p.rho(), l * l)?;
    own.add_scaled(&conv, 2.0 * l * coupling)
}

/// `(u ∗ t^{ρ-1}E_{ρ,ρ}(-λ²t^ρ))` on the grid of `u`. The regular part is
/// integrated against exact kernel moments, the origin terms exactly.
pub fn convolve_ml_kernel(u: &GridFn, rho: f64, lambda2: f64) -> Result<GridFn> {
    let (t_max, n) = (u.t_max(), u.n());
    // first and second antiderivatives of the kernel
    let k1 = ml_kernel_samples(rho, rho + 1.0, lambda2, t_max, n)?;
    let k2 = ml_kernel_samples(rho, rho + 2.0, lambda2, t_max, n)?;
    let w = KernelWeights::from_antiderivatives(&k1, &k2, u.h())?;
    let regular = GridFn::from_parts(u.regular().to_vec(), Vec::new(), t_max)?;
    let mut total = convolve_with_weights(&regular, &w)?;
    for o in u.origin_terms() {
        // c t^α ∗ t^{ρ-1}E_{ρ,ρ} = c Γ(α+1) t^{α+ρ} E_{ρ,α+ρ+1}
        let m = MlTerm::plain(o.coeff * gamma(o.alpha + 1.0), o.alpha + rho + 1.0);
        total = total.add_scaled(&m.to_grid(rho, lambda2, t_max, n)?, 1.0)?;
    }
    Ok(total)
}

/// Time dependence of one mode of the solution.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub index: EigenIndex,
    pub lambda2: f64,
    /// Closed-form part.
    pub terms: Vec<MlTerm>,
    /// Exact coupling term (zero unless `index` is `(2,k)`).
    pub coupling: Vec<MlTerm>,
    /// Grid coupling term, when the grid method is in use.
    pub coupling_grid: Option<GridFn>,
}

impl ModeSolution {
    /// `U_j(t)` as used by the solver.
    pub fn eval(&self, rho: f64, t: f64) -> Result<f64> {
        let own = sum_terms(&self.terms, rho, self.lambda2, t)?;
        let c = match &self.coupling_grid {
            Some(g) => g.interpolate(t),
            None => sum_terms(&self.coupling, rho, self.lambda2, t)?,
        };
        Ok(own + c)
    }

    /// `U_j(t)` with the exact coupling term.
    pub fn eval_exact(&self, rho: f64, t: f64) -> Result<f64> {
        Ok(sum_terms(&self.terms, rho, self.lambda2, t)?
            + sum_terms(&self.coupling, rho, self.lambda2, t)?)
    }

    fn all_terms(&self) -> Vec<MlTerm> {
        self.terms.iter().chain(&self.coupling).copied().collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub kind: u8,
    pub k: usize,
    pub phi: f64,
    pub psi: f64,
    pub final_data: f64,
    pub source: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub convolution: ConvolutionMethod,
    pub k_max: usize,
    pub n_t: usize,
    /// `max_j |U_j(T) - φ̄_j|`.
    pub final_coefficient_residual: f64,
    /// `‖u(·,T) - φ̄‖∞` on 101 points.
    pub final_condition_residual: f64,
    /// Symbolic PDE residual at interior collocation points.
    pub pde_residual: f64,
    /// The same residual with grid fractional derivatives.
    pub pde_residual_grid: f64,
    pub boundary_dirichlet_residual: f64,
    pub boundary_periodic_flux_residual: f64,
    /// `max_x |J^{1-ρ}u(x,0)|`, `None` when it diverges.
    pub rl_initial_value: Option<f64>,
    /// `max_k 2λ_k |grid - exact|` of the coupling at `T` (grid method only).
    pub convolution_cross_check: Option<f64>,
    pub modes: Vec<ModeReport>,
}

#[derive(Debug, Clone)]
pub struct InverseSolution {
    pub params: LevelParams,
    pub t_final: f64,
    pub source_coeffs: SpectralCoeffs,
    pub phi: SpectralCoeffs,
    pub psi: SpectralCoeffs,
    pub final_data: SpectralCoeffs,
    pub modes: Vec<ModeSolution>,
    pub diagnostics: Diagnostics,
}

impl InverseSolution {
    /// `u(x, t)`.
    pub fn state(&self, x: f64, t: f64) -> Result<f64> {
        self.state_derivative(x, t, 0)
    }

    fn state_derivative(&self, x: f64, t: f64, order: u8) -> Result<f64> {
        let mut s = 0.0;
        for m in &self.modes {
            let u = m.eval(self.params.rho(), t)?;
            if u != 0.0 {
                s += u * spectral::eval_x_derivative(m.index, x, order)?;
            }
        }
        Ok(s)
    }

    pub fn source(&self, x: f64) -> Result<f64> {
        spectral::reconstruct(&self.source_coeffs, x)
    }
}

fn basis_at(p: &LevelParams, lambda2: f64, t: f64) -> Result<f64> {
    MlTerm::plain(1.0, p.rho() + 1.0).eval(p.rho(), lambda2, t)
}

fn invert(p: &LevelParams, k: usize, lambda2: f64, t: f64, rest: f64) -> Result<f64> {
    let d = basis_at(p, lambda2, t)?;
    if d == 0.0 || !d.is_finite() {
        return Err(Error::IllPosed { k });
    }
    Ok(rest / d)
}

/// Final data `U_j(T)` generated from a known source by the closed form.
pub fn forward_final_data(
    p: &LevelParams,
    t_final: f64,
    phi: &SpectralCoeffs,
    psi: &SpectralCoeffs,
    source: &SpectralCoeffs,
) -> Result<SpectralCoeffs> {
    let k_max = phi.k_max().max(psi.k_max()).max(source.k_max());
    let rho = p.rho();
    let rows: Result<Vec<(EigenIndex, f64)>> = EigenIndex::all(k_max)
        .into_par_iter()
        .map(|idx| {
            let l = idx.frequency();
            let mut terms = mode_terms(p, phi.get(idx), psi.get(idx), source.get(idx)).to_vec();
            if idx.kind == EigenKind::Two {
                let one = EigenIndex::one(idx.k)?;
                let u1 = mode_terms(p, phi.get(one), psi.get(one), source.get(one));
                terms.extend(coupling_closed_form(rho, l, &u1));
            }
            Ok((idx, sum_terms(&terms, rho, l * l, t_final)?))
        })
        .collect();
    let mut out = SpectralCoeffs::zeros(k_max);
    for (idx, v) in rows? {
        out.set(idx, v);
    }
    Ok(out)
}

/// Source coefficients `f₀, f_{1k}, f_{2k}` from the final condition.
pub fn source_coeffs(spec: &InverseProblemSpec) -> Result<SpectralCoeffs> {
    Ok(solve(spec)?.source_coeffs)
}

struct ModeOutcome {
    one: ModeSolution,
    two: ModeSolution,
    cross: Option<f64>,
}

fn solve_pair(
    spec: &InverseProblemSpec,
    k: usize,
    phi: &SpectralCoeffs,
    psi: &SpectralCoeffs,
    fbar: &SpectralCoeffs,
) -> Result<ModeOutcome> {
    let p = &spec.params;
    let (rho, t) = (p.rho(), spec.t_final);
    let (i1, i2) = (EigenIndex::one(k)?, EigenIndex::two(k)?);
    let l = i1.frequency();
    let l2 = l * l;

    let known1 = mode_terms(p, phi.get(i1), psi.get(i1), 0.0);
    let f1 = invert(p, k, l2, t, fbar.get(i1) - sum_terms(&known1, rho, l2, t)?)?;
    let u1 = mode_terms(p, phi.get(i1), psi.get(i1), f1);
    let exact = coupling_closed_form(rho, l, &u1);
    let exact_t = sum_terms(&exact, rho, l2, t)?;

    let (coupling_grid, coupling_t, cross) = match spec.convolution {
        ConvolutionMethod::Grid if u1.iter().any(|m| m.coeff != 0.0) => {
            let g = sum_grid(&u1, rho, l2, t, spec.n_t)?;
            let c = convolve_ml_kernel(&g, rho, l2)?.scale(2.0 * l);
            let ct = c.value(c.n() - 1);
            (Some(c), ct, Some((ct - exact_t).abs()))
        }
        ConvolutionMethod::Grid => (Some(GridFn::zeros(t, spec.n_t)?), 0.0, Some(0.0)),
        ConvolutionMethod::ClosedForm => (None, exact_t, None),
    };

    let known2 = mode_terms(p, phi.get(i2), psi.get(i2), 0.0);
    let rest = fbar.get(i2) - sum_terms(&known2, rho, l2, t)? - coupling_t;
    let f2 = invert(p, k, l2, t, rest)?;

    Ok(ModeOutcome {
        one: ModeSolution {
            index: i1,
            lambda2: l2,
            terms: u1.to_vec(),
            coupling: Vec::new(),
            coupling_grid: None,
        },
        two: ModeSolution {
            index: i2,
            lambda2: l2,
            terms: mode_terms(p, phi.get(i2), psi.get(i2), f2).to_vec(),
            coupling: exact,
            coupling_grid,
        },
        cross,
    })
}

/// Projects the data, recovers the source and assembles the state.
pub fn solve(spec: &InverseProblemSpec) -> Result<InverseSolution> {
    spec.validate()?;
    let p = &spec.params;
    let (rho, t) = (p.rho(), spec.t_final);
    let k_max = spec.k_max;
    let phi = spec.phi.coefficients(k_max)?;
    let psi = spec.psi.coefficients(k_max)?;
    let fbar = spec.final_data.coefficients(k_max)?;

    let known0 = mode_terms(p, phi.a0, psi.a0, 0.0);
    let f0 = invert(p, 0, 0.0, t, fbar.a0 - sum_terms(&known0, rho, 0.0, t)?)?;
    let zero = ModeSolution {
        index: EigenIndex::ZERO,
        lambda2: 0.0,
        terms: mode_terms(p, phi.a0, psi.a0, f0).to_vec(),
        coupling: Vec::new(),
        coupling_grid: None,
    };

    let pairs: Vec<ModeOutcome> = (1..=k_max)
        .into_par_iter()
        .map(|k| solve_pair(spec, k, &phi, &psi, &fbar))
        .collect::<Result<_>>()?;

    let mut modes = vec![zero];
    let mut cross: Option<f64> = None;
    for pair in pairs {
        if let Some(c) = pair.cross {
            cross = Some(cross.unwrap_or(0.0).max(c));
        }
        modes.push(pair.one);
        modes.push(pair.two);
    }
    let mut source = SpectralCoeffs::zeros(k_max);
    for m in &modes {
        source.set(m.index, m.terms[2].coeff);
    }

    let mut sol = InverseSolution {
        params: p.clone(),
        t_final: t,
        source_coeffs: source,
        phi,
        psi,
        final_data: fbar,
        modes,
        diagnostics: Diagnostics {
            convolution: spec.convolution,
            k_max,
            n_t: spec.n_t,
            final_coefficient_residual: 0.0,
            final_condition_residual: 0.0,
            pde_residual: 0.0,
            pde_residual_grid: 0.0,
            boundary_dirichlet_residual: 0.0,
            boundary_periodic_flux_residual: 0.0,
            rl_initial_value: None,
            convolution_cross_check: cross,
            modes: Vec::new(),
        },
    };
    sol.diagnostics = diagnose(spec, &sol)?;
    Ok(sol)
}

/// Interior points used by the residual checks.
fn collocation_x() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

fn collocation_t(t_final: f64) -> Vec<f64> {
    (1..=10).map(|i| t_final * i as f64 / 10.0).collect()
}

fn diagnose(spec: &InverseProblemSpec, sol: &InverseSolution) -> Result<Diagnostics> {
    let p = &sol.params;
    let (rho, t) = (p.rho(), sol.t_final);
    let mut d = sol.diagnostics.clone();

    // final condition
    let mut u_t = SpectralCoeffs::zeros(sol.source_coeffs.k_max());
    for m in &sol.modes {
        let v = m.eval(rho, t)?;
        u_t.set(m.index, v);
        d.final_coefficient_residual = d
            .final_coefficient_residual
            .max((v - sol.final_data.get(m.index)).abs());
    }
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        let want = match spec.final_data.eval(x) {
            Ok(v) if v.is_finite() => v,
            _ => continue,
        };
        let r = (spectral::reconstruct(&u_t, x)? - want).abs();
        d.final_condition_residual = d.final_condition_residual.max(r);
    }

    // per-mode ODE residuals, symbolic and on the grid
    let ts = collocation_t(t);
    let xs = collocation_x();
    let mut sym = vec![vec![0.0; ts.len()]; sol.modes.len()];
    let mut grid = vec![vec![0.0; ts.len()]; sol.modes.len()];
    let one_of = |k: usize| {
        sol.modes.iter().find(|m| {
            m.index
                == EigenIndex {
                    kind: EigenKind::One,
                    k,
                }
        })
    };
    for (j, m) in sol.modes.iter().enumerate() {
        let f = m.terms[2].coeff;
        let corr = [
            (m.terms[0].coeff, p.correction_exponent(1)),
            (m.terms[1].coeff, p.correction_exponent(2)),
        ];
        let partner = match m.index.kind {
            EigenKind::Two => one_of(m.index.k),
            _ => None,
        };
        let l = m.index.frequency();
        let rhs = |tt: f64, u: f64| -> Result<f64> {
            let c = match partner {
                Some(p1) => 2.0 * l * p1.eval_exact(rho, tt)?,
                None => 0.0,
            };
            Ok(-m.lambda2 * u + c + f)
        };
        for (i, &tt) in ts.iter().enumerate() {
            let mut lhs = 0.0;
            for term in m.all_terms() {
                lhs += term.rl_derivative(rho).eval(rho, m.lambda2, tt)?;
            }
            for (c, e) in corr {
                if c != 0.0 {
                    lhs -= c * tt.powf(e - rho) * rgamma(e + 1.0 - rho);
                }
            }
            sym[j][i] = lhs - rhs(tt, m.eval_exact(rho, tt)?)?;
        }

        // grid: D^ρ of the corrected state from samples
        let mut g = sum_grid(&m.terms, rho, m.lambda2, t, spec.n_t)?;
        g = match &m.coupling_grid {
            Some(c) => g.add_scaled(c, 1.0)?,
            None => g.add_scaled(&sum_grid(&m.coupling, rho, m.lambda2, t, spec.n_t)?, 1.0)?,
        };
        for (c, e) in corr {
            if c != 0.0 {
                g = g.with_term(PowerTerm {
                    coeff: -c * rgamma(e + 1.0),
                    alpha: e,
                });
            }
        }
        let dg = if (rho - 1.0).abs() <= EXPONENT_TOL {
            differentiate(&g)
        } else {
            rl_derivative_grid(&g, rho)?
        };
        for (i, &tt) in ts.iter().enumerate() {
            let u = m.eval(rho, tt)?;
            grid[j][i] = dg.interpolate(tt) - rhs(tt, u)?;
        }
    }
    let physical = |r: &Vec<Vec<f64>>| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..ts.len() {
            for &x in &xs {
                let mut s = 0.0;
                for (rj, m) in r.iter().zip(&sol.modes) {
                    s += rj[i] * spectral::eval_x(m.index, x)?;
                }
                worst = worst.max(s.abs());
            }
        }
        Ok(worst)
    };
    d.pde_residual = physical(&sym)?;
    d.pde_residual_grid = physical(&grid)?;

    for &tt in &ts {
        d.boundary_dirichlet_residual =
            d.boundary_dirichlet_residual.max(sol.state(1.0, tt)?.abs());
        let flux = sol.state_derivative(0.0, tt, 1)? - sol.state_derivative(1.0, tt, 1)?;
        d.boundary_periodic_flux_residual = d.boundary_periodic_flux_residual.max(flux.abs());
    }

    d.rl_initial_value = rl_initial_value(sol)?;

    d.modes = sol
        .modes
        .iter()
        .map(|m| ModeReport {
            kind: match m.index.kind {
                EigenKind::Zero => 0,
                EigenKind::One => 1,
                EigenKind::Two => 2,
            },
            k: m.index.k,
            phi: sol.phi.get(m.index),
            psi: sol.psi.get(m.index),
            final_data: sol.final_data.get(m.index),
            source: sol.source_coeffs.get(m.index),
        })
        .collect();
    Ok(d)
}

/// `max_x |J^{1-ρ}u(x, 0⁺)|`. Each term `c t^{β-1}E_{ρ,β}` maps to
/// `c t^{β-ρ}E_{ρ,β+1-ρ}`, whose limit is 0, `c` or infinite.
fn rl_initial_value(sol: &InverseSolution) -> Result<Option<f64>> {
    let rho = sol.params.rho();
    let mut c = SpectralCoeffs::zeros(sol.source_coeffs.k_max());
    for m in &sol.modes {
        let mut v = 0.0;
        for term in m.all_terms() {
            if term.coeff == 0.0 {
                continue;
            }
            let a = term.beta - rho;
            if a.abs() <= EXPONENT_TOL {
                v += term.coeff;
            } else if a < 0.0 {
                return Ok(None);
            }
        }
        c.set(m.index, v);
    }
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        worst = worst.max(spectral::reconstruct(&c, i as f64 / 100.0)?.abs());
    }
    Ok(Some(worst))
}

// ---------------------------------------------------------------- JSON spec

/// A function of `x` in a run-spec file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    /// Monomial string in `x`, e.g. `"1 - x^2"`.
    Expr(String),
    Coefficients {
        coefficients: SpectralCoeffs,
    },
    /// CSV with a header line and columns `x,value` on a uniform grid.
    Csv {
        csv: PathBuf,
    },
}

impl FunctionSpec {
    pub fn resolve(&self, base: &Path) -> Result<FunctionData> {
        match self {
            FunctionSpec::Expr(s) => Ok(FunctionData::Monomials(s.replace('x', "t").parse()?)),
            FunctionSpec::Coefficients { coefficients } => {
                let c = coefficients;
                SpectralCoeffs::new(c.a0, c.a1.clone(), c.a2.clone())
                    .map(FunctionData::Coefficients)
            }
            FunctionSpec::Csv { csv } => {
                let path = if csv.is_absolute() {
                    csv.clone()
                } else {
                    base.join(csv)
                };
                let text = crate::error::read_text(&path)?;
                // accept either `x,value` or `t,value`
                let text = match text.split_once('\n') {
                    Some((head, rest)) if head.trim().replace(' ', "") == "x,value" => {
                        format!("t,value\n{rest}")
                    }
                    _ => text,
                };
                let g = GridFn::from_csv(&text)?;
                if (g.t_max() - 1.0).abs() > 1e-12 {
                    return Err(Error::usage(format!(
                        "{}: samples must cover x in [0, 1]",
                        path.display()
                    )));
                }
                Ok(FunctionData::Samples(g))
            }
        }
    }
}

fn default_t() -> f64 {
    1.0
}
fn default_k() -> usize {
    8
}
fn default_nt() -> usize {
    2049
}

/// JSON form of [`InverseProblemSpec`]. Either `final_data` or
/// `manufactured_source` (final data generated from a known source) must
/// be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSpecFile {
    pub rho: f64,
    pub nus: Vec<f64>,
    #[serde(default = "default_t", rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_k", rename = "K")]
    pub k_max: usize,
    #[serde(default = "default_nt")]
    pub n_t: usize,
    #[serde(default)]
    pub phi: Option<FunctionSpec>,
    #[serde(default)]
    pub psi: Option<FunctionSpec>,
    #[serde(default)]
    pub final_data: Option<FunctionSpec>,
    #[serde(default)]
    pub manufactured_source: Option<FunctionSpec>,
    #[serde(default)]
    pub convolution: ConvolutionMethod,
}

impl InverseSpecFile {
    pub fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let text = crate::error::read_text(path)?;
        let spec: InverseSpecFile = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((spec, base))
    }

    pub fn into_spec(self, base: &Path) -> Result<InverseProblemSpec> {
        let params = LevelParams::new(self.rho, &self.nus)?;
        let resolve = |f: &Option<FunctionSpec>| match f {
            Some(f) => f.resolve(base),
            None => Ok(FunctionData::zero()),
        };
        let phi = resolve(&self.phi)?;
        let psi = resolve(&self.psi)?;
        let final_data = match (&self.final_data, &self.manufactured_source) {
            (Some(f), None) => f.resolve(base)?,
            (None, Some(src)) => {
                let k = self.k_max;
                let fbar = forward_final_data(
                    &params,
                    self.t_final,
                    &phi.coefficients(k)?,
                    &psi.coefficients(k)?,
                    &src.resolve(base)?.coefficients(k)?,
                )?;
                FunctionData::Coefficients(fbar)
            }
            _ => {
                return Err(Error::usage(
                    "exactly one of final_data and manufactured_source is required",
                ))
            }
        };
        let spec = InverseProblemSpec {
            params,
            t_final: self.t_final,
            phi,
            psi,
            final_data,
            k_max: self.k_max,
            n_t: self.n_t,
            convolution: self.convolution,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> LevelParams {
        LevelParams::new(0.6, &[0.1, 0.8]).unwrap()
    }

    fn manufactured(k_max: usize) -> SpectralCoeffs {
        let mut f = SpectralCoeffs::zeros(k_max);
        f.a0 = 1.0;
        f.a1[0] = 0.5;
        f.a2[0] = -0.25;
        f
    }

    #[test]
    fn u0_closed_form() {
        let p = params();
        let v = time_coeff_u0(&p, 0.0, 0.0, gamma(1.6), 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
        // singular exponent e1 = -0.3 rules out t = 0
        assert!(time_coeff_u0(&p, 1.0, 0.0, 0.0, 0.0).is_err());
        assert_eq!(time_coeff_u0(&p, 0.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        let c = LevelParams::new(1.0, &[0.0, 1.0]).unwrap();
        assert!((time_coeff_u0(&c, 1.0, 0.0, 0.0, 0.37).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn u1k_satisfies_its_ode_on_a_grid() {
        let p = params();
        let l2 = spectral::eigenvalue(1).unwrap().powi(2);
        let u = time_coeff_u1k_grid(&p, 1, (0.0, 0.0, 1.0), 1.0, 1025).unwrap();
        let du = rl_derivative_grid(&u, 0.6).unwrap();
        let mut worst: f64 = 0.0;
        for j in 100..u.n() {
            worst = worst.max((du.value(j) + l2 * u.value(j) - 1.0).abs());
        }
        assert!(worst < 1e-3, "{worst}");
        let at1 = time_coeff_u1k(&p, 1, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!((at1 - u.value(u.n() - 1)).abs() < 1e-12);
    }

    #[test]
    fn grid_coupling_matches_closed_form() {
        let p = params();
        let l = spectral::eigenvalue(1).unwrap();
        let u1 = time_coeff_u1k_grid(&p, 1, (0.0, 0.0, 0.5), 1.0, 2049).unwrap();
        let c = convolve_ml_kernel(&u1, 0.6, l * l).unwrap();
        let exact = MlTerm {
            coeff: 0.5,
            beta: 2.2,
            prabhakar: true,
        };
        let err = c.max_abs_error_on(0.0, 1.0, |t| exact.eval(0.6, l * l, t).unwrap());
        assert!(err < 1e-5, "{err}");
        let j = c.n() - 1;
        assert!((c.value(j) - exact.eval(0.6, l * l, 1.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn grid_coupling_stays_accurate_for_stiff_modes() {
        // λ² t^ρ ≫ 1 over most of the grid, with singular φ and ψ terms
        let p = LevelParams::new(0.3, &[0.35, 0.9]).unwrap();
        let mut fbar = SpectralCoeffs::zeros(2);
        fbar.a1[1] = -0.5;
        let mut phi = SpectralCoeffs::zeros(2);
        phi.a1[1] = -1.0;
        let mut spec =
            InverseProblemSpec::new(p, 1.0, FunctionData::Coefficients(fbar), 2, 2049).unwrap();
        spec.phi = FunctionData::Coefficients(phi);
        let grid = source_coeffs(&spec).unwrap();
        spec.convolution = ConvolutionMethod::ClosedForm;
        let exact = source_coeffs(&spec).unwrap();
        let rel = (grid.a2[1] - exact.a2[1]).abs() / exact.a2[1].abs();
        assert!(rel < 1e-3, "{rel}");
    }

    #[test]
    fn decoupled_u2k_has_u1k_form() {
        let p = params();
        let u1 = time_coeff_u1k_grid(&p, 2, (0.0, 0.0, 1.0), 1.0, 129).unwrap();
        let u2 = time_coeff_u2k(&p, 2, (0.0, 0.0, 1.0), &u1, 0.0).unwrap();
        assert_eq!(u1.samples(), u2.samples());
        let zero = GridFn::zeros(1.0, 129).unwrap();
        let z = time_coeff_u2k(&p, 2, (0.0, 0.0, 0.0), &zero, 1.0).unwrap();
        assert!(z.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn manufactured_round_trip() {
        let p = params();
        let k = 4;
        let z = SpectralCoeffs::zeros(k);
        let truth = manufactured(k);
        let fbar = forward_final_data(&p, 1.0, &z, &z, &truth).unwrap();
        for method in [ConvolutionMethod::ClosedForm, ConvolutionMethod::Grid] {
            let mut spec = InverseProblemSpec::new(
                p.clone(),
                1.0,
                FunctionData::Coefficients(fbar.clone()),
                k,
                2049,
            )
            .unwrap();
            spec.convolution = method;
            let sol = solve(&spec).unwrap();
            let err = sol.source_coeffs.max_abs_diff(&truth);
            let d = &sol.diagnostics;
            assert!(err < 1e-6, "{method:?}: {err}");
            assert!(d.final_condition_residual < 1e-6, "{d:?}");
            assert!(d.pde_residual < 1e-2, "{d:?}");
            assert_eq!(d.rl_initial_value, Some(0.0));
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let spec = InverseProblemSpec::new(params(), 1.0, FunctionData::zero(), 3, 65).unwrap();
        let sol = solve(&spec).unwrap();
        assert_eq!(sol.source_coeffs, SpectralCoeffs::zeros(3));
        let d = &sol.diagnostics;
        assert_eq!(d.final_condition_residual, 0.0);
        assert_eq!(d.pde_residual, 0.0);
        assert_eq!(d.pde_residual_grid, 0.0);
        assert_eq!(sol.state(0.3, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn validation() {
        let p3 = LevelParams::new(0.5, &[0.2, 0.5, 0.9]).unwrap();
        assert!(matches!(
            InverseProblemSpec::new(p3, 1.0, FunctionData::zero(), 2, 65),
            Err(Error::Admissibility { .. })
        ));
        assert!(InverseProblemSpec::new(params(), 0.0, FunctionData::zero(), 2, 65).is_err());
        assert!(InverseProblemSpec::new(params(), 1.0, FunctionData::zero(), 0, 65).is_err());
        assert!(InverseProblemSpec::new(params(), 1.0, FunctionData::zero(), 2, 64).is_err());
    }

    #[test]
    fn spec_file_parsing() {
        let text = r#"{"rho": 0.6, "nus": [0.1, 0.8], "K": 2, "n_t": 129,
            "manufactured_source": {"coefficients": {"a0": 1.0, "a1": [0.5, 0.0], "a2": [-0.25, 0.0]}},
            "convolution": "closed_form"}"#;
        let f: InverseSpecFile = serde_json::from_str(text).unwrap();
        let spec = f.into_spec(Path::new(".")).unwrap();
        let sol = solve(&spec).unwrap();
        assert!((sol.source_coeffs.a0 - 1.0).abs() < 1e-12);
        let bad = r#"{"rho": 0.6, "nus": [0.1, 0.8], "final_data": "1 - x", "extra": 1}"#;
        assert!(serde_json::from_str::<InverseSpecFile>(bad).is_err());
        let ok = r#"{"rho": 0.6, "nus": [0.1, 0.8], "final_data": "1 - x", "K": 2, "n_t": 65}"#;
        let spec = serde_json::from_str::<InverseSpecFile>(ok)
            .unwrap()
            .into_spec(Path::new("."))
            .unwrap();
        assert!(matches!(spec.final_data, FunctionData::Monomials(_)));
    }
}

//! Seeded verification suites shared by the CLI and the acceptance tests.
//!
//! Every suite draws its cases from a `ChaCha8Rng` with a fixed seed, so a
//! report is a pure function of its arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_calculus::{rl_derivative_grid, rl_integral_grid, GridFn};
use crate::level_derivative::{
    equivalence_discrepancy, fundamental_check, laplace_spot_check, lfd_composed, lfd_grid,
    lfd_rl_form, LevelParams,
};
use crate::power_calculus::{
    caputo_derivative, hilfer_derivative, rl_derivative, rl_integral, Monomial, MonomialSum,
};
use crate::spectral::{inner, EigenIndex};

pub const DEFAULT_SEED: u64 = 20240607;

/// Outcome of one suite: the worst discrepancy against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub tolerance: f64,
    pub max_discrepancy: f64,
    pub passed: bool,
    pub checks: Vec<CheckRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub cases: usize,
    pub max_discrepancy: f64,
    /// Parameters of the worst case.
    pub worst: String,
}

impl SuiteReport {
    fn new(suite: &str, tolerance: f64, checks: Vec<CheckRow>) -> Self {
        let max = checks.iter().map(|c| c.max_discrepancy).fold(0.0, f64::max);
        let cases = checks.iter().map(|c| c.cases).sum();
        SuiteReport {
            suite: suite.into(),
            cases,
            tolerance,
            max_discrepancy: max,
            // NaN never passes
            passed: max <= tolerance,
            checks,
        }
    }

    /// `Ok` when passed, otherwise a numerical failure carrying the achieved
    /// discrepancy.
    pub fn into_result(self) -> Result<SuiteReport> {
        if self.passed {
            Ok(self)
        } else {
            Err(Error::numerical(
                format!(
                    "suite '{}' exceeded tolerance {:e}",
                    self.suite, self.tolerance
                ),
                self.max_discrepancy,
            ))
        }
    }
}

#[derive(Default)]
struct Worst {
    cases: usize,
    max: f64,
    at: String,
}

impl Worst {
    fn record(&mut self, d: f64, at: impl FnOnce() -> String) {
        self.cases += 1;
        if d > self.max || d.is_nan() {
            self.max = if d.is_nan() { f64::INFINITY } else { d };
            self.at = at();
        }
    }

    fn row(self, name: &str) -> CheckRow {
        CheckRow {
            name: name.into(),
            cases: self.cases,
            max_discrepancy: self.max,
            worst: self.at,
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random admissible parameters with `n` levels.
pub fn random_params<R: Rng>(rng: &mut R, n: usize) -> LevelParams {
    loop {
        let rho = rng.gen_range(0.05..0.98);
        let nus: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        if let Ok(p) = LevelParams::new(rho, &nus) {
            // keep ξ₁ away from 0 so t^{ξ₁-1} stays well inside L¹
            if p.xis()[0] > 0.02 {
                return p;
            }
        }
    }
}

/// Up to `max_terms` monomials with exponents in the domain of the level
/// derivative: above `ρ+ν₁-1`, or one of its kernel exponents.
pub fn random_monomials<R: Rng>(rng: &mut R, p: &LevelParams, max_terms: usize) -> MonomialSum {
    let lo = p.correction_exponent(1);
    let kernel = p.kernel_exponents();
    let count = rng.gen_range(1..=max_terms);
    let terms = (0..count).map(|_| {
        let c = rng.gen_range(-2.0..2.0);
        let a = if rng.gen_bool(0.2) {
            kernel[rng.gen_range(0..kernel.len())]
        } else {
            rng.gen_range((lo + 0.01)..=4.0)
        };
        Monomial::new(c, a)
    });
    MonomialSum::new(terms).expect("exponents above -1")
}

/// Composed chain against the RL form on random `(p, f)`, `n ∈ {2, 3}`.
pub fn equivalence_suite(cases: usize, seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let mut w = Worst::default();
    for i in 0..cases {
        let p = random_params(&mut r, 2 + i % 2);
        let f = random_monomials(&mut r, &p, 5);
        let d = equivalence_discrepancy(&f, &p)?;
        w.record(d, || format!("rho={} nus={:?} f={f}", p.rho(), p.nus()));
    }
    Ok(SuiteReport::new(
        "equivalence",
        tol,
        vec![w.row("composed = rl_form")],
    ))
}

fn smooth_monomials<R: Rng>(rng: &mut R) -> MonomialSum {
    let count = rng.gen_range(1..=4);
    let terms = (0..count).map(|_| {
        let a = if rng.gen_bool(0.25) {
            0.0
        } else {
            rng.gen_range(0.05..4.0)
        };
        Monomial::new(rng.gen_range(-2.0..2.0), a)
    });
    MonomialSum::new(terms).expect("nonnegative exponents")
}

/// The RL, Caputo and Hilfer special cases. `rho` fixes the order when
/// given; otherwise it is drawn per case.
pub fn reductions_suite(
    draws: usize,
    rho: Option<f64>,
    seed: u64,
    tol: f64,
) -> Result<SuiteReport> {
    if let Some(r) = rho {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::domain(format!(
                "reductions need 0 < rho < 1 (got {r})"
            )));
        }
    }
    let mut r = rng(seed);
    let (mut rl, mut cap, mut hil) = (Worst::default(), Worst::default(), Worst::default());
    for _ in 0..draws {
        let rho = rho.unwrap_or_else(|| r.gen_range(0.05..0.95));
        let nu1: f64 = r.gen_range(0.0..=1.0);
        let f = smooth_monomials(&mut r);
        let at = || format!("rho={rho} nu1={nu1} f={f}");

        let p = LevelParams::new(rho, &[0.0, 1.0])?;
        let d = lfd_composed(&f, &p)?.max_discrepancy(&rl_derivative(&f, rho)?);
        rl.record(d, at);

        let p = LevelParams::new_limiting(rho, &[1.0 - rho, 0.0])?;
        let d = lfd_composed(&f, &p)?.max_discrepancy(&caputo_derivative(&f, rho)?);
        cap.record(d, at);

        let p = LevelParams::new(rho, &[nu1 * (1.0 - rho), 1.0])?;
        let d = lfd_composed(&f, &p)?.max_discrepancy(&hilfer_derivative(&f, rho, nu1)?);
        hil.record(d, at);
    }
    Ok(SuiteReport::new(
        "reductions",
        tol,
        vec![
            rl.row("nu=(0,1) -> Riemann-Liouville"),
            cap.row("nu=(1-rho,0) -> Caputo"),
            hil.row("nu=(nu1(1-rho),1) -> Hilfer"),
        ],
    ))
}

/// `J^ρ D f = f - Σ corrections` on random cases, and both inversion
/// identities on `f = J^{ξ₁} g` with `g` vanishing at the origin.
pub fn fundamental_suite(cases: usize, seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let (mut id, mut left, mut right, mut rl) = (
        Worst::default(),
        Worst::default(),
        Worst::default(),
        Worst::default(),
    );
    for i in 0..cases {
        let p = random_params(&mut r, 2 + i % 2);
        let f = random_monomials(&mut r, &p, 5);
        let rep = fundamental_check(&f, &p)?;
        id.record(rep.identity_discrepancy, || {
            format!("rho={} nus={:?} f={f}", p.rho(), p.nus())
        });
    }
    for _ in 0..cases {
        let p = random_params(&mut r, 2);
        let count = r.gen_range(1..=4);
        let g = MonomialSum::new(
            (0..count).map(|_| Monomial::new(r.gen_range(-2.0..2.0), r.gen_range(0.05..3.0))),
        )
        .expect("positive exponents");
        let f = rl_integral(&g, p.xis()[0])?;
        let rep = fundamental_check(&f, &p)?;
        let at = || format!("rho={} nus={:?} f=J^xi1({g})", p.rho(), p.nus());
        if !rep.in_vanishing_class {
            return Err(Error::numerical(
                format!("{} is not in the vanishing class", at()),
                1.0,
            ));
        }
        left.record(rep.left_inverse_discrepancy, at);
        right.record(rep.right_inverse_discrepancy.unwrap_or(f64::INFINITY), at);
        let d = lfd_composed(&f, &p)?.max_discrepancy(&rl_derivative(&f, p.rho())?);
        rl.record(d, at);
    }
    Ok(SuiteReport::new(
        "fundamental",
        tol,
        vec![
            id.row("J^rho D f = f - corrections"),
            left.row("J^rho D f = f on J^xi1(L1)"),
            right.row("D J^rho f = f on J^xi1(L1)"),
            rl.row("D f = RL D^rho f on J^xi1(L1)"),
        ],
    ))
}

/// `J^a J^b = J^{a+b}` and `D^ρ J^ρ = I` symbolically, and the integral
/// semigroup on a grid (reported with `grid_tol`).
pub fn semigroup_suite(cases: usize, seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let (mut sg, mut inv) = (Worst::default(), Worst::default());
    for _ in 0..cases {
        let a = r.gen_range(0.05..2.0);
        let b = r.gen_range(0.05..2.0);
        let rho = r.gen_range(0.05..0.95);
        let count = r.gen_range(1..=4);
        let f = MonomialSum::new(
            (0..count).map(|_| Monomial::new(r.gen_range(-2.0..2.0), r.gen_range(-0.9..4.0))),
        )
        .expect("exponents above -1");
        let d = rl_integral(&rl_integral(&f, b)?, a)?.max_discrepancy(&rl_integral(&f, a + b)?);
        sg.record(d, || format!("a={a} b={b} f={f}"));
        let d = rl_derivative(&rl_integral(&f, rho)?, rho)?.max_discrepancy(&f);
        inv.record(d, || format!("rho={rho} f={f}"));
    }
    let mut grid = Worst::default();
    let f = GridFn::from_fn(1.0, 1025, |t| t.powf(1.5))?;
    for &(a, b) in &[(0.3, 0.5), (0.5, 0.5), (0.7, 0.9)] {
        let lhs = rl_integral_grid(&rl_integral_grid(&f, b)?, a)?;
        let rhs = rl_integral_grid(&f, a + b)?;
        let d = (0..f.n())
            .map(|j| (lhs.value(j) - rhs.value(j)).abs())
            .fold(0.0, f64::max);
        // grid check is second order; scale into the symbolic tolerance
        grid.record(d * tol / GRID_SEMIGROUP_TOL, || {
            format!("grid a={a} b={b} n=1025")
        });
    }
    Ok(SuiteReport::new(
        "semigroup",
        tol,
        vec![
            sg.row("J^a J^b = J^(a+b)"),
            inv.row("D^rho J^rho = I"),
            grid.row("grid J^a J^b = J^(a+b), scaled by tol/1e-6"),
        ],
    ))
}

/// Absolute tolerance of the grid semigroup check at `n = 1025`.
pub const GRID_SEMIGROUP_TOL: f64 = 1e-6;

/// Gram matrix of `{X}` against `{Y}` up to `k_max` at quadrature `order`.
pub fn gram_matrix(k_max: usize, order: usize) -> Vec<Vec<f64>> {
    let idx = EigenIndex::all(k_max);
    idx.iter()
        .map(|&a| idx.iter().map(|&b| inner(a, b, order)).collect())
        .collect()
}

pub fn biorthogonality_suite(k_max: usize, order: usize, tol: f64) -> Result<SuiteReport> {
    if k_max < 1 {
        return Err(Error::usage("K must be >= 1"));
    }
    let g = gram_matrix(k_max, order);
    let idx = EigenIndex::all(k_max);
    let mut w = Worst::default();
    for (i, row) in g.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            w.record((v - want).abs(), || format!("X_{} vs Y_{}", idx[i], idx[j]));
        }
    }
    Ok(SuiteReport::new(
        "biorthogonality",
        tol,
        vec![w.row("gram = identity")],
    ))
}

/// Numerical Laplace transform of the second level derivative against
/// the closed form, on random `(f, p, s)` triples.
pub fn laplace_suite(cases: usize, seed: u64, tol: f64) -> Result<SuiteReport> {
    let mut r = rng(seed);
    let mut w = Worst::default();
    for _ in 0..cases {
        let p = random_params(&mut r, 2);
        let f = random_monomials(&mut r, &p, 3);
        let s = r.gen_range(0.5..4.0);
        let row = laplace_spot_check(&f, &p, &[s])?[0];
        w.record(row.discrepancy, || {
            format!("rho={} nus={:?} f={f} s={s}", p.rho(), p.nus())
        });
    }
    Ok(SuiteReport::new(
        "laplace",
        tol,
        vec![w.row("L{D f} = closed form")],
    ))
}

/// Operator studied by [`convergence_study`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceOp {
    #[serde(rename = "J")]
    Integral,
    #[serde(rename = "D")]
    Derivative,
    #[serde(rename = "lfd")]
    Level,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    /// `log2(e_prev / e)` against the previous grid.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub op: ConvergenceOp,
    pub alpha: f64,
    pub rho: f64,
    pub nus: Vec<f64>,
    /// Errors are measured on `[t_lo, 1]`.
    pub t_lo: f64,
    pub rows: Vec<ConvergenceRow>,
    pub min_order: Option<f64>,
}

/// Grid operator on `t^α` against its symbolic value, over several grids
/// on `[0, 1]`. The derivatives are compared on `[0.1, 1]`.
pub fn convergence_study(
    op: ConvergenceOp,
    alpha: f64,
    rho: f64,
    nus: &[f64],
    grids: &[usize],
) -> Result<ConvergenceReport> {
    if grids.is_empty() {
        return Err(Error::usage("at least one grid size is required"));
    }
    let f = MonomialSum::monomial(1.0, alpha)?;
    let p = match op {
        ConvergenceOp::Level => Some(LevelParams::new(rho, nus)?),
        _ => None,
    };
    let oracle = match (op, &p) {
        (ConvergenceOp::Integral, _) => rl_integral(&f, rho)?,
        (ConvergenceOp::Derivative, _) => rl_derivative(&f, rho)?,
        (ConvergenceOp::Level, Some(p)) => lfd_rl_form(&f, p)?,
        _ => unreachable!(),
    };
    let t_lo = if op == ConvergenceOp::Integral {
        0.0
    } else {
        0.1
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(grids.len());
    for &n in grids {
        let g = GridFn::from_fn(1.0, n, |t| t.powf(alpha))?;
        let out = match (op, &p) {
            (ConvergenceOp::Integral, _) => rl_integral_grid(&g, rho)?,
            (ConvergenceOp::Derivative, _) => rl_derivative_grid(&g, rho)?,
            (ConvergenceOp::Level, Some(p)) => lfd_grid(&g, p)?,
            _ => unreachable!(),
        };
        let error = (0..n)
            .filter(|&j| out.t(j) >= t_lo && out.t(j) > 0.0)
            .map(|j| (out.value(j) - oracle.eval(out.t(j)).unwrap_or(f64::NAN)).abs())
            .fold(0.0, f64::max);
        let order = rows.last().map(|prev| {
            let ratio = (n - 1) as f64 / (prev.n - 1) as f64;
            (prev.error / error).ln() / ratio.ln()
        });
        rows.push(ConvergenceRow { n, error, order });
    }
    let min_order = rows.iter().filter_map(|r| r.order).reduce(f64::min);
    Ok(ConvergenceReport {
        op,
        alpha,
        rho,
        nus: nus.to_vec(),
        t_lo,
        rows,
        min_order,
    })
}

//! Command-line front end. Exit codes: 0 success, 1 I/O, 2 validation,
//! 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid_calculus::GridFn;
use crate::inverse_solver::{solve, InverseSpecFile};
use crate::level_derivative::{
    equivalence_discrepancy, fundamental_check, laplace_spot_check, lfd_boundary_constants,
    lfd_composed, lfd_grid, lfd_rl_form, LevelParams,
};
use crate::mittag_leffler::ml_eval;
use crate::power_calculus::MonomialSum;
use crate::verification::{
    biorthogonality_suite, convergence_study, equivalence_suite, fundamental_suite,
    reductions_suite, semigroup_suite, ConvergenceOp, SuiteReport, DEFAULT_SEED,
};

pub const THREADS_ENV: &str = "FRACLEVEL_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "fraclevel",
    version,
    about = "Level fractional derivatives, Mittag-Leffler functions and an inverse source solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate E_{rho,nu}(z), or a column of z values with --batch.
    Ml(MlArgs),
    /// Level fractional derivative of a monomial sum or sampled data.
    #[command(subcommand)]
    Lfd(LfdCommand),
    /// Run a verification suite and print its JSON report.
    Verify(VerifyArgs),
    /// Inverse source problem.
    #[command(subcommand)]
    Inverse(InverseCommand),
    /// Grid-operator error against the symbolic value over several grids.
    Convergence(ConvergenceArgs),
}

#[derive(Args, Debug)]
struct MlArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    nu: f64,
    #[arg(long, allow_negative_numbers = true, required_unless_present = "batch")]
    z: Option<f64>,
    /// CSV with header `z`; writes `z,value` rows.
    #[arg(long, conflicts_with = "z")]
    batch: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct LevelArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    /// Level orders, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    nus: Option<Vec<f64>>,
    /// Accept the limit xi_1 = 0 (e.g. the Caputo case nu = (1-rho, 0)).
    #[arg(long)]
    limiting: bool,
}

impl LevelArgs {
    fn params(&self) -> Result<LevelParams> {
        let rho = self.rho.ok_or_else(|| Error::usage("--rho is required"))?;
        let nus = self
            .nus
            .as_deref()
            .ok_or_else(|| Error::usage("--nus is required"))?;
        if self.limiting {
            LevelParams::new_limiting(rho, nus)
        } else {
            LevelParams::new(rho, nus)
        }
    }
}

#[derive(Subcommand, Debug)]
enum LfdCommand {
    /// Evaluate the level derivative; `--f` is a monomial string or a CSV
    /// path (`t,value`).
    Eval(LfdEvalArgs),
    /// Compare the composed definition with the RL form.
    VerifyEquivalence(LfdEquivalenceArgs),
    /// The RL, Caputo and Hilfer special cases.
    VerifyReductions(ReductionArgs),
    /// Numerical Laplace transform against the closed form (n = 2).
    LaplaceCheck(LaplaceArgs),
}

#[derive(Args, Debug)]
struct LfdEvalArgs {
    #[command(flatten)]
    level: LevelArgs,
    #[arg(long, required_unless_present = "spec")]
    f: Option<String>,
    /// JSON run-spec {rho, nus, f, checks}.
    #[arg(long, conflicts_with_all = ["f", "rho", "nus"])]
    spec: Option<PathBuf>,
    /// Also sample the result on this many nodes (monomial input).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    /// Destination of the JSON report, or of the CSV for sampled input.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Destination of the sampled result (with --n).
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LfdEquivalenceArgs {
    #[command(flatten)]
    level: LevelArgs,
    /// Monomial string; without it random cases are drawn.
    #[arg(long)]
    f: Option<String>,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReductionArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 50)]
    draws: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LaplaceArgs {
    #[command(flatten)]
    level: LevelArgs,
    #[arg(long)]
    f: String,
    /// Laplace variables, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5,1,2",
        allow_negative_numbers = true
    )]
    s: Vec<f64>,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Suite {
    Semigroup,
    Fundamental,
    Biorthogonality,
    Reductions,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    /// Fixed order for the reductions suite.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Defaults: 1e-11 (semigroup, fundamental), 1e-10 (biorthogonality),
    /// 1e-12 (reductions).
    #[arg(long)]
    tol: Option<f64>,
    /// Truncation for the biorthogonality suite.
    #[arg(long = "k", default_value_t = 8)]
    k_max: usize,
    /// Quadrature order for the biorthogonality suite.
    #[arg(long, default_value_t = 128)]
    order: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum InverseCommand {
    /// Writes P_source.csv, P_state.csv and P_diagnostics.json.
    Solve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum OpArg {
    #[value(name = "J")]
    J,
    #[value(name = "D")]
    D,
    #[value(name = "lfd")]
    Lfd,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long, value_enum)]
    op: OpArg,
    /// Exponent of the test function t^alpha.
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    /// Level orders for --op lfd.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4")]
    nus: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "129,257,513,1025,2049,4097"
    )]
    grids: Vec<usize>,
    /// Fail (exit 3) when the smallest observed order is below this.
    #[arg(long)]
    min_order: Option<f64>,
    /// JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV `n,error,order` destination.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        Error::usage(format!(
            "{THREADS_ENV} must be a positive integer (got '{v}')"
        ))
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Ml(a) => cmd_ml(a),
        Command::Lfd(LfdCommand::Eval(a)) => cmd_lfd_eval(a),
        Command::Lfd(LfdCommand::VerifyEquivalence(a)) => cmd_equivalence(a),
        Command::Lfd(LfdCommand::VerifyReductions(a)) => {
            let r = reductions_suite(a.draws, a.rho, a.seed, a.tol)?;
            emit_suite(r, a.out.as_deref())
        }
        Command::Lfd(LfdCommand::LaplaceCheck(a)) => cmd_laplace(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Inverse(InverseCommand::Solve { spec, out_prefix }) => {
            cmd_inverse(&spec, &out_prefix)
        }
        Command::Convergence(a) => cmd_convergence(a),
    }
}

/// Writes through a temporary file in the destination directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(&text, out)
}

/// Report first, then the verdict.
fn emit_suite(r: SuiteReport, out: Option<&Path>) -> Result<()> {
    emit_json(&r, out)?;
    r.into_result().map(|_| ())
}

fn cmd_ml(a: MlArgs) -> Result<()> {
    if let Some(z) = a.z {
        return emit(&format!("{}\n", ml_eval(a.rho, a.nu, z)?), a.out.as_deref());
    }
    let path = a.batch.expect("clap requires --z or --batch");
    let text = crate::error::read_text(&path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "z" => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header 'z', found {other:?}"
            )))
        }
    }
    let mut out = String::from("z,value\n");
    for (i, line) in lines.enumerate() {
        let z: f64 = line
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        out.push_str(&format!("{z},{}\n", ml_eval(a.rho, a.nu, z)?));
    }
    emit(&out, a.out.as_deref())
}

/// `f` is a CSV path when it names a file or ends in `.csv`.
enum Input {
    Symbolic(MonomialSum),
    Sampled(GridFn),
}

fn read_input(f: &str, base: &Path) -> Result<Input> {
    let path = base.join(f);
    if f.ends_with(".csv") || path.is_file() {
        return Ok(Input::Sampled(GridFn::read_csv(&path)?));
    }
    Ok(Input::Symbolic(f.parse()?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LfdRunSpec {
    rho: f64,
    nus: Vec<f64>,
    f: String,
    #[serde(default)]
    checks: Vec<String>,
    #[serde(default)]
    limiting: bool,
    /// Laplace variables for the `laplace` check.
    #[serde(default)]
    s: Option<Vec<f64>>,
}

fn cmd_lfd_eval(a: LfdEvalArgs) -> Result<()> {
    let (p, f, checks, s_values, base) = match &a.spec {
        Some(path) => {
            let spec: LfdRunSpec = serde_json::from_str(&crate::error::read_text(path)?)?;
            let p = if spec.limiting {
                LevelParams::new_limiting(spec.rho, &spec.nus)?
            } else {
                LevelParams::new(spec.rho, &spec.nus)?
            };
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (p, spec.f, spec.checks, spec.s, base)
        }
        None => (
            a.level.params()?,
            a.f.clone().expect("clap requires --f or --spec"),
            Vec::new(),
            None,
            PathBuf::new(),
        ),
    };
    match read_input(&f, &base)? {
        Input::Sampled(g) => {
            if !checks.is_empty() {
                return Err(Error::usage("checks need a monomial-string f"));
            }
            emit(&lfd_grid(&g, &p)?.to_csv(), a.out.as_deref())
        }
        Input::Symbolic(f) => {
            let d = lfd_composed(&f, &p)?;
            let rl = lfd_rl_form(&f, &p)?;
            let c = lfd_boundary_constants(&f, &p)?;
            let mut report = json!({
                "rho": p.rho(),
                "nus": p.nus(),
                "xis": p.xis(),
                "f": f.to_string(),
                "lfd": d.to_string(),
                "rl_form": rl.to_string(),
                "boundary_constants": c.c,
                "equivalence_discrepancy": d.max_discrepancy(&rl),
            });
            let mut failure = None;
            for check in &checks {
                let value = match check.as_str() {
                    "equivalence" => json!(equivalence_discrepancy(&f, &p)?),
                    "fundamental" => serde_json::to_value(fundamental_check(&f, &p)?)?,
                    "laplace" => {
                        let s = s_values.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
                        serde_json::to_value(laplace_spot_check(&f, &p, &s)?)?
                    }
                    "reductions" => {
                        let r = reductions_suite(50, Some(p.rho()), DEFAULT_SEED, 1e-12)?;
                        if !r.passed {
                            failure = Some(r.max_discrepancy);
                        }
                        serde_json::to_value(r)?
                    }
                    other => {
                        return Err(Error::usage(format!(
                        "unknown check '{other}' (equivalence, fundamental, laplace, reductions)"
                    )))
                    }
                };
                report[check.as_str()] = value;
            }
            emit_json(&report, a.out.as_deref())?;
            if let (Some(n), Some(path)) = (a.n, a.csv_out.as_deref()) {
                let mut csv = String::from("t,value\n");
                let h = a.t_max / (n.max(2) - 1) as f64;
                for j in 0..n.max(2) {
                    let t = j as f64 * h;
                    if let Ok(v) = d.eval(t) {
                        if v.is_finite() {
                            csv.push_str(&format!("{t},{v}\n"));
                        }
                    }
                }
                write_atomic(path, csv.as_bytes())?;
            }
            match failure {
                Some(d) => Err(Error::numerical("reduction identities", d)),
                None => Ok(()),
            }
        }
    }
}

fn cmd_equivalence(a: LfdEquivalenceArgs) -> Result<()> {
    match &a.f {
        Some(f) => {
            let p = a.level.params()?;
            let f: MonomialSum = f.parse()?;
            let d = equivalence_discrepancy(&f, &p)?;
            let report = json!({
                "rho": p.rho(),
                "nus": p.nus(),
                "f": f.to_string(),
                "discrepancy": d,
                "tolerance": a.tol,
                "passed": d <= a.tol,
            });
            emit_json(&report, a.out.as_deref())?;
            if d <= a.tol {
                Ok(())
            } else {
                Err(Error::numerical("composed and RL forms disagree", d))
            }
        }
        None => emit_suite(equivalence_suite(a.cases, a.seed, a.tol)?, a.out.as_deref()),
    }
}

fn cmd_laplace(a: LaplaceArgs) -> Result<()> {
    let p = a.level.params()?;
    let f: MonomialSum = a.f.parse()?;
    let rows = laplace_spot_check(&f, &p, &a.s)?;
    let worst = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
    let report = json!({
        "rho": p.rho(),
        "nus": p.nus(),
        "f": f.to_string(),
        "rows": rows,
        "tolerance": a.tol,
        "passed": worst <= a.tol,
    });
    emit_json(&report, a.out.as_deref())?;
    if worst <= a.tol {
        Ok(())
    } else {
        Err(Error::numerical("Laplace transform mismatch", worst))
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let r = match a.suite {
        Suite::Semigroup => {
            semigroup_suite(a.cases.unwrap_or(100), a.seed, a.tol.unwrap_or(1e-11))?
        }
        Suite::Fundamental => {
            fundamental_suite(a.cases.unwrap_or(100), a.seed, a.tol.unwrap_or(1e-11))?
        }
        Suite::Biorthogonality => biorthogonality_suite(a.k_max, a.order, a.tol.unwrap_or(1e-10))?,
        Suite::Reductions => {
            reductions_suite(a.cases.unwrap_or(50), a.rho, a.seed, a.tol.unwrap_or(1e-12))?
        }
    };
    emit_suite(r, a.out.as_deref())
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_inverse(spec_path: &Path, prefix: &Path) -> Result<()> {
    let (file, base) = InverseSpecFile::read(spec_path)?;
    let spec = file.into_spec(&base)?;
    let sol = solve(&spec)?;

    let mut source = String::from("x,f\n");
    for i in 0..=200 {
        let x = i as f64 / 200.0;
        source.push_str(&format!("{x},{}\n", sol.source(x)?));
    }
    // t = 0 is left out: the state may be singular there
    let mut state = String::from("x,t,u\n");
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        for j in 1..=20 {
            let t = spec.t_final * j as f64 / 20.0;
            state.push_str(&format!("{x},{t},{}\n", sol.state(x, t)?));
        }
    }
    let report = json!({
        "rho": sol.params.rho(),
        "nus": sol.params.nus(),
        "T": sol.t_final,
        "source_coefficients": sol.source_coeffs,
        "diagnostics": sol.diagnostics,
    });
    let mut diag = serde_json::to_string_pretty(&report)?;
    diag.push('\n');

    write_atomic(&prefixed(prefix, "_source.csv"), source.as_bytes())?;
    write_atomic(&prefixed(prefix, "_state.csv"), state.as_bytes())?;
    write_atomic(&prefixed(prefix, "_diagnostics.json"), diag.as_bytes())?;
    Ok(())
}

fn cmd_convergence(a: ConvergenceArgs) -> Result<()> {
    let op = match a.op {
        OpArg::J => ConvergenceOp::Integral,
        OpArg::D => ConvergenceOp::Derivative,
        OpArg::Lfd => ConvergenceOp::Level,
    };
    let r = convergence_study(op, a.alpha, a.rho, &a.nus, &a.grids)?;
    if let Some(path) = a.csv_out.as_deref() {
        let mut csv = String::from("n,error,order\n");
        for row in &r.rows {
            let order = row.order.map(|o| o.to_string()).unwrap_or_default();
            csv.push_str(&format!("{},{},{order}\n", row.n, row.error));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    emit_json(&r, a.out.as_deref())?;
    match (a.min_order, r.min_order) {
        (Some(want), Some(got)) if !(got >= want) => Err(Error::numerical(
            format!("observed order below {want}"),
            got,
        )),
        _ => Ok(()),
    }
}

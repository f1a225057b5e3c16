//! Two-parameter Mittag-Leffler function `E_{ρ,ν}(z) = Σ z^k / Γ(ρk + ν)`.
//!
//! Three evaluation routes:
//! - the power series, where it has no cancellation (`|z| ≤ 1`, or `z > 0`
//!   with a moderate number of terms);
//! - the asymptotic expansion `-Σ z^{-k} / Γ(ν - ρk)` for large negative `z`
//!   and `ρ < 1`, when its smallest term is below the target accuracy;
//! - numerical inversion of the Laplace transform `s^{ρ-ν} / (s^ρ - z)` on
//!   an optimal parabolic contour (Garrappa, SIAM J. Numer. Anal. 2015),
//!   plus residues of the poles the contour leaves out.
//!
//! The elementary cases `E_{1,1} = exp`, `E_{1,2}(z) = (e^z - 1)/z`,
//! `E_{2,1}(z) = cosh √z` and `E_{2,2}(z) = sinh √z / √z` are evaluated
//! directly: the contour only gives absolute accuracy, which is no
//! relative accuracy at all for `e^{-30}`.
//!
//! The series is not used on `-40 ≤ z < -1`: there its terms grow to
//! `e^{|z|^{1/ρ}}` before cancelling, which loses every significant digit
//! near the upper end (`E_{1,1}(-30)` has terms near `10^{12}`).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gamma::{gamma, ln_gamma, rgamma};
use crate::grid_calculus::{GridFn, PowerTerm};

/// Relative accuracy targeted by every route.
pub const TARGET_ACCURACY: f64 = 1e-14;

const LOG_EPSILON: f64 = -34.538776394910684; // ln(1e-15)
const LOG_EPS: f64 = -36.04365338911715; // ln(f64::EPSILON)

/// Which route produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlMethod {
    Elementary,
    Series,
    Asymptotic,
    Contour,
}

fn check_params(rho: f64, nu: f64, z: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("rho = {rho} must be > 0")));
    }
    if !nu.is_finite() || !z.is_finite() {
        return Err(Error::domain("nu and z must be finite"));
    }
    Ok(())
}

/// `E_{rho,nu}(z)` for real `z`, `rho > 0`.
pub fn ml_eval(rho: f64, nu: f64, z: f64) -> Result<f64> {
    ml_eval_with_method(rho, nu, z).map(|(v, _)| v)
}

pub fn ml_eval_with_method(rho: f64, nu: f64, z: f64) -> Result<(f64, MlMethod)> {
    check_params(rho, nu, z)?;
    if z == 0.0 {
        return Ok((rgamma(nu), MlMethod::Series));
    }
    if let Some(v) = elementary(rho, nu, z) {
        return Ok((v, MlMethod::Elementary));
    }
    if z.abs() <= 1.0 || (z > 0.0 && z.powf(1.0 / rho) <= 30.0) {
        if let Some(v) = series(rho, nu, z) {
            return Ok((v, MlMethod::Series));
        }
    }
    if z < -40.0 && rho < 1.0 {
        if let Some(v) = asymptotic(rho, nu, z) {
            return Ok((v, MlMethod::Asymptotic));
        }
    }
    let v = contour(rho, nu, z)?;
    Ok((v, MlMethod::Contour))
}

fn elementary(rho: f64, nu: f64, z: f64) -> Option<f64> {
    match (rho, nu) {
        (1.0, 1.0) => Some(z.exp()),
        (1.0, 2.0) => Some(z.exp_m1() / z),
        (2.0, 1.0) if z < 0.0 => Some((-z).sqrt().cos()),
        (2.0, 1.0) => Some(z.sqrt().cosh()),
        (2.0, 2.0) if z < 0.0 => Some((-z).sqrt().sin() / (-z).sqrt()),
        (2.0, 2.0) => Some(z.sqrt().sinh() / z.sqrt()),
        _ => None,
    }
}

/// Power series with compensated summation; `None` if it fails to settle.
fn series(rho: f64, nu: f64, z: f64) -> Option<f64> {
    let ln_abs = z.abs().ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut small_run = 0;
    for k in 0..5000 {
        let kf = k as f64;
        let arg = rho * kf + nu;
        let term = match crate::gamma::nonpositive_integer(arg) {
            Some(_) => 0.0,
            None => {
                let sign_gamma = gamma_sign(arg);
                let sign_z = if z < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
                sign_z * sign_gamma * (kf * ln_abs - ln_gamma(arg)).exp()
            }
        };
        // Kahan summation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k > 2 && arg > 1.0 && term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            small_run += 1;
            if small_run >= 3 {
                return Some(sum);
            }
        } else {
            small_run = 0;
        }
    }
    None
}

fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 || (x.floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Asymptotic expansion for `z → -∞`, `0 < rho < 1`. Truncated where the
/// envelope `|z|^{-k} Γ(1 - nu + rho k) / π` of the terms is smallest;
/// `None` when that bound exceeds the target accuracy.
fn asymptotic(rho: f64, nu: f64, z: f64) -> Option<f64> {
    let ln_abs = z.abs().ln();
    let mut sum = 0.0;
    let mut zk = 1.0;
    let mut prev_env = f64::INFINITY;
    for k in 1..4000 {
        let kf = k as f64;
        let a = 1.0 - nu + rho * kf;
        let env = if a > 0.0 {
            (ln_gamma(a) - kf * ln_abs).exp() / PI
        } else {
            f64::INFINITY
        };
        if env > prev_env {
            break;
        }
        zk /= z;
        sum -= zk * rgamma(nu - rho * kf);
        if env.is_finite() {
            prev_env = env;
        }
        if env <= 1e-18 * sum.abs() {
            break;
        }
    }
    (prev_env <= 1e-2 * TARGET_ACCURACY * sum.abs()).then_some(sum)
}

/// Laplace inversion on the optimal parabolic contour `z(u) = μ(iu + 1)^2`.
fn contour(alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    let lam = Complex64::new(lambda, 0.0);
    let theta = lam.arg();
    let kmin = (-alpha / 2.0 - theta / (2.0 * PI)).ceil() as i64;
    let kmax = (alpha / 2.0 - theta / (2.0 * PI)).floor() as i64;
    let abs_root = lambda.abs().powf(1.0 / alpha);
    let mut poles: Vec<(f64, Complex64)> = (kmin..=kmax)
        .map(|k| {
            let s = Complex64::from_polar(abs_root, (theta + 2.0 * PI * k as f64) / alpha);
            ((s.re + s.norm()) / 2.0, s)
        })
        .filter(|(phi, _)| *phi > 1e-15)
        .collect();
    poles.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut s_star = vec![Complex64::new(0.0, 0.0)];
    let mut phi = vec![0.0];
    for (p, s) in &poles {
        s_star.push(*s);
        phi.push(*p);
    }
    let j1 = s_star.len();
    let mut p = vec![(-2.0 * (alpha - beta + 1.0)).max(0.0)];
    p.extend(std::iter::repeat_n(1.0, j1 - 1));
    let mut q = vec![1.0; j1 - 1];
    q.push(f64::INFINITY);
    phi.push(f64::INFINITY);

    let admissible: Vec<usize> = (0..j1)
        .filter(|&j| phi[j] < (LOG_EPSILON - LOG_EPS) && phi[j] < phi[j + 1])
        .collect();
    if admissible.is_empty() {
        return Err(Error::numerical(
            "no admissible integration region",
            f64::INFINITY,
        ));
    }

    let mut log_epsilon = LOG_EPSILON;
    let (mu, h, n_nodes, region) = loop {
        let mut best: Option<(f64, f64, f64, usize)> = None;
        for &j in &admissible {
            let (mu, h, n) = if j + 1 < j1 {
                optimal_param_rb(phi[j], phi[j + 1], p[j], q[j], log_epsilon)
            } else {
                optimal_param_ru(phi[j], p[j], log_epsilon)
            };
            if best.is_none_or(|b| n < b.2) {
                best = Some((mu, h, n, j));
            }
        }
        let b = best.unwrap();
        if b.2 > 200.0 {
            log_epsilon += 10f64.ln();
            if log_epsilon > -2.0 {
                return Err(Error::numerical(
                    "contour parameters do not reach a usable accuracy",
                    f64::INFINITY,
                ));
            }
        } else {
            break b;
        }
    };

    let n = n_nodes as i64;
    let mut integral = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    for k in -n..=n {
        let u = h * k as f64;
        let zc = mu * (i * u + 1.0).powi(2);
        let zd = Complex64::new(-2.0 * mu * u, 2.0 * mu);
        let f = zc.powf(alpha - beta) / (zc.powf(alpha) - lam) * zd;
        integral += zc.exp() * f;
    }
    integral *= h / (2.0 * PI * i);

    let mut residues = Complex64::new(0.0, 0.0);
    for s in &s_star[region + 1..] {
        residues += s.powf(1.0 - beta) * s.exp() / alpha;
    }
    let e = integral + residues;
    if !e.re.is_finite() {
        return Err(Error::numerical(
            "contour quadrature overflowed",
            f64::INFINITY,
        ));
    }
    Ok(e.re)
}

/// Parameters for a region bounded by two singularities.
fn optimal_param_rb(
    phi_j: f64,
    phi_j1: f64,
    pj: f64,
    qj: f64,
    log_epsilon: f64,
) -> (f64, f64, f64) {
    const FAC: f64 = 1.01;
    let f_max = (log_epsilon - LOG_EPS).exp();
    let sq_j = phi_j.sqrt();
    let threshold = 2.0 * (log_epsilon - LOG_EPS).sqrt();
    let sq_j1 = phi_j1.sqrt().min(threshold - sq_j);

    let mut f_bar = 1.0;
    let (sqbar_j, sqbar_j1) = if pj < 1e-14 && qj < 1e-14 {
        (sq_j, sq_j1)
    } else if pj < 1e-14 {
        let f_min = if sq_j > 0.0 {
            FAC * (sq_j / (sq_j1 - sq_j)).powf(qj)
        } else {
            FAC
        };
        if f_min >= f_max {
            return (0.0, 0.0, f64::INFINITY);
        }
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fq = f_bar.powf(-1.0 / qj);
        (sq_j, (2.0 * sq_j1 - fq * sq_j) / (2.0 + fq))
    } else if qj < 1e-14 {
        let f_min = FAC * (sq_j1 / (sq_j1 - sq_j)).powf(pj);
        if f_min >= f_max {
            return (0.0, 0.0, f64::INFINITY);
        }
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        ((2.0 * sq_j + fp * sq_j1) / (2.0 - fp), sq_j1)
    } else {
        let f_min = FAC * (sq_j + sq_j1) / (sq_j1 - sq_j).powf(pj.max(qj));
        if f_min >= f_max {
            return (0.0, 0.0, f64::INFINITY);
        }
        let f_min = f_min.max(1.5);
        f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        let fq = f_bar.powf(-1.0 / qj);
        let w = -phi_j1 / log_epsilon;
        let den = 2.0 + w - (1.0 + w) * fp + fq;
        (
            ((2.0 + w + fq) * sq_j + fp * sq_j1) / den,
            (-(1.0 + w) * fq * sq_j + (2.0 + w - (1.0 + w) * fp) * sq_j1) / den,
        )
    };
    let log_epsilon = log_epsilon - f_bar.ln();
    let w = -sqbar_j1 * sqbar_j1 / log_epsilon;
    let mu = (((1.0 + w) * sqbar_j + sqbar_j1) / (2.0 + w)).powi(2);
    let h = -2.0 * PI / log_epsilon * (sqbar_j1 - sqbar_j) / ((1.0 + w) * sqbar_j + sqbar_j1);
    let n = ((1.0 - log_epsilon / mu).sqrt() / h).ceil();
    if !(h > 0.0) || !n.is_finite() {
        return (0.0, 0.0, f64::INFINITY);
    }
    (mu, h, n)
}

/// Parameters for the unbounded region right of the last singularity.
fn optimal_param_ru(phi_j: f64, pj: f64, log_epsilon: f64) -> (f64, f64, f64) {
    let sq_phi = phi_j.sqrt();
    let mut phibar = if phi_j > 0.0 { phi_j * 1.01 } else { 0.01 };
    let mut sq_phibar = phibar.sqrt();
    const F_MIN: f64 = 1.0;
    const F_MAX: f64 = 10.0;
    const F_TAR: f64 = 5.0;
    let (mut n, mut a, mut sq_mu);
    let mut iterations = 0;
    loop {
        let phi_t = phibar;
        let log_eps_phi_t = log_epsilon / phi_t;
        n = (phi_t / PI * (1.0 - 3.0 * log_eps_phi_t / 2.0 + (1.0 - 2.0 * log_eps_phi_t).sqrt()))
            .ceil();
        a = PI * n / phi_t;
        sq_mu = sq_phibar * (4.0 - a).abs() / (7.0 - (1.0 + 12.0 * a).sqrt()).abs();
        let fbar = ((sq_phibar - sq_phi) / sq_mu).powf(-pj);
        iterations += 1;
        if pj < 1e-14 || (F_MIN < fbar && fbar < F_MAX) || iterations > 100 {
            break;
        }
        sq_phibar = F_TAR.powf(-1.0 / pj) * sq_mu + sq_phi;
        phibar = sq_phibar * sq_phibar;
    }
    let mut mu = sq_mu * sq_mu;
    let mut h = (-3.0 * a - 2.0 + 2.0 * (1.0 + 12.0 * a).sqrt()) / (4.0 - a) / n;

    let threshold = log_epsilon - LOG_EPS;
    if mu > threshold {
        let q = if pj.abs() < 1e-14 {
            0.0
        } else {
            F_TAR.powf(-1.0 / pj) * mu.sqrt()
        };
        let phibar = (q + phi_j.sqrt()).powi(2);
        if phibar < threshold {
            let w = (LOG_EPS / (LOG_EPS - log_epsilon)).sqrt();
            let u = (-phibar / LOG_EPS).sqrt();
            mu = threshold;
            n = (w * log_epsilon / 2.0 / PI / (u * w - 1.0)).ceil();
            h = (LOG_EPS / (LOG_EPS - log_epsilon)).sqrt() / n;
        } else {
            return (0.0, 0.0, f64::INFINITY);
        }
    }
    (mu, h, n)
}

/// Three-parameter (Prabhakar) function with `γ = 2`:
/// `E²_{ρ,β}(z) = [E_{ρ,β-1}(z) + (ρ - β + 1) E_{ρ,β}(z)] / ρ`.
pub fn ml2_eval(rho: f64, beta: f64, z: f64) -> Result<f64> {
    let a = ml_eval(rho, beta - 1.0, z)?;
    let b = ml_eval(rho, beta, z)?;
    Ok((a + (rho - beta + 1.0) * b) / rho)
}

/// `t^{beta-1} E_{rho,beta}(-lambda2 t^rho)` at a single `t > 0`.
pub fn ml_kernel_at(rho: f64, beta: f64, lambda2: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(if beta > 1.0 {
            0.0
        } else if beta == 1.0 {
            1.0
        } else {
            rgamma(beta).signum() * f64::INFINITY
        });
    }
    Ok(t.powf(beta - 1.0) * ml_eval(rho, beta, -lambda2 * t.powf(rho))?)
}

type KernelKey = (u64, u64, u64, u64, usize);

fn kernel_cache() -> &'static Mutex<HashMap<KernelKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<KernelKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Samples of `t^{beta-1} E_{rho,beta}(-lambda2 t^rho)` on the uniform grid
/// with `n` nodes over `[0, t_max]`, memoised across calls and threads.
/// Node 0 holds the limit, `±∞` when `beta < 1`.
pub fn ml_kernel_samples(
    rho: f64,
    beta: f64,
    lambda2: f64,
    t_max: f64,
    n: usize,
) -> Result<Arc<Vec<f64>>> {
    check_params(rho, beta, lambda2)?;
    if n < 2 || !(t_max > 0.0) {
        return Err(Error::usage("kernel grid needs n ≥ 2 and t_max > 0"));
    }
    let key = (
        rho.to_bits(),
        beta.to_bits(),
        lambda2.to_bits(),
        t_max.to_bits(),
        n,
    );
    if let Some(v) = kernel_cache().lock().unwrap().get(&key) {
        return Ok(Arc::clone(v));
    }
    let h = t_max / (n - 1) as f64;
    let samples: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let t = if j + 1 == n { t_max } else { j as f64 * h };
            ml_kernel_at(rho, beta, lambda2, t)
        })
        .collect();
    let samples = Arc::new(samples?);
    kernel_cache()
        .lock()
        .unwrap()
        .insert(key, Arc::clone(&samples));
    Ok(samples)
}

/// The kernel as a grid function. For `beta < 1` the leading singular term
/// `t^{beta-1} / Γ(beta)` is carried exactly.
pub fn ml_kernel(rho: f64, beta: f64, lambda2: f64, t_max: f64, n: usize) -> Result<GridFn> {
    let s = ml_kernel_samples(rho, beta, lambda2, t_max, n)?;
    if beta >= 1.0 || (beta - 1.0).abs() <= 1e-15 {
        return GridFn::from_parts(s.to_vec(), Vec::new(), t_max);
    }
    let lead = PowerTerm {
        coeff: 1.0 / gamma(beta),
        alpha: beta - 1.0,
    };
    let h = t_max / (n - 1) as f64;
    let mut regular: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(j, v)| {
            if j == 0 {
                0.0
            } else {
                v - lead.eval(j as f64 * h)
            }
        })
        .collect();
    // next series term is -lambda2 t^{beta-1+rho} / Γ(beta+rho)
    regular[0] = if beta - 1.0 + rho > 0.0 {
        0.0
    } else {
        regular[1]
    };
    GridFn::from_parts(regular, vec![lead], t_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// The contour route alone on the exponential: absolute accuracy only.
    #[test]
    fn contour_without_elementary_shortcut() {
        for i in 0..=58 {
            let z = -30.0 + 0.5 * i as f64;
            let v = contour(1.0, 1.0, z).unwrap();
            assert!((v - z.exp()).abs() < 1e-14, "z={z}");
        }
        assert_eq!(
            ml_eval_with_method(1.0, 1.0, -3.0).unwrap().1,
            MlMethod::Elementary
        );
    }

    #[test]
    fn elementary_cases() {
        for &z in &[-50.0, -30.0, -5.0, -0.5, 0.3, 2.0, 10.0] {
            let e = ml_eval(1.0, 1.0, z).unwrap();
            assert!(
                (e - f64::exp(z)).abs() < 1e-12 * f64::exp(z).max(1e-3),
                "z={z} {e}"
            );
        }
        for &z in &[-20.0f64, -3.0, 1.5] {
            let e = ml_eval(2.0, 1.0, z).unwrap();
            let exact = if z < 0.0 {
                (-z).sqrt().cos()
            } else {
                z.sqrt().cosh()
            };
            assert!((e - exact).abs() < 1e-12, "z={z}");
        }
        // E_{1,2}(z) = (e^z - 1)/z
        for &z in &[-45.0f64, -7.0, 0.7] {
            let e = ml_eval(1.0, 2.0, z).unwrap();
            assert!(rel(e, z.exp_m1() / z) < 1e-12);
        }
    }

    #[test]
    fn series_and_contour_agree_in_unit_disk() {
        let a = series(0.5, 1.0, -0.8).unwrap();
        let b = contour(0.5, 1.0, -0.8).unwrap();
        assert!(rel(a, b) < 1e-13);
    }

    #[test]
    fn routes_agree() {
        for &(rho, nu, z) in &[(0.6, 1.6, -60.0), (0.8, 0.8, -100.0), (0.3, 1.0, -45.0)] {
            let a = asymptotic(rho, nu, z).unwrap();
            let b = contour(rho, nu, z).unwrap();
            assert!(rel(a, b) < 1e-12, "{rho} {nu} {z}: {a} {b}");
        }
    }

    #[test]
    fn prabhakar_identity_matches_series() {
        // E²_{ρ,β}(z) = Σ (k+1) z^k / Γ(ρk+β)
        let (rho, beta, z) = (0.7, 1.9, -0.6f64);
        let direct: f64 = (0..80)
            .map(|k| (k as f64 + 1.0) * z.powi(k) * rgamma(rho * k as f64 + beta))
            .sum();
        assert!(rel(ml2_eval(rho, beta, z).unwrap(), direct) < 1e-12);
    }

    #[test]
    fn kernel_cache_returns_shared_samples() {
        let a = ml_kernel_samples(0.5, 1.5, 4.0, 1.0, 33).unwrap();
        let b = ml_kernel_samples(0.5, 1.5, 4.0, 1.0, 33).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a[0], 0.0);
        let k = ml_kernel(0.5, 0.5, 4.0, 1.0, 33).unwrap();
        assert!(k.has_singular_origin());
    }

    #[test]
    fn rejects_bad_order() {
        assert!(ml_eval(0.0, 1.0, 1.0).is_err());
        assert!(ml_eval(-1.0, 1.0, 1.0).is_err());
        assert!(ml_eval(0.5, f64::NAN, 1.0).is_err());
    }
}

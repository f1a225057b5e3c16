//! Quadrature rules shared by the spectral projections and the Laplace
//! spot checks.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `order`-point rule by Newton iteration on P_n.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// ∫_a^b f(x) dx.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of a semi-infinite integral.
#[derive(Debug, Clone, Copy)]
pub struct HalfLineIntegral {
    pub value: f64,
    /// Difference between the last two refinement levels.
    pub error_estimate: f64,
}

/// ∫_0^∞ f(t) dt by exp-sinh (double exponential) quadrature,
/// t = exp(π/2 · sinh u). Integrable endpoint singularities at 0 and
/// exponential decay at ∞ are both resolved at double-exponential rate.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, tol: f64) -> HalfLineIntegral {
    let u_max = 6.7;
    let term = |u: f64| -> f64 {
        let s = 0.5 * PI * u.sinh();
        let t = s.exp();
        if t == 0.0 || !t.is_finite() {
            return 0.0;
        }
        let v = f(t);
        if v == 0.0 {
            return 0.0;
        }
        let r = v * t * 0.5 * PI * u.cosh();
        if r.is_finite() {
            r
        } else {
            0.0
        }
    };
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    loop {
        let u = k as f64 * h;
        if u > u_max {
            break;
        }
        sum += term(u) + term(-u);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut error = f64::INFINITY;
    for _ in 0..8 {
        h *= 0.5;
        // add the new midpoints
        let mut k = 1;
        loop {
            let u = k as f64 * h;
            if u > u_max {
                break;
            }
            sum += term(u) + term(-u);
            k += 2;
        }
        let refined = sum * h;
        error = (refined - estimate).abs();
        estimate = refined;
        if error <= tol * estimate.abs().max(1e-300) {
            break;
        }
    }
    HalfLineIntegral {
        value: estimate,
        error_estimate: error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(10);
        let v = gl.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() / v < 1e-14);
        let total: f64 = gl.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn high_order_rule_is_stable() {
        let gl = GaussLegendre::new(256);
        let v = gl.integrate(0.0, 1.0, |x| (40.0 * PI * x).cos().powi(2));
        assert!((v - 0.5).abs() < 1e-13);
    }

    #[test]
    fn exp_sinh_handles_endpoint_singularity() {
        // ∫ t^{-1/2} e^{-t} = √π
        let r = exp_sinh(|t| t.powf(-0.5) * (-t).exp(), 1e-13);
        assert!((r.value - PI.sqrt()).abs() < 1e-12, "{:?}", r);
        // ∫ t^2 e^{-2t} = 2/8
        let r = exp_sinh(|t| t * t * (-2.0 * t).exp(), 1e-13);
        assert!((r.value - 0.25).abs() < 1e-13);
    }
}

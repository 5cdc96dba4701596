//! Gauss–Legendre quadrature with cached node tables.
//!
//! Nodes and weights on [−1, 1] are computed once per order by Newton
//! iteration on the Legendre polynomial (initialized with the Chebyshev
//! asymptotic root estimate) and cached process-wide.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss–Legendre rule on [−1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be at least 1");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            // Chebyshev estimate of the i-th root, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                    // One extra Newton step after convergence for full
                    // double-precision accuracy of node and weight.
                    let mut q0 = 1.0;
                    let mut q1 = x;
                    for k in 2..=n {
                        let kf = k as f64;
                        let q2 = ((2.0 * kf - 1.0) * x * q1 - (kf - 1.0) * q0) / kf;
                        q0 = q1;
                        q1 = q2;
                    }
                    let p = if n == 1 { x } else { q1 };
                    let pm1 = if n == 1 { 1.0 } else { q0 };
                    dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                    x -= p / dp;
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes on [−1, 1], ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`nodes`](Self::nodes).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<GaussLegendre>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The n-point rule, computed on first use and cached.
pub fn rule(n: usize) -> Arc<GaussLegendre> {
    let mut guard = cache().lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussLegendre::compute(n)))
        .clone()
}

/// ∫_lo^hi f(x) dx by the n-point Gauss–Legendre rule.
///
/// Exact for polynomials of degree ≤ 2n − 1; an empty interval integrates
/// to 0. `lo > hi` yields the signed integral.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let r = rule(n);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (&x, &w) in r.nodes().iter().zip(r.weights()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// The n node positions of [`integrate`] mapped onto [lo, hi], with weights
/// scaled to the interval. Used when a consumer must evaluate at exactly the
/// quadrature abscissae (e.g. pathwise time integration).
pub fn mapped_rule(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let r = rule(n);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let nodes = r.nodes().iter().map(|&x| mid + half * x).collect();
    let weights = r.weights().iter().map(|&w| w * half).collect();
    (nodes, weights)
}

//! Composite Gauss-Legendre quadrature.
//!
//! A single 64-node rule integrates polynomials up to degree 127 exactly,
//! which covers every built-in kernel and its square. For non-polynomial
//! integrands ([`integrate`]) the interval is split into 1, 2, 4, ... panels
//! until two successive refinements agree within the requested absolute
//! tolerance.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of nodes per panel.
pub const NODES: usize = 64;

/// Nodes and weights of the `NODES`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn rule() -> (&'static [f64], &'static [f64]) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = RULE.get_or_init(|| gauss_legendre(NODES));
    (n, w)
}

/// Gauss-Legendre nodes/weights on `[-1,1]` by Newton iteration on the
/// Legendre polynomial P_n, starting from the Chebyshev-based estimate.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d2) = legendre_with_derivative(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_with_derivative(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Evaluates (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

/// One 64-node Gauss-Legendre pass over `[a, b]`.
pub fn fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

fn composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| fixed(f, a + k as f64 * width, a + (k + 1) as f64 * width))
        .sum()
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by panel doubling.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels = 1;
    let mut prev = composite(&f, a, b, panels);
    // 2^14 panels of 64 nodes is far beyond anything the smooth kernel-window
    // integrands in this crate need.
    while panels <= 1 << 14 {
        panels *= 2;
        let next = composite(&f, a, b, panels);
        if (next - prev).abs() <= tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureDiverged { a, b, tol })
}

//! The smoothed empirical-likelihood ratio
//! R_n(θ,C,h,z) = max{ Π n·p_i : Σ p_i·w_i = 0, p_i ≥ 0, Σ p_i = 1 }
//! with constraint weights w_i = K((Z_i−z)/h)(1_C(Y_i) − θ).
//!
//! When the weights take both signs (the convex hull condition) the maximum
//! is attained at p_i = (1/n)/(1 + λ·w_i), where the Lagrange multiplier λ
//! is the unique root of Σ w_i/(1 + λ·w_i) = 0. The root is isolated in the
//! open interval where every 1 + λ·w_i stays positive and the equation's
//! left side is strictly decreasing there, so a bisection-safeguarded Newton
//! iteration from λ = 0 converges globally.

use crate::error::{Error, Result};
use crate::estimators::el_weights;
use crate::kernels::Kernel;
use crate::model::{centring_m, require_1d, Cell, Dataset, SimulationModel};

/// Absolute tolerance on confidence-interval endpoints.
const THETA_TOL: f64 = 1e-8;

/// A solved EL program for one (θ, C, h, z).
#[derive(Debug, Clone)]
pub struct ELSolution {
    /// Lagrange multiplier; 0 when the hull condition fails.
    pub lambda: f64,
    /// log R_n ≤ 0; `f64::NEG_INFINITY` when the hull condition fails.
    pub log_r: f64,
    /// Probability weights p_i; uniform 1/n when the hull condition fails.
    pub p: Vec<f64>,
    pub hull_ok: bool,
    /// Newton/bisection iterations spent on the λ-equation.
    pub iterations: usize,
}

impl ELSolution {
    fn hull_failure(n: usize) -> Self {
        ELSolution {
            lambda: 0.0,
            log_r: f64::NEG_INFINITY,
            p: vec![1.0 / n as f64; n],
            hull_ok: false,
            iterations: 0,
        }
    }
}

/// The superlevel set {θ : R_n(θ) ≥ c}, an interval around the
/// kernel-weighted sample proportion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub c: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }
}

/// True iff both signs occur among the weights, so that 0 lies strictly
/// inside the convex hull of {w_i}.
pub fn convex_hull_check(w: &[f64]) -> bool {
    w.iter().any(|&v| v > 0.0) && w.iter().any(|&v| v < 0.0)
}

/// Solves Σ w_i/(1 + λ·w_i) = 0 for the unique admissible λ.
///
/// The iteration drives the residual to machine scale, far below the
/// 1e-10·Σ|w_i| contract, so that the implied p_i sum to one within 1e-12.
pub fn solve_lambda(w: &[f64]) -> Result<f64> {
    solve_lambda_traced(w).map(|(lambda, _)| lambda)
}

fn solve_lambda_traced(w: &[f64]) -> Result<(f64, usize)> {
    if !convex_hull_check(w) {
        return Err(Error::HullViolated);
    }
    let w_max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w_min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    // admissible open interval for 1 + λw_i > 0
    let lo_bound = -1.0 / w_max;
    let hi_bound = -1.0 / w_min;

    // residual and its derivative
    let eval = |lambda: f64| -> (f64, f64, f64) {
        let mut psi = 0.0;
        let mut dpsi = 0.0;
        let mut scale = 0.0;
        for &wi in w {
            if wi == 0.0 {
                continue;
            }
            let denom = 1.0 + lambda * wi;
            let term = wi / denom;
            psi += term;
            dpsi -= term * term;
            scale += term.abs();
        }
        (psi, dpsi, scale)
    };

    let margin = 1e-12 * (hi_bound - lo_bound);
    let mut a = lo_bound + margin;
    let mut b = hi_bound - margin;
    let mut lambda = 0.0;
    let (mut psi, mut dpsi, mut scale) = eval(lambda);
    let mut best = (lambda, psi.abs());
    let mut iterations = 0usize;

    while psi.abs() > f64::EPSILON * scale && iterations < 200 {
        iterations += 1;
        // ψ is decreasing: a root lies where ψ changes from + to −
        if psi > 0.0 {
            a = lambda;
        } else {
            b = lambda;
        }
        let newton = lambda - psi / dpsi;
        lambda = if newton.is_finite() && a < newton && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a <= f64::EPSILON * (a.abs() + b.abs() + f64::MIN_POSITIVE) {
            break;
        }
        (psi, dpsi, scale) = eval(lambda);
        if psi.abs() < best.1 {
            best = (lambda, psi.abs());
        }
    }
    Ok((best.0, iterations))
}

/// Builds an [`ELSolution`] from raw constraint weights.
///
/// Zero weights drop out of the λ-equation and carry p_i = 1/n; a hull
/// failure is encoded in the result rather than raised.
pub fn el_from_weights(w: &[f64]) -> ELSolution {
    let n = w.len();
    if !convex_hull_check(w) {
        return ELSolution::hull_failure(n);
    }
    let (lambda, iterations) =
        solve_lambda_traced(w).expect("hull condition checked above");
    let inv_n = 1.0 / n as f64;
    let mut log_r = 0.0;
    let p = w
        .iter()
        .map(|&wi| {
            let denom = 1.0 + lambda * wi;
            log_r -= denom.ln();
            inv_n / denom
        })
        .collect();
    ELSolution {
        lambda,
        log_r,
        p,
        hull_ok: true,
        iterations,
    }
}

/// log R_n(θ, C, h, z): builds the constraint weights and solves the EL
/// program. Hull failure is encoded in the result (log_r = −∞).
pub fn log_ratio(
    data: &Dataset,
    cell: &Cell,
    theta: f64,
    kernel: &Kernel,
) -> Result<ELSolution> {
    let w = el_weights(data, cell, theta, kernel)?;
    Ok(el_from_weights(&w))
}

/// The normalized statistic −log R_n(m(C,h,z), C, h, z) / log(h^{−d}),
/// with θ set to the model's centring parameter. +∞ when the hull fails.
pub fn theorem3_statistic(
    data: &Dataset,
    cell: &Cell,
    model: &SimulationModel,
    kernel: &Kernel,
) -> Result<f64> {
    if !(0.0 < cell.h && cell.h < 1.0) {
        return Err(Error::InvalidBandwidth(cell.h));
    }
    let theta = centring_m(model, cell, kernel)?;
    let solution = log_ratio(data, cell, theta, kernel)?;
    if !solution.hull_ok {
        return Ok(f64::INFINITY);
    }
    let d = kernel.dim() as i32;
    Ok(-solution.log_r / (1.0 / cell.h.powi(d)).ln())
}

/// The confidence interval I_n(C,h,z,c) = {θ : R_n(θ) ≥ c}, located by
/// bisection from the kernel-weighted sample proportion outward.
pub fn confidence_interval(
    data: &Dataset,
    cell: &Cell,
    c: f64,
    kernel: &Kernel,
) -> Result<ConfidenceInterval> {
    require_1d(kernel)?;
    if !(0.0 < c && c < 1.0) {
        return Err(Error::InvalidCriticalValue(c));
    }
    let Cell { t, z, h } = *cell;
    let mut k_sum = 0.0;
    let mut hit_sum = 0.0;
    for (y, zi) in data.pairs() {
        let k = kernel.eval1((zi - z) / h);
        k_sum += k;
        hit_sum += k * f64::from((0.0..=t).contains(&y));
    }
    if k_sum <= 0.0 {
        return Err(Error::EmptyWindow { z, h });
    }
    let theta_hat = hit_sum / k_sum;
    if !(0.0 < theta_hat && theta_hat < 1.0) {
        // every admissible θ needs in-window observations on both sides
        return Err(Error::NoAdmissibleTheta);
    }

    let target = c.ln();
    let excess = |theta: f64| -> Result<f64> {
        Ok(log_ratio(data, cell, theta, kernel)?.log_r - target)
    };
    // R_n is 1 at the weighted proportion and decays to 0 towards 0 and 1,
    // so each endpoint is bracketed.
    let lo = bisect_endpoint(&excess, 0.0, theta_hat, true)?;
    let hi = bisect_endpoint(&excess, theta_hat, 1.0, false)?;
    Ok(ConfidenceInterval { lo, hi, c })
}

/// Bisects for the boundary of {θ : excess(θ) ≥ 0} inside [a, b]; the set
/// touches `b` when `lower` and `a` otherwise.
fn bisect_endpoint(
    excess: &impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    lower: bool,
) -> Result<f64> {
    while b - a > THETA_TOL {
        let mid = 0.5 * (a + b);
        let inside = excess(mid)? >= 0.0;
        if inside == lower {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

//! Parzen-Rosenblatt density estimation with the Epanechnikov kernel and
//! least-squares cross-validation bandwidth, used to turn the replication
//! sup-statistic values into density curves.
//!
//! The density step uses the standard Epanechnikov kernel on `[-1, 1]` (no
//! half-width support convention applies here).

use crate::error::{Error, Result};
use crate::quad;

/// Standard Epanechnikov kernel (3/4)(1 − u²) on `[-1, 1]`.
fn epanechnikov_std(u: f64) -> f64 {
    if !(-1.0..=1.0).contains(&u) {
        0.0
    } else {
        0.75 * (1.0 - u * u)
    }
}

/// A kernel density estimate evaluated on a fixed grid.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoid mass of the estimate over its grid.
    pub fn trapezoid_mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, f)| 0.5 * (f[0] + f[1]) * (x[1] - x[0]))
            .sum()
    }
}

fn density_at(xs: &[f64], h: f64, x: f64) -> f64 {
    let m = xs.len() as f64;
    xs.iter()
        .map(|&xj| epanechnikov_std((x - xj) / h))
        .sum::<f64>()
        / (m * h)
}

/// f̂(x) = (1/(m·h)) Σ_j K_E((x − x_j)/h) evaluated on the grid.
pub fn pr_density(xs: &[f64], h: f64, grid: &[f64]) -> Result<DensityEstimate> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    let values = grid.iter().map(|&x| density_at(xs, h, x)).collect();
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        bandwidth: h,
    })
}

/// An evaluation grid spanning the data range extended by one bandwidth.
pub fn default_grid(xs: &[f64], h: f64, points: usize) -> Vec<f64> {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - h;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + h;
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|j| lo + j as f64 * step).collect()
}

/// The least-squares cross-validation criterion
/// ∫ f̂² − (2/m) Σ_j f̂_{−j}(x_j), the integral by quadrature over the data
/// range extended by one bandwidth.
pub fn lscv_criterion(xs: &[f64], h: f64) -> Result<f64> {
    if xs.len() < 3 {
        return Err(Error::SampleTooSmall(xs.len()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - h;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + h;
    let sq_mass = quad::integrate(
        |x| {
            let f = density_at(xs, h, x);
            f * f
        },
        lo,
        hi,
        1e-8,
    )?;
    let m = xs.len();
    let mut loo_sum = 0.0;
    for j in 0..m {
        let mut f_minus = 0.0;
        for (k, &xk) in xs.iter().enumerate() {
            if k != j {
                f_minus += epanechnikov_std((xs[j] - xk) / h);
            }
        }
        loo_sum += f_minus / ((m - 1) as f64 * h);
    }
    Ok(sq_mass - 2.0 * loo_sum / m as f64)
}

/// Minimizes the LSCV criterion over the candidates; ties break toward the
/// smaller bandwidth.
pub fn lscv_bandwidth(xs: &[f64], candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best: Option<(f64, f64)> = None;
    let mut sorted: Vec<f64> = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("candidate bandwidths must be comparable"));
    for &h in &sorted {
        let score = lscv_criterion(xs, h)?;
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((h, score));
        }
    }
    Ok(best.unwrap().0)
}

/// 40 geometric candidate bandwidths spanning `[range/m, range]`.
pub fn default_candidates(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ZeroRange);
    }
    let m = xs.len() as f64;
    let grid = crate::bandwidth::BandwidthGrid::geometric(range / m, range, 40)
        .expect("positive range yields a valid grid");
    Ok(grid.points().to_vec())
}

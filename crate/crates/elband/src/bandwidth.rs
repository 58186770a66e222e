//! Bandwidth intervals, geometric bandwidth grids, and data-driven selection
//! by leave-one-out cross-validation.

use crate::error::{Error, Result};
use crate::estimators::nw_regression;
use crate::kernels::Kernel;
use crate::model::Dataset;

/// A geometrically spaced bandwidth grid spanning `[h_lo, h_hi]`.
#[derive(Debug, Clone)]
pub struct BandwidthGrid {
    points: Vec<f64>,
}

impl BandwidthGrid {
    /// Builds a geometric grid of `k` points from `lo` to `hi` inclusive.
    /// A single-point grid sits at the geometric midpoint.
    pub fn geometric(lo: f64, hi: f64, k: usize) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::InvalidBandwidth(lo));
        }
        if hi < lo {
            return Err(Error::InvalidConfig(format!(
                "bandwidth grid needs lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if k == 0 {
            return Err(Error::EmptyGrid);
        }
        let points = if k == 1 {
            vec![(lo * hi).sqrt()]
        } else {
            let ratio = (hi / lo).powf(1.0 / (k - 1) as f64);
            let mut pts: Vec<f64> = (0..k).map(|j| lo * ratio.powi(j as i32)).collect();
            // pin the endpoints exactly
            pts[0] = lo;
            pts[k - 1] = hi;
            pts
        };
        Ok(BandwidthGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn h_lo(&self) -> f64 {
        self.points[0]
    }

    pub fn h_hi(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// The bandwidth interval (h_n, 𝔥_n) = (n^{−1/5−δ}, n^{−1/5+δ}).
///
/// δ = 0 degenerates to the single point n^{−1/5}; δ must stay below 1/5 so
/// that both exponents remain negative.
pub fn paper_bandwidth_interval(n: usize, delta: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    if !(0.0..0.2).contains(&delta) {
        return Err(Error::InvalidDelta {
            lo: 0.0,
            hi: 0.2,
            got: delta,
        });
    }
    let nf = n as f64;
    Ok((nf.powf(-0.2 - delta), nf.powf(-0.2 + delta)))
}

/// Leave-one-out cross-validation score
/// CV(h) = (1/n) Σ_i [Y_i − r_{n,−i}(Z_i)]²·w(Z_i).
///
/// Errors when some weighted observation has an empty leave-one-out window,
/// which marks `h` as infeasible.
pub fn cv_score(
    data: &Dataset,
    h: f64,
    w: &dyn Fn(f64) -> f64,
    kernel: &Kernel,
) -> Result<f64> {
    let n = data.n();
    let mut total = 0.0;
    for i in 0..n {
        let zi = data.z()[i];
        let wi = w(zi);
        if wi <= 0.0 {
            continue;
        }
        let mut y_rest = Vec::with_capacity(n - 1);
        let mut z_rest = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j != i {
                y_rest.push(data.y()[j]);
                z_rest.push(data.z()[j]);
            }
        }
        let loo = Dataset::new(y_rest, z_rest)?;
        let pred = nw_regression(&loo, h, zi, kernel).map_err(|e| match e {
            Error::EmptyWindow { z, h } => Error::EmptyLooWindow { index: i, z, h },
            other => other,
        })?;
        let resid = data.y()[i] - pred;
        total += resid * resid * wi;
    }
    Ok(total / n as f64)
}

/// The candidate grid of Example-2 cross-validation: `grid_size` geometric
/// points spanning `[n^{−1+δ}, n^{−δ}]`.
pub fn cv_grid(n: usize, delta: f64, grid_size: usize) -> Result<BandwidthGrid> {
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidDelta {
            lo: 0.0,
            hi: 0.5,
            got: delta,
        });
    }
    if grid_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "cross-validation grid needs at least 2 points, got {grid_size}"
        )));
    }
    let nf = n as f64;
    BandwidthGrid::geometric(nf.powf(-1.0 + delta), nf.powf(-delta), grid_size)
}

/// Minimizes CV(h) over [`cv_grid`]; infeasible grid points (empty
/// leave-one-out windows) are skipped, ties break toward the smaller h.
pub fn select_cv_bandwidth(
    data: &Dataset,
    delta: f64,
    grid_size: usize,
    w: &dyn Fn(f64) -> f64,
    kernel: &Kernel,
) -> Result<f64> {
    let grid = cv_grid(data.n(), delta, grid_size)?;
    let mut best: Option<(f64, f64)> = None;
    for &h in grid.points() {
        let score = match cv_score(data, h, w, kernel) {
            Ok(s) => s,
            Err(Error::EmptyLooWindow { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((h, score));
        }
    }
    best.map(|(h, _)| h).ok_or(Error::NoFeasibleBandwidth)
}

/// Indicator weight of the evaluation interval H, the default w for CV.
pub fn indicator_of_h(z: f64) -> f64 {
    f64::from((crate::model::H_LO..=crate::model::H_HI).contains(&z))
}

/// A data-driven bandwidth rule: fits a local bandwidth map z ↦ h(z) from
/// the sample. Plug-in selectors and cross-validation both fit this shape;
/// only the CV rule ships with a concrete implementation.
pub trait DataDrivenBandwidth {
    fn fit(&self, data: &Dataset, kernel: &Kernel) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>>;
}

/// The leave-one-out CV rule of [`select_cv_bandwidth`]: one global
/// bandwidth, constant in z, weighted by the indicator of H.
#[derive(Debug, Clone, Copy)]
pub struct CrossValidationRule {
    pub delta: f64,
    pub grid_size: usize,
}

impl DataDrivenBandwidth for CrossValidationRule {
    fn fit(&self, data: &Dataset, kernel: &Kernel) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let h = select_cv_bandwidth(data, self.delta, self.grid_size, &indicator_of_h, kernel)?;
        Ok(Box::new(move |_z| h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample, SimulationModel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn kernel() -> Kernel {
        Kernel::uniform(1).unwrap()
    }

    #[test]
    fn paper_interval_values() {
        // direct exponentiation oracle, plus the rounded reference values
        let (lo, hi) = paper_bandwidth_interval(1000, 0.05).unwrap();
        assert_abs_diff_eq!(lo, 1000f64.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1000f64.powf(-0.15), epsilon = 1e-15);
        assert_abs_diff_eq!(lo, 0.177828, epsilon = 5e-6);
        assert_abs_diff_eq!(hi, 0.354813, epsilon = 5e-6);
        let (lo, hi) = paper_bandwidth_interval(50, 0.05).unwrap();
        assert_abs_diff_eq!(lo, 50f64.powf(-0.25), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 50f64.powf(-0.15), epsilon = 1e-15);
        assert_abs_diff_eq!(lo, 0.376060, epsilon = 5e-6);
        assert_abs_diff_eq!(hi, 0.556104, epsilon = 5e-6);
    }

    #[test]
    fn paper_interval_degenerates_at_zero_delta() {
        let (lo, hi) = paper_bandwidth_interval(1000, 0.0).unwrap();
        assert_eq!(lo, hi);
        assert_abs_diff_eq!(lo, 1000f64.powf(-0.2), epsilon = 1e-15);
    }

    #[test]
    fn paper_interval_rejects_bad_delta() {
        assert!(matches!(
            paper_bandwidth_interval(1000, 0.2),
            Err(Error::InvalidDelta { .. })
        ));
        assert!(matches!(
            paper_bandwidth_interval(1000, -0.01),
            Err(Error::InvalidDelta { .. })
        ));
        assert!(matches!(
            paper_bandwidth_interval(1, 0.05),
            Err(Error::SampleTooSmall(1))
        ));
    }

    #[test]
    fn geometric_grid_shape() {
        let grid = BandwidthGrid::geometric(0.1, 0.4, 7).unwrap();
        assert_eq!(grid.points().len(), 7);
        assert_eq!(grid.h_lo(), 0.1);
        assert_eq!(grid.h_hi(), 0.4);
        let pts = grid.points();
        let r0 = pts[1] / pts[0];
        for w in pts.windows(2) {
            assert_abs_diff_eq!(w[1] / w[0], r0, epsilon = 1e-12);
            assert!(w[1] > w[0]);
        }
        let single = BandwidthGrid::geometric(0.1, 0.4, 1).unwrap();
        assert_abs_diff_eq!(single.points()[0], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn cv_score_trivial_cases() {
        let data = Dataset::new(vec![2.0; 6], vec![0.1, 0.3, 0.4, 0.5, 0.7, 0.9]).unwrap();
        let score = cv_score(&data, 2.0, &|_| 1.0, &kernel()).unwrap();
        assert_abs_diff_eq!(score, 0.0, epsilon = 1e-24);

        let score = cv_score(&data, 2.0, &|_| 0.0, &kernel()).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn cv_score_hand_value() {
        // uniform kernel with h = 2 covers everything: the leave-one-out
        // prediction is the mean of the other four responses
        let y = [1.0, 2.0, 3.0, 4.0, 10.0];
        let z = [0.1, 0.3, 0.5, 0.7, 0.9];
        let data = Dataset::new(y.to_vec(), z.to_vec()).unwrap();
        let got = cv_score(&data, 2.0, &|_| 1.0, &kernel()).unwrap();
        let mut expect = 0.0;
        for i in 0..5 {
            let rest_mean =
                (y.iter().sum::<f64>() - y[i]) / 4.0;
            expect += (y[i] - rest_mean).powi(2);
        }
        expect /= 5.0;
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn cv_score_flags_infeasible_bandwidth() {
        let data = Dataset::new(vec![1.0, 2.0, 3.0], vec![0.1, 0.5, 0.9]).unwrap();
        assert!(matches!(
            cv_score(&data, 0.01, &|_| 1.0, &kernel()),
            Err(Error::EmptyLooWindow { .. })
        ));
    }

    #[test]
    fn selection_stays_in_stated_range_and_matches_brute_force() {
        let model = SimulationModel::new();
        let data = sample(&model, 120, 4).unwrap();
        let delta = 0.1;
        let grid_size = 12;
        let h = select_cv_bandwidth(&data, delta, grid_size, &indicator_of_h, &kernel()).unwrap();
        let n = data.n() as f64;
        assert!(h >= n.powf(-0.9) && h <= n.powf(-0.1));

        let grid = cv_grid(data.n(), delta, grid_size).unwrap();
        let mut best: Option<(f64, f64)> = None;
        for &cand in grid.points() {
            if let Ok(score) = cv_score(&data, cand, &indicator_of_h, &kernel()) {
                if best.is_none_or(|(_, s)| score < s) {
                    best = Some((cand, score));
                }
            }
        }
        assert_eq!(h, best.unwrap().0);
    }

    #[test]
    fn cv_rule_fits_a_constant_bandwidth_map() {
        let model = SimulationModel::new();
        let data = sample(&model, 100, 21).unwrap();
        let rule = CrossValidationRule {
            delta: 0.1,
            grid_size: 8,
        };
        let map = rule.fit(&data, &kernel()).unwrap();
        let direct = select_cv_bandwidth(&data, 0.1, 8, &indicator_of_h, &kernel()).unwrap();
        assert_eq!(map(0.3), direct);
        assert_eq!(map(0.7), direct);
    }

    #[test]
    fn grid_size_two_picks_better_endpoint() {
        let model = SimulationModel::new();
        let data = sample(&model, 80, 9).unwrap();
        let h = select_cv_bandwidth(&data, 0.15, 2, &indicator_of_h, &kernel()).unwrap();
        let grid = cv_grid(80, 0.15, 2).unwrap();
        assert!(grid.points().contains(&h));
    }

    proptest! {
        #[test]
        fn geometric_ratio_constant(lo in 0.01f64..0.2, factor in 1.1f64..20.0, k in 2usize..30) {
            let hi = lo * factor;
            let grid = BandwidthGrid::geometric(lo, hi, k).unwrap();
            let pts = grid.points();
            prop_assert_eq!(pts.len(), k);
            let r = (hi / lo).powf(1.0 / (k as f64 - 1.0));
            for w in pts.windows(2) {
                prop_assert!((w[1] / w[0] - r).abs() <= 1e-12 * r);
            }
        }

        #[test]
        fn cv_score_nonnegative(seed in 0u64..200, h in 0.2f64..1.5) {
            let model = SimulationModel::new();
            let data = sample(&model, 40, seed).unwrap();
            if let Ok(score) = cv_score(&data, h, &indicator_of_h, &kernel()) {
                prop_assert!(score >= 0.0);
            }
        }

        #[test]
        fn selection_permutation_invariant(seed in 0u64..100) {
            let model = SimulationModel::new();
            let data = sample(&model, 50, seed).unwrap();
            let mut pairs: Vec<(f64, f64)> = data.pairs().collect();
            pairs.rotate_left(17);
            let rotated = Dataset::new(
                pairs.iter().map(|p| p.0).collect(),
                pairs.iter().map(|p| p.1).collect(),
            ).unwrap();
            let a = select_cv_bandwidth(&data, 0.1, 8, &indicator_of_h, &kernel());
            let b = select_cv_bandwidth(&rotated, 0.1, 8, &indicator_of_h, &kernel());
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed feasibility"),
            }
        }
    }
}

//! Data-generating process for the simulation study, dataset container, and
//! the smoothed centring parameter m(C,h,z).
//!
//! The model: Z is uniform on `[0,1]` and, given Z = z, Y is exponential
//! with expectation 1/z (rate z). Conditional probabilities over the cells
//! C = [0,t] therefore have the closed form P(Y ≤ t | Z = z) = 1 − e^{−zt}.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quad;

/// Absolute quadrature tolerance used for the centring integrals.
const CENTRING_TOL: f64 = 1e-10;

/// Denominator mass below which the kernel window is declared outside the
/// support of f_Z.
const WINDOW_MASS_FLOOR: f64 = 1e-12;

/// Paired observations (Y_i, Z_i), d = d' = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    z: Vec<f64>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if y.len() != z.len() {
            return Err(Error::LengthMismatch {
                y: y.len(),
                z: z.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::SampleTooSmall(y.len()));
        }
        Ok(Dataset { y, z })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.y.iter().copied().zip(self.z.iter().copied())
    }

    /// Reads a dataset from CSV with header `y,z`, one observation per row.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "y,z" => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: format!("expected header \"y,z\", got {header:?}"),
                })
            }
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: "empty file".into(),
                })
            }
        }
        let mut y = Vec::new();
        let mut z = Vec::new();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |field: Option<&str>, what: &str| -> Result<f64> {
                field
                    .ok_or(())
                    .and_then(|s| s.trim().parse::<f64>().map_err(|_| ()))
                    .map_err(|()| Error::Parse {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        msg: format!("missing or invalid {what} value in {line:?}"),
                    })
            };
            y.push(parse(fields.next(), "y")?);
            z.push(parse(fields.next(), "z")?);
        }
        Dataset::new(y, z)
    }
}

/// The simulation data-generating process with closed-form conditional law.
///
/// Immutable; sampling with distinct seeds may run concurrently.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulationModel;

/// Compact evaluation interval H.
pub const H_LO: f64 = 0.25;
pub const H_HI: f64 = 0.75;

impl SimulationModel {
    pub fn new() -> Self {
        SimulationModel
    }

    /// Density of Z: uniform on `[0,1]`.
    pub fn f_z(&self, z: f64) -> f64 {
        if (0.0..=1.0).contains(&z) {
            1.0
        } else {
            0.0
        }
    }

    /// P(Y ≤ t | Z = z) = 1 − e^{−zt} for t ≥ 0 and z > 0.
    pub fn conditional_cdf(&self, t: f64, z: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            -(-z * t).exp_m1()
        }
    }

    /// E(Y | Z = z) = 1/z.
    pub fn cond_mean_y(&self, z: f64) -> f64 {
        1.0 / z
    }

    /// E(Y² | Z = z) = 2/z², the closed-form Δ²(Id, z) of this model.
    pub fn second_moment_y(&self, z: f64) -> f64 {
        2.0 / (z * z)
    }
}

/// An evaluation cell: C = [0,t] with t ∈ [1,2], a point z of H, and a
/// bandwidth h > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub t: f64,
    pub z: f64,
    pub h: f64,
}

impl Cell {
    pub fn new(t: f64, z: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidBandwidth(h));
        }
        Ok(Cell { t, z, h })
    }
}

/// Draws n i.i.d. pairs: Z uniform on `(0,1]`, Y | Z = z exponential with
/// mean 1/z by inverse CDF. Deterministic given the seed.
pub fn sample(_model: &SimulationModel, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::SampleTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        // gen::<f64>() lies in [0,1); 1-u keeps z strictly positive so the
        // conditional mean 1/z stays finite.
        let zi = 1.0 - rng.gen::<f64>();
        let u: f64 = rng.gen();
        let yi = -(1.0 - u).ln() / zi;
        z.push(zi);
        y.push(yi);
    }
    Dataset::new(y, z)
}

/// r(C,z) = P(Y ≤ t | Z = z) in closed form.
pub fn true_prob(model: &SimulationModel, t: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveCovariate(z));
    }
    if t < 0.0 {
        return Err(Error::NegativeEndpoint(t));
    }
    Ok(model.conditional_cdf(t, z))
}

/// σ²(C,z) = p(1−p), the conditional variance of 1_C(Y) given Z = z.
pub fn true_sigma2(model: &SimulationModel, t: f64, z: f64) -> Result<f64> {
    let p = true_prob(model, t, z)?;
    Ok(p * (1.0 - p))
}

/// The centring parameter m(C,h,z) = E[1_C(Y)K((Z−z)/h)] / E[K((Z−z)/h)],
/// computed by Gauss-Legendre quadrature against the model law.
///
/// Both expectations integrate over the part of the kernel window that
/// carries f_Z mass; they error out only when that mass vanishes entirely.
pub fn centring_m(model: &SimulationModel, cell: &Cell, kernel: &Kernel) -> Result<f64> {
    require_1d(kernel)?;
    let Cell { t, z, h } = *cell;
    if t < 0.0 {
        return Err(Error::NegativeEndpoint(t));
    }
    let lo = (z - 0.5 * h).max(0.0);
    let hi = (z + 0.5 * h).min(1.0);
    if lo >= hi {
        return Err(Error::VanishingWindow { z, h });
    }
    let den = quad::integrate(
        |u| kernel.eval1((u - z) / h) * model.f_z(u),
        lo,
        hi,
        CENTRING_TOL,
    )?;
    if den < WINDOW_MASS_FLOOR {
        return Err(Error::VanishingWindow { z, h });
    }
    let num = quad::integrate(
        |u| kernel.eval1((u - z) / h) * model.conditional_cdf(t, u) * model.f_z(u),
        lo,
        hi,
        CENTRING_TOL,
    )?;
    Ok(num / den)
}

pub(crate) fn require_1d(kernel: &Kernel) -> Result<()> {
    if kernel.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: kernel.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model() -> SimulationModel {
        SimulationModel::new()
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample(&model(), 1000, 42).unwrap();
        let b = sample(&model(), 1000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample(&model(), 1000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_rejects_tiny_n() {
        assert!(matches!(
            sample(&model(), 1, 42),
            Err(Error::SampleTooSmall(1))
        ));
    }

    #[test]
    fn covariate_mean_matches_uniform_law() {
        let data = sample(&model(), 1000, 42).unwrap();
        let mean = data.z().iter().sum::<f64>() / data.n() as f64;
        let band = 3.0 / (12.0f64 * 1000.0).sqrt();
        assert!((mean - 0.5).abs() < band, "mean {mean} outside 0.5 ± {band}");
    }

    #[test]
    fn conditional_law_matches_exponential_cdf() {
        let data = sample(&model(), 1000, 42).unwrap();
        let (mut hits, mut total) = (0usize, 0usize);
        for (y, z) in data.pairs() {
            if (0.45..=0.55).contains(&z) {
                total += 1;
                if y <= 1.0 {
                    hits += 1;
                }
            }
        }
        assert!(total > 0);
        let frac = hits as f64 / total as f64;
        let expect = 1.0 - (-0.5f64).exp();
        assert!(
            (frac - expect).abs() < 0.1,
            "fraction {frac} vs {expect} with window count {total}"
        );
    }

    #[test]
    fn true_prob_values() {
        let m = model();
        assert_abs_diff_eq!(true_prob(&m, 1.0, 0.5).unwrap(), 0.393469, epsilon = 1e-6);
        assert_eq!(true_prob(&m, 0.0, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(true_prob(&m, 1e6, 0.5).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            true_prob(&m, 1.0, 0.0),
            Err(Error::NonPositiveCovariate(_))
        ));
        assert!(matches!(
            true_prob(&m, -1.0, 0.5),
            Err(Error::NegativeEndpoint(_))
        ));
    }

    #[test]
    fn true_prob_monotone_in_t_and_z() {
        let m = model();
        let mut prev = 0.0;
        for k in 0..=20 {
            let t = 0.2 * k as f64;
            let p = true_prob(&m, t, 0.5).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= prev);
            prev = p;
        }
        prev = 0.0;
        for k in 1..=20 {
            let z = 0.05 * k as f64;
            let p = true_prob(&m, 1.0, z).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn true_sigma2_values() {
        let m = model();
        assert_abs_diff_eq!(
            true_sigma2(&m, 1.0, 0.5).unwrap(),
            0.238651,
            epsilon = 1e-6
        );
        assert_eq!(true_sigma2(&m, 0.0, 0.7).unwrap(), 0.0);
        // p = 1/2 at t = ln(2)/z gives the Bernoulli variance bound
        let t_half = std::f64::consts::LN_2 / 0.5;
        assert_abs_diff_eq!(true_sigma2(&m, t_half, 0.5).unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn centring_shrinks_to_conditional_probability() {
        let m = model();
        let kernel = Kernel::epanechnikov(1).unwrap();
        let cell = Cell::new(1.0, 0.5, 1e-4).unwrap();
        let got = centring_m(&m, &cell, &kernel).unwrap();
        assert_abs_diff_eq!(got, true_prob(&m, 1.0, 0.5).unwrap(), epsilon = 1e-3);
    }

    #[test]
    fn centring_of_full_mass_cell_is_one() {
        let m = model();
        let kernel = Kernel::epanechnikov(1).unwrap();
        let cell = Cell::new(1e6, 0.5, 0.1).unwrap();
        assert_abs_diff_eq!(centring_m(&m, &cell, &kernel).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn centring_matches_monte_carlo_ratio() {
        // m(C,h,z) with the uniform kernel equals P(Y ≤ t | |Z−z| ≤ h/2);
        // estimate that proportion from a large sample.
        let m = model();
        let kernel = Kernel::uniform(1).unwrap();
        let cell = Cell::new(1.0, 0.5, 0.1).unwrap();
        let quad_value = centring_m(&m, &cell, &kernel).unwrap();

        let data = sample(&m, 1_000_000, 777).unwrap();
        let (mut hits, mut total) = (0usize, 0usize);
        for (y, z) in data.pairs() {
            if (z - 0.5).abs() <= 0.05 {
                total += 1;
                if y <= 1.0 {
                    hits += 1;
                }
            }
        }
        let p_hat = hits as f64 / total as f64;
        let se = (p_hat * (1.0 - p_hat) / total as f64).sqrt();
        assert!(
            (quad_value - p_hat).abs() <= 3.0 * se,
            "quadrature {quad_value} vs MC {p_hat} ± {se}"
        );
    }

    #[test]
    fn centring_monotone_in_t_and_bounded() {
        let m = model();
        let kernel = Kernel::epanechnikov(1).unwrap();
        let mut prev = 0.0;
        for k in 0..=10 {
            let t = 0.4 * k as f64;
            let cell = Cell::new(t, 0.4, 0.2).unwrap();
            let v = centring_m(&m, &cell, &kernel).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!(v + 1e-12 >= prev);
            prev = v;
        }
    }

    #[test]
    fn centring_bias_vanishes_along_h_sequence() {
        let m = model();
        let kernel = Kernel::epanechnikov(1).unwrap();
        let target = true_prob(&m, 1.5, 0.5).unwrap();
        let mut prev_gap = f64::INFINITY;
        for h in [0.4, 0.2, 0.1, 0.05, 0.025] {
            let cell = Cell::new(1.5, 0.5, h).unwrap();
            let gap = (centring_m(&m, &cell, &kernel).unwrap() - target).abs();
            assert!(gap <= prev_gap + 1e-12, "gap {gap} grew from {prev_gap} at h={h}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-3);
    }

    #[test]
    fn centring_integrates_over_support_intersection_at_boundary() {
        // At n = 50 the widest study bandwidth pushes the window past 0 for
        // z = 0.25; the expectations stay well defined.
        let m = model();
        let kernel = Kernel::epanechnikov(1).unwrap();
        let cell = Cell::new(1.5, 0.25, 0.556).unwrap();
        let v = centring_m(&m, &cell, &kernel).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn centring_errors_when_window_has_no_mass() {
        let m = model();
        let kernel = Kernel::epanechnikov(1).unwrap();
        let cell = Cell::new(1.0, -2.0, 0.1).unwrap();
        assert!(matches!(
            centring_m(&m, &cell, &kernel),
            Err(Error::VanishingWindow { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("data.csv");
        std::fs::write(&good, "y,z\n1.5,0.25\n0.75,0.5\n2.0,0.9\n").unwrap();
        let data = Dataset::from_csv_path(&good).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.y(), &[1.5, 0.75, 2.0]);
        assert_eq!(data.z(), &[0.25, 0.5, 0.9]);

        let bad_header = dir.path().join("bad_header.csv");
        std::fs::write(&bad_header, "a,b\n1,2\n").unwrap();
        assert!(matches!(
            Dataset::from_csv_path(&bad_header),
            Err(Error::Parse { line: 1, .. })
        ));

        let bad_field = dir.path().join("bad_field.csv");
        std::fs::write(&bad_field, "y,z\n1.0,oops\n2.0,0.4\n").unwrap();
        assert!(matches!(
            Dataset::from_csv_path(&bad_field),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}

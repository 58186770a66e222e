//! The deviation process W_n, Nadaraya-Watson regression, and the
//! empirical-likelihood building blocks X_n, S_n and U_n.
//!
//! All operations are pure functions of immutable inputs; grid evaluations
//! may be distributed freely across workers.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::model::{require_1d, Cell, Dataset, SimulationModel};
use crate::quad;

type Map = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A member g of the function class together with its coefficient pair
/// (c_g, d_g), so the studied functional is c_g(z)·g(Y) + d_g(z).
///
/// `cond_mean` is E[g(Y) | Z = u], needed when the centring expectation is
/// computed by quadrature against a known model; `delta_sq` is the
/// closed-form conditional second moment Δ²(g, z) when available.
pub struct FunctionClassEntry {
    g: Map,
    c: Map,
    d: Map,
    cond_mean: Option<Map>,
    delta_sq: Option<Map>,
}

impl FunctionClassEntry {
    pub fn new(
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FunctionClassEntry {
            g: Box::new(g),
            c: Box::new(c),
            d: Box::new(d),
            cond_mean: None,
            delta_sq: None,
        }
    }

    /// g = Id with unit coefficient: the functional is Y itself.
    pub fn identity() -> Self {
        Self::new(|y| y, |_| 1.0, |_| 0.0)
    }

    /// g = 1_{[0,t]} with unit coefficient.
    pub fn indicator(t: f64) -> Self {
        Self::new(move |y| f64::from((0.0..=t).contains(&y)), |_| 1.0, |_| 0.0)
    }

    /// The identically-zero functional (c ≡ 0, d ≡ 0).
    pub fn zero() -> Self {
        Self::new(|y| y, |_| 0.0, |_| 0.0)
    }

    pub fn with_cond_mean(mut self, m: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.cond_mean = Some(Box::new(m));
        self
    }

    pub fn with_delta_sq(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.delta_sq = Some(Box::new(d));
        self
    }

    pub fn g(&self, y: f64) -> f64 {
        (self.g)(y)
    }

    pub fn c(&self, z: f64) -> f64 {
        (self.c)(z)
    }

    pub fn d(&self, z: f64) -> f64 {
        (self.d)(z)
    }

    pub fn delta_sq(&self, z: f64) -> Option<f64> {
        self.delta_sq.as_ref().map(|f| f(z))
    }

    /// Δ²(g) = sup over a z-grid of Δ²(g,z), from the closed form.
    pub fn delta_sq_sup(&self, z_grid: &[f64]) -> Option<f64> {
        let f = self.delta_sq.as_ref()?;
        z_grid.iter().map(|&z| f(z)).fold(None, |acc, v| {
            Some(acc.map_or(v, |m: f64| m.max(v)))
        })
    }
}

/// How the expectation term inside W_n is supplied.
pub enum Centring<'a> {
    /// Compute E[(c_g(z)g(Y)+d_g(z))K((Z−z)/h)] by quadrature against the
    /// known model law (requires the entry's conditional mean map).
    Model(&'a SimulationModel),
    /// Caller-supplied per-observation expectation (data mode).
    Value(f64),
}

/// The per-observation expectation E[(c_g(z)g(Y)+d_g(z))·K((Z−z)/h)] under
/// the model, by Gauss-Legendre quadrature over the kernel window.
pub fn w_expectation(
    model: &SimulationModel,
    entry: &FunctionClassEntry,
    h: f64,
    z: f64,
    kernel: &Kernel,
) -> Result<f64> {
    require_1d(kernel)?;
    let cond_mean = entry.cond_mean.as_ref().ok_or(Error::MissingConditionalMean)?;
    let lo = (z - 0.5 * h).max(0.0);
    let hi = (z + 0.5 * h).min(1.0);
    if lo >= hi {
        // the window carries no f_Z mass, so the expectation vanishes
        return Ok(0.0);
    }
    let c = entry.c(z);
    let d = entry.d(z);
    quad::integrate(
        |u| kernel.eval1((u - z) / h) * (c * cond_mean(u) + d) * model.f_z(u),
        lo,
        hi,
        1e-10,
    )
}

/// The deviation process
/// W_n = f_Z(z)^{−1/2} Σ_i [ (c_g(z)g(Y_i)+d_g(z))·K((Z_i−z)/h) − E(…) ].
pub fn w_process(
    data: &Dataset,
    entry: &FunctionClassEntry,
    h: f64,
    z: f64,
    f_z_value: f64,
    kernel: &Kernel,
    centring: Centring<'_>,
) -> Result<f64> {
    require_1d(kernel)?;
    if !(f_z_value > 0.0) {
        return Err(Error::NonPositiveDensity(f_z_value));
    }
    if !(0.0 < h && h < 1.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    let expectation = match centring {
        Centring::Model(model) => w_expectation(model, entry, h, z, kernel)?,
        Centring::Value(v) => v,
    };
    let c = entry.c(z);
    let d = entry.d(z);
    let sum: f64 = data
        .pairs()
        .map(|(y, zi)| (c * entry.g(y) + d) * kernel.eval1((zi - z) / h) - expectation)
        .sum();
    Ok(sum / f_z_value.sqrt())
}

/// Nadaraya-Watson estimate Σ K((z−Z_i)/h)·Y_i / Σ K((z−Z_j)/h).
pub fn nw_regression(data: &Dataset, h: f64, z: f64, kernel: &Kernel) -> Result<f64> {
    require_1d(kernel)?;
    if !(h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, zi) in data.pairs() {
        let k = kernel.eval1((z - zi) / h);
        num += k * y;
        den += k;
    }
    if den <= 0.0 {
        return Err(Error::EmptyWindow { z, h });
    }
    Ok(num / den)
}

/// Constraint weights w_i = K((Z_i−z)/h)·(1_{[0,t]}(Y_i) − θ).
pub fn el_weights(data: &Dataset, cell: &Cell, theta: f64, kernel: &Kernel) -> Result<Vec<f64>> {
    require_1d(kernel)?;
    let Cell { t, z, h } = *cell;
    Ok(data
        .pairs()
        .map(|(y, zi)| {
            let indicator = f64::from((0.0..=t).contains(&y));
            kernel.eval1((zi - z) / h) * (indicator - theta)
        })
        .collect())
}

/// (X_n, S_n, U_n): the weight sum, the normalised sum of squares, and the
/// self-normalised statistic X_n² / (f_Z(z)·S_n).
pub fn xn_sn_un(
    data: &Dataset,
    cell: &Cell,
    theta: f64,
    f_z_value: f64,
    kernel: &Kernel,
) -> Result<(f64, f64, f64)> {
    if !(f_z_value > 0.0) {
        return Err(Error::NonPositiveDensity(f_z_value));
    }
    let w = el_weights(data, cell, theta, kernel)?;
    let x: f64 = w.iter().sum();
    let sq: f64 = w.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let s = sq / f_z_value;
    let u = x * x / (f_z_value * s);
    Ok((x, s, u))
}

/// One grid point of the normalized deviation statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDeviation {
    pub z: f64,
    pub h: f64,
    pub w_raw: f64,
    pub normalizer: f64,
}

/// The maximum of |W_n| / sqrt(2·n·h^d·log(h^{−d})) over a (z, h) grid,
/// with the per-point records that produced it.
#[derive(Debug, Clone)]
pub struct DeviationStat {
    pub value: f64,
    pub per_point: Vec<PointDeviation>,
}

/// Evaluates the normalized deviation sup over the product grid, with the
/// expectation term computed against the model at every point.
pub fn sup_deviation(
    data: &Dataset,
    entry: &FunctionClassEntry,
    z_grid: &[f64],
    h_grid: &[f64],
    model: &SimulationModel,
    kernel: &Kernel,
) -> Result<DeviationStat> {
    if z_grid.is_empty() || h_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &h in h_grid {
        if !(0.0 < h && h < 1.0) {
            return Err(Error::InvalidBandwidth(h));
        }
    }
    let d = kernel.dim() as i32;
    let n = data.n() as f64;
    let mut per_point = Vec::with_capacity(z_grid.len() * h_grid.len());
    let mut value = 0.0f64;
    for &z in z_grid {
        let f_z = model.f_z(z);
        if !(f_z > 0.0) {
            return Err(Error::NonPositiveDensity(f_z));
        }
        // the coefficient pair must stay bounded over the evaluation grid
        if !(entry.c(z).is_finite() && entry.d(z).is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "coefficient functions unbounded at z = {z}"
            )));
        }
        for &h in h_grid {
            let w_raw = w_process(data, entry, h, z, f_z, kernel, Centring::Model(model))?;
            let hd = h.powi(d);
            let normalizer = (2.0 * n * hd * (1.0 / hd).ln()).sqrt();
            per_point.push(PointDeviation {
                z,
                h,
                w_raw,
                normalizer,
            });
            value = value.max(w_raw.abs() / normalizer);
        }
    }
    Ok(DeviationStat { value, per_point })
}

//! Kernel functions on the cube `[-1/2, 1/2]^d`.
//!
//! Every built-in kernel vanishes outside the unit cube and integrates to
//! one over it. The classical kernels are usually written on `[-1, 1]`; here
//! they are affinely rescaled to half-width support and renormalized, so for
//! a base kernel k the 1-d profile is `u ↦ 2·k(2u)`. Multidimensional
//! kernels are tensor products of the 1-d profile, which keeps both the
//! support and the normalization exact.

use crate::error::{Error, Result};
use crate::quad;

/// 1-d kernel profiles with support `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Profile {
    /// Constant 1 on the support.
    Uniform,
    /// `(3/2)(1 - 4u²)`.
    Epanechnikov,
    /// `(35/16)(1 - 4u²)³`.
    Triweight,
}

impl Profile {
    fn eval(self, u: f64) -> f64 {
        if !(-0.5..=0.5).contains(&u) {
            return 0.0;
        }
        match self {
            Profile::Uniform => 1.0,
            Profile::Epanechnikov => {
                let t = 1.0 - 4.0 * u * u;
                1.5 * t
            }
            Profile::Triweight => {
                let t = 1.0 - 4.0 * u * u;
                35.0 / 16.0 * t * t * t
            }
        }
    }

    /// Closed-form ∫ k(u)² du over the support of the 1-d profile.
    fn l2_norm_sq_1d(self) -> f64 {
        match self {
            Profile::Uniform => 1.0,
            Profile::Epanechnikov => 1.2,
            Profile::Triweight => 700.0 / 429.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Profile::Uniform => "uniform",
            Profile::Epanechnikov => "epanechnikov",
            Profile::Triweight => "triweight",
        }
    }
}

/// A normalized kernel on `R^d` with compact support `[-1/2, 1/2]^d`.
///
/// Immutable after construction; shared freely across workers.
#[derive(Debug, Clone)]
pub struct Kernel {
    dim: usize,
    profile: Profile,
    l2_norm_sq: f64,
}

impl Kernel {
    fn build(profile: Profile, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Kernel {
            dim,
            profile,
            l2_norm_sq: profile.l2_norm_sq_1d().powi(dim as i32),
        })
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::build(Profile::Uniform, dim)
    }

    pub fn epanechnikov(dim: usize) -> Result<Self> {
        Self::build(Profile::Epanechnikov, dim)
    }

    pub fn triweight(dim: usize) -> Result<Self> {
        Self::build(Profile::Triweight, dim)
    }

    /// Selects a kernel by its CLI/config name.
    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "uniform" => Self::uniform(dim),
            "epanechnikov" => Self::epanechnikov(dim),
            "triweight" => Self::triweight(dim),
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        self.profile.name()
    }

    /// The cached squared Lebesgue L2 norm ‖K‖²_{λ,2} = ∫ K(u)² du.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// Evaluates the kernel at a point of `R^d`; exactly 0 outside the
    /// support cube.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: u.len(),
            });
        }
        Ok(u.iter().map(|&x| self.profile.eval(x)).product())
    }

    /// Evaluates a 1-d kernel at a scalar point.
    ///
    /// Hot-loop variant of [`eval`](Self::eval) for the d = 1 estimators.
    #[inline]
    pub fn eval1(&self, u: f64) -> f64 {
        debug_assert_eq!(self.dim, 1, "eval1 requires a 1-d kernel");
        self.profile.eval(u)
    }
}

/// ∫ K(u) du over the support cube by adaptive product quadrature.
pub fn mass_quadrature(k: &Kernel) -> Result<f64> {
    cube_quadrature(k, |v| v, 1e-10)
}

/// ∫ K(u)² du over the support cube by adaptive product quadrature, absolute
/// tolerance 1e-10. Independent check of the cached [`Kernel::l2_norm_sq`].
pub fn l2_norm_sq_quadrature(k: &Kernel) -> Result<f64> {
    cube_quadrature(k, |v| v * v, 1e-10)
}

/// Product-rule Gauss-Legendre over `[-1/2,1/2]^d` applied to `map(K(u))`,
/// refining the per-axis panel count until two passes agree within `tol`.
/// Cost grows as `(64·panels)^d`, so this is meant for d ≤ 3.
fn cube_quadrature(k: &Kernel, map: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let mut panels = 1usize;
    let mut prev = cube_pass(k, &map, panels);
    while panels <= 8 {
        panels *= 2;
        let next = cube_pass(k, &map, panels);
        if (next - prev).abs() <= tol {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureDiverged {
        a: -0.5,
        b: 0.5,
        tol,
    })
}

fn cube_pass(k: &Kernel, map: &impl Fn(f64) -> f64, panels: usize) -> f64 {
    // Per-axis composite grid of nodes and weights.
    let mut axis_nodes = Vec::new();
    let mut axis_weights = Vec::new();
    let width = 1.0 / panels as f64;
    for p in 0..panels {
        let a = -0.5 + p as f64 * width;
        quad_axis(a, a + width, &mut axis_nodes, &mut axis_weights);
    }
    let m = axis_nodes.len();
    let mut point = vec![0usize; k.dim()];
    let mut coords = vec![0f64; k.dim()];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for (j, &idx) in point.iter().enumerate() {
            coords[j] = axis_nodes[idx];
            w *= axis_weights[idx];
        }
        acc += w * map(k.eval(&coords).expect("dimension fixed by construction"));
        // odometer increment over the product grid
        let mut j = 0;
        loop {
            point[j] += 1;
            if point[j] < m {
                break;
            }
            point[j] = 0;
            j += 1;
            if j == point.len() {
                return acc;
            }
        }
    }
}

fn quad_axis(a: f64, b: f64, nodes_out: &mut Vec<f64>, weights_out: &mut Vec<f64>) {
    let (nodes, weights) = quad::rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (x, w) in nodes.iter().zip(weights.iter()) {
        nodes_out.push(mid + half * x);
        weights_out.push(w * half);
    }
}

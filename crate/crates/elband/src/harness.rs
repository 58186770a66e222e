//! Replication engine for the Monte Carlo studies behind the CLI: the
//! sup-statistic study over (z, t, h) grids, the chi-square calibration
//! experiment, the critical-value coverage experiment, and the normalized
//! deviation trend.
//!
//! Replications are independent units of work seeded by a counter-based mix
//! of (master seed, replication index), so parallel and serial execution
//! produce identical output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::bandwidth::{paper_bandwidth_interval, BandwidthGrid};
use crate::density::{self, DensityEstimate};
use crate::empirical_likelihood::{confidence_interval, log_ratio, theorem3_statistic};
use crate::error::{Error, Result};
use crate::estimators::{sup_deviation, FunctionClassEntry};
use crate::kernels::Kernel;
use crate::model::{centring_m, sample, Cell, SimulationModel, H_HI, H_LO};

/// 0.95 quantile of the chi-square distribution with one degree of freedom.
pub const CHI2_1_Q95: f64 = 3.841459;

/// Configuration of the sup-statistic study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Sample sizes, ascending.
    pub sizes: Vec<usize>,
    /// Replications per sample size.
    pub reps: usize,
    /// Bandwidth exponent: h ranges over [n^{−1/5−δ}, n^{−1/5+δ}].
    pub delta: f64,
    /// Grid counts per axis; the default 5×5×2 realises the 50-cell grid.
    pub grid_z: usize,
    pub grid_t: usize,
    pub grid_h: usize,
    pub seed: u64,
    pub kernel: String,
    /// Exponent offset for the critical-value rule c = h^{d+ε}.
    pub eps: f64,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Write measured per-replication wall times into the CSV. Off by
    /// default so that identical configs produce byte-identical files.
    pub timing: bool,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            sizes: vec![50, 100, 500, 1000],
            reps: 100,
            delta: 1.0 / 20.0,
            grid_z: 5,
            grid_t: 5,
            grid_h: 2,
            seed: 42,
            kernel: "epanechnikov".into(),
            eps: 0.1,
            out: None,
            svg: None,
            timing: false,
            threads: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidConfig("sizes must be nonempty".into()));
        }
        for &n in &self.sizes {
            if n < 2 {
                return Err(Error::SampleTooSmall(n));
            }
        }
        if self.sizes.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("sizes must be ascending".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be positive".into()));
        }
        if self.grid_z == 0 || self.grid_t == 0 || self.grid_h == 0 {
            return Err(Error::InvalidConfig("grid counts must be positive".into()));
        }
        if !(0.0..0.2).contains(&self.delta) {
            return Err(Error::InvalidDelta {
                lo: 0.0,
                hi: 0.2,
                got: self.delta,
            });
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eps must be nonnegative, got {}",
                self.eps
            )));
        }
        Kernel::from_name(&self.kernel, 1)?;
        Ok(())
    }

    /// Loads a `key=value` config file on top of the defaults. `#` starts a
    /// comment; flags parsed later may override any field.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = StudyConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg,
            };
            match key {
                "sizes" => {
                    config.sizes = value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(format!("sizes: {e}")))?;
                }
                "reps" => config.reps = value.parse().map_err(|e| bad(format!("reps: {e}")))?,
                "delta" => config.delta = value.parse().map_err(|e| bad(format!("delta: {e}")))?,
                "grid_z" => {
                    config.grid_z = value.parse().map_err(|e| bad(format!("grid_z: {e}")))?
                }
                "grid_t" => {
                    config.grid_t = value.parse().map_err(|e| bad(format!("grid_t: {e}")))?
                }
                "grid_h" => {
                    config.grid_h = value.parse().map_err(|e| bad(format!("grid_h: {e}")))?
                }
                "seed" => config.seed = value.parse().map_err(|e| bad(format!("seed: {e}")))?,
                "kernel" => config.kernel = value.to_string(),
                "eps" => config.eps = value.parse().map_err(|e| bad(format!("eps: {e}")))?,
                "out" => config.out = Some(PathBuf::from(value)),
                "svg" => config.svg = Some(PathBuf::from(value)),
                "timing" => {
                    config.timing = value.parse().map_err(|e| bad(format!("timing: {e}")))?
                }
                "threads" => {
                    config.threads = value.parse().map_err(|e| bad(format!("threads: {e}")))?
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(config)
    }
}

/// One replication of the sup-statistic study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub rep: usize,
    /// Maximum of the normalized statistic over the hull-valid grid cells;
    /// +∞ when every cell failed the hull condition (flagged row).
    pub sup_stat: f64,
    pub hull_failures: usize,
    pub runtime_ms: u64,
}

/// Per-size summary of the study rows.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub hull_failures: usize,
    pub flagged_rows: usize,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<StudySummary>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives the per-replication RNG seed from the master seed and the
/// replication counter.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    splitmix64(master ^ splitmix64(rep))
}

/// Uniformly spaced grid on [a, b] including both endpoints; a single-point
/// grid sits at the midpoint.
pub fn uniform_grid(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (a + b)];
    }
    let step = (b - a) / (k - 1) as f64;
    (0..k).map(|j| a + j as f64 * step).collect()
}

/// The per-size evaluation grids: z uniform over H, t uniform over [1, 2],
/// h geometric over the bandwidth interval of n.
pub fn study_grids(n: usize, config: &StudyConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let z_grid = uniform_grid(H_LO, H_HI, config.grid_z);
    let t_grid = uniform_grid(1.0, 2.0, config.grid_t);
    let (h_lo, h_hi) = paper_bandwidth_interval(n, config.delta)?;
    let h_grid = BandwidthGrid::geometric(h_lo, h_hi, config.grid_h)?
        .points()
        .to_vec();
    Ok((z_grid, t_grid, h_grid))
}

/// Runs one replication: samples a dataset, evaluates the normalized
/// statistic on every grid cell, and returns the maximum over hull-valid
/// cells together with the hull-failure count.
pub fn run_replication(n: usize, rep_index: usize, config: &StudyConfig) -> Result<StudyRow> {
    let start = Instant::now();
    let kernel = Kernel::from_name(&config.kernel, 1)?;
    let model = SimulationModel::new();
    let data = sample(&model, n, replication_seed(config.seed, rep_index as u64))?;
    let (z_grid, t_grid, h_grid) = study_grids(n, config)?;

    let mut sup = f64::NEG_INFINITY;
    let mut any_valid = false;
    let mut hull_failures = 0usize;
    for &z in &z_grid {
        for &t in &t_grid {
            for &h in &h_grid {
                let cell = Cell::new(t, z, h)?;
                let stat = theorem3_statistic(&data, &cell, &model, &kernel)?;
                if stat.is_finite() {
                    any_valid = true;
                    sup = sup.max(stat);
                } else {
                    hull_failures += 1;
                }
            }
        }
    }
    Ok(StudyRow {
        n,
        rep: rep_index,
        sup_stat: if any_valid { sup } else { f64::INFINITY },
        hull_failures,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        Ok(job())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// Runs the full study, writes the CSV (and optional density outputs), and
/// returns rows plus per-size summaries. Rows are ordered by (size index,
/// replication index) regardless of scheduling.
pub fn run_study(config: &StudyConfig) -> Result<StudyOutput> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&n| (0..config.reps).map(move |rep| (n, rep)))
        .collect();
    let rows: Vec<StudyRow> = with_pool(config.threads, || {
        tasks
            .par_iter()
            .map(|&(n, rep)| run_replication(n, rep, config))
            .collect::<Result<Vec<_>>>()
    })??;

    let summaries = config
        .sizes
        .iter()
        .map(|&n| summarize(n, &rows))
        .collect();

    if let Some(path) = &config.out {
        std::fs::write(path, study_csv(&rows, config.timing)).map_err(|e| Error::io(path, e))?;
    }
    if let Some(dir) = &config.svg {
        write_density_outputs(dir, config, &rows)?;
    }
    Ok(StudyOutput { rows, summaries })
}

fn summarize(n: usize, rows: &[StudyRow]) -> StudySummary {
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.n == n)
        .map(|r| r.sup_stat)
        .collect();
    StudySummary {
        n,
        median: quantile(&values, 0.5),
        iqr: quantile(&values, 0.75) - quantile(&values, 0.25),
        hull_failures: rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.hull_failures)
            .sum(),
        flagged_rows: rows
            .iter()
            .filter(|r| r.n == n && r.sup_stat.is_infinite())
            .count(),
    }
}

/// Linear-interpolation quantile of the values (unsorted input).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("sup statistics are never NaN"));
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() || sorted[lo] == sorted[lo + 1] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Renders the study rows in the pinned CSV layout. Without `timing` the
/// runtime column is written as 0, keeping the file reproducible.
pub fn study_csv(rows: &[StudyRow], timing: bool) -> String {
    let mut out = String::from("n,rep,sup_stat,hull_failures,runtime_ms\n");
    for r in rows {
        let ms = if timing { r.runtime_ms } else { 0 };
        writeln!(
            out,
            "{},{},{},{},{}",
            r.n, r.rep, r.sup_stat, r.hull_failures, ms
        )
        .expect("writing to String cannot fail");
    }
    out
}

/// Fraction of replications whose −2·log R_n(m(C,h,z)) stays below the
/// chi-square(1) 0.95 quantile.
pub fn calibration_study(
    n: usize,
    reps: usize,
    t: f64,
    z: f64,
    h: f64,
    seed: u64,
    kernel_name: &str,
) -> Result<f64> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be positive".into()));
    }
    let kernel = Kernel::from_name(kernel_name, 1)?;
    let model = SimulationModel::new();
    let cell = Cell::new(t, z, h)?;
    let theta = centring_m(&model, &cell, &kernel)?;
    let hits = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<usize> {
            let data = sample(&model, n, replication_seed(seed, rep as u64))?;
            let sol = log_ratio(&data, &cell, theta, &kernel)?;
            Ok(usize::from(sol.hull_ok && -2.0 * sol.log_r <= CHI2_1_Q95))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(hits as f64 / reps as f64)
}

/// Coverage experiment for the critical-value rule c = h^{d+ε}.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    /// Replications in which every grid cell's interval covered its
    /// centring parameter.
    pub covered_reps: usize,
    pub reps: usize,
    /// Uncovered cell count per replication.
    pub miss_counts: Vec<usize>,
    /// Per-cell replication misses, in grid order.
    pub per_cell: Vec<CellCoverage>,
}

/// Marginal coverage of a single grid cell.
#[derive(Debug, Clone, Copy)]
pub struct CellCoverage {
    pub cell: Cell,
    pub critical_value: f64,
    pub misses: usize,
}

/// For each replication at size n, checks m(C,h,z) ∈ I_n(C,h,z,h^{d+ε}) at
/// every grid cell.
pub fn coverage_study(n: usize, reps: usize, config: &StudyConfig) -> Result<CoverageReport> {
    config.validate()?;
    let kernel = Kernel::from_name(&config.kernel, 1)?;
    let model = SimulationModel::new();
    let (z_grid, t_grid, h_grid) = study_grids(n, config)?;
    let d = kernel.dim() as f64;

    // cells and their targets are replication independent
    let mut cells = Vec::new();
    for &z in &z_grid {
        for &t in &t_grid {
            for &h in &h_grid {
                let cell = Cell::new(t, z, h)?;
                let target = centring_m(&model, &cell, &kernel)?;
                let c = h.powf(d + config.eps);
                cells.push((cell, target, c));
            }
        }
    }

    let miss_masks: Vec<Vec<bool>> = with_pool(config.threads, || {
        (0..reps)
            .into_par_iter()
            .map(|rep| -> Result<Vec<bool>> {
                let data = sample(&model, n, replication_seed(config.seed, rep as u64))?;
                cells
                    .iter()
                    .map(|(cell, target, c)| {
                        let covered = match confidence_interval(&data, cell, *c, &kernel) {
                            Ok(interval) => interval.contains(*target),
                            Err(Error::NoAdmissibleTheta | Error::EmptyWindow { .. }) => false,
                            Err(e) => return Err(e),
                        };
                        Ok(!covered)
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let miss_counts: Vec<usize> = miss_masks
        .iter()
        .map(|mask| mask.iter().filter(|&&miss| miss).count())
        .collect();
    let per_cell = cells
        .iter()
        .enumerate()
        .map(|(idx, (cell, _, c))| CellCoverage {
            cell: *cell,
            critical_value: *c,
            misses: miss_masks.iter().filter(|mask| mask[idx]).count(),
        })
        .collect();

    Ok(CoverageReport {
        covered_reps: miss_counts.iter().filter(|&&m| m == 0).count(),
        reps,
        miss_counts,
        per_cell,
    })
}

/// One size of the normalized-deviation trend experiment.
#[derive(Debug, Clone, Copy)]
pub struct TrendRow {
    pub n: usize,
    /// sup over the (z, h) grid of |W_n| / sqrt(2·n·h·log(1/h)).
    pub sup_norm: f64,
    /// The limit Δ(G)·‖K‖_{λ,2} implied by the closed-form Δ.
    pub limit: f64,
    pub ratio: f64,
}

/// Evaluates the normalized deviation sup for g = Id under the simulation
/// model at each size, against the closed-form limit.
pub fn theorem1_trend(
    sizes: &[usize],
    seed: u64,
    delta: f64,
    grid_z: usize,
    grid_h: usize,
    kernel_name: &str,
) -> Result<Vec<TrendRow>> {
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("sizes must be nonempty".into()));
    }
    if grid_z == 0 || grid_h == 0 {
        return Err(Error::InvalidConfig("grid counts must be positive".into()));
    }
    let kernel = Kernel::from_name(kernel_name, 1)?;
    let model = SimulationModel::new();
    let entry = FunctionClassEntry::identity()
        .with_cond_mean(|u| 1.0 / u)
        .with_delta_sq(|z| 2.0 / (z * z));

    let mut rows = Vec::with_capacity(sizes.len());
    for (idx, &n) in sizes.iter().enumerate() {
        let data = sample(&model, n, replication_seed(seed, idx as u64))?;
        let (h_lo, h_hi) = paper_bandwidth_interval(n, delta)?;
        let z_grid = uniform_grid(H_LO, H_HI, grid_z);
        let h_grid = BandwidthGrid::geometric(h_lo, h_hi, grid_h)?;
        let stat = sup_deviation(&data, &entry, &z_grid, h_grid.points(), &model, &kernel)?;
        let delta_sup = entry
            .delta_sq_sup(&z_grid)
            .expect("entry carries a closed-form delta");
        let limit = delta_sup.sqrt() * kernel.l2_norm_sq().sqrt();
        rows.push(TrendRow {
            n,
            sup_norm: stat.value,
            limit,
            ratio: stat.value / limit,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// density chaining and the figure

fn write_density_outputs(dir: &Path, config: &StudyConfig, rows: &[StudyRow]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut curves: Vec<(usize, DensityEstimate)> = Vec::new();
    for &n in &config.sizes {
        let xs: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n && r.sup_stat.is_finite())
            .map(|r| r.sup_stat)
            .collect();
        if xs.len() < 3 {
            continue;
        }
        let candidates = match density::default_candidates(&xs) {
            Ok(c) => c,
            Err(Error::ZeroRange) => continue,
            Err(e) => return Err(e),
        };
        let h = density::lscv_bandwidth(&xs, &candidates)?;
        let grid = density::default_grid(&xs, h, 256);
        let est = density::pr_density(&xs, h, &grid)?;
        let path = dir.join(format!("density_n{n}.csv"));
        std::fs::write(&path, density_csv(&est)).map_err(|e| Error::io(&path, e))?;
        curves.push((n, est));
    }
    if !curves.is_empty() {
        let path = dir.join("figure.svg");
        std::fs::write(&path, svg_figure(&curves)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// `x,fhat` rows of a density estimate.
pub fn density_csv(est: &DensityEstimate) -> String {
    let mut out = String::from("x,fhat\n");
    for (x, f) in est.grid.iter().zip(&est.values) {
        writeln!(out, "{x},{f}").expect("writing to String cannot fail");
    }
    out
}

/// Minimal hand-written SVG line plot of the per-size density curves.
fn svg_figure(curves: &[(usize, DensityEstimate)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const M: f64 = 50.0;
    let shades = ["#000000", "#909090", "#c8c8c8", "#505050", "#e0e0e0"];

    let x_min = curves
        .iter()
        .flat_map(|(_, c)| c.grid.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let x_max = curves
        .iter()
        .flat_map(|(_, c)| c.grid.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let y_max = curves
        .iter()
        .flat_map(|(_, c)| c.values.iter())
        .cloned()
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let sx = |x: f64| M + (x - x_min) / (x_max - x_min) * (W - 2.0 * M);
    let sy = |y: f64| H - M - y / y_max * (H - 2.0 * M);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<line x1=\"{M}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        H - M,
        W - M
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>",
        H - M
    );
    let _ = writeln!(
        svg,
        "<text x=\"{M}\" y=\"{}\" font-size=\"12\">{x_min:.3}</text>",
        H - M + 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{x_max:.3}</text>",
        W - M,
        H - M + 16.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{M}\" font-size=\"12\">{y_max:.3}</text>",
        M + 4.0
    );
    for (idx, (n, curve)) in curves.iter().enumerate() {
        let shade = shades[idx % shades.len()];
        let mut points = String::new();
        for (x, y) in curve.grid.iter().zip(&curve.values) {
            let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{shade}\" stroke-width=\"1.5\" points=\"{points}\"/>"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{shade}\">n={n}</text>",
            W - M - 70.0,
            M + 16.0 * idx as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

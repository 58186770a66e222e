use std::error::Error as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use elband::bandwidth::{cv_grid, cv_score, indicator_of_h, select_cv_bandwidth};
use elband::density;
use elband::empirical_likelihood::log_ratio;
use elband::harness::{
    self, calibration_study, coverage_study, run_study, theorem1_trend, StudyConfig,
};
use elband::model::centring_m;
use elband::{Cell, Dataset, Error, Kernel, SimulationModel};

/// Kernel estimators and smoothed empirical-likelihood confidence statements
/// for conditional probabilities, with Monte Carlo study drivers.
#[derive(Parser)]
#[command(name = "elband", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sup-statistic Monte Carlo study and write its CSV
    Simulate(SimulateArgs),
    /// Chi-square calibration of −2·log R_n(m) at a single cell
    Calibrate(CalibrateArgs),
    /// Normalized deviation sup for g = Id against its closed-form limit
    Theorem1Trend(TrendArgs),
    /// Coverage of the centring parameter under the rule c = h^(d+eps)
    Coverage(CoverageArgs),
    /// Evaluate one empirical-likelihood statistic on a CSV dataset
    ElStat(ElStatArgs),
    /// Leave-one-out cross-validation bandwidth for a CSV dataset
    CvBandwidth(CvBandwidthArgs),
    /// Parzen-Rosenblatt density of a value column with LSCV bandwidth
    Density(DensityArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// key=value config file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated sample sizes
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    grid_z: Option<usize>,
    #[arg(long)]
    grid_t: Option<usize>,
    #[arg(long)]
    grid_h: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Study CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-size density CSVs and the SVG figure
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Record measured per-replication wall times in the CSV (makes the
    /// file non-reproducible)
    #[arg(long)]
    timing: bool,
    /// Worker threads (0 = rayon default)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    z: f64,
    /// Bandwidth; defaults to n^(−1/5)
    #[arg(long)]
    h: Option<f64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
}

#[derive(Args)]
struct TrendArgs {
    #[arg(long, default_value = "1000,10000,100000")]
    sizes: String,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 21)]
    grid_z: usize,
    #[arg(long, default_value_t = 8)]
    grid_h: usize,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 5)]
    grid_z: usize,
    #[arg(long, default_value_t = 5)]
    grid_t: usize,
    #[arg(long, default_value_t = 2)]
    grid_h: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also print the marginal coverage of every grid cell
    #[arg(long)]
    per_cell: bool,
}

#[derive(Args)]
struct ElStatArgs {
    /// Dataset CSV with header y,z
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    z: f64,
    #[arg(long)]
    h: f64,
    /// Centring value θ for the constraint weights
    #[arg(long, conflicts_with = "model_centring")]
    theta: Option<f64>,
    /// Use θ = m(C,h,z) computed under the built-in simulation model
    #[arg(long)]
    model_centring: bool,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
}

#[derive(Args)]
struct CvBandwidthArgs {
    /// Dataset CSV with header y,z
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 30)]
    grid_size: usize,
    #[arg(long, default_value = "epanechnikov")]
    kernel: String,
}

#[derive(Args)]
struct DensityArgs {
    /// CSV of values, one per line (a non-numeric first line is skipped)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 256)]
    grid_points: usize,
    /// Output CSV (columns x,fhat); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let mut source = e.source();
        while let Some(cause) = source {
            eprintln!("  caused by: {cause}");
            source = cause.source();
        }
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Theorem1Trend(args) => trend(args),
        Command::Coverage(args) => coverage(args),
        Command::ElStat(args) => el_stat(args),
        Command::CvBandwidth(args) => cv_bandwidth(args),
        Command::Density(args) => density_cmd(args),
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidConfig(format!("sizes: {e}")))
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut config = match &args.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig::default(),
    };
    if let Some(sizes) = &args.sizes {
        config.sizes = parse_sizes(sizes)?;
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    if let Some(delta) = args.delta {
        config.delta = delta;
    }
    if let Some(g) = args.grid_z {
        config.grid_z = g;
    }
    if let Some(g) = args.grid_t {
        config.grid_t = g;
    }
    if let Some(g) = args.grid_h {
        config.grid_h = g;
    }
    if let Some(eps) = args.eps {
        config.eps = eps;
    }
    if let Some(kernel) = args.kernel {
        config.kernel = kernel;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    if let Some(svg) = args.svg {
        config.svg = Some(svg);
    }
    if args.timing {
        config.timing = true;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }

    let output = run_study(&config)?;
    println!("n,rows,median,iqr,hull_failures,flagged_rows");
    for s in &output.summaries {
        println!(
            "{},{},{},{},{},{}",
            s.n, config.reps, s.median, s.iqr, s.hull_failures, s.flagged_rows
        );
    }
    if let Some(path) = &config.out {
        eprintln!("wrote {} rows to {}", output.rows.len(), path.display());
    }
    if let Some(dir) = &config.svg {
        eprintln!("wrote density curves and figure.svg to {}", dir.display());
    }
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<(), Error> {
    let h = args.h.unwrap_or_else(|| (args.n as f64).powf(-0.2));
    let coverage = calibration_study(args.n, args.reps, args.t, args.z, h, args.seed, &args.kernel)?;
    println!("n,reps,t,z,h,chi2_q95,coverage");
    println!(
        "{},{},{},{},{},{},{}",
        args.n,
        args.reps,
        args.t,
        args.z,
        h,
        harness::CHI2_1_Q95,
        coverage
    );
    Ok(())
}

fn trend(args: TrendArgs) -> Result<(), Error> {
    let sizes = parse_sizes(&args.sizes)?;
    let rows = theorem1_trend(
        &sizes,
        args.seed,
        args.delta,
        args.grid_z,
        args.grid_h,
        &args.kernel,
    )?;
    println!("n,sup_norm,limit,ratio");
    for row in rows {
        println!("{},{},{},{}", row.n, row.sup_norm, row.limit, row.ratio);
    }
    Ok(())
}

fn coverage(args: CoverageArgs) -> Result<(), Error> {
    let config = StudyConfig {
        sizes: vec![args.n],
        reps: args.reps,
        delta: args.delta,
        grid_z: args.grid_z,
        grid_t: args.grid_t,
        grid_h: args.grid_h,
        seed: args.seed,
        kernel: args.kernel,
        eps: args.eps,
        threads: args.threads,
        ..StudyConfig::default()
    };
    let per_cell = args.per_cell;
    let report = coverage_study(args.n, args.reps, &config)?;
    println!("n,reps,eps,covered_reps,fraction");
    println!(
        "{},{},{},{},{}",
        args.n,
        report.reps,
        args.eps,
        report.covered_reps,
        report.covered_reps as f64 / report.reps as f64
    );
    if per_cell {
        println!("t,z,h,c,cell_coverage");
        for cc in &report.per_cell {
            println!(
                "{},{},{},{},{}",
                cc.cell.t,
                cc.cell.z,
                cc.cell.h,
                cc.critical_value,
                (report.reps - cc.misses) as f64 / report.reps as f64
            );
        }
    }
    Ok(())
}

fn el_stat(args: ElStatArgs) -> Result<(), Error> {
    let data = Dataset::from_csv_path(&args.input)?;
    let kernel = Kernel::from_name(&args.kernel, 1)?;
    let cell = Cell::new(args.t, args.z, args.h)?;
    let theta = match (args.theta, args.model_centring) {
        (Some(theta), _) => theta,
        (None, true) => centring_m(&SimulationModel::new(), &cell, &kernel)?,
        (None, false) => {
            return Err(Error::InvalidConfig(
                "pass either --theta or --model-centring".into(),
            ))
        }
    };
    let sol = log_ratio(&data, &cell, theta, &kernel)?;
    println!("theta,lambda,log_r,minus2_log_r,hull_ok");
    println!(
        "{},{},{},{},{}",
        theta,
        sol.lambda,
        sol.log_r,
        -2.0 * sol.log_r,
        sol.hull_ok
    );
    Ok(())
}

fn cv_bandwidth(args: CvBandwidthArgs) -> Result<(), Error> {
    let data = Dataset::from_csv_path(&args.input)?;
    let kernel = Kernel::from_name(&args.kernel, 1)?;
    let selected = select_cv_bandwidth(&data, args.delta, args.grid_size, &indicator_of_h, &kernel)?;
    println!("h,cv,selected");
    let grid = cv_grid(data.n(), args.delta, args.grid_size)?;
    for &h in grid.points() {
        match cv_score(&data, h, &indicator_of_h, &kernel) {
            Ok(score) => println!("{},{},{}", h, score, u8::from(h == selected)),
            Err(Error::EmptyLooWindow { .. }) => println!("{h},infeasible,0"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn density_cmd(args: DensityArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::Io {
        path: args.input.clone(),
        source: e,
    })?;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            // tolerate one header line
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: args.input.clone(),
                    line: idx + 1,
                    msg: e.to_string(),
                })
            }
        }
    }
    let candidates = density::default_candidates(&values)?;
    let h = density::lscv_bandwidth(&values, &candidates)?;
    let grid = density::default_grid(&values, h, args.grid_points);
    let est = density::pr_density(&values, h, &grid)?;
    let csv = harness::density_csv(&est);
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            eprintln!(
                "wrote {} grid points (bandwidth {}) to {}",
                est.grid.len(),
                est.bandwidth,
                path.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

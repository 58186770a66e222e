//! End-to-end checks of the CLI surfaces: flags, CSV shapes, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn elband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elband"))
        .args(args)
        .output()
        .expect("spawn elband")
}

fn stdout_lines(output: &Output) -> Vec<String> {
    String::from_utf8_lossy(&output.stdout)
        .lines()
        .map(str::to_string)
        .collect()
}

fn write_dataset(path: &Path) {
    let mut csv = String::from("y,z\n");
    // deterministic mixture spread over the window around z = 0.5
    for i in 0..40 {
        let z = 0.3 + 0.01 * i as f64;
        let y = if i % 3 == 0 { 0.4 } else { 1.9 };
        csv.push_str(&format!("{y},{z}\n"));
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn el_stat_reports_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input);
    let out = elband(&[
        "el-stat",
        "--input",
        input.to_str().unwrap(),
        "--t",
        "1.0",
        "--z",
        "0.5",
        "--h",
        "0.3",
        "--theta",
        "0.4",
        "--kernel",
        "uniform",
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "theta,lambda,log_r,minus2_log_r,hull_ok");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 5);
    assert_eq!(fields[0], "0.4");
    assert_eq!(fields[4], "true");
    let log_r: f64 = fields[2].parse().unwrap();
    let minus2: f64 = fields[3].parse().unwrap();
    assert!(log_r <= 0.0);
    assert!((minus2 + 2.0 * log_r).abs() < 1e-12);
}

#[test]
fn el_stat_model_centring_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input);
    let out = elband(&[
        "el-stat",
        "--input",
        input.to_str().unwrap(),
        "--t",
        "1.5",
        "--z",
        "0.5",
        "--h",
        "0.3",
        "--model-centring",
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    let theta: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    assert!(theta > 0.0 && theta < 1.0);
}

#[test]
fn el_stat_requires_a_centring_choice() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input);
    let out = elband(&[
        "el-stat",
        "--input",
        input.to_str().unwrap(),
        "--t",
        "1.0",
        "--z",
        "0.5",
        "--h",
        "0.3",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--theta or --model-centring"));
}

#[test]
fn cv_bandwidth_prints_table_with_one_selection() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("data.csv");
    write_dataset(&input);
    let out = elband(&[
        "cv-bandwidth",
        "--input",
        input.to_str().unwrap(),
        "--delta",
        "0.15",
        "--grid-size",
        "8",
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "h,cv,selected");
    assert_eq!(lines.len(), 9);
    let selected: Vec<&String> = lines[1..]
        .iter()
        .filter(|l| l.ends_with(",1"))
        .collect();
    assert_eq!(selected.len(), 1, "exactly one grid row must be selected");
}

#[test]
fn density_emits_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("values.csv");
    let values: Vec<String> = (0..30).map(|i| format!("{}", 1.0 + 0.1 * i as f64)).collect();
    std::fs::write(&input, format!("x\n{}\n", values.join("\n"))).unwrap();
    let out_csv = dir.path().join("density.csv");
    let out = elband(&[
        "density",
        "--input",
        input.to_str().unwrap(),
        "--grid-points",
        "64",
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,fhat"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 64);
    for row in rows {
        let (x, f) = row.split_once(',').unwrap();
        x.parse::<f64>().unwrap();
        assert!(f.parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn calibrate_reports_coverage() {
    let out = elband(&[
        "calibrate", "--n", "300", "--reps", "20", "--t", "1.5", "--z", "0.5", "--seed", "7",
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "n,reps,t,z,h,chi2_q95,coverage");
    let coverage: f64 = lines[1].split(',').next_back().unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&coverage));
}

#[test]
fn simulate_accepts_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("study.conf");
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    std::fs::write(&conf, "sizes=50\nreps=4\nseed=5\n").unwrap();
    let run_a = elband(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]);
    assert!(run_a.status.success());
    // same run spelled with explicit flags
    let run_b = elband(&[
        "simulate", "--sizes", "50", "--reps", "4", "--seed", "5", "--out",
        out_b.to_str().unwrap(),
    ]);
    assert!(run_b.status.success());
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );
    let text = std::fs::read_to_string(&out_a).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn simulate_emits_density_chain_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let figs = dir.path().join("figs");
    let out = elband(&[
        "simulate",
        "--sizes",
        "50,100",
        "--reps",
        "20",
        "--svg",
        figs.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for n in [50, 100] {
        let density = std::fs::read_to_string(figs.join(format!("density_n{n}.csv"))).unwrap();
        assert!(density.starts_with("x,fhat\n"));
        assert_eq!(density.lines().count(), 257);
    }
    let svg = std::fs::read_to_string(figs.join("figure.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn unknown_kernel_fails_with_context() {
    let out = elband(&["simulate", "--kernel", "sinc"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown kernel"));
}

#[test]
fn theorem1_trend_prints_ratio_table() {
    let out = elband(&["theorem1-trend", "--sizes", "500,1000", "--seed", "11"]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "n,sup_norm,limit,ratio");
    assert_eq!(lines.len(), 3);
}

#[test]
fn coverage_reports_fraction_and_per_cell_rows() {
    let out = elband(&[
        "coverage", "--n", "200", "--reps", "5", "--grid-z", "2", "--grid-t", "2", "--grid-h",
        "2", "--per-cell",
    ]);
    assert!(out.status.success());
    let lines = stdout_lines(&out);
    assert_eq!(lines[0], "n,reps,eps,covered_reps,fraction");
    assert_eq!(lines[2], "t,z,h,c,cell_coverage");
    assert_eq!(lines.len(), 3 + 8);
}

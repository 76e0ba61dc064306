use std::collections::BTreeMap;
use std::path::Path;

use flipscope::cli::{run_with_env, EXIT_CONFIG, EXIT_OK};

fn run(args: &[&str]) -> i32 {
    run_with_env(std::iter::once("flipscope").chain(args.iter().copied()), &BTreeMap::new())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn significant_digits(field: &str) -> usize {
    let mantissa = field.split(['e', 'E']).next().unwrap();
    mantissa.chars().filter(char::is_ascii_digit).count()
}

fn sweep_args<'a>(out: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "sweep", "--alpha-min", "0.45", "--alpha-max", "0.55", "--mu-min", "-0.002", "--mu-max", "0.001",
        "--n-alpha", "3", "--n-mu", "4", "--workers", workers, "--out", out,
    ]
}

#[test]
fn inverted_sweep_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let code = run(&[
        "sweep", "--alpha-min", "0.7", "--alpha-max", "0.3", "--mu-min", "-0.006", "--mu-max", "0.001",
        "--n-alpha", "4", "--n-mu", "4", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(!out.exists());
}

#[test]
fn sweep_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a", "b", "c"].iter().map(|n| dir.path().join(format!("{n}.csv"))).collect();
    for (path, workers) in paths.iter().zip(["2", "2", "1"]) {
        assert_eq!(run(&sweep_args(path.to_str().unwrap(), workers)), EXIT_OK);
    }
    let bytes: Vec<_> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
    let (header, rows) = read_csv(&paths[0]);
    assert_eq!(header, ["alpha", "mu", "zeta", "crossings", "termination"]);
    assert_eq!(rows.len(), 12);
    for row in &rows {
        for field in &row[..2] {
            let v: f64 = field.parse().unwrap();
            assert!(v == 0.0 || significant_digits(field) == 17, "{field}");
        }
    }
}

#[test]
fn flip_writes_one_located_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flip.csv");
    let code = run(&["flip", "--alpha-min", "0.2", "--alpha-max", "0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&out);
    assert_eq!(header[..3], ["kind", "alpha", "mu"]);
    assert_eq!(rows.len(), 1);
    let alpha: f64 = rows[0][1].parse().unwrap();
    assert!((alpha - 0.3694818).abs() < 1e-6, "alpha* = {alpha}");
    assert_eq!(significant_digits(&rows[0][1]), 17);
}

#[test]
fn returnmap_writes_iterate_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rm.csv");
    let code = run(&[
        "returnmap", "--alpha", "0.5", "--mu", "-0.007076768", "--n", "300", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["x_i", "x_ip1"]);
    assert!(rows.len() >= 290, "{} rows", rows.len());
    for w in rows.windows(2) {
        assert_eq!(w[0][1], w[1][0]);
    }
}

#[test]
fn point_commands_require_alpha_and_mu() {
    assert_eq!(run(&["returnmap", "--alpha", "0.5", "--n", "10"]), EXIT_CONFIG);
    assert_eq!(run(&["orbit", "--mu", "-0.005"]), EXIT_CONFIG);
}

#[test]
fn unknown_inputs_are_config_errors() {
    assert_eq!(run(&["resonate"]), EXIT_CONFIG);
    assert_eq!(run(&["sweep", "--resolution", "3"]), EXIT_CONFIG);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "alpha = 0.5\nresolution = 3\n").unwrap();
    assert_eq!(run(&["returnmap", "--config", cfg.to_str().unwrap(), "--mu", "-0.007"]), EXIT_CONFIG);

    let env = BTreeMap::from([("FLIPSCOPE_RESOLUTION".to_string(), "3".to_string())]);
    let code = run_with_env(["flipscope", "returnmap", "--alpha", "0.5", "--mu", "-0.007"], &env);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn flags_override_environment_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "alpha_min = 0.7\nalpha_max = 0.3\nmu_min = -0.002\nmu_max = 0.001\n").unwrap();
    let out = dir.path().join("z.csv");
    let env = BTreeMap::from([
        ("FLIPSCOPE_CONFIG".to_string(), cfg.to_str().unwrap().to_string()),
        ("FLIPSCOPE_ALPHA_MIN".to_string(), "0.45".to_string()),
    ]);
    let argv = [
        "flipscope", "sweep", "--alpha-max", "0.55", "--n-alpha", "2", "--n-mu", "2", "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(run_with_env(argv, &env), EXIT_OK);
    let (_, rows) = read_csv(&out);
    let alphas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(alphas.iter().all(|a| (0.45..=0.55).contains(a)), "{alphas:?}");
}

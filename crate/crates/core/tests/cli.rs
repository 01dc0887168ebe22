mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::grid;
use spatial_gof::goftest::{bootstrap_test, QuadratureGrid, TestConfig, WeightFunction, DEFAULT_QUAD_POINTS};
use spatial_gof::io::write_dataset_file;
use spatial_gof::simulation::{generate_field, parse_scenario};
use spatial_gof::{BandwidthMatrix, KernelSpec, SpatialDataset, TrendModel, VariogramFamily};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spatial-gof"));
    cmd.env_remove("SPATIAL_GOF_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, data: &SpatialDataset) -> PathBuf {
    let p = dir.join(name);
    write_dataset_file(data, &p).unwrap();
    p
}

fn null_field(seed: u64) -> SpatialDataset {
    let cfg = parse_scenario(&format!(
        "seed = {seed}\ntrend = \"m1\"\nc = 0.0\nsigma = 0.4\nrange = 0.2\nbandwidths = [[0.8, 0.8]]\n\
         [design]\nkind = \"regular-grid\"\nside = 10\n"
    ))
    .unwrap();
    generate_field(&cfg, 0).unwrap().dataset
}

#[test]
fn perfect_fit_accepts_with_zero_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "plane.csv", &grid(8, |x, y| 2.0 + x + y));
    let out = run(&["test", "--data", data.to_str().unwrap(), "--bandwidth", "0.8,0.8", "--B", "99", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["t_n"], 0.0);
    assert_eq!(doc["p_value"], 1.0);
    assert_eq!(doc["B"], 99);
    assert_eq!(doc["reject"], false);
}

#[test]
fn non_numeric_cell_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "x,y,z\n0,0,1\n1,0,2\n0,1,abc\n1,1,3\n").unwrap();
    let out = run(&["test", "--data", p.to_str().unwrap(), "--bandwidth", "1,1", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("error [parse]") && err.contains("line 4"), "{err}");
}

#[test]
fn trace_rows_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "null.csv", &null_field(3));
    let args = [
        "trace",
        "--data",
        data.to_str().unwrap(),
        "--bandwidth-grid",
        "0.6:1.0:5,0.8:0.8:1",
        "--B",
        "49",
        "--seed",
        "77",
    ];
    let a = run(&args);
    assert!(matches!(a.status.code(), Some(0 | 2)), "{}", stderr(&a));
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h1,h2,p_value,reason"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for row in &rows {
        let p: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((1.0 / 50.0..=1.0).contains(&p));
    }
    let b = bin().args(args).env("SPATIAL_GOF_THREADS", "2").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn empty_bandwidth_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "null.csv", &null_field(4));
    let out = run(&["trace", "--data", data.to_str().unwrap(), "--bandwidth-grid", "", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty bandwidth grid"));
}

#[test]
fn simulate_rejects_zero_replicates() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/table1_s04_ae02_n225.cfg");
    let out = run(&["simulate", "--config", cfg, "--replicates", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("replicates"));
}

#[test]
fn simulate_writes_table_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        "seed = 8\ntrend = \"m1\"\nc = 0.0\nsigma = 0.4\nrange = 0.2\nbandwidths = [[0.8, 0.8]]\n\
         replicates = 3\nbootstrap = 19\n[design]\nkind = \"regular-grid\"\nside = 8\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("sigma,a_e,c,n,h1,h2,rejections,replicates,proportion\n"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["grid_convention"], "endpoints");
    assert_eq!(meta["config"]["seed"], 8);
}

#[test]
fn written_dataset_gives_identical_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let data = null_field(12);
    let path = write(dir.path(), "field.csv", &data);
    let out = run(&[
        "test",
        "--data",
        path.to_str().unwrap(),
        "--bandwidth",
        "0.7,0.9",
        "--B",
        "39",
        "--seed",
        "5",
        "--format",
        "csv",
    ]);
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h1,h2,t_n,p_value,B,seed,reject"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t_cli: f64 = fields[2].parse().unwrap();

    let report = bootstrap_test(
        &data,
        &TrendModel::linear(2),
        VariogramFamily::Exponential,
        &KernelSpec::triweight(2),
        &BandwidthMatrix::diagonal_from(vec![0.7, 0.9]).unwrap(),
        &WeightFunction::ConstantOne,
        &QuadratureGrid::bounding(2, data.locations(), DEFAULT_QUAD_POINTS).unwrap(),
        &TestConfig {
            replicates: 39,
            ..TestConfig::default()
        },
        5,
    )
    .unwrap();
    assert_eq!(t_cli.to_bits(), report.t_n.to_bits());
    assert_eq!(fields[3].parse::<f64>().unwrap(), report.p_value);
}

#[test]
fn omitted_seed_is_printed_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "field.csv", &null_field(2));
    let base = ["test", "--data", path.to_str().unwrap(), "--bandwidth", "0.8,0.8", "--B", "19"];
    let first = run(&base);
    let err = stderr(&first);
    let seed = err.lines().find_map(|l| l.strip_prefix("seed: ")).expect("seed line").trim().to_string();
    let mut again: Vec<&str> = base.to_vec();
    again.extend(["--seed", &seed]);
    assert_eq!(first.stdout, run(&again).stdout);
}

#[test]
fn variogram_of_white_noise_is_nugget_dominated() {
    let dir = tempfile::tempdir().unwrap();
    let noise = spatial_gof::rng::standard_normals(&mut spatial_gof::rng::rng_from_seed(4), 400);
    let mut i = 0;
    let data = grid(20, |x, y| {
        i += 1;
        1.0 + x - y + 0.5 * noise[i - 1]
    });
    let path = write(dir.path(), "noise.csv", &data);
    let fits = dir.path().join("fits.csv");
    let out = run(&["variogram", "--data", path.to_str().unwrap(), "--fits-out", fits.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let curves = stdout(&out);
    assert!(curves.starts_with("lag,gamma,npairs,gamma_exponential,gamma_spherical,gamma_rational_quadratic\n"));
    let table = std::fs::read_to_string(fits).unwrap();
    let expo: Vec<&str> = table.lines().find(|l| l.starts_with("exponential,")).unwrap().split(',').collect();
    let (nugget, psill, range): (f64, f64, f64) = (expo[1].parse().unwrap(), expo[2].parse().unwrap(), expo[3].parse().unwrap());
    // Flat: either the nugget carries the sill or the structured part decays
    // within one grid step.
    assert!(nugget >= 0.5 * (nugget + psill) || range < 1.0 / 19.0, "{nugget} {psill} {range}");
    assert!(((nugget + psill) - 0.25).abs() < 0.05);
}

#[test]
fn variogram_of_two_points_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("two.csv");
    std::fs::write(&p, "x,y,z\n0,0,1\n1,1,2\n").unwrap();
    let out = run(&["variogram", "--data", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error ["), "{}", stderr(&out));
}

#[test]
fn in_process_entry_point_matches_binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "plane.csv", &grid(8, |x, y| x - y));
    let out = dir.path().join("r.json");
    let code = spatial_gof::cli::main_with_args([
        "spatial-gof",
        "test",
        "--data",
        data.to_str().unwrap(),
        "--bandwidth",
        "0.9,0.9",
        "--B",
        "19",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(std::fs::read_to_string(out).unwrap().contains("\"p_value\": 1.0"));
    assert_eq!(spatial_gof::cli::main_with_args(["spatial-gof", "test", "--bogus"]), 1);
}

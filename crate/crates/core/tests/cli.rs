use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SPREADING: &str = "\
# free gaussian
x_min = -20
x_max = 20
n = 512
sigma0 = 1
dt = 1e-3
t_final = 0.2
observe_stride = 20
";

fn entroflux(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entroflux"))
        .args(args)
        .current_dir(dir)
        .env("ENTROFLUX_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, config: &str, out: &str) -> Output {
    fs::write(dir.join(format!("{out}.cfg")), config).unwrap();
    entroflux(&[sub, "--config", &format!("{out}.cfg"), "--out", out, "--quiet"], dir)
}

fn parse_series(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn simulate_writes_schema_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_in(tmp.path(), "simulate", SPREADING, "a");
    let b = run_in(tmp.path(), "simulate", SPREADING, "b");
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    for file in ["series.csv", "summary.json"] {
        let x = fs::read(tmp.path().join("a").join(file)).unwrap();
        let y = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between reruns");
    }
    let series = fs::read_to_string(tmp.path().join("a/series.csv")).unwrap();
    let (header, rows) = parse_series(&series);
    assert_eq!(
        header.join(","),
        "t,norm,I,dIdt_fd,rhs_eq16,boundary_flux,rhs_eq15,residual13_l2,residual13_linf,residual9_l2,floored_points"
    );
    assert_eq!(rows.len(), 11);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert!(rows.iter().flatten().all(|v| v.is_finite()));
    // 17 significant digits
    let first_value = series.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    assert_eq!(first_value.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["sign_witness_fraction"], 1.0);
}

#[test]
fn zero_duration_run_emits_single_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SPREADING.replace("t_final = 0.2", "t_final = 0");
    let out = run_in(tmp.path(), "simulate", &cfg, "empty");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = parse_series(&fs::read_to_string(tmp.path().join("empty/series.csv")).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
}

#[test]
fn coherent_simulation_matches_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    // The rate of a coherent state is essentially zero, so the relative rate
    // check would otherwise see I stepping as tail points cross the floor.
    let cfg = "x_min = -20\nx_max = 20\nn = 512\nstate = coherent\nomega = 1\namplitude = 1\n\
               dt = 1e-3\nt_final = 3\nobserve_stride = 5\nreg_floor = 1e-20\n";
    assert_eq!(run_in(tmp.path(), "simulate", cfg, "sim").status.code(), Some(0));
    assert_eq!(run_in(tmp.path(), "oracle", cfg, "ora").status.code(), Some(0));
    let (header, sim) = parse_series(&fs::read_to_string(tmp.path().join("sim/series.csv")).unwrap());
    let (_, ora) = parse_series(&fs::read_to_string(tmp.path().join("ora/series.csv")).unwrap());
    assert_eq!(sim.len(), ora.len());
    for (s, o) in sim.iter().zip(&ora) {
        for (col, (a, b)) in header.iter().zip(s.iter().zip(o)) {
            assert!((a - b).abs() < 1e-6, "{col} at t = {}: {a} vs {b}", s[0]);
        }
    }
}

#[test]
fn snapshots_are_written_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SPREADING}snapshots = true\n");
    assert_eq!(run_in(tmp.path(), "simulate", &cfg, "snap").status.code(), Some(0));
    let mut names: Vec<String> = fs::read_dir(tmp.path().join("snap/snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.len(), 11);
    assert_eq!(names[0], "field_000000.csv");
    let dump = fs::read_to_string(tmp.path().join("snap/snapshots/field_000010.csv")).unwrap();
    assert_eq!(dump.lines().count(), 513);
}

#[test]
fn config_errors_exit_one_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), "simulate", &SPREADING.replace("n = 512", "n = 1000"), "bad");
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4") && stderr.contains("power of two"), "{stderr}");

    let out = run_in(tmp.path(), "simulate", &SPREADING.replace("dt = 1e-3", "dt = 1.0"), "big");
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 6") && stderr.contains("time step too large"), "{stderr}");

    let out = entroflux(&["simulate", "--config", "missing.cfg", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = entroflux(&["simulate"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(entroflux(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn tolerance_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{SPREADING}tol_rate = 1e-30\n");
    let out = run_in(tmp.path(), "simulate", &cfg, "strict");
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("strict/series.csv").exists());
}

#[test]
fn sweep_and_binning_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = "x_min = -20\nx_max = 20\nn = 256\nsigma0 = 1\nt_c = 1\nepsilons = 0.4, 0.2, 0.1\nobserve_interval = 0.05\n";
    let out = run_in(tmp.path(), "sweep", sweep, "sweep");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));

    let binning = "x_min = -12.8\nx_max = 12.8\nn = 2048\nsigma0 = 1\nbin_widths = 0.4, 0.2, 0.1\n";
    let out = run_in(tmp.path(), "binning", binning, "bins");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("bins/binning.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

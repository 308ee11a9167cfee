use std::path::Path;
use std::process::Command;

use nodecoy_cli::output::COLUMNS;

fn nodecoy(config: &str, dir: &Path, out: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nodecoy"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .args(extra)
        .env("NODECOY_THREADS", "1")
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

const LOSS_SWEEP: &str = "\
[run]
mode = asymptotic
protocols = BB84, NPAB, SARG04

[sweep]
axis = loss_db
values = 0:20:10
optimize_mu = false

[source]
mu = 0.1

[output]
timing = false
";

#[test]
fn loss_sweep_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = nodecoy(LOSS_SWEEP, dir.path(), "a.csv", &[]);
    assert_eq!(code, 0, "{err}");
    let mut rd = csv::Reader::from_path(dir.path().join("a.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), COLUMNS.to_vec());
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    let cells: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[2].to_string())).collect();
    assert_eq!(cells[0], ("BB84".into(), "0.0000000000000000e0".into()));
    assert_eq!(cells[8].0, "SARG04");
    for r in &rows {
        let rate: f64 = r[5].parse().unwrap();
        assert!(rate >= 0.0, "{r:?}");
        assert!(rate > 0.0 || &r[2] != "0.0000000000000000e0", "{r:?}");
        assert_eq!(&r[10], "");
        assert_eq!(&r[6], "");
    }
    assert!(dir.path().join("a.csv.meta.json").exists());
}

#[test]
fn rerun_is_byte_identical_and_metadata_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nodecoy(LOSS_SWEEP, dir.path(), "a.csv", &[]).0, 0);
    assert_eq!(nodecoy(LOSS_SWEEP, dir.path(), "b.csv", &[]).0, 0);
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["parameters"]["source.p_z"], "0.5");
    assert_eq!(meta["cutoff_per_protocol"]["SARG04"], 3);
    let text = meta["config"].as_str().unwrap();
    assert_eq!(nodecoy(text, dir.path(), "c.csv", &[]).0, 0);
    assert_eq!(a, std::fs::read(dir.path().join("c.csv")).unwrap());
}

#[test]
fn csv_values_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LOSS_SWEEP.replace("timing = false", "timing = true");
    assert_eq!(nodecoy(&cfg, dir.path(), "a.csv", &[]).0, 0);
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    for r in rd.records() {
        let r = r.unwrap();
        for i in [2, 3, 4, 5, 7, 10] {
            let v: f64 = r[i].parse().unwrap();
            assert_eq!(nodecoy_cli::output::format_value(v), &r[i]);
        }
    }
}

#[test]
fn plot_script_is_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "protocol = BB84\nloss_db = 5\n[sweep]\noptimize_mu = false\n";
    assert_eq!(nodecoy(cfg, dir.path(), "p.csv", &["--emit-plot-script"]).0, 0);
    let script = std::fs::read_to_string(dir.path().join("p.plot.py")).unwrap();
    assert!(script.contains("set_yscale(\"log\")"));
    assert!(script.contains("p.csv"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = nodecoy("[channel]\nlosss_db = 3\n", dir.path(), "x.csv", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("losss_db"), "{err}");
    let (code, err) = nodecoy("mode = finite\n", dir.path(), "x.csv", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("finite.n"), "{err}");
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn failed_cells_above_threshold_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    // BB84 only admits K = 1, so the K = 2 cell fails.
    let cfg = "protocol = BB84\n[sweep]\naxis = cutoff_K\nvalues = 1,2\noptimize_mu = false\n";
    let (code, _) = nodecoy(cfg, dir.path(), "k.csv", &[]);
    assert_eq!(code, 3);
    let meta = std::fs::read_to_string(dir.path().join("k.csv.meta.json")).unwrap();
    assert!(meta.contains("requires photon cutoff"));
    let lenient = format!("{cfg}[run]\nmax_failed_cells = 1\n");
    assert_eq!(nodecoy(&lenient, dir.path(), "k.csv", &[]).0, 0);
}

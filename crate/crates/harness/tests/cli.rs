use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tpm_core::io::{read_spectrum, write_tensor};
use tpm_core::{benchmark_spectrum, Spectrum64, Tensor3};
use tpm_harness::table::Table;

fn tpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpm")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tpm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn benchmark_file(dir: &Path, d: usize) -> String {
    let path = dir.join("t.txt");
    let t = Tensor3::from_components(&benchmark_spectrum::<f64>(d).unwrap());
    write_tensor(fs::File::create(&path).unwrap(), &t).unwrap();
    path.to_str().unwrap().to_string()
}

fn values(path: &Path) -> Vec<f64> {
    let s: Spectrum64 = read_spectrum(fs::read(path).unwrap().as_slice()).unwrap();
    s.values()
}

#[test]
fn decompose_recovers_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let input = benchmark_file(dir.path(), 8);
    let out = dir.path().join("s.txt");
    ok(&["decompose", &input, "-k", "3", "--seed", "4", "--out", out.to_str().unwrap()]);
    let v = values(&out);
    for (got, want) in v.iter().zip([1.0, 0.75, 0.5]) {
        assert!((got - want).abs() < 1e-9, "{v:?}");
    }
    let stdout = ok(&["decompose", &input, "-k", "1", "-L", "3", "-R", "20"]).stdout;
    assert!(String::from_utf8(stdout).unwrap().starts_with("spectrum d=8 k=1"));
}

#[test]
fn private_run_writes_a_budget_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = benchmark_file(dir.path(), 6);
    let out = dir.path().join("p.txt");
    ok(&["private", &input, "-k", "1", "-L", "2", "-R", "20", "--epsilon", "1e9", "--out", out.to_str().unwrap()]);
    let report = fs::read_to_string(dir.path().join("p.txt.budget")).unwrap();
    assert!(report.contains("K = 42\n"), "{report}");
    assert!(report.contains("draws = 242\n"), "{report}");
    assert!((values(&out)[0] - 1.0).abs() < 1e-3);
}

#[test]
fn recorded_stream_replays_to_the_same_answer() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("samples.txt");
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let common = ["-k", "2", "-L", "3", "-R", "5", "--batch", "50", "--seed", "3"];
    let mut first = vec!["stream", "--generator-dim", "6", "--record", rec.to_str().unwrap(), "--out", a.to_str().unwrap()];
    first.extend(common);
    ok(&first);
    let mut second = vec!["stream", "--samples", rec.to_str().unwrap(), "--out", b.to_str().unwrap()];
    second.extend(common);
    ok(&second);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn experiment_tables_reproduce_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(&cfg, "# small sweep\ndims=6,8\ntrials=2\nopnorm_restarts=2\nopnorm_iters=20\n").unwrap();
    let csv = dir.path().join("phase.csv");
    let svg = dir.path().join("phase.svg");
    let (c, s) = (csv.to_str().unwrap(), svg.to_str().unwrap());
    ok(&["phase", "--config", cfg.to_str().unwrap(), "--sigma-grid", "0,0.1,10", "-L", "3", "-R", "5", "--seed", "9", "--out", c, "--svg", s]);
    let table = Table::read(fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.seed(), Some(9));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(dir.path().join("phase.csv.trials.csv").exists());
    assert!(String::from_utf8(ok(&["reproduce", c]).stdout).unwrap().starts_with("identical"));

    let text = fs::read_to_string(&csv).unwrap();
    let (head, _) = text.trim_end().rsplit_once(',').unwrap();
    fs::write(&csv, format!("{head},0.5\n")).unwrap();
    assert!(!tpm(&["reproduce", c]).status.success());
}

#[test]
fn curve_commands_accept_their_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let o = out.to_str().unwrap();
    ok(&["stream-curve", "--source", "constant", "--d", "5", "--batch-sizes", "1,2", "--reps", "2", "--out", o]);
    assert_eq!(Table::read(fs::File::open(&out).unwrap()).unwrap().rows.len(), 2);
    ok(&["dp-curve", "--d", "10", "--coherent", "--epsilons", "1e6", "--reps", "2", "-L", "2", "-R", "5", "--out", o]);
    ok(&["whiten", "--dims", "6,8", "--draws", "2", "--set", "noise=0.01", "--out", o]);
    let bad = tpm(&["whiten", "--set", "dimz=3", "--out", o]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("dimz"));
}

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_strip-anderson"));
    c.env_remove("STRIP_ANDERSON_THREADS").env_remove("STRIP_ANDERSON_CACHE");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model2.json"), r#"{"preset": "two-coupled-strings-bernoulli"}"#).unwrap();
    dir
}

const IDS_ARGS: &[&str] = &[
    "ids",
    "--model",
    "model2.json",
    "--emin",
    "-2",
    "--emax",
    "5",
    "--esteps",
    "140",
    "--box-length",
    "100",
    "--mesh",
    "0.01",
    "--seed",
    "7",
    "--out",
    "ids.csv",
];

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ids_rows_match_grid_and_manifest_is_written() {
    let dir = workspace();
    ok(&run_in(dir.path(), IDS_ARGS));
    let text = std::fs::read_to_string(dir.path().join("ids.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "energy,ids,box_length,mesh,boundary,seed");
    assert_eq!(lines.count(), 140);
    let m = manifest(&dir.path().join("ids.csv.manifest.json"));
    assert_eq!(m["subcommand"], "ids");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["params"]["ids"]["params"]["box_length"], 100);
    assert_eq!(m["model"]["channels"], 2);
    assert!(m["version"].as_str().unwrap().starts_with("strip-anderson "));
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn ids_values_are_monotone_and_formatted() {
    let dir = workspace();
    ok(&run_in(dir.path(), IDS_ARGS));
    let mut reader = csv::Reader::from_path(dir.path().join("ids.csv")).unwrap();
    let mut last = -1.0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let field = &rec[1];
        assert!(field.contains('e'), "fixed exponent format: {field}");
        let v: f64 = field.parse().unwrap();
        assert!(v >= last);
        last = v;
    }
}

#[test]
fn lyapunov_is_byte_identical_across_runs_and_thread_counts() {
    let dir = workspace();
    let args = ["lyapunov", "--model", "model2.json", "--energy", "3", "--cells", "100000", "--seed", "7"];
    let a = run_in(dir.path(), &args);
    let b = run_in(dir.path(), &args);
    let c = bin().current_dir(dir.path()).env("STRIP_ANDERSON_THREADS", "1").args(args).output().unwrap();
    ok(&a);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let header = String::from_utf8(a.stdout).unwrap();
    assert!(header.starts_with("energy,gamma_1,gamma_2,gamma_3,gamma_4,se_1,se_2,se_3,se_4,cells,seed\n"));
}

#[test]
fn thouless_schema() {
    let dir = workspace();
    ok(&run_in(dir.path(), IDS_ARGS));
    ok(&run_in(
        dir.path(),
        &[
            "lyapunov",
            "--emin",
            "-2",
            "--emax",
            "5",
            "--esteps",
            "140",
            "--cells",
            "2000",
            "--seed",
            "7",
            "--out",
            "gamma.csv",
        ],
    ));
    ok(&run_in(dir.path(), &["thouless", "--ids", "ids.csv", "--gamma", "gamma.csv", "--out", "fit.json"]));
    let fit = manifest(&dir.path().join("fit.json"));
    assert!(fit["alpha"].is_f64());
    assert!(fit["rms"].as_f64().unwrap() >= 0.0);
    assert!(fit.get("alpha_vs_rew_i").is_some());
    let residuals = std::fs::read_to_string(dir.path().join("fit.residuals.csv")).unwrap();
    assert!(residuals.starts_with("energy,gamma_sum,thouless_rhs,residual\n"));
    assert!(dir.path().join("fit.json.manifest.json").exists());
    assert!(dir.path().join("fit.residuals.csv.manifest.json").exists());
}

#[test]
fn cache_is_reused_by_thouless() {
    let dir = workspace();
    let grid = [
        "--emin",
        "-1.5",
        "--emax",
        "10",
        "--esteps",
        "231",
        "--box-length",
        "50",
        "--seed",
        "3",
        "--cache-dir",
        "cache",
    ];
    let mut ids_args = vec!["ids", "--out", "ids.csv"];
    ids_args.extend(grid);
    ok(&run_in(dir.path(), &ids_args));
    std::fs::write(
        dir.path().join("gamma.csv"),
        (0..20).fold("energy,gamma_sum\n".to_string(), |acc, k| acc + &format!("{},0.1\n", 0.5 + 0.4 * k as f64)),
    )
    .unwrap();
    let mut th = vec!["thouless", "--gamma", "gamma.csv", "--out", "fit.json"];
    th.extend(grid);
    ok(&run_in(dir.path(), &th));
    let m = manifest(&dir.path().join("fit.json.manifest.json"));
    let notes: Vec<String> = serde_json::from_value(m["notes"].clone()).unwrap();
    assert!(notes.iter().any(|n| n.starts_with("ids cache hit")), "{notes:?}");
    assert_eq!(std::fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);
}

#[test]
fn replay_reproduces_output_bytes() {
    let dir = workspace();
    ok(&run_in(dir.path(), &["fk-laplace", "--t", "1", "--paths", "300", "--seed", "5", "--out", "fk.csv"]));
    let first = std::fs::read(dir.path().join("fk.csv")).unwrap();
    std::fs::remove_file(dir.path().join("fk.csv")).unwrap();
    ok(&bin().args(["replay", dir.path().join("fk.csv.manifest.json").to_str().unwrap()]).output().unwrap());
    assert_eq!(std::fs::read(dir.path().join("fk.csv")).unwrap(), first);
}

#[test]
fn remaining_subcommands_produce_documented_headers() {
    let dir = workspace();
    let w = run_in(dir.path(), &["wfunc", "--energy", "3", "--a", "0.5", "--realizations", "10"]);
    ok(&w);
    assert!(
        String::from_utf8_lossy(&w.stdout).starts_with("e,a,re_w,im_w,se_re,se_im,re_trG,im_trG,L_w,realizations\n")
    );
    let r = run_in(dir.path(), &["rank", "--energy", "3"]);
    ok(&r);
    assert!(String::from_utf8_lossy(&r.stdout).starts_with("energy,rank,n_generators,min_power_used"));
    let b = run_in(dir.path(), &["bounds", "--emin", "2.5", "--emax", "4.5", "--samples", "10"]);
    ok(&b);
    let report: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert!(report["max_growth_ratio"].as_f64().unwrap() < 1.0);
    ok(&run_in(
        dir.path(),
        &["ids", "--emin", "0", "--emax", "4", "--esteps", "200", "--box-length", "20", "--out", "i.csv"],
    ));
    let h = run_in(dir.path(), &["hoelder", "--input", "i.csv", "--out", "h.json"]);
    ok(&h);
    let est = manifest(&dir.path().join("h.json"));
    let alpha = est["alpha_hat"].as_f64().unwrap();
    assert!(alpha > 0.0 && alpha <= 1.0);
}

#[test]
fn exit_codes() {
    let dir = workspace();
    assert_eq!(run_in(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["ids", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["ids", "--emin", "1", "--emax", "0", "--esteps", "5"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["lyapunov", "--model", "missing.json", "--energy", "1"]).status.code(), Some(1));
    assert_eq!(run_in(dir.path(), &["--help"]).status.code(), Some(0));
    // Paths so coarse that exp(-Δs V) overflows.
    let overflow = run_in(dir.path(), &["fk-laplace", "--t", "1e6", "--time-step", "1e4", "--paths", "4"]);
    assert_eq!(overflow.status.code(), Some(2), "{}", String::from_utf8_lossy(&overflow.stderr));
    let bad_env = bin()
        .current_dir(dir.path())
        .env("STRIP_ANDERSON_THREADS", "many")
        .args(["rank", "--energy", "3"])
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(1));
}

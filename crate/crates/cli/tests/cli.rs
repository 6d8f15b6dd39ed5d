use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kglauber::io::{parse_csv, read_telemetry, write_dense, write_vector};
use kglauber::model::gaussian_model;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kglauber"));
    c.env_remove("KGLAUBER_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn model_files(dir: &TempDir, n: usize, norm: f64, seed: u64) -> (PathBuf, PathBuf) {
    let m = gaussian_model(n, norm, 0.3, seed).unwrap();
    let j = dir.path().join(format!("J{n}_{seed}.csv"));
    let h = dir.path().join(format!("h{n}_{seed}.txt"));
    write_dense(&j, &m).unwrap();
    write_vector(&h, m.field()).unwrap();
    (j, h)
}

#[test]
fn zero_couplings_sample_is_a_single_leaf() {
    let dir = TempDir::new().unwrap();
    let j = dir.path().join("J.csv");
    std::fs::write(&j, "0,0,0,0\n0,0,0,0\n0,0,0,0\n0,0,0,0\n").unwrap();
    let out = dir.path().join("x.txt");
    let tel = dir.path().join("t.json");
    let o = run(&[
        "sample",
        "--J",
        s(&j),
        "--seed",
        "7",
        "--out",
        s(&out),
        "--telemetry",
        s(&tel),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l == "1" || l == "-1"));
    let t = read_telemetry(&tel).unwrap();
    assert_eq!(t.node_count, 1);
    assert_eq!(t.schema_version, kglauber::SCHEMA_VERSION);
}

#[test]
fn same_seed_same_bytes_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let (j, h) = model_files(&dir, 40, 0.5, 3);
    let mut outputs = Vec::new();
    for threads in ["1", "2", "8", "1"] {
        let out = dir.path().join(format!("x{}.txt", outputs.len()));
        let o = run(&[
            "sample",
            "--J",
            s(&j),
            "--h",
            s(&h),
            "--seed",
            "11",
            "--threads",
            threads,
            "--c3",
            "0.3",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let other = run(&[
        "sample",
        "--J",
        s(&j),
        "--h",
        s(&h),
        "--seed",
        "12",
        "--c3",
        "0.3",
    ]);
    assert_ne!(other.stdout, outputs[0]);
}

#[test]
fn thread_count_from_environment() {
    let dir = TempDir::new().unwrap();
    let (j, _) = model_files(&dir, 6, 0.3, 1);
    let o = bin()
        .args(["sample", "--J", s(&j)])
        .env("KGLAUBER_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = bin()
        .args(["sample", "--J", s(&j)])
        .env("KGLAUBER_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}

#[test]
fn piped_samples_pass_verification() {
    let dir = TempDir::new().unwrap();
    let (j, h) = model_files(&dir, 4, 0.5, 9);
    let mut stream = Vec::new();
    for seed in 0..1500 {
        let o = run(&[
            "sample",
            "--J",
            s(&j),
            "--h",
            s(&h),
            "--seed",
            &seed.to_string(),
        ]);
        assert!(o.status.success());
        stream.extend_from_slice(&o.stdout);
    }
    let all = dir.path().join("all.txt");
    std::fs::write(&all, &stream).unwrap();
    let o = run(&[
        "verify",
        "--samples",
        s(&all),
        "--J",
        s(&j),
        "--h",
        s(&h),
        "--eps",
        "0.1",
    ]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{table}");
    assert!(table.contains("empirical TV") && table.contains("PASS"));

    // a stream whose length is not a multiple of n
    std::fs::write(&all, "1\n-1\n1\n").unwrap();
    let o = run(&["verify", "--samples", s(&all), "--J", s(&j), "--h", s(&h)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn biased_samples_fail_verification() {
    let dir = TempDir::new().unwrap();
    let (j, h) = model_files(&dir, 4, 0.5, 9);
    let all = dir.path().join("all.txt");
    std::fs::write(&all, "1\n1\n1\n1\n".repeat(2000)).unwrap();
    let o = run(&["verify", "--samples", s(&all), "--J", s(&j), "--h", s(&h)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let asym = dir.path().join("asym.csv");
    std::fs::write(&asym, "0,1\n0,0\n").unwrap();
    assert_eq!(run(&["sample", "--J", s(&asym)]).status.code(), Some(3));

    let garbage = dir.path().join("garbage.csv");
    std::fs::write(&garbage, "0,x\n1,0\n").unwrap();
    assert_eq!(run(&["sample", "--J", s(&garbage)]).status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["sample", "--J", s(&missing)]).status.code(), Some(2));

    assert_eq!(run(&["verify", "--suite", "bogus"]).status.code(), Some(3));

    let (j, _) = model_files(&dir, 8, 0.5, 2);
    let depth = run(&[
        "sample",
        "--J",
        s(&j),
        "--c3",
        "0.2",
        "--c1",
        "0.1",
        "--max-depth",
        "0",
    ]);
    assert_eq!(
        depth.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&depth.stderr)
    );
    let tries = run(&[
        "sample",
        "--J",
        s(&j),
        "--c3",
        "100",
        "--C4",
        "10000",
        "--max-tries",
        "1",
    ]);
    assert_eq!(
        tries.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&tries.stderr)
    );

    let big = dir.path().join("big.txt");
    std::fs::write(&big, "0 24 0.1\n").unwrap();
    assert_eq!(run(&["spectra", "--J", s(&big)]).status.code(), Some(5));
}

#[test]
fn verify_operator_suite() {
    let o = run(&["verify", "--suite", "operators", "--n-max", "6"]);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{table}");
    assert!(!table.contains("FAIL"));
    assert!(table.lines().count() >= 8);
}

#[test]
fn spectra_csv_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("spec.csv");
    let o = run(&["spectra", "--uniform", "5", "--out", s(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "level,kappa_chi2,kappa_bound,gap,bl_gap_formula"
    );
    #[derive(serde::Deserialize)]
    struct Row {
        level: usize,
        gap: f64,
        bl_gap_formula: f64,
    }
    let (version, rows): (u32, Vec<Row>) = parse_csv(&text).unwrap();
    assert_eq!(version, kglauber::SCHEMA_VERSION);
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!(
            (r.gap - r.bl_gap_formula).abs() < 1e-10,
            "level {}",
            r.level
        );
    }
}

#[test]
fn probe_csv_and_recommendation() {
    let o = run(&[
        "hanson-wright-probe",
        "--frob-grid",
        "0,0.05,0.1",
        "--trials",
        "3000",
        "--seed",
        "4",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().nth(1).unwrap(), "frob,t,tail_hat,bound,pass");
    #[derive(serde::Deserialize)]
    struct Row {
        frob: f64,
        tail_hat: f64,
        pass: bool,
    }
    let (_, rows): (u32, Vec<Row>) = parse_csv(&text).unwrap();
    let zero: Vec<&Row> = rows.iter().filter(|r| r.frob == 0.0).collect();
    assert!(!zero.is_empty());
    assert!(zero.iter().all(|r| r.tail_hat == 0.0 && r.pass));
    assert!(String::from_utf8_lossy(&o.stderr).contains("recommended c3"));
    let again = run(&[
        "hanson-wright-probe",
        "--frob-grid",
        "0,0.05,0.1",
        "--trials",
        "3000",
        "--seed",
        "4",
    ]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn bench_rows_agree_across_threads() {
    let o = run(&[
        "bench",
        "--n",
        "120",
        "--threads-list",
        "1,2",
        "--seeds",
        "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    #[derive(serde::Deserialize)]
    struct Row {
        threads: usize,
        outer_steps: u64,
        expected_outer_steps: u64,
        wall_time_parallel: f64,
        wall_time_glauber_baseline: f64,
        sample_digest: String,
    }
    let (_, rows): (u32, Vec<Row>) = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].threads, 1);
    assert_eq!(rows[0].sample_digest, rows[1].sample_digest);
    for r in &rows {
        assert_eq!(r.outer_steps, r.expected_outer_steps);
        assert!(r.wall_time_parallel > 0.0 && r.wall_time_glauber_baseline > 0.0);
    }
}

//! Exit statuses, steady-state classification and corpus determinism of the
//! command-line tool.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use diffprot::evaluation::GridSpec;
use diffprot::pipeline::{train_pipeline, TrainConfig};
use diffprot::signal::{write_csv, SamplingSpec};
use diffprot::waveformgen::{generate_cases, CorpusPlan};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffprot"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).stdin(Stdio::null()).output().unwrap()
}

fn scratch() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().unwrap()).path()
}

/// A small trained pipeline written to disk once per test binary.
fn model_path() -> &'static PathBuf {
    static PATH: OnceLock<PathBuf> = OnceLock::new();
    PATH.get_or_init(|| {
        let plan = CorpusPlan { cap_per_class: Some(6), fault_cap_per_stratum: Some(5), ..CorpusPlan::default() };
        let corpus: Vec<_> = generate_cases(&plan, 3).unwrap().into_iter().map(|(e, w)| (e.file, w)).collect();
        let cfg = TrainConfig {
            grid: GridSpec {
                n_estimators: vec![10],
                max_depth: vec![2],
                learning_rate: vec![0.3],
                cv_k: 2,
                ..GridSpec::small()
            },
            ..TrainConfig::default()
        };
        let model = train_pipeline(&corpus, &cfg, 3).unwrap();
        let path = scratch().join("pipeline.json");
        fs::write(&path, model.to_json()).unwrap();
        path
    })
}

fn steady_csv(name: &str, cycles: usize) -> PathBuf {
    let spec = SamplingSpec::default();
    let n = spec.samples_per_cycle() * cycles;
    let samples: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let th = spec.angle_at(i);
            [0.4 * th.sin(), 0.4 * (th - 2.0 * PI / 3.0).sin(), 0.4 * (th + 2.0 * PI / 3.0).sin()]
        })
        .collect();
    let path = scratch().join(name);
    let mut buf = Vec::new();
    write_csv(&spec, &samples, &mut buf).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn steady_state_csv_gives_one_no_event_line() {
    let csv = steady_csv("steady.csv", 7);
    let out = run(&["classify", "--model", model_path().to_str().unwrap(), csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["verdict"], "NoEvent");
    assert_eq!(v["detected"], false);
    assert_eq!(v["id"], "steady.csv");
}

#[test]
fn streamed_steady_state_closes_with_one_no_event_line() {
    let csv = fs::read(steady_csv("steady_stream.csv", 7)).unwrap();
    let mut child = bin()
        .args(["classify", "--stream", "--model", model_path().to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    std::io::Write::write_all(&mut child.stdin.take().unwrap(), &csv).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["verdict"], "NoEvent");
}

#[test]
fn usage_errors_exit_two() {
    let model = model_path().to_str().unwrap();
    let cases: [&[&str]; 6] = [
        &[],
        &["frobnicate"],
        &["generate"],
        &["generate", "--out", "x", "--seed", "seven"],
        &["train", "--corpus", "c", "--out", "o", "--grid", "huge"],
        &["classify", "--model", model],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    let out = run(&["train", "--corpus", "c", "--out", "o", "--resample", "oversample"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["classify", "--model", model, "--stream", "a.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_errors_exit_one() {
    let missing = scratch().join("absent.json");
    let csv = steady_csv("steady_err.csv", 2);
    let out = run(&["classify", "--model", missing.to_str().unwrap(), csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let bad = scratch().join("bad.csv");
    fs::write(&bad, "t_s,ia_pu,ib_pu,ic_pu\n0,1,2\n").unwrap();
    let out = run(&["classify", "--model", model_path().to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn generate_is_reproducible_for_a_seed() {
    let dirs: Vec<PathBuf> = ["g1", "g2", "g3"].iter().map(|d| scratch().join(d)).collect();
    for (dir, seed) in dirs.iter().zip(["7", "7", "8"]) {
        let out = run(&["generate", "--cases-per-class", "12", "--seed", seed, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = tree(&dirs[0]);
    assert!(a.iter().filter(|(p, _)| p.ends_with(".csv")).count() >= 7 * 12);
    assert_eq!(a, tree(&dirs[1]));
    let manifest = |d: &Path| fs::read(d.join("manifest.json")).unwrap();
    assert_ne!(manifest(&dirs[0]), manifest(&dirs[2]));
}

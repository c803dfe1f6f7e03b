#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

/// Shipped configs and the subcommand each one drives.
pub const SHIPPED: &[(&str, &str)] = &[
    ("pure_dephasing.toml", "simulate"),
    ("spin_boson_tcl2.toml", "simulate"),
    ("spin_boson_tcl4.toml", "simulate"),
    ("spin_boson_resummed.toml", "simulate"),
    ("oracle_sweep.toml", "oracle-compare"),
    ("correlation_gap.toml", "correlation"),
];

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn tcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcl"))
        .args(args)
        .output()
        .expect("failed to launch tcl")
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--quiet", "--output-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    tcl(&all)
}

pub fn run_shipped(dir: &Path, config: &str, command: &str) -> Output {
    let path = configs_dir().join(config);
    run_in(dir, &[command, path.to_str().unwrap()])
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Report bytes with the `timings` entry removed, in the writer's layout.
pub fn strip_timings(bytes: &[u8]) -> Vec<u8> {
    let mut v: Value = serde_json::from_slice(bytes).expect("report is valid JSON");
    if let Value::Object(map) = &mut v {
        map.remove("timings");
    }
    let mut out = serde_json::to_vec_pretty(&v).unwrap();
    out.push(b'\n');
    out
}

/// Output files of a run, with reports stripped of timings.
pub fn comparable_outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = fs::read(&path).unwrap();
        let bytes = if name.ends_with(".json") {
            strip_timings(&bytes)
        } else {
            bytes
        };
        files.insert(name, bytes);
    }
    files
}

/// CSV body as rows of numbers; the header is returned separately.
pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

pub struct DeterminismReport {
    pub config: String,
    pub identical: bool,
    pub matches_golden: bool,
    pub detail: String,
}

/// Runs a shipped config twice and compares the runs with each other and with the
/// checked-in golden files. `TCL_UPDATE_GOLDEN=1` rewrites the golden files instead.
pub fn check_determinism(config: &str, command: &str) -> DeterminismReport {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut detail = Vec::new();
    for dir in [a.path(), b.path()] {
        let out = run_shipped(dir, config, command);
        if !out.status.success() {
            detail.push(format!("exit {:?}: {}", out.status.code(), stderr(&out)));
        }
    }
    let first = comparable_outputs(a.path());
    let second = comparable_outputs(b.path());
    let identical = detail.is_empty() && !first.is_empty() && first == second;
    if !identical {
        detail.push("runs differ".into());
    }

    let golden = golden_dir();
    if std::env::var_os("TCL_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&golden).unwrap();
        for (name, bytes) in &first {
            fs::write(golden.join(name), bytes).unwrap();
        }
    }
    let mut matches_golden = !first.is_empty();
    for (name, bytes) in &first {
        match fs::read(golden.join(name)) {
            Ok(g) if &g == bytes => {}
            Ok(_) => {
                matches_golden = false;
                detail.push(format!("{name} differs from golden"));
            }
            Err(_) => {
                matches_golden = false;
                detail.push(format!("{name} has no golden file"));
            }
        }
    }
    DeterminismReport {
        config: config.into(),
        identical,
        matches_golden,
        detail: detail.join("; "),
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cpre_core::cli::main_with;

const GOLDEN_BLOCKS: &str = include_str!("golden/blocks.csv");

const BLOCKS: &str = "spec = two_point(0.5, 3.0, 0.3)\nmode = annealed\nseed = 42\nh = 2\nw = 5\nr = 1\nbox_T = 6\nN_grid = 0,1,2,4\ntrials = 300\n";

fn configs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("env", "spec = uniform(0.5, 2.5)\nseed = 3\nregion = -4,0,4,3\n"),
        ("simulate", "spec = point(1.5)\nseed = 3\ninitial = 0,0; 1,0\nregion = -6,0,6,6\nT = 5\n"),
        ("blocks", BLOCKS),
        ("renorm", "spec = point(20.0)\nseed = 3\nh = 4\nr = 1\nM = 30\nn = 1\ntrials = 4\n"),
        ("cc", "spec = uniform(1.5, 2.5)\nseed = 3\nenvs = 1\ninitial = 0,1\nwindow = 1,0,2,1\nt_grid = 2,4\nburn = 4\nmargin = 3\ntrials = 100\nconditions = true\nl_grid = 1,2\n"),
        ("survival", "spec = point(1.0)\nseed = 3\nT = 4\nt_grid = 1,2\ntrials = 300\n"),
    ]
}

/// Runs `cmd` on `doc` and returns the files written, timing sidecar excluded.
fn run(dir: &Path, cmd: &str, doc: &str, threads: usize) -> (i32, BTreeMap<String, Vec<u8>>) {
    let cfg = dir.join(format!("{cmd}.cfg"));
    fs::write(&cfg, doc).unwrap();
    let out: PathBuf = dir.join(format!("out-{cmd}-{threads}"));
    let code = main_with([
        "cpre".to_string(),
        cmd.to_string(),
        cfg.display().to_string(),
        "--out".to_string(),
        out.display().to_string(),
        "--threads".to_string(),
        threads.to_string(),
    ]);
    let mut files = BTreeMap::new();
    if out.exists() {
        for e in fs::read_dir(&out).unwrap() {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            if !name.ends_with(".timing.json") {
                files.insert(name, fs::read(&p).unwrap());
            }
        }
    }
    (code, files)
}

#[test]
fn blocks_csv_matches_the_frozen_copy() {
    let dir = tempfile::tempdir().unwrap();
    let (code, files) = run(dir.path(), "blocks", BLOCKS, 1);
    assert_eq!(code, 0);
    assert_eq!(String::from_utf8(files["blocks.csv"].clone()).unwrap(), GOLDEN_BLOCKS);
}

#[test]
fn every_command_reproduces_and_ignores_threads() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, doc) in configs() {
        let (c1, a) = run(dir.path(), cmd, doc, 1);
        let (c2, b) = run(dir.path(), cmd, doc, 3);
        assert!(c1 == 0 || (cmd == "renorm" && c1 == 1), "{cmd} exited {c1}");
        assert_eq!(c1, c2, "{cmd}");
        assert!(a.contains_key(&format!("{cmd}.csv")) && a.contains_key(&format!("{cmd}.json")), "{cmd}: {:?}", a.keys());
        assert_eq!(a, b, "{cmd} output depends on the thread count");
        let json: serde_json::Value = serde_json::from_slice(&a[&format!("{cmd}.json")]).unwrap();
        for key in ["config", "results", "diagnostics"] {
            assert!(json.get(key).is_some(), "{cmd}.json lacks {key}");
        }
        assert_eq!(json["diagnostics"]["command"], cmd);
        let timing = dir.path().join(format!("out-{cmd}-1")).join(format!("{cmd}.timing.json"));
        let timing: serde_json::Value = serde_json::from_str(&fs::read_to_string(timing).unwrap()).unwrap();
        assert_eq!(timing["threads"], 1);
    }
}

#[test]
fn seed_changes_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run(dir.path(), "blocks", BLOCKS, 1);
    let (_, b) = run(dir.path(), "blocks", &BLOCKS.replace("seed = 42", "seed = 43"), 2);
    assert_ne!(a["blocks.csv"], b["blocks.csv"]);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(main_with(["cpre", "schema"]), 0);
    assert_eq!(main_with(["cpre"]), 2);
    let (code, files) = run(dir.path(), "blocks", "spec = point(1.0)\nh = 0\n", 1);
    assert_eq!(code, 2);
    assert!(files.is_empty());
    let (code, _) = run(dir.path(), "cc", "spec = point(1.0)\nmode = annealed\n", 1);
    assert_eq!(code, 2);
}

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn circuit(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../circuits")
        .join(name)
        .display()
        .to_string()
}

fn cdnfi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdnfi"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cdnfi(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn dir_contents(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                files.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sim_reproduces_committed_golden_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("crc8.csv");
    ok(&[
        "sim",
        "--netlist",
        &circuit("crc8_pipeline.json"),
        "--stimulus",
        &circuit("crc8_pipeline.stim.json"),
        "--out",
        s(&out),
    ]);
    assert_eq!(
        fs::read(&out).unwrap(),
        fs::read(circuit("crc8_pipeline.golden.csv")).unwrap()
    );
    let m: Value = serde_json::from_str(
        &fs::read_to_string(tmp.path().join("crc8.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["command"], "sim");
    assert_eq!(m["inputs"].as_object().unwrap().len(), 2);
    assert!(m["outputs"]["crc8.csv"].as_str().unwrap().len() == 64);
}

#[test]
fn sim_toggle_writes_four_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t.csv");
    ok(&[
        "sim",
        "--netlist",
        &circuit("toggle.json"),
        "--stimulus",
        &circuit("toggle.stim.json"),
        "--out",
        s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(
        text.lines().skip(1).collect::<Vec<_>>(),
        ["1", "0", "1", "0"]
    );
}

#[test]
fn missing_input_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x.csv");
    let r = cdnfi(&[
        "sim",
        "--netlist",
        &circuit("toggle.json"),
        "--stimulus",
        s(&tmp.path().join("absent.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn gen_cdn_1233_ffs_min_fanout_16() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "gen-cdn",
        "--netlist",
        &circuit("wide1233.json"),
        "--min-fanout",
        "16",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert!(
        stdout.contains("stages=7 buffers=127 fanout=19..20"),
        "{stdout}"
    );
}

#[test]
fn gen_cdn_random_trees_share_topology() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "gen-cdn",
        "--netlist",
        &circuit("wide1233.json"),
        "--min-fanout",
        "16",
        "--grouping",
        "random",
        "--seed",
        "7",
        "--count",
        "50",
        "--out-dir",
        s(tmp.path()),
    ]);
    let stats: BTreeSet<&str> = stdout
        .lines()
        .map(|l| l.split_once(": ").unwrap().1)
        .collect();
    assert_eq!(
        stats.into_iter().collect::<Vec<_>>(),
        ["stages=7 buffers=127 fanout=19..20"]
    );

    let mut assignments = BTreeSet::new();
    for i in 0..50 {
        let text = fs::read_to_string(tmp.path().join(format!("tree_{i:03}.json"))).unwrap();
        let tree = cdnfi_tree_cones(&text);
        assert!(assignments.insert(tree), "tree {i} repeats an earlier one");
    }
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 51);
}

fn cdnfi_tree_cones(text: &str) -> Vec<String> {
    let v: Value = serde_json::from_str(text).unwrap();
    v["buffers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["cone"].to_string())
        .collect()
}

#[test]
fn gen_cdn_rejects_zero_fanout() {
    let tmp = tempfile::tempdir().unwrap();
    let r = cdnfi(&[
        "gen-cdn",
        "--netlist",
        &circuit("toggle.json"),
        "--min-fanout",
        "0",
        "--out-dir",
        s(tmp.path()),
    ]);
    assert_eq!(r.status.code(), Some(2));
}

fn campaign_args<'a>(mode: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "campaign".into(),
        "--netlist".into(),
        circuit("crc8_pipeline.json"),
        "--stimulus".into(),
        circuit("crc8_pipeline.stim.json"),
        "--golden".into(),
        circuit("crc8_pipeline.golden.csv"),
        "--mode".into(),
        mode.into(),
        "--out-dir".into(),
        out.into(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_strings(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    cdnfi(&refs)
}

#[test]
fn seu_campaign_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let fit = circuit("fit_library.csv");
    let mut bundles = Vec::new();
    for workers in ["1", "3"] {
        let out = tmp.path().join(format!("w{workers}"));
        let args = campaign_args(
            "seu",
            s(&out),
            &[
                "--injections",
                "5",
                "--seed",
                "1",
                "--workers",
                workers,
                "--fit-library",
                &fit,
            ],
        );
        let r = run_strings(&args);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        bundles.push(dir_contents(&out));
    }
    assert_eq!(bundles[0], bundles[1]);
    assert!(bundles[0].contains_key("report/rates.csv"));
    assert!(bundles[0].contains_key("seu.log.csv"));
}

#[test]
fn set_campaign_requires_a_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run_strings(&campaign_args("set", s(tmp.path()), &["--injections", "2"]));
    assert_eq!(r.status.code(), Some(2));
}

/// Sums `n_reached` and `n_changed` over a campaign log.
fn log_totals(text: &str) -> (u64, u64) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (r, c) = (col("n_reached"), col("n_changed"));
    lines.fold((0, 0), |(tr, tc), l| {
        let f: Vec<&str> = l.split(',').collect();
        (
            tr + f[r].parse::<u64>().unwrap(),
            tc + f[c].parse::<u64>().unwrap(),
        )
    })
}

#[test]
fn set_campaigns_over_fifty_trees_conserve_changes() {
    let tmp = tempfile::tempdir().unwrap();
    let trees = tmp.path().join("trees");
    ok(&[
        "gen-cdn",
        "--netlist",
        &circuit("crc8_pipeline.json"),
        "--min-fanout",
        "3",
        "--grouping",
        "random",
        "--seed",
        "7",
        "--count",
        "50",
        "--out-dir",
        s(&trees),
    ]);
    let out = tmp.path().join("set");
    let mut extra: Vec<String> = vec![
        "--injections".into(),
        "5".into(),
        "--seed".into(),
        "3".into(),
    ];
    for i in 0..50 {
        extra.push("--tree".into());
        extra.push(
            trees
                .join(format!("tree_{i:03}.json"))
                .display()
                .to_string(),
        );
    }
    let extra_refs: Vec<&str> = extra.iter().map(String::as_str).collect();
    let r = run_strings(&campaign_args("set", s(&out), &extra_refs));
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let totals: BTreeSet<(u64, u64)> = (0..50)
        .map(|i| {
            log_totals(&fs::read_to_string(out.join(format!("set_tree_{i:03}.log.csv"))).unwrap())
        })
        .collect();
    assert_eq!(totals.len(), 1, "{totals:?}");
    let aggregate = fs::read_to_string(out.join("report/aggregate.csv")).unwrap();
    assert!(
        aggregate.lines().any(|l| l.starts_with("set,failures,50,")),
        "{aggregate}"
    );

    // The report command rebuilds the same bundle from saved results.
    let rebuilt = tmp.path().join("rebuilt");
    let mut args = vec!["report".to_string(), "--out-dir".into(), s(&rebuilt).into()];
    for i in 0..50 {
        args.push("--result".into());
        args.push(
            out.join(format!("set_tree_{i:03}.result.json"))
                .display()
                .to_string(),
        );
    }
    let r = run_strings(&args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let original = dir_contents(&out.join("report"));
    let again = dir_contents(&rebuilt);
    for (name, bytes) in &original {
        assert_eq!(again.get(name), Some(bytes), "{name}");
    }
}

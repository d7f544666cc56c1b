use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bct_core::simulate::{builtin_model, sample_sequence};
use bct_core::trees::{parse_tree_str, structural_distance};
use bct_core::{Alphabet, Analysis, NodeWeightFunction, TreeSpace};
use serde_json::Value;
use tempfile::TempDir;

const SCENARIO_A_TREE: &str = "000\n100\n010\n110\n001\n101\n11\n";

fn bct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bct"))
        .args(args)
        .env_remove("BCT_NODE_BUDGET")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = bct(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stdout(args: &[&str]) -> String {
    let out = bct(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    bct(args).status.code().expect("exit code")
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: TempDir::new().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    }

    /// Scenario (a) sample written through the CLI.
    fn sample(&self, name: &str, n: usize, seed: u64) -> String {
        let p = self.path(name);
        let out = bct(&[
            "simulate", "--model", "scenario-a", "-n", &n.to_string(), "-L", "10", "--seed",
            &seed.to_string(), "--output", p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        p.to_str().unwrap().to_string()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn prior_of_generator_tree_under_ctw() {
    let ws = Workspace::new();
    let tree = ws.write("scenario_a.tree", SCENARIO_A_TREE);
    let v = ok_json(&["prior", "--prior", "ctw", "-L", "10", "--alphabet", "01", "--tree", &tree]);
    let p = v["result"]["probability"]["probability"].as_f64().unwrap();
    assert!((p - 1.22e-4).abs() / 1.22e-4 < 0.01);
    // (1/4)^7 over the normalizer 1/2.
    assert_eq!(p, 2f64.powi(-13));
    let ln = v["result"]["probability"]["ln"].as_f64().unwrap();
    let log10 = v["result"]["probability"]["log10"].as_f64().unwrap();
    assert!((ln - p.ln()).abs() < 1e-9 && (log10 - p.log10()).abs() < 1e-9);
}

#[test]
fn envelope_fields() {
    let ws = Workspace::new();
    let data = ws.sample("z.txt", 500, 4);
    let v = ok_json(&["evidence", "--data", &data, "-L", "6", "--prior", "gctw:0.7"]);
    for key in ["tool", "version", "command", "config", "seed", "generator", "result"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["tool"], "bct");
    assert_eq!(v["command"], "evidence");
    assert_eq!(v["config"]["alpha"], 0.5);
    assert_eq!(v["config"]["depth"], 6);
    assert_eq!(v["config"]["prior"], "gctw:0.7");
    let r = &v["result"];
    let ln = r["log_evidence"].as_f64().unwrap();
    let log10 = r["log10_evidence"].as_f64().unwrap();
    assert!((ln / std::f64::consts::LN_10 - log10).abs() < 1e-9);
    assert!(r["map_tree"].as_array().unwrap().len() >= 2);
    assert!(r["map_log10_posterior"].as_f64().unwrap() <= 0.0);
    assert_eq!(r["data"]["length"], 500);
}

#[test]
fn evidence_matches_library() {
    let ws = Workspace::new();
    let data = ws.sample("z.txt", 800, 11);
    let v = ok_json(&["evidence", "--data", &data, "-L", "8", "--prior", "target:8,3*depth:5"]);

    // The workspace sampler fixes the first 10 symbols.
    let sampling = TreeSpace::new(2, 10).unwrap();
    let space = TreeSpace::new(2, 8).unwrap();
    let model = builtin_model("scenario-a").unwrap();
    let z = sample_sequence(&model, 800, 11, &sampling).unwrap();
    let f = NodeWeightFunction::parse("target:8,3*depth:5", &Alphabet::binary(), &space).unwrap();
    let want = Analysis::new(&z, &space, 0.5).unwrap().fit(&f).unwrap().log_evidence();
    let got = v["result"]["log_evidence"].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-11 * want.abs());
}

#[test]
fn map_trees_round_trip_through_distance() {
    let ws = Workspace::new();
    let data = ws.sample("z.txt", 600, 2);
    let alphabet = Alphabet::binary();
    let space = TreeSpace::new(2, 10).unwrap();
    let priors = ["ctw", "exp:5", "target:2,4", "depth:1"];
    let mut trees = Vec::new();
    for (i, prior) in priors.iter().enumerate() {
        let out = ws.path(&format!("map{i}.tree"));
        let v = ok_json(&[
            "map", "--data", &data, "-L", "10", "--prior", prior, "--tree-out", s(&out),
        ]);
        let text = fs::read_to_string(&out).unwrap();
        let tree = parse_tree_str(&text, &alphabet, &space).unwrap();
        let leaves: Vec<String> = v["result"]["map_tree"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| l.as_str().unwrap().to_string())
            .collect();
        assert_eq!(leaves, tree.render_leaves(&alphabet));
        trees.push((out, tree));
    }
    for (pa, a) in &trees {
        for (pb, b) in &trees {
            let v = ok_json(&["distance", "-L", "10", s(pa), s(pb)]);
            assert_eq!(v["result"]["distance"].as_u64().unwrap() as usize, structural_distance(a, b));
        }
    }
}

#[test]
fn distance_of_small_example() {
    let ws = Workspace::new();
    let a = ws.write("a.tree", "0\n01\n11\n");
    let b = ws.write("b.tree", "00\n10\n1\n");
    let csv = stdout(&["distance", "-L", "2", &a, &b, "--format", "csv"]);
    assert_eq!(csv, "first,second,distance\n0 01 11,00 10 1,2\n");
}

#[test]
fn posterior_of_true_tree() {
    let ws = Workspace::new();
    let data = ws.sample("z.txt", 2500, 1);
    let tree = ws.write("scenario_a.tree", SCENARIO_A_TREE);
    let v = ok_json(&["posterior", "--data", &data, "-L", "10", "--prior", "depth:3", "--tree", &tree]);
    let p = v["result"]["posterior"]["probability"].as_f64().unwrap();
    assert!(p > 0.5 && p <= 1.0, "{p}");
    let ev = ok_json(&["evidence", "--data", &data, "-L", "10", "--prior", "depth:3", "--tree", &tree]);
    let same = ev["result"]["reference"]["posterior"]["probability"].as_f64().unwrap();
    assert!((p - same).abs() < 1e-12);
    assert_eq!(ev["result"]["reference"]["distance_to_map"], 0);
}

#[test]
fn bayes_factor_antisymmetry() {
    let ws = Workspace::new();
    let data = ws.sample("z.txt", 400, 8);
    let fwd = ok_json(&["bf", "--data", &data, "-L", "6", "--prior", "ctw", "--versus", "exp:2"]);
    let back = ok_json(&["bf", "--data", &data, "-L", "6", "--prior", "exp:2", "--versus", "ctw"]);
    let x = fwd["result"]["log10_bf"].as_f64().unwrap();
    let y = back["result"]["log10_bf"].as_f64().unwrap();
    assert!((x + y).abs() < 1e-9);
    assert_eq!(fwd["result"]["interpretation"], back["result"]["interpretation"]);
    assert_eq!(fwd["result"]["numerator_model"], "ctw");
}

#[test]
fn selection_traces() {
    let ws = Workspace::new();
    let data = ws.sample("z.txt", 2500, 1);
    let csv = stdout(&["select-depth", "--data", &data, "-L", "10", "-c", "0", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 1 + 10);
    let v = ok_json(&["select-depth", "--data", &data, "-L", "10", "-c", "0"]);
    assert_eq!(v["result"]["depth"], 3);
    assert_eq!(v["result"]["log10_evidence_by_depth"].as_array().unwrap().len(), 11);

    let low = ok_json(&["select-depth", "--data", &data, "-L", "10", "-c", "-1e9"]);
    assert_eq!(low["result"]["depth"], 10);

    let v = ok_json(&[
        "select-model", "--data", &data, "-L", "10", "--prior", "ctw", "--prior", "target:8,3",
        "--prior", "exp:5",
    ]);
    assert_eq!(v["result"]["trace"]["steps"].as_array().unwrap().len(), 3 * 10 + 2);
    assert_eq!(v["result"]["candidates"].as_array().unwrap().len(), 3);
    let best = v["result"]["best"].as_u64().unwrap() as usize;
    let depth = v["result"]["depth"].as_u64().unwrap();
    assert_eq!(v["result"]["selected"], format!("{}*depth:{depth}", ["ctw", "target:8,3", "exp:5"][best]));
}

#[test]
fn csv_int_input() {
    let ws = Workspace::new();
    let chars = ws.write("z.txt", "0110100111010011");
    let ints = ws.write("z.csv", "0,1,1,0,1,0,0,1\n1,1,0,1,0,0,1,1\n");
    let a = ok_json(&["evidence", "--data", &chars, "-L", "2", "--prior", "ctw"]);
    let b = ok_json(&["evidence", "--data", &ints, "--data-format", "csv-int", "-L", "2", "--prior", "ctw"]);
    assert_eq!(a["result"]["log_evidence"], b["result"]["log_evidence"]);
}

#[test]
fn larger_alphabet() {
    let ws = Workspace::new();
    let data = ws.write("dna.txt", &"acgtacgaattcgcatgcaagt".repeat(5));
    let v = ok_json(&["evidence", "--data", &data, "--alphabet", "acgt", "-L", "3", "--prior", "gctw:0.5"]);
    assert!(v["result"]["log_evidence"].as_f64().unwrap() < 0.0);
    assert!(v["result"]["map_tree"][0].as_str().unwrap().chars().all(|c| "acgtλ".contains(c)));
}

#[test]
fn simulate_is_deterministic() {
    let ws = Workspace::new();
    let a = ws.sample("a.txt", 3000, 9);
    let b = ws.sample("b.txt", 3000, 9);
    let c = ws.sample("c.txt", 3000, 10);
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.len(), 3000);

    let printed = stdout(&["simulate", "--model", "scenario-b", "-n", "50", "--seed", "3"]);
    assert_eq!(printed.trim().len(), 50);

    let report = ws.path("sim.json");
    let seq = ws.path("seq.txt");
    let out = bct(&[
        "simulate", "--model", "scenario-b", "-n", "100", "--seed", "5", "--output", s(&seq),
        "--report", s(&report),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["seed"], 5);
    assert!(v["generator"].as_str().unwrap().contains("ChaCha8"));
    assert_eq!(v["config"]["depth"], 4);
}

#[test]
fn simulate_from_model_file() {
    let ws = Workspace::new();
    let model = ws.write("m.model", "alphabet=ab L=1\na : 0,1\nb : 1,0\n");
    let text = stdout(&["simulate", "--model", &model, "-n", "9", "--initial", "repeat:a"]);
    assert_eq!(text.trim(), "abababab a".replace(' ', ""));
}

#[test]
fn report_tables() {
    let ws = Workspace::new();
    let dir = ws.path("out");
    let priors = [
        "depth:3", "ctw", "gctw:0.2", "gctw:0.7", "target:2,3", "target:3,3", "target:8,3",
        "target:2,4", "exp:2", "exp:5", "lenexp",
    ];
    let mut args = vec!["report", "--model", "scenario-a", "-L", "10", "-n", "2500", "--seeds", "4"];
    for p in &priors {
        args.extend(["--prior", p]);
    }
    args.extend(["--out-dir", s(&dir)]);
    let _ = stdout(&args);

    let table = fs::read_to_string(dir.join("table.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["F", "n", "seed", "delta", "prior", "posterior", "log10_evidence"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    for (row, prior) in rows.iter().zip(priors) {
        assert_eq!(&row[0], prior);
    }
    let d3: f64 = rows[0][4].parse().unwrap();
    assert!((d3 - 0.03846).abs() < 1e-5);

    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 12);
    let last = summary.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    assert_eq!(last.split('.').nth(1).unwrap().len(), 2, "{last}");

    let v: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], serde_json::json!([4]));
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 11);

    // Rows do not depend on the worker schedule.
    let again = ws.path("again");
    let idx = args.len() - 1;
    args[idx] = s(&again);
    let _ = stdout(&args);
    assert_eq!(table, fs::read_to_string(again.join("table.csv")).unwrap());
}

#[test]
fn report_prior_column_ignores_seed() {
    let ws = Workspace::new();
    let dir = ws.path("out");
    let _ = stdout(&[
        "report", "--model", "scenario-a", "-L", "10", "-n", "300,600", "--seeds", "1,2,3",
        "--prior", "depth:3", "--out-dir", s(&dir),
    ]);
    let table = fs::read_to_string(dir.join("table.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[1].to_string(), r[2].to_string())).collect();
    assert_eq!(
        keys,
        [("300", "1"), ("300", "2"), ("300", "3"), ("600", "1"), ("600", "2"), ("600", "3")]
            .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    assert!(rows.iter().all(|r| &r[4] == "0.0384615384615"));
}

#[test]
fn usage_errors_exit_two() {
    let ws = Workspace::new();
    let data = ws.write("z.txt", "0101101");
    let dir = ws.path("out");
    assert_eq!(code(&["select-model", "--data", &data, "-L", "2"]), 2);
    assert_eq!(code(&["report", "--model", "scenario-a", "-L", "4", "-n", "50", "--out-dir", s(&dir)]), 2);
    assert_eq!(code(&["evidence", "--data", &data, "-L", "2", "--prior", "gctw:1.5"]), 2);
    assert_eq!(code(&["evidence", "--data", &data, "-L", "2", "--prior", "nonsense"]), 2);
    assert_eq!(code(&["evidence", "--data", &data, "-L", "2", "--prior", "ctw", "--alpha", "0"]), 2);
    assert_eq!(code(&["evidence", "--data", &data, "--prior", "ctw"]), 2);
    assert_eq!(code(&["evidence", "--data", &data, "-L", "2", "--prior", "ctw", "--alphabet", "00"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["simulate", "--model", "scenario-z", "-n", "10"]), 2);
    assert_eq!(code(&["simulate", "--model", "scenario-a", "-n", "10", "--initial", "often"]), 2);

    let budget = Command::new(env!("CARGO_BIN_EXE_bct"))
        .args(["evidence", "--data", &data, "-L", "10", "--prior", "ctw"])
        .env("BCT_NODE_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(budget.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&budget.stderr).contains("budget"));
}

#[test]
fn data_errors_exit_one() {
    let ws = Workspace::new();
    let short = ws.write("short.txt", "01");
    let bad = ws.write("bad.txt", "0120");
    let tree = ws.write("bad.tree", "0\n01\n");
    let data = ws.write("z.txt", "0101101");
    assert_eq!(code(&["evidence", "--data", s(&ws.path("missing")), "-L", "2", "--prior", "ctw"]), 1);
    assert_eq!(code(&["evidence", "--data", &short, "-L", "2", "--prior", "ctw"]), 1);
    assert_eq!(code(&["evidence", "--data", &bad, "-L", "2", "--prior", "ctw"]), 1);
    assert_eq!(code(&["prior", "--prior", "ctw", "-L", "2", "--tree", &tree]), 1);
    assert_eq!(code(&["posterior", "--data", &data, "--prior", "ctw", "-L", "2", "--tree", &tree]), 1);
    let model = ws.write("m.model", "alphabet=01 L=1\n0 : 0.5,0.6\n1 : 0.5,0.5\n");
    assert_eq!(code(&["simulate", "--model", &model, "-n", "10"]), 1);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

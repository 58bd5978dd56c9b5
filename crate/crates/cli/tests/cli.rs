use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hinsearch::synthetic::{generate_planted_toy, PlantedParams};
use serde_json::{json, Value};
use tempfile::TempDir;

fn hinsearch(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hinsearch"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(generations: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        generate_planted_toy(PlantedParams::default(), 0)
            .write_dataset(dir.path().join("data"))
            .unwrap();
        let config = json!({
            "dataset": "data",
            "task": {"kind": "recommendation", "relation": "rates", "ratings": "data/ratings.tsv"},
            "search": {"generations": generations, "explain_top_k": 2},
            "backend": {"kind": "stub"}
        });
        let f = Self { dir };
        f.write("config.json", &config);
        f.write("ub.json", &json!({"nodes": [0, 1], "edges": [[0, 1, 0]], "source": 0, "target": 1}));
        f.write(
            "cyclic.json",
            &json!({"nodes": [0, 0, 1], "edges": [[0, 1, 6], [1, 0, 6], [1, 2, 0]], "source": 0, "target": 2}),
        );
        f.write(
            "diamond.json",
            &json!({"nodes": [0, 3, 2, 1], "edges": [[0, 1, 9], [1, 3, 5], [0, 2, 7], [2, 3, 3]], "source": 0, "target": 3}),
        );
        // User lives in City THAT is home of User: no business at the end
        f.write("city_user.json", &json!({"nodes": [0, 3, 0], "edges": [[0, 1, 9], [1, 2, 10]], "source": 0, "target": 2}));
        f.write("friend_rates.json", &json!({"nodes": [0, 0, 1], "edges": [[0, 1, 6], [1, 2, 0]], "source": 0, "target": 2}));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, value: &Value) {
        std::fs::write(self.path(name), value.to_string()).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        hinsearch(args, self.dir.path())
    }
}

#[test]
fn search_recovers_the_planted_structure() {
    let f = Fixture::new(10);
    let o = f.run(&["--config", "config.json", "--out", "out", "search"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let result: Value = serde_json::from_str(&std::fs::read_to_string(f.path("out/result.json")).unwrap()).unwrap();
    assert!(result["best"]["fitness"].as_f64().unwrap() >= 0.95);
    assert_eq!(result["metric"], "AUC");
    for name in ["events.jsonl", "curve.csv", "explanations.json", "transcripts.jsonl"] {
        let text = std::fs::read_to_string(f.path("out").join(name)).unwrap();
        assert!(!text.trim().is_empty(), "{name} is empty");
    }
    let curve = std::fs::read_to_string(f.path("out/curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("generation,best_fitness,mean_fitness"));
    assert_eq!(curve.lines().count(), 12);
}

#[test]
fn same_seed_gives_identical_files() {
    let f = Fixture::new(4);
    for out in ["a", "b"] {
        let o = f.run(&["--config", "config.json", "--seed", "0", "--out", out, "search"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["result.json", "events.jsonl", "curve.csv", "explanations.json", "transcripts.jsonl"] {
        let a = std::fs::read(f.path("a").join(name)).unwrap();
        let b = std::fs::read(f.path("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn missing_dataset_is_a_data_error_naming_the_path() {
    let f = Fixture::new(1);
    f.write(
        "bad.json",
        &json!({"dataset": "nowhere", "task": {"kind": "recommendation", "relation": "rates", "ratings": "r.tsv"}}),
    );
    let o = f.run(&["--config", "bad.json", "--out", "out", "search"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    let f = Fixture::new(1);
    assert_eq!(f.run(&["search", "--bogus"]).status.code(), Some(1));
    assert_eq!(f.run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(f.run(&["search"]).status.code(), Some(1));
    f.write("typo.json", &json!({"datset": "data"}));
    assert_eq!(f.run(&["--config", "typo.json", "search"]).status.code(), Some(1));
}

#[test]
fn help_lists_flags() {
    let f = Fixture::new(1);
    for cmd in ["search", "translate", "evaluate", "neighbors", "explain"] {
        let o = f.run(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for flag in ["--config", "--seed", "--out"] {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert!(stdout(&f.run(&["neighbors", "--help"])).contains("--cap"));
}

#[test]
fn translate_prints_sentences() {
    let f = Fixture::new(1);
    let o = f.run(&["translate", "ub.json", "--schema", "data/schema.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "User rates Business");

    let o = f.run(&["--config", "config.json", "translate", "diamond.json"]);
    assert_eq!(stdout(&o).matches(" AND ").count(), 1);

    let o = f.run(&["translate", "cyclic.json", "--schema", "data/schema.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cycle"), "{}", stderr(&o));
}

#[test]
fn evaluate_prints_metric_and_value() {
    let f = Fixture::new(1);
    let o = f.run(&["--config", "config.json", "evaluate", "diamond.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "AUC val 1.000000");

    let o = f.run(&["--config", "config.json", "evaluate", "diamond.json", "--split", "test"]);
    assert_eq!(stdout(&o).trim(), "AUC test 1.000000");

    // construction holds only reserved pairs, disjoint from every split pair
    let o = f.run(&["--config", "config.json", "evaluate", "ub.json"]);
    assert_eq!(stdout(&o).trim(), "AUC val 0.500000");

    let o = f.run(&["--config", "config.json", "evaluate", "city_user.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("type"), "{}", stderr(&o));
}

#[test]
fn neighbors_lists_operations_and_honours_the_cap() {
    let f = Fixture::new(1);
    let o = f.run(&["--config", "config.json", "neighbors", "ub.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("insertion\t") && l.ends_with("User is friend of User THAT rates Business")));
    assert!(!text.lines().any(|l| l.starts_with("deletion\t")));
    assert!(text.starts_with("# neighbors="));

    let all = stdout(&f.run(&["--config", "config.json", "neighbors", "friend_rates.json"]));
    let total = all.lines().count() - 1;
    assert!(total > 3, "only {total} neighbors");
    let o = f.run(&["--config", "config.json", "neighbors", "friend_rates.json", "--cap", "3"]);
    let capped = stdout(&o);
    assert_eq!(capped.lines().next(), Some("# neighbors=3 sampled=true"));
    assert_eq!(capped.lines().count(), 4);
    let again = stdout(&f.run(&["--config", "config.json", "neighbors", "friend_rates.json", "--cap", "3"]));
    assert_eq!(capped, again);
}

#[test]
fn explain_reruns_on_a_saved_result() {
    let f = Fixture::new(3);
    assert!(f.run(&["--config", "config.json", "--out", "out", "search"]).status.success());
    let mut outputs = Vec::new();
    for dir in ["x1", "x2"] {
        let o = f.run(&["--config", "config.json", "--out", dir, "explain", "out/result.json", "--top-k", "1"]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(std::fs::read(f.path(dir).join("explanations.json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let reports: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 1);

    let o = f.run(&["--config", "config.json", "--out", "x3", "explain", "out/result.json", "--top-k", "100000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("distinct"), "{}", stderr(&o));

    let o = f.run(&["--config", "config.json", "explain", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreachable_live_backend_is_a_backend_error() {
    let f = Fixture::new(1);
    f.write(
        "live.json",
        &json!({
            "dataset": "data",
            "task": {"kind": "recommendation", "relation": "rates", "ratings": "data/ratings.tsv"},
            "search": {"generations": 1, "explain_top_k": 0},
            "backend": {"kind": "live", "endpoint": "http://127.0.0.1:9/v1/chat/completions", "model": "m", "timeout_secs": 2}
        }),
    );
    let o = f.run(&["--config", "live.json", "--out", "out", "search"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

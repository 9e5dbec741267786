use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL_ADAPTER: &str =
    "[adapter]\nd_h = 8\n[adapter.features]\nd = 16\nframes = 3\nn_vis = 4\n[adapter.train]\nsteps = 30\n";

fn deixis(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deixis"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("DEIXIS_SEED")
        .env_remove("DEIXIS_TAU")
        .env_remove("DEIXIS_CONFIG")
        .env_remove("DEIXIS_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn ok(o: Output) -> Output {
    assert_eq!(
        code(&o),
        0,
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("deixis.toml");
    fs::write(&p, text).unwrap();
    p
}

/// Forges `n` clips and builds QA into a fresh directory.
fn pipeline(n: &str, extra: &[&str]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(deixis(dir.path(), &[extra, &["forge", "--n-clips", n]].concat()));
    ok(deixis(dir.path(), &[extra, &["qa"]].concat()));
    dir
}

#[test]
fn forge_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(deixis(d.path(), &["--seed", "11", "forge", "--n-clips", "12"]));
    }
    for f in ["clips.jsonl", "clips.manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert!(a.path().join("clips.manifest.time").exists());
    let m = json(a.path().join("clips.manifest.json"));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["outputs"][0]["name"], "clips.jsonl");
    assert_eq!(m["stats"]["forge"]["accepted"], 12);
}

#[test]
fn different_seeds_forge_different_clips() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(deixis(a.path(), &["--seed", "1", "forge", "--n-clips", "4"]));
    ok(deixis(b.path(), &["--seed", "2", "forge", "--n-clips", "4"]));
    assert_ne!(fs::read(a.path().join("clips.jsonl")).unwrap(), fs::read(b.path().join("clips.jsonl")).unwrap());
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = deixis(&blocker.join("out"), &["forge", "--n-clips", "2"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn qa_has_no_validation_failures_and_the_oracle_is_perfect() {
    let dir = pipeline("30", &[]);
    let summary = json(dir.path().join("qa_summary.json"));
    assert!(summary["dropped"].as_object().unwrap().is_empty(), "{summary}");
    assert_eq!(summary["per_category"].as_object().unwrap().len(), 6, "{summary}");
    let referents = fs::read_to_string(dir.path().join("referents.jsonl")).unwrap();
    assert_eq!(referents.lines().count(), 30);
    let first: Value = serde_json::from_str(referents.lines().next().unwrap()).unwrap();
    assert!(first["events"][0]["referent_id"].is_string(), "{first}");
    ok(deixis(dir.path(), &["eval", "--answerer", "oracle", "--self-check"]));
    let report = json(dir.path().join("eval_geometric-oracle.json"));
    assert_eq!(report["average"], 100.0);
    assert_eq!(report["invalid_count"], 0);
    for f in ["csv", "txt", "svg"] {
        assert!(dir.path().join(format!("eval_geometric-oracle.{f}")).exists());
    }
    let preds = dir.path().join("predictions_geometric-oracle.jsonl");
    ok(deixis(dir.path(), &["eval", "--predictions", preds.to_str().unwrap(), "--name", "replayed"]));
    assert_eq!(json(dir.path().join("eval_replayed.json")), report);
}

#[test]
fn temporal_questions_are_infeasible_without_multiple_gestures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[gen]\ngesture_count_weights = [1.0, 0.0, 0.0]\n");
    let c = cfg.to_str().unwrap();
    ok(deixis(dir.path(), &["--config", c, "forge", "--n-clips", "10"]));
    ok(deixis(dir.path(), &["--config", c, "qa", "--categories", "temporal"]));
    let summary = json(dir.path().join("qa_summary.json"));
    assert!(summary["per_category"].as_object().unwrap().is_empty(), "{summary}");
    assert_eq!(summary["infeasible"]["Temporal"], 10, "{summary}");
    assert!(fs::read_to_string(dir.path().join("dataset.jsonl")).unwrap().is_empty());
}

#[test]
fn unknown_category_is_a_usage_error() {
    let dir = pipeline("3", &[]);
    assert_eq!(code(&deixis(dir.path(), &["qa", "--categories", "colour"])), 1);
}

#[test]
fn mixed_config_hashes_are_refused_unless_forced() {
    let dir = pipeline("6", &[]);
    let o = deixis(dir.path(), &["--tau", "0.7", "eval", "--answerer", "random"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("--force"), "{}", stderr(&o));
    ok(deixis(dir.path(), &["--tau", "0.7", "--force", "eval", "--answerer", "random"]));
    let m = json(dir.path().join("eval_random.manifest.json"));
    assert_eq!(m["forced"], true);
    assert_eq!(m["inputs"][0]["name"], "dataset.jsonl");
    assert_ne!(m["inputs"][0]["config_hash"], m["config_hash"]);
}

#[test]
fn malformed_line_is_reported_with_its_number() {
    let dir = pipeline("10", &[]);
    let data = dir.path().join("dataset.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&data).unwrap().lines().map(String::from).collect();
    assert!(lines.len() >= 17, "only {} items", lines.len());
    lines[16] = "{\"qa_id\": ".into();
    let bad = dir.path().join("broken.jsonl");
    fs::write(&bad, lines.join("\n")).unwrap();
    let o = deixis(dir.path(), &["eval", "--dataset", bad.to_str().unwrap(), "--answerer", "blind"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("line 17"), "{}", stderr(&o));
}

#[test]
fn probes_add_one_report_each_and_report_compares_them() {
    let dir = pipeline("12", &[]);
    ok(deixis(dir.path(), &["eval", "--answerer", "oracle", "--probe", "blind,choices-only"]));
    let mut reports: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("eval_") && n.ends_with(".json") && !n.ends_with(".manifest.json"))
        .collect();
    reports.sort();
    assert_eq!(reports, ["eval_blind.json", "eval_choices-only.json", "eval_geometric-oracle.json"]);
    for n in ["blind", "choices-only"] {
        let r = json(dir.path().join(format!("eval_{n}.json")));
        assert!(r["average"].as_f64().unwrap() < 100.0, "{n}: {r}");
    }
    let baseline = json(dir.path().join("random_baseline.json"));
    assert!(baseline["average"].as_f64().unwrap() > 20.0);
    let files: Vec<String> = reports.iter().map(|n| dir.path().join(n).display().to_string()).collect();
    let args: Vec<&str> = std::iter::once("report").chain(files.iter().map(String::as_str)).collect();
    let o = ok(deixis(dir.path(), &args));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(["blind", "choices-only", "geometric-oracle", "Average"].iter().all(|n| table.contains(n)), "{table}");
    assert_eq!(code(&deixis(dir.path(), &["eval", "--probe", "deaf"])), 1);
}

#[test]
fn adapter_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(deixis(dir.path(), &["adapter", "check", "--configs", "100"]));
    assert!(String::from_utf8_lossy(&o.stdout).contains("passed"));
    let r = json(dir.path().join("adapter_check.json"));
    assert_eq!(r["configs"], 100);
    assert!(r["failures"].as_array().unwrap().is_empty());
}

#[test]
fn training_twice_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL_ADAPTER);
    let c = cfg.to_str().unwrap();
    ok(deixis(dir.path(), &["--config", c, "forge", "--n-clips", "40"]));
    ok(deixis(dir.path(), &["--config", c, "qa"]));
    let mut runs = Vec::new();
    for _ in 0..2 {
        ok(deixis(dir.path(), &["--config", c, "adapter", "train"]));
        runs.push(
            ["scorer.json", "scorer_report.json", "scorer.manifest.json"]
                .map(|f| fs::read(dir.path().join(f)).unwrap()),
        );
    }
    assert_eq!(runs[0], runs[1]);
    let ckpt = json(dir.path().join("scorer.json"));
    assert_eq!(ckpt["tau"], 0.5);
}

#[test]
fn synthetic_ablation_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), &SMALL_ADAPTER.replace("[adapter]\n", "[adapter]\nclips = 60\n"));
    ok(deixis(dir.path(), &["--config", cfg.to_str().unwrap(), "adapter", "ablate", "--synthetic", "--tau-sweep"]));
    let r = json(dir.path().join("ablation.json"));
    assert!(r["test_items"].as_u64().unwrap() > 0);
    let sweep = r["tau_sweep"].as_array().unwrap();
    assert_eq!(sweep.len(), 11);
    let open: Vec<u64> = sweep.iter().map(|s| s["open_frames"].as_u64().unwrap()).collect();
    assert!(open.windows(2).all(|w| w[0] >= w[1]), "{open:?}");
}

#[test]
fn usage_and_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&deixis(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&deixis(dir.path(), &["eval"])), 1);
    assert_eq!(code(&deixis(dir.path(), &["--tau", "2", "forge"])), 1);
    let cfg = config(dir.path(), "[gen]\nfsp = 24\n");
    let o = deixis(dir.path(), &["--config", cfg.to_str().unwrap(), "forge"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("gen.fsp"), "{}", stderr(&o));
    assert_eq!(code(&deixis(dir.path(), &["--help"])), 0);
}

#[test]
fn environment_overrides_config_and_flags_override_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "seed = 3\n");
    let run = |env_seed: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_deixis"));
        cmd.env("DEIXIS_CONFIG", &cfg).env("DEIXIS_OUT", dir.path()).env_remove("DEIXIS_SEED");
        if let Some(s) = env_seed {
            cmd.env("DEIXIS_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        ok(cmd.args(["forge", "--n-clips", "1"]).output().unwrap());
        json(dir.path().join("clips.manifest.json"))["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None, None), 3);
    assert_eq!(run(Some("8"), None), 8);
    assert_eq!(run(Some("8"), Some("9")), 9);
}

#[test]
fn qa_and_eval_are_idempotent() {
    let dir = pipeline("8", &[]);
    ok(deixis(dir.path(), &["eval", "--answerer", "random"]));
    let files = [
        "dataset.jsonl",
        "qa_summary.json",
        "referents.jsonl",
        "dataset.manifest.json",
        "eval_random.json",
        "eval_random.manifest.json",
    ];
    let before = files.map(|f| fs::read(dir.path().join(f)).unwrap());
    ok(deixis(dir.path(), &["qa"]));
    ok(deixis(dir.path(), &["eval", "--answerer", "random"]));
    let after = files.map(|f| fs::read(dir.path().join(f)).unwrap());
    for (f, (a, b)) in files.iter().zip(before.iter().zip(&after)) {
        assert_eq!(a, b, "{f} changed on rerun");
    }
}

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use deixis_core::batch::{forge_batch, qa_batch};
use deixis_core::eval::{
    bias_probe, comparison_table, random_baseline, run_answerer, score, to_csv, to_svg, to_text, Answerer, BlindProbe,
    ChoicesOnlyProbe, GeometricOracle, Prediction, RandomProbe, ScoreReport,
};
use deixis_core::hint::check::{run_check, CheckTolerances};
use deixis_core::hint::dataset::{
    ablation_pairs, reference_split, run_ablation, run_ablation_on, split_examples, tau_sweep, train_scorer, Trained,
};
use deixis_core::qa::{HttpRephraser, RephraseMode};
use deixis_core::{jsonl, resolve_referents, ClipRecord, QaItem, ResolvedClip, TaskCategory};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{RephraserConfig, RephraserKind, Settings};
use crate::error::CliError;
use crate::manifest::{check_inputs, file_ref, write_json, write_manifest, FileRef, Manifest};
use crate::{AnswererArg, ProbeArg};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn manifest(s: &Settings, command: &str, inputs: Vec<FileRef>, forced: bool) -> Manifest {
    Manifest {
        command: command.into(),
        version: VERSION.into(),
        config_hash: s.config.hash(),
        seed: s.config.seed,
        inputs,
        outputs: Vec::new(),
        forced,
        stats: serde_json::Value::Null,
    }
}

/// Writes the manifest for `primary` after hashing every output.
fn finish(mut m: Manifest, primary: &Path, outputs: &[&Path], stats: impl Serialize) -> Result<(), CliError> {
    m.outputs = outputs.iter().map(|p| file_ref(p, None)).collect::<Result<_, _>>()?;
    m.stats = serde_json::to_value(stats).expect("stats serialize");
    write_manifest(primary, &m)?;
    Ok(())
}

fn or_default(path: Option<PathBuf>, s: &Settings, name: &str) -> PathBuf {
    path.unwrap_or_else(|| s.out.join(name))
}

fn read_clips(path: &Path) -> Result<Vec<ClipRecord>, CliError> {
    Ok(jsonl::read(path)?)
}

fn read_dataset(path: &Path) -> Result<Vec<QaItem>, CliError> {
    Ok(jsonl::read(path)?)
}

pub fn forge(s: &Settings, n_clips: usize, noiseless: bool) -> Result<(), CliError> {
    let gen = if noiseless { s.config.gen.clone().noiseless() } else { s.config.gen.clone() };
    let (clips, stats) = forge_batch(s.config.seed, n_clips, &gen)?;
    let path = s.out.join("clips.jsonl");
    jsonl::write(&path, &clips)?;
    println!(
        "forged {} clips in {} attempts (acceptance {:.1}%) -> {}",
        stats.accepted,
        stats.attempts,
        100.0 * stats.acceptance_rate(),
        path.display()
    );
    let stats = json!({ "n_clips": n_clips, "noiseless": noiseless, "forge": stats });
    finish(manifest(s, "forge", Vec::new(), false), &path, &[&path], stats)
}

fn parse_categories(names: &[String]) -> Result<Vec<TaskCategory>, CliError> {
    names
        .iter()
        .map(|n| TaskCategory::parse(n).ok_or_else(|| CliError::Usage(format!("unknown category {n:?}"))))
        .collect()
}

pub fn qa(s: &Settings, clips: Option<PathBuf>, categories: &[String], r: &RephraserConfig) -> Result<(), CliError> {
    let clips_path = or_default(clips, s, "clips.jsonl");
    let (inputs, forced) = check_inputs(&[&clips_path], &s.config.hash(), s.force)?;
    let clips = read_clips(&clips_path)?;
    let mut qa_config = s.config.qa.clone();
    if !categories.is_empty() {
        qa_config.weights = qa_config.weights.restrict(&parse_categories(categories)?);
        qa_config.validate().map_err(CliError::Config)?;
    }
    let mode = match r.mode {
        RephraserKind::Rule => RephraseMode::Rule,
        RephraserKind::External => RephraseMode::External {
            client: Arc::new(HttpRephraser::new(
                &r.endpoint,
                Duration::from_secs_f64(r.timeout_s),
                r.retries,
                r.max_inflight,
            )),
            fallback: r.fallback,
        },
    };
    let (items, summary) = qa_batch(&clips, &s.config.resolver, &qa_config, s.config.seed, &mode)?;
    let resolved: Vec<ResolvedClip> = clips
        .par_iter()
        .map(|c| ResolvedClip { clip_id: c.clip_id.clone(), events: resolve_referents(c, &s.config.resolver) })
        .collect();
    let data = s.out.join("dataset.jsonl");
    let summary_path = s.out.join("qa_summary.json");
    let referents_path = s.out.join("referents.jsonl");
    jsonl::write(&data, &items)?;
    jsonl::write(&referents_path, &resolved)?;
    write_json(&summary_path, &summary)?;
    println!(
        "{} items from {} clips ({} resolver mismatches, {} validation drops) -> {}",
        items.len(),
        clips.len(),
        summary.resolver_mismatches.len(),
        summary.validation_failures(),
        data.display()
    );
    for (c, n) in &summary.per_category {
        println!("  {c:<10} {n}");
    }
    let stats = json!({ "categories": categories, "rephraser": r.mode, "summary": summary });
    finish(manifest(s, "qa", inputs, forced), &data, &[&data, &summary_path, &referents_path], stats)
}

pub fn adapter_check(s: &Settings, configs: usize) -> Result<(), CliError> {
    let report = run_check(configs, s.config.seed, &CheckTolerances::default());
    let path = s.out.join("adapter_check.json");
    write_json(&path, &report)?;
    println!(
        "{} configs: forward max abs error {:.2e}, backward max rel error {:.2e}",
        report.configs, report.forward_max_abs, report.backward_max_rel
    );
    if report.passed() {
        println!("adapter check passed");
        return Ok(());
    }
    for f in report.failures.iter().take(20) {
        eprintln!("  config {} (d_h={}, d={}) {}: got {} want {}", f.config, f.d_h, f.d, f.entry, f.got, f.want);
    }
    Err(CliError::Validation(format!("{} adapter check failures; see {}", report.failures.len(), path.display())))
}

type Pairs = Vec<(ClipRecord, QaItem)>;

/// Reference-category (clip, item) pairs from files, refusing mixed configs.
fn load_pairs(
    s: &Settings,
    dataset: Option<PathBuf>,
    clips: Option<PathBuf>,
) -> Result<(Pairs, Vec<FileRef>, bool), CliError> {
    let dataset = or_default(dataset, s, "dataset.jsonl");
    let clips = or_default(clips, s, "clips.jsonl");
    let (inputs, forced) = check_inputs(&[&dataset, &clips], &s.config.hash(), s.force)?;
    let pairs = ablation_pairs(&read_clips(&clips)?, read_dataset(&dataset)?);
    if pairs.is_empty() {
        return Err(CliError::Validation("dataset has no Reference items with known clips".into()));
    }
    Ok((pairs, inputs, forced))
}

pub fn adapter_train(s: &Settings, dataset: Option<PathBuf>, clips: Option<PathBuf>) -> Result<(), CliError> {
    let (pairs, inputs, forced) = load_pairs(s, dataset, clips)?;
    let config = s.config.ablation();
    let trained = train_scorer(&pairs, &config)?;
    let path = s.out.join("scorer.json");
    write_json(&path, &trained.model.to_checkpoint())?;
    let report_path = s.out.join("scorer_report.json");
    let stats = json!({
        "items": pairs.len(),
        "test": trained.test,
        "train_accuracy": trained.train_accuracy,
        "final_loss": trained.loss.last(),
        "loss": trained.loss,
    });
    write_json(&report_path, &stats)?;
    println!(
        "trained on {} Reference items: train {:.1}%, held-out {:.1}% -> {}",
        pairs.len(),
        trained.train_accuracy,
        trained.test.average,
        path.display()
    );
    finish(manifest(s, "adapter train", inputs, forced), &path, &[&path, &report_path], stats)
}

pub fn adapter_ablate(
    s: &Settings,
    dataset: Option<PathBuf>,
    clips: Option<PathBuf>,
    synthetic: bool,
    sweep: bool,
) -> Result<(), CliError> {
    let config = s.config.ablation();
    let (trained, pairs, inputs, forced) = if synthetic {
        let pairs = reference_split(config.seed, config.clips)?;
        (run_ablation(&config)?, pairs, Vec::new(), false)
    } else {
        let (pairs, inputs, forced) = load_pairs(s, dataset, clips)?;
        (run_ablation_on(&pairs, &config)?, pairs, inputs, forced)
    };
    let Trained { report, .. } = trained;
    let sweep = if sweep {
        let (test, train) = split_examples(&pairs, &config)?;
        let all: Vec<_> = test.into_iter().chain(train).collect();
        let taus: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        Some(tau_sweep(&all, &taus))
    } else {
        None
    };
    let path = s.out.join("ablation.json");
    let mut value = serde_json::to_value(&report).expect("report serializes");
    // Wall-clock time varies run to run; keep it out of the reproducible output.
    let seconds = value.as_object_mut().and_then(|o| o.remove("seconds"));
    if let Some(sw) = &sweep {
        value["tau_sweep"] = json!(sw.iter().map(|(t, n)| json!({ "tau": t, "open_frames": n })).collect::<Vec<_>>());
    }
    write_json(&path, &value)?;
    let reports = [("hint", &report.hint), ("stripped", &report.stripped), ("random", &report.random)];
    print!("{}", comparison_table(&reports));
    println!(
        "{} train / {} test items; gap {:+.1} points ({:.1}s)",
        report.train_items,
        report.test_items,
        report.gap,
        seconds.and_then(|v| v.as_f64()).unwrap_or(0.0)
    );
    if let Some(sw) = sweep {
        for (t, n) in sw {
            println!("  tau {t:.1}: {n} open frames");
        }
    }
    let stats = json!({ "synthetic": synthetic, "gap": report.gap });
    finish(manifest(s, "adapter ablate", inputs, forced), &path, &[&path], stats)
}

pub enum Source {
    Predictions(PathBuf),
    Answerer(AnswererArg),
    Nothing,
}

pub struct EvalArgs {
    pub dataset: Option<PathBuf>,
    pub clips: Option<PathBuf>,
    pub source: Source,
    pub probe: Vec<ProbeArg>,
    pub self_check: bool,
    pub name: Option<String>,
}

fn answerer(a: AnswererArg, s: &Settings) -> Box<dyn Answerer> {
    match a {
        AnswererArg::Oracle => Box::new(GeometricOracle { resolver: s.config.resolver.clone() }),
        AnswererArg::Random => Box::new(RandomProbe),
        AnswererArg::Blind => Box::new(BlindProbe),
        AnswererArg::ChoicesOnly => Box::new(ChoicesOnlyProbe),
    }
}

/// Writes `eval_<name>.{json,csv,txt,svg}` and returns the paths.
fn write_report(s: &Settings, name: &str, report: &ScoreReport) -> Result<Vec<PathBuf>, CliError> {
    let base = s.out.join(format!("eval_{name}"));
    let paths: Vec<PathBuf> = ["json", "csv", "txt", "svg"].iter().map(|e| base.with_extension(e)).collect();
    write_json(&paths[0], report)?;
    let title = format!("{name}: average {:.1}", report.average);
    for (p, text) in paths[1..].iter().zip([to_csv(report), to_text(&title, report), to_svg(&title, report)]) {
        fs::write(p, text).map_err(CliError::io(p))?;
    }
    print!("{}", to_text(name, report));
    Ok(paths)
}

pub fn eval(s: &Settings, args: EvalArgs) -> Result<(), CliError> {
    let dataset_path = or_default(args.dataset, s, "dataset.jsonl");
    let needs_clips = args.self_check || matches!(args.source, Source::Answerer(AnswererArg::Oracle));
    let clips_path = needs_clips.then(|| or_default(args.clips.clone(), s, "clips.jsonl"));
    let mut paths: Vec<&Path> = vec![&dataset_path];
    paths.extend(clips_path.as_deref());
    let (inputs, forced) = check_inputs(&paths, &s.config.hash(), s.force)?;
    let dataset = read_dataset(&dataset_path)?;
    if dataset.is_empty() {
        return Err(CliError::Validation(format!("{} holds no items", dataset_path.display())));
    }
    let clips: Option<HashMap<String, ClipRecord>> = match &clips_path {
        Some(p) => Some(read_clips(p)?.into_iter().map(|c| (c.clip_id.clone(), c)).collect()),
        None => None,
    };

    let baseline = random_baseline(&dataset);
    let baseline_path = s.out.join("random_baseline.json");
    write_json(&baseline_path, &baseline)?;
    println!("random baseline: average {:.1}", baseline.average);
    let mut written = Vec::new();
    let mut extra = vec![baseline_path];
    let mut stats = serde_json::Map::new();
    let mut record = |name: &str, report: &ScoreReport| -> Result<(), CliError> {
        written.extend(write_report(s, name, report)?);
        stats.insert(name.to_string(), json!(report.average));
        Ok(())
    };

    match &args.source {
        Source::Predictions(p) => {
            let preds: Vec<Prediction> = jsonl::read(p)?;
            let stem = p.file_stem().and_then(|x| x.to_str()).unwrap_or("predictions").to_string();
            record(args.name.as_deref().unwrap_or(&stem), &score(&dataset, &preds)?)?;
        }
        Source::Answerer(a) => {
            let ans = answerer(*a, s);
            let preds = run_answerer(&dataset, clips.as_ref(), ans.as_ref(), s.config.seed)?;
            let name = args.name.clone().unwrap_or_else(|| ans.name().to_string());
            let pred_path = s.out.join(format!("predictions_{name}.jsonl"));
            jsonl::write(&pred_path, &preds)?;
            extra.push(pred_path);
            record(&name, &score(&dataset, &preds)?)?;
        }
        Source::Nothing => {}
    }
    for p in &args.probe {
        let probe: &dyn Answerer = match p {
            ProbeArg::Blind => &BlindProbe,
            ProbeArg::ChoicesOnly => &ChoicesOnlyProbe,
            ProbeArg::Random => &RandomProbe,
        };
        record(probe.name(), &bias_probe(&dataset, None, probe, s.config.seed)?)?;
    }
    let mut check_failure = None;
    if args.self_check {
        let oracle = GeometricOracle { resolver: s.config.resolver.clone() };
        let report = bias_probe(&dataset, clips.as_ref(), &oracle, s.config.seed)?;
        let below: Vec<String> = report
            .per_category
            .iter()
            .filter(|(_, v)| v.accuracy < 100.0)
            .map(|(c, v)| format!("{c} {:.1}", v.accuracy))
            .collect();
        record("self-check", &report)?;
        if !below.is_empty() {
            check_failure = Some(format!("oracle below 100 on: {}", below.join(", ")));
        }
    }

    stats.insert("random_baseline".into(), json!(baseline.average));
    written.extend(extra);
    let primary = written.first().cloned().expect("at least one report");
    let refs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    finish(manifest(s, "eval", inputs, forced), &primary, &refs, &stats)?;
    match check_failure {
        Some(m) => Err(CliError::Validation(m)),
        None => Ok(()),
    }
}

pub fn report(s: &Settings, files: &[PathBuf]) -> Result<(), CliError> {
    let mut loaded = Vec::new();
    for f in files {
        if f.to_string_lossy().ends_with(".manifest.json") {
            eprintln!("skipping manifest {}", f.display());
            continue;
        }
        let text = fs::read_to_string(f).map_err(CliError::io(f))?;
        let r: ScoreReport = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: f.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let name = f.file_stem().and_then(|x| x.to_str()).unwrap_or("report");
        loaded.push((name.trim_start_matches("eval_").to_string(), r));
    }
    if loaded.is_empty() {
        return Err(CliError::Usage("no score reports given".into()));
    }
    let refs: Vec<(&str, &ScoreReport)> = loaded.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let table = comparison_table(&refs);
    let path = s.out.join("comparison.txt");
    fs::write(&path, &table).map_err(CliError::io(&path))?;
    print!("{table}");
    Ok(())
}

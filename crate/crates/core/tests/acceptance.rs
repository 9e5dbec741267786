//! One PASS/FAIL line per headline criterion. Run with `--nocapture` to see them.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use common::{oracle_adapter, rel_err};
use deixis_core::batch::{forge_batch, qa_batch};
use deixis_core::eval::{
    bias_probe, extract_choice, random_baseline, run_answerer, score, BlindProbe, ChoicesOnlyProbe, GeometricOracle,
    ScoreReport,
};
use deixis_core::hint::adapter::KEYPOINT_DIM;
use deixis_core::hint::dataset::{build_example, reference_split, run_ablation, AblationConfig, FeatureConfig};
use deixis_core::hint::toy::loss_and_grad;
use deixis_core::hint::{
    adapter_backward, adapter_forward, interleave, token_overhead, AdapterParams, GateConfig, HandIntentToken,
    KeypointNorm, Matrix, ToySequenceModel, VisualTokenBlock,
};
use deixis_core::qa::{QaConfig, QaItem, RephraseMode, TaskCategory};
use deixis_core::resolve::{pointing_ray, referent_ids, resolve_referents, world_track, ResolverConfig};
use deixis_core::{ray_aabb_intersect, ClipRecord, GenConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met as stated. They are still evaluated and
/// printed as FAIL, but do not abort the run.
const KNOWN_RED: &[&str] = &["token-overhead"];

/// Writes straight to the stdout handle, which the test harness does not
/// capture, so the criterion lines show up even when the test passes.
fn emit(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

struct Ledger {
    lines: Vec<(String, bool)>,
}

impl Ledger {
    fn record(&mut self, name: &str, pass: bool, detail: String, t: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        emit(&format!("{tag} {name}: {detail} [{:.2}s]", t.elapsed().as_secs_f64()));
        self.lines.push((name.to_string(), pass));
    }
}

struct Corpus {
    clips: Vec<ClipRecord>,
    items: Vec<QaItem>,
    forge_seconds: f64,
    qa_seconds: f64,
}

fn corpus() -> Corpus {
    let t = Instant::now();
    let (clips, _) = forge_batch(2024, 500, &GenConfig::default()).unwrap();
    let forge_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (items, _) =
        qa_batch(&clips, &ResolverConfig::default(), &QaConfig::default(), 2024, &RephraseMode::Rule).unwrap();
    Corpus { clips, items, forge_seconds, qa_seconds: t.elapsed().as_secs_f64() }
}

fn by_category(items: &[QaItem]) -> BTreeMap<TaskCategory, Vec<&QaItem>> {
    let mut m: BTreeMap<TaskCategory, Vec<&QaItem>> = BTreeMap::new();
    for i in items {
        m.entry(i.category).or_default().push(i);
    }
    m
}

fn random_baseline_reproduction(l: &mut Ledger, c: &Corpus) {
    let t = Instant::now();
    let r = random_baseline(&c.items);
    let fixed = [
        (TaskCategory::Reference, 20.0),
        (TaskCategory::Temporal, 20.0),
        (TaskCategory::Counting, 20.0),
        (TaskCategory::Attribute, 20.0),
        (TaskCategory::Feedback, 50.0),
    ];
    let mut ok = fixed.iter().all(|(cat, want)| r.accuracy(*cat) == Some(*want));
    let spatial = &by_category(&c.items)[&TaskCategory::Spatial];
    let binary = spatial.iter().filter(|i| i.options.len() == 2).count();
    let five = spatial.iter().filter(|i| i.options.len() == 5).count();
    let analytic = 100.0 * (0.5 * binary as f64 + 0.2 * five as f64) / (binary + five) as f64;
    let got = r.accuracy(TaskCategory::Spatial).unwrap();
    ok &= binary + five == spatial.len() && (got - analytic).abs() < 1e-9;
    ok &= t.elapsed().as_secs_f64() < 1.0;
    let cells: Vec<String> = r.per_category.iter().map(|(k, v)| format!("{k}={:.1}", v.accuracy)).collect();
    l.record("random-baseline", ok, format!("{} (spatial analytic {analytic:.2})", cells.join(" ")), t);
}

fn oracle_end_to_end(l: &mut Ledger, c: &Corpus) {
    let t = Instant::now();
    let clips: HashMap<String, ClipRecord> = c.clips.iter().map(|c| (c.clip_id.clone(), c.clone())).collect();
    let preds = run_answerer(&c.items, Some(&clips), &GeometricOracle::default(), 0).unwrap();
    let r = score(&c.items, &preds).unwrap();
    let total = c.forge_seconds + c.qa_seconds + t.elapsed().as_secs_f64();
    let all = TaskCategory::ALL.iter().all(|cat| r.accuracy(*cat) == Some(100.0));
    let ok = all && c.items.len() >= 600 && r.invalid_count == 0 && total < 30.0;
    l.record(
        "oracle-end-to-end",
        ok,
        format!("{} items from {} clips, average {:.1}, pipeline {total:.1}s", c.items.len(), c.clips.len(), r.average),
        t,
    );
}

fn gesture_soundness(l: &mut Ledger, c: &Corpus) {
    let t = Instant::now();
    let (mut hit, mut total) = (0usize, 0usize);
    for clip in &c.clips {
        let world = world_track(clip);
        for g in &clip.gestures {
            let bounds = clip.scene.object(&g.target_id).unwrap().bounds;
            for f in g.hold_start..=g.hold_end {
                total += 1;
                let ray = world.pose_at(f).and_then(|p| pointing_ray(p).ok());
                if ray.is_some_and(|r| ray_aabb_intersect(&r, &bounds).is_some()) {
                    hit += 1;
                }
            }
        }
    }
    let seconds = c.forge_seconds + t.elapsed().as_secs_f64();
    l.record(
        "gesture-soundness",
        hit == total && seconds < 60.0,
        format!("{hit}/{total} hold frames intersect their target, {seconds:.1}s incl. forging"),
        t,
    );
}

fn agreement(clips: &[ClipRecord]) -> usize {
    let rc = ResolverConfig::default();
    clips
        .iter()
        .filter(|clip| {
            let want: Vec<String> = clip.target_sequence().iter().map(|s| s.to_string()).collect();
            referent_ids(&resolve_referents(clip, &rc)) == want
        })
        .count()
}

fn resolver_fidelity(l: &mut Ledger, c: &Corpus) {
    let t = Instant::now();
    let (quiet, _) = forge_batch(2024, 500, &GenConfig::default().noiseless()).unwrap();
    let a = agreement(&quiet);
    let b = agreement(&c.clips);
    let ok = a == quiet.len() && b as f64 >= 0.99 * c.clips.len() as f64;
    l.record("resolver-fidelity", ok, format!("noiseless {a}/{}, default noise {b}/{}", quiet.len(), c.clips.len()), t);
}

fn adapter_numerics(l: &mut Ledger) {
    let t = Instant::now();
    let gate = GateConfig::default();
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    let h = 1e-5;
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + i);
        let mut p = AdapterParams::random(1 + (i as usize % 6), 2 + (i as usize % 9), &mut rng);
        if i % 3 == 0 {
            p.norm = KeypointNorm::RootCentered;
        }
        let k: Vec<f64> = (0..KEYPOINT_DIM).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let out = adapter_forward(&p, &k, 0.9, &gate).unwrap().0.unwrap();
        for (a, o) in out.iter().zip(oracle_adapter(&p, &k)) {
            fwd = fwd.max((a - o).abs());
        }
        let g: Vec<f64> = (0..p.d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grads = adapter_backward(&p, &k, 0.9, &gate, &g).unwrap();
        let f = |q: &AdapterParams, kk: &[f64]| oracle_adapter(q, kk).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let sizes = [p.w1.data.len(), p.w2.data.len(), KEYPOINT_DIM, KEYPOINT_DIM, KEYPOINT_DIM];
        for (block, n) in sizes.iter().enumerate() {
            for j in 0..*n {
                let eval = |e: f64| {
                    let mut q = p.clone();
                    let mut kk = k.clone();
                    match block {
                        0 => q.w1.data[j] += e,
                        1 => q.w2.data[j] += e,
                        2 => q.ln_gain[j] += e,
                        3 => q.ln_bias[j] += e,
                        _ => kk[j] += e,
                    }
                    f(&q, &kk)
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = match block {
                    0 => grads.w1.data[j],
                    1 => grads.w2.data[j],
                    2 => grads.ln_gain[j],
                    3 => grads.ln_bias[j],
                    _ => grads.keypoints[j],
                };
                bwd = bwd.max(rel_err(analytic, numeric));
            }
        }
    }

    let cfg = FeatureConfig { d: 8, frames: 3, n_vis: 4 };
    let data: Vec<_> = reference_split(3, 12).unwrap().iter().take(3).map(|(c, i)| build_example(c, i, &cfg)).collect();
    let model = ToySequenceModel::init(4, 8, GateConfig::default(), 3);
    let (_, grad) = loss_and_grad(&model, &data, true);
    let theta = model.flat();
    let mut trial = model.clone();
    let mut toy = 0.0f64;
    let step = 1e-6;
    for j in 0..theta.len() {
        let mut at = |e: f64| {
            let mut v = theta.clone();
            v[j] += e;
            trial.set_flat(&v);
            loss_and_grad(&trial, &data, true).0
        };
        let numeric = (at(step) - at(-step)) / (2.0 * step);
        toy = toy.max(rel_err(grad[j], numeric));
    }
    let ok = data.len() == 3 && fwd <= 1e-9 && bwd <= 1e-4 && toy <= 1e-3 && t.elapsed().as_secs_f64() < 10.0;
    l.record(
        "adapter-numerics",
        ok,
        format!(
            "forward max abs {fwd:.1e}, backward max rel {bwd:.1e}, toy grad max rel {toy:.1e} over {} params",
            theta.len()
        ),
        t,
    );
}

fn blocks(n: usize, n_vis: usize, d: usize) -> Vec<VisualTokenBlock> {
    (0..n).map(|f| VisualTokenBlock { frame_index: f, tokens: Matrix::zeros(n_vis, d) }).collect()
}

fn gating_and_interleaving(l: &mut Ledger) {
    let t = Instant::now();
    let p = AdapterParams::init(2, 4, 0);
    let k = vec![0.1; KEYPOINT_DIM];
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut frames, mut violations, mut monotone) = (0usize, 0usize, true);
    for stream in 0..100 {
        let conf: Vec<f64> =
            (0..100).map(|i| if i % 17 == 0 { [0.1, 0.3, 0.5, 0.7, 0.9][stream % 5] } else { rng.gen() }).collect();
        let mut counts = Vec::new();
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let gate = GateConfig::new(tau).unwrap();
            let hands: Vec<HandIntentToken> =
                conf.iter().map(|c| adapter_forward(&p, &k, *c, &gate).unwrap()).collect();
            let seq = interleave(&[], &blocks(100, 2, 4), &hands, &[]).unwrap();
            let keyed = seq.key_frames();
            if tau == 0.5 {
                frames += conf.len();
                violations += conf.iter().enumerate().filter(|(f, c)| keyed.contains(f) != (**c >= tau)).count();
                violations += usize::from(seq.check_layout().is_err());
            }
            counts.push(seq.key_count());
        }
        monotone &= counts.windows(2).all(|w| w[1] <= w[0]);
    }
    l.record(
        "gating-interleaving",
        violations == 0 && monotone && frames >= 10_000,
        format!("{frames} frames, {violations} biconditional violations, tau-monotone {monotone}"),
        t,
    );
}

fn token_overhead_bound(l: &mut Ledger) {
    let t = Instant::now();
    let p = AdapterParams::init(2, 4, 0);
    let gate = GateConfig::default();
    let hands: Vec<HandIntentToken> =
        (0..32).map(|_| adapter_forward(&p, &vec![0.1; KEYPOINT_DIM], 1.0, &gate).unwrap()).collect();
    let text: Vec<Vec<f64>> = vec![vec![0.0; 4]; 40];
    let mut cells = Vec::new();
    let mut ok = true;
    for n_vis in [64, 128, 256] {
        let seq = interleave(&text, &blocks(32, n_vis, 4), &hands, &[]).unwrap();
        let o = token_overhead(&seq);
        ok &= o < 0.01;
        cells.push(format!("n_vis={n_vis}: {o:.5}"));
    }
    l.record("token-overhead", ok, format!("32 frames, all hands present, 40 text tokens; {}", cells.join(", ")), t);
}

fn hand_ablation(l: &mut Ledger) {
    let t = Instant::now();
    let r = run_ablation(&AblationConfig::default()).unwrap().report;
    let hint = r.hint.accuracy(TaskCategory::Reference).unwrap();
    let stripped = r.stripped.accuracy(TaskCategory::Reference).unwrap();
    let random = r.random.accuracy(TaskCategory::Reference).unwrap();
    let items = r.train_items + r.test_items;
    let ok = r.gap >= 20.0 && (stripped - random).abs() <= 10.0 && items >= 2000 && r.seconds <= 300.0;
    l.record(
        "hand-ablation",
        ok,
        format!("{items} items: HINT {hint:.1}, stripped {stripped:.1}, random {random:.1}, gap {:.1}", r.gap),
        t,
    );
}

fn golden_suite(l: &mut Ledger) {
    #[derive(serde::Deserialize)]
    struct Golden {
        raw: String,
        num_options: usize,
        expected: Option<usize>,
    }
    let t = Instant::now();
    let cases: Vec<Golden> =
        include_str!("data/extract_goldens.jsonl").lines().map(|s| serde_json::from_str(s).unwrap()).collect();
    let passed = cases.iter().filter(|c| extract_choice(&c.raw, c.num_options) == c.expected).count();
    l.record(
        "extraction-goldens",
        passed == cases.len() && cases.len() == 30,
        format!("{passed}/{} cases", cases.len()),
        t,
    );
}

fn probe_gap(r: &ScoreReport, base: &ScoreReport) -> f64 {
    r.per_category.iter().map(|(cat, s)| (s.accuracy - base.accuracy(*cat).unwrap()).abs()).fold(0.0, f64::max)
}

/// Probes run on a larger set: pick-first on ~370 binary items has a standard
/// error near 2.6 points, too coarse for a ±7 band.
fn bias_probes(l: &mut Ledger) {
    let t = Instant::now();
    let (clips, _) = forge_batch(77, 1500, &GenConfig::default()).unwrap();
    let (items, _) =
        qa_batch(&clips, &ResolverConfig::default(), &QaConfig::default(), 77, &RephraseMode::Rule).unwrap();
    let base = random_baseline(&items);
    let blind = bias_probe(&items, None, &BlindProbe, 0).unwrap();
    let choices = bias_probe(&items, None, &ChoicesOnlyProbe, 0).unwrap();
    let (gb, gc) = (probe_gap(&blind, &base), probe_gap(&choices, &base));
    let fmt = |r: &ScoreReport| {
        r.per_category.iter().map(|(k, v)| format!("{k}={:.1}", v.accuracy)).collect::<Vec<_>>().join(" ")
    };
    l.record(
        "bias-probes",
        gb <= 7.0 && gc <= 7.0,
        format!(
            "{} items; blind max gap {gb:.1} [{}], choices-only max gap {gc:.1} [{}]",
            items.len(),
            fmt(&blind),
            fmt(&choices)
        ),
        t,
    );
}

#[test]
fn acceptance() {
    let mut l = Ledger { lines: Vec::new() };
    // the harness has already printed "test acceptance ... " without a newline
    emit("");
    let c = corpus();
    random_baseline_reproduction(&mut l, &c);
    oracle_end_to_end(&mut l, &c);
    gesture_soundness(&mut l, &c);
    resolver_fidelity(&mut l, &c);
    adapter_numerics(&mut l);
    gating_and_interleaving(&mut l);
    token_overhead_bound(&mut l);
    hand_ablation(&mut l);
    golden_suite(&mut l);
    bias_probes(&mut l);
    let unexpected: Vec<&str> =
        l.lines.iter().filter(|(n, p)| !p && !KNOWN_RED.contains(&n.as_str())).map(|(n, _)| n.as_str()).collect();
    let red: Vec<&str> = l.lines.iter().filter(|(_, p)| !p).map(|(n, _)| n.as_str()).collect();
    let passing = l.lines.iter().filter(|(_, p)| *p).count();
    emit(&format!("{passing} of {} criteria pass; red: {red:?}", l.lines.len()));
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs with `cargo test --test acceptance`; pass criterion
//! numbers as arguments (`-- 1 3 8`) to run a subset.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsr::docmodel::{
    extract_mdp, generate_synthetic_corpus, Corpus, Document, Entity, GeneratorSpec, MentionSpan, PlanMode,
    RelationFact, Sentence,
};
use lsr::encoder::Vocab;
use lsr::harness::{
    evaluate, pick_threshold, score_corpus, train, Checkpoint, EpochRecord, MetricsReport, RunConfig, TrainFacts,
    Triple,
};
use lsr::induction::{compare_with_oracle, induce_from_scores, marginals_from_scores, random_scores};
use lsr::model::{LsrModel, ModelConfig, ScoredFact};
use lsr::numerics::{grad_check, Tape, Tensor};
use lsr::reasoner::StructureMode;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self::new(false, detail)
    }
}

// Settings of the structure-vs-uniform comparison. Both arms share them.
const CMP_SEEDS: [u64; 3] = [1, 2, 3];
const CMP_EPOCHS: usize = 50;
const CMP_MARGIN: f64 = 0.05;
const RUN_BUDGET: Duration = Duration::from_secs(15 * 60);

fn synthetic(seed: u64, documents: usize) -> Corpus {
    let spec = GeneratorSpec {
        documents,
        relations: 4,
        bridge_prob: 0.5,
        ..GeneratorSpec::default()
    };
    generate_synthetic_corpus(&spec, seed).expect("feasible generator spec")
}

// 1: marginals agree with brute-force enumeration.
fn oracle_agreement() -> (Outcome, f64) {
    let start = Instant::now();
    let report = match compare_with_oracle(2024, 200, &[2, 3, 4, 5, 6]) {
        Ok(r) => r,
        Err(e) => return (Outcome::fail(format!("induction error: {e}")), f64::INFINITY),
    };
    let elapsed = start.elapsed();
    let diff = report.max_marginal_diff().max(report.max_log_z_diff);
    let pass = diff < 1e-8 && elapsed < Duration::from_secs(30) && report.instances == 1000;
    (
        Outcome::new(
            pass,
            format!(
                "{} instances, max deviation {diff:.2e}, {:.2}s",
                report.instances,
                elapsed.as_secs_f64()
            ),
        ),
        report.max_normalization_error,
    )
}

// 3: the tape gradient of log Z w.r.t. the scores equals the marginals.
fn log_z_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst = 0.0_f64;
    for trial in 0..50 {
        let n = 1 + trial % 5;
        let (s, r) = random_scores(&mut rng, n, 3.0);
        let mut tape = Tape::new();
        let sv = tape.leaf(s);
        let rv = tape.leaf(Tensor::row_vector(&r));
        let ts = match induce_from_scores(&mut tape, sv, rv) {
            Ok(t) => t,
            Err(e) => return Outcome::fail(format!("induction error: {e}")),
        };
        let grads = match tape.backward(ts.log_z) {
            Ok(g) => g,
            Err(e) => return Outcome::fail(format!("backward failed: {e}")),
        };
        let m = ts.marginals(&tape);
        let gs = grads.wrt(&tape, sv);
        let gr = grads.wrt(&tape, rv);
        let rel = |g: f64, want: f64| (g - want).abs() / want.abs().max(1e-15);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j {
                    gs.get(i, j).abs()
                } else {
                    rel(gs.get(i, j), m.a.get(i, j))
                };
                worst = worst.max(e);
            }
            worst = worst.max(rel(gr.data()[i], m.root[i]));
        }
    }
    Outcome::new(worst < 1e-6, format!("50 instances n ≤ 5, max rel err {worst:.2e}"))
}

fn toy_document() -> Document {
    let sentence = |words: &[&str], heads: &[usize]| Sentence {
        tokens: words.iter().map(|w| w.to_string()).collect(),
        dep_head: heads.to_vec(),
    };
    let span = |sent, start, end| MentionSpan { sent, start, end };
    Document {
        doc_id: "toy".into(),
        sentences: vec![
            sentence(&["alpha", "joined", "beta", "."], &[2, 0, 2, 2]),
            sentence(&["beta", "then", "met", "gamma", "."], &[3, 3, 0, 3, 3]),
            sentence(&["gamma", "praised", "alpha", "."], &[2, 0, 2, 2]),
        ],
        entities: vec![
            Entity {
                id: 0,
                mentions: vec![span(0, 0, 1), span(2, 2, 3)],
            },
            Entity {
                id: 1,
                mentions: vec![span(0, 2, 3), span(1, 0, 1)],
            },
            Entity {
                id: 2,
                mentions: vec![span(1, 3, 4), span(2, 0, 1)],
            },
        ],
        facts: vec![
            RelationFact { h: 0, t: 1, r: 0 },
            RelationFact { h: 1, t: 2, r: 1 },
            RelationFact { h: 0, t: 2, r: 1 },
        ],
    }
}

// 4: full-pipeline analytic gradients against central differences, for
// both the plain and the residual block wiring.
fn pipeline_gradient() -> Outcome {
    let start = Instant::now();
    let doc = toy_document();
    let corpus = Corpus::new(vec![doc.clone()]);
    let mut details = Vec::new();
    let mut pass = true;
    for residual in [false, true] {
        let config = ModelConfig {
            d_emb: 4,
            d: 6,
            blocks: 2,
            sub_layers: 2,
            relations: 2,
            residual,
            ..ModelConfig::default()
        };
        let model = LsrModel::new(config, Vocab::build(&corpus), 7);
        let plan = model.plan(&doc);
        let analytic = match model.doc_gradient(&doc, &plan, None) {
            Ok(Some(g)) => g.grads,
            Ok(None) => return Outcome::fail("toy document produced no loss"),
            Err(e) => return Outcome::fail(format!("forward failed: {e}")),
        };
        let report = grad_check(&model.store, &analytic, 1e-5, 1e-5, |store| {
            let mut probe = model.clone();
            probe.store = store.clone();
            probe
                .doc_loss(&doc, &plan)
                .expect("toy forward pass")
                .expect("toy loss")
        });
        pass &= report.max_rel_err < 1e-4;
        details.push(format!(
            "residual={residual}: {} coordinates over {} tensors, max rel err {:.2e} at {}[{}]",
            report.coords_checked,
            model.store.len(),
            report.max_rel_err,
            report.param,
            report.index
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    Outcome::new(pass, format!("{}; {:.2}s", details.join("; "), elapsed.as_secs_f64()))
}

// 5: adding a constant to every score leaves the marginals unchanged.
fn shift_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0_f64;
    for trial in 0..60 {
        let n = 2 + trial % 9;
        let (s, r) = random_scores(&mut rng, n, 3.0);
        let base = match marginals_from_scores(&s, &r) {
            Ok(m) => m,
            Err(e) => return Outcome::fail(format!("induction error: {e}")),
        };
        for c in [-5.0, 0.3, 10.0] {
            let mut shifted = s.map(|x| x + c);
            for i in 0..n {
                shifted.set(i, i, s.get(i, i));
            }
            let rs: Vec<f64> = r.iter().map(|x| x + c).collect();
            match marginals_from_scores(&shifted, &rs) {
                Ok(m) => worst = worst.max(m.max_abs_diff(&base)),
                Err(e) => return Outcome::fail(format!("induction error: {e}")),
            }
        }
    }
    Outcome::new(worst < 1e-8, format!("60 instances × 3 shifts, max diff {worst:.2e}"))
}

struct ArmResult {
    best: MetricsReport,
    untrained_f1: f64,
    max_normalization_error: f64,
    structures_checked: usize,
    elapsed: Duration,
}

fn run_arm(seed: u64, structure: StructureMode, blocks: usize) -> Result<ArmResult, String> {
    let train_corpus = synthetic(seed, 500);
    let dev_corpus = synthetic(seed + 1000, 100);
    let config = RunConfig {
        seed,
        structure,
        blocks,
        epochs: CMP_EPOCHS,
        relations: Some(4),
        mode: PlanMode::WithMdp,
        ..RunConfig::default()
    };
    let start = Instant::now();
    let mut norm = 0.0_f64;
    let mut checked = 0;
    let mut untrained_f1 = f64::NAN;
    let log = |r: &EpochRecord| {
        if r.epoch == 0 {
            untrained_f1 = r.dev.f1;
        }
        eprintln!(
            "  [{structure} seed {seed} N={blocks}] epoch {} loss {:?} f1 {:.3} intra {:.3} inter {:.3}",
            r.epoch, r.train_loss, r.dev.f1, r.dev.intra_f1, r.dev.inter_f1
        );
        norm = norm.max(r.max_normalization_error);
        checked += r.structures_checked;
    };
    let outcome = train(&config, &train_corpus, &dev_corpus, log).map_err(|e| e.to_string())?;
    Ok(ArmResult {
        best: outcome.best_metrics,
        untrained_f1,
        max_normalization_error: norm,
        structures_checked: checked,
        elapsed: start.elapsed(),
    })
}

struct Comparison {
    outcome: Outcome,
    first_seed_induced: Option<MetricsReport>,
    max_normalization_error: f64,
    structures_checked: usize,
}

// 6: induced structure beats the uniform adjacency on cross-sentence facts.
fn structure_vs_uniform() -> Comparison {
    let mut lsr_inter = Vec::new();
    let mut uni_inter = Vec::new();
    let mut norm = 0.0_f64;
    let mut checked = 0;
    let mut slowest = Duration::ZERO;
    let mut improved = true;
    let mut first_induced = None;
    for seed in CMP_SEEDS {
        for structure in [StructureMode::Induced, StructureMode::Uniform] {
            match run_arm(seed, structure, 2) {
                Ok(r) => {
                    slowest = slowest.max(r.elapsed);
                    improved &= r.best.f1 > r.untrained_f1;
                    if structure == StructureMode::Induced {
                        if seed == CMP_SEEDS[0] {
                            first_induced = Some(r.best.clone());
                        }
                        norm = norm.max(r.max_normalization_error);
                        checked += r.structures_checked;
                        lsr_inter.push(r.best.inter_f1);
                    } else {
                        uni_inter.push(r.best.inter_f1);
                    }
                }
                Err(e) => {
                    return Comparison {
                        outcome: Outcome::fail(format!("training failed: {e}")),
                        first_seed_induced: None,
                        max_normalization_error: f64::INFINITY,
                        structures_checked: 0,
                    }
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (l, u) = (mean(&lsr_inter), mean(&uni_inter));
    let pass = l - u >= CMP_MARGIN && slowest <= RUN_BUDGET;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    Comparison {
        outcome: Outcome::new(
            pass,
            format!(
                "inter F1 induced {l:.3} [{}] vs uniform {u:.3} [{}], gap {:.3} (need {CMP_MARGIN}), slowest run {:.0}s, every run beat its untrained dev F1: {improved}",
                fmt(&lsr_inter),
                fmt(&uni_inter),
                l - u,
                slowest.as_secs_f64()
            ),
        ),
        first_seed_induced: first_induced,
        max_normalization_error: norm,
        structures_checked: checked,
    }
}

// Informational: dev inter F1 against the number of refinement blocks. The
// N = 2 point comes from the comparison run of the same seed.
fn block_trend(two_blocks: Option<&MetricsReport>) -> String {
    let mut parts = Vec::new();
    for blocks in [1, 2, 3] {
        let result = match (blocks, two_blocks) {
            (2, Some(r)) => Ok(r.clone()),
            _ => run_arm(CMP_SEEDS[0], StructureMode::Induced, blocks).map(|r| r.best),
        };
        match result {
            Ok(r) => parts.push(format!("N={blocks}: f1 {:.3} inter {:.3}", r.f1, r.inter_f1)),
            Err(e) => parts.push(format!("N={blocks}: failed ({e})")),
        }
    }
    parts.join("; ")
}

fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        heads[order[k]] = parent + 1;
    }
    heads
}

fn random_spans(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<MentionSpan> {
    loop {
        let mut spans: Vec<MentionSpan> = Vec::new();
        for _ in 0..count {
            let len = rng.gen_range(1..=3).min(n);
            let start = rng.gen_range(0..=n - len);
            spans.push(MentionSpan {
                sent: 0,
                start,
                end: start + len,
            });
        }
        spans.sort();
        if spans.windows(2).all(|w| w[0].end <= w[1].start) {
            return spans;
        }
    }
}

fn bfs_path(heads: &[usize], from: usize, to: usize) -> Vec<usize> {
    let n = heads.len();
    let mut adj = vec![Vec::new(); n];
    for (t, &h) in heads.iter().enumerate() {
        if h > 0 {
            adj[t].push(h - 1);
            adj[h - 1].push(t);
        }
    }
    let mut prev = vec![usize::MAX; n];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if prev[y] == usize::MAX {
                prev[y] = x;
                queue.push_back(y);
            }
        }
    }
    let mut path = vec![to];
    let mut x = to;
    while x != from {
        x = prev[x];
        path.push(x);
    }
    path
}

fn oracle_mdp(heads: &[usize], spans: &[MentionSpan]) -> BTreeSet<usize> {
    let inside = |t: usize, s: &MentionSpan| s.start <= t && t < s.end;
    let anchor = |s: &MentionSpan| {
        (s.start..s.end)
            .find(|&t| heads[t] == 0 || !inside(heads[t] - 1, s))
            .unwrap()
    };
    let mut out = BTreeSet::new();
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            out.extend(bfs_path(heads, anchor(&spans[i]), anchor(&spans[j])));
        }
    }
    out.retain(|&t| !spans.iter().any(|s| inside(t, s)));
    out
}

// 7: path extraction against breadth-first search.
fn mdp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..100 {
        let n = rng.gen_range(5..=40);
        let heads = random_tree(&mut rng, n);
        let count = rng.gen_range(2..=4);
        let spans = random_spans(&mut rng, n, count);
        let sentence = Sentence {
            tokens: (0..n).map(|i| format!("w{i}")).collect(),
            dep_head: heads.clone(),
        };
        let got: BTreeSet<usize> = extract_mdp(&sentence, &spans).into_iter().collect();
        let want = oracle_mdp(&heads, &spans);
        if got != want {
            return Outcome::fail(format!("tree {trial}: got {got:?}, want {want:?} (heads {heads:?})"));
        }
    }
    Outcome::new(true, "100 random trees agree")
}

fn fixture_doc(doc_id: &str, names: [&str; 3], facts: Vec<RelationFact>) -> Document {
    let sentence = |words: Vec<&str>| Sentence {
        dep_head: (0..words.len()).map(|i| if i == 1 { 0 } else { 2 }).collect(),
        tokens: words.into_iter().map(String::from).collect(),
    };
    let one = |sent, start| vec![MentionSpan {
        sent,
        start,
        end: start + 1,
    }];
    Document {
        doc_id: doc_id.into(),
        sentences: vec![
            sentence(vec![names[0], "knows", names[1], "."]),
            sentence(vec!["and", "then", names[2], "."]),
        ],
        entities: vec![
            Entity { id: 0, mentions: one(0, 0) },
            Entity { id: 1, mentions: one(0, 2) },
            Entity { id: 2, mentions: one(1, 2) },
        ],
        facts,
    }
}

fn triple(doc: &str, h: usize, t: usize, r: usize) -> Triple {
    Triple {
        doc_id: doc.into(),
        h,
        t,
        r,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

// 8: hand-computed metrics and the threshold search.
fn metrics_fixtures() -> Outcome {
    let fact = |h, t, r| RelationFact { h, t, r };
    let gold = Corpus::new(vec![fixture_doc("d", ["Ann", "Bo", "Cy"], vec![fact(0, 1, 0), fact(0, 2, 1)])]);
    let none = TrainFacts::default();

    // one correct intra prediction, one wrong intra, one wrong inter
    let m = evaluate(&[triple("d", 0, 1, 0), triple("d", 1, 0, 0), triple("d", 0, 2, 2)], &gold, &none, 0.5);
    let a = close(m.precision, 1.0 / 3.0)
        && close(m.recall, 0.5)
        && close(m.f1, 0.4)
        && close(m.intra_f1, 2.0 / 3.0)
        && close(m.inter_f1, 0.0);

    // the training corpus already holds the same (Ann, Bo, 0) fact
    let train_corpus = Corpus::new(vec![fixture_doc("t", ["Ann", "Bo", "Dee"], vec![fact(0, 1, 0)])]);
    let seen = TrainFacts::from_corpus(&train_corpus);
    let m = evaluate(&[triple("d", 0, 1, 0), triple("d", 0, 2, 1), triple("d", 1, 2, 0)], &gold, &seen, 0.5);
    let b = close(m.precision, 2.0 / 3.0)
        && close(m.recall, 1.0)
        && close(m.f1, 0.8)
        && m.correct_in_train == 1
        && close(m.ign_precision, 0.5)
        && close(m.ign_f1, 2.0 / 3.0)
        && close(m.intra_f1, 1.0)
        && close(m.inter_f1, 2.0 / 3.0);

    // nothing predicted
    let m = evaluate(&[], &gold, &none, 0.5);
    let c = m.precision == 0.0 && m.recall == 0.0 && m.f1 == 0.0 && m.ign_f1 == 0.0;

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut d = true;
    for trial in 0..30 {
        let corpus = synthetic(500 + trial, 3);
        let mut scored = Vec::new();
        for doc in &corpus.documents {
            let e = doc.entities.len();
            for h in 0..e {
                for t in 0..e {
                    if h == t {
                        continue;
                    }
                    for r in 0..4 {
                        let gold_fact = doc.facts.contains(&RelationFact { h, t, r });
                        let base = if gold_fact { 0.3 } else { 0.0 };
                        // coarse rounding forces ties between scores
                        let score = ((base + rng.gen::<f64>() * 0.7) * 10.0).round() / 10.0;
                        scored.push(ScoredFact {
                            doc_id: doc.doc_id.clone(),
                            h,
                            t,
                            r,
                            score,
                        });
                    }
                }
            }
        }
        let picked = match pick_threshold(&scored, &corpus) {
            Ok(t) => t,
            Err(e) => return Outcome::fail(format!("pick_threshold failed: {e}")),
        };
        let f1_at = |theta: f64| {
            let kept: Vec<Triple> = scored
                .iter()
                .filter(|s| s.score >= theta)
                .map(|s| triple(&s.doc_id, s.h, s.t, s.r))
                .collect();
            evaluate(&kept, &corpus, &none, theta).f1
        };
        let mut candidates: Vec<f64> = scored.iter().map(|s| s.score).collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for &theta in &candidates {
            let f = f1_at(theta);
            if f > best.0 {
                best = (f, theta);
            }
        }
        d &= picked == best.1;
    }
    let pass = a && b && c && d;
    Outcome::new(
        pass,
        format!("fixtures [{a}, {b}, {c}], threshold scan over 30 random sets {d}"),
    )
}

fn lsr(args: &[&str], dir: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lsr"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`lsr {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

const CLI_CONFIG: &str = r#"{"d": 16, "d_emb": 16, "epochs": 2, "batch_size": 10, "lr": 0.005}"#;

// 9: the full-token node set trains and evaluates through the CLI.
fn full_tokens_cli() -> Outcome {
    let run = || -> Result<MetricsReport, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let p = dir.path();
        fs::write(p.join("small.json"), CLI_CONFIG).map_err(|e| e.to_string())?;
        lsr(&["gen-synthetic", "--seed", "1", "--documents", "100", "--out", "train.jsonl"], p)?;
        lsr(&["gen-synthetic", "--seed", "1001", "--documents", "100", "--out", "dev.jsonl"], p)?;
        lsr(
            &[
                "train", "--config", "small.json", "--mode", "full-tokens", "--train", "train.jsonl", "--dev",
                "dev.jsonl", "--out", "full.ckpt",
            ],
            p,
        )?;
        lsr(&["eval", "--checkpoint", "full.ckpt", "--corpus", "dev.jsonl", "--out", "report.json"], p)?;
        let text = fs::read_to_string(p.join("report.json")).map_err(|e| e.to_string())?;
        let report: MetricsReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let ckpt = Checkpoint::load(&p.join("full.ckpt")).map_err(|e| e.to_string())?;
        if ckpt.config.mode != PlanMode::FullTokens {
            return Err("checkpoint does not record full-tokens mode".into());
        }
        Ok(report)
    };
    match run() {
        Ok(r) => Outcome::new(
            [r.f1, r.intra_f1, r.inter_f1, r.ign_f1].iter().all(|x| x.is_finite()),
            format!("report f1 {:.3} intra {:.3} inter {:.3}", r.f1, r.intra_f1, r.inter_f1),
        ),
        Err(e) => Outcome::fail(e),
    }
}

// 10: seeded runs repeat exactly, and checkpoints preserve predictions.
fn reproducibility() -> Outcome {
    // identical commands in two fresh directories, so even the paths
    // recorded in the checkpoints agree
    let cli_run = || -> Result<Vec<Vec<u8>>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let p = dir.path();
        fs::write(p.join("small.json"), CLI_CONFIG).map_err(|e| e.to_string())?;
        lsr(&["gen-synthetic", "--seed", "4", "--documents", "40", "--out", "train.jsonl"], p)?;
        lsr(&["gen-synthetic", "--seed", "1004", "--documents", "20", "--out", "dev.jsonl"], p)?;
        lsr(
            &[
                "train", "--config", "small.json", "--seed", "9", "--train", "train.jsonl", "--dev", "dev.jsonl",
                "--out", "m.ckpt", "--report", "report.json",
            ],
            p,
        )?;
        lsr(&["predict", "--checkpoint", "m.ckpt", "--corpus", "dev.jsonl", "--out", "preds.jsonl"], p)?;
        ["report.json", "m.ckpt", "m.ckpt.log.jsonl", "preds.jsonl"]
            .iter()
            .map(|f| fs::read(p.join(f)).map_err(|e| e.to_string()))
            .collect()
    };
    let cli = || -> Result<bool, String> { Ok(cli_run()? == cli_run()?) };
    let library = || -> Result<bool, String> {
        let train_corpus = synthetic(5, 30);
        let dev_corpus = synthetic(1005, 15);
        let config = RunConfig {
            d: 16,
            d_emb: 16,
            epochs: 2,
            batch_size: 10,
            seed: 11,
            ..RunConfig::default()
        };
        let outcome = train(&config, &train_corpus, &dev_corpus, |_| {}).map_err(|e| e.to_string())?;
        let before = score_corpus(&outcome.best.to_model().map_err(|e| e.to_string())?, &dev_corpus)
            .map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("m.ckpt");
        outcome.best.save(&path).map_err(|e| e.to_string())?;
        let loaded = Checkpoint::load(&path).map_err(|e| e.to_string())?;
        let after = score_corpus(&loaded.to_model().map_err(|e| e.to_string())?, &dev_corpus)
            .map_err(|e| e.to_string())?;
        let bits = |v: &[ScoredFact]| v.iter().map(|s| s.score.to_bits()).collect::<Vec<_>>();
        Ok(!before.is_empty() && bits(&before) == bits(&after) && loaded.threshold == outcome.best.threshold)
    };
    match (cli(), library()) {
        (Ok(a), Ok(b)) => Outcome::new(a && b, format!("CLI reruns identical {a}, checkpoint round trip identical {b}")),
        (Err(e), _) | (_, Err(e)) => Outcome::fail(e),
    }
}

const TITLES: [&str; 10] = [
    "marginals match brute-force enumeration",
    "marginal columns normalise",
    "log-partition gradient equals marginals",
    "full-pipeline gradient check",
    "marginals invariant to score shift",
    "induced structure beats uniform adjacency on inter-sentence facts",
    "path extraction matches BFS oracle",
    "metrics fixtures and threshold search",
    "full-token mode trains and evaluates via CLI",
    "seeded runs and checkpoints reproduce exactly",
];

fn main() {
    let wanted: BTreeSet<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut results: Vec<Option<Outcome>> = (0..10).map(|_| None).collect();

    let mut norm_small = None;
    if on(1) || on(2) {
        let (outcome, norm) = oracle_agreement();
        norm_small = Some(norm);
        if on(1) {
            results[0] = Some(outcome);
        }
    }
    if on(3) {
        results[2] = Some(log_z_gradient());
    }
    if on(4) {
        results[3] = Some(pipeline_gradient());
    }
    if on(5) {
        results[4] = Some(shift_invariance());
    }
    let mut norm_training = None;
    if on(6) || on(2) {
        let cmp = structure_vs_uniform();
        norm_training = Some((cmp.max_normalization_error, cmp.structures_checked));
        if on(6) {
            let trend = block_trend(cmp.first_seed_induced.as_ref());
            results[5] = Some(cmp.outcome);
            println!("block-count trend (seed {}, informational): {trend}", CMP_SEEDS[0]);
        }
    }
    if on(2) {
        let small = norm_small.unwrap_or(f64::INFINITY);
        let (train_norm, checked) = norm_training.unwrap_or((f64::INFINITY, 0));
        results[1] = Some(Outcome::new(
            small < 1e-8 && train_norm < 1e-8 && checked > 0,
            format!("oracle instances {small:.2e}, {checked} training structures {train_norm:.2e}"),
        ));
    }
    if on(7) {
        results[6] = Some(mdp_oracle());
    }
    if on(8) {
        results[7] = Some(metrics_fixtures());
    }
    if on(9) {
        results[8] = Some(full_tokens_cli());
    }
    if on(10) {
        results[9] = Some(reproducibility());
    }

    let mut failed = 0;
    for (k, result) in results.iter().enumerate() {
        if let Some(o) = result {
            let tag = if o.pass { "PASS" } else { "FAIL" };
            println!("criterion {:>2} {tag}: {} ({})", k + 1, TITLES[k], o.detail);
            failed += usize::from(!o.pass);
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

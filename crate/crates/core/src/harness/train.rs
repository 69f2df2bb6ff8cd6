use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{above_threshold, evaluate, pick_threshold, MetricsReport, TrainFacts};
use super::{Checkpoint, HarnessError, RunConfig};
use crate::docmodel::{Corpus, NodePlan};
use crate::encoder::{load_pretrained, Vocab};
use crate::model::{DocGradient, LsrModel, ModelError, ScoredFact};
use crate::numerics::{Adam, Tensor};

/// One line of the training log. Epoch 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub dev: MetricsReport,
    pub documents_used: usize,
    pub skipped_singular: usize,
    pub jittered: usize,
    pub structures_checked: usize,
    pub max_normalization_error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best dev-F1 epoch (earliest on ties).
    pub best: Checkpoint,
    pub best_metrics: MetricsReport,
    pub history: Vec<EpochRecord>,
    pub skipped_singular: usize,
}

fn singular_or(err: ModelError, skipped: &mut usize) -> Result<(), HarnessError> {
    if err.is_singular() {
        warn!("skipping document: {err}");
        *skipped += 1;
        Ok(())
    } else {
        Err(err.into())
    }
}

/// Eval-mode scores for every document; documents whose structure is
/// singular are skipped with a warning.
pub fn score_corpus(model: &LsrModel, corpus: &Corpus) -> Result<Vec<ScoredFact>, HarnessError> {
    let results: Vec<_> = corpus.documents.par_iter().map(|d| model.score_document(d)).collect();
    let mut out = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(s) => out.extend(s),
            Err(e) => singular_or(e, &mut skipped)?,
        }
    }
    Ok(out)
}

/// Scores `corpus`, picks (or applies) the threshold and evaluates.
pub fn evaluate_model(
    model: &LsrModel,
    corpus: &Corpus,
    train_facts: &TrainFacts,
    threshold: Option<f64>,
) -> Result<MetricsReport, HarnessError> {
    let scores = score_corpus(model, corpus)?;
    let theta = match threshold {
        Some(t) => t,
        None if scores.is_empty() => 0.5,
        None => pick_threshold(&scores, corpus)?,
    };
    Ok(evaluate(&above_threshold(&scores, theta), corpus, train_facts, theta))
}

fn dropout_rng(seed: u64, epoch: usize, doc: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((epoch as u64) << 32) | doc as u64);
    r
}

/// Trains from scratch. `on_epoch` sees every record, including the
/// untrained epoch 0, as soon as it is computed.
pub fn train(
    config: &RunConfig,
    train_corpus: &Corpus,
    dev_corpus: &Corpus,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    if train_corpus.is_empty() {
        return Err(HarnessError::EmptyInput("training corpus is empty"));
    }
    let relations = config
        .relations
        .unwrap_or_else(|| train_corpus.relation_count().max(dev_corpus.relation_count()).max(1));
    let vocab = Vocab::build(train_corpus);
    let mut model = LsrModel::new(config.model_config(relations), vocab, config.seed);
    model.init_relation_prior(train_corpus);
    if let Some(path) = &config.embeddings {
        let id = model.encoder.embedding;
        let filled = load_pretrained(path, &model.vocab, model.store.get_mut(id))?;
        info!("loaded {filled} pretrained embedding rows");
    }
    let train_facts = TrainFacts::from_corpus(train_corpus);
    let plans: Vec<NodePlan> = train_corpus.documents.par_iter().map(|d| model.plan(d)).collect();
    let mut adam = Adam::new(config.adam(), &model.store);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);

    let dev_eval = |m: &LsrModel| evaluate_model(m, dev_corpus, &train_facts, config.threshold);
    let initial = dev_eval(&model)?;
    let record = EpochRecord {
        epoch: 0,
        train_loss: None,
        dev: initial.clone(),
        documents_used: 0,
        skipped_singular: 0,
        jittered: 0,
        structures_checked: 0,
        max_normalization_error: 0.0,
    };
    on_epoch(&record);
    let mut history = vec![record];
    let mut f1_history = vec![initial.f1];
    let mut best = Checkpoint::from_model(&model, config, 0, &f1_history, initial.threshold);
    let mut best_metrics = initial;
    let mut skipped_total = 0;

    let mut order: Vec<usize> = (0..train_corpus.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut used = 0;
        let mut skipped = 0;
        let mut jittered = 0;
        let mut structures = 0;
        let mut max_norm_err: f64 = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<Result<Option<DocGradient>, ModelError>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = dropout_rng(config.seed, epoch, i);
                    model.doc_gradient(&train_corpus.documents[i], &plans[i], Some(&mut rng))
                })
                .collect();
            let mut sum: Option<Vec<Tensor>> = None;
            let mut count = 0;
            for r in results {
                match r {
                    Ok(Some(g)) => {
                        loss_sum += g.loss;
                        count += 1;
                        jittered += g.jittered;
                        structures += g.structures;
                        max_norm_err = max_norm_err.max(g.max_normalization_error);
                        match &mut sum {
                            None => sum = Some(g.grads),
                            Some(acc) => acc.iter_mut().zip(&g.grads).for_each(|(a, b)| a.add_assign(b)),
                        }
                    }
                    Ok(None) => {}
                    Err(e) => singular_or(e, &mut skipped)?,
                }
            }
            if let Some(acc) = sum {
                let scale = 1.0 / count as f64;
                let grads: Vec<Tensor> = acc.iter().map(|g| g.scale(scale)).collect();
                adam.step(&mut model.store, &grads)
                    .map_err(|e| HarnessError::Config(format!("optimizer: {e}")))?;
                used += count;
            }
        }
        skipped_total += skipped;
        let dev = dev_eval(&model)?;
        f1_history.push(dev.f1);
        let record = EpochRecord {
            epoch,
            train_loss: (used > 0).then(|| loss_sum / used as f64),
            dev: dev.clone(),
            documents_used: used,
            skipped_singular: skipped,
            jittered,
            structures_checked: structures,
            max_normalization_error: max_norm_err,
        };
        info!(
            "epoch {epoch}: loss {:.5} dev F1 {:.4} inter F1 {:.4}",
            record.train_loss.unwrap_or(f64::NAN),
            dev.f1,
            dev.inter_f1
        );
        on_epoch(&record);
        history.push(record);
        if dev.f1 > best_metrics.f1 {
            best = Checkpoint::from_model(&model, config, epoch, &f1_history, dev.threshold);
            best_metrics = dev;
        }
    }
    best.dev_f1_history = f1_history;
    Ok(TrainOutcome {
        best,
        best_metrics,
        history,
        skipped_singular: skipped_total,
    })
}

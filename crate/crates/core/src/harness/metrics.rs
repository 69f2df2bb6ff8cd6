use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::docmodel::{Corpus, Document};
use crate::model::ScoredFact;

/// One relational fact `(doc, head, tail, relation)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub doc_id: String,
    pub h: usize,
    pub t: usize,
    pub r: usize,
}

impl From<&ScoredFact> for Triple {
    fn from(s: &ScoredFact) -> Self {
        Self {
            doc_id: s.doc_id.clone(),
            h: s.h,
            t: s.t,
            r: s.r,
        }
    }
}

/// Surface-level identity of a fact: sorted distinct mention strings of
/// head and tail, plus the relation.
pub type FactKey = (Vec<String>, Vec<String>, usize);

/// Keys of every gold fact in a training corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainFacts(HashSet<FactKey>);

impl TrainFacts {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self(
            corpus
                .documents
                .iter()
                .flat_map(|d| d.facts.iter().map(move |f| fact_key(d, f.h, f.t, f.r)))
                .collect(),
        )
    }

    pub fn contains(&self, key: &FactKey) -> bool {
        self.0.contains(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn fact_key(doc: &Document, h: usize, t: usize, r: usize) -> FactKey {
    (doc.surface_forms(h), doc.surface_forms(t), r)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        harmonic(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ign_precision: f64,
    pub ign_f1: f64,
    pub intra_f1: f64,
    pub inter_f1: f64,
    pub threshold: f64,
    pub overall: Counts,
    pub intra: Counts,
    pub inter: Counts,
    /// Correct predictions whose surface key also occurs in training.
    pub correct_in_train: usize,
}

/// Micro-averaged scores of `predicted` against the gold facts of `corpus`.
/// A pair is intra-sentence when its entities share a sentence in some
/// mention, inter-sentence otherwise. Ign scores drop correct predictions
/// whose surface key is in `train` from both the numerator and the
/// prediction count; recall stays unchanged.
pub fn evaluate(predicted: &[Triple], corpus: &Corpus, train: &TrainFacts, threshold: f64) -> MetricsReport {
    let docs: HashMap<&str, &Document> = corpus.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let gold: BTreeSet<Triple> = corpus
        .documents
        .iter()
        .flat_map(|d| {
            d.facts.iter().map(move |f| Triple {
                doc_id: d.doc_id.clone(),
                h: f.h,
                t: f.t,
                r: f.r,
            })
        })
        .collect();
    let predicted: BTreeSet<&Triple> = predicted.iter().collect();

    let intra_pair = |t: &Triple| docs.get(t.doc_id.as_str()).is_some_and(|d| d.co_sentential(t.h, t.t));
    let mut overall = Counts::default();
    let mut intra = Counts::default();
    let mut inter = Counts::default();
    let mut correct_in_train = 0;

    for t in &gold {
        overall.gold += 1;
        if intra_pair(t) { &mut intra } else { &mut inter }.gold += 1;
    }
    for &t in &predicted {
        let bucket = if intra_pair(t) { &mut intra } else { &mut inter };
        bucket.predicted += 1;
        overall.predicted += 1;
        if gold.contains(t) {
            bucket.correct += 1;
            overall.correct += 1;
            let doc = docs[t.doc_id.as_str()];
            if train.contains(&fact_key(doc, t.h, t.t, t.r)) {
                correct_in_train += 1;
            }
        }
    }

    let recall = overall.recall();
    let ign_precision = ratio(overall.correct - correct_in_train, overall.predicted - correct_in_train);
    MetricsReport {
        precision: overall.precision(),
        recall,
        f1: overall.f1(),
        ign_precision,
        ign_f1: harmonic(ign_precision, recall),
        intra_f1: intra.f1(),
        inter_f1: inter.f1(),
        threshold,
        overall,
        intra,
        inter,
        correct_in_train,
    }
}

/// Facts scoring at or above `threshold`.
pub fn above_threshold(scored: &[ScoredFact], threshold: f64) -> Vec<Triple> {
    scored.iter().filter(|s| s.score >= threshold).map(Triple::from).collect()
}

/// Scans every distinct score as a candidate threshold (predict `score ≥ θ`)
/// and returns the one with the best micro F1; ties go to the smaller θ.
pub fn pick_threshold(scored: &[ScoredFact], corpus: &Corpus) -> Result<f64, HarnessError> {
    if scored.is_empty() {
        return Err(HarnessError::EmptyInput("no scored facts for threshold selection"));
    }
    let gold: HashSet<Triple> = corpus
        .documents
        .iter()
        .flat_map(|d| {
            d.facts.iter().map(move |f| Triple {
                doc_id: d.doc_id.clone(),
                h: f.h,
                t: f.t,
                r: f.r,
            })
        })
        .collect();
    let mut order: Vec<(f64, bool)> = scored.iter().map(|s| (s.score, gold.contains(&Triple::from(s)))).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let total_gold = gold.len();
    let (mut best_theta, mut best_f1) = (order[0].0, f64::NEG_INFINITY);
    let (mut predicted, mut correct) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let theta = order[i].0;
        while i < order.len() && order[i].0 == theta {
            predicted += 1;
            correct += usize::from(order[i].1);
            i += 1;
        }
        let f1 = Counts {
            predicted,
            gold: total_gold,
            correct,
        }
        .f1();
        if f1 >= best_f1 {
            best_f1 = f1;
            best_theta = theta;
        }
    }
    Ok(best_theta)
}

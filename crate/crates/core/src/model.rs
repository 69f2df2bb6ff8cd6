//! The assembled network: encoder, refinement blocks and classifier over
//! one shared parameter store.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::docmodel::{build_node_plan, Corpus, Document, NodePlan, PlanMode};
use crate::encoder::{build_nodes, encode_document, EncoderParams, Vocab};
use crate::induction::{InductionParams, StructureMarginals};
use crate::numerics::{BoundParams, NumericsError, ParamStore, Tape, Tensor, Var};
use crate::reasoner::{
    bce_loss, classify_all, pair_index, refine, BlockParams, ClassifierParams, Dropout, ReasonerError,
    RefineOptions, RefinementTrace, StructureMode,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("document {doc_id}: {source}")]
    Reasoner {
        doc_id: String,
        #[source]
        source: ReasonerError,
    },
    #[error("document {doc_id}: {source}")]
    Numerics {
        doc_id: String,
        #[source]
        source: NumericsError,
    },
    #[error("document {doc_id}: relation {r} outside 0..{k}")]
    RelationOutOfRange { doc_id: String, r: usize, k: usize },
}

impl ModelError {
    pub fn is_singular(&self) -> bool {
        matches!(self, ModelError::Reasoner { source, .. } if source.is_singular())
    }
}

/// Architecture hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_emb: usize,
    pub d: usize,
    pub blocks: usize,
    pub sub_layers: usize,
    pub relations: usize,
    pub dropout: f64,
    pub mode: PlanMode,
    pub structure: StructureMode,
    /// One induction parameter set reused by every block.
    pub share_induction: bool,
    /// Add each block's input to its concatenated sub-layer outputs.
    pub residual: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_emb: 100,
            d: 120,
            blocks: 2,
            sub_layers: 2,
            relations: 4,
            dropout: 0.3,
            mode: PlanMode::WithMdp,
            structure: StructureMode::Induced,
            share_induction: false,
            residual: false,
        }
    }
}

/// One probability for an ordered entity pair and relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    pub doc_id: String,
    pub h: usize,
    pub t: usize,
    pub r: usize,
    pub score: f64,
}

/// Loss and parameter gradients of one document.
#[derive(Debug, Clone)]
pub struct DocGradient {
    pub loss: f64,
    /// Aligned with the parameter store ids.
    pub grads: Vec<Tensor>,
    pub max_normalization_error: f64,
    pub structures: usize,
    pub jittered: usize,
}

/// Plain-value copy of one forward pass.
#[derive(Debug, Clone)]
pub struct DocStructures {
    pub plan: NodePlan,
    pub structures: Vec<StructureMarginals>,
    pub adjacency: Vec<Tensor>,
    pub nodes: Vec<Tensor>,
}

struct Pass {
    /// `pairs × k`, `None` with fewer than two entities.
    probs: Option<Var>,
    pairs: Vec<(usize, usize)>,
    trace: RefinementTrace,
}

/// Xavier-uniform initialiser over the first and last dimensions.
pub fn xavier_init(rng: &mut ChaCha8Rng) -> impl FnMut(&[usize]) -> Tensor + '_ {
    move |shape: &[usize]| {
        let fan_in = shape[0];
        let fan_out = *shape.last().unwrap_or(&1);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
        Tensor::new(shape.to_vec(), data).expect("sized to shape")
    }
}

#[derive(Debug, Clone)]
pub struct LsrModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    pub encoder: EncoderParams,
    pub blocks: Vec<BlockParams>,
    pub classifier: ClassifierParams,
}

impl LsrModel {
    /// Registers every parameter in a fixed order so that names and ids
    /// depend only on the config and vocabulary size.
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Self {
        assert!(config.blocks >= 1, "at least one block");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = xavier_init(&mut rng);
        let mut store = ParamStore::new();
        let encoder = EncoderParams::register(&mut store, vocab.len(), config.d_emb, config.d, &mut init);
        let shared = config
            .share_induction
            .then(|| InductionParams::register(&mut store, "induction", config.d, &mut init));
        let blocks = (0..config.blocks)
            .map(|b| {
                let prefix = format!("block{b}");
                let induction = shared.unwrap_or_else(|| {
                    InductionParams::register(&mut store, &format!("{prefix}.induction"), config.d, &mut init)
                });
                BlockParams::register(&mut store, &prefix, config.d, config.sub_layers, induction, &mut init)
            })
            .collect();
        let classifier = ClassifierParams::register(&mut store, config.d, config.relations, &mut init);
        // word vectors start at unit scale, like pretrained ones; on a
        // separate stream so the other initial values do not depend on it
        let mut embed_rng = ChaCha8Rng::seed_from_u64(seed);
        embed_rng.set_stream(1);
        for x in store.get_mut(encoder.embedding).data_mut() {
            *x = embed_rng.sample(StandardNormal);
        }
        Self {
            config,
            vocab,
            store,
            encoder,
            blocks,
            classifier,
        }
    }

    /// Sets each relation's classifier bias to the log-odds of that
    /// relation among the ordered entity pairs of `corpus`, so early updates
    /// go into telling pairs apart rather than into a global shift.
    pub fn init_relation_prior(&mut self, corpus: &Corpus) {
        let k = self.config.relations;
        let mut positives = vec![0usize; k];
        let mut pairs = 0usize;
        for doc in &corpus.documents {
            let e = doc.entities.len();
            if e < 2 {
                continue;
            }
            pairs += e * (e - 1);
            let distinct: BTreeSet<(usize, usize, usize)> = doc
                .facts
                .iter()
                .filter(|f| f.r < k && f.h != f.t)
                .map(|f| (f.h, f.t, f.r))
                .collect();
            for (_, _, r) in distinct {
                positives[r] += 1;
            }
        }
        if pairs == 0 {
            return;
        }
        let bias: Vec<f64> = positives
            .iter()
            .map(|&p| {
                let rate = (p as f64 / pairs as f64).clamp(1e-4, 0.5);
                (rate / (1.0 - rate)).ln()
            })
            .collect();
        self.store
            .set(self.classifier.b_e, Tensor::row_vector(&bias))
            .expect("bias shape is 1 × k");
    }

    pub fn refine_options(&self) -> RefineOptions {
        RefineOptions {
            structure: self.config.structure,
            residual: self.config.residual,
        }
    }

    pub fn plan(&self, doc: &Document) -> NodePlan {
        build_node_plan(doc, self.config.mode)
    }

    fn pass(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        doc: &Document,
        plan: &NodePlan,
        dropout: &mut Dropout<'_>,
    ) -> Result<Pass, ModelError> {
        let num = |source| ModelError::Numerics {
            doc_id: doc.doc_id.clone(),
            source,
        };
        let tokens = encode_document(tape, bound, &self.encoder, &self.vocab, doc).map_err(num)?;
        let u0 = build_nodes(tape, doc, tokens, plan).map_err(num)?;
        let (un, trace) = refine(tape, bound, &self.blocks, self.refine_options(), u0, dropout).map_err(|source| {
            ModelError::Reasoner {
                doc_id: doc.doc_id.clone(),
                source,
            }
        })?;
        let (ids, rows): (Vec<usize>, Vec<usize>) = plan.entity_rows().unzip();
        let e = ids.len();
        let mut pairs = Vec::with_capacity(e * e.saturating_sub(1));
        let mut index = Vec::with_capacity(pairs.capacity());
        for i in 0..e {
            for j in (0..e).filter(|&j| j != i) {
                pairs.push((ids[i], ids[j]));
                index.push(pair_index(e, i, j));
            }
        }
        let probs = if pairs.is_empty() {
            None
        } else {
            let ents = tape.gather_rows(un, &rows).map_err(num)?;
            let all = classify_all(tape, bound, &self.classifier, ents).map_err(num)?;
            Some(tape.gather_rows(all, &index).map_err(num)?)
        };
        Ok(Pass { probs, pairs, trace })
    }

    /// `pairs × k` gold indicator matrix.
    fn targets(&self, doc: &Document, pairs: &[(usize, usize)]) -> Result<Tensor, ModelError> {
        let k = self.config.relations;
        let mut y = Tensor::zeros(&[pairs.len(), k]);
        for f in &doc.facts {
            if f.r >= k {
                return Err(ModelError::RelationOutOfRange {
                    doc_id: doc.doc_id.clone(),
                    r: f.r,
                    k,
                });
            }
            if let Some(row) = pairs.iter().position(|&p| p == (f.h, f.t)) {
                y.set(row, f.r, 1.0);
            }
        }
        Ok(y)
    }

    /// Training-mode loss and gradients; `None` for documents with fewer
    /// than two entities. `rng` drives dropout; pass `None` for eval mode.
    pub fn doc_gradient(
        &self,
        doc: &Document,
        plan: &NodePlan,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Option<DocGradient>, ModelError> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape);
        let mut dropout = Dropout {
            rate: self.config.dropout,
            rng,
        };
        let pass = self.pass(&mut tape, &bound, doc, plan, &mut dropout)?;
        let Some(probs) = pass.probs else { return Ok(None) };
        let y = self.targets(doc, &pass.pairs)?;
        let num = |source| ModelError::Numerics {
            doc_id: doc.doc_id.clone(),
            source,
        };
        let loss = bce_loss(&mut tape, probs, &y).map_err(num)?;
        let mut grads = tape.backward(loss).map_err(num)?;
        Ok(Some(DocGradient {
            loss: tape.value(loss).data()[0],
            grads: bound.collect(&tape, &mut grads),
            max_normalization_error: pass.trace.max_normalization_error(),
            structures: pass.trace.structures.len(),
            jittered: pass.trace.jittered,
        }))
    }

    /// Eval-mode loss only.
    pub fn doc_loss(&self, doc: &Document, plan: &NodePlan) -> Result<Option<f64>, ModelError> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape);
        let pass = self.pass(&mut tape, &bound, doc, plan, &mut Dropout::eval())?;
        let Some(probs) = pass.probs else { return Ok(None) };
        let y = self.targets(doc, &pass.pairs)?;
        let loss = bce_loss(&mut tape, probs, &y).map_err(|source| ModelError::Numerics {
            doc_id: doc.doc_id.clone(),
            source,
        })?;
        Ok(Some(tape.value(loss).data()[0]))
    }

    /// Eval-mode scores for every ordered entity pair and relation.
    pub fn score_document(&self, doc: &Document) -> Result<Vec<ScoredFact>, ModelError> {
        self.score_with_plan(doc, &self.plan(doc))
    }

    pub fn score_with_plan(&self, doc: &Document, plan: &NodePlan) -> Result<Vec<ScoredFact>, ModelError> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape);
        let pass = self.pass(&mut tape, &bound, doc, plan, &mut Dropout::eval())?;
        let Some(probs) = pass.probs else { return Ok(Vec::new()) };
        let probs = tape.value(probs);
        let mut out = Vec::with_capacity(probs.len());
        for (row, &(h, t)) in pass.pairs.iter().enumerate() {
            for r in 0..self.config.relations {
                out.push(ScoredFact {
                    doc_id: doc.doc_id.clone(),
                    h,
                    t,
                    r,
                    score: probs.get(row, r),
                });
            }
        }
        Ok(out)
    }

    /// Eval-mode structures and node matrices of every block.
    pub fn structures(&self, doc: &Document, plan: &NodePlan) -> Result<DocStructures, ModelError> {
        let mut tape = Tape::new();
        let bound = self.store.bind(&mut tape);
        let pass = self.pass(&mut tape, &bound, doc, plan, &mut Dropout::eval())?;
        Ok(DocStructures {
            plan: plan.clone(),
            structures: pass.trace.structures,
            adjacency: pass.trace.adjacency.iter().map(|&a| tape.value(a).clone()).collect(),
            nodes: pass.trace.nodes.iter().map(|&u| tape.value(u).clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{generate_synthetic_corpus, GeneratorSpec};

    fn small() -> (LsrModel, crate::docmodel::Corpus) {
        let spec = GeneratorSpec {
            documents: 3,
            ..GeneratorSpec::default()
        };
        let corpus = generate_synthetic_corpus(&spec, 4).unwrap();
        let config = ModelConfig {
            d_emb: 8,
            d: 10,
            ..ModelConfig::default()
        };
        (LsrModel::new(config, Vocab::build(&corpus), 1), corpus)
    }

    #[test]
    fn pair_and_relation_counts() {
        let (m, corpus) = small();
        let doc = &corpus.documents[0];
        let e = doc.entities.len();
        let scores = m.score_document(doc).unwrap();
        assert_eq!(scores.len(), e * (e - 1) * 4);
        assert!(scores.iter().all(|s| s.score > 0.0 && s.score < 1.0 && s.h != s.t));
    }

    #[test]
    fn eval_passes_are_bit_identical() {
        let (m, corpus) = small();
        let doc = &corpus.documents[1];
        assert_eq!(m.score_document(doc).unwrap(), m.score_document(doc).unwrap());
    }

    #[test]
    fn same_seed_same_parameters() {
        let (a, corpus) = small();
        let b = LsrModel::new(a.config.clone(), Vocab::build(&corpus), 1);
        for id in a.store.ids() {
            assert_eq!(a.store.get(id), b.store.get(id));
        }
    }

    #[test]
    fn gradients_cover_every_parameter() {
        let (m, corpus) = small();
        let doc = &corpus.documents[0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = m.doc_gradient(doc, &m.plan(doc), Some(&mut rng)).unwrap().unwrap();
        assert_eq!(g.grads.len(), m.store.len());
        assert!(g.loss.is_finite() && g.loss > 0.0);
        assert_eq!(g.structures, 2);
        assert!(g.max_normalization_error < 1e-8);
    }

    #[test]
    fn shared_induction_registers_once() {
        let (m, corpus) = small();
        let shared = LsrModel::new(
            ModelConfig {
                share_induction: true,
                ..m.config.clone()
            },
            Vocab::build(&corpus),
            1,
        );
        assert_eq!(shared.blocks[0].induction, shared.blocks[1].induction);
        assert_ne!(m.blocks[0].induction, m.blocks[1].induction);
        assert_eq!(m.store.len() - shared.store.len(), 4);
    }

    #[test]
    fn relation_out_of_range() {
        let (m, corpus) = small();
        let mut doc = corpus.documents[0].clone();
        doc.facts[0].r = 9;
        assert!(matches!(
            m.doc_gradient(&doc, &m.plan(&doc), None),
            Err(ModelError::RelationOutOfRange { r: 9, .. })
        ));
    }
}

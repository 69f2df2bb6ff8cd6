//! Token embeddings, the BiLSTM context encoder, and initial node vectors.

mod lstm;
mod vocab;

pub use lstm::{encode_sentence, LstmParams};
pub use vocab::{load_pretrained, Vocab, UNK};

use crate::docmodel::{Document, NodeDescriptor, NodePlan};
use crate::numerics::{BoundParams, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

/// Embedding table plus forward and backward LSTMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    /// `|V| × d_emb`.
    pub embedding: ParamId,
    pub forward: LstmParams,
    pub backward: LstmParams,
}

impl EncoderParams {
    /// Each direction gets `d / 2` hidden units.
    pub fn register(
        store: &mut ParamStore,
        vocab_len: usize,
        d_emb: usize,
        d: usize,
        init: &mut impl FnMut(&[usize]) -> Tensor,
    ) -> Self {
        assert!(d % 2 == 0, "hidden size must be even");
        let embedding = store.insert("encoder.embedding", init(&[vocab_len, d_emb]));
        let forward = LstmParams::register(store, "encoder.lstm_fwd", d_emb, d / 2, init);
        let backward = LstmParams::register(store, "encoder.lstm_bwd", d_emb, d / 2, init);
        Self {
            embedding,
            forward,
            backward,
        }
    }
}

/// Encodes every sentence of `doc` and stacks the token rows in document
/// order (`total tokens × d`).
pub fn encode_document(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &EncoderParams,
    vocab: &Vocab,
    doc: &Document,
) -> Result<Var, NumericsError> {
    let mut rows = Vec::with_capacity(doc.sentences.len());
    for s in &doc.sentences {
        let ids = vocab.ids(&s.tokens);
        rows.push(encode_sentence(tape, bound, params, &ids)?);
    }
    tape.concat_rows(&rows)
}

/// `n × total_tokens` averaging matrix: mention rows average their span,
/// entity rows average their mention rows, path/token rows pick one token.
pub fn pooling_matrix(doc: &Document, plan: &NodePlan) -> Tensor {
    let mut offsets = Vec::with_capacity(doc.sentences.len());
    let mut total = 0;
    for s in &doc.sentences {
        offsets.push(total);
        total += s.len();
    }
    let mentions = doc.mentions();
    let mention_row = |span: &crate::docmodel::MentionSpan| -> Vec<(usize, f64)> {
        let w = 1.0 / (span.end - span.start) as f64;
        (span.start..span.end).map(|t| (offsets[span.sent] + t, w)).collect()
    };
    let mut m = Tensor::zeros(&[plan.n(), total]);
    for (row, node) in plan.nodes.iter().enumerate() {
        match node {
            NodeDescriptor::Mention { span, .. } => {
                for (col, w) in mention_row(span) {
                    m.set(row, col, w);
                }
            }
            NodeDescriptor::Entity { id } => {
                let own: Vec<_> = mentions.iter().filter(|x| x.entity_id == *id).collect();
                let share = 1.0 / own.len() as f64;
                for x in own {
                    for (col, w) in mention_row(&x.span) {
                        let v = m.get(row, col);
                        m.set(row, col, v + share * w);
                    }
                }
            }
            NodeDescriptor::Mdp { sent, token } | NodeDescriptor::Token { sent, token } => {
                m.set(row, offsets[*sent] + token, 1.0);
            }
        }
    }
    m
}

/// Initial node matrix `U⁰` (`plan.n × d`) from stacked token rows.
pub fn build_nodes(
    tape: &mut Tape,
    doc: &Document,
    tokens: Var,
    plan: &NodePlan,
) -> Result<Var, NumericsError> {
    let pool = pooling_matrix(doc, plan);
    if pool.cols() != tape.value(tokens).rows() {
        return Err(NumericsError::ShapeMismatch {
            op: "build_nodes",
            left: pool.shape().to_vec(),
            right: tape.shape(tokens).to_vec(),
        });
    }
    let pool = tape.constant(pool);
    tape.matmul(pool, tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{build_node_plan, parse_corpus, PlanMode};

    const DOC: &str = r#"{"doc_id": "n1", "sentences": [{"tokens": ["a", "b", "c", "d"], "dep_head": [0, 1, 2, 3]}, {"tokens": ["e", "f", "g"], "dep_head": [0, 1, 2]}], "entities": [{"id": 0, "mentions": [{"sent": 0, "start": 0, "end": 2}, {"sent": 1, "start": 0, "end": 1}]}, {"id": 1, "mentions": [{"sent": 0, "start": 3, "end": 4}]}], "facts": []}"#;

    fn doc() -> Document {
        parse_corpus(DOC).unwrap().documents.remove(0)
    }

    fn token_rows() -> Tensor {
        // 7 tokens × 2 dims, row t = [t, 10 t]
        Tensor::from_rows(&(0..7).map(|t| vec![t as f64, 10.0 * t as f64]).collect::<Vec<_>>())
    }

    fn nodes(tokens: &Tensor, plan: &NodePlan) -> Tensor {
        let d = doc();
        let mut tape = Tape::new();
        let t = tape.constant(tokens.clone());
        let u = build_nodes(&mut tape, &d, t, plan).unwrap();
        tape.value(u).clone()
    }

    #[test]
    fn node_rows_follow_plan() {
        let d = doc();
        let plan = build_node_plan(&d, PlanMode::WithMdp);
        // mentions: [0,2) s0, [3,4) s0, [0,1) s1; entities 0, 1; MDP: token 2 of s0
        assert_eq!(plan.n(), 3 + 2 + 1);
        let u = nodes(&token_rows(), &plan);
        assert_eq!(u.shape(), &[6, 2]);
        // multi-token mention averages its span
        assert_eq!(u.row(0), &[0.5, 5.0]);
        // single-token mention equals its token
        assert_eq!(u.row(1), &[3.0, 30.0]);
        assert_eq!(u.row(2), &[4.0, 40.0]);
        // entity 0 = (m0 + m2) / 2
        assert!((u.get(3, 0) - (0.5 + 4.0) / 2.0).abs() < 1e-15);
        assert!((u.get(3, 1) - (5.0 + 40.0) / 2.0).abs() < 1e-15);
        assert_eq!(u.row(4), &[3.0, 30.0]);
        assert_eq!(u.row(5), &[2.0, 20.0]);
    }

    #[test]
    fn equal_mentions_give_equal_entity() {
        let d = doc();
        let plan = build_node_plan(&d, PlanMode::WithMdp);
        let same = Tensor::filled(&[7, 2], 1.25);
        let u = nodes(&same, &plan);
        assert!((u.get(3, 0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn pooling_is_linear() {
        let d = doc();
        let plan = build_node_plan(&d, PlanMode::FullTokens);
        let base = nodes(&token_rows(), &plan);
        let scaled = nodes(&token_rows().scale(-3.0), &plan);
        assert!(scaled.max_abs_diff(&base.scale(-3.0)) < 1e-12);
        assert_eq!(base.rows(), plan.n());
    }

    #[test]
    fn token_count_mismatch_rejected() {
        let d = doc();
        let plan = build_node_plan(&d, PlanMode::WithMdp);
        let mut tape = Tape::new();
        let t = tape.constant(Tensor::zeros(&[5, 2]));
        assert!(build_nodes(&mut tape, &d, t, &plan).is_err());
    }
}

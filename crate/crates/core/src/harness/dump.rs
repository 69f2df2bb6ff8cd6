use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::docmodel::{Document, NodeKind};
use crate::model::LsrModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLabel {
    pub kind: NodeKind,
    pub text: String,
    pub sent: Option<usize>,
}

/// Structure used by one refinement block. Values are unscaled marginals;
/// `root` is empty when the adjacency was not induced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDump {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub root: Vec<f64>,
    pub nodes: Vec<NodeLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureDump {
    pub doc_id: String,
    pub blocks: Vec<BlockDump>,
}

impl StructureDump {
    /// Largest `|root_j + Σ_i A_ij − 1|` over every block.
    pub fn max_column_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in self.blocks.iter().filter(|b| !b.root.is_empty()) {
            for (j, r) in b.root.iter().enumerate() {
                let col: f64 = b.a.iter().map(|row| row[j]).sum();
                worst = worst.max((r + col - 1.0).abs());
            }
        }
        worst
    }
}

/// Eval-mode structures of every block for one document.
pub fn induce_structure(model: &LsrModel, doc: &Document) -> Result<StructureDump, HarnessError> {
    let plan = model.plan(doc);
    let s = model.structures(doc, &plan)?;
    let nodes: Vec<NodeLabel> = (0..plan.n())
        .map(|row| {
            let (kind, text, sent) = plan.label(doc, row);
            NodeLabel { kind, text, sent }
        })
        .collect();
    let blocks = s
        .adjacency
        .iter()
        .enumerate()
        .map(|(b, a)| BlockDump {
            a: a.to_rows(),
            root: s.structures.get(b).map(|m| m.root.clone()).unwrap_or_default(),
            nodes: nodes.clone(),
        })
        .collect();
    Ok(StructureDump {
        doc_id: doc.doc_id.clone(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{generate_synthetic_corpus, GeneratorSpec};
    use crate::encoder::Vocab;
    use crate::model::ModelConfig;

    #[test]
    fn dump_has_one_matrix_per_block() {
        let spec = GeneratorSpec {
            documents: 1,
            ..GeneratorSpec::default()
        };
        let corpus = generate_synthetic_corpus(&spec, 3).unwrap();
        let config = ModelConfig {
            d: 6,
            d_emb: 4,
            ..ModelConfig::default()
        };
        let model = LsrModel::new(config, Vocab::build(&corpus), 2);
        let doc = &corpus.documents[0];
        let dump = induce_structure(&model, doc).unwrap();
        let plan = model.plan(doc);
        assert_eq!(dump.blocks.len(), 2);
        for b in &dump.blocks {
            assert_eq!(b.a.len(), plan.n());
            assert_eq!(b.root.len(), plan.n());
            assert_eq!(b.nodes.len(), plan.n());
        }
        assert!(dump.max_column_error() < 1e-8);
        let json = serde_json::to_value(&dump).unwrap();
        assert!(json["blocks"][0]["A"].is_array());
        assert_eq!(json["blocks"][0]["nodes"][0]["kind"], "mention");
    }
}

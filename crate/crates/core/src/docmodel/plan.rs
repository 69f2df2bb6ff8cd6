use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{extract_mdp, Document, MentionSpan};

/// Which extra nodes accompany mention and entity nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Tokens on the meta dependency path of each sentence.
    #[default]
    WithMdp,
    /// Every token of the document.
    FullTokens,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::WithMdp => "with-mdp",
            PlanMode::FullTokens => "full-tokens",
        })
    }
}

impl FromStr for PlanMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "with-mdp" => Ok(PlanMode::WithMdp),
            "full-tokens" => Ok(PlanMode::FullTokens),
            other => Err(format!("unknown mode {other:?} (expected with-mdp or full-tokens)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Mention,
    Entity,
    Mdp,
    Token,
}

/// One graph node and where its representation comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeDescriptor {
    /// Index into [`Document::mentions`], plus its owner and span.
    Mention {
        index: usize,
        entity_id: usize,
        span: MentionSpan,
    },
    Entity { id: usize },
    Mdp { sent: usize, token: usize },
    Token { sent: usize, token: usize },
}

impl NodeDescriptor {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeDescriptor::Mention { .. } => NodeKind::Mention,
            NodeDescriptor::Entity { .. } => NodeKind::Entity,
            NodeDescriptor::Mdp { .. } => NodeKind::Mdp,
            NodeDescriptor::Token { .. } => NodeKind::Token,
        }
    }
}

/// Ordered node list for one document: mentions in document order, then
/// entities by id, then path (or token) nodes by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePlan {
    pub mode: PlanMode,
    pub nodes: Vec<NodeDescriptor>,
    entity_rows: BTreeMap<usize, usize>,
}

impl NodePlan {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|d| d.kind() == kind).count()
    }

    /// Row of the entity node for `entity_id`.
    pub fn entity_row(&self, entity_id: usize) -> Option<usize> {
        self.entity_rows.get(&entity_id).copied()
    }

    /// `(entity id, row)` pairs in id order.
    pub fn entity_rows(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entity_rows.iter().map(|(&id, &row)| (id, row))
    }

    /// Human-readable label for a node.
    pub fn label(&self, doc: &Document, row: usize) -> (NodeKind, String, Option<usize>) {
        let d = self.nodes[row];
        match d {
            NodeDescriptor::Mention { span, .. } => {
                (NodeKind::Mention, doc.mention_text(&span), Some(span.sent))
            }
            NodeDescriptor::Entity { id } => (NodeKind::Entity, doc.surface_forms(id).join("|"), None),
            NodeDescriptor::Mdp { sent, token } | NodeDescriptor::Token { sent, token } => {
                (d.kind(), doc.sentences[sent].tokens[token].clone(), Some(sent))
            }
        }
    }

    /// The same plan with rows reordered: row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> NodePlan {
        let nodes: Vec<NodeDescriptor> = order.iter().map(|&i| self.nodes[i]).collect();
        Self::from_nodes(self.mode, nodes)
    }

    fn from_nodes(mode: PlanMode, nodes: Vec<NodeDescriptor>) -> Self {
        let entity_rows = nodes
            .iter()
            .enumerate()
            .filter_map(|(row, d)| match d {
                NodeDescriptor::Entity { id } => Some((*id, row)),
                _ => None,
            })
            .collect();
        Self {
            mode,
            nodes,
            entity_rows,
        }
    }
}

pub fn build_node_plan(doc: &Document, mode: PlanMode) -> NodePlan {
    let mentions = doc.mentions();
    let mut nodes: Vec<NodeDescriptor> = mentions
        .iter()
        .enumerate()
        .map(|(index, m)| NodeDescriptor::Mention {
            index,
            entity_id: m.entity_id,
            span: m.span,
        })
        .collect();
    nodes.extend(
        doc.entities_by_id()
            .into_iter()
            .map(|e| NodeDescriptor::Entity { id: e.id }),
    );
    match mode {
        PlanMode::WithMdp => {
            for (sent, sentence) in doc.sentences.iter().enumerate() {
                let spans: Vec<MentionSpan> = mentions
                    .iter()
                    .filter(|m| m.span.sent == sent)
                    .map(|m| m.span)
                    .collect();
                for token in extract_mdp(sentence, &spans) {
                    nodes.push(NodeDescriptor::Mdp { sent, token });
                }
            }
        }
        PlanMode::FullTokens => {
            for (sent, sentence) in doc.sentences.iter().enumerate() {
                for token in 0..sentence.len() {
                    nodes.push(NodeDescriptor::Token { sent, token });
                }
            }
        }
    }
    NodePlan::from_nodes(mode, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::docmodel::{Entity, Sentence};

    fn chain_sentence(n: usize) -> Sentence {
        Sentence {
            tokens: (0..n).map(|i| format!("w{i}")).collect(),
            dep_head: (0..n).collect(),
        }
    }

    fn mention(sent: usize, start: usize) -> MentionSpan {
        MentionSpan {
            sent,
            start,
            end: start + 1,
        }
    }

    /// Four entities, five mentions over three 10-token chain sentences.
    fn figure_like_doc() -> Document {
        Document {
            doc_id: "fig".into(),
            sentences: vec![chain_sentence(10), chain_sentence(10), chain_sentence(10)],
            entities: vec![
                Entity { id: 3, mentions: vec![mention(2, 8)] },
                Entity { id: 0, mentions: vec![mention(0, 1), mention(1, 2)] },
                Entity { id: 1, mentions: vec![mention(0, 5)] },
                Entity { id: 2, mentions: vec![mention(2, 3)] },
            ],
            facts: vec![],
        }
    }

    #[test]
    fn counts_and_order() {
        let doc = figure_like_doc();
        let plan = build_node_plan(&doc, PlanMode::WithMdp);
        assert_eq!(plan.count(NodeKind::Mention), 5);
        assert_eq!(plan.count(NodeKind::Entity), 4);
        // sentence 0: path 1..5 → {2,3,4}; sentence 2: path 3..8 → {4..7}
        assert_eq!(plan.count(NodeKind::Mdp), 3 + 4);
        assert_eq!(plan.n(), 5 + 4 + 7);

        // mentions in document order
        let spans: Vec<MentionSpan> = plan.nodes[..5]
            .iter()
            .map(|d| match d {
                NodeDescriptor::Mention { span, .. } => *span,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(spans, vec![mention(0, 1), mention(0, 5), mention(1, 2), mention(2, 3), mention(2, 8)]);
        // entities by id
        assert_eq!(
            plan.nodes[5..9].to_vec(),
            (0..4).map(|id| NodeDescriptor::Entity { id }).collect::<Vec<_>>()
        );
        assert_eq!(plan.entity_row(2), Some(7));
        assert_eq!(plan.nodes[9], NodeDescriptor::Mdp { sent: 0, token: 2 });
    }

    #[test]
    fn full_tokens_mode_counts_every_token() {
        let doc = figure_like_doc();
        let plan = build_node_plan(&doc, PlanMode::FullTokens);
        assert_eq!(plan.n(), 30 + 5 + 4);
        assert_eq!(plan.count(NodeKind::Mdp), 0);
        assert_eq!(plan.count(NodeKind::Token), 30);
    }

    #[test]
    fn plan_is_pure() {
        let doc = figure_like_doc();
        assert_eq!(
            build_node_plan(&doc, PlanMode::WithMdp),
            build_node_plan(&doc, PlanMode::WithMdp)
        );
    }

    #[test]
    fn mode_parses() {
        assert_eq!("full-tokens".parse::<PlanMode>().unwrap(), PlanMode::FullTokens);
        assert_eq!(PlanMode::WithMdp.to_string(), "with-mdp");
        assert!("both".parse::<PlanMode>().is_err());
    }
}

//! Documents, corpus ingestion, dependency paths and node plans.

mod corpus;
pub mod deptree;
pub mod docred;
mod plan;
pub mod synth;

pub use corpus::{
    load_corpus, parse_corpus, write_corpus, Corpus, DataError, Document, Entity, MentionSpan,
    RelationFact, Sentence,
};
pub use deptree::{extract_mdp, mention_anchor, shortest_dep_path, TreeError};
pub use plan::{build_node_plan, NodeDescriptor, NodeKind, NodePlan, PlanMode};
pub use docred::{convert_docred, Converted};
pub use synth::{generate_synthetic_corpus, GeneratorSpec};

//! Conversion from the public DocRED JSON layout.
//!
//! DocRED ships no parses, so dependency heads come from a sidecar: a JSON
//! array (or JSON lines) of `{"title": str, "dep_head": [[int]]}` records,
//! one head list per sentence in the same 1-based convention as the corpus
//! format. Relation names map to ids through an optional `{name: id}` table;
//! without one, ids are assigned in sorted name order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Deserialize;

use super::corpus::{Corpus, DataError, Document, Entity, MentionSpan, RelationFact, Sentence};

#[derive(Debug, Deserialize)]
struct RawMention {
    sent_id: usize,
    pos: [usize; 2],
}

#[derive(Debug, Deserialize)]
struct RawLabel {
    h: usize,
    t: usize,
    r: String,
}

#[derive(Debug, Deserialize)]
struct RawDoc {
    title: String,
    sents: Vec<Vec<String>>,
    #[serde(rename = "vertexSet")]
    vertex_set: Vec<Vec<RawMention>>,
    #[serde(default)]
    labels: Vec<RawLabel>,
}

#[derive(Debug, Deserialize)]
struct RawHeads {
    title: String,
    dep_head: Vec<Vec<usize>>,
}

fn parse_records<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<Vec<T>, DataError> {
    let bad = |line: usize, e: serde_json::Error| DataError::Malformed {
        line,
        doc_id: None,
        field: what.to_string(),
        message: e.to_string(),
    };
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| bad(e.line(), e));
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad(i + 1, e)))
        .collect()
}

/// Result of a conversion: the corpus plus the relation table used.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub corpus: Corpus,
    pub relations: BTreeMap<String, usize>,
}

/// Converts DocRED documents. Duplicate mentions inside one entity are
/// merged; every output document is validated.
pub fn convert_docred(
    docred_text: &str,
    heads_text: &str,
    relations: Option<BTreeMap<String, usize>>,
) -> Result<Converted, DataError> {
    let raw: Vec<RawDoc> = parse_records(docred_text, "docred")?;
    let heads: Vec<RawHeads> = parse_records(heads_text, "heads")?;
    let heads: HashMap<String, Vec<Vec<usize>>> = heads.into_iter().map(|h| (h.title, h.dep_head)).collect();

    let relations = relations.unwrap_or_else(|| {
        let names: BTreeSet<&str> = raw.iter().flat_map(|d| d.labels.iter().map(|l| l.r.as_str())).collect();
        names.into_iter().enumerate().map(|(i, n)| (n.to_string(), i)).collect()
    });

    let mut documents = Vec::with_capacity(raw.len());
    for d in raw {
        let Some(doc_heads) = heads.get(&d.title) else {
            return Err(DataError::Invariant {
                doc_id: d.title,
                rule: "no dependency heads in sidecar".into(),
            });
        };
        if doc_heads.len() != d.sents.len() {
            return Err(DataError::Invariant {
                doc_id: d.title,
                rule: format!("sidecar has {} sentences, document has {}", doc_heads.len(), d.sents.len()),
            });
        }
        let sentences = d
            .sents
            .into_iter()
            .zip(doc_heads.iter().cloned())
            .map(|(tokens, dep_head)| Sentence { tokens, dep_head })
            .collect();
        let entities = d
            .vertex_set
            .iter()
            .enumerate()
            .map(|(id, mentions)| {
                let spans: BTreeSet<(usize, usize, usize)> =
                    mentions.iter().map(|m| (m.sent_id, m.pos[0], m.pos[1])).collect();
                Entity {
                    id,
                    mentions: spans
                        .into_iter()
                        .map(|(sent, start, end)| MentionSpan { sent, start, end })
                        .collect(),
                }
            })
            .collect();
        let mut facts = BTreeSet::new();
        for l in &d.labels {
            let Some(&r) = relations.get(&l.r) else {
                return Err(DataError::Invariant {
                    doc_id: d.title,
                    rule: format!("relation {} missing from the relation table", l.r),
                });
            };
            facts.insert(RelationFact { h: l.h, t: l.t, r });
        }
        let doc = Document {
            doc_id: d.title,
            sentences,
            entities,
            facts: facts.into_iter().collect(),
        };
        doc.validate()?;
        documents.push(doc);
    }
    Ok(Converted {
        corpus: Corpus::new(documents),
        relations,
    })
}

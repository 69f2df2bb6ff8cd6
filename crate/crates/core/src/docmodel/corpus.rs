use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::deptree::{validate_heads, TreeError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record (doc_id {doc_id:?}) at {field}: {message}")]
    Malformed {
        line: usize,
        doc_id: Option<String>,
        field: String,
        message: String,
    },
    #[error("document {doc_id}: {rule}")]
    Invariant { doc_id: String, rule: String },
}

impl DataError {
    fn invariant(doc_id: &str, rule: impl Into<String>) -> Self {
        Self::Invariant {
            doc_id: doc_id.to_string(),
            rule: rule.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    /// Per-token head, 1-based; 0 marks the root.
    pub dep_head: Vec<usize>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A mention's location; `[start, end)` token span within sentence `sent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionSpan {
    pub sent: usize,
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn contains(&self, sent: usize, token: usize) -> bool {
        self.sent == sent && (self.start..self.end).contains(&token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: usize,
    pub mentions: Vec<MentionSpan>,
}

/// Directed fact `r(h, t)` over entity ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationFact {
    pub h: usize,
    pub t: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub facts: Vec<RelationFact>,
}

/// A mention with its owning entity, as listed by [`Document::mentions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocMention {
    pub entity_id: usize,
    pub span: MentionSpan,
}

impl Document {
    /// Every mention in document order: by sentence, then start token.
    pub fn mentions(&self) -> Vec<DocMention> {
        let mut out: Vec<DocMention> = self
            .entities
            .iter()
            .flat_map(|e| {
                e.mentions.iter().map(move |&span| DocMention {
                    entity_id: e.id,
                    span,
                })
            })
            .collect();
        out.sort_by_key(|m| (m.span, m.entity_id));
        out
    }

    /// Entities sorted by id.
    pub fn entities_by_id(&self) -> Vec<&Entity> {
        let mut v: Vec<&Entity> = self.entities.iter().collect();
        v.sort_by_key(|e| e.id);
        v
    }

    pub fn entity(&self, id: usize) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Surface string of a mention (span tokens joined by a space).
    pub fn mention_text(&self, span: &MentionSpan) -> String {
        self.sentences[span.sent].tokens[span.start..span.end].join(" ")
    }

    /// Sorted, de-duplicated surface strings of an entity's mentions.
    pub fn surface_forms(&self, entity_id: usize) -> Vec<String> {
        let set: BTreeSet<String> = self
            .entity(entity_id)
            .map(|e| e.mentions.iter().map(|m| self.mention_text(m)).collect())
            .unwrap_or_default();
        set.into_iter().collect()
    }

    /// True when the two entities have mentions in a common sentence.
    pub fn co_sentential(&self, a: usize, b: usize) -> bool {
        let sents = |id: usize| -> BTreeSet<usize> {
            self.entity(id)
                .map(|e| e.mentions.iter().map(|m| m.sent).collect())
                .unwrap_or_default()
        };
        !sents(a).is_disjoint(&sents(b))
    }

    /// Checks every structural invariant of a document.
    pub fn validate(&self) -> Result<(), DataError> {
        let id = self.doc_id.as_str();
        for (si, s) in self.sentences.iter().enumerate() {
            if s.tokens.is_empty() {
                return Err(DataError::invariant(id, format!("sentence {si} is empty")));
            }
            if s.dep_head.len() != s.tokens.len() {
                return Err(DataError::invariant(
                    id,
                    format!(
                        "sentence {si}: dep_head has {} entries for {} tokens",
                        s.dep_head.len(),
                        s.tokens.len()
                    ),
                ));
            }
            validate_heads(&s.dep_head).map_err(|e: TreeError| {
                DataError::invariant(id, format!("sentence {si}: {e}"))
            })?;
        }

        let mut ids = BTreeSet::new();
        for e in &self.entities {
            if !ids.insert(e.id) {
                return Err(DataError::invariant(id, format!("duplicate entity id {}", e.id)));
            }
            if e.mentions.is_empty() {
                return Err(DataError::invariant(id, format!("entity {} has no mentions", e.id)));
            }
        }

        let mut per_sentence: BTreeMap<usize, Vec<MentionSpan>> = BTreeMap::new();
        for m in self.mentions() {
            let span = m.span;
            let Some(sentence) = self.sentences.get(span.sent) else {
                return Err(DataError::invariant(
                    id,
                    format!("entity {}: mention sentence {} out of range", m.entity_id, span.sent),
                ));
            };
            if span.start >= span.end || span.end > sentence.len() {
                return Err(DataError::invariant(
                    id,
                    format!(
                        "entity {}: mention span [{}, {}) invalid for sentence {} of length {}",
                        m.entity_id,
                        span.start,
                        span.end,
                        span.sent,
                        sentence.len()
                    ),
                ));
            }
            per_sentence.entry(span.sent).or_default().push(span);
        }
        for (sent, spans) in &per_sentence {
            // sorted by start already
            for w in spans.windows(2) {
                if w[1].start < w[0].end {
                    return Err(DataError::invariant(
                        id,
                        format!(
                            "overlapping mentions in sentence {sent}: [{}, {}) and [{}, {})",
                            w[0].start, w[0].end, w[1].start, w[1].end
                        ),
                    ));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for f in &self.facts {
            for e in [f.h, f.t] {
                if !ids.contains(&e) {
                    return Err(DataError::invariant(id, format!("unknown entity {e} in fact")));
                }
            }
            if f.h == f.t {
                return Err(DataError::invariant(
                    id,
                    format!("fact head equals tail (entity {})", f.h),
                ));
            }
            if !seen.insert(*f) {
                return Err(DataError::invariant(
                    id,
                    format!("duplicate fact ({}, {}, {})", f.h, f.t, f.r),
                ));
            }
        }
        Ok(())
    }
}

/// Validated documents in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Self { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// One more than the largest relation id in any fact (0 for no facts).
    pub fn relation_count(&self) -> usize {
        self.documents
            .iter()
            .flat_map(|d| d.facts.iter().map(|f| f.r + 1))
            .max()
            .unwrap_or(0)
    }
}

fn malformed(line: usize, raw: &serde_json::Value, err: &serde_json::Error) -> DataError {
    let doc_id = raw
        .get("doc_id")
        .and_then(|v| v.as_str())
        .map(str::to_string);
    let message = err.to_string();
    // serde_json reports the offending key in backticks for missing fields
    let field = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<record>".to_string());
    DataError::Malformed {
        line,
        doc_id,
        field,
        message,
    }
}

fn parse_record(line: usize, raw: serde_json::Value) -> Result<Document, DataError> {
    let doc: Document = serde_json::from_value(raw.clone()).map_err(|e| malformed(line, &raw, &e))?;
    doc.validate()?;
    Ok(doc)
}

/// Parses corpus text: one JSON document per line, or a single JSON array.
pub fn parse_corpus(text: &str) -> Result<Corpus, DataError> {
    let trimmed = text.trim_start();
    let mut docs = Vec::new();
    if trimmed.starts_with('[') {
        let values: Vec<serde_json::Value> =
            serde_json::from_str(trimmed).map_err(|e| DataError::Malformed {
                line: e.line(),
                doc_id: None,
                field: "<array>".into(),
                message: e.to_string(),
            })?;
        for (i, v) in values.into_iter().enumerate() {
            docs.push(parse_record(i + 1, v)?);
        }
    } else {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value =
                serde_json::from_str(line).map_err(|e| DataError::Malformed {
                    line: i + 1,
                    doc_id: None,
                    field: "<json>".into(),
                    message: e.to_string(),
                })?;
            docs.push(parse_record(i + 1, v)?);
        }
    }
    Ok(Corpus::new(docs))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

/// Writes the line-oriented corpus format.
pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<(), DataError> {
    let path = path.as_ref();
    let io = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for d in &corpus.documents {
        let line = serde_json::to_string(d).expect("documents serialize");
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::docmodel::{Corpus, DataError};
use crate::numerics::Tensor;

pub const UNK: &str = "<unk>";

/// Token → embedding row. Row 0 is always the unknown token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut list = vec![UNK.to_string()];
        let mut index = HashMap::new();
        index.insert(UNK.to_string(), 0);
        for t in tokens {
            if !index.contains_key(&t) {
                index.insert(t.clone(), list.len());
                list.push(t);
            }
        }
        Self {
            tokens: list,
            index,
        }
    }

    /// Sorted distinct tokens of a corpus.
    pub fn build(corpus: &Corpus) -> Self {
        let set: BTreeSet<&str> = corpus
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter())
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect();
        Self::from_tokens(set.into_iter().map(str::to_string))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk(&self) -> usize {
        0
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Overwrites rows of `table` with vectors from a whitespace-separated
/// `token v1 … vd` file. Returns how many vocabulary rows were filled.
pub fn load_pretrained(path: impl AsRef<Path>, vocab: &Vocab, table: &mut Tensor) -> Result<usize, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let d = table.cols();
    let mut filled = 0;
    for (ln, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| DataError::Malformed {
            line: ln + 1,
            doc_id: None,
            field: token.to_string(),
            message: e.to_string(),
        })?;
        if values.len() != d {
            return Err(DataError::Malformed {
                line: ln + 1,
                doc_id: None,
                field: token.to_string(),
                message: format!("expected {d} values, found {}", values.len()),
            });
        }
        if let Some(&row) = vocab.index.get(token) {
            for (j, v) in values.into_iter().enumerate() {
                table.set(row, j, v);
            }
            filled += 1;
        }
    }
    Ok(filled)
}

//! Dependency-tree utilities: validation, shortest paths and the
//! meta dependency path (MDP) of a sentence.
//!
//! Token positions here are 0-based. `dep_head` values are 1-based with 0
//! for the root, as they appear in corpus files.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{MentionSpan, Sentence};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("head {head} of token {token} out of range")]
    HeadOutOfRange { token: usize, head: usize },
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("dependency heads contain a cycle through token {0}")]
    Cycle(usize),
    #[error("token index {index} out of range for sentence of length {len}")]
    TokenOutOfRange { index: usize, len: usize },
}

/// Checks that `heads` describes a single rooted tree.
pub fn validate_heads(heads: &[usize]) -> Result<(), TreeError> {
    let n = heads.len();
    for (token, &head) in heads.iter().enumerate() {
        if head > n || head == token + 1 {
            return Err(TreeError::HeadOutOfRange { token, head });
        }
    }
    let roots = heads.iter().filter(|&&h| h == 0).count();
    if roots != 1 {
        return Err(TreeError::RootCount(roots));
    }
    // every token must reach the root within n steps
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while heads[cur] != 0 {
            cur = heads[cur] - 1;
            steps += 1;
            if steps > n {
                return Err(TreeError::Cycle(start));
            }
        }
    }
    Ok(())
}

fn parent(heads: &[usize], token: usize) -> Option<usize> {
    heads[token].checked_sub(1)
}

fn depth(heads: &[usize], mut token: usize) -> usize {
    let mut d = 0;
    while let Some(p) = parent(heads, token) {
        token = p;
        d += 1;
    }
    d
}

/// The unique path between tokens `a` and `b` in the undirected tree,
/// endpoints included, ordered from `a` to `b`.
pub fn shortest_dep_path(sentence: &Sentence, a: usize, b: usize) -> Result<Vec<usize>, TreeError> {
    let heads = &sentence.dep_head;
    let len = heads.len();
    for index in [a, b] {
        if index >= len {
            return Err(TreeError::TokenOutOfRange { index, len });
        }
    }
    let (mut x, mut y) = (a, b);
    let (mut dx, mut dy) = (depth(heads, a), depth(heads, b));
    let mut up = Vec::new();
    let mut down = Vec::new();
    while dx > dy {
        up.push(x);
        x = parent(heads, x).expect("non-root");
        dx -= 1;
    }
    while dy > dx {
        down.push(y);
        y = parent(heads, y).expect("non-root");
        dy -= 1;
    }
    while x != y {
        up.push(x);
        down.push(y);
        x = parent(heads, x).expect("non-root");
        y = parent(heads, y).expect("non-root");
    }
    up.push(x);
    up.extend(down.into_iter().rev());
    Ok(up)
}

/// The syntactic head of a span: the first token whose head lies outside
/// the span (the root counts as outside).
pub fn mention_anchor(sentence: &Sentence, start: usize, end: usize) -> usize {
    (start..end)
        .find(|&t| match parent(&sentence.dep_head, t) {
            None => true,
            Some(p) => !(start..end).contains(&p),
        })
        // a valid tree always has such a token; fall back to the first
        .unwrap_or(start)
}

/// Tokens on the shortest paths between every unordered pair of mention
/// anchors, minus tokens inside any mention span. Sorted ascending.
pub fn extract_mdp(sentence: &Sentence, mentions: &[MentionSpan]) -> Vec<usize> {
    if mentions.len() < 2 {
        return Vec::new();
    }
    let anchors: Vec<usize> = mentions
        .iter()
        .map(|m| mention_anchor(sentence, m.start, m.end))
        .collect();
    let mut tokens = BTreeSet::new();
    for i in 0..anchors.len() {
        for j in i + 1..anchors.len() {
            let path = shortest_dep_path(sentence, anchors[i], anchors[j])
                .expect("anchors come from valid spans");
            tokens.extend(path);
        }
    }
    tokens
        .into_iter()
        .filter(|&t| !mentions.iter().any(|m| (m.start..m.end).contains(&t)))
        .collect()
}

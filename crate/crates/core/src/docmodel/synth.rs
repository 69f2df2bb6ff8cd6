//! Seeded generator for small multi-hop relation corpora.
//!
//! Each document is a shuffled list of sentences. A *fact sentence* reads
//! `… head … rel<r> … tail …` with both mention tokens attached to the
//! trigger `rel<r>` in the dependency tree, so the trigger is the only token
//! on the path between them. A *chain* plants `r1(A, B)` and `r2(B, C)` in
//! two different sentences and adds the inter-sentence fact
//! `compose(r1, r2)(A, C)`; `A` and `C` never share a sentence. Every entity
//! takes part in at most one planted unit, so no other compositional facts
//! arise by accident. Remaining sentences are distractors mentioning one or
//! two entities with no trigger.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Corpus, Document, Entity, MentionSpan, RelationFact, Sentence};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("infeasible generator spec: {0}")]
pub struct InfeasibleSpec(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    /// Number of distinct filler words.
    pub vocab_size: usize,
    /// Number of distinct entity surface tokens.
    pub entity_pool: usize,
    pub documents: usize,
    pub sentences_per_doc: usize,
    pub entities_per_doc: usize,
    /// Relation count `k`.
    pub relations: usize,
    /// Probability that a planted unit is a two-sentence chain.
    pub bridge_prob: f64,
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            vocab_size: 50,
            entity_pool: 40,
            documents: 100,
            sentences_per_doc: 5,
            entities_per_doc: 8,
            relations: 4,
            bridge_prob: 0.5,
            min_sentence_len: 6,
            max_sentence_len: 10,
        }
    }
}

impl GeneratorSpec {
    /// Relations that have a trigger word and are planted inside sentences.
    pub fn base_relations(&self) -> usize {
        if self.bridge_prob > 0.0 {
            self.relations.div_ceil(2)
        } else {
            self.relations
        }
    }

    /// Relation implied by a chain `r1(A, B)`, `r2(B, C)`.
    pub fn compose(&self, r1: usize, r2: usize) -> usize {
        let base = self.base_relations();
        base + (r1 * base + r2) % (self.relations - base)
    }

    fn check(&self) -> Result<(), InfeasibleSpec> {
        let fail = |m: &str| Err(InfeasibleSpec(m.to_string()));
        if self.relations == 0 {
            return fail("relation count must be positive");
        }
        if !(0.0..=1.0).contains(&self.bridge_prob) {
            return fail("bridge probability must lie in [0, 1]");
        }
        if self.bridge_prob > 0.0 && self.relations < 2 {
            return fail("chains need at least two relation types");
        }
        if self.entities_per_doc < 2 {
            return fail("documents need at least two entities");
        }
        if self.entity_pool < self.entities_per_doc {
            return fail("entity pool smaller than entities per document");
        }
        if self.sentences_per_doc == 0 {
            return fail("documents need at least one sentence");
        }
        if self.min_sentence_len < 3 || self.min_sentence_len > self.max_sentence_len {
            return fail("sentence length range must satisfy 3 <= min <= max");
        }
        if self.vocab_size == 0 {
            return fail("vocabulary must be non-empty");
        }
        // every entity needs a mention somewhere: at most two per sentence
        if self.entities_per_doc > 2 * self.sentences_per_doc {
            return fail("more entities than mention slots (2 per sentence)");
        }
        Ok(())
    }
}

enum Unit {
    Intra { h: usize, t: usize, r: usize },
    Chain { a: usize, b: usize, c: usize, r1: usize, r2: usize },
}

struct SentencePlan {
    /// `(entity slot, trigger relation)`: head, tail and the trigger
    /// between them, or a trigger-free list of mentions.
    mentions: Vec<usize>,
    trigger: Option<usize>,
}

fn build_sentence(rng: &mut ChaCha8Rng, spec: &GeneratorSpec, plan: &SentencePlan, surface: &[String]) -> (Sentence, Vec<(usize, usize)>) {
    let len = rng.gen_range(spec.min_sentence_len..=spec.max_sentence_len);
    let special = plan.mentions.len() + usize::from(plan.trigger.is_some());
    let len = len.max(special + 1);

    // choose increasing positions for the special tokens
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(rng);
    let mut chosen: Vec<usize> = positions[..special].to_vec();
    chosen.sort_unstable();

    let mut tokens: Vec<String> = (0..len)
        .map(|_| format!("w{}", rng.gen_range(0..spec.vocab_size)))
        .collect();
    let mut mention_pos = Vec::new();
    let mut trigger_pos = None;
    match plan.trigger {
        Some(r) => {
            // head, trigger, tail in surface order
            let (hp, tp, tlp) = (chosen[0], chosen[1], chosen[2]);
            tokens[hp] = surface[plan.mentions[0]].clone();
            tokens[tp] = format!("rel{r}");
            tokens[tlp] = surface[plan.mentions[1]].clone();
            mention_pos.push((plan.mentions[0], hp));
            mention_pos.push((plan.mentions[1], tlp));
            trigger_pos = Some(tp);
        }
        None => {
            for (slot, &p) in plan.mentions.iter().zip(&chosen) {
                tokens[p] = surface[*slot].clone();
                mention_pos.push((*slot, p));
            }
        }
    }

    // random tree; mentions hang off the trigger when there is one
    let mentions_set: Vec<usize> = mention_pos.iter().map(|&(_, p)| p).collect();
    let mut order: Vec<usize> = (0..len).filter(|p| !mentions_set.contains(p) && Some(*p) != trigger_pos).collect();
    order.shuffle(rng);
    if let Some(tp) = trigger_pos {
        let at = rng.gen_range(0..=order.len());
        order.insert(at, tp);
    }
    let mut heads = vec![0usize; len];
    for (i, &tok) in order.iter().enumerate() {
        heads[tok] = if i == 0 { 0 } else { order[rng.gen_range(0..i)] + 1 };
    }
    for &p in &mentions_set {
        heads[p] = match trigger_pos {
            Some(tp) => tp + 1,
            None => {
                if order.is_empty() {
                    0
                } else {
                    order[rng.gen_range(0..order.len())] + 1
                }
            }
        };
    }
    if order.is_empty() {
        // only mentions: make the first one the root and hang the rest on it
        let root = mentions_set[0];
        heads[root] = 0;
        for &p in &mentions_set[1..] {
            heads[p] = root + 1;
        }
    }
    (Sentence { tokens, dep_head: heads }, mention_pos)
}

fn generate_document(rng: &mut ChaCha8Rng, spec: &GeneratorSpec, index: usize) -> Document {
    let base = spec.base_relations();
    let mut pool: Vec<usize> = (0..spec.entity_pool).collect();
    pool.shuffle(rng);
    let surface: Vec<String> = pool[..spec.entities_per_doc]
        .iter()
        .map(|e| format!("E{e}"))
        .collect();

    // plan units; keep at least one distractor sentence when possible
    let fact_budget = if spec.sentences_per_doc >= 2 {
        spec.sentences_per_doc - 1
    } else {
        1
    };
    let mut free_entities: Vec<usize> = (0..spec.entities_per_doc).collect();
    free_entities.shuffle(rng);
    let mut units = Vec::new();
    let mut used_sentences = 0;
    loop {
        let want_chain = spec.bridge_prob > 0.0 && rng.gen_bool(spec.bridge_prob);
        if want_chain && used_sentences + 2 <= fact_budget && free_entities.len() >= 3 {
            let (a, b, c) = (
                free_entities.pop().unwrap(),
                free_entities.pop().unwrap(),
                free_entities.pop().unwrap(),
            );
            units.push(Unit::Chain {
                a,
                b,
                c,
                r1: rng.gen_range(0..base),
                r2: rng.gen_range(0..base),
            });
            used_sentences += 2;
        } else if used_sentences < fact_budget && free_entities.len() >= 2 {
            let (h, t) = (free_entities.pop().unwrap(), free_entities.pop().unwrap());
            units.push(Unit::Intra {
                h,
                t,
                r: rng.gen_range(0..base),
            });
            used_sentences += 1;
        } else {
            break;
        }
    }

    let mut sentence_plans = Vec::new();
    let mut facts = Vec::new();
    let mut chain_ends: Vec<(usize, usize)> = Vec::new();
    for u in &units {
        match *u {
            Unit::Intra { h, t, r } => {
                sentence_plans.push(SentencePlan { mentions: vec![h, t], trigger: Some(r) });
                facts.push((h, t, r));
            }
            Unit::Chain { a, b, c, r1, r2 } => {
                sentence_plans.push(SentencePlan { mentions: vec![a, b], trigger: Some(r1) });
                sentence_plans.push(SentencePlan { mentions: vec![b, c], trigger: Some(r2) });
                facts.push((a, b, r1));
                facts.push((b, c, r2));
                facts.push((a, c, spec.compose(r1, r2)));
                chain_ends.push((a, c));
            }
        }
    }

    // distractors: first cover unmentioned entities, then random extras
    let mut unmentioned = free_entities.clone();
    while sentence_plans.len() < spec.sentences_per_doc {
        let mut ms = Vec::new();
        if let Some(e) = unmentioned.pop() {
            ms.push(e);
        } else {
            ms.push(rng.gen_range(0..spec.entities_per_doc));
        }
        if rng.gen_bool(0.5) {
            let other = unmentioned
                .pop()
                .or_else(|| free_entities.choose(rng).copied());
            if let Some(o) = other {
                let separated = chain_ends
                    .iter()
                    .all(|&(a, c)| !((ms[0] == a && o == c) || (ms[0] == c && o == a)));
                if o != ms[0] && separated {
                    ms.push(o);
                }
            }
        }
        sentence_plans.push(SentencePlan { mentions: ms, trigger: None });
    }
    // entities still unmentioned (tiny documents) share distractor sentences
    for e in unmentioned {
        if let Some(p) = sentence_plans
            .iter_mut()
            .find(|p| p.trigger.is_none() && p.mentions.len() < 2 && !p.mentions.contains(&e))
        {
            p.mentions.push(e);
        }
    }
    sentence_plans.shuffle(rng);

    let mut sentences = Vec::new();
    let mut mentions: Vec<Vec<MentionSpan>> = vec![Vec::new(); spec.entities_per_doc];
    for (si, plan) in sentence_plans.iter().enumerate() {
        let (s, pos) = build_sentence(rng, spec, plan, &surface);
        for (slot, p) in pos {
            mentions[slot].push(MentionSpan { sent: si, start: p, end: p + 1 });
        }
        sentences.push(s);
    }
    let entities = mentions
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(id, mut m)| {
            m.sort();
            Entity { id, mentions: m }
        })
        .collect();
    let mut facts: Vec<RelationFact> = facts
        .into_iter()
        .map(|(h, t, r)| RelationFact { h, t, r })
        .collect();
    facts.sort();
    Document {
        doc_id: format!("syn-{index:05}"),
        sentences,
        entities,
        facts,
    }
}

/// Generates `spec.documents` documents, reproducibly from `seed`.
pub fn generate_synthetic_corpus(spec: &GeneratorSpec, seed: u64) -> Result<Corpus, InfeasibleSpec> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..spec.documents)
        .map(|i| generate_document(&mut rng, spec, i))
        .collect();
    Ok(Corpus::new(docs))
}

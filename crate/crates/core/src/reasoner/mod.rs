//! Multi-hop reasoning over induced structures and relation scoring.
//!
//! Each block induces a structure `A` from its input nodes, then runs a
//! densely connected GCN: sub-layer `l` sees the block input concatenated
//! with the outputs of sub-layers `1..l`, and a final `d × d` map combines
//! the concatenated sub-layer outputs back to `d` dimensions. `N` blocks
//! are stacked, each re-inducing the graph from the previous block's output.

mod classifier;

pub use classifier::{bce_loss, classify, classify_all, pair_index, ClassifierParams, PROB_CLAMP};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::induction::{induce, InductionError, InductionParams, StructureMarginals};
use crate::numerics::{BoundParams, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReasonerError {
    #[error("block {block}: {source}")]
    Structure {
        block: usize,
        #[source]
        source: InductionError,
    },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid entity pair ({0}, {1})")]
    InvalidPair(usize, usize),
}

impl ReasonerError {
    pub fn is_singular(&self) -> bool {
        matches!(self, ReasonerError::Structure { source, .. } if source.is_singular())
    }
}

/// How each block obtains its adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureMode {
    /// Matrix-Tree marginals from the block input.
    #[default]
    Induced,
    /// Fixed `1/n` everywhere; the frozen-structure baseline.
    Uniform,
}

impl std::fmt::Display for StructureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StructureMode::Induced => "induced",
            StructureMode::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for StructureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "induced" => Ok(StructureMode::Induced),
            "uniform" => Ok(StructureMode::Uniform),
            other => Err(format!("unknown structure mode {other:?} (expected induced or uniform)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GcnLayerParams {
    /// `d_in × d_out`
    pub w: ParamId,
    /// `1 × d_out`
    pub b: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockParams {
    pub induction: InductionParams,
    pub layers: Vec<GcnLayerParams>,
    /// `d × d`
    pub w_comb: ParamId,
}

impl BlockParams {
    /// Sub-layer `l` (1-based) maps `d + (l − 1)·d/L` inputs to `d/L` outputs.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        sub_layers: usize,
        induction: InductionParams,
        init: &mut impl FnMut(&[usize]) -> Tensor,
    ) -> Self {
        assert!(sub_layers > 0 && d % sub_layers == 0, "d must divide into sub-layers");
        let sub = d / sub_layers;
        let layers = (0..sub_layers)
            .map(|l| GcnLayerParams {
                w: store.insert(format!("{prefix}.gcn{l}.w"), init(&[d + l * sub, sub])),
                b: store.insert(format!("{prefix}.gcn{l}.b"), Tensor::zeros(&[1, sub])),
            })
            .collect();
        let w_comb = store.insert(format!("{prefix}.w_comb"), init(&[d, d]));
        Self {
            induction,
            layers,
            w_comb,
        }
    }
}

/// Dropout settings for one forward pass; `rng == None` means eval mode.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl Dropout<'_> {
    pub fn eval() -> Dropout<'static> {
        Dropout { rate: 0.0, rng: None }
    }

    fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var, NumericsError> {
        let Some(rng) = self.rng.as_deref_mut() else { return Ok(x) };
        if self.rate <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.rate;
        let shape = tape.shape(x).to_vec();
        let mut mask = Tensor::zeros(&shape);
        for v in mask.data_mut() {
            *v = if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 };
        }
        tape.mul_const(x, mask)
    }
}

/// `u_i' = ReLU(Σ_j A_ij W u_j + b)`, then dropout in train mode.
pub fn gcn_layer(
    tape: &mut Tape,
    a: Var,
    u_in: Var,
    w: Var,
    b: Var,
    dropout: &mut Dropout<'_>,
) -> Result<Var, NumericsError> {
    let (an, un) = (tape.value(a).rows(), tape.value(u_in).rows());
    if !tape.value(a).is_square() || an != un {
        return Err(NumericsError::ShapeMismatch {
            op: "gcn_layer",
            left: tape.shape(a).to_vec(),
            right: tape.shape(u_in).to_vec(),
        });
    }
    let uw = tape.matmul(u_in, w)?;
    let auw = tape.matmul(a, uw)?;
    let pre = tape.add_row_bias(auw, b)?;
    let out = tape.relu(pre)?;
    dropout.apply(tape, out)
}

/// With `residual`, the block input is added to the concatenated sub-layer
/// outputs before the combination map.
pub fn dense_gcn_block(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &BlockParams,
    a: Var,
    u: Var,
    residual: bool,
    dropout: &mut Dropout<'_>,
) -> Result<Var, NumericsError> {
    let mut outputs: Vec<Var> = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let input = if outputs.is_empty() {
            u
        } else {
            let mut parts = vec![u];
            parts.extend(&outputs);
            tape.concat_cols(&parts)?
        };
        let out = gcn_layer(tape, a, input, bound.var(layer.w), bound.var(layer.b), dropout)?;
        outputs.push(out);
    }
    let cat = if outputs.len() == 1 {
        outputs[0]
    } else {
        tape.concat_cols(&outputs)?
    };
    let cat = if residual { tape.add(cat, u)? } else { cat };
    tape.matmul(cat, bound.var(params.w_comb))
}

/// Per-block structures and outputs of one refinement run.
#[derive(Debug, Clone)]
pub struct RefinementTrace {
    /// Adjacency used by each block.
    pub adjacency: Vec<Var>,
    /// Induced marginals per block (empty in uniform mode).
    pub structures: Vec<StructureMarginals>,
    /// `U¹ … U^N`.
    pub nodes: Vec<Var>,
    pub jittered: usize,
}

impl RefinementTrace {
    pub fn max_normalization_error(&self) -> f64 {
        self.structures
            .iter()
            .map(StructureMarginals::normalization_error)
            .fold(0.0, f64::max)
    }
}

/// How the refinement blocks are wired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefineOptions {
    pub structure: StructureMode,
    pub residual: bool,
}

/// Runs every block in order and returns `U^N` with the trace.
pub fn refine(
    tape: &mut Tape,
    bound: &BoundParams,
    blocks: &[BlockParams],
    options: RefineOptions,
    u0: Var,
    dropout: &mut Dropout<'_>,
) -> Result<(Var, RefinementTrace), ReasonerError> {
    assert!(!blocks.is_empty(), "at least one block is required");
    let n = tape.value(u0).rows();
    let mut trace = RefinementTrace {
        adjacency: Vec::new(),
        structures: Vec::new(),
        nodes: Vec::new(),
        jittered: 0,
    };
    let mut u = u0;
    for (block, params) in blocks.iter().enumerate() {
        let a = match options.structure {
            StructureMode::Induced => {
                let s = induce(tape, bound, &params.induction, u)
                    .map_err(|source| ReasonerError::Structure { block, source })?;
                trace.structures.push(s.marginals(tape));
                trace.jittered += usize::from(s.jittered);
                s.a
            }
            StructureMode::Uniform => tape.constant(Tensor::filled(&[n, n], 1.0 / n as f64)),
        };
        trace.adjacency.push(a);
        u = dense_gcn_block(tape, bound, params, a, u, options.residual, dropout)?;
        trace.nodes.push(u);
    }
    Ok((u, trace))
}

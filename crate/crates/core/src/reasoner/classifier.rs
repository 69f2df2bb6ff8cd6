use super::ReasonerError;
use crate::numerics::{sigmoid, BoundParams, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// Bilinear relation scorer: `P(r | e_i, e_j) = σ(e_iᵀ W_r e_j + b_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierParams {
    /// `d × k × d`; slice `[:, r, :]` is `W_r`.
    pub w_e: ParamId,
    /// `1 × k`
    pub b_e: ParamId,
    pub relations: usize,
    pub d: usize,
}

impl ClassifierParams {
    pub fn register(
        store: &mut ParamStore,
        d: usize,
        relations: usize,
        init: &mut impl FnMut(&[usize]) -> Tensor,
    ) -> Self {
        let w = init(&[d, relations * d]);
        let w = w.reshape(&[d, relations, d]).expect("same element count");
        Self {
            w_e: store.insert("classifier.w_e", w),
            b_e: store.insert("classifier.b_e", Tensor::zeros(&[1, relations])),
            relations,
            d,
        }
    }
}

/// Row of the `e² × k` score matrix that holds pair `(i, j)`.
pub fn pair_index(e: usize, i: usize, j: usize) -> usize {
    i * e + j
}

/// Scores every ordered entity pair (including `i == j`) at once.
/// Returns `e² × k` probabilities; see [`pair_index`].
pub fn classify_all(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &ClassifierParams,
    entities: Var,
) -> Result<Var, NumericsError> {
    let (k, d) = (params.relations, params.d);
    let e = tape.value(entities).rows();
    let w = tape.reshape(bound.var(params.w_e), &[d, k * d])?;
    let ew = tape.matmul(entities, w)?;
    let et = tape.transpose(entities)?;
    let mut cols = Vec::with_capacity(k);
    for r in 0..k {
        let ew_r = tape.slice_cols(ew, r * d, (r + 1) * d)?;
        let scores = tape.matmul(ew_r, et)?;
        cols.push(tape.reshape(scores, &[e * e, 1])?);
    }
    let logits = if k == 1 { cols[0] } else { tape.concat_cols(&cols)? };
    let logits = tape.add_row_bias(logits, bound.var(params.b_e))?;
    tape.sigmoid(logits)
}

/// Plain-value scoring of the ordered pair `(i, j)`; returns `k` probabilities.
pub fn classify(
    entities: &Tensor,
    i: usize,
    j: usize,
    store: &ParamStore,
    params: &ClassifierParams,
) -> Result<Vec<f64>, ReasonerError> {
    let e = entities.rows();
    if i == j || i >= e || j >= e {
        return Err(ReasonerError::InvalidPair(i, j));
    }
    let (k, d) = (params.relations, params.d);
    let w = store.get(params.w_e).data();
    let b = store.get(params.b_e).data();
    let (ei, ej) = (entities.row(i), entities.row(j));
    Ok((0..k)
        .map(|r| {
            let mut s = b[r];
            for a in 0..d {
                for c in 0..d {
                    s += ei[a] * w[(a * k + r) * d + c] * ej[c];
                }
            }
            sigmoid(s)
        })
        .collect())
}

/// Mean binary cross-entropy over every entry of `probs` against `targets`
/// (same shape, entries in {0, 1}).
pub fn bce_loss(tape: &mut Tape, probs: Var, targets: &Tensor) -> Result<Var, NumericsError> {
    if tape.shape(probs) != targets.shape() {
        return Err(NumericsError::ShapeMismatch {
            op: "bce_loss",
            left: tape.shape(probs).to_vec(),
            right: targets.shape().to_vec(),
        });
    }
    let count = targets.len();
    if count == 0 {
        return Err(NumericsError::Empty { op: "bce_loss" });
    }
    let p = tape.clamp(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)?;
    let ln_p = tape.ln(p)?;
    let q = tape.affine(p, -1.0, 1.0)?;
    let ln_q = tape.ln(q)?;
    let pos = tape.mul_const(ln_p, targets.clone())?;
    let neg = tape.mul_const(ln_q, targets.map(|y| 1.0 - y))?;
    let both = tape.add(pos, neg)?;
    let total = tape.sum(both)?;
    tape.scale(total, -1.0 / count as f64)
}

use crate::numerics::{BoundParams, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

use super::EncoderParams;

/// One LSTM direction. Gate columns are laid out `[input, forget, cell, output]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    /// `d_in × 4h`
    pub w_x: ParamId,
    /// `h × 4h`
    pub w_h: ParamId,
    /// `1 × 4h`
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmParams {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        hidden: usize,
        init: &mut impl FnMut(&[usize]) -> Tensor,
    ) -> Self {
        let w_x = store.insert(format!("{prefix}.w_x"), init(&[d_in, 4 * hidden]));
        let w_h = store.insert(format!("{prefix}.w_h"), init(&[hidden, 4 * hidden]));
        // forget-gate bias starts at 1
        let mut bias = Tensor::zeros(&[1, 4 * hidden]);
        for j in hidden..2 * hidden {
            bias.set(0, j, 1.0);
        }
        let b = store.insert(format!("{prefix}.b"), bias);
        Self { w_x, w_h, b, hidden }
    }
}

/// Runs one direction over `inputs` (rows pre-multiplied by `W_x` plus
/// bias) in the given step order; returns hidden rows in that order.
fn run_direction(
    tape: &mut Tape,
    bound: &BoundParams,
    p: &LstmParams,
    projected: Var,
    order: impl Iterator<Item = usize>,
) -> Result<Vec<Var>, NumericsError> {
    let h = p.hidden;
    let mut state: Option<(Var, Var)> = None;
    let mut out = Vec::new();
    for t in order {
        let x_t = tape.slice_rows(projected, t, t + 1)?;
        let gates = match state {
            Some((h_prev, _)) => {
                let rec = tape.matmul(h_prev, bound.var(p.w_h))?;
                tape.add(x_t, rec)?
            }
            None => x_t,
        };
        let i_pre = tape.slice_cols(gates, 0, h)?;
        let f_pre = tape.slice_cols(gates, h, 2 * h)?;
        let g_pre = tape.slice_cols(gates, 2 * h, 3 * h)?;
        let o_pre = tape.slice_cols(gates, 3 * h, 4 * h)?;
        let i = tape.sigmoid(i_pre)?;
        let g = tape.tanh(g_pre)?;
        let o = tape.sigmoid(o_pre)?;
        let ig = tape.mul(i, g)?;
        let c = match state {
            Some((_, c_prev)) => {
                let f = tape.sigmoid(f_pre)?;
                let fc = tape.mul(f, c_prev)?;
                tape.add(fc, ig)?
            }
            None => ig,
        };
        let tc = tape.tanh(c)?;
        let h_t = tape.mul(o, tc)?;
        state = Some((h_t, c));
        out.push(h_t);
    }
    Ok(out)
}

/// Encodes one sentence of token ids to `len × d`; row `j` is the forward
/// state at `j` followed by the backward state at `j`. Initial states are
/// zero.
pub fn encode_sentence(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &EncoderParams,
    token_ids: &[usize],
) -> Result<Var, NumericsError> {
    let len = token_ids.len();
    if len == 0 {
        return Err(NumericsError::Empty {
            op: "encode_sentence",
        });
    }
    let emb = tape.gather_rows(bound.var(params.embedding), token_ids)?;

    let mut halves = Vec::with_capacity(2);
    for (p, reverse) in [(&params.forward, false), (&params.backward, true)] {
        let xw = tape.matmul(emb, bound.var(p.w_x))?;
        let projected = tape.add_row_bias(xw, bound.var(p.b))?;
        let mut rows = if reverse {
            run_direction(tape, bound, p, projected, (0..len).rev())?
        } else {
            run_direction(tape, bound, p, projected, 0..len)?
        };
        if reverse {
            rows.reverse();
        }
        halves.push(tape.concat_rows(&rows)?);
    }
    tape.concat_cols(&halves)
}

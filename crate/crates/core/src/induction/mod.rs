//! Latent structure induction.
//!
//! Node representations are scored pairwise with a bilinear form over two
//! tanh projections and against a virtual root with a linear map. The scores
//! define a Gibbs distribution over single-root spanning arborescences;
//! [`marginals`] returns its exact edge and root marginals through the
//! root-augmented Laplacian (first row replaced by the root weights) and its
//! inverse. `A[i][j]` is the probability that `i` is the parent of `j`.
//!
//! Exponentiation uses a global shift `c = max(s, s_root)`. Every
//! arborescence has exactly `n` weight factors (one root, `n − 1` edges),
//! so the shift rescales the partition function by `exp(−n·c)` and leaves
//! every marginal unchanged.

mod oracle;

pub use oracle::{brute_force_marginals, compare_with_oracle, random_scores, OracleReport, BRUTE_FORCE_MAX_NODES};

use thiserror::Error;

use crate::numerics::{BoundParams, NumericsError, ParamId, ParamStore, Tape, Tensor, Var};

/// Diagonal jitter used for the single retry on a singular Laplacian.
pub const SINGULAR_JITTER: f64 = 1e-10;

/// Largest column normalisation error accepted from an inverse. Beyond it
/// the Laplacian passed the pivot test but was too ill-conditioned for the
/// marginals to be trusted.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InductionError {
    #[error("singular structure: root-augmented Laplacian not invertible ({0})")]
    SingularStructure(NumericsError),
    #[error("ill-conditioned Laplacian gave marginals off by {error:.3e} (jittered: {jittered}); treated as singular")]
    Distorted { error: f64, jittered: bool },
    #[error("brute-force enumeration limited to {max} nodes, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl InductionError {
    /// Both ways a structure can fail to exist numerically.
    pub fn is_singular(&self) -> bool {
        matches!(self, Self::SingularStructure(_) | Self::Distorted { .. })
    }
}

/// Edge and root marginals of one induced structure.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMarginals {
    /// `n × n`; `a[i][j]` = P(i is the parent of j).
    pub a: Tensor,
    /// P(j is the root).
    pub root: Vec<f64>,
    /// Log partition function of the unshifted weights.
    pub log_z: f64,
}

impl StructureMarginals {
    pub fn n(&self) -> usize {
        self.root.len()
    }

    /// `max_j |root_j + Σ_i A_ij − 1|`.
    pub fn normalization_error(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| {
                let col: f64 = (0..n).map(|i| self.a.get(i, j)).sum();
                (self.root[j] + col - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest absolute difference over edge and root marginals.
    pub fn max_abs_diff(&self, other: &StructureMarginals) -> f64 {
        let roots = self
            .root
            .iter()
            .zip(&other.root)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        self.a.max_abs_diff(&other.a).max(roots)
    }
}

/// Non-negative weights after the stability shift.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    /// `n × n`, zero diagonal, `exp(s_ij − shift)` elsewhere.
    pub p: Tensor,
    /// `exp(s_root_j − shift)`.
    pub root: Vec<f64>,
    pub shift: f64,
}

/// Parameter handles for one induction module.
/// Initial scale of `W_p` and `W_c` relative to the caller's init. At unit
/// gain the tanh projections of typical node rows are tiny, the scores are
/// near zero and every induced tree starts out almost uniform.
pub const PROJECTION_GAIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InductionParams {
    pub w_p: ParamId,
    pub w_c: ParamId,
    pub w_b: ParamId,
    pub w_r: ParamId,
}

impl InductionParams {
    /// Registers `W_p`, `W_c`, `W_b` (`d × d`) and `W_r` (`1 × d`).
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        init: &mut impl FnMut(&[usize]) -> Tensor,
    ) -> Self {
        Self {
            w_p: store.insert(format!("{prefix}.w_p"), init(&[d, d]).scale(PROJECTION_GAIN)),
            w_c: store.insert(format!("{prefix}.w_c"), init(&[d, d]).scale(PROJECTION_GAIN)),
            w_b: store.insert(format!("{prefix}.w_b"), init(&[d, d])),
            w_r: store.insert(format!("{prefix}.w_r"), init(&[1, d])),
        }
    }
}

/// Tape handles of an induced structure.
#[derive(Debug, Clone, Copy)]
pub struct TapeStructure {
    pub a: Var,
    /// `1 × n`.
    pub root: Var,
    /// `1 × 1`, including the shift correction.
    pub log_z: Var,
    pub jittered: bool,
}

impl TapeStructure {
    pub fn marginals(&self, tape: &Tape) -> StructureMarginals {
        StructureMarginals {
            a: tape.value(self.a).clone(),
            root: tape.value(self.root).data().to_vec(),
            log_z: tape.value(self.log_z).data()[0],
        }
    }
}

fn off_diagonal_mask(n: usize) -> Tensor {
    let mut m = Tensor::filled(&[n, n], 1.0);
    for i in 0..n {
        m.set(i, i, 0.0);
    }
    m
}

/// `s_ij = tanh(W_p u_i)ᵀ W_b tanh(W_c u_j)`, diagonal zeroed.
pub fn pair_scores_on_tape(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &InductionParams,
    u: Var,
) -> Result<Var, NumericsError> {
    let n = tape.value(u).rows();
    let wp_t = tape.transpose(bound.var(params.w_p))?;
    let wc_t = tape.transpose(bound.var(params.w_c))?;
    let up = tape.matmul(u, wp_t)?;
    let hp = tape.tanh(up)?;
    let uc = tape.matmul(u, wc_t)?;
    let hc = tape.tanh(uc)?;
    let hpb = tape.matmul(hp, bound.var(params.w_b))?;
    let hc_t = tape.transpose(hc)?;
    let s = tape.matmul(hpb, hc_t)?;
    tape.mul_const(s, off_diagonal_mask(n))
}

/// `s_root_i = W_r u_i`, as a `1 × n` row.
pub fn root_scores_on_tape(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &InductionParams,
    u: Var,
) -> Result<Var, NumericsError> {
    let wr_t = tape.transpose(bound.var(params.w_r))?;
    let col = tape.matmul(u, wr_t)?;
    tape.transpose(col)
}

/// Plain-value `pair_scores` for tests and inspection.
pub fn pair_scores(u: &Tensor, store: &ParamStore, params: &InductionParams) -> Result<Tensor, NumericsError> {
    let mut tape = Tape::new();
    let bound = store.bind(&mut tape);
    let uv = tape.constant(u.clone());
    let s = pair_scores_on_tape(&mut tape, &bound, params, uv)?;
    Ok(tape.value(s).clone())
}

pub fn root_scores(u: &Tensor, store: &ParamStore, params: &InductionParams) -> Result<Vec<f64>, NumericsError> {
    let mut tape = Tape::new();
    let bound = store.bind(&mut tape);
    let uv = tape.constant(u.clone());
    let s = root_scores_on_tape(&mut tape, &bound, params, uv)?;
    Ok(tape.value(s).data().to_vec())
}

/// The stability shift: max over off-diagonal pair scores and root scores.
pub fn score_shift(s: &Tensor, s_root: &[f64]) -> f64 {
    let n = s_root.len();
    let mut c = s_root.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                c = c.max(s.get(i, j));
            }
        }
    }
    if c.is_finite() {
        c
    } else {
        0.0
    }
}

/// Per-column shifts `c_j = max_i s_ij` plus one extra root shift
/// `c_r = max_j (s_root_j − c_j)`. Every arborescence takes exactly one
/// entry from each column of the (pair, root) scores and exactly one root
/// entry, so subtracting these leaves the marginals unchanged and adds
/// `Σ c_j + c_r` to log Z. Unlike a single global shift it keeps a weight of
/// 1 in every column and in the root row, so no column underflows as a
/// whole and the Laplacian stays well scaled when scores spread widely.
pub fn balanced_shifts(s: &Tensor, s_root: &[f64]) -> (Vec<f64>, f64) {
    let n = s_root.len();
    let cols: Vec<f64> = (0..n)
        .map(|j| {
            let c = (0..n).filter(|&i| i != j).map(|i| s.get(i, j)).fold(f64::NEG_INFINITY, f64::max);
            if c.is_finite() {
                c
            } else {
                s_root[j]
            }
        })
        .collect();
    let root = s_root
        .iter()
        .zip(&cols)
        .map(|(r, c)| r - c)
        .fold(f64::NEG_INFINITY, f64::max);
    (cols, if root.is_finite() { root } else { 0.0 })
}

pub fn edge_weights(s: &Tensor, s_root: &[f64]) -> EdgeWeights {
    let n = s_root.len();
    let shift = score_shift(s, s_root);
    let mut p = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p.set(i, j, (s.get(i, j) - shift).exp());
            }
        }
    }
    EdgeWeights {
        p,
        root: s_root.iter().map(|r| (r - shift).exp()).collect(),
        shift,
    }
}

/// `(L, L̂)`: the in-degree Laplacian and its root-augmented variant.
pub fn laplacian(p: &Tensor, root: &[f64]) -> (Tensor, Tensor) {
    let n = root.len();
    let mut l = p.scale(-1.0);
    for j in 0..n {
        let in_weight: f64 = (0..n).map(|i| p.get(i, j)).sum();
        l.set(j, j, in_weight);
    }
    let mut l_hat = l.clone();
    for (j, &r) in root.iter().enumerate() {
        l_hat.set(0, j, r);
    }
    (l, l_hat)
}

/// Marginals from weights already on the tape. `p` is `n × n` with a zero
/// diagonal, `r` is `1 × n`. Returns `(A, root, log det L̂, jittered)`.
pub fn marginals_on_tape(
    tape: &mut Tape,
    p: Var,
    r: Var,
) -> Result<(Var, Var, Var, bool), InductionError> {
    let n = tape.value(p).rows();
    let in_weight = tape.col_sum(p)?;
    let degree = tape.diag_embed(in_weight)?;
    let l = tape.sub(degree, p)?;
    let l_hat = tape.replace_row(l, 0, r)?;

    let (l_used, inv, jittered) = match tape.inverse(l_hat) {
        Ok(inv) => (l_hat, inv, false),
        Err(NumericsError::SingularMatrix { .. }) => {
            let jitter = Tensor::eye(n).scale(SINGULAR_JITTER);
            let lj = tape.add_const(l_hat, &jitter)?;
            match tape.inverse(lj) {
                Ok(inv) => (lj, inv, true),
                Err(e @ NumericsError::SingularMatrix { .. }) => {
                    return Err(InductionError::SingularStructure(e))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(e) => return Err(e.into()),
    };
    let (logdet, _sign) = tape.logdet(l_used).map_err(|e| match e {
        NumericsError::SingularMatrix { .. } => InductionError::SingularStructure(e),
        other => other.into(),
    })?;

    // first term: P_ij [L̂⁻¹]_jj for j ≠ 0
    let inv_diag = tape.diag(inv)?;
    let inv_diag_rows = tape.broadcast_rows(inv_diag, n)?;
    let t1 = tape.mul(p, inv_diag_rows)?;
    let mut not_first_col = Tensor::filled(&[n, n], 1.0);
    for i in 0..n {
        not_first_col.set(i, 0, 0.0);
    }
    let t1 = tape.mul_const(t1, not_first_col)?;

    // second term: P_ij [L̂⁻¹]_ji for i ≠ 0
    let inv_t = tape.transpose(inv)?;
    let t2 = tape.mul(p, inv_t)?;
    let mut not_first_row = Tensor::filled(&[n, n], 1.0);
    for j in 0..n {
        not_first_row.set(0, j, 0.0);
    }
    let t2 = tape.mul_const(t2, not_first_row)?;
    let a = tape.sub(t1, t2)?;

    // root_j = r_j [L̂⁻¹]_j0
    let first_col = tape.slice_cols(inv, 0, 1)?;
    let first_col_t = tape.transpose(first_col)?;
    let root = tape.mul(r, first_col_t)?;
    let check = StructureMarginals {
        a: tape.value(a).clone(),
        root: tape.value(root).data().to_vec(),
        log_z: 0.0,
    };
    let error = check.normalization_error();
    if !(error < NORMALIZATION_TOLERANCE) {
        return Err(InductionError::Distorted { error, jittered });
    }
    Ok((a, root, logdet, jittered))
}

/// Full induction from pair and root scores already on the tape, using the
/// shifts of [`balanced_shifts`].
pub fn induce_from_scores(tape: &mut Tape, s: Var, s_root: Var) -> Result<TapeStructure, InductionError> {
    let n = tape.value(s_root).cols();
    let (cols, root_shift) = balanced_shifts(tape.value(s), tape.value(s_root).data());
    let col_shift = Tensor::from_rows(&vec![cols.iter().map(|c| -c).collect::<Vec<_>>(); n]);
    let shifted = tape.add_const(s, &col_shift)?;
    // zero the unused diagonal before exp so it cannot overflow
    let shifted = tape.mul_const(shifted, off_diagonal_mask(n))?;
    let expd = tape.exp(shifted)?;
    let p = tape.mul_const(expd, off_diagonal_mask(n))?;
    let root_shifts: Vec<f64> = cols.iter().map(|c| -c - root_shift).collect();
    let rs = tape.add_const(s_root, &Tensor::row_vector(&root_shifts))?;
    let r = tape.exp(rs)?;
    let (a, root, logdet, jittered) = marginals_on_tape(tape, p, r)?;
    let offset: f64 = cols.iter().sum::<f64>() + root_shift;
    let log_z = tape.affine(logdet, 1.0, offset)?;
    Ok(TapeStructure {
        a,
        root,
        log_z,
        jittered,
    })
}

/// Scores node matrix `u` (`n × d`) and induces its structure.
pub fn induce(
    tape: &mut Tape,
    bound: &BoundParams,
    params: &InductionParams,
    u: Var,
) -> Result<TapeStructure, InductionError> {
    let s = pair_scores_on_tape(tape, bound, params, u)?;
    let s_root = root_scores_on_tape(tape, bound, params, u)?;
    induce_from_scores(tape, s, s_root)
}

/// Marginals of shifted edge weights; `log_z` adds back `n · shift`.
pub fn marginals(weights: &EdgeWeights) -> Result<StructureMarginals, InductionError> {
    let n = weights.root.len();
    let mut tape = Tape::new();
    let p = tape.constant(weights.p.clone());
    let r = tape.constant(Tensor::row_vector(&weights.root));
    let (a, root, logdet, _) = marginals_on_tape(&mut tape, p, r)?;
    Ok(StructureMarginals {
        a: tape.value(a).clone(),
        root: tape.value(root).data().to_vec(),
        log_z: tape.value(logdet).data()[0] + n as f64 * weights.shift,
    })
}

/// Marginals straight from scores, through the same balanced shifts as
/// [`induce_from_scores`].
pub fn marginals_from_scores(s: &Tensor, s_root: &[f64]) -> Result<StructureMarginals, InductionError> {
    let mut tape = Tape::new();
    let sv = tape.constant(s.clone());
    let rv = tape.constant(Tensor::row_vector(s_root));
    Ok(induce_from_scores(&mut tape, sv, rv)?.marginals(&tape))
}

//! LU factorisation with partial pivoting, inverse and log-determinant.

use super::{NumericsError, Tensor};

/// Pivots smaller than this fraction of `max |A|` mark the matrix singular.
pub const SINGULAR_RELATIVE_TOL: f64 = 1e-12;

/// Packed LU factors of a row-permuted square matrix: `P·A = L·U`.
///
/// `L` is unit lower triangular and stored below the diagonal of `packed`;
/// `U` occupies the diagonal and above.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    packed: Vec<f64>,
    /// `perm[i]` is the row of `A` that ended up in row `i` of `P·A`.
    perm: Vec<usize>,
    /// `+1` for an even number of row swaps, `-1` for odd.
    parity: f64,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn parity(&self) -> f64 {
        self.parity
    }

    pub fn lower(&self) -> Tensor {
        let n = self.n;
        let mut l = Tensor::eye(n);
        for i in 0..n {
            for j in 0..i {
                l.set(i, j, self.packed[i * n + j]);
            }
        }
        l
    }

    pub fn upper(&self) -> Tensor {
        let n = self.n;
        let mut u = Tensor::zeros(&[n, n]);
        for i in 0..n {
            for j in i..n {
                u.set(i, j, self.packed[i * n + j]);
            }
        }
        u
    }

    /// The permutation as a matrix `P` with `(P·A)[i] = A[perm[i]]`.
    pub fn permutation_matrix(&self) -> Tensor {
        let n = self.n;
        let mut p = Tensor::zeros(&[n, n]);
        for (i, &src) in self.perm.iter().enumerate() {
            p.set(i, src, 1.0);
        }
        p
    }

    /// `(log |det A|, sign det A)`.
    pub fn log_abs_det(&self) -> (f64, f64) {
        let n = self.n;
        let mut logdet = 0.0;
        let mut sign = self.parity;
        for i in 0..n {
            let u = self.packed[i * n + i];
            logdet += u.abs().ln();
            if u < 0.0 {
                sign = -sign;
            }
        }
        (logdet, sign)
    }

    /// Solve `A x = b` for one right-hand side in place.
    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let permuted: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&permuted);
        for i in 0..n {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.packed[i * n + j] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..n {
                acc -= self.packed[i * n + j] * b[j];
            }
            b[i] = acc / self.packed[i * n + i];
        }
    }

    pub fn inverse(&self) -> Tensor {
        let n = self.n;
        let mut inv = Tensor::zeros(&[n, n]);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        inv
    }
}

fn require_square(op: &'static str, a: &Tensor) -> Result<usize, NumericsError> {
    if !a.is_square() {
        return Err(NumericsError::NotSquare {
            op,
            shape: a.shape().to_vec(),
        });
    }
    Ok(a.rows())
}

/// Doolittle LU with partial pivoting.
pub fn lu_decompose(a: &Tensor) -> Result<LuFactors, NumericsError> {
    let n = require_square("lu_decompose", a)?;
    if !a.all_finite() {
        return Err(NumericsError::NonFinite { op: "lu_decompose" });
    }
    let scale = a.max_abs();
    let tol = SINGULAR_RELATIVE_TOL * scale;
    let mut m = a.data().to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut parity = 1.0;

    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|i| (i, m[i * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if scale == 0.0 || pivot_abs <= tol {
            return Err(NumericsError::SingularMatrix {
                column: k,
                pivot: pivot_abs,
                scale,
            });
        }
        if pivot_row != k {
            for j in 0..n {
                m.swap(k * n + j, pivot_row * n + j);
            }
            perm.swap(k, pivot_row);
            parity = -parity;
        }
        let pivot = m[k * n + k];
        for i in k + 1..n {
            let factor = m[i * n + k] / pivot;
            m[i * n + k] = factor;
            if factor != 0.0 {
                for j in k + 1..n {
                    m[i * n + j] -= factor * m[k * n + j];
                }
            }
        }
    }
    Ok(LuFactors {
        n,
        packed: m,
        perm,
        parity,
    })
}

/// Returns `(A⁻¹, log |det A|, sign det A)`.
pub fn inverse_and_logdet(a: &Tensor) -> Result<(Tensor, f64, f64), NumericsError> {
    let lu = lu_decompose(a)?;
    let (logdet, sign) = lu.log_abs_det();
    Ok((lu.inverse(), logdet, sign))
}

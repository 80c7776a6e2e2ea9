//! Dense symmetric kernels: Cholesky-based positive-definiteness testing and
//! smallest-eigenvalue computation.
//!
//! The sieve extracts small submatrices to dense scratch before factorizing;
//! reducing supports are tiny in practice, so nothing sparse is needed here.

use thiserror::Error;

/// Dense symmetric matrix in full row-major storage, `data[i*n + j]`.
///
/// Invariant: `get(i, j) == get(j, i)` exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSym {
    order: usize,
    data: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![0.0; order * order] }
    }

    /// Build by evaluating `f` on the upper triangle and mirroring.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in i..order {
                m.set_sym(i, j, f(i, j));
            }
        }
        m
    }

    /// Build from rows; panics if the input is not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let order = rows.len();
        let mut m = Self::zeros(order);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), order, "row {i} has wrong length");
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, rows[j][i], "input not symmetric at ({i},{j})");
                m.data[i * order + j] = v;
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    /// Set both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set_sym(i, j, cur + v);
    }

    /// `self` with every entry negated.
    pub fn negated(&self) -> Self {
        Self { order: self.order, data: self.data.iter().map(|v| -v).collect() }
    }

    /// Principal submatrix on the given index set (in the given order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        DenseSym::from_fn(idx.len(), |p, q| self.get(idx[p], idx[q]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PdStatus {
    PositiveDefinite,
    /// The 0-based elimination step whose pivot failed the threshold.
    NotPositiveDefinite { failed_pivot: usize },
}

impl PdStatus {
    pub fn is_positive_definite(&self) -> bool {
        matches!(self, PdStatus::PositiveDefinite)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
}

/// Cholesky factorization `M = L·Lᵀ`; returns the lower factor or the index
/// of the first pivot that was not strictly above `pivot_tol`.
///
/// A NaN pivot fails the comparison and is reported like a nonpositive one.
pub fn cholesky(m: &DenseSym, pivot_tol: f64) -> Result<DenseSym, usize> {
    let n = m.order();
    let mut l = DenseSym::zeros(n);
    for k in 0..n {
        let mut pivot = m.get(k, k);
        for j in 0..k {
            pivot -= l.data[k * n + j] * l.data[k * n + j];
        }
        if pivot <= pivot_tol || pivot.is_nan() {
            return Err(k);
        }
        let lkk = pivot.sqrt();
        l.data[k * n + k] = lkk;
        for i in (k + 1)..n {
            let mut v = m.get(i, k);
            for j in 0..k {
                v -= l.data[i * n + j] * l.data[k * n + j];
            }
            l.data[i * n + k] = v / lkk;
        }
    }
    Ok(l)
}

/// Positive-definiteness test: succeeds iff a full Cholesky factorization
/// completes with every pivot strictly above `pivot_tol`.
pub fn pd_check(m: &DenseSym, pivot_tol: f64) -> PdStatus {
    match cholesky(m, pivot_tol) {
        Ok(_) => PdStatus::PositiveDefinite,
        Err(k) => PdStatus::NotPositiveDefinite { failed_pivot: k },
    }
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Smallest eigenvalue via cyclic Jacobi rotations, accurate to
/// `1e-10·(1 + ‖M‖_F)` absolute.
pub fn min_eigenvalue(m: &DenseSym) -> Result<f64, LinalgError> {
    let eigs = jacobi_eigenvalues(m)?;
    Ok(eigs.into_iter().fold(f64::INFINITY, f64::min))
}

/// All eigenvalues (unsorted) via cyclic Jacobi sweeps.
pub fn jacobi_eigenvalues(m: &DenseSym) -> Result<Vec<f64>, LinalgError> {
    let n = m.order();
    if n == 1 {
        return Ok(vec![m.get(0, 0)]);
    }
    let mut a = m.clone();
    let (frob, _) = norms(m);
    let stop = 1e-14 * (1.0 + frob);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                off += a.get(p, q).abs();
            }
        }
        if off <= stop {
            return Ok((0..n).map(|i| a.get(i, i)).collect());
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                // Rotation angle that annihilates a_pq (Golub & Van Loan 8.4).
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set_sym(k, p, c * akp - s * akq);
                    a.set_sym(k, q, s * akp + c * akq);
                }
                a.set_sym(p, p, app - t * apq);
                a.set_sym(q, q, aqq + t * apq);
                a.set_sym(p, q, 0.0);
            }
        }
    }
    Err(LinalgError::NonConvergence { sweeps: JACOBI_MAX_SWEEPS })
}

/// `(‖M‖_F, ‖M‖_∞)` over the full square matrix.
pub fn norms(m: &DenseSym) -> (f64, f64) {
    let mut frob = 0.0;
    let mut max_abs = 0.0f64;
    for &v in &m.data {
        frob += v * v;
        max_abs = max_abs.max(v.abs());
    }
    (frob.sqrt(), max_abs)
}

//! Dense complex linear algebra helpers: SVD-based pseudoinverse and an
//! incrementally grown QR factorization for greedy pursuit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Columns whose relative singular value (or orthogonal residue) falls below
/// this are treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Left pseudoinverse `(AᴴA)⁻¹Aᴴ` of a tall, full-column-rank matrix,
/// computed from the SVD.
pub fn left_pinv(a: &CMatrix) -> Result<CMatrix> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Err(Error::DegenerateDictionary("matrix has no columns".into()));
    }
    if rows < cols {
        return Err(Error::Underdetermined { rows, cols });
    }
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    if !(s_max > 0.0) {
        return Err(Error::DegenerateDictionary("all singular values are zero".into()));
    }
    let s_min = s.min();
    if s_min < RANK_TOL * s_max {
        return Err(Error::DegenerateDictionary(format!(
            "relative singular value {:.3e} below {RANK_TOL:.0e}",
            s_min / s_max
        )));
    }
    let u = svd.u.as_ref().expect("svd computed with U");
    let v_t = svd.v_t.as_ref().expect("svd computed with Vᴴ");
    // A⁺ = V Σ⁻¹ Uᴴ
    let mut v = v_t.adjoint();
    for (j, sv) in s.iter().enumerate() {
        v.column_mut(j).scale_mut(1.0 / sv);
    }
    Ok(v * u.adjoint())
}

/// Least-squares solution of `A x ≈ y` for tall full-rank `A`.
pub fn least_squares(a: &CMatrix, y: &CVector) -> Result<CVector> {
    if a.nrows() != y.len() {
        return Err(Error::dimension(format!(
            "matrix has {} rows but observation has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    Ok(left_pinv(a)? * y)
}

/// Thin QR factorization `Φ = Q R` grown one column at a time with modified
/// Gram-Schmidt plus one reorthogonalization pass.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    rows: usize,
    q: Vec<CVector>,
    // r[j] holds column j of R (length j + 1).
    r: Vec<Vec<Complex64>>,
}

impl IncrementalQr {
    pub fn new(rows: usize) -> Self {
        Self { rows, q: Vec::new(), r: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    /// Orthogonal residue of `col` against the current basis, with the
    /// projection coefficients.
    fn orthogonalize(&self, col: &CVector) -> (CVector, Vec<Complex64>) {
        let mut w = col.clone();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.q.len()];
        for _ in 0..2 {
            for (qj, cj) in self.q.iter().zip(coeffs.iter_mut()) {
                let c = qj.dotc(&w);
                w.axpy(-c, qj, Complex64::new(1.0, 0.0));
                *cj += c;
            }
        }
        (w, coeffs)
    }

    /// Appends a column. Fails without modifying the factorization when the
    /// column is (numerically) in the span of the existing ones.
    pub fn push(&mut self, col: &CVector) -> Result<()> {
        if col.len() != self.rows {
            return Err(Error::dimension(format!(
                "column of length {} pushed into QR with {} rows",
                col.len(),
                self.rows
            )));
        }
        let norm0 = col.norm();
        if !(norm0 > 0.0) {
            return Err(Error::DegenerateDictionary("zero column".into()));
        }
        if self.q.len() >= self.rows {
            return Err(Error::DegenerateDictionary("basis already spans the space".into()));
        }
        let (w, mut coeffs) = self.orthogonalize(col);
        let nw = w.norm();
        if nw < RANK_TOL * norm0 {
            return Err(Error::DegenerateDictionary(format!(
                "column residue {:.3e} relative to its norm",
                nw / norm0
            )));
        }
        coeffs.push(Complex64::new(nw, 0.0));
        self.q.push(w.unscale(nw));
        self.r.push(coeffs);
        Ok(())
    }

    /// Orthogonal projection of `y` onto the span of the pushed columns.
    pub fn project(&self, y: &CVector) -> CVector {
        let mut out = CVector::zeros(self.rows);
        for qj in &self.q {
            let c = qj.dotc(y);
            out.axpy(c, qj, Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Least-squares coefficients `b` minimizing `|y − Φ b|`.
    pub fn solve(&self, y: &CVector) -> Vec<Complex64> {
        let k = self.q.len();
        let z: Vec<Complex64> = self.q.iter().map(|qj| qj.dotc(y)).collect();
        let mut b = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = z[i];
            for (j, bj) in b.iter().enumerate().skip(i + 1) {
                acc -= self.r[j][i] * bj;
            }
            b[i] = acc / self.r[i][i];
        }
        b
    }
}

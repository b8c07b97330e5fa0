//! Dense factorizations: Cholesky, partially pivoted LU and Householder QR.

use super::matrix::{dot, DenseMatrix};
use crate::error::{check_len, Error, Result};

/// Relative threshold below which triangular pivots count as zero when
/// determining the numerical rank of a constraint matrix.
pub const RANK_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `L` with `S = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn new(s: &DenseMatrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let n = s.rows();
        let mut l = DenseMatrix::zeros(n, n);
        let scale = s.max_abs().max(f64::MIN_POSITIVE);
        for j in 0..n {
            let mut d = s[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 1e-14 * scale) {
                return Err(Error::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut v = s[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        inv
    }

    /// `L⁻ᵀ`, the initial basis used by the dual active-set QP method.
    pub fn inverse_transpose_factor(&self) -> DenseMatrix {
        let n = self.dim();
        let mut out = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            self.backward(&mut e);
            for i in 0..n {
                out[(i, j)] = e[i];
            }
        }
        out
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("LU needs a square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let piv = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.dim();
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Householder QR of an `m x n` matrix: returns the full orthogonal `Q` (`m x m`)
/// and the upper-triangular `R` (`m x n`).
pub fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut q = DenseMatrix::identity(m);
    for k in 0..n.min(m.saturating_sub(1)) {
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- (I - 2 v vᵀ / vᵀv) R
        for j in 0..n {
            let s: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..m {
                r[(i, j)] -= s * v[i - k];
            }
        }
        // Q <- Q (I - 2 v vᵀ / vᵀv)
        for i in 0..m {
            let s: f64 = (k..m).map(|j| q[(i, j)] * v[j - k]).sum::<f64>() * 2.0 / vnorm2;
            for j in k..m {
                q[(i, j)] -= s * v[j - k];
            }
        }
    }
    for i in 0..m {
        for j in 0..n.min(i) {
            r[(i, j)] = 0.0;
        }
    }
    (q, r)
}

/// Orthonormal nullspace basis `V` of a full-row-rank `A` and the minimum-norm
/// solution `v̄` of `A v = b`.
pub fn nullspace_and_particular(a: &DenseMatrix, b: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
    let (m, n) = a.shape();
    check_len("b", b.len(), m)?;
    if m == 0 {
        return Ok((DenseMatrix::identity(n), vec![0.0; n]));
    }
    if m > n {
        return Err(Error::RankDeficient { rank: n, expected: m });
    }
    let (q, r) = householder_qr(&a.transpose());
    let diag_max = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let rank = (0..m).filter(|&i| r[(i, i)].abs() > RANK_TOL * diag_max).count();
    if diag_max == 0.0 || rank < m {
        return Err(Error::RankDeficient { rank: if diag_max == 0.0 { 0 } else { rank }, expected: m });
    }
    // Aᵀ = Q₁ R₁  =>  A v̄ = R₁ᵀ Q₁ᵀ v̄ = b, with v̄ = Q₁ y and R₁ᵀ y = b.
    let mut y = vec![0.0; m];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= r[(k, i)] * y[k];
        }
        y[i] = s / r[(i, i)];
    }
    let mut v_bar = vec![0.0; n];
    for (k, &yk) in y.iter().enumerate() {
        for i in 0..n {
            v_bar[i] += q[(i, k)] * yk;
        }
    }
    let v = q.select_cols(&(m..n).collect::<Vec<_>>());
    Ok((v, v_bar))
}

/// Orthonormal basis (as columns) of the span of the given vectors, with
/// relative rank threshold `tol`. Modified Gram-Schmidt with reorthogonalization.
pub fn orthonormal_span(vectors: &[Vec<f64>], dim: usize, tol: f64) -> DenseMatrix {
    let scale = vectors.iter().map(|v| super::matrix::norm(v)).fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                super::matrix::axpy(-c, b, &mut w);
            }
        }
        let nw = super::matrix::norm(&w);
        if nw > tol * scale.max(f64::MIN_POSITIVE) && nw > 0.0 {
            basis.push(w.iter().map(|x| x / nw).collect());
        }
    }
    let mut out = DenseMatrix::zeros(dim, basis.len());
    for (j, b) in basis.iter().enumerate() {
        for i in 0..dim {
            out[(i, j)] = b[i];
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of the span of `vectors`.
pub fn orthogonal_complement(vectors: &[Vec<f64>], dim: usize, tol: f64) -> DenseMatrix {
    let span = orthonormal_span(vectors, dim, tol);
    let mut all: Vec<Vec<f64>> = (0..span.cols()).map(|j| span.column(j)).collect();
    let k = all.len();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        all.push(e);
    }
    let full = orthonormal_span(&all, dim, 1e-8);
    full.select_cols(&(k..full.cols()).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn random(rows: usize, cols: usize, seed: &mut u64) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| lcg(seed)).collect();
        DenseMatrix::from_row_major(rows, cols, data).unwrap()
    }

    #[test]
    fn one_row_nullspace_is_the_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -1.0]], 2).unwrap();
        let (v, v_bar) = nullspace_and_particular(&a, &[0.0]).unwrap();
        assert_eq!(v.shape(), (2, 1));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v[(0, 0)].abs() - s).abs() < 1e-14);
        assert!((v[(0, 0)] - v[(1, 0)]).abs() < 1e-14);
        assert!(v_bar.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn square_identity_has_empty_nullspace() {
        let a = DenseMatrix::identity(3);
        let (v, v_bar) = nullspace_and_particular(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.shape(), (3, 0));
        for (x, y) in v_bar.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn random_wide_matrix_residuals() {
        let mut seed = 11;
        let a = random(3, 7, &mut seed);
        let b: Vec<f64> = (0..3).map(|_| lcg(&mut seed)).collect();
        let (v, v_bar) = nullspace_and_particular(&a, &b).unwrap();
        assert_eq!(v.cols(), 4);
        assert!(a.matmul(&v).frobenius_norm() <= 1e-10 * (1.0 + a.frobenius_norm()));
        let r = a.matvec(&v_bar);
        assert!(r.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-10));
        let vtv = v.transpose().matmul(&v);
        assert!(vtv.sub(&DenseMatrix::identity(4)).frobenius_norm() < 1e-10);
        // minimum norm: v̄ orthogonal to the nullspace
        assert!(v.tmatvec(&v_bar).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn rank_deficient_rows_are_rejected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]], 3).unwrap();
        assert!(matches!(
            nullspace_and_particular(&a, &[0.0, 0.0]),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn cholesky_and_lu_solve() {
        let mut seed = 5;
        let g = random(5, 5, &mut seed);
        let s = g.transpose().matmul(&g).add(&DenseMatrix::identity(5));
        let b: Vec<f64> = (0..5).map(|_| lcg(&mut seed)).collect();
        let x1 = Cholesky::new(&s).unwrap().solve(&b);
        let x2 = Lu::new(&s).unwrap().solve(&b);
        let r = s.matvec(&x1);
        for i in 0..5 {
            assert!((r[i] - b[i]).abs() < 1e-12);
            assert!((x1[i] - x2[i]).abs() < 1e-12);
        }
        let inv = Lu::new(&g).unwrap().inverse();
        assert!(g.matmul(&inv).sub(&DenseMatrix::identity(5)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_semidefinite() {
        let s = DenseMatrix::from_diagonal(&[1.0, 0.0]);
        assert_eq!(Cholesky::new(&s).unwrap_err(), Error::NotPositiveDefinite);
    }

    #[test]
    fn complement_is_orthogonal() {
        let vs = vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0], vec![2.0, 1.0, 0.0]];
        let c = orthogonal_complement(&vs, 3, 1e-10);
        assert_eq!(c.cols(), 1);
        assert!((c[(2, 0)].abs() - 1.0).abs() < 1e-14);
    }
}

//! Data of the proximal KKT operator for a fixed scaling `ξ`:
//!
//! ```text
//! R = V (VᵀHV)⁻¹ Vᵀ
//! M = ξ (ξR − I)⁻¹ R
//! c = (ξR − I)⁻¹ (R(h + H v̄) − v̄)
//! W = Q diag(½Λ⁻¹, −I) Qᵀ        with M = Q diag(Λ, 0) Qᵀ
//! ```
//!
//! `ξ` is admissible when it exceeds the reciprocal of the smallest non-zero
//! eigenvalue of `R`, which equals the largest eigenvalue of `VᵀHV`.

use crate::error::{check_len, Error, Result};
use crate::numerics::linalg::{Cholesky, Lu};
use crate::numerics::{sym_eigendecomposition, DenseMatrix};
use crate::problem::ConsensusProblem;

/// Relative threshold separating the non-zero eigenvalues of `M` from the zero block.
pub const EIG_RANK_TOL: f64 = 1e-9;
/// Relative margin by which `ξ` must exceed its lower bound.
pub const XI_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OperatorData {
    pub xi: f64,
    pub r: DenseMatrix,
    pub m: DenseMatrix,
    pub c: Vec<f64>,
    pub w: DenseMatrix,
    /// Eigenvectors of `M` (columns), ordered like `lambdas`.
    pub q: DenseMatrix,
    /// Eigenvalues of `M`, descending.
    pub lambdas: Vec<f64>,
    pub rank: usize,
    /// `(ξR − I)⁻¹`.
    pub kinv: DenseMatrix,
    /// Smallest admissible `ξ` (exclusive).
    pub min_admissible: f64,
}

/// `λ_max(VᵀHV)`, the lower bound on admissible `ξ`.
pub fn min_admissible_xi(problem: &ConsensusProblem) -> Result<f64> {
    let v = problem.nullspace();
    if v.cols() == 0 {
        return Ok(0.0);
    }
    let vhv = v.transpose().matmul(&problem.hessian().matmul(v));
    let mut vhv = vhv;
    vhv.symmetrize();
    let e = sym_eigendecomposition(&vhv)?;
    Ok(e.values[0])
}

pub fn build_operator(problem: &ConsensusProblem, xi: f64) -> Result<OperatorData> {
    let n = problem.n();
    let v = problem.nullspace();
    let rank = v.cols();
    let min_admissible = min_admissible_xi(problem)?;
    if !(xi.is_finite() && xi > 0.0 && xi > min_admissible * (1.0 + XI_MARGIN)) {
        let hessian_bound = if problem.from_mpc() {
            Some(sym_eigendecomposition(problem.hessian())?.values[0])
        } else {
            None
        };
        return Err(Error::XiTooSmall { xi, min_admissible, hessian_bound });
    }

    let r = if rank == 0 {
        DenseMatrix::zeros(n, n)
    } else {
        let mut vhv = v.transpose().matmul(&problem.hessian().matmul(v));
        vhv.symmetrize();
        let inner = Cholesky::new(&vhv)?.inverse();
        let mut r = v.matmul(&inner).matmul(&v.transpose());
        r.symmetrize();
        r
    };

    let shifted = r.scaled(xi).sub(&DenseMatrix::identity(n));
    let kinv = Lu::new(&shifted)?.inverse();
    let mut m = kinv.matmul(&r).scaled(xi);
    m.symmetrize();

    let eig = sym_eigendecomposition(&m)?;
    let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let found = eig.values.iter().filter(|&&l| l > EIG_RANK_TOL * scale).count();
    if found != rank {
        return Err(Error::RankMismatch { found, expected: rank });
    }
    let mut diag = vec![-1.0; n];
    for i in 0..rank {
        diag[i] = 0.5 / eig.values[i];
    }
    let mut qd = eig.vectors.clone();
    for i in 0..n {
        for j in 0..n {
            qd[(i, j)] *= diag[j];
        }
    }
    let mut w = qd.matmul(&eig.vectors.transpose());
    w.symmetrize();

    let mut op = OperatorData {
        xi,
        r,
        m,
        c: vec![0.0; n],
        w,
        q: eig.vectors,
        lambdas: eig.values,
        rank,
        kinv,
        min_admissible,
    };
    op.c = op.affine_term(problem, problem.linear_cost())?;
    Ok(op)
}

impl OperatorData {
    fn affine_term(&self, problem: &ConsensusProblem, h: &[f64]) -> Result<Vec<f64>> {
        let n = problem.n();
        check_len("h", h.len(), n)?;
        let vb = problem.particular();
        let mut t = problem.hessian().matvec(vb);
        t.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        let mut rt = self.r.matvec(&t);
        rt.iter_mut().zip(vb).for_each(|(a, b)| *a -= b);
        Ok(self.kinv.matvec(&rt))
    }

    /// Same operator with `c` recomputed for a new linear cost.
    pub fn update_linear_cost(&self, problem: &ConsensusProblem, h: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.c = self.affine_term(problem, h)?;
        Ok(out)
    }

    /// Smallest eigenvalue of `M` above the rank threshold.
    pub fn lambda_min_positive(&self) -> Option<f64> {
        self.rank.checked_sub(1).map(|i| self.lambdas[i])
    }

    /// `z = M s + c`.
    pub fn affine_map(&self, s: &[f64]) -> Vec<f64> {
        let mut z = self.m.matvec(s);
        z.iter_mut().zip(&self.c).for_each(|(a, b)| *a += b);
        z
    }
}

/// Minimizer of the objective over `{Az = b}`, returned only when it lies in `Z(θ)`.
pub fn trivial_solution(problem: &ConsensusProblem, theta: &[f64], op: &OperatorData) -> Result<Option<Vec<f64>>> {
    let z = unconstrained_minimizer(problem, op);
    Ok(problem.contains_z(theta, &z, crate::polyhedra::MEMBERSHIP_TOL)?.then_some(z))
}

/// `v̄ − R(h + H v̄)`.
pub fn unconstrained_minimizer(problem: &ConsensusProblem, op: &OperatorData) -> Vec<f64> {
    let vb = problem.particular();
    let mut t = problem.hessian().matvec(vb);
    t.iter_mut().zip(problem.linear_cost()).for_each(|(a, b)| *a += b);
    let rt = op.r.matvec(&t);
    vb.iter().zip(&rt).map(|(a, b)| a - b).collect()
}

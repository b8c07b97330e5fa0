use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Eigendecomposition `S = Q diag(λ) Qᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: DenseMatrix,
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations on a symmetric matrix.
pub fn sym_eigendecomposition(s: &DenseMatrix) -> Result<SymEigen> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch("eigendecomposition needs a square matrix".into()));
    }
    let asym = s.asymmetry();
    let fro = s.frobenius_norm();
    if asym > 1e-12 * fro.max(f64::MIN_POSITIVE) && asym > 0.0 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = s.rows();
    let mut a = s.clone();
    a.symmetrize();
    let mut q = DenseMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-14 * fro.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[(p, r)];
                if apr.abs() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let arr = a[(r, r)];
                // Rutishauser's stable rotation formulas.
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                let tau = sn / (1.0 + c);

                a[(p, p)] = app - t * apr;
                a[(r, r)] = arr + t * apr;
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for k in 0..n {
                    if k == p || k == r {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akr = a[(k, r)];
                    let new_kp = akp - sn * (akr + tau * akp);
                    let new_kr = akr + sn * (akp - tau * akr);
                    a[(k, p)] = new_kp;
                    a[(p, k)] = new_kp;
                    a[(k, r)] = new_kr;
                    a[(r, k)] = new_kr;
                }
                for k in 0..n {
                    let qkp = q[(k, p)];
                    let qkr = q[(k, r)];
                    q[(k, p)] = qkp - sn * (qkr + tau * qkp);
                    q[(k, r)] = qkr + sn * (qkp - tau * qkr);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diagonal();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = q.select_cols(&order);
    Ok(SymEigen { vectors, values })
}

impl SymEigen {
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            for j in 0..n {
                scaled[(i, j)] *= self.values[j];
            }
        }
        scaled.matmul(&self.vectors.transpose())
    }
}

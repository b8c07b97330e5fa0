//! Dense linear algebra, eigendecomposition, QP and LP building blocks.

pub mod eigen;
pub mod linalg;
pub mod lp;
pub mod matrix;
pub mod qp;

pub use eigen::{sym_eigendecomposition, SymEigen};
pub use linalg::{Cholesky, Lu};
pub use lp::{Lp, LpOutcome, RowKind};
pub use matrix::{axpy, dist, dot, norm, norm_inf, DenseMatrix};
pub use qp::{solve_convex_qp, QpSolution, QpSolver, QpStatus};

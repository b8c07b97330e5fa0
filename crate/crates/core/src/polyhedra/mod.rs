//! Parametric convex polyhedra `{z : G z = Gθ θ + g0, F z ≤ Fθ θ + f0}`.

pub mod fm;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{dot, DenseMatrix, QpSolver, QpStatus};

pub use fm::{cone_contains, fm_project_cone, ConeHrep, GeneratorCone, FM_ROW_CAP};

/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    param_dim: usize,
    g: DenseMatrix,
    g0: Vec<f64>,
    gtheta: DenseMatrix,
    f: DenseMatrix,
    f0: Vec<f64>,
    ftheta: DenseMatrix,
}

fn fit(m: DenseMatrix, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix> {
    if m.rows() == 0 && rows == 0 {
        return Ok(DenseMatrix::zeros(0, cols));
    }
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

impl Polyhedron {
    /// `gtheta`/`ftheta` may be `None` for parameter-free rows.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        param_dim: usize,
        g: DenseMatrix,
        g0: Vec<f64>,
        gtheta: Option<DenseMatrix>,
        f: DenseMatrix,
        f0: Vec<f64>,
        ftheta: Option<DenseMatrix>,
    ) -> Result<Self> {
        let pe = g0.len();
        let pi = f0.len();
        let g = fit(g, pe, dim, "G")?;
        let f = fit(f, pi, dim, "F")?;
        let gtheta = fit(gtheta.unwrap_or_else(|| DenseMatrix::zeros(pe, param_dim)), pe, param_dim, "Gtheta")?;
        let ftheta = fit(ftheta.unwrap_or_else(|| DenseMatrix::zeros(pi, param_dim)), pi, param_dim, "Ftheta")?;
        if g0.iter().chain(&f0).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("polyhedron offsets must be finite".into()));
        }
        Ok(Self { dim, param_dim, g, g0, gtheta, f, f0, ftheta })
    }

    /// Parameter-free polyhedron.
    pub fn fixed(dim: usize, g: DenseMatrix, g0: Vec<f64>, f: DenseMatrix, f0: Vec<f64>) -> Result<Self> {
        Self::new(dim, 0, g, g0, None, f, f0, None)
    }

    /// The whole space.
    pub fn free(dim: usize, param_dim: usize) -> Self {
        Self {
            dim,
            param_dim,
            g: DenseMatrix::zeros(0, dim),
            g0: Vec::new(),
            gtheta: DenseMatrix::zeros(0, param_dim),
            f: DenseMatrix::zeros(0, dim),
            f0: Vec::new(),
            ftheta: DenseMatrix::zeros(0, param_dim),
        }
    }

    /// Same rows with a different parameter dimension; only valid for parameter-free rows.
    pub fn with_param_dim(mut self, p: usize) -> Result<Self> {
        if self.gtheta.max_abs() != 0.0 || self.ftheta.max_abs() != 0.0 {
            return Err(Error::InvalidInput("cannot resize a parametric polyhedron".into()));
        }
        self.gtheta = DenseMatrix::zeros(self.g0.len(), p);
        self.ftheta = DenseMatrix::zeros(self.f0.len(), p);
        self.param_dim = p;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn num_eq(&self) -> usize {
        self.g0.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.f0.len()
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.g
    }

    pub fn g0(&self) -> &[f64] {
        &self.g0
    }

    pub fn gtheta(&self) -> &DenseMatrix {
        &self.gtheta
    }

    pub fn f(&self) -> &DenseMatrix {
        &self.f
    }

    pub fn f0(&self) -> &[f64] {
        &self.f0
    }

    pub fn ftheta(&self) -> &DenseMatrix {
        &self.ftheta
    }

    pub fn instantiate(&self, theta: &[f64]) -> Result<FixedPolyhedron> {
        check_len("theta", theta.len(), self.param_dim)?;
        let mut g = self.gtheta.matvec(theta);
        g.iter_mut().zip(&self.g0).for_each(|(a, b)| *a += b);
        let mut f = self.ftheta.matvec(theta);
        f.iter_mut().zip(&self.f0).for_each(|(a, b)| *a += b);
        Ok(FixedPolyhedron { dim: self.dim, g_mat: self.g.clone(), g, f_mat: self.f.clone(), f })
    }
}

#[derive(Serialize, Deserialize)]
struct PolyhedronJson {
    #[serde(rename = "G", default)]
    g: Option<DenseMatrix>,
    #[serde(default)]
    g0: Vec<f64>,
    #[serde(rename = "Gtheta", default)]
    gtheta: Option<DenseMatrix>,
    #[serde(rename = "F", default)]
    f: Option<DenseMatrix>,
    #[serde(default)]
    f0: Vec<f64>,
    #[serde(rename = "Ftheta", default)]
    ftheta: Option<DenseMatrix>,
}

impl Polyhedron {
    /// Reads the JSON layout `{G, g0, Gtheta, F, f0, Ftheta}`; missing blocks mean no rows.
    pub fn from_json_value(v: &serde_json::Value, dim: usize, param_dim: usize) -> Result<Self> {
        let raw: PolyhedronJson =
            serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let g = raw.g.unwrap_or_else(|| DenseMatrix::zeros(0, dim));
        let f = raw.f.unwrap_or_else(|| DenseMatrix::zeros(0, dim));
        Self::new(dim, param_dim, g, raw.g0, raw.gtheta, f, raw.f0, raw.ftheta)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(PolyhedronJson {
            g: Some(self.g.clone()),
            g0: self.g0.clone(),
            gtheta: Some(self.gtheta.clone()),
            f: Some(self.f.clone()),
            f0: self.f0.clone(),
            ftheta: Some(self.ftheta.clone()),
        })
        .expect("polyhedron serializes")
    }
}

/// A polyhedron with the parameter substituted. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPolyhedron {
    dim: usize,
    g_mat: DenseMatrix,
    g: Vec<f64>,
    f_mat: DenseMatrix,
    f: Vec<f64>,
}

impl FixedPolyhedron {
    pub fn new(g_mat: DenseMatrix, g: Vec<f64>, f_mat: DenseMatrix, f: Vec<f64>, dim: usize) -> Result<Self> {
        let g_mat = fit(g_mat, g.len(), dim, "G")?;
        let f_mat = fit(f_mat, f.len(), dim, "F")?;
        Ok(Self { dim, g_mat, g, f_mat, f })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eq_matrix(&self) -> &DenseMatrix {
        &self.g_mat
    }

    pub fn eq_rhs(&self) -> &[f64] {
        &self.g
    }

    pub fn ineq_matrix(&self) -> &DenseMatrix {
        &self.f_mat
    }

    pub fn ineq_rhs(&self) -> &[f64] {
        &self.f
    }

    /// Euclidean projection of `s`; `None` when the polyhedron is empty.
    pub fn project(&self, s: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        self.project_with(&QpSolver::identity(self.dim), s)
    }

    /// As [`FixedPolyhedron::project`] with a caller-provided identity solver.
    pub fn project_with(&self, solver: &QpSolver, s: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        check_len("point", s.len(), self.dim)?;
        let q: Vec<f64> = s.iter().map(|x| -x).collect();
        let sol = solver.solve(&q, &self.g_mat, &self.g, &self.f_mat, &self.f)?;
        if sol.status == QpStatus::Infeasible {
            return Ok(None);
        }
        let d = crate::numerics::dist(s, &sol.z);
        Ok(Some((sol.z, d)))
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> Result<bool> {
        check_len("point", z.len(), self.dim)?;
        Ok(self.max_violation(z) <= tol)
    }

    /// `max(‖Gz − g‖∞, max(Fz − f))`, clipped below at zero.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for i in 0..self.g.len() {
            v = v.max((dot(self.g_mat.row(i), z) - self.g[i]).abs());
        }
        for i in 0..self.f.len() {
            v = v.max(dot(self.f_mat.row(i), z) - self.f[i]);
        }
        v
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.project(&vec![0.0; self.dim])?.is_none())
    }
}

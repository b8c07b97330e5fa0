//! Krasnoselskij iteration on the proximal KKT operator, and the ξ-proximal KKT
//! certificate for candidate solutions.
//!
//! One iteration:
//!
//! ```text
//! z = M s + c
//! y = Π_Z(s)
//! s ← s − γ W (z − y)
//! ```
//!
//! stopping once `‖z − y‖ ≤ ε`. Multipliers are recovered as `λ = ξ(z − s)`.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::numerics::{dist, dot, norm};
use crate::operator::{unconstrained_minimizer, OperatorData};
use crate::polyhedra::MEMBERSHIP_TOL;
use crate::problem::ConsensusProblem;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub xi: f64,
    pub gamma: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    /// Initial iterate; zero when `None`.
    pub s0: Option<Vec<f64>>,
    pub divergence_factor: f64,
    /// Skip the check for an unconstrained minimizer inside `Z`.
    pub skip_trivial_check: bool,
}

impl SolverConfig {
    pub fn new(xi: f64) -> Self {
        Self {
            xi,
            gamma: 0.5,
            eps_tol: 1e-3,
            max_iter: 50_000,
            s0: None,
            divergence_factor: 1e6,
            skip_trivial_check: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::InvalidInput("eps_tol must be positive".into()));
        }
        if !(self.divergence_factor > 0.0) {
            return Err(Error::InvalidInput("divergence factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    TrivialGlobal,
    Converged,
    MaxIterations,
    Diverged,
    StageInfeasible,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        matches!(self, SolveStatus::TrivialGlobal | SolveStatus::Converged)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::TrivialGlobal => "trivial_global",
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::Diverged => "diverged",
            SolveStatus::StageInfeasible => "stage_infeasible",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// The iterate from which `z` and `y` were computed.
    pub s: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// `‖z_j − y_j‖` for every iteration.
    pub residual_trace: Vec<f64>,
    /// Objective at `y`.
    pub objective: f64,
    /// Winning component per stage at the last projection.
    pub active: Vec<usize>,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_trace.last().copied().unwrap_or(0.0)
    }
}

pub fn solve(problem: &ConsensusProblem, theta: &[f64], op: &OperatorData, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let n = problem.n();
    if (op.xi - cfg.xi).abs() > 1e-12 * cfg.xi.abs().max(1.0) {
        return Err(Error::InvalidInput(format!("operator built for xi = {}, config has {}", op.xi, cfg.xi)));
    }
    check_len("operator", op.c.len(), n)?;
    let zi = problem.instantiate(theta)?;

    if !cfg.skip_trivial_check {
        let z = unconstrained_minimizer(problem, op);
        if zi.contains(&z, MEMBERSHIP_TOL)? {
            let (_, active) = zi.project(&z)?;
            return Ok(SolveResult {
                status: SolveStatus::TrivialGlobal,
                objective: problem.objective(&z),
                y: z.clone(),
                s: z.clone(),
                lambda: vec![0.0; n],
                z,
                iterations: 0,
                residual_trace: Vec::new(),
                active,
            });
        }
    }

    let mut s = match &cfg.s0 {
        Some(s0) => {
            check_len("s0", s0.len(), n)?;
            s0.clone()
        }
        None => vec![0.0; n],
    };
    let s0_norm = norm(&s);
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut active = Vec::with_capacity(problem.stages().len());
    let mut trace = Vec::new();
    let mut first_residual = None;

    let finish = |status, z: Vec<f64>, y: Vec<f64>, s: Vec<f64>, trace: Vec<f64>, active: Vec<usize>| {
        let lambda = z.iter().zip(&s).map(|(a, b)| cfg.xi * (a - b)).collect();
        SolveResult {
            status,
            objective: problem.objective(&y),
            iterations: trace.len(),
            z,
            y,
            s,
            lambda,
            residual_trace: trace,
            active,
        }
    };

    for _ in 0..cfg.max_iter {
        op.m.matvec_into(&s, &mut z);
        z.iter_mut().zip(&op.c).for_each(|(a, b)| *a += b);
        if let Err(e) = zi.project_into(&s, &mut y, &mut active) {
            return match e {
                Error::StageInfeasible(_) => {
                    Ok(finish(SolveStatus::StageInfeasible, z, s.clone(), s, trace, active))
                }
                other => Err(other),
            };
        }
        for i in 0..n {
            diff[i] = z[i] - y[i];
        }
        let res = norm(&diff);
        trace.push(res);
        let r0 = *first_residual.get_or_insert(res);
        let s_norm = norm(&s);
        if !res.is_finite()
            || !s_norm.is_finite()
            || res > cfg.divergence_factor * (1.0 + r0)
            || s_norm > cfg.divergence_factor * (1.0 + s0_norm)
        {
            return Ok(finish(SolveStatus::Diverged, z, y, s, trace, active));
        }
        if res <= cfg.eps_tol {
            return Ok(finish(SolveStatus::Converged, z, y, s, trace, active));
        }
        op.w.matvec_into(&diff, &mut step);
        for i in 0..n {
            s[i] -= cfg.gamma * step[i];
        }
    }
    // z and y were computed from the iterate before the last update.
    for i in 0..n {
        s[i] += cfg.gamma * step[i];
    }
    Ok(finish(SolveStatus::MaxIterations, z, y, s, trace, active))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktCertificate {
    /// `‖Vᵀ(Hz + h − λ)‖ + ‖Az − b‖`.
    pub stationarity: f64,
    /// `‖z − Π_Z(z − λ/ξ)‖`.
    pub projection: f64,
    pub pass: bool,
}

/// Checks the ξ-proximal KKT conditions; `tol` applies to both residuals.
pub fn verify_proximal_kkt(
    problem: &ConsensusProblem,
    theta: &[f64],
    z: &[f64],
    lambda: &[f64],
    xi: f64,
    tol: f64,
) -> Result<KktCertificate> {
    let n = problem.n();
    check_len("z", z.len(), n)?;
    check_len("lambda", lambda.len(), n)?;
    let mut g = problem.hessian().matvec(z);
    for i in 0..n {
        g[i] += problem.linear_cost()[i] - lambda[i];
    }
    let v = problem.nullspace();
    let vt_g = v.tmatvec(&g);
    let stationarity = norm(&vt_g) + problem.equality_residual(z);
    let shifted: Vec<f64> = z.iter().zip(lambda).map(|(a, l)| a - l / xi).collect();
    let (p, _) = problem.project_z(theta, &shifted)?;
    let projection = dist(z, &p);
    Ok(KktCertificate { stationarity, projection, pass: stationarity <= tol && projection <= tol })
}

/// `‖s − ((1−γ)s + γ T(s))‖ = γ‖W(Ms + c − Π_Z(s))‖`.
pub fn fixed_point_gap(
    problem: &ConsensusProblem,
    theta: &[f64],
    op: &OperatorData,
    gamma: f64,
    s: &[f64],
) -> Result<f64> {
    let z = op.affine_map(s);
    let (y, _) = problem.project_z(theta, s)?;
    let d: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
    Ok(gamma * norm(&op.w.matvec(&d)))
}

/// Spectral norm of the symmetric `W` from the operator's eigenvalues.
pub fn w_norm(op: &OperatorData) -> f64 {
    let lmin = op.lambda_min_positive().unwrap_or(f64::INFINITY);
    (0.5 / lmin).max(1.0)
}

/// `⟨a, b⟩` of two recovered multipliers, exposed for diagnostics.
pub fn multiplier_inner(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b)
}

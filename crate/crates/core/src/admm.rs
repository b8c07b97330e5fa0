//! Non-convex ADMM on the splitting `min f(z) + ι_Z(y)  s.t. z = y`, scaled dual form.
//!
//! The returned [`SolveResult`] maps the scaled dual `u` onto the fixed-point
//! conventions: `s = z + u` and `λ = −ρu`, so `λ = ρ(z − s)` as for the
//! fixed-point solver with `ξ = ρ`.

use crate::error::{check_len, Error, Result};
use crate::numerics::linalg::Lu;
use crate::numerics::{dist, DenseMatrix};
use crate::problem::ConsensusProblem;
use crate::solver::{SolveResult, SolveStatus};

#[derive(Debug, Clone)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps_tol: f64,
    pub max_iter: usize,
    pub y0: Option<Vec<f64>>,
    pub lambda0: Option<Vec<f64>>,
}

impl AdmmConfig {
    pub fn new(rho: f64) -> Self {
        Self { rho, eps_tol: 1e-3, max_iter: 10_000, y0: None, lambda0: None }
    }
}

/// Cached factorization of `[[H + ρI, Aᵀ], [A, 0]]`.
#[derive(Debug, Clone)]
pub struct ZUpdate {
    n: usize,
    rho: f64,
    kkt: DenseMatrix,
    lu: Lu,
}

impl ZUpdate {
    pub fn new(problem: &ConsensusProblem, rho: f64) -> Result<Self> {
        let n = problem.n();
        let a = problem.a();
        let m = a.rows();
        let mut kkt = DenseMatrix::zeros(n + m, n + m);
        kkt.set_block(0, 0, &problem.hessian().add(&DenseMatrix::identity(n).scaled(rho)));
        kkt.set_block(0, n, &a.transpose());
        kkt.set_block(n, 0, a);
        let lu = Lu::new(&kkt)?;
        Ok(Self { n, rho, kkt, lu })
    }

    fn rhs(&self, problem: &ConsensusProblem, target: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = target.iter().zip(problem.linear_cost()).map(|(t, h)| self.rho * t - h).collect();
        r.extend_from_slice(problem.b());
        r
    }

    /// Minimizer of `½zᵀHz + hᵀz + (ρ/2)‖z − target‖²` over `{Az = b}`.
    pub fn solve(&self, problem: &ConsensusProblem, target: &[f64]) -> Vec<f64> {
        let mut sol = self.lu.solve(&self.rhs(problem, target));
        sol.truncate(self.n);
        sol
    }

    /// Infinity-norm residual of the KKT system at the solution for `target`.
    pub fn kkt_residual(&self, problem: &ConsensusProblem, target: &[f64]) -> f64 {
        let rhs = self.rhs(problem, target);
        let sol = self.lu.solve(&rhs);
        let lhs = self.kkt.matvec(&sol);
        lhs.iter().zip(&rhs).fold(0.0f64, |a, (l, r)| a.max((l - r).abs()))
    }
}

pub fn solve_admm(problem: &ConsensusProblem, theta: &[f64], cfg: &AdmmConfig) -> Result<SolveResult> {
    if !(cfg.rho > 0.0 && cfg.rho.is_finite()) {
        return Err(Error::InvalidInput(format!("rho must be positive, got {}", cfg.rho)));
    }
    if !(cfg.eps_tol > 0.0) {
        return Err(Error::InvalidInput("eps_tol must be positive".into()));
    }
    let n = problem.n();
    let zi = problem.instantiate(theta)?;
    let zu = ZUpdate::new(problem, cfg.rho)?;
    let init = |v: &Option<Vec<f64>>, what| -> Result<Vec<f64>> {
        match v {
            Some(v) => {
                check_len(what, v.len(), n)?;
                Ok(v.clone())
            }
            None => Ok(vec![0.0; n]),
        }
    };
    let mut y = init(&cfg.y0, "y0")?;
    let mut u = init(&cfg.lambda0, "lambda0")?;
    let mut z = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut target = vec![0.0; n];
    let mut active = Vec::with_capacity(problem.stages().len());
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;

    for _ in 0..cfg.max_iter {
        for i in 0..n {
            target[i] = y[i] - u[i];
        }
        z = zu.solve(problem, &target);
        for i in 0..n {
            target[i] = z[i] + u[i];
        }
        match zi.project_into(&target, &mut y_new, &mut active) {
            Ok(()) => {}
            Err(Error::StageInfeasible(_)) => {
                status = SolveStatus::StageInfeasible;
                break;
            }
            Err(e) => return Err(e),
        }
        let primal = dist(&z, &y_new);
        let dual = cfg.rho * dist(&y_new, &y);
        for i in 0..n {
            u[i] += z[i] - y_new[i];
        }
        std::mem::swap(&mut y, &mut y_new);
        trace.push(primal);
        if !primal.is_finite() || !dual.is_finite() || u.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::Diverged;
            break;
        }
        if primal <= cfg.eps_tol && dual <= cfg.eps_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    let s: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a + b).collect();
    let lambda = u.iter().map(|v| -cfg.rho * v).collect();
    Ok(SolveResult {
        status,
        objective: problem.objective(&y),
        iterations: trace.len(),
        z,
        y,
        s,
        lambda,
        residual_trace: trace,
        active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::{build_consensus, two_region_example};
    use crate::numerics::{solve_convex_qp, QpStatus};
    use crate::polyhedra::Polyhedron;
    use crate::problem::StageSet;
    use crate::solver::verify_proximal_kkt;

    fn convex_problem() -> ConsensusProblem {
        let d = 3;
        let mut f = DenseMatrix::zeros(2 * d, d);
        for i in 0..d {
            f[(2 * i, i)] = 1.0;
            f[(2 * i + 1, i)] = -1.0;
        }
        let comp = Polyhedron::fixed(d, DenseMatrix::zeros(0, d), vec![], f, vec![0.5; 2 * d]).unwrap();
        let hess = DenseMatrix::from_rows(
            &[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 3.0]],
            3,
        )
        .unwrap();
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]], 3).unwrap();
        ConsensusProblem::new(hess, vec![2.0, -3.0, 1.0], a, vec![0.2], vec![StageSet::new(3, vec![comp]).unwrap()], 0)
            .unwrap()
    }

    fn oracle(pr: &ConsensusProblem) -> Vec<f64> {
        let zi = pr.instantiate(&[]).unwrap();
        let (g, gr, f, fr) = pr.assignment_constraints(&zi, &[0]).unwrap();
        let sol = solve_convex_qp(pr.hessian(), pr.linear_cost(), &g, &gr, &f, &fr).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        sol.z
    }

    #[test]
    fn convex_instance_matches_oracle_and_is_rho_invariant() {
        let pr = convex_problem();
        let best = oracle(&pr);
        let mut limits = Vec::new();
        for rho in [2.0, 20.0] {
            let mut cfg = AdmmConfig::new(rho);
            cfg.eps_tol = 1e-10;
            cfg.max_iter = 100_000;
            let res = solve_admm(&pr, &[], &cfg).unwrap();
            assert_eq!(res.status, SolveStatus::Converged);
            assert!(dist(&res.z, &best) < 1e-6, "{:?} vs {:?}", res.z, best);
            let cert = verify_proximal_kkt(&pr, &[], &res.z, &res.lambda, rho, 1e-8).unwrap();
            assert!(cert.pass, "{cert:?}");
            limits.push(res.z);
        }
        assert!(dist(&limits[0], &limits[1]) < 1e-5);
    }

    #[test]
    fn z_update_solves_kkt_system() {
        let pr = build_consensus(&two_region_example(10).unwrap()).unwrap();
        let zu = ZUpdate::new(&pr, 10.0).unwrap();
        let target: Vec<f64> = (0..pr.n()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        assert!(zu.kkt_residual(&pr, &target) <= 1e-9);
        let z = zu.solve(&pr, &target);
        assert!(pr.equality_residual(&z) <= 1e-9);
    }

    #[test]
    fn rejects_nonpositive_rho() {
        let pr = convex_problem();
        assert!(solve_admm(&pr, &[], &AdmmConfig::new(0.0)).is_err());
    }
}

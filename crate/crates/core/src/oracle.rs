//! Exact global solutions by enumerating region assignments, and closed-loop
//! receding-horizon simulation.

use rayon::prelude::*;
use serde::Serialize;

use crate::admm::{solve_admm, AdmmConfig};
use crate::error::{check_len, Error, Result};
use crate::mpc::{build_consensus, PwaSystem};
use crate::numerics::{QpSolver, QpStatus};
use crate::operator::build_operator;
use crate::problem::{ConsensusProblem, InstantiatedZ};
use crate::solver::{solve, SolveStatus, SolverConfig};

pub const DEFAULT_CAP: u128 = 1_000_000;
/// Tolerance used by the plant to decide which region contains `(x, u)`.
pub const PLANT_REGION_TOL: f64 = 1e-7;

/// One component index per stage, zero-based.
pub type RegionAssignment = Vec<usize>;

#[derive(Debug, Clone, Serialize)]
pub struct GlobalSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub assignment: RegionAssignment,
    /// Assignments whose QP was solved (after the empty-component filter).
    pub qps_solved: usize,
}

/// Best objective over all region assignments; `Error::Infeasible` when none is feasible.
pub fn global_solve(problem: &ConsensusProblem, theta: &[f64], cap: u128) -> Result<GlobalSolution> {
    let count = problem.num_assignments();
    if count > cap {
        return Err(Error::TooManyCombinations { count, cap });
    }
    let zi = problem.instantiate(theta)?;
    let mut choices = Vec::with_capacity(zi.stages().len());
    for comps in zi.stages() {
        let mut keep = Vec::new();
        for (i, c) in comps.iter().enumerate() {
            if !c.is_empty()? {
                keep.push(i);
            }
        }
        if keep.is_empty() {
            return Err(Error::Infeasible("a stage set is empty for this parameter".into()));
        }
        choices.push(keep);
    }
    let total: usize = choices.iter().map(Vec::len).product();
    let qp = QpSolver::new(problem.hessian())?;

    let best = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<Option<(f64, RegionAssignment, Vec<f64>)>> {
            let assignment = decode(idx, &choices);
            Ok(solve_assignment(problem, &zi, &qp, &assignment)?.map(|(z, obj)| (obj, assignment, z)))
        })
        .try_reduce(|| None, |a, b| Ok(better(a, b)))?;

    match best {
        Some((objective, assignment, z)) => Ok(GlobalSolution { z, objective, assignment, qps_solved: total }),
        None => Err(Error::Infeasible("no region assignment is feasible".into())),
    }
}

/// Mixed-radix decoding with the first stage most significant, so index order is lexicographic.
fn decode(mut idx: usize, choices: &[Vec<usize>]) -> RegionAssignment {
    let mut out = vec![0; choices.len()];
    for k in (0..choices.len()).rev() {
        let m = choices[k].len();
        out[k] = choices[k][idx % m];
        idx /= m;
    }
    out
}

type Candidate = Option<(f64, RegionAssignment, Vec<f64>)>;

fn better(a: Candidate, b: Candidate) -> Candidate {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

/// Convex QP for a fixed assignment; `None` if infeasible.
pub fn solve_assignment(
    problem: &ConsensusProblem,
    zi: &InstantiatedZ,
    qp: &QpSolver,
    assignment: &[usize],
) -> Result<Option<(Vec<f64>, f64)>> {
    let (g, gr, f, fr) = problem.assignment_constraints(zi, assignment)?;
    let sol = qp.solve(problem.linear_cost(), &g, &gr, &f, &fr)?;
    Ok(match sol.status {
        QpStatus::Optimal => {
            let obj = problem.objective(&sol.z);
            Some((sol.z, obj))
        }
        QpStatus::Infeasible => None,
    })
}

#[derive(Debug, Clone)]
pub enum Controller {
    FixedPoint { cfg: SolverConfig },
    Admm { cfg: AdmmConfig },
    /// Enumeration oracle, optionally on a shorter horizon than the system's.
    Oracle { horizon: Option<usize>, cap: u128 },
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::FixedPoint { .. } => "fixed_point",
            Controller::Admm { .. } => "admm",
            Controller::Oracle { .. } => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Solver(SolveStatus),
    Optimal,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Solver(s) => s.as_str(),
            StepStatus::Optimal => "optimal",
        }
    }

    pub fn is_success(self) -> bool {
        match self {
            StepStatus::Solver(s) => s.is_success(),
            StepStatus::Optimal => true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// `x_1 .. x_{T+1}`.
    pub states: Vec<Vec<f64>>,
    /// `u_1 .. u_T`.
    pub inputs: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub statuses: Vec<StepStatus>,
    pub iterations: Vec<usize>,
    pub solve_ms: Vec<f64>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

/// Receding-horizon simulation: solve at the current state, apply the first input,
/// advance the plant with the first-stage dynamics.
pub fn closed_loop(system: &PwaSystem, controller: &Controller, theta0: &[f64], steps: usize) -> Result<Trajectory> {
    check_len("initial state", theta0.len(), system.nx)?;
    let model = match controller {
        Controller::Oracle { horizon: Some(h), .. } => system.with_horizon(*h)?,
        _ => system.clone(),
    };
    let problem = build_consensus(&model)?;
    let op = match controller {
        Controller::FixedPoint { cfg } => Some(build_operator(&problem, cfg.xi)?),
        _ => None,
    };
    let iu = model.u_index(1);

    let mut traj = Trajectory {
        states: vec![theta0.to_vec()],
        inputs: Vec::new(),
        objectives: Vec::new(),
        statuses: Vec::new(),
        iterations: Vec::new(),
        solve_ms: Vec::new(),
    };
    for t in 0..steps {
        let x = traj.states[t].clone();
        let start = std::time::Instant::now();
        let (z, objective, status, iterations) = match controller {
            Controller::FixedPoint { cfg } => {
                let r = solve(&problem, &x, op.as_ref().expect("operator built"), cfg)?;
                (r.y, r.objective, StepStatus::Solver(r.status), r.iterations)
            }
            Controller::Admm { cfg } => {
                let r = solve_admm(&problem, &x, cfg)?;
                (r.y, r.objective, StepStatus::Solver(r.status), r.iterations)
            }
            Controller::Oracle { cap, .. } => {
                let g = global_solve(&problem, &x, *cap)?;
                (g.z, g.objective, StepStatus::Optimal, g.qps_solved)
            }
        };
        traj.solve_ms.push(start.elapsed().as_secs_f64() * 1e3);
        let u = z[iu..iu + system.nu].to_vec();
        let region = system.regions[0]
            .iter()
            .find(|r| r.contains(&x, &u, PLANT_REGION_TOL))
            .ok_or(Error::NoActiveRegion { step: t })?;
        traj.states.push(region.step(&x, &u));
        traj.inputs.push(u);
        traj.objectives.push(objective);
        traj.statuses.push(status);
        traj.iterations.push(iterations);
    }
    Ok(traj)
}

/// `‖X_a − X_b‖ / ‖X_b‖` over stacked state sequences.
pub fn relative_state_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (xa, xb) in a.states.iter().zip(&b.states) {
        for (p, q) in xa.iter().zip(xb) {
            num += (p - q) * (p - q);
            den += q * q;
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::{two_region_example, PwaRegion};
    use crate::numerics::{solve_convex_qp, DenseMatrix};
    use crate::polyhedra::Polyhedron;
    use crate::problem::tests::random_staged;

    #[test]
    fn two_stage_example_matches_hand_enumeration() {
        let pr = build_consensus(&two_region_example(2).unwrap()).unwrap();
        let theta = [1.0, 1.0];
        let g = global_solve(&pr, &theta, DEFAULT_CAP).unwrap();
        let zi = pr.instantiate(&theta).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..2 {
            for j in 0..2 {
                let (gm, gr, f, fr) = pr.assignment_constraints(&zi, &[i, j, 0]).unwrap();
                let sol = solve_convex_qp(pr.hessian(), pr.linear_cost(), &gm, &gr, &f, &fr).unwrap();
                if sol.status == QpStatus::Optimal {
                    best = best.min(pr.objective(&sol.z));
                }
            }
        }
        assert!((g.objective - best).abs() < 1e-10);
        assert!(pr.contains_z(&theta, &g.z, 1e-7).unwrap());
        assert!(pr.equality_residual(&g.z) < 1e-9);
    }

    #[test]
    fn single_region_is_one_qp() {
        let data: Vec<f64> = (0..50).map(|i| ((i * 31 % 23) as f64 - 11.0) / 11.0).collect();
        let pr = random_staged(&[3], &[1], &data);
        if let Ok(g) = global_solve(&pr, &[], DEFAULT_CAP) {
            assert_eq!(g.qps_solved, 1);
            let zi = pr.instantiate(&[]).unwrap();
            let (gm, gr, f, fr) = pr.assignment_constraints(&zi, &[0]).unwrap();
            let sol = solve_convex_qp(pr.hessian(), pr.linear_cost(), &gm, &gr, &f, &fr).unwrap();
            assert!(crate::numerics::dist(&sol.z, &g.z) < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let pr = build_consensus(&two_region_example(10).unwrap()).unwrap();
        assert!(matches!(global_solve(&pr, &[1.0, 1.0], 1000), Err(Error::TooManyCombinations { count: 1024, .. })));
    }

    #[test]
    fn decode_is_lexicographic() {
        let choices = vec![vec![0, 2], vec![1], vec![0, 1, 3]];
        let all: Vec<_> = (0..6).map(|i| decode(i, &choices)).collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(all[0], vec![0, 1, 0]);
        assert_eq!(all[5], vec![2, 1, 3]);
    }

    #[test]
    fn oracle_never_worse_than_fixed_point() {
        let pr = build_consensus(&two_region_example(4).unwrap()).unwrap();
        let theta = [1.0, 1.0];
        let g = global_solve(&pr, &theta, DEFAULT_CAP).unwrap();
        let op = build_operator(&pr, 20.0).unwrap();
        let mut cfg = SolverConfig::new(20.0);
        cfg.eps_tol = 1e-9;
        let r = solve(&pr, &theta, &op, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!(r.objective >= g.objective - 1e-7);
    }

    #[test]
    fn zero_dynamics_reach_origin_in_one_step() {
        let region = Polyhedron::fixed(
            2,
            DenseMatrix::zeros(0, 2),
            vec![],
            DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, -1.0]], 2).unwrap(),
            vec![1.0, 1.0],
        )
        .unwrap();
        let reg = PwaRegion::new(DenseMatrix::zeros(1, 1), DenseMatrix::zeros(1, 1), vec![0.0], region).unwrap();
        let sys = PwaSystem::time_invariant(vec![reg], DenseMatrix::identity(1), DenseMatrix::identity(1), 0.5, 3)
            .unwrap();
        let controllers = [
            Controller::FixedPoint { cfg: SolverConfig::new(10.0) },
            Controller::Admm { cfg: AdmmConfig::new(10.0) },
            Controller::Oracle { horizon: None, cap: DEFAULT_CAP },
        ];
        for c in &controllers {
            let traj = closed_loop(&sys, c, &[3.0], 2).unwrap();
            assert_eq!(traj.states.len(), 3);
            assert!(traj.states[1][0].abs() < 1e-12, "{}", c.name());
            assert!(traj.states[2][0].abs() < 1e-12);
        }
    }

    #[test]
    fn closed_loop_reports_missing_region() {
        let region = Polyhedron::fixed(
            2,
            DenseMatrix::zeros(0, 2),
            vec![],
            DenseMatrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], 2).unwrap(),
            vec![0.0, 1.0, 1.0],
        )
        .unwrap();
        let reg = PwaRegion::new(
            DenseMatrix::identity(1),
            DenseMatrix::identity(1),
            vec![-5.0],
            region,
        )
        .unwrap();
        let sys = PwaSystem::time_invariant(vec![reg], DenseMatrix::identity(1), DenseMatrix::identity(1), 0.5, 2)
            .unwrap();
        // A controller that returns u = 0 drives x to −4, outside every region.
        let mut cfg = SolverConfig::new(10.0);
        cfg.max_iter = 0;
        let err = closed_loop(&sys, &Controller::FixedPoint { cfg }, &[1.0], 3);
        assert!(matches!(err, Err(Error::NoActiveRegion { step: 1 })), "{err:?}");
    }
}

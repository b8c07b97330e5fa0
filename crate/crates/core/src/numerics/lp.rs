//! Small dense LP front end over `microlp`.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

/// `minimize cᵀx` subject to dense rows and per-variable bounds.
#[derive(Debug, Clone)]
pub struct Lp {
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<f64>, RowKind, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimum(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, objective } => Some((x, *objective)),
            _ => None,
        }
    }
}

impl Lp {
    /// Minimization over `n` free variables.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n], rows: Vec::new() }
    }

    pub fn maximize(objective: &[f64]) -> Self {
        Self::new(objective.iter().map(|c| -c).collect())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    pub fn set_all_bounds(&mut self, lo: f64, hi: f64) {
        self.bounds.iter_mut().for_each(|b| *b = (lo, hi));
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.rows.push((coeffs, kind, rhs));
    }

    /// Returns the minimum of `cᵀx` (the sign convention of [`Lp::new`]).
    pub fn solve(&self) -> Result<LpOutcome> {
        for (coeffs, kind, rhs) in &self.rows {
            if coeffs.iter().all(|&c| c == 0.0) {
                let ok = match kind {
                    RowKind::Le => 0.0 <= *rhs,
                    RowKind::Ge => 0.0 >= *rhs,
                    RowKind::Eq => *rhs == 0.0,
                };
                if !ok {
                    return Ok(LpOutcome::Infeasible);
                }
            }
        }
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self
            .objective
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &b)| p.add_var(c, b))
            .collect();
        for (coeffs, kind, rhs) in &self.rows {
            if coeffs.iter().all(|&c| c == 0.0) {
                continue;
            }
            let expr: Vec<_> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(j, &c)| (vars[j], c))
                .collect();
            let op = match kind {
                RowKind::Le => ComparisonOp::Le,
                RowKind::Ge => ComparisonOp::Ge,
                RowKind::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(expr, op, *rhs);
        }
        match p.solve() {
            Ok(microlp::SolveOutcome::Solution(sol)) => {
                let x = vars.iter().map(|&v| sol.var_value(v)).collect();
                Ok(LpOutcome::Optimal { x, objective: sol.objective() })
            }
            Ok(microlp::SolveOutcome::Interrupted(_)) => Err(Error::Lp("solve interrupted".into())),
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(Error::Lp(format!("{e:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_maximization() {
        // max x + y s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0
        let mut lp = Lp::maximize(&[1.0, 1.0]);
        lp.set_all_bounds(0.0, f64::INFINITY);
        lp.add_row(vec![1.0, 2.0], RowKind::Le, 4.0);
        lp.add_row(vec![3.0, 1.0], RowKind::Le, 6.0);
        let (x, obj) = match lp.solve().unwrap() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            o => panic!("{o:?}"),
        };
        assert!((x[0] - 1.6).abs() < 1e-9 && (x[1] - 1.2).abs() < 1e-9);
        assert!((obj + 2.8).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(vec![1.0]);
        lp.add_row(vec![1.0], RowKind::Ge, 2.0);
        lp.add_row(vec![1.0], RowKind::Le, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = Lp::new(vec![-1.0]);
        lp.add_row(vec![1.0], RowKind::Ge, 0.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);

        let mut lp = Lp::new(vec![1.0]);
        lp.add_row(vec![0.0], RowKind::Le, -1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);
    }
}

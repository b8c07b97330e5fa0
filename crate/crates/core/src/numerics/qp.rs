//! Dense convex QP solver
//!
//! ```text
//! minimize    ½ zᵀ P z + qᵀ z
//! subject to  G z = g,  F z ≤ f
//! ```
//!
//! using the dual active-set method of Goldfarb and Idnani. The method starts
//! from the unconstrained minimizer and adds violated constraints one at a time,
//! so no feasible starting point is needed and an empty feasible set shows up as
//! an unbounded dual step.

use super::linalg::Cholesky;
use super::matrix::{axpy, dot, norm, DenseMatrix};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: Vec<f64>,
    /// Multipliers `ν`, `μ ≥ 0` with `P z + q + Gᵀ ν + Fᵀ μ = 0`.
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    /// Indices of inequality rows active at the solution.
    pub active_inequalities: Vec<usize>,
    pub objective: f64,
    pub pivots: usize,
}

/// Reusable solver for a fixed Hessian `P`.
#[derive(Debug, Clone)]
pub struct QpSolver {
    n: usize,
    chol: Option<Cholesky>,
    /// `L⁻ᵀ` where `P = L Lᵀ`.
    j0: DenseMatrix,
    p: DenseMatrix,
}

impl QpSolver {
    pub fn new(p: &DenseMatrix) -> Result<Self> {
        let chol = Cholesky::new(p)?;
        let j0 = chol.inverse_transpose_factor();
        Ok(Self { n: p.rows(), chol: Some(chol), j0, p: p.clone() })
    }

    /// Solver for Euclidean projections (`P = I`).
    pub fn identity(n: usize) -> Self {
        Self { n, chol: None, j0: DenseMatrix::identity(n), p: DenseMatrix::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn solve(
        &self,
        q: &[f64],
        geq: &DenseMatrix,
        geq_rhs: &[f64],
        fineq: &DenseMatrix,
        fineq_rhs: &[f64],
    ) -> Result<QpSolution> {
        let n = self.n;
        check_len("q", q.len(), n)?;
        check_len("equality rhs", geq_rhs.len(), geq.rows())?;
        check_len("inequality rhs", fineq_rhs.len(), fineq.rows())?;
        if geq.rows() > 0 && geq.cols() != n || fineq.rows() > 0 && fineq.cols() != n {
            return Err(Error::DimensionMismatch("constraint matrix width differs from P".into()));
        }
        let meq = geq.rows();
        let mut ws = Workspace::new(self, meq, fineq.rows());

        let x0 = match &self.chol {
            Some(c) => c.solve(q),
            None => q.to_vec(),
        };
        ws.x.iter_mut().zip(&x0).for_each(|(x, v)| *x = -v);

        let normal = |i: usize| -> (&[f64], f64, f64) {
            if i < meq {
                (geq.row(i), geq_rhs[i], 1.0)
            } else {
                (fineq.row(i - meq), fineq_rhs[i - meq], -1.0)
            }
        };

        // Equalities first; they are never dropped.
        for i in 0..meq {
            let (row, rhs, _) = normal(i);
            let np = row.to_vec();
            let viol = rhs - dot(&np, &ws.x);
            let (z, r) = ws.directions(&np);
            let ztn = dot(&z, &np);
            if ztn <= DEPENDENT_TOL * dot(&ws.d, &ws.d) {
                let scale = 1.0 + rhs.abs() + norm(&np) * norm(&ws.x);
                if viol.abs() <= FEAS_TOL * scale {
                    continue;
                }
                return Ok(ws.infeasible(q, self));
            }
            let t = viol / ztn;
            axpy(t, &z, &mut ws.x);
            for j in 0..ws.q {
                ws.u[j] -= t * r[j];
            }
            ws.add(i, t);
        }

        let max_pivots = 20 * (n + meq + fineq.rows()) + 100;
        loop {
            // Most violated inequality (scaled by row norm), lowest index on ties.
            let mut pick: Option<(usize, f64)> = None;
            for k in 0..fineq.rows() {
                let id = meq + k;
                if ws.is_active[id] {
                    continue;
                }
                let row = fineq.row(k);
                let rn = norm(row);
                let slack = fineq_rhs[k] - dot(row, &ws.x);
                let scale = 1.0 + fineq_rhs[k].abs() + rn * norm(&ws.x);
                if slack < -FEAS_TOL * scale {
                    let v = -slack / rn.max(f64::MIN_POSITIVE);
                    if pick.is_none_or(|(_, best)| v > best) {
                        pick = Some((id, v));
                    }
                }
            }
            let Some((p, _)) = pick else {
                return Ok(ws.optimal(q, self));
            };
            let (row, rhs, sign) = normal(p);
            let np: Vec<f64> = row.iter().map(|x| sign * x).collect();
            let bp = sign * rhs;
            let mut up = 0.0;
            loop {
                ws.pivots += 1;
                if ws.pivots > max_pivots {
                    return Err(Error::MaxPivots(max_pivots));
                }
                let (z, r) = ws.directions(&np);
                let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut t1 = f64::INFINITY;
                let mut drop_at = None;
                for j in 0..ws.q {
                    if ws.active[j] >= meq && r[j] > f64::EPSILON * rmax {
                        let ratio = ws.u[j] / r[j];
                        if ratio < t1 {
                            t1 = ratio;
                            drop_at = Some(j);
                        }
                    }
                }
                let ztn = dot(&z, &np);
                let sp = dot(&np, &ws.x) - bp;
                let t2 = if ztn > DEPENDENT_TOL * dot(&ws.d, &ws.d) { -sp / ztn } else { f64::INFINITY };
                if t1.is_infinite() && t2.is_infinite() {
                    return Ok(ws.infeasible(q, self));
                }
                if t2.is_infinite() {
                    for j in 0..ws.q {
                        ws.u[j] -= t1 * r[j];
                    }
                    up += t1;
                    ws.drop(drop_at.expect("finite t1 has a blocking index"));
                    continue;
                }
                let t = t1.min(t2);
                axpy(t, &z, &mut ws.x);
                for j in 0..ws.q {
                    ws.u[j] -= t * r[j];
                }
                up += t;
                if t2 <= t1 {
                    ws.add(p, up);
                    break;
                }
                ws.drop(drop_at.expect("finite t1 has a blocking index"));
            }
        }
    }
}

/// Convenience wrapper: builds a solver for `P` and solves once.
pub fn solve_convex_qp(
    p: &DenseMatrix,
    q: &[f64],
    geq: &DenseMatrix,
    geq_rhs: &[f64],
    fineq: &DenseMatrix,
    fineq_rhs: &[f64],
) -> Result<QpSolution> {
    QpSolver::new(p)?.solve(q, geq, geq_rhs, fineq, fineq_rhs)
}

const FEAS_TOL: f64 = 1e-11;
const DEPENDENT_TOL: f64 = 1e-20;

struct Workspace {
    n: usize,
    meq: usize,
    m_ineq: usize,
    x: Vec<f64>,
    j: DenseMatrix,
    r: DenseMatrix,
    q: usize,
    active: Vec<usize>,
    is_active: Vec<bool>,
    u: Vec<f64>,
    d: Vec<f64>,
    pivots: usize,
}

impl Workspace {
    fn new(solver: &QpSolver, meq: usize, m_ineq: usize) -> Self {
        let n = solver.n;
        Self {
            n,
            meq,
            m_ineq,
            x: vec![0.0; n],
            j: solver.j0.clone(),
            r: DenseMatrix::zeros(n, n),
            q: 0,
            active: Vec::with_capacity(n),
            is_active: vec![false; meq + m_ineq],
            u: Vec::with_capacity(n),
            d: vec![0.0; n],
            pivots: 0,
        }
    }

    /// Sets `d = Jᵀ n` and returns the primal step `z = J₂ d₂` and dual step `r = R⁻¹ d₁`.
    fn directions(&mut self, np: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        for c in 0..n {
            self.d[c] = 0.0;
        }
        for i in 0..n {
            let ni = np[i];
            if ni != 0.0 {
                axpy(ni, self.j.row(i), &mut self.d);
            }
        }
        let mut z = vec![0.0; n];
        for i in 0..n {
            let jr = self.j.row(i);
            z[i] = dot(&jr[self.q..], &self.d[self.q..]);
        }
        let mut r = vec![0.0; self.q];
        for i in (0..self.q).rev() {
            let mut s = self.d[i];
            for k in (i + 1)..self.q {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        (z, r)
    }

    /// Appends constraint `id` using the current `d = Jᵀ n`.
    fn add(&mut self, id: usize, multiplier: f64) {
        let n = self.n;
        for jc in ((self.q + 1)..n).rev() {
            let (a, b) = (self.d[jc - 1], self.d[jc]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            self.d[jc - 1] = h;
            self.d[jc] = 0.0;
            for k in 0..n {
                let t1 = self.j[(k, jc - 1)];
                let t2 = self.j[(k, jc)];
                self.j[(k, jc - 1)] = c * t1 + s * t2;
                self.j[(k, jc)] = -s * t1 + c * t2;
            }
        }
        for i in 0..=self.q {
            self.r[(i, self.q)] = self.d[i];
        }
        self.q += 1;
        self.active.push(id);
        self.is_active[id] = true;
        self.u.push(multiplier);
    }

    /// Removes the active constraint at position `l` and restores triangularity.
    fn drop(&mut self, l: usize) {
        let n = self.n;
        let q = self.q;
        for k in l..q - 1 {
            for i in 0..q {
                self.r[(i, k)] = self.r[(i, k + 1)];
            }
        }
        for i in 0..q {
            self.r[(i, q - 1)] = 0.0;
        }
        for k in l..q.saturating_sub(1) {
            let (a, b) = (self.r[(k, k)], self.r[(k + 1, k)]);
            if b == 0.0 {
                continue;
            }
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for col in k..q - 1 {
                let t1 = self.r[(k, col)];
                let t2 = self.r[(k + 1, col)];
                self.r[(k, col)] = c * t1 + s * t2;
                self.r[(k + 1, col)] = -s * t1 + c * t2;
            }
            for row in 0..n {
                let t1 = self.j[(row, k)];
                let t2 = self.j[(row, k + 1)];
                self.j[(row, k)] = c * t1 + s * t2;
                self.j[(row, k + 1)] = -s * t1 + c * t2;
            }
        }
        let id = self.active.remove(l);
        self.is_active[id] = false;
        self.u.remove(l);
        self.q -= 1;
    }

    fn finish(&self, status: QpStatus, q: &[f64], solver: &QpSolver) -> QpSolution {
        let mut eq = vec![0.0; self.meq];
        let mut ineq = vec![0.0; self.m_ineq];
        let mut act = Vec::new();
        for (pos, &id) in self.active.iter().enumerate() {
            if id < self.meq {
                eq[id] = -self.u[pos];
            } else {
                ineq[id - self.meq] = self.u[pos];
                act.push(id - self.meq);
            }
        }
        act.sort_unstable();
        let px = solver.p.matvec(&self.x);
        let objective = 0.5 * dot(&self.x, &px) + dot(q, &self.x);
        QpSolution {
            status,
            z: self.x.clone(),
            eq_multipliers: eq,
            ineq_multipliers: ineq,
            active_inequalities: act,
            objective,
            pivots: self.pivots,
        }
    }

    fn optimal(&self, q: &[f64], solver: &QpSolver) -> QpSolution {
        self.finish(QpStatus::Optimal, q, solver)
    }

    fn infeasible(&self, q: &[f64], solver: &QpSolver) -> QpSolution {
        self.finish(QpStatus::Infeasible, q, solver)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::sub;

    fn empty(n: usize) -> DenseMatrix {
        DenseMatrix::zeros(0, n)
    }

    #[test]
    fn unconstrained_projection_returns_point() {
        let p = [0.3, -2.0, 5.0];
        let sol = QpSolver::identity(3)
            .solve(&p.map(|x| -x), &empty(3), &[], &empty(3), &[])
            .unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.z, p.to_vec());
    }

    #[test]
    fn box_clamps() {
        let f = DenseMatrix::from_rows(
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            2,
        )
        .unwrap();
        let sol = solve_convex_qp(&DenseMatrix::identity(2), &[-2.0, 0.0], &empty(2), &[], &f, &[1.0; 4])
            .unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 1.0).abs() < 1e-14 && sol.z[1].abs() < 1e-14);
        assert!((sol.ineq_multipliers[0] - 1.0).abs() < 1e-14);
        assert_eq!(sol.active_inequalities, vec![0]);
    }

    #[test]
    fn empty_set_is_reported_infeasible() {
        // z ≤ -1 and z ≥ 1
        let f = DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]], 1).unwrap();
        let sol = QpSolver::identity(1).solve(&[0.0], &empty(1), &[], &f, &[-1.0, -1.0]).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);

        // inconsistent equalities
        let g = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]], 2).unwrap();
        let sol = QpSolver::identity(2).solve(&[0.0, 0.0], &g, &[1.0, 3.0], &empty(2), &[]).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);

        // redundant but consistent equalities are fine
        let sol = QpSolver::identity(2).solve(&[0.0, 0.0], &g, &[1.0, 2.0], &empty(2), &[]).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn kkt_conditions_hold_with_equalities() {
        let p = DenseMatrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 0.5], vec![0.0, 0.5, 2.0]], 3)
            .unwrap();
        let q = [1.0, -2.0, 0.5];
        let g = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]], 3).unwrap();
        let f = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]], 3)
            .unwrap();
        let fr = [-0.2, 0.0, 0.1];
        let sol = solve_convex_qp(&p, &q, &g, &[1.0], &f, &fr).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let mut grad = p.matvec(&sol.z);
        axpy(1.0, &q, &mut grad);
        axpy(1.0, &g.tmatvec(&sol.eq_multipliers), &mut grad);
        axpy(1.0, &f.tmatvec(&sol.ineq_multipliers), &mut grad);
        assert!(norm(&grad) < 1e-10, "stationarity {grad:?}");
        let slack = sub(&fr, &f.matvec(&sol.z));
        for (s, m) in slack.iter().zip(&sol.ineq_multipliers) {
            assert!(*s >= -1e-12 && *m >= -1e-12 && (s * m).abs() < 1e-10);
        }
        assert!((g.matvec(&sol.z)[0] - 1.0).abs() < 1e-12);
    }

    /// Brute-force reference: minimize over every active subset with a KKT solve.
    fn enumeration_oracle(
        p: &DenseMatrix,
        q: &[f64],
        g: &DenseMatrix,
        gr: &[f64],
        f: &DenseMatrix,
        fr: &[f64],
    ) -> Option<(Vec<f64>, f64)> {
        use crate::numerics::linalg::Lu;
        let n = p.rows();
        let mi = f.rows();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for mask in 0u32..(1 << mi) {
            let act: Vec<usize> = (0..mi).filter(|i| mask & (1 << i) != 0).collect();
            let k = g.rows() + act.len();
            if k > n {
                continue;
            }
            let mut kkt = DenseMatrix::zeros(n + k, n + k);
            kkt.set_block(0, 0, p);
            let mut rhs = vec![0.0; n + k];
            for i in 0..n {
                rhs[i] = -q[i];
            }
            let rows: Vec<(&[f64], f64)> = (0..g.rows())
                .map(|i| (g.row(i), gr[i]))
                .chain(act.iter().map(|&i| (f.row(i), fr[i])))
                .collect();
            for (r, (row, b)) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = row[j];
                    kkt[(j, n + r)] = row[j];
                }
                rhs[n + r] = *b;
            }
            let Ok(lu) = Lu::new(&kkt) else { continue };
            let z = lu.solve(&rhs)[..n].to_vec();
            let feasible = (0..mi).all(|i| dot(f.row(i), &z) <= fr[i] + 1e-9);
            if !feasible {
                continue;
            }
            let obj = 0.5 * dot(&z, &p.matvec(&z)) + dot(q, &z);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((z, obj));
            }
        }
        best
    }

    proptest::proptest! {
        #[test]
        fn matches_enumeration_oracle(
            lfac in proptest::collection::vec(-1.0f64..1.0, 16),
            q in proptest::collection::vec(-3.0f64..3.0, 4),
            meq in 0usize..3,
            mi in 0usize..9,
            rows in proptest::collection::vec(-1.0f64..1.0, 44),
            rhs in proptest::collection::vec(-1.0f64..1.0, 11),
        ) {
            let n = 4;
            let l = DenseMatrix::from_row_major(n, n, lfac).unwrap();
            let p = l.matmul(&l.transpose()).add(&DenseMatrix::identity(n).scaled(0.5));
            let g = DenseMatrix::from_row_major(meq, n, rows[..meq * n].to_vec()).unwrap();
            let f = DenseMatrix::from_row_major(mi, n, rows[meq * n..(meq + mi) * n].to_vec()).unwrap();
            let gr = &rhs[..meq];
            let fr = &rhs[meq..meq + mi];
            let sol = solve_convex_qp(&p, &q, &g, gr, &f, fr).unwrap();
            match enumeration_oracle(&p, &q, &g, gr, &f, fr) {
                Some((z, obj)) => {
                    proptest::prop_assert_eq!(sol.status, QpStatus::Optimal);
                    proptest::prop_assert!((sol.objective - obj).abs() <= 1e-7 * (1.0 + obj.abs()));
                    proptest::prop_assert!(crate::numerics::matrix::dist(&sol.z, &z) <= 1e-6);
                    proptest::prop_assert!(sol.ineq_multipliers.iter().all(|&m| m >= -1e-12));
                }
                None => proptest::prop_assert_eq!(sol.status, QpStatus::Infeasible),
            }
        }
    }
}

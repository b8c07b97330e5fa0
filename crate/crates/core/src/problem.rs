//! Consensus problem `min ½zᵀHz + hᵀz` over `{Az = b} ∩ Z(θ)` where `Z(θ)` is a
//! Cartesian product of per-stage unions of polyhedra, together with the
//! stage-wise projection onto `Z(θ)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::linalg::{nullspace_and_particular, Cholesky};
use crate::numerics::{dot, DenseMatrix, QpSolver};
use crate::polyhedra::{FixedPolyhedron, Polyhedron};

/// One factor of `Z(θ)`: a union of polyhedra over `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSet {
    pub dim: usize,
    pub components: Vec<Polyhedron>,
}

impl StageSet {
    pub fn new(dim: usize, components: Vec<Polyhedron>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("a stage needs at least one component".into()));
        }
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "component of dimension {} in a stage of dimension {dim}",
                c.dim()
            )));
        }
        Ok(Self { dim, components })
    }

    /// Unconstrained stage.
    pub fn free(dim: usize, param_dim: usize) -> Self {
        Self { dim, components: vec![Polyhedron::free(dim, param_dim)] }
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone)]
pub struct ConsensusProblem {
    n: usize,
    p: usize,
    hess: DenseMatrix,
    h: Vec<f64>,
    a: DenseMatrix,
    b: Vec<f64>,
    stages: Vec<StageSet>,
    offsets: Vec<usize>,
    v: DenseMatrix,
    v_bar: Vec<f64>,
    from_mpc: bool,
}

impl ConsensusProblem {
    /// Validates the data and caches the nullspace basis of `A`.
    pub fn new(
        hess: DenseMatrix,
        h: Vec<f64>,
        a: DenseMatrix,
        b: Vec<f64>,
        stages: Vec<StageSet>,
        p: usize,
    ) -> Result<Self> {
        let n = hess.rows();
        if !hess.is_square() {
            return Err(Error::DimensionMismatch("H must be square".into()));
        }
        check_len("h", h.len(), n)?;
        let a = if a.rows() == 0 { DenseMatrix::zeros(0, n) } else { a };
        if a.cols() != n {
            return Err(Error::DimensionMismatch(format!("A has {} columns, expected {n}", a.cols())));
        }
        check_len("b", b.len(), a.rows())?;
        if h.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("h and b must be finite".into()));
        }
        let total: usize = stages.iter().map(|s| s.dim).sum();
        if total != n {
            return Err(Error::DimensionMismatch(format!("stage dimensions sum to {total}, expected {n}")));
        }
        for s in &stages {
            if s.components.is_empty() {
                return Err(Error::InvalidInput("a stage needs at least one component".into()));
            }
            for c in &s.components {
                if c.dim() != s.dim {
                    return Err(Error::DimensionMismatch("component dimension differs from stage".into()));
                }
                if c.param_dim() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "component has parameter dimension {}, expected {p}",
                        c.param_dim()
                    )));
                }
            }
        }
        let asym = hess.asymmetry();
        if asym > 1e-12 * hess.frobenius_norm().max(1.0) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let mut hess = hess;
        hess.symmetrize();
        Cholesky::new(&hess)?;
        let (v, v_bar) = nullspace_and_particular(&a, &b)?;
        let mut offsets = Vec::with_capacity(stages.len());
        let mut off = 0;
        for s in &stages {
            offsets.push(off);
            off += s.dim;
        }
        Ok(Self { n, p, hess, h, a, b, stages, offsets, v, v_bar, from_mpc: false })
    }

    pub(crate) fn mark_mpc(mut self) -> Self {
        self.from_mpc = true;
        self
    }

    /// True when built from a PWA system.
    pub fn from_mpc(&self) -> bool {
        self.from_mpc
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn param_dim(&self) -> usize {
        self.p
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.hess
    }

    pub fn linear_cost(&self) -> &[f64] {
        &self.h
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn stages(&self) -> &[StageSet] {
        &self.stages
    }

    pub fn stage_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn nullspace(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn particular(&self) -> &[f64] {
        &self.v_bar
    }

    /// Copy with a different linear cost term.
    pub fn with_linear_cost(&self, h: Vec<f64>) -> Result<Self> {
        check_len("h", h.len(), self.n)?;
        let mut out = self.clone();
        out.h = h;
        Ok(out)
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        0.5 * dot(z, &self.hess.matvec(z)) + dot(&self.h, z)
    }

    /// Product of the component counts.
    pub fn num_assignments(&self) -> u128 {
        self.stages.iter().map(|s| s.components.len() as u128).product()
    }

    pub fn instantiate(&self, theta: &[f64]) -> Result<InstantiatedZ> {
        check_len("theta", theta.len(), self.p)?;
        let stages = self
            .stages
            .iter()
            .map(|s| s.components.iter().map(|c| c.instantiate(theta)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let solvers = self.stages.iter().map(|s| QpSolver::identity(s.dim)).collect();
        Ok(InstantiatedZ { n: self.n, offsets: self.offsets.clone(), stages, solvers })
    }

    pub fn project_z(&self, theta: &[f64], s: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        self.instantiate(theta)?.project(s)
    }

    pub fn contains_z(&self, theta: &[f64], z: &[f64], tol: f64) -> Result<bool> {
        self.instantiate(theta)?.contains(z, tol)
    }

    /// Constraints of the convex QP obtained by fixing one component per stage:
    /// `Az = b` plus every chosen component, lifted to the full variable vector.
    /// Returns `(G, g, F, f)`.
    pub fn assignment_constraints(
        &self,
        zi: &InstantiatedZ,
        assignment: &[usize],
    ) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix, Vec<f64>)> {
        check_len("assignment", assignment.len(), self.stages.len())?;
        let n = self.n;
        let n_eq = self.a.rows()
            + assignment.iter().enumerate().map(|(k, &i)| zi.stages[k][i].eq_rhs().len()).sum::<usize>();
        let n_in: usize = assignment.iter().enumerate().map(|(k, &i)| zi.stages[k][i].ineq_rhs().len()).sum();
        let mut g = DenseMatrix::zeros(n_eq, n);
        let mut gr = Vec::with_capacity(n_eq);
        let mut f = DenseMatrix::zeros(n_in, n);
        let mut fr = Vec::with_capacity(n_in);
        g.set_block(0, 0, &self.a);
        gr.extend_from_slice(&self.b);
        let (mut re, mut ri) = (self.a.rows(), 0);
        for (k, &i) in assignment.iter().enumerate() {
            let comp = zi.stages[k].get(i).ok_or_else(|| {
                Error::InvalidInput(format!("stage {k} has no component {i}"))
            })?;
            let off = self.offsets[k];
            g.set_block(re, off, comp.eq_matrix());
            gr.extend_from_slice(comp.eq_rhs());
            re += comp.eq_rhs().len();
            f.set_block(ri, off, comp.ineq_matrix());
            fr.extend_from_slice(comp.ineq_rhs());
            ri += comp.ineq_rhs().len();
        }
        Ok((g, gr, f, fr))
    }

    /// `‖Az − b‖₂`.
    pub fn equality_residual(&self, z: &[f64]) -> f64 {
        let r = self.a.matvec(z);
        r.iter().zip(&self.b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

/// `Z(θ)` for a fixed parameter, ready for repeated projections.
#[derive(Debug, Clone)]
pub struct InstantiatedZ {
    n: usize,
    offsets: Vec<usize>,
    stages: Vec<Vec<FixedPolyhedron>>,
    solvers: Vec<QpSolver>,
}

impl InstantiatedZ {
    pub fn stages(&self) -> &[Vec<FixedPolyhedron>] {
        &self.stages
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Projection onto one stage: closest component, lowest index on ties.
    pub fn project_stage(&self, k: usize, sk: &[f64]) -> Result<(Vec<f64>, usize)> {
        let mut best: Option<(Vec<f64>, f64, usize)> = None;
        for (i, comp) in self.stages[k].iter().enumerate() {
            if comp.max_violation(sk) <= 0.0 && best.as_ref().is_none_or(|b| b.1 > 0.0) {
                return Ok((sk.to_vec(), i));
            }
            if let Some((y, d)) = comp.project_with(&self.solvers[k], sk)? {
                if best.as_ref().is_none_or(|(_, bd, _)| d < *bd) {
                    best = Some((y, d, i));
                }
            }
        }
        best.map(|(y, _, i)| (y, i)).ok_or(Error::StageInfeasible(k))
    }

    /// Stage-wise projection; returns the point and the winning component per stage.
    pub fn project(&self, s: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        let mut y = vec![0.0; self.n];
        let mut active = Vec::with_capacity(self.stages.len());
        self.project_into(s, &mut y, &mut active)?;
        Ok((y, active))
    }

    pub fn project_into(&self, s: &[f64], y: &mut [f64], active: &mut Vec<usize>) -> Result<()> {
        check_len("point", s.len(), self.n)?;
        active.clear();
        for k in 0..self.stages.len() {
            let off = self.offsets[k];
            let dim = self.solvers[k].dim();
            let (yk, i) = self.project_stage(k, &s[off..off + dim])?;
            y[off..off + dim].copy_from_slice(&yk);
            active.push(i);
        }
        Ok(())
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> Result<bool> {
        check_len("point", z.len(), self.n)?;
        for (k, comps) in self.stages.iter().enumerate() {
            let off = self.offsets[k];
            let zk = &z[off..off + self.solvers[k].dim()];
            if !comps.iter().any(|c| c.max_violation(zk) <= tol) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Serialize, Deserialize)]
struct StageJson {
    nk: usize,
    components: Vec<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct ProblemJson {
    n: usize,
    #[serde(default)]
    p: usize,
    #[serde(rename = "H")]
    hess: DenseMatrix,
    h: Vec<f64>,
    #[serde(rename = "A", default)]
    a: Option<DenseMatrix>,
    #[serde(default)]
    b: Vec<f64>,
    stages: Vec<StageJson>,
}

impl ConsensusProblem {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ProblemJson = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let stages = raw
            .stages
            .iter()
            .map(|st| {
                let comps = st
                    .components
                    .iter()
                    .map(|c| Polyhedron::from_json_value(c, st.nk, raw.p))
                    .collect::<Result<Vec<_>>>()?;
                StageSet::new(st.nk, comps)
            })
            .collect::<Result<Vec<_>>>()?;
        if raw.hess.rows() != raw.n {
            return Err(Error::DimensionMismatch(format!("H has {} rows, n is {}", raw.hess.rows(), raw.n)));
        }
        let a = raw.a.unwrap_or_else(|| DenseMatrix::zeros(0, raw.n));
        Self::new(raw.hess, raw.h, a, raw.b, stages, raw.p)
    }

    pub fn to_json_string(&self) -> String {
        let raw = ProblemJson {
            n: self.n,
            p: self.p,
            hess: self.hess.clone(),
            h: self.h.clone(),
            a: Some(self.a.clone()),
            b: self.b.clone(),
            stages: self
                .stages
                .iter()
                .map(|s| StageJson { nk: s.dim, components: s.components.iter().map(|c| c.to_json_value()).collect() })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("problem serializes")
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::numerics::{solve_convex_qp, QpStatus};
    use proptest::prelude::*;

    fn halfline(sign: f64, at: f64) -> Polyhedron {
        // sign·z ≤ at
        Polyhedron::fixed(1, DenseMatrix::zeros(0, 1), vec![], DenseMatrix::from_rows(&[vec![sign]], 1).unwrap(), vec![at])
            .unwrap()
    }

    #[test]
    fn identity_hessian_without_coupling() {
        let pr = ConsensusProblem::new(
            DenseMatrix::identity(3),
            vec![0.0; 3],
            DenseMatrix::zeros(0, 3),
            vec![],
            vec![StageSet::free(3, 0)],
            0,
        )
        .unwrap();
        assert_eq!(pr.nullspace(), &DenseMatrix::identity(3));
        assert_eq!(pr.particular(), &[0.0; 3]);
    }

    #[test]
    fn singular_hessian_is_rejected() {
        let r = ConsensusProblem::new(
            DenseMatrix::from_diagonal(&[1.0, 0.0]),
            vec![0.0; 2],
            DenseMatrix::zeros(0, 2),
            vec![],
            vec![StageSet::free(2, 0)],
            0,
        );
        assert!(matches!(r, Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let stage = StageSet::new(1, vec![halfline(1.0, -1.0), halfline(-1.0, -1.0)]).unwrap();
        let pr = ConsensusProblem::new(DenseMatrix::identity(1), vec![0.0], DenseMatrix::zeros(0, 1), vec![], vec![stage], 0)
            .unwrap();
        let (y, act) = pr.project_z(&[], &[0.0]).unwrap();
        assert_eq!(y, vec![-1.0]);
        assert_eq!(act, vec![0]);
    }

    #[test]
    fn fully_empty_stage_is_an_error() {
        let empty = Polyhedron::fixed(
            1,
            DenseMatrix::zeros(0, 1),
            vec![],
            DenseMatrix::from_rows(&[vec![1.0], vec![-1.0]], 1).unwrap(),
            vec![-1.0, -1.0],
        )
        .unwrap();
        let pr = ConsensusProblem::new(
            DenseMatrix::identity(2),
            vec![0.0; 2],
            DenseMatrix::zeros(0, 2),
            vec![],
            vec![StageSet::free(1, 0), StageSet::new(1, vec![empty.clone(), empty]).unwrap()],
            0,
        )
        .unwrap();
        assert_eq!(pr.project_z(&[], &[0.0, 0.0]).unwrap_err(), Error::StageInfeasible(1));
    }

    #[test]
    fn objective_values() {
        let pr = ConsensusProblem::new(
            DenseMatrix::identity(2).scaled(2.0),
            vec![0.0; 2],
            DenseMatrix::zeros(0, 2),
            vec![],
            vec![StageSet::free(2, 0)],
            0,
        )
        .unwrap();
        assert_eq!(pr.objective(&[0.0, 0.0]), 0.0);
        assert_eq!(pr.objective(&[1.0, 0.0]), 1.0);
    }

    #[test]
    fn json_round_trip() {
        let stage = StageSet::new(1, vec![halfline(1.0, -1.0), halfline(-1.0, -1.0)]).unwrap();
        let pr = ConsensusProblem::new(
            DenseMatrix::from_diagonal(&[1.0, 2.0]),
            vec![0.5, 0.0],
            DenseMatrix::from_rows(&[vec![1.0, -1.0]], 2).unwrap(),
            vec![0.0],
            vec![stage, StageSet::free(1, 0)],
            0,
        )
        .unwrap();
        let back = ConsensusProblem::from_json_str(&pr.to_json_string()).unwrap();
        assert_eq!(back.stages(), pr.stages());
        assert_eq!(back.hessian(), pr.hessian());
        assert_eq!(back.a(), pr.a());
    }

    /// Random staged set: every component is a box with a random centre plus one random cut.
    pub(crate) fn random_staged(
        dims: &[usize],
        ncomp: &[usize],
        data: &[f64],
    ) -> ConsensusProblem {
        let mut k = 0;
        let mut next = || {
            let v = data[k % data.len()];
            k += 1;
            v
        };
        let mut stages = Vec::new();
        for (&d, &m) in dims.iter().zip(ncomp) {
            let mut comps = Vec::new();
            for _ in 0..m {
                let mut f = DenseMatrix::zeros(2 * d + 1, d);
                let mut f0 = vec![0.0; 2 * d + 1];
                for j in 0..d {
                    let c = 2.0 * next();
                    let w = 0.2 + next().abs();
                    f[(2 * j, j)] = 1.0;
                    f0[2 * j] = c + w;
                    f[(2 * j + 1, j)] = -1.0;
                    f0[2 * j + 1] = -(c - w);
                }
                for j in 0..d {
                    f[(2 * d, j)] = next();
                }
                f0[2 * d] = next();
                let (g, g0) = if next() > 0.5 && d > 1 {
                    let row: Vec<f64> = (0..d).map(|_| next()).collect();
                    (DenseMatrix::from_rows(&[row], d).unwrap(), vec![0.5 * next()])
                } else {
                    (DenseMatrix::zeros(0, d), vec![])
                };
                comps.push(Polyhedron::fixed(d, g, g0, f, f0).unwrap());
            }
            stages.push(StageSet::new(d, comps).unwrap());
        }
        let n: usize = dims.iter().sum();
        ConsensusProblem::new(DenseMatrix::identity(n), vec![0.0; n], DenseMatrix::zeros(0, n), vec![], stages, 0).unwrap()
    }

    /// Exhaustive reference: one joint QP over the product of the chosen components
    /// for every combination.
    pub(crate) fn combination_oracle(pr: &ConsensusProblem, s: &[f64]) -> Option<Vec<f64>> {
        let n = pr.n();
        let counts: Vec<usize> = pr.stages().iter().map(|st| st.num_components()).collect();
        let total: usize = counts.iter().product();
        let zi = pr.instantiate(&[]).unwrap();
        let mut best: Option<(Vec<f64>, f64)> = None;
        for mut idx in 0..total {
            let mut g_rows = Vec::new();
            let mut g_rhs = Vec::new();
            let mut f_rows = Vec::new();
            let mut f_rhs = Vec::new();
            for (k, &m) in counts.iter().enumerate() {
                let i = idx % m;
                idx /= m;
                let fp = &zi.stages()[k][i];
                let off = pr.stage_offsets()[k];
                for r in 0..fp.eq_rhs().len() {
                    let mut row = vec![0.0; n];
                    row[off..off + fp.dim()].copy_from_slice(fp.eq_matrix().row(r));
                    g_rows.push(row);
                    g_rhs.push(fp.eq_rhs()[r]);
                }
                for r in 0..fp.ineq_rhs().len() {
                    let mut row = vec![0.0; n];
                    row[off..off + fp.dim()].copy_from_slice(fp.ineq_matrix().row(r));
                    f_rows.push(row);
                    f_rhs.push(fp.ineq_rhs()[r]);
                }
            }
            let q: Vec<f64> = s.iter().map(|x| -2.0 * x).collect();
            let sol = solve_convex_qp(
                &DenseMatrix::identity(n).scaled(2.0),
                &q,
                &DenseMatrix::from_rows(&g_rows, n).unwrap(),
                &g_rhs,
                &DenseMatrix::from_rows(&f_rows, n).unwrap(),
                &f_rhs,
            )
            .unwrap();
            if sol.status == QpStatus::Optimal {
                let d = crate::numerics::dist(&sol.z, s);
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((sol.z, d));
                }
            }
        }
        best.map(|(z, _)| z)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn projection_matches_combination_oracle(
            dims in proptest::collection::vec(1usize..5, 1..4),
            ncomp in proptest::collection::vec(1usize..4, 3),
            data in proptest::collection::vec(-1.0f64..1.0, 64),
            s in proptest::collection::vec(-3.0f64..3.0, 12),
        ) {
            let pr = random_staged(&dims, &ncomp[..dims.len()], &data);
            let s = &s[..pr.n()];
            match (pr.project_z(&[], s), combination_oracle(&pr, s)) {
                (Ok((y, _)), Some(z)) => {
                    prop_assert!(crate::numerics::dist(&y, &z) <= 1e-9, "{:?} vs {:?}", y, z);
                    // idempotent
                    let (y2, _) = pr.project_z(&[], &y).unwrap();
                    prop_assert!(crate::numerics::dist(&y, &y2) <= 1e-9);
                    prop_assert!(pr.contains_z(&[], &y, 1e-7).unwrap());
                }
                (Err(Error::StageInfeasible(_)), None) => {}
                (a, b) => prop_assert!(false, "projection {:?} vs oracle {:?}", a, b),
            }
        }

        #[test]
        fn membership_agrees_with_distance(
            dims in proptest::collection::vec(1usize..4, 1..3),
            data in proptest::collection::vec(-1.0f64..1.0, 64),
            s in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let pr = random_staged(&dims, &[2, 2], &data);
            let s = &s[..pr.n()];
            if let Ok((y, _)) = pr.project_z(&[], s) {
                let d = crate::numerics::dist(&y, s);
                let inside = pr.contains_z(&[], s, 1e-7).unwrap();
                if d > 1e-6 {
                    prop_assert!(!inside);
                }
                if d == 0.0 {
                    prop_assert!(inside);
                }
                // Points of Z (obtained by projecting shifted copies of s) are never closer.
                for shift in [-1.0, -0.3, 0.4, 1.5] {
                    let t: Vec<f64> = s.iter().enumerate().map(|(i, v)| v + shift * (i as f64 + 1.0)).collect();
                    let (z, _) = pr.project_z(&[], &t).unwrap();
                    prop_assert!(pr.contains_z(&[], &z, 1e-7).unwrap());
                    prop_assert!(d <= crate::numerics::dist(&z, s) + 1e-12);
                }
            }
        }

        #[test]
        fn stage_permutation_commutes(
            data in proptest::collection::vec(-1.0f64..1.0, 64),
            s in proptest::collection::vec(-2.0f64..2.0, 5),
        ) {
            let pr = random_staged(&[2, 3], &[2, 3], &data);
            let swapped = ConsensusProblem::new(
                DenseMatrix::identity(5), vec![0.0; 5], DenseMatrix::zeros(0, 5), vec![],
                vec![pr.stages()[1].clone(), pr.stages()[0].clone()], 0,
            ).unwrap();
            let s_sw: Vec<f64> = s[2..].iter().chain(&s[..2]).copied().collect();
            if let (Ok((y, _)), Ok((y_sw, _))) = (pr.project_z(&[], &s), swapped.project_z(&[], &s_sw)) {
                let back: Vec<f64> = y_sw[3..].iter().chain(&y_sw[..3]).copied().collect();
                prop_assert_eq!(y, back);
            }
        }
    }
}

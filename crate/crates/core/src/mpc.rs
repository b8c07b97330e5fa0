//! Piecewise-affine MPC problems and their consensus reformulation.
//!
//! Variables are laid out as
//! `z = (u₁, w₁, x₂, u₂, w₂, …, x_N, u_N, w_N, x_{N+1})` where `w_k` is a copy of
//! `x_{k+1}`. Stage 1 depends on the initial state `θ = x₁`; the trailing
//! `x_{N+1}` block is an unconstrained stage and the coupling `x_{k+1} = w_k`
//! forms the affine set.
//!
//! Stage costs use the convention `q(x) = ½ xᵀQx + qₗᵀx`, `r(u) = ½ uᵀRu + rₗᵀu`,
//! and `q_{k+1}` is split as `α_k q_{k+1}(x_{k+1}) + (1 − α_k) q_{k+1}(w_k)`.

use serde_json::Value;

use crate::error::{check_len, Error, Result};
use crate::numerics::linalg::Cholesky;
use crate::numerics::{dot, DenseMatrix, Lp, LpOutcome, RowKind};
use crate::polyhedra::Polyhedron;
use crate::problem::{ConsensusProblem, StageSet};

/// `x⁺ = A x + B u + c` on the region `C = {(x, u) : G(x,u) = g, F(x,u) ≤ f}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwaRegion {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: Vec<f64>,
    pub region: Polyhedron,
}

impl PwaRegion {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: Vec<f64>, region: Polyhedron) -> Result<Self> {
        let nx = a.rows();
        if a.cols() != nx || b.rows() != nx || c.len() != nx {
            return Err(Error::DimensionMismatch("region dynamics have inconsistent shapes".into()));
        }
        if region.dim() != nx + b.cols() || region.param_dim() != 0 {
            return Err(Error::DimensionMismatch(format!(
                "region set must live in dimension n_x + n_u = {} without parameters",
                nx + b.cols()
            )));
        }
        Ok(Self { a, b, c, region })
    }

    pub fn nx(&self) -> usize {
        self.a.rows()
    }

    pub fn nu(&self) -> usize {
        self.b.cols()
    }

    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.a.matvec(x);
        let bu = self.b.matvec(u);
        for i in 0..out.len() {
            out[i] += bu[i] + self.c[i];
        }
        out
    }

    pub fn contains(&self, x: &[f64], u: &[f64], tol: f64) -> bool {
        let xu: Vec<f64> = x.iter().chain(u).copied().collect();
        let fp = self.region.instantiate(&[]).expect("parameter-free region");
        fp.max_violation(&xu) <= tol
    }

    fn is_nonempty(&self) -> Result<bool> {
        let d = self.region.dim();
        let mut lp = Lp::new(vec![0.0; d]);
        for i in 0..self.region.num_eq() {
            lp.add_row(self.region.g().row(i).to_vec(), RowKind::Eq, self.region.g0()[i]);
        }
        for i in 0..self.region.num_ineq() {
            lp.add_row(self.region.f().row(i).to_vec(), RowKind::Le, self.region.f0()[i]);
        }
        Ok(lp.solve()? != LpOutcome::Infeasible)
    }
}

/// PWA system over a horizon `N = regions.len()` with quadratic stage costs.
#[derive(Debug, Clone, PartialEq)]
pub struct PwaSystem {
    pub nx: usize,
    pub nu: usize,
    /// Regions per stage `k = 1..N`.
    pub regions: Vec<Vec<PwaRegion>>,
    /// `Q_k` weighting `x_{k+1}`.
    pub q: Vec<DenseMatrix>,
    pub qlin: Vec<Vec<f64>>,
    pub r: Vec<DenseMatrix>,
    pub rlin: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

impl PwaSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        nx: usize,
        nu: usize,
        regions: Vec<Vec<PwaRegion>>,
        q: Vec<DenseMatrix>,
        qlin: Vec<Vec<f64>>,
        r: Vec<DenseMatrix>,
        rlin: Vec<Vec<f64>>,
        alpha: Vec<f64>,
    ) -> Result<Self> {
        let n = regions.len();
        if n == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        for (what, len) in [("Q", q.len()), ("q", qlin.len()), ("R", r.len()), ("r", rlin.len()), ("alpha", alpha.len())] {
            check_len(what, len, n)?;
        }
        for stage in &regions {
            if stage.is_empty() {
                return Err(Error::InvalidInput("every stage needs at least one region".into()));
            }
            for reg in stage {
                if reg.nx() != nx || reg.nu() != nu {
                    return Err(Error::DimensionMismatch("region dimensions differ from (n_x, n_u)".into()));
                }
            }
        }
        for k in 0..n {
            if q[k].shape() != (nx, nx) || r[k].shape() != (nu, nu) {
                return Err(Error::DimensionMismatch(format!("cost matrices of stage {k} have wrong shape")));
            }
            check_len("state cost vector", qlin[k].len(), nx)?;
            check_len("input cost vector", rlin[k].len(), nu)?;
            Cholesky::new(&q[k])?;
            Cholesky::new(&r[k])?;
            if !(alpha[k] > 0.0 && alpha[k] < 1.0) {
                return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", alpha[k])));
            }
        }
        Ok(Self { nx, nu, regions, q, qlin, r, rlin, alpha })
    }

    /// Same regions and costs at every stage.
    pub fn time_invariant(
        regions: Vec<PwaRegion>,
        q: DenseMatrix,
        r: DenseMatrix,
        alpha: f64,
        horizon: usize,
    ) -> Result<Self> {
        let first = regions.first().ok_or_else(|| Error::InvalidInput("no regions".into()))?;
        let (nx, nu) = (first.nx(), first.nu());
        for reg in &regions {
            if !reg.is_nonempty()? {
                return Err(Error::InvalidInput("a PWA region is empty".into()));
            }
        }
        Self::new(
            nx,
            nu,
            vec![regions; horizon],
            vec![q; horizon],
            vec![vec![0.0; nx]; horizon],
            vec![r; horizon],
            vec![vec![0.0; nu]; horizon],
            vec![alpha; horizon],
        )
    }

    pub fn horizon(&self) -> usize {
        self.regions.len()
    }

    /// Truncates the horizon, or extends it by repeating the last stage.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let pick = |k: usize| k.min(self.horizon() - 1);
        Self::new(
            self.nx,
            self.nu,
            (0..horizon).map(|k| self.regions[pick(k)].clone()).collect(),
            (0..horizon).map(|k| self.q[pick(k)].clone()).collect(),
            (0..horizon).map(|k| self.qlin[pick(k)].clone()).collect(),
            (0..horizon).map(|k| self.r[pick(k)].clone()).collect(),
            (0..horizon).map(|k| self.rlin[pick(k)].clone()).collect(),
            (0..horizon).map(|k| self.alpha[pick(k)]).collect(),
        )
    }

    pub fn num_vars(&self) -> usize {
        let n = self.horizon();
        n * self.nu + 2 * n * self.nx
    }

    /// Offset of `u_k`, `k = 1..N`.
    pub fn u_index(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.horizon());
        if k == 1 {
            0
        } else {
            self.nu + self.nx + (k - 2) * (2 * self.nx + self.nu) + self.nx
        }
    }

    /// Offset of `w_k`, `k = 1..N`.
    pub fn w_index(&self, k: usize) -> usize {
        self.u_index(k) + self.nu
    }

    /// Offset of `x_k`, `k = 2..N+1`.
    pub fn x_index(&self, k: usize) -> usize {
        debug_assert!(k >= 2 && k <= self.horizon() + 1);
        self.nu + self.nx + (k - 2) * (2 * self.nx + self.nu)
    }

    /// Predicted inputs `u_1..u_N` and states `x_2..x_{N+1}` from a consensus vector.
    pub fn unpack(&self, z: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.horizon();
        let us = (1..=n).map(|k| z[self.u_index(k)..self.u_index(k) + self.nu].to_vec()).collect();
        let xs = (2..=n + 1).map(|k| z[self.x_index(k)..self.x_index(k) + self.nx].to_vec()).collect();
        (us, xs)
    }

    /// Original (unsplit) MPC cost of a trajectory.
    pub fn trajectory_cost(&self, us: &[Vec<f64>], xs: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for k in 0..self.horizon() {
            total += 0.5 * dot(&xs[k], &self.q[k].matvec(&xs[k])) + dot(&self.qlin[k], &xs[k]);
            total += 0.5 * dot(&us[k], &self.r[k].matvec(&us[k])) + dot(&self.rlin[k], &us[k]);
        }
        total
    }

    fn hessian_and_linear(&self) -> (DenseMatrix, Vec<f64>) {
        let n = self.num_vars();
        let mut hess = DenseMatrix::zeros(n, n);
        let mut h = vec![0.0; n];
        for k in 1..=self.horizon() {
            let j = k - 1;
            let (iu, iw, ix) = (self.u_index(k), self.w_index(k), self.x_index(k + 1));
            let a = self.alpha[j];
            hess.set_block(iu, iu, &self.r[j]);
            hess.set_block(iw, iw, &self.q[j].scaled(1.0 - a));
            hess.set_block(ix, ix, &self.q[j].scaled(a));
            h[iu..iu + self.nu].copy_from_slice(&self.rlin[j]);
            for i in 0..self.nx {
                h[iw + i] = (1.0 - a) * self.qlin[j][i];
                h[ix + i] = a * self.qlin[j][i];
            }
        }
        (hess, h)
    }

    fn stage_sets(&self) -> Result<Vec<StageSet>> {
        let (nx, nu) = (self.nx, self.nu);
        let mut stages = Vec::with_capacity(self.horizon() + 1);

        // Stage 1 over (u₁, w₁), parametric in θ = x₁.
        let mut comps = Vec::new();
        for reg in &self.regions[0] {
            let c = &reg.region;
            let (ne, ni) = (c.num_eq(), c.num_ineq());
            let mut g = DenseMatrix::zeros(nx + ne, nu + nx);
            let mut gt = DenseMatrix::zeros(nx + ne, nx);
            let mut g0 = reg.c.clone();
            g.set_block(0, 0, &reg.b.scaled(-1.0));
            g.set_block(0, nu, &DenseMatrix::identity(nx));
            gt.set_block(0, 0, &reg.a);
            g.set_block(nx, 0, &c.g().block(0, nx, ne, nu));
            gt.set_block(nx, 0, &c.g().block(0, 0, ne, nx).scaled(-1.0));
            g0.extend_from_slice(c.g0());
            let mut f = DenseMatrix::zeros(ni, nu + nx);
            f.set_block(0, 0, &c.f().block(0, nx, ni, nu));
            let ft = c.f().block(0, 0, ni, nx).scaled(-1.0);
            comps.push(Polyhedron::new(nu + nx, nx, g, g0, Some(gt), f, c.f0().to_vec(), Some(ft))?);
        }
        stages.push(StageSet::new(nu + nx, comps)?);

        // Stages 2..N over (x_k, u_k, w_k).
        let d = 2 * nx + nu;
        for regs in &self.regions[1..] {
            let mut comps = Vec::new();
            for reg in regs {
                let c = &reg.region;
                let (ne, ni) = (c.num_eq(), c.num_ineq());
                let mut g = DenseMatrix::zeros(nx + ne, d);
                g.set_block(0, 0, &reg.a.scaled(-1.0));
                g.set_block(0, nx, &reg.b.scaled(-1.0));
                g.set_block(0, nx + nu, &DenseMatrix::identity(nx));
                g.set_block(nx, 0, c.g());
                let mut g0 = reg.c.clone();
                g0.extend_from_slice(c.g0());
                let mut f = DenseMatrix::zeros(ni, d);
                f.set_block(0, 0, c.f());
                comps.push(Polyhedron::new(d, nx, g, g0, None, f, c.f0().to_vec(), None)?);
            }
            stages.push(StageSet::new(d, comps)?);
        }
        stages.push(StageSet::free(nx, nx));
        Ok(stages)
    }

    fn coupling(&self) -> DenseMatrix {
        let (nx, n) = (self.nx, self.horizon());
        let mut a = DenseMatrix::zeros(n * nx, self.num_vars());
        for k in 1..=n {
            for i in 0..nx {
                let row = (k - 1) * nx + i;
                a[(row, self.x_index(k + 1) + i)] = 1.0;
                a[(row, self.w_index(k) + i)] = -1.0;
            }
        }
        a
    }
}

/// Consensus reformulation of a PWA MPC problem; `θ` is the initial state.
pub fn build_consensus(system: &PwaSystem) -> Result<ConsensusProblem> {
    let (hess, h) = system.hessian_and_linear();
    let a = system.coupling();
    let m = a.rows();
    Ok(ConsensusProblem::new(hess, h, a, vec![0.0; m], system.stage_sets()?, system.nx)?.mark_mpc())
}

/// Linear cost for tracking `x̄_{k+1}` and `ū_k`, i.e. stage costs
/// `½(x − x̄)ᵀQ(x − x̄) + ½(u − ū)ᵀR(u − ū)`. Returns `h` and the constant offset
/// that makes `½zᵀHz + hᵀz + const` equal the tracking cost.
pub fn update_reference(system: &PwaSystem, x_ref: &[Vec<f64>], u_ref: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = system.horizon();
    check_len("state reference", x_ref.len(), n)?;
    check_len("input reference", u_ref.len(), n)?;
    let mut h = vec![0.0; system.num_vars()];
    let mut constant = 0.0;
    for k in 1..=n {
        let j = k - 1;
        check_len("state reference entry", x_ref[j].len(), system.nx)?;
        check_len("input reference entry", u_ref[j].len(), system.nu)?;
        let qx = system.q[j].matvec(&x_ref[j]);
        let ru = system.r[j].matvec(&u_ref[j]);
        constant += 0.5 * dot(&x_ref[j], &qx) + 0.5 * dot(&u_ref[j], &ru);
        let a = system.alpha[j];
        let (iu, iw, ix) = (system.u_index(k), system.w_index(k), system.x_index(k + 1));
        for i in 0..system.nu {
            h[iu + i] = -ru[i];
        }
        for i in 0..system.nx {
            h[iw + i] = -(1.0 - a) * qx[i];
            h[ix + i] = -a * qx[i];
        }
    }
    Ok((h, constant))
}

/// The two-region hybrid system with rotation-like dynamics, `u ∈ [−1, 1]`,
/// regions split by the sign of `x₁`, and unit state and input weights.
pub fn two_region_example(horizon: usize) -> Result<PwaSystem> {
    let s3 = 3f64.sqrt();
    let a1 = DenseMatrix::from_rows(&[vec![0.4, -0.4 * s3], vec![0.4 * s3, 0.4]], 2)?;
    let a2 = DenseMatrix::from_rows(&[vec![0.4, 0.4 * s3], vec![-0.4 * s3, 0.4]], 2)?;
    let b = DenseMatrix::from_rows(&[vec![0.0], vec![1.0]], 1)?;
    let region = |sign: f64| -> Result<Polyhedron> {
        let f = DenseMatrix::from_rows(
            &[vec![-sign, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]],
            3,
        )?;
        Polyhedron::fixed(3, DenseMatrix::zeros(0, 3), vec![], f, vec![0.0, 1.0, 1.0])
    };
    let regions = vec![
        PwaRegion::new(a1, b.clone(), vec![0.0; 2], region(1.0)?)?,
        PwaRegion::new(a2, b, vec![0.0; 2], region(-1.0)?)?,
    ];
    PwaSystem::time_invariant(regions, DenseMatrix::identity(2), DenseMatrix::identity(1), 0.5, horizon)
}

/// Parsed PWA system file with optional tracking references.
#[derive(Debug, Clone)]
pub struct PwaFile {
    pub system: PwaSystem,
    pub x_ref: Option<Vec<Vec<f64>>>,
    pub u_ref: Option<Vec<Vec<f64>>>,
    /// Default initial state.
    pub x0: Option<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn matrix(v: &Value, what: &str) -> Result<DenseMatrix> {
    serde_json::from_value(v.clone()).map_err(|e| bad(format!("{what}: {e}")))
}

fn is_matrix_list(v: &Value) -> bool {
    v.as_array()
        .and_then(|a| a.first())
        .and_then(|r| r.as_array())
        .and_then(|r| r.first())
        .is_some_and(|x| x.is_array())
}

fn per_stage_matrix(v: &Value, what: &str, horizon: usize) -> Result<Vec<DenseMatrix>> {
    if is_matrix_list(v) {
        let list: Vec<Value> = v.as_array().cloned().unwrap_or_default();
        check_len(what, list.len(), horizon)?;
        list.iter().map(|m| matrix(m, what)).collect()
    } else {
        Ok(vec![matrix(v, what)?; horizon])
    }
}

fn parse_region(v: &Value, nx: usize, nu: usize) -> Result<PwaRegion> {
    let a = matrix(v.get("A").ok_or_else(|| bad("region without A"))?, "A")?;
    let b = matrix(v.get("B").ok_or_else(|| bad("region without B"))?, "B")?;
    let b = if b.rows() == 0 { DenseMatrix::zeros(nx, nu) } else { b };
    let c: Vec<f64> = match v.get("c") {
        Some(c) => serde_json::from_value(c.clone()).map_err(|e| bad(format!("c: {e}")))?,
        None => vec![0.0; nx],
    };
    let d = nx + nu;
    let (f, f0) = match v.get("Cf") {
        Some(cf) => {
            let f = matrix(cf.get("F").ok_or_else(|| bad("Cf without F"))?, "Cf.F")?;
            let f0: Vec<f64> = serde_json::from_value(cf.get("f").cloned().unwrap_or(Value::Null))
                .map_err(|e| bad(format!("Cf.f: {e}")))?;
            (f, f0)
        }
        None => (DenseMatrix::zeros(0, d), Vec::new()),
    };
    let (g, g0) = match v.get("Cg") {
        Some(cg) if !cg.is_null() => {
            let g = matrix(cg.get("G").ok_or_else(|| bad("Cg without G"))?, "Cg.G")?;
            let g0: Vec<f64> = serde_json::from_value(cg.get("g").cloned().unwrap_or(Value::Null))
                .map_err(|e| bad(format!("Cg.g: {e}")))?;
            (g, g0)
        }
        _ => (DenseMatrix::zeros(0, d), Vec::new()),
    };
    PwaRegion::new(a, b, c, Polyhedron::fixed(d, g, g0, f, f0)?)
}

impl PwaFile {
    /// Reads `{n_x, n_u, N, regions, Q, R, alpha, x_ref?, u_ref?, x0?}`. `regions`, `Q`,
    /// `R` and `alpha` may be given once for all stages or per stage.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| bad(e.to_string()))?;
        let get_usize = |key: &str| -> Result<usize> {
            v.get(key).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad(format!("missing {key}")))
        };
        let (nx, nu, horizon) = (get_usize("n_x")?, get_usize("n_u")?, get_usize("N")?);
        Self::from_value(&v, nx, nu, horizon)
    }

    /// As [`PwaFile::from_json_str`] with the horizon overridden.
    pub fn from_json_str_with_horizon(s: &str, horizon: usize) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| bad(e.to_string()))?;
        let get_usize = |key: &str| -> Result<usize> {
            v.get(key).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad(format!("missing {key}")))
        };
        let (nx, nu) = (get_usize("n_x")?, get_usize("n_u")?);
        let file_n = get_usize("N")?;
        let regions_len = v.get("regions").and_then(Value::as_array).map_or(0, Vec::len);
        if regions_len > 1 && regions_len != horizon {
            return Err(bad(format!("file has {file_n} per-stage region lists; cannot use horizon {horizon}")));
        }
        Self::from_value(&v, nx, nu, horizon)
    }

    fn from_value(v: &Value, nx: usize, nu: usize, horizon: usize) -> Result<Self> {
        let regions_v = v.get("regions").and_then(Value::as_array).ok_or_else(|| bad("missing regions"))?;
        let per_stage: Vec<Vec<PwaRegion>> = regions_v
            .iter()
            .map(|st| {
                st.as_array()
                    .ok_or_else(|| bad("regions must be a list of lists"))?
                    .iter()
                    .map(|r| parse_region(r, nx, nu))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let regions = match per_stage.len() {
            1 => vec![per_stage[0].clone(); horizon],
            l if l == horizon => per_stage,
            l => return Err(bad(format!("regions has {l} stages, expected 1 or {horizon}"))),
        };
        for stage in &regions {
            for reg in stage {
                if !reg.is_nonempty()? {
                    return Err(bad("a PWA region is empty"));
                }
            }
        }
        let q = per_stage_matrix(v.get("Q").ok_or_else(|| bad("missing Q"))?, "Q", horizon)?;
        let r = per_stage_matrix(v.get("R").ok_or_else(|| bad("missing R"))?, "R", horizon)?;
        let alpha = match v.get("alpha") {
            None => vec![0.5; horizon],
            Some(Value::Array(a)) => {
                check_len("alpha", a.len(), horizon)?;
                a.iter().map(|x| x.as_f64().ok_or_else(|| bad("alpha entries must be numbers"))).collect::<Result<_>>()?
            }
            Some(x) => vec![x.as_f64().ok_or_else(|| bad("alpha must be a number"))?; horizon],
        };
        let system = PwaSystem::new(
            nx,
            nu,
            regions,
            q,
            vec![vec![0.0; nx]; horizon],
            r,
            vec![vec![0.0; nu]; horizon],
            alpha,
        )?;
        let refs = |key: &str, width: usize| -> Result<Option<Vec<Vec<f64>>>> {
            match v.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(x) => {
                    let r: Vec<Vec<f64>> =
                        serde_json::from_value(x.clone()).map_err(|e| bad(format!("{key}: {e}")))?;
                    let r = if r.len() == 1 { vec![r[0].clone(); horizon] } else { r };
                    check_len(key, r.len(), horizon)?;
                    for e in &r {
                        check_len(key, e.len(), width)?;
                    }
                    Ok(Some(r))
                }
            }
        };
        let x_ref = refs("x_ref", nx)?;
        let u_ref = refs("u_ref", nu)?;
        let x0: Option<Vec<f64>> = match v.get("x0") {
            None | Some(Value::Null) => None,
            Some(x) => Some(serde_json::from_value(x.clone()).map_err(|e| bad(format!("x0: {e}")))?),
        };
        if let Some(x0) = &x0 {
            check_len("x0", x0.len(), nx)?;
        }
        Ok(Self { system, x_ref, u_ref, x0 })
    }

    /// Consensus problem including any tracking references.
    pub fn build(&self) -> Result<ConsensusProblem> {
        let pr = build_consensus(&self.system)?;
        if self.x_ref.is_none() && self.u_ref.is_none() {
            return Ok(pr);
        }
        let n = self.system.horizon();
        let xr = self.x_ref.clone().unwrap_or_else(|| vec![vec![0.0; self.system.nx]; n]);
        let ur = self.u_ref.clone().unwrap_or_else(|| vec![vec![0.0; self.system.nu]; n]);
        let (h, _) = update_reference(&self.system, &xr, &ur)?;
        pr.with_linear_cost(h)
    }
}

/// Serializes a time-invariant system (stage-0 data) in the file layout.
pub fn system_to_json(system: &PwaSystem) -> String {
    let region = |r: &PwaRegion| {
        let mut obj = serde_json::json!({
            "A": r.a, "B": r.b, "c": r.c,
            "Cf": { "F": r.region.f(), "f": r.region.f0() },
        });
        if r.region.num_eq() > 0 {
            obj["Cg"] = serde_json::json!({ "G": r.region.g(), "g": r.region.g0() });
        }
        obj
    };
    let regions: Vec<Value> = system.regions[0].iter().map(region).collect();
    let v = serde_json::json!({
        "n_x": system.nx,
        "n_u": system.nu,
        "N": system.horizon(),
        "regions": [regions],
        "Q": system.q[0],
        "R": system.r[0],
        "alpha": system.alpha[0],
    });
    serde_json::to_string_pretty(&v).expect("system serializes")
}

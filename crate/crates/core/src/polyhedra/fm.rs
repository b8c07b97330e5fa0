//! Polyhedral cones given by generators, and their half-space form via
//! Fourier–Motzkin elimination.

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Lp, LpOutcome, RowKind};

pub const FM_ROW_CAP: usize = 20_000;

const COEF_TOL: f64 = 1e-12;
const LP_TOL: f64 = 1e-9;

/// `{ Σ ν_j ℓ_j + Σ μ_i r_i : ν free, μ ≥ 0 }`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorCone {
    pub dim: usize,
    pub lines: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
}

/// `{ v : d·v ≤ 0 for every row d }`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeHrep {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
}

impl GeneratorCone {
    pub fn new(dim: usize, lines: Vec<Vec<f64>>, rays: Vec<Vec<f64>>) -> Result<Self> {
        if lines.iter().chain(&rays).any(|g| g.len() != dim) {
            return Err(Error::DimensionMismatch("generator length differs from cone dimension".into()));
        }
        Ok(Self { dim, lines, rays })
    }

    pub fn generators(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.lines.iter().chain(&self.rays)
    }
}

impl ConeHrep {
    pub fn whole_space(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let scale = norm(v).max(1.0);
        self.rows.iter().all(|d| dot(d, v) <= tol * scale * norm(d).max(1.0))
    }

    /// `max cᵀv` over the cone intersected with the unit box.
    pub fn max_over_box(&self, c: &[f64]) -> Result<f64> {
        let mut lp = Lp::maximize(c);
        lp.set_all_bounds(-1.0, 1.0);
        for d in &self.rows {
            lp.add_row(d.clone(), RowKind::Le, 0.0);
        }
        match lp.solve()? {
            LpOutcome::Optimal { objective, .. } => Ok(-objective),
            LpOutcome::Infeasible => Err(Error::Lp("cone with box cannot be infeasible".into())),
            LpOutcome::Unbounded => Err(Error::Lp("boxed LP reported unbounded".into())),
        }
    }

    /// True iff the cone is `{0}`.
    pub fn is_zero(&self) -> Result<bool> {
        let mut e = vec![0.0; self.dim];
        for i in 0..self.dim {
            for sign in [1.0, -1.0] {
                e[i] = sign;
                if self.max_over_box(&e)? > LP_TOL {
                    return Ok(false);
                }
            }
            e[i] = 0.0;
        }
        Ok(true)
    }

    /// Indices of rows that hold with equality on the whole cone.
    pub fn implicit_equalities(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, d) in self.rows.iter().enumerate() {
            let neg: Vec<f64> = d.iter().map(|x| -x).collect();
            if self.max_over_box(&neg)? <= LP_TOL * norm(d).max(1.0) {
                out.push(i);
            }
        }
        Ok(out)
    }
}

/// LP membership test for a generator cone: minimizes the ℓ₁ residual of `v = Lν + Rμ`.
pub fn cone_contains(cone: &GeneratorCone, v: &[f64], tol: f64) -> Result<bool> {
    let n = cone.dim;
    let nl = cone.lines.len();
    let nr = cone.rays.len();
    let nv = nl + nr + 2 * n;
    let mut obj = vec![0.0; nv];
    obj[nl + nr..].iter_mut().for_each(|c| *c = 1.0);
    let mut lp = Lp::new(obj);
    for j in nl..nv {
        lp.set_bounds(j, 0.0, f64::INFINITY);
    }
    for r in 0..n {
        let mut row = vec![0.0; nv];
        for (j, g) in cone.generators().enumerate() {
            row[j] = g[r];
        }
        row[nl + nr + r] = 1.0;
        row[nl + nr + n + r] = -1.0;
        lp.add_row(row, RowKind::Eq, v[r]);
    }
    match lp.solve()? {
        LpOutcome::Optimal { objective, .. } => Ok(objective <= tol * (1.0 + norm(v))),
        other => Err(Error::Lp(format!("membership LP ended with {other:?}"))),
    }
}

#[derive(Clone)]
struct Row {
    coef: Vec<f64>,
    eq: bool,
}

/// Half-space description of a generator cone, by eliminating the generator weights
/// from `v − Lν − Rμ = 0, −μ ≤ 0`.
pub fn fm_project_cone(cone: &GeneratorCone, cap: usize) -> Result<ConeHrep> {
    let n = cone.dim;
    let nl = cone.lines.len();
    let nr = cone.rays.len();
    let total = n + nl + nr;

    let mut rows: Vec<Row> = Vec::with_capacity(n + nr);
    for r in 0..n {
        let mut coef = vec![0.0; total];
        coef[r] = 1.0;
        for (j, g) in cone.generators().enumerate() {
            coef[n + j] = -g[r];
        }
        rows.push(Row { coef, eq: true });
    }
    for i in 0..nr {
        let mut coef = vec![0.0; total];
        coef[n + nl + i] = -1.0;
        rows.push(Row { coef, eq: false });
    }

    for x in n..total {
        rows = eliminate(rows, x, cap)?;
        rows = tidy(rows);
        rows = drop_redundant(rows)?;
    }

    let mut out = Vec::new();
    for row in rows {
        let v = row.coef[..n].to_vec();
        if row.eq {
            out.push(v.iter().map(|x| -x).collect());
        }
        out.push(v);
    }
    let mut h = ConeHrep { dim: n, rows: out };
    h.rows = tidy(h.rows.into_iter().map(|coef| Row { coef, eq: false }).collect())
        .into_iter()
        .map(|r| r.coef)
        .collect();
    Ok(h)
}

fn eliminate(rows: Vec<Row>, x: usize, cap: usize) -> Result<Vec<Row>> {
    // Gaussian step through an equality when one involves x.
    let pivot = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.eq && r.coef[x].abs() > COEF_TOL * norm(&r.coef))
        .max_by(|a, b| a.1.coef[x].abs().total_cmp(&b.1.coef[x].abs()))
        .map(|(i, _)| i);
    if let Some(pi) = pivot {
        let p = rows[pi].clone();
        let mut out = Vec::with_capacity(rows.len() - 1);
        for (i, mut r) in rows.into_iter().enumerate() {
            if i == pi {
                continue;
            }
            let c = r.coef[x];
            if c != 0.0 {
                let m = c / p.coef[x];
                r.coef.iter_mut().zip(&p.coef).for_each(|(a, b)| *a -= m * b);
            }
            r.coef[x] = 0.0;
            out.push(r);
        }
        return Ok(out);
    }

    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out = Vec::new();
    for mut r in rows {
        let scale = norm(&r.coef);
        let c = r.coef[x];
        if c > COEF_TOL * scale {
            pos.push(r);
        } else if c < -COEF_TOL * scale {
            neg.push(r);
        } else {
            r.coef[x] = 0.0;
            out.push(r);
        }
    }
    if out.len() + pos.len() * neg.len() > cap {
        return Err(Error::BlowUp { cap });
    }
    for p in &pos {
        for q in &neg {
            let (a, b) = (-q.coef[x], p.coef[x]);
            let mut coef: Vec<f64> = p.coef.iter().zip(&q.coef).map(|(u, v)| a * u + b * v).collect();
            coef[x] = 0.0;
            out.push(Row { coef, eq: false });
        }
    }
    Ok(out)
}

/// Normalizes rows to unit length, drops zero rows and near-duplicates.
fn tidy(rows: Vec<Row>) -> Vec<Row> {
    let mut out: Vec<Row> = Vec::with_capacity(rows.len());
    for mut r in rows {
        let nr = norm(&r.coef);
        if nr <= 1e-13 {
            continue;
        }
        r.coef.iter_mut().for_each(|c| *c /= nr);
        if r.eq {
            if let Some(first) = r.coef.iter().find(|c| c.abs() > 1e-12) {
                if *first < 0.0 {
                    r.coef.iter_mut().for_each(|c| *c = -*c);
                }
            }
        }
        let dup = out.iter().any(|o| {
            o.eq == r.eq && o.coef.iter().zip(&r.coef).all(|(a, b)| (a - b).abs() <= 1e-10)
        });
        if !dup {
            out.push(r);
        }
    }
    out
}

/// Removes inequality rows implied by the remaining ones (LP over the unit box).
fn drop_redundant(rows: Vec<Row>) -> Result<Vec<Row>> {
    let n_ineq = rows.iter().filter(|r| !r.eq).count();
    if n_ineq <= 1 {
        return Ok(rows);
    }
    let dim = rows[0].coef.len();
    let mut keep = vec![true; rows.len()];
    for i in 0..rows.len() {
        if rows[i].eq {
            continue;
        }
        let mut lp = Lp::maximize(&rows[i].coef);
        lp.set_all_bounds(-1.0, 1.0);
        for (j, r) in rows.iter().enumerate() {
            if j == i || !keep[j] {
                continue;
            }
            let kind = if r.eq { RowKind::Eq } else { RowKind::Le };
            lp.add_row(r.coef.clone(), kind, 0.0);
        }
        debug_assert_eq!(lp.num_vars(), dim);
        if let LpOutcome::Optimal { objective, .. } = lp.solve()? {
            if -objective <= LP_TOL {
                keep[i] = false;
            }
        }
    }
    Ok(rows.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect())
}

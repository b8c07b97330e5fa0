//! Exact check of the regularity assumption on `Z`: at every point either the
//! regular normal cone `N` is `{0}`, or every small move in `N^⊥` stays in `Z`.
//!
//! The check is parameter-free. For every realizable active structure (set of
//! active components and their active rows) it builds `N` as the intersection of
//! the components' normal cones and tests `N^⊥ ⊆ ∪ R_i`, where `R_i` are the
//! recession cones of the active faces. Stages are checked independently.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::linalg::orthonormal_span;
use crate::numerics::{dot, norm, DenseMatrix, Lp, LpOutcome, RowKind};
use crate::polyhedra::{fm_project_cone, ConeHrep, GeneratorCone, Polyhedron, FM_ROW_CAP, MEMBERSHIP_TOL};
use crate::problem::StageSet;

/// Minimum slack for an active structure to count as realizable.
pub const REALIZE_TOL: f64 = 1e-7;
/// Bound on `|z|` and `|θ|` in the realizability LPs.
pub const REALIZE_BOX: f64 = 1e4;
/// Step along a witness used to confirm that it leaves `Z`.
pub const WITNESS_STEP: f64 = 1e-3;
const FULLDIM_TOL: f64 = 1e-9;
const CONTAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct A3Options {
    /// Limit on candidate active structures per stage.
    pub structure_cap: usize,
    pub fm_cap: usize,
    /// Limit on work cones in the covering recursion.
    pub cover_cap: usize,
}

impl Default for A3Options {
    fn default() -> Self {
        Self { structure_cap: 100_000, fm_cap: FM_ROW_CAP, cover_cap: 100_000 }
    }
}

/// Active components and, aligned with them, their active inequality rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ActiveStructure {
    pub components: Vec<usize>,
    pub active_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct A3Violation {
    pub stage: usize,
    pub structure: ActiveStructure,
    /// Unit direction in `N^⊥` outside every recession cone.
    pub witness: Vec<f64>,
    /// A point realizing the structure, and its parameter.
    pub point: Vec<f64>,
    pub theta: Vec<f64>,
    /// `max |⟨w, v⟩|` over `v ∈ N` with `‖v‖∞ ≤ 1`.
    pub orthogonality: f64,
    /// Whether `point + WITNESS_STEP·w` lies outside every component at `theta`.
    pub escapes: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: usize,
    pub realizable_structures: usize,
    pub nontrivial_normal_cones: usize,
    /// Earlier stage with identical data, whose result was reused.
    pub same_as: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct A3Report {
    pub satisfied: bool,
    pub violations: Vec<A3Violation>,
    pub stages: Vec<StageSummary>,
}

pub fn check_a3(stages: &[StageSet]) -> Result<A3Report> {
    check_a3_with(stages, &A3Options::default())
}

pub fn check_a3_with(stages: &[StageSet], opts: &A3Options) -> Result<A3Report> {
    let mut first_of: Vec<usize> = Vec::with_capacity(stages.len());
    for (k, st) in stages.iter().enumerate() {
        first_of.push((0..k).find(|&j| first_of[j] == j && stages[j] == *st).unwrap_or(k));
    }
    let unique: Vec<usize> = (0..stages.len()).filter(|&k| first_of[k] == k).collect();
    let outcomes: Vec<StageOutcome> =
        unique.par_iter().map(|&k| check_stage(&stages[k], opts)).collect::<Result<_>>()?;
    let by_stage: HashMap<usize, &StageOutcome> = unique.iter().copied().zip(&outcomes).collect();

    let mut violations = Vec::new();
    let mut summaries = Vec::new();
    for k in 0..stages.len() {
        let out = by_stage[&first_of[k]];
        summaries.push(StageSummary {
            stage: k,
            realizable_structures: out.realizable,
            nontrivial_normal_cones: out.nontrivial,
            same_as: (first_of[k] != k).then_some(first_of[k]),
        });
        for v in &out.violations {
            violations.push(A3Violation { stage: k, ..v.clone() });
        }
    }
    Ok(A3Report { satisfied: violations.is_empty(), violations, stages: summaries })
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub realizable: usize,
    pub nontrivial: usize,
    /// Violations with `stage` set to zero.
    pub violations: Vec<A3Violation>,
}

/// One stage of the check.
pub fn check_stage(stage: &StageSet, opts: &A3Options) -> Result<StageOutcome> {
    let comps = &stage.components;
    let m = comps.len();
    if m >= usize::BITS as usize - 1 || (1usize << m) > opts.structure_cap.saturating_add(1) {
        return Err(Error::CombinatorialCap { what: "active component sets", cap: opts.structure_cap });
    }
    // Active sets each component can realize on its own; every joint structure is built from these.
    let mut single: Vec<Vec<u64>> = Vec::with_capacity(m);
    for c in comps {
        let mi = c.num_ineq();
        if mi >= 63 || (1usize << mi) > opts.structure_cap {
            return Err(Error::CombinatorialCap { what: "active inequality sets", cap: opts.structure_cap });
        }
        let mut ok = Vec::new();
        for mask in 0..(1u64 << mi) {
            if realize(stage, &[(c, mask)], &[])?.is_some() {
                ok.push(mask);
            }
        }
        single.push(ok);
    }

    let mut total: usize = 0;
    for set in 1..(1usize << m) {
        let mut count = 1usize;
        for (i, s) in single.iter().enumerate() {
            if set >> i & 1 == 1 {
                count = count.saturating_mul(s.len());
            }
        }
        total = total.saturating_add(count);
    }
    if total > opts.structure_cap {
        return Err(Error::CombinatorialCap { what: "active structures", cap: opts.structure_cap });
    }

    let mut cone_cache: HashMap<(usize, u64), ConeHrep> = HashMap::new();
    let mut out = StageOutcome { realizable: 0, nontrivial: 0, violations: Vec::new() };
    for set in 1..(1usize << m) {
        let members: Vec<usize> = (0..m).filter(|i| set >> i & 1 == 1).collect();
        let excluded: Vec<usize> = (0..m).filter(|i| set >> i & 1 == 0).collect();
        let mut pick = vec![0usize; members.len()];
        'combos: loop {
            if members.iter().all(|&i| !single[i].is_empty()) {
                let masks: Vec<u64> = members.iter().zip(&pick).map(|(&i, &p)| single[i][p]).collect();
                let active: Vec<(&Polyhedron, u64)> = members.iter().zip(&masks).map(|(&i, &k)| (&comps[i], k)).collect();
                let excl: Vec<&Polyhedron> = excluded.iter().map(|&j| &comps[j]).collect();
                if let Some((z, theta)) = realize_excluding(stage, &active, &excl)? {
                    out.realizable += 1;
                    let structure = ActiveStructure {
                        components: members.clone(),
                        active_sets: masks.iter().map(|&k| mask_indices(k)).collect(),
                    };
                    if let Some(v) = check_structure(stage, &structure, &masks, &z, &theta, &mut cone_cache, opts, &mut out)? {
                        out.violations.push(v);
                    }
                }
            } else {
                break 'combos;
            }
            // Advance the mixed-radix counter over the members' realizable masks.
            let mut k = members.len();
            loop {
                if k == 0 {
                    break 'combos;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < single[members[k]].len() {
                    break;
                }
                pick[k] = 0;
            }
        }
    }
    Ok(out)
}

fn mask_indices(mask: u64) -> Vec<usize> {
    (0..64).filter(|j| mask >> j & 1 == 1).collect()
}

#[allow(clippy::too_many_arguments)]
fn check_structure(
    stage: &StageSet,
    structure: &ActiveStructure,
    masks: &[u64],
    z: &[f64],
    theta: &[f64],
    cache: &mut HashMap<(usize, u64), ConeHrep>,
    opts: &A3Options,
    out: &mut StageOutcome,
) -> Result<Option<A3Violation>> {
    let d = stage.dim;
    let mut rows = Vec::new();
    for (&i, &mask) in structure.components.iter().zip(masks) {
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry((i, mask)) {
            let c = &stage.components[i];
            let lines = c.g().to_rows();
            let rays = mask_indices(mask).into_iter().map(|j| c.f().row(j).to_vec()).collect();
            let cone = fm_project_cone(&GeneratorCone::new(d, lines, rays)?, opts.fm_cap)?;
            e.insert(cone);
        }
        rows.extend(cache[&(i, mask)].rows.iter().cloned());
    }
    let normal = ConeHrep { dim: d, rows };
    if cone_zero_test(&normal)? {
        return Ok(None);
    }
    out.nontrivial += 1;

    let eq = normal.implicit_equalities()?;
    let eq_rows: Vec<Vec<f64>> = eq.iter().map(|&i| normal.rows[i].clone()).collect();
    let basis = orthonormal_span(&eq_rows, d, 1e-9);
    let recession: Vec<ConeHrep> =
        structure.components.iter().zip(masks).map(|(&i, &mask)| recession_cone(&stage.components[i], mask)).collect();
    let cov = subspace_in_cone_union(&basis, &recession, opts.cover_cap)?;
    let Some(w) = cov.witness else {
        return Ok(None);
    };

    let mut orthogonality = 0.0f64;
    for sign in [1.0, -1.0] {
        let c: Vec<f64> = w.iter().map(|x| sign * x).collect();
        orthogonality = orthogonality.max(normal.max_over_box(&c)?);
    }
    let moved: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + WITNESS_STEP * b).collect();
    let mut escapes = true;
    for c in &stage.components {
        if c.instantiate(theta)?.contains(&moved, MEMBERSHIP_TOL)? {
            escapes = false;
        }
    }
    Ok(Some(A3Violation {
        stage: 0,
        structure: structure.clone(),
        witness: w,
        point: z.to_vec(),
        theta: theta.to_vec(),
        orthogonality,
        escapes,
    }))
}

/// `{v : G v = 0, F_A v ≤ 0}`.
pub fn recession_cone(c: &Polyhedron, mask: u64) -> ConeHrep {
    let mut rows = Vec::new();
    for r in c.g().to_rows() {
        rows.push(r.iter().map(|x| -x).collect());
        rows.push(r);
    }
    for j in mask_indices(mask) {
        rows.push(c.f().row(j).to_vec());
    }
    ConeHrep { dim: c.dim(), rows }
}

/// True iff the cone contains no non-zero vector.
pub fn cone_zero_test(cone: &ConeHrep) -> Result<bool> {
    cone.is_zero()
}

fn realize(stage: &StageSet, active: &[(&Polyhedron, u64)], excluded: &[(&Polyhedron, usize)]) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let d = stage.dim;
    let p = stage.components[0].param_dim();
    let nv = d + p + 1;
    let mut obj = vec![0.0; nv];
    obj[nv - 1] = 1.0;
    let mut lp = Lp::maximize(&obj);
    lp.set_all_bounds(-REALIZE_BOX, REALIZE_BOX);
    lp.set_bounds(nv - 1, -1.0, 1.0);
    // Row `a z − aθ θ` with its right-hand side and scale.
    let row = |a: &[f64], at: &[f64]| -> (Vec<f64>, f64) {
        let mut r = vec![0.0; nv];
        r[..d].copy_from_slice(a);
        for (k, x) in at.iter().enumerate() {
            r[d + k] = -x;
        }
        let s = norm(&r);
        (r, if s > 0.0 { s } else { 1.0 })
    };
    for &(c, mask) in active {
        for i in 0..c.num_eq() {
            let (r, _) = row(c.g().row(i), c.gtheta().row(i));
            lp.add_row(r, RowKind::Eq, c.g0()[i]);
        }
        for j in 0..c.num_ineq() {
            let (mut r, s) = row(c.f().row(j), c.ftheta().row(j));
            if mask >> j & 1 == 1 {
                lp.add_row(r, RowKind::Eq, c.f0()[j]);
            } else {
                r[nv - 1] = s;
                lp.add_row(r, RowKind::Le, c.f0()[j]);
            }
        }
    }
    // Choice `k` selects one violated row: inequalities first, then each equality in both directions.
    for &(c, k) in excluded {
        let mi = c.num_ineq();
        if k < mi {
            let (mut r, s) = row(c.f().row(k), c.ftheta().row(k));
            r[nv - 1] = -s;
            lp.add_row(r, RowKind::Ge, c.f0()[k]);
        } else {
            let i = (k - mi) / 2;
            let sign = if (k - mi) % 2 == 0 { 1.0 } else { -1.0 };
            let (r, s) = row(c.g().row(i), c.gtheta().row(i));
            let mut r: Vec<f64> = r.iter().map(|x| sign * x).collect();
            r[nv - 1] = -s;
            lp.add_row(r, RowKind::Ge, sign * c.g0()[i]);
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } if x[nv - 1] > REALIZE_TOL => Ok(Some((x[..d].to_vec(), x[d..d + p].to_vec()))),
        _ => Ok(None),
    }
}

/// Realizes the structure with every excluded component violated by some row.
fn realize_excluding(
    stage: &StageSet,
    active: &[(&Polyhedron, u64)],
    excluded: &[&Polyhedron],
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    if realize(stage, active, &[])?.is_none() {
        return Ok(None);
    }
    let choices: Vec<usize> = excluded.iter().map(|c| c.num_ineq() + 2 * c.num_eq()).collect();
    if choices.contains(&0) {
        return Ok(None);
    }
    let mut pick = vec![0usize; excluded.len()];
    loop {
        let ex: Vec<(&Polyhedron, usize)> = excluded.iter().copied().zip(pick.iter().copied()).collect();
        if let Some(found) = realize(stage, active, &ex)? {
            return Ok(Some(found));
        }
        let mut k = excluded.len();
        loop {
            if k == 0 {
                return Ok(None);
            }
            k -= 1;
            pick[k] += 1;
            if pick[k] < choices[k] {
                break;
            }
            pick[k] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub covered: bool,
    /// Unit vector in the subspace outside every cone, when not covered.
    pub witness: Option<Vec<f64>>,
}

/// Decides whether the column span of `basis` lies in the union of `cones`.
///
/// Works in subspace coordinates. Cones that are not full-dimensional there are
/// dropped, since a finite union of them cannot cover an open set. The remaining
/// cones are handled by recursive splitting of the uncovered region.
pub fn subspace_in_cone_union(basis: &DenseMatrix, cones: &[ConeHrep], node_cap: usize) -> Result<Coverage> {
    let r = basis.cols();
    if r == 0 {
        return Ok(Coverage { covered: true, witness: None });
    }
    let local: Vec<Vec<Vec<f64>>> = cones
        .iter()
        .map(|c| {
            c.rows
                .iter()
                .map(|a| basis.tmatvec(a))
                .filter(|a| norm(a) > 1e-12)
                .collect()
        })
        .collect();
    let mut start = Vec::new();
    for (j, rows) in local.iter().enumerate() {
        if interior_point(rows, r)?.is_some() {
            start.push(j);
        }
    }

    let mut stack: Vec<(Vec<Vec<f64>>, Vec<usize>)> = vec![(Vec::new(), start)];
    let mut nodes = 0usize;
    while let Some((p, remaining)) = stack.pop() {
        nodes += 1;
        if nodes > node_cap {
            return Err(Error::CombinatorialCap { what: "cone covering", cap: node_cap });
        }
        let mut inside = false;
        for &j in &remaining {
            if contained(&p, &local[j], r)? {
                inside = true;
                break;
            }
        }
        if inside {
            continue;
        }
        let mut useful = Vec::new();
        for &j in &remaining {
            let mut both = p.clone();
            both.extend(local[j].iter().cloned());
            if interior_point(&both, r)?.is_some() {
                useful.push(j);
            }
        }
        let Some((&i, rest)) = useful.split_first() else {
            let c = witness_in(&p, &local, r)?;
            let mut w = basis.matvec(&c);
            let nw = norm(&w);
            w.iter_mut().for_each(|x| *x /= nw);
            return Ok(Coverage { covered: false, witness: Some(w) });
        };
        // P \ R_i is the union over j of P ∩ {a_j c ≥ 0} ∩ {a_l c ≤ 0, l < j}.
        let mut children = Vec::new();
        for j in 0..local[i].len() {
            let mut child = p.clone();
            child.push(local[i][j].iter().map(|x| -x).collect());
            child.extend(local[i][..j].iter().cloned());
            if interior_point(&child, r)?.is_some() {
                children.push((child, rest.to_vec()));
            }
        }
        stack.extend(children.into_iter().rev());
    }
    Ok(Coverage { covered: true, witness: None })
}

/// Maximizes the normalized slack `t` of `{a·c ≤ 0}` over the unit box; `Some` when `t > 0`.
fn interior_point(rows: &[Vec<f64>], r: usize) -> Result<Option<(Vec<f64>, f64)>> {
    let mut obj = vec![0.0; r + 1];
    obj[r] = 1.0;
    let mut lp = Lp::maximize(&obj);
    lp.set_all_bounds(-1.0, 1.0);
    for a in rows {
        let mut row = a.clone();
        row.push(norm(a));
        lp.add_row(row, RowKind::Le, 0.0);
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } if x[r] > FULLDIM_TOL => Ok(Some((x[..r].to_vec(), x[r]))),
        LpOutcome::Optimal { .. } => Ok(None),
        other => Err(Error::Lp(format!("interior-point LP ended with {other:?}"))),
    }
}

/// `P ⊆ R`, with `P` given by rows `≤ 0`.
fn contained(p: &[Vec<f64>], cone: &[Vec<f64>], r: usize) -> Result<bool> {
    for a in cone {
        let mut lp = Lp::maximize(a);
        lp.set_all_bounds(-1.0, 1.0);
        for b in p {
            lp.add_row(b.clone(), RowKind::Le, 0.0);
        }
        match lp.solve()? {
            LpOutcome::Optimal { objective, .. } => {
                if -objective > CONTAIN_TOL * norm(a) {
                    return Ok(false);
                }
            }
            other => return Err(Error::Lp(format!("containment LP ended with {other:?}"))),
        }
        debug_assert_eq!(a.len(), r);
    }
    Ok(true)
}

fn outside_all(c: &[f64], cones: &[Vec<Vec<f64>>]) -> bool {
    let nc = norm(c);
    cones.iter().all(|rows| rows.iter().any(|a| dot(a, c) > 1e-7 * norm(a) * nc))
}

/// A non-zero point deep inside `P`, pushed away from the cones and outside all of them.
fn witness_in(p: &[Vec<f64>], cones: &[Vec<Vec<f64>>], r: usize) -> Result<Vec<f64>> {
    let (_, t) = interior_point(p, r)?.ok_or_else(|| Error::Lp("uncovered cone lost its interior".into()))?;
    let t0 = 0.5 * t;
    let mut obj = vec![0.0; r];
    for rows in cones {
        for a in rows {
            let na = norm(a);
            obj.iter_mut().zip(a).for_each(|(o, x)| *o += x / na);
        }
    }
    let mut lp = Lp::maximize(&obj);
    lp.set_all_bounds(-1.0, 1.0);
    for a in p {
        let mut row = a.clone();
        for x in row.iter_mut() {
            *x /= norm(a);
        }
        lp.add_row(row, RowKind::Le, -t0);
    }
    let center = match lp.solve()? {
        LpOutcome::Optimal { x, .. } => x,
        other => return Err(Error::Lp(format!("witness LP ended with {other:?}"))),
    };
    let strictly_in_p = |c: &[f64]| p.iter().all(|a| dot(a, c) < 0.0);
    let mut candidates = vec![center.clone()];
    for step in [0.5 * t0, 0.25 * t0] {
        for k in 0..r {
            for sign in [1.0, -1.0] {
                let mut c = center.clone();
                c[k] += sign * step;
                candidates.push(c);
            }
        }
    }
    for c in candidates {
        if norm(&c) > 1e-6 && strictly_in_p(&c) && outside_all(&c, cones) {
            return Ok(c);
        }
    }
    Err(Error::Lp("no witness direction found in an uncovered cone".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::{build_consensus, two_region_example};
    use crate::numerics::DenseMatrix;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]], cols: usize) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), cols).unwrap()
    }

    pub(crate) fn two_planes() -> StageSet {
        let f = m(&[&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, -1.0, 0.0]], 3);
        let p0 = Polyhedron::fixed(3, m(&[&[0.0, 0.0, 1.0]], 3), vec![0.0], f.clone(), vec![0.0, 4.0, 1.4, 1.4]).unwrap();
        let p1 = Polyhedron::fixed(3, m(&[&[0.0, -1.0, 1.0]], 3), vec![0.0], f, vec![0.0, 4.0, 1.0, 1.0]).unwrap();
        StageSet::new(3, vec![p0, p1]).unwrap()
    }

    fn hrep(rows: &[&[f64]]) -> ConeHrep {
        ConeHrep { dim: rows[0].len(), rows: rows.iter().map(|r| r.to_vec()).collect() }
    }

    #[test]
    fn zero_test_examples() {
        assert!(cone_zero_test(&hrep(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]])).unwrap());
        assert!(!cone_zero_test(&hrep(&[&[-1.0, 0.0], &[0.0, -1.0]])).unwrap());
    }

    #[test]
    fn two_half_lines_cover_the_line() {
        let basis = m(&[&[1.0], &[0.0]], 1);
        let cones = [hrep(&[&[-1.0, 0.0]]), hrep(&[&[1.0, 0.0]])];
        assert!(subspace_in_cone_union(&basis, &cones, 1000).unwrap().covered);
    }

    #[test]
    fn orthant_does_not_cover_the_plane() {
        let cov = subspace_in_cone_union(&DenseMatrix::identity(2), &[hrep(&[&[-1.0, 0.0], &[0.0, -1.0]])], 1000).unwrap();
        assert!(!cov.covered);
        let w = cov.witness.unwrap();
        assert!(w[0] < 0.0 && w[1] < 0.0, "{w:?}");
    }

    #[test]
    fn four_quadrants_cover_the_plane() {
        let q = |a: f64, b: f64| hrep(&[&[-a, 0.0], &[0.0, -b]]);
        let cones = [q(1.0, 1.0), q(-1.0, 1.0), q(1.0, -1.0), q(-1.0, -1.0)];
        assert!(subspace_in_cone_union(&DenseMatrix::identity(2), &cones, 1000).unwrap().covered);
        let cov = subspace_in_cone_union(&DenseMatrix::identity(2), &cones[..3], 1000).unwrap();
        let w = cov.witness.unwrap();
        assert!(w[0] < 0.0 && w[1] < 0.0, "{w:?}");
    }

    #[test]
    fn two_plane_set_is_violated_at_the_crossing() {
        let report = check_a3(&[two_planes()]).unwrap();
        assert!(!report.satisfied);
        let v = report
            .violations
            .iter()
            .find(|v| v.structure.components == vec![0, 1] && v.structure.active_sets == vec![vec![0], vec![0]])
            .expect("violation at the crossing");
        assert!(v.point.iter().all(|x| x.abs() < 1e-9));
        // N is the ray along e₁, so the witness lives in span{e₂, e₃}.
        assert!(v.witness[0].abs() <= 1e-8);
        assert!(v.orthogonality <= 1e-8);
        assert!(v.escapes);
        for viol in &report.violations {
            assert!(viol.escapes && viol.orthogonality <= 1e-8 && (norm(&viol.witness) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn convex_stages_are_satisfied() {
        let pr = build_consensus(&two_region_example(2).unwrap()).unwrap();
        for st in pr.stages() {
            for c in &st.components {
                let single = StageSet::new(st.dim, vec![c.clone()]).unwrap();
                assert!(check_a3(&[single]).unwrap().satisfied);
            }
        }
    }

    #[test]
    fn stages_are_checked_independently() {
        let pr = build_consensus(&two_region_example(3).unwrap()).unwrap();
        let mut stages = vec![two_planes()];
        stages.extend(pr.stages().iter().cloned());
        let joint = check_a3(&stages).unwrap();
        let separate: Vec<bool> = stages.iter().map(|s| check_a3(std::slice::from_ref(s)).unwrap().satisfied).collect();
        assert_eq!(joint.satisfied, separate.iter().all(|&b| b));
        assert!(joint.violations.iter().all(|v| !separate[v.stage]));
        assert_eq!(joint.stages[3].same_as, Some(2));
    }

    /// Dense sampling of unit directions in the subspace.
    fn sampled_cover(basis: &DenseMatrix, cones: &[ConeHrep]) -> bool {
        let r = basis.cols();
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..10_000 {
            let c: Vec<f64> = (0..r).map(|_| next()).collect();
            let v = basis.matvec(&c);
            let nv = norm(&v);
            let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
            if !cones.iter().any(|k| k.rows.iter().all(|a| dot(a, &v) <= 1e-6)) {
                return false;
            }
        }
        true
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn covering_matches_sampling(
            data in proptest::collection::vec(-1.0f64..1.0, 60),
            ncones in 1usize..5,
            full in proptest::bool::ANY,
        ) {
            let basis = if full { DenseMatrix::identity(3) } else { m(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]], 2) };
            let mut k = 0;
            let mut cones = Vec::new();
            for _ in 0..ncones {
                let mut rows = Vec::new();
                for _ in 0..2 {
                    rows.push(data[k..k + 3].to_vec());
                    k += 3;
                }
                cones.push(ConeHrep { dim: 3, rows });
            }
            let cov = subspace_in_cone_union(&basis, &cones, 10_000).unwrap();
            let sampled = sampled_cover(&basis, &cones);
            // Sampling can miss thin uncovered slivers, never the reverse.
            if cov.covered {
                prop_assert!(sampled);
            } else {
                let w = cov.witness.unwrap();
                prop_assert!(cones.iter().all(|c| !c.contains(&w, 1e-9)));
                let in_span = basis.matvec(&basis.tmatvec(&w));
                prop_assert!(crate::numerics::dist(&in_span, &w) < 1e-12);
            }
        }
    }
}

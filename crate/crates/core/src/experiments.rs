//! Multistart studies, horizon sweeps and method comparisons, with CSV output.
//!
//! Random draws use Xoshiro256++ seeded through `seed_from_u64` (SplitMix64
//! expansion). A uniform `[0, 1)` sample is `(next_u64 >> 11) · 2⁻⁵³`. All draws
//! are made sequentially before any solve, so results do not depend on threading.

use std::fmt::Write as _;
use std::time::Instant;

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;

use crate::admm::{solve_admm, AdmmConfig};
use crate::error::{Error, Result};
use crate::mpc::{build_consensus, PwaSystem};
use crate::operator::{build_operator, OperatorData};
use crate::oracle::global_solve;
use crate::problem::ConsensusProblem;
use crate::solver::{solve, verify_proximal_kkt, SolveStatus, SolverConfig};

/// Cluster intervals of local-optimum objectives for the two-region example with `N = 10`, `θ = (1, 1)`.
pub const EXAMPLE_CLUSTERS: [(f64, f64); 4] = [(0.4189, 0.4225), (0.5072, 0.5078), (0.9411, 0.9748), (1.5488, 1.5572)];

pub fn uniform(rng: &mut Xoshiro256PlusPlus, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    lo + (hi - lo) * u
}

/// `s₀ = z₀ − λ₀/ξ` with `z₀ ~ U[−1, 1]ⁿ` and `λ₀ ~ U[−10, 10]ⁿ`; `z₀` is drawn before `λ₀`.
pub fn draw_initial_iterates(n: usize, count: usize, xi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z0: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
            let l0: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -10.0, 10.0)).collect();
            z0.iter().zip(&l0).map(|(z, l)| z - l / xi).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run: usize,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub stationarity: f64,
    pub projection: f64,
    pub kkt_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultistartReport {
    pub runs: Vec<RunRecord>,
    pub converged: usize,
    pub convergence_rate: f64,
    /// Converged runs that fail the certificate at the requested tolerance.
    pub certificate_failures: usize,
}

/// Solves from `count` random initial iterates; runs are returned in draw order.
pub fn multistart(
    problem: &ConsensusProblem,
    theta: &[f64],
    op: &OperatorData,
    base: &SolverConfig,
    count: usize,
    seed: u64,
    kkt_tol: f64,
) -> Result<MultistartReport> {
    let starts = draw_initial_iterates(problem.n(), count, base.xi, seed);
    let runs: Vec<RunRecord> = starts
        .into_par_iter()
        .enumerate()
        .map(|(run, s0)| {
            let mut cfg = base.clone();
            cfg.s0 = Some(s0);
            let r = solve(problem, theta, op, &cfg)?;
            let cert = verify_proximal_kkt(problem, theta, &r.z, &r.lambda, cfg.xi, kkt_tol)?;
            Ok(RunRecord {
                run,
                status: r.status,
                iterations: r.iterations,
                objective: r.objective,
                stationarity: cert.stationarity,
                projection: cert.projection,
                kkt_pass: cert.pass,
            })
        })
        .collect::<Result<_>>()?;
    let converged = runs.iter().filter(|r| r.status.is_success()).count();
    let certificate_failures = runs.iter().filter(|r| r.status.is_success() && !r.kkt_pass).count();
    Ok(MultistartReport {
        convergence_rate: if count == 0 { 0.0 } else { converged as f64 / count as f64 },
        converged,
        certificate_failures,
        runs,
    })
}

impl MultistartReport {
    pub fn runs_csv(&self) -> String {
        let mut s = String::from("run,status,iterations,objective,stationarity_residual,projection_residual,kkt_pass\n");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{},{},{:.12e},{:.6e},{:.6e},{}",
                r.run,
                r.status.as_str(),
                r.iterations,
                r.objective,
                r.stationarity,
                r.projection,
                r.kkt_pass
            );
        }
        s
    }

    pub fn converged_objectives(&self) -> Vec<f64> {
        self.runs.iter().filter(|r| r.status.is_success()).map(|r| r.objective).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Equal-width bins over `[min, max]` of the values; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|b| HistogramBin { lower: lo + b as f64 * width, upper: lo + (b + 1) as f64 * width, count: 0 })
        .collect();
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

pub fn histogram_csv(bins: &[HistogramBin], total: usize) -> String {
    let mut s = String::from("objective_lower,objective_upper,count,percent\n");
    for b in bins {
        let pct = if total == 0 { 0.0 } else { 100.0 * b.count as f64 / total as f64 };
        let _ = writeln!(s, "{:.6},{:.6},{},{:.3}", b.lower, b.upper, b.count, pct);
    }
    s
}

/// Whether `v` lies within `tol` of one of the intervals.
pub fn near_clusters(v: f64, clusters: &[(f64, f64)], tol: f64) -> bool {
    clusters.iter().any(|&(a, b)| v >= a - tol && v <= b + tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FixedPoint,
    Admm,
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FixedPoint => "fixed_point",
            Method::Admm => "admm",
            Method::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixed_point" | "fixed-point" => Ok(Method::FixedPoint),
            "admm" => Ok(Method::Admm),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub status: String,
    pub iterations: usize,
    pub objective: f64,
    pub runtime_ms: f64,
}

pub fn run_method(
    problem: &ConsensusProblem,
    theta: &[f64],
    method: Method,
    solver: &SolverConfig,
    admm: &AdmmConfig,
    cap: u128,
) -> Result<MethodResult> {
    let start = Instant::now();
    let (status, iterations, objective) = match method {
        Method::FixedPoint => {
            let op = build_operator(problem, solver.xi)?;
            let r = solve(problem, theta, &op, solver)?;
            (r.status.as_str().to_string(), r.iterations, r.objective)
        }
        Method::Admm => {
            let r = solve_admm(problem, theta, admm)?;
            (r.status.as_str().to_string(), r.iterations, r.objective)
        }
        Method::Oracle => match global_solve(problem, theta, cap) {
            Ok(g) => ("optimal".to_string(), g.qps_solved, g.objective),
            Err(Error::Infeasible(_)) => ("infeasible".to_string(), 0, f64::NAN),
            Err(e) => return Err(e),
        },
    };
    Ok(MethodResult { method, status, iterations, objective, runtime_ms: start.elapsed().as_secs_f64() * 1e3 })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub horizon: usize,
    pub result: MethodResult,
}

/// One solve per horizon and method.
pub fn bench(
    system: &PwaSystem,
    theta: &[f64],
    horizons: &[usize],
    methods: &[Method],
    solver: &SolverConfig,
    admm: &AdmmConfig,
    cap: u128,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &h in horizons {
        let problem = build_consensus(&system.with_horizon(h)?)?;
        for &m in methods {
            if m == Method::Oracle && problem.num_assignments() > cap {
                continue;
            }
            rows.push(BenchRow { horizon: h, result: run_method(&problem, theta, m, solver, admm, cap)? });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("N,method,status,iterations,runtime_ms,objective\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.3},{:.12e}",
            r.horizon,
            r.result.method.as_str(),
            r.result.status,
            r.result.iterations,
            r.result.runtime_ms,
            r.result.objective
        );
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub result: MethodResult,
    /// `(p − p_ref) / |p_ref|`, relative to the oracle when available, else the best method.
    pub relative_suboptimality: f64,
}

pub fn compare(
    problem: &ConsensusProblem,
    theta: &[f64],
    solver: &SolverConfig,
    admm: &AdmmConfig,
    cap: u128,
) -> Result<Vec<CompareRow>> {
    let mut results = vec![
        run_method(problem, theta, Method::FixedPoint, solver, admm, cap)?,
        run_method(problem, theta, Method::Admm, solver, admm, cap)?,
    ];
    if problem.num_assignments() <= cap {
        results.push(run_method(problem, theta, Method::Oracle, solver, admm, cap)?);
    }
    let reference = results
        .iter()
        .find(|r| r.method == Method::Oracle && r.objective.is_finite())
        .map(|r| r.objective)
        .unwrap_or_else(|| results.iter().map(|r| r.objective).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min));
    Ok(results
        .into_iter()
        .map(|r| {
            let rel = (r.objective - reference) / reference.abs().max(f64::MIN_POSITIVE);
            CompareRow { result: r, relative_suboptimality: rel }
        })
        .collect())
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("method,status,iterations,runtime_ms,objective,relative_suboptimality\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.3},{:.12e},{:.6e}",
            r.result.method.as_str(),
            r.result.status,
            r.result.iterations,
            r.result.runtime_ms,
            r.result.objective,
            r.relative_suboptimality
        );
    }
    s
}

//! Constant-estimation sweeps over kernel seeds, order parameters and mesh
//! levels, and the tail-necessity counterexample runs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::reports::{
    harnack_report, inf_estimate_report, sup_bound_report, tail_control_report,
    weak_harnack_report,
};
use super::{InequalityReport, ReportInput};
use crate::error::{Error, Result};
use crate::gridfn::{Extremum, FarField, GridFunction};
use crate::kernel::KernelSpec;
use crate::lattice::{ball_nodes, Ball, Lattice, Point, Region};
use crate::par::map_indexed;
use crate::quad::QuadratureScheme;
use crate::solver::{solve_dirichlet, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKernel {
    Model,
    Modulated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum OmegaSpec {
    Ball { center: Point, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl OmegaSpec {
    pub fn region(&self, lattice: Arc<Lattice>) -> Result<Region> {
        match self {
            OmegaSpec::Ball { center, radius } => {
                Ok(Region::from_ball(lattice, &Ball::new(*center, *radius)?))
            }
            OmegaSpec::Box { lo, hi } => {
                if lo.len() != lattice.dim() || hi.len() != lattice.dim() {
                    return Err(Error::Precondition("omega box dimension mismatch".into()));
                }
                Ok(Region::from_open_box(lattice, lo, hi))
            }
        }
    }
}

/// Which report a sweep evaluates, with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ReportFamily {
    Harnack,
    WeakHarnack { t: f64 },
    TailControl,
    InfEstimate { eps: f64 },
    LocalBoundedness { delta: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportParams {
    pub family: ReportFamily,
    pub x0: Point,
    pub r: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub candidate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub mesh_h: Vec<f64>,
    pub seeds: Vec<u64>,
    pub p_values: Vec<f64>,
    pub s_values: Vec<f64>,
    pub kernel: SweepKernel,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub omega: OmegaSpec,
    pub report: ReportParams,
    pub solver: SolverConfig,
    pub quad: QuadratureScheme,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub case_id: usize,
    pub h: f64,
    pub p: f64,
    pub s: f64,
    pub seed: u64,
    pub report: InequalityReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(usize, String)>,
    #[serde(with = "super::maybe_inf")]
    pub max_constant: f64,
    pub median_constant: f64,
    /// Max implied constant per mesh level, in `mesh_h` order.
    pub per_mesh_max: Vec<(f64, f64)>,
    /// Max constant grew by more than 2x between consecutive mesh levels.
    pub unstable: bool,
}

impl SweepSummary {
    /// Flatten to CSV: one row per case, rhs terms in sorted key order.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let term_names: Vec<String> = self
            .rows
            .first()
            .map(|r| r.report.rhs_terms.keys().cloned().collect())
            .unwrap_or_default();
        out.push_str("case_id,h,p,s,seed,report,lhs");
        for t in &term_names {
            let _ = write!(out, ",rhs_{t}");
        }
        out.push_str(",implied_constant,candidate_constant,pass\n");
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{}",
                row.case_id, row.h, row.p, row.s, row.seed, row.report.name, row.report.lhs
            );
            for t in &term_names {
                let _ = write!(out, ",{}", row.report.rhs_terms.get(t).copied().unwrap_or(0.0));
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                row.report.implied_constant, row.report.candidate_constant, row.report.pass
            );
        }
        out
    }
}

fn run_family(input: &ReportInput, params: &ReportParams) -> Result<InequalityReport> {
    let x0 = &params.x0;
    match params.family {
        ReportFamily::Harnack => {
            harnack_report(input, x0, params.r, params.r_outer, params.candidate)
        }
        ReportFamily::WeakHarnack { t } => {
            weak_harnack_report(input, x0, params.r, params.r_outer, t, params.candidate)
        }
        ReportFamily::TailControl => {
            tail_control_report(input, x0, params.r, params.r_outer, params.candidate)
        }
        ReportFamily::InfEstimate { eps } => {
            inf_estimate_report(input, x0, params.r, params.r_outer, eps, params.candidate)
        }
        ReportFamily::LocalBoundedness { delta } => {
            sup_bound_report(input, x0, params.r, delta, params.candidate)
        }
    }
}

/// Solve one case and evaluate the configured report.
fn run_case(
    cfg: &SweepConfig,
    h: f64,
    p: f64,
    s: f64,
    seed: u64,
    g_builder: &(dyn Fn(&Arc<Lattice>) -> Result<GridFunction> + Sync),
) -> Result<InequalityReport> {
    let lattice = Lattice::new(cfg.dim, h, &cfg.bounds)?;
    let spec = match cfg.kernel {
        SweepKernel::Model => {
            KernelSpec::new(cfg.dim, s, p, cfg.lambda_min, cfg.lambda_max, crate::kernel::KernelFamily::Model)?
        }
        SweepKernel::Modulated => {
            KernelSpec::modulated(cfg.dim, s, p, cfg.lambda_min, cfg.lambda_max, seed)?
        }
    };
    let omega = cfg.omega.region(lattice.clone())?;
    let g = g_builder(&lattice)?;
    let res = solve_dirichlet(&spec, &omega, &g, &cfg.solver, &cfg.quad)?;
    if !res.converged {
        return Err(Error::Solver(format!(
            "case did not converge within {} iterations (grad norm {})",
            cfg.solver.max_iters, res.final_grad_norm
        )));
    }
    let input = ReportInput::new(&spec, &omega, &res.u, &cfg.quad);
    run_family(&input, &cfg.report)
}

/// Run the full sweep: one solve + report per (mesh, p, s, seed) case,
/// cases independent and evaluated in parallel, aggregation in fixed case
/// order. Individual case failures are recorded and the sweep continues.
pub fn constant_sweep(
    cfg: &SweepConfig,
    g_builder: &(dyn Fn(&Arc<Lattice>) -> Result<GridFunction> + Sync),
) -> Result<SweepSummary> {
    let mut cases = Vec::new();
    for &h in &cfg.mesh_h {
        for &p in &cfg.p_values {
            for &s in &cfg.s_values {
                for &seed in &cfg.seeds {
                    cases.push((h, p, s, seed));
                }
            }
        }
    }
    if cases.is_empty() {
        return Err(Error::Precondition("sweep has no cases".into()));
    }
    let results = map_indexed(cases.len(), |i| {
        let (h, p, s, seed) = cases[i];
        (i, run_case(cfg, h, p, s, seed, g_builder))
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (i, res) in results {
        let (h, p, s, seed) = cases[i];
        match res {
            Ok(report) => rows.push(SweepRow { case_id: i, h, p, s, seed, report }),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let mut constants: Vec<f64> = rows.iter().map(|r| r.report.implied_constant).collect();
    let max_constant = constants.iter().copied().fold(0.0f64, f64::max);
    constants.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_constant = if constants.is_empty() {
        0.0
    } else {
        constants[constants.len() / 2]
    };
    let per_mesh_max: Vec<(f64, f64)> = cfg
        .mesh_h
        .iter()
        .map(|&h| {
            let m = rows
                .iter()
                .filter(|r| r.h == h)
                .map(|r| r.report.implied_constant)
                .fold(0.0f64, f64::max);
            (h, m)
        })
        .collect();
    let unstable = per_mesh_max
        .windows(2)
        .any(|w| w[1].1 > 2.0 * w[0].1.max(1e-300) || (w[1].1 > 0.0 && w[1].1 < 0.5 * w[0].1));
    Ok(SweepSummary { rows, failures, max_constant, median_constant, per_mesh_max, unstable })
}

/// Configuration of the tail-necessity experiment: nonnegative data of a
/// fixed level near the interior region plus a negative bump of magnitude m
/// on exterior nodes placed outside the report's outer ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub h: f64,
    pub s: f64,
    pub p: f64,
    pub kernel: SweepKernel,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub seed: u64,
    pub omega: OmegaSpec,
    /// Level of the nonnegative exterior data (also the constant far field).
    pub base_level: f64,
    /// Region carrying the negative bump `g = -m`.
    pub bump: Ball,
    /// Optional fixed positive bump `g = base_level + boost` (not scaled by
    /// m); keeps the solution profile non-flat as the margin degenerates.
    pub positive_bump: Option<(Ball, f64)>,
    pub x0: Point,
    pub r: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub candidate: f64,
    pub solver: SolverConfig,
    pub quad: QuadratureScheme,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexamplePair {
    pub m: f64,
    /// `sup_{B_r} u / max(inf_{B_r} u, floor)`: the Harnack quotient with no
    /// tail correction.
    pub classical_ratio: f64,
    pub report: InequalityReport,
}

/// Solve with a negative exterior bump of magnitude `m` and return the
/// uncorrected Harnack quotient next to the tail-corrected report. As m
/// grows the quotient is unbounded while the corrected constant stays flat.
pub fn counterexample_run(m: f64, cfg: &CounterexampleConfig) -> Result<CounterexamplePair> {
    if !(m >= 0.0) {
        return Err(Error::Precondition(format!("bump magnitude must be >= 0, got {m}")));
    }
    let lattice = Lattice::new(cfg.dim, cfg.h, &cfg.bounds)?;
    let spec = match cfg.kernel {
        SweepKernel::Model => KernelSpec::new(
            cfg.dim,
            cfg.s,
            cfg.p,
            cfg.lambda_min,
            cfg.lambda_max,
            crate::kernel::KernelFamily::Model,
        )?,
        SweepKernel::Modulated => {
            KernelSpec::modulated(cfg.dim, cfg.s, cfg.p, cfg.lambda_min, cfg.lambda_max, cfg.seed)?
        }
    };
    let omega = cfg.omega.region(lattice.clone())?;
    // the bump must sit on exterior nodes beyond the outer ball
    let bump_nodes = ball_nodes(&lattice, &cfg.bump);
    let outer = Ball::new(cfg.x0, cfg.r_outer)?;
    for &i in &bump_nodes {
        if omega.contains(i) || outer.contains(&lattice.position(i)) {
            return Err(Error::Precondition(format!(
                "bump node {i} lies inside the interior region or the outer ball"
            )));
        }
    }
    let mut values = vec![cfg.base_level; lattice.node_count()];
    if let Some((ball, boost)) = &cfg.positive_bump {
        if !(*boost >= 0.0) {
            return Err(Error::Precondition("positive bump boost must be >= 0".into()));
        }
        for &i in &ball_nodes(&lattice, ball) {
            if omega.contains(i) || outer.contains(&lattice.position(i)) {
                return Err(Error::Precondition(format!(
                    "positive bump node {i} lies inside the interior region or the outer ball"
                )));
            }
            values[i] = cfg.base_level + boost;
        }
    }
    for &i in &bump_nodes {
        values[i] = -m;
    }
    let g = GridFunction::new(
        lattice.clone(),
        values,
        FarField::Constant { value: cfg.base_level },
    )?;
    let res = solve_dirichlet(&spec, &omega, &g, &cfg.solver, &cfg.quad)?;
    if !res.converged {
        return Err(Error::Solver("counterexample solve did not converge".into()));
    }
    let input = ReportInput::new(&spec, &omega, &res.u, &cfg.quad);
    let report = harnack_report(&input, &cfg.x0, cfg.r, cfg.r_outer, cfg.candidate)?;
    let inner_nodes = ball_nodes(&lattice, &Ball::new(cfg.x0, cfg.r)?);
    let sup = res.u.extremum(&inner_nodes, Extremum::Sup)?;
    let inf = res.u.extremum(&inner_nodes, Extremum::Inf)?;
    let floor = 1e-12 * sup.abs().max(1.0);
    let classical_ratio = sup / inf.max(floor);
    Ok(CounterexamplePair { m, classical_ratio, report })
}

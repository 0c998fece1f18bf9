//! Per-inequality verification reports, the covering/iteration utility
//! lemmata and the constant-estimation sweep.
//!
//! Every report computes the two sides of one inequality on concrete data
//! and records the smallest single constant making it true, plus a pass/fail
//! verdict at a caller-supplied candidate constant. The theorems state the
//! right-hand side with the constant on each term; reporting
//! `lhs / (sum of rhs terms)` is the conservative single-constant reading.

mod lemmas;
mod reports;
mod sweep;

pub use lemmas::{
    absorb_bound_check, covering_dilate, geometric_iteration, AbsorbReport, CoveringReport,
    CoveringVerdict, DeGiorgiSequence, IterationReport,
};
pub use reports::{
    caccioppoli_report, expansion_report, harnack_report, inf_estimate_report,
    power_caccioppoli_report, sup_bound_report, tail_control_report, weak_harnack_report,
    weak_harnack_t_bound, ExpansionPoint, ExpansionReport,
};
pub use sweep::{
    constant_sweep, counterexample_run, CounterexampleConfig, CounterexamplePair, OmegaSpec,
    ReportParams, ReportFamily, SweepConfig, SweepKernel, SweepRow, SweepSummary,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{classify_solution, SolutionClass, TestFamily};
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::kernel::KernelSpec;
use crate::lattice::{ball_nodes, Ball, Point, Region};
use crate::quad::QuadratureScheme;

/// Serialize possibly-infinite constants as the string "inf" (JSON has no
/// infinity literal and silently nulling them would hide failures).
pub(crate) mod maybe_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else if *v > 0.0 {
            ser.serialize_str("inf")
        } else {
            ser.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("expected inf/-inf, got {other}"))),
            },
        }
    }
}

/// Echo of the data a report was computed on.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportContext {
    pub x0: Point,
    pub r: f64,
    #[serde(rename = "R")]
    pub r_outer: f64,
    pub p: f64,
    pub s: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub h: f64,
    pub seed: Option<u64>,
    pub dim: usize,
}

/// One verified inequality: LHS, named RHS terms, the implied constant
/// `lhs / sum(rhs)` and the verdict at the candidate constant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityReport {
    pub schema_version: u32,
    pub name: String,
    pub lhs: f64,
    pub rhs_terms: BTreeMap<String, f64>,
    #[serde(with = "maybe_inf")]
    pub implied_constant: f64,
    pub candidate_constant: f64,
    pub pass: bool,
    pub context: ReportContext,
    /// Secondary values: parameter sweeps, ellipticity brackets of
    /// far-field terms, cross-checks.
    pub extras: BTreeMap<String, f64>,
}

impl InequalityReport {
    pub fn rhs_total(&self) -> f64 {
        self.rhs_terms.values().sum()
    }
}

/// `lhs / denom` with the degenerate cases pinned: 0 when lhs = 0, +inf
/// (never passing) when lhs > 0 but the denominator vanishes.
pub(crate) fn implied_and_pass(lhs: f64, denom: f64, candidate: f64) -> (f64, bool) {
    let implied = if lhs == 0.0 {
        0.0
    } else if denom == 0.0 {
        f64::INFINITY
    } else {
        lhs / denom
    };
    let pass = lhs == 0.0 || lhs <= candidate * denom * (1.0 + 1e-12);
    (implied, pass)
}

/// Everything a report needs about the solved problem.
pub struct ReportInput<'a> {
    pub kernel: &'a KernelSpec,
    pub omega: &'a Region,
    pub u: &'a GridFunction,
    pub quad: &'a QuadratureScheme,
    /// Tolerance handed to the sub/supersolution classifier.
    pub classify_tol: f64,
}

impl<'a> ReportInput<'a> {
    pub fn new(
        kernel: &'a KernelSpec,
        omega: &'a Region,
        u: &'a GridFunction,
        quad: &'a QuadratureScheme,
    ) -> Self {
        ReportInput { kernel, omega, u, quad, classify_tol: 1e-6 }
    }

    pub(crate) fn context(&self, x0: &Point, r: f64, r_outer: f64) -> ReportContext {
        ReportContext {
            x0: *x0,
            r,
            r_outer,
            p: self.kernel.p(),
            s: self.kernel.s(),
            lambda_min: self.kernel.lambda_min(),
            lambda_max: self.kernel.lambda_max(),
            h: self.u.lattice().spacing(),
            seed: self.kernel.seed(),
            dim: self.u.lattice().dim(),
        }
    }

    pub(crate) fn classification(&self) -> Result<SolutionClass> {
        classify_solution(
            self.kernel,
            self.u,
            self.omega,
            self.classify_tol,
            TestFamily::Hats,
            self.quad,
        )
    }

    /// Ball nodes, requiring the ball to be covered by the interior region.
    pub(crate) fn nodes_in_omega(&self, ball: &Ball, what: &str) -> Result<Vec<usize>> {
        let nodes = ball_nodes(self.u.lattice(), ball);
        if nodes.is_empty() {
            return Err(Error::Precondition(format!("{what}: the ball contains no nodes")));
        }
        for &i in &nodes {
            if !self.omega.contains(i) {
                return Err(Error::Precondition(format!(
                    "{what}: ball is not contained in the interior region (node {i} outside)"
                )));
            }
        }
        Ok(nodes)
    }

    /// Check `u >= 0` on the given nodes up to solver noise; names the
    /// first violating node otherwise.
    pub(crate) fn require_nonnegative(&self, nodes: &[usize], what: &str) -> Result<()> {
        let sup = nodes.iter().map(|&i| self.u.value(i).abs()).fold(1.0f64, f64::max);
        let tol = 1e-9 * sup;
        for &i in nodes {
            if self.u.value(i) < -tol {
                return Err(Error::Precondition(format!(
                    "{what}: u must be nonnegative on the outer ball; node {i} has value {}",
                    self.u.value(i)
                )));
            }
        }
        Ok(())
    }
}

/// Logarithmic sweep grid for level parameters, 16 points per decade on
/// `[1e-4, 1/4)`.
pub(crate) fn delta_sweep_grid() -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        let d = 1e-4 * 10f64.powf(i as f64 / 16.0);
        if d >= 0.25 {
            break;
        }
        out.push(d);
        i += 1;
    }
    out
}

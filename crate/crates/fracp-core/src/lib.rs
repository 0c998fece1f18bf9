//! Lattice solver and verification harness for nonlocal p-Laplace type
//! problems with measurable-coefficient kernels.
//!
//! The crate discretizes the exterior-value problem for integro-differential
//! operators of fractional p-Laplacian type on uniform 1D/2D lattices,
//! computes the unique energy minimizer with prescribed exterior data, and
//! checks the quantitative inequalities satisfied by such minimizers
//! (Harnack and weak Harnack bounds, Caccioppoli estimates, local
//! boundedness, tail control, expansion of positivity) on concrete solved
//! instances, reporting the empirically implied constants.
//!
//! Heavy pair sums run data-parallel under the `parallel` feature (enabled
//! by default) with a fixed chunking and reduction order, so results are
//! bit-identical for any worker count and for the sequential fallback.

pub mod energy;
pub mod error;
pub mod gridfn;
pub mod harnack;
pub mod kernel;
pub mod lattice;
pub mod par;
pub mod quad;
pub mod solver;
pub mod tail;

pub use energy::{
    apply_operator, classify_solution, energy, energy_gradient, form, seminorm, SolutionClass,
    SolutionLabel, TestFamily,
};
pub use error::{Error, Result};
pub use gridfn::{cutoff, Extremum, FarField, GridFunction, GridFunctionMeta, LevelCmp, TruncSign};
pub use harnack::{
    absorb_bound_check, caccioppoli_report, constant_sweep, counterexample_run, covering_dilate,
    expansion_report, geometric_iteration, harnack_report, inf_estimate_report,
    power_caccioppoli_report, sup_bound_report, tail_control_report, weak_harnack_report,
    weak_harnack_t_bound, AbsorbReport, CounterexampleConfig, CounterexamplePair, CoveringReport,
    CoveringVerdict, DeGiorgiSequence, ExpansionReport, InequalityReport, IterationReport,
    OmegaSpec, ReportContext, ReportFamily, ReportInput, ReportParams, SweepConfig, SweepKernel,
    SweepRow, SweepSummary,
};
pub use kernel::{validate_bounds, BoundsReport, KernelFamily, KernelSpec, KernelTable};
pub use lattice::{ball_nodes, set_measure, Ball, Lattice, Point, Region};
pub use quad::QuadratureScheme;
pub use solver::{
    assemble_p2, solve_dirichlet, solve_linear_p2, InitStrategy, LineSearchConfig, Preconditioner,
    RestartPolicy, SolveResult, SolveRunReport, SolverConfig,
};
pub use tail::{tail, tail_offset_d, TailValue};

//! Minimization of the discrete nonlocal energy subject to prescribed
//! exterior values: preconditioned descent with backtracking, plus a direct
//! dense solve of the p = 2 stationarity system used as an oracle.
//!
//! The descent objective is the variable part of the energy: pairs with at
//! least one interior endpoint, plus per-interior-node far-field terms
//! renormalized against the initial iterate. Dropping the constant
//! exterior-exterior contribution leaves the minimizer and the gradient
//! untouched while keeping the objective finite for every tail-class far
//! field.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{phi_p, pow_abs};
use crate::error::{Error, Result};
use crate::gridfn::GridFunction;
use crate::kernel::KernelSpec;
use crate::lattice::Region;
use crate::par::{map_indexed, sum_indexed, tree_fold, try_map_indexed};
use crate::quad::{exterior_table, QuadratureScheme};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// First trial step; also the cap after warm-started growth.
    pub initial_step: f64,
    /// Multiplicative shrink factor in (0, 1).
    pub shrink: f64,
    /// Sufficient-decrease constant in (0, 1/2).
    pub sufficient_decrease: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartPolicy {
    Never,
    /// Reset the step to `initial_step` once when a line search exceeds
    /// this many backtracks; a second stall ends the run.
    OnStall { max_backtracks: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Interior starts at the mean of g over the non-interior nodes.
    DataMean,
    ZeroFill,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stationarity target: sup-norm of the interior gradient, scaled by
    /// `max(1, sup |g|)^{p-1}`.
    pub grad_tol: f64,
    pub line_search: LineSearchConfig,
    pub preconditioner: Preconditioner,
    pub restart: RestartPolicy,
    pub init: InitStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 50_000,
            grad_tol: 1e-10,
            line_search: LineSearchConfig {
                initial_step: 1.0,
                shrink: 0.5,
                sufficient_decrease: 1e-4,
            },
            preconditioner: Preconditioner::Diagonal,
            restart: RestartPolicy::OnStall { max_backtracks: 40 },
            init: InitStrategy::DataMean,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(self.grad_tol > 0.0) {
            return Err(Error::Solver(format!("grad_tol must be > 0, got {}", self.grad_tol)));
        }
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::Solver(format!("shrink must lie in (0,1), got {}", ls.shrink)));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 0.5) {
            return Err(Error::Solver(format!(
                "sufficient_decrease must lie in (0, 1/2), got {}",
                ls.sufficient_decrease
            )));
        }
        if !(ls.initial_step > 0.0) {
            return Err(Error::Solver("initial_step must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: GridFunction,
    pub iterations: usize,
    /// Raw sup-norm of the final interior gradient.
    pub final_grad_norm: f64,
    /// Values of the (renormalized) descent objective per accepted iterate;
    /// nonincreasing by construction.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
}

/// JSON-facing run report: result metadata plus a config echo.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveRunReport {
    pub schema_version: u32,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub grad_tol: f64,
    pub kernel_seed: Option<u64>,
    pub config: SolverConfig,
    /// Thinned to at most ~512 entries (first, stride, last).
    pub energy_trace: Vec<f64>,
}

impl SolveResult {
    pub fn run_report(&self, spec: &KernelSpec, cfg: &SolverConfig) -> SolveRunReport {
        let trace = &self.energy_trace;
        let thinned = if trace.len() <= 512 {
            trace.clone()
        } else {
            let stride = trace.len().div_ceil(511);
            let mut t: Vec<f64> = trace.iter().step_by(stride).copied().collect();
            if *t.last().unwrap() != *trace.last().unwrap() {
                t.push(*trace.last().unwrap());
            }
            t
        };
        SolveRunReport {
            schema_version: 1,
            converged: self.converged,
            iterations: self.iterations,
            final_grad_norm: self.final_grad_norm,
            grad_tol: cfg.grad_tol,
            kernel_seed: spec.seed(),
            config: *cfg,
            energy_trace: thinned,
        }
    }
}

/// Shared assembly state for one Dirichlet problem: interior/exterior node
/// lists, frozen far-field quadratures and cached kernel rows (the kernel
/// never changes during a solve, so the pair weights are computed once).
struct Assembly {
    interior: Vec<usize>,
    exterior: Vec<usize>,
    /// Per interior node: far-field quadrature weights and cached
    /// descriptor values.
    ff_w: Vec<Vec<f64>>,
    ff_v: Vec<Vec<f64>>,
    /// `K(x_a, x_j) h^{2n}` per interior row, zero on the diagonal.
    k_one: Vec<Vec<f64>>,
    /// `(K(x_a, x_j) + K(x_j, x_a)) h^{2n}` per interior row.
    k_sum: Vec<Vec<f64>>,
    p: f64,
    hn: f64,
}

impl Assembly {
    fn build(
        spec: &KernelSpec,
        omega: &Region,
        g: &GridFunction,
        quad: &QuadratureScheme,
        value_scale: f64,
    ) -> Result<Assembly> {
        let lat = g.lattice().clone();
        let p = spec.p();
        let sp = spec.s() * p;
        let interior = omega.nodes();
        let exterior: Vec<usize> = (0..lat.node_count()).filter(|&i| !omega.contains(i)).collect();
        let coeff = spec.radial_coeff().mid;
        let ff = g.far_field().clone();
        let tables = try_map_indexed(interior.len(), |k| {
            let x = lat.position(interior[k]);
            exterior_table(&lat, quad, &x, sp, coeff, 0.5 * lat.spacing(), &|_, y| {
                (value_scale + ff.eval(y).abs() + 1.0).powf(p - 1.0)
            })
        })?;
        let ff_w: Vec<Vec<f64>> =
            tables.iter().map(|t| t.points.iter().map(|pt| pt.w).collect()).collect();
        let ff_v: Vec<Vec<f64>> = tables.iter().map(|t| t.values(|y| ff.eval(y))).collect();
        let n = lat.node_count();
        let w2 = lat.pair_weight();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = map_indexed(interior.len(), |k| {
            let a = interior[k];
            let x = lat.position(a);
            let mut one = vec![0.0; n];
            let mut sum = vec![0.0; n];
            for j in 0..n {
                if j == a {
                    continue;
                }
                let y = lat.position(j);
                let kxy = spec.eval_raw(&x, &y) * w2;
                let kyx = spec.eval_raw(&y, &x) * w2;
                one[j] = kxy;
                sum[j] = kxy + kyx;
            }
            (one, sum)
        });
        let (k_one, k_sum) = rows.into_iter().unzip();
        Ok(Assembly {
            interior,
            exterior,
            ff_w,
            ff_v,
            k_one,
            k_sum,
            p,
            hn: lat.cell_volume(),
        })
    }

    /// Interior gradient of the energy at `vals`.
    fn gradient(&self, vals: &[f64]) -> Vec<f64> {
        let p = self.p;
        map_indexed(self.interior.len(), |k| {
            let ua = vals[self.interior[k]];
            let row = &self.k_sum[k];
            let mut acc = 0.0;
            for (j, &w) in row.iter().enumerate() {
                acc += w * phi_p(ua - vals[j], p);
            }
            let mut far = 0.0;
            for (&w, &v) in self.ff_w[k].iter().zip(&self.ff_v[k]) {
                far += w * phi_p(ua - v, p);
            }
            p * (acc + 2.0 * self.hn * far)
        })
    }

    /// Variable part of the energy: ordered pairs with an interior endpoint
    /// plus far-field terms renormalized against `uref`.
    fn objective(&self, vals: &[f64], uref: &[f64]) -> f64 {
        let p = self.p;
        let ni = self.interior.len();
        let n = vals.len();
        let part1 = sum_indexed(ni * n, |k| {
            let row = k / n;
            let j = k % n;
            self.k_one[row][j] * pow_abs(vals[self.interior[row]] - vals[j], p)
        });
        let ne = self.exterior.len();
        // ordered pairs (exterior, interior): K(x_e, x_a) = k_sum - k_one
        let part2 = sum_indexed(ne * ni, |k| {
            let e = self.exterior[k / ni];
            let row = k % ni;
            (self.k_sum[row][e] - self.k_one[row][e])
                * pow_abs(vals[e] - vals[self.interior[row]], p)
        });
        let far: Vec<f64> = map_indexed(ni, |k| {
            let a = self.interior[k];
            let mut acc = 0.0;
            for (&w, &v) in self.ff_w[k].iter().zip(&self.ff_v[k]) {
                acc += w * (pow_abs(vals[a] - v, p) - pow_abs(uref[a] - v, p));
            }
            2.0 * self.hn * acc
        });
        part1 + part2 + tree_fold(&far)
    }

    /// One partial derivative of the energy in the coordinate `vals[a] = t`.
    fn partial(&self, vals: &[f64], k: usize, t: f64) -> f64 {
        let p = self.p;
        let a = self.interior[k];
        let row = &self.k_sum[k];
        let mut acc = 0.0;
        for (j, &w) in row.iter().enumerate() {
            if j != a {
                acc += w * phi_p(t - vals[j], p);
            }
        }
        let mut far = 0.0;
        for (&w, &v) in self.ff_w[k].iter().zip(&self.ff_v[k]) {
            far += w * phi_p(t - v, p);
        }
        p * (acc + 2.0 * self.hn * far)
    }

    /// One Gauss-Seidel sweep of exact coordinate minimizations: each
    /// partial derivative is strictly increasing in its coordinate, so the
    /// coordinate optimum is a root found by a safeguarded regula falsi.
    /// Decreases the energy and needs no objective-value comparisons, so it
    /// is immune to the f64 noise floor of the objective.
    fn coordinate_sweep(&self, vals: &mut [f64]) {
        for k in 0..self.interior.len() {
            let a = self.interior[k];
            let g0 = self.partial(vals, k, vals[a]);
            if g0 == 0.0 {
                continue;
            }
            // bracket the root monotonically
            let mut width = 1e-3 * vals[a].abs().max(1.0);
            let (mut lo, mut hi, mut flo, mut fhi);
            if g0 > 0.0 {
                hi = vals[a];
                fhi = g0;
                lo = hi - width;
                flo = self.partial(vals, k, lo);
                while flo > 0.0 {
                    hi = lo;
                    fhi = flo;
                    width *= 4.0;
                    lo -= width;
                    flo = self.partial(vals, k, lo);
                }
            } else {
                lo = vals[a];
                flo = g0;
                hi = lo + width;
                fhi = self.partial(vals, k, hi);
                while fhi < 0.0 {
                    lo = hi;
                    flo = fhi;
                    width *= 4.0;
                    hi += width;
                    fhi = self.partial(vals, k, hi);
                }
            }
            // Illinois-damped regula falsi on the monotone partial
            let mut side = 0i8;
            let mut root = 0.5 * (lo + hi);
            for _ in 0..80 {
                let denom = fhi - flo;
                let mut x = if denom != 0.0 { hi - fhi * (hi - lo) / denom } else { root };
                if !(x > lo && x < hi) {
                    x = 0.5 * (lo + hi);
                }
                if hi - lo <= 1e-15 * x.abs().max(1.0) {
                    root = x;
                    break;
                }
                let fx = self.partial(vals, k, x);
                root = x;
                if fx == 0.0 {
                    break;
                }
                if fx > 0.0 {
                    hi = x;
                    fhi = fx;
                    if side == 1 {
                        flo *= 0.5;
                    }
                    side = 1;
                } else {
                    lo = x;
                    flo = fx;
                    if side == -1 {
                        fhi *= 0.5;
                    }
                    side = -1;
                }
            }
            vals[a] = root;
        }
    }

    /// Jacobi-style diagonal scale built from the second-difference weights,
    /// with the |difference|^{p-2} factor clamped away from 0 and infinity.
    fn diagonal(&self, vals: &[f64], d0: f64) -> Vec<f64> {
        let p = self.p;
        map_indexed(self.interior.len(), |k| {
            let ua = vals[self.interior[k]];
            let row = &self.k_sum[k];
            let mut acc = 0.0;
            for (j, &w) in row.iter().enumerate() {
                acc += w * pow_abs((ua - vals[j]).abs().max(d0), p - 2.0);
            }
            let mut far = 0.0;
            for (&w, &v) in self.ff_w[k].iter().zip(&self.ff_v[k]) {
                far += w * pow_abs((ua - v).abs().max(d0), p - 2.0);
            }
            p * (p - 1.0) * (acc + 2.0 * self.hn * far)
        })
    }
}

fn validate_problem(spec: &KernelSpec, omega: &Region, g: &GridFunction) -> Result<()> {
    if g.lattice() != omega.lattice() {
        return Err(Error::LatticeMismatch);
    }
    if spec.dim() != g.lattice().dim() {
        return Err(Error::Solver("kernel and lattice dimensions differ".into()));
    }
    if omega.count() == 0 {
        return Err(Error::Solver("the interior region is empty".into()));
    }
    if !omega.has_exterior_collar() {
        return Err(Error::Solver(
            "the interior region must be strictly inside the box (no collar of exterior nodes)"
                .into(),
        ));
    }
    let growth = g.far_field().growth_exponent();
    let sp = spec.s() * spec.p();
    if growth * (spec.p() - 1.0) >= sp - 1e-12 {
        return Err(Error::NonIntegrableFarField(format!(
            "exterior data grows like |y|^{growth}; need growth * (p-1) < s p = {sp}"
        )));
    }
    Ok(())
}

fn initial_values(omega: &Region, g: &GridFunction, init: InitStrategy) -> Vec<f64> {
    let mut vals = g.values().to_vec();
    let fill = match init {
        InitStrategy::ZeroFill => 0.0,
        InitStrategy::DataMean => {
            let mut acc = 0.0;
            let mut count = 0usize;
            for i in 0..vals.len() {
                if !omega.contains(i) {
                    acc += vals[i];
                    count += 1;
                }
            }
            if count > 0 {
                acc / count as f64
            } else {
                0.0
            }
        }
    };
    for i in 0..vals.len() {
        if omega.contains(i) {
            vals[i] = fill;
        }
    }
    vals
}

/// Compute the discrete minimizer of the nonlocal energy over the interior
/// values with `u = g` off the interior region.
pub fn solve_dirichlet(
    spec: &KernelSpec,
    omega: &Region,
    g: &GridFunction,
    cfg: &SolverConfig,
    quad: &QuadratureScheme,
) -> Result<SolveResult> {
    cfg.validate()?;
    validate_problem(spec, omega, g)?;
    let lat = g.lattice().clone();
    let p = spec.p();

    let mut sup_g = 0.0f64;
    for i in 0..lat.node_count() {
        if !omega.contains(i) {
            sup_g = sup_g.max(g.value(i).abs());
        }
    }
    let value_scale = sup_g.max(1.0);
    let grad_scale = value_scale.powf(p - 1.0);

    let asm = Assembly::build(spec, omega, g, quad, value_scale)?;
    let mut vals = initial_values(omega, g, cfg.init);
    let uref = vals.clone();

    let mut f = asm.objective(&vals, &uref);
    let mut trace = vec![f];
    let mut step = cfg.line_search.initial_step;
    let d0 = 1e-4 * value_scale;
    let mut converged = false;
    let mut final_grad_norm = f64::NAN;
    let mut iterations = 0usize;
    let mut stalled_once = false;

    while iterations < cfg.max_iters {
        let grad = asm.gradient(&vals);
        let gnorm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        final_grad_norm = gnorm;
        if gnorm <= cfg.grad_tol * grad_scale {
            converged = true;
            break;
        }
        let direction: Vec<f64> = match cfg.preconditioner {
            Preconditioner::None => grad.iter().map(|g| -g).collect(),
            Preconditioner::Diagonal => {
                let diag = asm.diagonal(&vals, d0);
                grad.iter().zip(&diag).map(|(g, d)| -g / d.max(1e-300)).collect()
            }
        };
        let slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        if !(slope < 0.0) {
            // flat to rounding: nothing left to gain
            converged = gnorm <= cfg.grad_tol * grad_scale;
            break;
        }
        let mut alpha = (4.0 * step).min(cfg.line_search.initial_step);
        // Below this, objective differences drown in rounding; polish with
        // exact coordinate minimizations instead (monotone descent without
        // objective comparisons). The trace keeps its last measurable value.
        let noise = 64.0 * f64::EPSILON * (f.abs() + 1.0);
        if cfg.line_search.sufficient_decrease * alpha * (-slope) < noise {
            asm.coordinate_sweep(&mut vals);
            trace.push(f);
            iterations += 1;
            continue;
        }
        let mut backtracks = 0u32;
        let accepted = loop {
            let mut trial = vals.clone();
            for (k, &a) in asm.interior.iter().enumerate() {
                trial[a] += alpha * direction[k];
            }
            let ft = asm.objective(&trial, &uref);
            if ft <= f + cfg.line_search.sufficient_decrease * alpha * slope {
                break Some((trial, ft));
            }
            backtracks += 1;
            alpha *= cfg.line_search.shrink;
            let stall_limit = match cfg.restart {
                RestartPolicy::Never => 120,
                RestartPolicy::OnStall { max_backtracks } => max_backtracks,
            };
            if backtracks > stall_limit {
                if matches!(cfg.restart, RestartPolicy::OnStall { .. }) && !stalled_once {
                    stalled_once = true;
                    alpha = cfg.line_search.initial_step;
                    backtracks = 0;
                    continue;
                }
                break None;
            }
        };
        match accepted {
            Some((trial, ft)) => {
                vals = trial;
                f = ft;
                trace.push(f);
                step = alpha;
                iterations += 1;
            }
            None => break,
        }
    }

    let u = GridFunction::new(lat, vals, g.far_field().clone())?;
    Ok(SolveResult { u, iterations, final_grad_norm, energy_trace: trace, converged })
}

/// Direct dense solve of the p = 2 stationarity system (the descent
/// oracle). Assembles the symmetric positive-definite interior matrix from
/// the form coefficients and factorizes it.
pub fn solve_linear_p2(
    spec: &KernelSpec,
    omega: &Region,
    g: &GridFunction,
    quad: &QuadratureScheme,
) -> Result<GridFunction> {
    if spec.p() != 2.0 {
        return Err(Error::Precondition(format!(
            "solve_linear_p2 requires p = 2, got p = {}",
            spec.p()
        )));
    }
    validate_problem(spec, omega, g)?;
    let (matrix, rhs, interior) = assemble_p2(spec, omega, g, quad)?;
    let chol = Cholesky::new(matrix)
        .ok_or_else(|| Error::Solver("p = 2 system is not positive definite".into()))?;
    let sol = chol.solve(&rhs);
    let mut vals = g.values().to_vec();
    for (k, &a) in interior.iter().enumerate() {
        vals[a] = sol[k];
    }
    GridFunction::new(g.lattice().clone(), vals, g.far_field().clone())
}

/// Interior system `A u = b` of the p = 2 problem, exposed for the
/// positive-definiteness checks.
pub fn assemble_p2(
    spec: &KernelSpec,
    omega: &Region,
    g: &GridFunction,
    quad: &QuadratureScheme,
) -> Result<(DMatrix<f64>, DVector<f64>, Vec<usize>)> {
    let asm = Assembly::build(spec, omega, g, quad, 1.0)?;
    let ni = asm.interior.len();
    let mut a = DMatrix::zeros(ni, ni);
    let mut b = DVector::zeros(ni);
    let index_of: std::collections::HashMap<usize, usize> =
        asm.interior.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    for (k, &node) in asm.interior.iter().enumerate() {
        let mut diag = 0.0;
        for (j, &s) in asm.k_sum[k].iter().enumerate() {
            if j == node {
                continue;
            }
            diag += s;
            match index_of.get(&j) {
                Some(&kj) => a[(k, kj)] -= s,
                None => b[k] += s * g.value(j),
            }
        }
        let c1: f64 = asm.ff_w[k].iter().sum();
        let c2: f64 = asm.ff_w[k].iter().zip(&asm.ff_v[k]).map(|(w, v)| w * v).sum();
        a[(k, k)] = diag + 2.0 * asm.hn * c1;
        b[k] += 2.0 * asm.hn * c2;
    }
    Ok((a, b, asm.interior))
}

//! Discrete nonlocal energy, bilinear form, pointwise operator, Gagliardo
//! seminorm, energy gradient and the weak sub/supersolution classifier.
//!
//! Double integrals are collocated on ordered node pairs with weight
//! `h^{2n}` and the diagonal excluded; the principal value needs no
//! singular-cell correction because nodal differences never touch `x = y`
//! and symmetric neighborhoods cancel the odd part of the singularity.
//! Pairs with one point beyond the box are handled by radial quadrature of
//! the far-field descriptor against the kernel's radial profile (exact for
//! the model kernel, sandwich midpoint for modulated ones). Those rays
//! start at `max(box exit, h/2)`: the half-cell around a node belongs to
//! the excluded diagonal, which also keeps corrections finite at nodes on
//! the box face.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridfn::{FarField, GridFunction};
use crate::kernel::KernelSpec;
use crate::lattice::Region;
use crate::par::{sum_indexed, try_map_indexed};
use crate::quad::{exterior_table, QuadratureScheme};

/// `|t|^p` with fast paths for the common exponents.
#[inline]
pub(crate) fn pow_abs(t: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 2.0 {
        t * t
    } else if p == 1.5 {
        let a = t.abs();
        a * a.sqrt()
    } else if p == 3.0 {
        let a = t.abs();
        a * a * a
    } else {
        t.abs().powf(p)
    }
}

/// `|t|^{p-2} t`, continuous at 0 for p > 1.
#[inline]
pub(crate) fn phi_p(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t
    } else if p == 1.5 {
        t.signum() * t.abs().sqrt()
    } else if p == 3.0 {
        t * t.abs()
    } else if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(p - 1.0)
    }
}

fn check_lattices(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if !a.same_lattice(b) {
        return Err(Error::LatticeMismatch);
    }
    Ok(())
}

/// Growth admissibility of a far field under an integrand
/// `|v|^{power} |y|^{-n-sp}`.
fn check_integrable(ff: &FarField, power: f64, sp: f64, what: &str) -> Result<()> {
    let growth = ff.growth_exponent();
    if growth * power >= sp - 1e-12 {
        return Err(Error::NonIntegrableFarField(format!(
            "{what}: far field grows like |y|^{growth} and the integrand carries power {power}; \
             need growth * power < s p = {sp}"
        )));
    }
    Ok(())
}

/// Sum over ordered node pairs (diagonal excluded) with deterministic
/// chunked reduction.
fn pair_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    sum_indexed(n * n, |k| {
        let i = k / n;
        let j = k % n;
        if i == j {
            0.0
        } else {
            f(i, j)
        }
    })
}

/// The nonlocal energy `F(u) = int int K |u(x)-u(y)|^p`, discretized as the
/// ordered-pair sum plus one far-field correction per box node.
pub fn energy(spec: &KernelSpec, u: &GridFunction, quad: &QuadratureScheme) -> Result<f64> {
    let lat = u.lattice().clone();
    let p = spec.p();
    let sp = spec.s() * p;
    check_integrable(u.far_field(), p, sp, "energy")?;
    let w2 = lat.pair_weight();
    let n = lat.node_count();
    let grid = pair_sum(n, |i, j| {
        let (xi, xj) = (lat.position(i), lat.position(j));
        spec.eval_raw(&xi, &xj) * pow_abs(u.value(i) - u.value(j), p) * w2
    });
    let coeff = spec.radial_coeff().mid;
    let hn = lat.cell_volume();
    let ff = u.far_field().clone();
    let per_node = try_map_indexed(n, |i| -> Result<f64> {
        let x = lat.position(i);
        let ui = u.value(i);
        let table = exterior_table(&lat, quad, &x, sp, coeff, 0.5 * lat.spacing(), &|_, y| {
            (ui.abs() + ff.eval(y).abs() + 1.0).powf(p)
        })?;
        Ok(2.0 * hn * table.integrate(|_, y| pow_abs(ui - ff.eval(y), p)))
    })?;
    Ok(grid + crate::par::tree_fold(&per_node))
}

/// `E(u, v) = int int K |u(x)-u(y)|^{p-2} (u(x)-u(y)) (v(x)-v(y))`.
pub fn form(
    spec: &KernelSpec,
    u: &GridFunction,
    v: &GridFunction,
    quad: &QuadratureScheme,
) -> Result<f64> {
    check_lattices(u, v)?;
    let lat = u.lattice().clone();
    let p = spec.p();
    let sp = spec.s() * p;
    let gu = u.far_field().growth_exponent();
    let gv = v.far_field().growth_exponent();
    if gu * (p - 1.0) + gv >= sp - 1e-12 {
        return Err(Error::NonIntegrableFarField(format!(
            "form: far-field growths ({gu}, {gv}) violate (p-1) g_u + g_v < s p = {sp}"
        )));
    }
    let w2 = lat.pair_weight();
    let n = lat.node_count();
    let grid = pair_sum(n, |i, j| {
        let (xi, xj) = (lat.position(i), lat.position(j));
        spec.eval_raw(&xi, &xj)
            * phi_p(u.value(i) - u.value(j), p)
            * (v.value(i) - v.value(j))
            * w2
    });
    let coeff = spec.radial_coeff().mid;
    let hn = lat.cell_volume();
    let ffu = u.far_field().clone();
    let ffv = v.far_field().clone();
    let per_node = try_map_indexed(n, |i| -> Result<f64> {
        let x = lat.position(i);
        let (ui, vi) = (u.value(i), v.value(i));
        let table = exterior_table(&lat, quad, &x, sp, coeff, 0.5 * lat.spacing(), &|_, y| {
            (ui.abs() + ffu.eval(y).abs() + 1.0).powf(p - 1.0) * (vi.abs() + ffv.eval(y).abs() + 1.0)
        })?;
        Ok(2.0
            * hn
            * table.integrate(|_, y| phi_p(ui - ffu.eval(y), p) * (vi - ffv.eval(y))))
    })?;
    Ok(grid + crate::par::tree_fold(&per_node))
}

/// Pointwise operator value
/// `L u(x) = P.V. int K_sym(x,y) |u(x)-u(y)|^{p-2} (u(x)-u(y)) dy` at a node.
pub fn apply_operator(
    spec: &KernelSpec,
    u: &GridFunction,
    node: usize,
    quad: &QuadratureScheme,
) -> Result<f64> {
    let lat = u.lattice().clone();
    if node >= lat.node_count() {
        return Err(Error::Precondition(format!("node index {node} out of range")));
    }
    let p = spec.p();
    let sp = spec.s() * p;
    check_integrable(u.far_field(), p - 1.0, sp, "apply_operator")?;
    let sym = spec.symmetric_part();
    let hn = lat.cell_volume();
    let x = lat.position(node);
    let ux = u.value(node);
    let grid = sum_indexed(lat.node_count(), |j| {
        if j == node {
            return 0.0;
        }
        let y = lat.position(j);
        sym.eval_raw(&x, &y) * phi_p(ux - u.value(j), p) * hn
    });
    let coeff = sym.radial_coeff().mid;
    let ff = u.far_field().clone();
    let table = exterior_table(&lat, quad, &x, sp, coeff, 0.5 * lat.spacing(), &|_, y| {
        (ux.abs() + ff.eval(y).abs() + 1.0).powf(p - 1.0)
    })?;
    let far = table.integrate(|_, y| phi_p(ux - ff.eval(y), p));
    Ok(grid + far)
}

/// Gagliardo seminorm: the energy with the model kernel of the same order,
/// raised to `1/p`.
pub fn seminorm(u: &GridFunction, s: f64, p: f64, quad: &QuadratureScheme) -> Result<f64> {
    let spec = KernelSpec::model(u.lattice().dim(), s, p)?;
    Ok(energy(&spec, u, quad)?.powf(1.0 / p))
}

/// First variation of the energy at the interior nodes: component at `x` is
/// `p sum_y (K(x,y) + K(y,x)) |u(x)-u(y)|^{p-2} (u(x)-u(y)) h^{2n}` plus the
/// far-field term, i.e. exactly `p E(u, hat_x)` for the nodal hat at `x`.
pub fn energy_gradient(
    spec: &KernelSpec,
    u: &GridFunction,
    interior: &Region,
    quad: &QuadratureScheme,
) -> Result<Vec<f64>> {
    if u.lattice() != interior.lattice() {
        return Err(Error::LatticeMismatch);
    }
    let lat = u.lattice().clone();
    let p = spec.p();
    let sp = spec.s() * p;
    check_integrable(u.far_field(), p - 1.0, sp, "energy_gradient")?;
    let nodes = interior.nodes();
    let w2 = lat.pair_weight();
    let hn = lat.cell_volume();
    let coeff = spec.radial_coeff().mid;
    let ff = u.far_field().clone();
    try_map_indexed(nodes.len(), |k| -> Result<f64> {
        let a = nodes[k];
        let x = lat.position(a);
        let ua = u.value(a);
        let mut grid = 0.0;
        for j in 0..lat.node_count() {
            if j == a {
                continue;
            }
            let y = lat.position(j);
            let ksum = spec.eval_raw(&x, &y) + spec.eval_raw(&y, &x);
            grid += ksum * phi_p(ua - u.value(j), p) * w2;
        }
        let table = exterior_table(&lat, quad, &x, sp, coeff, 0.5 * lat.spacing(), &|_, y| {
            (ua.abs() + ff.eval(y).abs() + 1.0).powf(p - 1.0)
        })?;
        let far = 2.0 * hn * table.integrate(|_, y| phi_p(ua - ff.eval(y), p));
        Ok(p * (grid + far))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionLabel {
    Subsolution,
    Supersolution,
    Solution,
    Neither,
}

/// Discrete test families for the classifier. Nodal hats are exactly the
/// first-variation directions; the richer family adds radial cutoffs for
/// robustness checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFamily {
    Hats,
    HatsAndCutoffs,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestWitness {
    pub kind: String,
    pub node: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionClass {
    pub label: SolutionLabel,
    pub worst_violation: f64,
    pub witness: Option<TestWitness>,
    pub scale: f64,
}

impl SolutionClass {
    pub fn is_supersolution_or_solution(&self) -> bool {
        matches!(self.label, SolutionLabel::Supersolution | SolutionLabel::Solution)
    }
    pub fn is_subsolution_or_solution(&self) -> bool {
        matches!(self.label, SolutionLabel::Subsolution | SolutionLabel::Solution)
    }
}

/// Energy used to scale classifier tolerances: the grid part always, plus
/// the far-field part when it is integrable.
fn energy_scale(spec: &KernelSpec, u: &GridFunction, quad: &QuadratureScheme) -> Result<f64> {
    match energy(spec, u, quad) {
        Ok(e) => Ok(e),
        Err(Error::NonIntegrableFarField(_)) => {
            let lat = u.lattice().clone();
            let p = spec.p();
            let w2 = lat.pair_weight();
            Ok(pair_sum(lat.node_count(), |i, j| {
                let (xi, xj) = (lat.position(i), lat.position(j));
                spec.eval_raw(&xi, &xj) * pow_abs(u.value(i) - u.value(j), p) * w2
            }))
        }
        Err(e) => Err(e),
    }
}

/// Classify `u` against the nonnegative discrete test family on the
/// interior: subsolution iff `E(u, eta) <= tol * scale` for every test,
/// supersolution iff `>= -tol * scale`, solution iff both;
/// `scale = max(1, energy(u))`.
pub fn classify_solution(
    spec: &KernelSpec,
    u: &GridFunction,
    interior: &Region,
    tol: f64,
    family: TestFamily,
    quad: &QuadratureScheme,
) -> Result<SolutionClass> {
    let nodes = interior.nodes();
    if nodes.is_empty() {
        return Err(Error::Precondition("classify_solution: empty interior".into()));
    }
    let grad = energy_gradient(spec, u, interior, quad)?;
    let p = spec.p();
    let mut tests: Vec<(TestWitness, f64)> = nodes
        .iter()
        .zip(grad.iter())
        .map(|(&n, &g)| (TestWitness { kind: "hat".into(), node: n }, g / p))
        .collect();
    if family == TestFamily::HatsAndCutoffs {
        let lat = u.lattice().clone();
        let h = lat.spacing();
        for &c in &nodes {
            let center = lat.position(c);
            let support = crate::lattice::Ball::new(center, 3.0 * h)?;
            let inside = crate::lattice::ball_nodes(&lat, &support)
                .iter()
                .all(|&i| interior.contains(i));
            if !inside {
                continue;
            }
            let plateau = crate::lattice::Ball::new(center, 1.5 * h)?;
            let phi = crate::gridfn::cutoff(lat.clone(), &support, &plateau)?;
            tests.push((TestWitness { kind: "cutoff".into(), node: c }, form(spec, u, &phi, quad)?));
        }
    }
    let scale = energy_scale(spec, u, quad)?.max(1.0);
    let slack = tol * scale;
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut sub_ok = true;
    let mut super_ok = true;
    for (wit, e) in tests {
        if e.abs() > worst {
            worst = e.abs();
            witness = Some(wit.clone());
        }
        if e > slack {
            sub_ok = false;
        }
        if e < -slack {
            super_ok = false;
        }
    }
    let label = match (sub_ok, super_ok) {
        (true, true) => SolutionLabel::Solution,
        (true, false) => SolutionLabel::Subsolution,
        (false, true) => SolutionLabel::Supersolution,
        (false, false) => SolutionLabel::Neither,
    };
    Ok(SolutionClass { label, worst_violation: worst, witness, scale })
}

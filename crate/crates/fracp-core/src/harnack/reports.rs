//! One report operation per inequality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{delta_sweep_grid, implied_and_pass, InequalityReport, ReportInput};
use crate::energy::pow_abs;
use crate::error::{Error, Result};
use crate::gridfn::{Extremum, GridFunction, LevelCmp, TruncSign};
use crate::lattice::{ball_nodes, Ball, Point};
use crate::par::sum_indexed;
use crate::quad::exterior_table;
use crate::tail::{tail, tail_offset_d};

fn tail_weight(r: f64, r_outer: f64, s: f64, p: f64) -> f64 {
    (r / r_outer).powf(s * p / (p - 1.0))
}

/// Full Harnack inequality on a solved nonnegative function:
/// `sup_{B_r} u <= c inf_{B_r} u + c (r/R)^{sp/(p-1)} Tail(u_-; x0, R)`.
pub fn harnack_report(
    input: &ReportInput,
    x0: &Point,
    r: f64,
    r_outer: f64,
    candidate: f64,
) -> Result<InequalityReport> {
    if !(r > 0.0 && r < r_outer / 2.0) {
        return Err(Error::Precondition(format!(
            "harnack needs B_r inside B_(R/2): r = {r}, R = {r_outer}"
        )));
    }
    let outer = Ball::new(*x0, r_outer)?;
    let outer_nodes = input.nodes_in_omega(&outer, "harnack")?;
    input.require_nonnegative(&outer_nodes, "harnack")?;
    let inner_nodes = ball_nodes(input.u.lattice(), &Ball::new(*x0, r)?);
    if inner_nodes.is_empty() {
        return Err(Error::Precondition("harnack: B_r contains no nodes".into()));
    }
    let (s, p) = (input.kernel.s(), input.kernel.p());
    let lhs = input.u.extremum(&inner_nodes, Extremum::Sup)?;
    let inf = input.u.extremum(&inner_nodes, Extremum::Inf)?.max(0.0);
    let neg = input.u.truncation(0.0, TruncSign::Minus);
    let tail_val = tail(&neg, x0, r_outer, s, p, input.quad)?;
    let tail_term = tail_weight(r, r_outer, s, p) * tail_val.value;
    let mut rhs = BTreeMap::new();
    rhs.insert("inf".to_string(), inf);
    rhs.insert("tail".to_string(), tail_term);
    let (implied, pass) = implied_and_pass(lhs, inf + tail_term, candidate);
    Ok(InequalityReport {
        schema_version: 1,
        name: "harnack".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(x0, r, r_outer),
        extras: BTreeMap::new(),
    })
}

/// Admissible moment bound of the weak Harnack inequality:
/// `(p-1) n / (n - sp)` when `sp < n`, unbounded otherwise (the Moser
/// iteration exhausts every exponent when the Sobolev exponent degenerates).
pub fn weak_harnack_t_bound(dim: usize, s: f64, p: f64) -> f64 {
    let n = dim as f64;
    if s * p < n {
        (p - 1.0) * n / (n - s * p)
    } else {
        f64::INFINITY
    }
}

/// Weak Harnack inequality for supersolutions:
/// `(mean of u^t over B_r)^{1/t} <= c inf_{B_2r} u + c (r/R)^{sp/(p-1)} Tail(u_-)`.
pub fn weak_harnack_report(
    input: &ReportInput,
    x0: &Point,
    r: f64,
    r_outer: f64,
    t: f64,
    candidate: f64,
) -> Result<InequalityReport> {
    if !(r > 0.0 && r < r_outer / 2.0) {
        return Err(Error::Precondition(format!(
            "weak harnack needs B_r inside B_(R/2): r = {r}, R = {r_outer}"
        )));
    }
    let (s, p) = (input.kernel.s(), input.kernel.p());
    let t_max = weak_harnack_t_bound(input.u.lattice().dim(), s, p);
    if !(t > 0.0 && t < t_max) {
        return Err(Error::Precondition(format!(
            "weak harnack moment t = {t} outside the admissible range (0, {t_max})"
        )));
    }
    let outer = Ball::new(*x0, r_outer)?;
    let outer_nodes = input.nodes_in_omega(&outer, "weak harnack")?;
    input.require_nonnegative(&outer_nodes, "weak harnack")?;
    let cls = input.classification()?;
    if !cls.is_supersolution_or_solution() {
        return Err(Error::Precondition(format!(
            "weak harnack needs a supersolution, classifier says {:?}",
            cls.label
        )));
    }
    let lhs = input.u.t_mean(&Ball::new(*x0, r)?, t)?;
    let double_nodes = ball_nodes(input.u.lattice(), &Ball::new(*x0, 2.0 * r)?);
    let inf = input.u.extremum(&double_nodes, Extremum::Inf)?.max(0.0);
    let neg = input.u.truncation(0.0, TruncSign::Minus);
    let tail_term = tail_weight(r, r_outer, s, p) * tail(&neg, x0, r_outer, s, p, input.quad)?.value;
    let mut rhs = BTreeMap::new();
    rhs.insert("inf".to_string(), inf);
    rhs.insert("tail".to_string(), tail_term);
    let (implied, pass) = implied_and_pass(lhs, inf + tail_term, candidate);
    let mut extras = BTreeMap::new();
    extras.insert("t".to_string(), t);
    if t_max.is_finite() {
        extras.insert("t-bound".to_string(), t_max);
    }
    Ok(InequalityReport {
        schema_version: 1,
        name: "weak-harnack".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(x0, r, r_outer),
        extras,
    })
}

/// Double sum over ordered pairs of `nodes`, diagonal excluded.
fn ball_pair_sum<F>(nodes: &[usize], f: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let m = nodes.len();
    sum_indexed(m * m, |k| {
        let i = nodes[k / m];
        let j = nodes[k % m];
        if i == j {
            0.0
        } else {
            f(i, j)
        }
    })
}

/// Kernel-weighted exterior mass `sup_{z in supp phi} int_{R^n \ B} Kbar(z, y) g(y) dy`,
/// split into the lattice part and the far-field part (midpoint profile,
/// with the ellipticity bracket returned for modulated kernels).
fn sup_exterior_integral(
    input: &ReportInput,
    ball: &Ball,
    support: &[usize],
    grid_g: &dyn Fn(usize) -> f64,
    ff_g: &dyn Fn(&Point) -> f64,
    ff_power_bound: f64,
) -> Result<(f64, f64, f64)> {
    let envelope = input.kernel.upper_envelope();
    let lat = input.u.lattice().clone();
    let hn = lat.cell_volume();
    let sp = input.kernel.s() * input.kernel.p();
    let coeff = envelope.radial_coeff();
    let outside: Vec<usize> = (0..lat.node_count())
        .filter(|&i| !ball.contains(&lat.position(i)))
        .collect();
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &z in support {
        let zp = lat.position(z);
        let grid: f64 = outside
            .iter()
            .map(|&j| envelope.eval_raw(&lat.position(j), &zp) * grid_g(j) * hn)
            .sum();
        // everything beyond the box is outside the ball already (the ball
        // sits strictly inside), so the rays start at the box exit;
        // unit-coefficient far field, scaled by the bracket afterwards
        let table = exterior_table(&lat, input.quad, &zp, sp, 1.0, 0.5 * lat.spacing(), &|_, y| {
            ff_g(y).abs() + ff_power_bound
        })?;
        let unit = table.integrate(|_, y| ff_g(y));
        let mid = grid + coeff.mid * unit;
        if mid > best.0 {
            best = (mid, grid + coeff.lo * unit, grid + coeff.hi * unit);
        }
    }
    Ok(best)
}

/// Caccioppoli estimate for truncations `w_{+/-}` against a cutoff
/// supported in the ball.
pub fn caccioppoli_report(
    input: &ReportInput,
    k: f64,
    sign: TruncSign,
    ball: &Ball,
    cutoff: &GridFunction,
    candidate: f64,
) -> Result<InequalityReport> {
    if !input.u.same_lattice(cutoff) {
        return Err(Error::LatticeMismatch);
    }
    let lat = input.u.lattice().clone();
    let nodes = input.nodes_in_omega(ball, "caccioppoli")?;
    for i in 0..lat.node_count() {
        if cutoff.value(i) != 0.0 && !ball.contains(&lat.position(i)) {
            return Err(Error::Precondition(format!(
                "caccioppoli: cutoff not supported in the ball (node {i})"
            )));
        }
    }
    let cls = input.classification()?;
    let ok = match sign {
        TruncSign::Plus => cls.is_subsolution_or_solution(),
        TruncSign::Minus => cls.is_supersolution_or_solution(),
    };
    if !ok {
        return Err(Error::Precondition(format!(
            "caccioppoli with sign {sign:?} needs a {} (classifier says {:?})",
            match sign {
                TruncSign::Plus => "subsolution",
                TruncSign::Minus => "supersolution",
            },
            cls.label
        )));
    }
    let p = input.kernel.p();
    let w2 = lat.pair_weight();
    let hn = lat.cell_volume();
    let w = input.u.truncation(k, sign);
    let envelope = input.kernel.upper_envelope();

    let lhs = ball_pair_sum(&nodes, |i, j| {
        let (xi, xj) = (lat.position(i), lat.position(j));
        input.kernel.eval_raw(&xi, &xj)
            * pow_abs(w.value(i) * cutoff.value(i) - w.value(j) * cutoff.value(j), p)
            * w2
    });
    let grad_term = ball_pair_sum(&nodes, |i, j| {
        let (xi, xj) = (lat.position(i), lat.position(j));
        envelope.eval_raw(&xi, &xj)
            * w.value(i).max(w.value(j)).powf(p)
            * pow_abs(cutoff.value(i) - cutoff.value(j), p)
            * w2
    });
    let local_mass: f64 =
        nodes.iter().map(|&i| w.value(i) * cutoff.value(i).powf(p) * hn).sum();
    let support: Vec<usize> = nodes.iter().copied().filter(|&i| cutoff.value(i) > 0.0).collect();
    if support.is_empty() {
        return Err(Error::Precondition("caccioppoli: cutoff vanishes on the ball".into()));
    }
    let wff = w.far_field().clone();
    let (sup_mid, sup_lo, sup_hi) = sup_exterior_integral(
        input,
        ball,
        &support,
        &|j| w.value(j).powf(p - 1.0),
        &|y| wff.eval(y).powf(p - 1.0),
        0.0,
    )?;
    let exterior_term = local_mass * sup_mid;

    let mut rhs = BTreeMap::new();
    rhs.insert("gradient-term".to_string(), grad_term);
    rhs.insert("exterior-term".to_string(), exterior_term);
    let (implied, pass) = implied_and_pass(lhs, grad_term + exterior_term, candidate);
    let mut extras = BTreeMap::new();
    extras.insert("k".to_string(), k);
    if !input.kernel.radial_coeff().is_exact() {
        extras.insert("exterior-term-lo".to_string(), local_mass * sup_lo);
        extras.insert("exterior-term-hi".to_string(), local_mass * sup_hi);
    }
    Ok(InequalityReport {
        schema_version: 1,
        name: "caccioppoli".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(&ball.center, ball.radius, ball.radius),
        extras,
    })
}

/// Caccioppoli estimate for the power `w = (u + d)^{(p-q)/p}` of a
/// nonnegative supersolution, with the tail entering through
/// `d^{1-p} R^{-sp} Tail(u_-; x0, R)^{p-1}`.
pub fn power_caccioppoli_report(
    input: &ReportInput,
    d: f64,
    q: f64,
    ball: &Ball,
    cutoff: &GridFunction,
    r_outer: f64,
    candidate: f64,
) -> Result<InequalityReport> {
    let p = input.kernel.p();
    if !(q > 1.0 && q < p) {
        return Err(Error::Precondition(format!("power caccioppoli needs q in (1, p), got {q}")));
    }
    if !(d > 0.0) {
        return Err(Error::Precondition(format!("power caccioppoli needs d > 0, got {d}")));
    }
    if !(ball.radius <= 0.75 * r_outer) {
        return Err(Error::Precondition(format!(
            "power caccioppoli needs B_r inside B_(3R/4): r = {}, R = {r_outer}",
            ball.radius
        )));
    }
    if !input.u.same_lattice(cutoff) {
        return Err(Error::LatticeMismatch);
    }
    let lat = input.u.lattice().clone();
    let nodes = input.nodes_in_omega(ball, "power caccioppoli")?;
    let outer_nodes = input.nodes_in_omega(&Ball::new(ball.center, r_outer)?, "power caccioppoli")?;
    input.require_nonnegative(&outer_nodes, "power caccioppoli")?;
    let cls = input.classification()?;
    if !cls.is_supersolution_or_solution() {
        return Err(Error::Precondition(format!(
            "power caccioppoli needs a supersolution, classifier says {:?}",
            cls.label
        )));
    }
    let s = input.kernel.s();
    let sp = s * p;
    let w2 = lat.pair_weight();
    let hn = lat.cell_volume();
    // w is only ever integrated inside the ball where u >= 0
    let wexp = (p - q) / p;
    let wval = |i: usize| (input.u.value(i).max(0.0) + d).powf(wexp);
    let envelope = input.kernel.upper_envelope();

    let lhs = ball_pair_sum(&nodes, |i, j| {
        let (xi, xj) = (lat.position(i), lat.position(j));
        input.kernel.eval_raw(&xi, &xj)
            * pow_abs(wval(i) * cutoff.value(i) - wval(j) * cutoff.value(j), p)
            * w2
    });
    let grad_term = ball_pair_sum(&nodes, |i, j| {
        let (xi, xj) = (lat.position(i), lat.position(j));
        envelope.eval_raw(&xi, &xj)
            * wval(i).max(wval(j)).powf(p)
            * pow_abs(cutoff.value(i) - cutoff.value(j), p)
            * w2
    });
    let local_mass: f64 =
        nodes.iter().map(|&i| wval(i).powf(p) * cutoff.value(i).powf(p) * hn).sum();
    let support: Vec<usize> = nodes.iter().copied().filter(|&i| cutoff.value(i) > 0.0).collect();
    if support.is_empty() {
        return Err(Error::Precondition("power caccioppoli: cutoff vanishes on the ball".into()));
    }
    // kernel-only exterior mass, sup over the cutoff support
    let (kmass_mid, kmass_lo, kmass_hi) =
        sup_exterior_integral(input, ball, &support, &|_| 1.0, &|_| 1.0, 0.0)?;
    let exterior_kernel_term = kmass_mid * local_mass;
    let neg = input.u.truncation(0.0, TruncSign::Minus);
    let tail_val = tail(&neg, &ball.center, r_outer, s, p, input.quad)?;
    let tail_factor = d.powf(1.0 - p) * r_outer.powf(-sp) * tail_val.value.powf(p - 1.0);
    let tail_term = tail_factor * local_mass;

    let mut rhs = BTreeMap::new();
    rhs.insert("gradient-term".to_string(), grad_term);
    rhs.insert("exterior-kernel-term".to_string(), exterior_kernel_term);
    rhs.insert("tail-term".to_string(), tail_term);
    let denom = grad_term + exterior_kernel_term + tail_term;
    let (implied, pass) = implied_and_pass(lhs, denom, candidate);
    let mut extras = BTreeMap::new();
    extras.insert("q".to_string(), q);
    extras.insert("d".to_string(), d);
    if !input.kernel.radial_coeff().is_exact() {
        extras.insert("exterior-kernel-term-lo".to_string(), kmass_lo * local_mass);
        extras.insert("exterior-kernel-term-hi".to_string(), kmass_hi * local_mass);
    }
    Ok(InequalityReport {
        schema_version: 1,
        name: "power-caccioppoli".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(&ball.center, ball.radius, r_outer),
        extras,
    })
}

/// Local boundedness of subsolutions:
/// `sup_{B_{r/2}} u <= c d Tail(u_+; x0, r/2) + c d^{-gamma} (mean of u_+^p over B_r)^{1/p}`
/// with `gamma = (p-1) n / (s p^2)`, reported at the supplied interpolation
/// parameter and on the sweep grid.
pub fn sup_bound_report(
    input: &ReportInput,
    x0: &Point,
    r: f64,
    delta: f64,
    candidate: f64,
) -> Result<InequalityReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Precondition(format!(
            "interpolation parameter must lie in (0, 1], got {delta}"
        )));
    }
    let ball = Ball::new(*x0, r)?;
    input.nodes_in_omega(&ball, "local boundedness")?;
    let cls = input.classification()?;
    if !cls.is_subsolution_or_solution() {
        return Err(Error::Precondition(format!(
            "local boundedness needs a subsolution, classifier says {:?}",
            cls.label
        )));
    }
    let (s, p) = (input.kernel.s(), input.kernel.p());
    let n = input.u.lattice().dim() as f64;
    let gamma = (p - 1.0) * n / (s * p * p);
    let half_nodes = ball_nodes(input.u.lattice(), &Ball::new(*x0, r / 2.0)?);
    if half_nodes.is_empty() {
        return Err(Error::Precondition("local boundedness: B_(r/2) contains no nodes".into()));
    }
    let up = input.u.positive_part();
    let lhs = input.u.extremum(&half_nodes, Extremum::Sup)?.max(0.0);
    let tail_half = tail(&up, x0, r / 2.0, s, p, input.quad)?.value;
    let p_mean = up.t_mean(&ball, p)?;
    let term = |dl: f64| (dl * tail_half, dl.powf(-gamma) * p_mean);
    let (t_tail, t_mean) = term(delta);
    let mut rhs = BTreeMap::new();
    rhs.insert("tail".to_string(), t_tail);
    rhs.insert("p-mean".to_string(), t_mean);
    let (implied, pass) = implied_and_pass(lhs, t_tail + t_mean, candidate);
    let mut extras = BTreeMap::new();
    extras.insert("gamma".to_string(), gamma);
    for d in delta_sweep_grid() {
        let (a, b) = term(d);
        let (c, _) = implied_and_pass(lhs, a + b, candidate);
        if c.is_finite() {
            extras.insert(format!("implied[delta={d:.6e}]"), c);
        }
    }
    Ok(InequalityReport {
        schema_version: 1,
        name: "local-boundedness".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(x0, r, r),
        extras,
    })
}

/// Tail control for solutions:
/// `Tail(u_+; x0, r) <= c sup_{B_r} u + c (r/R)^{sp/(p-1)} Tail(u_-; x0, R)`.
pub fn tail_control_report(
    input: &ReportInput,
    x0: &Point,
    r: f64,
    r_outer: f64,
    candidate: f64,
) -> Result<InequalityReport> {
    if !(r > 0.0 && r < r_outer) {
        return Err(Error::Precondition(format!("tail control needs 0 < r < R, got {r}, {r_outer}")));
    }
    let outer_nodes = input.nodes_in_omega(&Ball::new(*x0, r_outer)?, "tail control")?;
    input.require_nonnegative(&outer_nodes, "tail control")?;
    let cls = input.classification()?;
    if cls.label != crate::energy::SolutionLabel::Solution {
        return Err(Error::Precondition(format!(
            "tail control holds for full solutions; classifier says {:?}",
            cls.label
        )));
    }
    let (s, p) = (input.kernel.s(), input.kernel.p());
    let up = input.u.positive_part();
    let lhs = tail(&up, x0, r, s, p, input.quad)?.value;
    let inner_nodes = ball_nodes(input.u.lattice(), &Ball::new(*x0, r)?);
    if inner_nodes.is_empty() {
        return Err(Error::Precondition("tail control: B_r contains no nodes".into()));
    }
    let sup = input.u.extremum(&inner_nodes, Extremum::Sup)?.max(0.0);
    let neg = input.u.truncation(0.0, TruncSign::Minus);
    let tail_term = tail_weight(r, r_outer, s, p) * tail(&neg, x0, r_outer, s, p, input.quad)?.value;
    let mut rhs = BTreeMap::new();
    rhs.insert("sup".to_string(), sup);
    rhs.insert("tail".to_string(), tail_term);
    let (implied, pass) = implied_and_pass(lhs, sup + tail_term, candidate);
    Ok(InequalityReport {
        schema_version: 1,
        name: "tail-control".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(x0, r, r_outer),
        extras: BTreeMap::new(),
    })
}

/// Small-exponent mean estimate for supersolutions:
/// `(mean of u^eps over B_r)^{1/eps} <= c inf_{B_r} u + c (r/R)^{sp/(p-1)} Tail(u_-)`,
/// with the left side recomputed through the layer-cake (Cavalieri)
/// representation as an internal cross-check.
pub fn inf_estimate_report(
    input: &ReportInput,
    x0: &Point,
    r: f64,
    r_outer: f64,
    eps: f64,
    candidate: f64,
) -> Result<InequalityReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("exponent must lie in (0,1), got {eps}")));
    }
    if !(r > 0.0 && r <= r_outer) {
        return Err(Error::Precondition(format!("need B_r inside B_R: r = {r}, R = {r_outer}")));
    }
    let outer_nodes = input.nodes_in_omega(&Ball::new(*x0, r_outer)?, "inf estimate")?;
    input.require_nonnegative(&outer_nodes, "inf estimate")?;
    let cls = input.classification()?;
    if !cls.is_supersolution_or_solution() {
        return Err(Error::Precondition(format!(
            "inf estimate needs a supersolution, classifier says {:?}",
            cls.label
        )));
    }
    let (s, p) = (input.kernel.s(), input.kernel.p());
    let ball = Ball::new(*x0, r)?;
    let lhs = input.u.t_mean(&ball, eps)?;
    // Cavalieri route: eps int t^{eps-1} |{u > t} and B_r| / |B_r| dt,
    // integrated exactly panel by panel between sorted node values
    let nodes = ball_nodes(input.u.lattice(), &ball);
    let mut vals: Vec<f64> = nodes.iter().map(|&i| input.u.value(i).max(0.0)).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = vals.len() as f64;
    let mut acc = 0.0;
    let mut prev = 0.0;
    for (idx, &v) in vals.iter().enumerate() {
        if v > prev {
            let frac = (vals.len() - idx) as f64 / m;
            acc += frac * (v.powf(eps) - prev.powf(eps));
            prev = v;
        }
    }
    let cavalieri = acc.powf(1.0 / eps);
    if (cavalieri - lhs).abs() > 1e-6 * lhs.max(1e-300) {
        return Err(Error::CrossCheck(format!(
            "Cavalieri mean {cavalieri} vs direct mean {lhs} differ beyond 1e-6"
        )));
    }
    let inf = input.u.extremum(&nodes, Extremum::Inf)?.max(0.0);
    let neg = input.u.truncation(0.0, TruncSign::Minus);
    let tail_term = tail_weight(r, r_outer, s, p) * tail(&neg, x0, r_outer, s, p, input.quad)?.value;
    let mut rhs = BTreeMap::new();
    rhs.insert("inf".to_string(), inf);
    rhs.insert("tail".to_string(), tail_term);
    let (implied, pass) = implied_and_pass(lhs, inf + tail_term, candidate);
    let mut extras = BTreeMap::new();
    extras.insert("eps".to_string(), eps);
    extras.insert("cavalieri-lhs".to_string(), cavalieri);
    Ok(InequalityReport {
        schema_version: 1,
        name: "inf-estimate".into(),
        lhs,
        rhs_terms: rhs,
        implied_constant: implied,
        candidate_constant: candidate,
        pass,
        context: input.context(x0, r, r_outer),
        extras,
    })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub delta: f64,
    /// `|B_6r and {u <= 2 delta k - d}| / |B_6r|`
    pub fraction: f64,
    /// `fraction * sigma * log(1/(2 delta))`
    pub bound_c: f64,
}

/// Expansion-of-positivity report: the measure-to-pointwise mechanism.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub schema_version: u32,
    pub k: f64,
    pub sigma: f64,
    /// Largest sweep level with `inf_{B_4r} u >= delta k - tail`;
    /// absent when no sweep level qualifies.
    pub delta_fit: Option<f64>,
    /// Measured hypothesis fraction `|B_r and {u >= k}| / |B_r|`.
    pub level_measure_fraction: f64,
    pub inf_b4r: f64,
    pub tail_term: f64,
    /// Fitted constant of the level-set bound, max over the sweep.
    pub c_fit: f64,
    pub sweep: Vec<ExpansionPoint>,
    pub context: super::ReportContext,
}

/// Verify the expansion of positivity on a nonnegative supersolution: the
/// level-set fraction bound for every sweep level, and the largest level
/// whose pointwise conclusion `inf_{B_4r} u >= delta k - tail` holds.
pub fn expansion_report(
    input: &ReportInput,
    x0: &Point,
    k: f64,
    sigma: f64,
    r: f64,
    r_outer: f64,
) -> Result<ExpansionReport> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::Precondition(format!("sigma must lie in (0,1], got {sigma}")));
    }
    if !(r > 0.0 && 16.0 * r < r_outer) {
        return Err(Error::Precondition(format!(
            "expansion needs 0 < 16 r < R, got r = {r}, R = {r_outer}"
        )));
    }
    if k < 0.0 {
        return Err(Error::Precondition(format!("expansion needs k >= 0, got {k}")));
    }
    let outer_nodes = input.nodes_in_omega(&Ball::new(*x0, r_outer)?, "expansion")?;
    input.require_nonnegative(&outer_nodes, "expansion")?;
    let cls = input.classification()?;
    if !cls.is_supersolution_or_solution() {
        return Err(Error::Precondition(format!(
            "expansion needs a supersolution, classifier says {:?}",
            cls.label
        )));
    }
    let lat = input.u.lattice().clone();
    let small_nodes = ball_nodes(&lat, &Ball::new(*x0, r)?);
    if small_nodes.is_empty() {
        return Err(Error::Precondition("expansion: B_r contains no nodes".into()));
    }
    let hyp_count = input.u.level_set(&small_nodes, k, LevelCmp::Ge).len();
    let fraction = hyp_count as f64 / small_nodes.len() as f64;
    if fraction < sigma {
        return Err(Error::Precondition(format!(
            "expansion measure hypothesis fails: |B_r and (u >= k)| / |B_r| = {fraction} < sigma = {sigma}"
        )));
    }
    let (s, p) = (input.kernel.s(), input.kernel.p());
    let d = tail_offset_d(input.u, x0, r, r_outer, s, p, input.quad)?;
    let tail_term = 2.0 * d;
    let six_nodes = ball_nodes(&lat, &Ball::new(*x0, 6.0 * r)?);
    let four_nodes = ball_nodes(&lat, &Ball::new(*x0, 4.0 * r)?);
    let inf_b4r = input.u.extremum(&four_nodes, Extremum::Inf)?;
    let mut sweep = Vec::new();
    let mut c_fit = 0.0f64;
    let mut delta_fit = None;
    for delta in delta_sweep_grid() {
        let level = 2.0 * delta * k - d;
        let frac =
            input.u.level_set(&six_nodes, level, LevelCmp::Le).len() as f64 / six_nodes.len() as f64;
        let bound_c = frac * sigma * (1.0 / (2.0 * delta)).ln();
        c_fit = c_fit.max(bound_c);
        if inf_b4r >= delta * k - tail_term {
            delta_fit = Some(delta);
        }
        sweep.push(ExpansionPoint { delta, fraction: frac, bound_c });
    }
    Ok(ExpansionReport {
        schema_version: 1,
        k,
        sigma,
        delta_fit,
        level_measure_fraction: fraction,
        inf_b4r,
        tail_term,
        c_fit,
        sweep,
        context: input.context(x0, r, r_outer),
    })
}

//! Covering and iteration utilities: the dilation dichotomy, the geometric
//! level-set recurrence and the absorption bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ball_nodes, Ball, Lattice};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum CoveringVerdict {
    /// `|[E]| >= (c3 / delta_bar) |E|` with the fitted constant recorded.
    GainsMeasure,
    /// The dilation fills the whole ball.
    FillsBall,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoveringReport {
    pub verdict: CoveringVerdict,
    /// Nodes of the dilated set `[E]`.
    pub dilation: Vec<usize>,
    /// `delta_bar |[E]| / |E|`; absent when E is empty (case i holds
    /// vacuously).
    pub c3_fit: Option<f64>,
    pub delta_bar: f64,
}

/// Discrete dilation dichotomy: grow `E` through all balls `B_{3 rho}(x)`
/// with `x` in the ball and `rho` in `{h, 2h, ..., 2r}` whose density
/// condition `|E and B_{3 rho}(x)| > delta_bar |B_rho(x)|` holds, clipped to
/// the base ball. Either the dilation gains measure by `c3 / delta_bar` or
/// it is the whole ball.
pub fn covering_dilate(
    lattice: &Lattice,
    set: &[usize],
    ball: &Ball,
    delta_bar: f64,
) -> Result<CoveringReport> {
    if !(delta_bar > 0.0 && delta_bar < 1.0) {
        return Err(Error::Precondition(format!(
            "dilation parameter must lie in (0,1), got {delta_bar}"
        )));
    }
    let base = ball_nodes(lattice, ball);
    let in_base = {
        let mut mask = vec![false; lattice.node_count()];
        for &i in &base {
            mask[i] = true;
        }
        mask
    };
    for &i in set {
        if i >= lattice.node_count() || !in_base[i] {
            return Err(Error::Precondition(format!(
                "covering: set node {i} lies outside the ball"
            )));
        }
    }
    let h = lattice.spacing();
    let mut radii = Vec::new();
    let mut m = 1usize;
    while m as f64 * h <= 2.0 * ball.radius + 1e-12 {
        radii.push(m as f64 * h);
        m += 1;
    }
    let mut out_mask = vec![false; lattice.node_count()];
    for &center in &base {
        let c = lattice.position(center);
        for &rho in &radii {
            let near = Ball::new(c, 3.0 * rho)?;
            let count_e = set.iter().filter(|&&i| near.contains(&lattice.position(i))).count();
            let count_rho = ball_nodes(lattice, &Ball::new(c, rho)?).len();
            if count_e as f64 > delta_bar * count_rho as f64 {
                for &i in &base {
                    if near.contains(&lattice.position(i)) {
                        out_mask[i] = true;
                    }
                }
            }
        }
    }
    let dilation: Vec<usize> = (0..lattice.node_count()).filter(|&i| out_mask[i]).collect();
    let verdict = if dilation.len() == base.len() {
        CoveringVerdict::FillsBall
    } else {
        CoveringVerdict::GainsMeasure
    };
    let c3_fit = if set.is_empty() {
        None
    } else {
        Some(delta_bar * dilation.len() as f64 / set.len() as f64)
    };
    Ok(CoveringReport { verdict, dilation, c3_fit, delta_bar })
}

/// Parameters of the geometric level-set recurrence
/// `A_{j+1} = c0 b^j A_j^{1+beta}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DeGiorgiSequence {
    pub a0: f64,
    pub c0: f64,
    pub b: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationReport {
    pub trace: Vec<f64>,
    /// Smallness threshold `c0^{-1/beta} b^{-1/beta^2}`.
    pub threshold: f64,
    pub smallness_met: bool,
    /// `A_j <= b^{-j/beta} A_0` for every computed j; only meaningful when
    /// the smallness condition holds.
    pub bound_satisfied: Option<bool>,
    /// Whether the trace has decayed to (numerically) zero at jmax.
    pub vanishes: Option<bool>,
}

/// Iterate the extremal recurrence and check the decay conclusion against
/// the smallness condition `A_0 <= c0^{-1/beta} b^{-1/beta^2}`.
pub fn geometric_iteration(seq: &DeGiorgiSequence, jmax: usize) -> Result<IterationReport> {
    if !(seq.c0 > 0.0 && seq.b > 1.0 && seq.beta > 0.0 && seq.a0 >= 0.0) {
        return Err(Error::Precondition(format!(
            "need c0 > 0, b > 1, beta > 0, A0 >= 0; got {seq:?}"
        )));
    }
    let threshold = seq.c0.powf(-1.0 / seq.beta) * seq.b.powf(-1.0 / (seq.beta * seq.beta));
    let smallness_met = seq.a0 <= threshold * (1.0 + 1e-12);
    let mut trace = Vec::with_capacity(jmax + 1);
    let mut a = seq.a0;
    trace.push(a);
    for j in 0..jmax {
        a = seq.c0 * seq.b.powi(j as i32) * a.powf(1.0 + seq.beta);
        if !a.is_finite() {
            a = f64::INFINITY;
        }
        trace.push(a);
    }
    let (bound_satisfied, vanishes) = if smallness_met {
        let ok = trace.iter().enumerate().all(|(j, &aj)| {
            aj <= seq.b.powf(-(j as f64) / seq.beta) * seq.a0 * (1.0 + 1e-9) + 1e-300
        });
        let vanish = seq.a0 == 0.0
            || trace.last().map(|&l| l <= 1e-6 * seq.a0.max(1e-300)).unwrap_or(false);
        (Some(ok), Some(vanish))
    } else {
        (None, None)
    };
    Ok(IterationReport { trace, threshold, smallness_met, bound_satisfied, vanishes })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbsorbReport {
    pub hypothesis_ok: bool,
    /// A sample pair violating the hypothesis, if any.
    pub witness: Option<(f64, f64)>,
    /// Smallest c with `f(rho) <= c (c1 (R - rho)^{-theta} + c2)` over all
    /// sampled pairs; absent when no finite c exists.
    pub fitted_c: Option<f64>,
    pub pass: bool,
}

/// Absorption check on a sampled nonnegative function: verify the
/// hypothesis `f(t) <= c1 (tau - t)^{-theta} + c2 + zeta f(tau)` on every
/// sampled pair and fit the absorbed bound.
pub fn absorb_bound_check(
    samples: &[(f64, f64)],
    c1: f64,
    c2: f64,
    theta: f64,
    zeta: f64,
) -> Result<AbsorbReport> {
    if !(zeta >= 0.0 && zeta < 1.0) {
        return Err(Error::Precondition(format!(
            "absorption requires zeta in [0,1), got {zeta}"
        )));
    }
    if c1 < 0.0 || c2 < 0.0 || theta < 0.0 {
        return Err(Error::Precondition("c1, c2, theta must be nonnegative".into()));
    }
    if samples.is_empty() {
        return Err(Error::Precondition("empty sample grid".into()));
    }
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for &(t, f) in &pts {
        if !t.is_finite() || !f.is_finite() || f < 0.0 {
            return Err(Error::Precondition(format!(
                "samples must be finite and nonnegative, got f({t}) = {f}"
            )));
        }
    }
    let mut hypothesis_ok = true;
    let mut witness = None;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let (t, ft) = pts[i];
            let (tau, ftau) = pts[j];
            if tau <= t {
                continue;
            }
            let bound = c1 * (tau - t).powf(-theta) + c2 + zeta * ftau;
            if ft > bound * (1.0 + 1e-12) {
                hypothesis_ok = false;
                witness = Some((t, tau));
                break;
            }
        }
        if !hypothesis_ok {
            break;
        }
    }
    let fitted_c = if !hypothesis_ok {
        None
    } else {
        let mut c_needed = 0.0f64;
        let mut finite = true;
        'outer: for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let (rho, frho) = pts[i];
                let (big_r, _) = pts[j];
                let denom = c1 * (big_r - rho).powf(-theta) + c2;
                if denom == 0.0 {
                    if frho > 0.0 {
                        finite = false;
                        break 'outer;
                    }
                } else {
                    c_needed = c_needed.max(frho / denom);
                }
            }
        }
        if finite {
            Some(c_needed)
        } else {
            None
        }
    };
    let pass = hypothesis_ok && fitted_c.is_some();
    Ok(AbsorbReport { hypothesis_ok, witness, fitted_c, pass })
}

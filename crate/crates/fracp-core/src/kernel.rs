//! Kernel families of order (s, p) with an ellipticity sandwich
//! `lambda <= K(x,y) |x-y|^{n+sp} <= Lambda`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Point};

/// Default side length of the coefficient cells of modulated kernels.
///
/// The coefficient field is a fixed measurable function of space, piecewise
/// constant on cells of this size, so refining the lattice samples the same
/// kernel instead of resampling a new one per mesh level.
pub const DEFAULT_COEFF_CELL: f64 = 0.25;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `K(x,y) = |x-y|^{-n-sp}`.
    Model,
    /// `a(x,y) |x-y|^{-n-sp}` with a measurable, generally asymmetric
    /// coefficient `a` valued in `[lambda, Lambda]`, piecewise constant on
    /// cells of side `cell` and derived from a counter-based hash of the
    /// seed and the cell indices.
    Modulated { seed: u64, cell: f64 },
    /// Node-pair values supplied by table; missing pairs fall back to the
    /// model value.
    Table {
        #[serde(skip)]
        table: Arc<KernelTable>,
    },
    /// `(K(x,y) + K(y,x)) / 2`.
    Symmetrized { base: Box<KernelFamily> },
    /// `max(K(x,y), K(y,x))`.
    Envelope { base: Box<KernelFamily> },
}

/// Explicit node-pair kernel values on a fixed lattice.
#[derive(Debug, Default)]
pub struct KernelTable {
    lattice: Option<Arc<Lattice>>,
    entries: BTreeMap<(usize, usize), f64>,
}

impl KernelTable {
    pub fn new(lattice: Arc<Lattice>, entries: BTreeMap<(usize, usize), f64>) -> Self {
        KernelTable { lattice: Some(lattice), entries }
    }

    /// Parse CSV rows `i,j,value` (header optional).
    pub fn from_csv(lattice: Arc<Lattice>, csv: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (ln, line) in csv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("kernel table line {}: need i,j,value", ln + 1)));
            }
            let i: usize = cols[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("kernel table line {}: {e}", ln + 1)))?;
            let j: usize = cols[1]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("kernel table line {}: {e}", ln + 1)))?;
            let v: f64 = cols[2]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("kernel table line {}: {e}", ln + 1)))?;
            if i >= lattice.node_count() || j >= lattice.node_count() {
                return Err(Error::Parse(format!(
                    "kernel table line {}: node index out of range",
                    ln + 1
                )));
            }
            entries.insert((i, j), v);
        }
        Ok(KernelTable { lattice: Some(lattice), entries })
    }

    fn lookup(&self, x: &Point, y: &Point) -> Option<f64> {
        let lat = self.lattice.as_ref()?;
        let i = lat.node_of_point(x)?;
        let j = lat.node_of_point(y)?;
        self.entries.get(&(i, j)).copied()
    }
}

/// Midpoint approximation of the kernel along far-field rays, with the
/// ellipticity bracket it lives in.
#[derive(Clone, Copy, Debug)]
pub struct RadialCoeff {
    pub mid: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RadialCoeff {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }
}

/// A kernel of order (s, p) with ellipticity constants `0 < lambda <= Lambda`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSpec {
    dim: usize,
    s: f64,
    p: f64,
    lambda_min: f64,
    lambda_max: f64,
    #[serde(flatten)]
    family: KernelFamily,
}

impl KernelSpec {
    pub fn new(
        dim: usize,
        s: f64,
        p: f64,
        lambda_min: f64,
        lambda_max: f64,
        family: KernelFamily,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidKernel(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidKernel(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidKernel(format!("p must lie in (1,inf), got {p}")));
        }
        if !(lambda_min > 0.0 && lambda_min <= lambda_max) || !lambda_max.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "need 0 < lambda <= Lambda, got ({lambda_min}, {lambda_max})"
            )));
        }
        if let KernelFamily::Modulated { cell, .. } = family {
            if !(cell > 0.0) {
                return Err(Error::InvalidKernel("modulated coefficient cell must be > 0".into()));
            }
        }
        Ok(KernelSpec { dim, s, p, lambda_min, lambda_max, family })
    }

    pub fn model(dim: usize, s: f64, p: f64) -> Result<Self> {
        KernelSpec::new(dim, s, p, 1.0, 1.0, KernelFamily::Model)
    }

    pub fn modulated(
        dim: usize,
        s: f64,
        p: f64,
        lambda_min: f64,
        lambda_max: f64,
        seed: u64,
    ) -> Result<Self> {
        KernelSpec::new(
            dim,
            s,
            p,
            lambda_min,
            lambda_max,
            KernelFamily::Modulated { seed, cell: DEFAULT_COEFF_CELL },
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    /// Order of the kernel singularity, `n + s p`.
    pub fn singular_order(&self) -> f64 {
        self.dim as f64 + self.s * self.p
    }

    pub fn seed(&self) -> Option<u64> {
        fn find(f: &KernelFamily) -> Option<u64> {
            match f {
                KernelFamily::Modulated { seed, .. } => Some(*seed),
                KernelFamily::Symmetrized { base } | KernelFamily::Envelope { base } => find(base),
                _ => None,
            }
        }
        find(&self.family)
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        let r = x.dist(y);
        if r == 0.0 {
            return Err(Error::CoincidentPoints);
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Precondition("kernel arguments must be finite".into()));
        }
        Ok(self.eval_family(&self.family, x, y, r))
    }

    /// Hot-path evaluation for pair sums; the caller guarantees `x != y`.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &Point, y: &Point) -> f64 {
        self.eval_family(&self.family, x, y, x.dist(y))
    }

    fn eval_family(&self, family: &KernelFamily, x: &Point, y: &Point, r: f64) -> f64 {
        let model = r.powf(-self.singular_order());
        match family {
            KernelFamily::Model => model,
            KernelFamily::Modulated { seed, cell } => {
                let a = self.lambda_min
                    + (self.lambda_max - self.lambda_min) * coeff_unit(*seed, *cell, x, y);
                a * model
            }
            KernelFamily::Table { table } => table.lookup(x, y).unwrap_or(model),
            KernelFamily::Symmetrized { base } => {
                0.5 * (self.eval_family(base, x, y, r) + self.eval_family(base, y, x, r))
            }
            KernelFamily::Envelope { base } => {
                self.eval_family(base, x, y, r).max(self.eval_family(base, y, x, r))
            }
        }
    }

    fn is_symmetric(&self) -> bool {
        matches!(
            self.family,
            KernelFamily::Model | KernelFamily::Symmetrized { .. } | KernelFamily::Envelope { .. }
        )
    }

    /// Kernel with values `(K(x,y) + K(y,x)) / 2`; identity on symmetric
    /// kernels.
    pub fn symmetric_part(&self) -> KernelSpec {
        if self.is_symmetric() {
            return self.clone();
        }
        let mut out = self.clone();
        out.family = KernelFamily::Symmetrized { base: Box::new(self.family.clone()) };
        out
    }

    /// Kernel with values `max(K(x,y), K(y,x))`.
    pub fn upper_envelope(&self) -> KernelSpec {
        if self.is_symmetric() {
            return self.clone();
        }
        let mut out = self.clone();
        out.family = KernelFamily::Envelope { base: Box::new(self.family.clone()) };
        out
    }

    /// Radial profile coefficient used for pairs reaching beyond the box:
    /// exact for model/table kernels, the sandwich midpoint for modulated
    /// ones (with the bracket recorded).
    pub fn radial_coeff(&self) -> RadialCoeff {
        fn has_modulation(f: &KernelFamily) -> bool {
            match f {
                KernelFamily::Modulated { .. } => true,
                KernelFamily::Symmetrized { base } | KernelFamily::Envelope { base } => {
                    has_modulation(base)
                }
                _ => false,
            }
        }
        if has_modulation(&self.family) {
            RadialCoeff {
                mid: 0.5 * (self.lambda_min + self.lambda_max),
                lo: self.lambda_min,
                hi: self.lambda_max,
            }
        } else {
            RadialCoeff { mid: 1.0, lo: 1.0, hi: 1.0 }
        }
    }
}

/// Deterministic coefficient in [0, 1) from the seed and the pair of
/// coefficient cells containing x and y; order-sensitive, so the kernel is
/// generally asymmetric.
fn coeff_unit(seed: u64, cell: f64, x: &Point, y: &Point) -> f64 {
    #[inline]
    fn cell_index(c: f64, cell: f64) -> i64 {
        (c / cell).floor() as i64
    }
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [
        cell_index(x.0[0], cell),
        cell_index(x.0[1], cell),
        cell_index(y.0[0], cell),
        cell_index(y.0[1], cell),
    ] {
        state = mix64(state ^ (v as u64).wrapping_mul(0xff51_afd7_ed55_8ccd));
    }
    (mix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of sampling the ellipticity sandwich over lattice node pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsReport {
    pub sampled_pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
    /// Offending pairs (node indices and ratio), capped.
    pub violations: Vec<(usize, usize, f64)>,
}

/// Sample `K(x,y) |x-y|^{n+sp}` over node pairs and report whether the
/// ratios lie in `[lambda, Lambda]` within relative tolerance 1e-12.
///
/// When the pair space exceeds `max_samples` a deterministic stride
/// subsample is used.
pub fn validate_bounds(
    spec: &KernelSpec,
    lattice: &Lattice,
    max_samples: usize,
) -> Result<BoundsReport> {
    let n = lattice.node_count();
    if n == 0 {
        return Err(Error::Precondition("validate_bounds on an empty lattice".into()));
    }
    let total = n * n;
    let stride = total.div_ceil(max_samples.max(1)).max(1);
    let order = spec.singular_order();
    let rtol = 1e-12;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut violations = Vec::new();
    let mut sampled = 0usize;
    let mut k = 0usize;
    while k < total {
        let i = k / n;
        let j = k % n;
        k += stride;
        if i == j {
            continue;
        }
        let (xi, xj) = (lattice.position(i), lattice.position(j));
        let ratio = spec.eval(&xi, &xj)? * xi.dist(&xj).powf(order);
        sampled += 1;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        let lo_ok = ratio >= spec.lambda_min() * (1.0 - rtol);
        let hi_ok = ratio <= spec.lambda_max() * (1.0 + rtol);
        if !(lo_ok && hi_ok) && violations.len() < 32 {
            violations.push((i, j, ratio));
        }
    }
    Ok(BoundsReport {
        sampled_pairs: sampled,
        min_ratio,
        max_ratio,
        pass: violations.is_empty(),
        violations,
    })
}

//! Grid functions: node values on a lattice plus a far-field descriptor for
//! values beyond the bounding box.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ball_nodes, Ball, Lattice, Point};

/// Closed-form description of a function outside the computational box.
///
/// The base shapes are zero, a constant, a radial power
/// `A |y - c|^{-q}` and a one-sided power `A (d . (y - o))_+^{g}` (the latter
/// covers profiles such as `max(x, 0)^s` that are not radially symmetric).
/// Wrappers compose shifts, scalings and one-sided truncations so that the
/// far fields of `u + d`, `c u`, `w_+` and `w_-` stay representable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FarField {
    Zero,
    Constant { value: f64 },
    RadialPower { amplitude: f64, exponent: f64, center: Point },
    OneSidedPower { amplitude: f64, exponent: f64, origin: Point, direction: Point },
    Shifted { offset: f64, base: Box<FarField> },
    Scaled { factor: f64, base: Box<FarField> },
    /// `(v - level)_+`
    TruncAbove { level: f64, base: Box<FarField> },
    /// `(level - v)_+`
    TruncBelow { level: f64, base: Box<FarField> },
}

impl FarField {
    pub fn eval(&self, y: &Point) -> f64 {
        match self {
            FarField::Zero => 0.0,
            FarField::Constant { value } => *value,
            FarField::RadialPower { amplitude, exponent, center } => {
                amplitude * center.dist(y).powf(-exponent)
            }
            FarField::OneSidedPower { amplitude, exponent, origin, direction } => {
                let t = direction.dot(&Point([y.0[0] - origin.0[0], y.0[1] - origin.0[1]]));
                if t > 0.0 {
                    amplitude * t.powf(*exponent)
                } else {
                    0.0
                }
            }
            FarField::Shifted { offset, base } => base.eval(y) + offset,
            FarField::Scaled { factor, base } => factor * base.eval(y),
            FarField::TruncAbove { level, base } => (base.eval(y) - level).max(0.0),
            FarField::TruncBelow { level, base } => (level - base.eval(y)).max(0.0),
        }
    }

    /// Upper bound `g >= 0` such that `|v(y)| <= C (1 + |y|)^g` far out.
    /// Zero for every bounded descriptor.
    pub fn growth_exponent(&self) -> f64 {
        match self {
            FarField::Zero | FarField::Constant { .. } => 0.0,
            FarField::RadialPower { exponent, .. } => (-exponent).max(0.0),
            FarField::OneSidedPower { exponent, .. } => exponent.max(0.0),
            FarField::Shifted { base, .. } => base.growth_exponent(),
            FarField::Scaled { base, .. } => base.growth_exponent(),
            FarField::TruncAbove { base, .. } | FarField::TruncBelow { base, .. } => {
                base.growth_exponent()
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> FarField {
        match self {
            FarField::Zero => FarField::Zero,
            FarField::Constant { value } => FarField::Constant { value: factor * value },
            FarField::RadialPower { amplitude, exponent, center } => FarField::RadialPower {
                amplitude: factor * amplitude,
                exponent: *exponent,
                center: *center,
            },
            other => FarField::Scaled { factor, base: Box::new(other.clone()) },
        }
    }

    pub fn shifted(&self, offset: f64) -> FarField {
        match self {
            FarField::Zero => FarField::Constant { value: offset },
            FarField::Constant { value } => FarField::Constant { value: value + offset },
            other => FarField::Shifted { offset, base: Box::new(other.clone()) },
        }
    }

    pub fn trunc_above(&self, level: f64) -> FarField {
        match self {
            FarField::Zero => FarField::Constant { value: (-level).max(0.0) },
            FarField::Constant { value } => FarField::Constant { value: (value - level).max(0.0) },
            other => FarField::TruncAbove { level, base: Box::new(other.clone()) },
        }
    }

    pub fn trunc_below(&self, level: f64) -> FarField {
        match self {
            FarField::Zero => FarField::Constant { value: level.max(0.0) },
            FarField::Constant { value } => FarField::Constant { value: (level - value).max(0.0) },
            other => FarField::TruncBelow { level, base: Box::new(other.clone()) },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Sup,
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncSign {
    Plus,
    Minus,
}

/// Comparison direction for level sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelCmp {
    Ge,
    Lt,
    Le,
    Gt,
}

/// Real values on lattice nodes plus a far-field descriptor.
#[derive(Clone, Debug)]
pub struct GridFunction {
    lattice: Arc<Lattice>,
    values: Vec<f64>,
    far_field: FarField,
}

impl GridFunction {
    pub fn new(lattice: Arc<Lattice>, values: Vec<f64>, far_field: FarField) -> Result<Self> {
        if values.len() != lattice.node_count() {
            return Err(Error::InvalidLattice("value vector length != node count".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLattice("grid function values must be finite".into()));
        }
        Ok(GridFunction { lattice, values, far_field })
    }

    pub fn constant(lattice: Arc<Lattice>, c: f64) -> Self {
        let n = lattice.node_count();
        GridFunction {
            lattice,
            values: vec![c; n],
            far_field: FarField::Constant { value: c },
        }
    }

    pub fn from_fn(
        lattice: Arc<Lattice>,
        f: impl Fn(&Point) -> f64,
        far_field: FarField,
    ) -> Result<Self> {
        let values = (0..lattice.node_count()).map(|i| f(&lattice.position(i))).collect();
        GridFunction::new(lattice, values, far_field)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn far_field(&self) -> &FarField {
        &self.far_field
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GridFunction::new(self.lattice.clone(), values, self.far_field.clone())
    }

    pub fn with_far_field(&self, far_field: FarField) -> Self {
        GridFunction { lattice: self.lattice.clone(), values: self.values.clone(), far_field }
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            far_field: self.far_field.scaled(c),
        }
    }

    pub fn shifted(&self, c: f64) -> Self {
        GridFunction {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
            far_field: self.far_field.shifted(c),
        }
    }

    pub fn same_lattice(&self, other: &GridFunction) -> bool {
        self.lattice == other.lattice
    }

    /// Max or min of the node values over `nodes`.
    pub fn extremum(&self, nodes: &[usize], which: Extremum) -> Result<f64> {
        if nodes.is_empty() {
            return Err(Error::Precondition("extremum over an empty node set".into()));
        }
        let it = nodes.iter().map(|&i| self.values[i]);
        Ok(match which {
            Extremum::Sup => it.fold(f64::NEG_INFINITY, f64::max),
            Extremum::Inf => it.fold(f64::INFINITY, f64::min),
        })
    }

    /// `(average of u^t over the open ball nodes)^{1/t}` for nonnegative u.
    pub fn t_mean(&self, ball: &Ball, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Precondition(format!("t-mean needs t > 0, got {t}")));
        }
        let nodes = ball_nodes(&self.lattice, ball);
        if nodes.is_empty() {
            return Err(Error::Precondition("t-mean over a ball with no nodes".into()));
        }
        let mut acc = 0.0;
        for &i in &nodes {
            let v = self.values[i];
            if v < 0.0 {
                return Err(Error::Precondition(format!(
                    "t-mean of a function that is negative at node {i} (value {v})"
                )));
            }
            acc += v.powf(t);
        }
        Ok((acc / nodes.len() as f64).powf(1.0 / t))
    }

    /// Subset of `nodes` where `u(x) <cmp> k`.
    pub fn level_set(&self, nodes: &[usize], k: f64, cmp: LevelCmp) -> Vec<usize> {
        nodes
            .iter()
            .copied()
            .filter(|&i| {
                let v = self.values[i];
                match cmp {
                    LevelCmp::Ge => v >= k,
                    LevelCmp::Lt => v < k,
                    LevelCmp::Le => v <= k,
                    LevelCmp::Gt => v > k,
                }
            })
            .collect()
    }

    /// `w_+ = (u - k)_+` or `w_- = (u - k)_- = (k - u)_+`, with the far
    /// field truncated pointwise.
    pub fn truncation(&self, k: f64, sign: TruncSign) -> Self {
        let values = self
            .values
            .iter()
            .map(|&v| match sign {
                TruncSign::Plus => (v - k).max(0.0),
                TruncSign::Minus => (k - v).max(0.0),
            })
            .collect();
        let far_field = match sign {
            TruncSign::Plus => self.far_field.trunc_above(k),
            TruncSign::Minus => self.far_field.trunc_below(k),
        };
        GridFunction { lattice: self.lattice.clone(), values, far_field }
    }

    /// Positive part `u_+` (truncation at level 0).
    pub fn positive_part(&self) -> Self {
        self.truncation(0.0, TruncSign::Plus)
    }

    /// Negative part `u_- = max(-u, 0)`.
    pub fn negative_part(&self) -> Self {
        self.truncation(0.0, TruncSign::Minus)
    }
}

/// Radial piecewise-linear bump: 1 on the plateau ball, 0 outside the
/// support ball, linear in `|x - x0|` in between. Far field is zero.
pub fn cutoff(lattice: Arc<Lattice>, support: &Ball, plateau: &Ball) -> Result<GridFunction> {
    if support.center.dist(&plateau.center) > 1e-12 {
        return Err(Error::Precondition("cutoff balls must share their center".into()));
    }
    if !(plateau.radius < support.radius) {
        return Err(Error::Precondition(format!(
            "cutoff needs plateau radius < support radius, got {} >= {}",
            plateau.radius, support.radius
        )));
    }
    let rp = plateau.radius;
    let rs = support.radius;
    let center = support.center;
    GridFunction::from_fn(
        lattice,
        |p| {
            let d = center.dist(p);
            if d <= rp {
                1.0
            } else if d >= rs {
                0.0
            } else {
                (rs - d) / (rs - rp)
            }
        },
        FarField::Zero,
    )
}

// --- serialization -------------------------------------------------------

/// Metadata written next to a grid-function CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFunctionMeta {
    pub schema_version: u32,
    pub lattice: Lattice,
    pub far_field: FarField,
}

impl GridFunction {
    /// CSV with header `i[,j],x[,y],value`, one node per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.lattice.dim() == 1 {
            out.push_str("i,x,value\n");
            for idx in 0..self.lattice.node_count() {
                let p = self.lattice.position(idx);
                let _ = writeln!(out, "{},{},{}", idx, p.0[0], self.values[idx]);
            }
        } else {
            out.push_str("i,j,x,y,value\n");
            for idx in 0..self.lattice.node_count() {
                let (ix, iy) = self.lattice.multi_index(idx);
                let p = self.lattice.position(idx);
                let _ = writeln!(out, "{},{},{},{},{}", ix, iy, p.0[0], p.0[1], self.values[idx]);
            }
        }
        out
    }

    pub fn meta(&self) -> GridFunctionMeta {
        GridFunctionMeta {
            schema_version: 1,
            lattice: (*self.lattice).clone(),
            far_field: self.far_field.clone(),
        }
    }

    /// Parse node values back out of the CSV written by `to_csv`.
    pub fn from_csv(lattice: Arc<Lattice>, csv: &str, far_field: FarField) -> Result<Self> {
        let mut values = vec![f64::NAN; lattice.node_count()];
        let dim = lattice.dim();
        for (ln, line) in csv.lines().enumerate() {
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let expected = if dim == 1 { 3 } else { 5 };
            if cols.len() != expected {
                return Err(Error::Parse(format!("line {}: expected {expected} columns", ln + 1)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))
            };
            let idx = if dim == 1 {
                parse(cols[0])? as usize
            } else {
                let ix = parse(cols[0])? as usize;
                let iy = parse(cols[1])? as usize;
                lattice.index_at(ix, iy)
            };
            if idx >= values.len() {
                return Err(Error::Parse(format!("line {}: node index out of range", ln + 1)));
            }
            values[idx] = parse(cols[cols.len() - 1])?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("CSV does not cover every lattice node".into()));
        }
        GridFunction::new(lattice, values, far_field)
    }
}

//! Uniform lattice over an axis-aligned box, node masks and balls.
//!
//! All geometry is 1D or 2D. Points are stored as `[f64; 2]` with the second
//! coordinate fixed to zero in 1D, so distances can always be computed over
//! both coordinates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the computational space (y-coordinate is 0 in 1D).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; 2]);

impl Point {
    pub fn x(x: f64) -> Self {
        Point([x, 0.0])
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Point([x, y])
    }

    pub fn dist(&self, other: &Point) -> f64 {
        let dx = self.0[0] - other.0[0];
        let dy = self.0[1] - other.0[1];
        (dx * dx + dy * dy).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0[0].is_finite() && self.0[1].is_finite()
    }

    pub fn add_scaled(&self, dir: &Point, t: f64) -> Point {
        Point([self.0[0] + t * dir.0[0], self.0[1] + t * dir.0[1]])
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }
}

/// Regular grid with spacing `h` on a box; `(b - a) / h` must be an integer
/// per axis and every axis carries at least two nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    h: f64,
    lo: [f64; 2],
    hi: [f64; 2],
    counts: [usize; 2],
}

impl Lattice {
    pub fn new(dim: usize, h: f64, bounds: &[(f64, f64)]) -> Result<Arc<Lattice>> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidLattice(format!("dim must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidLattice(format!("spacing must be positive, got {h}")));
        }
        if bounds.len() != dim {
            return Err(Error::InvalidLattice(format!(
                "expected {dim} axis bounds, got {}",
                bounds.len()
            )));
        }
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let mut counts = [1usize; 2];
        for (k, &(a, b)) in bounds.iter().enumerate() {
            if !(b > a) {
                return Err(Error::InvalidLattice(format!("axis {k}: need a < b, got [{a}, {b}]")));
            }
            let cells_f = (b - a) / h;
            let cells = cells_f.round();
            if (cells_f - cells).abs() > 1e-9 * cells_f.max(1.0) {
                return Err(Error::InvalidLattice(format!(
                    "axis {k}: (b - a)/h = {cells_f} is not an integer"
                )));
            }
            let cells = cells as usize;
            if cells < 1 {
                return Err(Error::InvalidLattice(format!("axis {k}: fewer than 2 nodes")));
            }
            lo[k] = a;
            hi[k] = b;
            counts[k] = cells + 1;
        }
        Ok(Arc::new(Lattice { dim, h, lo, hi, counts }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        (self.lo[axis], self.hi[axis])
    }

    pub fn axis_count(&self, axis: usize) -> usize {
        self.counts[axis]
    }

    pub fn node_count(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    /// Lebesgue weight of one node cell, h^n.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Weight of one ordered node pair in double integrals, h^{2n}.
    pub fn pair_weight(&self) -> f64 {
        self.h.powi(2 * self.dim as i32)
    }

    pub fn position(&self, idx: usize) -> Point {
        let ix = idx % self.counts[0];
        let iy = idx / self.counts[0];
        Point([
            self.lo[0] + ix as f64 * self.h,
            if self.dim == 2 { self.lo[1] + iy as f64 * self.h } else { 0.0 },
        ])
    }

    pub fn index_at(&self, ix: usize, iy: usize) -> usize {
        iy * self.counts[0] + ix
    }

    /// Multi-index of a flat node index, `(ix, iy)` with `iy = 0` in 1D.
    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.counts[0], idx / self.counts[0])
    }

    /// Node whose position matches `p` up to a relative snap tolerance.
    pub fn node_of_point(&self, p: &Point) -> Option<usize> {
        let mut mi = [0usize; 2];
        for k in 0..self.dim {
            let t = (p.0[k] - self.lo[k]) / self.h;
            let i = t.round();
            if (t - i).abs() > 1e-9 * t.abs().max(1.0) {
                return None;
            }
            if i < -0.5 || i as usize >= self.counts[k] {
                return None;
            }
            mi[k] = i as usize;
        }
        if self.dim == 1 && p.0[1] != 0.0 {
            return None;
        }
        Some(self.index_at(mi[0], mi[1]))
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|k| p.0[k] >= self.lo[k] && p.0[k] <= self.hi[k])
            && (self.dim == 2 || p.0[1] == 0.0)
    }

    /// True when the node lies on a face of the bounding box.
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let (ix, iy) = self.multi_index(idx);
        if ix == 0 || ix + 1 == self.counts[0] {
            return true;
        }
        self.dim == 2 && (iy == 0 || iy + 1 == self.counts[1])
    }

    /// Axis-adjacent node pairs (each unordered pair once).
    pub fn adjacent_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for iy in 0..self.counts[1] {
            for ix in 0..self.counts[0] {
                let i = self.index_at(ix, iy);
                if ix + 1 < self.counts[0] {
                    out.push((i, self.index_at(ix + 1, iy)));
                }
                if self.dim == 2 && iy + 1 < self.counts[1] {
                    out.push((i, self.index_at(ix, iy + 1)));
                }
            }
        }
        out
    }
}

/// Open ball `B_r(x0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Ball> {
        if !(radius > 0.0) || !radius.is_finite() || !center.is_finite() {
            return Err(Error::InvalidLattice(format!("ball needs finite center and r > 0, got r = {radius}")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.dist(p) < self.radius
    }
}

/// Nodes strictly inside the open ball, ascending.
pub fn ball_nodes(lattice: &Lattice, ball: &Ball) -> Vec<usize> {
    (0..lattice.node_count())
        .filter(|&i| ball.contains(&lattice.position(i)))
        .collect()
}

/// Discrete Lebesgue measure of a node set: count * h^n.
pub fn set_measure(lattice: &Lattice, nodes: &[usize]) -> f64 {
    nodes.len() as f64 * lattice.cell_volume()
}

/// Boolean node mask over a lattice.
#[derive(Clone, Debug)]
pub struct Region {
    lattice: Arc<Lattice>,
    mask: Vec<bool>,
}

impl Region {
    pub fn from_mask(lattice: Arc<Lattice>, mask: Vec<bool>) -> Result<Region> {
        if mask.len() != lattice.node_count() {
            return Err(Error::InvalidLattice("mask length != node count".into()));
        }
        Ok(Region { lattice, mask })
    }

    pub fn from_ball(lattice: Arc<Lattice>, ball: &Ball) -> Region {
        let mask = (0..lattice.node_count())
            .map(|i| ball.contains(&lattice.position(i)))
            .collect();
        Region { lattice, mask }
    }

    /// Nodes with every coordinate strictly inside `(lo_k, hi_k)`.
    pub fn from_open_box(lattice: Arc<Lattice>, lo: &[f64], hi: &[f64]) -> Region {
        let dim = lattice.dim();
        let mask = (0..lattice.node_count())
            .map(|i| {
                let p = lattice.position(i);
                (0..dim).all(|k| p.0[k] > lo[k] && p.0[k] < hi[k])
            })
            .collect();
        Region { lattice, mask }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn nodes(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.lattice.cell_volume()
    }

    pub fn complement(&self) -> Region {
        Region {
            lattice: self.lattice.clone(),
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    /// True when no masked node touches the bounding box faces, i.e. a
    /// nonzero collar of exterior nodes exists.
    pub fn has_exterior_collar(&self) -> bool {
        (0..self.mask.len()).all(|i| !self.mask[i] || !self.lattice.is_boundary_node(i))
    }
}

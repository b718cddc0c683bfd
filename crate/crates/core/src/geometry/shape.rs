use serde::{Deserialize, Serialize};

use super::grid::MAX_DIM;
use crate::{Error, Result};

/// Axis-aligned box or ball inside the closed unit cell, repeated by `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Shape {
    fn validate(&self, dim: usize) -> Result<()> {
        let inside = |v: &[f64]| v.iter().all(|&c| (0.0..=1.0).contains(&c));
        match self {
            Shape::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::InvalidArgument(format!("box corners must have {dim} coordinates")));
                }
                if !inside(lo) || !inside(hi) || lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(Error::InvalidArgument(format!(
                        "box {lo:?}..{hi:?} must satisfy 0 <= lo < hi <= 1"
                    )));
                }
            }
            Shape::Ball { center, radius } => {
                if center.len() != dim {
                    return Err(Error::InvalidArgument(format!("ball centre must have {dim} coordinates")));
                }
                let fits = center.iter().all(|&c| c - radius >= 0.0 && c + radius <= 1.0);
                if !(*radius > 0.0) || !fits {
                    return Err(Error::InvalidArgument(format!(
                        "ball at {center:?} with radius {radius} must lie in the unit cell"
                    )));
                }
            }
        }
        Ok(())
    }

    fn contains(&self, x: &[f64; MAX_DIM], dim: usize) -> bool {
        match self {
            Shape::Box { lo, hi } => (0..dim).all(|a| x[a] >= lo[a] && x[a] <= hi[a]),
            Shape::Ball { center, radius } => {
                (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum::<f64>() <= radius * radius
            }
        }
    }

    /// Signed distance (negative inside) and its gradient.
    fn signed_distance(&self, x: &[f64; MAX_DIM], dim: usize) -> (f64, [f64; MAX_DIM]) {
        let mut g = [0.0; MAX_DIM];
        match self {
            Shape::Box { lo, hi } => {
                let mut q = [0.0; MAX_DIM];
                let mut sgn = [1.0; MAX_DIM];
                for a in 0..dim {
                    let c = 0.5 * (lo[a] + hi[a]);
                    let half = 0.5 * (hi[a] - lo[a]);
                    q[a] = (x[a] - c).abs() - half;
                    sgn[a] = if x[a] >= c { 1.0 } else { -1.0 };
                }
                let out: f64 = (0..dim).map(|a| q[a].max(0.0).powi(2)).sum::<f64>().sqrt();
                if out > 0.0 {
                    for a in 0..dim {
                        g[a] = sgn[a] * q[a].max(0.0) / out;
                    }
                    (out, g)
                } else {
                    let mut best = 0;
                    for a in 1..dim {
                        if q[a] > q[best] {
                            best = a;
                        }
                    }
                    g[best] = sgn[best];
                    (q[best], g)
                }
            }
            Shape::Ball { center, radius } => {
                let mut r2 = 0.0;
                for a in 0..dim {
                    g[a] = x[a] - center[a];
                    r2 += g[a] * g[a];
                }
                let r = r2.sqrt();
                if r > 0.0 {
                    for v in g.iter_mut().take(dim) {
                        *v /= r;
                    }
                } else {
                    g[0] = 1.0;
                }
                (r - radius, g)
            }
        }
    }
}

/// Constructive description of a periodic open set
/// `E = (∪ material or R^d) \ ∪ holes`, every shape repeated by `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    #[serde(default)]
    pub material: Vec<Shape>,
    #[serde(default)]
    pub holes: Vec<Shape>,
}

impl DomainSpec {
    /// `E = R^d`.
    pub fn full(dim: usize) -> Self {
        Self { dim, material: Vec::new(), holes: Vec::new() }
    }

    /// `E = R^d` minus the periodic copies of `holes`.
    pub fn perforated(dim: usize, holes: Vec<Shape>) -> Self {
        Self { dim, material: Vec::new(), holes }
    }

    /// Complement of the periodic box `[lo, hi]^dim`.
    pub fn cube_hole(dim: usize, lo: f64, hi: f64) -> Self {
        Self::perforated(dim, vec![Shape::Box { lo: vec![lo; dim], hi: vec![hi; dim] }])
    }

    /// Complement of the periodic ball with the given centre and radius.
    pub fn ball_hole(center: Vec<f64>, radius: f64) -> Self {
        let dim = center.len();
        Self::perforated(dim, vec![Shape::Ball { center, radius }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension must be 1..={MAX_DIM}, got {}", self.dim)));
        }
        for s in self.material.iter().chain(&self.holes) {
            s.validate(self.dim)?;
        }
        Ok(())
    }

    /// Shape translates that can reach `x` (shapes live in `[0,1]^d`).
    fn for_each_translate(&self, x: &[f64], mut f: impl FnMut(&[f64; MAX_DIM])) {
        let d = self.dim;
        let mut base = [0.0; MAX_DIM];
        for a in 0..d {
            base[a] = x[a] - x[a].floor();
        }
        let count = 3usize.pow(d as u32);
        for code in 0..count {
            let mut y = base;
            let mut c = code;
            for v in y.iter_mut().take(d) {
                *v -= (c % 3) as f64 - 1.0;
                c /= 3;
            }
            f(&y);
        }
    }

    fn in_union(&self, shapes: &[Shape], x: &[f64]) -> bool {
        let mut hit = false;
        self.for_each_translate(x, |y| {
            if !hit && shapes.iter().any(|s| s.contains(y, self.dim)) {
                hit = true;
            }
        });
        hit
    }

    fn union_distance(&self, shapes: &[Shape], x: &[f64]) -> (f64, [f64; MAX_DIM]) {
        let mut best = (f64::INFINITY, [0.0; MAX_DIM]);
        self.for_each_translate(x, |y| {
            for s in shapes {
                let v = s.signed_distance(y, self.dim);
                if v.0 < best.0 {
                    best = v;
                }
            }
        });
        best
    }

    /// Membership in `E`: inside some material shape (or no material
    /// listed) and in no hole. Holes are closed, so `E` is open.
    pub fn contains(&self, x: &[f64]) -> bool {
        let in_material = self.material.is_empty() || {
            // open material: strictly inside
            let (sd, _) = self.union_distance(&self.material, x);
            sd < 0.0
        };
        in_material && !self.in_union(&self.holes, x)
    }

    /// Signed distance to `∂E` (positive outside `E`) with its gradient;
    /// exact for disjoint catalog shapes.
    pub fn signed_distance(&self, x: &[f64]) -> (f64, [f64; MAX_DIM]) {
        let material = if self.material.is_empty() {
            (f64::NEG_INFINITY, [0.0; MAX_DIM])
        } else {
            self.union_distance(&self.material, x)
        };
        if self.holes.is_empty() {
            return material;
        }
        let (hd, hg) = self.union_distance(&self.holes, x);
        let mut neg = [0.0; MAX_DIM];
        for a in 0..MAX_DIM {
            neg[a] = -hg[a];
        }
        if -hd >= material.0 {
            (-hd, neg)
        } else {
            material
        }
    }

    /// Mirror image of a point outside `E` across the nearest facet of
    /// `∂E`: axis-aligned for boxes, radial for balls.
    pub fn reflect(&self, x: &[f64]) -> Option<[f64; MAX_DIM]> {
        let (sd, g) = self.signed_distance(x);
        if !(sd > 0.0) || !sd.is_finite() {
            return None;
        }
        let mut y = [0.0; MAX_DIM];
        for a in 0..self.dim {
            y[a] = x[a] - 2.0 * sd * g[a];
        }
        Some(y)
    }
}

use serde::{Deserialize, Serialize};

use super::grid::{GridShape, MAX_DIM};
use crate::{Error, Result};

/// Axis-aligned open box `origin + (0, extent)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub origin: Vec<f64>,
    pub extent: Vec<f64>,
}

impl BoxRegion {
    pub fn new(origin: Vec<f64>, extent: Vec<f64>) -> Result<Self> {
        if origin.len() != extent.len() || origin.is_empty() || origin.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "box origin/extent dimension mismatch: {} vs {}",
                origin.len(),
                extent.len()
            )));
        }
        if extent.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::EmptyRegion(format!("box extent must be positive: {extent:?}")));
        }
        Ok(Self { origin, extent })
    }

    /// The box `(0, side)^dim`.
    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![side; dim])
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.origin[axis] + self.extent[axis]
    }

    pub fn min_extent(&self) -> f64 {
        self.extent.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.extent.iter().product()
    }

    /// Open-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|a| x[a] > self.lo(a) && x[a] < self.hi(a))
    }

    /// `true` when `other` lies inside `self` (closed comparison).
    pub fn includes(&self, other: &BoxRegion) -> bool {
        (0..self.dim()).all(|a| other.lo(a) >= self.lo(a) - 1e-12 && other.hi(a) <= self.hi(a) + 1e-12)
    }

    /// Distance from `other` to the boundary of `self`, for `other ⊆ self`.
    pub fn inner_margin(&self, other: &BoxRegion) -> f64 {
        (0..self.dim())
            .map(|a| (other.lo(a) - self.lo(a)).min(self.hi(a) - other.hi(a)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance from `x` to the boundary, for `x` inside the box.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|a| (x[a] - self.lo(a)).min(self.hi(a) - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn retract(&self, lambda: f64) -> Result<BoxRegion> {
        retract(self, lambda)
    }
}

/// `Omega(lambda) = {x in Omega : dist(x, ∂Omega) > lambda}`; for a box this
/// is the box shrunk by `lambda` on every face.
pub fn retract(region: &BoxRegion, lambda: f64) -> Result<BoxRegion> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("retraction must be non-negative, got {lambda}")));
    }
    if lambda >= 0.5 * region.min_extent() {
        return Err(Error::EmptyRegion(format!(
            "retraction {lambda} leaves nothing of a box with minimum extent {}",
            region.min_extent()
        )));
    }
    Ok(BoxRegion {
        origin: region.origin.iter().map(|o| o + lambda).collect(),
        extent: region.extent.iter().map(|e| e - 2.0 * lambda).collect(),
    })
}

/// A box sampled at cell centres `origin + (j + 1/2) h`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    region: BoxRegion,
    spacing: f64,
    shape: GridShape,
}

impl BoxGrid {
    pub fn new(region: BoxRegion, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {spacing}")));
        }
        let mut dims = Vec::with_capacity(region.dim());
        for &e in &region.extent {
            let cells = (e / spacing).round();
            if cells < 1.0 || (cells * spacing - e).abs() > 1e-9 * e.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "grid spacing {spacing} does not divide extent {e}"
                )));
            }
            dims.push(cells as usize);
        }
        let shape = GridShape::new(&dims)?;
        Ok(Self { region, spacing, shape })
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> [f64; MAX_DIM] {
        let c = self.shape.coords(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = self.region.origin[a] + (c[a] as f64 + 0.5) * self.spacing;
        }
        x
    }

    /// Integer offset of the grid origin in units of the spacing, when the
    /// origin is aligned to the lattice `h Z^d`.
    pub fn lattice_offset(&self) -> Option<[i64; MAX_DIM]> {
        let mut off = [0i64; MAX_DIM];
        for a in 0..self.dim() {
            let q = self.region.origin[a] / self.spacing;
            if (q - q.round()).abs() > 1e-7 {
                return None;
            }
            off[a] = q.round() as i64;
        }
        Some(off)
    }

    /// Indicator of nodes whose centres lie in `sub`.
    pub fn node_mask(&self, sub: &BoxRegion) -> Vec<bool> {
        let d = self.dim();
        // box membership factors over axes; same centre arithmetic as `center`
        let inside: Vec<Vec<bool>> = (0..d)
            .map(|a| {
                (0..self.shape.dims()[a])
                    .map(|c| {
                        let x = self.region.origin[a] + (c as f64 + 0.5) * self.spacing;
                        x > sub.lo(a) && x < sub.hi(a)
                    })
                    .collect()
            })
            .collect();
        (0..self.len())
            .map(|i| {
                let c = self.shape.coords(i);
                (0..d).all(|a| inside[a][c[a]])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> BoxRegion {
        BoxRegion::cube(dim, 1.0).unwrap()
    }

    #[test]
    fn zero_retraction_is_identity() {
        assert_eq!(retract(&unit(2), 0.0).unwrap(), unit(2));
    }

    #[test]
    fn retract_unit_square() {
        let r = retract(&unit(2), 0.25).unwrap();
        assert_eq!(r.origin, vec![0.25, 0.25]);
        assert_eq!(r.extent, vec![0.5, 0.5]);
    }

    #[test]
    fn retract_rectangle() {
        let b = BoxRegion::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let r = retract(&b, 0.1).unwrap();
        assert!((r.lo(0) - 0.1).abs() < 1e-15 && (r.hi(0) - 1.9).abs() < 1e-15);
        assert!((r.lo(1) - 0.1).abs() < 1e-15 && (r.hi(1) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn retract_too_far_is_empty() {
        assert!(matches!(retract(&unit(2), 0.5), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn retract_composes() {
        let b = BoxRegion::new(vec![0.0, -1.0], vec![3.0, 2.5]).unwrap();
        let two = retract(&retract(&b, 0.125).unwrap(), 0.375).unwrap();
        let one = retract(&b, 0.5).unwrap();
        assert_eq!(two, one);
    }

    #[test]
    fn grid_requires_divisible_extent() {
        assert!(BoxGrid::new(unit(2), 0.3).is_err());
        let g = BoxGrid::new(unit(2), 0.25).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.center(0)[..2], [0.125, 0.125]);
        assert_eq!(g.lattice_offset(), Some([0, 0, 0]));
    }
}

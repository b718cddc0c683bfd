use std::collections::VecDeque;

use super::grid::{GridShape, MAX_DIM};
use super::shape::DomainSpec;
use crate::{Error, Result};

/// Cell-centre raster of a periodic open set `E` on the unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDomain {
    dim: usize,
    n: usize,
    cell: GridShape,
    indicator: Vec<bool>,
    spec: Option<DomainSpec>,
}

/// Result of the lift-tracking flood fill on the torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicConnectivity {
    /// Number of face-connected components of `E` on the torus.
    pub torus_components: usize,
    /// Whether the periods realised by closed loops generate all of `Z^d`.
    pub spans_lattice: bool,
}

impl PeriodicConnectivity {
    /// The periodic tiling of `E` is one connected set.
    pub fn is_connected(&self) -> bool {
        self.torus_components == 1 && self.spans_lattice
    }
}

/// Rasterizes `spec` at `n` cells per unit-cell edge and checks that the
/// tiled set is nonempty and connected across periods.
pub fn rasterize_domain(spec: &DomainSpec, n: usize) -> Result<PeriodicDomain> {
    spec.validate()?;
    let dom = PeriodicDomain::from_spec_unchecked(spec, n)?;
    let conn = dom.periodic_connectivity();
    if !conn.is_connected() {
        return Err(Error::NotConnected(format!(
            "{} torus component(s), loops span Z^d: {}",
            conn.torus_components, conn.spans_lattice
        )));
    }
    Ok(dom)
}

impl PeriodicDomain {
    /// Raster of `spec` without the connectivity check.
    pub fn from_spec_unchecked(spec: &DomainSpec, n: usize) -> Result<Self> {
        spec.validate()?;
        let cell = Self::cell_shape(spec.dim, n)?;
        let h = 1.0 / n as f64;
        let indicator = (0..cell.len())
            .map(|i| {
                let c = cell.coords(i);
                let x: Vec<f64> = (0..spec.dim).map(|a| (c[a] as f64 + 0.5) * h).collect();
                spec.contains(&x)
            })
            .collect();
        Self::build(spec.dim, n, cell, indicator, Some(spec.clone()))
    }

    /// Domain from a raw row-major indicator (no constructive provenance).
    pub fn from_indicator(dim: usize, n: usize, indicator: Vec<bool>) -> Result<Self> {
        let cell = Self::cell_shape(dim, n)?;
        if indicator.len() != cell.len() {
            return Err(Error::InvalidArgument(format!(
                "indicator has {} entries, expected {}",
                indicator.len(),
                cell.len()
            )));
        }
        Self::build(dim, n, cell, indicator, None)
    }

    fn cell_shape(dim: usize, n: usize) -> Result<GridShape> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("resolution must be even and >= 8, got {n}")));
        }
        GridShape::cube(dim, n)
    }

    fn build(dim: usize, n: usize, cell: GridShape, indicator: Vec<bool>, spec: Option<DomainSpec>) -> Result<Self> {
        if !indicator.iter().any(|&b| b) {
            return Err(Error::EmptyDomain("E has no cell in the unit cell".into()));
        }
        Ok(Self { dim, n, cell, indicator, spec })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn cell_shape_ref(&self) -> &GridShape {
        &self.cell
    }

    pub fn indicator(&self) -> &[bool] {
        &self.indicator
    }

    pub fn spec(&self) -> Option<&DomainSpec> {
        self.spec.as_ref()
    }

    pub fn true_count(&self) -> usize {
        self.indicator.iter().filter(|&&b| b).count()
    }

    /// Volume fraction `|E ∩ Q|` of the raster.
    pub fn volume_fraction(&self) -> f64 {
        self.true_count() as f64 / self.cell.len() as f64
    }

    pub fn is_full(&self) -> bool {
        self.indicator.iter().all(|&b| b)
    }

    /// Indicator at the integer lattice cell `c` (periodic).
    #[inline]
    pub fn at_cell(&self, c: [i64; MAX_DIM]) -> bool {
        self.indicator[self.cell.wrap_index(c)]
    }

    /// Indicator of the cell containing `x` (unit-cell coordinates).
    pub fn at_point(&self, x: &[f64]) -> bool {
        let mut c = [0i64; MAX_DIM];
        for a in 0..self.dim {
            c[a] = (x[a] * self.n as f64).floor() as i64;
        }
        self.at_cell(c)
    }

    /// Flood fill on the torus that tracks the integer lift of every cell;
    /// a face step that closes a loop contributes its period vector.
    pub fn periodic_connectivity(&self) -> PeriodicConnectivity {
        let d = self.dim;
        let n = self.n as i64;
        let len = self.cell.len();
        let mut lift: Vec<Option<[i64; MAX_DIM]>> = vec![None; len];
        let mut lattice = IntLattice::new(d);
        let mut components = 0;
        let mut queue = VecDeque::new();
        for start in 0..len {
            if !self.indicator[start] || lift[start].is_some() {
                continue;
            }
            components += 1;
            lift[start] = Some([0; MAX_DIM]);
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let c = self.cell.coords(i);
                let li = lift[i].unwrap();
                for a in 0..d {
                    for step in [-1i64, 1] {
                        let mut nc = [c[0] as i64, c[1] as i64, c[2] as i64];
                        nc[a] += step;
                        let mut shift = [0i64; MAX_DIM];
                        if nc[a] < 0 {
                            nc[a] += n;
                            shift[a] = -1;
                        } else if nc[a] >= n {
                            nc[a] -= n;
                            shift[a] = 1;
                        }
                        let j = self.cell.index([nc[0] as usize, nc[1] as usize, nc[2] as usize]);
                        if !self.indicator[j] {
                            continue;
                        }
                        let mut lj = li;
                        for b in 0..d {
                            lj[b] += shift[b];
                        }
                        match lift[j] {
                            None => {
                                lift[j] = Some(lj);
                                queue.push_back(j);
                            }
                            Some(existing) => {
                                let mut v = [0i64; MAX_DIM];
                                for b in 0..d {
                                    v[b] = lj[b] - existing[b];
                                }
                                lattice.insert(v);
                            }
                        }
                    }
                }
            }
        }
        PeriodicConnectivity { torus_components: components, spans_lattice: lattice.is_full() }
    }
}

/// Integer lattice kept in row echelon form (at most `MAX_DIM` rows).
struct IntLattice {
    dim: usize,
    rows: Vec<[i64; MAX_DIM]>,
}

impl IntLattice {
    fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    fn pivot(r: &[i64; MAX_DIM], dim: usize) -> Option<usize> {
        (0..dim).find(|&a| r[a] != 0)
    }

    fn insert(&mut self, mut v: [i64; MAX_DIM]) {
        if self.is_full() {
            return;
        }
        for col in 0..self.dim {
            if v[col] == 0 {
                continue;
            }
            match self.rows.iter().position(|r| Self::pivot(r, self.dim) == Some(col)) {
                None => {
                    if v[col] < 0 {
                        v.iter_mut().for_each(|x| *x = -*x);
                    }
                    self.rows.push(v);
                    self.rows.sort_by_key(|r| Self::pivot(r, self.dim));
                    return;
                }
                Some(k) => {
                    let mut r = self.rows[k];
                    while v[col] != 0 {
                        let q = r[col] / v[col];
                        for a in 0..self.dim {
                            r[a] -= q * v[a];
                        }
                        std::mem::swap(&mut r, &mut v);
                    }
                    if r[col] < 0 {
                        r.iter_mut().for_each(|x| *x = -*x);
                    }
                    self.rows[k] = r;
                }
            }
        }
    }

    fn is_full(&self) -> bool {
        self.rows.len() == self.dim && self.rows.iter().enumerate().all(|(k, r)| r[k].abs() == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;

    #[test]
    fn full_space_raster() {
        let d = rasterize_domain(&DomainSpec::full(2), 16).unwrap();
        assert_eq!(d.true_count(), 256);
        assert!(d.is_full());
    }

    #[test]
    fn aligned_box_hole_count() {
        let d = rasterize_domain(&DomainSpec::cube_hole(2, 0.25, 0.75), 16).unwrap();
        assert_eq!(d.true_count(), 256 - 64);
    }

    #[test]
    fn ball_hole_count_matches_enumeration() {
        let d = rasterize_domain(&DomainSpec::ball_hole(vec![0.5, 0.5], 0.3), 64).unwrap();
        // oracle: enumerate the cell centres outside the ball directly
        let mut outside = 0;
        for i in 0..64 {
            for j in 0..64 {
                let x = (i as f64 + 0.5) / 64.0 - 0.5;
                let y = (j as f64 + 0.5) / 64.0 - 0.5;
                if x * x + y * y > 0.09 {
                    outside += 1;
                }
            }
        }
        assert_eq!(d.true_count(), outside);
        let area = (1.0 - std::f64::consts::PI * 0.09) * 4096.0;
        assert!((d.true_count() as f64 - area).abs() < 0.02 * area);
    }

    #[test]
    fn empty_set_rejected() {
        let spec = DomainSpec::cube_hole(2, 0.0, 1.0);
        assert!(matches!(rasterize_domain(&spec, 16), Err(Error::EmptyDomain(_))));
    }

    #[test]
    fn disconnected_slabs_rejected() {
        let spec = DomainSpec {
            dim: 2,
            material: vec![
                Shape::Box { lo: vec![0.0, 0.1], hi: vec![1.0, 0.3] },
                Shape::Box { lo: vec![0.0, 0.6], hi: vec![1.0, 0.8] },
            ],
            holes: vec![],
        };
        assert!(matches!(rasterize_domain(&spec, 16), Err(Error::NotConnected(_))));
        let one_slab = DomainSpec { material: spec.material[..1].to_vec(), ..spec.clone() };
        let conn = PeriodicDomain::from_spec_unchecked(&one_slab, 16).unwrap().periodic_connectivity();
        assert_eq!(conn.torus_components, 1);
        assert!(!conn.spans_lattice);
    }

    #[test]
    fn isolated_blocks_do_not_percolate() {
        let n = 8;
        let mut ind = vec![false; n * n];
        for i in 0..n / 2 {
            for j in 0..n / 2 {
                ind[i * n + j] = true;
            }
        }
        let d = PeriodicDomain::from_indicator(2, n, ind).unwrap();
        assert!(!d.periodic_connectivity().is_connected());
    }

    #[test]
    fn lattice_reduction() {
        let mut l = IntLattice::new(2);
        l.insert([2, 0, 0]);
        l.insert([0, 1, 0]);
        assert!(!l.is_full());
        l.insert([3, 5, 0]);
        assert!(l.is_full());
    }

    #[test]
    fn rejects_odd_or_coarse_resolution() {
        assert!(PeriodicDomain::from_spec_unchecked(&DomainSpec::full(2), 6).is_err());
        assert!(PeriodicDomain::from_spec_unchecked(&DomainSpec::full(2), 15).is_err());
    }
}

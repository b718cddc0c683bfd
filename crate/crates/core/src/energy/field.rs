use crate::geometry::{BoxGrid, BoxRegion, PeriodicDomain, MAX_DIM};
use crate::{Error, Result};

/// Samples of a scalar field at the cell centres of a [`BoxGrid`], with a
/// validity mask (nodes of `Ω ∩ εE`, or all of `Ω` for extended fields).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: BoxGrid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl GridField {
    pub fn new(grid: BoxGrid, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values and {} mask entries for {} nodes",
                values.len(),
                mask.len(),
                grid.len()
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| mask[i] && !values[i].is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(Self { grid, values, mask })
    }

    /// `f` sampled on masked nodes, 0 elsewhere.
    pub fn from_fn(grid: BoxGrid, mask: Vec<bool>, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::InvalidArgument("mask length does not match grid".into()));
        }
        let d = grid.dim();
        let values = crate::par::map_indexed(grid.len(), |i| if mask[i] { f(&grid.center(i)[..d]) } else { 0.0 });
        Self::new(grid, values, mask)
    }

    pub fn full_mask(grid: &BoxGrid) -> Vec<bool> {
        vec![true; grid.len()]
    }

    /// Nodes whose centre `x` has `x/ε ∈ E`.
    pub fn perforated_mask(grid: &BoxGrid, dom: &PeriodicDomain, eps: f64) -> Vec<bool> {
        let d = grid.dim();
        crate::par::map_indexed(grid.len(), |i| {
            let x = grid.center(i);
            let mut y = [0.0; MAX_DIM];
            for a in 0..d {
                y[a] = x[a] / eps;
            }
            dom.at_point(&y[..d])
        })
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn region(&self) -> &BoxRegion {
        self.grid.region()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Same grid and mask with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values, self.mask.clone())
    }

    /// Node-wise `f(u)` on masked nodes.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().zip(&self.mask).map(|(&v, &m)| if m { f(v) } else { 0.0 }).collect();
        self.with_values(values)
    }

    pub fn into_parts(self) -> (BoxGrid, Vec<f64>, Vec<bool>) {
        (self.grid, self.values, self.mask)
    }
}

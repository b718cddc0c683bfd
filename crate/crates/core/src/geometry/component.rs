use std::collections::VecDeque;

use super::domain::PeriodicDomain;
use super::grid::{GridShape, MAX_DIM};
use crate::{Error, Result};

/// Default upper bound of the window search `k ∈ [4, k_max]`.
pub const DEFAULT_K_MAX: usize = 16;

/// The component `C` of `kQ ∩ E` that contains `3Q ∩ E`, with the
/// derived constants `C̃ = 2√d k` and `k₀ = 2C̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMask {
    k: usize,
    n: usize,
    window: GridShape,
    mask: Vec<bool>,
}

impl ComponentMask {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    /// Grid over the window `kQ = (0,k)^d` at the domain resolution.
    pub fn window(&self) -> &GridShape {
        &self.window
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn c_tilde(&self) -> f64 {
        2.0 * (self.dim() as f64).sqrt() * self.k as f64
    }

    pub fn k0(&self) -> f64 {
        2.0 * self.c_tilde()
    }

    pub fn contains_cell(&self, c: [i64; MAX_DIM]) -> bool {
        self.window.checked_index(c).is_some_and(|i| self.mask[i])
    }

    /// Window cell containing `x` (window coordinates), if any.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut c = [0i64; MAX_DIM];
        for a in 0..self.dim() {
            c[a] = (x[a] * self.n as f64).floor() as i64;
        }
        self.window.checked_index(c)
    }

    pub fn cell_center(&self, idx: usize) -> [f64; MAX_DIM] {
        let c = self.window.coords(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = (c[a] as f64 + 0.5) / self.n as f64;
        }
        x
    }

    /// `true` for window cells in `mQ`, `m ≤ k`.
    pub fn in_subcube(&self, idx: usize, m: usize) -> bool {
        let c = self.window.coords(idx);
        (0..self.dim()).all(|a| c[a] < m * self.n)
    }
}

/// Face-connected component labels of `mask` on a bounded grid; returns the
/// labels (`u32::MAX` off the mask) and the component count.
pub fn label_components(shape: &GridShape, mask: &[bool]) -> (Vec<u32>, usize) {
    let mut labels = vec![u32::MAX; shape.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..shape.len() {
        if !mask[start] || labels[start] != u32::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            shape.for_each_face_neighbor(i, |j| {
                if mask[j] && labels[j] == u32::MAX {
                    labels[j] = count;
                    queue.push_back(j);
                }
            });
        }
        count += 1;
    }
    (labels, count as usize)
}

pub fn component_selection(dom: &PeriodicDomain) -> Result<ComponentMask> {
    component_selection_with(dom, DEFAULT_K_MAX)
}

/// Smallest `k ∈ [4, k_max]` for which one face-connected component of
/// `kQ ∩ E` holds every cell of `3Q ∩ E`.
pub fn component_selection_with(dom: &PeriodicDomain, k_max: usize) -> Result<ComponentMask> {
    let d = dom.dim();
    let n = dom.resolution();
    for k in 4..=k_max.max(4) {
        let window = GridShape::cube(d, k * n)?;
        let mask: Vec<bool> = (0..window.len())
            .map(|i| {
                let c = window.coords(i);
                dom.at_cell([c[0] as i64, c[1] as i64, c[2] as i64])
            })
            .collect();
        let (labels, _) = label_components(&window, &mask);
        let mut target = None;
        let mut single = true;
        for i in 0..window.len() {
            let c = window.coords(i);
            if !mask[i] || (0..d).any(|a| c[a] >= 3 * n) {
                continue;
            }
            match target {
                None => target = Some(labels[i]),
                Some(t) if t != labels[i] => {
                    single = false;
                    break;
                }
                _ => {}
            }
        }
        if let (true, Some(t)) = (single, target) {
            let mask = labels.iter().map(|&l| l == t).collect();
            return Ok(ComponentMask { k, n, window, mask });
        }
    }
    Err(Error::NotConnected(format!(
        "3Q ∩ E is not contained in a single component of kQ ∩ E for any k <= {k_max}"
    )))
}

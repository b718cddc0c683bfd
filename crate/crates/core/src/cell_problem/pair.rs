//! Quadratic and convex pair energies shared by the cell and box problems.
//!
//! Unknowns are `w = v - Ξ·x` on a set of grid nodes. Every active node `x`
//! interacts with the active nodes `x + o` for stencil offsets `o` through
//! `a_o φ(g_o + w(x+o) - w(x))`, `g_o = Ξ·o h` and `φ(s) = |s|^p`. Pinned
//! nodes are active with `w = 0`.

use std::collections::VecDeque;

use crate::energy::pow_abs;
use crate::geometry::{GridShape, MAX_DIM};
use crate::kernel::Stencil;

pub(crate) const INACTIVE: u32 = u32::MAX;
pub(crate) const PINNED: u32 = u32::MAX - 1;

pub(crate) struct PairProblem {
    pub shape: GridShape,
    /// `INACTIVE`, `PINNED` or the unknown id of each node.
    pub kind: Vec<u32>,
    /// Node index of each unknown.
    pub unknowns: Vec<usize>,
    pub offsets: Vec<[i64; MAX_DIM]>,
    pub weights: Vec<f64>,
    pub g: Vec<f64>,
    /// Per-axis neighbour tables: `table[a][c + o + reach]` is the wrapped or
    /// in-range coordinate, or `-1` outside a bounded grid.
    table: [Vec<i64>; MAX_DIM],
    reach: i64,
    /// Factor `h^{2d}/|volume|` turning pair sums into energies.
    pub pair_weight: f64,
    /// Factor `h^d` turning node gradients into densities.
    pub node_volume: f64,
    pub p: f64,
    /// Smoothing `δ` in `φ(s) = (s² + δ²)^{p/2}`, used for `p < 2`.
    pub delta: f64,
}

impl PairProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        shape: GridShape,
        kind: Vec<u32>,
        stencil: &Stencil,
        xi: &[f64],
        h: f64,
        periodic: bool,
        pair_weight: f64,
        p: f64,
    ) -> Self {
        let d = shape.dim();
        let reach = stencil.reach;
        let table: [Vec<i64>; MAX_DIM] = std::array::from_fn(|a| {
            if a >= d {
                return vec![0; (2 * reach + 1) as usize];
            }
            let n = shape.dims()[a] as i64;
            (-reach..n + reach)
                .map(|v| if periodic { v.rem_euclid(n) } else if (0..n).contains(&v) { v } else { -1 })
                .collect()
        });
        let unknowns = (0..kind.len()).filter(|&i| kind[i] < PINNED).collect();
        let g = stencil
            .offsets
            .iter()
            .map(|o| (0..d).map(|a| xi[a] * o[a] as f64 * h).sum())
            .collect();
        let delta = if p < 2.0 { 1e-12 } else { 0.0 };
        Self {
            shape,
            kind,
            unknowns,
            offsets: stencil.offsets.clone(),
            weights: stencil.weights.clone(),
            g,
            table,
            reach,
            pair_weight,
            node_volume: h.powi(d as i32),
            p,
            delta,
        }
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    /// Node reached from `x` (with coordinates `c`) by offset `k`, if any.
    #[inline]
    fn neighbor(&self, c: &[usize; MAX_DIM], k: usize) -> Option<usize> {
        let o = &self.offsets[k];
        let mut idx = [0usize; MAX_DIM];
        for a in 0..MAX_DIM {
            let t = self.table[a][(c[a] as i64 + o[a] + if a < self.shape.dim() { self.reach } else { 0 }) as usize];
            if t < 0 {
                return None;
            }
            idx[a] = t as usize;
        }
        Some(self.shape.index(idx))
    }

    #[inline]
    fn value(&self, w: &[f64], node: usize) -> Option<f64> {
        match self.kind[node] {
            INACTIVE => None,
            PINNED => Some(0.0),
            id => Some(w[id as usize]),
        }
    }

    #[inline]
    fn phi(&self, s: f64) -> f64 {
        if self.delta > 0.0 {
            (s * s + self.delta * self.delta).powf(0.5 * self.p)
        } else {
            pow_abs(s, self.p)
        }
    }

    #[inline]
    fn dphi(&self, s: f64) -> f64 {
        let p = self.p;
        if p == 2.0 {
            2.0 * s
        } else if self.delta > 0.0 {
            p * s * (s * s + self.delta * self.delta).powf(0.5 * p - 1.0)
        } else {
            p * s * s.abs().powf(p - 2.0)
        }
    }

    /// Sum over active `x` of `Σ_o a_o f(s)`; `smooth` selects `φ_δ` or `|s|^p`.
    fn energy_with(&self, w: &[f64], smooth: bool) -> f64 {
        let n = self.kind.len();
        let total = crate::par::sum_indexed(n.div_ceil(1024), |ch| {
            let mut acc = 0.0;
            for x in ch * 1024..((ch + 1) * 1024).min(n) {
                let Some(wx) = self.value(w, x) else { continue };
                let c = self.shape.coords(x);
                let mut row = 0.0;
                for k in 0..self.offsets.len() {
                    if let Some(y) = self.neighbor(&c, k) {
                        if let Some(wy) = self.value(w, y) {
                            let s = self.g[k] + wy - wx;
                            row += self.weights[k] * if smooth { self.phi(s) } else { pow_abs(s, self.p) };
                        }
                    }
                }
                acc += row;
            }
            acc
        });
        total * self.pair_weight
    }

    /// Energy with the exact integrand `|s|^p`.
    pub fn energy(&self, w: &[f64]) -> f64 {
        self.energy_with(w, false)
    }

    /// Objective minimized by the descent solver (smoothed for `p < 2`).
    pub fn objective(&self, w: &[f64]) -> f64 {
        self.energy_with(w, true)
    }

    /// Gradient of [`PairProblem::objective`] with respect to the unknowns.
    pub fn gradient(&self, w: &[f64], out: &mut [f64]) {
        let scale = -2.0 * self.pair_weight;
        crate::par::fill_indexed(out, |id| {
            let x = self.unknowns[id];
            let wx = w[id];
            let c = self.shape.coords(x);
            let mut acc = 0.0;
            for k in 0..self.offsets.len() {
                if let Some(y) = self.neighbor(&c, k) {
                    if let Some(wy) = self.value(w, y) {
                        acc += self.weights[k] * self.dphi(self.g[k] + wy - wx);
                    }
                }
            }
            scale * acc
        });
    }

    /// `(L w)_z = Σ_o a_o (w_z - w_{z+o})` over active neighbours.
    pub fn laplacian(&self, w: &[f64], out: &mut [f64]) {
        crate::par::fill_indexed(out, |id| {
            let x = self.unknowns[id];
            let wx = w[id];
            let c = self.shape.coords(x);
            let mut acc = 0.0;
            for k in 0..self.offsets.len() {
                if let Some(y) = self.neighbor(&c, k) {
                    if let Some(wy) = self.value(w, y) {
                        acc += self.weights[k] * (wx - wy);
                    }
                }
            }
            acc
        });
    }

    /// `b_z = Σ_o a_o g_o` over active neighbours, the right-hand side of the
    /// stationarity system `L w = b` for `p = 2`.
    pub fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.unknowns.len()];
        crate::par::fill_indexed(&mut b, |id| {
            let c = self.shape.coords(self.unknowns[id]);
            let mut acc = 0.0;
            for k in 0..self.offsets.len() {
                if let Some(y) = self.neighbor(&c, k) {
                    if self.kind[y] != INACTIVE {
                        acc += self.weights[k] * self.g[k];
                    }
                }
            }
            acc
        });
        b
    }

    /// Components of the unknown graph that touch no pinned node; constants
    /// on these are in the kernel of `L`. Returns per-unknown labels
    /// (`u32::MAX` for components that reach a pinned node) and the count.
    pub fn free_components(&self) -> (Vec<u32>, usize) {
        let n = self.kind.len();
        let mut seen = vec![false; n];
        let mut label = vec![u32::MAX; self.unknowns.len()];
        let mut count = 0u32;
        let mut queue = VecDeque::new();
        for &start in &self.unknowns {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut members = Vec::new();
            let mut pinned = false;
            while let Some(x) = queue.pop_front() {
                members.push(x);
                let c = self.shape.coords(x);
                for k in 0..self.offsets.len() {
                    if let Some(y) = self.neighbor(&c, k) {
                        match self.kind[y] {
                            INACTIVE => {}
                            PINNED => pinned = true,
                            _ if !seen[y] => {
                                seen[y] = true;
                                queue.push_back(y);
                            }
                            _ => {}
                        }
                    }
                }
            }
            if !pinned {
                for x in members {
                    label[self.kind[x] as usize] = count;
                }
                count += 1;
            }
        }
        (label, count as usize)
    }
}

/// Removes the mean of `v` on each free component.
pub(crate) fn project_mean_zero(v: &mut [f64], labels: &[u32], count: usize) {
    if count == 0 {
        return;
    }
    let mut sum = vec![0.0; count];
    let mut num = vec![0usize; count];
    for (x, &l) in v.iter().zip(labels) {
        if l != u32::MAX {
            sum[l as usize] += x;
            num[l as usize] += 1;
        }
    }
    for (x, &l) in v.iter_mut().zip(labels) {
        if l != u32::MAX {
            *x -= sum[l as usize] / num[l as usize] as f64;
        }
    }
}

//! Reference computations written against the definitions, sharing no code
//! with the library beyond its input types.

#![allow(dead_code)]

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// `∫_{|ξ| ≤ R} |ξ₁|^p dξ` for `d = 1` (any `p`) and `d = 2, p = 2`.
pub fn ball_directional_moment(d: usize, r: f64, p: f64) -> f64 {
    match d {
        1 => 2.0 * r.powf(p + 1.0) / (p + 1.0),
        2 if p == 2.0 => std::f64::consts::PI * r.powi(4) / 4.0,
        _ => panic!("no closed form for d = {d}, p = {p}"),
    }
}

fn row_major(dims: &[usize], c: &[usize]) -> usize {
    c.iter().zip(dims).fold(0, |acc, (&x, &n)| acc * n + x)
}

fn coords_of(dims: &[usize], mut i: usize) -> Vec<usize> {
    let mut c = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        c[a] = i % dims[a];
        i /= dims[a];
    }
    c
}

/// Offsets `o ≠ 0` with `|o| h ≤ R`, weight 1 inside and 1/2 on the sphere.
pub fn ball_offsets(d: usize, r: f64, h: f64) -> Vec<(Vec<i64>, f64)> {
    let m = (r / h).ceil() as i64 + 1;
    let mut out = Vec::new();
    let side = (2 * m + 1) as usize;
    for i in 0..side.pow(d as u32) {
        let o: Vec<i64> = coords_of(&vec![side; d], i).iter().map(|&c| c as i64 - m).collect();
        if o.iter().all(|&v| v == 0) {
            continue;
        }
        let len = o.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() * h;
        if len > r * (1.0 + 1e-9) {
            continue;
        }
        let w = if len >= r * (1.0 - 1e-9) { 0.5 } else { 1.0 };
        out.push((o, w));
    }
    out
}

/// Minimum over `w` of `h^{2d} Σ_{x ∈ E} Σ_o a_o |Ξ·o h + w(x+o) − w(x)|²`
/// on the periodic unit cell with ball kernel of radius `r`, by a dense
/// solve of the normal equations. `indicator` is row-major over `n^d`
/// cells; the pair graph on it must be connected.
pub fn dense_cell_value(d: usize, n: usize, indicator: &[bool], r: f64, xi: &[f64]) -> f64 {
    let h = 1.0 / n as f64;
    let dims = vec![n; d];
    let mut id = vec![usize::MAX; indicator.len()];
    let mut m = 0;
    for (i, &b) in indicator.iter().enumerate() {
        if b {
            id[i] = m;
            m += 1;
        }
    }
    let offsets = ball_offsets(d, r, h);
    let mut lap = DMatrix::<f64>::zeros(m, m);
    let mut f = DVector::<f64>::zeros(m);
    let mut c = 0.0;
    for (x, &ix) in id.iter().enumerate() {
        if ix == usize::MAX {
            continue;
        }
        let cx = coords_of(&dims, x);
        for (o, a) in &offsets {
            let cy: Vec<usize> = (0..d).map(|k| (cx[k] as i64 + o[k]).rem_euclid(n as i64) as usize).collect();
            let iy = id[row_major(&dims, &cy)];
            if iy == usize::MAX {
                continue;
            }
            let g: f64 = (0..d).map(|k| xi[k] * o[k] as f64 * h).sum();
            c += a * g * g;
            if iy != ix {
                lap[(iy, iy)] += a;
                lap[(ix, ix)] += a;
                lap[(ix, iy)] -= a;
                lap[(iy, ix)] -= a;
                f[iy] += a * g;
                f[ix] -= a * g;
            }
        }
    }
    // constants span the kernel of a connected graph Laplacian
    let shifted = &lap + DMatrix::from_element(m, m, 1.0);
    let w = shifted.cholesky().expect("pair graph must be connected").solve(&f);
    h.powi(2 * d as i32) * (c - f.dot(&w))
}

/// Both sides of the mean-value inequality by direct double sums over the
/// given node values, with node volume `vol`.
pub fn poincare_direct(values: &[f64], vol: f64, p: f64) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let lhs: f64 = values.iter().map(|v| (mean - v).abs().powf(p)).sum::<f64>() * vol;
    let mut double = 0.0;
    for x in values {
        for y in values {
            double += (x - y).abs().powf(p);
        }
    }
    (lhs, double * vol * vol / (m * vol))
}

/// Discrete-path graph rebuilt from its definition: vertices are lattice
/// nodes `z/n` of `kQ` whose ball of radius `ν r1` reaches only cells of the
/// component (by cell centre), edges join vertices at most `r1` apart.
pub struct PathOracle {
    pub d: usize,
    pub n: usize,
    pub side: usize,
    pub r1: f64,
    pub nu: f64,
    pub vertex: Vec<bool>,
    adj: Vec<Vec<usize>>,
    window: Vec<usize>,
    mask: Vec<bool>,
}

impl PathOracle {
    /// `mask` is row-major over the `(k n)^d` window cells.
    pub fn new(d: usize, n: usize, k: usize, mask: &[bool], r1: f64, nu: f64) -> Self {
        let cells = k * n;
        let side = cells + 1;
        let window = vec![cells; d];
        let mut o = Self { d, n, side, r1, nu, vertex: Vec::new(), adj: Vec::new(), window, mask: mask.to_vec() };
        let nodes = side.pow(d as u32);
        o.vertex = (0..nodes).map(|i| o.ball_in_component(&o.node_point(i))).collect();
        o.adj = (0..nodes).map(|i| if o.vertex[i] { o.adjacent(i) } else { Vec::new() }).collect();
        o
    }

    pub fn node_point(&self, i: usize) -> Vec<f64> {
        coords_of(&vec![self.side; self.d], i).iter().map(|&c| c as f64 / self.n as f64).collect()
    }

    fn dist2(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    }

    /// Every cell whose centre is within `ν r1` of `x` is a component cell.
    pub fn ball_in_component(&self, x: &[f64]) -> bool {
        let rad = self.nu * self.r1;
        let nf = self.n as f64;
        let lo: Vec<i64> = x.iter().map(|&v| ((v - rad) * nf).floor() as i64 - 1).collect();
        let span = (2.0 * rad * nf).ceil() as i64 + 3;
        let count = (span as usize).pow(self.d as u32);
        for j in 0..count {
            let rel_c = coords_of(&vec![span as usize; self.d], j);
            let c: Vec<i64> = (0..self.d).map(|a| lo[a] + rel_c[a] as i64).collect();
            let centre: Vec<f64> = c.iter().map(|&v| (v as f64 + 0.5) / nf).collect();
            if Self::dist2(&centre, x) > rad * rad * (1.0 + 1e-12) {
                continue;
            }
            let inside = c.iter().zip(&self.window).all(|(&v, &w)| v >= 0 && (v as usize) < w);
            if !inside {
                return false;
            }
            let cu: Vec<usize> = c.iter().map(|&v| v as usize).collect();
            if !self.mask[row_major(&self.window, &cu)] {
                return false;
            }
        }
        true
    }

    fn adjacent(&self, i: usize) -> Vec<usize> {
        let reach = (self.r1 * self.n as f64 + 1e-9).floor() as i64;
        let c = coords_of(&vec![self.side; self.d], i);
        let span = (2 * reach + 1) as usize;
        let mut out = Vec::new();
        for j in 0..span.pow(self.d as u32) {
            let o = coords_of(&vec![span; self.d], j);
            let q: Vec<i64> = (0..self.d).map(|a| c[a] as i64 + o[a] as i64 - reach).collect();
            if q.iter().any(|&v| v < 0 || v as usize >= self.side) {
                continue;
            }
            let qu: Vec<usize> = q.iter().map(|&v| v as usize).collect();
            let t = row_major(&vec![self.side; self.d], &qu);
            if t == i || !self.vertex[t] {
                continue;
            }
            let d2 = Self::dist2(&self.node_point(t), &self.node_point(i));
            if d2 <= self.r1 * self.r1 * (1.0 + 1e-12) {
                out.push(t);
            }
        }
        out
    }

    /// Hop counts from node `s` to every node (`usize::MAX` if unreachable).
    pub fn bfs(&self, s: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex.len()];
        let mut q = VecDeque::from([s]);
        dist[s] = 0;
        while let Some(v) = q.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    /// Vertices within `r1` of `x`.
    pub fn attachments(&self, x: &[f64]) -> Vec<usize> {
        (0..self.vertex.len())
            .filter(|&i| self.vertex[i] && Self::dist2(&self.node_point(i), x) <= self.r1 * self.r1 * (1.0 + 1e-12))
            .collect()
    }

    /// Worst interior length over all pairs of `points` farther than `r1`
    /// apart and all attachment choices: `max (hops + 1)`. `None` if some
    /// pair is disconnected or some point has no attachment.
    pub fn n_bar(&self, points: &[Vec<f64>]) -> Option<usize> {
        let mut sources: Vec<usize> = Vec::new();
        for x in points {
            let a = self.attachments(x);
            if a.is_empty() {
                return None;
            }
            sources.extend(a);
        }
        sources.sort_unstable();
        sources.dedup();
        let mut worst = 0;
        for &s in &sources {
            let dist = self.bfs(s);
            for &t in &sources {
                if dist[t] == usize::MAX {
                    return None;
                }
                worst = worst.max(dist[t] + 1);
            }
        }
        Some(worst)
    }
}

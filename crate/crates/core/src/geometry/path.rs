use std::collections::VecDeque;
use std::sync::OnceLock;

use super::component::ComponentMask;
use super::domain::PeriodicDomain;
use super::grid::{GridShape, MAX_DIM};
use crate::{Error, Result};

/// Chain `η₀ … η_{N+1}` with steps `≤ r1` whose interior points carry a
/// ball of radius `ν r1` inside the component.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    pub points: Vec<Vec<f64>>,
    pub r1: f64,
    pub ball_radius: f64,
}

impl DiscretePath {
    /// Number of interior points `N`.
    pub fn interior_len(&self) -> usize {
        self.points.len().saturating_sub(2)
    }

    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Breadth-first planner on the graph of grid nodes of `kQ` whose ball of
/// radius `ν r1` covers only component cells, with edges between vertices at
/// most `r1` apart.
#[derive(Debug, Clone)]
pub struct PathPlanner<'a> {
    comp: &'a ComponentMask,
    r1: f64,
    nu: f64,
    nodes: GridShape,
    vertex_of: Vec<u32>,
    vertices: Vec<usize>,
    edge_offsets: Vec<[i64; MAX_DIM]>,
    n_bar: OnceLock<std::result::Result<usize, Vec<f64>>>,
}

const NONE: u32 = u32::MAX;

/// Integer offsets `o` with `|o + shift| ≤ radius` (in cells), sorted by length.
fn offsets_within(dim: usize, radius: f64, shift: f64, include_zero: bool) -> Vec<[i64; MAX_DIM]> {
    let m = radius.ceil() as i64 + 1;
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut out = Vec::new();
    let range = |a: usize| if a < dim { -m..=m } else { 0..=0 };
    let sq = |v: i64, a: usize| if a < dim { (v as f64 + shift).powi(2) } else { 0.0 };
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let q = sq(i, 0) + sq(j, 1) + sq(k, 2);
                if q <= r2 && (include_zero || (i, j, k) != (0, 0, 0)) {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out.sort_by_key(|o| o[0] * o[0] + o[1] * o[1] + o[2] * o[2]);
    out
}

fn add(c: [usize; MAX_DIM], o: &[i64; MAX_DIM]) -> [i64; MAX_DIM] {
    [c[0] as i64 + o[0], c[1] as i64 + o[1], c[2] as i64 + o[2]]
}

impl<'a> PathPlanner<'a> {
    pub fn new(comp: &'a ComponentMask, r1: f64, nu: f64) -> Result<Self> {
        let n = comp.resolution() as f64;
        let dim = comp.dim();
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidArgument(format!("nu must lie in (0, 1], got {nu}")));
        }
        if !(r1 > 2.0 / n) {
            return Err(Error::InvalidArgument(format!(
                "r1 = {r1} must exceed two grid spacings ({})",
                2.0 / n
            )));
        }
        let side = comp.k() * comp.resolution() + 1;
        let nodes = GridShape::cube(dim, side)?;
        // cell c has centre node c + 1/2, so a cell lies within the ball when
        // |c - node + 1/2| ≤ ν r1 n
        let ball = offsets_within(dim, nu * r1 * n, 0.5, true);
        let mut vertex_of = vec![NONE; nodes.len()];
        let mut vertices = Vec::new();
        for i in 0..nodes.len() {
            let c = nodes.coords(i);
            if ball.iter().all(|o| comp.contains_cell(add(c, o))) {
                vertex_of[i] = vertices.len() as u32;
                vertices.push(i);
            }
        }
        Ok(Self {
            comp,
            r1,
            nu,
            nodes,
            vertex_of,
            vertices,
            edge_offsets: offsets_within(dim, r1 * n, 0.0, false),
            n_bar: OnceLock::new(),
        })
    }

    pub fn with_defaults(dom: &PeriodicDomain, comp: &'a ComponentMask) -> Result<Self> {
        Self::new(comp, 4.0 * dom.spacing(), 0.5)
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Uniform bound `N̄` on the interior length of planned paths, by BFS from
    /// every attachable vertex; errors if some point of `3Q ∩ C` cannot be
    /// connected. Computed on first use.
    pub fn n_bar(&self) -> Result<usize> {
        self.n_bar.get_or_init(|| self.compute_n_bar()).clone().map_err(|p| self.no_path(p))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Position of vertex `v` in window coordinates.
    pub fn vertex_point(&self, v: usize) -> Vec<f64> {
        let c = self.nodes.coords(self.vertices[v]);
        let n = self.comp.resolution() as f64;
        (0..self.comp.dim()).map(|a| c[a] as f64 / n).collect()
    }

    /// Vertex ids adjacent to vertex `v`.
    pub fn neighbors(&self, v: usize, mut f: impl FnMut(usize)) {
        let c = self.nodes.coords(self.vertices[v]);
        for o in &self.edge_offsets {
            if let Some(j) = self.nodes.checked_index(add(c, o)) {
                let id = self.vertex_of[j];
                if id != NONE {
                    f(id as usize);
                }
            }
        }
    }

    /// Vertices within `r1` of `x`, nearest first (ties by node order).
    fn candidates(&self, x: &[f64]) -> Vec<usize> {
        let n = self.comp.resolution() as f64;
        let reach = (self.r1 * n).ceil() as i64 + 1;
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..self.comp.dim() {
            lo[a] = (x[a] * n).floor() as i64 - reach;
            hi[a] = (x[a] * n).ceil() as i64 + reach;
        }
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let Some(idx) = self.nodes.checked_index([i, j, k]) else { continue };
                    let id = self.vertex_of[idx];
                    if id == NONE {
                        continue;
                    }
                    let c = [i, j, k];
                    let d2: f64 = (0..self.comp.dim()).map(|a| (c[a] as f64 / n - x[a]).powi(2)).sum();
                    if d2 <= self.r1 * self.r1 * (1.0 + 1e-12) {
                        out.push((d2, id as usize));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out.into_iter().map(|(_, v)| v).collect()
    }

    /// Nearest vertex within `r1` of `x`.
    pub fn attach(&self, x: &[f64]) -> Option<usize> {
        self.candidates(x).first().copied()
    }

    fn bfs(&self, source: usize) -> (Vec<u32>, Vec<u32>) {
        let mut dist = vec![NONE; self.vertices.len()];
        let mut parent = vec![NONE; self.vertices.len()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let dv = dist[v];
            self.neighbors(v, |w| {
                if dist[w] == NONE {
                    dist[w] = dv + 1;
                    parent[w] = v as u32;
                    queue.push_back(w);
                }
            });
        }
        (dist, parent)
    }

    fn no_path(&self, point: Vec<f64>) -> Error {
        Error::NoPath { point, r1: self.r1, nu: self.nu }
    }

    /// Largest `hops + 1` between vertices that can serve as attachment of a
    /// point of `3Q ∩ C`, i.e. vertices within `r1` of some cell of it.
    fn compute_n_bar(&self) -> std::result::Result<usize, Vec<f64>> {
        let window = self.comp.window();
        let dim = self.comp.dim();
        let n = self.comp.resolution() as f64;
        let half_diag = 0.5 * (dim as f64).sqrt() / n;
        let mut attachable = vec![false; self.vertices.len()];
        for i in 0..window.len() {
            if !(self.comp.mask()[i] && self.comp.in_subcube(i, 3)) {
                continue;
            }
            let x = &self.comp.cell_center(i)[..dim];
            if self.attach(x).is_none() {
                return Err(x.to_vec());
            }
            let reach = ((self.r1 + half_diag) * n).ceil() as i64;
            let c = window.coords(i);
            let r2 = (self.r1 + half_diag) * (self.r1 + half_diag) * (1.0 + 1e-12);
            let span = |a: usize| if a < dim { -reach..=reach + 1 } else { 0..=0 };
            for di in span(0) {
                for dj in span(1) {
                    for dk in span(2) {
                        let node = [c[0] as i64 + di, c[1] as i64 + dj, c[2] as i64 + dk];
                        let Some(j) = self.nodes.checked_index(node) else { continue };
                        let v = self.vertex_of[j];
                        if v == NONE || attachable[v as usize] {
                            continue;
                        }
                        let d2: f64 = (0..dim).map(|a| (node[a] as f64 / n - x[a]).powi(2)).sum();
                        if d2 <= r2 {
                            attachable[v as usize] = true;
                        }
                    }
                }
            }
        }
        let sources: Vec<usize> = (0..self.vertices.len()).filter(|&v| attachable[v]).collect();
        let per_source: Vec<std::result::Result<u32, Vec<f64>>> = crate::par::map_indexed(sources.len(), |s| {
            let (dist, _) = self.bfs(sources[s]);
            let mut worst = 0;
            for &t in &sources {
                if dist[t] == NONE {
                    return Err(self.vertex_point(t));
                }
                worst = worst.max(dist[t]);
            }
            Ok(worst)
        });
        let mut n_bar = 0;
        for r in per_source {
            n_bar = n_bar.max(r? as usize + 1);
        }
        Ok(n_bar)
    }

    /// Path between two points of `3Q ∩ C` (window coordinates).
    pub fn find(&self, a: &[f64], b: &[f64]) -> Result<DiscretePath> {
        let dim = self.comp.dim();
        let check = |x: &[f64]| -> Result<()> {
            if x.len() != dim {
                return Err(Error::InvalidArgument(format!("point must have {dim} coordinates")));
            }
            match self.comp.cell_of(x) {
                Some(i) if self.comp.mask()[i] && self.comp.in_subcube(i, 3) => Ok(()),
                _ => Err(Error::InvalidArgument(format!("point {x:?} is not in 3Q ∩ C"))),
            }
        };
        check(a)?;
        check(b)?;
        let ball_radius = self.nu * self.r1;
        let make = |points| DiscretePath { points, r1: self.r1, ball_radius };
        let dist: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if dist <= self.r1 {
            return Ok(make(vec![a.to_vec(), b.to_vec()]));
        }
        let s = self.attach(a).ok_or_else(|| self.no_path(a.to_vec()))?;
        let t = self.attach(b).ok_or_else(|| self.no_path(b.to_vec()))?;
        let (d, parent) = self.bfs(s);
        if d[t] == NONE {
            return Err(self.no_path(b.to_vec()));
        }
        let mut chain = vec![t];
        let mut v = t;
        while v != s {
            v = parent[v] as usize;
            chain.push(v);
        }
        chain.reverse();
        let mut points = Vec::with_capacity(chain.len() + 2);
        points.push(a.to_vec());
        points.extend(chain.iter().map(|&v| self.vertex_point(v)));
        points.push(b.to_vec());
        Ok(make(points))
    }
}

/// One-shot planner construction followed by [`PathPlanner::find`].
pub fn find_discrete_path(
    comp: &ComponentMask,
    a: &[f64],
    b: &[f64],
    r1: f64,
    nu: f64,
) -> Result<DiscretePath> {
    PathPlanner::new(comp, r1, nu)?.find(a, b)
}

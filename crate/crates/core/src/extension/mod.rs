//! Extension of fields from the perforated set to the whole domain.
//!
//! The local operator `Φ` acts on the unit-cell window: it keeps `u` on
//! `C ∩ 2Q`, fills the collar `A_t` by mirror images blended with the mean
//! value of `u` over `C ∩ 3Q`, and uses that mean elsewhere in `2Q`. Integer
//! translates `Φ^α` are glued with a separable partition of unity, and the
//! scaled operator `T_ε` applies the glued map in cell units.

mod example;
mod global;
#[cfg(test)]
mod tests;

pub use example::{slab_counterexample, CounterexampleReport, RatioParts};
pub use global::{
    estimate_sweep, estimate_sweep_with, glue, inner_nodes, scaled_extend, theorem_estimates, theorem_ratio, EstimateRow, SweepField,
    TheoremEstimates,
};

use crate::energy::{pair_sum, pow_abs, GridField, PairStencil};
use crate::geometry::{label_components, BoxGrid, BoxRegion, ComponentMask, GridShape, PeriodicDomain, MAX_DIM};
use crate::kernel::{Kernel, Stencil};
use crate::{Error, Result};

/// Collar width used when the raster has fewer than two hole components.
pub const FALLBACK_COLLAR: f64 = 0.25;

/// `6x⁵ − 15x⁴ + 10x³` clamped to `[0, 1]`.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (x * (6.0 * x - 15.0) + 10.0)
    }
}

/// Role of one node of `2Q` under `Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalNode {
    /// Node of `C`: `Φu = u`.
    Identity,
    /// Node of the collar: `φ u(source) + (1 − φ) mean`, `source` a cell of `C ∩ 3Q`.
    /// `image` is the exact mirror point, `normal` the facet normal.
    Collar { source: [usize; MAX_DIM], phi: f64, image: [f64; MAX_DIM], normal: [f64; MAX_DIM] },
    /// Node at distance `≥ t` from `C`: the mean value.
    Far,
}

#[derive(Debug, Clone)]
pub struct ExtensionPlan {
    dim: usize,
    n: usize,
    t: f64,
    r_est: f64,
    component: ComponentMask,
    local: GridShape,
    nodes: Vec<LocalNode>,
    cube3: GridShape,
    support3: Vec<bool>,
    /// `psi_axis` at the `2n` node offsets of `(0, 2)`.
    psi_nodes: Vec<f64>,
}

impl ExtensionPlan {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn collar_width(&self) -> f64 {
        self.t
    }

    /// Interaction range of the energy estimates, `t/2`.
    pub fn r_est(&self) -> f64 {
        self.r_est
    }

    pub fn k(&self) -> usize {
        self.component.k()
    }

    pub fn c_tilde(&self) -> f64 {
        self.component.c_tilde()
    }

    pub fn k0(&self) -> f64 {
        self.component.k0()
    }

    pub fn component(&self) -> &ComponentMask {
        &self.component
    }

    /// Grid of `2Q` cells.
    pub fn local_shape(&self) -> &GridShape {
        &self.local
    }

    pub fn nodes(&self) -> &[LocalNode] {
        &self.nodes
    }

    /// Grid of `3Q` cells and the mask of `C ∩ 3Q` on it.
    pub fn support_shape(&self) -> &GridShape {
        &self.cube3
    }

    pub fn support_mask(&self) -> &[bool] {
        &self.support3
    }

    /// Cutoff `φ` at a node of `2Q`.
    pub fn phi(&self, idx: usize) -> f64 {
        match self.nodes[idx] {
            LocalNode::Identity => 1.0,
            LocalNode::Collar { phi, .. } => phi,
            LocalNode::Far => 0.0,
        }
    }

    pub fn collar_count(&self) -> usize {
        self.nodes.iter().filter(|k| matches!(k, LocalNode::Collar { .. })).count()
    }

    /// `ψ^α(x)` for `x` in unit-cell coordinates.
    pub fn psi(&self, alpha: &[i64], x: &[f64]) -> f64 {
        (0..self.dim).map(|a| psi_axis(x[a] - alpha[a] as f64)).product()
    }

    fn local_value(&self, idx: usize, own: f64, source: impl Fn([usize; MAX_DIM]) -> f64, mean: f64) -> f64 {
        match self.nodes[idx] {
            LocalNode::Identity => own,
            LocalNode::Collar { source: s, phi, .. } => phi * source(s) + (1.0 - phi) * mean,
            LocalNode::Far => mean,
        }
    }
}

/// One-dimensional factor of `ψ^0` at `s = x − α`: the bump `S(1 − |s − 1|)` on
/// `(0, 2)` divided by the sum of the two translates that reach `s`.
pub(crate) fn psi_axis(s: f64) -> f64 {
    if !(s > 0.0 && s < 2.0) {
        return 0.0;
    }
    let f = s - s.floor();
    let bump = smoothstep(1.0 - (s - 1.0).abs());
    bump / (smoothstep(1.0 - f) + smoothstep(f))
}

/// Half the smallest raster gap between distinct hole components in `3Q`.
pub fn default_collar_width(dom: &PeriodicDomain) -> f64 {
    let d = dom.dim();
    let n = dom.resolution();
    let shape = match GridShape::cube(d, 3 * n) {
        Ok(s) => s,
        Err(_) => return FALLBACK_COLLAR,
    };
    let hole: Vec<bool> = (0..shape.len()).map(|i| !dom.at_cell(signed(shape.coords(i)))).collect();
    let (labels, count) = label_components(&shape, &hole);
    if count < 2 {
        return FALLBACK_COLLAR;
    }
    let boundary: Vec<usize> = (0..shape.len())
        .filter(|&i| {
            if !hole[i] {
                return false;
            }
            let mut edge = false;
            shape.for_each_face_neighbor(i, |j| edge |= !hole[j]);
            edge
        })
        .collect();
    let mut best = i64::MAX;
    for (k, &i) in boundary.iter().enumerate() {
        let ci = shape.coords(i);
        for &j in &boundary[k + 1..] {
            if labels[i] == labels[j] {
                continue;
            }
            let cj = shape.coords(j);
            let gap: i64 = (0..d)
                .map(|a| {
                    let g = (ci[a] as i64 - cj[a] as i64).abs() - 1;
                    g.max(0).pow(2)
                })
                .sum();
            best = best.min(gap);
        }
    }
    if best == 0 || best == i64::MAX {
        return FALLBACK_COLLAR;
    }
    0.5 * (best as f64).sqrt() / n as f64
}

fn signed(c: [usize; MAX_DIM]) -> [i64; MAX_DIM] {
    [c[0] as i64, c[1] as i64, c[2] as i64]
}

/// Classifies every node of `2Q` and tabulates the mirror images of the
/// collar nodes. The reflection is taken from the constructive domain spec.
pub fn build_plan(dom: &PeriodicDomain, comp: &ComponentMask, t: f64) -> Result<ExtensionPlan> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("collar width must be positive, got {t}")));
    }
    if comp.resolution() != dom.resolution() || comp.dim() != dom.dim() {
        return Err(Error::InvalidArgument("component mask does not belong to this domain".into()));
    }
    let d = dom.dim();
    let n = dom.resolution();
    let h = 1.0 / n as f64;
    let local = GridShape::cube(d, 2 * n)?;
    let cube3 = GridShape::cube(d, 3 * n)?;
    let support3: Vec<bool> = (0..cube3.len()).map(|i| comp.contains_cell(signed(cube3.coords(i)))).collect();
    let spec = dom.spec();
    let mut nodes = Vec::with_capacity(local.len());
    let mut offending = Vec::new();
    for i in 0..local.len() {
        let c = local.coords(i);
        if comp.contains_cell(signed(c)) {
            nodes.push(LocalNode::Identity);
            continue;
        }
        let spec = spec.ok_or_else(|| {
            Error::InvalidArgument("the local extension needs a domain built from a shape spec".into())
        })?;
        let x: Vec<f64> = (0..d).map(|a| (c[a] as f64 + 0.5) * h).collect();
        let (sd, grad) = spec.signed_distance(&x);
        if !(sd < t) {
            nodes.push(LocalNode::Far);
            continue;
        }
        let image = spec.reflect(&x).and_then(|y| snap_into(&cube3, &support3, &y[..d], n).map(|s| (y, s)));
        match image {
            Some((image, source)) => {
                nodes.push(LocalNode::Collar { source, phi: 1.0 - smoothstep(sd / t), image, normal: grad })
            }
            None => offending.push(x),
        }
    }
    if !offending.is_empty() {
        return Err(Error::CollarTooWide { t, offending });
    }
    let psi_nodes = (0..2 * n).map(|l| psi_axis((l as f64 + 0.5) * h)).collect();
    Ok(ExtensionPlan { dim: d, n, t, r_est: 0.5 * t, component: comp.clone(), local, nodes, cube3, support3, psi_nodes })
}

/// The node of `support` nearest to `y` among the cell containing `y` and
/// its neighbours; raster cells straddling `∂C` can swallow short mirrors.
fn snap_into(shape: &GridShape, support: &[bool], y: &[f64], n: usize) -> Option<[usize; MAX_DIM]> {
    let d = y.len();
    let mut base = [0i64; MAX_DIM];
    for a in 0..d {
        base[a] = (y[a] * n as f64).floor() as i64;
    }
    let mut best: Option<(f64, [usize; MAX_DIM])> = None;
    for code in 0..3usize.pow(d as u32) {
        let mut c = base;
        let mut k = code;
        for v in c.iter_mut().take(d) {
            *v += (k % 3) as i64 - 1;
            k /= 3;
        }
        let Some(i) = shape.checked_index(c) else { continue };
        if !support[i] {
            continue;
        }
        let dist: f64 = (0..d).map(|a| ((c[a] as f64 + 0.5) / n as f64 - y[a]).powi(2)).sum();
        // the cell holding y wins ties; the scan order breaks the rest
        let own = code == (3usize.pow(d as u32) - 1) / 2;
        if own {
            return Some(shape.coords(i));
        }
        if best.is_none_or(|(b, _)| dist < b) {
            best = Some((dist, shape.coords(i)));
        }
    }
    best.map(|(_, c)| c)
}

fn ensure_window(plan: &ExtensionPlan, u: &GridField) -> Result<()> {
    let n = plan.n;
    let spacing_ok = (u.grid().spacing() * n as f64 - 1.0).abs() < 1e-12;
    let origin_ok = u.region().origin.iter().all(|&o| o.abs() < 1e-12);
    if u.dim() != plan.dim || u.grid().shape() != &plan.cube3 || !spacing_ok || !origin_ok {
        return Err(Error::InvalidArgument(format!(
            "local extension expects a field on 3Q = (0,3)^{} at spacing 1/{n}",
            plan.dim
        )));
    }
    if u.mask() != plan.support3.as_slice() {
        return Err(Error::InvalidArgument("field mask must be exactly C ∩ 3Q".into()));
    }
    Ok(())
}

fn masked_mean(u: &GridField) -> Result<f64> {
    let count = u.masked_count();
    if count == 0 {
        return Err(Error::EmptyRegion("mean value over an empty set".into()));
    }
    let vals: Vec<f64> = u.values().iter().zip(u.mask()).filter(|(_, &m)| m).map(|(&v, _)| v).collect();
    Ok(crate::par::ordered_sum(&vals) / count as f64)
}

fn local_grid(plan: &ExtensionPlan) -> Result<BoxGrid> {
    BoxGrid::new(BoxRegion::cube(plan.dim, 2.0)?, 1.0 / plan.n as f64)
}

/// `Φu` on `2Q` for `u` given on `C ∩ 3Q`.
pub fn local_extend(plan: &ExtensionPlan, u: &GridField) -> Result<GridField> {
    ensure_window(plan, u)?;
    let mean = masked_mean(u)?;
    let grid = local_grid(plan)?;
    let v = u.values();
    let values = crate::par::map_indexed(plan.local.len(), |i| {
        let own = plan.cube3.index(plan.local.coords(i));
        plan.local_value(i, v[own], |s| v[plan.cube3.index(s)], mean)
    });
    let mask = GridField::full_mask(&grid);
    GridField::new(grid, values, mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEstimates {
    /// `∫_{2Q}|Φu|^p / ∫_{C∩3Q}|u|^p`.
    pub lp_ratio: f64,
    /// `∬_{(2Q)² ∩ D_R}|Φu(x) − Φu(y)|^p / ∬_{(C∩3Q)²}|u(x) − u(y)|^p`, `R = r_est`.
    pub energy_ratio: f64,
}

/// `num/den` with `0/0 = 0` and `x/0 = +∞`.
pub fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Offsets of the closed ball of radius `r` on the lattice of spacing `h`,
/// with unit weight inside and half weight on the sphere.
pub(crate) fn range_stencil(dim: usize, r: f64, h: f64) -> Result<Stencil> {
    Kernel::ball(dim, r)?.stencil(h)
}

pub fn local_estimates(plan: &ExtensionPlan, u: &GridField, p: f64) -> Result<LocalEstimates> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let ext = local_extend(plan, u)?;
    let w = ext.values();
    let lp_num = crate::par::sum_indexed(w.len(), |i| pow_abs(w[i], p));
    let (v, m) = (u.values(), u.mask());
    let lp_den = crate::par::sum_indexed(v.len(), |i| if m[i] { pow_abs(v[i], p) } else { 0.0 });

    let st = range_stencil(plan.dim, plan.r_est, 1.0 / plan.n as f64)?;
    let ps = PairStencil::new(ext.grid(), &st);
    let num = pair_sum(ext.grid(), &ps, |_| true, |_| true, |x, k, y| st.weights[k] * pow_abs(w[x] - w[y], p), false);

    let support: Vec<usize> = (0..v.len()).filter(|&i| m[i]).collect();
    let den = crate::par::sum_indexed(support.len(), |a| {
        let ua = v[support[a]];
        support.iter().map(|&j| pow_abs(ua - v[j], p)).sum::<f64>()
    });
    Ok(LocalEstimates { lp_ratio: ratio(lp_num, lp_den), energy_ratio: ratio(num.total, den) })
}

/// Extremes of `|R(x₁) − R(x₂)| / |x₁ − x₂|` over collar node pairs within
/// `radius` (unit-cell units) whose facet normals agree, for the exact mirror
/// `R` and for its snapped node table, plus the largest snapping shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub min: f64,
    pub max: f64,
    pub snapped_min: f64,
    pub snapped_max: f64,
    pub max_shift: f64,
    pub pairs: usize,
}

pub fn reflection_distortion(plan: &ExtensionPlan, radius: f64) -> Result<Distortion> {
    let d = plan.dim;
    let h = 1.0 / plan.n as f64;
    let st = range_stencil(d, radius, h)?;
    let inf = f64::INFINITY;
    let mut out = Distortion { min: inf, max: 0.0, snapped_min: inf, snapped_max: 0.0, max_shift: 0.0, pairs: 0 };
    let norm = |v: &dyn Fn(usize) -> f64| (0..d).map(|a| v(a).powi(2)).sum::<f64>().sqrt();
    for i in 0..plan.local.len() {
        let LocalNode::Collar { source: si, image: yi, normal: ni, .. } = plan.nodes[i] else { continue };
        let ci = plan.local.coords(i);
        out.max_shift = out.max_shift.max(norm(&|a| (si[a] as f64 + 0.5) * h - yi[a]));
        for o in &st.offsets {
            let mut cj = [0i64; MAX_DIM];
            for a in 0..d {
                cj[a] = ci[a] as i64 + o[a];
            }
            let Some(j) = plan.local.checked_index(cj) else { continue };
            let LocalNode::Collar { source: sj, image: yj, normal: nj, .. } = plan.nodes[j] else { continue };
            if (0..d).map(|a| ni[a] * nj[a]).sum::<f64>() < 0.5 {
                continue;
            }
            let dx = norm(&|a| o[a] as f64 * h);
            let q = norm(&|a| yi[a] - yj[a]) / dx;
            let qs = norm(&|a| (si[a] as f64 - sj[a] as f64) * h) / dx;
            out.min = out.min.min(q);
            out.max = out.max.max(q);
            out.snapped_min = out.snapped_min.min(qs);
            out.snapped_max = out.snapped_max.max(qs);
            out.pairs += 1;
        }
    }
    if out.pairs == 0 {
        (out.min, out.max, out.snapped_min, out.snapped_max) = (1.0, 1.0, 1.0, 1.0);
    }
    Ok(out)
}

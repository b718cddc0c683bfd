use super::{range_stencil, ratio, ExtensionPlan, LocalNode};
use crate::energy::{pair_sum, pow_abs, GridField, PairStencil};
use crate::geometry::{retract, BoxGrid, BoxRegion, GridShape, PeriodicDomain, MAX_DIM};
use crate::{Error, Result};

/// A field on a lattice-aligned grid in unit-cell index space: node `j` of
/// the grid is the global cell `offset + j`.
struct Lattice<'a> {
    grid: &'a BoxGrid,
    offset: [i64; MAX_DIM],
    values: &'a [f64],
}

impl Lattice<'_> {
    fn at(&self, g: [i64; MAX_DIM]) -> Option<f64> {
        let mut c = [0i64; MAX_DIM];
        for a in 0..self.grid.dim() {
            c[a] = g[a] - self.offset[a];
        }
        self.grid.shape().checked_index(c).map(|i| self.values[i])
    }
}

/// Mean of `u` over `E ∩ (α + 3Q)` for every `α` whose `3Q` block lies in the grid.
struct BlockMeans {
    dim: usize,
    lo: [i64; MAX_DIM],
    dims: [usize; MAX_DIM],
    means: Vec<f64>,
}

impl BlockMeans {
    fn new(plan: &ExtensionPlan, lat: &Lattice<'_>, mask: &[bool]) -> Self {
        let d = plan.dim;
        let n = plan.n as i64;
        let shape = lat.grid.shape();
        // blocks fully covered by the grid
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..d {
            let first = lat.offset[a];
            let last = lat.offset[a] + shape.dims()[a] as i64;
            lo[a] = first.div_euclid(n) + i64::from(first.rem_euclid(n) != 0);
            hi[a] = last.div_euclid(n);
        }
        let mut bdims = [1usize; MAX_DIM];
        for a in 0..d {
            bdims[a] = (hi[a] - lo[a]).max(0) as usize;
        }
        let nblocks: usize = bdims[..d].iter().product();
        let mut sum = vec![0.0; nblocks];
        let mut count = vec![0usize; nblocks];
        let bindex = |b: [i64; MAX_DIM]| -> Option<usize> {
            let mut idx = 0usize;
            for a in 0..d {
                let r = b[a] - lo[a];
                if r < 0 || r >= bdims[a] as i64 {
                    return None;
                }
                idx = idx * bdims[a] + r as usize;
            }
            Some(idx)
        };
        let rel = axis_table(shape, lat.offset, |a, g| {
            let r = g.div_euclid(n) - lo[a];
            if r >= 0 && r < bdims[a] as i64 {
                Some(r as usize)
            } else {
                None
            }
        });
        let mut bstride = [1usize; MAX_DIM];
        for a in (0..d.saturating_sub(1)).rev() {
            bstride[a] = bstride[a + 1] * bdims[a + 1];
        }
        for_each_row(shape, |start, c| {
            let mut base = 0usize;
            for a in 0..d - 1 {
                match rel[a][c[a]] {
                    Some(r) => base += r * bstride[a],
                    None => return,
                }
            }
            for (j, r) in rel[d - 1].iter().enumerate() {
                if let (Some(r), true) = (r, mask[start + j]) {
                    sum[base + r] += lat.values[start + j];
                    count[base + r] += 1;
                }
            }
        });
        // alpha ranges over blocks with alpha + {0,1,2}^d inside
        let mut mdims = [1usize; MAX_DIM];
        for a in 0..d {
            mdims[a] = bdims[a].saturating_sub(2);
        }
        let nm: usize = mdims[..d].iter().product();
        let means = (0..nm)
            .map(|m| {
                let mut rem = m;
                let mut base = [0i64; MAX_DIM];
                for a in (0..d).rev() {
                    base[a] = (rem % mdims[a]) as i64;
                    rem /= mdims[a];
                }
                let (mut s, mut c) = (0.0, 0usize);
                for code in 0..3usize.pow(d as u32) {
                    let mut b = [0i64; MAX_DIM];
                    let mut k = code;
                    for a in 0..d {
                        b[a] = lo[a] + base[a] + (k % 3) as i64;
                        k /= 3;
                    }
                    let j = bindex(b).expect("block inside range");
                    s += sum[j];
                    c += count[j];
                }
                if c == 0 {
                    f64::NAN
                } else {
                    s / c as f64
                }
            })
            .collect();
        Self { dim: d, lo, dims: mdims, means }
    }

    fn get(&self, alpha: [i64; MAX_DIM]) -> Option<f64> {
        let mut idx = 0usize;
        for a in 0..self.dim {
            let r = alpha[a] - self.lo[a];
            if r < 0 || r >= self.dims[a] as i64 {
                return None;
            }
            idx = idx * self.dims[a] + r as usize;
        }
        Some(self.means[idx])
    }
}

/// `Lu(g) = Σ_α ψ^α u^α` at a global cell `g` outside `E`.
fn glued_value(plan: &ExtensionPlan, lat: &Lattice<'_>, means: &BlockMeans, g: [i64; MAX_DIM]) -> Result<f64> {
    let d = plan.dim;
    let n = plan.n as i64;
    let mut acc = 0.0;
    for bits in 0..(1usize << d) {
        let mut alpha = [0i64; MAX_DIM];
        let mut local = [0usize; MAX_DIM];
        let mut w = 1.0;
        for a in 0..d {
            let up = (bits >> a) & 1 == 1;
            alpha[a] = g[a].div_euclid(n) - i64::from(!up);
            let l = g[a] - alpha[a] * n;
            local[a] = l as usize;
            w *= plan.psi_nodes[local[a]];
        }
        let mean = means
            .get(alpha)
            .filter(|m| m.is_finite())
            .ok_or_else(|| Error::Margin(format!("translate {:?} of 3Q leaves the field's grid", &alpha[..d])))?;
        let idx = plan.local.index(local);
        let value = match plan.nodes[idx] {
            LocalNode::Identity => lat.at(g).ok_or_else(|| Error::Margin("node outside the field's grid".into()))?,
            LocalNode::Collar { source, phi, .. } => {
                let mut s = [0i64; MAX_DIM];
                for a in 0..d {
                    s[a] = alpha[a] * n + source[a] as i64;
                }
                let us = lat.at(s).ok_or_else(|| Error::Margin("mirror image outside the field's grid".into()))?;
                phi * us + (1.0 - phi) * mean
            }
            LocalNode::Far => mean,
        };
        acc += w * value;
    }
    Ok(acc)
}

/// Per-axis lookup `c ↦ f(offset + c)` for the coordinates of `shape`.
fn axis_table<T>(shape: &GridShape, offset: [i64; MAX_DIM], f: impl Fn(usize, i64) -> T) -> Vec<Vec<T>> {
    (0..shape.dim()).map(|a| (0..shape.dims()[a]).map(|c| f(a, offset[a] + c as i64)).collect()).collect()
}

/// Calls `f(first_index, coords)` for every row along the last axis.
fn for_each_row(shape: &GridShape, mut f: impl FnMut(usize, [usize; MAX_DIM])) {
    let len = shape.dims()[shape.dim() - 1];
    for row in 0..shape.len() / len {
        f(row * len, shape.coords(row * len));
    }
}

fn check_perforated(plan: &ExtensionPlan, dom: &PeriodicDomain, u: &GridField, offset: [i64; MAX_DIM]) -> Result<()> {
    if dom.dim() != plan.dim || dom.resolution() != plan.n {
        return Err(Error::InvalidArgument("plan and domain disagree".into()));
    }
    let d = plan.dim;
    let n = plan.n as i64;
    let shape = u.grid().shape();
    // periodic cell index as a sum of per-axis strides
    let strides = axis_table(shape, offset, |a, g| g.rem_euclid(n) as usize * (n as usize).pow((d - 1 - a) as u32));
    let ind = dom.indicator();
    let mask = u.mask();
    let mut bad = None;
    for_each_row(shape, |start, c| {
        if bad.is_some() {
            return;
        }
        let base: usize = (0..d - 1).map(|a| strides[a][c[a]]).sum();
        for (j, s) in strides[d - 1].iter().enumerate() {
            if mask[start + j] != ind[base + s] {
                bad = Some(start + j);
                return;
            }
        }
    });
    match bad {
        Some(i) => Err(Error::InvalidArgument(format!("field mask disagrees with the perforated set at node {i}"))),
        None => Ok(()),
    }
}

fn offset_of(grid: &BoxGrid) -> Result<[i64; MAX_DIM]> {
    grid.lattice_offset()
        .ok_or_else(|| Error::InvalidArgument("grid origin is not aligned with the lattice".into()))
}

/// Evaluates the glued extension on the grid `target`, whose nodes are also
/// nodes of `u`'s grid. Masked nodes of `u` keep their value.
fn glue_onto(
    plan: &ExtensionPlan,
    dom: &PeriodicDomain,
    u: &GridField,
    target: &BoxGrid,
    inside: impl Fn(usize) -> bool + Sync + Send,
) -> Result<Vec<f64>> {
    let d = plan.dim;
    let offset = offset_of(u.grid())?;
    check_perforated(plan, dom, u, offset)?;
    let toff = offset_of(target)?;
    let lat = Lattice { grid: u.grid(), offset, values: u.values() };
    let means = BlockMeans::new(plan, &lat, u.mask());
    let tshape = target.shape();
    let ushape = u.grid().shape();
    for a in 0..d {
        let lo = toff[a] - offset[a];
        if lo < 0 || lo + tshape.dims()[a] as i64 > ushape.dims()[a] as i64 {
            return Err(Error::Margin("target grid leaves the field's grid".into()));
        }
    }
    let eval = |i: usize| -> Result<f64> {
        if !inside(i) {
            return Ok(0.0);
        }
        let c = tshape.coords(i);
        let mut g = [0i64; MAX_DIM];
        let mut local = [0usize; MAX_DIM];
        for a in 0..d {
            g[a] = toff[a] + c[a] as i64;
            local[a] = (g[a] - offset[a]) as usize;
        }
        let j = ushape.index(local);
        if u.mask()[j] {
            Ok(u.values()[j])
        } else {
            glued_value(plan, &lat, &means, g)
        }
    };
    let row_len = tshape.dims()[d - 1];
    let mut out = vec![0.0; target.len()];
    // NaN marks a failed node; the first one is re-evaluated for its error
    crate::par::for_each_chunk(&mut out, row_len, |row, slice| {
        let start = row * row_len;
        let c = tshape.coords(start);
        let mut local = [0usize; MAX_DIM];
        for a in 0..d {
            local[a] = (toff[a] - offset[a]) as usize + c[a];
        }
        let ustart = ushape.index(local);
        let (mask, vals) = (u.mask(), u.values());
        let mut g = [0i64; MAX_DIM];
        for a in 0..d {
            g[a] = toff[a] + c[a] as i64;
        }
        for (j, v) in slice.iter_mut().enumerate() {
            let i = start + j;
            if !inside(i) {
                continue;
            }
            let k = ustart + j;
            g[d - 1] = toff[d - 1] + j as i64;
            *v = if mask[k] { vals[k] } else { glued_value(plan, &lat, &means, g).unwrap_or(f64::NAN) };
        }
    });
    if let Some(i) = out.iter().position(|v| v.is_nan()) {
        eval(i)?;
        return Err(Error::NonFinite(format!("extension value at node {i}")));
    }
    Ok(out)
}

/// `Lu = Σ_α ψ^α Φ^α(u)` on `Ω′`, for `u` on `Ω ∩ E` in unit-cell coordinates.
/// Requires `dist(Ω′, ∂Ω) > C̃`.
pub fn glue(plan: &ExtensionPlan, dom: &PeriodicDomain, u: &GridField, inner: &BoxRegion) -> Result<GridField> {
    let h = 1.0 / plan.n as f64;
    if (u.grid().spacing() - h).abs() > 1e-12 * h {
        return Err(Error::InvalidArgument(format!("gluing works at the domain spacing 1/{}", plan.n)));
    }
    let outer = u.region();
    let margin = outer.inner_margin(inner);
    if !outer.includes(inner) || !(margin > plan.c_tilde()) {
        return Err(Error::Margin(format!(
            "dist(Ω′, ∂Ω) = {margin} must exceed C̃ = {}",
            plan.c_tilde()
        )));
    }
    let target = BoxGrid::new(inner.clone(), h)?;
    let values = glue_onto(plan, dom, u, &target, |_| true)?;
    let mask = GridField::full_mask(&target);
    GridField::new(target, values, mask)
}

/// Nodes of `grid` inside `Ω(ε k₀)`.
pub fn inner_nodes(plan: &ExtensionPlan, grid: &BoxGrid, eps: f64) -> Result<Vec<bool>> {
    let lambda = eps * plan.k0();
    let region = grid.region();
    if !(lambda < 0.5 * region.min_extent()) {
        return Err(Error::Margin(format!(
            "eps*k0 = {lambda} must stay below half the smallest extent of Omega ({})",
            0.5 * region.min_extent()
        )));
    }
    Ok(grid.node_mask(&retract(region, lambda)?))
}

fn check_scaled(plan: &ExtensionPlan, u: &GridField, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let h = eps / plan.n as f64;
    if (u.grid().spacing() - h).abs() > 1e-9 * h {
        return Err(Error::InvalidArgument(format!(
            "field spacing {} must be eps/n = {h}",
            u.grid().spacing()
        )));
    }
    Ok(())
}

/// `T_ε u`: `u` kept on the masked nodes of `Ω(εk₀)`, the rescaled glued
/// extension on the remaining nodes of `Ω(εk₀)`, zero outside.
pub fn scaled_extend(plan: &ExtensionPlan, dom: &PeriodicDomain, u: &GridField, eps: f64) -> Result<GridField> {
    check_scaled(plan, u, eps)?;
    let inner = inner_nodes(plan, u.grid(), eps)?;
    extend_inside(plan, dom, u, &inner)
}

fn extend_inside(plan: &ExtensionPlan, dom: &PeriodicDomain, u: &GridField, inner: &[bool]) -> Result<GridField> {
    let values = glue_onto(plan, dom, u, u.grid(), |i| inner[i])?;
    let mask = GridField::full_mask(u.grid());
    GridField::new(u.grid().clone(), values, mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremEstimates {
    /// `∫_{Ω(εk₀)}|T_εu|^p / ∫_{Ω∩εE}|u|^p`.
    pub c1: f64,
    /// `∬_{Ω(εk₀)² ∩ D_{εR}}|T_εu(x) − T_εu(y)|^p / ∬_{(Ω∩εE)² ∩ D_{εr}}|u(x) − u(y)|^p`.
    pub c2: f64,
}

/// Both estimate ratios for `u` and its extension `tu = T_ε u`. Pair weights
/// `h^{2d}` cancel, so the sums run in cell units.
pub fn theorem_estimates(plan: &ExtensionPlan, u: &GridField, tu: &GridField, eps: f64, r: f64, p: f64) -> Result<TheoremEstimates> {
    check_scaled(plan, u, eps)?;
    if tu.grid() != u.grid() {
        return Err(Error::InvalidArgument("extension and field live on different grids".into()));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let inner = inner_nodes(plan, u.grid(), eps)?;
    estimates_inside(plan, u, tu, &inner, r, p)
}

fn estimates_inside(plan: &ExtensionPlan, u: &GridField, tu: &GridField, inner: &[bool], r: f64, p: f64) -> Result<TheoremEstimates> {
    let unit = 1.0 / plan.n as f64;
    let (v, m, w) = (u.values(), u.mask(), tu.values());

    let l_num = crate::par::sum_indexed(w.len(), |i| if inner[i] { pow_abs(w[i], p) } else { 0.0 });
    let l_den = crate::par::sum_indexed(v.len(), |i| if m[i] { pow_abs(v[i], p) } else { 0.0 });

    // both pair sums are symmetric: half stencils, doubled
    let big = range_stencil(plan.dim, plan.r_est, unit)?.half();
    let ps = PairStencil::new(u.grid(), &big);
    let num = pair_sum(u.grid(), &ps, |i| inner[i], |i| inner[i], |x, k, y| big.weights[k] * pow_abs(w[x] - w[y], p), false);
    let small = range_stencil(plan.dim, r, unit)?.half();
    let ps = PairStencil::new(u.grid(), &small);
    let den = pair_sum(u.grid(), &ps, |i| m[i], |i| m[i], |x, k, y| small.weights[k] * pow_abs(v[x] - v[y], p), false);
    Ok(TheoremEstimates { c1: ratio(l_num, l_den), c2: ratio(2.0 * num.total, 2.0 * den.total) })
}

/// The energy ratio of [`theorem_estimates`] for `u`, extending it first.
pub fn theorem_ratio(plan: &ExtensionPlan, dom: &PeriodicDomain, u: &GridField, eps: f64, r: f64, p: f64) -> Result<f64> {
    let tu = scaled_extend(plan, dom, u, eps)?;
    Ok(theorem_estimates(plan, u, &tu, eps, r, p)?.c2)
}

/// One row of an estimate sweep: the largest ratios over a field corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub eps: f64,
    pub r: f64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub r_est: f64,
    pub k0: f64,
}

/// Largest `c₁`, `c₂(r)` over `fields` seeded uniform fields on `Ω ∩ εE`,
/// for each `ε`. `omega` must have corners on the lattice `εZ^d / n`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_sweep(
    plan: &ExtensionPlan,
    dom: &PeriodicDomain,
    omega: &BoxRegion,
    eps_list: &[f64],
    r: f64,
    p: f64,
    fields: usize,
    seed: u64,
) -> Result<Vec<EstimateRow>> {
    estimate_sweep_with(plan, dom, omega, eps_list, r, p, fields, seed, |_| Ok(()))
}

/// One corpus member as seen by [`estimate_sweep_with`].
pub struct SweepField<'a> {
    pub eps: f64,
    pub index: usize,
    pub u: &'a GridField,
    pub extended: &'a GridField,
    /// Nodes of `Ω(εk₀)`.
    pub inner: &'a [bool],
    pub estimates: TheoremEstimates,
}

/// [`estimate_sweep`], calling `inspect` on every field after its estimates.
#[allow(clippy::too_many_arguments)]
pub fn estimate_sweep_with(
    plan: &ExtensionPlan,
    dom: &PeriodicDomain,
    omega: &BoxRegion,
    eps_list: &[f64],
    r: f64,
    p: f64,
    fields: usize,
    seed: u64,
    mut inspect: impl FnMut(&SweepField<'_>) -> Result<()>,
) -> Result<Vec<EstimateRow>> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let grid = BoxGrid::new(omega.clone(), eps / plan.n as f64)?;
        let mask = GridField::perforated_mask(&grid, dom, eps);
        let inner = inner_nodes(plan, &grid, eps)?;
        let mut row = EstimateRow { eps, r, c1_hat: 0.0, c2_hat: 0.0, r_est: plan.r_est, k0: plan.k0() };
        let mut u = GridField::new(grid.clone(), vec![0.0; grid.len()], mask)?;
        for f in 0..fields {
            let noise = crate::random::uniform_field(seed, f as u64, grid.len());
            let values = noise.iter().zip(u.mask()).map(|(&z, &m)| if m { z } else { 0.0 }).collect();
            u = u.with_values(values)?;
            let tu = extend_inside(plan, dom, &u, &inner)?;
            let est = estimates_inside(plan, &u, &tu, &inner, r, p)?;
            inspect(&SweepField { eps, index: f, u: &u, extended: &tu, inner: &inner, estimates: est })?;
            row.c1_hat = row.c1_hat.max(est.c1);
            row.c2_hat = row.c2_hat.max(est.c2);
        }
        rows.push(row);
    }
    Ok(rows)
}

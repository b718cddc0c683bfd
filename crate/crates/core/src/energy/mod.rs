//! Discretized nonlocal functionals and the diagnostics built on them.
//!
//! Fields live at cell centres of a box grid with spacing `h`. For a scale
//! `ε` the kernel stencil is built at spacing `h/ε`, so an offset `o` stands
//! for `ξ = o h/ε` and each ordered node pair carries the weight `h^{2d}`.

mod field;
mod pairs;

use std::collections::VecDeque;
use std::fmt;
use std::sync::{Arc, Mutex};

pub use field::GridField;
pub(crate) use pairs::{pair_sum, pow_abs, PairStencil};

use crate::geometry::{retract, BoxRegion, MAX_DIM};
use crate::kernel::{Kernel, Stencil};
use crate::{Error, Result};

/// `h(x, ξ, z)` evaluated at `x` in unit-cell coordinates (`x/ε`).
pub type IntegrandFn = dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync;
/// `ψ(ξ)` of the upper growth bound `h(x, ξ, z) ≤ ψ(ξ)(|z|^p + 1)`.
pub type BoundFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum Integrand {
    /// `a(ξ)|z|^p`.
    PowerLaw,
    /// User integrand with its declared growth bound, checked at every evaluation.
    Custom { h: Arc<IntegrandFn>, psi: Arc<BoundFn> },
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrand::PowerLaw => f.write_str("PowerLaw"),
            Integrand::Custom { .. } => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnergySpec {
    pub eps: f64,
    pub p: f64,
    pub kernel: Kernel,
    pub integrand: Integrand,
}

impl EnergySpec {
    pub fn power_law(eps: f64, p: f64, kernel: Kernel) -> Result<Self> {
        Self::new(eps, p, kernel, Integrand::PowerLaw)
    }

    pub fn new(eps: f64, p: f64, kernel: Kernel, integrand: Integrand) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
        }
        Ok(Self { eps, p, kernel, integrand })
    }

    pub fn stencil_for(&self, u: &GridField) -> Result<Stencil> {
        if self.kernel.dim() != u.dim() {
            return Err(Error::InvalidArgument(format!(
                "kernel dimension {} does not match field dimension {}",
                self.kernel.dim(),
                u.dim()
            )));
        }
        self.kernel.stencil(u.grid().spacing() / self.eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    /// Number of ordered node pairs in the sum.
    pub pairs: u64,
    /// Per-node partial sums (node `x` collects its pairs `(x, y)`).
    pub partials: Option<Vec<f64>>,
}

/// Value of a localized functional; `empty` flags an `A` without masked nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedEnergy {
    pub value: f64,
    pub empty: bool,
}

fn require_nonempty(u: &GridField) -> Result<()> {
    if u.masked_count() == 0 {
        Err(Error::EmptyRegion("field mask is empty".into()))
    } else {
        Ok(())
    }
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

fn power_law_sum(
    u: &GridField,
    spec: &EnergySpec,
    node_ok: impl Fn(usize) -> bool + Sync + Send,
    keep_partials: bool,
) -> Result<EnergyBreakdown> {
    let st = spec.stencil_for(u)?;
    let ps = PairStencil::new(u.grid(), &st);
    let d = u.dim() as i32;
    let h = u.grid().spacing();
    let scale = h.powi(2 * d) * spec.eps.powf(-(d as f64 + spec.p));
    let (v, p) = (u.values(), spec.p);
    let sum = pair_sum(u.grid(), &ps, &node_ok, &node_ok, |x, k, y| st.weights[k] * pow_abs(v[x] - v[y], p), keep_partials);
    let partials = sum.partials.map(|mut q| {
        q.iter_mut().for_each(|s| *s *= scale);
        q
    });
    Ok(EnergyBreakdown { total: finite(sum.total * scale, "energy")?, pairs: sum.pairs, partials })
}

/// `ε^{-(d+p)} Σ_{x,y} a((y-x)/ε)|u(x) - u(y)|^p h^{2d}` over ordered pairs of
/// masked nodes. The integrand of `spec` is ignored (see [`general_energy`]).
pub fn nonlocal_energy(u: &GridField, spec: &EnergySpec) -> Result<EnergyBreakdown> {
    require_nonempty(u)?;
    let m = u.mask();
    power_law_sum(u, spec, |i| m[i], false)
}

/// [`nonlocal_energy`] with per-node partial sums.
pub fn nonlocal_energy_with_partials(u: &GridField, spec: &EnergySpec) -> Result<EnergyBreakdown> {
    require_nonempty(u)?;
    let m = u.mask();
    power_law_sum(u, spec, |i| m[i], true)
}

/// `Σ_x Σ_ξ h(x/ε, ξ, (u(x+εξ) - u(x))/ε) h^d (h/ε)^d` over masked `x` with
/// `x + εξ` masked, `ξ` on the kernel stencil.
pub fn general_energy(u: &GridField, spec: &EnergySpec) -> Result<EnergyBreakdown> {
    require_nonempty(u)?;
    let st = spec.stencil_for(u)?;
    let ps = PairStencil::new(u.grid(), &st);
    let d = u.dim();
    let h = u.grid().spacing();
    let eps = spec.eps;
    let scale = h.powi(d as i32) * (h / eps).powi(d as i32);
    let (v, m, p) = (u.values(), u.mask(), spec.p);
    let xi_of = |k: usize| {
        let mut xi = [0.0; MAX_DIM];
        for a in 0..d {
            xi[a] = st.offsets[k][a] as f64 * h / eps;
        }
        xi
    };
    let sum = match &spec.integrand {
        Integrand::PowerLaw => pair_sum(
            u.grid(),
            &ps,
            |i| m[i],
            |i| m[i],
            |x, k, y| st.weights[k] * pow_abs((v[y] - v[x]) / eps, p),
            false,
        ),
        Integrand::Custom { h: hf, psi } => {
            let violation: Mutex<Option<Error>> = Mutex::new(None);
            let grid = u.grid();
            let s = pair_sum(
                grid,
                &ps,
                |i| m[i],
                |i| m[i],
                |x, k, y| {
                    let c = grid.center(x);
                    let mut xs = [0.0; MAX_DIM];
                    for a in 0..d {
                        xs[a] = c[a] / eps;
                    }
                    let xi = xi_of(k);
                    let z = (v[y] - v[x]) / eps;
                    let value = hf(&xs[..d], &xi[..d], z);
                    let bound = psi(&xi[..d]) * (z.abs().powf(p) + 1.0);
                    if !(value <= bound * (1.0 + 1e-12)) {
                        let mut slot = violation.lock().unwrap();
                        if slot.is_none() {
                            *slot = Some(Error::GrowthBound { xi: xi[..d].to_vec(), z, value, bound });
                        }
                    }
                    st.coverage[k] * value
                },
                false,
            );
            if let Some(e) = violation.into_inner().unwrap() {
                return Err(e);
            }
            s
        }
    };
    Ok(EnergyBreakdown { total: finite(sum.total * scale, "energy")?, pairs: sum.pairs, partials: None })
}

fn check_subregion(u: &GridField, a: &BoxRegion) -> Result<()> {
    if a.dim() != u.dim() {
        return Err(Error::InvalidArgument("region dimension does not match the field".into()));
    }
    if !u.region().includes(a) {
        return Err(Error::InvalidArgument(format!("region {a:?} is not inside the field region")));
    }
    Ok(())
}

/// The power-law sum restricted to pairs with both nodes in `A`.
pub fn localized_energy(u: &GridField, spec: &EnergySpec, a: &BoxRegion) -> Result<LocalizedEnergy> {
    check_subregion(u, a)?;
    let inside = in_region(u, a);
    if !inside.iter().any(|&b| b) {
        return Ok(LocalizedEnergy { value: 0.0, empty: true });
    }
    let e = power_law_sum(u, spec, |i| inside[i], false)?;
    Ok(LocalizedEnergy { value: e.total, empty: false })
}

/// Masked nodes with centre in `a`.
fn in_region(u: &GridField, a: &BoxRegion) -> Vec<bool> {
    let d = u.dim();
    let grid = u.grid();
    let m = u.mask();
    crate::par::map_indexed(u.len(), |i| m[i] && a.contains(&grid.center(i)[..d]))
}

/// Average of `u` over masked nodes of `A`.
pub fn mean_value(u: &GridField, a: &BoxRegion) -> Result<f64> {
    check_subregion(u, a)?;
    let inside = in_region(u, a);
    let vals: Vec<f64> = u.values().iter().zip(&inside).filter(|(_, &b)| b).map(|(&v, _)| v).collect();
    if vals.is_empty() {
        return Err(Error::EmptyRegion(format!("no masked nodes in {a:?}")));
    }
    Ok(crate::par::ordered_sum(&vals) / vals.len() as f64)
}

/// Both sides of `∫_A |u_A - u|^p ≤ (1/|A|) ∬_{A×A} |u(x) - u(y)|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareDefect {
    pub lhs: f64,
    pub rhs: f64,
}

/// Mean-value inequality terms by masked midpoint sums, `|A|` being the
/// measure of the masked part of `A`.
pub fn poincare_defect(u: &GridField, a: &BoxRegion, p: f64) -> Result<PoincareDefect> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let mean = mean_value(u, a)?;
    let inside = in_region(u, a);
    let vals: Vec<f64> = u.values().iter().zip(&inside).filter(|(_, &b)| b).map(|(&v, _)| v).collect();
    let w = u.grid().cell_volume();
    let measure = vals.len() as f64 * w;
    let lhs = crate::par::ordered_sum(&vals.iter().map(|v| pow_abs(mean - v, p)).collect::<Vec<_>>()) * w;
    let double = crate::par::sum_indexed(vals.len(), |i| {
        crate::par::ordered_sum(&vals.iter().map(|y| pow_abs(vals[i] - y, p)).collect::<Vec<_>>())
    });
    let rhs = double * w * w / measure;
    Ok(PoincareDefect { lhs: finite(lhs, "poincare lhs")?, rhs: finite(rhs, "poincare rhs")? })
}

/// `∫_{Ω(εk)} ∫_{|ξ|≤R} |(u(x+εξ) - u(x))/ε|^p dξ dx` by midpoint sums, with
/// `x` on masked nodes of `Ω(εk)` and `x + εξ` any masked node.
pub fn compactness_diagnostic(u: &GridField, spec: &EnergySpec, k: f64, r: f64) -> Result<f64> {
    let inner = retract(u.region(), spec.eps * k)?;
    let ball = Kernel::ball(u.dim(), r)?;
    let h = u.grid().spacing();
    let eps = spec.eps;
    let st = ball.stencil(h / eps)?;
    let ps = PairStencil::new(u.grid(), &st);
    let d = u.dim() as i32;
    let inside = in_region(u, &inner);
    if !inside.iter().any(|&b| b) {
        return Err(Error::EmptyRegion(format!("no masked nodes in the retracted region {inner:?}")));
    }
    let (v, m, p) = (u.values(), u.mask(), spec.p);
    let sum = pair_sum(
        u.grid(),
        &ps,
        |i| inside[i],
        |i| m[i],
        |x, k, y| st.coverage[k] * pow_abs((v[y] - v[x]) / eps, p),
        false,
    );
    finite(sum.total * h.powi(d) * (h / eps).powi(d), "compactness diagnostic")
}

/// Connected components of the pair graph (masked nodes, edges between nodes
/// joined by a stencil offset). Returns per-node labels (`u32::MAX` off the
/// mask) and the component count.
pub fn pair_graph_components(u: &GridField, spec: &EnergySpec) -> Result<(Vec<u32>, usize)> {
    let st = spec.stencil_for(u)?;
    let shape = u.grid().shape();
    let dims = shape.dims();
    let d = dims.len();
    let m = u.mask();
    let mut label = vec![u32::MAX; u.len()];
    let mut count = 0usize;
    let mut queue = VecDeque::new();
    for s in 0..u.len() {
        if !m[s] || label[s] != u32::MAX {
            continue;
        }
        label[s] = count as u32;
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            let c = shape.coords(x);
            for o in &st.offsets {
                let mut y = [0i64; MAX_DIM];
                for a in 0..d {
                    y[a] = c[a] as i64 + o[a];
                }
                if let Some(j) = shape.checked_index(y) {
                    if m[j] && label[j] == u32::MAX {
                        label[j] = count as u32;
                        queue.push_back(j);
                    }
                }
            }
        }
        count += 1;
    }
    Ok((label, count))
}

#[cfg(test)]
mod tests;

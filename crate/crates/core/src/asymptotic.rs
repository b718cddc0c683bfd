//! The box formula for `h_hom(Ξ)` on `(0,T)^d`, T-sweeps against the cell
//! formula, and recovery-sequence experiments for `F_ε`.

use crate::cell_problem::{
    convex_minimizer, gradient_density, quadratic_minimizer, solve, CellProblem, CorrectorSolution, PairProblem,
    INACTIVE, PINNED,
};
use crate::energy::{nonlocal_energy, EnergySpec, GridField};
use crate::geometry::{BoxGrid, BoxRegion, GridShape, PeriodicDomain};
use crate::kernel::Kernel;
use crate::{Error, Result};

/// Minimization of `(1/T^d) ∬_{((0,T)^d ∩ E)²} a(y-x)|v(y) - v(x)|^p` with
/// `v = Ξ·x` on the band `dist(x, ∂(0,T)^d) < band`.
#[derive(Debug, Clone)]
pub struct BoxProblem {
    pub dom: PeriodicDomain,
    pub kernel: Kernel,
    pub p: f64,
    pub xi: Vec<f64>,
    pub t: f64,
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSolution {
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub unknowns: usize,
}

impl BoxProblem {
    /// Band defaults to the kernel support radius.
    pub fn new(dom: PeriodicDomain, kernel: Kernel, p: f64, xi: Vec<f64>, t: f64) -> Result<Self> {
        let band = kernel.support();
        Self::with_band(dom, kernel, p, xi, t, band)
    }

    pub fn with_band(dom: PeriodicDomain, kernel: Kernel, p: f64, xi: Vec<f64>, t: f64, band: f64) -> Result<Self> {
        CellProblem::new(dom.clone(), kernel.clone(), p, xi.clone())?;
        let cells = t * dom.resolution() as f64;
        if !(t > 0.0) || (cells - cells.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "T = {t} must be a positive multiple of the grid spacing {}",
                dom.spacing()
            )));
        }
        if !(band > 0.0 && band.is_finite()) {
            return Err(Error::InvalidArgument(format!("band must be positive, got {band}")));
        }
        Ok(Self { dom, kernel, p, xi, t, band })
    }

    fn grid(&self) -> Result<(GridShape, usize)> {
        let cells = (self.t * self.dom.resolution() as f64).round() as usize;
        Ok((GridShape::cube(self.dom.dim(), cells)?, cells))
    }

    fn in_e(&self, shape: &GridShape, idx: usize) -> bool {
        let c = shape.coords(idx);
        self.dom.at_cell([c[0] as i64, c[1] as i64, c[2] as i64])
    }

    fn pair_problem(&self, periodic: bool) -> Result<PairProblem> {
        let (shape, cells) = self.grid()?;
        let h = self.dom.spacing();
        let d = self.dom.dim();
        let mut next = 0u32;
        let mut kind = Vec::with_capacity(shape.len());
        let mut has_band = false;
        for i in 0..shape.len() {
            if !self.in_e(&shape, i) {
                kind.push(INACTIVE);
                continue;
            }
            let c = shape.coords(i);
            let dist = (0..d)
                .map(|a| {
                    let x = (c[a] as f64 + 0.5) * h;
                    x.min(self.t - x)
                })
                .fold(f64::INFINITY, f64::min);
            if !periodic && dist < self.band {
                has_band = true;
                kind.push(PINNED);
            } else {
                kind.push(next);
                next += 1;
            }
        }
        if !periodic && (!has_band || next == 0) {
            return Err(Error::InvalidArgument(format!(
                "T = {} with band {} leaves an empty band or interior",
                self.t, self.band
            )));
        }
        if periodic && (cells as f64 * h - self.t.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("periodic box needs an integer T, got {}", self.t)));
        }
        let stencil = self.kernel.stencil(h)?;
        let weight = h.powi(2 * d as i32) / self.t.powi(d as i32);
        Ok(PairProblem::new(shape, kind, &stencil, &self.xi, h, periodic, weight, self.p))
    }

    fn solve(&self, periodic: bool) -> Result<BoxSolution> {
        let pp = self.pair_problem(periodic)?;
        let (w, iterations, grad_norm) = if self.p == 2.0 {
            let (w, it) = quadratic_minimizer(&pp)?;
            let g = gradient_density(&pp, &w);
            (w, it, g)
        } else {
            let xi_norm = self.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            convex_minimizer(&pp, xi_norm)?
        };
        let value = pp.energy(&w);
        if !value.is_finite() {
            return Err(Error::NonFinite("box energy".into()));
        }
        Ok(BoxSolution { value, grad_norm, iterations, unknowns: pp.unknown_count() })
    }
}

/// Band-pinned box value.
pub fn box_value(prob: &BoxProblem) -> Result<BoxSolution> {
    prob.solve(false)
}

/// Box value with `v - Ξ·x` `T`-periodic instead of pinned.
pub fn box_value_periodic(prob: &BoxProblem) -> Result<BoxSolution> {
    prob.solve(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    pub box_pinned: f64,
    pub box_periodic: f64,
    pub cell: f64,
    pub gap_pinned: f64,
    pub gap_periodic: f64,
}

/// Box values for each `T` against the cell value of the same problem.
pub fn t_sweep(cell: &CellProblem, ts: &[f64], band: Option<f64>) -> Result<Vec<SweepRow>> {
    if ts.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("T values must be increasing".into()));
    }
    let cell_value = solve(cell)?.value;
    let band = band.unwrap_or(cell.kernel.support());
    let rows = crate::par::map_indexed(ts.len(), |i| -> Result<SweepRow> {
        let prob = BoxProblem::with_band(cell.dom.clone(), cell.kernel.clone(), cell.p, cell.xi.clone(), ts[i], band)?;
        let pinned = box_value(&prob)?.value;
        let periodic = box_value_periodic(&prob)?.value;
        Ok(SweepRow {
            t: ts[i],
            box_pinned: pinned,
            box_periodic: periodic,
            cell: cell_value,
            gap_pinned: (pinned - cell_value).abs(),
            gap_periodic: (periodic - cell_value).abs(),
        })
    });
    rows.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub eps: f64,
    pub f_recovery: f64,
    pub f_linear: f64,
    pub h_hom: f64,
}

/// Recovery sequence `u_ε(x) = Ξ·x + ε w(x/ε)` on `Ω ∩ εE` at spacing
/// `h = ε/n`, where `n` is the cell resolution and `w` the cell corrector.
pub fn recovery_field(cell: &CellProblem, sol: &CorrectorSolution, omega: &BoxRegion, eps: f64) -> Result<GridField> {
    corrected_field(cell, Some(sol), omega, eps)
}

/// The plain linear field `Ξ·x` on `Ω ∩ εE`.
pub fn linear_field(cell: &CellProblem, omega: &BoxRegion, eps: f64) -> Result<GridField> {
    corrected_field(cell, None, omega, eps)
}

fn corrected_field(
    cell: &CellProblem,
    sol: Option<&CorrectorSolution>,
    omega: &BoxRegion,
    eps: f64,
) -> Result<GridField> {
    let n = cell.resolution();
    let d = cell.dom.dim();
    if omega.dim() != d {
        return Err(Error::InvalidArgument("Ω and the cell have different dimensions".into()));
    }
    let h = eps / n as f64;
    let grid = BoxGrid::new(omega.clone(), h)?;
    let off = grid.lattice_offset().ok_or_else(|| {
        Error::InvalidArgument(format!("origin of Ω must lie on the lattice of spacing ε/n = {h}"))
    })?;
    let mask = GridField::perforated_mask(&grid, &cell.dom, eps);
    let shape = grid.shape().clone();
    let cell_shape = cell.dom.cell_shape_ref().clone();
    let xi = &cell.xi;
    let values = crate::par::map_indexed(grid.len(), |i| {
        if !mask[i] {
            return 0.0;
        }
        let x = grid.center(i);
        let lin: f64 = (0..d).map(|a| xi[a] * x[a]).sum();
        match sol {
            Some(s) => {
                let c = shape.coords(i);
                let k = cell_shape.wrap_index([
                    c[0] as i64 + off[0],
                    c[1] as i64 + off[1],
                    c[2] as i64 + off[2],
                ]);
                lin + eps * s.corrector[k]
            }
            None => lin,
        }
    });
    GridField::new(grid, values, mask)
}

/// `F_ε(u_ε)/|Ω|` for recovery and linear fields over `eps_list`.
pub fn gamma_experiment(
    cell: &CellProblem,
    sol: &CorrectorSolution,
    eps_list: &[f64],
    omega: &BoxRegion,
) -> Result<Vec<GammaRow>> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps * cell.kernel.support() < 0.5 * omega.min_extent()) {
            return Err(Error::InvalidArgument(format!(
                "ε R₀ = {} must stay below half the extent of Ω ({})",
                eps * cell.kernel.support(),
                0.5 * omega.min_extent()
            )));
        }
        let spec = EnergySpec::power_law(eps, cell.p, cell.kernel.clone())?;
        let vol = omega.volume();
        let f_recovery = nonlocal_energy(&recovery_field(cell, sol, omega, eps)?, &spec)?.total / vol;
        let f_linear = nonlocal_energy(&linear_field(cell, omega, eps)?, &spec)?.total / vol;
        rows.push(GammaRow { eps, f_recovery, f_linear, h_hom: sol.value });
    }
    Ok(rows)
}

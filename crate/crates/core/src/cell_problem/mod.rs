//! The cell formula for `h_hom(Ξ)`: minimize the periodic nonlocal energy of
//! `v = Ξ·x + w` over `1`-periodic correctors `w` on the `E`-nodes of the
//! unit cell.
//!
//! The outer sum runs over unit-cell nodes of `E`, the inner one over the
//! whole kernel stencil with `E` and `w` extended periodically, so offsets
//! longer than the cell simply wrap more than once.

mod pair;
mod solver;

use nalgebra::{Matrix3, SymmetricEigen};

pub(crate) use pair::{project_mean_zero, PairProblem, INACTIVE, PINNED};
pub(crate) use solver::{conjugate_gradient, descend, sup_norm};

use crate::geometry::PeriodicDomain;
use crate::kernel::Kernel;
use crate::{Error, Result};

/// Relative residual target of the conjugate-gradient solve.
pub const CG_TOL: f64 = 1e-10;
/// Gradient-density target of the descent solver, scaled by `1 + |Ξ|^{p-1}`.
pub const DESCENT_TOL: f64 = 1e-8;
pub const DESCENT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone)]
pub struct CellProblem {
    pub dom: PeriodicDomain,
    pub kernel: Kernel,
    pub p: f64,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorSolution {
    /// `w` over the unit-cell grid (row-major), zero off `E`, mean zero on
    /// each component of the periodic pair graph.
    pub corrector: Vec<f64>,
    pub value: f64,
    /// Sup-norm of the energy gradient per unit volume at the solution.
    pub grad_norm: f64,
    pub iterations: usize,
}

impl CellProblem {
    pub fn new(dom: PeriodicDomain, kernel: Kernel, p: f64, xi: Vec<f64>) -> Result<Self> {
        if kernel.dim() != dom.dim() || xi.len() != dom.dim() {
            return Err(Error::InvalidArgument(format!(
                "domain dimension {}, kernel dimension {} and |Ξ| = {} must agree",
                dom.dim(),
                kernel.dim(),
                xi.len()
            )));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Ξ must be finite".into()));
        }
        Ok(Self { dom, kernel, p, xi })
    }

    pub fn resolution(&self) -> usize {
        self.dom.resolution()
    }

    pub fn with_xi(&self, xi: Vec<f64>) -> Result<Self> {
        Self::new(self.dom.clone(), self.kernel.clone(), self.p, xi)
    }

    pub(crate) fn pair_problem(&self) -> Result<PairProblem> {
        let h = self.dom.spacing();
        let stencil = self.kernel.stencil(h)?;
        let mut next = 0u32;
        let kind = self
            .dom
            .indicator()
            .iter()
            .map(|&b| {
                if b {
                    next += 1;
                    next - 1
                } else {
                    INACTIVE
                }
            })
            .collect();
        let d = self.dom.dim() as i32;
        Ok(PairProblem::new(
            self.dom.cell_shape_ref().clone(),
            kind,
            &stencil,
            &self.xi,
            h,
            true,
            h.powi(2 * d),
            self.p,
        ))
    }

    fn xi_norm(&self) -> f64 {
        self.xi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn gather(pp: &PairProblem, w: &[f64]) -> Vec<f64> {
    pp.unknowns.iter().map(|&x| w[x]).collect()
}

pub(crate) fn scatter(pp: &PairProblem, len: usize, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (id, &x) in pp.unknowns.iter().enumerate() {
        out[x] = w[id];
    }
    out
}

/// Cell energy of `v = Ξ·x + w`, `w` given on the unit-cell grid (values off
/// `E` are ignored).
pub fn cell_energy(prob: &CellProblem, w: &[f64]) -> Result<f64> {
    let pp = prob.pair_problem()?;
    if w.len() != prob.dom.indicator().len() {
        return Err(Error::InvalidArgument(format!(
            "corrector has {} values, the cell has {} nodes",
            w.len(),
            prob.dom.indicator().len()
        )));
    }
    Ok(pp.energy(&gather(&pp, w)))
}

pub(crate) fn gradient_density(pp: &PairProblem, w: &[f64]) -> f64 {
    let mut g = vec![0.0; w.len()];
    pp.gradient(w, &mut g);
    sup_norm(&g) / pp.node_volume
}

/// Stationarity system `L w = b` of the quadratic problem, solved by
/// conjugate gradients on mean-zero fields of each free component.
pub(crate) fn quadratic_minimizer(pp: &PairProblem) -> Result<(Vec<f64>, usize)> {
    let (labels, count) = pp.free_components();
    let b = pp.rhs();
    let max_iter = 10 * pp.unknown_count().max(1);
    let out = conjugate_gradient(
        |x, y| pp.laplacian(x, y),
        &b,
        |v| project_mean_zero(v, &labels, count),
        CG_TOL,
        max_iter,
    )?;
    Ok((out.x, out.iterations))
}

pub(crate) fn convex_minimizer(pp: &PairProblem, xi_norm: f64) -> Result<(Vec<f64>, usize, f64)> {
    let (labels, count) = pp.free_components();
    let tol = DESCENT_TOL * (1.0 + xi_norm.powf(pp.p - 1.0));
    let out = descend(
        |w| pp.objective(w),
        |w, g| pp.gradient(w, g),
        |v| project_mean_zero(v, &labels, count),
        vec![0.0; pp.unknown_count()],
        pp.node_volume,
        tol,
        DESCENT_MAX_ITER,
    )?;
    Ok((out.x, out.iterations, out.grad_norm))
}

/// `p = 2`: conjugate gradients to relative residual [`CG_TOL`].
pub fn solve_quadratic(prob: &CellProblem) -> Result<CorrectorSolution> {
    if prob.p != 2.0 {
        return Err(Error::InvalidArgument(format!("solve_quadratic needs p = 2, got {}", prob.p)));
    }
    let pp = prob.pair_problem()?;
    let (w, iterations) = quadratic_minimizer(&pp)?;
    finish(prob, &pp, w, iterations, None)
}

/// Any `p > 1`: Barzilai–Borwein gradient descent with backtracking.
pub fn solve_convex(prob: &CellProblem) -> Result<CorrectorSolution> {
    let pp = prob.pair_problem()?;
    let (w, iterations, grad_norm) = convex_minimizer(&pp, prob.xi_norm())?;
    finish(prob, &pp, w, iterations, Some(grad_norm))
}

/// [`solve_quadratic`] for `p = 2`, [`solve_convex`] otherwise.
pub fn solve(prob: &CellProblem) -> Result<CorrectorSolution> {
    if prob.p == 2.0 {
        solve_quadratic(prob)
    } else {
        solve_convex(prob)
    }
}

fn finish(
    prob: &CellProblem,
    pp: &PairProblem,
    w: Vec<f64>,
    iterations: usize,
    grad_norm: Option<f64>,
) -> Result<CorrectorSolution> {
    let value = pp.energy(&w);
    if !value.is_finite() {
        return Err(Error::NonFinite("cell energy".into()));
    }
    let grad_norm = grad_norm.unwrap_or_else(|| gradient_density(pp, &w));
    let corrector = scatter(pp, prob.dom.indicator().len(), &w);
    Ok(CorrectorSolution { corrector, value, grad_norm, iterations })
}

/// Quadratic `h_hom` as the matrix `A` with `Ξ·AΞ = h_hom(Ξ)` (`p = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedForm {
    pub dim: usize,
    /// Row-major `d × d`.
    pub matrix: Vec<f64>,
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
}

impl HomogenizedForm {
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }
}

/// Diagonal from `h_hom(e_i)`, off-diagonal entries by polarization
/// `(h(e_i + e_j) - h(e_i) - h(e_j))/2`.
pub fn homogenized_form(dom: &PeriodicDomain, kernel: &Kernel) -> Result<HomogenizedForm> {
    let d = dom.dim();
    let unit = |i: usize| (0..d).map(|a| (a == i) as u8 as f64).collect::<Vec<_>>();
    let value = |xi: Vec<f64>| -> Result<f64> {
        Ok(solve_quadratic(&CellProblem::new(dom.clone(), kernel.clone(), 2.0, xi)?)?.value)
    };
    let diag: Vec<f64> = (0..d).map(|i| value(unit(i))).collect::<Result<_>>()?;
    let mut m = Matrix3::zeros();
    for i in 0..d {
        m[(i, i)] = diag[i];
        for j in 0..i {
            let xi: Vec<f64> = unit(i).iter().zip(unit(j)).map(|(a, b)| a + b).collect();
            let off = 0.5 * (value(xi)? - diag[i] - diag[j]);
            m[(i, j)] = off;
            m[(j, i)] = off;
        }
    }
    let sub = m.view((0, 0), (d, d)).into_owned();
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sub).eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let matrix = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    Ok(HomogenizedForm { dim: d, matrix, eigenvalues })
}

//! Radial interaction kernels `a(ξ)` with compact support.

use serde::{Deserialize, Serialize};

use crate::geometry::MAX_DIM;
use crate::{Error, Result};

/// Relative tolerance under which a stencil offset counts as lying on the
/// support sphere `|ξ| = R₀`.
pub const SPHERE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum KernelShape {
    /// `χ_{|ξ| ≤ radius}`.
    Ball { radius: f64 },
    /// `(2πσ²)^{-d/2} exp(-|ξ|²/2σ²)` truncated at `radius`.
    Gaussian { sigma: f64, radius: f64 },
    /// Piecewise-linear profile through `(radii[i], values[i])`, zero past the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    dim: usize,
    shape: KernelShape,
    support: f64,
    r0: f64,
    c: f64,
}

/// Integer offsets with their quadrature weights `a(o·h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub dim: usize,
    pub offsets: Vec<[i64; MAX_DIM]>,
    pub weights: Vec<f64>,
    /// Fraction of the quadrature cell inside the support: 1, or 1/2 on the sphere.
    pub coverage: Vec<f64>,
    /// Largest `|o_i|` over offsets.
    pub reach: i64,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// The offsets that are lexicographically positive; the stencil is even,
    /// so sums of symmetric pair terms over it are half the full sums.
    pub fn half(&self) -> Stencil {
        let keep: Vec<usize> = (0..self.len()).filter(|&k| self.offsets[k] > [0, 0, 0]).collect();
        Stencil {
            dim: self.dim,
            offsets: keep.iter().map(|&k| self.offsets[k]).collect(),
            weights: keep.iter().map(|&k| self.weights[k]).collect(),
            coverage: keep.iter().map(|&k| self.coverage[k]).collect(),
            reach: self.reach,
        }
    }
}

impl Kernel {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, KernelShape::Ball { radius })
    }

    pub fn gaussian(dim: usize, sigma: f64, radius: f64) -> Result<Self> {
        Self::new(dim, KernelShape::Gaussian { sigma, radius })
    }

    pub fn table(dim: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(dim, KernelShape::Table { radii, values })
    }

    pub fn new(dim: usize, shape: KernelShape) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not in 1..=3")));
        }
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let (support, r0, c) = match &shape {
            KernelShape::Ball { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("ball radius must be positive, got {radius}"));
                }
                (*radius, *radius, 1.0)
            }
            KernelShape::Gaussian { sigma, radius } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return bad(format!("gaussian sigma must be positive, got {sigma}"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad(format!("gaussian radius must be positive, got {radius}"));
                }
                let r0 = sigma.min(*radius);
                (*radius, r0, gaussian_profile(dim, *sigma, r0))
            }
            KernelShape::Table { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return bad("table needs at least two (radius, value) pairs of equal length".into());
                }
                if radii[0] != 0.0 {
                    return bad("table radii must start at 0".into());
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) || !radii.iter().all(|r| r.is_finite()) {
                    return bad("table radii must be finite and strictly increasing".into());
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("table values must be finite and nonnegative".into());
                }
                if values[0] <= 0.0 {
                    return bad("table value at radius 0 must be positive".into());
                }
                // largest knot up to which the profile stays positive
                let j = values.iter().take_while(|v| **v > 0.0).count() - 1;
                let r0 = if j == 0 { 0.5 * radii[1] } else { radii[j] };
                let c = values[..=j].iter().cloned().fold(table_profile(radii, values, r0), f64::min);
                (*radii.last().unwrap(), r0, c)
            }
        };
        Ok(Self { dim, shape, support, r0, c })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &KernelShape {
        &self.shape
    }

    /// Support radius `R₀`.
    pub fn support(&self) -> f64 {
        self.support
    }

    /// Radius `r₀` of the lower bound `a ≥ c` on `|ξ| ≤ r₀`.
    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Radial profile on the closed support.
    pub fn profile(&self, r: f64) -> f64 {
        if r > self.support {
            return 0.0;
        }
        match &self.shape {
            KernelShape::Ball { .. } => 1.0,
            KernelShape::Gaussian { sigma, .. } => gaussian_profile(self.dim, *sigma, r),
            KernelShape::Table { radii, values } => table_profile(radii, values, r),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.profile(norm(xi))
    }

    /// Quadrature weight at `|ξ| = r`: the profile inside the support, half of
    /// it on the support sphere (cells cut by the sphere are half covered).
    pub fn weight(&self, r: f64) -> f64 {
        let theta = self.coverage(r);
        if theta == 0.0 {
            0.0
        } else {
            theta * self.profile(r.min(self.support))
        }
    }

    fn coverage(&self, r: f64) -> f64 {
        let tol = SPHERE_TOL * self.support;
        if r > self.support + tol {
            0.0
        } else if r >= self.support - tol {
            0.5
        } else {
            1.0
        }
    }

    /// Nonzero offsets `o ∈ Z^d` with `|o|h ≤ R₀`, weighted by [`Kernel::weight`].
    pub fn stencil(&self, h: f64) -> Result<Stencil> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("stencil spacing must be positive, got {h}")));
        }
        let reach = (self.support * (1.0 + SPHERE_TOL) / h).floor() as i64;
        if reach < 1 {
            return Err(Error::DegenerateStencil { range: self.support, spacing: h });
        }
        let span = |a: usize| if a < self.dim { -reach..=reach } else { 0..=0 };
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut coverage = Vec::new();
        for i in span(0) {
            for j in span(1) {
                for k in span(2) {
                    if (i, j, k) == (0, 0, 0) {
                        continue;
                    }
                    let r = h * ((i * i + j * j + k * k) as f64).sqrt();
                    let w = self.weight(r);
                    if w > 0.0 {
                        offsets.push([i, j, k]);
                        weights.push(w);
                        coverage.push(self.coverage(r));
                    }
                }
            }
        }
        if offsets.is_empty() {
            return Err(Error::DegenerateStencil { range: self.support, spacing: h });
        }
        Ok(Stencil { dim: self.dim, offsets, weights, coverage, reach })
    }

    /// `∫ a(ξ)(1 + |ξ|^p) dξ`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        check_p(p)?;
        self.quadrature(|x| 1.0 + norm(x).powf(p))
    }

    /// `∫ a(ξ)|ξ₁|^p dξ`.
    pub fn directional_moment(&self, p: f64) -> Result<f64> {
        self.directional_moment_axis(p, 0)
    }

    pub fn directional_moment_axis(&self, p: f64, axis: usize) -> Result<f64> {
        check_p(p)?;
        if axis >= self.dim {
            return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
        }
        self.quadrature(|x| x[axis].abs().powf(p))
    }

    /// `∫ a(ξ)|Ξ·ξ|^p dξ`.
    pub fn linear_moment(&self, p: f64, xi: &[f64]) -> Result<f64> {
        check_p(p)?;
        if xi.len() != self.dim {
            return Err(Error::InvalidArgument(format!("Ξ must have {} components", self.dim)));
        }
        self.quadrature(|x| x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>().abs().powf(p))
    }

    /// Midpoint rule over `[-R₀, R₀]^d`, doubling the cell count per axis until
    /// two consecutive values differ by less than `1e-3` relative.
    fn quadrature(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<f64> {
        let max_m = match self.dim {
            1 => 1 << 20,
            2 => 1 << 12,
            _ => 1 << 9,
        };
        let mut m = 32;
        let mut prev = self.midpoint(m, &f)?;
        loop {
            m *= 2;
            let next = self.midpoint(m, &f)?;
            let scale = next.abs().max(prev.abs());
            if (next - prev).abs() <= 1e-3 * scale || scale == 0.0 || m >= max_m {
                return Ok(next);
            }
            prev = next;
        }
    }

    /// Midpoint sum with `m` cells per axis (`m` even). Integrands are even in
    /// each coordinate, so the sum runs over the positive orthant only.
    pub fn midpoint(&self, m: usize, f: &(impl Fn(&[f64]) -> f64 + Sync)) -> Result<f64> {
        let d = self.dim;
        let half = m / 2;
        let step = 2.0 * self.support / m as f64;
        let coord = |i: usize| (i as f64 + 0.5) * step;
        let rows = if d == 1 { 1 } else { half };
        let inner = if d == 3 { half } else { 1 };
        let total = crate::par::sum_indexed(rows * inner, |r| {
            let (j, k) = (r / inner, r % inner);
            let mut acc = 0.0;
            let mut x = [0.0; MAX_DIM];
            if d >= 2 {
                x[1] = coord(j);
            }
            if d == 3 {
                x[2] = coord(k);
            }
            for i in 0..half {
                x[0] = coord(i);
                let a = self.eval(&x[..d]);
                if a > 0.0 {
                    acc += a * f(&x[..d]);
                }
            }
            acc
        });
        let value = total * step.powi(d as i32) * (1 << d) as f64;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite("kernel quadrature".into()))
        }
    }

    /// `min a(ξ)` over `samples` points per axis of the ball `|ξ| ≤ r₀`.
    pub fn c2_witness(&self, samples: usize) -> f64 {
        let mut lo = f64::INFINITY;
        for s in 0..=samples {
            let r = self.r0 * s as f64 / samples.max(1) as f64;
            lo = lo.min(self.profile(r));
        }
        lo
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn gaussian_profile(dim: usize, sigma: f64, r: f64) -> f64 {
    let s2 = sigma * sigma;
    (2.0 * std::f64::consts::PI * s2).powf(-(dim as f64) / 2.0) * (-r * r / (2.0 * s2)).exp()
}

fn table_profile(radii: &[f64], values: &[f64], r: f64) -> f64 {
    if r > *radii.last().unwrap() {
        return 0.0;
    }
    let j = radii.partition_point(|&x| x <= r).clamp(1, radii.len() - 1);
    let (r0, r1) = (radii[j - 1], radii[j]);
    let s = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
    values[j - 1] + s * (values[j] - values[j - 1])
}

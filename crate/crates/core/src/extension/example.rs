use super::{range_stencil, ratio, smoothstep};
use crate::energy::{pair_sum, pow_abs, GridField, PairStencil};
use crate::geometry::{BoxGrid, BoxRegion};
use crate::{Error, Result};

/// Numerator, denominator and quotient of an energy ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioParts {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

impl RatioParts {
    fn new(numerator: f64, denominator: f64) -> Self {
        Self { numerator, denominator, ratio: ratio(numerator, denominator) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleReport {
    /// Ratio with the target set equal to the whole slab.
    pub unmargined: RatioParts,
    /// Ratio on the slab shrunk by `margin`.
    pub margined: RatioParts,
    pub t: f64,
    pub r: f64,
    pub margin: f64,
}

/// The unit disk `B` against the slab `ω = {-1 < x < 2, 1 - x ≤ y ≤ 2 - x}`,
/// with `u = 1` on `B \ ω` and `u = 0` on `B ∩ ω`, extended out of `B` by the
/// radial mirror `r ↦ 2 - r` blended over a collar of width `t`.
///
/// Compares `∬_{ω'² ∩ D_R}|Φu(x) − Φu(y)|^p` with `∬_{(B∩ω)² ∩ D_R}|u(x) − u(y)|^p`
/// for `ω' = ω` and for `ω'` the points of `ω` farther than `2t + 2h` from `∂ω`,
/// where every mirror image of a collar point stays in `ω`. `R = t/2`.
pub fn slab_counterexample(n: usize, t: f64, p: f64) -> Result<CounterexampleReport> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 8, got {n}")));
    }
    if !(t > 0.0 && t < 0.15) {
        return Err(Error::InvalidArgument(format!("collar width must lie in (0, 0.15), got {t}")));
    }
    let h = 1.0 / n as f64;
    let grid = BoxGrid::new(BoxRegion::new(vec![-1.0, -1.0], vec![3.0, 4.0])?, h)?;
    let in_ball = |x: &[f64]| x[0] * x[0] + x[1] * x[1] < 1.0;
    // signed distance to the slab, negative inside
    let slab_depth = |x: &[f64]| {
        let s = x[0] + x[1];
        let across = ((1.0 - s).max(s - 2.0)) / std::f64::consts::SQRT_2;
        across.max(-1.0 - x[0]).max(x[0] - 2.0)
    };
    let in_slab = |x: &[f64]| slab_depth(x) <= 0.0;
    let u = |x: &[f64]| if in_slab(x) { 0.0 } else { 1.0 };

    let d = 2;
    let slab: Vec<bool> = (0..grid.len()).map(|i| in_slab(&grid.center(i)[..d])).collect();
    let ball_slab: Vec<bool> = (0..grid.len()).map(|i| slab[i] && in_ball(&grid.center(i)[..d])).collect();
    let count = ball_slab.iter().filter(|&&b| b).count();
    if count == 0 {
        return Err(Error::EmptyRegion("B ∩ ω has no grid node".into()));
    }
    // u vanishes on B ∩ ω, so its mean does too
    let mean = 0.0;
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.center(i);
            let x = &x[..d];
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 1.0 {
                u(x)
            } else if r - 1.0 < t {
                let phi = 1.0 - smoothstep((r - 1.0) / t);
                let s = (2.0 - r) / r;
                phi * u(&[x[0] * s, x[1] * s]) + (1.0 - phi) * mean
            } else {
                mean
            }
        })
        .collect();
    let ext = GridField::new(grid.clone(), values, vec![true; grid.len()])?;

    let r = 0.5 * t;
    let st = range_stencil(d, r, h)?;
    let ps = PairStencil::new(&grid, &st);
    let w = ext.values();
    let energy = |ok: &[bool]| {
        pair_sum(&grid, &ps, |i| ok[i], |i| ok[i], |x, k, y| st.weights[k] * pow_abs(w[x] - w[y], p), false).total
    };
    let denominator = energy(&ball_slab);

    let margin = 2.0 * t + 2.0 * h;
    let inner: Vec<bool> = (0..grid.len()).map(|i| slab_depth(&grid.center(i)[..d]) < -margin).collect();
    if !inner.iter().any(|&b| b) {
        return Err(Error::EmptyRegion("the margined slab has no grid node".into()));
    }
    Ok(CounterexampleReport {
        unmargined: RatioParts::new(energy(&slab), denominator),
        margined: RatioParts::new(energy(&inner), denominator),
        t,
        r,
        margin,
    })
}

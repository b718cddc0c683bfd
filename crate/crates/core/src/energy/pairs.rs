use crate::geometry::{BoxGrid, MAX_DIM};

use crate::kernel::Stencil;

const CHUNK: usize = 4096;

/// Stencil offsets translated to linear index steps on one grid.
pub(crate) struct PairStencil<'s> {
    pub stencil: &'s Stencil,
    lin: Vec<isize>,
}

impl<'s> PairStencil<'s> {
    pub fn new(grid: &BoxGrid, stencil: &'s Stencil) -> Self {
        let dims = grid.shape().dims();
        let d = dims.len();
        let mut stride = [0isize; MAX_DIM];
        let mut s = 1isize;
        for a in (0..d).rev() {
            stride[a] = s;
            s *= dims[a] as isize;
        }
        let lin = stencil
            .offsets
            .iter()
            .map(|o| (0..d).map(|a| o[a] as isize * stride[a]).sum())
            .collect();
        Self { stencil, lin }
    }
}

pub(crate) struct PairSum {
    pub total: f64,
    pub pairs: u64,
    pub partials: Option<Vec<f64>>,
}

/// Sums `f(x, o, y)` over nodes `x` with `x_ok(x)` and stencil offsets `o`
/// with `y = x + o` inside the grid and `y_ok(y)`. Per-node sums are
/// accumulated in offset order, chunks of nodes are reduced in index order.
pub(crate) fn pair_sum(
    grid: &BoxGrid,
    ps: &PairStencil<'_>,
    x_ok: impl Fn(usize) -> bool + Sync + Send,
    y_ok: impl Fn(usize) -> bool + Sync + Send,
    f: impl Fn(usize, usize, usize) -> f64 + Sync + Send,
    keep_partials: bool,
) -> PairSum {
    let shape = grid.shape();
    let dims = shape.dims();
    let d = dims.len();
    let reach = ps.stencil.reach;
    let n = grid.len();
    let chunks = n.div_ceil(CHUNK);
    let row_len = dims[d - 1];
    let r = reach.max(0) as usize;
    let per_chunk = crate::par::map_indexed(chunks, |ch| {
        let lo = ch * CHUNK;
        let hi = (lo + CHUNK).min(n);
        // per-node sums of the chunk, each accumulated in offset order
        let mut node = vec![0.0; hi - lo];
        let mut ok = vec![false; hi - lo];
        let mut pairs = 0u64;
        for x in lo..hi {
            ok[x - lo] = x_ok(x);
        }
        let mut seg = lo;
        while seg < hi {
            let c0 = shape.coords(seg);
            let seg_end = (seg - c0[d - 1] + row_len).min(hi);
            let inner_row = (0..d - 1).all(|a| c0[a] as i64 >= reach && c0[a] as i64 + reach < dims[a] as i64);
            let row_start = seg - c0[d - 1];
            // nodes whose whole stencil stays in the grid
            let (fast_lo, fast_hi) = if inner_row && row_len > 2 * r {
                ((row_start + r).max(seg), (row_start + row_len - r).min(seg_end))
            } else {
                (seg, seg)
            };
            let (fast_lo, fast_hi) = if fast_lo < fast_hi { (fast_lo, fast_hi) } else { (seg, seg) };
            for (k, &step) in ps.lin.iter().enumerate() {
                for x in fast_lo..fast_hi {
                    if !ok[x - lo] {
                        continue;
                    }
                    let y = (x as isize + step) as usize;
                    if y_ok(y) {
                        node[x - lo] += f(x, k, y);
                        pairs += 1;
                    }
                }
            }
            for x in (seg..fast_lo).chain(fast_hi..seg_end) {
                if !ok[x - lo] {
                    continue;
                }
                let mut c = c0;
                c[d - 1] = x - row_start;
                for (k, o) in ps.stencil.offsets.iter().enumerate() {
                    let inside = (0..d).all(|a| {
                        let v = c[a] as i64 + o[a];
                        v >= 0 && v < dims[a] as i64
                    });
                    if !inside {
                        continue;
                    }
                    let y = (x as isize + ps.lin[k]) as usize;
                    if y_ok(y) {
                        node[x - lo] += f(x, k, y);
                        pairs += 1;
                    }
                }
            }
            seg = seg_end;
        }
        let total = crate::par::ordered_sum(&node);
        (total, pairs, keep_partials.then_some(node))
    });
    let totals: Vec<f64> = per_chunk.iter().map(|c| c.0).collect();
    let pairs = per_chunk.iter().map(|c| c.1).sum();
    let partials = keep_partials.then(|| per_chunk.into_iter().flat_map(|c| c.2.unwrap()).collect());
    PairSum { total: crate::par::ordered_sum(&totals), pairs, partials }
}

#[inline]
pub(crate) fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        x.abs().powf(p)
    }
}

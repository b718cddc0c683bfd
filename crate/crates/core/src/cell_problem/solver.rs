use crate::{Error, Result};

const CHUNK: usize = 2048;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::par::sum_indexed(a.len().div_ceil(CHUNK), |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(a.len());
        a[lo..hi].iter().zip(&b[lo..hi]).map(|(x, y)| x * y).sum()
    })
}

pub(crate) fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
}

/// Conjugate gradients for a symmetric positive semidefinite `A`, iterating
/// in the range of `project` (which removes the kernel of `A`). Stops when
/// `‖r‖ ≤ tol ‖b‖`.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    project: impl Fn(&mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = dot(&r, &r).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0 });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence { iterations: it, residual: rr.sqrt() / bnorm });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            // confirm with the true residual
            apply(&x, &mut ap);
            let mut res: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
            project(&mut res);
            let true_res = dot(&res, &res).sqrt() / bnorm;
            if true_res <= tol {
                project(&mut x);
                return Ok(CgOutcome { x, iterations: it });
            }
            r = res;
            p.clone_from(&r);
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: rr.sqrt() / bnorm })
}

pub(crate) struct DescentOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Sup-norm of the gradient divided by `scale`.
    pub grad_norm: f64,
}

/// Gradient descent with Barzilai–Borwein trial steps and Armijo
/// backtracking. Stops when `‖∇f‖_∞ / scale ≤ tol`, or when the objective
/// decreased by less than `1e-12` relative over the last 10 iterations.
pub(crate) fn descend(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64], &mut [f64]),
    project: impl Fn(&mut [f64]),
    x0: Vec<f64>,
    scale: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DescentOutcome> {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    grad(&x, &mut g);
    project(&mut g);
    let mut fx = f(&x);
    let mut gnorm = sup_norm(&g) / scale;
    if n == 0 || gnorm <= tol {
        return Ok(DescentOutcome { x, iterations: 0, grad_norm: gnorm });
    }
    let mut alpha = 1e-2 / sup_norm(&g);
    let mut history = vec![fx];
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for it in 1..=max_iter {
        let gg = dot(&g, &g);
        let mut step = alpha;
        let mut accepted = false;
        for _ in 0..80 {
            for i in 0..n {
                trial[i] = x[i] - step * g[i];
            }
            let ft = f(&trial);
            if ft <= fx - 1e-4 * step * gg {
                accepted = true;
                fx = ft;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no representable decrease left along the gradient
            return Ok(DescentOutcome { x, iterations: it, grad_norm: gnorm });
        }
        grad(&trial, &mut g_new);
        project(&mut g_new);
        // Barzilai–Borwein step from s = -step g, y = g_new - g
        let mut sy = 0.0;
        let mut ss = 0.0;
        for i in 0..n {
            let s = -step * g[i];
            sy += s * (g_new[i] - g[i]);
            ss += s * s;
        }
        alpha = if sy > 0.0 { ss / sy } else { 2.0 * step };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        gnorm = sup_norm(&g) / scale;
        if gnorm <= tol {
            return Ok(DescentOutcome { x, iterations: it, grad_norm: gnorm });
        }
        history.push(fx);
        if history.len() > 10 {
            let old = history[history.len() - 11];
            if (old - fx).abs() <= 1e-12 * old.abs().max(f64::MIN_POSITIVE) {
                return Ok(DescentOutcome { x, iterations: it, grad_norm: gnorm });
            }
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: gnorm })
}

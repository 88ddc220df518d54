//! Entropic OT in the log domain with epsilon scaling.

use crate::error::{LabError, Result};
use crate::finitedist::{ensure_same, CostMatrix, FiniteDistribution};
use crate::num::{ordered_sum, Real};

/// Marginal violation at which the final epsilon level stops.
pub const SINKHORN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct SinkhornOutcome<T> {
    /// Transport cost of the entropic plan (entropy term excluded).
    pub value: T,
    pub marginal_violation: T,
    pub iterations: usize,
}

/// Entropic OT value `<P_eps, C>`.
pub fn wasserstein_sinkhorn<T: Real>(
    p: &FiniteDistribution<T>,
    q: &FiniteDistribution<T>,
    cost: &CostMatrix<T>,
    epsilon: T,
    max_iter: usize,
) -> Result<T> {
    sinkhorn(p, q, cost, epsilon, max_iter).map(|o| o.value)
}

fn log_sum_exp<T: Real>(xs: impl Iterator<Item = T> + Clone) -> T {
    let m = xs.clone().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + ordered_sum(xs.map(|x| (x - m).exp())).ln()
}

/// Sinkhorn iterations at the final level between Newton polishing attempts.
const NEWTON_EVERY: usize = 100;

/// Newton ascent on the entropic dual
/// `sum a f + sum b g - eps sum exp((f_i + g_j - c_ij) / eps)`
/// with the last column potential pinned. Sinkhorn alone crawls when the
/// kernel is nearly diagonal; a few Newton steps finish the job. Steps that
/// fail to increase the dual are discarded, so this never makes things worse.
fn newton_polish<T: Real>(f: &mut [T], g: &mut [T], a: &[T], b: &[T], c: &[T], eps: T) {
    let (m, n) = (f.len(), g.len());
    if n == 0 || m == 0 {
        return;
    }
    let eps = eps.as_f64();
    let mut fx: Vec<f64> = f.iter().map(|v| v.as_f64()).collect();
    let mut gx: Vec<f64> = g.iter().map(|v| v.as_f64()).collect();
    let av: Vec<f64> = a.iter().map(|v| v.as_f64()).collect();
    let bv: Vec<f64> = b.iter().map(|v| v.as_f64()).collect();
    let cv: Vec<f64> = c.iter().map(|v| v.as_f64()).collect();
    let plan = |fx: &[f64], gx: &[f64]| -> Vec<f64> {
        (0..m * n).map(|k| ((fx[k / n] + gx[k % n] - cv[k]) / eps).exp()).collect()
    };
    let dual = |fx: &[f64], gx: &[f64], pl: &[f64]| -> f64 {
        let lin: f64 = fx.iter().zip(&av).map(|(x, y)| x * y).sum::<f64>() + gx.iter().zip(&bv).map(|(x, y)| x * y).sum::<f64>();
        lin - eps * pl.iter().sum::<f64>()
    };
    let dim = m + n - 1;
    for _ in 0..30 {
        let pl = plan(&fx, &gx);
        let cur = dual(&fx, &gx, &pl);
        let mut grad = vec![0.0; dim];
        let mut h = nalgebra::DMatrix::<f64>::zeros(dim, dim);
        for i in 0..m {
            let r: f64 = pl[i * n..(i + 1) * n].iter().sum();
            grad[i] = av[i] - r;
            h[(i, i)] = r;
        }
        for j in 0..n - 1 {
            let s: f64 = (0..m).map(|i| pl[i * n + j]).sum();
            grad[m + j] = bv[j] - s;
            h[(m + j, m + j)] = s;
            for i in 0..m {
                h[(i, m + j)] = pl[i * n + j];
                h[(m + j, i)] = pl[i * n + j];
            }
        }
        let last_col: f64 = (0..m).map(|i| pl[i * n + n - 1]).sum();
        let gnorm = grad.iter().map(|v| v.abs()).sum::<f64>() + (bv[n - 1] - last_col).abs();
        if gnorm < 1e-15 {
            break;
        }
        let rhs = nalgebra::DVector::from_iterator(dim, grad.iter().map(|v| v * eps));
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match h.lu().solve(&rhs) {
                Some(s) => s,
                None => return,
            },
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let nf: Vec<f64> = (0..m).map(|i| fx[i] + t * step[i]).collect();
            let ng: Vec<f64> = (0..n).map(|j| if j < n - 1 { gx[j] + t * step[m + j] } else { gx[j] }).collect();
            let np = plan(&nf, &ng);
            let val = dual(&nf, &ng, &np);
            if val.is_finite() && val > cur {
                fx = nf;
                gx = ng;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    for (d, v) in f.iter_mut().zip(&fx) {
        *d = T::of(*v);
    }
    for (d, v) in g.iter_mut().zip(&gx) {
        *d = T::of(*v);
    }
}

pub fn sinkhorn<T: Real>(
    p: &FiniteDistribution<T>,
    q: &FiniteDistribution<T>,
    cost: &CostMatrix<T>,
    epsilon: T,
    max_iter: usize,
) -> Result<SinkhornOutcome<T>> {
    ensure_same(p.space(), cost.rows(), "p vs cost rows")?;
    ensure_same(q.space(), cost.cols(), "q vs cost cols")?;
    if !(epsilon > T::zero()) {
        return Err(LabError::InvalidParams("epsilon: must be positive".into()));
    }
    let rows = p.support();
    let cols = q.support();
    let (m, n) = (rows.len(), cols.len());
    let c: Vec<T> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j)))
        .collect();
    let log_a: Vec<T> = rows.iter().map(|&i| p.prob(i).ln()).collect();
    let log_b: Vec<T> = cols.iter().map(|&j| q.prob(j).ln()).collect();
    let a: Vec<T> = rows.iter().map(|&i| p.prob(i)).collect();

    let cmax = c.iter().copied().fold(T::zero(), T::max);
    let mut f = vec![T::zero(); m];
    let mut g = vec![T::zero(); n];
    let mut eps = cmax.max(epsilon);
    let half = T::of(0.5);
    let final_tol = T::of(SINKHORN_TOL).max(T::normalization_tol());
    let b: Vec<T> = cols.iter().map(|&j| q.prob(j)).collect();
    let mut iterations = 0;
    let mut violation;
    loop {
        let last = eps <= epsilon;
        let tol = if last { final_tol } else { T::of(1e-3) };
        let mut level_iters = 0;
        loop {
            for i in 0..m {
                let row = &c[i * n..(i + 1) * n];
                f[i] = eps * log_a[i] - eps * log_sum_exp(row.iter().zip(&g).map(|(&cij, &gj)| (gj - cij) / eps));
            }
            for j in 0..n {
                g[j] = eps * log_b[j] - eps * log_sum_exp((0..m).map(|i| (f[i] - c[i * n + j]) / eps));
            }
            iterations += 1;
            level_iters += 1;
            if last && level_iters % NEWTON_EVERY == 0 {
                newton_polish(&mut f, &mut g, &a, &b, &c, eps);
            }
            violation = ordered_sum((0..m).map(|i| {
                let mass = ordered_sum((0..n).map(|j| ((f[i] + g[j] - c[i * n + j]) / eps).exp()));
                (mass - a[i]).abs()
            }));
            if !violation.is_finite() {
                return Err(LabError::NonConvergence {
                    violation: f64::INFINITY,
                    iterations,
                });
            }
            if violation < tol || iterations >= max_iter {
                break;
            }
        }
        if iterations >= max_iter && violation >= tol {
            return Err(LabError::NonConvergence {
                violation: violation.as_f64(),
                iterations,
            });
        }
        if last {
            break;
        }
        eps = (eps * half).max(epsilon);
    }
    let value = ordered_sum((0..m).flat_map(|i| {
        let (f, g, c) = (&f, &g, &c);
        (0..n).map(move |j| ((f[i] + g[j] - c[i * n + j]) / eps).exp() * c[i * n + j])
    }));
    Ok(SinkhornOutcome {
        value,
        marginal_violation: violation,
        iterations,
    })
}

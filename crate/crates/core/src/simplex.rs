//! Probability-simplex geometry: Euclidean projection and entropic mirror
//! descent (exponentiated gradient) over products of simplices.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::num::{ordered_sum, Real};

/// Euclidean projection onto `{p : p >= 0, sum p = 1}` (sort-based).
pub fn project_to_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - T::one()) / T::of_usize(k + 1);
        if uk - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Whether `p` is a probability vector within `tol`.
pub fn in_simplex<T: Real>(p: &[T], tol: T) -> bool {
    p.iter().all(|&x| x >= -tol) && (ordered_sum(p.iter().copied()) - T::one()).abs() <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorConfig {
    pub step_size: f64,
    pub max_iter: usize,
    /// Windows improving the best value by less than this halve the step.
    pub tol: f64,
    /// Iterations per progress check.
    pub window: usize,
    /// Converged once the step has shrunk below `step_size * min_step_ratio`.
    pub min_step_ratio: f64,
    /// Stop as soon as the best value reaches this bound.
    pub target: Option<f64>,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        MirrorConfig {
            step_size: 0.1,
            max_iter: 2000,
            tol: 1e-6,
            window: 50,
            min_step_ratio: 1e-3,
            target: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub best: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends another trace, renumbering its iterations after this one's.
    pub fn extend(&mut self, other: &Trace) {
        let base = self.entries.len();
        self.entries.extend(other.entries.iter().map(|e| TraceEntry {
            iteration: base + e.iteration,
            ..*e
        }));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,value,best,step\n");
        for e in &self.entries {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", e.iteration, e.value, e.best, e.step));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MirrorResult<T> {
    /// Best iterate seen.
    pub point: Vec<T>,
    pub value: T,
    pub trace: Trace,
    pub converged: bool,
}

/// One exponentiated-gradient step applied blockwise.
pub fn mirror_step<T: Real>(x: &mut [T], grad: &[T], widths: &[usize], step: T) {
    let floor = T::min_positive_value().sqrt();
    let mut off = 0;
    for &w in widths {
        let xb = &mut x[off..off + w];
        let gb = &grad[off..off + w];
        let gmin = gb.iter().copied().fold(T::infinity(), T::min);
        for (xi, &gi) in xb.iter_mut().zip(gb) {
            *xi = (*xi * (-step * (gi - gmin)).exp()).max(floor);
        }
        let s = ordered_sum(xb.iter().copied());
        xb.iter_mut().for_each(|xi| *xi /= s);
        off += w;
    }
}

/// Mirror descent on a single simplex.
pub fn optimize_simplex<T, F>(mut objective: F, init: &[T], cfg: &MirrorConfig) -> Result<MirrorResult<T>>
where
    T: Real,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    optimize_blocks(|x, _| Ok(objective(x)), init, &[init.len()], cfg)
}

/// Mirror descent over a product of simplices laid out back to back with the
/// given block widths. The objective also receives the iteration number so
/// callers can alternate between blocks.
pub fn optimize_blocks<T, F>(mut objective: F, init: &[T], widths: &[usize], cfg: &MirrorConfig) -> Result<MirrorResult<T>>
where
    T: Real,
    F: FnMut(&[T], usize) -> Result<(T, Vec<T>)>,
{
    if widths.iter().sum::<usize>() != init.len() {
        return Err(LabError::LengthMismatch {
            expected: widths.iter().sum(),
            got: init.len(),
        });
    }
    let mut off = 0;
    for &w in widths {
        let b = &init[off..off + w];
        if !in_simplex(b, T::normalization_tol()) || b.iter().any(|&v| v <= T::zero()) {
            return Err(LabError::InvalidParams(
                "init: every block must be a strictly positive probability vector".into(),
            ));
        }
        off += w;
    }
    if !(cfg.step_size > 0.0) || cfg.window == 0 {
        return Err(LabError::InvalidParams("step_size/window: must be positive".into()));
    }

    let mut x = init.to_vec();
    let mut best_x = x.clone();
    let mut best = T::infinity();
    let mut checkpoint = T::infinity();
    let step0 = T::of(cfg.step_size);
    let mut step = step0;
    let tol = T::of(cfg.tol);
    let min_step = step0 * T::of(cfg.min_step_ratio);
    let mut trace = Trace::default();
    let mut converged = false;

    for it in 0..cfg.max_iter {
        let (v, g) = objective(&x, it)?;
        if !v.is_finite() || g.iter().any(|gi| !gi.is_finite()) {
            return Err(LabError::NonFinite { iteration: it });
        }
        if g.len() != x.len() {
            return Err(LabError::LengthMismatch {
                expected: x.len(),
                got: g.len(),
            });
        }
        if v < best {
            best = v;
            best_x.clone_from(&x);
        }
        trace.entries.push(TraceEntry {
            iteration: it,
            value: v.as_f64(),
            best: best.as_f64(),
            step: step.as_f64(),
        });
        if cfg.target.is_some_and(|t| best.as_f64() <= t) {
            converged = true;
            break;
        }
        if (it + 1) % cfg.window == 0 {
            let improvement = checkpoint - best;
            checkpoint = best;
            // A stalled window may mean the step is too long to settle, so
            // shrink it and resume from the best point; once even tiny steps
            // stall the run has converged.
            if improvement < tol {
                step *= T::of(0.5);
                if step < min_step {
                    converged = true;
                    break;
                }
                x.clone_from(&best_x);
                continue;
            }
        }
        mirror_step(&mut x, &g, widths, step);
    }
    Ok(MirrorResult {
        point: best_x,
        value: best,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex::<f64>(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_to_simplex::<f64>(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_to_simplex::<f64>(&[0.4, 0.4, 0.4]);
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = project_to_simplex::<f64>(&[-1.0, 0.3, 0.9]);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 0.2).abs() < 1e-15 && (p[2] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn linear_objective_reaches_min_coordinate() {
        let c = [0.7, 0.2, 0.9, 0.4];
        let r = optimize_simplex(
            |p: &[f64]| (p.iter().zip(&c).map(|(a, b)| a * b).sum(), c.to_vec()),
            &[0.25; 4],
            &MirrorConfig {
                step_size: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r.value - 0.2).abs() < 1e-6, "{}", r.value);
        assert!(r.point[1] > 0.999);
    }

    #[test]
    fn best_value_is_monotone() {
        let c = [3.0, 1.0, 2.0];
        let r = optimize_simplex(
            |p: &[f64]| {
                let v: f64 = p.iter().zip(&c).map(|(a, b)| (a - b / 6.0).abs()).sum();
                let g = p.iter().zip(&c).map(|(a, b)| (a - b / 6.0).signum()).collect();
                (v, g)
            },
            &[1.0 / 3.0; 3],
            &MirrorConfig::default(),
        )
        .unwrap();
        for w in r.trace.entries.windows(2) {
            assert!(w[1].best <= w[0].best);
        }
        assert!(r.value < 1e-3);
    }

    #[test]
    fn rejects_boundary_init_and_nan() {
        let cfg = MirrorConfig::default();
        assert!(optimize_simplex(|_: &[f64]| (0.0, vec![0.0, 0.0]), &[1.0, 0.0], &cfg).is_err());
        assert!(matches!(
            optimize_simplex(|_: &[f64]| (f64::NAN, vec![0.0, 0.0]), &[0.5, 0.5], &cfg),
            Err(LabError::NonFinite { iteration: 0 })
        ));
    }
}

//! Exact optimal transport by the network simplex method on the bipartite
//! transportation graph. Dual potentials fall out of the spanning-tree basis.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::finitedist::{ensure_same, CostMatrix, FiniteDistribution};
use crate::num::{ordered_sum, Real};

/// Optimal plan, value and Kantorovich potentials.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct TransportResult<T = f64> {
    pub value: T,
    #[serde(serialize_with = "serialize_plan")]
    pub plan: Plan<T>,
    pub potential_p: Vec<T>,
    pub potential_q: Vec<T>,
    pub duality_gap: T,
    #[serde(skip)]
    pub pivots: usize,
}

/// Dense row-major transport plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<T> {
    pub rows: usize,
    pub cols: usize,
    pub mass: Vec<T>,
}

impl<T: Real> Plan<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.mass[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.mass.chunks(self.cols).map(|r| ordered_sum(r.iter().copied())).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.cols];
        for r in self.mass.chunks(self.cols) {
            for (j, &m) in r.iter().enumerate() {
                s[j] += m;
            }
        }
        s
    }
}

fn serialize_plan<T: Real + Serialize, S: serde::Serializer>(plan: &Plan<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<&[T]> = plan.mass.chunks(plan.cols).collect();
    rows.serialize(s)
}

impl<T: Real> TransportResult<T> {
    /// 1-Lipschitz witness `f(i) = min_j cost(i, j) - potential_q[j]`, for a
    /// metric cost on a single space. `E_p f - E_q f` equals the transport
    /// value.
    pub fn lipschitz_witness(&self, cost: &CostMatrix<T>) -> Vec<T> {
        (0..cost.n_rows())
            .map(|i| {
                (0..cost.n_cols())
                    .map(|j| cost.get(i, j) - self.potential_q[j])
                    .fold(T::infinity(), T::min)
            })
            .collect()
    }
}

/// Exact W1 (or general OT value) between `p` and `q` under `cost`.
pub fn wasserstein_exact<T: Real>(
    p: &FiniteDistribution<T>,
    q: &FiniteDistribution<T>,
    cost: &CostMatrix<T>,
) -> Result<TransportResult<T>> {
    ensure_same(p.space(), cost.rows(), "p vs cost rows")?;
    ensure_same(q.space(), cost.cols(), "q vs cost cols")?;
    let (np, nq) = (p.len(), q.len());

    // Zero-mass atoms are solved without and patched back in afterwards.
    let rows = p.support();
    let cols = q.support();
    let a: Vec<T> = rows.iter().map(|&i| p.prob(i)).collect();
    let b: Vec<T> = cols.iter().map(|&j| q.prob(j)).collect();
    let local: Vec<T> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j)))
        .collect();
    let sol = NetworkSimplex::new(&a, &b, &local).solve()?;

    let mut mass = vec![T::zero(); np * nq];
    for (k, &(r, s)) in sol.cells.iter().enumerate() {
        mass[rows[r] * nq + cols[s]] += sol.flow[k];
    }

    let mut u = vec![T::infinity(); np];
    let mut v = vec![T::infinity(); nq];
    for (r, &i) in rows.iter().enumerate() {
        u[i] = sol.u[r];
    }
    for (s, &j) in cols.iter().enumerate() {
        v[j] = sol.v[s];
    }
    for j in 0..nq {
        if q.prob(j) <= T::zero() {
            v[j] = rows
                .iter()
                .map(|&i| cost.get(i, j) - u[i])
                .fold(T::infinity(), T::min);
        }
    }
    for i in 0..np {
        if p.prob(i) <= T::zero() {
            u[i] = (0..nq).map(|j| cost.get(i, j) - v[j]).fold(T::infinity(), T::min);
        }
    }
    let shift = u[0];
    u.iter_mut().for_each(|x| *x -= shift);
    v.iter_mut().for_each(|x| *x += shift);

    let value = ordered_sum(mass.iter().zip(cost.as_slice()).map(|(&m, &c)| m * c));
    let dual = ordered_sum(u.iter().zip(p.probs()).map(|(&x, &w)| x * w))
        + ordered_sum(v.iter().zip(q.probs()).map(|(&x, &w)| x * w));
    Ok(TransportResult {
        value,
        plan: Plan {
            rows: np,
            cols: nq,
            mass,
        },
        potential_p: u,
        potential_q: v,
        duality_gap: value - dual,
        pivots: sol.pivots,
    })
}

struct Basis<T> {
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    u: Vec<T>,
    v: Vec<T>,
    pivots: usize,
}

struct NetworkSimplex<'a, T> {
    m: usize,
    n: usize,
    cost: &'a [T],
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
    u: Vec<T>,
    v: Vec<T>,
}

/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 64;

impl<'a, T: Real> NetworkSimplex<'a, T> {
    /// North-west corner start: a spanning tree of exactly `m + n - 1` cells.
    fn new(a: &[T], b: &[T], cost: &'a [T]) -> Self {
        let (m, n) = (a.len(), b.len());
        let mut s = a.to_vec();
        let mut d = b.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = if i == m - 1 && j == n - 1 {
                // Absorbs the rounding difference between the two totals.
                s[i].max(d[j])
            } else {
                s[i].min(d[j])
            };
            cells.push((i, j));
            flow.push(x);
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && s[i] <= T::zero()) {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut row_adj = vec![Vec::new(); m];
        let mut col_adj = vec![Vec::new(); n];
        for (k, &(r, c)) in cells.iter().enumerate() {
            row_adj[r].push(k);
            col_adj[c].push(k);
        }
        NetworkSimplex {
            m,
            n,
            cost,
            cells,
            flow,
            row_adj,
            col_adj,
            u: vec![T::zero(); m],
            v: vec![T::zero(); n],
        }
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> T {
        self.cost[i * self.n + j]
    }

    fn compute_potentials(&mut self) {
        let mut seen_row = vec![false; self.m];
        let mut seen_col = vec![false; self.n];
        // Nodes: rows are 0..m, columns m..m+n.
        let mut stack = vec![0usize];
        seen_row[0] = true;
        self.u[0] = T::zero();
        while let Some(node) = stack.pop() {
            if node < self.m {
                let i = node;
                for &k in &self.row_adj[i] {
                    let j = self.cells[k].1;
                    if !seen_col[j] {
                        seen_col[j] = true;
                        self.v[j] = self.c(i, j) - self.u[i];
                        stack.push(self.m + j);
                    }
                }
            } else {
                let j = node - self.m;
                for &k in &self.col_adj[j] {
                    let i = self.cells[k].0;
                    if !seen_row[i] {
                        seen_row[i] = true;
                        self.u[i] = self.c(i, j) - self.v[j];
                        stack.push(i);
                    }
                }
            }
        }
    }

    fn entering(&self, tol: T, bland: bool) -> Option<(usize, usize)> {
        let mut best = -tol;
        let mut arg = None;
        for i in 0..self.m {
            let ui = self.u[i];
            let row = &self.cost[i * self.n..(i + 1) * self.n];
            for (j, &cij) in row.iter().enumerate() {
                let rc = cij - ui - self.v[j];
                if rc < best {
                    if bland {
                        return Some((i, j));
                    }
                    best = rc;
                    arg = Some((i, j));
                }
            }
        }
        arg
    }

    /// Tree path from column `j` back to row `i`, as basis cell ids.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut parent: Vec<Option<usize>> = vec![None; total];
        let mut seen = vec![false; total];
        let mut stack = vec![i];
        seen[i] = true;
        let target = self.m + j;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            let adj = if node < self.m {
                &self.row_adj[node]
            } else {
                &self.col_adj[node - self.m]
            };
            for &k in adj {
                let (r, c) = self.cells[k];
                let next = if node < self.m { self.m + c } else { r };
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some(k);
                    stack.push(next);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = target;
        while node != i {
            let k = parent[node].expect("basis is a spanning tree");
            out.push(k);
            let (r, c) = self.cells[k];
            node = if node == self.m + c { r } else { self.m + c };
        }
        out
    }

    fn solve(mut self) -> Result<Basis<T>> {
        let cmax = self.cost.iter().copied().fold(T::one(), T::max);
        let tol = T::epsilon() * T::of(256.0) * cmax;
        let max_pivots = 50 * (self.m + self.n) * (self.m + self.n) + 1000;
        let mut pivots = 0;
        let mut streak = 0;
        loop {
            self.compute_potentials();
            let Some((ei, ej)) = self.entering(tol, streak >= DEGENERATE_STREAK) else {
                break;
            };
            if pivots >= max_pivots {
                return Err(LabError::SolverFailure(format!(
                    "no optimal basis after {pivots} pivots"
                )));
            }
            let path = self.path(ei, ej);
            // Cells alternate -, +, -, ... starting next to the entering column.
            let mut leave = usize::MAX;
            let mut theta = T::infinity();
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let f = self.flow[k];
                    let better = f < theta
                        || (f == theta && {
                            let (r, c) = self.cells[k];
                            let (lr, lc) = self.cells[leave];
                            (r, c) < (lr, lc)
                        });
                    if better {
                        theta = f;
                        leave = k;
                    }
                }
            }
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    self.flow[k] -= theta;
                } else {
                    self.flow[k] += theta;
                }
            }
            let (lr, lc) = self.cells[leave];
            self.row_adj[lr].retain(|&k| k != leave);
            self.col_adj[lc].retain(|&k| k != leave);
            self.cells[leave] = (ei, ej);
            self.flow[leave] = theta;
            self.row_adj[ei].push(leave);
            self.col_adj[ej].push(leave);
            pivots += 1;
            streak = if theta > T::zero() { 0 } else { streak + 1 };
        }
        Ok(Basis {
            cells: self.cells,
            flow: self.flow,
            u: self.u,
            v: self.v,
            pivots,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::finitedist::{ground_metric, tv_distance, MetricKind, SymbolSpace};

    fn sp(n: usize) -> Arc<SymbolSpace> {
        Arc::new(SymbolSpace::range(n).unwrap())
    }

    #[test]
    fn identical_laws_cost_nothing() {
        let s = sp(3);
        let p = FiniteDistribution::<f64>::new(s.clone(), vec![0.2, 0.5, 0.3]).unwrap();
        let r = wasserstein_exact(&p, &p, &ground_metric(&s, MetricKind::L1)).unwrap();
        assert_eq!(r.value, 0.0);
        for i in 0..3 {
            assert!((r.plan.get(i, i) - p.prob(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn half_mass_across_unit_distance() {
        let s = sp(2);
        let p = FiniteDistribution::<f64>::new(s.clone(), vec![0.5, 0.5]).unwrap();
        let q = FiniteDistribution::<f64>::new(s.clone(), vec![0.0, 1.0]).unwrap();
        let r = wasserstein_exact(&p, &q, &ground_metric(&s, MetricKind::L1)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert_eq!(r.potential_p[0], 0.0);
        assert!(r.duality_gap.abs() < 1e-15);
    }

    #[test]
    fn discrete_cost_matches_tv() {
        let s = sp(4);
        let p = FiniteDistribution::<f64>::new(s.clone(), vec![0.1, 0.4, 0.0, 0.5]).unwrap();
        let q = FiniteDistribution::<f64>::new(s.clone(), vec![0.3, 0.3, 0.3, 0.1]).unwrap();
        let r = wasserstein_exact(&p, &q, &ground_metric(&s, MetricKind::Discrete)).unwrap();
        assert!((r.value - tv_distance(&p, &q).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn potentials_feasible_on_dropped_atoms() {
        let s = Arc::new(SymbolSpace::scalars(&[0, 1, 3, 7]).unwrap());
        let c = ground_metric(&s, MetricKind::L1);
        let p = FiniteDistribution::<f64>::new(s.clone(), vec![0.0, 0.6, 0.4, 0.0]).unwrap();
        let q = FiniteDistribution::<f64>::new(s.clone(), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let r = wasserstein_exact(&p, &q, &c).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(r.potential_p[i] + r.potential_q[j] <= c.get(i, j) + 1e-12);
            }
        }
        // 0.5 from 1 to 0, 0.1 from 1 to 7, 0.4 from 3 to 7.
        assert!((r.value - (0.5 + 0.6 + 1.6)).abs() < 1e-12);
        let f = r.lipschitz_witness(&c);
        let lhs: f64 = (0..4).map(|i| f[i] * (p.prob(i) - q.prob(i))).sum();
        assert!((lhs - r.value).abs() < 1e-12);
    }

    #[test]
    fn single_precision() {
        let s = sp(3);
        let p = FiniteDistribution::<f32>::new(s.clone(), vec![1.0, 0.0, 1.0]).unwrap();
        let q = FiniteDistribution::<f32>::new(s.clone(), vec![0.0, 1.0, 0.0]).unwrap();
        let r = wasserstein_exact(&p, &q, &ground_metric(&s, MetricKind::L1)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }
}

//! Optimizers behind the four tasks. All objectives are evaluated exactly and
//! subgradients of the W1 terms come from the transport potentials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TaskConfig;
use crate::compose::{random_weights, CompositionMap, CompositionSpec, DecompositionMap, StochasticComposition};
use crate::error::Result;
use crate::finitedist::{ground_metric, product, FiniteDistribution, MetricKind, SpaceRef};
use crate::identify::ResolvingMatrix;
use crate::simplex::{optimize_blocks, optimize_simplex, Trace};
use crate::transport::{wasserstein_exact, TransportResult};

pub(crate) struct Learned<T> {
    pub result: T,
    pub trace: Trace,
    pub converged: bool,
}

fn law(space: &SpaceRef, probs: Vec<f64>) -> Result<FiniteDistribution> {
    FiniteDistribution::new(space.clone(), probs)
}

fn w1_with(p: &FiniteDistribution, q: &FiniteDistribution, metric: MetricKind) -> Result<TransportResult> {
    wasserstein_exact(p, q, &ground_metric(p.space(), metric))
}

fn flat_rows(d: &DecompositionMap) -> Vec<f64> {
    (0..d.z_space().len()).flat_map(|z| d.row(z)).collect()
}

/// Scales each row of `g` by `1 / w(row)` where the weight is positive.
fn precondition(g: &mut [f64], width: usize, w: impl Fn(usize) -> f64) {
    for (r, row) in g.chunks_mut(width).enumerate() {
        let wr = w(r);
        if wr > 0.0 {
            row.iter_mut().for_each(|v| *v /= wr);
        }
    }
}

/// Slack within which a rounded (deterministic) map is preferred over the
/// stochastic iterate it came from.
const ROUNDING_SLACK: f64 = 1e-12;

/// Pairwise component costs `K[j][j0] = cost_x(x, x0) + cost_y(y, y0)`.
fn pair_costs(x: &SpaceRef, y: &SpaceRef, metric: MetricKind) -> Vec<f64> {
    let (cx, cy) = (ground_metric::<f64>(x, metric), ground_metric::<f64>(y, metric));
    let ny = y.len();
    let np = x.len() * ny;
    let mut k = vec![0.0; np * np];
    for j in 0..np {
        for j0 in 0..np {
            k[j * np + j0] = cx.get(j / ny, j0 / ny) + cy.get(j % ny, j0 % ny);
        }
    }
    k
}

/// Task 1: the decomposition rows, with everything else fixed.
///
/// Every term is linear in the rows except `l_d`, which is convex, so mirror
/// descent applies directly. Each row's gradient is divided by that
/// composite's mass so rare composites move as fast as common ones. The
/// argmax rounding of the best iterate is kept when it scores no worse.
pub(crate) fn learn_decomposition(
    spec: &CompositionSpec,
    p_x: &FiniteDistribution,
    p_y: &FiniteDistribution,
    p_z: &FiniteDistribution,
    cfg: &TaskConfig,
) -> Result<Learned<DecompositionMap>> {
    let metric = cfg.metric_kind;
    let joint = product(p_x, p_y);
    let (nz, np) = (spec.z_space().len(), spec.n_pairs());
    let k = pair_costs(spec.x_space(), spec.y_space(), metric);
    let cz = ground_metric::<f64>(spec.z_space(), metric);
    let l_c = w1_with(p_z, &CompositionMap::Exact(spec.clone()).push(&joint)?, metric)?.value;

    // Linear coefficients of both cycle terms in the rows.
    let mut lin = vec![0.0; nz * np];
    for j0 in 0..np {
        let w = joint.prob(j0);
        if w == 0.0 {
            continue;
        }
        let z = spec.apply_joint(j0);
        for j in 0..np {
            lin[z * np + j] += w * k[j * np + j0];
        }
    }
    for z in 0..nz {
        let pz = p_z.prob(z);
        for j in 0..np {
            lin[z * np + j] += pz * cz.get(spec.apply_joint(j), z);
        }
    }

    let alpha = cfg.alpha;
    let evaluate = |rows: &[f64], want_grad: bool| -> Result<(f64, Vec<f64>)> {
        let mut q = vec![0.0; np];
        for z in 0..nz {
            let pz = p_z.prob(z);
            if pz != 0.0 {
                for j in 0..np {
                    q[j] += pz * rows[z * np + j];
                }
            }
        }
        let ot = w1_with(&joint, &law(joint.space(), q)?, metric)?;
        let cyc: f64 = rows.iter().zip(&lin).map(|(a, b)| a * b).sum();
        let value = l_c + ot.value + alpha * cyc;
        if !want_grad {
            return Ok((value, Vec::new()));
        }
        let mut g = vec![0.0; nz * np];
        for z in 0..nz {
            let pz = p_z.prob(z);
            for j in 0..np {
                g[z * np + j] = pz * ot.potential_q[j] + alpha * lin[z * np + j];
            }
        }
        precondition(&mut g, np, |z| p_z.prob(z));
        Ok((value, g))
    };

    let init = vec![1.0 / np as f64; nz * np];
    let res = optimize_blocks(|x, _| evaluate(x, true), &init, &vec![np; nz], &cfg.mirror())?;
    let soft = DecompositionMap::stochastic(spec.z_space().clone(), spec.x_space().clone(), spec.y_space().clone(), res.point)?;
    let hard = soft.rounded();
    let hard_value = evaluate(&flat_rows(&hard), false)?.0;
    let (d, value) = if hard_value <= res.value + ROUNDING_SLACK { (hard, hard_value) } else { (soft, res.value) };
    Ok(Learned {
        result: d,
        trace: res.trace,
        converged: res.converged || value - l_c <= cfg.tol,
    })
}

/// Task 2: a stochastic composition and a decomposition together.
///
/// The blocks are updated alternately (composition on even iterations,
/// decomposition on odd ones); the cycle terms couple them bilinearly, so
/// the result depends on the seeded starting point.
pub(crate) fn learn_composition_and_decomposition(
    x_space: &SpaceRef,
    y_space: &SpaceRef,
    p_x: &FiniteDistribution,
    p_y: &FiniteDistribution,
    p_z: &FiniteDistribution,
    cfg: &TaskConfig,
) -> Result<Learned<(CompositionMap, DecompositionMap)>> {
    let metric = cfg.metric_kind;
    let z_space = p_z.space();
    let joint = product(p_x, p_y);
    let (nz, np) = (z_space.len(), joint.len());
    let k = pair_costs(x_space, y_space, metric);
    let cz = ground_metric::<f64>(z_space, metric);
    let alpha = cfg.alpha;
    let split = np * nz;

    let evaluate = |v: &[f64], block: Option<usize>| -> Result<(f64, Vec<f64>)> {
        let (c, d) = v.split_at(split);
        // Composite law generated by the candidate composition.
        let mut gen = vec![0.0; nz];
        for j0 in 0..np {
            let w = joint.prob(j0);
            for z in 0..nz {
                gen[z] += w * c[j0 * nz + z];
            }
        }
        let oc = w1_with(p_z, &law(z_space, gen)?, metric)?;
        let mut dec = vec![0.0; np];
        for z in 0..nz {
            for j in 0..np {
                dec[j] += p_z.prob(z) * d[z * np + j];
            }
        }
        let od = w1_with(&joint, &law(joint.space(), dec)?, metric)?;
        // dk[z][j0] = sum_j D[z][j] K[j][j0]
        let mut dk = vec![0.0; nz * np];
        for z in 0..nz {
            for j in 0..np {
                let w = d[z * np + j];
                if w != 0.0 {
                    for j0 in 0..np {
                        dk[z * np + j0] += w * k[j * np + j0];
                    }
                }
            }
        }
        // cc[j][z] = sum_z' C[j][z'] cost_z(z', z)
        let mut cc = vec![0.0; np * nz];
        for j in 0..np {
            for z2 in 0..nz {
                let w = c[j * nz + z2];
                if w != 0.0 {
                    for z in 0..nz {
                        cc[j * nz + z] += w * cz.get(z2, z);
                    }
                }
            }
        }
        let mut c_cyc = 0.0;
        for j0 in 0..np {
            let w = joint.prob(j0);
            for z in 0..nz {
                c_cyc += w * c[j0 * nz + z] * dk[z * np + j0];
            }
        }
        let mut d_cyc = 0.0;
        for z in 0..nz {
            let pz = p_z.prob(z);
            for j in 0..np {
                d_cyc += pz * d[z * np + j] * cc[j * nz + z];
            }
        }
        let value = oc.value + od.value + alpha * (c_cyc + d_cyc);
        let mut g = vec![0.0; v.len()];
        match block {
            Some(0) => {
                let gc = &mut g[..split];
                for j0 in 0..np {
                    let w = joint.prob(j0);
                    for z in 0..nz {
                        let mut back = 0.0;
                        for z2 in 0..nz {
                            back += p_z.prob(z2) * d[z2 * np + j0] * cz.get(z, z2);
                        }
                        gc[j0 * nz + z] = w * oc.potential_q[z] + alpha * (w * dk[z * np + j0] + back);
                    }
                }
                precondition(gc, nz, |j0| joint.prob(j0));
            }
            Some(_) => {
                let gd = &mut g[split..];
                for z in 0..nz {
                    let pz = p_z.prob(z);
                    for j in 0..np {
                        let mut fwd = 0.0;
                        for j0 in 0..np {
                            fwd += joint.prob(j0) * c[j0 * nz + z] * k[j * np + j0];
                        }
                        gd[z * np + j] = pz * od.potential_q[j] + alpha * (fwd + pz * cc[j * nz + z]);
                    }
                }
                precondition(gd, np, |z| p_z.prob(z));
            }
            None => {}
        }
        Ok((value, g))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = Vec::with_capacity(2 * split);
    for _ in 0..np {
        let w = random_weights(&mut rng, nz);
        let s: f64 = w.iter().sum();
        init.extend(w.iter().map(|v| v / s));
    }
    for _ in 0..nz {
        let w = random_weights(&mut rng, np);
        let s: f64 = w.iter().sum();
        init.extend(w.iter().map(|v| v / s));
    }
    let mut widths = vec![nz; np];
    widths.extend(std::iter::repeat_n(np, nz));
    let res = optimize_blocks(|v, it| evaluate(v, Some(it % 2)), &init, &widths, &cfg.mirror())?;

    let (c_rows, d_rows) = res.point.split_at(split);
    let soft_c = StochasticComposition::new(x_space.clone(), y_space.clone(), z_space.clone(), c_rows.to_vec())?;
    let soft_d = DecompositionMap::stochastic(z_space.clone(), x_space.clone(), y_space.clone(), d_rows.to_vec())?;
    let hard_c = soft_c.rounded()?;
    let hard_d = soft_d.rounded();
    let mut hard = StochasticComposition::from_spec(&hard_c).rows().to_vec();
    hard.extend(flat_rows(&hard_d));
    let hard_value = evaluate(&hard, None)?.0;
    let (result, value) = if hard_value <= res.value + ROUNDING_SLACK {
        ((CompositionMap::Exact(hard_c), hard_d), hard_value)
    } else {
        ((CompositionMap::Stochastic(soft_c), soft_d), res.value)
    };
    Ok(Learned {
        result,
        trace: res.trace,
        converged: res.converged || value <= cfg.tol,
    })
}

/// Task 3 by mirror descent: minimise `W1(p_z, R p)` over the simplex.
pub(crate) fn learn_component(r: &ResolvingMatrix, p_z: &FiniteDistribution, cfg: &TaskConfig) -> Result<Learned<FiniteDistribution>> {
    let metric = cfg.metric_kind;
    let mut failure = None;
    let init = vec![1.0 / r.n_cols as f64; r.n_cols];
    let res = optimize_simplex(
        |p: &[f64]| match law(r.z_space(), r.apply(p)).and_then(|q| w1_with(p_z, &q, metric)) {
            Ok(ot) => (ot.value, r.apply_transpose(&ot.potential_q)),
            Err(e) => {
                failure.get_or_insert(e);
                (f64::NAN, vec![0.0; p.len()])
            }
        },
        &init,
        &cfg.mirror(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let res = res?;
    Ok(Learned {
        result: law(r.y_space(), res.point)?,
        converged: res.converged || res.value <= cfg.tol,
        trace: res.trace,
    })
}

/// Task 4: both component laws, with the composition fixed. Only `l_c`
/// depends on them; the decomposition is fitted afterwards.
pub(crate) fn learn_components(
    spec: &CompositionSpec,
    p_z: &FiniteDistribution,
    cfg: &TaskConfig,
) -> Result<Learned<(FiniteDistribution, FiniteDistribution)>> {
    let metric = cfg.metric_kind;
    let (nx, ny) = (spec.x_space().len(), spec.y_space().len());
    let map = CompositionMap::Exact(spec.clone());
    let objective = |v: &[f64], _: usize| -> Result<(f64, Vec<f64>)> {
        let (px, py) = v.split_at(nx);
        let joint = product(&law(spec.x_space(), px.to_vec())?, &law(spec.y_space(), py.to_vec())?);
        let ot = w1_with(p_z, &map.push(&joint)?, metric)?;
        let mut g = vec![0.0; nx + ny];
        for x in 0..nx {
            for y in 0..ny {
                let v = ot.potential_q[spec.apply(x, y)];
                g[x] += py[y] * v;
                g[nx + y] += px[x] * v;
            }
        }
        Ok((ot.value, g))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = Vec::with_capacity(nx + ny);
    for n in [nx, ny] {
        let w = random_weights(&mut rng, n);
        let s: f64 = w.iter().sum();
        init.extend(w.iter().map(|v| v / s));
    }
    let res = optimize_blocks(objective, &init, &[nx, ny], &cfg.mirror())?;
    let (px, py) = res.point.split_at(nx);
    Ok(Learned {
        result: (law(spec.x_space(), px.to_vec())?, law(spec.y_space(), py.to_vec())?),
        converged: res.converged || res.value <= cfg.tol,
        trace: res.trace,
    })
}

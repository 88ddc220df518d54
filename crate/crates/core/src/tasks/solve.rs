use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{SolverKind, TaskConfig};
use super::learn::{learn_component, learn_components, learn_composition_and_decomposition, learn_decomposition};
use super::solution::{total_loss, Fragment, LossBreakdown, Solution};
use crate::compose::{invert_composition, CompositionMap, Component, Scenario, SCHEMA_VERSION};
use crate::error::{LabError, Result};
use crate::finitedist::{tv_distance, FiniteDistribution, MetricKind};
use crate::identify::{
    phase_flip_counterexample, recover_component_closed_form, resolving_matrix, trivial_solution_counterexample,
    IdentifiabilityReport, ResolvingMatrix, TrivialReport,
};
use crate::simplex::Trace;

/// One component law as learned, next to the truth when it is known.
#[derive(Debug, Clone, Serialize)]
pub struct LawComparison {
    pub labels: Vec<String>,
    pub recovered: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub schema: u32,
    pub scenario: String,
    pub task: u8,
    pub solver: SolverKind,
    pub alpha: f64,
    pub metric_kind: MetricKind,
    pub seed: u64,
    pub hidden: Vec<Component>,
    pub losses: LossBreakdown,
    pub iterations: usize,
    pub converged: bool,
    /// TV between each learned law and the truth, keyed `p_x` / `p_y`.
    pub tv_to_truth: BTreeMap<String, f64>,
    pub laws: BTreeMap<String, LawComparison>,
    /// Whether the learned decomposition inverts the composition on every
    /// composite with positive mass (deterministic compositions only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition_is_inverse: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolving_matrix: Option<ResolvingMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trivial_comparison: Option<TrivialReport>,
    pub caveats: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub solution: Solution,
    pub report: TaskReport,
    #[serde(skip)]
    pub trace: Trace,
}

fn law_entry(law: &FiniteDistribution) -> LawComparison {
    LawComparison {
        labels: (0..law.len()).map(|i| law.space().label(i)).collect(),
        recovered: law.probs().to_vec(),
        truth: None,
    }
}

fn hidden_for(cfg: &TaskConfig) -> Vec<Component> {
    match cfg.task_id {
        3 => vec![cfg.hidden.unwrap_or(Component::Y)],
        4 => vec![Component::X, Component::Y],
        _ => Vec::new(),
    }
}

fn check_visibility(view: &Scenario, cfg: &TaskConfig) -> Result<()> {
    let hidden = hidden_for(cfg);
    for c in [Component::X, Component::Y] {
        let present = view.component(c).is_some();
        let must_learn = hidden.contains(&c);
        if present && must_learn {
            return Err(LabError::FragmentVisibilityViolation(format!(
                "task {} learns p_{} but the scenario supplies it",
                cfg.task_id,
                c.as_str()
            )));
        }
        if !present && !must_learn {
            return Err(LabError::MissingFragment(format!("task {} needs p_{}", cfg.task_id, c.as_str())));
        }
    }
    Ok(())
}

fn inverse_on_support(view: &Scenario, sol: &Solution) -> Option<bool> {
    let inv = invert_composition(&view.spec).ok()?;
    let d = sol.decomposition()?;
    if let Some(f) = &sol.composition {
        if !matches!(f.value, CompositionMap::Exact(ref s) if *s == view.spec) {
            return Some(false);
        }
    }
    Some((0..view.p_z.len()).all(|z| view.p_z.prob(z) == 0.0 || d.point_of(z) == inv.point_of(z)))
}

/// Solves one task on a scenario that carries exactly the fragments the task
/// treats as given. The scenario is the only input; hidden fragments are
/// never consulted because they are not there.
pub fn solve_task(view: &Scenario, cfg: &TaskConfig) -> Result<TaskOutcome> {
    cfg.validate()?;
    check_visibility(view, cfg)?;
    let hidden = hidden_for(cfg);
    let mut sol = Solution::default();
    let mut caveats = Vec::new();
    let mut identifiability = None;
    let mut resolving = None;
    let mut trivial = None;
    let mut trace = Trace::default();
    let mut converged = true;

    match cfg.task_id {
        1 => {
            let (p_x, p_y) = (view.p_x.as_ref().unwrap(), view.p_y.as_ref().unwrap());
            let run = learn_decomposition(&view.spec, p_x, p_y, &view.p_z, cfg)?;
            sol.decomposition = Some(Fragment::optimized(run.result));
            trace = run.trace;
            converged = run.converged;
        }
        2 => {
            let (p_x, p_y) = (view.p_x.as_ref().unwrap(), view.p_y.as_ref().unwrap());
            let run = learn_composition_and_decomposition(view.spec.x_space(), view.spec.y_space(), p_x, p_y, &view.p_z, cfg)?;
            let (c, d) = run.result;
            sol.composition = Some(Fragment::optimized(c));
            sol.decomposition = Some(Fragment::optimized(d));
            trace = run.trace;
            converged = run.converged;
            caveats.push(
                "composition and decomposition were learned together; loss-equivalent symmetric solutions \
                 (for example an inverted background) exist, so agreement with the generating process is not guaranteed"
                    .to_string(),
            );
            if let Ok((_, _, flip)) = phase_flip_counterexample(view) {
                caveats.push(format!(
                    "this scenario admits a background-inverting solution with total loss {:.3e}",
                    flip.loss_b.total
                ));
            }
        }
        3 => {
            let h = hidden[0];
            let oriented = match h {
                Component::Y => view.clone(),
                Component::X => view.transposed(),
            };
            let known = oriented.p_x.as_ref().expect("visibility checked");
            let r = resolving_matrix(known, &oriented.spec)?;
            let (rep, rank_ok) = match recover_component_closed_form(&oriented.p_z, &r) {
                Ok(rep) => (rep, true),
                Err(LabError::RankDeficient { report, .. }) => (*report, false),
                Err(e) => return Err(e),
            };
            if !rank_ok {
                caveats.push(format!(
                    "resolving matrix has rank {} < {}; p_{} is not identifiable from the composed data",
                    rep.rank,
                    rep.n_cols,
                    h.as_str()
                ));
            }
            if rep.projected {
                caveats.push("least-squares solution left the simplex and was projected".to_string());
            }
            let learned = match cfg.solver {
                SolverKind::ClosedForm => rep.recovered_p_y.clone().expect("recovery always yields a law"),
                SolverKind::MirrorDescent => {
                    let run = learn_component(&r, &oriented.p_z, cfg)?;
                    trace = run.trace;
                    converged = run.converged;
                    run.result
                }
            };
            let (p_x, p_y) = match h {
                Component::Y => (known.clone(), learned.clone()),
                Component::X => (learned.clone(), known.clone()),
            };
            let run = learn_decomposition(&view.spec, &p_x, &p_y, &view.p_z, cfg)?;
            trace.extend(&run.trace);
            converged &= run.converged;
            let frag = Some(Fragment::optimized(learned));
            match h {
                Component::X => sol.p_x = frag,
                Component::Y => sol.p_y = frag,
            }
            sol.decomposition = Some(Fragment::optimized(run.result));
            identifiability = Some(rep);
            resolving = Some(r);
        }
        4 => {
            let run = learn_components(&view.spec, &view.p_z, cfg)?;
            let (p_x, p_y) = run.result;
            trace = run.trace;
            converged = run.converged;
            let dec = learn_decomposition(&view.spec, &p_x, &p_y, &view.p_z, cfg)?;
            trace.extend(&dec.trace);
            converged &= dec.converged;
            sol.p_x = Some(Fragment::optimized(p_x));
            sol.p_y = Some(Fragment::optimized(p_y));
            sol.decomposition = Some(Fragment::optimized(dec.result));
            caveats.push(
                "task 4 is not identifiable: many component laws reproduce the composed data exactly; \
                 the laws found here are one such solution, not a recovery of the truth"
                    .to_string(),
            );
            match trivial_solution_counterexample(view) {
                Ok((_, rep)) => {
                    caveats.push(format!(
                        "a trivial solution that replays composites as foregrounds reaches l_c = {:.3e}",
                        rep.losses.l_c
                    ));
                    trivial = Some(rep);
                }
                Err(LabError::PreconditionFailed(why)) => {
                    caveats.push(format!("trivial-solution comparison not applicable: {why}"));
                }
                Err(e) => return Err(e),
            }
        }
        _ => unreachable!("validated"),
    }

    let losses = total_loss(view, &sol, cfg)?;
    let mut laws = BTreeMap::new();
    for (key, f) in [("p_x", &sol.p_x), ("p_y", &sol.p_y)] {
        if let Some(f) = f {
            laws.insert(key.to_string(), law_entry(&f.value));
        }
    }
    let report = TaskReport {
        schema: SCHEMA_VERSION,
        scenario: view.name.clone(),
        task: cfg.task_id,
        solver: cfg.solver,
        alpha: cfg.alpha,
        metric_kind: cfg.metric_kind,
        seed: cfg.seed,
        hidden,
        losses,
        iterations: trace.len(),
        converged,
        tv_to_truth: BTreeMap::new(),
        laws,
        decomposition_is_inverse: inverse_on_support(view, &sol),
        identifiability,
        resolving_matrix: resolving,
        trivial_comparison: trivial,
        caveats,
    };
    let outcome = TaskOutcome { solution: sol, report, trace };
    if !converged {
        return Err(LabError::TaskNonConvergence {
            iterations: outcome.report.iterations,
            outcome: Box::new(outcome),
        });
    }
    Ok(outcome)
}

/// Hides what the task must learn, solves, and scores the learned laws
/// against the hidden truth.
pub fn solve_task_with_truth(truth: &Scenario, cfg: &TaskConfig) -> Result<TaskOutcome> {
    cfg.validate()?;
    let mut view = truth.clone();
    for c in hidden_for(cfg) {
        view = view.hide(c)?.0;
    }
    match solve_task(&view, cfg) {
        Ok(mut out) => {
            attach_truth(&mut out, truth)?;
            Ok(out)
        }
        Err(LabError::TaskNonConvergence { iterations, mut outcome }) => {
            attach_truth(&mut outcome, truth)?;
            Err(LabError::TaskNonConvergence { iterations, outcome })
        }
        Err(e) => Err(e),
    }
}

fn attach_truth(out: &mut TaskOutcome, truth: &Scenario) -> Result<()> {
    for (key, c) in [("p_x", Component::X), ("p_y", Component::Y)] {
        let (Some(t), Some(entry)) = (truth.component(c), out.report.laws.get_mut(key)) else {
            continue;
        };
        let learned = match c {
            Component::X => &out.solution.p_x,
            Component::Y => &out.solution.p_y,
        };
        let learned = &learned.as_ref().expect("law entries mirror the solution").value;
        out.report.tv_to_truth.insert(key.to_string(), tv_distance(learned, t)?);
        entry.truth = Some(t.probs().to_vec());
    }
    Ok(())
}

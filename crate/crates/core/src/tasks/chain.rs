//! Sequential recovery: each stage learns one component from its own
//! composed data, using the law the previous stage produced as the known one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{SolverKind, TaskConfig};
use super::solve::solve_task;
use crate::compose::{make_scenario, random_weights, Component, Scenario, ScenarioKind, ScenarioParams, SCHEMA_VERSION};
use crate::error::{LabError, Result};
use crate::finitedist::{tv_distance, FiniteDistribution};
use crate::simplex::Trace;

/// The law a chain starts from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSeed {
    pub name: String,
    pub law: FiniteDistribution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainStage {
    pub name: String,
    /// Composed data for this stage. Its component laws are never read as
    /// inputs; the one being learned is used only to score the result.
    pub scenario: Scenario,
    /// Component this stage learns; the other comes from `input_from`.
    pub learn: Component,
    /// Index of the stage whose output is the known component.
    pub input_from: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub schema: u32,
    pub seed_stage: ChainSeed,
    pub stages: Vec<ChainStage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageResult {
    pub index: usize,
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learned: Option<Component>,
    pub labels: Vec<String>,
    pub recovered: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_to_truth: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub trace: Trace,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub schema: u32,
    pub solver: SolverKind,
    pub stages: Vec<StageResult>,
}

impl ChainReport {
    pub fn max_tv(&self) -> f64 {
        self.stages.iter().filter_map(|s| s.tv_to_truth).fold(0.0, f64::max)
    }
}

/// Runs the stages in order. Stage `k` (the seed is stage 0) must take its
/// known component from stage `k - 1`, over the same symbols.
pub fn chain_learn(spec: &ChainSpec, cfg: &TaskConfig) -> Result<ChainReport> {
    if spec.schema != SCHEMA_VERSION {
        return Err(LabError::StageSchemaMismatch(format!("unsupported schema {}", spec.schema)));
    }
    let seed = &spec.seed_stage;
    let mut outputs: Vec<FiniteDistribution> = vec![seed.law.clone()];
    let mut results = vec![StageResult {
        index: 0,
        name: seed.name.clone(),
        input_from: None,
        learned: None,
        labels: (0..seed.law.len()).map(|i| seed.law.space().label(i)).collect(),
        recovered: seed.law.probs().to_vec(),
        tv_to_truth: None,
        iterations: 0,
        converged: true,
        trace: Trace::default(),
    }];
    for (i, stage) in spec.stages.iter().enumerate() {
        let k = i + 1;
        if stage.input_from != k - 1 {
            return Err(LabError::StageSchemaMismatch(format!(
                "stage {k} ({}) takes input from stage {}, but only stage {} precedes it directly",
                stage.name,
                stage.input_from,
                k - 1
            )));
        }
        let known_role = stage.learn.other();
        let prior = &outputs[k - 1];
        let target = stage.scenario.component_space(known_role);
        if **prior.space() != **target {
            return Err(LabError::StageSchemaMismatch(format!(
                "stage {k} ({}) expects p_{} over {} symbols that differ from stage {}'s output",
                stage.name,
                known_role.as_str(),
                target.len(),
                k - 1
            )));
        }
        let known = FiniteDistribution::from_probs(target.clone(), prior.probs().to_vec())?;
        let mut view = stage.scenario.clone();
        view.p_x = None;
        view.p_y = None;
        match known_role {
            Component::X => view.p_x = Some(known),
            Component::Y => view.p_y = Some(known),
        }
        let stage_cfg = TaskConfig {
            task_id: 3,
            hidden: Some(stage.learn),
            ..*cfg
        };
        let (outcome, converged) = match solve_task(&view, &stage_cfg) {
            Ok(o) => (o, true),
            Err(LabError::TaskNonConvergence { outcome, .. }) => (*outcome, false),
            Err(e) => return Err(e),
        };
        let learned = match stage.learn {
            Component::X => outcome.solution.p_x,
            Component::Y => outcome.solution.p_y,
        }
        .expect("task 3 returns the learned law")
        .value;
        let tv = stage
            .scenario
            .component(stage.learn)
            .map(|t| tv_distance(&learned, t))
            .transpose()?;
        results.push(StageResult {
            index: k,
            name: stage.name.clone(),
            input_from: Some(k - 1),
            learned: Some(stage.learn),
            labels: (0..learned.len()).map(|i| learned.space().label(i)).collect(),
            recovered: learned.probs().to_vec(),
            tv_to_truth: tv,
            iterations: outcome.trace.len(),
            converged,
            trace: outcome.trace,
        });
        outputs.push(learned);
    }
    Ok(ChainReport {
        schema: SCHEMA_VERSION,
        solver: cfg.solver,
        stages: results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFamily {
    /// Two glyph classes over 4x4 backgrounds.
    MicroBb,
    /// Two 3x3 glyph families sharing one background.
    MicroMbCross,
}

impl std::str::FromStr for ChainFamily {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micro_bb" => Ok(ChainFamily::MicroBb),
            "micro_mb_cross" => Ok(ChainFamily::MicroMbCross),
            other => Err(LabError::InvalidParams(format!("family: unknown chain family {other:?}"))),
        }
    }
}

/// A chain of `length` stages (seed included) alternating between learning a
/// background and learning a glyph class. Laws are drawn from `seed`; each
/// background law is shared by the two stages that touch it.
pub fn builtin_chain(family: ChainFamily, length: usize, seed: u64) -> Result<ChainSpec> {
    if length < 2 {
        return Err(LabError::InvalidParams("length: a chain needs at least 2 stages".into()));
    }
    let (kind, classes, n_glyphs) = match family {
        ChainFamily::MicroBb => (ScenarioKind::MicroBb, ["1", "2"], 5),
        ChainFamily::MicroMbCross => (ScenarioKind::MicroMb, ["a", "b"], 5),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class_laws: Vec<(Vec<f64>, Vec<f64>)> = (0..2)
        .map(|_| (random_weights(&mut rng, n_glyphs), random_weights(&mut rng, 4)))
        .collect();
    let n_backgrounds = length / 2 + 1;
    let bg_laws: Vec<Vec<f64>> = (0..n_backgrounds).map(|_| random_weights(&mut rng, 2)).collect();
    let class_of = |k: usize| (k / 2) % 2;
    let scenario = |bg: usize, class: usize| -> Result<Scenario> {
        let params = ScenarioParams {
            glyph_family: Some(classes[class].to_string()),
            background_probs: Some(bg_laws[bg].clone()),
            glyph_probs: Some(class_laws[class].0.clone()),
            quadrant_probs: (kind == ScenarioKind::MicroBb).then(|| class_laws[class].1.clone()),
            ..ScenarioParams::default()
        };
        let mut s = make_scenario(kind, &params, seed)?;
        s.name = format!("{}-bg{bg}-{}", kind.as_str(), classes[class]);
        Ok(s)
    };
    let first = scenario(1, 0)?;
    let seed_stage = ChainSeed {
        name: format!("given class {}", classes[0]),
        law: first.p_y.clone().expect("builtin scenarios carry both laws"),
    };
    let mut stages = Vec::new();
    for k in 1..length {
        let (s, learn) = if k % 2 == 1 {
            (scenario(k.div_ceil(2), class_of(k - 1))?, Component::X)
        } else {
            (scenario(k / 2, class_of(k))?, Component::Y)
        };
        let name = match learn {
            Component::X => format!("background {} from class {}", k.div_ceil(2), classes[class_of(k - 1)]),
            Component::Y => format!("class {} over background {}", classes[class_of(k)], k / 2),
        };
        stages.push(ChainStage {
            name,
            scenario: s,
            learn,
            input_from: k - 1,
        });
    }
    Ok(ChainSpec {
        schema: SCHEMA_VERSION,
        seed_stage,
        stages,
    })
}

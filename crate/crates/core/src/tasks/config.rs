use serde::{Deserialize, Serialize};

use crate::compose::Component;
use crate::error::{LabError, Result};
use crate::finitedist::MetricKind;
use crate::simplex::MirrorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    ClosedForm,
    MirrorDescent,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::ClosedForm => "closed_form",
            SolverKind::MirrorDescent => "mirror_descent",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed_form" => Ok(SolverKind::ClosedForm),
            "mirror_descent" => Ok(SolverKind::MirrorDescent),
            other => Err(LabError::InvalidParams(format!("solver: unknown solver {other:?}"))),
        }
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_metric() -> MetricKind {
    MetricKind::Discrete
}
fn default_solver() -> SolverKind {
    SolverKind::MirrorDescent
}
fn default_step() -> f64 {
    0.1
}
fn default_max_iter() -> usize {
    2000
}
fn default_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task_id: u8,
    /// Weight of the cycle terms.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_metric")]
    pub metric_kind: MetricKind,
    #[serde(default = "default_solver")]
    pub solver: SolverKind,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Task 3 only: which component is learned. Defaults to `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Component>,
}

impl TaskConfig {
    pub fn new(task_id: u8) -> Self {
        TaskConfig {
            task_id,
            alpha: default_alpha(),
            metric_kind: default_metric(),
            solver: default_solver(),
            step_size: default_step(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            seed: 0,
            hidden: None,
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_hidden(mut self, hidden: Component) -> Self {
        self.hidden = Some(hidden);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.task_id) {
            return Err(LabError::InvalidParams(format!("task_id: must be 1..=4, got {}", self.task_id)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(LabError::InvalidParams(format!("alpha: must be >= 0, got {}", self.alpha)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(LabError::InvalidParams(format!("step_size: must be > 0, got {}", self.step_size)));
        }
        if self.max_iter == 0 {
            return Err(LabError::InvalidParams("max_iter: must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(LabError::InvalidParams(format!("tol: must be >= 0, got {}", self.tol)));
        }
        if self.hidden.is_some() && self.task_id != 3 {
            return Err(LabError::InvalidParams("hidden: only meaningful for task 3".into()));
        }
        Ok(())
    }

    pub(crate) fn mirror(&self) -> MirrorConfig {
        MirrorConfig {
            step_size: self.step_size,
            max_iter: self.max_iter,
            tol: self.tol,
            ..MirrorConfig::default()
        }
    }
}

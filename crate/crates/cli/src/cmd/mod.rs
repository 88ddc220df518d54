pub mod chain;
pub mod counterexample;
pub mod gen;
pub mod report;
pub mod solve;
pub mod verify;

use std::path::Path;

use decomp_lab::compose::{make_scenario, Component, Scenario, ScenarioKind, ScenarioParams};
use decomp_lab::tasks::TaskConfig;

use crate::error::{read_json, CliError, CliResult};
use crate::GlobalOpts;

pub fn parse_component(s: &str) -> Result<Component, String> {
    match s {
        "x" => Ok(Component::X),
        "y" => Ok(Component::Y),
        other => Err(format!("unknown component `{other}` (expected x or y)")),
    }
}

pub fn parse_kind(s: &str) -> Result<ScenarioKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown scenario kind `{s}` (expected micro_mb, micro_bb, modadd or custom)"))
}

/// Applies the global overrides to a task configuration and validates it.
pub fn apply_globals(mut cfg: TaskConfig, g: &GlobalOpts) -> CliResult<TaskConfig> {
    if let Some(a) = g.alpha {
        cfg.alpha = a;
    }
    if let Some(m) = g.metric {
        cfg.metric_kind = m;
    }
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A scenario from a file, or the named built-in family with default
/// parameters.
pub fn scenario_or_default(path: Option<&Path>, kind: ScenarioKind, seed: u64) -> CliResult<Scenario> {
    match path {
        Some(p) => read_json(p),
        None => Ok(make_scenario(kind, &ScenarioParams::default(), seed)?),
    }
}

pub fn fmt_loss(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.3e}")
    }
}

pub fn require<T>(v: Option<T>, what: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config(format!("{what}: missing")))
}

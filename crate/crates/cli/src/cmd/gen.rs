use std::path::PathBuf;

use clap::Args;
use decomp_lab::compose::{check_bijective, make_scenario, Scenario, ScenarioKind, ScenarioParams};
use decomp_lab::identify::{column_rank, resolving_matrix, RANK_REL_TOL};
use serde::{Deserialize, Serialize};

use super::parse_kind;
use crate::artifacts::{to_value, Bundle, RunManifest};
use crate::error::{read_json, CliError, CliResult};
use crate::GlobalOpts;

#[derive(Args, Debug)]
pub struct GenArgs {
    /// JSON config: {"kind": ..., "params": {...}, "seed": n}
    pub config: Option<PathBuf>,
    /// Scenario family when no config file is given
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ScenarioKind>,
    /// modadd modulus (shorthand for params.k)
    #[arg(long)]
    pub k: Option<u32>,
    /// Output file name inside the output directory
    #[arg(long, default_value = "scenario.json")]
    pub output: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub struct Summary {
    pub lines: Vec<String>,
}

pub fn summarize(s: &Scenario) -> Summary {
    let spec = &s.spec;
    let mut lines = vec![
        format!("scenario {} (seed {})", s.name, s.seed),
        format!(
            "|X| = {}, |Y| = {}, |Z| = {}",
            spec.x_space().len(),
            spec.y_space().len(),
            spec.z_space().len()
        ),
    ];
    let b = check_bijective(spec);
    lines.push(format!("bijective: {}", b.bijective));
    if let Some(w) = &b.witness {
        lines.push(format!("  witness: {w}"));
    }
    if let Some(px) = &s.p_x {
        if let Ok(r) = resolving_matrix(px, spec) {
            let rank = column_rank(&r, RANK_REL_TOL);
            let status = if rank == r.n_cols { "full column rank" } else { "rank-deficient" };
            lines.push(format!("rank: {rank} ({status})"));
        }
    }
    Summary { lines }
}

pub fn run(g: &GlobalOpts, a: GenArgs) -> CliResult<()> {
    let mut cfg: GenConfig = match (&a.config, a.kind) {
        (Some(p), None) => read_json(p)?,
        (None, Some(kind)) => GenConfig {
            kind,
            params: ScenarioParams::default(),
            seed: None,
        },
        (Some(_), Some(_)) => return Err(CliError::config("kind: give either a config file or --kind, not both")),
        (None, None) => return Err(CliError::config("kind: a config file or --kind is required")),
    };
    if let Some(k) = a.k {
        cfg.params.k = Some(k);
    }
    let seed = g.seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);
    let scenario = make_scenario(cfg.kind, &cfg.params, seed)?;

    let mut bundle = Bundle::default();
    bundle.add_json(a.output.clone(), &scenario)?;
    RunManifest::new("gen", a.config.as_deref(), to_value(&cfg), seed, &g.out_dir).seal(&mut bundle, g.wall_clock)?;
    bundle.write(&g.out_dir)?;

    for line in summarize(&scenario).lines {
        println!("{line}");
    }
    println!("wrote {}", g.out_dir.join(&a.output).display());
    Ok(())
}

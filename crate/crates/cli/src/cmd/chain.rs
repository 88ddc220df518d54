use std::path::PathBuf;

use clap::Args;
use decomp_lab::simplex::TraceEntry;
use decomp_lab::tasks::{builtin_chain, chain_learn, ChainFamily, ChainReport, ChainSpec, SolverKind, TaskConfig};
use serde::Serialize;

use super::apply_globals;
use crate::artifacts::{to_value, Bundle, RunManifest};
use crate::error::{read_json, CliError, CliResult, ExitCode};
use crate::render::{chain_artifacts, chain_summary_csv, ChainFileView};
use crate::GlobalOpts;

#[derive(Args, Debug)]
pub struct ChainArgs {
    /// Chain spec JSON; without it a built-in chain is generated
    pub config: Option<PathBuf>,
    /// Built-in chain family: micro_bb or micro_mb_cross
    #[arg(long, default_value = "micro_bb")]
    pub family: ChainFamily,
    /// Built-in chain length, seed stage included
    #[arg(long, default_value_t = 3)]
    pub length: usize,
    #[arg(long, default_value = "closed_form")]
    pub solver: SolverKind,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Also emit SVG plots
    #[arg(long)]
    pub svg: bool,
}

#[derive(Serialize)]
struct ChainFile<'a> {
    schema: u32,
    kind: &'static str,
    config: &'a TaskConfig,
    report: &'a ChainReport,
    traces: Vec<&'a [TraceEntry]>,
}

pub fn run(g: &GlobalOpts, a: ChainArgs) -> CliResult<()> {
    let mut cfg = TaskConfig::new(3).with_solver(a.solver);
    if let Some(s) = a.step_size {
        cfg.step_size = s;
    }
    if let Some(m) = a.max_iter {
        cfg.max_iter = m;
    }
    let cfg = apply_globals(cfg, g)?;
    let (spec, builtin) = match &a.config {
        Some(p) => (read_json::<ChainSpec>(p)?, false),
        None => (builtin_chain(a.family, a.length, cfg.seed)?, true),
    };
    let report = chain_learn(&spec, &cfg)?;

    let file = ChainFile {
        schema: decomp_lab::compose::SCHEMA_VERSION,
        kind: "chain",
        config: &cfg,
        report: &report,
        traces: report.stages.iter().map(|s| s.trace.entries.as_slice()).collect(),
    };
    let mut bundle = Bundle::default();
    if builtin {
        bundle.add_json("chain_spec.json", &spec)?;
    }
    bundle.add_json("chain.report.json", &file)?;
    let view: ChainFileView = serde_json::from_value(to_value(&file))
        .map_err(|e| CliError::new(ExitCode::Internal, format!("report view: {e}")))?;
    if a.svg {
        chain_artifacts(&view, "chain", &mut bundle);
    } else {
        bundle.add("chain.summary.csv", chain_summary_csv(&view.report));
    }
    let config = serde_json::json!({
        "task": to_value(&cfg),
        "family": a.config.is_none().then(|| to_value(&a.family)),
        "length": a.config.is_none().then_some(a.length),
    });
    RunManifest::new("chain", a.config.as_deref(), config, cfg.seed, &g.out_dir).seal(&mut bundle, g.wall_clock)?;
    bundle.write(&g.out_dir)?;

    println!("{:>5}  {:>7}  {:>11}  {:>10}  {:>9}  name", "stage", "learned", "tv_to_truth", "iterations", "converged");
    for s in &report.stages {
        println!(
            "{:>5}  {:>7}  {:>11}  {:>10}  {:>9}  {}",
            s.index,
            s.learned.map_or("-", |c| c.as_str()),
            s.tv_to_truth.map_or("-".to_string(), |t| format!("{t:.3e}")),
            s.iterations,
            s.converged,
            s.name
        );
    }
    println!("max tv_to_truth {:.3e}; wrote {} files to {}", report.max_tv(), bundle.len(), g.out_dir.display());
    let stalled: Vec<usize> = report.stages.iter().filter(|s| !s.converged).map(|s| s.index).collect();
    if !stalled.is_empty() {
        return Err(CliError::new(
            ExitCode::NonConvergence,
            format!("stages {stalled:?} did not converge (report written)"),
        ));
    }
    Ok(())
}

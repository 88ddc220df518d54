use std::path::PathBuf;

use clap::Args;
use decomp_lab::compose::{Component, Scenario};
use decomp_lab::simplex::TraceEntry;
use decomp_lab::tasks::{solve_task, solve_task_with_truth, Solution, SolverKind, TaskConfig, TaskOutcome, TaskReport};
use decomp_lab::LabError;
use serde::Serialize;

use super::{apply_globals, fmt_loss, parse_component};
use crate::artifacts::{to_value, Bundle, RunManifest};
use crate::error::{read_json, CliError, CliResult, ExitCode};
use crate::render::{task_svgs, trace_csv, TaskFileView};
use crate::GlobalOpts;

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Scenario JSON written by `gen`
    pub scenario: PathBuf,
    /// Task config JSON (task_id, alpha, solver, ...)
    pub config: Option<PathBuf>,
    /// Task number when no config file is given
    #[arg(long)]
    pub task: Option<u8>,
    #[arg(long)]
    pub solver: Option<SolverKind>,
    /// Task 3: component to learn
    #[arg(long, value_parser = parse_component)]
    pub hidden: Option<Component>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Treat the scenario as exactly what the solver may see. Without this,
    /// fragments the task learns are withheld and used only for scoring.
    #[arg(long)]
    pub view: bool,
    /// Also emit SVG plots
    #[arg(long)]
    pub svg: bool,
    /// Prefix for output files (default: task<N>)
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Serialize)]
pub struct TaskFile<'a> {
    pub schema: u32,
    pub kind: &'static str,
    pub config: &'a TaskConfig,
    pub report: &'a TaskReport,
    pub solution: &'a Solution,
    pub trace: &'a [TraceEntry],
}

pub fn resolve_config(g: &GlobalOpts, a: &SolveArgs) -> CliResult<TaskConfig> {
    let mut cfg = match (&a.config, a.task) {
        (Some(p), None) => read_json::<TaskConfig>(p)?,
        (None, Some(t)) => TaskConfig::new(t),
        (Some(_), Some(_)) => return Err(CliError::config("task_id: give either a config file or --task, not both")),
        (None, None) => return Err(CliError::config("task_id: a config file or --task is required")),
    };
    if let Some(s) = a.solver {
        cfg.solver = s;
    }
    if a.hidden.is_some() {
        cfg.hidden = a.hidden;
    }
    if let Some(s) = a.step_size {
        cfg.step_size = s;
    }
    if let Some(m) = a.max_iter {
        cfg.max_iter = m;
    }
    apply_globals(cfg, g)
}

fn learned_components(cfg: &TaskConfig) -> Vec<Component> {
    match cfg.task_id {
        3 => vec![cfg.hidden.unwrap_or(Component::Y)],
        4 => vec![Component::X, Component::Y],
        _ => Vec::new(),
    }
}

pub fn run(g: &GlobalOpts, a: SolveArgs) -> CliResult<()> {
    let cfg = resolve_config(g, &a)?;
    let scenario: Scenario = read_json(&a.scenario)?;
    let learned = learned_components(&cfg);
    let with_truth = !a.view && !learned.is_empty() && learned.iter().all(|&c| scenario.component(c).is_some());
    let result = if with_truth {
        solve_task_with_truth(&scenario, &cfg)
    } else {
        solve_task(&scenario, &cfg)
    };
    let (outcome, converged): (TaskOutcome, bool) = match result {
        Ok(o) => (o, true),
        Err(LabError::TaskNonConvergence { outcome, .. }) => (*outcome, false),
        Err(e) => return Err(e.into()),
    };

    let prefix = a.name.clone().unwrap_or_else(|| format!("task{}", cfg.task_id));
    let file = TaskFile {
        schema: decomp_lab::compose::SCHEMA_VERSION,
        kind: "task",
        config: &cfg,
        report: &outcome.report,
        solution: &outcome.solution,
        trace: &outcome.trace.entries,
    };
    let mut bundle = Bundle::default();
    bundle.add_json(format!("{prefix}.report.json"), &file)?;
    let view: TaskFileView = serde_json::from_value(to_value(&file))
        .map_err(|e| CliError::new(ExitCode::Internal, format!("report view: {e}")))?;
    bundle.add(format!("{prefix}.trace.csv"), trace_csv(&view.trace));
    if a.svg {
        task_svgs(&view, &prefix, true, &mut bundle);
    }
    RunManifest::new("solve", a.config.as_deref(), to_value(&cfg), cfg.seed, &g.out_dir).seal(&mut bundle, g.wall_clock)?;
    bundle.write(&g.out_dir)?;

    let r = &outcome.report;
    let l = &r.losses;
    println!(
        "task {} on {} ({}): total_loss {} (l_c {}, l_d {}, c_cyc {}, d_cyc {}, alpha {})",
        r.task,
        r.scenario,
        r.solver.as_str(),
        fmt_loss(l.total),
        fmt_loss(l.l_c),
        fmt_loss(l.l_d),
        fmt_loss(l.c_cyc),
        fmt_loss(l.d_cyc),
        l.alpha
    );
    println!("iterations: {}, converged: {converged}", r.iterations);
    for (k, v) in &r.tv_to_truth {
        println!("tv_to_truth {k} = {v:.3e}");
    }
    if let Some(inv) = r.decomposition_is_inverse {
        println!("decomposition is the exact inverse on support: {inv}");
    }
    for c in &r.caveats {
        println!("caveat: {c}");
    }
    println!("wrote {} files to {}", bundle.len(), g.out_dir.display());
    if !converged {
        return Err(CliError::new(
            ExitCode::NonConvergence,
            format!("task {} did not converge in {} iterations (report written)", r.task, r.iterations),
        ));
    }
    Ok(())
}

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::Value;

use crate::artifacts::{Bundle, RunManifest};
use crate::error::{CliError, CliResult};
use crate::render::{chain_artifacts, table_csv, task_svgs, task_tables, ChainFileView, Header, TabularFileView, TaskFileView};
use crate::GlobalOpts;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON files written by solve, chain, verify or counterexample
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

fn prefix_of(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    stem.strip_suffix(".report").unwrap_or(stem).to_string()
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, v: Value) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::config(format!("{}: schema mismatch: {e}", path.display())))
}

fn render_one(path: &Path, bundle: &mut Bundle) -> CliResult<()> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let h: Header = parse(path, v.clone())?;
    if h.schema != decomp_lab::compose::SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "{}: schema mismatch: version {} is not supported",
            path.display(),
            h.schema
        )));
    }
    let prefix = prefix_of(path);
    match h.kind.as_str() {
        "task" => {
            let f: TaskFileView = parse(path, v)?;
            let with_decomposition = f.report.laws.is_empty();
            task_svgs(&f, &prefix, with_decomposition, bundle);
            task_tables(&f, &prefix, bundle);
        }
        "chain" => {
            let f: ChainFileView = parse(path, v)?;
            chain_artifacts(&f, &prefix, bundle);
        }
        "verify" | "counterexample" => {
            let f: TabularFileView = parse(path, v)?;
            bundle.add(format!("{prefix}.table.csv"), table_csv(&f.table));
        }
        other => {
            return Err(CliError::config(format!("{}: schema mismatch: unknown report kind {other:?}", path.display())));
        }
    }
    Ok(())
}

pub fn run(g: &GlobalOpts, a: ReportArgs) -> CliResult<()> {
    let mut bundle = Bundle::default();
    for f in &a.files {
        render_one(f, &mut bundle)?;
    }
    let config = serde_json::json!({
        "files": a.files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let n = bundle.len();
    let names: Vec<String> = bundle.names().map(str::to_string).collect();
    RunManifest::new("report", None, config, g.seed.unwrap_or(0), &g.out_dir).seal(&mut bundle, g.wall_clock)?;
    bundle.write(&g.out_dir)?;
    for name in names {
        println!("{}", g.out_dir.join(name).display());
    }
    println!("rendered {n} artifacts from {} report(s)", a.files.len());
    Ok(())
}

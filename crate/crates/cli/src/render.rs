//! Plots and CSV tables derived from report files. `solve --svg` and the
//! `report` command both go through here, so the two produce the same bytes.

use std::collections::BTreeMap;

use decomp_lab::compose::DecompositionMap;
use decomp_lab::simplex::TraceEntry;
use serde::Deserialize;

use crate::artifacts::Bundle;
use crate::svg;

#[derive(Debug, Deserialize)]
pub struct Header {
    pub schema: u32,
    pub kind: String,
}

#[derive(Debug, Deserialize)]
pub struct LossView {
    pub l_c: f64,
    pub l_d: f64,
    pub c_cyc: f64,
    pub d_cyc: f64,
    pub alpha: f64,
    pub total: f64,
}

#[derive(Debug, Deserialize)]
pub struct LawView {
    pub labels: Vec<String>,
    pub recovered: Vec<f64>,
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
pub struct MatrixView {
    pub entries: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
pub struct TaskReportView {
    pub scenario: String,
    pub task: u8,
    pub losses: LossView,
    pub laws: BTreeMap<String, LawView>,
    #[serde(default)]
    pub resolving_matrix: Option<MatrixView>,
}

#[derive(Debug, Deserialize)]
pub struct DecompositionView {
    pub value: DecompositionMap,
}

#[derive(Debug, Deserialize)]
pub struct SolutionView {
    #[serde(default)]
    pub decomposition: Option<DecompositionView>,
}

#[derive(Debug, Deserialize)]
pub struct TaskFileView {
    pub report: TaskReportView,
    pub solution: SolutionView,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Deserialize)]
pub struct StageView {
    pub index: usize,
    pub name: String,
    #[serde(default)]
    pub learned: Option<String>,
    pub labels: Vec<String>,
    pub recovered: Vec<f64>,
    #[serde(default)]
    pub tv_to_truth: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Deserialize)]
pub struct ChainReportView {
    pub stages: Vec<StageView>,
}

#[derive(Debug, Deserialize)]
pub struct ChainFileView {
    pub report: ChainReportView,
    pub traces: Vec<Vec<TraceEntry>>,
}

/// Rows of a generic table carried by verify and counterexample files.
#[derive(Debug, Deserialize)]
pub struct TableView {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

#[derive(Debug, Deserialize)]
pub struct TabularFileView {
    pub table: TableView,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv(columns: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    csv(
        &["iteration", "value", "best", "step"],
        trace
            .iter()
            .map(|e| vec![e.iteration.to_string(), num(e.value), num(e.best), num(e.step)]),
    )
}

pub fn trace_svg(title: &str, trace: &[TraceEntry]) -> String {
    let pts = |f: fn(&TraceEntry) -> f64| trace.iter().map(|e| (e.iteration as f64, f(e))).collect();
    svg::line_plot(title, "iteration", &[("value", pts(|e| e.value)), ("best", pts(|e| e.best))])
}

pub fn decomposition_svg(title: &str, d: &DecompositionMap) -> String {
    let rows: Vec<Vec<f64>> = (0..d.z_space().len()).map(|z| d.row(z)).collect();
    svg::heatmap(title, &rows, "composite z", "pair (x, y)")
}

/// SVGs in fixed order: trace (when non-empty), laws, resolving matrix, and
/// the decomposition map when `with_decomposition` is set.
pub fn task_svgs(f: &TaskFileView, prefix: &str, with_decomposition: bool, bundle: &mut Bundle) {
    let r = &f.report;
    let head = format!("task {} on {}", r.task, r.scenario);
    if !f.trace.is_empty() {
        bundle.add(format!("{prefix}.trace.svg"), trace_svg(&format!("{head}: objective"), &f.trace));
    }
    if !r.laws.is_empty() {
        let mut labels = Vec::new();
        let (mut rec, mut tru) = (Vec::new(), Vec::new());
        let any_truth = r.laws.values().any(|l| l.truth.is_some());
        for (key, law) in &r.laws {
            for (i, l) in law.labels.iter().enumerate() {
                labels.push(if r.laws.len() > 1 { format!("{key}:{l}") } else { l.clone() });
                rec.push(law.recovered[i]);
                tru.push(law.truth.as_ref().map_or(0.0, |t| t[i]));
            }
        }
        let mut series = vec![("recovered", rec)];
        if any_truth {
            series.push(("truth", tru));
        }
        bundle.add(format!("{prefix}.laws.svg"), svg::bar_chart(&format!("{head}: learned laws"), &labels, &series));
    }
    if let Some(m) = &r.resolving_matrix {
        bundle.add(
            format!("{prefix}.resolving.svg"),
            svg::heatmap(&format!("{head}: resolving matrix"), &m.entries, "composite z", "hidden component"),
        );
    }
    if with_decomposition {
        if let Some(d) = &f.solution.decomposition {
            bundle.add(
                format!("{prefix}.decomposition.svg"),
                decomposition_svg(&format!("{head}: decomposition"), &d.value),
            );
        }
    }
}

pub fn task_tables(f: &TaskFileView, prefix: &str, bundle: &mut Bundle) {
    let r = &f.report;
    bundle.add(format!("{prefix}.trace.csv"), trace_csv(&f.trace));
    let l = &r.losses;
    bundle.add(
        format!("{prefix}.losses.csv"),
        csv(
            &["term", "value"],
            [
                ("l_c", l.l_c),
                ("l_d", l.l_d),
                ("c_cyc", l.c_cyc),
                ("d_cyc", l.d_cyc),
                ("alpha", l.alpha),
                ("total", l.total),
            ]
            .iter()
            .map(|(k, v)| vec![k.to_string(), num(*v)]),
        ),
    );
    if !r.laws.is_empty() {
        let rows = r.laws.iter().flat_map(|(key, law)| {
            law.labels.iter().enumerate().map(move |(i, lab)| {
                vec![
                    key.clone(),
                    lab.clone(),
                    num(law.recovered[i]),
                    law.truth.as_ref().map_or(String::new(), |t| num(t[i])),
                ]
            })
        });
        bundle.add(format!("{prefix}.laws.csv"), csv(&["law", "symbol", "recovered", "truth"], rows));
    }
    if let Some(m) = &r.resolving_matrix {
        let n = m.entries.first().map_or(0, Vec::len);
        let cols: Vec<String> = std::iter::once("z".to_string()).chain((0..n).map(|j| format!("y{j}"))).collect();
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        let rows = m
            .entries
            .iter()
            .enumerate()
            .map(|(z, row)| std::iter::once(z.to_string()).chain(row.iter().map(|&v| num(v))).collect());
        bundle.add(format!("{prefix}.resolving_matrix.csv"), csv(&cols, rows));
    }
}

pub fn chain_summary_csv(c: &ChainReportView) -> String {
    csv(
        &["stage", "name", "learned", "tv_to_truth", "iterations", "converged"],
        c.stages.iter().map(|s| {
            vec![
                s.index.to_string(),
                s.name.clone(),
                s.learned.clone().unwrap_or_default(),
                s.tv_to_truth.map_or(String::new(), num),
                s.iterations.to_string(),
                s.converged.to_string(),
            ]
        }),
    )
}

pub fn chain_artifacts(f: &ChainFileView, prefix: &str, bundle: &mut Bundle) {
    let c = &f.report;
    let series: Vec<(String, Vec<(f64, f64)>)> = f
        .traces
        .iter()
        .enumerate()
        .filter(|(_, t)| !t.is_empty())
        .map(|(k, t)| (format!("stage {k}"), t.iter().map(|e| (e.iteration as f64, e.best)).collect()))
        .collect();
    if !series.is_empty() {
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, p)| (n.as_str(), p.clone())).collect();
        bundle.add(format!("{prefix}.trace.svg"), svg::line_plot("chain: best objective per stage", "iteration", &refs));
    }
    for s in c.stages.iter().skip(1) {
        bundle.add(
            format!("{prefix}.stage{}.svg", s.index),
            svg::bar_chart(&format!("stage {}: {}", s.index, s.name), &s.labels, &[("recovered", s.recovered.clone())]),
        );
    }
    bundle.add(format!("{prefix}.summary.csv"), chain_summary_csv(c));
    let rows = c.stages.iter().flat_map(|s| {
        s.labels
            .iter()
            .zip(&s.recovered)
            .map(move |(l, &p)| vec![s.index.to_string(), l.clone(), num(p)])
    });
    bundle.add(format!("{prefix}.laws.csv"), csv(&["stage", "symbol", "probability"], rows));
}

pub fn table_csv(t: &TableView) -> String {
    let cols: Vec<&str> = t.columns.iter().map(String::as_str).collect();
    csv(
        &cols,
        t.rows.iter().map(|r| {
            r.iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect()
        }),
    )
}

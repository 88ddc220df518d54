use std::path::PathBuf;

use clap::{Args, ValueEnum};
use decomp_lab::compose::{Component, Scenario, ScenarioKind};
use decomp_lab::identify::{phase_flip_counterexample, recover_component_closed_form, resolving_matrix, trivial_solution_counterexample};
use decomp_lab::LabError;
use serde::Serialize;
use serde_json::{json, Value};

use super::{fmt_loss, parse_component, scenario_or_default};
use crate::artifacts::{to_value, Bundle, RunManifest};
use crate::error::{CliError, CliResult, ExitCode};
use crate::GlobalOpts;

/// Loss bound under which a constructed solution counts as optimal.
const CERTIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Kind {
    PhaseFlip,
    Trivial,
    RankDeficient,
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    #[arg(value_enum)]
    pub kind: Kind,
    /// Scenario to build on (default: micro_mb, or modadd for rank_deficient)
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// rank_deficient: component treated as unknown
    #[arg(long, value_parser = parse_component, default_value = "y")]
    pub hidden: Component,
}

#[derive(Serialize)]
struct CounterexampleFile {
    schema: u32,
    kind: &'static str,
    counterexample: Kind,
    scenario: String,
    certified: bool,
    explanation: Vec<String>,
    report: Value,
    solutions: Vec<Value>,
    table: Value,
}

struct Built {
    certified: bool,
    explanation: Vec<String>,
    report: Value,
    solutions: Vec<Value>,
    table: Value,
}

fn loss_row(name: &str, l: &decomp_lab::tasks::LossBreakdown) -> Value {
    json!([name, l.l_c, l.l_d, l.c_cyc, l.d_cyc, l.total])
}

const LOSS_COLUMNS: [&str; 6] = ["solution", "l_c", "l_d", "c_cyc", "d_cyc", "total"];

/// The constructions start from the exact inverse, so a non-bijective
/// composition is an unmet precondition rather than a config error.
fn precondition(e: LabError) -> CliError {
    match e {
        LabError::NotBijective(w) => CliError::new(
            ExitCode::Precondition,
            format!("precondition failed: composition is not bijective: {w}"),
        ),
        e => e.into(),
    }
}

fn phase_flip(s: &Scenario) -> CliResult<Built> {
    let (a, b, rep) = phase_flip_counterexample(s).map_err(precondition)?;
    let certified = rep.loss_a.total <= CERTIFY_TOL && rep.loss_b.total <= CERTIFY_TOL && rep.cycle_consistent_b;
    let differ = (rep.disagreement_fraction * rep.supported as f64).round() as usize;
    let explanation = vec![
        format!(
            "solution A (generating composition and its inverse): total_loss {} <= 1e-9",
            fmt_loss(rep.loss_a.total)
        ),
        format!(
            "solution B (background values 1 and 2 exchanged inside both maps): total_loss {} <= 1e-9",
            fmt_loss(rep.loss_b.total)
        ),
        format!(
            "decompositions disagree on {differ}/{} supported composites (disagreement {:.1})",
            rep.supported, rep.disagreement_fraction
        ),
        "the background law is invariant under the exchange, so no loss term can tell A from B".to_string(),
    ];
    Ok(Built {
        certified,
        explanation,
        table: json!({"columns": LOSS_COLUMNS, "rows": [loss_row("A", &rep.loss_a), loss_row("B", &rep.loss_b)]}),
        report: to_value(&rep),
        solutions: vec![to_value(&a), to_value(&b)],
    })
}

fn trivial(s: &Scenario) -> CliResult<Built> {
    let (sol, rep) = trivial_solution_counterexample(s).map_err(precondition)?;
    let l = &rep.losses;
    let mut explanation = vec![format!(
        "l_c = {}, TV to true foreground = {}",
        fmt_loss(l.l_c),
        rep.tv_foreground.map_or("n/a".to_string(), |t| format!("{t:.4}"))
    )];
    explanation.push(format!(
        "remaining terms: l_d {}, c_cyc {}, d_cyc {}",
        fmt_loss(l.l_d),
        fmt_loss(l.c_cyc),
        fmt_loss(l.d_cyc)
    ));
    if let Some(t) = rep.tv_background {
        explanation.push(format!("background collapsed to a point mass: TV to true background = {t:.4}"));
    }
    explanation.push("foregrounds replay whole composites, so the composition loss is met without separating anything".to_string());
    Ok(Built {
        certified: l.l_c <= 1e-12,
        explanation,
        table: json!({"columns": LOSS_COLUMNS, "rows": [loss_row("trivial", l)]}),
        report: to_value(&rep),
        solutions: vec![to_value(&sol)],
    })
}

fn rank_deficient(s: &Scenario, hidden: Component) -> CliResult<Built> {
    let oriented = match hidden {
        Component::Y => s.clone(),
        Component::X => s.transposed(),
    };
    let known = oriented
        .p_x
        .as_ref()
        .ok_or_else(|| CliError::config(format!("p_{}: missing", hidden.other().as_str())))?;
    let r = resolving_matrix(known, &oriented.spec)?;
    let rep = match recover_component_closed_form(&oriented.p_z, &r) {
        Ok(rep) => {
            return Err(CliError::new(
                ExitCode::Precondition,
                format!(
                    "precondition failed: resolving matrix has full column rank {}; p_{} is identifiable",
                    rep.rank,
                    hidden.as_str()
                ),
            ))
        }
        Err(LabError::RankDeficient { report, .. }) => *report,
        Err(e) => return Err(e.into()),
    };
    let alts = rep.alternatives.clone().unwrap_or_default();
    let mut rows = Vec::new();
    let mut explanation = vec![format!(
        "rank {} < {}: p_{} is not identifiable from the composed law",
        rep.rank,
        rep.n_cols,
        hidden.as_str()
    )];
    let mut worst: f64 = 0.0;
    for (k, alt) in alts.iter().enumerate() {
        let pushed = r.apply(alt.probs());
        let residual: f64 = pushed.iter().zip(oriented.p_z.probs()).map(|(a, b)| (a - b).abs()).sum();
        worst = worst.max(residual);
        let probs: Vec<String> = alt.probs().iter().map(|p| format!("{p:.4}")).collect();
        explanation.push(format!("alternative {k}: [{}], residual {residual:.1e}", probs.join(", ")));
        let mut row = vec![json!(k), json!(residual)];
        row.extend(alt.probs().iter().map(|p| json!(p)));
        rows.push(Value::Array(row));
    }
    let mut columns = vec!["alternative".to_string(), "residual".to_string()];
    columns.extend((0..rep.n_cols).map(|j| format!("p{j}")));
    Ok(Built {
        certified: alts.len() >= 2 && worst <= CERTIFY_TOL,
        explanation,
        table: json!({"columns": columns, "rows": rows}),
        report: to_value(&rep),
        solutions: alts.iter().map(to_value).collect(),
    })
}

pub fn run(g: &GlobalOpts, a: CounterexampleArgs) -> CliResult<()> {
    let seed = g.seed.unwrap_or(0);
    let default_kind = match a.kind {
        Kind::RankDeficient => ScenarioKind::Modadd,
        _ => ScenarioKind::MicroMb,
    };
    let s = scenario_or_default(a.scenario.as_deref(), default_kind, seed)?;
    let built = match a.kind {
        Kind::PhaseFlip => phase_flip(&s),
        Kind::Trivial => trivial(&s),
        Kind::RankDeficient => rank_deficient(&s, a.hidden),
    }?;
    let name = to_value(&a.kind);
    let name = name.as_str().expect("unit variant");
    let file = CounterexampleFile {
        schema: decomp_lab::compose::SCHEMA_VERSION,
        kind: "counterexample",
        counterexample: a.kind,
        scenario: s.name.clone(),
        certified: built.certified,
        explanation: built.explanation,
        report: built.report,
        solutions: built.solutions,
        table: built.table,
    };
    let mut bundle = Bundle::default();
    bundle.add_json(format!("counterexample_{name}.json"), &file)?;
    let config = json!({
        "kind": name,
        "scenario": a.scenario.as_ref().map(|p| p.display().to_string()),
        "hidden": a.hidden,
    });
    RunManifest::new("counterexample", a.scenario.as_deref(), config, seed, &g.out_dir).seal(&mut bundle, g.wall_clock)?;
    bundle.write(&g.out_dir)?;

    println!("{name} on {}", s.name);
    for line in &file.explanation {
        println!("  {line}");
    }
    if !file.certified {
        return Err(CliError::new(
            ExitCode::VerificationFailed,
            format!("{name}: construction did not certify (details in counterexample_{name}.json)"),
        ));
    }
    Ok(())
}

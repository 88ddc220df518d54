use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use decomp_lab::compose::{
    invert_composition, make_scenario, Component, CompositionSpec, DecompositionMap, Scenario, ScenarioKind, ScenarioParams,
};
use decomp_lab::finitedist::{FiniteDistribution, SymbolSpace};
use decomp_lab::identify::{sweep_theorem2, verify_lemma_bijective_rank, verify_theorem1, verify_theorem2, SizeBounds, Theorem2Report};
use serde::Serialize;
use serde_json::{json, Value};

use super::{parse_component, require};
use crate::artifacts::{to_value, Bundle, RunManifest};
use crate::error::{read_json, CliError, CliResult, ExitCode};
use crate::GlobalOpts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    Theorem1,
    Theorem2,
    Lemma,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub which: Which,
    /// Scenario to check; without it a built-in suite runs
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// theorem1: component treated as unknown
    #[arg(long, value_parser = parse_component, default_value = "y")]
    pub hidden: Component,
    /// theorem2: decomposition map to test instead of a perturbed inverse
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    /// theorem2: objective values at or below this count as zero
    #[arg(long, default_value_t = 1e-12)]
    pub objective_tol: f64,
    /// theorem2: enumerate every deterministic map when there are at most this many
    #[arg(long, default_value_t = 1_000_000)]
    pub brute_limit: usize,
    /// lemma: number of random instances
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 8)]
    pub max_x: usize,
    #[arg(long, default_value_t = 8)]
    pub max_y: usize,
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    passed: bool,
    message: String,
    detail: Value,
}

#[derive(Serialize)]
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    schema: u32,
    kind: &'static str,
    which: Which,
    passed: bool,
    checks: &'a [Check],
    #[serde(skip_serializing_if = "Option::is_none")]
    counter_witness: Option<Vec<&'a Check>>,
    table: Table,
}

fn theorem1_suite(a: &VerifyArgs, seed: u64) -> CliResult<Vec<(String, Scenario, Component)>> {
    if let Some(p) = &a.scenario {
        let s: Scenario = read_json(p)?;
        return Ok(vec![(s.name.clone(), s, a.hidden)]);
    }
    let mut suite = Vec::new();
    let mb = make_scenario(ScenarioKind::MicroMb, &ScenarioParams::default(), seed)?;
    suite.push(("micro_mb, background hidden".to_string(), mb.clone(), Component::X));
    suite.push(("micro_mb, glyph hidden".to_string(), mb, Component::Y));
    let uniform = make_scenario(ScenarioKind::Modadd, &ScenarioParams::default(), seed)?;
    suite.push(("modadd(3), uniform p_x".to_string(), uniform, Component::Y));
    let skewed = ScenarioParams {
        p_x: Some(vec![0.5, 0.3, 0.2]),
        ..ScenarioParams::default()
    };
    let skewed = make_scenario(ScenarioKind::Modadd, &skewed, seed)?;
    suite.push(("modadd(3), p_x = [0.5, 0.3, 0.2]".to_string(), skewed, Component::Y));
    Ok(suite)
}

fn theorem1(a: &VerifyArgs, seed: u64) -> CliResult<Vec<Check>> {
    theorem1_suite(a, seed)?
        .into_iter()
        .map(|(name, s, hidden)| {
            let r = verify_theorem1(&s, hidden)?;
            Ok(Check {
                name,
                passed: r.passed,
                message: r.message.clone(),
                detail: to_value(&r),
            })
        })
        .collect()
}

fn theorem2_message(r: &Theorem2Report) -> String {
    format!(
        "objective {:.4} {} 0, d {} inverse: {}",
        r.objective,
        if r.objective > r.tol { ">" } else { "=" },
        if r.equal_on_support { "=" } else { "≠" },
        if r.consistent { "consistent with theorem" } else { "contradicts theorem" }
    )
}

/// Inverse with the first supported composite sent to a neighbouring pair.
fn perturbed_inverse(s: &Scenario) -> CliResult<Option<DecompositionMap>> {
    let inv = invert_composition(&s.spec)?;
    let (nx, ny) = (s.spec.x_space().len(), s.spec.y_space().len());
    let Some(z0) = s.p_z.support().first().copied() else {
        return Ok(None);
    };
    let mut table: Vec<(usize, usize)> = (0..s.p_z.len()).map(|z| inv.point_of(z).expect("deterministic")).collect();
    let (x, y) = table[z0];
    table[z0] = if nx > 1 {
        ((x + 1) % nx, y)
    } else if ny > 1 {
        (x, (y + 1) % ny)
    } else {
        return Ok(None);
    };
    let sp = &s.spec;
    Ok(Some(DecompositionMap::deterministic(
        sp.z_space().clone(),
        sp.x_space().clone(),
        sp.y_space().clone(),
        table,
    )?))
}

fn affine_builtin() -> CliResult<Scenario> {
    let sp = |n| -> CliResult<_> { Ok(Arc::new(SymbolSpace::range(n)?)) };
    let spec = CompositionSpec::affine(sp(4)?, sp(3)?, 1, 4, None)?;
    let p_x = FiniteDistribution::uniform(spec.x_space().clone());
    let p_y = FiniteDistribution::uniform(spec.y_space().clone());
    Ok(Scenario::from_components("affine(1,4) 4x3 uniform", ScenarioKind::Custom, 0, spec, p_x, p_y)?)
}

fn theorem2(a: &VerifyArgs) -> CliResult<Vec<Check>> {
    let s = match &a.scenario {
        Some(p) => read_json::<Scenario>(p)?,
        None => affine_builtin()?,
    };
    let p_x = require(s.p_x.as_ref(), "p_x")?;
    let p_y = require(s.p_y.as_ref(), "p_y")?;
    let tol = a.objective_tol;
    let mut checks = Vec::new();
    let mut one = |name: String, d: &DecompositionMap| -> CliResult<()> {
        let r = verify_theorem2(&s.spec, d, p_x, p_y, &s.p_z, tol)?;
        checks.push(Check {
            name,
            passed: r.consistent,
            message: theorem2_message(&r),
            detail: to_value(&r),
        });
        Ok(())
    };
    one(format!("{}: exact inverse", s.name), &invert_composition(&s.spec)?)?;
    match &a.decomposition {
        Some(p) => one(format!("{}: {}", s.name, p.display()), &read_json::<DecompositionMap>(p)?)?,
        None => {
            if let Some(d) = perturbed_inverse(&s)? {
                one(format!("{}: perturbed inverse", s.name), &d)?;
            }
        }
    }
    let sweep = sweep_theorem2(&s.spec, p_x, p_y, &s.p_z, tol, a.brute_limit)?;
    checks.push(Check {
        name: format!("{}: all deterministic maps", s.name),
        passed: sweep.violations == 0,
        message: format!(
            "{} maps settled ({} enumerated outright), {} violations",
            sweep.maps_covered, sweep.brute_forced, sweep.violations
        ),
        detail: to_value(&sweep),
    });
    Ok(checks)
}

fn lemma(a: &VerifyArgs, seed: u64) -> CliResult<Vec<Check>> {
    let rep = verify_lemma_bijective_rank(
        a.trials,
        SizeBounds {
            max_x: a.max_x,
            max_y: a.max_y,
        },
        seed,
    )?;
    let mut checks = vec![Check {
        name: "bijective compositions".to_string(),
        passed: rep.all_full_rank(),
        message: format!(
            "{}/{} full rank (smallest singular value {:.3e})",
            rep.full_rank_count, rep.n_trials, rep.min_singular_value
        ),
        detail: json!({"seed": rep.seed, "n_trials": rep.n_trials, "full_rank_count": rep.full_rank_count}),
    }];
    for t in rep.trials.iter().filter(|t| !t.full_rank) {
        checks.push(Check {
            name: format!("trial {}", t.trial),
            passed: false,
            message: format!("rank {} < {} for |X| = {}, |Y| = {}", t.rank, t.y_size, t.x_size, t.y_size),
            detail: to_value(t),
        });
    }
    Ok(checks)
}

pub fn run(g: &GlobalOpts, a: VerifyArgs) -> CliResult<()> {
    if a.which != Which::Theorem2 && a.decomposition.is_some() {
        return Err(CliError::config("decomposition: only used by theorem2"));
    }
    if a.which == Which::Lemma && a.scenario.is_some() {
        return Err(CliError::config("scenario: the lemma check draws its own instances"));
    }
    let seed = g.seed.unwrap_or(0);
    let checks = match a.which {
        Which::Theorem1 => theorem1(&a, seed)?,
        Which::Theorem2 => theorem2(&a)?,
        Which::Lemma => lemma(&a, seed)?,
    };
    let passed = checks.iter().all(|c| c.passed);
    let failures: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let file = VerifyFile {
        schema: decomp_lab::compose::SCHEMA_VERSION,
        kind: "verify",
        which: a.which,
        passed,
        checks: &checks,
        counter_witness: (!passed).then_some(failures),
        table: Table {
            columns: vec!["check", "passed", "message"],
            rows: checks
                .iter()
                .map(|c| vec![json!(c.name), json!(c.passed), json!(c.message)])
                .collect(),
        },
    };
    let which = to_value(&a.which);
    let which = which.as_str().expect("unit variant");
    let mut bundle = Bundle::default();
    bundle.add_json(format!("verify_{which}.json"), &file)?;
    let config = json!({
        "which": which,
        "scenario": a.scenario.as_ref().map(|p| p.display().to_string()),
        "hidden": a.hidden,
        "decomposition": a.decomposition.as_ref().map(|p| p.display().to_string()),
        "objective_tol": a.objective_tol,
        "brute_limit": a.brute_limit,
        "trials": a.trials,
        "max_x": a.max_x,
        "max_y": a.max_y,
    });
    RunManifest::new("verify", a.scenario.as_deref(), config, seed, &g.out_dir).seal(&mut bundle, g.wall_clock)?;
    bundle.write(&g.out_dir)?;

    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.message);
    }
    if !passed {
        return Err(CliError::new(
            ExitCode::VerificationFailed,
            format!("{} of {} checks failed; counter-witness in verify_{which}.json", file.counter_witness.map_or(0, |w| w.len()), checks.len()),
        ));
    }
    Ok(())
}

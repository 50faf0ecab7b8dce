use serde::Serialize;
use singleshot_core::model::{DiagonalState, Spectrum};
use singleshot_core::oracle::{self, SamplerOptions};
use singleshot_core::shells::{self, BathModel, CompositeModel};
use singleshot_core::transfer::{self, State};
use singleshot_core::{extraction, formation, typicality};

use crate::config::ModelConfig;
use crate::report::{Flags, Report, Series};
use crate::{Cli, CliError, Command};

/// Sample count for `typicality` when `--samples` is absent.
pub const DEFAULT_SAMPLES: usize = 500;

pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    /// Printed to stderr after the report.
    pub message: Option<String>,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Outcome { report, exit_code: 0, message: None }
    }
}

pub fn dispatch(cli: &Cli, config: &ModelConfig) -> Result<Outcome, CliError> {
    let flags = Flags { epsilon: cli.epsilon, delta: cli.delta, w: cli.w, samples: cli.samples, seed: cli.seed };
    let model = config.build()?;
    let name = cli.command.name();
    match cli.command {
        Command::Work => work(name, config, &model, flags),
        Command::Formation => formation_cmd(name, config, &model, flags),
        Command::Multilevel => multilevel(name, config, &model, flags),
        Command::TransferCheck => transfer_check(name, config, &model, flags),
        Command::Typicality => typicality_cmd(name, config, &model, flags),
        Command::Oracle => oracle_cmd(name, config, &model, flags),
        Command::Validate => validate(name, config, &model, flags),
    }
}

fn epsilon_grid() -> impl Iterator<Item = f64> {
    (0..20).map(|i| i as f64 * 0.05)
}

fn work(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let eps = flags.epsilon.unwrap_or(0.0);
    let r = extraction::max_work(model, eps)?;
    let mut w_curve = Vec::new();
    let mut grid_curve = Vec::new();
    for e in epsilon_grid() {
        let s = extraction::max_work(model, e)?;
        w_curve.push([e, s.w_max]);
        grid_curve.push([e, s.grid_achievable_energy]);
    }
    let report = Report::new(name, config, flags, &r)?
        .with_series(Series { name: "w_max_vs_epsilon".into(), x: "epsilon".into(), y: "w_max".into(), points: w_curve })
        .with_series(Series {
            name: "grid_achievable_vs_epsilon".into(),
            x: "epsilon".into(),
            y: "grid_achievable_energy".into(),
            points: grid_curve,
        });
    Ok(Outcome::ok(report))
}

fn target_state(config: &ModelConfig, system: &Spectrum) -> Result<DiagonalState, CliError> {
    let f = config.formation.as_ref().ok_or_else(|| CliError::Config("missing [formation] target".into()))?;
    Ok(DiagonalState::new(system, f.target.clone())?)
}

#[derive(Serialize)]
struct FormationResults {
    formation: formation::FormationReport,
    feasibility: Option<formation::FeasibilityVerdict>,
}

fn formation_cmd(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let target = target_state(config, model.system())?;
    let eps = flags.epsilon.unwrap_or(0.0);
    let r = formation::formation_mu_epsilon(&target, model.system(), model.ctx(), eps)?;
    let feasibility = flags.w.map(|w| formation::formation_feasible(&target, w, model.system(), model.ctx())).transpose()?;
    let mut curve = Vec::new();
    for e in epsilon_grid() {
        let s = formation::formation_mu_epsilon(&target, model.system(), model.ctx(), e)?;
        curve.push([e, s.w_min_epsilon.unwrap_or(s.w_min)]);
    }
    let infeasible = feasibility.as_ref().is_some_and(|v| !v.feasible);
    let report = Report::new(name, config, flags, FormationResults { formation: r, feasibility })?.with_series(Series {
        name: "w_min_vs_epsilon".into(),
        x: "epsilon".into(),
        y: "w_min_epsilon".into(),
        points: curve,
    });
    Ok(Outcome {
        report,
        exit_code: if infeasible { 2 } else { 0 },
        message: infeasible.then(|| "infeasible: the target cannot be formed with the given w".to_owned()),
    })
}

#[derive(Serialize)]
struct MultilevelResults {
    #[serde(flatten)]
    report: extraction::MultilevelReport,
    /// Term-by-term geometric sum, when it has at most 10⁶ terms.
    surplus_direct: Option<f64>,
}

fn multilevel(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let delta = flags.delta.ok_or_else(|| CliError::Config("multilevel needs --delta".into()))?;
    let eps = flags.epsilon.unwrap_or(0.0);
    let r = extraction::multilevel_max_work(model, eps, delta)?;
    let surplus_direct = if delta / r.spacing <= 1e6 {
        Some(extraction::multilevel_surplus_direct(model.ctx(), delta, r.spacing)?)
    } else {
        None
    };
    let mut curve = Vec::new();
    let mut k = 1u64;
    while (k as f64) * r.spacing <= delta * (1.0 + 1e-12) {
        let d = k as f64 * r.spacing;
        curve.push([d, extraction::multilevel_surplus(model.ctx(), d, r.spacing)?]);
        k *= 2;
    }
    let report = Report::new(name, config, flags, MultilevelResults { report: r, surplus_direct })?.with_series(Series {
        name: "surplus_vs_delta".into(),
        x: "delta".into(),
        y: "surplus".into(),
        points: curve,
    });
    Ok(Outcome::ok(report))
}

#[derive(Serialize)]
struct TransferResults {
    #[serde(flatten)]
    verdict: transfer::TransferVerdict,
    case: &'static str,
    label: &'static str,
}

fn transfer_check(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let t = config.transfer.as_ref().ok_or_else(|| CliError::Config("missing [transfer] section".into()))?;
    let system = model.system();
    let weight = model.weight_spectrum();
    let rho: State = model.state().clone().into();
    let rho_final: State = DiagonalState::new(system, t.system_final.clone())?.into();
    let sigma: State = DiagonalState::new(&weight, t.weight_initial.clone())?.into();
    let sigma_final: State = DiagonalState::new(&weight, t.weight_final.clone())?.into();
    let v = transfer::check_transfer(&rho, &rho_final, system, &sigma, &sigma_final, &weight, model.ctx())?;
    let results = TransferResults { case: v.case_tag.as_str(), label: v.label(), verdict: v };
    Ok(Outcome::ok(Report::new(name, config, flags, results)?))
}

fn typicality_cmd(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let eps = flags.epsilon.unwrap_or(0.0);
    let w = config.weight_level(flags.w.unwrap_or(0.0))?;
    let samples = flags.samples.unwrap_or(DEFAULT_SAMPLES);
    let flags = Flags { samples: Some(samples), seed: Some(flags.seed.unwrap_or(0)), ..flags };
    let r = typicality::typicality_experiment(model, eps, w, samples, flags.seed.unwrap_or(0))?;
    let points = r.final_populations.iter().map(|p| [p.bath_multiplicity as f64, p.relative_std]).collect();
    let report = Report::new(name, config, flags, &r)?.with_series(Series {
        name: "relative_std_vs_bath_multiplicity".into(),
        x: "bath_multiplicity".into(),
        y: "relative_std".into(),
        points,
    });
    Ok(Outcome::ok(report))
}

#[derive(Serialize)]
struct OracleResults {
    work: oracle::OracleWork,
    grid_achievable_w: u64,
    work_agrees: bool,
    formation: Option<oracle::OracleFormation>,
    second_law: Option<oracle::SecondLawReport>,
}

fn oracle_cmd(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let eps = flags.epsilon.unwrap_or(0.0);
    let work = oracle::brute_force_max_work(model, eps)?;
    let grid = extraction::max_work(model, eps)?.grid_achievable_w;
    let formation = match &config.formation {
        Some(_) => Some(oracle::brute_force_formation(model, &target_state(config, model.system())?)?),
        None => None,
    };
    let second_law = match flags.samples {
        Some(n) => Some(oracle::second_law_sampler(model, n, flags.seed.unwrap_or(0), &SamplerOptions::default())?),
        None => None,
    };
    let flags = Flags { seed: flags.samples.map(|_| flags.seed.unwrap_or(0)), ..flags };
    let results = OracleResults { work_agrees: work.w == grid, work, grid_achievable_w: grid, formation, second_law };
    Ok(Outcome::ok(Report::new(name, config, flags, results)?))
}

#[derive(Serialize)]
struct ValidateResults {
    valid: bool,
    system_dimension: usize,
    bath_mode: &'static str,
    window: Option<shells::WindowDiagnostics>,
    shells: Vec<shells::ShellInfo>,
}

fn validate(name: &str, config: &ModelConfig, model: &CompositeModel, flags: Flags) -> Result<Outcome, CliError> {
    let (bath_mode, window, shells) = match model.bath() {
        BathModel::Ideal { .. } => ("ideal", None, Vec::new()),
        BathModel::Concrete(_) => {
            let w = shells::window_diagnostics(model)?;
            ("concrete", Some(w), shells::enumerate_shells(model)?)
        }
    };
    let results =
        ValidateResults { valid: true, system_dimension: model.system().dimension(), bath_mode, window, shells };
    Ok(Outcome::ok(Report::new(name, config, flags, results)?))
}

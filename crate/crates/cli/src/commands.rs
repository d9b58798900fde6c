//! One function per subcommand. Each returns the report files; nothing in
//! them depends on the clock or the worker count.

use std::path::Path;

use leadlag::cps::{build_tree, find_cps, min_eps_cps, CpsError, CpsSolution, MinEps, ScenarioTree};
use leadlag::lab::experiment::derived_seed;
use leadlag::lab::{
    empirical_cud, empirical_small_ball, empirical_stickiness, run_cost_sweep, run_experiment, LabError, Provenance,
    SmallBallQuery,
};
use leadlag::sim::{EmbeddingStats, LagModelSpec, PathBatch, PathGenerator, SimError, TimeGrid};
use leadlag::spectral::{gsvz_check, GsvzReport, SpectralError};
use leadlag::strategy::{
    check_admissible, execute, value_frictionless, value_with_costs, Admissibility, FrictionSpec, SimpleStrategy,
    StrategyError,
};
use serde::Serialize;

use crate::config::{Config, LoadedConfig, OutputKind, TargetConfig, VerifierConfig};
use crate::error::CliError;
use crate::output::{Format, OutputFile};

fn sim_error(context: &str, e: SimError) -> CliError {
    match e {
        SimError::EmbeddingFailure { .. } | SimError::PriceOverflow { .. } => CliError::runtime(context, e),
        _ => CliError::config(context, e),
    }
}

fn lab_error(context: &str, e: LabError) -> CliError {
    match e {
        LabError::Sim(s) => sim_error(context, s),
        LabError::InvalidParameter(_) => CliError::config(context, e),
        _ => CliError::runtime(context, e),
    }
}

fn strategy_error(context: &str, e: StrategyError) -> CliError {
    match e {
        StrategyError::InvalidFriction(_) | StrategyError::InvalidStrategy(_) => CliError::config(context, e),
        _ => CliError::runtime(context, e),
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    write(&mut out).expect("writing to memory");
    out
}

fn provenance(model: &LagModelSpec, grid: TimeGrid, n_paths: usize, seed: u64) -> Provenance {
    Provenance {
        seed,
        model_hash: model.model_hash(),
        grid,
        n_paths,
    }
}

fn simulated_batch(model: &LagModelSpec, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<PathBatch, CliError> {
    PathGenerator::new(model, grid, seed)
        .and_then(|g| g.batch(n_paths))
        .and_then(PathBatch::to_prices)
        .map_err(|e| sim_error("model", e))
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    command: &'static str,
    provenance: Provenance,
    model: &'a LagModelSpec,
    embedding: Option<EmbeddingStats>,
    files: Vec<String>,
}

pub fn simulate(cfg: &Config, format: Format) -> Result<Vec<OutputFile>, CliError> {
    let (seed, n_paths, grid, model) = (cfg.seed()?, cfg.n_paths()?, cfg.grid()?, cfg.model()?);
    let generator = PathGenerator::new(model, grid, seed).map_err(|e| sim_error("model", e))?;
    let batch = generator
        .batch(n_paths)
        .and_then(PathBatch::to_prices)
        .map_err(|e| sim_error("simulate", e))?;
    let paths = OutputFile::table("paths", csv_bytes(|o| batch.write_csv(o)), format);
    let metadata = OutputFile {
        name: "batch_metadata.json".into(),
        bytes: format!("{}\n", batch.metadata_json()).into_bytes(),
    };
    let report = SimulateReport {
        command: "simulate",
        provenance: provenance(model, grid, n_paths, seed),
        model,
        embedding: generator.embedding_stats(),
        files: vec![paths.name.clone(), metadata.name.clone()],
    };
    Ok(vec![OutputFile::json("simulate_report.json", &report), paths, metadata])
}

#[derive(Serialize)]
#[serde(untagged)]
enum ExperimentResults {
    Single(Vec<leadlag::lab::ExperimentReport>),
    Sweep(Vec<leadlag::lab::CostSweepReport>),
}

#[derive(Serialize)]
struct ExperimentFile<'a> {
    command: &'static str,
    strategies: Vec<String>,
    model: &'a LagModelSpec,
    results: ExperimentResults,
    admissibility: Vec<AdmissibilityEntry>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct AdmissibilityEntry {
    strategy: usize,
    epsilon: f64,
    report: leadlag::strategy::value::AdmissibilityReport,
}

const STATS_PREFIX: &str = "strategy,h,epsilon,";

pub fn experiment(cfg: &Config, format: Format) -> Result<Vec<OutputFile>, CliError> {
    let (seed, n_paths, grid, model) = (cfg.seed()?, cfg.n_paths()?, cfg.grid()?, cfg.model()?);
    let friction = cfg.friction()?;
    let strategies = Config::require(&cfg.strategy, "strategy")?.build(&grid)?;
    let epsilons = match &cfg.sweep {
        Some(s) => {
            let ok = !s.epsilons.is_empty()
                && s.epsilons.iter().all(|e| e.is_finite() && *e >= 0.0)
                && s.epsilons.windows(2).all(|w| w[1] > w[0]);
            if !ok {
                return Err(CliError::config(
                    "sweep.epsilons",
                    "must be nonempty, finite, nonnegative and strictly increasing",
                ));
            }
            Some(s.epsilons.clone())
        }
        None => None,
    };

    let mut stats_csv = format!("{STATS_PREFIX}{}\n", leadlag::lab::ArbStats::CSV_HEADER);
    let results = match &epsilons {
        None => {
            let mut out = Vec::new();
            for (k, s) in strategies.iter().enumerate() {
                let r = run_experiment(model, s, &friction, grid, n_paths, seed).map_err(|e| lab_error("experiment", e))?;
                stats_csv += &format!("{k},{},{},{}\n", friction.h, friction.epsilon, r.stats.csv_row());
                out.push(r);
            }
            ExperimentResults::Single(out)
        }
        Some(eps) => {
            let mut out = Vec::new();
            for (k, s) in strategies.iter().enumerate() {
                let r = run_cost_sweep(model, s, friction.h, eps, grid, n_paths, seed)
                    .map_err(|e| lab_error("experiment", e))?;
                for (e, st) in r.epsilons.iter().zip(&r.stats) {
                    stats_csv += &format!("{k},{},{e},{}\n", friction.h, st.csv_row());
                }
                out.push(r);
            }
            ExperimentResults::Sweep(out)
        }
    };

    let mut files = vec![OutputFile::table("stats", stats_csv.into_bytes(), format)];
    let wants_paths = !cfg.outputs.is_empty() || friction.admissibility != Admissibility::None;
    let mut admissibility = Vec::new();
    if wants_paths {
        let batch = simulated_batch(model, grid, n_paths, seed)?;
        if cfg.outputs.contains(&OutputKind::Paths) {
            files.push(OutputFile::table("paths", csv_bytes(|o| batch.write_csv(o)), format));
        }
        let eps_list = epsilons.clone().unwrap_or_else(|| vec![friction.epsilon]);
        for (k, s) in strategies.iter().enumerate() {
            files.extend(strategy_outputs(cfg, &batch, s, k, &friction, &eps_list, format, &mut admissibility)?);
        }
    }
    let report = ExperimentFile {
        command: "experiment",
        strategies: strategies.iter().map(SimpleStrategy::name).collect(),
        model,
        results,
        admissibility,
        files: files.iter().map(|f| f.name.clone()).collect(),
    };
    files.insert(0, OutputFile::json("experiment_report.json", &report));
    Ok(files)
}

#[allow(clippy::too_many_arguments)]
fn strategy_outputs(
    cfg: &Config,
    batch: &PathBatch,
    strategy: &SimpleStrategy,
    k: usize,
    friction: &FrictionSpec,
    epsilons: &[f64],
    format: Format,
    admissibility: &mut Vec<AdmissibilityEntry>,
) -> Result<Vec<OutputFile>, CliError> {
    let exec = execute(strategy, batch, friction).map_err(|e| strategy_error("experiment", e))?;
    let mut files = Vec::new();
    if cfg.outputs.contains(&OutputKind::Executions) {
        files.push(OutputFile::table(&format!("executions_{k}"), csv_bytes(|o| exec.write_csv(o)), format));
    }
    for (j, &eps) in epsilons.iter().enumerate() {
        let values = if eps == 0.0 {
            value_frictionless(&exec, batch, 0.0)
        } else {
            value_with_costs(&exec, batch, eps)
        }
        .map_err(|e| strategy_error("experiment", e))?;
        let suffix = if epsilons.len() == 1 { format!("{k}") } else { format!("{k}_{j}") };
        if cfg.outputs.contains(&OutputKind::Values) {
            files.push(OutputFile::table(&format!("values_{suffix}"), csv_bytes(|o| values.write_csv(o)), format));
        }
        if cfg.outputs.contains(&OutputKind::TerminalValues) {
            let mut csv = String::from("path_id,V_T\n");
            for (p, v) in values.terminal().iter().enumerate() {
                csv += &format!("{p},{v}\n");
            }
            files.push(OutputFile::table(&format!("terminal_values_{suffix}"), csv.into_bytes(), format));
        }
        if friction.admissibility != Admissibility::None {
            let f = FrictionSpec { epsilon: eps, ..*friction };
            admissibility.push(AdmissibilityEntry {
                strategy: k,
                epsilon: eps,
                report: check_admissible(&values, batch, &f).map_err(|e| strategy_error("friction.admissibility", e))?,
            });
        }
    }
    Ok(files)
}

#[derive(Serialize)]
struct VerifyEntry<'a> {
    verifier: &'a VerifierConfig,
    seed: u64,
    result: serde_json::Value,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    command: &'static str,
    provenance: Provenance,
    model: &'a LagModelSpec,
    checks: Vec<VerifyEntry<'a>>,
    files: Vec<String>,
}

pub fn verify(cfg: &Config, format: Format) -> Result<Vec<OutputFile>, CliError> {
    let (seed, n_paths, grid, model) = (cfg.seed()?, cfg.n_paths()?, cfg.grid()?, cfg.model()?);
    if cfg.verifiers.is_empty() {
        return Err(CliError::config("verifiers", "at least one verifier is required"));
    }
    let mut checks = Vec::new();
    let mut files = Vec::new();
    for (k, v) in cfg.verifiers.iter().enumerate() {
        let context = format!("verifiers[{k}]");
        let s = derived_seed(seed, k as u64);
        let result = match v {
            VerifierConfig::SmallBall {
                t0,
                eps,
                target,
                components,
                monitoring,
            } => {
                let i0 = grid.index_of(*t0).map_err(|e| CliError::config(&context, e))?;
                let target = (i0..grid.n_points())
                    .map(|i| match target {
                        TargetConfig::Zero => [0.0, 0.0],
                        TargetConfig::Linear(slope) => {
                            let dt = (i - i0) as f64 * grid.step;
                            [slope[0] * dt, slope[1] * dt]
                        }
                    })
                    .collect();
                let query = SmallBallQuery {
                    t0: *t0,
                    target,
                    eps: *eps,
                    components: components.clone(),
                    monitoring: *monitoring,
                };
                let p = empirical_small_ball(model, &query, grid, n_paths, s).map_err(|e| lab_error(&context, e))?;
                serde_json::to_value(p)
            }
            VerifierConfig::Stickiness { t, delta, monitoring } => {
                let p = empirical_stickiness(model, *t, *delta, *monitoring, grid, n_paths, s)
                    .map_err(|e| lab_error(&context, e))?;
                serde_json::to_value(p)
            }
            VerifierConfig::Cud { t1, t2, conditioning } => {
                let table =
                    empirical_cud(model, *t1, *t2, *conditioning, grid, n_paths, s).map_err(|e| lab_error(&context, e))?;
                files.push(OutputFile::table(&format!("cud_{k}"), csv_bytes(|o| table.write_csv(o)), format));
                serde_json::to_value(table)
            }
        }
        .expect("results serialize");
        checks.push(VerifyEntry { verifier: v, seed: s, result });
    }
    let report = VerifyReport {
        command: "verify",
        provenance: provenance(model, grid, n_paths, seed),
        model,
        checks,
        files: files.iter().map(|f| f.name.clone()).collect(),
    };
    files.insert(0, OutputFile::json("verify_report.json", &report));
    Ok(files)
}

#[derive(Serialize)]
struct SolutionSummary {
    epsilon: f64,
    feasible: bool,
    max_residual: Option<f64>,
    infeasibility: Option<f64>,
    farkas_gap: Option<f64>,
    farkas_residual: Option<f64>,
    lp_pivots: usize,
}

impl From<&CpsSolution> for SolutionSummary {
    fn from(s: &CpsSolution) -> Self {
        Self {
            epsilon: s.epsilon,
            feasible: s.is_feasible(),
            max_residual: s.is_feasible().then_some(s.max_residual),
            infeasibility: s.infeasibility,
            farkas_gap: s.farkas_gap,
            farkas_residual: s.farkas_residual,
            lp_pivots: s.lp_pivots,
        }
    }
}

#[derive(Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum MinEpsSummary {
    Found { epsilon_star: f64, solution: SolutionSummary },
    AboveEpsHi { eps_hi: f64 },
}

#[derive(Serialize)]
struct CpsReport {
    command: &'static str,
    source: &'static str,
    provenance: Option<Provenance>,
    level_sizes: Vec<usize>,
    n_nodes: usize,
    eps_hi: f64,
    min_eps: MinEpsSummary,
    probes: Vec<SolutionSummary>,
    files: Vec<String>,
}

fn cps_error(context: &str, e: CpsError) -> CliError {
    match e {
        CpsError::InvalidTree(_) | CpsError::InvalidEpsilon(_) => CliError::config(context, e),
        CpsError::Sim(s) => sim_error(context, s),
        CpsError::Lp(_) => CliError::runtime(context, e),
    }
}

pub fn cps(loaded: &LoadedConfig, format: Format) -> Result<Vec<OutputFile>, CliError> {
    let cfg = &loaded.config;
    let c = Config::require(&cfg.cps, "cps")?;
    if !(c.eps_hi.is_finite() && c.eps_hi > 0.0) {
        return Err(CliError::config("cps.eps_hi", "must be positive and finite"));
    }
    if let Some(bad) = c.probe.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(CliError::config("cps.probe", format!("band width {bad} must be finite and >= 0")));
    }
    let sources = [c.tree.is_some(), c.tree_file.is_some(), c.levels.is_some() || c.bins.is_some()];
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(CliError::config(
            "cps",
            "give exactly one tree source: `tree`, `tree_file`, or `levels` with `bins`",
        ));
    }
    let (tree, source, prov): (ScenarioTree, &'static str, Option<Provenance>) = if let Some(t) = &c.tree {
        (t.clone(), "inline", None)
    } else if let Some(file) = &c.tree_file {
        let base = loaded.path.parent().unwrap_or(Path::new("."));
        let text = std::fs::read_to_string(base.join(file))
            .map_err(|e| CliError::config("cps.tree_file", format!("{}: {e}", file.display())))?;
        let t = serde_json::from_str(&text).map_err(|e| CliError::config("cps.tree_file", e))?;
        (t, "file", None)
    } else {
        let levels = Config::require(&c.levels, "cps.levels")?;
        let bins = Config::require(&c.bins, "cps.bins")?;
        let (seed, n_paths, grid, model) = (cfg.seed()?, cfg.n_paths()?, cfg.grid()?, cfg.model()?);
        let batch = simulated_batch(model, grid, n_paths, seed)?;
        let tree = build_tree(&batch, levels, bins).map_err(|e| cps_error("cps", e))?;
        (tree, "simulated", Some(provenance(model, grid, n_paths, seed)))
    };
    tree.validate().map_err(|e| cps_error("cps.tree", e))?;

    let min_eps = min_eps_cps(&tree, c.eps_hi).map_err(|e| cps_error("cps", e))?;
    let probes = c
        .probe
        .iter()
        .map(|&e| find_cps(&tree, e).map(|s| SolutionSummary::from(&s)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| cps_error("cps.probe", e))?;

    let mut files = vec![OutputFile::table("tree", csv_bytes(|o| tree.write_csv(o)), format)];
    let summary = match &min_eps {
        MinEps::Found { epsilon, solution } => {
            files.push(OutputFile::table("solution", csv_bytes(|o| solution.write_csv(o)), format));
            MinEpsSummary::Found {
                epsilon_star: *epsilon,
                solution: solution.into(),
            }
        }
        MinEps::AboveHi { eps_hi } => MinEpsSummary::AboveEpsHi { eps_hi: *eps_hi },
    };
    let report = CpsReport {
        command: "cps",
        source,
        provenance: prov,
        level_sizes: tree.level_sizes(),
        n_nodes: tree.nodes.len(),
        eps_hi: c.eps_hi,
        min_eps: summary,
        probes,
        files: files.iter().map(|f| f.name.clone()).collect(),
    };
    files.insert(0, OutputFile::json("cps_report.json", &report));
    Ok(files)
}

#[derive(Serialize)]
struct GsvzFile<'a> {
    command: &'static str,
    density: &'a leadlag::spectral::CrossSpectralDensity,
    report: GsvzReport,
    files: Vec<String>,
}

pub fn gsvz(cfg: &Config, format: Format) -> Result<Vec<OutputFile>, CliError> {
    let g = Config::require(&cfg.gsvz, "gsvz")?;
    let report = gsvz_check(&g.density, g.lambda0).map_err(|e| match e {
        SpectralError::InvalidLambda0(_) | SpectralError::InvalidDensity(_) | SpectralError::SymmetryViolation(_) => {
            CliError::config("gsvz", e)
        }
        _ => CliError::runtime("gsvz", e),
    })?;
    let mut csv = String::from("lambda,partial\n");
    for (l, v) in &report.partials {
        csv += &format!("{l},{v}\n");
    }
    let partials = OutputFile::table("gsvz_partials", csv.into_bytes(), format);
    let body = GsvzFile {
        command: "gsvz",
        density: &g.density,
        files: vec![partials.name.clone()],
        report,
    };
    Ok(vec![OutputFile::json("gsvz_report.json", &body), partials])
}

//! The seven subcommands. Each one reads a strict JSON config, runs the
//! corresponding core operation, writes its artifacts plus a resolved
//! config echo and a manifest, and prints a one-line summary.

use crate::config::{ContinuousParamsFile, DiscreteParamsFile, ExperimentConfig};
use crate::engine::{simulate_parallel, smile_parallel};
use crate::io::{
    config_hash, write_convergence_csv, write_json, write_smile_csv, write_svg,
    write_terminal_csv, write_wgps, Manifest, SvgCurve,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use wgarch::aggregation::{aggregate, disaggregate, AggregationError};
use wgarch::limit::{
    continuous_to_discrete, convergence_table, discrete_to_continuous, kappa_limit, LimitError,
};
use wgarch::params::{
    validate_continuous, validate_discrete, KurtosisSpec, StepLength,
    ValidatedContinuousParams,
};
use wgarch::pricing::{OptionSpec, PricingError, SmileResult};
use wgarch::simulate::{SimDiagnostics, SimError};

/// Errors sorted by exit code: 2 for anything wrong with the input, 3
/// when a solver gives up on valid-looking input, 4 when a simulation
/// finishes but its diagnostics disqualify the result.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Parse(String),
    Validation(String),
    Solver(String),
    Diagnostic(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io(_) | Self::Parse(_) | Self::Validation(_) => 2,
            Self::Solver(_) => 3,
            Self::Diagnostic(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "Usage: {m}"),
            Self::Io(m) => write!(f, "Io: {m}"),
            Self::Parse(m) => write!(f, "Parse: {m}"),
            Self::Validation(m) | Self::Solver(m) | Self::Diagnostic(m) => write!(f, "{m}"),
        }
    }
}

fn from_aggregation(e: AggregationError) -> CliError {
    let msg = e.to_string();
    match e {
        AggregationError::NoValidBetaRoot { .. }
        | AggregationError::NoSolutionInBracket { .. }
        | AggregationError::ConvergenceFailure { .. }
        | AggregationError::DegenerateAlpha => CliError::Solver(msg),
        AggregationError::NotIntegerMultiple { .. }
        | AggregationError::InvalidKurtosis { .. }
        | AggregationError::Param(_) => CliError::Validation(msg),
    }
}

fn from_limit(e: LimitError) -> CliError {
    let msg = e.to_string();
    match e {
        LimitError::BetaQuadraticInfeasible { .. } | LimitError::ConvergenceFailure { .. } => {
            CliError::Solver(msg)
        }
        LimitError::KurtosisOutOfRange { .. } | LimitError::InvalidSweep | LimitError::Param(_) => {
            CliError::Validation(msg)
        }
    }
}

fn from_sim(e: SimError) -> CliError {
    let msg = e.to_string();
    match e {
        SimError::NegativeVarianceExplosion { .. } | SimError::InvalidKurtosisPath { .. } => {
            CliError::Diagnostic(msg)
        }
        SimError::Limit(inner) => from_limit(inner),
        SimError::InvalidConfig { .. }
        | SimError::InsufficientPaths { .. }
        | SimError::InsufficientData { .. }
        | SimError::Param(_) => CliError::Validation(msg),
    }
}

fn from_pricing(e: PricingError) -> CliError {
    let msg = e.to_string();
    match e {
        PricingError::NoConvergence { .. } => CliError::Solver(msg),
        PricingError::Sim(inner) => from_sim(inner),
        PricingError::InvalidOption { .. }
        | PricingError::PriceOutOfBounds { .. }
        | PricingError::HorizonMismatch { .. }
        | PricingError::DriftMismatch { .. } => CliError::Validation(msg),
    }
}

fn validation<E: fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

/// Resolved global flags shared by every subcommand.
pub struct Ctx {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: usize,
}

impl Ctx {
    fn read_config<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let text = fs::read_to_string(&self.config)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", self.config.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", self.config.display())))
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.out.display())))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_file(&self, name: &str, run: impl FnOnce(&Path) -> std::io::Result<()>) -> Result<(), CliError> {
        run(&self.path(name))
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", self.path(name).display())))
    }
}

/// Seed, grid, and diagnostics of the run a manifest describes; all
/// zero for the parameter-conversion commands.
#[derive(Default)]
struct RunStats {
    seed: u64,
    n_paths: u32,
    n_steps: u32,
    diagnostics: SimDiagnostics,
}

/// Writes the resolved-config echo and the manifest, completing a run.
/// Returns nothing the caller still needs; the summary line is theirs.
fn finish<C: Serialize>(
    ctx: &Ctx,
    command: &str,
    resolved: &C,
    stats: RunStats,
    mut outputs: Vec<String>,
    started: Instant,
) -> Result<(), CliError> {
    let echo_bytes = serde_json::to_vec_pretty(resolved)
        .map_err(|e| CliError::Io(format!("cannot serialize resolved config: {e}")))?;
    ctx.write_file("config_echo.json", |p| {
        let mut text = echo_bytes.clone();
        text.push(b'\n');
        fs::write(p, text)
    })?;
    outputs.push("config_echo.json".to_string());
    let manifest = Manifest {
        command: command.to_string(),
        config_hash: config_hash(&echo_bytes),
        seed: stats.seed,
        threads: ctx.threads,
        n_paths: stats.n_paths,
        n_steps: stats.n_steps,
        duration_ms: started.elapsed().as_millis(),
        truncated_steps: stats.diagnostics.truncated_steps,
        total_steps: stats.diagnostics.total_steps,
        kappa_clamped_steps: stats.diagnostics.kappa_clamped_steps,
        outputs,
    };
    ctx.write_file("manifest.json", |p| write_json(p, &manifest))
}

fn sim_stats(cfg: &ExperimentConfig, diagnostics: SimDiagnostics) -> RunStats {
    RunStats {
        seed: cfg.sim.seed,
        n_paths: cfg.sim.n_paths,
        n_steps: cfg.sim.n_steps,
        diagnostics,
    }
}

fn step_length(delta: f64) -> Result<StepLength, CliError> {
    StepLength::new(delta).map_err(validation)
}

pub fn cmd_aggregate(ctx: &Ctx, delta: f64) -> Result<(), CliError> {
    let started = Instant::now();
    let input: DiscreteParamsFile = ctx.read_config()?;
    let fine = validate_discrete(input.params).map_err(validation)?;
    let coarse = aggregate(&fine, input.kappa, step_length(delta)?).map_err(from_aggregation)?;
    ctx.prepare_out()?;
    let out = DiscreteParamsFile {
        params: *coarse.params,
        kappa: coarse.kurtosis,
        c_factor: coarse.c_factor,
    };
    ctx.write_file("aggregated.json", |p| write_json(p, &out))?;
    finish(ctx, "aggregate", &input, RunStats::default(), vec!["aggregated.json".to_string()], started)?;
    println!(
        "aggregate: delta {} -> {}: omega={} alpha={} beta={} kappa={}",
        input.params.delta.years(),
        delta,
        out.params.omega,
        out.params.alpha,
        out.params.beta,
        out.kappa
    );
    Ok(())
}

pub fn cmd_disaggregate(ctx: &Ctx, delta: f64) -> Result<(), CliError> {
    let started = Instant::now();
    let input: DiscreteParamsFile = ctx.read_config()?;
    let coarse = validate_discrete(input.params).map_err(validation)?;
    let fine = disaggregate(&coarse, input.kappa, step_length(delta)?).map_err(from_aggregation)?;
    ctx.prepare_out()?;
    let out = DiscreteParamsFile {
        params: *fine.params,
        kappa: fine.kurtosis,
        c_factor: fine.c_factor,
    };
    ctx.write_file("disaggregated.json", |p| write_json(p, &out))?;
    finish(
        ctx,
        "disaggregate",
        &input,
        RunStats::default(),
        vec!["disaggregated.json".to_string()],
        started,
    )?;
    println!(
        "disaggregate: delta {} -> {}: omega={} alpha={} beta={} kappa={}",
        input.params.delta.years(),
        delta,
        out.params.omega,
        out.params.alpha,
        out.params.beta,
        out.kappa
    );
    Ok(())
}

pub fn cmd_limit(ctx: &Ctx, sweep: bool) -> Result<(), CliError> {
    let started = Instant::now();
    let input: DiscreteParamsFile = ctx.read_config()?;
    let discrete = validate_discrete(input.params).map_err(validation)?;
    let recovery = discrete_to_continuous(&discrete, input.kappa).map_err(from_limit)?;
    ctx.prepare_out()?;
    let out = ContinuousParamsFile {
        params: *recovery.params,
        kappa: kappa_limit(&recovery.params),
        consistency_residual: Some(recovery.consistency_residual),
        inconsistent: Some(recovery.inconsistent),
    };
    ctx.write_file("continuous.json", |p| write_json(p, &out))?;
    let mut outputs = vec!["continuous.json".to_string()];
    if sweep {
        let deltas: Vec<StepLength> = (4..=16)
            .map(|k| StepLength::new(2.0_f64.powi(-k)).expect("dyadic steps are positive"))
            .collect();
        let rows = convergence_table(&recovery.params, &deltas).map_err(from_limit)?;
        ctx.write_file("convergence.csv", |p| write_convergence_csv(p, &rows))?;
        outputs.push("convergence.csv".to_string());
    }
    finish(ctx, "limit", &input, RunStats::default(), outputs, started)?;
    println!(
        "limit: omega={} theta={} alpha={} kappa={} residual={}{}",
        out.params.omega,
        out.params.theta,
        out.params.alpha,
        out.kappa,
        recovery.consistency_residual,
        if recovery.inconsistent { " (inconsistent)" } else { "" }
    );
    Ok(())
}

pub fn cmd_discretize(ctx: &Ctx, delta: f64) -> Result<(), CliError> {
    let started = Instant::now();
    let input: ContinuousParamsFile = ctx.read_config()?;
    let continuous = validate_continuous(input.params).map_err(validation)?;
    let implied = kappa_limit(&continuous);
    if (input.kappa - implied).abs() > 1e-9 * implied {
        return Err(CliError::Validation(format!(
            "InvalidKurtosis: file kappa {} contradicts the value {implied} implied by theta and alpha",
            input.kappa
        )));
    }
    let disc = continuous_to_discrete(&continuous, step_length(delta)?).map_err(from_limit)?;
    ctx.prepare_out()?;
    let out = DiscreteParamsFile {
        params: *disc.params,
        kappa: disc.kurtosis,
        c_factor: disc.c_factor,
    };
    ctx.write_file("discrete.json", |p| write_json(p, &out))?;
    finish(ctx, "discretize", &input, RunStats::default(), vec!["discrete.json".to_string()], started)?;
    println!(
        "discretize: delta {}: omega={} alpha={} beta={} kappa={}",
        delta, out.params.omega, out.params.alpha, out.params.beta, out.kappa
    );
    Ok(())
}

/// Applies the --seed override and revalidates the continuous block.
fn resolve_experiment(
    ctx: &Ctx,
) -> Result<(ExperimentConfig, ValidatedContinuousParams), CliError> {
    let mut cfg: ExperimentConfig = ctx.read_config()?;
    if let Some(seed) = ctx.seed {
        cfg.sim.seed = seed;
    }
    let continuous = validate_continuous(cfg.continuous).map_err(validation)?;
    cfg.kurtosis.resolve_unconditional(Some(&continuous)).map_err(validation)?;
    Ok((cfg, continuous))
}

pub fn cmd_simulate(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let (cfg, continuous) = resolve_experiment(ctx)?;
    let paths =
        simulate_parallel(&continuous, &cfg.kurtosis, cfg.sim, ctx.threads).map_err(from_sim)?;
    ctx.prepare_out()?;
    ctx.write_file("terminal.csv", |p| write_terminal_csv(p, &paths))?;
    let mut outputs = vec!["terminal.csv".to_string()];
    if cfg.sim.store_full_paths {
        ctx.write_file("paths.wgps", |p| write_wgps(p, &paths))?;
        outputs.push("paths.wgps".to_string());
    }
    let d = paths.diagnostics;
    finish(ctx, "simulate", &cfg, sim_stats(&cfg, d), outputs, started)?;
    println!(
        "simulate: {} paths x {} steps to horizon {}; variance truncated on {}/{} steps",
        cfg.sim.n_paths, cfg.sim.n_steps, cfg.sim.horizon, d.truncated_steps, d.total_steps
    );
    Ok(())
}

fn require_option(cfg: &ExperimentConfig) -> Result<OptionSpec, CliError> {
    cfg.option.ok_or_else(|| {
        CliError::Validation("InvalidOption: this command needs an option block in the config".to_string())
    })
}

fn check_positive(name: &'static str, value: f64) -> Result<(), CliError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(CliError::Validation(format!(
            "InvalidOption: {name} = {value} must be positive and finite"
        )));
    }
    Ok(())
}

/// The pricing-measure checks from the core smile driver, applied before
/// any paths are generated so a bad config fails fast.
fn check_measure(cfg: &ExperimentConfig, o: &OptionSpec) -> Result<(), CliError> {
    if (cfg.sim.horizon - o.maturity).abs() > 1e-12 * o.maturity.max(1.0) {
        return Err(from_pricing(PricingError::HorizonMismatch {
            paths_horizon: cfg.sim.horizon,
            maturity: o.maturity,
        }));
    }
    check_drift(cfg, o)
}

fn check_drift(cfg: &ExperimentConfig, o: &OptionSpec) -> Result<(), CliError> {
    if (cfg.continuous.mu - o.rate).abs() > 1e-12 {
        return Err(from_pricing(PricingError::DriftMismatch {
            paths_mu: cfg.continuous.mu,
            rate: o.rate,
        }));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PriceReport {
    option: OptionSpec,
    price: f64,
    price_se: f64,
    implied_vol: Option<f64>,
    iv_lo: Option<f64>,
    iv_hi: Option<f64>,
}

pub fn cmd_price(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let (mut cfg, continuous) = resolve_experiment(ctx)?;
    let option = require_option(&cfg)?;
    for (name, value) in
        [("spot", option.spot), ("strike", option.strike), ("maturity", option.maturity)]
    {
        check_positive(name, value)?;
    }
    check_measure(&cfg, &option)?;
    // Pricing consumes terminal prices only; a full path matrix would be
    // dead weight at smile scale.
    cfg.sim.store_full_paths = false;
    let (smile, paths) = smile_parallel(
        &continuous,
        &cfg.kurtosis,
        cfg.sim,
        &[option.strike],
        &option,
        ctx.threads,
    )
    .map_err(from_pricing)?;
    let row = smile.rows[0];
    let report = PriceReport {
        option,
        price: row.price,
        price_se: row.price_se,
        implied_vol: row.implied_vol,
        iv_lo: row.iv_lo,
        iv_hi: row.iv_hi,
    };
    ctx.prepare_out()?;
    ctx.write_file("price.json", |p| write_json(p, &report))?;
    finish(
        ctx,
        "price",
        &cfg,
        sim_stats(&cfg, paths.diagnostics),
        vec!["price.json".to_string()],
        started,
    )?;
    match row.implied_vol {
        Some(iv) => println!("price: {} +/- {} (implied vol {iv})", row.price, row.price_se),
        None => println!("price: {} +/- {} (vol not invertible)", row.price, row.price_se),
    }
    Ok(())
}

const CURVE_COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn iv_points(smile: &SmileResult) -> Vec<(f64, f64)> {
    smile
        .rows
        .iter()
        .filter_map(|r| r.implied_vol.map(|iv| (r.moneyness, iv)))
        .collect()
}

pub fn cmd_smile(ctx: &Ctx) -> Result<(), CliError> {
    let started = Instant::now();
    let (mut cfg, continuous) = resolve_experiment(ctx)?;
    let template = require_option(&cfg)?;
    cfg.sim.store_full_paths = false;
    let strikes = cfg.resolved_strikes(template.spot);
    let maturities = cfg.maturities.clone().unwrap_or_else(|| vec![template.maturity]);
    if maturities.is_empty() {
        return Err(CliError::Validation(
            "InvalidOption: maturities must hold at least one entry".to_string(),
        ));
    }
    check_positive("spot", template.spot)?;
    for &strike in &strikes {
        check_positive("strike", strike)?;
    }
    for &maturity in &maturities {
        check_positive("maturity", maturity)?;
    }
    check_drift(&cfg, &template)?;
    cfg.strikes = Some(strikes.clone());
    cfg.maturities = Some(maturities.clone());
    let nelson = KurtosisSpec::constant(3.0);
    let mut outputs = Vec::new();
    let mut curves = Vec::new();
    let mut diagnostics = SimDiagnostics::default();
    ctx.prepare_out()?;
    for (i, &maturity) in maturities.iter().enumerate() {
        let mut sim = cfg.sim;
        sim.horizon = maturity;
        let option = OptionSpec { maturity, ..template };
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        for (kurtosis, tag, dashed) in
            [(&cfg.kurtosis, "weak-GARCH", false), (&nelson, "Nelson", true)]
        {
            let (smile, paths) =
                smile_parallel(&continuous, kurtosis, sim, &strikes, &option, ctx.threads)
                    .map_err(from_pricing)?;
            let d = paths.diagnostics;
            diagnostics.truncated_steps += d.truncated_steps;
            diagnostics.total_steps += d.total_steps;
            diagnostics.kappa_clamped_steps += d.kappa_clamped_steps;
            let name = if dashed {
                format!("nelson_T{maturity}.csv")
            } else {
                format!("smile_T{maturity}.csv")
            };
            ctx.write_file(&name, |p| write_smile_csv(p, &smile))?;
            outputs.push(name);
            curves.push(SvgCurve {
                label: format!("{tag} T={maturity}"),
                color,
                dashed,
                points: iv_points(&smile),
            });
        }
        println!(
            "smile: T={maturity}: wrote smile_T{maturity}.csv and nelson_T{maturity}.csv ({} strikes)",
            strikes.len()
        );
    }
    ctx.write_file("smile.svg", |p| write_svg(p, &curves))?;
    outputs.push("smile.svg".to_string());
    finish(ctx, "smile", &cfg, sim_stats(&cfg, diagnostics), outputs, started)?;
    println!("smile: wrote smile.svg ({} curves)", curves.len());
    Ok(())
}

//! Command-line pipeline: supply curves, games and reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::agents::Strategy;
use crate::error::{Error, Result};
use crate::game::{sweep, EquilibriumTable, GameConfig, MarketSetup, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use crate::market::Mechanism;
use crate::model::PriceGrid;
use crate::reporting::{self, Artifacts, ReportContext, ScenarioSummary};
use crate::scenario::{Scenario, SupplyCurves, CONFIG_DIR_ENV};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

const SWEEP_AGENTS: [usize; 4] = [3, 6, 9, 12];

#[derive(Debug, Parser)]
#[command(name = "flexmarket", version, about = "Local flexibility market simulator")]
pub struct Cli {
    /// Directory searched for scenario files before the bundled ones.
    #[arg(long, global = true, env = CONFIG_DIR_ENV)]
    pub config_dir: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the asset models and write supply curves.
    Curves(CommonArgs),
    /// Play the bidding game for one cell or the full sweep.
    Game(GameArgs),
    /// Recompute statistics and cost-benefit tables from an equilibrium table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario names or files, comma separated (default: all bundled).
    #[arg(long, value_delimiter = ',')]
    pub scenario: Vec<String>,
    /// Price grid, `a..b` or a comma list (default: 1..ceiling).
    #[arg(long)]
    pub prices: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub mechanism: Vec<Mechanism>,
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<Strategy>,
    /// Agent counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub agents: Vec<usize>,
    /// Every mechanism, strategic strategy and agent count 3, 6, 9, 12.
    #[arg(long)]
    pub sweep: bool,
    /// Read supply curves from `DIR/<scenario>.csv` instead of solving them.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Write per-cell round-by-round logs.
    #[arg(long)]
    pub replay: bool,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Equilibrium table written by `game`.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Parses process arguments, runs, and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage errors share the general error code; help and version succeed
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let dir = cli.config_dir.as_deref();
    let dispatch = || match &cli.command {
        Command::Curves(a) => curves(a, dir),
        Command::Game(a) => game(a, dir),
        Command::Report(a) => report(a),
    };
    match cli.jobs {
        None => dispatch(),
        Some(0) => Err(Error::config("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} worker threads: {e}")))?
            .install(dispatch),
    }
}

fn load_scenarios(args: &CommonArgs, dir: Option<&Path>) -> Result<Vec<Scenario>> {
    let names: Vec<String> = if args.scenario.is_empty() {
        Scenario::bundled_names().into_iter().map(String::from).collect()
    } else {
        args.scenario.clone()
    };
    // validate every file before solving anything
    names
        .iter()
        .map(|n| {
            let s = Scenario::resolve(n, dir)?;
            match &args.prices {
                Some(p) => s.clone().with_prices(PriceGrid::parse(p, s.requirement.ceiling)?),
                None => Ok(s),
            }
        })
        .collect()
}

fn context(s: &Scenario) -> ReportContext {
    ReportContext {
        demand: s.requirement.demand,
        ceiling: s.requirement.ceiling,
        window_hours: s.requirement.window_hours,
    }
}

fn shared_context(scenarios: &[Scenario]) -> Result<ReportContext> {
    let ctx = context(&scenarios[0]);
    if scenarios.iter().any(|s| context(s) != ctx) {
        return Err(Error::config("scenarios in one run must share demand, ceiling and window"));
    }
    Ok(ctx)
}

fn solve_curves(scenarios: &[Scenario]) -> Result<Vec<(String, SupplyCurves)>> {
    scenarios
        .iter()
        .map(|s| {
            log::info!("solving supply curves for {}", s.name);
            Ok((s.name.to_lowercase(), s.supply_curves()?))
        })
        .collect()
}

fn true_prices(scenarios: &[Scenario], curves: &[(String, SupplyCurves)]) -> Result<Vec<(String, f64)>> {
    scenarios
        .iter()
        .zip(curves)
        .map(|(s, (name, c))| Ok((name.clone(), s.market_setup(c)?.true_price()?)))
        .collect()
}

fn curves(args: &CommonArgs, dir: Option<&Path>) -> Result<ExitCode> {
    let scenarios = load_scenarios(args, dir)?;
    let ctx = shared_context(&scenarios)?;
    let curves = solve_curves(&scenarios)?;
    let prices = true_prices(&scenarios, &curves)?;
    for ((name, c), (_, p)) in curves.iter().zip(&prices) {
        let agg = c.aggregate()?;
        println!("{name}: max supply {:.3} MW, true equilibrium {p} £/MW/h", agg.max_capacity());
    }
    let artifacts = Artifacts {
        context: ctx,
        curves: &curves,
        true_prices: &prices,
        table: None,
        replay: false,
    };
    reporting::emit(&artifacts, &args.out)?;
    Ok(ExitCode::SUCCESS)
}

fn game(args: &GameArgs, dir: Option<&Path>) -> Result<ExitCode> {
    if args.sweep && !(args.mechanism.is_empty() && args.strategy.is_empty() && args.agents.is_empty()) {
        return Err(Error::config("--sweep cannot be combined with --mechanism, --strategy or --agents"));
    }
    if !args.sweep && (args.mechanism.is_empty() || args.strategy.is_empty() || args.agents.is_empty()) {
        return Err(Error::config("give --mechanism, --strategy and --agents, or --sweep"));
    }
    if args.agents.iter().any(|&n| n == 0) {
        return Err(Error::config("--agents values must be positive"));
    }
    let scenarios = load_scenarios(&args.common, dir)?;
    let ctx = shared_context(&scenarios)?;
    let curves = match &args.curves {
        Some(cdir) => scenarios
            .iter()
            .map(|s| {
                let name = s.name.to_lowercase();
                let path = cdir.join(format!("{name}.csv"));
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let c = reporting::parse_supply_curve_csv(&text, s.requirement.ceiling, &path)?;
                if c.prices != s.prices {
                    return Err(Error::config(format!("{}: price grid differs from the scenario", path.display())));
                }
                Ok((name, c))
            })
            .collect::<Result<Vec<_>>>()?,
        None => solve_curves(&scenarios)?,
    };
    let setups: Vec<(String, MarketSetup)> = scenarios
        .iter()
        .zip(&curves)
        .map(|(s, (name, c))| Ok((name.clone(), s.market_setup(c)?)))
        .collect::<Result<_>>()?;
    let prices = true_prices(&scenarios, &curves)?;

    let (mechanisms, strategies, agents) = if args.sweep {
        (Mechanism::ALL.to_vec(), Strategy::STRATEGIC.to_vec(), SWEEP_AGENTS.to_vec())
    } else {
        (args.mechanism.clone(), args.strategy.clone(), args.agents.clone())
    };
    let mut template = GameConfig::new(mechanisms[0], strategies[0], agents[0]);
    template.tolerance = args.tolerance;
    template.max_iterations = args.max_iterations;
    template.record_trace = args.replay;
    template.validate()?;

    let table: EquilibriumTable = sweep(&setups, &mechanisms, &strategies, &agents, &template);
    for r in table.rows() {
        if r.error.is_empty() {
            println!(
                "{} {} {} {}: {} £/MW/h (true {}){}",
                r.scenario,
                r.mechanism,
                r.strategy,
                r.agents,
                r.equilibrium_price,
                r.true_price,
                if r.converged { "" } else { " [not converged]" }
            );
        } else {
            println!("{} {} {} {}: failed: {}", r.scenario, r.mechanism, r.strategy, r.agents, r.error);
        }
    }
    let artifacts = Artifacts {
        context: ctx,
        curves: &curves,
        true_prices: &prices,
        table: Some(&table),
        replay: args.replay,
    };
    reporting::emit(&artifacts, &args.common.out)?;
    if table.cells.iter().any(|c| c.outcome.is_err()) {
        return Ok(ExitCode::from(EXIT_ERROR));
    }
    Ok(if table.all_converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

fn report(args: &ReportArgs) -> Result<ExitCode> {
    let file = reporting::load_table(&args.table)?;
    let mut scenarios: Vec<ScenarioSummary> = Vec::new();
    for r in &file.rows {
        if r.error.is_empty() && !scenarios.iter().any(|s| s.name == r.scenario) {
            scenarios.push(ScenarioSummary {
                name: r.scenario.clone(),
                true_price: r.true_price,
                max_supply: 0.0,
            });
        }
    }
    let written = reporting::emit_report(&file.rows, &file.context, scenarios, &args.out)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

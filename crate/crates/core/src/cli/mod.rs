//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, 3 input parse or validation error,
//! 4 infeasible plan or problem.

mod report;
mod svg;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::charlib::{self, Application, ModuleLibrary, Platform, Severity};
use crate::data;
use crate::explore::{self, ExploreError, Problem, RankedPlan};
use crate::model::{self, ExecutionPlan, ModelError, PerformanceEstimate, Strategy, VariantAssignment};
use crate::rational::Rational;
use crate::sim::{self, SimError, SimOptions};

pub use report::case_study_report;
pub use svg::{render_area_time, render_gantt};

#[derive(Debug, Parser)]
#[command(name = "prfront", version, about = "Partial-reconfiguration design model, explorer and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one plan with the closed-form model.
    Estimate(PlanArgs),
    /// Search strategies and variant assignments for the best plan.
    Explore(ExploreArgs),
    /// Run one plan through the event simulator.
    Simulate(SimulateArgs),
    /// Print the case-study tables for the shipped data.
    Report,
}

#[derive(Debug, Args)]
struct Inputs {
    /// Module library file; the shipped library if omitted.
    #[arg(long, value_name = "PATH")]
    library: Option<PathBuf>,
    /// Application file, or the name of a shipped application.
    #[arg(long, value_name = "PATH")]
    app: String,
    /// Platform file; the shipped platform if omitted.
    #[arg(long, value_name = "PATH")]
    platform: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Asic,
    Pr1,
    Pr2,
    Prk,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Asic => Strategy::Asic,
            StrategyArg::Pr1 => Strategy::Pr1,
            StrategyArg::Pr2 => Strategy::Pr2,
            StrategyArg::Prk => Strategy::Prk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemArg {
    MaxT,
    MinL,
    GivenL,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Region count for prk.
    #[arg(long, value_name = "INT")]
    k: Option<u32>,
    #[arg(long, value_name = "INT", default_value_t = 1)]
    batch: u32,
    /// Region size as a fraction of the budget, e.g. 1/2.
    #[arg(long, value_name = "RATIONAL")]
    fraction: Option<Rational>,
    /// Comma-separated variant ids in task order; the best matching plan
    /// from the explorer if omitted.
    #[arg(long, value_name = "IDS", value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct ExploreArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum)]
    problem: ProblemArg,
    #[arg(long, value_name = "MS")]
    latency_bound: Option<Rational>,
    /// Largest region count tried for prk.
    #[arg(long, value_name = "INT")]
    k: Option<u32>,
    /// Only consider this batch size.
    #[arg(long, value_name = "INT")]
    batch: Option<u32>,
    /// Write the Pareto fronts as CSV.
    #[arg(long, value_name = "PATH")]
    pareto: Option<PathBuf>,
    /// Ranked plans to print.
    #[arg(long, value_name = "INT", default_value_t = 10)]
    top: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Runs per task; 4 macro-cycles if omitted.
    #[arg(long, value_name = "INT")]
    horizon: Option<u32>,
    /// Timeline CSV destination; printed after the summary if omitted.
    #[arg(long, value_name = "PATH")]
    out_csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    out_svg: Option<PathBuf>,
    /// Scale SVG lanes by region area.
    #[arg(long)]
    area_time: bool,
    /// Share memory bandwidth between concurrently running modules.
    #[arg(long)]
    bandwidth_sharing: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Infeasible(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
            Failure::Infeasible(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Infeasible(m) => m,
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Assignment(_) | ModelError::Domain(_) => Failure::Input(e.to_string()),
            _ => Failure::Infeasible(e.to_string()),
        }
    }
}

impl From<ExploreError> for Failure {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Problem(_) => Failure::Usage(e.to_string()),
            ExploreError::Infeasible(_) => Failure::Infeasible(e.to_string()),
            ExploreError::TooLarge { .. } => Failure::Input(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => (*m).into(),
            SimError::Horizon => Failure::Usage(e.to_string()),
            SimError::Deadlock(_) => Failure::Infeasible(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

struct Loaded {
    library: ModuleLibrary,
    application: Application,
    platform: Platform,
}

fn load(inputs: &Inputs, err: &mut dyn Write) -> Result<Loaded, Failure> {
    let library = match &inputs.library {
        Some(p) => charlib::parse_library(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => data::library(),
    };
    let platform = match &inputs.platform {
        Some(p) => charlib::parse_platform(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?,
        None => data::platform(),
    };
    let path = Path::new(&inputs.app);
    let text = match data::application_text(&inputs.app) {
        Some(t) if !path.exists() => t.to_string(),
        _ => read(path)?,
    };
    let application = charlib::parse_application(&text).map_err(|e| Failure::Input(format!("{}: {e}", inputs.app)))?;
    let report = charlib::validate(&library, &application, &platform);
    for f in &report.findings {
        if f.severity != Severity::Fatal {
            let _ = writeln!(err, "warning: {f}");
        }
    }
    if !report.is_ok() {
        let msgs: Vec<String> = report.fatal().map(|f| f.to_string()).collect();
        return Err(Failure::Input(format!("validation failed:\n  {}", msgs.join("\n  "))));
    }
    Ok(Loaded { library, application, platform })
}

fn build_plan(args: &PlanArgs, loaded: &Loaded) -> Result<ExecutionPlan, Failure> {
    let strategy = Strategy::from(args.strategy);
    let k = match (strategy, args.k) {
        (Strategy::Prk, Some(k)) if k >= 2 => k,
        (Strategy::Prk, Some(_)) => return Err(Failure::Usage("--k must be at least 2 for prk".into())),
        (Strategy::Prk, None) => 2,
        (_, Some(_)) => return Err(Failure::Usage("--k only applies to prk".into())),
        (_, None) => 0,
    };
    if args.batch == 0 {
        return Err(Failure::Usage("--batch must be at least 1".into()));
    }
    if args.batch > 1 && !matches!(strategy, Strategy::Pr1 | Strategy::Prk) {
        return Err(Failure::Usage(format!("--batch only applies to pr1 and prk, not {strategy}")));
    }
    match &args.variants {
        Some(ids) => {
            let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
            let a = VariantAssignment::from_ids(&loaded.application, &loaded.library, &ids)
                .map_err(|e| Failure::Input(e.to_string()))?;
            let mut plan = match strategy {
                Strategy::Asic => ExecutionPlan::asic(a),
                Strategy::Pr1 => ExecutionPlan::pr1(a),
                Strategy::Pr2 => ExecutionPlan::pr2(a),
                Strategy::Prk => ExecutionPlan::prk(a, k),
            }
            .with_batch(args.batch);
            if let Some(f) = args.fraction {
                plan = plan.with_region_fraction(f);
            }
            plan.check().map_err(|e| Failure::Usage(e.to_string()))?;
            Ok(plan)
        }
        None => best_matching(strategy, k, args, loaded),
    }
}

/// Best explored plan with the requested strategy, region count, batch
/// size and (if given) region fraction.
fn best_matching(strategy: Strategy, k: u32, args: &PlanArgs, loaded: &Loaded) -> Result<ExecutionPlan, Failure> {
    let by_throughput = strategy == Strategy::Prk || (strategy == Strategy::Pr1 && args.batch > 1);
    let problem = if by_throughput {
        Problem::max_throughput().with_batches(vec![args.batch]).with_k_max(k.max(2))
    } else {
        Problem::min_latency()
    };
    let result = explore::solve(&problem, &loaded.application, &loaded.library, &loaded.platform)?;
    let found = result.ranked.iter().find(|r| {
        let p = &r.plan;
        p.strategy == strategy
            && (strategy != Strategy::Prk || p.k == k)
            && p.batch_b == args.batch
            && args.fraction.is_none_or(|f| p.region_fraction == f)
    });
    match found {
        Some(r) => Ok(r.plan.clone()),
        None => {
            let why = result
                .infeasible
                .iter()
                .find(|i| i.strategy == strategy)
                .map(|i| i.reason.clone())
                .unwrap_or_else(|| "no assignment fits the requested configuration".into());
            Err(Failure::Infeasible(format!("no feasible {strategy} plan: {why}")))
        }
    }
}

fn megabytes(bytes: u64) -> String {
    format!("{:.1} MB", Rational::new(bytes as i128, 1_000_000))
}

fn estimate_table(plan: &ExecutionPlan, e: &PerformanceEstimate) -> String {
    let mut s = String::new();
    let rows: Vec<(&str, String)> = vec![
        ("plan", plan.label()),
        ("latency_ms", format!("{:.3}", e.latency_ms)),
        ("throughput_fps", format!("{:.3}", e.throughput_fps)),
        ("buffer_bytes", format!("{} ({})", e.buffer_bytes, megabytes(e.buffer_bytes))),
        ("pr_time_ms", format!("{:.3}", e.pr_time_ms)),
        ("bandwidth_peak_mbps", format!("{:.3}", e.bandwidth_peak_mbps)),
        ("resources_used", e.resources_used.to_string()),
        ("bottleneck", format!("{} {:.3}%", e.bottleneck, e.bottleneck_utilization * Rational::from(100u32))),
        ("throughput_density", format!("{:.3} fps per {}", e.throughput_density, e.bottleneck)),
        ("latency_density", format!("{:.3} (1/s) per {}", e.latency_density, e.bottleneck)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<20} {v}");
    }
    s
}

fn cmd_estimate(args: &PlanArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let loaded = load(&args.inputs, err)?;
    let plan = build_plan(args, &loaded)?;
    let e = model::estimate(&plan, &loaded.platform)?;
    let _ = write!(out, "{}", estimate_table(&plan, &e));
    Ok(())
}

fn ranked_row(i: usize, r: &RankedPlan) -> String {
    format!(
        "{:>4}  {:<8} {:>12.3} {:>14.3} {:>9.3}  {}",
        i + 1,
        r.plan.strategy.name(),
        r.estimate.latency_ms,
        r.estimate.throughput_fps,
        r.estimate.bottleneck_utilization,
        r.plan.label()
    )
}

const RANK_HEADER: &str = "rank  strategy   latency_ms throughput_fps      util  plan";

fn pareto_csv(front: &explore::ParetoFront) -> String {
    let mut s = String::from("front,strategy,resource,used,utilization,performance,plan\n");
    for (name, pts) in [("asic", &front.asic), ("pr", &front.pr), ("combined", &front.combined)] {
        for p in pts {
            let _ = writeln!(
                s,
                "{name},{},{},{},{},{},{}",
                p.strategy.name(),
                p.resource,
                p.used.to_fixed(6),
                p.utilization.to_fixed(6),
                p.performance.to_fixed(6),
                p.label
            );
        }
    }
    s
}

fn cmd_explore(args: &ExploreArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let mut problem = match (args.problem, args.latency_bound) {
        (ProblemArg::MaxT, None) => Problem::max_throughput(),
        (ProblemArg::MinL, None) => Problem::min_latency(),
        (ProblemArg::GivenL, Some(b)) => Problem::min_area(b),
        (ProblemArg::GivenL, None) => return Err(Failure::Usage("given-l needs --latency-bound".into())),
        (_, Some(_)) => return Err(Failure::Usage("--latency-bound only applies to given-l".into())),
    };
    if let Some(k) = args.k {
        problem = problem.with_k_max(k);
    }
    if let Some(b) = args.batch {
        problem = problem.with_batches(vec![b]);
    }
    problem.check()?;
    let loaded = load(&args.inputs, err)?;
    let r = explore::solve(&problem, &loaded.application, &loaded.library, &loaded.platform)?;
    let mut s = String::new();
    let _ = write!(s, "problem: {}", problem.kind.name());
    if let Some(b) = problem.latency_bound_ms {
        let _ = write!(s, " (latency bound {b:.3} ms)");
    }
    let _ = writeln!(s, "\napplication: {}\nplans evaluated: {}\n", loaded.application.name, r.evaluated);
    let _ = writeln!(s, "{RANK_HEADER}");
    for (i, p) in r.ranked.iter().take(args.top).enumerate() {
        let _ = writeln!(s, "{}", ranked_row(i, p));
    }
    if r.ranked.len() > args.top {
        let _ = writeln!(s, "  ... {} more", r.ranked.len() - args.top);
    }
    let _ = writeln!(s, "\nbest per strategy:");
    for (strategy, p) in &r.best_per_strategy {
        let _ = writeln!(s, "  {:<5} {:>12.3}  {}", strategy.name(), p.objective, p.plan.label());
    }
    if !r.infeasible.is_empty() {
        let _ = writeln!(s, "\nno feasible plan:");
        for i in &r.infeasible {
            let _ = writeln!(s, "  {:<5} {}", i.strategy.name(), i.reason);
        }
    }
    let _ = write!(out, "{s}");
    if let Some(path) = &args.pareto {
        write_file(path, &pareto_csv(&r.pareto))?;
    }
    Ok(())
}

fn default_horizon(plan: &ExecutionPlan) -> u32 {
    let cycle = match plan.strategy {
        Strategy::Prk => plan.batch_b * plan.k,
        _ => plan.batch_b,
    };
    4 * cycle
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let loaded = load(&args.plan.inputs, err)?;
    if loaded.application.is_empty() {
        return Err(Failure::Input("application has no tasks".into()));
    }
    let plan = build_plan(&args.plan, &loaded)?;
    let horizon = args.horizon.unwrap_or_else(|| default_horizon(&plan));
    let options = SimOptions { bandwidth_sharing: args.bandwidth_sharing };
    let r = sim::simulate(&plan, &loaded.platform, horizon, options)?;
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {}", "plan", plan.label());
    let _ = writeln!(s, "{:<22} {horizon}", "horizon");
    let _ = writeln!(s, "{:<22} {:.3}", "first_run_latency_ms", r.first_run_latency_ms);
    match r.steady_throughput_fps {
        Some(t) => {
            let _ = writeln!(s, "{:<22} {t:.3}", "steady_throughput_fps");
        }
        None => {
            let _ = writeln!(s, "{:<22} n/a (horizon shorter than two cycles)", "steady_throughput_fps");
        }
    }
    let _ = writeln!(s, "{:<22} {:.3}", "mean_throughput_fps", r.mean_throughput_fps);
    let _ = writeln!(s, "{:<22} {} ({})", "peak_buffer_bytes", r.peak_buffer_bytes, megabytes(r.peak_buffer_bytes));
    let _ = writeln!(s, "{:<22} {:.3}", "makespan_ms", r.makespan_ms);
    for (i, b) in r.busy_fraction.iter().enumerate() {
        let _ = writeln!(s, "{:<22} {:.3}", format!("busy_fraction[{i}]"), b);
    }
    if let Ok(e) = model::estimate(&plan, &loaded.platform) {
        let d = sim::compare(&r, &e);
        let _ = writeln!(
            s,
            "{:<22} {:.3} ({:.3}%)",
            "model_latency_delta_ms",
            d.latency_abs_ms,
            d.latency_rel * Rational::from(100u32)
        );
        if let (Some(a), Some(rel)) = (d.throughput_abs_fps, d.throughput_rel) {
            let _ = writeln!(s, "{:<22} {a:.3} ({:.3}%)", "model_tput_delta_fps", rel * Rational::from(100u32));
        }
    }
    let csv = sim::timeline_csv(&r.timeline);
    match &args.out_csv {
        Some(p) => write_file(p, &csv)?,
        None => {
            let _ = write!(s, "\n{csv}");
        }
    }
    if let Some(p) = &args.out_svg {
        let svg = if args.area_time {
            let shares: Vec<Rational> = match model::placement(&plan, &loaded.platform) {
                Ok(place) if plan.strategy.is_pr() => {
                    place.regions.iter().map(|reg| reg.bottleneck(&loaded.platform.budget).1).collect()
                }
                _ => plan
                    .assignment
                    .variants()
                    .iter()
                    .map(|v| v.resources.bottleneck(&loaded.platform.budget).1)
                    .collect(),
            };
            render_area_time(&r.timeline, &shares)
        } else {
            render_gantt(&r.timeline)
        };
        write_file(p, &svg)?;
    }
    let _ = write!(out, "{s}");
    if let Some(b) = &r.blocked {
        return Err(Failure::Infeasible(b.to_string()));
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                2
            } else {
                let _ = write!(out, "{}", e.render());
                0
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, out, err),
        Command::Explore(a) => cmd_explore(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::Report => {
            let _ = write!(out, "{}", case_study_report());
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

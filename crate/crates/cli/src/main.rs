use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bt_recover::bt::ChangeSet;
use bt_recover::harness::{self, AdvisorMode, MetricsSummary, TrialRecord};
use bt_recover::monitor::{execute_with_monitoring, MonitorConfig};
use bt_recover::planner::{plan, Goal, PlannerConfig};
use bt_recover::registry::Registry;
use bt_recover::sim::{load_scenario, SnapshotDetail};
use bt_recover::types::GroundRef;
use bt_recover::{to_document, to_dot};

#[derive(Parser)]
#[command(name = "btr", about = "Failure-aware behavior tree planning and execution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a behavior tree from goal conditions by backchaining.
    Plan(PlanArgs),
    /// Simulator inspection.
    #[command(subcommand)]
    Sim(SimCommand),
    /// One monitored execution of a scenario.
    Run(RunArgs),
    /// Repeated monitored runs with per-trial scoring.
    Trials(TrialsArgs),
    /// The 2x2 sweep over scene detail and the feasibility gate.
    Ablate(AblateArgs),
    /// Summarize saved trial records.
    Report(ReportArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Skill library JSON; defaults to the built-in library.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Goal conditions, e.g. "inserted(peg,hole1)" or a comma-joined list.
    #[arg(long)]
    goal: String,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    /// Output file for the behavior tree document.
    #[arg(long)]
    out: PathBuf,
    /// Also write a Graphviz rendering.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SimCommand {
    /// Print a scenario: objects, facts, goal, and the scene text.
    Show { scenario: String },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "mock")]
    advisor: AdvisorModeArg,
    /// Skip the feasibility gate on advisor suggestions.
    #[arg(long)]
    no_feasibility_gate: bool,
    /// Extra template completions JSON (name -> completion).
    #[arg(long)]
    completions: Option<PathBuf>,
    /// Write the full execution report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the final tree with recovery insertions highlighted.
    #[arg(long)]
    dot_diff: Option<PathBuf>,
}

#[derive(Args)]
struct TrialsArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value = "mock")]
    advisor: AdvisorModeArg,
    #[arg(long, short = 'n', default_value_t = 10)]
    trials: usize,
    #[arg(long)]
    no_feasibility_gate: bool,
    /// Write the raw trial records JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, short = 'n', default_value_t = 10)]
    trials: usize,
    /// Exit nonzero unless the gate rescues the blind advisor: blind
    /// gate-on must beat blind gate-off, and gated cells must succeed.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Trial record JSON files, as written by `trials --out`.
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
}

#[derive(Clone)]
struct AdvisorModeArg(AdvisorMode);

impl std::str::FromStr for AdvisorModeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(AdvisorModeArg)
    }
}

/// Splits "a(x,y),b(z)" on the commas between conditions.
fn parse_goal(text: &str) -> Result<Goal, String> {
    let mut conditions = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, ch) in text.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                conditions.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    conditions.push(text[start..].trim());
    conditions
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| GroundRef::parse(s).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(|conditions| Goal { conditions })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Plan(args) => {
            let registry = match &args.library {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
                    Registry::from_library_str(&text).map_err(|e| e.to_string())?
                }
                None => Registry::builtin(),
            };
            let goal = parse_goal(&args.goal)?;
            let config = PlannerConfig {
                max_depth: args.max_depth,
                ..PlannerConfig::default()
            };
            let result = plan(&goal, &registry, &config).map_err(|e| e.to_string())?;
            fs::write(&args.out, to_document(&result.tree)).map_err(|e| e.to_string())?;
            for warning in &result.depth_warnings {
                eprintln!("warning: depth limit reached expanding {warning}");
            }
            if let Some(dot_path) = &args.dot {
                fs::write(dot_path, to_dot(&result.tree, &ChangeSet::default()))
                    .map_err(|e| e.to_string())?;
            }
            println!("wrote {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sim(SimCommand::Show { scenario }) => {
            let scenario = load_scenario(&scenario).map_err(|e| e.to_string())?;
            println!("scenario: {}", scenario.name);
            println!(
                "goal: {}",
                scenario
                    .goal
                    .conditions
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!(
                "reference: {} via {}",
                scenario.reference.condition, scenario.reference.skill
            );
            let scene = scenario.snapshot(&scenario.initial, SnapshotDetail::Full);
            println!("{}", scene.text);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let scenario = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
            let mut config = MonitorConfig {
                feasibility_gate: !args.no_feasibility_gate,
                ..MonitorConfig::default()
            };
            if let Some(path) = &args.completions {
                config
                    .load_completions(&path.to_string_lossy())
                    .map_err(|e| e.to_string())?;
            }
            let advisor = args.advisor.0.build().map_err(|e| e.to_string())?;
            let report = execute_with_monitoring(&scenario, advisor.as_ref(), &config)
                .map_err(|e| e.to_string())?;
            println!(
                "{}: {:?} in {} ticks ({} failures, {} recoveries)",
                report.scenario,
                report.outcome,
                report.ticks_used,
                report.failures.len(),
                report.recoveries.len()
            );
            for rec in &report.recoveries {
                for rej in &rec.rejections {
                    println!("  rejected {}: {}", rej.skill, rej.reason);
                }
                for m in &rec.registry_mutations {
                    println!("  registry: {m}");
                }
            }
            for note in &report.notes {
                println!("  note: {note}");
            }
            if let Some(path) = &args.report {
                fs::write(
                    path,
                    serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?,
                )
                .map_err(|e| e.to_string())?;
            }
            if let Some(path) = &args.dot_diff {
                // re-derive the final tree and highlight the last recovery
                let registry = rebuild_registry(&scenario, &report)?;
                let final_plan =
                    plan(&scenario.goal, &registry, &config.planner).map_err(|e| e.to_string())?;
                let highlight = report
                    .recoveries
                    .last()
                    .map(|r| r.change_set.clone())
                    .unwrap_or_default();
                fs::write(path, to_dot(&final_plan.tree, &highlight))
                    .map_err(|e| e.to_string())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Trials(args) => {
            let scenario = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
            let config = MonitorConfig {
                feasibility_gate: !args.no_feasibility_gate,
                ..MonitorConfig::default()
            };
            let records =
                harness::run_trials_lenient(&scenario, args.advisor.0, &config, args.trials)
                    .map_err(|e| e.to_string())?;
            if let Some(path) = &args.out {
                fs::write(
                    path,
                    serde_json::to_string_pretty(&records).map_err(|e| e.to_string())?,
                )
                .map_err(|e| e.to_string())?;
            }
            let summary = harness::summarize(&records).map_err(|e| e.to_string())?;
            print!(
                "{}",
                harness::emit_report(&[summary], "table").map_err(|e| e.to_string())?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Ablate(args) => {
            let scenario = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
            let summaries = harness::ablate(&scenario, args.trials, &MonitorConfig::default())
                .map_err(|e| e.to_string())?;
            print!(
                "{}",
                harness::emit_report(&summaries, "table").map_err(|e| e.to_string())?
            );
            if args.check && !ablation_holds(&summaries) {
                eprintln!("ablation check failed: the feasibility gate did not help");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(args) => {
            if args.inputs.is_empty() {
                return Err("no input files".to_string());
            }
            let mut summaries = Vec::new();
            for path in &args.inputs {
                let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
                let records: Vec<TrialRecord> =
                    serde_json::from_str(&text).map_err(|e| e.to_string())?;
                summaries.push(harness::summarize(&records).map_err(|e| e.to_string())?);
            }
            print!(
                "{}",
                harness::emit_report(&summaries, &args.format).map_err(|e| e.to_string())?
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn cell<'a>(
    summaries: &'a [MetricsSummary],
    advisor: &str,
    gate: bool,
) -> Option<&'a MetricsSummary> {
    summaries
        .iter()
        .find(|s| s.advisor == advisor && s.feasibility_gate == gate)
}

fn ablation_holds(summaries: &[MetricsSummary]) -> bool {
    let (Some(full_on), Some(blind_on), Some(blind_off)) = (
        cell(summaries, "mock", true),
        cell(summaries, "mock-blind", true),
        cell(summaries, "mock-blind", false),
    ) else {
        return false;
    };
    full_on.success_rate == 1.0
        && blind_on.success_rate == 1.0
        && blind_off.success_rate < blind_on.success_rate
}

/// Replays the recorded registry mutations so the final tree can be
/// rendered without re-querying the advisor.
fn rebuild_registry(
    scenario: &bt_recover::sim::Scenario,
    report: &bt_recover::monitor::ExecutionReport,
) -> Result<Registry, String> {
    let mut registry = scenario.build_registry().map_err(|e| e.to_string())?;
    let config = MonitorConfig::default();
    for rec in &report.recoveries {
        bt_recover::monitor::apply_verdict_mutations(
            &mut registry,
            &rec.verdict,
            report
                .failures
                .first()
                .ok_or("report has recoveries but no failures")?,
            &config,
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(registry)
}

//! Command-line driver for the OpenFlow discovery simulator.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ofdp_sim::attack::{plan_topology_poison, DeceptiveLink, PoisonMode};
use ofdp_sim::controller::FlowRequest;
use ofdp_sim::gappatch::PatchMode;
use ofdp_sim::planner::{random_flows, search, Env, GoalKind, PlannerGoal, SearchConfig, SearchReport};
use ofdp_sim::scenario::{load_topology, run, target_from_links, FamilyChoice, Scenario};
use ofdp_sim::sim::{SimConfig, Simulation};
use ofdp_sim::topo::{to_dot, DotStyle, Topology};

#[derive(Debug, Parser)]
#[command(name = "ofdp-sim", version, about = "OpenFlow link-discovery simulator and topology-poisoning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and write its report, views and tables
    Run {
        scenario: PathBuf,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed
        #[arg(long, env = "SEED")]
        seed: Option<u64>,
    },
    /// Print the controller view after discovery
    Discover {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
    },
    /// Print the poisonous entries realizing a target topology
    Poison {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Print the gap patches for a target topology and a flow set
    Patch {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        flows: FlowArgs,
        #[arg(long, value_enum, default_value_t = PatchArg::Proactive)]
        mode: PatchArg,
    },
    /// Search for a deceptive topology meeting a flow-coverage goal
    Plan(PlanArgs),
    /// Print every switch's flow table after discovery and optional poisoning
    DumpTables {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        target: OptTargetArgs,
        #[command(flatten)]
        flows: FlowArgs,
    },
    /// Print the controller view, optionally after poisoning
    View {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        target: OptTargetArgs,
        /// Print DOT instead of JSON
        #[arg(long)]
        dot: bool,
    },
    /// Render a topology, or a view of it, as DOT
    RenderDot {
        /// Fixture name or topology file
        #[arg(long)]
        topology: String,
        /// View to draw against the topology
        #[arg(long)]
        view: Option<String>,
    },
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Fixture name or topology file
    #[arg(long)]
    topology: String,
    /// Discovery packets share one source address
    #[arg(long)]
    fingerprint: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// Target topology: fixture name or file
    #[arg(long)]
    target: Option<String>,
    /// Fabricated link such as `A:2->1:B`; repeatable
    #[arg(long = "link")]
    links: Vec<String>,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
struct OptTargetArgs {
    #[arg(long)]
    target: Option<String>,
    #[arg(long = "link")]
    links: Vec<String>,
}

#[derive(Debug, Args)]
struct FlowArgs {
    /// Number of random host pairs
    #[arg(long = "flows", default_value_t = 0)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PatchArg {
    Proactive,
    Reactive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GoalArg {
    Eavesdrop,
    Evade,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActionsArg {
    TwoSwitch,
    NodeRealloc,
    Auto,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[arg(long)]
    topology: String,
    #[arg(long, value_enum)]
    goal: GoalArg,
    /// Switch to eavesdrop on or to evade
    #[arg(long)]
    target: String,
    /// Absolute flow-count threshold
    #[arg(long, conflicts_with = "coverage_delta", required_unless_present = "coverage_delta")]
    coverage: Option<usize>,
    /// Flows to gain over the real topology, in the goal's direction
    #[arg(long)]
    coverage_delta: Option<usize>,
    #[arg(long)]
    similarity: f64,
    #[arg(long, default_value_t = 100)]
    flows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    #[arg(long, value_enum, default_value_t = ActionsArg::Auto)]
    actions: ActionsArg,
    #[arg(long)]
    episode_len: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Where to write the accepted topology; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the training trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let cwd = Path::new(".");
    match cli.command {
        Command::Run { scenario, out, seed } => return run_scenario(&scenario, &out, seed),
        Command::Discover { net, rounds } => {
            let mut sim = simulation(&net, &[])?;
            sim.run_ticks(rounds)?;
            emit(&format!("{}\n", sim.controller().view().topology.to_json()))?;
        }
        Command::Poison { net, target } => {
            let real = load_topology(&net.topology, cwd)?;
            let t = resolve_target(&real, target.target.as_deref(), &target.links)?;
            let set = plan_topology_poison(&real, &t, mode(&net))?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&set)?))?;
        }
        Command::Patch { net, target, flows, mode } => {
            let real = load_topology(&net.topology, cwd)?;
            let t = resolve_target(&real, target.target.as_deref(), &target.links)?;
            let fs = random_flows(&real, flows.seed, flows.count)?;
            let mut sim = simulation(&net, &fs)?;
            sim.tick()?;
            let mode = match mode {
                PatchArg::Proactive => PatchMode::Proactive,
                PatchArg::Reactive => PatchMode::Reactive,
            };
            sim.poison(&t, Some(mode), false)?;
            sim.run_ticks(2)?;
            emit(&format!("{}\n", serde_json::to_string_pretty(sim.patches())?))?;
        }
        Command::Plan(args) => plan(&args)?,
        Command::DumpTables { net, target, flows } => {
            let real = load_topology(&net.topology, cwd)?;
            let fs = random_flows(&real, flows.seed, flows.count)?;
            let sim = poisoned(&net, &real, &target, &fs)?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&sim.tables())?))?;
        }
        Command::View { net, target, dot } => {
            let real = load_topology(&net.topology, cwd)?;
            let sim = poisoned(&net, &real, &target, &[])?;
            let view = &sim.controller().view().topology;
            if dot {
                emit(&to_dot(view, "view", &style(&real, view)))?;
            } else {
                emit(&format!("{}\n", view.to_json()))?;
            }
        }
        Command::RenderDot { topology, view } => {
            let real = load_topology(&topology, cwd)?;
            match view {
                Some(v) => {
                    let v = load_topology(&v, cwd)?;
                    emit(&to_dot(&v, "view", &style(&real, &v)))?;
                }
                None => emit(&to_dot(&real, "topology", &DotStyle::default()))?,
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn mode(net: &NetArgs) -> PoisonMode {
    if net.fingerprint {
        PoisonMode::VlanInportSrc
    } else {
        PoisonMode::Vanilla
    }
}

fn simulation(net: &NetArgs, flows: &[FlowRequest]) -> Result<Simulation> {
    let real = load_topology(&net.topology, Path::new("."))?;
    let mut config = SimConfig::default();
    config.controller.fingerprint = net.fingerprint;
    let mut sim = Simulation::new(real, config)?;
    sim.declare_flows(flows.iter().cloned());
    Ok(sim)
}

fn resolve_target(real: &Topology, target: Option<&str>, links: &[String]) -> Result<Topology> {
    match target {
        Some(name) => Ok(load_topology(name, Path::new("."))?),
        None => {
            let parsed = links.iter().map(|l| l.parse::<DeceptiveLink>()).collect::<Result<Vec<_>, _>>()?;
            Ok(target_from_links(real, &parsed)?)
        }
    }
}

/// Discovered, and poisoned with proactive patches when a target is given.
fn poisoned(net: &NetArgs, real: &Topology, target: &OptTargetArgs, flows: &[FlowRequest]) -> Result<Simulation> {
    let mut sim = simulation(net, flows)?;
    sim.tick()?;
    if target.target.is_some() || !target.links.is_empty() {
        let t = resolve_target(real, target.target.as_deref(), &target.links)?;
        let patch = (!net.fingerprint).then_some(PatchMode::Proactive);
        sim.poison(&t, patch, false)?;
        sim.tick()?;
    }
    Ok(sim)
}

fn style(real: &Topology, view: &Topology) -> DotStyle {
    DotStyle {
        fabricated: view.links().filter(|l| !real.has_link(l)).cloned().collect(),
        hidden: real.links().filter(|l| !view.has_link(l)).cloned().collect(),
        gaps: Default::default(),
    }
}

fn plan(args: &PlanArgs) -> Result<()> {
    let real = load_topology(&args.topology, Path::new("."))?;
    let flows = random_flows(&real, args.seed, args.flows)?;
    let kind = match args.goal {
        GoalArg::Eavesdrop => GoalKind::Eavesdrop(args.target.as_str().into()),
        GoalArg::Evade => GoalKind::Evade(args.target.as_str().into()),
    };
    let probe = PlannerGoal { kind: kind.clone(), coverage_threshold: 0, similarity: args.similarity };
    let baseline = Env::new(&real, probe, flows.clone(), PoisonMode::Vanilla)?.baseline();
    let threshold = match (args.coverage, args.coverage_delta, args.goal) {
        (Some(c), _, _) => c,
        (None, Some(d), GoalArg::Eavesdrop) => baseline + d,
        (None, Some(d), GoalArg::Evade) => baseline.saturating_sub(d),
        (None, None, _) => bail!("give --coverage or --coverage-delta"),
    };
    let goal = PlannerGoal { kind, coverage_threshold: threshold, similarity: args.similarity };
    let family = match args.actions {
        ActionsArg::TwoSwitch => FamilyChoice::TwoSwitch,
        ActionsArg::NodeRealloc => FamilyChoice::NodeRealloc,
        ActionsArg::Auto => FamilyChoice::Auto,
    };
    let mut cfg = SearchConfig::new(args.budget, args.seed, family.resolve(&real));
    cfg.episode_len = args.episode_len;
    cfg.workers = args.workers;
    let report = search(&real, &goal, &flows, &cfg)?;
    if let Some(path) = &args.trace {
        write_trace(path, &report)?;
    }
    eprintln!(
        "baseline {} threshold {} success {} after {} steps",
        report.baseline, threshold, report.success, report.steps
    );
    let body = match &report.accepted {
        Some(t) => t.to_json(),
        None => serde_json::to_string_pretty(&report)?,
    };
    match &args.out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&format!("{body}\n"))?,
    }
    if !report.success {
        bail!("no topology met the goal within {} steps", args.budget);
    }
    Ok(())
}

fn write_trace(path: &Path, report: &SearchReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in &report.trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn run_scenario(path: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let scenario = Scenario::load(path)?.with_seed(seed);
    let base = path.parent().unwrap_or(Path::new("."));
    let outcome = run(&scenario, base)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let write = |name: &str, body: &str| -> Result<()> {
        let p = out.join(name);
        fs::write(&p, body).with_context(|| format!("writing {}", p.display()))
    };
    write("report.json", &(serde_json::to_string_pretty(&outcome.verdict)? + "\n"))?;
    write("view_before.dot", &outcome.view_dot(&outcome.view_before, "before"))?;
    write("view_after.dot", &outcome.view_dot(&outcome.view_after, "after"))?;
    write("tables.json", &(serde_json::to_string_pretty(&outcome.tables)? + "\n"))?;
    if let Some(plan) = &outcome.plan {
        write_trace(&out.join("plan_trace.csv"), plan)?;
        if let Some(t) = &plan.accepted {
            write("planned_topology.json", &t.to_json())?;
        }
    }
    let mut summary = String::new();
    for a in &outcome.verdict.assertions {
        let status = if a.passed { "pass" } else { "FAIL" };
        writeln!(summary, "{status} phase {} {} {}", a.phase, serde_json::to_string(&a.check)?, a.detail)?;
    }
    let v = &outcome.verdict;
    writeln!(summary, "{}: {}", v.scenario, if v.passed { "passed" } else { "failed" })?;
    emit(&summary)?;
    Ok(if v.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

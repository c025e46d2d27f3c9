//! Command-line driver for the sensor-network calculus: type checking,
//! running with pluggable schedules, JSONL tracing, bounded state-space
//! exploration, and the randomized property suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csn::generator::{gen_interface, network_to_unit, subject_reduction_suite, GenConfig};
use csn::parser::{parse_network, BuildError, SourceUnit};
use csn::schedule::Policy;
use csn::semantics::{
    explore, run, ExploreConfig, ExploreError, Explored, Network, StepBudget, StepChoice,
    StopReason,
};
use csn::syntax::{BuiltinValue, Value};
use csn::types::{check_network, Interface};
use csn::world::ResolveError;

// Exit codes, also documented in --help:
const EXIT_OK: u8 = 0;
const EXIT_TYPE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const EXIT_COUNTEREXAMPLE: u8 = 5;
const EXIT_STATE_BUDGET: u8 = 6;

#[derive(Parser)]
#[command(
    name = "csn",
    about = "Type checker, interpreter, and explorer for sensor-network programs",
    after_help = "Exit codes:\n  \
        0  success\n  \
        1  type errors\n  \
        2  parse or input-validation errors\n  \
        3  I/O errors\n  \
        4  runtime errors\n  \
        5  a property counterexample was found\n  \
        6  the exploration state budget was exceeded\n\n\
        The CSN_SEED environment variable overrides the default seed (0);\n\
        an explicit --seed beats both."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and type-check a network file.
    Check {
        path: PathBuf,
        /// Report errors as a JSON array on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Run a network until quiescence or the step budget.
    Run(RunArgs),
    /// Run and write a JSONL trace (run with a mandatory --trace-out).
    Trace(RunArgs),
    /// Explore all schedules up to a depth, checking a state property.
    Explore {
        path: PathBuf,
        /// Maximum number of steps from the initial state.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Property to check on every reached state.
        #[arg(long, value_enum, default_value_t = PropName::WellTyped)]
        prop: PropName,
        /// Abort after this many distinct states.
        #[arg(long, default_value_t = 50_000)]
        state_cap: usize,
    },
    /// Generate random well-typed networks and check that every reachable
    /// state still type-checks.
    Props {
        /// Number of generated networks.
        #[arg(long, default_value_t = 200)]
        instances: usize,
        /// Exploration depth per instance.
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Base seed (instance i uses seed + i).
        #[arg(long)]
        seed: Option<u64>,
        /// Largest generated network.
        #[arg(long, default_value_t = 3)]
        max_sensors: usize,
        /// Where to write a counterexample .csn file, if one is found.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    path: PathBuf,
    /// Scheduling policy.
    #[arg(long, value_enum, default_value_t = ScheduleKind::DeliverAll)]
    schedule: ScheduleKind,
    /// Seed for the random schedule (overrides CSN_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Step budget.
    #[arg(long, default_value_t = 10_000)]
    max_steps: u64,
    /// Deduct energy costs from sensor batteries.
    #[arg(long)]
    meter: bool,
    /// Write the event trace to this file as JSON lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Skip type checking before running.
    #[arg(long)]
    untyped: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    DeliverAll,
    RoundRobin,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropName {
    /// Every reached state still passes the type checker.
    WellTyped,
    /// Membranes only ever hold real, distinct receivers.
    MembraneOnce,
    /// Battery levels never go negative.
    EnergyGate,
}

fn main() -> ExitCode {
    ExitCode::from(dispatch(Cli::parse()))
}

fn dispatch(cli: Cli) -> u8 {
    match cli.cmd {
        Cmd::Check { path, json } => cmd_check(&path, json),
        Cmd::Run(args) => cmd_run(args, false),
        Cmd::Trace(args) => cmd_run(args, true),
        Cmd::Explore {
            path,
            depth,
            prop,
            state_cap,
        } => cmd_explore(&path, depth, prop, state_cap),
        Cmd::Props {
            instances,
            depth,
            seed,
            max_sensors,
            out_dir,
        } => cmd_props(instances, depth, resolve_seed(seed), max_sensors, out_dir),
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    if let Some(s) = flag {
        return s;
    }
    std::env::var("CSN_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

/// Parses and elaborates a file; on failure prints the error and returns
/// the exit code to use.
fn load(path: &Path) -> Result<(SourceUnit, Network), u8> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Err(EXIT_IO);
        }
    };
    let unit = match parse_network(&text) {
        Ok(u) => u,
        Err(e) => {
            eprintln!("{}:{e}", path.display());
            return Err(EXIT_PARSE);
        }
    };
    let network = match unit.build_network(path.parent()) {
        Ok(n) => n,
        Err(BuildError::Resolve(ResolveError::Io { path: p, source })) => {
            eprintln!("{}: {source}", p.display());
            return Err(EXIT_IO);
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return Err(EXIT_PARSE);
        }
    };
    Ok((unit, network))
}

/// Type-checks, printing errors; `Err` carries the exit code.
fn typecheck(unit: &SourceUnit, network: &Network, json: bool) -> Result<Interface, u8> {
    let iface = match unit.declared_interface() {
        Ok(i) => i,
        Err(e) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string(&vec![e.report()]).expect("report serializes")
                );
            } else {
                eprintln!("{e}");
            }
            return Err(EXIT_TYPE);
        }
    };
    match check_network(&iface, network) {
        Ok(()) => Ok(iface),
        Err(errors) => {
            if json {
                let reports: Vec<_> = errors.iter().map(|e| e.report()).collect();
                println!(
                    "{}",
                    serde_json::to_string(&reports).expect("reports serialize")
                );
            } else {
                for e in &errors {
                    eprintln!("{e}");
                }
            }
            Err(EXIT_TYPE)
        }
    }
}

fn cmd_check(path: &Path, json: bool) -> u8 {
    let (unit, network) = match load(path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    match typecheck(&unit, &network, json) {
        Ok(iface) => {
            if json {
                println!("[]");
            } else {
                println!(
                    "ok: {} sensor(s), {} interface method(s)",
                    network.sensors.len(),
                    iface.methods().len()
                );
            }
            EXIT_OK
        }
        Err(code) => code,
    }
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Builtin(BuiltinValue::Number(n)) => format!("{n}"),
        Value::Builtin(BuiltinValue::Symbol(s)) => format!("{s:?}"),
        Value::Builtin(BuiltinValue::Unit) => "()".into(),
        other => other.to_string(),
    }
}

fn cmd_run(args: RunArgs, trace_mandatory: bool) -> u8 {
    if trace_mandatory && args.trace_out.is_none() {
        eprintln!("trace: --trace-out is required");
        return EXIT_PARSE;
    }
    let (unit, mut network) = match load(&args.path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    if !args.untyped {
        if let Err(code) = typecheck(&unit, &network, false) {
            return code;
        }
    }
    network.world.metering = args.meter;
    let seed = resolve_seed(args.seed);
    let mut policy = match args.schedule {
        ScheduleKind::DeliverAll => Policy::deliver_all(),
        ScheduleKind::RoundRobin => Policy::round_robin(),
        ScheduleKind::Random => Policy::random(seed),
    };
    let start = network.step_count;
    let (final_net, trace) = run(network, &mut policy, StepBudget::new(args.max_steps));

    if let Some(out) = &args.trace_out {
        let Ok(file) = fs::File::create(out) else {
            eprintln!("{}: cannot create trace file", out.display());
            return EXIT_IO;
        };
        if let Err(e) = trace.write_jsonl(std::io::BufWriter::new(file)) {
            eprintln!("{}: {e}", out.display());
            return EXIT_IO;
        }
    }

    let steps = final_net.step_count - start;
    match &trace.stop {
        StopReason::Quiescent => println!("quiescent after {steps} step(s)"),
        StopReason::BudgetExhausted => println!("step budget exhausted after {steps} step(s)"),
        StopReason::PolicyStalled => println!("schedule stalled after {steps} step(s)"),
        StopReason::RuntimeError(e) => println!("runtime error after {steps} step(s): {e}"),
    }
    let logged: Vec<&str> = final_net.logs.sensors().collect();
    if logged.is_empty() {
        println!("no log entries");
    }
    for sensor in logged {
        println!("{sensor}:");
        for entry in final_net.logs.for_sensor(sensor) {
            println!(
                "  [{}] {} {}",
                entry.step,
                entry.builtin,
                format_value(&entry.value)
            );
        }
    }
    match trace.stop {
        StopReason::RuntimeError(_) | StopReason::PolicyStalled => EXIT_RUNTIME,
        _ => EXIT_OK,
    }
}

fn describe_choice(c: &StepChoice) -> String {
    match c {
        StepChoice::Local { sensor, rule } => format!("{} on {sensor}", rule.as_str()),
        StepChoice::Deliver { sender, receiver } => {
            format!("broadcast-deliver {sender} -> {receiver}")
        }
        StepChoice::Release { sender } => format!("release {sender}"),
        StepChoice::Switch { sensor } => format!("switch {sensor}"),
    }
}

fn cmd_explore(path: &Path, depth: usize, prop: PropName, state_cap: usize) -> u8 {
    let (unit, network) = match load(path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let iface = match typecheck(&unit, &network, false) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let cfg = ExploreConfig { depth, state_cap };
    let mut predicate: Box<dyn FnMut(&Network) -> bool> = match prop {
        PropName::WellTyped => Box::new(move |n: &Network| check_network(&iface, n).is_ok()),
        PropName::MembraneOnce => Box::new(|n: &Network| {
            n.sensors.iter().all(|s| {
                s.membrane.as_ref().is_none_or(|m| {
                    !m.delivered.is_empty()
                        && !m.delivered.contains(&s.id)
                        && m.delivered
                            .iter()
                            .all(|id| n.sensors.iter().any(|t| t.id == *id))
                })
            })
        }),
        PropName::EnergyGate => Box::new(|n: &Network| n.sensors.iter().all(|s| s.energy >= 0.0)),
    };
    match explore(&network, &cfg, &mut *predicate) {
        Ok(Explored::AllHold { states }) => {
            println!("property holds over {states} state(s) up to depth {depth}");
            EXIT_OK
        }
        Ok(Explored::Counterexample(path)) => {
            println!("counterexample after {} step(s):", path.len());
            for (i, c) in path.iter().enumerate() {
                println!("  {}. {}", i + 1, describe_choice(c));
            }
            EXIT_COUNTEREXAMPLE
        }
        Err(ExploreError::StateBudgetExceeded { visited }) => {
            eprintln!("state budget exceeded: {visited} distinct state(s)");
            EXIT_STATE_BUDGET
        }
        Err(ExploreError::Runtime(e)) => {
            eprintln!("runtime error while exploring: {e}");
            EXIT_RUNTIME
        }
    }
}

fn cmd_props(
    instances: usize,
    depth: usize,
    seed: u64,
    max_sensors: usize,
    out_dir: Option<PathBuf>,
) -> u8 {
    let cfg = GenConfig {
        seed,
        max_sensors,
        max_methods: 4,
        max_program_depth: 4,
        interface: gen_interface(seed),
    };
    let report = subject_reduction_suite(&cfg, instances, depth);
    println!("instances: {}", report.instances);
    println!("passed:    {}", report.passed);
    println!("skipped:   {} (state budget)", report.skipped);
    println!("states:    {}", report.states);
    if let Some(ce) = &report.counterexample {
        println!("counterexample at seed {}:", ce.seed);
        for (i, c) in ce.path.iter().enumerate() {
            println!("  {}. {}", i + 1, describe_choice(c));
        }
        let iface = gen_interface(ce.seed);
        let text = network_to_unit(&iface, &ce.network).pretty();
        let dir = out_dir.unwrap_or_else(|| PathBuf::from("."));
        let file = dir.join(format!("counterexample-{}.csn", ce.seed));
        match fs::write(&file, text) {
            Ok(()) => println!("wrote {}", file.display()),
            Err(e) => eprintln!("{}: {e}", file.display()),
        }
        return EXIT_COUNTEREXAMPLE;
    }
    if let Some((seed, msg)) = report.runtime_failures.first() {
        eprintln!("runtime error at seed {seed}: {msg}");
        return EXIT_RUNTIME;
    }
    println!("no counterexamples");
    EXIT_OK
}

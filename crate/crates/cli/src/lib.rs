//! The `cqpaxos` command line.
//!
//! Every subcommand writes its report to the given sinks and returns an
//! exit code, so tests drive [`run`] directly:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | clean: no violations, scope exhausted, all assertions passed |
//! | 1 | a violation, failed assertion or oracle mismatch |
//! | 2 | bad arguments, unreadable or invalid input |
//! | 3 | state budget hit before any violation |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use cqpaxos::checker::{explore, fuzz, ExploreReport, Scope};
use cqpaxos::oracle::{exhaustive_sweep, random_sweep, SweepReport, MAX_ORACLE_ACCEPTORS, MAX_ORACLE_BALLOT};
use cqpaxos::scenario::{fixture, fixture_names, parse_scenario_named, run_scenario, Scenario};
use cqpaxos::{Action, Ballot, Config, Mutant, TraceFile, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cqpaxos", version, about = "Consecutive-quorum Paxos checker and scenario runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explore every reachable state within scope and check the safety properties.
    Check(CheckArgs),
    /// Run a scenario file or built-in fixture.
    Run(RunArgs),
    /// Random walks through the same state space, reproducible by seed.
    Fuzz(FuzzArgs),
    /// Compare consecutive-quorum detection against the brute-force oracle.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Tolerated acceptor crashes; the ensemble has 2f+1 acceptors.
    #[arg(long, default_value_t = 1)]
    pub f: u32,
    #[arg(long, default_value_t = 2)]
    pub proposers: usize,
    #[arg(long, default_value_t = 1)]
    pub learners: usize,
    /// Comma-separated value names.
    #[arg(long, default_value = "x,y", value_delimiter = ',')]
    pub values: Vec<String>,
    /// classic, cq or cq_cp.
    #[arg(long, default_value = "cq_cp")]
    pub variant: Variant,
    /// none, m1 or m2.
    #[arg(long, default_value = "none")]
    pub mutant: Mutant,
    #[arg(long, default_value_t = 3)]
    pub max_ballot: u32,
    #[arg(long, default_value_t = 0)]
    pub max_crashes: usize,
    #[arg(long, default_value_t = 50_000_000)]
    pub state_budget: usize,
}

impl ModelArgs {
    fn config(&self) -> Result<Config, String> {
        Config::new(self.f, self.proposers, self.learners, self.values.clone(), self.variant, self.mutant)
            .map_err(|e| e.to_string())
    }

    fn scope(&self) -> Scope {
        Scope {
            max_ballot: Ballot(self.max_ballot),
            max_crashes: self.max_crashes,
            value_count: self.values.len(),
            state_budget: self.state_budget,
            ..Scope::default()
        }
    }

    fn describe(&self) -> String {
        format!(
            "variant={} mutant={} f={} proposers={} learners={} values={} max_ballot={} max_crashes={}",
            self.variant,
            self.mutant,
            self.f,
            self.proposers,
            self.learners,
            self.values.join(","),
            self.max_ballot,
            self.max_crashes
        )
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory for violation traces.
    #[arg(long, default_value = "traces")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file.
    #[arg(required_unless_present = "fixture", conflicts_with = "fixture")]
    pub path: Option<PathBuf>,
    /// Built-in fixture name.
    #[arg(long)]
    pub fixture: Option<String>,
    /// Run under this variant instead of the one in the config line.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Write the executed actions as a trace file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Directory for violation traces; none are written without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub cases: u64,
    #[arg(long, default_value_t = MAX_ORACLE_ACCEPTORS)]
    pub max_acceptors: usize,
    #[arg(long, default_value_t = MAX_ORACLE_BALLOT)]
    pub max_ballot: u32,
    /// Skip the exhaustive sweep over 4 acceptors and ballots 1..=5.
    #[arg(long)]
    pub no_exhaustive: bool,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(&a, out, err),
        Command::Run(a) => cmd_run(&a, out),
        Command::Fuzz(a) => cmd_fuzz(&a, out),
        Command::Oracle(a) => cmd_oracle(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

type CmdResult = Result<i32, String>;

fn io<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = args.model.config()?;
    let started = Instant::now();
    let report = explore(&cfg, &args.model.scope()).map_err(io)?;
    let _ = writeln!(err, "explored in {:.1}s", started.elapsed().as_secs_f64());
    let result = if !report.violations.is_empty() {
        "violation"
    } else if report.exhausted {
        "ok"
    } else {
        "budget"
    };
    print_summary(out, result, &report, &args.model).map_err(io)?;
    writeln!(out, "exhausted={} max_depth={}", report.exhausted, report.max_depth).map_err(io)?;
    write_violations(out, &cfg, &report, Some(&args.out))?;
    Ok(exit_for(&report))
}

fn exit_for(report: &ExploreReport) -> i32 {
    if !report.violations.is_empty() {
        EXIT_FAILURE
    } else if report.exhausted {
        EXIT_OK
    } else {
        EXIT_BUDGET
    }
}

fn print_summary(out: &mut dyn Write, result: &str, report: &ExploreReport, model: &ModelArgs) -> std::io::Result<()> {
    writeln!(out, "result={result} states={} violations={}", report.states_visited, report.violations.len())?;
    writeln!(out, "{}", model.describe())?;
    writeln!(out, "actions={} subsumption_failures={}", report.actions_applied, report.subsumption_failures)
}

fn write_violations(out: &mut dyn Write, cfg: &Config, report: &ExploreReport, dir: Option<&Path>) -> Result<(), String> {
    if let (Some(dir), false) = (dir, report.violations.is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    for v in &report.violations {
        let actions: Vec<Action> = v.trace.iter().map(|r| r.action).collect();
        let mut line = format!("violation kind={} steps={}", v.kind, actions.len());
        if let Some(dir) = dir {
            let notes = vec![format!("violation={}", v.kind), format!("detail={}", v.detail)];
            let tf = TraceFile::from_actions(cfg, &actions, notes).map_err(io)?;
            let path = dir.join(format!("{}-{}-{}.trace", cfg.variant(), cfg.mutant(), v.kind));
            tf.write(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            line.push_str(&format!(" trace={}", path.display()));
        }
        writeln!(out, "{line}").map_err(io)?;
        writeln!(out, "  {}", v.detail).map_err(io)?;
    }
    Ok(())
}

fn load_scenario(args: &RunArgs) -> Result<Scenario, String> {
    match (&args.path, &args.fixture) {
        (_, Some(name)) => fixture(name).ok_or_else(|| {
            let known: Vec<&str> = fixture_names().collect();
            format!("unknown fixture `{name}` (known: {})", known.join(", "))
        }),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_scenario_named(&path.display().to_string(), &text).map_err(|e| format!("{}: {e}", path.display()))
        }
        (None, None) => Err("a scenario path or --fixture is required".into()),
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let mut scenario = load_scenario(args)?;
    if let Some(v) = args.variant {
        scenario = scenario.with_variant(v);
    }
    let cfg = scenario.config().map_err(io)?;
    let run = run_scenario(&scenario).map_err(|e| format!("{}: {e}", scenario.source_name))?;
    writeln!(
        out,
        "scenario={} variant={} mutant={} commands={}",
        scenario.source_name,
        cfg.variant(),
        cfg.mutant(),
        scenario.commands.len()
    )
    .map_err(io)?;
    for a in &run.assertions {
        let verdict = if a.passed { "pass" } else { "FAIL" };
        writeln!(out, "{verdict} [{}] {} ({})", a.index, a.command, a.observed).map_err(io)?;
    }
    let mut failed = run.assertions.iter().filter(|a| !a.passed).count();
    if let (Some(path), None) = (&args.path, args.variant) {
        failed += usize::from(!check_recorded_fingerprint(path, out)?);
    }
    let result = if failed == 0 { "pass" } else { "fail" };
    writeln!(out, "result={result} assertions={} failed={failed}", run.assertions.len()).map_err(io)?;
    if let Some(path) = &args.trace {
        let notes = vec![format!("scenario={}", scenario.source_name)];
        TraceFile::from_scripted_run(&run.world, notes).write(path).map_err(|e| format!("{}: {e}", path.display()))?;
        writeln!(out, "trace={}", path.display()).map_err(io)?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}

/// Replays a file carrying a `# fingerprint=` header as a trace and
/// reports whether it ends where it says. Files without one pass.
fn check_recorded_fingerprint(path: &Path, out: &mut dyn Write) -> Result<bool, String> {
    let tf = TraceFile::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let Some(expected) = &tf.fingerprint else { return Ok(true) };
    let ok = match tf.replay() {
        Ok(_) => {
            writeln!(out, "pass fingerprint={expected}").map_err(io)?;
            true
        }
        Err(e) => {
            writeln!(out, "FAIL fingerprint ({e})").map_err(io)?;
            false
        }
    };
    Ok(ok)
}

pub fn cmd_fuzz(args: &FuzzArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = args.model.config()?;
    let report = fuzz(&cfg, &args.model.scope(), args.seed, args.runs, args.steps).map_err(io)?;
    let result = if report.violations.is_empty() { "ok" } else { "violation" };
    print_summary(out, result, &report, &args.model).map_err(io)?;
    writeln!(out, "seed={} runs={} steps={} max_depth={}", args.seed, args.runs, args.steps, report.max_depth)
        .map_err(io)?;
    write_violations(out, &cfg, &report, args.out.as_deref())?;
    Ok(exit_for(&report))
}

pub fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> CmdResult {
    if !(1..=MAX_ORACLE_ACCEPTORS).contains(&args.max_acceptors) {
        return Err(format!("--max-acceptors must be between 1 and {MAX_ORACLE_ACCEPTORS}"));
    }
    if !(1..=MAX_ORACLE_BALLOT).contains(&args.max_ballot) {
        return Err(format!("--max-ballot must be between 1 and {MAX_ORACLE_BALLOT}"));
    }
    let mut mismatches = 0;
    let mut cases = 0;
    let mut report_line = |out: &mut dyn Write, label: &str, r: &SweepReport| -> std::io::Result<()> {
        mismatches += r.mismatches.len();
        cases += r.cases;
        writeln!(out, "{label} cases={} positives={} mismatches={}", r.cases, r.positives, r.mismatches.len())?;
        for m in r.mismatches.iter().take(5) {
            let entries: Vec<String> = m.history.iter().map(|(a, v, b)| format!("{a}:v{}@{b}", v.0)).collect();
            writeln!(
                out,
                "  mismatch f={} detect={} oracle={} witness_problem={:?} history={}",
                m.f,
                m.fast,
                m.oracle,
                m.bad_witness,
                entries.join(",")
            )?;
        }
        Ok(())
    };
    if !args.no_exhaustive {
        let r = exhaustive_sweep(4, 5);
        report_line(out, "exhaustive acceptors=4 max_ballot=5", &r).map_err(io)?;
    }
    let r = random_sweep(args.seed, args.cases, args.max_acceptors, args.max_ballot);
    let label = format!("random seed={} max_acceptors={} max_ballot={}", args.seed, args.max_acceptors, args.max_ballot);
    report_line(out, &label, &r).map_err(io)?;
    let result = if mismatches == 0 { "ok" } else { "mismatch" };
    writeln!(out, "result={result} cases={cases} {mismatches} mismatches").map_err(io)?;
    Ok(if mismatches == 0 { EXIT_OK } else { EXIT_FAILURE })
}

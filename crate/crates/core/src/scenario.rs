//! Scripted executions.
//!
//! A scenario is a line-oriented script that starts ballots, picks which
//! sent messages reach which agents, and asserts on what was learned or
//! proposed. Proposals are never scripted directly: they fire inside the
//! proposers' handlers, so every script is a real protocol execution.
//!
//! ```text
//! config f=1 proposers=2 learners=1 values=x,y variant=cq_cp
//! client-value p=0 v=x
//! prepare p=0 b=10
//! deliver-prepare a=0 b=10
//! ```
//!
//! Two extensions to the basic grammar: `config` takes an optional
//! `mutant=<none|m1|m2>`, and `prepare` takes an optional `v=<id>` that sets
//! the client value in the same step. Any line may start with a `step=<n>`
//! token, which is ignored; trace files use it to number their records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::types::{AgentId, Ballot, Config, ConfigError, Message, Mutant, Role, Value, Variant};
use crate::world::{Action, WorldError, WorldState};

/// The header line of every scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigLine {
    pub f: u32,
    pub proposers: usize,
    pub learners: usize,
    pub values: Vec<String>,
    pub variant: Variant,
    pub mutant: Mutant,
}

impl ConfigLine {
    pub fn to_config(&self) -> Result<Config, ConfigError> {
        Config::new(self.f, self.proposers, self.learners, self.values.clone(), self.variant, self.mutant)
    }

    pub fn from_config(cfg: &Config) -> Self {
        ConfigLine {
            f: cfg.f(),
            proposers: cfg.proposer_count(),
            learners: cfg.learner_count(),
            values: cfg.value_names().to_vec(),
            variant: cfg.variant(),
            mutant: cfg.mutant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioCommand {
    Config(ConfigLine),
    ClientValue { proposer: u16, value: String },
    /// Starts `ballot` at `proposer`. Without `value` the proposer's last
    /// client value is used.
    Prepare { proposer: u16, ballot: Ballot, value: Option<String> },
    DeliverPrepare { acceptor: u16, ballot: Ballot },
    DeliverPromise { proposer: u16, from: u16, ballot: Ballot },
    DeliverPropose { acceptor: u16, ballot: Ballot },
    DeliverAccept { learner: u16, from: u16, ballot: Ballot },
    DeliverAcceptToProposer { proposer: u16, from: u16, ballot: Ballot },
    Crash { agent: AgentId },
    AssertLearned { learner: u16, value: String },
    AssertNotLearned { learner: u16 },
    AssertProposed { ballot: Ballot, value: String },
    AssertNotProposed { ballot: Ballot },
}

impl ScenarioCommand {
    pub fn is_assertion(&self) -> bool {
        matches!(
            self,
            ScenarioCommand::AssertLearned { .. }
                | ScenarioCommand::AssertNotLearned { .. }
                | ScenarioCommand::AssertProposed { .. }
                | ScenarioCommand::AssertNotProposed { .. }
        )
    }

    /// The command that performs `action`, with values named through `cfg`.
    pub fn from_action(action: &Action, cfg: &Config) -> ScenarioCommand {
        match *action {
            Action::StartBallot { proposer, ballot, client_value } => ScenarioCommand::Prepare {
                proposer: proposer.index,
                ballot,
                value: Some(cfg.value_name(client_value).to_string()),
            },
            Action::Deliver { recipient, message } => match (recipient.role, message) {
                (Role::Acceptor, Message::Prepare(m)) => {
                    ScenarioCommand::DeliverPrepare { acceptor: recipient.index, ballot: m.ballot }
                }
                (Role::Acceptor, Message::Propose(m)) => {
                    ScenarioCommand::DeliverPropose { acceptor: recipient.index, ballot: m.ballot }
                }
                (Role::Proposer, Message::Promise(m)) => ScenarioCommand::DeliverPromise {
                    proposer: recipient.index,
                    from: m.acceptor.index,
                    ballot: m.ballot,
                },
                (Role::Proposer, Message::Accept(m)) => ScenarioCommand::DeliverAcceptToProposer {
                    proposer: recipient.index,
                    from: m.acceptor.index,
                    ballot: m.ballot,
                },
                (Role::Learner, Message::Accept(m)) => ScenarioCommand::DeliverAccept {
                    learner: recipient.index,
                    from: m.acceptor.index,
                    ballot: m.ballot,
                },
                (role, m) => panic!("no {role} ever receives {}", m.kind()),
            },
            Action::Crash { agent } => ScenarioCommand::Crash { agent },
        }
    }
}

impl fmt::Display for ScenarioCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ScenarioCommand::*;
        match self {
            Config(c) => {
                write!(
                    f,
                    "config f={} proposers={} learners={} values={} variant={}",
                    c.f,
                    c.proposers,
                    c.learners,
                    c.values.join(","),
                    c.variant
                )?;
                if c.mutant != Mutant::None {
                    write!(f, " mutant={}", c.mutant)?;
                }
                Ok(())
            }
            ClientValue { proposer, value } => write!(f, "client-value p={proposer} v={value}"),
            Prepare { proposer, ballot, value: None } => write!(f, "prepare p={proposer} b={ballot}"),
            Prepare { proposer, ballot, value: Some(v) } => write!(f, "prepare p={proposer} b={ballot} v={v}"),
            DeliverPrepare { acceptor, ballot } => write!(f, "deliver-prepare a={acceptor} b={ballot}"),
            DeliverPromise { proposer, from, ballot } => {
                write!(f, "deliver-promise p={proposer} from={from} b={ballot}")
            }
            DeliverPropose { acceptor, ballot } => write!(f, "deliver-propose a={acceptor} b={ballot}"),
            DeliverAccept { learner, from, ballot } => write!(f, "deliver-accept l={learner} from={from} b={ballot}"),
            DeliverAcceptToProposer { proposer, from, ballot } => {
                write!(f, "deliver-accept-p p={proposer} from={from} b={ballot}")
            }
            Crash { agent } => write!(f, "crash role={} i={}", agent.role.as_str(), agent.index),
            AssertLearned { learner, value } => write!(f, "assert-learned l={learner} v={value}"),
            AssertNotLearned { learner } => write!(f, "assert-not-learned l={learner}"),
            AssertProposed { ballot, value } => write!(f, "assert-proposed b={ballot} v={value}"),
            AssertNotProposed { ballot } => write!(f, "assert-not-proposed b={ballot}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub commands: Vec<ScenarioCommand>,
    pub source_name: String,
}

impl Scenario {
    pub fn config_line(&self) -> Option<&ConfigLine> {
        match self.commands.first() {
            Some(ScenarioCommand::Config(c)) => Some(c),
            _ => None,
        }
    }

    pub fn config(&self) -> Result<Config, ScenarioError> {
        let line = self.config_line().ok_or(ScenarioError::MissingConfig)?;
        Ok(line.to_config()?)
    }

    /// The same script under another variant.
    pub fn with_variant(&self, variant: Variant) -> Scenario {
        let mut out = self.clone();
        if let Some(ScenarioCommand::Config(c)) = out.commands.first_mut() {
            c.variant = variant;
        }
        out
    }

    pub fn with_mutant(&self, mutant: Mutant) -> Scenario {
        let mut out = self.clone();
        if let Some(ScenarioCommand::Config(c)) = out.commands.first_mut() {
            c.mutant = mutant;
        }
        out
    }

    pub fn assertion_count(&self) -> usize {
        self.commands.iter().filter(|c| c.is_assertion()).count()
    }
}

/// One command per line, no comments.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.commands {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    parse_scenario_named("<inline>", text)
}

pub fn parse_scenario_named(name: &str, text: &str) -> Result<Scenario, ParseError> {
    let mut validator = Validator::default();
    let mut commands = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |reason: String| ParseError { line, reason };
        let cmd = parse_command(content).map_err(err)?;
        validator.check(&cmd).map_err(err)?;
        commands.push(cmd);
    }
    if validator.cfg.is_none() {
        return Err(ParseError { line: last_line.max(1), reason: "missing config line".into() });
    }
    Ok(Scenario { commands, source_name: name.to_string() })
}

/// `key=value` tokens of one line, consumed as the command is built.
struct Fields<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn new<I: Iterator<Item = &'a str>>(tokens: I) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, found `{tok}`"))?;
            if map.insert(k, v).is_some() {
                return Err(format!("duplicate key `{k}`"));
            }
        }
        Ok(Fields { map })
    }

    fn text(&mut self, key: &str) -> Result<&'a str, String> {
        self.map.remove(key).ok_or_else(|| format!("missing `{key}=`"))
    }

    fn nat<T: FromStr>(&mut self, key: &str) -> Result<T, String> {
        let raw = self.text(key)?;
        if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("`{key}` must be a natural number, found `{raw}`"));
        }
        raw.parse().map_err(|_| format!("`{key}={raw}` is out of range"))
    }

    fn ballot(&mut self) -> Result<Ballot, String> {
        self.nat("b").map(Ballot)
    }

    fn ident(&mut self, key: &str) -> Result<String, String> {
        let raw = self.text(key)?;
        check_ident(raw)?;
        Ok(raw.to_string())
    }

    fn optional(&mut self, key: &str) -> Option<&'a str> {
        self.map.remove(key)
    }

    fn finish(self) -> Result<(), String> {
        match self.map.keys().next() {
            Some(k) => Err(format!("unknown key `{k}`")),
            None => Ok(()),
        }
    }
}

fn check_ident(s: &str) -> Result<(), String> {
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
        Ok(())
    } else {
        Err(format!("`{s}` is not a valid identifier"))
    }
}

fn parse_command(content: &str) -> Result<ScenarioCommand, String> {
    let mut tokens = content.split_whitespace().peekable();
    if let Some(step) = tokens.peek().and_then(|t| t.strip_prefix("step=")) {
        if step.is_empty() || !step.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad step number `{step}`"));
        }
        tokens.next();
    }
    let keyword = tokens.next().ok_or("missing command after step number")?;
    let mut fl = Fields::new(tokens)?;
    use ScenarioCommand::*;
    let cmd = match keyword {
        "config" => {
            let f = fl.nat("f")?;
            let proposers = fl.nat("proposers")?;
            let learners = fl.nat("learners")?;
            let values = fl
                .text("values")?
                .split(',')
                .map(|v| check_ident(v).map(|_| v.to_string()))
                .collect::<Result<Vec<_>, _>>()?;
            let variant = fl.text("variant")?.parse()?;
            let mutant = match fl.optional("mutant") {
                Some(m) => m.parse()?,
                None => Mutant::None,
            };
            Config(ConfigLine { f, proposers, learners, values, variant, mutant })
        }
        "client-value" => ClientValue { proposer: fl.nat("p")?, value: fl.ident("v")? },
        "prepare" => {
            let proposer = fl.nat("p")?;
            let ballot = fl.ballot()?;
            let value = match fl.optional("v") {
                Some(v) => {
                    check_ident(v)?;
                    Some(v.to_string())
                }
                None => None,
            };
            Prepare { proposer, ballot, value }
        }
        "deliver-prepare" => DeliverPrepare { acceptor: fl.nat("a")?, ballot: fl.ballot()? },
        "deliver-promise" => DeliverPromise { proposer: fl.nat("p")?, from: fl.nat("from")?, ballot: fl.ballot()? },
        "deliver-propose" => DeliverPropose { acceptor: fl.nat("a")?, ballot: fl.ballot()? },
        "deliver-accept" => DeliverAccept { learner: fl.nat("l")?, from: fl.nat("from")?, ballot: fl.ballot()? },
        "deliver-accept-p" => {
            DeliverAcceptToProposer { proposer: fl.nat("p")?, from: fl.nat("from")?, ballot: fl.ballot()? }
        }
        "crash" => {
            let role: Role = fl.text("role")?.parse()?;
            Crash { agent: AgentId { role, index: fl.nat("i")? } }
        }
        "assert-learned" => AssertLearned { learner: fl.nat("l")?, value: fl.ident("v")? },
        "assert-not-learned" => AssertNotLearned { learner: fl.nat("l")? },
        "assert-proposed" => AssertProposed { ballot: fl.ballot()?, value: fl.ident("v")? },
        "assert-not-proposed" => AssertNotProposed { ballot: fl.ballot()? },
        other => return Err(format!("unknown command `{other}`")),
    };
    fl.finish()?;
    Ok(cmd)
}

/// Static checks that need the commands seen so far.
#[derive(Default)]
struct Validator {
    cfg: Option<Config>,
    prepared: BTreeSet<Ballot>,
    known: BTreeSet<Ballot>,
    client_values: BTreeSet<u16>,
}

impl Validator {
    fn check(&mut self, cmd: &ScenarioCommand) -> Result<(), String> {
        use ScenarioCommand::*;
        let cfg = match (cmd, &self.cfg) {
            (Config(line), None) => {
                self.cfg = Some(line.to_config().map_err(|e| e.to_string())?);
                return Ok(());
            }
            (Config(_), Some(_)) => return Err("config may appear only once".into()),
            (_, None) => return Err("the first command must be config".into()),
            (_, Some(cfg)) => cfg,
        };
        let in_range = |role: Role, i: u16| -> Result<(), String> {
            let id = AgentId { role, index: i };
            if cfg.contains(id) {
                Ok(())
            } else {
                Err(format!("no {} with index {i}", role.as_str()))
            }
        };
        let value = |v: &str| -> Result<(), String> {
            cfg.value_by_name(v).map(|_| ()).ok_or_else(|| format!("unknown value `{v}`"))
        };
        let known = |b: &Ballot| -> Result<(), String> {
            if self.known.contains(b) {
                Ok(())
            } else {
                Err(format!("ballot {b} has not been started"))
            }
        };
        match cmd {
            Config(_) => unreachable!(),
            ClientValue { proposer, value: v } => {
                in_range(Role::Proposer, *proposer)?;
                value(v)?;
                self.client_values.insert(*proposer);
            }
            Prepare { proposer, ballot, value: v } => {
                in_range(Role::Proposer, *proposer)?;
                match v {
                    Some(v) => value(v)?,
                    None if !self.client_values.contains(proposer) => {
                        return Err(format!("proposer {proposer} has no client value"))
                    }
                    None => {}
                }
                if !self.prepared.insert(*ballot) {
                    return Err(format!("ballot {ballot} is already prepared; different proposals need different ballots"));
                }
                if v.is_some() {
                    self.client_values.insert(*proposer);
                }
                self.known.insert(*ballot);
            }
            DeliverPrepare { acceptor, ballot } | DeliverPropose { acceptor, ballot } => {
                in_range(Role::Acceptor, *acceptor)?;
                known(ballot)?;
            }
            DeliverPromise { proposer, from, ballot } => {
                in_range(Role::Proposer, *proposer)?;
                in_range(Role::Acceptor, *from)?;
                known(ballot)?;
            }
            DeliverAccept { learner, from, ballot } => {
                in_range(Role::Learner, *learner)?;
                in_range(Role::Acceptor, *from)?;
                known(ballot)?;
            }
            DeliverAcceptToProposer { proposer, from, ballot } => {
                in_range(Role::Proposer, *proposer)?;
                in_range(Role::Acceptor, *from)?;
                known(ballot)?;
                self.known.insert(ballot.next());
            }
            Crash { agent } => in_range(agent.role, agent.index)?,
            AssertLearned { learner, value: v } => {
                in_range(Role::Learner, *learner)?;
                value(v)?;
            }
            AssertNotLearned { learner } => in_range(Role::Learner, *learner)?,
            AssertProposed { value: v, .. } => value(v)?,
            AssertNotProposed { .. } => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionResult {
    /// Position of the assertion in `Scenario::commands`.
    pub index: usize,
    pub command: ScenarioCommand,
    pub passed: bool,
    /// What the world actually held.
    pub observed: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub world: WorldState,
    pub assertions: Vec<AssertionResult>,
}

impl ScenarioRun {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario has no config line")]
    MissingConfig,
    #[error("config line appears again at command {index}")]
    DuplicateConfig { index: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("command {index} (`{command}`): the message was never sent")]
    NotSent { index: usize, command: String },
    #[error("command {index} (`{command}`): no client value for the proposer")]
    NoClientValue { index: usize, command: String },
    #[error("command {index} (`{command}`): unknown value")]
    UnknownValue { index: usize, command: String },
    #[error("command {index} (`{command}`): {source}")]
    Rejected { index: usize, command: String, source: WorldError },
}

/// Runs a scenario with scripted ballot ownership.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let cfg = s.config()?;
    run_commands(WorldState::scripted(&cfg), &s.commands[1..], 1)
}

/// Runs commands after the config line against `world`. `offset` is the
/// index of the first command in its scenario, for error reports.
pub(crate) fn run_commands(
    mut world: WorldState,
    commands: &[ScenarioCommand],
    offset: usize,
) -> Result<ScenarioRun, ScenarioError> {
    let mut client_values: BTreeMap<u16, Value> = BTreeMap::new();
    let mut assertions = Vec::new();
    for (i, cmd) in commands.iter().enumerate() {
        let index = offset + i;
        if cmd.is_assertion() {
            assertions.push(evaluate(&world, index, cmd));
            continue;
        }
        let named = |name: &str| {
            world
                .config()
                .value_by_name(name)
                .ok_or_else(|| ScenarioError::UnknownValue { index, command: cmd.to_string() })
        };
        let action = match cmd {
            ScenarioCommand::Config(_) => return Err(ScenarioError::DuplicateConfig { index }),
            ScenarioCommand::ClientValue { proposer, value } => {
                client_values.insert(*proposer, named(value)?);
                continue;
            }
            ScenarioCommand::Prepare { proposer, ballot, value } => {
                if let Some(v) = value {
                    client_values.insert(*proposer, named(v)?);
                }
                let client_value = *client_values
                    .get(proposer)
                    .ok_or_else(|| ScenarioError::NoClientValue { index, command: cmd.to_string() })?;
                Action::StartBallot { proposer: AgentId::proposer(*proposer), ballot: *ballot, client_value }
            }
            ScenarioCommand::Crash { agent } => Action::Crash { agent: *agent },
            _ => {
                let (recipient, message) = resolve_delivery(&world, cmd)
                    .ok_or_else(|| ScenarioError::NotSent { index, command: cmd.to_string() })?;
                Action::Deliver { recipient, message }
            }
        };
        world = world
            .apply_action(&action)
            .map_err(|source| ScenarioError::Rejected { index, command: cmd.to_string(), source })?;
    }
    Ok(ScenarioRun { world, assertions })
}

/// The recipient and sent message a deliver command refers to.
fn resolve_delivery(world: &WorldState, cmd: &ScenarioCommand) -> Option<(AgentId, Message)> {
    let find = |pred: &dyn Fn(&Message) -> bool| world.sent().iter().copied().find(|m| pred(m));
    match *cmd {
        ScenarioCommand::DeliverPrepare { acceptor, ballot } => {
            let m = find(&|m| matches!(m, Message::Prepare(p) if p.ballot == ballot))?;
            Some((AgentId::acceptor(acceptor), m))
        }
        ScenarioCommand::DeliverPropose { acceptor, ballot } => {
            let m = find(&|m| matches!(m, Message::Propose(p) if p.ballot == ballot))?;
            Some((AgentId::acceptor(acceptor), m))
        }
        ScenarioCommand::DeliverPromise { proposer, from, ballot } => {
            let m = find(&|m| matches!(m, Message::Promise(p) if p.ballot == ballot && p.acceptor.index == from))?;
            Some((AgentId::proposer(proposer), m))
        }
        ScenarioCommand::DeliverAccept { learner, from, ballot } => {
            let m = find(&|m| matches!(m, Message::Accept(a) if a.ballot == ballot && a.acceptor.index == from))?;
            Some((AgentId::learner(learner), m))
        }
        ScenarioCommand::DeliverAcceptToProposer { proposer, from, ballot } => {
            let m = find(&|m| matches!(m, Message::Accept(a) if a.ballot == ballot && a.acceptor.index == from))?;
            Some((AgentId::proposer(proposer), m))
        }
        _ => None,
    }
}

fn proposed_at(world: &WorldState, ballot: Ballot) -> Option<Value> {
    world.sent().iter().find_map(|m| match m {
        Message::Propose(p) if p.ballot == ballot => Some(p.value),
        _ => None,
    })
}

fn evaluate(world: &WorldState, index: usize, cmd: &ScenarioCommand) -> AssertionResult {
    let cfg = world.config();
    let learned_text = |l: u16| {
        let learned = &world.learners()[l as usize].learned;
        if learned.is_empty() {
            "nothing learned".to_string()
        } else {
            let pairs: Vec<String> = learned.iter().map(|(v, b)| format!("{}@{b}", cfg.value_name(*v))).collect();
            format!("learned {}", pairs.join(","))
        }
    };
    let proposed_text = |b: Ballot| match proposed_at(world, b) {
        Some(v) => format!("{} proposed at {b}", cfg.value_name(v)),
        None => format!("nothing proposed at {b}"),
    };
    let (passed, observed) = match cmd {
        ScenarioCommand::AssertLearned { learner, value } => {
            let v = cfg.value_by_name(value);
            let ok = v.is_some_and(|v| world.learners()[*learner as usize].has_learned(v));
            (ok, learned_text(*learner))
        }
        ScenarioCommand::AssertNotLearned { learner } => {
            (world.learners()[*learner as usize].learned.is_empty(), learned_text(*learner))
        }
        ScenarioCommand::AssertProposed { ballot, value } => {
            let ok = proposed_at(world, *ballot).is_some_and(|v| Some(v) == cfg.value_by_name(value));
            (ok, proposed_text(*ballot))
        }
        ScenarioCommand::AssertNotProposed { ballot } => (proposed_at(world, *ballot).is_none(), proposed_text(*ballot)),
        _ => unreachable!("not an assertion"),
    };
    AssertionResult { index, command: cmd.clone(), passed, observed }
}

const FIXTURE_SOURCES: [(&str, &str); 7] = [
    ("table1", include_str!("../fixtures/table1.scn")),
    ("table2", include_str!("../fixtures/table2.scn")),
    ("table3", include_str!("../fixtures/table3.scn")),
    ("table3_classic", include_str!("../fixtures/table3_classic.scn")),
    ("cq_matching", include_str!("../fixtures/cq_matching.scn")),
    ("phase1_bypass", include_str!("../fixtures/phase1_bypass.scn")),
    ("mutant_m1_demo", include_str!("../fixtures/mutant_m1_demo.scn")),
];

/// Fixture names in a stable order.
pub fn fixture_names() -> impl Iterator<Item = &'static str> {
    FIXTURE_SOURCES.iter().map(|(n, _)| *n)
}

pub fn fixture_source(name: &str) -> Option<&'static str> {
    FIXTURE_SOURCES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn fixture(name: &str) -> Option<Scenario> {
    let text = fixture_source(name)?;
    Some(parse_scenario_named(name, text).expect("built-in fixtures parse"))
}

pub fn builtin_fixtures() -> BTreeMap<&'static str, Scenario> {
    fixture_names().map(|n| (n, fixture(n).expect("listed fixture exists"))).collect()
}

//! Shared protocol vocabulary: ballots, values, proposals, agent ids,
//! wire messages and the ensemble configuration.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// A round identifier. Ballots form a single global sequence shared by all
/// proposers, so "consecutive" means adjacent integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ballot(pub u32);

impl Ballot {
    pub const ZERO: Ballot = Ballot(0);

    pub fn number(self) -> u32 {
        self.0
    }

    pub fn next(self) -> Ballot {
        Ballot(self.0 + 1)
    }

    /// The ballot immediately before this one, if any.
    pub fn prev(self) -> Option<Ballot> {
        self.0.checked_sub(1).map(Ballot)
    }
}

impl fmt::Display for Ballot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A proposable value, as an index into the configured alphabet
/// ([`Config::values`]). Only equality is meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Value(pub u8);

/// A ballot/value pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Proposal {
    pub ballot: Ballot,
    pub value: Value,
}

impl Proposal {
    pub fn new(ballot: Ballot, value: Value) -> Self {
        Proposal { ballot, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Proposer,
    Acceptor,
    Learner,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Proposer => "proposer",
            Role::Acceptor => "acceptor",
            Role::Learner => "learner",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposer" => Ok(Role::Proposer),
            "acceptor" => Ok(Role::Acceptor),
            "learner" => Ok(Role::Learner),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId {
    pub role: Role,
    pub index: u16,
}

impl AgentId {
    pub fn proposer(index: u16) -> Self {
        AgentId { role: Role::Proposer, index }
    }

    pub fn acceptor(index: u16) -> Self {
        AgentId { role: Role::Acceptor, index }
    }

    pub fn learner(index: u16) -> Self {
        AgentId { role: Role::Learner, index }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.role, self.index)
    }
}

/// Phase 1a: a proposer asks acceptors to join `ballot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prepare {
    pub ballot: Ballot,
    pub proposer: AgentId,
}

/// Phase 1b: an acceptor's promise, carrying its highest accepted proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Promise {
    pub ballot: Ballot,
    pub prior: Option<Proposal>,
    pub acceptor: AgentId,
}

/// Phase 2a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Propose {
    pub ballot: Ballot,
    pub value: Value,
    pub proposer: AgentId,
}

/// Phase 2b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Accept {
    pub ballot: Ballot,
    pub value: Value,
    pub acceptor: AgentId,
}

/// The four wire messages. The derived ordering is the canonical total
/// order used for fingerprints and deterministic enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Message {
    Prepare(Prepare),
    Promise(Promise),
    Propose(Propose),
    Accept(Accept),
}

impl Message {
    pub fn ballot(&self) -> Ballot {
        match self {
            Message::Prepare(m) => m.ballot,
            Message::Promise(m) => m.ballot,
            Message::Propose(m) => m.ballot,
            Message::Accept(m) => m.ballot,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Prepare(_) => "prepare",
            Message::Promise(_) => "promise",
            Message::Propose(_) => "propose",
            Message::Accept(_) => "accept",
        }
    }

    /// The agent that emitted this message.
    pub fn sender(&self) -> AgentId {
        match self {
            Message::Prepare(m) => m.proposer,
            Message::Promise(m) => m.acceptor,
            Message::Propose(m) => m.proposer,
            Message::Accept(m) => m.acceptor,
        }
    }
}

impl From<Prepare> for Message {
    fn from(m: Prepare) -> Self {
        Message::Prepare(m)
    }
}

impl From<Promise> for Message {
    fn from(m: Promise) -> Self {
        Message::Promise(m)
    }
}

impl From<Propose> for Message {
    fn from(m: Propose) -> Self {
        Message::Propose(m)
    }
}

impl From<Accept> for Message {
    fn from(m: Accept) -> Self {
        Message::Accept(m)
    }
}

/// Which learning and proposing rules the agents run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Variant {
    /// Same-ballot majorities, full Phase 1 before every proposal.
    Classic,
    /// Consecutive-quorum learning, classic proposing.
    Cq,
    /// Consecutive-quorum learning plus consecutive proposals and the
    /// Phase 1 bypass.
    #[default]
    CqCp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Classic, Variant::Cq, Variant::CqCp];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Classic => "classic",
            Variant::Cq => "cq",
            Variant::CqCp => "cq_cp",
        }
    }

    pub fn learns_cq(self) -> bool {
        !matches!(self, Variant::Classic)
    }

    pub fn consecutive_proposals(self) -> bool {
        matches!(self, Variant::CqCp)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic" => Ok(Variant::Classic),
            "cq" => Ok(Variant::Cq),
            "cq_cp" => Ok(Variant::CqCp),
            other => Err(format!("unknown variant `{other}` (expected classic, cq or cq_cp)")),
        }
    }
}

/// Deliberately broken rules used to validate the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Mutant {
    #[default]
    None,
    /// Learners learn `v` once f+1 acceptors accepted `v` at any ballots.
    M1AnyBallotMajority,
    /// Consecutive proposals carry the proposer's client value instead of
    /// the value observed at the previous ballot.
    M2UnconstrainedConsecutive,
}

impl Mutant {
    pub fn as_str(self) -> &'static str {
        match self {
            Mutant::None => "none",
            Mutant::M1AnyBallotMajority => "m1_any_ballot_majority",
            Mutant::M2UnconstrainedConsecutive => "m2_unconstrained_consecutive",
        }
    }
}

impl fmt::Display for Mutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mutant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Mutant::None),
            "m1" | "m1_any_ballot_majority" => Ok(Mutant::M1AnyBallotMajority),
            "m2" | "m2_unconstrained_consecutive" => Ok(Mutant::M2UnconstrainedConsecutive),
            other => Err(format!("unknown mutant `{other}` (expected none, m1 or m2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("acceptor count {acceptors} must equal 2f+1 = {expected}")]
    AcceptorCount { acceptors: usize, expected: usize },
    #[error("at least one proposer is required")]
    NoProposers,
    #[error("at least one learner is required")]
    NoLearners,
    #[error("the value alphabet must not be empty")]
    NoValues,
    #[error("the value alphabet holds at most 256 values")]
    TooManyValues,
    #[error("invalid value name `{0}`")]
    BadValueName(String),
    #[error("duplicate value name `{0}`")]
    DuplicateValue(String),
    #[error("fault bound f={0} is too large")]
    FaultBound(u32),
}

/// Ensemble configuration. Construct through [`Config::new`] or
/// [`ConfigBuilder`]; both validate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    f: u32,
    acceptors: usize,
    proposers: usize,
    learners: usize,
    values: Vec<String>,
    variant: Variant,
    mutant: Mutant,
}

impl Config {
    pub fn new(
        f: u32,
        proposers: usize,
        learners: usize,
        values: Vec<String>,
        variant: Variant,
        mutant: Mutant,
    ) -> Result<Self, ConfigError> {
        if f > 1000 {
            return Err(ConfigError::FaultBound(f));
        }
        let acceptors = 2 * f as usize + 1;
        Self::with_acceptors(f, acceptors, proposers, learners, values, variant, mutant)
    }

    /// Like [`Config::new`] but with an explicit acceptor count, which must
    /// still equal `2f+1`.
    pub fn with_acceptors(
        f: u32,
        acceptors: usize,
        proposers: usize,
        learners: usize,
        values: Vec<String>,
        variant: Variant,
        mutant: Mutant,
    ) -> Result<Self, ConfigError> {
        let expected = 2 * f as usize + 1;
        if acceptors != expected {
            return Err(ConfigError::AcceptorCount { acceptors, expected });
        }
        if proposers == 0 {
            return Err(ConfigError::NoProposers);
        }
        if learners == 0 {
            return Err(ConfigError::NoLearners);
        }
        if values.is_empty() {
            return Err(ConfigError::NoValues);
        }
        if values.len() > 256 {
            return Err(ConfigError::TooManyValues);
        }
        for (i, v) in values.iter().enumerate() {
            if !is_value_name(v) {
                return Err(ConfigError::BadValueName(v.clone()));
            }
            if values[..i].contains(v) {
                return Err(ConfigError::DuplicateValue(v.clone()));
            }
        }
        Ok(Config { f, acceptors, proposers, learners, values, variant, mutant })
    }

    pub fn builder() -> ConfigBuilder {
        ConfigBuilder::default()
    }

    pub fn f(&self) -> u32 {
        self.f
    }

    pub fn acceptor_count(&self) -> usize {
        self.acceptors
    }

    pub fn proposer_count(&self) -> usize {
        self.proposers
    }

    pub fn learner_count(&self) -> usize {
        self.learners
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn mutant(&self) -> Mutant {
        self.mutant
    }

    pub fn value_names(&self) -> &[String] {
        &self.values
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.values.len()).map(|i| Value(i as u8))
    }

    pub fn value_name(&self, v: Value) -> &str {
        self.values.get(v.0 as usize).map(String::as_str).unwrap_or("?")
    }

    pub fn value_by_name(&self, name: &str) -> Option<Value> {
        self.values.iter().position(|v| v == name).map(|i| Value(i as u8))
    }

    pub fn with_variant(&self, variant: Variant) -> Config {
        Config { variant, ..self.clone() }
    }

    pub fn with_mutant(&self, mutant: Mutant) -> Config {
        Config { mutant, ..self.clone() }
    }

    pub fn acceptor_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.acceptors as u16).map(AgentId::acceptor)
    }

    pub fn proposer_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.proposers as u16).map(AgentId::proposer)
    }

    pub fn learner_ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.learners as u16).map(AgentId::learner)
    }

    /// Whether `id` names an agent of this ensemble.
    pub fn contains(&self, id: AgentId) -> bool {
        let n = match id.role {
            Role::Proposer => self.proposers,
            Role::Acceptor => self.acceptors,
            Role::Learner => self.learners,
        };
        (id.index as usize) < n
    }
}

fn is_value_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    f: u32,
    proposers: usize,
    learners: usize,
    values: Vec<String>,
    variant: Variant,
    mutant: Mutant,
}

impl Default for ConfigBuilder {
    fn default() -> Self {
        ConfigBuilder {
            f: 1,
            proposers: 2,
            learners: 1,
            values: vec!["x".into(), "y".into()],
            variant: Variant::CqCp,
            mutant: Mutant::None,
        }
    }
}

impl ConfigBuilder {
    pub fn f(mut self, f: u32) -> Self {
        self.f = f;
        self
    }

    pub fn proposers(mut self, n: usize) -> Self {
        self.proposers = n;
        self
    }

    pub fn learners(mut self, n: usize) -> Self {
        self.learners = n;
        self
    }

    pub fn values<I, S>(mut self, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.values = values.into_iter().map(Into::into).collect();
        self
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn mutant(mut self, mutant: Mutant) -> Self {
        self.mutant = mutant;
        self
    }

    pub fn build(self) -> Result<Config, ConfigError> {
        Config::new(self.f, self.proposers, self.learners, self.values, self.variant, self.mutant)
    }
}

/// Size of a majority quorum: f+1 of the 2f+1 acceptors.
pub fn quorum_size(cfg: &Config) -> usize {
    cfg.f as usize + 1
}

/// Default ballot ownership: ballot `b` belongs to proposer `b mod n`.
pub fn ballot_owner(cfg: &Config, b: Ballot) -> AgentId {
    AgentId::proposer((b.0 as usize % cfg.proposers) as u16)
}

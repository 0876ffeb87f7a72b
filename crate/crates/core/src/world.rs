//! Global execution semantics.
//!
//! The network is a grow-only set of sent messages. Each delivery of a sent
//! message to one eligible recipient is an independent action, so loss
//! (never delivering), reordering (interleaving) and duplication (handlers
//! are idempotent) all fall out of the action space.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{AcceptorState, AgentError, LearnerState, Phase, ProposerState};
use crate::types::{ballot_owner, Accept, AgentId, Ballot, Config, Message, Promise, Role, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    StartBallot { proposer: AgentId, ballot: Ballot, client_value: Value },
    Deliver { recipient: AgentId, message: Message },
    Crash { agent: AgentId },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::StartBallot { proposer, ballot, client_value } => {
                write!(f, "start {proposer} ballot={ballot} client=v{}", client_value.0)
            }
            Action::Deliver { recipient, message } => write!(f, "deliver {message:?} -> {recipient}"),
            Action::Crash { agent } => write!(f, "crash {agent}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub step: u64,
    pub action: Action,
    pub emitted: Vec<Message>,
    /// Union of learned pairs across learners after the step.
    pub learned_after: BTreeSet<(Value, Ballot)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} has crashed")]
    Crashed(AgentId),
    #[error("message {0:?} was never sent")]
    NotSent(Message),
    #[error("{recipient} cannot receive {message:?}")]
    WrongRecipient { recipient: AgentId, message: Message },
    #[error("{proposer} does not own ballot {ballot}")]
    NotOwner { proposer: AgentId, ballot: Ballot },
    #[error("value v{0} is not in the configured alphabet")]
    UnknownValue(u8),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Who may act at a ballot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ownership {
    /// `ballot mod proposers` (checker mode).
    Modulo,
    /// First proposer to claim a ballot owns it (scenario mode).
    Scripted(BTreeMap<Ballot, AgentId>),
}

#[derive(Debug, Clone)]
pub struct WorldState {
    cfg: Arc<Config>,
    acceptors: Vec<AcceptorState>,
    proposers: Vec<ProposerState>,
    learners: Vec<LearnerState>,
    sent: BTreeSet<Message>,
    delivered: BTreeMap<AgentId, BTreeSet<Message>>,
    crashed: BTreeSet<AgentId>,
    ownership: Ownership,
    steps: u64,
    recording: bool,
    exploring: bool,
    log: Vec<TraceRecord>,
}

/// All acceptors fresh, proposers idle, learners empty, nothing sent.
pub fn initial_world(cfg: &Config) -> WorldState {
    WorldState::new(Arc::new(cfg.clone()), Ownership::Modulo)
}

impl WorldState {
    pub fn new(cfg: Arc<Config>, ownership: Ownership) -> Self {
        WorldState {
            acceptors: cfg.acceptor_ids().map(AcceptorState::new).collect(),
            proposers: cfg.proposer_ids().map(ProposerState::new).collect(),
            learners: cfg.learner_ids().map(LearnerState::new).collect(),
            sent: BTreeSet::new(),
            delivered: BTreeMap::new(),
            crashed: BTreeSet::new(),
            ownership,
            steps: 0,
            recording: true,
            exploring: false,
            log: Vec::new(),
            cfg,
        }
    }

    /// A world for scripted runs, where issuing a prepare claims the ballot.
    pub fn scripted(cfg: &Config) -> Self {
        WorldState::new(Arc::new(cfg.clone()), Ownership::Scripted(BTreeMap::new()))
    }

    /// Stops appending to the event log. The explorer tracks paths itself.
    pub fn without_log(mut self) -> Self {
        self.recording = false;
        self.log.clear();
        self
    }

    /// Switches to the reduced form used by the explorer.
    ///
    /// Delivered sets are dropped, so a delivery is enabled whenever it
    /// would change something rather than until it first happens. Promises
    /// that no proposer can act on any more are forgotten, as are the
    /// promises held by a proposer that has left its preparing phase. None
    /// of this changes which agent states, proposals or accepts are
    /// reachable; it only merges worlds that can no longer be told apart.
    pub fn for_exploration(mut self) -> Self {
        self.exploring = true;
        self.delivered.clear();
        self.compact();
        self
    }

    pub fn is_exploring(&self) -> bool {
        self.exploring
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn shared_config(&self) -> Arc<Config> {
        Arc::clone(&self.cfg)
    }

    pub fn acceptors(&self) -> &[AcceptorState] {
        &self.acceptors
    }

    pub fn proposers(&self) -> &[ProposerState] {
        &self.proposers
    }

    pub fn learners(&self) -> &[LearnerState] {
        &self.learners
    }

    pub fn sent(&self) -> &BTreeSet<Message> {
        &self.sent
    }

    pub fn delivered(&self, agent: AgentId) -> Option<&BTreeSet<Message>> {
        self.delivered.get(&agent)
    }

    pub fn crashed(&self) -> &BTreeSet<AgentId> {
        &self.crashed
    }

    pub fn log(&self) -> &[TraceRecord] {
        &self.log
    }

    pub fn ownership(&self) -> &Ownership {
        &self.ownership
    }

    /// Number of actions applied since the initial world.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Union of learned pairs over all learners.
    pub fn learned(&self) -> BTreeSet<(Value, Ballot)> {
        self.learners.iter().flat_map(|l| l.learned.iter().copied()).collect()
    }

    pub fn is_crashed(&self, agent: AgentId) -> bool {
        self.crashed.contains(&agent)
    }

    fn was_delivered(&self, agent: AgentId, m: &Message) -> bool {
        self.delivered.get(&agent).is_some_and(|s| s.contains(m))
    }

    /// The proposer entitled to act at `ballot`, if any.
    pub fn owner_of(&self, ballot: Ballot) -> Option<AgentId> {
        match &self.ownership {
            Ownership::Modulo => Some(ballot_owner(&self.cfg, ballot)),
            Ownership::Scripted(claims) => claims.get(&ballot).copied(),
        }
    }

    fn may_take(&self, proposer: AgentId, ballot: Ballot) -> bool {
        match &self.ownership {
            Ownership::Modulo => ballot_owner(&self.cfg, ballot) == proposer,
            Ownership::Scripted(claims) => claims.get(&ballot).map_or(true, |p| *p == proposer),
        }
    }

    fn claim(&mut self, proposer: AgentId, ballot: Ballot) {
        if let Ownership::Scripted(claims) = &mut self.ownership {
            claims.entry(ballot).or_insert(proposer);
        }
    }

    /// Ballots at which some live proposer is still collecting promises.
    fn collecting(&self) -> impl Iterator<Item = Ballot> + '_ {
        self.proposers
            .iter()
            .filter(|p| p.phase == Phase::Preparing && !self.is_crashed(p.id))
            .filter_map(|p| p.current_ballot)
    }

    fn compact(&mut self) {
        let live: Vec<Ballot> = self.collecting().collect();
        self.sent.retain(|m| !matches!(m, Message::Promise(p) if !live.contains(&p.ballot)));
        for p in &mut self.proposers {
            if p.phase != Phase::Preparing {
                p.promises.clear();
            }
        }
    }

    fn adds_message(&self, m: Message) -> bool {
        if self.sent.contains(&m) {
            return false;
        }
        match m {
            Message::Promise(p) if self.exploring => self.collecting().any(|b| b == p.ballot),
            _ => true,
        }
    }

    /// Whether delivering `message` to `recipient` would change the world.
    /// Both must be valid; ineligible pairs report `false`.
    pub fn delivery_changes(&self, recipient: AgentId, message: &Message) -> bool {
        let idx = recipient.index as usize;
        match (recipient.role, message) {
            (Role::Acceptor, Message::Prepare(m)) => {
                let (st, out) = self.acceptors[idx].on_prepare(m);
                st != self.acceptors[idx] || out.is_some_and(|o| self.adds_message(o.into()))
            }
            (Role::Acceptor, Message::Propose(m)) => {
                let (st, out) = self.acceptors[idx].on_propose(m);
                st != self.acceptors[idx] || out.is_some_and(|o| self.adds_message(o.into()))
            }
            (Role::Proposer, Message::Promise(m)) => {
                let (st, out) = self.proposers[idx].on_promise(m, &self.cfg);
                st != self.proposers[idx] || out.is_some()
            }
            (Role::Proposer, Message::Accept(m)) => {
                let may_take = self.may_take(recipient, m.ballot.next());
                let (st, out) = self.proposers[idx].on_accept(m, &self.cfg, may_take);
                st != self.proposers[idx] || out.is_some()
            }
            (Role::Learner, Message::Accept(m)) => {
                let (st, _) = self.learners[idx].on_accept(m, &self.cfg);
                st != self.learners[idx]
            }
            _ => false,
        }
    }

    fn check_agent(&self, agent: AgentId) -> Result<(), WorldError> {
        if !self.cfg.contains(agent) {
            return Err(WorldError::UnknownAgent(agent));
        }
        if self.is_crashed(agent) {
            return Err(WorldError::Crashed(agent));
        }
        Ok(())
    }

    /// Applies one action, dispatching deliveries to the recipient's
    /// handler. Outputs are added to the sent set.
    pub fn apply_action(&self, action: &Action) -> Result<WorldState, WorldError> {
        let mut next = self.clone();
        let mut emitted: Vec<Message> = Vec::new();
        match *action {
            Action::StartBallot { proposer, ballot, client_value } => {
                self.check_agent(proposer)?;
                if proposer.role != Role::Proposer {
                    return Err(WorldError::UnknownAgent(proposer));
                }
                if client_value.0 as usize >= self.cfg.value_names().len() {
                    return Err(WorldError::UnknownValue(client_value.0));
                }
                if !self.may_take(proposer, ballot) {
                    return Err(WorldError::NotOwner { proposer, ballot });
                }
                let idx = proposer.index as usize;
                let (st, prepare) = self.proposers[idx].start(ballot, client_value)?;
                next.proposers[idx] = st;
                next.claim(proposer, ballot);
                emitted.push(prepare.into());
            }
            Action::Deliver { recipient, message } => {
                self.check_agent(recipient)?;
                if !self.sent.contains(&message) {
                    return Err(WorldError::NotSent(message));
                }
                let wrong = || WorldError::WrongRecipient { recipient, message };
                let idx = recipient.index as usize;
                match (recipient.role, &message) {
                    (Role::Acceptor, Message::Prepare(m)) => {
                        let (st, out) = self.acceptors[idx].on_prepare(m);
                        next.acceptors[idx] = st;
                        emitted.extend(out.map(Message::from));
                    }
                    (Role::Acceptor, Message::Propose(m)) => {
                        let (st, out) = self.acceptors[idx].on_propose(m);
                        next.acceptors[idx] = st;
                        emitted.extend(out.map(Message::from));
                    }
                    (Role::Proposer, Message::Promise(m)) => {
                        if self.owner_of(m.ballot) != Some(recipient) {
                            return Err(wrong());
                        }
                        let (st, out) = self.proposers[idx].on_promise(m, &self.cfg);
                        next.proposers[idx] = st;
                        emitted.extend(out.map(Message::from));
                    }
                    (Role::Proposer, Message::Accept(m)) => {
                        let target = m.ballot.next();
                        let may_take = self.may_take(recipient, target);
                        let (st, out) = self.proposers[idx].on_accept(m, &self.cfg, may_take);
                        next.proposers[idx] = st;
                        if let Some(p) = out {
                            next.claim(recipient, p.ballot);
                            emitted.push(p.into());
                        }
                    }
                    (Role::Learner, Message::Accept(m)) => {
                        let (st, _) = self.learners[idx].on_accept(m, &self.cfg);
                        next.learners[idx] = st;
                    }
                    _ => return Err(wrong()),
                }
                if !next.exploring {
                    next.delivered.entry(recipient).or_default().insert(message);
                }
            }
            Action::Crash { agent } => {
                self.check_agent(agent)?;
                next.crashed.insert(agent);
            }
        }
        next.sent.extend(emitted.iter().copied());
        if next.exploring {
            next.compact();
        }
        if next.recording {
            let learned_after = next.learned();
            next.log.push(TraceRecord { step: self.steps, action: *action, emitted, learned_after });
        }
        next.steps += 1;
        Ok(next)
    }
}

#[cfg(test)]
impl WorldState {
    pub(crate) fn force_send(&mut self, m: Message) {
        self.sent.insert(m);
    }

    pub(crate) fn force_learn(&mut self, learner: usize, v: Value, b: Ballot) {
        self.learners[learner].learned.insert((v, b));
    }

    pub(crate) fn force_proposer(&mut self, p: ProposerState) {
        let idx = p.id.index as usize;
        self.proposers[idx] = p;
    }
}

/// Every enabled action, in canonical order.
///
/// Proposers start owned, unused ballots up to `max_ballot` with any client
/// value. Each sent message can be delivered once to each eligible,
/// non-crashed recipient: prepares and proposes to acceptors, promises to
/// the ballot's owner, accepts to learners and (with consecutive proposals)
/// to the owner of the next ballot when that ballot is within scope.
/// Acceptors may crash while fewer than `min(max_crashes, f)` have. In
/// exploration mode, where delivered sets are not kept, a delivery stays
/// enabled for as long as it would still change the world.
pub fn enumerate_actions(w: &WorldState, max_ballot: Ballot, max_crashes: usize) -> Vec<Action> {
    let cfg = w.config();
    let mut out = Vec::new();

    for p in w.proposers() {
        if w.is_crashed(p.id) {
            continue;
        }
        for b in 0..=max_ballot.0 {
            let ballot = Ballot(b);
            if p.used.contains(&ballot)
                || p.current_ballot.is_some_and(|c| ballot <= c)
                || !w.may_take(p.id, ballot)
            {
                continue;
            }
            for client_value in cfg.values() {
                out.push(Action::StartBallot { proposer: p.id, ballot, client_value });
            }
        }
    }

    let mut push = |recipient: AgentId, message: Message| {
        let pending = if w.exploring {
            w.delivery_changes(recipient, &message)
        } else {
            !w.was_delivered(recipient, &message)
        };
        if pending && !w.is_crashed(recipient) {
            out.push(Action::Deliver { recipient, message });
        }
    };
    for m in w.sent() {
        match m {
            Message::Prepare(_) | Message::Propose(_) => {
                cfg.acceptor_ids().for_each(|a| push(a, *m));
            }
            Message::Promise(p) => {
                if let Some(owner) = w.owner_of(p.ballot) {
                    push(owner, *m);
                }
            }
            Message::Accept(a) => {
                cfg.learner_ids().for_each(|l| push(l, *m));
                let target = a.ballot.next();
                if cfg.variant().consecutive_proposals() && target <= max_ballot {
                    if let Some(owner) = w.owner_of(target) {
                        push(owner, *m);
                    }
                }
            }
        }
    }

    let crash_budget = max_crashes.min(cfg.f() as usize);
    let crashed_acceptors = w.crashed().iter().filter(|a| a.role == Role::Acceptor).count();
    if crashed_acceptors < crash_budget {
        for a in cfg.acceptor_ids() {
            if !w.is_crashed(a) {
                out.push(Action::Crash { agent: a });
            }
        }
    }

    out.sort();
    out
}

/// Canonical encoding of the protocol state: agent states, sent set,
/// delivered sets and crashed set. The event log and step counter are not
/// part of it, so two paths reaching the same state encode identically.
pub fn world_fingerprint(w: &WorldState) -> Vec<u8> {
    encode(w, None)
}

/// Like [`world_fingerprint`], but equal for worlds that differ only by a
/// renaming of acceptors. Acceptors are interchangeable: quorums, promises
/// and consecutive quorums never depend on which acceptor is which.
///
/// Acceptors are renamed in order of a signature holding everything the
/// world records about them. Two acceptors with equal signatures can be
/// swapped without changing the world, so the order among them does not
/// matter.
pub fn symmetric_fingerprint(w: &WorldState) -> Vec<u8> {
    let signatures: Vec<Vec<u8>> = (0..w.acceptors.len()).map(|i| acceptor_signature(w, i)).collect();
    let mut order: Vec<usize> = (0..signatures.len()).collect();
    order.sort_by(|&i, &j| signatures[i].cmp(&signatures[j]));
    let mut relabel = vec![0u16; order.len()];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new as u16;
    }
    encode(w, Some(&relabel))
}

fn acceptor_signature(w: &WorldState, i: usize) -> Vec<u8> {
    let a = &w.acceptors[i];
    let id = a.id;
    let mut enc = Encoder::default();
    enc.u8(w.is_crashed(id) as u8);
    enc.opt_ballot(a.promised);
    enc.opt_proposal(a.accepted.map(|p| (p.ballot, p.value)));
    enc.len(a.accepted_history.len());
    for p in &a.accepted_history {
        enc.ballot(p.ballot);
        enc.value(p.value);
    }
    enc.len(a.emitted_accept_ballots.len());
    a.emitted_accept_ballots.iter().for_each(|b| enc.ballot(*b));
    for p in &w.proposers {
        match p.promises.get(&id) {
            None => enc.u8(0),
            Some(prior) => {
                enc.u8(1);
                enc.opt_proposal(prior.map(|q| (q.ballot, q.value)));
            }
        }
    }
    for l in &w.learners {
        for (from, v, b) in l.history.iter() {
            if from == id {
                enc.value(v);
                enc.ballot(b);
            }
        }
        enc.u8(0xff);
    }
    let from_self = |m: &Message| match m {
        Message::Promise(p) => p.acceptor == id,
        Message::Accept(x) => x.acceptor == id,
        _ => false,
    };
    w.sent.iter().filter(|m| from_self(m)).for_each(|m| enc.message(m));
    enc.u8(0xff);
    for (agent, msgs) in &w.delivered {
        if *agent == id {
            enc.u8(0);
            msgs.iter().for_each(|m| enc.message(m));
        } else {
            enc.u8(1);
            enc.agent(*agent);
            msgs.iter().filter(|m| from_self(m)).for_each(|m| enc.message(m));
        }
        enc.u8(0xff);
    }
    enc.0
}

/// Encodes `w`, optionally renaming acceptor `i` to `relabel[i]`. Renamed
/// collections are re-sorted so the encoding stays canonical.
fn encode(w: &WorldState, relabel: Option<&[u16]>) -> Vec<u8> {
    let agent = |a: AgentId| match relabel {
        Some(r) if a.role == Role::Acceptor => AgentId::acceptor(r[a.index as usize]),
        _ => a,
    };
    let message = |m: &Message| match *m {
        Message::Promise(p) => Message::Promise(Promise { acceptor: agent(p.acceptor), ..p }),
        Message::Accept(a) => Message::Accept(Accept { acceptor: agent(a.acceptor), ..a }),
        other => other,
    };
    let mut acceptors: Vec<&AcceptorState> = w.acceptors.iter().collect();
    if relabel.is_some() {
        acceptors.sort_by_key(|a| agent(a.id).index);
    }

    let mut enc = Encoder::default();
    enc.len(acceptors.len());
    for a in acceptors {
        enc.opt_ballot(a.promised);
        enc.opt_proposal(a.accepted.map(|p| (p.ballot, p.value)));
        enc.len(a.accepted_history.len());
        for p in &a.accepted_history {
            enc.ballot(p.ballot);
            enc.value(p.value);
        }
        enc.len(a.emitted_accept_ballots.len());
        a.emitted_accept_ballots.iter().for_each(|b| enc.ballot(*b));
    }
    enc.len(w.proposers.len());
    for p in &w.proposers {
        enc.opt_ballot(p.current_ballot);
        match p.client_value {
            None => enc.u8(0),
            Some(v) => {
                enc.u8(1);
                enc.value(v);
            }
        }
        let mut promises: Vec<_> = p.promises.iter().map(|(a, prior)| (agent(*a), *prior)).collect();
        promises.sort();
        enc.len(promises.len());
        for (a, prior) in promises {
            enc.agent(a);
            enc.opt_proposal(prior.map(|p| (p.ballot, p.value)));
        }
        enc.len(p.used.len());
        p.used.iter().for_each(|b| enc.ballot(*b));
        enc.len(p.proposed.len());
        for (b, rec) in &p.proposed {
            enc.ballot(*b);
            enc.value(rec.value);
            enc.u8(rec.criterion as u8);
        }
        enc.u8(p.phase as u8);
    }
    enc.len(w.learners.len());
    for l in &w.learners {
        let mut history: Vec<_> = l.history.iter().map(|(a, v, b)| (agent(a), v, b)).collect();
        history.sort();
        enc.len(history.len());
        for (a, v, b) in history {
            enc.agent(a);
            enc.value(v);
            enc.ballot(b);
        }
        enc.len(l.learned.len());
        for (v, b) in &l.learned {
            enc.value(*v);
            enc.ballot(*b);
        }
    }
    let mut sent: Vec<Message> = w.sent.iter().map(message).collect();
    sent.sort();
    enc.len(sent.len());
    sent.iter().for_each(|m| enc.message(m));
    let mut delivered: Vec<(AgentId, Vec<Message>)> = w
        .delivered
        .iter()
        .map(|(a, msgs)| {
            let mut msgs: Vec<Message> = msgs.iter().map(message).collect();
            msgs.sort();
            (agent(*a), msgs)
        })
        .collect();
    delivered.sort();
    enc.len(delivered.len());
    for (a, msgs) in &delivered {
        enc.agent(*a);
        enc.len(msgs.len());
        msgs.iter().for_each(|m| enc.message(m));
    }
    let mut crashed: Vec<AgentId> = w.crashed.iter().map(|a| agent(*a)).collect();
    crashed.sort();
    enc.len(crashed.len());
    crashed.iter().for_each(|a| enc.agent(*a));
    enc.0
}

/// SHA-256 of [`world_fingerprint`].
pub fn fingerprint_digest(w: &WorldState) -> [u8; 32] {
    Sha256::digest(world_fingerprint(w)).into()
}

pub fn fingerprint_hex(w: &WorldState) -> String {
    hex::encode(fingerprint_digest(w))
}

#[derive(Default)]
struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, b: u8) {
        self.0.push(b);
    }

    /// LEB128, so the small numbers that dominate stay one byte.
    fn u32(&mut self, mut n: u32) {
        while n >= 0x80 {
            self.0.push((n as u8) | 0x80);
            n >>= 7;
        }
        self.0.push(n as u8);
    }

    fn len(&mut self, n: usize) {
        self.u32(n as u32);
    }

    fn ballot(&mut self, b: Ballot) {
        self.u32(b.0);
    }

    fn value(&mut self, v: Value) {
        self.u8(v.0);
    }

    fn agent(&mut self, a: AgentId) {
        self.u8(a.role as u8);
        self.u32(a.index as u32);
    }

    fn opt_ballot(&mut self, b: Option<Ballot>) {
        match b {
            None => self.u8(0),
            Some(b) => {
                self.u8(1);
                self.ballot(b);
            }
        }
    }

    fn opt_proposal(&mut self, p: Option<(Ballot, Value)>) {
        match p {
            None => self.u8(0),
            Some((b, v)) => {
                self.u8(1);
                self.ballot(b);
                self.value(v);
            }
        }
    }

    fn message(&mut self, m: &Message) {
        match m {
            Message::Prepare(p) => {
                self.u8(0);
                self.ballot(p.ballot);
                self.agent(p.proposer);
            }
            Message::Promise(p) => {
                self.u8(1);
                self.ballot(p.ballot);
                self.opt_proposal(p.prior.map(|q| (q.ballot, q.value)));
                self.agent(p.acceptor);
            }
            Message::Propose(p) => {
                self.u8(2);
                self.ballot(p.ballot);
                self.value(p.value);
                self.agent(p.proposer);
            }
            Message::Accept(a) => {
                self.u8(3);
                self.ballot(a.ballot);
                self.value(a.value);
                self.agent(a.acceptor);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Accept, Mutant, Prepare, Promise, Variant};

    const X: Value = Value(0);
    const Y: Value = Value(1);

    fn cfg(variant: Variant) -> Config {
        Config::new(1, 2, 1, vec!["x".into(), "y".into()], variant, Mutant::None).unwrap()
    }

    fn start(p: u16, b: u32, v: Value) -> Action {
        Action::StartBallot { proposer: AgentId::proposer(p), ballot: Ballot(b), client_value: v }
    }

    fn deliver(to: AgentId, m: impl Into<Message>) -> Action {
        Action::Deliver { recipient: to, message: m.into() }
    }

    fn prepare(b: u32, p: u16) -> Prepare {
        Prepare { ballot: Ballot(b), proposer: AgentId::proposer(p) }
    }

    #[test]
    fn initial_world_is_empty() {
        let w = initial_world(&cfg(Variant::Cq));
        assert_eq!(w.acceptors().len(), 3);
        assert!(w.acceptors().iter().all(|a| a.promised.is_none()));
        assert!(w.log().is_empty());
        assert!(w.learned().is_empty());
        assert!(w.sent().is_empty());
    }

    #[test]
    fn initial_actions_are_starts() {
        let w = initial_world(&cfg(Variant::CqCp));
        let actions = enumerate_actions(&w, Ballot(1), 0);
        assert_eq!(actions, vec![start(0, 0, X), start(0, 0, Y), start(1, 1, X), start(1, 1, Y)]);
    }

    #[test]
    fn prepare_fans_out_to_acceptors() {
        let c = Config::new(1, 2, 1, vec!["x".into()], Variant::Cq, Mutant::None).unwrap();
        let w = initial_world(&c).apply_action(&start(1, 7, X)).unwrap();
        let delivers: Vec<_> = enumerate_actions(&w, Ballot(7), 0)
            .into_iter()
            .filter(|a| matches!(a, Action::Deliver { .. }))
            .collect();
        let expected: Vec<_> = c.acceptor_ids().map(|a| deliver(a, prepare(7, 1))).collect();
        assert_eq!(delivers, expected);
    }

    #[test]
    fn deliveries_dispatch_to_handlers() {
        let w = initial_world(&cfg(Variant::Cq)).apply_action(&start(1, 7, X)).unwrap();
        let e = AgentId::acceptor(2);
        let w = w.apply_action(&deliver(e, prepare(7, 1))).unwrap();
        let promise = Promise { ballot: Ballot(7), prior: None, acceptor: e };
        assert!(w.sent().contains(&Message::Promise(promise)));
        assert_eq!(w.log().last().unwrap().emitted, vec![Message::Promise(promise)]);
    }

    #[test]
    fn accept_reaches_learner_history() {
        let mut w = initial_world(&cfg(Variant::Cq)).apply_action(&start(1, 9, X)).unwrap();
        // drive ballot 9 to an accept by acceptor 0
        for acc in 0..2 {
            w = w.apply_action(&deliver(AgentId::acceptor(acc), prepare(9, 1))).unwrap();
        }
        for acc in 0..2 {
            let p = Promise { ballot: Ballot(9), prior: None, acceptor: AgentId::acceptor(acc) };
            w = w.apply_action(&deliver(AgentId::proposer(1), p)).unwrap();
        }
        let propose = *w.sent().iter().find(|m| matches!(m, Message::Propose(_))).unwrap();
        w = w.apply_action(&deliver(AgentId::acceptor(0), propose)).unwrap();
        let acc = Accept { ballot: Ballot(9), value: X, acceptor: AgentId::acceptor(0) };
        w = w.apply_action(&deliver(AgentId::learner(0), acc)).unwrap();
        assert!(w.learners()[0].history.contains(AgentId::acceptor(0), X, Ballot(9)));
    }

    #[test]
    fn crashed_agents_are_unreachable() {
        let w = initial_world(&cfg(Variant::Cq)).apply_action(&start(0, 0, X)).unwrap();
        let a = AgentId::acceptor(0);
        let w = w.apply_action(&Action::Crash { agent: a }).unwrap();
        assert_eq!(
            w.apply_action(&deliver(a, prepare(0, 0))).unwrap_err(),
            WorldError::Crashed(a)
        );
        assert!(!enumerate_actions(&w, Ballot(0), 1)
            .iter()
            .any(|act| matches!(act, Action::Deliver { recipient, .. } if *recipient == a)));
    }

    #[test]
    fn ineligible_actions_are_rejected() {
        let w = initial_world(&cfg(Variant::Cq));
        assert!(matches!(
            w.apply_action(&deliver(AgentId::acceptor(0), prepare(0, 0))),
            Err(WorldError::NotSent(_))
        ));
        assert!(matches!(w.apply_action(&start(0, 1, X)), Err(WorldError::NotOwner { .. })));
        let w = w.apply_action(&start(0, 0, X)).unwrap();
        assert!(matches!(
            w.apply_action(&deliver(AgentId::learner(0), prepare(0, 0))),
            Err(WorldError::WrongRecipient { .. })
        ));
        assert!(matches!(
            w.apply_action(&deliver(AgentId::acceptor(7), prepare(0, 0))),
            Err(WorldError::UnknownAgent(_))
        ));
    }

    #[test]
    fn quiescent_world_has_no_actions() {
        let c = Config::new(0, 1, 1, vec!["x".into()], Variant::Cq, Mutant::None).unwrap();
        let mut w = initial_world(&c);
        loop {
            let actions = enumerate_actions(&w, Ballot(0), 0);
            let Some(a) = actions.first() else { break };
            w = w.apply_action(a).unwrap();
        }
        assert_eq!(w.learned(), [(X, Ballot(0))].into());
        assert!(enumerate_actions(&w, Ballot(0), 0).is_empty());
    }

    #[test]
    fn fingerprint_ignores_path() {
        let c = cfg(Variant::Cq);
        let w = initial_world(&c).apply_action(&start(0, 0, X)).unwrap();
        let a = deliver(AgentId::acceptor(0), prepare(0, 0));
        let b = deliver(AgentId::acceptor(1), prepare(0, 0));
        let ab = w.apply_action(&a).unwrap().apply_action(&b).unwrap();
        let ba = w.apply_action(&b).unwrap().apply_action(&a).unwrap();
        assert_eq!(world_fingerprint(&ab), world_fingerprint(&ba));
        assert_ne!(ab.log(), ba.log());
    }

    #[test]
    fn fingerprint_sees_promises() {
        let c = cfg(Variant::Cq);
        let w = initial_world(&c).apply_action(&start(0, 0, X)).unwrap();
        let mut other = w.clone();
        other.acceptors[0].promised = Some(Ballot(0));
        assert_ne!(world_fingerprint(&w), world_fingerprint(&other));
    }

    #[test]
    fn apply_is_deterministic() {
        let w = initial_world(&cfg(Variant::CqCp));
        let a = start(1, 3, Y);
        assert_eq!(
            world_fingerprint(&w.apply_action(&a).unwrap()),
            world_fingerprint(&w.apply_action(&a).unwrap())
        );
    }

    fn promise(b: u32, a: u16) -> Promise {
        Promise { ballot: Ballot(b), prior: None, acceptor: AgentId::acceptor(a) }
    }

    #[test]
    fn symmetric_fingerprint_ignores_acceptor_names() {
        let c = cfg(Variant::Cq);
        let w = initial_world(&c).apply_action(&start(0, 0, X)).unwrap();
        let via = |a: u16| {
            w.apply_action(&deliver(AgentId::acceptor(a), prepare(0, 0)))
                .unwrap()
                .apply_action(&deliver(AgentId::proposer(0), promise(0, a)))
                .unwrap()
        };
        let (zero, two) = (via(0), via(2));
        assert_ne!(world_fingerprint(&zero), world_fingerprint(&two));
        assert_eq!(symmetric_fingerprint(&zero), symmetric_fingerprint(&two));

        // one acceptor promised versus one acceptor promised and delivered
        let undelivered = w.apply_action(&deliver(AgentId::acceptor(1), prepare(0, 0))).unwrap();
        assert_ne!(symmetric_fingerprint(&zero), symmetric_fingerprint(&undelivered));
    }

    #[test]
    fn symmetric_fingerprint_of_identity_order() {
        let w = initial_world(&cfg(Variant::Cq));
        assert_eq!(symmetric_fingerprint(&w), world_fingerprint(&w));
    }

    #[test]
    fn exploration_drops_spent_promises() {
        let c = Config::new(1, 2, 1, vec!["x".into()], Variant::Cq, Mutant::None).unwrap();
        let mut w = initial_world(&c).for_exploration().apply_action(&start(0, 0, X)).unwrap();
        for a in 0..3 {
            w = w.apply_action(&deliver(AgentId::acceptor(a), prepare(0, 0))).unwrap();
        }
        assert_eq!(w.sent().iter().filter(|m| matches!(m, Message::Promise(_))).count(), 3);
        assert!(w.delivered(AgentId::acceptor(0)).is_none());

        // a re-delivered prepare would change nothing, so it is not offered
        let again = deliver(AgentId::acceptor(0), prepare(0, 0));
        assert!(!enumerate_actions(&w, Ballot(1), 0).contains(&again));

        for a in 0..2 {
            w = w.apply_action(&deliver(AgentId::proposer(0), promise(0, a))).unwrap();
        }
        assert_eq!(w.proposers()[0].phase, Phase::Proposed);
        assert!(w.proposers()[0].promises.is_empty());
        assert!(!w.sent().iter().any(|m| matches!(m, Message::Promise(_))));
        assert!(w.sent().iter().any(|m| matches!(m, Message::Propose(_))));
    }

    #[test]
    fn full_mode_keeps_delivered_sets() {
        let w = initial_world(&cfg(Variant::Cq)).apply_action(&start(0, 0, X)).unwrap();
        let d = deliver(AgentId::acceptor(0), prepare(0, 0));
        let w = w.apply_action(&d).unwrap();
        assert!(!enumerate_actions(&w, Ballot(1), 0).contains(&d));
        assert!(w.delivered(AgentId::acceptor(0)).unwrap().contains(&Message::Prepare(prepare(0, 0))));
    }
}

//! Explicit-state safety checking.
//!
//! [`explore`] enumerates every world reachable within a [`Scope`] in
//! breadth-first order, deduplicating by fingerprint, and evaluates
//! [`check_state`] on each. Since the sent set only grows, checking the
//! lemmas as state predicates over all reachable states covers their
//! "forever after" readings. [`fuzz`] does seeded random walks over the
//! same action space for scopes too large to exhaust.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::{BuildHasherDefault, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::Criterion;
use crate::consecutive::{
    classic_chosen_ballots, cq_chosen_ballots, detect_classic, detect_cq, AcceptHistory,
};
use crate::learning::Closure;
use crate::types::{Accept, AgentId, Ballot, Config, Message, Role, Value};
use crate::world::{
    enumerate_actions, initial_world, symmetric_fingerprint, Action, TraceRecord, WorldError,
    WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    SafetyTheorem,
    ChosenInvariant,
    LearnedImpliesChosen,
    LemmaGreaterThan,
    LemmaLessThan,
    CorollaryNormalBeforeConsecutive,
    CorollaryConsecutiveSameValue,
    OneValuePerBallot,
}

impl ViolationKind {
    pub const ALL: [ViolationKind; 8] = [
        ViolationKind::SafetyTheorem,
        ViolationKind::ChosenInvariant,
        ViolationKind::LearnedImpliesChosen,
        ViolationKind::LemmaGreaterThan,
        ViolationKind::LemmaLessThan,
        ViolationKind::CorollaryNormalBeforeConsecutive,
        ViolationKind::CorollaryConsecutiveSameValue,
        ViolationKind::OneValuePerBallot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::SafetyTheorem => "safety_theorem",
            ViolationKind::ChosenInvariant => "chosen_invariant",
            ViolationKind::LearnedImpliesChosen => "learned_implies_chosen",
            ViolationKind::LemmaGreaterThan => "lemma_greater_than",
            ViolationKind::LemmaLessThan => "lemma_less_than",
            ViolationKind::CorollaryNormalBeforeConsecutive => "corollary_normal_before_consecutive",
            ViolationKind::CorollaryConsecutiveSameValue => "corollary_consecutive_same_value",
            ViolationKind::OneValuePerBallot => "one_value_per_ballot",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
    /// Path from the initial world to the violating state.
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreReport {
    pub states_visited: u64,
    pub actions_applied: u64,
    /// First (for [`explore`], shortest) violation found of each kind, in
    /// discovery order.
    pub violations: Vec<Violation>,
    /// The whole scope was covered without hitting a budget.
    pub exhausted: bool,
    pub max_depth: usize,
    /// States where a learner's history held a same-ballot majority but no
    /// consecutive quorum. Always zero unless detection is broken.
    pub subsumption_failures: u64,
}

impl ExploreReport {
    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn first(&self, kind: ViolationKind) -> Option<&Violation> {
        self.violations.iter().find(|v| v.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scope {
    pub max_ballot: Ballot,
    pub max_crashes: usize,
    /// Client values are drawn from the first `value_count` values.
    pub value_count: usize,
    pub state_budget: usize,
    pub depth_budget: usize,
}

impl Default for Scope {
    fn default() -> Self {
        Scope {
            max_ballot: Ballot(3),
            max_crashes: 0,
            value_count: 2,
            state_budget: 50_000_000,
            depth_budget: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("state and depth budgets must be positive")]
    ZeroBudget,
    #[error("max crashes {max_crashes} exceeds the fault bound f={f}")]
    TooManyCrashes { max_crashes: usize, f: u32 },
    #[error("value count {value_count} must be between 1 and {available}")]
    ValueCount { value_count: usize, available: usize },
    #[error("runs and steps per run must be positive")]
    EmptyFuzz,
}

impl Scope {
    pub fn validate(&self, cfg: &Config) -> Result<(), ScopeError> {
        if self.state_budget == 0 || self.depth_budget == 0 {
            return Err(ScopeError::ZeroBudget);
        }
        if self.max_crashes > cfg.f() as usize {
            return Err(ScopeError::TooManyCrashes { max_crashes: self.max_crashes, f: cfg.f() });
        }
        let available = cfg.value_names().len();
        if self.value_count == 0 || self.value_count > available {
            return Err(ScopeError::ValueCount { value_count: self.value_count, available });
        }
        Ok(())
    }

    /// Enabled actions of `w` within this scope, in canonical order.
    pub fn actions(&self, w: &WorldState) -> Vec<Action> {
        let mut actions = enumerate_actions(w, self.max_ballot, self.max_crashes);
        actions.retain(|a| match a {
            Action::StartBallot { client_value, .. } => (client_value.0 as usize) < self.value_count,
            _ => true,
        });
        actions
    }
}

fn sent_accepts(w: &WorldState) -> AcceptHistory {
    w.sent()
        .iter()
        .filter_map(|m| match m {
            Message::Accept(a) => Some((a.acceptor, a.value, a.ballot)),
            _ => None,
        })
        .collect()
}

/// Ground-truth chosen pairs, computed from every accept ever sent: under
/// the consecutive-quorum variants `(v, i)` is chosen when some consecutive
/// quorum for `v` includes an accept at `i`; under the classic variant
/// when f+1 acceptors accepted `v` at `i`.
pub fn chosen_pairs(w: &WorldState) -> BTreeSet<(Value, Ballot)> {
    let cfg = w.config();
    let history = sent_accepts(w);
    let mut out = BTreeSet::new();
    for v in history.values() {
        let ballots = if cfg.variant().learns_cq() {
            cq_chosen_ballots(&history, v, cfg)
        } else {
            classic_chosen_ballots(&history, v, cfg)
        };
        out.extend(ballots.into_iter().map(|b| (v, b)));
    }
    out
}

/// Evaluates every safety property on `w`. Returned violations carry an
/// empty trace; the explorer fills it in.
pub fn check_state(w: &WorldState) -> Vec<Violation> {
    check_state_with(w, &chosen_pairs(w))
}

fn check_state_with(w: &WorldState, chosen: &BTreeSet<(Value, Ballot)>) -> Vec<Violation> {
    let cfg = w.config();
    let name = |v: Value| cfg.value_name(v).to_string();
    let mut out = Vec::new();
    let mut flag = |kind: ViolationKind, detail: String| {
        out.push(Violation { kind, detail, trace: Vec::new() });
    };

    let learned = w.learned();
    let learned_values: BTreeSet<Value> = learned.iter().map(|(v, _)| *v).collect();
    if learned_values.len() > 1 {
        let names: Vec<String> = learned_values.iter().map(|v| name(*v)).collect();
        flag(ViolationKind::SafetyTheorem, format!("learned distinct values {}", names.join(", ")));
    }

    let chosen_values: BTreeSet<Value> = chosen.iter().map(|(v, _)| *v).collect();
    if chosen_values.len() > 1 {
        let names: Vec<String> = chosen_values.iter().map(|v| name(*v)).collect();
        flag(ViolationKind::ChosenInvariant, format!("chosen distinct values {}", names.join(", ")));
    }

    if let Some((v, b)) = learned.iter().find(|p| !chosen.contains(p)) {
        flag(
            ViolationKind::LearnedImpliesChosen,
            format!("learned {} at ballot {b} but it is not chosen there", name(*v)),
        );
    }

    let proposes: Vec<(Ballot, Value)> = w
        .sent()
        .iter()
        .filter_map(|m| match m {
            Message::Propose(p) => Some((p.ballot, p.value)),
            _ => None,
        })
        .collect();
    let greater = chosen.iter().find_map(|(v, i)| {
        proposes.iter().find(|(j, w)| j > i && w != v).map(|(j, w)| (*v, *i, *w, *j))
    });
    if let Some((v, i, other, j)) = greater {
        flag(
            ViolationKind::LemmaGreaterThan,
            format!("{} chosen at {i} but {} proposed at {j}", name(v), name(other)),
        );
    }

    let less = w.sent().iter().find_map(|m| match m {
        Message::Accept(a) => chosen
            .iter()
            .find(|(other, j)| *j < a.ballot && *other != a.value)
            .map(|(other, j)| (a.value, a.ballot, *other, *j)),
        _ => None,
    });
    if let Some((v, i, other, j)) = less {
        flag(
            ViolationKind::LemmaLessThan,
            format!("{} accepted at {i} but {} chosen at lower ballot {j}", name(v), name(other)),
        );
    }

    let records: BTreeMap<Ballot, (Value, Criterion)> = w
        .proposers()
        .iter()
        .flat_map(|p| p.proposed.iter().map(|(b, r)| (*b, (r.value, r.criterion))))
        .collect();
    let normal_below = |c: Ballot| {
        records.range(..c).rev().find(|(_, (_, crit))| *crit == Criterion::Normal).map(|(b, (v, _))| (*b, *v))
    };
    let consecutive = records.iter().filter(|(_, (_, crit))| crit.is_consecutive());
    let mut orphan = None;
    let mut drifted = None;
    for (c, (value, _)) in consecutive {
        match normal_below(*c) {
            None => {
                orphan.get_or_insert(*c);
            }
            Some((n, nv)) if nv != *value => {
                drifted.get_or_insert((*c, *value, n, nv));
            }
            Some(_) => {}
        }
    }
    if let Some(c) = orphan {
        flag(
            ViolationKind::CorollaryNormalBeforeConsecutive,
            format!("consecutive proposal at {c} has no earlier normal proposal"),
        );
    }
    if let Some((c, v, n, nv)) = drifted {
        flag(
            ViolationKind::CorollaryConsecutiveSameValue,
            format!(
                "consecutive proposal of {} at {c} differs from normal proposal of {} at {n}",
                name(v),
                name(nv)
            ),
        );
    }

    let mut per_ballot: BTreeMap<Ballot, BTreeSet<Value>> = BTreeMap::new();
    for (b, v) in &proposes {
        per_ballot.entry(*b).or_default().insert(*v);
    }
    if let Some((b, vs)) = per_ballot.iter().find(|(_, vs)| vs.len() > 1) {
        let names: Vec<String> = vs.iter().map(|v| name(*v)).collect();
        flag(ViolationKind::OneValuePerBallot, format!("ballot {b} proposed {}", names.join(", ")));
    }

    out
}

/// Whether every same-ballot majority in a learner's history is also a
/// consecutive quorum.
pub fn subsumption_holds(w: &WorldState) -> bool {
    let cfg = w.config();
    w.learners().iter().all(|l| {
        l.history.values().into_iter().all(|v| {
            detect_classic(&l.history, v, cfg).is_none() || detect_cq(&l.history, v, cfg).is_some()
        })
    })
}

#[derive(Default)]
struct PassThrough(u64);

impl Hasher for PassThrough {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.0 ^= u64::from_le_bytes(buf);
        }
    }

    fn write_u128(&mut self, n: u128) {
        self.0 = n as u64;
    }
}

type Seen = HashSet<u128, BuildHasherDefault<PassThrough>>;

fn digest128(w: &WorldState) -> u128 {
    let d = Sha256::digest(symmetric_fingerprint(w));
    u128::from_le_bytes(d[..16].try_into().expect("digest is 32 bytes"))
}

const NO_PARENT: u32 = u32::MAX;

struct Node {
    parent: u32,
    action: u32,
}

const CHUNK: usize = 4096;

/// Actions the explorer follows: everything except deliveries to learners,
/// whose effect is accounted for by [`learner_violations`].
fn explore_actions(scope: &Scope, w: &WorldState) -> Vec<Action> {
    let mut actions = scope.actions(w);
    actions.retain(|a| !matches!(a, Action::Deliver { recipient, .. } if recipient.role == Role::Learner));
    actions
}

/// A violation some learner could exhibit from `w`, with the learner
/// deliveries that exhibit it.
struct LearnerViolation {
    violation: Violation,
    deliveries: Vec<Action>,
}

/// Learner-side checks over every way learners could have received the
/// accepts sent in `w`: two values learnable at once, or a value learnable
/// with a ballot tag that is not chosen. Also reports whether subsumption
/// held on every subset.
fn learner_violations(
    w: &WorldState,
    chosen: &BTreeSet<(Value, Ballot)>,
    closure: &Closure,
) -> (Vec<LearnerViolation>, bool) {
    let cfg = w.config();
    let name = |v: Value| cfg.value_name(v).to_string();
    let learner = AgentId::learner(0);
    let mut per_value: BTreeMap<Value, Vec<Accept>> = BTreeMap::new();
    for m in w.sent() {
        if let Message::Accept(a) = m {
            per_value.entry(a.value).or_default().push(*a);
        }
    }
    let deliver = |a: &Accept| Action::Deliver { recipient: learner, message: Message::Accept(*a) };

    let mut out = Vec::new();
    let mut subsumed = true;
    let mut learnable = Vec::new();
    let mut untagged = None;
    for (v, accepts) in &per_value {
        let key: Vec<(AgentId, Ballot)> = accepts.iter().map(|a| (a.acceptor, a.ballot)).collect();
        let outcome = closure.outcome(&key);
        subsumed &= outcome.subsumed;
        if outcome.learnable {
            learnable.push((*v, accepts));
        }
        if untagged.is_none() {
            if let Some((b, order)) = outcome.first.iter().find(|(b, _)| !chosen.contains(&(*v, **b))) {
                untagged = Some((*v, *b, order.iter().map(|&i| deliver(&accepts[i])).collect::<Vec<_>>()));
            }
        }
    }
    if learnable.len() > 1 {
        let names: Vec<String> = learnable.iter().map(|(v, _)| name(*v)).collect();
        out.push(LearnerViolation {
            violation: Violation {
                kind: ViolationKind::SafetyTheorem,
                detail: format!("learned distinct values {}", names.join(", ")),
                trace: Vec::new(),
            },
            deliveries: learnable.iter().flat_map(|(_, accepts)| accepts.iter().map(deliver)).collect(),
        });
    }
    if let Some((v, b, deliveries)) = untagged {
        out.push(LearnerViolation {
            violation: Violation {
                kind: ViolationKind::LearnedImpliesChosen,
                detail: format!("learned {} at ballot {b} but it is not chosen there", name(v)),
                trace: Vec::new(),
            },
            deliveries,
        });
    }
    (out, subsumed)
}

/// Breadth-first exhaustive exploration.
///
/// The explored world is the reduced form described at
/// [`WorldState::for_exploration`], deduplicated up to renaming of
/// acceptors on a 128-bit prefix of the SHA-256 of
/// [`symmetric_fingerprint`]. Learners are not stepped; instead every
/// state is checked against everything a learner could learn from its
/// sent accepts, which covers all learner interleavings. Exploration
/// continues past violating states so that each kind gets its own
/// counterexample, found at the shallowest level where it occurs. Work
/// within a level is spread over threads in fixed-size chunks and merged
/// in order, so the report does not depend on scheduling.
pub fn explore(cfg: &Config, scope: &Scope) -> Result<ExploreReport, ScopeError> {
    scope.validate(cfg)?;
    let root = initial_world(cfg).without_log().for_exploration();
    let closure = Closure::new(cfg);

    let mut seen = Seen::default();
    seen.insert(digest128(&root));
    let mut nodes = vec![Node { parent: NO_PARENT, action: 0 }];
    let mut frontier: Vec<(u32, WorldState)> = vec![(0, root)];

    let mut report = ExploreReport {
        states_visited: 0,
        actions_applied: 0,
        violations: Vec::new(),
        exhausted: true,
        max_depth: 0,
        subsumption_failures: 0,
    };
    let mut found: BTreeMap<ViolationKind, (u32, String, Vec<Action>)> = BTreeMap::new();
    let mut order: Vec<ViolationKind> = Vec::new();
    let mut depth = 0usize;

    while !frontier.is_empty() {
        report.max_depth = depth;
        let expand = depth < scope.depth_budget;
        let mut next: Vec<(u32, WorldState)> = Vec::new();
        let mut budget_hit = false;

        let mut level = std::mem::take(&mut frontier).into_iter();
        loop {
            let chunk: Vec<(u32, WorldState)> = level.by_ref().take(CHUNK).collect();
            if chunk.is_empty() {
                break;
            }
            let results: Vec<_> = chunk
                .par_iter()
                .map(|(_, w)| {
                    let chosen = chosen_pairs(w);
                    let mut violations: Vec<(Violation, Vec<Action>)> =
                        check_state_with(w, &chosen).into_iter().map(|v| (v, Vec::new())).collect();
                    let (learners, subsumed) = learner_violations(w, &chosen, &closure);
                    violations.extend(learners.into_iter().map(|l| (l.violation, l.deliveries)));
                    let actions = explore_actions(scope, w);
                    let successors: Vec<(u128, WorldState)> = if expand {
                        actions
                            .iter()
                            .map(|a| {
                                let s = w.apply_action(a).expect("enumerated actions are enabled");
                                (digest128(&s), s)
                            })
                            .collect()
                    } else {
                        Vec::new()
                    };
                    (violations, subsumed, actions.len(), successors)
                })
                .collect();

            for ((id, _), (violations, subsumed, enabled, successors)) in chunk.iter().zip(results) {
                report.states_visited += 1;
                if !subsumed {
                    report.subsumption_failures += 1;
                }
                for (v, suffix) in violations {
                    if let Entry::Vacant(slot) = found.entry(v.kind) {
                        order.push(v.kind);
                        slot.insert((*id, v.detail, suffix));
                    }
                }
                if !expand && enabled > 0 {
                    report.exhausted = false;
                }
                for (idx, (digest, s)) in successors.into_iter().enumerate() {
                    report.actions_applied += 1;
                    if budget_hit || seen.contains(&digest) {
                        continue;
                    }
                    if seen.len() >= scope.state_budget {
                        budget_hit = true;
                        report.exhausted = false;
                        continue;
                    }
                    seen.insert(digest);
                    let node = nodes.len() as u32;
                    nodes.push(Node { parent: *id, action: idx as u32 });
                    next.push((node, s));
                }
            }
        }
        if budget_hit {
            // the remaining frontier is dropped; what was dequeued was checked
            next.clear();
        }
        frontier = next;
        depth += 1;
    }

    for kind in order {
        let (node, detail, suffix) = found.remove(&kind).expect("recorded above");
        let trace = rebuild_trace(cfg, scope, &nodes, node, &suffix);
        report.violations.push(Violation { kind, detail, trace });
    }
    Ok(report)
}

fn rebuild_trace(cfg: &Config, scope: &Scope, nodes: &[Node], mut node: u32, suffix: &[Action]) -> Vec<TraceRecord> {
    let mut path = Vec::new();
    while nodes[node as usize].parent != NO_PARENT {
        path.push(nodes[node as usize].action as usize);
        node = nodes[node as usize].parent;
    }
    path.reverse();
    let mut w = initial_world(cfg).for_exploration();
    for idx in path {
        let action = explore_actions(scope, &w)[idx];
        w = w.apply_action(&action).expect("recorded path is replayable");
    }
    for action in suffix {
        w = w.apply_action(action).expect("learner deliveries are enabled");
    }
    w.log().to_vec()
}

/// Seeded random walks. Run `r` draws from a ChaCha8 stream selected by
/// `(seed, r)`, so any run can be reproduced on its own.
pub fn fuzz(
    cfg: &Config,
    scope: &Scope,
    seed: u64,
    runs: usize,
    steps_per_run: usize,
) -> Result<ExploreReport, ScopeError> {
    if runs == 0 || steps_per_run == 0 {
        return Err(ScopeError::EmptyFuzz);
    }
    scope.validate(cfg)?;
    let mut report = ExploreReport {
        states_visited: 0,
        actions_applied: 0,
        violations: Vec::new(),
        exhausted: true,
        max_depth: 0,
        subsumption_failures: 0,
    };
    let record = |report: &mut ExploreReport, w: &WorldState| {
        report.states_visited += 1;
        if !subsumption_holds(w) {
            report.subsumption_failures += 1;
        }
        for v in check_state(w) {
            if !report.has(v.kind) {
                report.violations.push(Violation { trace: w.log().to_vec(), ..v });
            }
        }
    };
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64);
        let mut w = initial_world(cfg);
        record(&mut report, &w);
        for step in 0..steps_per_run {
            let actions = scope.actions(&w);
            if actions.is_empty() {
                break;
            }
            let pick = actions[rng.gen_range(0..actions.len())];
            w = w.apply_action(&pick).expect("enumerated actions are enabled");
            report.actions_applied += 1;
            report.max_depth = report.max_depth.max(step + 1);
            record(&mut report, &w);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step}: {source}")]
    Ineligible { step: u64, source: WorldError },
    #[error("step {step}: emitted {actual:?}, trace recorded {expected:?}")]
    Diverged { step: u64, expected: Vec<Message>, actual: Vec<Message> },
}

/// Re-applies a recorded trace from the initial world, checking that every
/// step emits what the trace says it did.
pub fn replay(trace: &[TraceRecord], cfg: &Config) -> Result<WorldState, ReplayError> {
    let mut w = initial_world(cfg);
    for rec in trace {
        w = w
            .apply_action(&rec.action)
            .map_err(|source| ReplayError::Ineligible { step: rec.step, source })?;
        let actual = &w.log().last().expect("recording is on").emitted;
        if *actual != rec.emitted {
            return Err(ReplayError::Diverged {
                step: rec.step,
                expected: rec.emitted.clone(),
                actual: actual.clone(),
            });
        }
    }
    Ok(w)
}

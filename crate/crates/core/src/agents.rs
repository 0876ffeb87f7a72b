//! Proposer, acceptor and learner transition functions.
//!
//! Every handler takes the current state by reference and returns the next
//! state plus whatever it emits; nothing is mutated in place.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::consecutive::{detect_classic, detect_cq, AcceptHistory};
use crate::types::{
    quorum_size, Accept, AgentId, Ballot, Config, Mutant, Prepare, Promise, Proposal, Propose,
    Value,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("ballot {0} was already used by this proposer")]
    BallotReused(Ballot),
    #[error("ballot {ballot} does not exceed current ballot {current}")]
    BallotNotIncreasing { ballot: Ballot, current: Ballot },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AcceptorState {
    pub id: AgentId,
    pub promised: Option<Ballot>,
    pub accepted: Option<Proposal>,
    pub accepted_history: BTreeSet<Proposal>,
    pub emitted_accept_ballots: BTreeSet<Ballot>,
}

impl AcceptorState {
    pub fn new(id: AgentId) -> Self {
        AcceptorState {
            id,
            promised: None,
            accepted: None,
            accepted_history: BTreeSet::new(),
            emitted_accept_ballots: BTreeSet::new(),
        }
    }

    fn admits(&self, ballot: Ballot) -> bool {
        self.promised.map_or(true, |p| ballot >= p)
    }

    /// Phase 1b. An acceptor that already accepted at `m.ballot` stays
    /// silent, so a promise's prior is always from a strictly lower ballot.
    pub fn on_prepare(&self, m: &Prepare) -> (AcceptorState, Option<Promise>) {
        let accepted_below = self.accepted.map_or(true, |a| a.ballot < m.ballot);
        if !self.admits(m.ballot) || !accepted_below {
            return (self.clone(), None);
        }
        let mut next = self.clone();
        next.promised = Some(m.ballot);
        let promise = Promise { ballot: m.ballot, prior: self.accepted, acceptor: self.id };
        (next, Some(promise))
    }

    /// Phase 2b. At most one accept per ballot.
    pub fn on_propose(&self, m: &Propose) -> (AcceptorState, Option<Accept>) {
        if !self.admits(m.ballot) || self.emitted_accept_ballots.contains(&m.ballot) {
            return (self.clone(), None);
        }
        let proposal = Proposal::new(m.ballot, m.value);
        let mut next = self.clone();
        next.promised = Some(m.ballot);
        next.accepted = Some(proposal);
        next.accepted_history.insert(proposal);
        next.emitted_accept_ballots.insert(m.ballot);
        (next, Some(Accept { ballot: m.ballot, value: m.value, acceptor: self.id }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Idle,
    Preparing,
    Proposed,
}

/// Why a proposer issued a proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    /// A full quorum of promises.
    Normal,
    /// A promise whose prior is from the immediately preceding ballot.
    ConsecutivePromise,
    /// An accept observed at the immediately preceding ballot; no Phase 1.
    ConsecutiveAccept,
}

impl Criterion {
    pub fn is_consecutive(self) -> bool {
        !matches!(self, Criterion::Normal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Normal => "normal",
            Criterion::ConsecutivePromise => "consecutive-promise",
            Criterion::ConsecutiveAccept => "consecutive-accept",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProposalRecord {
    pub value: Value,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProposerState {
    pub id: AgentId,
    pub current_ballot: Option<Ballot>,
    pub client_value: Option<Value>,
    /// Promises for `current_ballot`, by acceptor.
    pub promises: BTreeMap<AgentId, Option<Proposal>>,
    /// Ballots this proposer has started or taken over.
    pub used: BTreeSet<Ballot>,
    /// Proposals issued, at most one per ballot.
    pub proposed: BTreeMap<Ballot, ProposalRecord>,
    pub phase: Phase,
}

impl ProposerState {
    pub fn new(id: AgentId) -> Self {
        ProposerState {
            id,
            current_ballot: None,
            client_value: None,
            promises: BTreeMap::new(),
            used: BTreeSet::new(),
            proposed: BTreeMap::new(),
            phase: Phase::Idle,
        }
    }

    pub fn proposed_ballots(&self) -> impl Iterator<Item = Ballot> + '_ {
        self.proposed.keys().copied()
    }

    /// Phase 1a.
    pub fn start(&self, ballot: Ballot, client_value: Value) -> Result<(ProposerState, Prepare), AgentError> {
        if self.used.contains(&ballot) {
            return Err(AgentError::BallotReused(ballot));
        }
        if let Some(current) = self.current_ballot {
            if ballot <= current {
                return Err(AgentError::BallotNotIncreasing { ballot, current });
            }
        }
        let mut next = self.clone();
        next.current_ballot = Some(ballot);
        next.client_value = Some(client_value);
        next.promises.clear();
        next.used.insert(ballot);
        next.phase = Phase::Preparing;
        Ok((next, Prepare { ballot, proposer: self.id }))
    }

    /// Phase 2a, fired by either a full quorum of promises or, in the
    /// consecutive-proposal variant, a promise carrying the previous
    /// ballot's proposal. When both hold the proposal counts as normal.
    pub fn on_promise(&self, m: &Promise, cfg: &Config) -> (ProposerState, Option<Propose>) {
        let Some(ballot) = self.current_ballot else {
            return (self.clone(), None);
        };
        if self.phase != Phase::Preparing || m.ballot != ballot || self.proposed.contains_key(&ballot) {
            return (self.clone(), None);
        }
        let mut next = self.clone();
        next.promises.insert(m.acceptor, m.prior);
        let client = self.client_value.expect("a preparing proposer holds a client value");

        let fired = if next.promises.len() >= quorum_size(cfg) {
            let value = highest_prior(&next.promises).map_or(client, |p| p.value);
            Some((value, Criterion::Normal))
        } else if cfg.variant().consecutive_proposals() {
            m.prior.filter(|p| p.ballot.next() == ballot).map(|p| {
                let value = match cfg.mutant() {
                    Mutant::M2UnconstrainedConsecutive => client,
                    _ => p.value,
                };
                (value, Criterion::ConsecutivePromise)
            })
        } else {
            None
        };

        match fired {
            Some((value, criterion)) => {
                next.phase = Phase::Proposed;
                next.proposed.insert(ballot, ProposalRecord { value, criterion });
                (next, Some(Propose { ballot, value, proposer: self.id }))
            }
            None => (next, None),
        }
    }

    /// Phase 1 bypass: an accept at ballot `i` lets the proposer that may
    /// take ballot `i+1` propose the same value there directly.
    ///
    /// `may_take` says whether this proposer owns (or is scripted to take)
    /// ballot `i+1`. Variants without consecutive proposals ignore accepts.
    pub fn on_accept(&self, m: &Accept, cfg: &Config, may_take: bool) -> (ProposerState, Option<Propose>) {
        if !cfg.variant().consecutive_proposals() || !may_take {
            return (self.clone(), None);
        }
        let target = m.ballot.next();
        if self.proposed.contains_key(&target) {
            return (self.clone(), None);
        }
        let resumes_current = self.current_ballot == Some(target) && self.phase == Phase::Preparing;
        let takes_new =
            !self.used.contains(&target) && self.current_ballot.map_or(true, |c| target > c);
        if !resumes_current && !takes_new {
            return (self.clone(), None);
        }
        let value = match cfg.mutant() {
            Mutant::M2UnconstrainedConsecutive => self.client_value.unwrap_or(m.value),
            _ => m.value,
        };
        let mut next = self.clone();
        if takes_new {
            next.current_ballot = Some(target);
            next.used.insert(target);
            next.promises.clear();
        }
        next.phase = Phase::Proposed;
        next.proposed.insert(target, ProposalRecord { value, criterion: Criterion::ConsecutiveAccept });
        (next, Some(Propose { ballot: target, value, proposer: self.id }))
    }
}

/// The prior with the highest ballot; ties broken by value for determinism.
pub fn highest_prior(promises: &BTreeMap<AgentId, Option<Proposal>>) -> Option<Proposal> {
    promises.values().flatten().copied().max()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LearnerState {
    pub id: AgentId,
    pub history: AcceptHistory,
    /// Each value is learned once, tagged with the ballot that justified it.
    pub learned: BTreeSet<(Value, Ballot)>,
}

impl LearnerState {
    pub fn new(id: AgentId) -> Self {
        LearnerState { id, history: AcceptHistory::new(), learned: BTreeSet::new() }
    }

    pub fn has_learned(&self, v: Value) -> bool {
        self.learned.iter().any(|(w, _)| *w == v)
    }

    pub fn learned_values(&self) -> BTreeSet<Value> {
        self.learned.iter().map(|(v, _)| *v).collect()
    }

    /// Phase 2c. Returns the newly learned pairs.
    pub fn on_accept(&self, m: &Accept, cfg: &Config) -> (LearnerState, BTreeSet<(Value, Ballot)>) {
        let mut next = self.clone();
        next.history.insert(m.acceptor, m.value, m.ballot);
        let mut fresh = BTreeSet::new();
        if next.has_learned(m.value) {
            return (next, fresh);
        }
        if let Some(ballot) = learn_ballot(&next.history, m.value, cfg) {
            next.learned.insert((m.value, ballot));
            fresh.insert((m.value, ballot));
        }
        (next, fresh)
    }
}

/// The ballot at which `v` counts as learned from `history`, per the
/// configured variant and mutant.
pub fn learn_ballot(history: &AcceptHistory, v: Value, cfg: &Config) -> Option<Ballot> {
    if cfg.mutant() == Mutant::M1AnyBallotMajority {
        let per_acceptor = history.for_value(v);
        if per_acceptor.len() >= quorum_size(cfg) {
            return per_acceptor.values().filter_map(|s| s.last().copied()).max();
        }
        return None;
    }
    if cfg.variant().learns_cq() {
        detect_cq(history, v, cfg).map(|w| w.hi)
    } else {
        detect_classic(history, v, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Variant;

    const X: Value = Value(0);
    const Y: Value = Value(1);

    fn cfg(f: u32, variant: Variant, mutant: Mutant) -> Config {
        Config::new(f, 2, 1, vec!["x".into(), "y".into()], variant, mutant).unwrap()
    }

    fn acceptor(promised: Option<u32>, accepted: Option<(u32, Value)>) -> AcceptorState {
        let mut st = AcceptorState::new(AgentId::acceptor(0));
        st.promised = promised.map(Ballot);
        st.accepted = accepted.map(|(b, v)| Proposal::new(Ballot(b), v));
        st
    }

    fn prepare(b: u32) -> Prepare {
        Prepare { ballot: Ballot(b), proposer: AgentId::proposer(0) }
    }

    fn propose(b: u32, v: Value) -> Propose {
        Propose { ballot: Ballot(b), value: v, proposer: AgentId::proposer(0) }
    }

    fn promise(b: u32, from: u16, prior: Option<(u32, Value)>) -> Promise {
        Promise {
            ballot: Ballot(b),
            prior: prior.map(|(pb, v)| Proposal::new(Ballot(pb), v)),
            acceptor: AgentId::acceptor(from),
        }
    }

    fn accept(b: u32, v: Value, from: u16) -> Accept {
        Accept { ballot: Ballot(b), value: v, acceptor: AgentId::acceptor(from) }
    }

    #[test]
    fn prepare_rules() {
        let st = acceptor(Some(5), Some((3, X)));
        let (next, out) = st.on_prepare(&prepare(7));
        assert_eq!(next.promised, Some(Ballot(7)));
        assert_eq!(out, Some(promise(7, 0, Some((3, X)))));

        let st = acceptor(Some(5), None);
        let (next, out) = st.on_prepare(&prepare(4));
        assert_eq!(next, st);
        assert_eq!(out, None);

        let st = AcceptorState::new(AgentId::acceptor(0));
        let (next, out) = st.on_prepare(&prepare(0));
        assert_eq!(next.promised, Some(Ballot(0)));
        assert_eq!(out, Some(promise(0, 0, None)));
    }

    #[test]
    fn prepare_is_idempotent() {
        let st = acceptor(Some(5), Some((3, X)));
        let (once, out1) = st.on_prepare(&prepare(7));
        let (twice, out2) = once.on_prepare(&prepare(7));
        assert_eq!(once, twice);
        assert_eq!(out1, out2);
    }

    #[test]
    fn no_promise_after_accepting_at_that_ballot() {
        let st = AcceptorState::new(AgentId::acceptor(0));
        let (st, _) = st.on_propose(&propose(4, X));
        let (next, out) = st.on_prepare(&prepare(4));
        assert_eq!(out, None);
        assert_eq!(next, st);
    }

    #[test]
    fn propose_rules() {
        let st = acceptor(Some(7), None);
        let (next, out) = st.on_propose(&propose(7, X));
        assert_eq!(next.accepted, Some(Proposal::new(Ballot(7), X)));
        assert_eq!(out, Some(accept(7, X, 0)));

        let (dup, again) = next.on_propose(&propose(7, X));
        assert_eq!(again, None);
        assert_eq!(dup, next);

        let (higher, out) = next.on_propose(&propose(9, Y));
        assert_eq!(higher.promised, Some(Ballot(9)));
        assert_eq!(higher.accepted, Some(Proposal::new(Ballot(9), Y)));
        assert_eq!(out, Some(accept(9, Y, 0)));
        assert_eq!(higher.accepted_history.len(), 2);

        let (stale, out) = higher.on_propose(&propose(8, X));
        assert_eq!(out, None);
        assert_eq!(stale, higher);
    }

    #[test]
    fn start_rules() {
        let p = ProposerState::new(AgentId::proposer(1));
        let (p, prep) = p.start(Ballot(7), X).unwrap();
        assert_eq!(prep, Prepare { ballot: Ballot(7), proposer: AgentId::proposer(1) });
        assert_eq!(p.phase, Phase::Preparing);

        let (p9, prep) = p.start(Ballot(9), Y).unwrap();
        assert_eq!(prep.ballot, Ballot(9));
        assert_eq!(p9.current_ballot, Some(Ballot(9)));
        assert_eq!(p9.client_value, Some(Y));

        assert_eq!(p.start(Ballot(7), X), Err(AgentError::BallotReused(Ballot(7))));
        assert_eq!(
            p9.start(Ballot(8), X),
            Err(AgentError::BallotNotIncreasing { ballot: Ballot(8), current: Ballot(9) })
        );
    }

    fn preparing(b: u32, client: Value) -> ProposerState {
        ProposerState::new(AgentId::proposer(0)).start(Ballot(b), client).unwrap().0
    }

    #[test]
    fn normal_proposal_takes_highest_prior() {
        let c = cfg(2, Variant::Classic, Mutant::None);
        let p = preparing(11, X);
        let (p, out) = p.on_promise(&promise(11, 0, None), &c);
        assert_eq!(out, None);
        let (p, out) = p.on_promise(&promise(11, 1, Some((8, Y))), &c);
        assert_eq!(out, None);
        let (p, out) = p.on_promise(&promise(11, 4, Some((7, X))), &c);
        assert_eq!(out, Some(propose(11, Y)));
        assert_eq!(p.proposed[&Ballot(11)].criterion, Criterion::Normal);
        // further promises are ignored
        let (after, out) = p.on_promise(&promise(11, 2, Some((10, X))), &c);
        assert_eq!(out, None);
        assert_eq!(after, p);
    }

    #[test]
    fn normal_proposal_free_choice() {
        let c = cfg(1, Variant::Cq, Mutant::None);
        let p = preparing(0, X);
        let (p, _) = p.on_promise(&promise(0, 0, None), &c);
        let (_, out) = p.on_promise(&promise(0, 1, None), &c);
        assert_eq!(out, Some(propose(0, X)));
    }

    #[test]
    fn consecutive_promise() {
        let c = cfg(2, Variant::CqCp, Mutant::None);
        let (p, out) = preparing(11, Y).on_promise(&promise(11, 2, Some((10, X))), &c);
        assert_eq!(out, Some(propose(11, X)));
        assert_eq!(p.proposed[&Ballot(11)].criterion, Criterion::ConsecutivePromise);

        let (_, out) = preparing(11, Y).on_promise(&promise(11, 2, Some((9, X))), &c);
        assert_eq!(out, None);

        // classic proposers wait for the quorum
        let classic = cfg(2, Variant::Cq, Mutant::None);
        let (_, out) = preparing(11, Y).on_promise(&promise(11, 2, Some((10, X))), &classic);
        assert_eq!(out, None);

        let m2 = cfg(2, Variant::CqCp, Mutant::M2UnconstrainedConsecutive);
        let (_, out) = preparing(11, Y).on_promise(&promise(11, 2, Some((10, X))), &m2);
        assert_eq!(out, Some(propose(11, Y)));
    }

    #[test]
    fn stale_promises_are_ignored() {
        let c = cfg(1, Variant::CqCp, Mutant::None);
        let p = preparing(5, X);
        let (next, out) = p.on_promise(&promise(4, 0, Some((3, Y))), &c);
        assert_eq!((next, out), (p.clone(), None));
        let idle = ProposerState::new(AgentId::proposer(0));
        let (next, out) = idle.on_promise(&promise(4, 0, None), &c);
        assert_eq!((next, out), (idle, None));
    }

    #[test]
    fn phase1_bypass() {
        let c = cfg(2, Variant::CqCp, Mutant::None);
        let idle = ProposerState::new(AgentId::proposer(1));
        let (p, out) = idle.on_accept(&accept(10, X, 0), &c, true);
        assert_eq!(out, Some(Propose { ballot: Ballot(11), value: X, proposer: AgentId::proposer(1) }));
        assert_eq!(p.phase, Phase::Proposed);
        assert_eq!(p.proposed[&Ballot(11)].criterion, Criterion::ConsecutiveAccept);
        // once per ballot
        let (again, out) = p.on_accept(&accept(10, X, 1), &c, true);
        assert_eq!((again, out), (p, None));

        let classic = cfg(2, Variant::Classic, Mutant::None);
        let (same, out) = idle.on_accept(&accept(10, X, 0), &classic, true);
        assert_eq!((same, out), (idle.clone(), None));

        let (same, out) = idle.on_accept(&accept(9, X, 0), &c, false);
        assert_eq!((same, out), (idle, None));
    }

    #[test]
    fn bypass_completes_a_pending_prepare() {
        let c = cfg(1, Variant::CqCp, Mutant::None);
        let p = preparing(3, Y);
        let (p, out) = p.on_accept(&accept(2, X, 0), &c, true);
        assert_eq!(out.map(|m| (m.ballot, m.value)), Some((Ballot(3), X)));
        assert_eq!(p.phase, Phase::Proposed);
        // a lower target never rewinds the proposer
        let p = preparing(5, Y);
        let (same, out) = p.on_accept(&accept(2, X, 0), &c, true);
        assert_eq!((same, out), (p, None));
    }

    #[test]
    fn learner_table3_cq_and_classic() {
        let deliveries = [accept(10, X, 2), accept(9, X, 3), accept(9, X, 4)];
        let cq = cfg(2, Variant::Cq, Mutant::None);
        let mut l = LearnerState::new(AgentId::learner(0));
        let mut news = Vec::new();
        for m in &deliveries {
            let (next, fresh) = l.on_accept(m, &cq);
            news.push(fresh);
            l = next;
        }
        assert!(news[0].is_empty() && news[1].is_empty());
        assert_eq!(news[2], [(X, Ballot(10))].into());
        assert_eq!(l.learned, [(X, Ballot(10))].into());

        let classic = cfg(2, Variant::Classic, Mutant::None);
        let mut l = LearnerState::new(AgentId::learner(0));
        for m in &deliveries {
            l = l.on_accept(m, &classic).0;
        }
        assert!(l.learned.is_empty());
    }

    #[test]
    fn learner_table1() {
        let cq = cfg(2, Variant::Cq, Mutant::None);
        let mut l = LearnerState::new(AgentId::learner(0));
        for m in [accept(10, X, 2), accept(9, X, 3), accept(7, X, 4)] {
            l = l.on_accept(&m, &cq).0;
        }
        assert!(l.learned.is_empty());

        let m1 = cfg(2, Variant::Cq, Mutant::M1AnyBallotMajority);
        let mut l = LearnerState::new(AgentId::learner(0));
        for m in [accept(10, X, 2), accept(9, X, 3), accept(7, X, 4)] {
            l = l.on_accept(&m, &m1).0;
        }
        assert_eq!(l.learned, [(X, Ballot(10))].into());
    }

    #[test]
    fn learner_is_idempotent() {
        let cq = cfg(1, Variant::Cq, Mutant::None);
        let l = LearnerState::new(AgentId::learner(0));
        let (l, _) = l.on_accept(&accept(1, X, 0), &cq);
        let (l, fresh) = l.on_accept(&accept(1, X, 1), &cq);
        assert_eq!(fresh.len(), 1);
        let (again, fresh) = l.on_accept(&accept(1, X, 1), &cq);
        assert_eq!(again, l);
        assert!(fresh.is_empty());
    }
}

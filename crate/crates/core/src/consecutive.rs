//! Ballot arithmetic and quorum detection over accept histories.
//!
//! A *consecutive quorum* for value `v` is a set of at least f+1 acceptors
//! that can each contribute one of their accepts for `v` such that the
//! contributed ballots form an unbroken run of integers. Detection reduces
//! to picking an interval `[lo, hi]` and asking whether every ballot in it
//! can be claimed by a distinct acceptor, which is a bipartite matching
//! problem (ballots on one side, acceptors on the other).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::types::{quorum_size, AgentId, Ballot, Config, Role, Value};

/// Largest history, in (acceptor, value, ballot) entries, that
/// [`detect_cq_oracle`] agrees to enumerate.
pub const ORACLE_ENTRY_LIMIT: usize = 20;

/// Accepts known to some observer, per acceptor and value.
///
/// Entries are only ever added.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AcceptHistory {
    entries: BTreeMap<AgentId, BTreeMap<Value, BTreeSet<Ballot>>>,
}

impl AcceptHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that `acceptor` accepted `value` at `ballot`. Returns `false`
    /// if the entry was already known.
    ///
    /// # Panics
    ///
    /// If `acceptor` is not an acceptor id.
    pub fn insert(&mut self, acceptor: AgentId, value: Value, ballot: Ballot) -> bool {
        assert_eq!(acceptor.role, Role::Acceptor, "accept history is keyed by acceptors");
        self.entries.entry(acceptor).or_default().entry(value).or_default().insert(ballot)
    }

    pub fn contains(&self, acceptor: AgentId, value: Value, ballot: Ballot) -> bool {
        self.entries
            .get(&acceptor)
            .and_then(|per_value| per_value.get(&value))
            .is_some_and(|ballots| ballots.contains(&ballot))
    }

    /// Ballots at which `acceptor` is known to have accepted `value`.
    pub fn ballots(&self, acceptor: AgentId, value: Value) -> Option<&BTreeSet<Ballot>> {
        self.entries.get(&acceptor).and_then(|per_value| per_value.get(&value))
    }

    /// Acceptors with at least one accept for `value`, with their ballots.
    pub fn for_value(&self, value: Value) -> BTreeMap<AgentId, &BTreeSet<Ballot>> {
        self.entries
            .iter()
            .filter_map(|(a, per_value)| {
                per_value.get(&value).filter(|s| !s.is_empty()).map(|s| (*a, s))
            })
            .collect()
    }

    pub fn values(&self) -> BTreeSet<Value> {
        self.entries.values().flat_map(|per_value| per_value.keys().copied()).collect()
    }

    /// Total number of (acceptor, value, ballot) entries.
    pub fn len(&self) -> usize {
        self.entries.values().flat_map(|per_value| per_value.values()).map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, Value, Ballot)> + '_ {
        self.entries.iter().flat_map(|(a, per_value)| {
            per_value.iter().flat_map(move |(v, ballots)| ballots.iter().map(move |b| (*a, *v, *b)))
        })
    }
}

impl FromIterator<(AgentId, Value, Ballot)> for AcceptHistory {
    fn from_iter<I: IntoIterator<Item = (AgentId, Value, Ballot)>>(iter: I) -> Self {
        let mut h = AcceptHistory::new();
        for (a, v, b) in iter {
            h.insert(a, v, b);
        }
        h
    }
}

/// A detected consecutive quorum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CqWitness {
    pub value: Value,
    /// One ballot per participating acceptor.
    pub assignment: BTreeMap<AgentId, Ballot>,
    pub lo: Ballot,
    pub hi: Ballot,
    /// Distinct assigned ballots; always the whole interval `[lo, hi]`.
    pub chosen_ballots: BTreeSet<Ballot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("history has {entries} entries; the brute-force oracle is limited to {limit}")]
    TooLarge { entries: usize, limit: usize },
}

/// `m` and `n` are consecutive iff `m <= n` and no ballot lies strictly
/// between them.
pub fn is_consecutive_pair(m: Ballot, n: Ballot) -> bool {
    m <= n && !(m.0.saturating_add(1)..n.0).any(|_| true)
}

/// Every element is either the minimum or has a consecutive smaller
/// element in the set. The empty set is vacuously consecutive; callers in
/// this crate never pass it.
pub fn is_consecutive_set(s: &BTreeSet<Ballot>) -> bool {
    let Some(&min) = s.first() else {
        return true;
    };
    s.iter().all(|&n| n == min || s.range(..n).any(|&m| is_consecutive_pair(m, n)))
}

/// Assigns every ballot in `[lo, hi]` a distinct acceptor that holds it.
///
/// `avail` maps each acceptor to the ballots it can contribute; ballots
/// outside the interval are ignored. Ballots are processed in ascending
/// order and acceptors tried in ascending id order, so the result is
/// deterministic.
pub fn interval_coverable(
    lo: Ballot,
    hi: Ballot,
    avail: &BTreeMap<AgentId, BTreeSet<Ballot>>,
) -> Option<BTreeMap<Ballot, AgentId>> {
    if lo > hi {
        return None;
    }
    let width = (hi.0 - lo.0) as usize + 1;
    if width > avail.len() {
        return None;
    }
    let acceptors: Vec<AgentId> = avail.keys().copied().collect();
    // adjacency: ballot slot -> acceptor slots that hold it
    let adj: Vec<Vec<usize>> = (0..width)
        .map(|k| {
            let b = Ballot(lo.0 + k as u32);
            acceptors
                .iter()
                .enumerate()
                .filter(|(_, a)| avail[a].contains(&b))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    if adj.iter().any(Vec::is_empty) {
        return None;
    }

    let mut owner_of: Vec<Option<usize>> = vec![None; acceptors.len()];
    for slot in 0..width {
        let mut seen = vec![false; acceptors.len()];
        if !augment(slot, &adj, &mut owner_of, &mut seen) {
            return None;
        }
    }

    let mut out = BTreeMap::new();
    for (acc, slot) in owner_of.iter().enumerate() {
        if let Some(slot) = slot {
            out.insert(Ballot(lo.0 + *slot as u32), acceptors[acc]);
        }
    }
    Some(out)
}

fn augment(
    slot: usize,
    adj: &[Vec<usize>],
    owner_of: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for &acc in &adj[slot] {
        if seen[acc] {
            continue;
        }
        seen[acc] = true;
        let free = match owner_of[acc] {
            None => true,
            Some(other) => augment(other, adj, owner_of, seen),
        };
        if free {
            owner_of[acc] = Some(slot);
            return true;
        }
    }
    false
}

/// Acceptor ballots for `v` restricted to `[lo, hi]`, dropping acceptors
/// with nothing inside the interval.
fn restrict(
    per_acceptor: &BTreeMap<AgentId, &BTreeSet<Ballot>>,
    lo: Ballot,
    hi: Ballot,
) -> BTreeMap<AgentId, BTreeSet<Ballot>> {
    per_acceptor
        .iter()
        .filter_map(|(a, ballots)| {
            let inside: BTreeSet<Ballot> = ballots.range(lo..=hi).copied().collect();
            (!inside.is_empty()).then_some((*a, inside))
        })
        .collect()
}

/// Every interval `[lo, hi]` that some consecutive quorum for `v` spans,
/// ordered by `hi` then `lo`, with the covering matching.
fn feasible_intervals<'h>(
    history: &'h AcceptHistory,
    v: Value,
    cfg: &Config,
) -> impl Iterator<Item = (Ballot, Ballot, BTreeMap<AgentId, BTreeSet<Ballot>>, BTreeMap<Ballot, AgentId>)> + 'h
{
    let quorum = quorum_size(cfg);
    let per_acceptor = history.for_value(v);
    let mut his: BTreeSet<Ballot> = BTreeSet::new();
    if per_acceptor.len() >= quorum {
        for ballots in per_acceptor.values() {
            his.extend(ballots.iter().copied());
        }
    }
    let max_width = per_acceptor.len() as u32;
    his.into_iter().flat_map(move |hi| {
        let first_lo = (hi.0 + 1).saturating_sub(max_width);
        let per_acceptor = per_acceptor.clone();
        (first_lo..=hi.0).filter_map(move |lo| {
            let lo = Ballot(lo);
            let avail = restrict(&per_acceptor, lo, hi);
            if avail.len() < quorum {
                return None;
            }
            interval_coverable(lo, hi, &avail).map(|matching| (lo, hi, avail, matching))
        })
    })
}

/// Finds a consecutive quorum for `v` in `history`.
///
/// Among all feasible intervals the one with the smallest `hi`, then the
/// smallest `lo`, is reported. Acceptors left over by the matching join the
/// witness in ascending id order, each with its smallest in-interval ballot.
pub fn detect_cq(history: &AcceptHistory, v: Value, cfg: &Config) -> Option<CqWitness> {
    let (lo, hi, avail, matching) = feasible_intervals(history, v, cfg).next()?;
    let mut assignment: BTreeMap<AgentId, Ballot> =
        matching.iter().map(|(b, a)| (*a, *b)).collect();
    for (a, ballots) in &avail {
        if !assignment.contains_key(a) {
            let smallest = *ballots.first().expect("restricted sets are non-empty");
            assignment.insert(*a, smallest);
        }
    }
    let chosen_ballots = assignment.values().copied().collect();
    Some(CqWitness { value: v, assignment, lo, hi, chosen_ballots })
}

/// Every ballot `i` such that `v` is chosen at `i` under the consecutive
/// quorum rule: some consecutive quorum for `v` includes an accept at `i`.
pub fn cq_chosen_ballots(history: &AcceptHistory, v: Value, cfg: &Config) -> BTreeSet<Ballot> {
    let mut out = BTreeSet::new();
    for (lo, hi, _, _) in feasible_intervals(history, v, cfg) {
        out.extend((lo.0..=hi.0).map(Ballot));
    }
    out
}

/// Smallest ballot at which f+1 distinct acceptors accepted `v`.
pub fn detect_classic(history: &AcceptHistory, v: Value, cfg: &Config) -> Option<Ballot> {
    classic_chosen_ballots(history, v, cfg).first().copied()
}

/// All ballots at which f+1 distinct acceptors accepted `v`.
pub fn classic_chosen_ballots(history: &AcceptHistory, v: Value, cfg: &Config) -> BTreeSet<Ballot> {
    let mut counts: BTreeMap<Ballot, usize> = BTreeMap::new();
    for ballots in history.for_value(v).values() {
        for b in ballots.iter() {
            *counts.entry(*b).or_default() += 1;
        }
    }
    let quorum = quorum_size(cfg);
    counts.into_iter().filter(|(_, n)| *n >= quorum).map(|(b, _)| b).collect()
}

/// Brute-force check for a consecutive quorum: tries every subset of
/// acceptors and every one-ballot-per-acceptor selection.
pub fn detect_cq_oracle(history: &AcceptHistory, v: Value, cfg: &Config) -> Result<bool, OracleError> {
    let entries = history.len();
    if entries > ORACLE_ENTRY_LIMIT {
        return Err(OracleError::TooLarge { entries, limit: ORACLE_ENTRY_LIMIT });
    }
    let options: Vec<Vec<u32>> =
        history.for_value(v).values().map(|s| s.iter().map(|b| b.0).collect()).collect();
    let mut picked = Vec::with_capacity(options.len());
    Ok(search(&options, 0, &mut picked, quorum_size(cfg)))
}

fn search(options: &[Vec<u32>], next: usize, picked: &mut Vec<u32>, quorum: usize) -> bool {
    if next == options.len() {
        return picked.len() >= quorum && forms_run(picked);
    }
    // leave this acceptor out
    if search(options, next + 1, picked, quorum) {
        return true;
    }
    for &b in &options[next] {
        picked.push(b);
        let hit = search(options, next + 1, picked, quorum);
        picked.pop();
        if hit {
            return true;
        }
    }
    false
}

fn forms_run(picked: &[u32]) -> bool {
    let mut distinct = picked.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct.windows(2).all(|w| w[1] == w[0] + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Mutant, Variant};

    const X: Value = Value(0);

    fn cfg(f: u32) -> Config {
        Config::new(f, 1, 1, vec!["x".into(), "y".into()], Variant::Cq, Mutant::None).unwrap()
    }

    fn set(bs: &[u32]) -> BTreeSet<Ballot> {
        bs.iter().map(|b| Ballot(*b)).collect()
    }

    fn hist(entries: &[(u16, u32)]) -> AcceptHistory {
        entries.iter().map(|(a, b)| (AgentId::acceptor(*a), X, Ballot(*b))).collect()
    }

    // A..E
    const A: u16 = 0;
    const B: u16 = 1;
    const C: u16 = 2;
    const D: u16 = 3;
    const E: u16 = 4;

    #[test]
    fn consecutive_pairs() {
        assert!(is_consecutive_pair(Ballot(9), Ballot(10)));
        assert!(is_consecutive_pair(Ballot(7), Ballot(7)));
        assert!(!is_consecutive_pair(Ballot(7), Ballot(9)));
        assert!(!is_consecutive_pair(Ballot(10), Ballot(9)));
        assert!(is_consecutive_pair(Ballot(u32::MAX), Ballot(u32::MAX)));
    }

    #[test]
    fn consecutive_sets() {
        assert!(is_consecutive_set(&set(&[9, 10])));
        assert!(!is_consecutive_set(&set(&[7, 9, 10])));
        assert!(is_consecutive_set(&set(&[5])));
        assert!(is_consecutive_set(&BTreeSet::new()));
    }

    #[test]
    fn coverable_intervals() {
        let avail: BTreeMap<_, _> =
            [(AgentId::acceptor(A), set(&[4])), (AgentId::acceptor(B), set(&[4, 5]))].into();
        let m = interval_coverable(Ballot(4), Ballot(5), &avail).unwrap();
        assert_eq!(
            m,
            [(Ballot(4), AgentId::acceptor(A)), (Ballot(5), AgentId::acceptor(B))].into()
        );

        let avail: BTreeMap<_, _> =
            [(AgentId::acceptor(A), set(&[4])), (AgentId::acceptor(B), set(&[4]))].into();
        assert_eq!(interval_coverable(Ballot(4), Ballot(5), &avail), None);

        let avail: BTreeMap<_, _> = [(AgentId::acceptor(A), set(&[3]))].into();
        assert_eq!(
            interval_coverable(Ballot(3), Ballot(3), &avail),
            Some([(Ballot(3), AgentId::acceptor(A))].into())
        );
    }

    #[test]
    fn matching_needs_augmenting_path() {
        // greedy by ascending acceptor would give 4->A and strand 5
        let avail: BTreeMap<_, _> =
            [(AgentId::acceptor(A), set(&[4, 5])), (AgentId::acceptor(B), set(&[4]))].into();
        let m = interval_coverable(Ballot(4), Ballot(5), &avail).unwrap();
        assert_eq!(m[&Ballot(4)], AgentId::acceptor(B));
        assert_eq!(m[&Ballot(5)], AgentId::acceptor(A));
    }

    #[test]
    fn table3_is_a_consecutive_quorum() {
        let h = hist(&[(C, 10), (D, 9), (E, 9)]);
        let w = detect_cq(&h, X, &cfg(2)).unwrap();
        assert_eq!((w.lo, w.hi), (Ballot(9), Ballot(10)));
        assert_eq!(w.chosen_ballots, set(&[9, 10]));
        assert_eq!(w.assignment.len(), 3);
        assert_eq!(detect_cq_oracle(&h, X, &cfg(2)), Ok(true));
        assert_eq!(detect_classic(&h, X, &cfg(2)), None);
    }

    #[test]
    fn table1_is_not() {
        let h = hist(&[(C, 10), (D, 9), (E, 7)]);
        assert_eq!(detect_cq(&h, X, &cfg(2)), None);
        assert_eq!(detect_cq_oracle(&h, X, &cfg(2)), Ok(false));
    }

    #[test]
    fn smallest_hi_wins() {
        let h = hist(&[(A, 4), (B, 4), (B, 5)]);
        let w = detect_cq(&h, X, &cfg(1)).unwrap();
        assert_eq!((w.lo, w.hi), (Ballot(4), Ballot(4)));
        assert_eq!(
            w.assignment,
            [(AgentId::acceptor(A), Ballot(4)), (AgentId::acceptor(B), Ballot(4))].into()
        );
        assert_eq!(w.chosen_ballots, set(&[4]));
    }

    #[test]
    fn gap_is_uncoverable() {
        let h = hist(&[(A, 7), (B, 7), (C, 9)]);
        assert_eq!(detect_cq(&h, X, &cfg(2)), None);
        assert_eq!(detect_cq_oracle(&h, X, &cfg(2)), Ok(false));
    }

    #[test]
    fn leftover_acceptors_join_greedily() {
        // [4,5] is the first feasible interval; C also holds 5 and joins.
        let h = hist(&[(A, 4), (B, 5), (C, 5), (C, 9)]);
        let w = detect_cq(&h, X, &cfg(1)).unwrap();
        assert_eq!((w.lo, w.hi), (Ballot(4), Ballot(5)));
        assert_eq!(w.assignment[&AgentId::acceptor(C)], Ballot(5));
        assert_eq!(w.assignment.len(), 3);
        let h = hist(&[(A, 4), (B, 5), (C, 9)]);
        let w = detect_cq(&h, X, &cfg(1)).unwrap();
        assert_eq!((w.lo, w.hi), (Ballot(4), Ballot(5)));
        assert_eq!(w.assignment.len(), 2);
    }

    #[test]
    fn classic_detection() {
        assert_eq!(detect_classic(&hist(&[(A, 5), (B, 5)]), X, &cfg(1)), Some(Ballot(5)));
        assert_eq!(detect_classic(&hist(&[(A, 5), (B, 6)]), X, &cfg(1)), None);
        assert_eq!(detect_classic(&hist(&[(A, 6), (B, 6), (A, 5), (C, 5)]), X, &cfg(1)), Some(Ballot(5)));
    }

    #[test]
    fn chosen_ballots_cover_every_quorum() {
        let h = hist(&[(C, 10), (D, 9), (E, 9)]);
        assert_eq!(cq_chosen_ballots(&h, X, &cfg(2)), set(&[9, 10]));
        // two disjoint runs: {1,2} and {5}
        let h = hist(&[(A, 1), (B, 2), (A, 5), (C, 5)]);
        assert_eq!(cq_chosen_ballots(&h, X, &cfg(1)), set(&[1, 2, 5]));
        assert!(cq_chosen_ballots(&AcceptHistory::new(), X, &cfg(1)).is_empty());
    }

    #[test]
    fn oracle_refuses_large_histories() {
        let h: AcceptHistory =
            (0..21).map(|b| (AgentId::acceptor(0), X, Ballot(b))).collect();
        assert_eq!(
            detect_cq_oracle(&h, X, &cfg(1)),
            Err(OracleError::TooLarge { entries: 21, limit: ORACLE_ENTRY_LIMIT })
        );
        assert_eq!(detect_cq_oracle(&AcceptHistory::new(), X, &cfg(1)), Ok(false));
    }

    #[test]
    fn other_values_are_ignored() {
        let mut h = hist(&[(A, 1)]);
        h.insert(AgentId::acceptor(B), Value(1), Ballot(2));
        assert_eq!(detect_cq(&h, X, &cfg(1)), None);
        assert_eq!(detect_cq_oracle(&h, X, &cfg(1)), Ok(false));
    }

    #[test]
    #[should_panic]
    fn history_rejects_non_acceptors() {
        AcceptHistory::new().insert(AgentId::learner(0), X, Ballot(0));
    }
}

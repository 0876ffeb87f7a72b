//! Cross-checks [`detect_cq`] against the brute-force oracle.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::consecutive::{detect_cq, detect_cq_oracle, is_consecutive_set, AcceptHistory, CqWitness, ORACLE_ENTRY_LIMIT};
use crate::types::{AgentId, Ballot, Config, Mutant, Value, Variant};

/// Histories handed to the oracle mention at most this many acceptors.
pub const MAX_ORACLE_ACCEPTORS: usize = 5;
/// Ballots in oracle histories are drawn from `1..=MAX_ORACLE_BALLOT`.
pub const MAX_ORACLE_BALLOT: u32 = 6;

const X: Value = Value(0);
const Y: Value = Value(1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub f: u32,
    pub history: AcceptHistory,
    pub fast: bool,
    pub oracle: bool,
    /// Set when `detect_cq` answered but its witness is malformed.
    pub bad_witness: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepReport {
    pub cases: u64,
    pub positives: u64,
    pub mismatches: Vec<Mismatch>,
}

impl SweepReport {
    fn absorb(&mut self, other: SweepReport) {
        self.cases += other.cases;
        self.positives += other.positives;
        self.mismatches.extend(other.mismatches);
    }
}

fn config(f: u32) -> Config {
    Config::new(f, 1, 1, vec!["x".into(), "y".into()], Variant::Cq, Mutant::None).expect("oracle config is valid")
}

/// Why `w` is not a consecutive quorum for `v` in `history`, if it is not.
pub fn witness_problem(w: &CqWitness, history: &AcceptHistory, v: Value, cfg: &Config) -> Option<String> {
    if w.value != v {
        return Some(format!("witness for v{} when asked about v{}", w.value.0, v.0));
    }
    if w.assignment.len() < crate::types::quorum_size(cfg) {
        return Some(format!("only {} acceptors", w.assignment.len()));
    }
    for (a, b) in &w.assignment {
        if !history.contains(*a, v, *b) {
            return Some(format!("{a} never accepted at {b}"));
        }
    }
    let ballots: BTreeSet<Ballot> = w.assignment.values().copied().collect();
    if ballots != w.chosen_ballots || !is_consecutive_set(&ballots) {
        return Some(format!("ballots {ballots:?} are not a consecutive set"));
    }
    None
}

fn compare(history: &AcceptHistory, f: u32, cfg: &Config, report: &mut SweepReport) {
    let oracle = detect_cq_oracle(history, X, cfg).expect("sweep histories stay under the oracle limit");
    let witness = detect_cq(history, X, cfg);
    let bad_witness = witness.as_ref().and_then(|w| witness_problem(w, history, X, cfg));
    report.cases += 1;
    report.positives += u64::from(oracle);
    if witness.is_some() != oracle || bad_witness.is_some() {
        report.mismatches.push(Mismatch { f, history: history.clone(), fast: witness.is_some(), oracle, bad_witness });
    }
}

/// Every history in which `acceptors` acceptors each accept `x` at some
/// subset of `1..=max_ballot`, for every `f` with `f + 1 <= acceptors`.
pub fn exhaustive_sweep(acceptors: usize, max_ballot: u32) -> SweepReport {
    assert!(acceptors * max_ballot as usize <= ORACLE_ENTRY_LIMIT, "sweep exceeds the oracle limit");
    let per = 1u64 << max_ballot;
    let total = per.pow(acceptors as u32);
    let cfgs: Vec<(u32, Config)> = (0..acceptors as u32).map(|f| (f, config(f))).collect();
    let mut report = SweepReport::default();
    for code in 0..total {
        let mut history = AcceptHistory::new();
        let mut rest = code;
        for a in 0..acceptors {
            let mask = rest % per;
            rest /= per;
            for b in 0..max_ballot {
                if mask & (1 << b) != 0 {
                    history.insert(AgentId::acceptor(a as u16), X, Ballot(b + 1));
                }
            }
        }
        for (f, cfg) in &cfgs {
            compare(&history, *f, cfg, &mut report);
        }
    }
    report
}

/// `cases` random histories over up to `max_acceptors` acceptors and
/// ballots `1..=max_ballot`, with some `y` noise. Case `i` depends only on
/// `(seed, i)`.
pub fn random_sweep(seed: u64, cases: u64, max_acceptors: usize, max_ballot: u32) -> SweepReport {
    assert!((1..=MAX_ORACLE_ACCEPTORS).contains(&max_acceptors));
    assert!((1..=MAX_ORACLE_BALLOT).contains(&max_ballot));
    let mut report = SweepReport::default();
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(case);
        let acceptors = rng.gen_range(1..=max_acceptors);
        let f = rng.gen_range(0..acceptors as u32);
        let density = rng.gen_range(0.1..0.7);
        let history = loop {
            let mut h = AcceptHistory::new();
            for a in 0..acceptors {
                for b in 1..=max_ballot {
                    if rng.gen_bool(density) {
                        let v = if rng.gen_bool(0.15) { Y } else { X };
                        h.insert(AgentId::acceptor(a as u16), v, Ballot(b));
                    }
                }
            }
            if h.len() <= ORACLE_ENTRY_LIMIT {
                break h;
            }
        };
        let mut one = SweepReport::default();
        compare(&history, f, &config(f), &mut one);
        report.absorb(one);
    }
    report
}

//! What learners could learn from a set of accepts.
//!
//! Learners never send anything, so whatever the other agents do is
//! independent of when accepts reach a learner. A learner that has seen
//! some subset of the sent accepts, in some order, is therefore always a
//! possible companion of the rest of the world. The explorer leaves
//! learners out of its state and instead asks, for each value, which
//! ballots a learner could record when that value first becomes learnable
//! from some subset of its accepts.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::agents::learn_ballot;
use crate::consecutive::{detect_classic, detect_cq, AcceptHistory};
use crate::types::{AgentId, Ballot, Config, Value};

/// Learner outcomes over every subset of one value's accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Outcome {
    /// The full set of accepts makes the value learnable.
    pub learnable: bool,
    /// Each ballot a learner could tag the value with, with one delivery
    /// order (indices into the accepts) that produces it.
    pub first: BTreeMap<Ballot, Vec<usize>>,
    /// Every subset with a same-ballot majority also has a consecutive
    /// quorum.
    pub subsumed: bool,
}

/// A value's sent accepts, sorted.
type Accepts = Vec<(AgentId, Ballot)>;

/// Memoized [`Outcome`]s keyed by the value's accepts.
pub(crate) struct Closure {
    cfg: Config,
    cache: Mutex<HashMap<Accepts, Arc<Outcome>>>,
}

const PROBE: Value = Value(0);

impl Closure {
    pub fn new(cfg: &Config) -> Self {
        Closure { cfg: cfg.clone(), cache: Mutex::new(HashMap::new()) }
    }

    /// `accepts` must be sorted and free of duplicates.
    pub fn outcome(&self, accepts: &[(AgentId, Ballot)]) -> Arc<Outcome> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(accepts) {
            return Arc::clone(hit);
        }
        let out = Arc::new(self.compute(accepts));
        self.cache.lock().expect("cache lock").insert(accepts.to_vec(), Arc::clone(&out));
        out
    }

    fn compute(&self, accepts: &[(AgentId, Ballot)]) -> Outcome {
        let k = accepts.len();
        assert!(k < 24, "{k} accepts for one value is beyond explorable scope");
        let history = |mask: usize| -> AcceptHistory {
            (0..k).filter(|i| mask & (1 << i) != 0).map(|i| (accepts[i].0, PROBE, accepts[i].1)).collect()
        };
        let mut learned = Vec::with_capacity(1 << k);
        let mut subsumed = true;
        for mask in 0..1usize << k {
            let h = history(mask);
            learned.push(learn_ballot(&h, PROBE, &self.cfg));
            if detect_classic(&h, PROBE, &self.cfg).is_some() && detect_cq(&h, PROBE, &self.cfg).is_none() {
                subsumed = false;
            }
        }
        let mut first = BTreeMap::new();
        for mask in 0..1usize << k {
            if learned[mask].is_some() {
                continue;
            }
            for e in (0..k).filter(|e| mask & (1 << e) == 0) {
                if let Some(b) = learned[mask | 1 << e] {
                    first.entry(b).or_insert_with(|| {
                        let mut order: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
                        order.push(e);
                        order
                    });
                }
            }
        }
        Outcome { learnable: learned[(1 << k) - 1].is_some(), first, subsumed }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Mutant, Variant};

    fn cfg(variant: Variant, mutant: Mutant) -> Config {
        Config::new(1, 2, 1, vec!["x".into(), "y".into()], variant, mutant).unwrap()
    }

    fn acc(a: u16, b: u32) -> (AgentId, Ballot) {
        (AgentId::acceptor(a), Ballot(b))
    }

    #[test]
    fn single_accept_is_not_learnable() {
        let c = Closure::new(&cfg(Variant::Cq, Mutant::None));
        let out = c.outcome(&[acc(0, 1)]);
        assert!(!out.learnable);
        assert!(out.first.is_empty());
        assert!(out.subsumed);
    }

    #[test]
    fn order_decides_the_recorded_ballot() {
        // A1 B1 B2: {A1,B1} learns at 1, {A1,B2} at 2, so both tags occur.
        let c = Closure::new(&cfg(Variant::Cq, Mutant::None));
        let accepts = [acc(0, 1), acc(1, 1), acc(1, 2)];
        let out = c.outcome(&accepts);
        assert!(out.learnable);
        assert_eq!(out.first.keys().copied().collect::<Vec<_>>(), vec![Ballot(1), Ballot(2)]);
        for (b, order) in &out.first {
            let h: AcceptHistory = order.iter().map(|&i| (accepts[i].0, PROBE, accepts[i].1)).collect();
            assert_eq!(learn_ballot(&h, PROBE, &c.cfg), Some(*b));
        }
    }

    #[test]
    fn classic_needs_one_ballot() {
        let c = Closure::new(&cfg(Variant::Classic, Mutant::None));
        assert!(!c.outcome(&[acc(0, 1), acc(1, 2)]).learnable);
        let m1 = Closure::new(&cfg(Variant::Classic, Mutant::M1AnyBallotMajority));
        let out = m1.outcome(&[acc(0, 1), acc(1, 3)]);
        assert!(out.learnable);
        assert_eq!(out.first.keys().copied().collect::<Vec<_>>(), vec![Ballot(3)]);
    }

    #[test]
    fn outcomes_are_cached() {
        let c = Closure::new(&cfg(Variant::Cq, Mutant::None));
        let a = c.outcome(&[acc(0, 1), acc(1, 1)]);
        let b = c.outcome(&[acc(0, 1), acc(1, 1)]);
        assert!(Arc::ptr_eq(&a, &b));
    }
}

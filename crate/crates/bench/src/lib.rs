//! Inputs shared by the benchmarks.

use cqpaxos::{AcceptHistory, AgentId, Ballot, Value};

/// Every acceptor accepted `value` at each ballot in `ballots`, shifted by
/// the acceptor index so that intervals overlap but rarely coincide.
pub fn staggered_history(acceptors: u16, ballots: u32, value: Value) -> AcceptHistory {
    (0..acceptors)
        .flat_map(|a| {
            (0..ballots).map(move |b| (AgentId::acceptor(a), value, Ballot(2 * b + u32::from(a))))
        })
        .collect()
}

/// A history with a gap at every third ballot, so no consecutive quorum
/// exists and detection has to try every interval.
pub fn gapped_history(acceptors: u16, ballots: u32, value: Value) -> AcceptHistory {
    (0..acceptors)
        .flat_map(|a| {
            (0..ballots)
                .filter(|b| b % 3 != 1)
                .map(move |b| (AgentId::acceptor(a), value, Ballot(b * 3 + u32::from(a % 2))))
        })
        .collect()
}

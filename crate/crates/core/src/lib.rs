//! Single-decree Paxos with consecutive-ballot learning and proposing.
//!
//! The crate has three layers:
//!
//! * protocol: [`types`], [`consecutive`] and [`agents`] define messages,
//!   consecutive-quorum detection and the pure per-agent transition rules;
//! * execution: [`world`] composes agents over a grow-only message set and
//!   [`scenario`] drives it from scripts;
//! * verification: [`checker`] explores reachable worlds exhaustively or by
//!   seeded random walks and evaluates the safety properties on each, and
//!   [`trace`] reads and writes counterexample traces.

pub mod agents;
pub mod checker;
pub mod consecutive;
mod learning;
pub mod oracle;
pub mod scenario;
pub mod trace;
pub mod types;
pub mod world;

pub use agents::{AcceptorState, Criterion, LearnerState, Phase, ProposerState};
pub use consecutive::{AcceptHistory, CqWitness};
pub use types::{
    ballot_owner, quorum_size, Accept, AgentId, Ballot, Config, ConfigError, Message, Mutant,
    Prepare, Promise, Proposal, Propose, Role, Value, Variant,
};
pub use checker::{ExploreReport, Scope, Violation, ViolationKind};
pub use scenario::{parse_scenario, run_scenario, Scenario, ScenarioCommand};
pub use trace::TraceFile;
pub use world::{initial_world, Action, TraceRecord, WorldState};

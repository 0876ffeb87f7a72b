//! Counterexample trace files.
//!
//! A trace file is a scenario with a comment header: the header carries
//! free-form notes and the fingerprint of the final world, the first
//! command is the config line and every further line is one action
//! prefixed by `step=<n>`, so a trace also runs as a scenario.
//!
//! Checker traces replay with ballots owned by `b mod proposers` and full
//! delivered sets, so the recorded fingerprint is that of the world the
//! checker would reach by applying the same actions outside its reduced
//! exploration mode. Traces written from scenario runs carry an
//! `# ownership=scripted` header and replay with scripted ownership.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::scenario::{parse_scenario_named, run_commands, ConfigLine, ParseError, ScenarioCommand, ScenarioError};
use crate::types::Config;
use crate::world::{fingerprint_hex, initial_world, Action, WorldError, WorldState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFile {
    /// Header comment lines without their leading `# `.
    pub notes: Vec<String>,
    pub config: Config,
    pub commands: Vec<ScenarioCommand>,
    /// Hex fingerprint of the final world, when the header records one.
    pub fingerprint: Option<String>,
    /// Replay with first-claim ballot ownership instead of `b mod proposers`.
    pub scripted: bool,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Run(#[from] ScenarioError),
    #[error("step {step}: {source}")]
    Apply { step: usize, source: WorldError },
    #[error("trace file has no config line")]
    MissingConfig,
    #[error("replay ended at fingerprint {actual}, trace recorded {expected}")]
    FingerprintMismatch { expected: String, actual: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TraceFile {
    /// Builds a trace by applying `actions` from the initial world and
    /// recording the final fingerprint.
    pub fn from_actions(cfg: &Config, actions: &[Action], notes: Vec<String>) -> Result<TraceFile, TraceError> {
        let mut w = initial_world(cfg).without_log();
        for (step, a) in actions.iter().enumerate() {
            w = w.apply_action(a).map_err(|source| TraceError::Apply { step, source })?;
        }
        let mut commands = vec![ScenarioCommand::Config(ConfigLine::from_config(cfg))];
        commands.extend(actions.iter().map(|a| ScenarioCommand::from_action(a, cfg)));
        Ok(TraceFile { notes, config: cfg.clone(), commands, fingerprint: Some(fingerprint_hex(&w)), scripted: false })
    }

    /// The actions logged by a scripted run, ending at `world`.
    pub fn from_scripted_run(world: &WorldState, notes: Vec<String>) -> TraceFile {
        let cfg = world.config();
        let mut commands = vec![ScenarioCommand::Config(ConfigLine::from_config(cfg))];
        commands.extend(world.log().iter().map(|r| ScenarioCommand::from_action(&r.action, cfg)));
        TraceFile { notes, config: cfg.clone(), commands, fingerprint: Some(fingerprint_hex(world)), scripted: true }
    }

    pub fn parse(name: &str, text: &str) -> Result<TraceFile, TraceError> {
        let mut notes = Vec::new();
        let mut fingerprint = None;
        let mut scripted = false;
        for line in text.lines().map(str::trim).take_while(|l| l.starts_with('#') || l.is_empty()) {
            let Some(note) = line.strip_prefix('#') else { continue };
            let note = note.trim();
            if let Some(fp) = note.strip_prefix("fingerprint=") {
                fingerprint = Some(fp.to_string());
            } else if let Some(mode) = note.strip_prefix("ownership=") {
                scripted = mode == "scripted";
            } else {
                notes.push(note.to_string());
            }
        }
        let scenario = parse_scenario_named(name, text)?;
        let config = scenario.config().map_err(|_| TraceError::MissingConfig)?;
        Ok(TraceFile { notes, config, commands: scenario.commands, fingerprint, scripted })
    }

    pub fn read(path: &Path) -> Result<TraceFile, TraceError> {
        let text = fs::read_to_string(path)?;
        TraceFile::parse(&path.display().to_string(), &text)
    }

    pub fn write(&self, path: &Path) -> Result<(), TraceError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for note in &self.notes {
            writeln!(out, "# {note}").unwrap();
        }
        if self.scripted {
            writeln!(out, "# ownership=scripted").unwrap();
        }
        if let Some(fp) = &self.fingerprint {
            writeln!(out, "# fingerprint={fp}").unwrap();
        }
        let mut step = 0;
        for cmd in &self.commands {
            match cmd {
                ScenarioCommand::Config(_) => writeln!(out, "{cmd}").unwrap(),
                c if c.is_assertion() || matches!(c, ScenarioCommand::ClientValue { .. }) => {
                    writeln!(out, "{cmd}").unwrap()
                }
                _ => {
                    writeln!(out, "step={step} {cmd}").unwrap();
                    step += 1;
                }
            }
        }
        out
    }

    /// Replays the trace under checker semantics and checks the recorded
    /// fingerprint, if any.
    pub fn replay(&self) -> Result<WorldState, TraceError> {
        let body = match self.commands.first() {
            Some(ScenarioCommand::Config(_)) => &self.commands[1..],
            _ => &self.commands[..],
        };
        let start = if self.scripted { WorldState::scripted(&self.config) } else { initial_world(&self.config) };
        let run = run_commands(start, body, 1)?;
        if let Some(expected) = &self.fingerprint {
            let actual = fingerprint_hex(&run.world);
            if *expected != actual {
                return Err(TraceError::FingerprintMismatch { expected: expected.clone(), actual });
            }
        }
        Ok(run.world)
    }
}

/// Reads and replays a trace file.
pub fn replay_file(path: &Path) -> Result<WorldState, TraceError> {
    TraceFile::read(path)?.replay()
}

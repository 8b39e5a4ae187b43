//! Live experiment sessions.
//!
//! A [`Session`] wraps an [`Experiment`] whose outcomes arrive one at a time
//! from an operator (or, in simulated mode, from the session's own
//! environment stream). Every command that changes state is appended to the
//! session's event log before the call returns; [`Session::replay`] rebuilds
//! the exact state from that log.
//!
//! Log lines are JSON objects tagged by `event`:
//!
//! ```text
//! {"event":"created","id":"trial-7","config":{..},"simulated":false}
//! {"event":"assignment","stage":1,"arm":0,"probs":[0.5,0.5],"overridden":false}
//! {"event":"outcome","stage":1,"arm":0,"value":1.2,"simulated":false}
//! {"event":"override","stage":150,"margin":0.01}
//! {"event":"halted","stage":301,"stop_time":300,"chosen_arm":1,"forced":false}
//! ```

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefBank;
use crate::config::{ConfigError, ExperimentConfig};
use crate::engine::{draw_outcome, EngineError, Experiment, FinalDecision, StageStart};
use crate::rng::{RunStreams, StreamRng};
use crate::stopping::{should_stop, StopDecision};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("an assignment is already pending")]
    PendingAssignment,
    #[error("no assignment is pending")]
    NoPendingAssignment,
    #[error("session has stopped")]
    SessionStopped,
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session id `{0}` already exists")]
    DuplicateId(String),
    #[error("invalid session id `{0}`: use 1-64 characters from [A-Za-z0-9_-]")]
    InvalidId(String),
    #[error("outcome {0} is not finite")]
    InvalidOutcome(f64),
    #[error("session has no environment to simulate from")]
    NotSimulated,
    #[error("log replay failed: {0}")]
    Replay(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Engine(EngineError),
}

impl SessionError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidConfig(_) => "invalid_config",
            SessionError::PendingAssignment => "pending_assignment",
            SessionError::NoPendingAssignment => "no_pending_assignment",
            SessionError::SessionStopped => "session_stopped",
            SessionError::NotFound(_) => "not_found",
            SessionError::DuplicateId(_) => "duplicate_id",
            SessionError::InvalidId(_) => "invalid_id",
            SessionError::InvalidOutcome(_) => "invalid_outcome",
            SessionError::NotSimulated => "not_simulated",
            SessionError::Replay(_) => "replay_mismatch",
            SessionError::Io(_) => "io_error",
            SessionError::Engine(_) => "internal",
        }
    }
}

impl From<EngineError> for SessionError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => SessionError::InvalidConfig(c),
            EngineError::Halted => SessionError::SessionStopped,
            EngineError::PendingAssignment => SessionError::PendingAssignment,
            EngineError::NoPendingAssignment => SessionError::NoPendingAssignment,
            other => SessionError::Engine(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    Live,
    Stopped,
    HorizonForced,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        id: String,
        config: ExperimentConfig,
        simulated: bool,
    },
    Assignment {
        stage: u64,
        arm: usize,
        probs: Vec<f64>,
        overridden: bool,
    },
    Override {
        stage: u64,
        margin: f64,
    },
    Outcome {
        stage: u64,
        arm: usize,
        value: f64,
        simulated: bool,
    },
    Halted {
        stage: u64,
        stop_time: u64,
        chosen_arm: usize,
        forced: bool,
    },
}

/// Reply to [`Session::next_assignment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentReply {
    pub stage: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_probs: Option<Vec<f64>>,
    /// Present once the burn-in has passed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_recommendation: Option<StopDecision>,
    pub status: SessionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<FinalDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingView {
    pub stage: u64,
    pub arm: usize,
}

/// Per-stage series for charting; one point per absorbed outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: u64,
    pub arm: usize,
    pub outcome: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq: Option<Vec<f64>>,
}

/// Full read-only view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub status: SessionStatus,
    pub simulated: bool,
    /// Outcomes absorbed so far.
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<PendingView>,
    pub beliefs: BeliefBank,
    pub freq: Vec<f64>,
    pub pulls: Vec<u64>,
    /// What the stopping rule says about the current beliefs (after burn-in).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_preview: Option<StopDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<FinalDecision>,
    /// Discounted net outcomes observed so far, when a payoff is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_to_date: Option<f64>,
    pub gamma_a: Option<f64>,
    pub series: Vec<SeriesPoint>,
    pub config: ExperimentConfig,
}

pub fn valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len())
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub struct Session {
    id: String,
    simulated: bool,
    experiment: Experiment,
    assign_rng: StreamRng,
    env_rng: StreamRng,
    events: Vec<Event>,
    sink: Option<File>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("stage", &self.experiment.stage())
            .finish_non_exhaustive()
    }
}

impl Session {
    /// A session kept in memory only.
    pub fn new(id: &str, config: ExperimentConfig, simulated: bool) -> Result<Self, SessionError> {
        Self::build(id, config, simulated, None)
    }

    /// A session persisted to `path`, which must not exist yet.
    pub fn create_at(
        path: &Path,
        id: &str,
        config: ExperimentConfig,
        simulated: bool,
    ) -> Result<Self, SessionError> {
        let mut session = Self::build(id, config, simulated, None)?;
        let file = OpenOptions::new()
            .append(true)
            .create_new(true)
            .open(path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => SessionError::DuplicateId(id.to_string()),
                _ => SessionError::Io(e),
            })?;
        session.sink = Some(file);
        let created = session.events.clone();
        for e in &created {
            session.persist(e)?;
        }
        Ok(session)
    }

    fn build(
        id: &str,
        config: ExperimentConfig,
        simulated: bool,
        sink: Option<File>,
    ) -> Result<Self, SessionError> {
        if !valid_id(id) {
            return Err(SessionError::InvalidId(id.to_string()));
        }
        config.validate()?;
        if simulated && config.environment.is_none() {
            return Err(ConfigError::single(
                "environment",
                "simulated sessions need an environment",
            )
            .into());
        }
        let streams = RunStreams::single(config.seed);
        let experiment = Experiment::new(config.clone())?;
        Ok(Self {
            id: id.to_string(),
            simulated,
            experiment,
            assign_rng: streams.assignment(),
            env_rng: streams.environment(),
            events: vec![Event::Created {
                id: id.to_string(),
                config,
                simulated,
            }],
            sink,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn experiment(&self) -> &Experiment {
        &self.experiment
    }

    pub fn status(&self) -> SessionStatus {
        match self.experiment.finish() {
            None => SessionStatus::Live,
            Some(f) if f.forced => SessionStatus::HorizonForced,
            Some(_) => SessionStatus::Stopped,
        }
    }

    fn persist(&mut self, event: &Event) -> Result<(), SessionError> {
        if let Some(file) = self.sink.as_mut() {
            let mut line = serde_json::to_string(event).map_err(std::io::Error::other)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        Ok(())
    }

    fn record(&mut self, event: Event) -> Result<(), SessionError> {
        self.persist(&event)?;
        self.events.push(event);
        Ok(())
    }

    /// Checks the stopping rule, then either ends the session or issues an
    /// assignment. With `override_stop` a firing rule is logged as an
    /// override and the stage proceeds; the horizon cannot be overridden.
    pub fn next_assignment(&mut self, override_stop: bool) -> Result<AssignmentReply, SessionError> {
        if self.experiment.finish().is_some() {
            return Err(SessionError::SessionStopped);
        }
        if self.experiment.pending_arm().is_some() {
            return Err(SessionError::PendingAssignment);
        }
        let stage = self.experiment.stage();
        match self.experiment.begin_stage(&mut self.assign_rng, override_stop)? {
            StageStart::Halted(fin) => {
                let decision = self.experiment.log().last().and_then(|r| r.stop_decision.clone());
                self.record(Event::Halted {
                    stage,
                    stop_time: fin.stop_time,
                    chosen_arm: fin.chosen_arm,
                    forced: fin.forced,
                })?;
                Ok(AssignmentReply {
                    stage,
                    arm: None,
                    action_probs: None,
                    stop_recommendation: decision,
                    status: self.status(),
                    decision: Some(fin),
                })
            }
            StageStart::Assigned {
                arm,
                probs,
                decision,
            } => {
                let overridden = decision.as_ref().is_some_and(|d| d.stop);
                if overridden {
                    let margin = decision.as_ref().and_then(|d| d.margin).unwrap_or(f64::NAN);
                    self.record(Event::Override { stage, margin })?;
                }
                self.record(Event::Assignment {
                    stage,
                    arm,
                    probs: probs.probs.clone(),
                    overridden,
                })?;
                Ok(AssignmentReply {
                    stage,
                    arm: Some(arm),
                    action_probs: Some(probs.probs),
                    stop_recommendation: decision,
                    status: SessionStatus::Live,
                    decision: None,
                })
            }
        }
    }

    /// Absorbs the outcome of the pending assignment.
    pub fn report_outcome(&mut self, value: f64) -> Result<SessionState, SessionError> {
        self.absorb(Some(value))?;
        Ok(self.state())
    }

    fn absorb(&mut self, value: Option<f64>) -> Result<(), SessionError> {
        if self.experiment.finish().is_some() {
            return Err(SessionError::SessionStopped);
        }
        let arm = self
            .experiment
            .pending_arm()
            .ok_or(SessionError::NoPendingAssignment)?;
        let (y, simulated) = match value {
            Some(y) => {
                if !y.is_finite() {
                    return Err(SessionError::InvalidOutcome(y));
                }
                (y, false)
            }
            None => {
                let env = self
                    .experiment
                    .config()
                    .environment
                    .as_ref()
                    .ok_or(SessionError::NotSimulated)?;
                (draw_outcome(env, arm, &mut self.env_rng), true)
            }
        };
        let stage = self.experiment.stage();
        self.experiment.complete_stage(y)?;
        self.record(Event::Outcome {
            stage,
            arm,
            value: y,
            simulated,
        })
    }

    /// Runs up to `stages` full stages with outcomes drawn from the
    /// configured environment. Stops early when the session ends.
    pub fn simulate(&mut self, stages: u64) -> Result<SessionState, SessionError> {
        if self.experiment.config().environment.is_none() {
            return Err(SessionError::NotSimulated);
        }
        if self.experiment.finish().is_some() {
            return Err(SessionError::SessionStopped);
        }
        for _ in 0..stages {
            if self.experiment.pending_arm().is_none() {
                let reply = self.next_assignment(false)?;
                if reply.arm.is_none() {
                    break;
                }
            }
            self.absorb(None)?;
        }
        Ok(self.state())
    }

    pub fn state(&self) -> SessionState {
        let exp = &self.experiment;
        let bank = exp.bank();
        let stopping = exp.stopping();
        let stop_preview = (exp.finish().is_none()
            && stopping.enabled
            && bank.t() >= stopping.burn_in
            && bank.t() > 0)
            .then(|| should_stop(bank, stopping, bank.t()).ok())
            .flatten();
        let series = exp
            .log()
            .iter()
            .filter_map(|r| {
                let (arm, outcome) = (r.assignment?, r.outcome?);
                let snap = r.belief_snapshot.as_ref();
                Some(SeriesPoint {
                    t: r.t,
                    arm,
                    outcome,
                    margin: r.stop_decision.as_ref().and_then(|d| d.margin),
                    aggregate: snap.map(|s| s.aggregate.clone()),
                    alpha: snap.map(|s| s.alpha.clone()),
                    zeta: snap.map(|s| s.zeta.clone()),
                    freq: snap.map(|s| s.freq.clone()),
                })
            })
            .collect();
        SessionState {
            id: self.id.clone(),
            status: self.status(),
            simulated: self.simulated,
            t: bank.t(),
            pending: exp.pending_arm().map(|arm| PendingView {
                stage: exp.stage(),
                arm,
            }),
            beliefs: bank.clone(),
            freq: (0..bank.arms()).map(|d| bank.frequency(d)).collect(),
            pulls: bank.stats().iter().map(|s| s.n).collect(),
            stop_preview,
            decision: exp.finish(),
            payoff_to_date: exp.config().payoff.as_ref().map(|p| exp.realized_payoff(p)),
            gamma_a: stopping.gamma_a,
            series,
            config: exp.config().clone(),
        }
    }

    /// Rebuilds a session by re-executing its logged commands. Every logged
    /// assignment, outcome and halt must be reproduced exactly.
    pub fn replay(events: &[Event]) -> Result<Self, SessionError> {
        let mismatch = |what: String| SessionError::Replay(what);
        let (id, config, simulated) = match events.first() {
            Some(Event::Created {
                id,
                config,
                simulated,
            }) => (id.clone(), config.clone(), *simulated),
            _ => return Err(mismatch("log must start with a `created` event".into())),
        };
        let mut s = Self::build(&id, config, simulated, None)?;
        for (i, event) in events.iter().enumerate().skip(1) {
            let line = i + 1;
            match event {
                Event::Created { .. } => return Err(mismatch(format!("line {line}: second `created`"))),
                // Checked together with the assignment that follows it.
                Event::Override { .. } => {}
                Event::Assignment { overridden, .. } => {
                    let before = s.events.len();
                    s.next_assignment(*overridden)?;
                    let produced = &s.events[before..];
                    let logged = if *overridden {
                        events.get(i - 1..=i).unwrap_or(&[])
                    } else {
                        std::slice::from_ref(event)
                    };
                    if produced != logged {
                        return Err(mismatch(format!(
                            "line {line}: logged {logged:?}, replay produced {produced:?}"
                        )));
                    }
                }
                Event::Outcome {
                    value, simulated, ..
                } => {
                    s.absorb(if *simulated { None } else { Some(*value) })?;
                    let produced = s.events.last();
                    if produced != Some(event) {
                        return Err(mismatch(format!(
                            "line {line}: logged {event:?}, replay produced {produced:?}"
                        )));
                    }
                }
                Event::Halted { .. } => {
                    s.next_assignment(false)?;
                    let produced = s.events.last();
                    if produced != Some(event) {
                        return Err(mismatch(format!(
                            "line {line}: logged {event:?}, replay produced {produced:?}"
                        )));
                    }
                }
            }
        }
        Ok(s)
    }

    /// Reads a log file. A final line without a trailing newline (an
    /// interrupted write) is ignored.
    pub fn read_log(path: &Path) -> Result<Vec<Event>, SessionError> {
        let text = fs::read_to_string(path)?;
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        complete
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| SessionError::Replay(format!("line {}: {e}", i + 1)))
            })
            .collect()
    }

    /// Replays the log at `path` and reattaches it for further appends.
    pub fn open(path: &Path) -> Result<Self, SessionError> {
        let events = Self::read_log(path)?;
        let mut s = Self::replay(&events)?;
        let text = fs::read_to_string(path)?;
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            let file = OpenOptions::new().write(true).open(path)?;
            file.set_len(keep as u64)?;
        }
        s.sink = Some(OpenOptions::new().append(true).open(path)?);
        Ok(s)
    }
}

/// Sessions persisted under one directory, one `<id>.jsonl` log each.
///
/// Commands on one session are serialized by its mutex; distinct sessions
/// proceed independently.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    /// Opens `dir` (creating it if needed) and replays every log in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let s = Session::open(&path)
                .map_err(|e| SessionError::Replay(format!("{}: {e}", path.display())))?;
            sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
        }
        Ok(Self {
            dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    pub fn create(
        &self,
        config: ExperimentConfig,
        id: Option<String>,
        simulated: bool,
    ) -> Result<String, SessionError> {
        let id = id.unwrap_or_else(|| format!("{:032x}", rand::random::<u128>()));
        if !valid_id(&id) {
            return Err(SessionError::InvalidId(id));
        }
        let mut map = self.sessions.write().expect("session map poisoned");
        if map.contains_key(&id) {
            return Err(SessionError::DuplicateId(id));
        }
        let session = Session::create_at(&self.log_path(&id), &id, config, simulated)?;
        map.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    /// Runs `f` with exclusive access to one session.
    pub fn with<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let handle = self.get(id)?;
        let mut guard = handle.lock().expect("session poisoned");
        f(&mut guard)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("session map poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// The raw log lines of a session.
    pub fn log_lines(&self, id: &str) -> Result<Vec<String>, SessionError> {
        self.get(id)?;
        let file = File::open(self.log_path(id))?;
        BufReader::new(file)
            .lines()
            .map(|l| l.map_err(SessionError::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::SourcePrior;
    use crate::config::Environment;
    use crate::engine::{run_with_outcomes, Scripted};
    use crate::policy::PolicySpec;
    use crate::stopping::StoppingSpec;

    fn config(stopping: StoppingSpec) -> ExperimentConfig {
        ExperimentConfig {
            seed: 11,
            environment: Some(Environment::gaussian(vec![1.0, 1.3], vec![1.0, 1.0])),
            sources: vec![SourcePrior::new(vec![1.0, 1.3], vec![1.0, 1.0])],
            policy: PolicySpec::epsilon_greedy(0.2),
            stopping,
            payoff: None,
            snapshot_every: 1,
        }
    }

    #[test]
    fn pending_contract() {
        let mut s = Session::new("a", config(StoppingSpec::disabled(10)), false).unwrap();
        assert!(matches!(s.report_outcome(1.0), Err(SessionError::NoPendingAssignment)));
        s.next_assignment(false).unwrap();
        assert!(matches!(s.next_assignment(false), Err(SessionError::PendingAssignment)));
        assert!(matches!(s.report_outcome(f64::NAN), Err(SessionError::InvalidOutcome(_))));
        let st = s.report_outcome(0.5).unwrap();
        assert_eq!(st.t, 1);
        assert_eq!(st.series.len(), 1);
    }

    #[test]
    fn matches_engine_on_script() {
        let script: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() + 1.1).collect();
        let c = config(StoppingSpec::disabled(40));
        let mut s = Session::new("b", c.clone(), false).unwrap();
        for y in &script {
            s.next_assignment(false).unwrap();
            s.report_outcome(*y).unwrap();
        }
        let reply = s.next_assignment(false).unwrap();
        assert_eq!(reply.status, SessionStatus::HorizonForced);
        let run = run_with_outcomes(&c, RunStreams::single(c.seed), &mut Scripted::new(script)).unwrap();
        assert_eq!(&run.final_beliefs, s.experiment().bank());
        assert_eq!(run.chosen_arm, reply.decision.unwrap().chosen_arm);
    }

    #[test]
    fn replay_is_exact() {
        let mut s = Session::new("c", config(StoppingSpec::new(5, 60, 0.01)), true).unwrap();
        s.simulate(20).unwrap();
        s.next_assignment(false).unwrap();
        s.report_outcome(0.123456789).unwrap();
        s.simulate(100).unwrap();
        let text: Vec<String> = s.events().iter().map(|e| serde_json::to_string(e).unwrap()).collect();
        let parsed: Vec<Event> = text.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
        let r = Session::replay(&parsed).unwrap();
        assert_eq!(
            serde_json::to_string(&r.state()).unwrap(),
            serde_json::to_string(&s.state()).unwrap()
        );
        assert_eq!(r.events(), s.events());
    }

    #[test]
    fn tampered_log_is_rejected() {
        let mut s = Session::new("d", config(StoppingSpec::disabled(10)), false).unwrap();
        s.next_assignment(false).unwrap();
        s.report_outcome(1.0).unwrap();
        let mut events = s.events().to_vec();
        if let Event::Assignment { arm, .. } = &mut events[1] {
            *arm = 1 - *arm;
        }
        assert!(matches!(Session::replay(&events), Err(SessionError::Replay(_))));
    }

    #[test]
    fn store_persists_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(config(StoppingSpec::disabled(30)), Some("trial-1".into()), true).unwrap();
        assert!(matches!(
            store.create(config(StoppingSpec::disabled(30)), Some("trial-1".into()), true),
            Err(SessionError::DuplicateId(_))
        ));
        let live = store.with(&id, |s| s.simulate(12)).unwrap();
        drop(store);
        let again = SessionStore::open(dir.path()).unwrap();
        let back = again.with(&id, |s| Ok(s.state())).unwrap();
        assert_eq!(back, live);
        assert!(matches!(again.get("nope"), Err(SessionError::NotFound(_))));
    }

    #[test]
    fn torn_final_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let mut s = Session::create_at(&path, "x", config(StoppingSpec::disabled(30)), true).unwrap();
        s.simulate(3).unwrap();
        let expect = s.state();
        drop(s);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"assignm").unwrap();
        drop(f);
        let mut s = Session::open(&path).unwrap();
        assert_eq!(s.state(), expect);
        s.simulate(1).unwrap();
        assert_eq!(Session::open(&path).unwrap().state(), s.state());
    }

    #[test]
    fn stop_override_and_halt() {
        let mut stopping = StoppingSpec::new(5, 100, 0.01);
        stopping.gamma_override = Some(crate::stopping::GammaOverride::Constant(1e-9));
        let mut c = config(stopping);
        c.sources = vec![SourcePrior::new(vec![0.0, 3.0], vec![50.0, 50.0])];
        let mut s = Session::new("e", c, false).unwrap();
        for _ in 0..5 {
            let r = s.next_assignment(false).unwrap();
            assert!(r.stop_recommendation.is_none());
            s.report_outcome(1.0).unwrap();
        }
        assert!(s.state().stop_preview.unwrap().stop);
        let r = s.next_assignment(true).unwrap();
        assert!(r.arm.is_some() && r.stop_recommendation.unwrap().stop);
        assert!(matches!(s.events()[s.events().len() - 2], Event::Override { stage: 6, .. }));
        s.report_outcome(1.0).unwrap();
        let r = s.next_assignment(false).unwrap();
        assert_eq!(r.status, SessionStatus::Stopped);
        let fin = r.decision.unwrap();
        assert_eq!((fin.stop_time, fin.chosen_arm, fin.forced), (6, 1, false));
        assert!(matches!(s.report_outcome(1.0), Err(SessionError::SessionStopped)));
        let st = s.state();
        assert_eq!(st.decision, Some(fin));
        let r = Session::replay(s.events()).unwrap();
        assert_eq!(r.state(), st);
    }
}

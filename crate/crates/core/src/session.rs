//! Teaching sessions following the six-phase study protocol.
//!
//! | phase | skill | guided          |
//! |-------|-------|-----------------|
//! | P1    | S1    | no              |
//! | P2    | S2    | no              |
//! | P3    | S1    | target group    |
//! | P4    | S2    | no              |
//! | P5    | S1    | no              |
//! | P6    | S2    | no              |
//!
//! A participant may preview via points any number of times; only the guided
//! phase reveals the teaching score. Each phase takes exactly one commit.
//! Every state change is appended to a JSON-lines event log from which the
//! sessions can be rebuilt.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{PendulumParams, State};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_against, RMSE_CAP};
use crate::experiments::{PhaseRecord, StudyRecord};
use crate::learner::{build_feature_matrix, feature_map, ridge_fit, ActionVector, SkillParams};
use crate::rng;
use crate::skills::{reference_trajectory, SkillId};
use crate::teaching::{noisy_action, score_states, NoiseModel};

pub const PHASES: u8 = 6;
pub const COMMIT_SIGMA: f64 = 0.1;
pub const COMMIT_LAMBDA: f64 = 1e-6;
const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Target,
    Control,
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "target" => Ok(Group::Target),
            "control" => Ok(Group::Control),
            other => Err(Error::Domain(format!("unknown group `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub index: u8,
    pub skill: SkillId,
    pub guided: bool,
}

impl PhaseSpec {
    /// Protocol entry for phase `index` (1-based).
    pub fn new(index: u8, group: Group) -> Result<Self> {
        if !(1..=PHASES).contains(&index) {
            return Err(Error::Domain(format!("phase index {index} outside 1..=6")));
        }
        let skill = if index % 2 == 1 {
            SkillId::S1
        } else {
            SkillId::S2
        };
        Ok(Self {
            index,
            skill,
            guided: index == 3 && group == Group::Target,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Complete,
}

/// Two via points chosen by the participant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViaPointPair {
    pub points: [State; 2],
}

impl ViaPointPair {
    pub fn new(a: State, b: State) -> Self {
        Self { points: [a, b] }
    }

    /// One message per point that is not finite or whose feature vector leaves the unit disc.
    pub fn problems(&self) -> Vec<String> {
        self.points
            .iter()
            .enumerate()
            .filter_map(|(i, x)| {
                if !x.is_finite() {
                    return Some(format!("point {}: angle and velocity must be finite", i + 1));
                }
                let norm = feature_map(*x).norm();
                (norm > 1.0 + NORM_TOLERANCE).then(|| {
                    format!(
                        "point {}: feature norm {:.4} exceeds 1 (sin²(angle) + velocity² must not exceed 1)",
                        i + 1,
                        norm
                    )
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewOutcome {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// Everything recorded when a phase is committed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommittedPhase {
    pub phase: u8,
    pub skill: SkillId,
    pub points: [State; 2],
    pub actions: ActionVector,
    pub w_hat: SkillParams,
    pub det_phi: f64,
    pub score: f64,
    /// Capped at [`RMSE_CAP`] when the learnt controller diverges.
    pub rmse: f64,
    pub l2: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitOutcome {
    pub result: CommittedPhase,
    pub next_phase: Option<PhaseSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub group: Group,
    /// Seeds the per-phase noise streams of commits.
    pub seed: u64,
    pub noise_sigma: f64,
    pub committed: Vec<CommittedPhase>,
}

impl Session {
    pub fn new(id: impl Into<String>, group: Group, seed: u64, noise_sigma: f64) -> Self {
        Self {
            id: id.into(),
            group,
            seed,
            noise_sigma,
            committed: Vec::new(),
        }
    }

    pub fn status(&self) -> Status {
        if self.committed.len() >= PHASES as usize {
            Status::Complete
        } else {
            Status::Active
        }
    }

    /// 1-based index of the phase awaiting a commit, `None` once complete.
    pub fn phase_index(&self) -> Option<u8> {
        (self.status() == Status::Active).then(|| self.committed.len() as u8 + 1)
    }

    pub fn current_phase(&self) -> Option<PhaseSpec> {
        self.phase_index()
            .map(|i| PhaseSpec::new(i, self.group).expect("index within protocol"))
    }

    fn active_phase(&self) -> Result<PhaseSpec> {
        self.current_phase()
            .ok_or_else(|| Error::SessionComplete(self.id.clone()))
    }

    /// Validates the points and, in the guided phase, scores them. Never mutates.
    pub fn preview(&self, points: &ViaPointPair) -> Result<PreviewOutcome> {
        let phase = self.active_phase()?;
        let errors = points.problems();
        if !errors.is_empty() {
            return Ok(PreviewOutcome {
                valid: false,
                score: None,
                errors,
            });
        }
        Ok(PreviewOutcome {
            valid: true,
            score: phase.guided.then(|| score_states(points.points)),
            errors,
        })
    }

    /// Teaches the current phase's skill from `points` and advances the protocol.
    pub fn commit<R: Rng + ?Sized>(
        &mut self,
        points: &ViaPointPair,
        rng: &mut R,
        pendulum: &PendulumParams,
    ) -> Result<CommitOutcome> {
        let phase = self.active_phase()?;
        let errors = points.problems();
        if !errors.is_empty() {
            return Err(Error::InvalidPoints(errors));
        }
        let spec = phase.skill.spec();
        let noise = NoiseModel::new(self.noise_sigma)?;
        let actions = ActionVector::new(
            noisy_action(&spec.w_star, points.points[0], &noise, rng),
            noisy_action(&spec.w_star, points.points[1], &noise, rng),
        );
        let phi = build_feature_matrix(points.points);
        let w_hat = ridge_fit(&phi, &actions, COMMIT_LAMBDA)?;
        let reference = reference_trajectory(&spec, pendulum)?;
        let eval = evaluate_against(&w_hat, &spec.w_star, &reference, pendulum)?;
        let result = CommittedPhase {
            phase: phase.index,
            skill: phase.skill,
            points: points.points,
            actions,
            w_hat,
            det_phi: phi.det().abs(),
            score: score_states(points.points),
            rmse: eval.rmse.min(RMSE_CAP),
            l2: eval.l2,
            diverged: eval.diverged,
        };
        self.apply_commit(result)?;
        Ok(CommitOutcome {
            result,
            next_phase: self.current_phase(),
        })
    }

    fn apply_commit(&mut self, result: CommittedPhase) -> Result<()> {
        let phase = self.active_phase()?;
        if result.phase != phase.index {
            return Err(Error::Domain(format!(
                "commit for phase {} but session is at phase {}",
                result.phase, phase.index
            )));
        }
        self.committed.push(result);
        Ok(())
    }

    /// Per-phase metrics of the committed phases, in phase order.
    pub fn report(&self) -> StudyRecord {
        StudyRecord {
            participant: self.id.clone(),
            group: self.group,
            phases: self
                .committed
                .iter()
                .map(|c| PhaseRecord {
                    phase: c.phase,
                    skill: c.skill,
                    det_phi: c.det_phi,
                    score: c.score,
                    rmse: c.rmse,
                    l2: c.l2,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Created,
    Preview,
    Commit,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub ts: u64,
    pub session: String,
    pub event: EventKind,
    pub payload: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct CreatedPayload {
    group: Group,
    seed: u64,
    noise_sigma: f64,
}

fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Rebuilds sessions from a JSON-lines event log, in creation order.
pub fn replay_log<R: BufRead>(reader: R) -> Result<Vec<Session>> {
    let mut order: Vec<String> = Vec::new();
    let mut sessions: HashMap<String, Session> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Log {
            line: line_no,
            message,
        };
        let event: Event = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        match event.event {
            EventKind::Created => {
                let p: CreatedPayload =
                    serde_json::from_value(event.payload).map_err(|e| bad(e.to_string()))?;
                if sessions.contains_key(&event.session) {
                    return Err(bad(format!("session `{}` created twice", event.session)));
                }
                order.push(event.session.clone());
                sessions.insert(
                    event.session.clone(),
                    Session::new(event.session, p.group, p.seed, p.noise_sigma),
                );
            }
            EventKind::Preview => {
                if !sessions.contains_key(&event.session) {
                    return Err(bad(format!(
                        "preview for unknown session `{}`",
                        event.session
                    )));
                }
            }
            EventKind::Commit => {
                let result: CommittedPhase =
                    serde_json::from_value(event.payload).map_err(|e| bad(e.to_string()))?;
                let session = sessions.get_mut(&event.session).ok_or_else(|| {
                    bad(format!("commit for unknown session `{}`", event.session))
                })?;
                session
                    .apply_commit(result)
                    .map_err(|e| bad(e.to_string()))?;
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| sessions.remove(&id).expect("created sessions are tracked"))
        .collect())
}

/// Append-only JSON-lines sink; each event is written with a single `write_all`.
pub struct EventLog {
    sink: Mutex<Box<dyn Write + Send>>,
}

impl EventLog {
    pub fn new<W: Write + Send + 'static>(sink: W) -> Self {
        Self {
            sink: Mutex::new(Box::new(sink)),
        }
    }

    pub fn discard() -> Self {
        Self::new(std::io::sink())
    }

    pub fn append(&self, event: &Event) -> Result<()> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        let mut sink = self.sink.lock().expect("event log poisoned");
        sink.write_all(line.as_bytes())?;
        sink.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assignment {
    /// Group must come with each create request.
    Caller,
    /// Unassigned creates draw the group from the seeded store stream.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreConfig {
    pub seed: u64,
    pub noise_sigma: f64,
    pub assignment: Assignment,
    pub pendulum: PendulumParams,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_sigma: COMMIT_SIGMA,
            assignment: Assignment::Random,
            pendulum: PendulumParams::default(),
        }
    }
}

/// Concurrent session registry; each session is mutated under its own lock.
pub struct SessionStore {
    config: StoreConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    created: Mutex<u64>,
    log: EventLog,
}

impl SessionStore {
    pub fn new(config: StoreConfig, log: EventLog) -> Self {
        Self {
            config,
            sessions: RwLock::default(),
            created: Mutex::new(0),
            log,
        }
    }

    /// Restores sessions from a previous log; new events go to `log`.
    pub fn with_sessions(config: StoreConfig, log: EventLog, sessions: Vec<Session>) -> Self {
        let store = Self::new(config, log);
        *store.created.lock().expect("counter poisoned") = sessions.len() as u64;
        let mut map = store.sessions.write().expect("store poisoned");
        for s in sessions {
            map.insert(s.id.clone(), Arc::new(Mutex::new(s)));
        }
        drop(map);
        store
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn record(&self, session: &str, event: EventKind, payload: Value) -> Result<()> {
        self.log.append(&Event {
            ts: now_millis(),
            session: session.to_string(),
            event,
            payload,
        })
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("store poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }

    pub fn create_session(&self, group: Option<Group>) -> Result<Session> {
        let ordinal = {
            let mut n = self.created.lock().expect("counter poisoned");
            *n += 1;
            *n
        };
        let group = match (group, self.config.assignment) {
            (Some(g), _) => g,
            (None, Assignment::Random) => {
                if rng::derive(self.config.seed, &[ordinal, 0]).random::<bool>() {
                    Group::Target
                } else {
                    Group::Control
                }
            }
            (None, Assignment::Caller) => {
                return Err(Error::Domain("group is required".into()));
            }
        };
        let seed = rng::derive(self.config.seed, &[ordinal, 1]).random::<u64>();
        let session = Session::new(
            uuid::Uuid::new_v4().simple().to_string(),
            group,
            seed,
            self.config.noise_sigma,
        );
        self.record(
            &session.id,
            EventKind::Created,
            serde_json::to_value(CreatedPayload {
                group,
                seed,
                noise_sigma: session.noise_sigma,
            })
            .expect("payload serializes"),
        )?;
        self.sessions
            .write()
            .expect("store poisoned")
            .insert(session.id.clone(), Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Session> {
        Ok(self.handle(id)?.lock().expect("session poisoned").clone())
    }

    pub fn preview(&self, id: &str, points: &ViaPointPair) -> Result<PreviewOutcome> {
        let handle = self.handle(id)?;
        let session = handle.lock().expect("session poisoned");
        let outcome = session.preview(points)?;
        self.record(
            id,
            EventKind::Preview,
            json!({ "phase": session.phase_index(), "points": points.points, "outcome": outcome }),
        )?;
        Ok(outcome)
    }

    pub fn commit(&self, id: &str, points: &ViaPointPair) -> Result<CommitOutcome> {
        let handle = self.handle(id)?;
        let mut session = handle.lock().expect("session poisoned");
        let phase = session.phase_index().unwrap_or(PHASES + 1);
        let mut stream = rng::derive(session.seed, &[phase as u64]);
        let outcome = session.commit(points, &mut stream, &self.config.pendulum)?;
        if let Err(e) = self.record(
            id,
            EventKind::Commit,
            serde_json::to_value(outcome.result).expect("payload serializes"),
        ) {
            // keep memory consistent with the log
            session.committed.pop();
            return Err(e);
        }
        Ok(outcome)
    }

    pub fn report(&self, id: &str) -> Result<StudyRecord> {
        Ok(self.handle(id)?.lock().expect("session poisoned").report())
    }

    /// Snapshot of all sessions, ordered by id.
    pub fn sessions(&self) -> Vec<Session> {
        let map = self.sessions.read().expect("store poisoned");
        let mut all: Vec<Session> = map
            .values()
            .map(|s| s.lock().expect("session poisoned").clone())
            .collect();
        all.sort_by(|a, b| a.id.cmp(&b.id));
        all
    }
}

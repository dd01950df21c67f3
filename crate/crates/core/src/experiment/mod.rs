//! The lab session: eight procedures, seven rounds each, the subject as
//! agent 0 against truthful automata.

mod batch;
mod metrics;
mod session;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures::lab_profile_file;
use crate::procedure::{ActionError, ProcedureId, RunError};
use crate::profile::{Mode, Profile, ProfileError, ProfileFile};
use crate::strategy::StrategyError;

pub use batch::{
    random_profile, simulate_batch, BatchConfig, BatchOutput, PolicyKind, ProfileChoice, RandomCuts,
};
pub use metrics::{metrics, Metric, MetricRow, MetricsReport, Tolerances};
pub use session::{
    payment_pence, OpponentShare, Outcome, PaidRound, Payment, RoundResult, Session, SessionView,
};
pub use trace::{ActionRecord, SessionHeader, SessionRecord, TraceLine, TraceStore};

/// The subject's agent index in every profile.
pub const SUBJECT: usize = 0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("profile for {procedure}: {source}")]
    Profile {
        procedure: ProcedureId,
        #[source]
        source: ProfileError,
    },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("cut {at} is off the value grid")]
    OffGrid { at: u32 },
    #[error("the session is complete")]
    Finished,
    #[error("the session is not complete")]
    Incomplete,
    #[error("trace {session} line {line}: {message}")]
    Trace {
        session: String,
        line: usize,
        message: String,
    },
    #[error("session id {0:?} must be 1-64 characters of [A-Za-z0-9_-]")]
    BadId(String),
    #[error("session {0} already exists")]
    Exists(String),
    #[error("no session {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub order: Vec<ProcedureId>,
    pub rounds: u32,
    /// First round in which the automata's valuations are shown.
    pub reveal_round: u32,
    pub time_limit_ms: u64,
    pub enforce_time_limit: bool,
    /// Only accept subject cuts at the minimal boundary of each whole-point
    /// value of the subject's own valuation.
    pub coarse_grid: bool,
    /// Overrides; procedures not listed use the lab fixtures.
    pub profiles: BTreeMap<ProcedureId, ProfileFile>,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            order: ProcedureId::ALL.to_vec(),
            rounds: 7,
            reveal_round: 6,
            time_limit_ms: 420_000,
            enforce_time_limit: false,
            coarse_grid: false,
            profiles: BTreeMap::new(),
            seed: 0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.order.is_empty() {
            return Err(ExperimentError::Config("procedure order is empty".into()));
        }
        if self.rounds == 0 {
            return Err(ExperimentError::Config("rounds must be at least 1".into()));
        }
        if self.reveal_round == 0 || self.reveal_round > self.rounds + 1 {
            return Err(ExperimentError::Config(format!(
                "reveal round {} must lie in 1..={}",
                self.reveal_round,
                self.rounds + 1
            )));
        }
        for id in self.order.iter() {
            self.profile(*id)?;
        }
        Ok(())
    }

    pub fn total_rounds(&self) -> usize {
        self.order.len() * self.rounds as usize
    }

    pub fn profile_file(&self, id: ProcedureId) -> ProfileFile {
        self.profiles
            .get(&id)
            .cloned()
            .unwrap_or_else(|| lab_profile_file(id))
    }

    pub fn profile(&self, id: ProcedureId) -> Result<Profile, ExperimentError> {
        let file = self.profile_file(id);
        let profile = Profile::from_file(&file, Mode::General).map_err(|source| {
            ExperimentError::Profile {
                procedure: id,
                source,
            }
        })?;
        if profile.len() != id.agents() {
            return Err(ExperimentError::Config(format!(
                "{id} needs {} agents, profile has {}",
                id.agents(),
                profile.len()
            )));
        }
        Ok(profile)
    }
}

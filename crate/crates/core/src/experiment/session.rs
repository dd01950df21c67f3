use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trace::{check_id, subject_view};
use super::{ExperimentError, SessionConfig, SessionHeader, TraceLine, SUBJECT};
use crate::cake::{Allocation, Cake, Piece, Points};
use crate::procedure::{
    truthful_action, Action, ProcedureId, ProtocolState, Query, RoundTrace, Step,
};
use crate::profile::Profile;
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpponentShare {
    pub agent: usize,
    pub piece: Piece,
    /// Valued by the subject.
    pub value: Points,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundResult {
    pub procedure: ProcedureId,
    pub procedure_index: usize,
    pub round: u32,
    pub points: Points,
    pub opponents: Vec<OpponentShare>,
    pub allocation: Vec<(u32, u32, usize)>,
    pub timed_out: bool,
}

impl RoundResult {
    fn from_line(line: &TraceLine, procedure_index: usize, cake: Cake) -> Self {
        let n = line.procedure.agents();
        let pieces = if line.timed_out {
            vec![Piece::empty(); n]
        } else {
            Allocation::from_segments(cake, n, &line.allocation)
                .map(|a| a.pieces().to_vec())
                .unwrap_or_else(|_| vec![Piece::empty(); n])
        };
        let view = |j: usize| line.subject_view_of_pieces.get(j).copied().unwrap_or(0);
        RoundResult {
            procedure: line.procedure,
            procedure_index,
            round: line.round,
            points: if line.timed_out { 0 } else { view(SUBJECT) },
            opponents: pieces
                .into_iter()
                .enumerate()
                .filter(|(j, _)| *j != SUBJECT)
                .map(|(agent, piece)| OpponentShare {
                    agent,
                    piece,
                    value: view(agent),
                })
                .collect(),
            allocation: line.allocation.clone(),
            timed_out: line.timed_out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    NextQuery {
        query: Query,
    },
    RoundResult {
        result: RoundResult,
    },
    ProcedureDone {
        result: RoundResult,
    },
    SessionDone {
        result: RoundResult,
    },
    TimedOut {
        zeroed: Vec<RoundResult>,
        session_done: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaidRound {
    pub procedure: ProcedureId,
    pub round: u32,
    pub points: Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payment {
    pub rounds: Vec<PaidRound>,
    pub pence: u64,
    pub pounds: f64,
}

/// £5 plus a tenth of a pound per point of the two paid rounds.
pub fn payment_pence(a: Points, b: Points) -> u64 {
    500 + 10 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub subject: String,
    pub cake_pixels: u32,
    pub procedure: Option<ProcedureId>,
    pub display_name: Option<String>,
    pub instructions: Option<String>,
    pub procedure_index: usize,
    pub procedures: usize,
    pub round: u32,
    pub rounds: u32,
    pub revealed: bool,
    pub pending: Option<Query>,
    pub own_desired: Vec<(u32, u32)>,
    /// Present only from the reveal round on.
    pub opponents_desired: Option<Vec<Vec<(u32, u32)>>>,
    pub history: Vec<RoundResult>,
    pub remaining_ms: Option<u64>,
    pub done: bool,
}

/// One subject's run through the configured procedures. Automata answer
/// their own queries as soon as they are asked.
#[derive(Debug, Clone)]
pub struct Session {
    header: SessionHeader,
    profiles: Vec<Profile>,
    proc_idx: usize,
    round: u32,
    state: ProtocolState,
    steps: Vec<Step>,
    round_start_ms: Option<u64>,
    /// Clock time used by finished rounds of the current procedure.
    used_ms: u64,
    lines: Vec<TraceLine>,
    results: Vec<RoundResult>,
    saved: usize,
}

impl Session {
    pub fn new(
        id: &str,
        subject: &str,
        config: SessionConfig,
        created_ms: u64,
    ) -> Result<Self, ExperimentError> {
        Session::from_header(SessionHeader {
            id: id.to_string(),
            subject: subject.to_string(),
            created_ms,
            config,
        })
    }

    pub fn from_header(header: SessionHeader) -> Result<Self, ExperimentError> {
        check_id(&header.id)?;
        header.config.validate()?;
        let profiles = header
            .config
            .order
            .iter()
            .map(|id| header.config.profile(*id))
            .collect::<Result<Vec<_>, _>>()?;
        let first = header.config.order[0];
        let state = ProtocolState::new(first, profiles[0].cake());
        let mut session = Session {
            header,
            profiles,
            proc_idx: 0,
            round: 1,
            state,
            steps: Vec::new(),
            round_start_ms: None,
            used_ms: 0,
            lines: Vec::new(),
            results: Vec::new(),
            saved: 0,
        };
        session.answer_automata(0);
        Ok(session)
    }

    /// Rebuilds a session from its persisted lines. A round in progress at
    /// the time of the crash starts over.
    pub fn restore(header: SessionHeader, lines: Vec<TraceLine>) -> Result<Self, ExperimentError> {
        let mut s = Session::from_header(header)?;
        for (i, line) in lines.into_iter().enumerate() {
            let bad = |message: String| ExperimentError::Trace {
                session: s.header.id.clone(),
                line: i + 1,
                message,
            };
            let Some(id) = s.current_procedure() else {
                return Err(bad("line after the last round".into()));
            };
            if line.procedure != id || line.round != s.round {
                return Err(bad(format!(
                    "expected {id} round {}, found {} round {}",
                    s.round, line.procedure, line.round
                )));
            }
            if !line.timed_out {
                let profile = &s.profiles[s.proc_idx];
                let mut state = ProtocolState::new(id, profile.cake());
                for a in &line.actions {
                    match state.pending() {
                        Some(q) if q.agent == a.actor => {}
                        _ => return Err(bad(format!("unexpected action by agent {}", a.actor))),
                    }
                    state
                        .apply(&a.value)
                        .map_err(|e| bad(format!("agent {}: {e}", a.actor)))?;
                }
                let allocation = state
                    .allocation(profile.cake())
                    .ok_or_else(|| bad("round is incomplete".into()))?
                    .map_err(|e| bad(e.to_string()))?;
                if allocation.segments() != line.allocation {
                    return Err(bad("allocation does not match the actions".into()));
                }
                s.used_ms += line.duration_ms();
            }
            s.results.push(RoundResult::from_line(
                &line,
                s.proc_idx,
                s.profiles[s.proc_idx].cake(),
            ));
            s.lines.push(line);
            s.next_round();
        }
        s.saved = s.lines.len();
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.header.id
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn config(&self) -> &SessionConfig {
        &self.header.config
    }

    pub fn lines(&self) -> &[TraceLine] {
        &self.lines
    }

    pub fn results(&self) -> &[RoundResult] {
        &self.results
    }

    pub fn is_done(&self) -> bool {
        self.proc_idx >= self.profiles.len()
    }

    pub fn current_procedure(&self) -> Option<ProcedureId> {
        self.header.config.order.get(self.proc_idx).copied()
    }

    pub fn procedure_index(&self) -> usize {
        self.proc_idx
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn profile(&self, index: usize) -> &Profile {
        &self.profiles[index]
    }

    /// The subject's pending query, if any.
    pub fn pending(&self) -> Option<Query> {
        if self.is_done() {
            None
        } else {
            self.state.pending()
        }
    }

    /// Lines finished since the last call, for persisting.
    pub fn take_new_lines(&mut self) -> Vec<TraceLine> {
        let new = self.lines[self.saved..].to_vec();
        self.saved = self.lines.len();
        new
    }

    fn subject_valuation(&self) -> &Valuation {
        self.profiles[self.proc_idx].agent(SUBJECT)
    }

    fn answer_automata(&mut self, t_ms: u64) {
        let profile = &self.profiles[self.proc_idx];
        while let Some(q) = self.state.pending() {
            if q.agent == SUBJECT {
                break;
            }
            let action = truthful_action(&q, profile.agent(q.agent));
            self.state
                .apply(&action)
                .expect("truthful answers are always legal");
            self.steps.push(Step {
                actor: q.agent,
                query: q,
                action,
                t_ms,
            });
        }
    }

    /// Starts the round clock; the clock is stopped between rounds.
    pub fn start_round(&mut self, now_ms: u64) {
        if !self.is_done() && self.round_start_ms.is_none() {
            self.round_start_ms = Some(now_ms);
        }
    }

    fn elapsed_ms(&self, now_ms: u64) -> u64 {
        self.used_ms + self.round_start_ms.map_or(0, |s| now_ms.saturating_sub(s))
    }

    pub fn remaining_ms(&self, now_ms: u64) -> Option<u64> {
        let c = &self.header.config;
        (c.enforce_time_limit && !self.is_done())
            .then(|| c.time_limit_ms.saturating_sub(self.elapsed_ms(now_ms)))
    }

    fn revealed(&self) -> bool {
        self.round >= self.header.config.reveal_round
    }

    fn on_grid(&self, x: u32, range: (u32, u32)) -> bool {
        let v = self.subject_valuation();
        x == range.0 || x == range.1 || v.cut_point(0, v.range(0, x)).ok() == Some(x)
    }

    fn check_grid(&self, query: &Query, action: &Action) -> Result<(), ExperimentError> {
        if !self.header.config.coarse_grid {
            return Ok(());
        }
        let positions: Vec<u32> = match action {
            Action::Cut { at } => at.clone(),
            Action::Diminish { at } | Action::Trim { at, .. } => vec![*at],
            _ => Vec::new(),
        };
        match positions
            .into_iter()
            .find(|&x| !self.on_grid(x, query.remaining))
        {
            Some(at) => Err(ExperimentError::OffGrid { at }),
            None => Ok(()),
        }
    }

    /// Answers the subject's pending query at wall-clock time `now_ms`.
    pub fn submit(&mut self, action: &Action, now_ms: u64) -> Result<Outcome, ExperimentError> {
        if self.is_done() {
            return Err(ExperimentError::Finished);
        }
        self.start_round(now_ms);
        if let Some(outcome) = self.expire(now_ms) {
            return Ok(outcome);
        }
        let query = self
            .state
            .pending()
            .expect("an unfinished round always has a subject query");
        self.check_grid(&query, action)?;
        let mut next = self.state.clone();
        next.apply(action)?;
        self.state = next;
        let t_ms = now_ms.saturating_sub(self.round_start_ms.unwrap_or(now_ms));
        self.steps.push(Step {
            actor: SUBJECT,
            query,
            action: action.clone(),
            t_ms,
        });
        self.answer_automata(t_ms);
        if !self.state.is_done() {
            let query = self.state.pending().expect("unfinished round has a query");
            return Ok(Outcome::NextQuery { query });
        }
        let result = self.finish_round(t_ms)?;
        let last_round = self.round == self.header.config.rounds;
        self.next_round();
        Ok(if self.is_done() {
            Outcome::SessionDone { result }
        } else if last_round {
            Outcome::ProcedureDone { result }
        } else {
            Outcome::RoundResult { result }
        })
    }

    /// Zeroes the rest of the current procedure once its time is used up.
    pub fn expire(&mut self, now_ms: u64) -> Option<Outcome> {
        let c = &self.header.config;
        if !c.enforce_time_limit || self.is_done() || self.elapsed_ms(now_ms) <= c.time_limit_ms {
            return None;
        }
        let id = self.current_procedure()?;
        let mut zeroed = Vec::new();
        let proc_idx = self.proc_idx;
        while self.proc_idx == proc_idx {
            let line = TraceLine {
                session: self.header.id.clone(),
                subject: self.header.subject.clone(),
                procedure: id,
                round: self.round,
                revealed: self.revealed(),
                actions: self.steps.iter().map(Into::into).collect(),
                allocation: Vec::new(),
                points: vec![0; id.agents()],
                subject_view_of_pieces: vec![0; id.agents()],
                timed_out: true,
            };
            let result = RoundResult::from_line(&line, proc_idx, self.profiles[proc_idx].cake());
            self.lines.push(line);
            self.results.push(result.clone());
            zeroed.push(result);
            self.next_round();
        }
        Some(Outcome::TimedOut {
            zeroed,
            session_done: self.is_done(),
        })
    }

    fn finish_round(&mut self, t_ms: u64) -> Result<RoundResult, ExperimentError> {
        let id = self.current_procedure().expect("session not done");
        let profile = &self.profiles[self.proc_idx];
        let allocation = self
            .state
            .allocation(profile.cake())
            .expect("state is done")
            .map_err(crate::procedure::RunError::Cake)?;
        let points = profile
            .agents()
            .iter()
            .zip(allocation.pieces())
            .map(|(v, p)| v.value_of(p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(crate::procedure::RunError::Cake)?;
        let trace = RoundTrace {
            procedure: id,
            steps: std::mem::take(&mut self.steps),
            allocation,
            points,
        };
        let line = TraceLine::from_round(
            &self.header.id,
            &self.header.subject,
            self.round,
            self.revealed(),
            &trace,
            profile.agent(SUBJECT),
        );
        debug_assert_eq!(
            line.subject_view_of_pieces,
            subject_view(profile.agent(SUBJECT), &trace.allocation)
        );
        let result = RoundResult::from_line(&line, self.proc_idx, profile.cake());
        self.lines.push(line);
        self.results.push(result.clone());
        self.used_ms += t_ms;
        Ok(result)
    }

    fn next_round(&mut self) {
        self.round += 1;
        if self.round > self.header.config.rounds {
            self.proc_idx += 1;
            self.round = 1;
            self.used_ms = 0;
        }
        self.steps.clear();
        self.round_start_ms = None;
        if let Some(id) = self.current_procedure() {
            self.state = ProtocolState::new(id, self.profiles[self.proc_idx].cake());
            self.answer_automata(0);
        }
    }

    pub fn view(&self, now_ms: u64) -> SessionView {
        let procedure = self.current_procedure();
        let (own_desired, opponents_desired, cake_pixels) = match procedure {
            Some(_) => {
                let profile = &self.profiles[self.proc_idx];
                let opponents = self.revealed().then(|| {
                    profile.agents()[SUBJECT + 1..]
                        .iter()
                        .map(|v| v.desired_intervals())
                        .collect()
                });
                (
                    profile.agent(SUBJECT).desired_intervals(),
                    opponents,
                    profile.cake().width(),
                )
            }
            None => (Vec::new(), None, self.profiles[0].cake().width()),
        };
        SessionView {
            id: self.header.id.clone(),
            subject: self.header.subject.clone(),
            cake_pixels,
            procedure,
            display_name: procedure.map(|p| p.display_name().to_string()),
            instructions: procedure.map(|p| p.instructions().to_string()),
            procedure_index: self.proc_idx,
            procedures: self.profiles.len(),
            round: self.round,
            rounds: self.header.config.rounds,
            revealed: procedure.is_some() && self.revealed(),
            pending: self.pending(),
            own_desired,
            opponents_desired,
            history: self.results.clone(),
            remaining_ms: self.remaining_ms(now_ms),
            done: self.is_done(),
        }
    }

    /// Payment drawn with the session's own seed.
    pub fn payment(&self) -> Result<Payment, ExperimentError> {
        self.payment_with(&mut ChaCha8Rng::seed_from_u64(self.header.config.seed))
    }

    /// Two distinct rounds drawn uniformly from the whole session.
    pub fn payment_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Payment, ExperimentError> {
        if !self.is_done() {
            return Err(ExperimentError::Incomplete);
        }
        if self.results.len() < 2 {
            return Err(ExperimentError::Config(
                "payment needs at least two rounds".into(),
            ));
        }
        let rounds: Vec<PaidRound> = sample(rng, self.results.len(), 2)
            .into_iter()
            .map(|i| {
                let r = &self.results[i];
                PaidRound {
                    procedure: r.procedure,
                    round: r.round,
                    points: r.points,
                }
            })
            .collect();
        let pence = payment_pence(rounds[0].points, rounds[1].points);
        Ok(Payment {
            rounds,
            pence,
            pounds: pence as f64 / 100.0,
        })
    }
}

//! Division procedures as query-driven state machines.
//!
//! A [`ProtocolState`] never looks at valuations. It emits a [`Query`] for one
//! agent at a time, and the agent's [`Policy`] answers with an [`Action`].
//! [`run`] drives a state to completion and records a [`RoundTrace`].

mod acc;
mod ds;
mod ep;
mod ld;
mod policy;
mod sc;
mod scc;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cake::{Allocation, Cake, CakeError, Piece, Points};
use crate::profile::Profile;
use crate::valuation::Valuation;

pub use policy::{truthful_action, Policy, Scripted, Truthful};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProcedureId {
    Acc2,
    Scc2,
    Ds3,
    Ds4,
    Ld3,
    Ld4,
    Ep4,
    Sc3,
}

impl ProcedureId {
    /// Lab order.
    pub const ALL: [ProcedureId; 8] = [
        ProcedureId::Acc2,
        ProcedureId::Scc2,
        ProcedureId::Ds3,
        ProcedureId::Ds4,
        ProcedureId::Ld3,
        ProcedureId::Ld4,
        ProcedureId::Ep4,
        ProcedureId::Sc3,
    ];

    pub fn agents(self) -> usize {
        match self {
            ProcedureId::Acc2 | ProcedureId::Scc2 => 2,
            ProcedureId::Ds3 | ProcedureId::Ld3 | ProcedureId::Sc3 => 3,
            ProcedureId::Ds4 | ProcedureId::Ld4 | ProcedureId::Ep4 => 4,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            ProcedureId::Acc2 => "2ACC",
            ProcedureId::Scc2 => "2SCC",
            ProcedureId::Ds3 => "3DS",
            ProcedureId::Ds4 => "4DS",
            ProcedureId::Ld3 => "3LD",
            ProcedureId::Ld4 => "4LD",
            ProcedureId::Ep4 => "4EP",
            ProcedureId::Sc3 => "3SC",
        }
    }

    /// Name shown to subjects.
    pub fn display_name(self) -> &'static str {
        match self {
            ProcedureId::Acc2 => "I Cut You Choose",
            ProcedureId::Scc2 => "Cut Middle",
            ProcedureId::Ds3 | ProcedureId::Ds4 => "Leftmost Leaves",
            ProcedureId::Ld3 | ProcedureId::Ld4 => "Last Challenger",
            ProcedureId::Ep4 => "Super Fast",
            ProcedureId::Sc3 => "Super Fair",
        }
    }

    /// Short how-to shown before the first round.
    pub fn instructions(self) -> &'static str {
        match self {
            ProcedureId::Acc2 => {
                "Place one knife. The computer player takes whichever side it prefers and you keep the other. Cutting where both sides are worth 60 to you secures 60 points."
            }
            ProcedureId::Scc2 => {
                "You and the computer player each place a knife. The cake is split halfway between the two knives; whoever cut further left gets the left part. Cutting where both sides are worth 60 to you secures 60 points."
            }
            ProcedureId::Ds3 | ProcedureId::Ds4 => {
                "In every stage each remaining player places a knife. The player with the leftmost knife leaves with the part left of it. Cutting where the part is worth 120 divided by the number of players secures that much."
            }
            ProcedureId::Ld3 | ProcedureId::Ld4 => {
                "You cut first in each stage. Each computer player may move the knife further left. The last player to move it takes the part left of the knife. You may be asked to cut again in a later stage."
            }
            ProcedureId::Ep4 => {
                "Everyone marks where the remaining cake splits in half for them. The cake is cut at the middle mark and each side is shared among the players whose marks fell on that side, repeating until everyone has a part."
            }
            ProcedureId::Sc3 => {
                "Use two knives to make three pieces. The other players may trim a piece and choose before you. Cutting three pieces worth 40 each secures 40 points, and the trimmings are shared afterwards."
            }
        }
    }
}

impl fmt::Display for ProcedureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown procedure {0:?}")]
pub struct UnknownProcedure(pub String);

impl FromStr for ProcedureId {
    type Err = UnknownProcedure;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProcedureId::ALL
            .into_iter()
            .find(|p| p.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownProcedure(s.to_string()))
    }
}

impl TryFrom<String> for ProcedureId {
    type Error = UnknownProcedure;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ProcedureId> for String {
    fn from(p: ProcedureId) -> Self {
        p.code().to_string()
    }
}

/// What a share target is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// The agent's value of the whole cake.
    Total,
    /// The agent's value of the queried range.
    Range,
}

/// The fraction `num/den` of the basis that a truthful cut claims, per cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Share {
    pub basis: Basis,
    pub num: u64,
    pub den: u64,
}

impl Share {
    pub fn of_total(num: u64, den: u64) -> Self {
        Share {
            basis: Basis::Total,
            num,
            den,
        }
    }

    pub fn of_range(num: u64, den: u64) -> Self {
        Share {
            basis: Basis::Range,
            num,
            den,
        }
    }

    /// `ceil(basis * k * num / den)`.
    pub fn target(&self, basis: Points, k: u64) -> Points {
        (basis * k * self.num).div_ceil(self.den)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryKind {
    /// Place `count` ordered cuts inside `range`.
    Cut {
        range: (u32, u32),
        count: usize,
        share: Share,
    },
    /// Pick one of the pieces by index.
    Choose { options: Vec<Piece> },
    /// Move the standing cut to the left, or pass.
    DiminishOrPass {
        current_cut: u32,
        range: (u32, u32),
        share: Share,
    },
    /// Trim the left end of one piece.
    Trim { pieces: Vec<Piece> },
}

impl QueryKind {
    pub fn name(&self) -> &'static str {
        match self {
            QueryKind::Cut { .. } => "cut",
            QueryKind::Choose { .. } => "choose",
            QueryKind::DiminishOrPass { .. } => "diminish_or_pass",
            QueryKind::Trim { .. } => "trim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub agent: usize,
    #[serde(flatten)]
    pub kind: QueryKind,
    /// Cake still being divided at this stage.
    pub remaining: (u32, u32),
    /// Agents still taking part at this stage.
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Cut {
        at: Vec<u32>,
    },
    Choose {
        option: usize,
    },
    Diminish {
        at: u32,
    },
    Pass,
    /// Trimmings are `[a, at)` of piece `[a, b)`; the piece keeps `[at, b)`.
    Trim {
        piece: usize,
        at: u32,
    },
}

impl Action {
    pub fn cut(at: u32) -> Self {
        Action::Cut { at: vec![at] }
    }

    pub fn cuts(a: u32, b: u32) -> Self {
        Action::Cut { at: vec![a, b] }
    }

    /// A compact number for traces and metrics: the first cut, the chosen
    /// option, the diminished cut, or the trim position. `None` for a pass.
    pub fn value(&self) -> Option<u32> {
        match self {
            Action::Cut { at } => at.first().copied(),
            Action::Choose { option } => Some(*option as u32),
            Action::Diminish { at } | Action::Trim { at, .. } => Some(*at),
            Action::Pass => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("no query is pending")]
    NoPendingQuery,
    #[error("a {expected} query cannot be answered with {got:?}")]
    WrongKind { expected: &'static str, got: Action },
    #[error("expected {expected} cut(s), got {got}")]
    CutCount { expected: usize, got: usize },
    #[error("position {at} is outside [{lo}, {hi}]")]
    OutOfRange { at: u32, lo: u32, hi: u32 },
    #[error("cuts must be in non-decreasing order")]
    Unordered,
    #[error("option {option} does not exist, there are {len}")]
    NoSuchOption { option: usize, len: usize },
    #[error("a diminished cut must be strictly left of {current}, got {at}")]
    NotDiminishing { at: u32, current: u32 },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{procedure} needs {expected} agents, profile has {got}")]
    Arity {
        procedure: ProcedureId,
        expected: usize,
        got: usize,
    },
    #[error("{got} policies for {expected} agents")]
    Policies { expected: usize, got: usize },
    #[error("agent {agent}: {source}")]
    Action {
        agent: usize,
        #[source]
        source: ActionError,
    },
    #[error("trace step {step} is by agent {got}, but agent {expected} is queried")]
    Actor {
        step: usize,
        expected: usize,
        got: usize,
    },
    #[error("trace ends before the procedure finishes")]
    Incomplete,
    #[error("trace has actions after the procedure finished")]
    Trailing,
    #[error(transparent)]
    Cake(#[from] CakeError),
}

pub(crate) fn check_cuts(at: &[u32], count: usize, range: (u32, u32)) -> Result<(), ActionError> {
    if at.len() != count {
        return Err(ActionError::CutCount {
            expected: count,
            got: at.len(),
        });
    }
    for &x in at {
        if x < range.0 || x > range.1 {
            return Err(ActionError::OutOfRange {
                at: x,
                lo: range.0,
                hi: range.1,
            });
        }
    }
    if at.windows(2).any(|w| w[0] > w[1]) {
        return Err(ActionError::Unordered);
    }
    Ok(())
}

pub(crate) fn expect_cut(
    action: &Action,
    count: usize,
    range: (u32, u32),
) -> Result<Vec<u32>, ActionError> {
    match action {
        Action::Cut { at } => {
            check_cuts(at, count, range)?;
            Ok(at.clone())
        }
        other => Err(ActionError::WrongKind {
            expected: "cut",
            got: other.clone(),
        }),
    }
}

pub(crate) fn expect_choice(action: &Action, len: usize) -> Result<usize, ActionError> {
    match action {
        Action::Choose { option } if *option < len => Ok(*option),
        Action::Choose { option } => Err(ActionError::NoSuchOption {
            option: *option,
            len,
        }),
        other => Err(ActionError::WrongKind {
            expected: "choose",
            got: other.clone(),
        }),
    }
}

/// Per-procedure machine interface.
pub(crate) trait Machine {
    fn pending(&self) -> Option<Query>;
    fn apply(&mut self, action: &Action) -> Result<(), ActionError>;
    /// The pieces once every agent has one.
    fn finished(&self) -> Option<Vec<Piece>>;
}

/// Where a procedure run stands. Cheap to clone and hashable, so search code
/// can branch on it and memoize.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProtocolState {
    Acc(acc::AccState),
    Scc(scc::SccState),
    Ds(ds::DsState),
    Ld(ld::LdState),
    Ep(ep::EpState),
    Sc(sc::ScState),
}

impl ProtocolState {
    pub fn new(id: ProcedureId, cake: Cake) -> Self {
        let w = cake.width();
        let n = id.agents();
        match id {
            ProcedureId::Acc2 => ProtocolState::Acc(acc::AccState::new(w)),
            ProcedureId::Scc2 => ProtocolState::Scc(scc::SccState::new(w)),
            ProcedureId::Ds3 | ProcedureId::Ds4 => ProtocolState::Ds(ds::DsState::new(w, n)),
            ProcedureId::Ld3 | ProcedureId::Ld4 => ProtocolState::Ld(ld::LdState::new(w, n)),
            ProcedureId::Ep4 => ProtocolState::Ep(ep::EpState::new(w, n)),
            ProcedureId::Sc3 => ProtocolState::Sc(sc::ScState::new(w)),
        }
    }

    fn machine(&self) -> &dyn Machine {
        match self {
            ProtocolState::Acc(m) => m,
            ProtocolState::Scc(m) => m,
            ProtocolState::Ds(m) => m,
            ProtocolState::Ld(m) => m,
            ProtocolState::Ep(m) => m,
            ProtocolState::Sc(m) => m,
        }
    }

    fn machine_mut(&mut self) -> &mut dyn Machine {
        match self {
            ProtocolState::Acc(m) => m,
            ProtocolState::Scc(m) => m,
            ProtocolState::Ds(m) => m,
            ProtocolState::Ld(m) => m,
            ProtocolState::Ep(m) => m,
            ProtocolState::Sc(m) => m,
        }
    }

    pub fn pending(&self) -> Option<Query> {
        self.machine().pending()
    }

    pub fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        if self.machine().pending().is_none() {
            return Err(ActionError::NoPendingQuery);
        }
        self.machine_mut().apply(action)
    }

    pub fn is_done(&self) -> bool {
        self.machine().finished().is_some()
    }

    pub fn allocation(&self, cake: Cake) -> Option<Result<Allocation, CakeError>> {
        self.machine()
            .finished()
            .map(|pieces| Allocation::new(cake, pieces))
    }
}

/// One answered query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub actor: usize,
    pub query: Query,
    pub action: Action,
    /// Milliseconds since the round started.
    pub t_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub procedure: ProcedureId,
    pub steps: Vec<Step>,
    pub allocation: Allocation,
    pub points: Vec<Points>,
}

fn check_arity(id: ProcedureId, profile: &Profile) -> Result<(), RunError> {
    if profile.len() != id.agents() {
        return Err(RunError::Arity {
            procedure: id,
            expected: id.agents(),
            got: profile.len(),
        });
    }
    Ok(())
}

fn points(profile: &Profile, allocation: &Allocation) -> Result<Vec<Points>, CakeError> {
    profile
        .agents()
        .iter()
        .zip(allocation.pieces())
        .map(|(v, p)| v.value_of(p))
        .collect()
}

/// Runs one round with one policy per agent.
pub fn run(
    id: ProcedureId,
    profile: &Profile,
    policies: &mut [Box<dyn Policy + '_>],
) -> Result<(Allocation, RoundTrace), RunError> {
    check_arity(id, profile)?;
    if policies.len() != profile.len() {
        return Err(RunError::Policies {
            expected: profile.len(),
            got: policies.len(),
        });
    }
    let started = Instant::now();
    let mut state = ProtocolState::new(id, profile.cake());
    let mut steps: Vec<Step> = Vec::new();
    while let Some(query) = state.pending() {
        let agent = query.agent;
        let action = policies[agent].respond(&query, profile.agent(agent), &steps);
        state
            .apply(&action)
            .map_err(|source| RunError::Action { agent, source })?;
        steps.push(Step {
            actor: agent,
            query,
            action,
            t_ms: started.elapsed().as_millis() as u64,
        });
    }
    finish(id, profile, &state, steps)
}

fn finish(
    id: ProcedureId,
    profile: &Profile,
    state: &ProtocolState,
    steps: Vec<Step>,
) -> Result<(Allocation, RoundTrace), RunError> {
    let allocation = state
        .allocation(profile.cake())
        .ok_or(RunError::Incomplete)??;
    let points = points(profile, &allocation)?;
    let trace = RoundTrace {
        procedure: id,
        steps,
        allocation: allocation.clone(),
        points,
    };
    Ok((allocation, trace))
}

/// All agents truthful.
pub fn run_truthful(
    id: ProcedureId,
    profile: &Profile,
) -> Result<(Allocation, RoundTrace), RunError> {
    let mut policies: Vec<Box<dyn Policy>> = (0..profile.len())
        .map(|_| Box::new(Truthful) as Box<dyn Policy>)
        .collect();
    run(id, profile, &mut policies)
}

/// `subject` plays `script` on its cut and diminish queries; everyone else,
/// and the subject's other queries, are truthful.
pub fn run_scripted(
    id: ProcedureId,
    profile: &Profile,
    subject: usize,
    script: Vec<Action>,
) -> Result<(Allocation, RoundTrace), RunError> {
    let mut policies: Vec<Box<dyn Policy>> = (0..profile.len())
        .map(|i| {
            if i == subject {
                Box::new(Scripted::new(script.clone())) as Box<dyn Policy>
            } else {
                Box::new(Truthful) as Box<dyn Policy>
            }
        })
        .collect();
    run(id, profile, &mut policies)
}

/// Selfridge-Conway where agent 0 places the two given cuts.
pub fn run_3sc(
    cuts: (u32, u32),
    profile: &Profile,
    policies: &mut [Box<dyn Policy + '_>],
) -> Result<(Allocation, RoundTrace), RunError> {
    check_arity(ProcedureId::Sc3, profile)?;
    if policies.len() != 3 {
        return Err(RunError::Policies {
            expected: 3,
            got: policies.len(),
        });
    }
    let (head, tail) = policies.split_at_mut(1);
    let mut list: Vec<Box<dyn Policy + '_>> = vec![Box::new(FirstCut {
        cut: Some(Action::cuts(cuts.0, cuts.1)),
        inner: head[0].as_mut(),
    })];
    for p in tail.iter_mut() {
        list.push(Box::new(Forward(p.as_mut())));
    }
    run(ProcedureId::Sc3, profile, &mut list)
}

/// Answers the first cut query with a fixed action, then defers.
struct FirstCut<'a> {
    cut: Option<Action>,
    inner: &'a mut dyn Policy,
}

impl Policy for FirstCut<'_> {
    fn respond(&mut self, q: &Query, own: &Valuation, history: &[Step]) -> Action {
        if matches!(q.kind, QueryKind::Cut { .. }) {
            if let Some(a) = self.cut.take() {
                return a;
            }
        }
        self.inner.respond(q, own, history)
    }
}

struct Forward<'a>(&'a mut dyn Policy);

impl Policy for Forward<'_> {
    fn respond(&mut self, q: &Query, own: &Valuation, history: &[Step]) -> Action {
        self.0.respond(q, own, history)
    }
}

/// Feeds recorded actions back through a fresh state machine.
pub fn replay(id: ProcedureId, profile: &Profile, steps: &[Step]) -> Result<Allocation, RunError> {
    check_arity(id, profile)?;
    let mut state = ProtocolState::new(id, profile.cake());
    for (i, step) in steps.iter().enumerate() {
        let query = state.pending().ok_or(RunError::Trailing)?;
        if query.agent != step.actor {
            return Err(RunError::Actor {
                step: i,
                expected: query.agent,
                got: step.actor,
            });
        }
        state
            .apply(&step.action)
            .map_err(|source| RunError::Action {
                agent: step.actor,
                source,
            })?;
    }
    Ok(state
        .allocation(profile.cake())
        .ok_or(RunError::Incomplete)??)
}

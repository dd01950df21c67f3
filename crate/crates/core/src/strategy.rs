//! Exhaustive best-response search for one agent against truthful automata.
//!
//! The searcher walks the procedure's state machine. Everyone else, and the
//! searching agent's choose/trim queries, follow the truthful policy; the
//! searching agent's cut and diminish queries branch over every legal answer.
//! Subtrees are memoized on [`ProtocolState`], which is all that determines
//! the rest of a run once policies are fixed.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cake::{Allocation, Points};
use crate::fairness::{audit, AuditError};
use crate::fixtures;
use crate::procedure::{
    run_scripted, run_truthful, truthful_action, Action, ProcedureId, ProtocolState, Query,
    QueryKind, RunError,
};
use crate::profile::Profile;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("agent {subject} does not exist in a {agents}-agent profile")]
    NoSuchAgent { subject: usize, agents: usize },
    #[error("lemma {0} has no built-in check (use 3 or 4)")]
    UnknownLemma(u8),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BestResponse {
    pub procedure: ProcedureId,
    pub subject: usize,
    /// Answers to the subject's cut and diminish queries, in order.
    pub actions: Vec<Action>,
    pub payoff: Points,
    pub truthful_payoff: Points,
    pub gain: Points,
    pub total: Points,
    pub envious_at_optimum: bool,
    pub allocation: Allocation,
}

impl BestResponse {
    pub fn gap(&self) -> f64 {
        self.gain as f64 / self.total as f64
    }
}

/// Which subject queries branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Every decision of the subject.
    Full,
    /// Only the first decision; later ones are truthful.
    FirstStage,
}

/// Full search for procedures with at most three stages, first-stage
/// deviation otherwise.
pub fn default_scope(id: ProcedureId) -> Scope {
    let stages = match id {
        ProcedureId::Ds3 | ProcedureId::Ds4 | ProcedureId::Ld3 | ProcedureId::Ld4 => {
            id.agents() - 1
        }
        ProcedureId::Ep4 => 2,
        _ => 1,
    };
    if stages <= 3 {
        Scope::Full
    } else {
        Scope::FirstStage
    }
}

fn is_decision(q: &Query) -> bool {
    matches!(
        q.kind,
        QueryKind::Cut { .. } | QueryKind::DiminishOrPass { .. }
    )
}

/// Legal answers in search order: cuts ascending (pairs lexicographically),
/// pass before any diminish.
pub fn options(q: &Query) -> Vec<Action> {
    match &q.kind {
        QueryKind::Cut {
            range, count: 1, ..
        } => (range.0..=range.1).map(Action::cut).collect(),
        QueryKind::Cut {
            range, count: 2, ..
        } => (range.0..=range.1)
            .flat_map(|a| (a..=range.1).map(move |b| Action::cuts(a, b)))
            .collect(),
        QueryKind::DiminishOrPass {
            current_cut, range, ..
        } => std::iter::once(Action::Pass)
            .chain((range.0..*current_cut).map(|at| Action::Diminish { at }))
            .collect(),
        _ => Vec::new(),
    }
}

type Memo = HashMap<ProtocolState, (Points, Vec<Action>)>;

struct Search<'a> {
    profile: &'a Profile,
    subject: usize,
    scope: Scope,
}

enum Node {
    Leaf(Points),
    Decision(ProtocolState, Query),
}

impl Search<'_> {
    /// Plays truthful moves until the subject must decide or the run ends.
    /// With `free` false the subject's decisions are truthful too.
    fn advance(&self, mut state: ProtocolState, free: bool) -> Node {
        loop {
            let Some(q) = state.pending() else {
                let alloc = state
                    .allocation(self.profile.cake())
                    .expect("finished")
                    .expect("machines produce valid allocations");
                let v = self.profile.agent(self.subject);
                return Node::Leaf(v.value_of(alloc.piece(self.subject)).expect("in cake"));
            };
            if free && q.agent == self.subject && is_decision(&q) {
                return Node::Decision(state, q);
            }
            let a = truthful_action(&q, self.profile.agent(q.agent));
            state.apply(&a).expect("truthful actions are legal");
        }
    }

    fn finish(&self, mut state: ProtocolState) -> Allocation {
        while let Some(q) = state.pending() {
            let a = truthful_action(&q, self.profile.agent(q.agent));
            state.apply(&a).expect("truthful actions are legal");
        }
        state
            .allocation(self.profile.cake())
            .expect("finished")
            .expect("machines produce valid allocations")
    }

    fn child(&self, state: &ProtocolState, action: &Action) -> Node {
        let mut next = state.clone();
        next.apply(action).expect("enumerated actions are legal");
        self.advance(next, self.scope == Scope::Full)
    }

    fn solve(&self, node: Node, memo: &mut Memo) -> (Points, Vec<Action>) {
        let (state, q) = match node {
            Node::Leaf(p) => return (p, Vec::new()),
            Node::Decision(s, q) => (s, q),
        };
        if let Some(hit) = memo.get(&state) {
            return hit.clone();
        }
        let mut best: Option<(Points, Vec<Action>)> = None;
        for action in options(&q) {
            let (p, rest) = self.solve(self.child(&state, &action), memo);
            if best.as_ref().is_none_or(|b| p > b.0) {
                let mut seq = Vec::with_capacity(rest.len() + 1);
                seq.push(action);
                seq.extend(rest);
                best = Some((p, seq));
            }
        }
        let best = best.expect("decision queries have options");
        memo.insert(state, best.clone());
        best
    }

    /// The root fans out over threads; equal child states are solved once,
    /// and the reduction keeps the first strictly better option.
    fn solve_root(&self, node: Node) -> (Points, Vec<Action>) {
        let (state, q) = match node {
            Node::Leaf(p) => return (p, Vec::new()),
            Node::Decision(s, q) => (s, q),
        };
        let actions = options(&q);
        let children: Vec<Node> = actions.par_iter().map(|a| self.child(&state, a)).collect();
        let mut index: HashMap<&ProtocolState, usize> = HashMap::new();
        let mut unique: Vec<&ProtocolState> = Vec::new();
        let mut slot: Vec<Result<Points, usize>> = Vec::with_capacity(children.len());
        for c in &children {
            slot.push(match c {
                Node::Leaf(p) => Ok(*p),
                Node::Decision(s, _) => Err(*index.entry(s).or_insert_with(|| {
                    unique.push(s);
                    unique.len() - 1
                })),
            });
        }
        let solved: Vec<(Points, Vec<Action>)> = unique
            .par_iter()
            .map(|s| {
                let q = s.pending().expect("decision state");
                self.solve(Node::Decision((*s).clone(), q), &mut Memo::new())
            })
            .collect();
        let mut best: Option<(Points, Vec<Action>)> = None;
        for (action, s) in actions.into_iter().zip(slot) {
            let (p, rest) = match s {
                Ok(p) => (p, Vec::new()),
                Err(i) => solved[i].clone(),
            };
            if best.as_ref().is_none_or(|b| p > b.0) {
                let mut seq = vec![action];
                seq.extend(rest);
                best = Some((p, seq));
            }
        }
        best.expect("decision queries have options")
    }
}

/// Best response of `subject` with the default search scope.
pub fn best_response(
    id: ProcedureId,
    profile: &Profile,
    subject: usize,
) -> Result<BestResponse, StrategyError> {
    best_response_with(id, profile, subject, default_scope(id))
}

pub fn best_response_with(
    id: ProcedureId,
    profile: &Profile,
    subject: usize,
    scope: Scope,
) -> Result<BestResponse, StrategyError> {
    if subject >= profile.len() {
        return Err(StrategyError::NoSuchAgent {
            subject,
            agents: profile.len(),
        });
    }
    let (_, truthful) = run_truthful(id, profile)?;
    let search = Search {
        profile,
        subject,
        scope,
    };
    let root = search.advance(ProtocolState::new(id, profile.cake()), true);
    let (payoff, actions) = search.solve_root(root);
    let (allocation, trace) = run_scripted(id, profile, subject, actions.clone())?;
    debug_assert_eq!(trace.points[subject], payoff);
    let report = audit(profile.agents(), &allocation, 0)?;
    let truthful_payoff = truthful.points[subject];
    Ok(BestResponse {
        procedure: id,
        subject,
        actions,
        payoff: trace.points[subject],
        truthful_payoff,
        gain: trace.points[subject].saturating_sub(truthful_payoff),
        total: profile.agent(subject).total(),
        envious_at_optimum: report.envious[subject],
        allocation,
    })
}

/// A first-decision deviation, truthful afterwards, and what it earns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deviation {
    pub action: Action,
    pub payoff: Points,
}

/// The most profitable first-decision deviation that beats truthful play
/// and leaves the subject envious at tolerance 0, if any. Ties go to the
/// first deviation in search order.
pub fn best_envious_deviation(
    id: ProcedureId,
    profile: &Profile,
    subject: usize,
) -> Result<Option<Deviation>, StrategyError> {
    if subject >= profile.len() {
        return Err(StrategyError::NoSuchAgent {
            subject,
            agents: profile.len(),
        });
    }
    let (_, truthful) = run_truthful(id, profile)?;
    let baseline = truthful.points[subject];
    let search = Search {
        profile,
        subject,
        scope: Scope::FirstStage,
    };
    let Node::Decision(state, q) = search.advance(ProtocolState::new(id, profile.cake()), true)
    else {
        return Ok(None);
    };
    let found: Vec<Option<Deviation>> = options(&q)
        .into_par_iter()
        .map(|action| {
            let mut next = state.clone();
            next.apply(&action).expect("enumerated actions are legal");
            let alloc = search.finish(next);
            let report = audit(profile.agents(), &alloc, 0).expect("sizes match");
            let payoff = report.points[subject];
            (payoff > baseline && report.envious[subject]).then_some(Deviation { action, payoff })
        })
        .collect();
    let mut best: Option<Deviation> = None;
    for d in found.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| d.payoff > b.payoff) {
            best = Some(d);
        }
    }
    Ok(best)
}

/// `(payoff - truthful payoff) / total` at the best response.
pub fn epsilon_gap(
    id: ProcedureId,
    profile: &Profile,
    subject: usize,
) -> Result<f64, StrategyError> {
    Ok(best_response(id, profile, subject)?.gap())
}

/// Allowance for slivers that cannot be thinner than one pixel.
pub const DISCRETIZATION_SLACK: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct GapCheck {
    pub procedure: ProcedureId,
    pub truthful_payoff: Points,
    pub payoff: Points,
    pub total: Points,
    pub gap: f64,
    pub threshold: f64,
    pub pass: bool,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvyCheck {
    pub truthful_payoff: Points,
    pub payoff: Points,
    pub total: Points,
    pub actions: Vec<Action>,
    pub envious_at_optimum: bool,
    /// Subject's value of each agent's piece at the optimum.
    pub subject_view: Vec<Points>,
    /// Best profitable deviation that does end in envy.
    pub envious_deviation: Option<Deviation>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum LemmaReport {
    Gaps {
        lemma: u8,
        checks: Vec<GapCheck>,
        pass: bool,
    },
    Envy {
        lemma: u8,
        check: EnvyCheck,
        pass: bool,
    },
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        match self {
            LemmaReport::Gaps { pass, .. } | LemmaReport::Envy { pass, .. } => *pass,
        }
    }
}

/// Tightness check for one procedure on its built-in instance.
pub fn gap_check(id: ProcedureId) -> Result<GapCheck, StrategyError> {
    let profile = fixtures::gap_profile(id);
    let br = best_response(id, &profile, 0)?;
    let n = id.agents() as f64;
    let threshold = (n - 1.0) / n - DISCRETIZATION_SLACK;
    let gap = br.gap();
    Ok(GapCheck {
        procedure: id,
        truthful_payoff: br.truthful_payoff,
        payoff: br.payoff,
        total: br.total,
        gap,
        threshold,
        pass: gap >= threshold,
        actions: br.actions,
    })
}

/// Profitable manipulation of the 3SC cutter that leaves it envious.
pub fn envy_check() -> Result<EnvyCheck, StrategyError> {
    let profile = fixtures::envious_cutter_profile();
    let br = best_response(ProcedureId::Sc3, &profile, 0)?;
    let v = profile.agent(0);
    let subject_view = br
        .allocation
        .pieces()
        .iter()
        .map(|p| v.value_of(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(AuditError::from)?;
    let envious_deviation = best_envious_deviation(ProcedureId::Sc3, &profile, 0)?;
    Ok(EnvyCheck {
        truthful_payoff: br.truthful_payoff,
        payoff: br.payoff,
        total: br.total,
        pass: br.gain > 0 && envious_deviation.is_some(),
        envious_at_optimum: br.envious_at_optimum,
        subject_view,
        envious_deviation,
        actions: br.actions,
    })
}

pub fn verify_lemma(which: u8) -> Result<LemmaReport, StrategyError> {
    match which {
        3 => {
            let checks = ProcedureId::ALL
                .iter()
                .map(|&id| gap_check(id))
                .collect::<Result<Vec<_>, _>>()?;
            let pass = checks.iter().all(|c| c.pass);
            Ok(LemmaReport::Gaps {
                lemma: 3,
                checks,
                pass,
            })
        }
        4 => {
            let check = envy_check()?;
            let pass = check.pass;
            Ok(LemmaReport::Envy {
                lemma: 4,
                check,
                pass,
            })
        }
        other => Err(StrategyError::UnknownLemma(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::Cake;

    #[test]
    fn option_enumeration_order() {
        let q = Query {
            agent: 0,
            kind: QueryKind::DiminishOrPass {
                current_cut: 3,
                range: (1, 10),
                share: crate::procedure::Share::of_total(1, 3),
            },
            remaining: (1, 10),
            active: vec![0, 1],
        };
        assert_eq!(
            options(&q),
            vec![
                Action::Pass,
                Action::Diminish { at: 1 },
                Action::Diminish { at: 2 }
            ]
        );
        let q = Query {
            agent: 0,
            kind: QueryKind::Cut {
                range: (0, 2),
                count: 2,
                share: crate::procedure::Share::of_total(1, 3),
            },
            remaining: (0, 2),
            active: vec![0, 1, 2],
        };
        assert_eq!(options(&q).len(), 6);
        assert_eq!(options(&q)[0], Action::cuts(0, 0));
        assert_eq!(options(&q)[5], Action::cuts(2, 2));
    }

    #[test]
    fn identical_valuations_give_no_gain_in_2acc() {
        let cake = Cake::lab();
        let v = crate::valuation::Valuation::uniform(cake);
        let profile = Profile::new(cake, vec![v.clone(), v]).unwrap();
        let br = best_response(ProcedureId::Acc2, &profile, 0).unwrap();
        assert_eq!(br.gain, 0);
        assert_eq!(br.payoff, 300);
    }

    #[test]
    fn unknown_lemma() {
        assert!(matches!(
            verify_lemma(2),
            Err(StrategyError::UnknownLemma(2))
        ));
    }
}

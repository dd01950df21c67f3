//! Repeated cut-and-choose against a stationary truthful chooser.
//!
//! Against a truthful chooser with half-point `h`, a cut at `x` gives the
//! cutter the left piece `[0, x)` when `x < h` (the chooser takes the right)
//! and the right piece `[x, c)` otherwise. The cutter's knowledge is an
//! interval `(s, t]` known to contain `h`.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cake::Points;
use crate::procedure::{Action, ProcedureId, QueryKind, RoundTrace};
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearningError {
    #[error("knowledge needs s < t, got ({s}, {t}]")]
    EmptyBounds { s: u32, t: u32 },
    #[error("observing {observation:?} at cut {cut} contradicts ({s}, {t}]")]
    Inconsistent {
        s: u32,
        t: u32,
        cut: u32,
        observation: Observation,
    },
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<LearningError>,
    },
    #[error("rounds_left must be at least 1")]
    NoRounds,
    #[error("cut {cut} is outside [{s}, {t}]")]
    CutOutsideBounds { cut: u32, s: u32, t: u32 },
}

/// Bounds on the opponent's half-point: `h` lies in `(s, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeState {
    s: u32,
    t: u32,
}

impl KnowledgeState {
    pub fn new(s: u32, t: u32) -> Result<Self, LearningError> {
        if s >= t {
            return Err(LearningError::EmptyBounds { s, t });
        }
        Ok(KnowledgeState { s, t })
    }

    /// Nothing known: `(0, width]`.
    pub fn vacuous(width: u32) -> Self {
        KnowledgeState { s: 0, t: width }
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// Number of half-points still possible.
    pub fn size(&self) -> u32 {
        self.t - self.s
    }
}

/// Which piece the chooser ended up with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    LeftTaken,
    RightTaken,
}

/// Minimal boundary where the valuation reaches half its total (rounded up).
pub fn half_point(v: &Valuation) -> u32 {
    v.cut_point(0, v.total().div_ceil(2))
        .expect("half the total is reachable from 0")
}

/// What a truthful chooser with half-point `h` does with a cut at `x`.
pub fn chooser_response(h: u32, x: u32) -> Observation {
    if x >= h {
        Observation::LeftTaken
    } else {
        Observation::RightTaken
    }
}

/// The cutter's round payoff for cut `x` against half-point `h`.
pub fn payoff(v: &Valuation, h: u32, x: u32) -> Points {
    match chooser_response(h, x) {
        Observation::RightTaken => v.range(0, x),
        Observation::LeftTaken => v.range(x, v.width()),
    }
}

pub fn update(
    k: KnowledgeState,
    cut: u32,
    observation: Observation,
) -> Result<KnowledgeState, LearningError> {
    let (s, t) = match observation {
        Observation::RightTaken => (k.s.max(cut), k.t),
        Observation::LeftTaken => (k.s, k.t.min(cut)),
    };
    if s >= t {
        return Err(LearningError::Inconsistent {
            s: k.s,
            t: k.t,
            cut,
            observation,
        });
    }
    Ok(KnowledgeState { s, t })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Dominance {
    Undominated,
    Dominated { by: u32 },
}

pub fn classify(k: KnowledgeState, cut: u32) -> Dominance {
    if cut < k.s {
        Dominance::Dominated { by: k.s }
    } else if cut > k.t {
        Dominance::Dominated { by: k.t }
    } else {
        Dominance::Undominated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalityReport {
    /// Rounds from the second onwards.
    pub considered: usize,
    pub undominated: usize,
    pub undominated_fraction: f64,
    pub fully_rational: bool,
    /// Per round, starting with round 1 (always undominated).
    pub classes: Vec<Dominance>,
    pub final_knowledge: KnowledgeState,
}

/// Classifies each cut against what earlier rounds revealed.
pub fn rationality_audit(
    width: u32,
    rounds: &[(u32, Observation)],
) -> Result<RationalityReport, LearningError> {
    let mut k = KnowledgeState::vacuous(width);
    let mut classes = Vec::with_capacity(rounds.len());
    for (i, &(cut, observation)) in rounds.iter().enumerate() {
        classes.push(if i == 0 {
            Dominance::Undominated
        } else {
            classify(k, cut)
        });
        k = update(k, cut, observation).map_err(|e| LearningError::Round {
            round: i + 1,
            source: Box::new(e),
        })?;
    }
    let considered = rounds.len().saturating_sub(1);
    let undominated = classes
        .iter()
        .skip(1)
        .filter(|c| **c == Dominance::Undominated)
        .count();
    Ok(RationalityReport {
        considered,
        undominated,
        undominated_fraction: if considered == 0 {
            1.0
        } else {
            undominated as f64 / considered as f64
        },
        fully_rational: undominated == considered,
        classes,
        final_knowledge: k,
    })
}

/// The subject's cut and what it revealed, from a 2ACC or 2SCC round.
pub fn observation_from(trace: &RoundTrace, subject: usize) -> Option<(u32, Observation)> {
    let cut_of = |agent: usize| {
        trace
            .steps
            .iter()
            .find_map(|s| match (&s.query.kind, &s.action) {
                (QueryKind::Cut { .. }, Action::Cut { at }) if s.actor == agent => {
                    at.first().copied()
                }
                _ => None,
            })
    };
    let x = cut_of(subject)?;
    let observation = match trace.procedure {
        ProcedureId::Acc2 => trace.steps.iter().find_map(|s| match s.action {
            Action::Choose { option } if s.actor != subject => Some(if option == 0 {
                Observation::LeftTaken
            } else {
                Observation::RightTaken
            }),
            _ => None,
        })?,
        ProcedureId::Scc2 => {
            // The subject gets the left part only with the strictly lower cut.
            if x < cut_of(1 - subject)? {
                Observation::RightTaken
            } else {
                Observation::LeftTaken
            }
        }
        _ => return None,
    };
    Some((x, observation))
}

/// The payoff guaranteed once `h` is known: the better of the left piece at
/// `h - 1` and the right piece at `h`.
pub fn u_opt(v: &Valuation, h: u32) -> Points {
    v.range(0, h.saturating_sub(1)).max(v.range(h, v.width()))
}

/// Expected round payoff of cut `x` with `h` uniform on the integers of `(s, t]`.
pub fn u_mean(v: &Valuation, x: u32, k: KnowledgeState) -> Result<Ratio<u64>, LearningError> {
    if x < k.s || x > k.t {
        return Err(LearningError::CutOutsideBounds {
            cut: x,
            s: k.s,
            t: k.t,
        });
    }
    Ok(Ratio::new(weighted(v, x, k.s, k.t), u64::from(k.size())))
}

/// `(x - s) * v(x, c) + (t - x) * v(0, x)`: the round payoff summed over
/// every possible half-point.
fn weighted(v: &Valuation, x: u32, s: u32, t: u32) -> u64 {
    u64::from(x - s) * v.range(x, v.width()) + u64::from(t - x) * v.range(0, x)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Plan {
    pub cut: u32,
    /// Expected payoff summed over the remaining rounds.
    pub expected_total: Ratio<u64>,
}

/// Sums over half-points, indexed by `(s - lo, t - lo)`, for one horizon.
struct Table {
    lo: u32,
    side: usize,
    sums: Vec<u64>,
}

impl Table {
    fn zero(lo: u32, hi: u32) -> Self {
        let side = (hi - lo + 1) as usize;
        Table {
            lo,
            side,
            sums: vec![0; side * side],
        }
    }

    fn get(&self, s: u32, t: u32) -> u64 {
        self.sums[(s - self.lo) as usize * self.side + (t - self.lo) as usize]
    }

    fn set(&mut self, s: u32, t: u32, value: u64) {
        let i = (s - self.lo) as usize * self.side + (t - self.lo) as usize;
        self.sums[i] = value;
    }
}

/// Best cut in `[s, t]` given the next horizon's table; smallest cut on ties.
fn best_cut(v: &Valuation, next: &Table, s: u32, t: u32) -> (u32, u64) {
    let mut best = (s, 0);
    for x in s..=t {
        let w = weighted(v, x, s, t) + next.get(s, x) + next.get(x, t);
        if x == s || w > best.1 {
            best = (x, w);
        }
    }
    best
}

/// Backward induction over knowledge states with a uniform prior on `h`.
///
/// `W_r(s, t)` is the total payoff over `r` rounds summed over every `h` in
/// `(s, t]`; after a cut at `x` the left-taken branch carries the `x - s`
/// half-points of `(s, x]` and the right-taken branch the rest.
pub fn plan(v: &Valuation, rounds_left: u32, k: KnowledgeState) -> Result<Plan, LearningError> {
    if rounds_left == 0 {
        return Err(LearningError::NoRounds);
    }
    let (lo, hi) = (k.s, k.t);
    let mut next = Table::zero(lo, hi);
    for _ in 1..rounds_left {
        let mut cur = Table::zero(lo, hi);
        for s in lo..hi {
            for t in s + 1..=hi {
                cur.set(s, t, best_cut(v, &next, s, t).1);
            }
        }
        next = cur;
    }
    let (cut, total) = best_cut(v, &next, lo, hi);
    Ok(Plan {
        cut,
        expected_total: Ratio::new(total, u64::from(k.size())),
    })
}

/// Best single-round cut: argmax of [`u_mean`] over `[s, t]`, smallest on ties.
pub fn myopic_cut(v: &Valuation, k: KnowledgeState) -> u32 {
    let mut best = (k.s, 0);
    for x in k.s..=k.t {
        let w = weighted(v, x, k.s, k.t);
        if x == k.s || w > best.1 {
            best = (x, w);
        }
    }
    best.0
}

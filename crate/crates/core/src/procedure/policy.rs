use std::collections::VecDeque;

use super::{Action, Basis, Query, QueryKind, Share, Step};
use crate::cake::{Piece, Points};
use crate::valuation::Valuation;

/// Answers queries for one agent.
pub trait Policy {
    fn respond(&mut self, query: &Query, own: &Valuation, history: &[Step]) -> Action;
}

/// The automaton: answers every query as the procedure suggests.
#[derive(Debug, Clone, Copy, Default)]
pub struct Truthful;

impl Policy for Truthful {
    fn respond(&mut self, query: &Query, own: &Valuation, _history: &[Step]) -> Action {
        truthful_action(query, own)
    }
}

/// Plays a fixed list of actions on cut and diminish queries, in order, and
/// answers everything else truthfully. Falls back to truthful play when the
/// script runs out.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    script: VecDeque<Action>,
}

impl Scripted {
    pub fn new(script: Vec<Action>) -> Self {
        Scripted {
            script: script.into(),
        }
    }
}

impl Policy for Scripted {
    fn respond(&mut self, query: &Query, own: &Valuation, _history: &[Step]) -> Action {
        match query.kind {
            QueryKind::Cut { .. } | QueryKind::DiminishOrPass { .. } => self
                .script
                .pop_front()
                .unwrap_or_else(|| truthful_action(query, own)),
            _ => truthful_action(query, own),
        }
    }
}

fn basis(v: &Valuation, share: &Share, range: (u32, u32)) -> Points {
    match share.basis {
        Basis::Total => v.total(),
        Basis::Range => v.range(range.0, range.1),
    }
}

/// Smallest boundary in `range` that claims `target` from its left end; the
/// right end when the range is not worth that much.
fn claim(v: &Valuation, range: (u32, u32), target: Points) -> u32 {
    match v.cut_point(range.0, target) {
        Ok(x) if x <= range.1 => x,
        _ => range.1,
    }
}

/// Index of the most valuable piece, ties to the lowest index.
fn best(v: &Valuation, pieces: &[Piece]) -> (usize, Points) {
    let mut best = (0, 0);
    for (i, p) in pieces.iter().enumerate() {
        let value = v.value_of(p).unwrap_or(0);
        if i == 0 || value > best.1 {
            best = (i, value);
        }
    }
    best
}

pub fn truthful_action(query: &Query, v: &Valuation) -> Action {
    match &query.kind {
        QueryKind::Cut {
            range,
            count,
            share,
        } => {
            let b = basis(v, share, *range);
            Action::Cut {
                at: (1..=*count as u64)
                    .map(|k| claim(v, *range, share.target(b, k)))
                    .collect(),
            }
        }
        QueryKind::Choose { options } => Action::Choose {
            option: best(v, options).0,
        },
        QueryKind::DiminishOrPass {
            current_cut,
            range,
            share,
        } => {
            let target = share.target(basis(v, share, *range), 1);
            match v.cut_point(range.0, target) {
                Ok(x) if x < *current_cut => Action::Diminish { at: x },
                _ => Action::Pass,
            }
        }
        QueryKind::Trim { pieces } => {
            let (top, top_value) = best(v, pieces);
            let second = pieces
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != top)
                .map(|(_, p)| v.value_of(p).unwrap_or(0))
                .max()
                .unwrap_or(0);
            let (a, b) = pieces[top].intervals().first().copied().unwrap_or((0, 0));
            if top_value == second {
                return Action::Trim { piece: top, at: a };
            }
            let mut x = v
                .cut_point(a, top_value - second)
                .expect("excess lies inside the piece");
            // Heavy pixels can overshoot; the kept part never drops below second.
            if v.range(x, b) < second {
                x -= 1;
            }
            Action::Trim { piece: top, at: x }
        }
    }
}

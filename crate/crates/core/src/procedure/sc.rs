use super::{expect_choice, expect_cut, Action, ActionError, Machine, Query, QueryKind, Share};
use crate::cake::Piece;

/// Selfridge-Conway. Agent 0 cuts three slots, agent 1 trims one, agent 2
/// picks first, then agent 1, agent 0 keeps the leftover. The trimmings are
/// cut in three by whichever of agents 1 and 2 did not get the trimmed slot,
/// and picked by the other, then agent 0, then the cutter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScState {
    width: u32,
    cuts: Option<(u32, u32)>,
    /// Trimmed slot and the left end of what it keeps.
    trim: Option<(usize, u32)>,
    pick2: Option<usize>,
    pick1: Option<usize>,
    t_cuts: Option<(u32, u32)>,
    /// Parts of the trimmings taken so far, in picking order.
    t_picks: Vec<usize>,
}

impl ScState {
    pub(crate) fn new(width: u32) -> Self {
        ScState {
            width,
            cuts: None,
            trim: None,
            pick2: None,
            pick1: None,
            t_cuts: None,
            t_picks: Vec::new(),
        }
    }

    fn bounds(&self) -> [(u32, u32); 3] {
        let (a, b) = self.cuts.expect("cuts placed");
        [(0, a), (a, b), (b, self.width)]
    }

    fn slots(&self) -> Vec<Piece> {
        self.bounds()
            .iter()
            .map(|&(a, b)| Piece::interval(a, b))
            .collect()
    }

    /// Slots after trimming.
    fn kept(&self) -> Vec<Piece> {
        let (slot, at) = self.trim.expect("trimmed");
        self.bounds()
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| Piece::interval(if i == slot { at } else { a }, b))
            .collect()
    }

    fn trimmings(&self) -> (u32, u32) {
        let (slot, at) = self.trim.expect("trimmed");
        (self.bounds()[slot].0, at)
    }

    /// Slot order offered to agent 1 after agent 2 took the trimmed slot.
    fn rest_for_1(&self, taken: usize) -> Vec<usize> {
        (0..3).filter(|&s| s != taken).collect()
    }

    /// Slots of agents 0, 1, 2 once the main phase is over.
    fn main_slots(&self) -> Option<[usize; 3]> {
        let (trimmed, _) = self.trim?;
        let s2 = self.pick2?;
        let s1 = if s2 == trimmed {
            self.rest_for_1(s2)[self.pick1?]
        } else {
            trimmed
        };
        let s0 = (0..3).find(|&s| s != s1 && s != s2)?;
        Some([s0, s1, s2])
    }

    /// (i, j): i holds the trimmed slot, j cuts the trimmings.
    fn roles(&self) -> Option<(usize, usize)> {
        let [_, s1, _] = self.main_slots()?;
        let (trimmed, _) = self.trim?;
        Some(if s1 == trimmed { (1, 2) } else { (2, 1) })
    }

    fn parts(&self) -> Vec<Piece> {
        let (a, b) = self.trimmings();
        let (c1, c2) = self.t_cuts.expect("trimmings cut");
        vec![
            Piece::interval(a, c1),
            Piece::interval(c1, c2),
            Piece::interval(c2, b),
        ]
    }

    fn parts_left(&self) -> Vec<usize> {
        (0..3).filter(|p| !self.t_picks.contains(p)).collect()
    }

    fn trimmings_empty(&self) -> bool {
        let (a, b) = self.trimmings();
        a == b
    }
}

impl Machine for ScState {
    fn pending(&self) -> Option<Query> {
        let whole = (0, self.width);
        let all = vec![0, 1, 2];
        let q = |agent, kind, remaining, active| {
            Some(Query {
                agent,
                kind,
                remaining,
                active,
            })
        };
        if self.cuts.is_none() {
            return q(
                0,
                QueryKind::Cut {
                    range: whole,
                    count: 2,
                    share: Share::of_total(1, 3),
                },
                whole,
                all,
            );
        }
        if self.trim.is_none() {
            return q(
                1,
                QueryKind::Trim {
                    pieces: self.slots(),
                },
                whole,
                all,
            );
        }
        let kept = self.kept();
        let Some(s2) = self.pick2 else {
            return q(2, QueryKind::Choose { options: kept }, whole, all);
        };
        if s2 == self.trim?.0 && self.pick1.is_none() {
            let options = self
                .rest_for_1(s2)
                .iter()
                .map(|&s| kept[s].clone())
                .collect();
            return q(1, QueryKind::Choose { options }, whole, vec![0, 1]);
        }
        if self.trimmings_empty() {
            return None;
        }
        let (i, j) = self.roles()?;
        let t = self.trimmings();
        if self.t_cuts.is_none() {
            return q(
                j,
                QueryKind::Cut {
                    range: t,
                    count: 2,
                    share: Share::of_range(1, 3),
                },
                t,
                vec![0, 1, 2],
            );
        }
        let parts = self.parts();
        let options: Vec<Piece> = self
            .parts_left()
            .iter()
            .map(|&p| parts[p].clone())
            .collect();
        match self.t_picks.len() {
            0 => q(i, QueryKind::Choose { options }, t, vec![0, 1, 2]),
            1 => q(0, QueryKind::Choose { options }, t, vec![0, j]),
            _ => None,
        }
    }

    fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        if self.pending().is_none() {
            return Err(ActionError::NoPendingQuery);
        }
        if self.cuts.is_none() {
            let at = expect_cut(action, 2, (0, self.width))?;
            self.cuts = Some((at[0], at[1]));
        } else if self.trim.is_none() {
            match *action {
                Action::Trim { piece, at } => {
                    let bounds = self.bounds();
                    let &(a, b) = bounds.get(piece).ok_or(ActionError::NoSuchOption {
                        option: piece,
                        len: 3,
                    })?;
                    if at < a || at > b {
                        return Err(ActionError::OutOfRange { at, lo: a, hi: b });
                    }
                    self.trim = Some((piece, at));
                }
                ref other => {
                    return Err(ActionError::WrongKind {
                        expected: "trim",
                        got: other.clone(),
                    })
                }
            }
        } else if self.pick2.is_none() {
            self.pick2 = Some(expect_choice(action, 3)?);
        } else if self.pick2 == self.trim.map(|t| t.0) && self.pick1.is_none() {
            self.pick1 = Some(expect_choice(action, 2)?);
        } else if self.t_cuts.is_none() {
            let t = self.trimmings();
            let at = expect_cut(action, 2, t)?;
            self.t_cuts = Some((at[0], at[1]));
        } else {
            let left = self.parts_left();
            let option = expect_choice(action, left.len())?;
            self.t_picks.push(left[option]);
        }
        Ok(())
    }

    fn finished(&self) -> Option<Vec<Piece>> {
        if self.pending().is_some() {
            return None;
        }
        let kept = self.kept();
        let [s0, s1, s2] = self.main_slots()?;
        let mut pieces = vec![kept[s0].clone(), kept[s1].clone(), kept[s2].clone()];
        if !self.trimmings_empty() {
            let (i, j) = self.roles()?;
            let parts = self.parts();
            let last = self.parts_left()[0];
            pieces[i] = pieces[i].union(&parts[self.t_picks[0]]);
            pieces[0] = pieces[0].union(&parts[self.t_picks[1]]);
            pieces[j] = pieces[j].union(&parts[last]);
        }
        Some(pieces)
    }
}

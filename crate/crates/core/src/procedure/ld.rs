use super::{expect_cut, Action, ActionError, Machine, Query, QueryKind, Share};
use crate::cake::Piece;

/// The first active agent cuts, the others in turn may move the cut left.
/// The last to move it takes `[y, cut)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LdState {
    width: u32,
    n: usize,
    y: u32,
    active: Vec<usize>,
    /// Current holder (position in `active`) and cut.
    holder: Option<(usize, u32)>,
    next: usize,
    claims: Vec<Option<(u32, u32)>>,
}

impl LdState {
    pub(crate) fn new(width: u32, n: usize) -> Self {
        LdState {
            width,
            n,
            y: 0,
            active: (0..n).collect(),
            holder: None,
            next: 0,
            claims: vec![None; n],
        }
    }

    fn share(&self) -> Share {
        Share::of_total(1, self.n as u64)
    }

    fn settle(&mut self) {
        if self.next == self.active.len() {
            if let Some((pos, cut)) = self.holder.take() {
                let agent = self.active.remove(pos);
                self.claims[agent] = Some((self.y, cut));
                self.y = cut;
                self.next = 0;
            }
        }
        if self.active.len() == 1 {
            let last = self.active.pop().expect("one agent left");
            self.claims[last] = Some((self.y, self.width));
        }
    }
}

impl Machine for LdState {
    fn pending(&self) -> Option<Query> {
        let agent = *self.active.get(self.next)?;
        let range = (self.y, self.width);
        let kind = match self.holder {
            None => QueryKind::Cut {
                range,
                count: 1,
                share: self.share(),
            },
            Some((_, cut)) => QueryKind::DiminishOrPass {
                current_cut: cut,
                range,
                share: self.share(),
            },
        };
        Some(Query {
            agent,
            kind,
            remaining: range,
            active: self.active.clone(),
        })
    }

    fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        match self.holder {
            None => {
                let x = expect_cut(action, 1, (self.y, self.width))?[0];
                self.holder = Some((self.next, x));
            }
            Some((_, current)) => match action {
                Action::Pass => {}
                Action::Diminish { at } if *at < self.y => {
                    return Err(ActionError::OutOfRange {
                        at: *at,
                        lo: self.y,
                        hi: current,
                    })
                }
                Action::Diminish { at } if *at >= current => {
                    return Err(ActionError::NotDiminishing { at: *at, current })
                }
                Action::Diminish { at } => self.holder = Some((self.next, *at)),
                other => {
                    return Err(ActionError::WrongKind {
                        expected: "diminish_or_pass",
                        got: other.clone(),
                    })
                }
            },
        }
        self.next += 1;
        self.settle();
        Ok(())
    }

    fn finished(&self) -> Option<Vec<Piece>> {
        self.claims
            .iter()
            .map(|c| c.map(|(a, b)| Piece::interval(a, b)))
            .collect()
    }
}

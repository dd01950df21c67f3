use super::{expect_cut, Action, ActionError, Machine, Query, QueryKind, Share};
use crate::cake::Piece;

/// Both agents cut; the cake is split at the floor of the midpoint and the
/// lower cutter takes the left part. On equal cuts agent 1 counts as the
/// lower cutter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SccState {
    width: u32,
    cuts: Vec<u32>,
}

impl SccState {
    pub(crate) fn new(width: u32) -> Self {
        SccState {
            width,
            cuts: Vec::with_capacity(2),
        }
    }
}

impl Machine for SccState {
    fn pending(&self) -> Option<Query> {
        if self.cuts.len() == 2 {
            return None;
        }
        Some(Query {
            agent: self.cuts.len(),
            kind: QueryKind::Cut {
                range: (0, self.width),
                count: 1,
                share: Share::of_total(1, 2),
            },
            remaining: (0, self.width),
            active: vec![0, 1],
        })
    }

    fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        let x = expect_cut(action, 1, (0, self.width))?[0];
        self.cuts.push(x);
        Ok(())
    }

    fn finished(&self) -> Option<Vec<Piece>> {
        let (x0, x1) = match self.cuts[..] {
            [a, b] => (a, b),
            _ => return None,
        };
        let mid = (x0 + x1) / 2;
        let left = Piece::interval(0, mid);
        let right = Piece::interval(mid, self.width);
        Some(if x0 < x1 {
            vec![left, right]
        } else {
            vec![right, left]
        })
    }
}

use super::{expect_choice, expect_cut, Action, ActionError, Machine, Query, QueryKind, Share};
use crate::cake::Piece;

/// Agent 0 cuts, agent 1 chooses.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AccState {
    width: u32,
    cut: Option<u32>,
    choice: Option<usize>,
}

impl AccState {
    pub(crate) fn new(width: u32) -> Self {
        AccState {
            width,
            cut: None,
            choice: None,
        }
    }

    fn options(&self, x: u32) -> Vec<Piece> {
        vec![Piece::interval(0, x), Piece::interval(x, self.width)]
    }
}

impl Machine for AccState {
    fn pending(&self) -> Option<Query> {
        let kind = match (self.cut, self.choice) {
            (None, _) => QueryKind::Cut {
                range: (0, self.width),
                count: 1,
                share: Share::of_total(1, 2),
            },
            (Some(x), None) => QueryKind::Choose {
                options: self.options(x),
            },
            _ => return None,
        };
        Some(Query {
            agent: usize::from(self.cut.is_some()),
            kind,
            remaining: (0, self.width),
            active: vec![0, 1],
        })
    }

    fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        match self.cut {
            None => self.cut = Some(expect_cut(action, 1, (0, self.width))?[0]),
            Some(_) => self.choice = Some(expect_choice(action, 2)?),
        }
        Ok(())
    }

    fn finished(&self) -> Option<Vec<Piece>> {
        let x = self.cut?;
        let chosen = self.choice?;
        let mut options = self.options(x);
        let taken = options.remove(chosen);
        Some(vec![options.remove(0), taken])
    }
}

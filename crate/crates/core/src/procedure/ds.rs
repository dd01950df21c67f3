use super::{expect_cut, Action, ActionError, Machine, Query, QueryKind, Share};
use crate::cake::Piece;

/// Each stage every active agent cuts; the leftmost cut leaves with
/// `[y, cut)`. Equal leftmost cuts go to the lowest index. The last agent
/// takes what is left.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DsState {
    width: u32,
    n: usize,
    y: u32,
    active: Vec<usize>,
    cuts: Vec<u32>,
    claims: Vec<Option<(u32, u32)>>,
}

impl DsState {
    pub(crate) fn new(width: u32, n: usize) -> Self {
        DsState {
            width,
            n,
            y: 0,
            active: (0..n).collect(),
            cuts: Vec::new(),
            claims: vec![None; n],
        }
    }

    fn settle(&mut self) {
        if self.active.len() == 1 {
            let last = self.active.pop().expect("one agent left");
            self.claims[last] = Some((self.y, self.width));
        }
    }
}

impl Machine for DsState {
    fn pending(&self) -> Option<Query> {
        let agent = *self.active.get(self.cuts.len())?;
        Some(Query {
            agent,
            kind: QueryKind::Cut {
                range: (self.y, self.width),
                count: 1,
                share: Share::of_total(1, self.n as u64),
            },
            remaining: (self.y, self.width),
            active: self.active.clone(),
        })
    }

    fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        let x = expect_cut(action, 1, (self.y, self.width))?[0];
        self.cuts.push(x);
        if self.cuts.len() == self.active.len() {
            // min_by_key keeps the first minimum, i.e. the lowest index.
            let (pos, &cut) = self
                .cuts
                .iter()
                .enumerate()
                .min_by_key(|&(_, c)| *c)
                .expect("at least one cut");
            let agent = self.active.remove(pos);
            self.claims[agent] = Some((self.y, cut));
            self.y = cut;
            self.cuts.clear();
            self.settle();
        }
        Ok(())
    }

    fn finished(&self) -> Option<Vec<Piece>> {
        self.claims
            .iter()
            .map(|c| c.map(|(a, b)| Piece::interval(a, b)))
            .collect()
    }
}

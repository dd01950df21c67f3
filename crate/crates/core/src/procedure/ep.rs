use super::{expect_cut, Action, ActionError, Machine, Query, QueryKind, Share};
use crate::cake::Piece;

/// Recursive halving. In a subproblem with `k` agents each cuts where the
/// left part holds `floor(k/2)/k` of its value of the range. Cuts are ranked
/// by position then agent index; the `floor(k/2)` lowest ranked agents divide
/// the left part up to the last of their cuts, the rest divide the right.
/// Left subproblems are resolved first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpState {
    /// Pending subproblems; the last one is current.
    stack: Vec<(Vec<usize>, u32, u32)>,
    cuts: Vec<u32>,
    claims: Vec<Option<(u32, u32)>>,
}

impl EpState {
    pub(crate) fn new(width: u32, n: usize) -> Self {
        let mut s = EpState {
            stack: vec![((0..n).collect(), 0, width)],
            cuts: Vec::new(),
            claims: vec![None; n],
        };
        s.settle();
        s
    }

    fn settle(&mut self) {
        while let Some((agents, y, z)) = self.stack.last() {
            if agents.len() != 1 {
                break;
            }
            self.claims[agents[0]] = Some((*y, *z));
            self.stack.pop();
        }
    }
}

impl Machine for EpState {
    fn pending(&self) -> Option<Query> {
        let (agents, y, z) = self.stack.last()?;
        let k = agents.len() as u64;
        Some(Query {
            agent: agents[self.cuts.len()],
            kind: QueryKind::Cut {
                range: (*y, *z),
                count: 1,
                share: Share::of_range(k / 2, k),
            },
            remaining: (*y, *z),
            active: agents.clone(),
        })
    }

    fn apply(&mut self, action: &Action) -> Result<(), ActionError> {
        let (agents, y, z) = self.stack.last().cloned().expect("pending subproblem");
        let x = expect_cut(action, 1, (y, z))?[0];
        self.cuts.push(x);
        if self.cuts.len() < agents.len() {
            return Ok(());
        }
        let mut ranked: Vec<(u32, usize)> =
            self.cuts.drain(..).zip(agents.iter().copied()).collect();
        ranked.sort_unstable();
        let half = agents.len() / 2;
        let x_star = ranked[half - 1].0;
        let mut left: Vec<usize> = ranked[..half].iter().map(|r| r.1).collect();
        let mut right: Vec<usize> = ranked[half..].iter().map(|r| r.1).collect();
        left.sort_unstable();
        right.sort_unstable();
        self.stack.pop();
        self.stack.push((right, x_star, z));
        self.stack.push((left, y, x_star));
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

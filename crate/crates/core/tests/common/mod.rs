//! Brute-force oracles shared by the integration tests. They use only
//! pixel densities and totals, never the engine's cut or choice logic.
#![allow(dead_code)]

use fairslice_core::learning::KnowledgeState;
use fairslice_core::{Cake, Profile, Segment, Valuation};

/// Round payoff of cut `x` written out directly: the chooser takes the left
/// piece when it is worth at least half to them.
pub fn oracle_payoff(alice: &Valuation, bob: &Valuation, x: u32) -> u64 {
    let c = alice.width();
    if 2 * bob.range(0, x) >= bob.total() {
        alice.range(x, c)
    } else {
        alice.range(0, x)
    }
}

/// A chooser whose half-point is exactly `h`: one unit on each side.
pub fn chooser_with_half_point(cake: Cake, h: u32) -> Valuation {
    Valuation::new(
        cake,
        vec![
            Segment::new(h - 1, h, 1),
            Segment::new(cake.width() - 1, cake.width(), 1),
        ],
    )
    .unwrap()
}

/// Dominance by brute force: `by` is at least as good as `cut` for every
/// half-point in `(s, t]` and strictly better for one.
pub fn dominates(alice: &Valuation, k: KnowledgeState, by: u32, cut: u32) -> bool {
    let cake = alice.cake();
    let mut strict = false;
    for h in k.s() + 1..=k.t() {
        let bob = chooser_with_half_point(cake, h);
        let (a, b) = (
            oracle_payoff(alice, &bob, by),
            oracle_payoff(alice, &bob, cut),
        );
        if a < b {
            return false;
        }
        strict |= a > b;
    }
    strict
}

/// Prefix sums of one agent's pixel densities, built without the engine's cut logic.
pub struct Prefix(pub Vec<u64>);

impl Prefix {
    pub fn of(v: &Valuation, width: u32) -> Self {
        let mut acc = vec![0];
        for px in 0..width {
            acc.push(acc[px as usize] + v.density(px));
        }
        Prefix(acc)
    }

    pub fn range(&self, a: usize, b: usize) -> u64 {
        self.0[b] - self.0[a]
    }

    /// Smallest `x >= from` with `range(from, x) >= target`, clamped to the end.
    pub fn cut(&self, from: usize, target: u64) -> usize {
        let want = self.0[from] + target;
        let i = self.0[from..].partition_point(|&s| s < want);
        (from + i).min(self.0.len() - 1)
    }
}

pub fn best_index(values: &[u64], allowed: &[bool]) -> usize {
    let mut best = None;
    for (k, &v) in values.iter().enumerate() {
        if allowed[k] && best.is_none_or(|b: usize| v > values[b]) {
            best = Some(k);
        }
    }
    best.unwrap()
}

pub fn prefixes(p: &Profile) -> Vec<Prefix> {
    let w = p.cake().width();
    p.agents().iter().map(|v| Prefix::of(v, w)).collect()
}

/// Agent 0's 2ACC payoff for cut `x` when the chooser takes its larger side, left on ties.
pub fn acc_payoff(pre: &[Prefix], x: usize) -> u64 {
    let end = pre[0].0.len() - 1;
    let (l, r) = (pre[1].range(0, x), pre[1].range(x, end));
    if l >= r {
        pre[0].range(x, end)
    } else {
        pre[0].range(0, x)
    }
}

/// Agent 0's 3SC payoff when it cuts at `a <= b` and everyone else is truthful.
pub fn sc_payoff(pre: &[Prefix], a: usize, b: usize) -> u64 {
    let end = pre[0].0.len() - 1;
    let mut slots = [(0, a), (a, b), (b, end)];
    let val = |i: usize, s: (usize, usize)| pre[i].range(s.0, s.1);

    let v1: Vec<u64> = slots.iter().map(|&s| val(1, s)).collect();
    let top = best_index(&v1, &[true; 3]);
    let mut others = [true; 3];
    others[top] = false;
    let second = v1[best_index(&v1, &others)];
    let mut trimmings = None;
    if v1[top] > second {
        let (s, e) = slots[top];
        let mut x = pre[1].cut(s, v1[top] - second);
        if pre[1].range(x, e) < second {
            x -= 1;
        }
        if x > s {
            trimmings = Some((s, x));
            slots[top] = (x, e);
        }
    }

    let mut left = [true; 3];
    let v2: Vec<u64> = slots.iter().map(|&s| val(2, s)).collect();
    let pick2 = best_index(&v2, &left);
    left[pick2] = false;
    let pick1 = if trimmings.is_some() && pick2 != top {
        top
    } else {
        let v: Vec<u64> = slots.iter().map(|&s| val(1, s)).collect();
        best_index(&v, &left)
    };
    left[pick1] = false;
    let pick0 = left.iter().position(|&f| f).unwrap();
    let mut payoff = val(0, slots[pick0]);

    if let Some((s, e)) = trimmings {
        let (i, j) = if pick2 == top { (2, 1) } else { (1, 2) };
        let total = pre[j].range(s, e);
        let c1 = pre[j].cut(s, total.div_ceil(3)).min(e);
        let c2 = pre[j].cut(s, (2 * total).div_ceil(3)).min(e);
        let parts = [(s, c1), (c1, c2), (c2, e)];
        let mut free = [true; 3];
        for agent in [i, 0] {
            let v: Vec<u64> = parts.iter().map(|&p| val(agent, p)).collect();
            let k = best_index(&v, &free);
            free[k] = false;
            if agent == 0 {
                payoff += v[k];
            }
        }
    }
    payoff
}

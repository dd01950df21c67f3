//! Piecewise-constant integer valuations over a pixel cake.

use serde::{Deserialize, Serialize};

use crate::cake::{Cake, CakeError, Piece, Points};

/// `[start, end)` with `weight` points per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: u32,
    pub end: u32,
    pub weight: u64,
}

impl Segment {
    pub fn new(start: u32, end: u32, weight: u64) -> Self {
        Segment { start, end, weight }
    }
}

/// An agent's valuation. Construct through [`Valuation::new`], which keeps
/// the prefix-sum table in sync with the segments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Valuation {
    cake: Cake,
    segments: Vec<Segment>,
    prefix: Vec<Points>,
}

impl Valuation {
    /// Builds the valuation. Segments must lie inside the cake; overlapping
    /// segments add up here, use [`crate::profile::validate_profile`] to reject them.
    pub fn new(cake: Cake, segments: Vec<Segment>) -> Result<Self, CakeError> {
        let width = cake.width();
        let mut density = vec![0u64; width as usize];
        for seg in &segments {
            if seg.start >= seg.end || seg.end > width {
                return Err(CakeError::OutOfBounds {
                    start: seg.start,
                    end: seg.end,
                    width,
                });
            }
            for px in seg.start..seg.end {
                density[px as usize] += seg.weight;
            }
        }
        let mut prefix = Vec::with_capacity(width as usize + 1);
        prefix.push(0);
        let mut acc = 0;
        for d in density {
            acc += d;
            prefix.push(acc);
        }
        Ok(Valuation {
            cake,
            segments,
            prefix,
        })
    }

    /// 0/1 valuation from half-open desired intervals.
    pub fn desired(cake: Cake, intervals: &[(u32, u32)]) -> Result<Self, CakeError> {
        Valuation::new(
            cake,
            intervals
                .iter()
                .map(|&(a, b)| Segment::new(a, b, 1))
                .collect(),
        )
    }

    /// Every pixel worth one point.
    pub fn uniform(cake: Cake) -> Self {
        Valuation::desired(cake, &[(0, cake.width())]).expect("whole cake is in bounds")
    }

    pub fn cake(&self) -> Cake {
        self.cake
    }

    pub fn width(&self) -> u32 {
        self.cake.width()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total(&self) -> Points {
        *self.prefix.last().expect("prefix is never empty")
    }

    /// Points per pixel at `px`.
    pub fn density(&self, px: u32) -> Points {
        self.prefix[px as usize + 1] - self.prefix[px as usize]
    }

    /// Value of `[a, b)`; zero when `a >= b`. Boundaries are clamped to the cake.
    pub fn range(&self, a: u32, b: u32) -> Points {
        let w = self.width();
        let (a, b) = (a.min(w), b.min(w));
        if a >= b {
            0
        } else {
            self.prefix[b as usize] - self.prefix[a as usize]
        }
    }

    pub fn value_of(&self, piece: &Piece) -> Result<Points, CakeError> {
        piece.within(&self.cake)?;
        Ok(piece
            .intervals()
            .iter()
            .map(|&(a, b)| self.range(a, b))
            .sum())
    }

    /// Minimal boundary `x >= from` with `range(from, x) >= target`.
    pub fn cut_point(&self, from: u32, target: Points) -> Result<u32, CakeError> {
        self.cake.check_cut(from)?;
        let available = self.range(from, self.width());
        if target > available {
            return Err(CakeError::Unreachable {
                from,
                target,
                available,
            });
        }
        let goal = self.prefix[from as usize] + target;
        // prefix is non-decreasing, so the first index reaching goal is the answer.
        let idx = self.prefix[from as usize..].partition_point(|&p| p < goal);
        Ok(from + idx as u32)
    }

    /// The desired intervals: maximal runs of pixels with positive weight.
    pub fn desired_intervals(&self) -> Vec<(u32, u32)> {
        let mut out: Vec<(u32, u32)> = Vec::new();
        for px in 0..self.width() {
            if self.density(px) > 0 {
                match out.last_mut() {
                    Some(last) if last.1 == px => last.1 = px + 1,
                    _ => out.push((px, px + 1)),
                }
            }
        }
        out
    }
}

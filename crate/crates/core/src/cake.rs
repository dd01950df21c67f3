//! The discretized cake, pieces made of pixel intervals, and allocations.
//!
//! A cake of width `w` has pixels `0..w`; cut positions are the pixel
//! boundaries `0..=w`. A cut at `k` splits the cake into `[0, k)` and `[k, w)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points are integer utility units. Lab valuations are worth 120 in total.
pub type Points = u64;

/// Number of pixels of the lab cake.
pub const LAB_WIDTH: u32 = 600;

/// Total points of every lab valuation.
pub const LAB_TOTAL: Points = 120;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CakeError {
    #[error("cake width must be at least 2 pixels, got {0}")]
    TooNarrow(u32),
    #[error("interval [{start}, {end}) is outside the cake [0, {width})")]
    OutOfBounds { start: u32, end: u32, width: u32 },
    #[error("cut at {cut} is outside [0, {width}]")]
    CutOutOfBounds { cut: u32, width: u32 },
    #[error("target of {target} points is unreachable from {from}: only {available} left")]
    Unreachable {
        from: u32,
        target: Points,
        available: Points,
    },
    #[error("pieces overlap on [{start}, {end})")]
    Overlap { start: u32, end: u32 },
    #[error("allocation leaves [{start}, {end}) unassigned")]
    Wasteful { start: u32, end: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cake {
    width: u32,
}

impl Cake {
    pub fn new(width: u32) -> Result<Self, CakeError> {
        if width < 2 {
            return Err(CakeError::TooNarrow(width));
        }
        Ok(Cake { width })
    }

    pub fn lab() -> Self {
        Cake { width: LAB_WIDTH }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn check_cut(&self, cut: u32) -> Result<u32, CakeError> {
        if cut > self.width {
            return Err(CakeError::CutOutOfBounds {
                cut,
                width: self.width,
            });
        }
        Ok(cut)
    }

    pub fn whole(&self) -> Piece {
        Piece::interval(0, self.width)
    }
}

impl Default for Cake {
    fn default() -> Self {
        Cake::lab()
    }
}

/// A finite union of disjoint half-open pixel intervals.
///
/// Always normalized: intervals are non-empty, sorted, and adjacent
/// intervals are merged, so two pieces covering the same pixels compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<(u32, u32)>", into = "Vec<(u32, u32)>")]
pub struct Piece {
    intervals: Vec<(u32, u32)>,
}

impl Piece {
    pub fn empty() -> Self {
        Piece::default()
    }

    /// The interval `[start, end)`; empty when `start >= end`.
    pub fn interval(start: u32, end: u32) -> Self {
        if start >= end {
            Piece::empty()
        } else {
            Piece {
                intervals: vec![(start, end)],
            }
        }
    }

    pub fn from_intervals<I: IntoIterator<Item = (u32, u32)>>(intervals: I) -> Self {
        let mut raw: Vec<(u32, u32)> = intervals.into_iter().filter(|(a, b)| a < b).collect();
        raw.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(raw.len());
        for (a, b) in raw {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Piece { intervals: merged }
    }

    pub fn intervals(&self) -> &[(u32, u32)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Number of pixels covered.
    pub fn len(&self) -> u32 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn union(&self, other: &Piece) -> Piece {
        Piece::from_intervals(self.intervals.iter().chain(other.intervals.iter()).copied())
    }

    /// First overlapping stretch of pixels, if any.
    pub fn overlap(&self, other: &Piece) -> Option<(u32, u32)> {
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a0, a1) = self.intervals[i];
            let (b0, b1) = other.intervals[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo < hi {
                return Some((lo, hi));
            }
            if a1 <= b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        None
    }

    pub fn within(&self, cake: &Cake) -> Result<(), CakeError> {
        match self.intervals.last() {
            Some(&(start, end)) if end > cake.width() => Err(CakeError::OutOfBounds {
                start,
                end,
                width: cake.width(),
            }),
            _ => Ok(()),
        }
    }
}

impl From<Vec<(u32, u32)>> for Piece {
    fn from(intervals: Vec<(u32, u32)>) -> Self {
        Piece::from_intervals(intervals)
    }
}

impl From<Piece> for Vec<(u32, u32)> {
    fn from(piece: Piece) -> Self {
        piece.intervals
    }
}

/// One piece per agent, pairwise disjoint and covering the whole cake.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    cake: Cake,
    pieces: Vec<Piece>,
}

impl Allocation {
    pub fn new(cake: Cake, pieces: Vec<Piece>) -> Result<Self, CakeError> {
        let mut segments: Vec<(u32, u32)> = Vec::new();
        for piece in &pieces {
            piece.within(&cake)?;
            segments.extend_from_slice(piece.intervals());
        }
        segments.sort_unstable();
        let mut covered = 0;
        for (a, b) in segments {
            if a < covered {
                return Err(CakeError::Overlap {
                    start: a,
                    end: b.min(covered),
                });
            }
            if a > covered {
                return Err(CakeError::Wasteful {
                    start: covered,
                    end: a,
                });
            }
            covered = b;
        }
        if covered < cake.width() {
            return Err(CakeError::Wasteful {
                start: covered,
                end: cake.width(),
            });
        }
        Ok(Allocation { cake, pieces })
    }

    pub fn cake(&self) -> Cake {
        self.cake
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece(&self, agent: usize) -> &Piece {
        &self.pieces[agent]
    }

    pub fn agents(&self) -> usize {
        self.pieces.len()
    }

    /// `(start, end, agent)` triples sorted by position.
    pub fn segments(&self) -> Vec<(u32, u32, usize)> {
        let mut out: Vec<(u32, u32, usize)> = self
            .pieces
            .iter()
            .enumerate()
            .flat_map(|(agent, p)| p.intervals().iter().map(move |&(a, b)| (a, b, agent)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Inverse of [`Allocation::segments`].
    pub fn from_segments(
        cake: Cake,
        agents: usize,
        segments: &[(u32, u32, usize)],
    ) -> Result<Self, CakeError> {
        let mut raw: Vec<Vec<(u32, u32)>> = vec![Vec::new(); agents];
        for &(a, b, agent) in segments {
            if agent >= agents {
                return Err(CakeError::OutOfBounds {
                    start: a,
                    end: b,
                    width: cake.width(),
                });
            }
            raw[agent].push((a, b));
        }
        Allocation::new(cake, raw.into_iter().map(Piece::from_intervals).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piece_normalizes_adjacent_and_unsorted() {
        let p = Piece::from_intervals([(10, 20), (0, 5), (5, 10), (30, 30)]);
        assert_eq!(p.intervals(), &[(0, 20)]);
        assert_eq!(p.len(), 20);
    }

    #[test]
    fn overlap_detection() {
        let a = Piece::from_intervals([(0, 10), (20, 30)]);
        let b = Piece::interval(25, 40);
        assert_eq!(a.overlap(&b), Some((25, 30)));
        assert_eq!(a.overlap(&Piece::interval(10, 20)), None);
    }

    #[test]
    fn allocation_must_cover_and_not_overlap() {
        let cake = Cake::new(10).unwrap();
        assert!(Allocation::new(cake, vec![Piece::interval(0, 4), Piece::interval(4, 10)]).is_ok());
        assert_eq!(
            Allocation::new(cake, vec![Piece::interval(0, 4), Piece::interval(5, 10)]),
            Err(CakeError::Wasteful { start: 4, end: 5 })
        );
        assert!(matches!(
            Allocation::new(cake, vec![Piece::interval(0, 6), Piece::interval(4, 10)]),
            Err(CakeError::Overlap { .. })
        ));
        assert!(matches!(
            Allocation::new(cake, vec![Piece::interval(0, 11)]),
            Err(CakeError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn empty_pieces_are_legal_in_allocations() {
        let cake = Cake::new(4).unwrap();
        let alloc = Allocation::new(cake, vec![Piece::empty(), cake.whole()]).unwrap();
        assert_eq!(alloc.segments(), vec![(0, 4, 1)]);
        let back = Allocation::from_segments(cake, 2, &alloc.segments()).unwrap();
        assert_eq!(back, alloc);
    }

    #[test]
    fn narrow_cake_rejected() {
        assert_eq!(Cake::new(1), Err(CakeError::TooNarrow(1)));
        assert_eq!(
            Cake::lab().check_cut(601),
            Err(CakeError::CutOutOfBounds {
                cut: 601,
                width: 600
            })
        );
    }
}

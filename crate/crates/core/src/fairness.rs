//! Proportionality and envy audits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cake::{Allocation, CakeError, Points};
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub tolerance: Points,
    /// `points[i] = v_i(A_i)`.
    pub points: Vec<Points>,
    /// `envy_matrix[i][j] = v_i(A_j)`.
    pub envy_matrix: Vec<Vec<Points>>,
    pub proportional: Vec<bool>,
    pub envious: Vec<bool>,
}

impl FairnessReport {
    pub fn any_envy(&self) -> bool {
        self.envious.iter().any(|&e| e)
    }

    pub fn all_proportional(&self) -> bool {
        self.proportional.iter().all(|&p| p)
    }

    /// Whether agent `i` envies at a different tolerance.
    pub fn envious_at(&self, i: usize, tolerance: Points) -> bool {
        envies(&self.envy_matrix[i], i, tolerance)
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{valuations} valuations for {pieces} pieces")]
    SizeMismatch { valuations: usize, pieces: usize },
    #[error(transparent)]
    Cake(#[from] CakeError),
}

fn envies(row: &[Points], i: usize, tolerance: Points) -> bool {
    row.iter()
        .enumerate()
        .any(|(j, &v)| j != i && v > row[i] + tolerance)
}

/// Agent `i` is proportional iff `v_i(A_i) * n >= total_i`; envious iff some
/// `v_i(A_j) > v_i(A_i) + tolerance`.
pub fn audit(
    profile: &[Valuation],
    allocation: &Allocation,
    tolerance: Points,
) -> Result<FairnessReport, AuditError> {
    let n = allocation.agents();
    if profile.len() != n {
        return Err(AuditError::SizeMismatch {
            valuations: profile.len(),
            pieces: n,
        });
    }
    let envy_matrix = profile
        .iter()
        .map(|v| {
            allocation
                .pieces()
                .iter()
                .map(|p| v.value_of(p))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<Points> = (0..n).map(|i| envy_matrix[i][i]).collect();
    let proportional = (0..n)
        .map(|i| points[i] * n as Points >= profile[i].total())
        .collect();
    let envious = (0..n)
        .map(|i| envies(&envy_matrix[i], i, tolerance))
        .collect();
    Ok(FairnessReport {
        tolerance,
        points,
        envy_matrix,
        proportional,
        envious,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::{Cake, Piece};

    #[test]
    fn equal_split_of_uniform_is_fair() {
        let cake = Cake::lab();
        let v = Valuation::uniform(cake);
        let a = Allocation::new(
            cake,
            vec![Piece::interval(0, 300), Piece::interval(300, 600)],
        )
        .unwrap();
        let r = audit(&[v.clone(), v], &a, 0).unwrap();
        assert_eq!(r.points, vec![300, 300]);
        assert!(r.all_proportional());
        assert!(!r.any_envy());
    }

    #[test]
    fn envy_is_strict_and_tolerance_shrinks_it() {
        let cake = Cake::lab();
        let v = Valuation::uniform(cake);
        let a = Allocation::new(
            cake,
            vec![Piece::interval(0, 296), Piece::interval(296, 600)],
        )
        .unwrap();
        let r = audit(&[v.clone(), v.clone()], &a, 0).unwrap();
        assert_eq!(r.envious, vec![true, false]);
        assert!(!r.proportional[0]);
        assert!(r.envious_at(0, 5));
        assert!(!r.envious_at(0, 8));
        assert!(!audit(&[v.clone(), v], &a, 8).unwrap().envious[0]);
    }

    #[test]
    fn size_mismatch() {
        let cake = Cake::lab();
        let a = Allocation::new(cake, vec![cake.whole()]).unwrap();
        assert!(matches!(
            audit(&[], &a, 0),
            Err(AuditError::SizeMismatch { .. })
        ));
    }
}

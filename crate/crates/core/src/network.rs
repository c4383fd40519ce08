//! Static signed conflict topology and the dynamic belief network built from
//! broadcast commitments.

use std::collections::BTreeSet;

use crate::gate::Sigma;
use crate::geometry::{
    crossing_indicator, merge_indicator, IntersectionParams, Maneuver, PathSpec,
};

/// Dense square matrix with small integer entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<i8>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: i8) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Pairwise crossing (`crossing`), merge (`merge`) and signed (`signed`)
/// relations between the vehicles of one scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictTopology {
    pub crossing: SquareMatrix,
    pub merge: SquareMatrix,
    pub signed: SquareMatrix,
}

impl ConflictTopology {
    pub fn len(&self) -> usize {
        self.signed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signed.is_empty()
    }

    /// Antagonistic edge: the pair must be sequenced.
    pub fn conflicts(&self, i: usize, j: usize) -> bool {
        self.signed.get(i, j) == -1
    }

    pub fn crosses(&self, i: usize, j: usize) -> bool {
        self.crossing.get(i, j) == 1
    }

    pub fn merges(&self, i: usize, j: usize) -> bool {
        self.merge.get(i, j) == 1
    }
}

pub fn build_conflict_topology(
    maneuvers: &[Maneuver],
    paths: &[PathSpec],
    params: &IntersectionParams,
) -> ConflictTopology {
    assert_eq!(maneuvers.len(), paths.len(), "one path per maneuver");
    let n = maneuvers.len();
    let mut crossing = SquareMatrix::zeros(n);
    let mut merge = SquareMatrix::zeros(n);
    let mut signed = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let k = crossing_indicator(&paths[i], &paths[j], params) as i8;
            let m = merge_indicator(&maneuvers[i], &maneuvers[j]) as i8;
            let a = if k == 1 || m == 1 { -1 } else { 1 };
            for (x, y) in [(i, j), (j, i)] {
                crossing.set(x, y, k);
                merge.set(x, y, m);
                signed.set(x, y, a);
            }
        }
    }
    ConflictTopology {
        crossing,
        merge,
        signed,
    }
}

/// Directed belief matrix: row `i` holds what observer `i` believes about
/// every other vehicle's commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefState {
    pub matrix: SquareMatrix,
}

impl BeliefState {
    pub fn get(&self, observer: usize, subject: usize) -> i8 {
        self.matrix.get(observer, subject)
    }
}

/// Belief value encoded for a broadcast commitment.
pub fn belief_value(sigma: Sigma) -> i8 {
    match sigma {
        Sigma::Go => 1,
        Sigma::Yield => -1,
        Sigma::Negotiate | Sigma::Exit => 0,
    }
}

/// Rebuilds beliefs from the broadcast commitments (perfect V2V: every
/// observer receives the same value).
pub fn update_beliefs(sigmas: &[Sigma]) -> BeliefState {
    let n = sigmas.len();
    let mut matrix = SquareMatrix::zeros(n);
    for i in 0..n {
        for (j, &sigma) in sigmas.iter().enumerate() {
            if i != j {
                matrix.set(i, j, belief_value(sigma));
            }
        }
    }
    BeliefState { matrix }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChannelSets {
    /// Conflicting neighbors committed to GO.
    pub suppression: BTreeSet<usize>,
    /// Conflicting neighbors committed to YIELD.
    pub permission: BTreeSet<usize>,
    /// Cooperative neighbors with any commitment.
    pub coordination: BTreeSet<usize>,
}

impl ChannelSets {
    pub fn is_empty(&self) -> bool {
        self.suppression.is_empty() && self.permission.is_empty() && self.coordination.is_empty()
    }
}

pub fn channel_sets(i: usize, topology: &ConflictTopology, beliefs: &BeliefState) -> ChannelSets {
    let mut sets = ChannelSets::default();
    for j in (0..topology.len()).filter(|&j| j != i) {
        match (topology.signed.get(i, j), beliefs.get(i, j)) {
            (_, 0) => {}
            (-1, 1) => {
                sets.suppression.insert(j);
            }
            (-1, -1) => {
                sets.permission.insert(j);
            }
            (1, _) => {
                sets.coordination.insert(j);
            }
            _ => {}
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_path, maneuver};

    fn topology(pairs: &[(u8, u8)]) -> ConflictTopology {
        let params = IntersectionParams::default();
        let ms: Vec<_> = pairs
            .iter()
            .map(|&(i, o)| maneuver(i, o).unwrap())
            .collect();
        let ps: Vec<_> = ms
            .iter()
            .map(|m| build_path(*m, &params, 50.0).unwrap())
            .collect();
        build_conflict_topology(&ms, &ps, &params)
    }

    fn off_diagonal(t: &ConflictTopology) -> Vec<i8> {
        let n = t.len();
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| t.signed.get(i, j))
            .collect()
    }

    #[test]
    fn all_left_is_fully_antagonistic() {
        let t = topology(&[(1, 6), (3, 8), (5, 2), (7, 4)]);
        assert!(off_diagonal(&t).iter().all(|&a| a == -1));
        assert!((0..4).all(|i| (0..4).all(|j| i == j || t.crosses(i, j))));
    }

    #[test]
    fn all_right_is_fully_cooperative() {
        let t = topology(&[(1, 2), (3, 4), (5, 6), (7, 8)]);
        assert!(off_diagonal(&t).iter().all(|&a| a == 1));
    }

    #[test]
    fn single_vehicle() {
        let t = topology(&[(1, 4)]);
        assert_eq!(t.signed.get(0, 0), 0);
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn mixed_scenario_has_two_merges_one_crossing() {
        let t = topology(&[(1, 6), (3, 4), (5, 6), (7, 4)]);
        let pairs: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| ((i + 1)..4).map(move |j| (i, j)))
            .collect();
        let merges: Vec<_> = pairs.iter().filter(|&&(i, j)| t.merges(i, j)).collect();
        let crossings: Vec<_> = pairs.iter().filter(|&&(i, j)| t.crosses(i, j)).collect();
        assert_eq!(merges, vec![&(0, 2), &(1, 3)]);
        assert_eq!(crossings, vec![&(0, 3)]);
        assert!(t.signed.is_symmetric() && t.crossing.is_symmetric() && t.merge.is_symmetric());
    }

    #[test]
    fn beliefs_follow_commitments() {
        let b = update_beliefs(&[Sigma::Negotiate; 4]);
        assert!((0..4).all(|i| b.matrix.row(i).iter().all(|&x| x == 0)));

        let b = update_beliefs(&[Sigma::Go, Sigma::Yield, Sigma::Negotiate, Sigma::Negotiate]);
        for i in 0..4 {
            assert_eq!(b.get(i, 0), if i == 0 { 0 } else { 1 });
            assert_eq!(b.get(i, 1), if i == 1 { 0 } else { -1 });
            assert_eq!(b.get(i, 2), 0);
            assert_eq!(b.get(i, 3), 0);
        }

        let b = update_beliefs(&[Sigma::Exit, Sigma::Negotiate]);
        assert_eq!(b.get(1, 0), 0);
    }

    #[test]
    fn channel_membership() {
        // 0 conflicts with 1 and 2, cooperates with 3
        let t = topology(&[(1, 4), (7, 2), (3, 6), (5, 8)]);
        assert!(t.conflicts(0, 1) && t.conflicts(0, 2) && !t.conflicts(0, 3));
        let b = update_beliefs(&[Sigma::Negotiate, Sigma::Go, Sigma::Yield, Sigma::Negotiate]);
        let sets = channel_sets(0, &t, &b);
        assert_eq!(sets.suppression, BTreeSet::from([1]));
        assert_eq!(sets.permission, BTreeSet::from([2]));
        assert!(sets.coordination.is_empty());

        let b = update_beliefs(&[
            Sigma::Negotiate,
            Sigma::Negotiate,
            Sigma::Negotiate,
            Sigma::Go,
        ]);
        let sets = channel_sets(0, &t, &b);
        assert_eq!(sets.coordination, BTreeSet::from([3]));
        assert!(sets.suppression.is_empty() && sets.permission.is_empty());
    }
}

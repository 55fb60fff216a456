//! Topology-only node similarity: classic Dice and the degree-aware Dice
//! matrix.
//!
//! Classic Dice weighs two nodes purely by shared neighbors relative to
//! their degrees, so a high-degree neighbor can end up with a *lower* score
//! than a low-degree one. The degree-aware variant folds a closed-
//! neighborhood size ratio into the numerator so that, for a fixed target
//! and fixed common-neighbor count, better-connected nodes score strictly
//! higher. The resulting matrix is asymmetric in general.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::SegmentGraph;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    ClassicDice,
    ProposedDice,
}

/// Dense m x m similarity scores with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Matrix,
    kind: SimilarityKind,
}

impl SimilarityMatrix {
    /// Wraps precomputed scores, enforcing the value-range and zero-diagonal
    /// invariants.
    pub fn new(values: Matrix, kind: SimilarityKind) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(Error::ShapeMismatch {
                op: "SimilarityMatrix::new",
                lhs: values.shape(),
                rhs: (values.rows(), values.rows()),
            });
        }
        for i in 0..values.rows() {
            if values.get(i, i) != 0.0 {
                return Err(Error::InvalidInput(
                    "similarity diagonal must be zero".into(),
                ));
            }
            for j in 0..values.cols() {
                let v = values.get(i, j);
                let in_range = match kind {
                    SimilarityKind::ClassicDice => (0.0..=1.0).contains(&v),
                    SimilarityKind::ProposedDice => v >= 0.0 && v.is_finite(),
                };
                if !in_range {
                    return Err(Error::InvalidInput(alloc::format!(
                        "similarity entry ({i}, {j}) = {v} out of range"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { values, kind })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }
}

fn check_pair(g: &SegmentGraph, i: usize, j: usize) -> Result<()> {
    let m = g.node_count();
    if i >= m {
        return Err(Error::NodeOutOfRange { node: i, nodes: m });
    }
    if j >= m {
        return Err(Error::NodeOutOfRange { node: j, nodes: m });
    }
    if i == j {
        return Err(Error::SelfPair { node: i });
    }
    Ok(())
}

fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut n) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            core::cmp::Ordering::Less => x += 1,
            core::cmp::Ordering::Greater => y += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                x += 1;
                y += 1;
            }
        }
    }
    n
}

/// Number of shared neighbors of two distinct nodes; neighborhoods exclude
/// the node itself.
pub fn common_neighbors(g: &SegmentGraph, i: usize, j: usize) -> Result<usize> {
    check_pair(g, i, j)?;
    let lists = g.neighbor_lists();
    Ok(sorted_intersection_count(&lists[i], &lists[j]))
}

/// Classic Dice score `2 Con / (|N(i)| + |N(j)|)`; 0 when both
/// neighborhoods are empty.
pub fn dice_classic(g: &SegmentGraph, i: usize, j: usize) -> Result<f64> {
    check_pair(g, i, j)?;
    let lists = g.neighbor_lists();
    Ok(dice_classic_from_lists(&lists, i, j))
}

fn dice_classic_from_lists(lists: &[Vec<usize>], i: usize, j: usize) -> f64 {
    let denom = lists[i].len() + lists[j].len();
    if denom == 0 {
        return 0.0;
    }
    let con = sorted_intersection_count(&lists[i], &lists[j]);
    2.0 * con as f64 / denom as f64
}

/// Closed-neighborhood size ratio `|N(i) u {i}| / (|N(i) u {i}| + |N(j) u {j}|)`.
/// Always in (0, 1), and `degree_ratio(i, j) + degree_ratio(j, i) = 1`.
pub fn degree_ratio(g: &SegmentGraph, i: usize, j: usize) -> Result<f64> {
    check_pair(g, i, j)?;
    let lists = g.neighbor_lists();
    let ni = lists[i].len() + 1;
    let nj = lists[j].len() + 1;
    Ok(ni as f64 / (ni + nj) as f64)
}

fn proposed_entry(con: usize, closed_i: usize, closed_j: usize) -> f64 {
    let ratio = closed_i as f64 / (closed_i + closed_j) as f64;
    (con as f64 + ratio) / (closed_j as f64 + 1.0)
}

/// Degree-aware Dice matrix: entry `(i, j)` is
/// `(Con(i, j) + D(i, j)) / (|N(j) u {j}| + 1)` for `i != j`, diagonal 0.
///
/// Computed densely over all pairs: common neighbors can exist for
/// non-adjacent nodes, and downstream adjacency composition consumes the
/// full matrix.
pub fn dice_matrix(g: &SegmentGraph) -> SimilarityMatrix {
    let m = g.node_count();
    let lists = g.neighbor_lists();
    let closed: Vec<usize> = lists.iter().map(|l| l.len() + 1).collect();
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let con = sorted_intersection_count(&lists[i], &lists[j]);
            values.set(i, j, proposed_entry(con, closed[i], closed[j]));
        }
    }
    SimilarityMatrix {
        values,
        kind: SimilarityKind::ProposedDice,
    }
}

/// Classic Dice scores over all pairs, diagonal 0. Symmetric.
pub fn classic_dice_matrix(g: &SegmentGraph) -> SimilarityMatrix {
    let m = g.node_count();
    let lists = g.neighbor_lists();
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                values.set(i, j, dice_classic_from_lists(&lists, i, j));
            }
        }
    }
    SimilarityMatrix {
        values,
        kind: SimilarityKind::ClassicDice,
    }
}

/// Reference implementation of [`dice_matrix`] by explicit per-pair set
/// enumeration, sharing no intermediate results with the fast path. Intended
/// for verification on small graphs; both paths evaluate the same rational
/// expression on small integers, so they must agree exactly.
pub fn oracle_dice_matrix(g: &SegmentGraph) -> SimilarityMatrix {
    let m = g.node_count();
    let mut values = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            // Rebuild both neighborhoods from the edge set for every pair.
            let ni: Vec<usize> = (0..m).filter(|&k| k != i && g.has_edge(i, k)).collect();
            let nj: Vec<usize> = (0..m).filter(|&k| k != j && g.has_edge(j, k)).collect();
            let mut con = 0usize;
            for &a in &ni {
                for &b in &nj {
                    if a == b {
                        con += 1;
                    }
                }
            }
            values.set(i, j, proposed_entry(con, ni.len() + 1, nj.len() + 1));
        }
    }
    SimilarityMatrix {
        values,
        kind: SimilarityKind::ProposedDice,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{chain_graph, EdgeSet};

    fn graph_from_edges(m: usize, pairs: &[(usize, usize)]) -> SegmentGraph {
        let edges: EdgeSet = pairs.iter().copied().collect();
        SegmentGraph::new(m, edges, Matrix::zeros(m, 1), 0).unwrap()
    }

    #[test]
    fn common_neighbors_on_chain() {
        let g = chain_graph(3, 1);
        assert_eq!(common_neighbors(&g, 0, 2).unwrap(), 1);
        assert_eq!(common_neighbors(&g, 0, 1).unwrap(), 0);
        let iso = graph_from_edges(3, &[(0, 1)]);
        assert_eq!(common_neighbors(&iso, 1, 2).unwrap(), 0);
    }

    #[test]
    fn self_pair_is_an_error() {
        let g = chain_graph(3, 1);
        assert!(matches!(
            common_neighbors(&g, 1, 1),
            Err(Error::SelfPair { node: 1 })
        ));
        assert!(dice_classic(&g, 2, 2).is_err());
        assert!(degree_ratio(&g, 0, 0).is_err());
    }

    #[test]
    fn classic_dice_chain_hand_values() {
        let g = chain_graph(3, 1);
        assert_eq!(dice_classic(&g, 0, 2).unwrap(), 1.0);
        assert_eq!(dice_classic(&g, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn classic_dice_isolated_pair_is_zero() {
        let g = graph_from_edges(4, &[(0, 1)]);
        assert_eq!(dice_classic(&g, 2, 3).unwrap(), 0.0);
    }

    #[test]
    fn degree_ratio_chain_hand_values() {
        let g = chain_graph(3, 1);
        assert_eq!(degree_ratio(&g, 0, 2).unwrap(), 0.5);
        assert_eq!(degree_ratio(&g, 1, 0).unwrap(), 0.6);
    }

    #[test]
    fn degree_ratio_complement_identity() {
        let g = graph_from_edges(5, &[(0, 1), (0, 2), (1, 3), (1, 4), (2, 4)]);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    let sum = degree_ratio(&g, i, j).unwrap() + degree_ratio(&g, j, i).unwrap();
                    assert!((sum - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn proposed_dice_chain_hand_values() {
        let g = chain_graph(3, 1);
        let a = dice_matrix(&g);
        assert_eq!(a.get(0, 2), 0.5);
        assert!((a.get(0, 1) - 0.1).abs() < 1e-15);
        assert!((a.get(1, 0) - 0.2).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(a.get(i, i), 0.0);
        }
    }

    #[test]
    fn higher_degree_neighbor_scores_higher() {
        // Edges {(0,1),(0,2),(1,3),(1,4)}: node 1 has degree 3, node 2 degree 1.
        let g = graph_from_edges(5, &[(0, 1), (0, 2), (1, 3), (1, 4)]);
        let a = dice_matrix(&g);
        assert!((a.get(1, 0) - (4.0 / 7.0) / 4.0).abs() < 1e-15);
        assert!((a.get(2, 0) - 0.1).abs() < 1e-15);
        assert!(a.get(1, 0) > a.get(2, 0));
    }

    #[test]
    fn empty_graph_entries() {
        let g = graph_from_edges(3, &[]);
        let a = oracle_dice_matrix(&g);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 0.25 };
                assert_eq!(a.get(i, j), expect);
            }
        }
        assert_eq!(dice_matrix(&g).values(), a.values());
    }

    #[test]
    fn oracle_matches_fast_path_on_chain() {
        let g = chain_graph(6, 1);
        assert_eq!(dice_matrix(&g).values(), oracle_dice_matrix(&g).values());
    }
}

//! Sliding-window graph construction for framed sequences.
//!
//! An utterance arrives as a frame-feature matrix. A sliding window cuts it
//! into segments; each segment becomes one graph whose nodes are frames.
//! Nodes are wired to their temporal neighbors, plus a few seeded-random
//! long-range shortcuts so distant frames can exchange information.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-utterance matrix of frame feature vectors plus a class label.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    features: Matrix,
    label: usize,
    id: String,
}

impl FrameSequence {
    pub fn new(features: Matrix, label: usize, id: impl Into<String>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::InvalidInput(
                "frame sequence must have at least one frame and one feature".into(),
            ));
        }
        if !features.all_finite() {
            return Err(Error::NonFinite { op: "FrameSequence::new" });
        }
        Ok(FrameSequence {
            features,
            label,
            id: id.into(),
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// Number of frames T.
    pub fn frames(&self) -> usize {
        self.features.rows()
    }

    /// Feature dimension p.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

/// How edges are laid down on a segment's nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgePolicy {
    /// Connect nodes within this index distance (the temporal chain).
    pub neighbor_radius: usize,
    /// Random long-range partners drawn per node.
    pub random_edges_per_node: usize,
    /// Minimum index distance for a random edge.
    pub min_random_distance: usize,
    pub seed: u64,
}

impl Default for EdgePolicy {
    fn default() -> Self {
        EdgePolicy {
            neighbor_radius: 1,
            random_edges_per_node: 2,
            min_random_distance: 3,
            seed: 0,
        }
    }
}

impl EdgePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.neighbor_radius == 0 {
            return Err(Error::InvalidInput("neighbor_radius must be >= 1".into()));
        }
        if self.min_random_distance <= self.neighbor_radius {
            return Err(Error::InvalidInput(
                "min_random_distance must exceed neighbor_radius".into(),
            ));
        }
        Ok(())
    }
}

/// Undirected edge set over nodes `0..m`, stored as `(lo, hi)` pairs.
pub type EdgeSet = BTreeSet<(usize, usize)>;

/// One window's node set, edge topology, and node features.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGraph {
    m: usize,
    edges: EdgeSet,
    features: Matrix,
    segment_index: usize,
}

impl SegmentGraph {
    /// Builds a segment graph over an arbitrary topology. Self-edges and
    /// out-of-range node indices are rejected; the temporal chain is
    /// guaranteed only for graphs produced by [`build_topology`].
    pub fn new(m: usize, edges: EdgeSet, features: Matrix, segment_index: usize) -> Result<Self> {
        for &(i, j) in &edges {
            if i == j {
                return Err(Error::SelfPair { node: i });
            }
            if i > j {
                return Err(Error::InvalidInput(
                    "edges must be stored as (lo, hi) pairs".into(),
                ));
            }
            if j >= m {
                return Err(Error::NodeOutOfRange { node: j, nodes: m });
            }
        }
        if features.rows() != m {
            return Err(Error::ShapeMismatch {
                op: "SegmentGraph::new",
                lhs: (m, features.cols()),
                rhs: features.shape(),
            });
        }
        Ok(SegmentGraph {
            m,
            edges,
            features,
            segment_index,
        })
    }

    pub fn node_count(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn segment_index(&self) -> usize {
        self.segment_index
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.edges.contains(&key)
    }

    /// Open neighborhoods as sorted index lists, one per node.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = alloc::vec![Vec::new(); self.m];
        for &(i, j) in &self.edges {
            lists[i].push(j);
            lists[j].push(i);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        lists
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == node || j == node)
            .count()
    }
}

/// Ordered list of per-segment graphs for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicGraph {
    segments: Vec<SegmentGraph>,
    label: usize,
}

impl DynamicGraph {
    /// Segments a sequence and wires every segment with the same seeded
    /// topology.
    pub fn build(
        seq: &FrameSequence,
        window: usize,
        hop: usize,
        policy: &EdgePolicy,
    ) -> Result<Self> {
        policy.validate()?;
        let windows = segment(seq, window, hop)?;
        let topology = build_topology(window, policy);
        let segments = windows
            .into_iter()
            .enumerate()
            .map(|(s, features)| SegmentGraph::new(window, topology.clone(), features, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(DynamicGraph {
            segments,
            label: seq.label(),
        })
    }

    pub fn from_segments(segments: Vec<SegmentGraph>, label: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("a dynamic graph needs at least one segment".into()));
        }
        let m = segments[0].node_count();
        let p = segments[0].features().cols();
        for s in &segments {
            if s.node_count() != m || s.features().cols() != p {
                return Err(Error::ShapeMismatch {
                    op: "DynamicGraph::from_segments",
                    lhs: (m, p),
                    rhs: (s.node_count(), s.features().cols()),
                });
            }
        }
        Ok(DynamicGraph { segments, label })
    }

    pub fn segments(&self) -> &[SegmentGraph] {
        &self.segments
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn node_count(&self) -> usize {
        self.segments[0].node_count()
    }

    pub fn dim(&self) -> usize {
        self.segments[0].features().cols()
    }
}

/// Cuts the sequence into `floor((T - m)/h) + 1` windows of `m` frames at
/// hop `h`. A sequence shorter than one window yields a single window padded
/// with zero rows.
pub fn segment(seq: &FrameSequence, window: usize, hop: usize) -> Result<Vec<Matrix>> {
    if window < 2 {
        return Err(Error::InvalidInput("window must be at least 2 frames".into()));
    }
    if hop == 0 {
        return Err(Error::InvalidInput("hop must be at least 1".into()));
    }
    let total = seq.frames();
    let dim = seq.dim();
    if total == 0 {
        return Err(Error::InvalidInput("cannot segment an empty sequence".into()));
    }
    if total < window {
        let mut padded = Matrix::zeros(window, dim);
        for i in 0..total {
            for j in 0..dim {
                padded.set(i, j, seq.features().get(i, j));
            }
        }
        return Ok(alloc::vec![padded]);
    }
    let count = (total - window) / hop + 1;
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let start = s * hop;
        let w = Matrix::from_fn(window, dim, |i, j| seq.features().get(start + i, j));
        out.push(w);
    }
    Ok(out)
}

/// Edge set over `m` nodes: every pair within `neighbor_radius`, plus up to
/// `random_edges_per_node` seeded-random partners per node at index distance
/// `min_random_distance` or more. Deterministic for a fixed seed.
pub fn build_topology(m: usize, policy: &EdgePolicy) -> EdgeSet {
    let mut edges = EdgeSet::new();
    for i in 0..m {
        for j in (i + 1)..m.min(i + policy.neighbor_radius + 1) {
            edges.insert((i, j));
        }
    }
    if policy.random_edges_per_node > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
        for i in 0..m {
            let candidates: Vec<usize> = (0..m)
                .filter(|&j| j.abs_diff(i) >= policy.min_random_distance)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            for _ in 0..policy.random_edges_per_node {
                let j = candidates[rng.random_range(0..candidates.len())];
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    edges
}

/// Symmetric 0/1 adjacency with zero diagonal.
pub fn binary_adjacency(g: &SegmentGraph) -> Matrix {
    let mut a = Matrix::zeros(g.node_count(), g.node_count());
    for &(i, j) in g.edges() {
        a.set(i, j, 1.0);
        a.set(j, i, 1.0);
    }
    a
}

/// Distance-decayed adjacency: `1 / (1 + |i - j|)` on edges, 0 elsewhere.
pub fn weighted_distance_adjacency(g: &SegmentGraph) -> Matrix {
    let mut a = Matrix::zeros(g.node_count(), g.node_count());
    for &(i, j) in g.edges() {
        let w = 1.0 / (1.0 + i.abs_diff(j) as f64);
        a.set(i, j, w);
        a.set(j, i, w);
    }
    a
}

/// How positional edge weights grow with index distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositionalMode {
    /// `(i - j)^2` on edges, taken literally.
    #[default]
    Squared,
    /// `1 / (i - j)^2` on edges, for treating distance as a penalty.
    InverseSquared,
}

/// Positional adjacency restricted to the edge set; non-edges and the
/// diagonal stay 0.
pub fn positional_adjacency(g: &SegmentGraph, mode: PositionalMode) -> Matrix {
    let mut a = Matrix::zeros(g.node_count(), g.node_count());
    for &(i, j) in g.edges() {
        let d2 = (i.abs_diff(j) as f64) * (i.abs_diff(j) as f64);
        let w = match mode {
            PositionalMode::Squared => d2,
            PositionalMode::InverseSquared => 1.0 / d2,
        };
        a.set(i, j, w);
        a.set(j, i, w);
    }
    a
}

/// Diagonal matrix of row sums. Rejects non-square or negative input.
pub fn degree_matrix(a: &Matrix) -> Result<Matrix> {
    check_square_non_negative("degree_matrix", a)?;
    let mut d = Matrix::zeros(a.rows(), a.rows());
    for i in 0..a.rows() {
        d.set(i, i, a.row(i).iter().sum());
    }
    Ok(d)
}

/// `D^{-1/2} A D^{-1/2}` with `D` the degree matrix of `a` itself. Rows with
/// zero degree are an error; callers add self-loops first.
pub fn sym_normalize(a: &Matrix) -> Result<Matrix> {
    check_square_non_negative("sym_normalize", a)?;
    let n = a.rows();
    let mut inv_sqrt = Vec::with_capacity(n);
    for i in 0..n {
        let d: f64 = a.row(i).iter().sum();
        if d <= 0.0 {
            return Err(Error::ZeroRowSum { row: i });
        }
        inv_sqrt.push(1.0 / libm::sqrt(d));
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        a.get(i, j) * inv_sqrt[i] * inv_sqrt[j]
    }))
}

fn check_square_non_negative(op: &'static str, a: &Matrix) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape(),
            rhs: (a.rows(), a.rows()),
        });
    }
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            if a.get(i, j) < 0.0 {
                return Err(Error::NegativeEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Chain-only helper used widely in tests: nodes `0..m` wired `(i, i+1)`.
pub fn chain_graph(m: usize, dim: usize) -> SegmentGraph {
    let mut edges = EdgeSet::new();
    for i in 0..m.saturating_sub(1) {
        edges.insert((i, i + 1));
    }
    SegmentGraph::new(m, edges, Matrix::zeros(m, dim), 0).expect("chain graph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seq(t: usize, p: usize) -> FrameSequence {
        let features = Matrix::from_fn(t, p, |i, j| (i * p + j) as f64);
        FrameSequence::new(features, 0, "test").unwrap()
    }

    #[test]
    fn segment_counts_match_formula() {
        assert_eq!(segment(&seq(120, 3), 40, 40).unwrap().len(), 3);
        assert_eq!(segment(&seq(120, 3), 40, 20).unwrap().len(), 5);
    }

    #[test]
    fn short_sequence_pads_with_zero_rows() {
        let windows = segment(&seq(30, 2), 40, 20).unwrap();
        assert_eq!(windows.len(), 1);
        let w = &windows[0];
        assert_eq!(w.shape(), (40, 2));
        assert_eq!(w.get(29, 1), seq(30, 2).features().get(29, 1));
        for i in 30..40 {
            assert_eq!(w.row(i), &[0.0, 0.0]);
        }
    }

    #[test]
    fn segment_windows_cover_expected_frames() {
        let windows = segment(&seq(120, 1), 40, 20).unwrap();
        // Segment s covers frames [s*h, s*h + m).
        assert_eq!(windows[2].get(0, 0), 40.0);
        assert_eq!(windows[2].get(39, 0), 79.0);
    }

    #[test]
    fn chain_only_topology() {
        let policy = EdgePolicy {
            random_edges_per_node: 0,
            ..EdgePolicy::default()
        };
        let edges = build_topology(5, &policy);
        let expect: EdgeSet = [(0, 1), (1, 2), (2, 3), (3, 4)].into_iter().collect();
        assert_eq!(edges, expect);
    }

    #[test]
    fn topology_is_deterministic_per_seed() {
        let policy = EdgePolicy {
            seed: 42,
            ..EdgePolicy::default()
        };
        assert_eq!(build_topology(40, &policy), build_topology(40, &policy));
        let other = EdgePolicy {
            seed: 43,
            ..EdgePolicy::default()
        };
        assert_ne!(build_topology(40, &policy), build_topology(40, &other));
    }

    #[test]
    fn random_edges_respect_min_distance() {
        let policy = EdgePolicy {
            neighbor_radius: 1,
            random_edges_per_node: 2,
            min_random_distance: 3,
            seed: 7,
        };
        let edges = build_topology(40, &policy);
        for &(i, j) in &edges {
            let d = j - i;
            assert!(d == 1 || d >= 3, "edge ({i},{j}) violates the distance rule");
        }
        // Long-range shortcuts actually exist.
        assert!(edges.iter().any(|&(i, j)| j - i >= 3));
    }

    #[test]
    fn binary_adjacency_chain_hand_value() {
        let g = chain_graph(3, 1);
        let a = binary_adjacency(&g);
        assert_eq!(a.data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn weighted_adjacency_hand_values() {
        let mut edges = EdgeSet::new();
        edges.insert((0, 1));
        edges.insert((0, 4));
        let g = SegmentGraph::new(5, edges, Matrix::zeros(5, 1), 0).unwrap();
        let a = weighted_distance_adjacency(&g);
        assert_eq!(a.get(0, 1), 0.5);
        assert_eq!(a.get(0, 4), 0.2);
        assert_eq!(a.get(1, 4), 0.0);
        assert_eq!(a.get(2, 2), 0.0);
    }

    #[test]
    fn positional_adjacency_hand_values() {
        let mut edges = EdgeSet::new();
        edges.insert((0, 1));
        edges.insert((1, 3));
        let g = SegmentGraph::new(4, edges, Matrix::zeros(4, 1), 0).unwrap();
        let a = positional_adjacency(&g, PositionalMode::Squared);
        assert_eq!(a.get(1, 3), 4.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.get(0, 3), 0.0);
        let inv = positional_adjacency(&g, PositionalMode::InverseSquared);
        assert_eq!(inv.get(1, 3), 0.25);
    }

    #[test]
    fn degree_matrix_hand_values() {
        let g = chain_graph(3, 1);
        let d = degree_matrix(&binary_adjacency(&g)).unwrap();
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(1, 1), 2.0);
        assert_eq!(d.get(2, 2), 1.0);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(
            degree_matrix(&Matrix::zeros(3, 3)).unwrap(),
            Matrix::zeros(3, 3)
        );
        let row = Matrix::from_vec(1, 3, vec![0.5, 0.0, 0.2]).unwrap();
        // Non-square input is rejected, so embed in a 3x3.
        let mut m = Matrix::zeros(3, 3);
        for j in 0..3 {
            m.set(0, j, row.get(0, j));
        }
        assert!((degree_matrix(&m).unwrap().get(0, 0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn degree_matrix_rejects_negative_entries() {
        let mut a = Matrix::zeros(2, 2);
        a.set(0, 1, -1.0);
        assert!(matches!(
            degree_matrix(&a),
            Err(Error::NegativeEntry { row: 0, col: 1 })
        ));
    }

    #[test]
    fn sym_normalize_identity_is_identity() {
        let n = sym_normalize(&Matrix::identity(4)).unwrap();
        assert_eq!(n, Matrix::identity(4));
    }

    #[test]
    fn sym_normalize_chain_with_self_loops_hand_value() {
        let g = chain_graph(3, 1);
        let a = binary_adjacency(&g).add(&Matrix::identity(3)).unwrap();
        let n = sym_normalize(&a).unwrap();
        assert!((n.get(0, 1) - 1.0 / libm::sqrt(6.0)).abs() < 1e-12);
        assert!((n.get(0, 1) - 0.40825).abs() < 1e-5);
    }

    #[test]
    fn sym_normalize_rejects_zero_rows() {
        let g = chain_graph(3, 1);
        let a = binary_adjacency(&g);
        // Without self-loops the chain is fine, but an isolated node is not.
        let mut iso = Matrix::zeros(3, 3);
        iso.set(0, 1, 1.0);
        iso.set(1, 0, 1.0);
        assert!(sym_normalize(&a).is_ok());
        assert!(matches!(sym_normalize(&iso), Err(Error::ZeroRowSum { row: 2 })));
    }

    #[test]
    fn dynamic_graph_shares_topology_across_segments() {
        let policy = EdgePolicy {
            seed: 11,
            ..EdgePolicy::default()
        };
        let dg = DynamicGraph::build(&seq(120, 3), 40, 40, &policy).unwrap();
        assert_eq!(dg.segments().len(), 3);
        for s in dg.segments() {
            assert_eq!(s.edges(), dg.segments()[0].edges());
            // Temporal chain is always present in pipeline-built graphs.
            for i in 0..39 {
                assert!(s.has_edge(i, i + 1));
            }
        }
    }
}

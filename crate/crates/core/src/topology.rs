//! Adjacency/Laplacian algebra, algebraic connectivity, and
//! connectivity-preserving link removal.

use serde::{Deserialize, Serialize};

use crate::numerics::symmetric_eigenvalues;
use crate::Real;

/// Numerical-zero threshold separating lambda_2 = 0 from a connected graph.
pub const CONNECTIVITY_TOL: Real = 1e-6;

/// Symmetric 0/1 adjacency with zero diagonal, value semantics: every
/// mutation returns a new topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkTopology {
    n: usize,
    adj: Vec<u8>,
}

impl LinkTopology {
    pub fn empty(n: usize) -> Self {
        LinkTopology {
            n,
            adj: vec![0; n * n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut t = LinkTopology::empty(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    t.adj[i * n + j] = 1;
                }
            }
        }
        t
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut t = LinkTopology::empty(n);
        for &(i, j) in edges {
            t.set_link(i, j, true);
        }
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j] == 1
    }

    pub fn set_link(&mut self, i: usize, j: usize, on: bool) {
        assert_ne!(i, j, "no self links");
        let v = u8::from(on);
        self.adj[i * self.n + j] = v;
        self.adj[j * self.n + i] = v;
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.has_link(i, j)).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Number of undirected links.
    pub fn link_count(&self) -> usize {
        self.adj.iter().map(|&a| a as usize).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_link(i, j))
    }

    /// Dense 0/1 matrix for export.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.n)
            .map(|i| self.adj[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }
}

/// Degree and spectral summary of a topology.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub degree: Vec<usize>,
    pub lambda2: Real,
    pub connected: bool,
}

pub fn spectral_report(topo: &LinkTopology) -> SpectralReport {
    SpectralReport {
        degree: topo.degrees(),
        lambda2: algebraic_connectivity(topo),
        connected: is_connected(topo),
    }
}

/// Graph Laplacian L = D - A, row-major.
pub fn laplacian(topo: &LinkTopology) -> Vec<Real> {
    let n = topo.n();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        l[i * n + i] = topo.degree(i) as Real;
        for j in 0..n {
            if topo.has_link(i, j) {
                l[i * n + j] = -1.0;
            }
        }
    }
    l
}

/// Second-smallest Laplacian eigenvalue (algebraic connectivity); positive
/// iff the graph is connected.
pub fn algebraic_connectivity(topo: &LinkTopology) -> Real {
    let n = topo.n();
    assert!(n >= 2, "algebraic connectivity needs at least two nodes");
    let eig = symmetric_eigenvalues(&laplacian(topo), n);
    eig[1].max(0.0)
}

/// Breadth-first reachability from node 0.
pub fn is_connected(topo: &LinkTopology) -> bool {
    let n = topo.n();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in topo.neighbors(i) {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// Remove link (i, j) only if the graph stays connected; otherwise return
/// the original topology with `accepted = false`. Removing a non-existent
/// link is a rejected no-op.
pub fn guarded_remove(topo: &LinkTopology, i: usize, j: usize) -> (LinkTopology, bool) {
    if !topo.has_link(i, j) {
        return (topo.clone(), false);
    }
    let mut candidate = topo.clone();
    candidate.set_link(i, j, false);
    if is_connected(&candidate) {
        (candidate, true)
    } else {
        (topo.clone(), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_empty_graph_is_zero() {
        let l = laplacian(&LinkTopology::empty(3));
        assert!(l.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_k2() {
        let l = laplacian(&LinkTopology::from_edges(2, &[(0, 1)]));
        assert_eq!(l, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let t = LinkTopology::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let l = laplacian(&t);
        for i in 0..5 {
            let row: Real = l[i * 5..(i + 1) * 5].iter().sum();
            assert!(row.abs() < 1e-12);
        }
    }

    #[test]
    fn lambda2_complete_graph_is_n() {
        for n in 2..=6 {
            let l2 = algebraic_connectivity(&LinkTopology::complete(n));
            assert!((l2 - n as Real).abs() < 1e-9, "K_{n}: lambda2 = {l2}");
        }
    }

    #[test]
    fn lambda2_path_p3_is_one() {
        let t = LinkTopology::from_edges(3, &[(0, 1), (1, 2)]);
        assert!((algebraic_connectivity(&t) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lambda2_disconnected_is_zero() {
        let t = LinkTopology::from_edges(4, &[(0, 1), (2, 3)]);
        assert!(algebraic_connectivity(&t).abs() < 1e-9);
    }

    #[test]
    fn bfs_verdicts() {
        assert!(is_connected(&LinkTopology::from_edges(4, &[(0, 1), (1, 2), (2, 3)])));
        assert!(!is_connected(&LinkTopology::from_edges(3, &[(0, 1)])));
    }

    #[test]
    fn bfs_agrees_with_lambda2_on_all_n5_graphs() {
        // Exhaustive over all 2^10 graphs on five nodes.
        let pairs: Vec<(usize, usize)> = (0..5)
            .flat_map(|i| ((i + 1)..5).map(move |j| (i, j)))
            .collect();
        for mask in 0u32..(1 << 10) {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &e)| e)
                .collect();
            let t = LinkTopology::from_edges(5, &edges);
            let by_bfs = is_connected(&t);
            let by_lambda2 = algebraic_connectivity(&t) > CONNECTIVITY_TOL;
            assert_eq!(by_bfs, by_lambda2, "disagreement on mask {mask:#b}");
        }
    }

    #[test]
    fn lambda2_non_increasing_under_removal() {
        let t = LinkTopology::complete(5);
        let before = algebraic_connectivity(&t);
        let (after, ok) = guarded_remove(&t, 0, 1);
        assert!(ok);
        assert!(algebraic_connectivity(&after) <= before + 1e-12);
    }

    #[test]
    fn guarded_remove_rejects_bridges() {
        let tree = LinkTopology::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        for (i, j) in [(0, 1), (1, 2), (2, 3)] {
            let (out, ok) = guarded_remove(&tree, i, j);
            assert!(!ok);
            assert_eq!(out, tree);
        }
    }

    #[test]
    fn guarded_remove_accepts_cycle_chord() {
        let cycle = LinkTopology::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let (out, ok) = guarded_remove(&cycle, 0, 2);
        assert!(ok);
        assert!(is_connected(&out));
    }

    #[test]
    fn guarded_remove_k4_every_single_removal_accepted() {
        let k4 = LinkTopology::complete(4);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let (out, ok) = guarded_remove(&k4, i, j);
                assert!(ok, "removal ({i},{j}) should keep K4 connected");
                assert!(is_connected(&out));
            }
        }
    }

    #[test]
    fn guarded_remove_missing_link_is_rejected_noop() {
        let t = LinkTopology::from_edges(3, &[(0, 1), (1, 2)]);
        let (out, ok) = guarded_remove(&t, 0, 2);
        assert!(!ok);
        assert_eq!(out, t);
    }

    #[test]
    fn mutations_preserve_symmetry_and_zero_diagonal() {
        let mut t = LinkTopology::empty(4);
        t.set_link(1, 3, true);
        t.set_link(0, 2, true);
        t.set_link(1, 3, false);
        let m = t.matrix();
        for i in 0..4 {
            assert_eq!(m[i][i], 0);
            for j in 0..4 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }
}

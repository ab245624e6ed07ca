//! PageRank node scores on the undirected graph (in- and out-neighbors are
//! both the neighbor set). Rank held by isolated nodes is spread uniformly
//! so the scores keep summing to one.

use log::warn;

use crate::graph::AttributedGraph;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeScores {
    sn: Vec<f64>,
}

impl NodeScores {
    pub fn from_vec(sn: Vec<f64>) -> Self {
        NodeScores { sn }
    }

    pub fn get(&self, v: usize) -> f64 {
        self.sn[v]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sn
    }

    pub fn len(&self) -> usize {
        self.sn.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sn.is_empty()
    }
}

/// Power iteration until the L1 change drops below `tolerance` or
/// `max_iters` is reached (the last iterate is returned with a warning).
pub fn pagerank(graph: &AttributedGraph, damping: f64, tolerance: f64, max_iters: usize) -> NodeScores {
    let n = graph.node_count();
    if n == 0 {
        return NodeScores { sn: Vec::new() };
    }
    let nf = n as f64;
    let mut rank = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut share = vec![0.0; n];
    for iter in 0..max_iters {
        let mut dangling = 0.0;
        for v in 0..n {
            let deg = graph.degree(v);
            if deg == 0 {
                dangling += rank[v];
                share[v] = 0.0;
            } else {
                share[v] = rank[v] / deg as f64;
            }
        }
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for v in 0..n {
            let inflow: f64 = graph.neighbors(v).iter().map(|&u| share[u]).sum();
            next[v] = base + damping * inflow;
        }
        let change: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change < tolerance {
            return NodeScores { sn: rank };
        }
        if iter + 1 == max_iters {
            warn!("pagerank stopped after {max_iters} iterations (L1 change {change:.3e})");
        }
    }
    NodeScores { sn: rank }
}

pub fn default_pagerank(graph: &AttributedGraph) -> NodeScores {
    pagerank(graph, DEFAULT_DAMPING, DEFAULT_TOLERANCE, DEFAULT_MAX_ITERS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cycle(n: usize) -> AttributedGraph {
        AttributedGraph::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).unwrap()
    }

    #[test]
    fn cycle_is_uniform() {
        let s = default_pagerank(&cycle(7));
        assert!(s.as_slice().iter().all(|&x| (x - 1.0 / 7.0).abs() < 1e-6));
    }

    #[test]
    fn star_matches_linear_system() {
        // s_c = 0.0375 + 2.55 s_l, s_l = 0.0375 + (0.85/3) s_c
        let s_c = (0.0375 + 2.55 * 0.0375) / (1.0 - 2.55 * 0.85 / 3.0);
        let s_l = 0.0375 + 0.85 / 3.0 * s_c;
        let g = AttributedGraph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let s = default_pagerank(&g);
        assert!((s.get(0) - s_c).abs() < 1e-4);
        assert!((s_c - 0.4797).abs() < 1e-4);
        for leaf in 1..4 {
            assert!((s.get(leaf) - s_l).abs() < 1e-4);
        }
    }

    #[test]
    fn mirrored_components_and_isolated_nodes() {
        let g = AttributedGraph::from_edges(7, [(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        let s = default_pagerank(&g);
        for (a, b) in [(0, 3), (1, 4), (2, 5)] {
            assert!((s.get(a) - s.get(b)).abs() < 1e-12);
        }
        assert!(s.get(6) >= 0.15 / 7.0);
        assert!((s.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn relabeling_invariance(
            edges in proptest::collection::vec((0usize..9, 0usize..9), 0..20),
            perm_seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let edges: Vec<_> = edges.into_iter().filter(|(u, v)| u != v).collect();
            let mut perm: Vec<usize> = (0..9).collect();
            perm.shuffle(&mut crate::rng::stream_rng(perm_seed, 0));
            let g = AttributedGraph::from_edges(9, edges.iter().copied()).unwrap();
            let h = AttributedGraph::from_edges(9, edges.iter().map(|&(u, v)| (perm[u], perm[v]))).unwrap();
            let (sg, sh) = (default_pagerank(&g), default_pagerank(&h));
            for v in 0..9 {
                prop_assert!((sg.get(v) - sh.get(perm[v])).abs() < 1e-9);
                prop_assert!(sg.get(v) > 0.0);
            }
            prop_assert!((sg.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}

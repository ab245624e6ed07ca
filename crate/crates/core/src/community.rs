//! Louvain community detection (resolution 1) and Newman modularity.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{FimError, Result};
use crate::graph::AttributedGraph;
use crate::rng::{mix_seed, stream_rng};

/// Stop a level once a full pass gains less than this much modularity.
const MIN_PASS_GAIN: f64 = 1e-7;
const MOVE_EPS: f64 = 1e-12;

/// Node to community assignment. Communities are numbered by their lowest
/// member id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    communities: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct PartitionJson {
    assignment: Vec<usize>,
}

impl Partition {
    /// Canonicalizes an arbitrary labelling.
    pub fn from_assignment(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut assignment = Vec::with_capacity(labels.len());
        let mut communities: Vec<Vec<usize>> = Vec::new();
        for (v, &l) in labels.iter().enumerate() {
            let next = remap.len();
            let c = *remap.entry(l).or_insert(next);
            if c == communities.len() {
                communities.push(Vec::new());
            }
            communities[c].push(v);
            assignment.push(c);
        }
        Partition {
            assignment,
            communities,
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_assignment(&(0..n).collect::<Vec<_>>())
    }

    pub fn community_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn community(&self, c: usize) -> &[usize] {
        &self.communities[c]
    }

    pub fn communities(&self) -> &[Vec<usize>] {
        &self.communities
    }

    pub fn community_count(&self) -> usize {
        self.communities.len()
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PartitionJson {
            assignment: self.assignment.clone(),
        })
        .expect("partition serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: PartitionJson = serde_json::from_str(text)?;
        Ok(Self::from_assignment(&parsed.assignment))
    }
}

/// Q = Σ_c (e_c / w − (d_c / 2w)²). Edgeless graphs score 0.
pub fn modularity(graph: &AttributedGraph, partition: &Partition) -> f64 {
    let w = graph.edge_count() as f64;
    if w == 0.0 {
        return 0.0;
    }
    let m = partition.community_count();
    let mut internal = vec![0.0; m];
    let mut degree = vec![0.0; m];
    for &(u, v) in graph.edges() {
        let cu = partition.community_of(u);
        if cu == partition.community_of(v) {
            internal[cu] += 1.0;
        }
    }
    for v in 0..graph.node_count() {
        degree[partition.community_of(v)] += graph.degree(v) as f64;
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(e, d)| e / w - (d / (2.0 * w)).powi(2))
        .sum()
}

/// Weighted graph used at each aggregation level. `loops[i]` is the weight
/// of edges folded inside super-node `i`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
    degree: Vec<f64>,
}

impl Level {
    fn from_graph(graph: &AttributedGraph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = (0..graph.node_count())
            .map(|v| graph.neighbors(v).iter().map(|&u| (u, 1.0)).collect())
            .collect();
        let degree = adj.iter().map(|a| a.len() as f64).collect();
        Level {
            loops: vec![0.0; adj.len()],
            adj,
            degree,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn aggregate(&self, community: &[usize], count: usize) -> Level {
        let mut weights = vec![std::collections::BTreeMap::<usize, f64>::new(); count];
        let mut loops = vec![0.0; count];
        let mut degree = vec![0.0; count];
        for v in 0..self.len() {
            let cv = community[v];
            loops[cv] += self.loops[v];
            degree[cv] += self.degree[v];
            for &(u, w) in &self.adj[v] {
                let cu = community[u];
                if cu == cv {
                    // each internal edge is seen from both endpoints
                    loops[cv] += w / 2.0;
                } else {
                    *weights[cv].entry(cu).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
            loops,
            degree,
        }
    }
}

/// Outcome of a Louvain run, with modularity recorded after every local
/// moving pass (used by tests to check passes never lose modularity).
#[derive(Debug, Clone)]
pub struct LouvainRun {
    pub partition: Partition,
    pub pass_modularity: Vec<f64>,
}

/// Independent Louvain trials per call; the highest-modularity one wins.
pub const LOUVAIN_TRIALS: u64 = 8;

/// Multi-level Louvain. Node visit order at each level is a shuffle driven by
/// `rng_seed`; equal-gain moves go to the lowest community index, and a node
/// stays put unless a move strictly improves modularity. Runs
/// [`LOUVAIN_TRIALS`] seeded trials and keeps the best (earliest on ties).
pub fn louvain(graph: &AttributedGraph, rng_seed: u64) -> Result<Partition> {
    Ok(louvain_traced(graph, rng_seed)?.partition)
}

pub fn louvain_traced(graph: &AttributedGraph, rng_seed: u64) -> Result<LouvainRun> {
    let mut best: Option<(f64, LouvainRun)> = None;
    for trial in 0..LOUVAIN_TRIALS {
        let run = louvain_trial(graph, mix_seed(rng_seed, trial))?;
        let q = modularity(graph, &run.partition);
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, run));
        }
    }
    Ok(best.expect("at least one trial").1)
}

/// One multi-level Louvain run.
pub fn louvain_trial(graph: &AttributedGraph, rng_seed: u64) -> Result<LouvainRun> {
    let n = graph.node_count();
    if n == 0 {
        return Err(FimError::Contract("louvain needs at least one node".into()));
    }
    let m = graph.edge_count() as f64;
    let mut pass_modularity = vec![modularity(graph, &Partition::singletons(n))];
    if m == 0.0 {
        return Ok(LouvainRun {
            partition: Partition::singletons(n),
            pass_modularity,
        });
    }
    let base = Level::from_graph(graph);
    let mut rng = stream_rng(rng_seed, 0);
    let mut labels: Vec<usize> = (0..n).collect();

    // Each round re-enters at node level from the previous result, so the
    // returned partition is also stable under single-node moves.
    for round in 0..MAX_ROUNDS {
        let mut level_owned: Option<Level> = None;
        let mut membership: Vec<usize> = (0..n).collect();
        let mut community = labels.clone();
        let mut first_level = true;
        loop {
            let level = level_owned.as_ref().unwrap_or(&base);
            let moved = local_moving(level, &mut community, m, &mut rng, |c| {
                let snapshot = project(&membership, c);
                pass_modularity.push(modularity(graph, &Partition::from_assignment(&snapshot)));
            });
            if first_level && !moved && round > 0 {
                return Ok(LouvainRun {
                    partition: Partition::from_assignment(&labels),
                    pass_modularity,
                });
            }
            let compact = Partition::from_assignment(&community);
            let count = compact.community_count();
            membership = project(&membership, compact.assignment());
            if (!moved && !first_level) || count == level.len() {
                break;
            }
            let next = level.aggregate(compact.assignment(), count);
            community = (0..count).collect();
            level_owned = Some(next);
            first_level = false;
        }
        labels = Partition::from_assignment(&membership).assignment().to_vec();
    }
    Ok(LouvainRun {
        partition: Partition::from_assignment(&labels),
        pass_modularity,
    })
}

const MAX_ROUNDS: usize = 16;

/// Repeated local-moving passes over `level` starting from `community`,
/// until a pass gains less than `MIN_PASS_GAIN`. Returns whether any node
/// moved. `after_pass` sees the assignment after each pass.
fn local_moving<R: rand::Rng>(
    level: &Level,
    community: &mut [usize],
    m: f64,
    rng: &mut R,
    mut after_pass: impl FnMut(&[usize]),
) -> bool {
    let size = level.len();
    let mut total = vec![0.0; size];
    for v in 0..size {
        total[community[v]] += level.degree[v];
    }
    let mut order: Vec<usize> = (0..size).collect();
    order.shuffle(rng);
    let mut moved_any = false;
    let mut link = vec![0.0; size];
    let mut touched = Vec::new();
    loop {
        let mut pass_gain = 0.0;
        for &v in &order {
            let k = level.degree[v];
            let own = community[v];
            for &(u, w) in &level.adj[v] {
                let c = community[u];
                if link[c] == 0.0 {
                    touched.push(c);
                }
                link[c] += w;
            }
            total[own] -= k;
            let gain_of = |c: usize, tot: &[f64]| link[c] / m - k * tot[c] / (2.0 * m * m);
            let stay = gain_of(own, &total);
            let mut best = own;
            let mut best_gain = stay;
            touched.sort_unstable();
            for &c in &touched {
                if c == own {
                    continue;
                }
                let g = gain_of(c, &total);
                if g > best_gain + MOVE_EPS {
                    best = c;
                    best_gain = g;
                }
            }
            total[best] += k;
            if best != own {
                community[v] = best;
                pass_gain += best_gain - stay;
                moved_any = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
        }
        after_pass(community);
        if pass_gain < MIN_PASS_GAIN {
            return moved_any;
        }
    }
}

fn project(membership: &[usize], community: &[usize]) -> Vec<usize> {
    membership.iter().map(|&s| community[s]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::karate_club;

    fn two_triangles() -> AttributedGraph {
        AttributedGraph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    fn complete(n: usize) -> AttributedGraph {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        AttributedGraph::from_edges(n, edges).unwrap()
    }

    /// All set partitions of `0..n` as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == n {
                out.push(prefix.clone());
                return;
            }
            let max = prefix.iter().copied().max().map_or(0, |m| m + 1);
            for c in 0..=max {
                prefix.push(c);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), n, &mut out);
        out
    }

    #[test]
    fn modularity_closed_forms() {
        let g = two_triangles();
        let one = Partition::from_assignment(&[0; 6]);
        assert!(modularity(&g, &one).abs() < 1e-15);
        let split = Partition::from_assignment(&[0, 0, 0, 1, 1, 1]);
        assert!((modularity(&g, &split) - 0.5).abs() < 1e-15);
        let c4 = AttributedGraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert!((modularity(&c4, &Partition::singletons(4)) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn disjoint_triangles_split() {
        let p = louvain(&two_triangles(), 3).unwrap();
        assert_eq!(p.community_count(), 2);
        assert_eq!(p.community(0), &[0, 1, 2]);
        assert_eq!(p.community(1), &[3, 4, 5]);
    }

    #[test]
    fn k5_single_community_is_brute_force_optimum() {
        let g = complete(5);
        let best = all_partitions(5)
            .iter()
            .map(|a| modularity(&g, &Partition::from_assignment(a)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best.abs() < 1e-12, "no split of K5 beats Q = 0");
        for seed in 0..5 {
            assert_eq!(louvain(&g, seed).unwrap().community_count(), 1);
        }
    }

    #[test]
    fn karate_modularity() {
        let g = karate_club();
        for seed in 0..5 {
            let p = louvain(&g, seed).unwrap();
            assert!(modularity(&g, &p) >= 0.40, "seed {seed}: {}", modularity(&g, &p));
        }
    }

    #[test]
    fn isolated_nodes_stay_alone() {
        let g = AttributedGraph::from_edges(5, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = louvain(&g, 0).unwrap();
        assert_eq!(p.community_count(), 3);
        assert_eq!(p.community(1), &[3]);
        assert_eq!(p.community(2), &[4]);
        let empty = AttributedGraph::from_edges(3, []).unwrap();
        assert_eq!(louvain(&empty, 0).unwrap().community_count(), 3);
    }

    #[test]
    fn passes_never_lose_modularity_and_seed_reproduces() {
        let g = karate_club();
        let run = louvain_traced(&g, 17).unwrap();
        for w in run.pass_modularity.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{:?}", run.pass_modularity);
        }
        assert_eq!(louvain(&g, 17).unwrap(), run.partition);
    }

    #[test]
    fn result_is_stable_under_single_node_moves() {
        let g = karate_club();
        for seed in 0..4 {
            let p = louvain(&g, seed).unwrap();
            let q = modularity(&g, &p);
            let mut labels = p.assignment().to_vec();
            for v in 0..g.node_count() {
                let own = labels[v];
                for c in 0..p.community_count() {
                    labels[v] = c;
                    let moved = modularity(&g, &Partition::from_assignment(&labels));
                    assert!(moved <= q + 1e-9, "moving {v} to {c} improves {q} -> {moved}");
                }
                labels[v] = own;
            }
        }
    }

    #[test]
    fn partition_json_round_trip() {
        let p = louvain(&karate_club(), 1).unwrap();
        let back = Partition::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert!(p.to_json().starts_with("{\"assignment\":["));
    }

    #[test]
    fn empty_graph_is_contract_violation() {
        let g = AttributedGraph::from_edges(0, []).unwrap();
        assert!(louvain(&g, 0).is_err());
    }
}

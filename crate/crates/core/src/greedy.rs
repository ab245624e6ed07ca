//! Lazy-greedy (CELF) seed selection on a live-edge ensemble, and the
//! per-group greedy baselines used as DCV denominators.
//!
//! Marginal gains are kept as integer reach counts summed over samples, so
//! lazy and eager greedy make identical choices: ties always go to the lowest
//! node id.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{sample_ensemble, LiveEdgeEnsemble};
use crate::error::{FimError, Result};
use crate::graph::{induced_subgraph, AttributedGraph};
use crate::rng::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub seeds: Vec<usize>,
    /// `curve[i]` is the estimated influence of the first `i + 1` seeds.
    pub curve: Vec<f64>,
}

impl GreedyResult {
    pub fn influence(&self) -> f64 {
        self.curve.last().copied().unwrap_or(0.0)
    }
}

/// Per-sample reach of the current seed set.
struct Coverage<'a> {
    ensemble: &'a LiveEdgeEnsemble,
    covered: Vec<Vec<bool>>,
}

impl<'a> Coverage<'a> {
    fn new(ensemble: &'a LiveEdgeEnsemble) -> Self {
        let n = ensemble.node_count();
        Coverage {
            ensemble,
            covered: vec![vec![false; n]; ensemble.sample_count()],
        }
    }

    /// Nodes newly reached from `v`, summed over samples. The BFS never
    /// enters covered nodes: the covered set is closed under live arcs.
    fn gain(&self, v: usize, seen: &mut Vec<u32>, queue: &mut VecDeque<usize>) -> u64 {
        let mut total = 0u64;
        for (s, sample) in self.ensemble.samples().iter().enumerate() {
            let covered = &self.covered[s];
            if covered[v] {
                continue;
            }
            let stamp = s as u32 + 1;
            seen[v] = stamp;
            queue.push_back(v);
            while let Some(u) = queue.pop_front() {
                total += 1;
                for &w in sample.out_arcs(u) {
                    let w = w as usize;
                    if !covered[w] && seen[w] != stamp {
                        seen[w] = stamp;
                        queue.push_back(w);
                    }
                }
            }
        }
        seen.iter_mut().for_each(|x| *x = 0);
        total
    }

    fn add(&mut self, v: usize) {
        let mut queue = VecDeque::new();
        for (s, sample) in self.ensemble.samples().iter().enumerate() {
            let covered = &mut self.covered[s];
            if covered[v] {
                continue;
            }
            covered[v] = true;
            queue.push_back(v);
            while let Some(u) = queue.pop_front() {
                for &w in sample.out_arcs(u) {
                    let w = w as usize;
                    if !covered[w] {
                        covered[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
    }
}

#[derive(PartialEq, Eq)]
struct Candidate {
    gain: u64,
    node: usize,
    round: usize,
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_k(ensemble: &LiveEdgeEnsemble, graph: &AttributedGraph, k: usize) -> Result<()> {
    if graph.node_count() != ensemble.node_count() {
        return Err(FimError::Contract("ensemble and graph sizes differ".into()));
    }
    if k == 0 || k > graph.node_count() {
        return Err(FimError::Contract(format!(
            "greedy needs 1 <= k <= {}, got {k}",
            graph.node_count()
        )));
    }
    Ok(())
}

/// CELF lazy greedy maximizing estimated spread.
pub fn greedy_celf(ensemble: &LiveEdgeEnsemble, graph: &AttributedGraph, k: usize) -> Result<GreedyResult> {
    check_k(ensemble, graph, k)?;
    let n = graph.node_count();
    let delta = ensemble.sample_count() as f64;
    let mut coverage = Coverage::new(ensemble);
    let initial: Vec<u64> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0u32; n], VecDeque::new()),
            |(seen, queue), v| coverage.gain(v, seen, queue),
        )
        .collect();
    let mut heap: BinaryHeap<Candidate> = initial
        .into_iter()
        .enumerate()
        .map(|(node, gain)| Candidate { gain, node, round: 0 })
        .collect();
    let mut seen = vec![0u32; n];
    let mut queue = VecDeque::new();
    let mut seeds = Vec::with_capacity(k);
    let mut curve = Vec::with_capacity(k);
    let mut reached = 0u64;
    while seeds.len() < k {
        let top = heap.pop().expect("heap holds every unselected node");
        if top.round == seeds.len() {
            coverage.add(top.node);
            reached += top.gain;
            seeds.push(top.node);
            curve.push(reached as f64 / delta);
        } else {
            let gain = coverage.gain(top.node, &mut seen, &mut queue);
            heap.push(Candidate {
                gain,
                node: top.node,
                round: seeds.len(),
            });
        }
    }
    Ok(GreedyResult { seeds, curve })
}

/// Eager greedy: re-evaluates every candidate each round. Reference for CELF.
pub fn greedy_naive(ensemble: &LiveEdgeEnsemble, graph: &AttributedGraph, k: usize) -> Result<GreedyResult> {
    check_k(ensemble, graph, k)?;
    let n = graph.node_count();
    let delta = ensemble.sample_count() as f64;
    let mut coverage = Coverage::new(ensemble);
    let mut seen = vec![0u32; n];
    let mut queue = VecDeque::new();
    let mut chosen = vec![false; n];
    let mut seeds = Vec::with_capacity(k);
    let mut curve = Vec::with_capacity(k);
    let mut reached = 0u64;
    for _ in 0..k {
        let mut best: Option<(u64, usize)> = None;
        for v in (0..n).filter(|&v| !chosen[v]) {
            let g = coverage.gain(v, &mut seen, &mut queue);
            if best.is_none_or(|(bg, _)| g > bg) {
                best = Some((g, v));
            }
        }
        let (g, v) = best.expect("k <= n leaves a candidate");
        chosen[v] = true;
        coverage.add(v);
        reached += g;
        seeds.push(v);
        curve.push(reached as f64 / delta);
    }
    Ok(GreedyResult { seeds, curve })
}

/// Greedy inside `G[R_group]` with a dedicated ensemble. Seeds are returned
/// as parent-graph ids.
pub fn greedy_in_group(
    graph: &AttributedGraph,
    group: usize,
    k: usize,
    p: f64,
    sample_count: usize,
    rng_seed: u64,
) -> Result<GreedyResult> {
    let sub = induced_subgraph(graph, graph.group(group))?;
    let ensemble = sample_ensemble(&sub.graph, p, sample_count, rng_seed)?;
    let mut result = greedy_celf(&ensemble, &sub.graph, k)?;
    for s in &mut result.seeds {
        *s = sub.to_parent[*s];
    }
    Ok(result)
}

/// The DCV reference values: for each group, the spread greedy reaches in
/// `G[R_i]` with `k_i = ceil(k |R_i| / n)` seeds (capped at `|R_i|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBaselines {
    pub seeds_per_group: Vec<usize>,
    pub influence: Vec<f64>,
}

/// `ceil(k * size / n)`.
pub fn proportional_budget(k: usize, size: usize, n: usize) -> usize {
    (k * size).div_ceil(n)
}

/// Group `g` uses ensemble seed `mix_seed(rng_seed, g)`.
pub fn group_baselines(
    graph: &AttributedGraph,
    k: usize,
    p: f64,
    sample_count: usize,
    rng_seed: u64,
) -> Result<GroupBaselines> {
    graph.require_groups()?;
    let n = graph.node_count();
    let seeds_per_group: Vec<usize> = graph
        .groups()
        .iter()
        .map(|members| proportional_budget(k, members.len(), n).min(members.len()))
        .collect();
    let influence = seeds_per_group
        .par_iter()
        .enumerate()
        .map(|(g, &kg)| {
            greedy_in_group(graph, g, kg, p, sample_count, mix_seed(rng_seed, g as u64))
                .map(|r| r.influence())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GroupBaselines {
        seeds_per_group,
        influence,
    })
}

//! Independent-cascade influence estimation over pre-sampled live-edge graphs.
//!
//! Every undirected edge contributes two arcs, each kept independently with
//! probability `p` in every sample. The spread of a seed set in one sample is
//! the number of nodes reachable from it; the estimate is the sample mean.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FimError, Result};
use crate::graph::AttributedGraph;
use crate::rng::stream_rng;

static NEXT_ENSEMBLE_ID: AtomicU64 = AtomicU64::new(1);

/// One live-edge graph in CSR form.
#[derive(Debug, Clone)]
pub struct LiveEdgeSample {
    offsets: Vec<u32>,
    targets: Vec<u32>,
}

impl LiveEdgeSample {
    pub fn out_arcs(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn arc_count(&self) -> usize {
        self.targets.len()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.offsets.len() - 1)
            .flat_map(move |u| self.out_arcs(u).iter().map(move |&v| (u, v as usize)))
    }
}

#[derive(Debug, Clone)]
pub struct LiveEdgeEnsemble {
    samples: Vec<LiveEdgeSample>,
    node_count: usize,
    p: f64,
    rng_seed: u64,
    id: u64,
}

impl LiveEdgeEnsemble {
    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn sample(&self, i: usize) -> &LiveEdgeSample {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[LiveEdgeSample] {
        &self.samples
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn probability(&self) -> f64 {
        self.p
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    /// Process-unique identity, used to tag cached fitness values.
    pub fn id(&self) -> u64 {
        self.id
    }

    fn check_graph(&self, graph: &AttributedGraph) -> Result<()> {
        if graph.node_count() != self.node_count {
            return Err(FimError::Contract(format!(
                "ensemble built for {} nodes used with a {}-node graph",
                self.node_count,
                graph.node_count()
            )));
        }
        Ok(())
    }
}

/// Draws `sample_count` live-edge graphs. Sample `i` uses substream `i` of
/// `rng_seed`, so the result does not depend on how sampling is scheduled.
pub fn sample_ensemble(
    graph: &AttributedGraph,
    p: f64,
    sample_count: usize,
    rng_seed: u64,
) -> Result<LiveEdgeEnsemble> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FimError::Validation(format!("propagation probability {p} outside [0, 1]")));
    }
    if sample_count == 0 {
        return Err(FimError::Validation("ensemble needs at least one sample".into()));
    }
    let n = graph.node_count();
    let samples = (0..sample_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(rng_seed, i as u64);
            let mut offsets = Vec::with_capacity(n + 1);
            let mut targets = Vec::new();
            offsets.push(0u32);
            for u in 0..n {
                for &v in graph.neighbors(u) {
                    if p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p) {
                        targets.push(v as u32);
                    }
                }
                offsets.push(targets.len() as u32);
            }
            LiveEdgeSample { offsets, targets }
        })
        .collect();
    Ok(LiveEdgeEnsemble {
        samples,
        node_count: n,
        p,
        rng_seed,
        id: NEXT_ENSEMBLE_ID.fetch_add(1, Ordering::Relaxed),
    })
}

/// Expected activations overall and inside each group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEstimate {
    pub total: f64,
    pub per_group: Vec<f64>,
}

/// Reusable BFS state; `stamp` avoids clearing the visited array.
struct Reach {
    mark: Vec<u32>,
    stamp: u32,
    queue: VecDeque<usize>,
}

impl Reach {
    fn new(n: usize) -> Self {
        Reach {
            mark: vec![0; n],
            stamp: 0,
            queue: VecDeque::new(),
        }
    }

    fn next_stamp(&mut self) -> u32 {
        if self.stamp == u32::MAX {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 0;
        }
        self.stamp += 1;
        self.stamp
    }

    /// Visits every node reachable from `seeds` in `sample`, seeds included.
    fn visit(&mut self, sample: &LiveEdgeSample, seeds: &[usize], mut on_reach: impl FnMut(usize)) {
        let stamp = self.next_stamp();
        for &s in seeds {
            if self.mark[s] != stamp {
                self.mark[s] = stamp;
                self.queue.push_back(s);
                on_reach(s);
            }
        }
        while let Some(u) = self.queue.pop_front() {
            for &v in sample.out_arcs(u) {
                let v = v as usize;
                if self.mark[v] != stamp {
                    self.mark[v] = stamp;
                    self.queue.push_back(v);
                    on_reach(v);
                }
            }
        }
    }
}

fn check_seeds(graph: &AttributedGraph, seeds: &[usize]) -> Result<()> {
    if seeds.is_empty() {
        return Err(FimError::Contract("seed set must be nonempty".into()));
    }
    if let Some(&bad) = seeds.iter().find(|&&s| s >= graph.node_count()) {
        return Err(FimError::UnknownNode(bad as u64));
    }
    Ok(())
}

/// Mean reachable-set size of `seeds` over the ensemble, overall and per
/// group. A node in several groups counts toward each of them.
pub fn estimate_influence(
    ensemble: &LiveEdgeEnsemble,
    graph: &AttributedGraph,
    seeds: &[usize],
) -> Result<InfluenceEstimate> {
    ensemble.check_graph(graph)?;
    check_seeds(graph, seeds)?;
    let mut reach = Reach::new(graph.node_count());
    let mut total = 0u64;
    let mut per_group = vec![0u64; graph.group_count()];
    for sample in &ensemble.samples {
        reach.visit(sample, seeds, |v| {
            total += 1;
            for &g in graph.memberships(v) {
                per_group[g] += 1;
            }
        });
    }
    let delta = ensemble.sample_count() as f64;
    Ok(InfluenceEstimate {
        total: total as f64 / delta,
        per_group: per_group.into_iter().map(|c| c as f64 / delta).collect(),
    })
}

/// Reachable-set size of `seeds` in each sample, for variance estimates.
pub fn influence_samples(
    ensemble: &LiveEdgeEnsemble,
    graph: &AttributedGraph,
    seeds: &[usize],
) -> Result<Vec<u32>> {
    ensemble.check_graph(graph)?;
    check_seeds(graph, seeds)?;
    let mut reach = Reach::new(graph.node_count());
    Ok(ensemble
        .samples
        .iter()
        .map(|sample| {
            let mut count = 0u32;
            reach.visit(sample, seeds, |_| count += 1);
            count
        })
        .collect())
}

/// Activated-node counts from `runs` round-by-round cascade simulations.
/// Each newly active node gets a single activation attempt on each inactive
/// neighbor; the cascade ends when a round activates nobody.
pub fn direct_ic_runs(
    graph: &AttributedGraph,
    seeds: &[usize],
    p: f64,
    runs: usize,
    rng_seed: u64,
) -> Result<Vec<usize>> {
    check_seeds(graph, seeds)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(FimError::Validation(format!("propagation probability {p} outside [0, 1]")));
    }
    let n = graph.node_count();
    let mut rng = stream_rng(rng_seed, 0);
    let mut active = vec![false; n];
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        active.iter_mut().for_each(|a| *a = false);
        let mut frontier: Vec<usize> = Vec::new();
        for &s in seeds {
            if !active[s] {
                active[s] = true;
                frontier.push(s);
            }
        }
        let mut count = frontier.len();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in graph.neighbors(u) {
                    if !active[v] && rng.gen::<f64>() < p {
                        active[v] = true;
                        next.push(v);
                    }
                }
            }
            count += next.len();
            frontier = next;
        }
        out.push(count);
    }
    Ok(out)
}

pub fn direct_ic_simulate(
    graph: &AttributedGraph,
    seeds: &[usize],
    p: f64,
    runs: usize,
    rng_seed: u64,
) -> Result<f64> {
    let counts = direct_ic_runs(graph, seeds, p, runs, rng_seed)?;
    Ok(counts.iter().sum::<usize>() as f64 / runs.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> AttributedGraph {
        AttributedGraph::from_edges(3, [(0, 1), (1, 2)])
            .unwrap()
            .with_groups(vec![vec![0], vec![0], vec![1]], vec![0, 1])
            .unwrap()
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn extreme_probabilities() {
        let g = crate::graph::karate_club();
        let none = sample_ensemble(&g, 0.0, 5, 1).unwrap();
        assert!(none.samples().iter().all(|s| s.arc_count() == 0));
        let all = sample_ensemble(&g, 1.0, 5, 1).unwrap();
        assert!(all.samples().iter().all(|s| s.arc_count() == 2 * g.edge_count()));

        let est = estimate_influence(&none, &g, &[0, 33, 5]).unwrap();
        assert_eq!(est.total, 3.0);
        let expected: Vec<f64> = (0..2)
            .map(|grp| [0, 33, 5].iter().filter(|&&v| g.memberships(v).contains(&grp)).count() as f64)
            .collect();
        assert_eq!(est.per_group, expected);
        assert_eq!(estimate_influence(&all, &g, &[7]).unwrap().total, 34.0);
    }

    #[test]
    fn arcs_belong_to_graph_and_seed_is_reproducible() {
        let g = crate::graph::karate_club();
        let a = sample_ensemble(&g, 0.3, 20, 9).unwrap();
        let b = sample_ensemble(&g, 0.3, 20, 9).unwrap();
        assert_ne!(a.id(), b.id());
        for (sa, sb) in a.samples().iter().zip(b.samples()) {
            assert_eq!(sa.arcs().collect::<Vec<_>>(), sb.arcs().collect::<Vec<_>>());
            assert!(sa.arcs().all(|(u, v)| g.has_edge(u, v)));
        }
    }

    #[test]
    fn single_arc_frequency() {
        let g = AttributedGraph::from_edges(2, [(0, 1)]).unwrap();
        let ens = sample_ensemble(&g, 0.5, 10_000, 4).unwrap();
        let hits = ens.samples().iter().filter(|s| s.out_arcs(0) == [1]).count() as f64;
        let sd = (10_000.0f64 * 0.25).sqrt();
        assert!((hits - 5_000.0).abs() <= 3.0 * sd, "hits {hits}");
    }

    #[test]
    fn path_expectation_live_edge_and_direct() {
        // arcs 0->1 and 1->2 each live w.p. 1/2: E = 1 + 1/2 + 1/4
        let g = path3();
        let ens = sample_ensemble(&g, 0.5, 20_000, 2).unwrap();
        let xs: Vec<f64> = influence_samples(&ens, &g, &[0]).unwrap().into_iter().map(f64::from).collect();
        let (mean, se) = mean_and_se(&xs);
        assert!((mean - 1.75).abs() <= 3.0 * se, "{mean} ± {se}");
        assert_eq!(mean, estimate_influence(&ens, &g, &[0]).unwrap().total);

        let runs: Vec<f64> = direct_ic_runs(&g, &[0], 0.5, 20_000, 3).unwrap().into_iter().map(|c| c as f64).collect();
        let (mean, se) = mean_and_se(&runs);
        assert!((mean - 1.75).abs() <= 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn direct_extremes() {
        let g = AttributedGraph::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        assert_eq!(direct_ic_simulate(&g, &[0, 4], 0.0, 50, 1).unwrap(), 2.0);
        assert_eq!(direct_ic_simulate(&g, &[0], 1.0, 50, 1).unwrap(), 3.0);
        assert_eq!(direct_ic_simulate(&g, &[0, 3], 1.0, 50, 1).unwrap(), 5.0);
    }

    #[test]
    fn contract_violations() {
        let g = path3();
        let ens = sample_ensemble(&g, 0.5, 3, 2).unwrap();
        assert!(matches!(estimate_influence(&ens, &g, &[]), Err(FimError::Contract(_))));
        assert!(estimate_influence(&ens, &g, &[9]).is_err());
        assert!(sample_ensemble(&g, 1.5, 3, 2).is_err());
        assert!(sample_ensemble(&g, 0.5, 0, 2).is_err());
        let other = crate::graph::karate_club();
        assert!(estimate_influence(&ens, &other, &[0]).is_err());
    }

    #[test]
    fn per_group_bounded_by_total_and_size() {
        let g = crate::graph::karate_club();
        let ens = sample_ensemble(&g, 0.2, 200, 5).unwrap();
        let est = estimate_influence(&ens, &g, &[0, 33]).unwrap();
        assert!(est.total >= 2.0 && est.total <= 34.0);
        for (i, &x) in est.per_group.iter().enumerate() {
            assert!(x <= est.total && x <= g.group(i).len() as f64);
        }
    }
}

//! Community-then-node sampling.
//!
//! Each sensitive attribute value (a group) has an urgency
//! `u_j = exp(-CA_j / A_j)`, where `A_j` counts the nodes carrying `j` and
//! `CA_j` counts those among them that sit in a community already touched by
//! the current selection. A community scores `|C_i| * Σ u_j` over the
//! attribute values present in it. Sampling first picks a community with
//! probability proportional to its score, then a member with probability
//! proportional to its PageRank score.

use rand::Rng;

use crate::community::Partition;
use crate::error::{FimError, Result};
use crate::graph::AttributedGraph;
use crate::pagerank::NodeScores;

/// Immutable per-network tables shared by every sampler.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    partition: Partition,
    scores: NodeScores,
    /// `A_j`
    attr_totals: Vec<usize>,
    /// `C_tj`, indexed `[community][attribute]`
    attr_counts: Vec<Vec<usize>>,
    /// `AC_t`
    attrs_present: Vec<Vec<usize>>,
    /// community members by descending score, ties to the lower id
    ranked: Vec<Vec<usize>>,
}

impl SelectionContext {
    pub fn new(graph: &AttributedGraph, partition: Partition, scores: NodeScores) -> Result<Self> {
        graph.require_groups()?;
        if partition.node_count() != graph.node_count() || scores.len() != graph.node_count() {
            return Err(FimError::Contract(
                "partition, scores and graph disagree on node count".into(),
            ));
        }
        let q = graph.group_count();
        let attr_totals = graph.group_sizes();
        let mut attr_counts = vec![vec![0usize; q]; partition.community_count()];
        for v in 0..graph.node_count() {
            for &j in graph.memberships(v) {
                attr_counts[partition.community_of(v)][j] += 1;
            }
        }
        let attrs_present = attr_counts
            .iter()
            .map(|row| (0..q).filter(|&j| row[j] > 0).collect())
            .collect();
        let ranked = partition
            .communities()
            .iter()
            .map(|members| {
                let mut m = members.clone();
                m.sort_by(|&a, &b| scores.get(b).total_cmp(&scores.get(a)).then(a.cmp(&b)));
                m
            })
            .collect();
        Ok(SelectionContext {
            partition,
            scores,
            attr_totals,
            attr_counts,
            attrs_present,
            ranked,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn node_scores(&self) -> &NodeScores {
        &self.scores
    }

    pub fn community_count(&self) -> usize {
        self.partition.community_count()
    }

    pub fn node_count(&self) -> usize {
        self.partition.node_count()
    }

    pub fn attribute_count(&self) -> usize {
        self.attr_totals.len()
    }

    pub fn attrs_present(&self, community: usize) -> &[usize] {
        &self.attrs_present[community]
    }

    pub fn attr_count(&self, community: usize, attr: usize) -> usize {
        self.attr_counts[community][attr]
    }

    /// Members of `community`, best node score first.
    pub fn ranked_members(&self, community: usize) -> &[usize] {
        &self.ranked[community]
    }

    /// The `counts[h]` best-scored nodes of every community `h`, in
    /// community order.
    pub fn top_nodes(&self, counts: &[usize]) -> Vec<usize> {
        counts
            .iter()
            .enumerate()
            .flat_map(|(h, &c)| self.ranked[h].iter().take(c).copied())
            .collect()
    }

    /// Draws a member of `community` not in `exclude`, with probability
    /// proportional to node score. `None` when every member is excluded.
    pub fn select_node<R: Rng + ?Sized>(&self, community: usize, rng: &mut R, exclude: &[usize]) -> Option<usize> {
        let eligible = || {
            self.partition
                .community(community)
                .iter()
                .copied()
                .filter(|v| !exclude.contains(v))
        };
        let total: f64 = eligible().map(|v| self.scores.get(v)).sum();
        let mut last = None;
        if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            for v in eligible() {
                let w = self.scores.get(v);
                if w > 0.0 {
                    last = Some(v);
                    if r < w {
                        return Some(v);
                    }
                    r -= w;
                }
            }
            return last;
        }
        // all eligible scores zero: uniform
        let pool: Vec<usize> = eligible().collect();
        if pool.is_empty() {
            None
        } else {
            Some(pool[rng.gen_range(0..pool.len())])
        }
    }
}

/// Mutable sampling context for one selection sequence.
#[derive(Debug, Clone)]
pub struct SelectionState<'a> {
    ctx: &'a SelectionContext,
    selected: Vec<usize>,
    covered: Vec<bool>,
    masked: Vec<bool>,
    urgencies: Vec<f64>,
    community_scores: Vec<f64>,
}

impl<'a> SelectionState<'a> {
    pub fn new(ctx: &'a SelectionContext) -> Self {
        let mut state = SelectionState {
            ctx,
            selected: Vec::new(),
            covered: vec![false; ctx.community_count()],
            masked: vec![false; ctx.community_count()],
            urgencies: vec![1.0; ctx.attribute_count()],
            community_scores: vec![0.0; ctx.community_count()],
        };
        state.refresh();
        state
    }

    /// State whose context is the given node set.
    pub fn with_selected(ctx: &'a SelectionContext, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut state = Self::new(ctx);
        let mut changed = false;
        for v in nodes {
            state.selected.push(v);
            let c = ctx.partition.community_of(v);
            changed |= !state.covered[c];
            state.covered[c] = true;
        }
        if changed {
            state.refresh();
        }
        state
    }

    fn refresh(&mut self) {
        let ctx = self.ctx;
        for j in 0..ctx.attribute_count() {
            let reached: usize = (0..ctx.community_count())
                .filter(|&t| self.covered[t])
                .map(|t| ctx.attr_counts[t][j])
                .sum();
            self.urgencies[j] = (-(reached as f64) / ctx.attr_totals[j] as f64).exp();
        }
        for t in 0..ctx.community_count() {
            let size = ctx.partition.community(t).len() as f64;
            let sum: f64 = ctx.attrs_present[t].iter().map(|&j| self.urgencies[j]).sum();
            self.community_scores[t] = size * sum;
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn attribute_urgency(&self) -> &[f64] {
        &self.urgencies
    }

    /// Community scores with masked communities reported as 0.
    pub fn community_scores(&self) -> Vec<f64> {
        (0..self.community_scores.len()).map(|t| self.score(t)).collect()
    }

    fn score(&self, t: usize) -> f64 {
        if self.masked[t] {
            0.0
        } else {
            self.community_scores[t]
        }
    }

    pub fn is_covered(&self, community: usize) -> bool {
        self.covered[community]
    }

    /// Marks a community as touched; urgencies and scores refresh the
    /// first time this happens for a community.
    pub fn cover(&mut self, community: usize) {
        if !self.covered[community] {
            self.covered[community] = true;
            self.refresh();
        }
    }

    /// Excludes a community from further draws until unmasked.
    pub fn mask(&mut self, community: usize) {
        self.masked[community] = true;
    }

    pub fn unmask(&mut self, community: usize) {
        self.masked[community] = false;
    }

    /// Draws a community with probability proportional to its score,
    /// without updating the state. If every score is zero the draw is
    /// uniform over unmasked communities; `None` when all are masked.
    pub fn draw_community<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let m = self.community_scores.len();
        let total: f64 = (0..m).map(|t| self.score(t)).sum();
        if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut last = None;
            for t in 0..m {
                let w = self.score(t);
                if w > 0.0 {
                    last = Some(t);
                    if r < w {
                        return Some(t);
                    }
                    r -= w;
                }
            }
            return last;
        }
        let open: Vec<usize> = (0..m).filter(|&t| !self.masked[t]).collect();
        if open.is_empty() {
            None
        } else {
            Some(open[rng.gen_range(0..open.len())])
        }
    }

    /// [`draw_community`](Self::draw_community), then covers the result.
    pub fn select_community<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        let t = self.draw_community(rng)?;
        self.cover(t);
        Some(t)
    }

    /// Two-stage draw of a node outside `exclude`. A community whose members
    /// are all excluded is masked for the rest of this call and the draw is
    /// repeated. The chosen node joins the selection.
    pub fn select_fair_node<R: Rng + ?Sized>(&mut self, rng: &mut R, exclude: &[usize]) -> Option<usize> {
        let mut masked_here = Vec::new();
        let picked = loop {
            let Some(t) = self.select_community(rng) else {
                break None;
            };
            match self.ctx.select_node(t, rng, exclude) {
                Some(v) => break Some(v),
                None => {
                    if !self.masked[t] {
                        self.masked[t] = true;
                        masked_here.push(t);
                    }
                }
            }
        };
        for t in masked_here {
            self.masked[t] = false;
        }
        if let Some(v) = picked {
            self.selected.push(v);
            self.cover(self.ctx.partition.community_of(v));
        }
        picked
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::stream_rng;

    /// Toy network: v1..v7 in C1 with attributes {a, b}; v8..v12
    /// in C2 with {a, b, c}; v13..v15 in C3 with {d}. Node `v_i` has id i-1.
    pub(crate) fn toy_network() -> (AttributedGraph, Partition) {
        let attrs = [0, 0, 0, 1, 1, 1, 1, 0, 1, 2, 2, 0, 3, 3, 3];
        let g = AttributedGraph::from_edges(15, [(0, 1), (7, 8), (12, 13)])
            .unwrap()
            .with_groups(attrs.iter().map(|&a| vec![a]).collect(), vec![0, 1, 2, 3])
            .unwrap();
        let mut assign = vec![0; 7];
        assign.extend([1; 5]);
        assign.extend([2; 3]);
        (g, Partition::from_assignment(&assign))
    }

    pub(crate) fn v(i: usize) -> usize {
        i - 1
    }

    pub(crate) fn toy_scores() -> NodeScores {
        let mut sn = vec![1.0; 15];
        sn[v(3)] = 5.0;
        sn[v(11)] = 6.0;
        sn[v(8)] = 4.0;
        sn[v(14)] = 3.0;
        let total: f64 = sn.iter().sum();
        NodeScores::from_vec(sn.into_iter().map(|x| x / total).collect())
    }

    pub(crate) fn ctx() -> SelectionContext {
        let (g, p) = toy_network();
        SelectionContext::new(&g, p, toy_scores()).unwrap()
    }

    #[test]
    fn initial_community_scores() {
        let ctx = ctx();
        let s = SelectionState::new(&ctx);
        assert!(s.attribute_urgency().iter().all(|&u| u == 1.0));
        assert_eq!(s.community_scores(), vec![14.0, 15.0, 3.0]);
    }

    #[test]
    fn covering_c2_updates_only_sharing_communities() {
        let ctx = ctx();
        let mut s = SelectionState::new(&ctx);
        s.cover(1);
        let sc = s.community_scores();
        assert!(sc[0] < 14.0 && sc[1] < 15.0);
        assert_eq!(sc[2], 3.0);
        // a: 5 nodes, 2 in C2; b: 5 nodes, 1 in C2; c: 2 nodes, both in C2
        let (ua, ub, uc) = ((-2.0f64 / 5.0).exp(), (-1.0f64 / 5.0).exp(), (-1.0f64).exp());
        assert_eq!(s.attribute_urgency()[2], uc);
        assert!((sc[0] - 7.0 * (ua + ub)).abs() < 1e-12);
        assert!((sc[1] - 5.0 * (ua + ub + uc)).abs() < 1e-12);
    }

    #[test]
    fn fully_covered_attribute_has_urgency_inverse_e() {
        let ctx = ctx();
        let s = SelectionState::with_selected(&ctx, [v(13)]);
        assert_eq!(s.attribute_urgency()[3], (-1.0f64).exp());
        assert_eq!(s.community_scores()[2], 3.0 * (-1.0f64).exp());
    }

    #[test]
    fn urgency_formula_on_uniform_community() {
        // five nodes, three attributes, all fully covered
        let g = AttributedGraph::from_edges(5, [])
            .unwrap()
            .with_groups(vec![vec![0], vec![1], vec![2], vec![0], vec![1]], vec![0, 1, 2])
            .unwrap();
        let ctx = SelectionContext::new(&g, Partition::from_assignment(&[0; 5]), NodeScores::from_vec(vec![0.2; 5])).unwrap();
        let s = SelectionState::with_selected(&ctx, [0]);
        assert!((s.community_scores()[0] - 5.518).abs() < 1e-3);
        assert!((s.community_scores()[0] - 15.0 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn top_nodes_follow_counts() {
        let ctx = ctx();
        assert_eq!(ctx.top_nodes(&[1, 2, 1]), vec![v(3), v(11), v(8), v(14)]);
    }

    #[test]
    fn single_eligible_node() {
        let ctx = ctx();
        let mut rng = stream_rng(1, 0);
        let others: Vec<usize> = (7..12).filter(|&x| x != v(10)).collect();
        assert_eq!(ctx.select_node(1, &mut rng, &others), Some(v(10)));
        let all: Vec<usize> = (7..12).collect();
        assert_eq!(ctx.select_node(1, &mut rng, &all), None);
    }

    #[test]
    fn fair_node_skips_exhausted_communities() {
        let ctx = ctx();
        let mut rng = stream_rng(2, 0);
        let exclude: Vec<usize> = (0..15).filter(|&x| x != v(14)).collect();
        for _ in 0..20 {
            let mut s = SelectionState::new(&ctx);
            assert_eq!(s.select_fair_node(&mut rng, &exclude), Some(v(14)));
            assert_eq!(s.selected(), &[v(14)]);
            assert_eq!(s.community_scores().iter().filter(|&&x| x == 0.0).count(), 0);
        }
        let mut s = SelectionState::new(&ctx);
        let everyone: Vec<usize> = (0..15).collect();
        assert_eq!(s.select_fair_node(&mut rng, &everyone), None);
    }

    #[test]
    fn masked_communities_are_never_drawn() {
        let ctx = ctx();
        let mut s = SelectionState::new(&ctx);
        s.mask(0);
        s.mask(2);
        let mut rng = stream_rng(3, 0);
        assert!((0..200).all(|_| s.draw_community(&mut rng) == Some(1)));
        s.mask(1);
        assert_eq!(s.draw_community(&mut rng), None);
        s.unmask(2);
        assert_eq!(s.draw_community(&mut rng), Some(2));
    }

    #[test]
    fn adding_nodes_never_raises_urgency() {
        let ctx = ctx();
        let mut s = SelectionState::new(&ctx);
        let mut rng = stream_rng(4, 0);
        let mut chosen = Vec::new();
        for _ in 0..10 {
            let before = s.attribute_urgency().to_vec();
            let node = s.select_fair_node(&mut rng, &chosen).unwrap();
            chosen.push(node);
            for (b, a) in before.iter().zip(s.attribute_urgency()) {
                assert!(a <= b);
            }
        }
        let mut sorted = chosen.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }
    fn assert_within_3_sigma(counts: &[usize], probs: &[f64]) {
        let n: usize = counts.iter().sum();
        for (&c, &p) in counts.iter().zip(probs) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let dev = (c as f64 - n as f64 * p).abs();
            assert!(dev <= 3.0 * sigma.max(1e-9), "count {c} vs expected {} (p={p})", n as f64 * p);
        }
    }

    #[test]
    fn two_community_draw_probability() {
        let attrs = [0, 0, 0, 1, 1, 1, 1, 0, 1, 2, 2, 2];
        let g = AttributedGraph::from_edges(12, [])
            .unwrap()
            .with_groups(attrs.iter().map(|&a| vec![a]).collect(), vec![0, 1, 2])
            .unwrap();
        let mut assign = vec![0; 7];
        assign.extend([1; 5]);
        let ctx = SelectionContext::new(&g, Partition::from_assignment(&assign), NodeScores::from_vec(vec![1.0 / 12.0; 12])).unwrap();
        let s = SelectionState::new(&ctx);
        assert_eq!(s.community_scores(), vec![14.0, 15.0]);
        let mut rng = stream_rng(5, 0);
        let mut counts = [0usize; 2];
        for _ in 0..100_000 {
            counts[s.draw_community(&mut rng).unwrap()] += 1;
        }
        assert_within_3_sigma(&counts, &[14.0 / 29.0, 15.0 / 29.0]);
    }

    #[test]
    fn community_frequencies_follow_scores() {
        let ctx = ctx();
        let mut s = SelectionState::new(&ctx);
        s.cover(1);
        let sc = s.community_scores();
        let total: f64 = sc.iter().sum();
        let mut rng = stream_rng(6, 0);
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[s.draw_community(&mut rng).unwrap()] += 1;
        }
        assert_within_3_sigma(&counts, &sc.iter().map(|x| x / total).collect::<Vec<_>>());
    }

    #[test]
    fn node_frequencies_follow_renormalized_scores() {
        let ctx = ctx();
        let exclude = [v(8)];
        let pool: Vec<usize> = (7..12).filter(|x| !exclude.contains(x)).collect();
        let total: f64 = pool.iter().map(|&x| ctx.node_scores().get(x)).sum();
        let probs: Vec<f64> = pool.iter().map(|&x| ctx.node_scores().get(x) / total).collect();
        let mut rng = stream_rng(7, 0);
        let mut counts = vec![0usize; pool.len()];
        for _ in 0..100_000 {
            let node = ctx.select_node(1, &mut rng, &exclude).unwrap();
            counts[pool.iter().position(|&x| x == node).unwrap()] += 1;
        }
        assert_within_3_sigma(&counts, &probs);
    }

    #[test]
    fn score_ratio_two_to_one() {
        let g = AttributedGraph::from_edges(2, [(0, 1)]).unwrap().with_single_group().unwrap();
        let ctx = SelectionContext::new(&g, Partition::from_assignment(&[0, 0]), NodeScores::from_vec(vec![2.0 / 3.0, 1.0 / 3.0])).unwrap();
        let mut rng = stream_rng(8, 0);
        let hits = (0..100_000).filter(|_| ctx.select_node(0, &mut rng, &[]) == Some(0)).count();
        assert_within_3_sigma(&[hits, 100_000 - hits], &[2.0 / 3.0, 1.0 / 3.0]);
    }
}

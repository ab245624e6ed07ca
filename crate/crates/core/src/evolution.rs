//! The evolutionary search over fixed-size seed sets.
//!
//! Each generation sorts the population by fitness, pairs rank `i` with rank
//! `pop-1-i` for uniform crossover, repairs duplicate genes, mutates, and
//! keeps an offspring only when it strictly beats its own parent. All
//! fitness values come from one shared live-edge ensemble, so the best
//! fitness in the population never decreases.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::diffusion::{estimate_influence, LiveEdgeEnsemble};
use crate::error::{FimError, Result};
use crate::fairness::{evaluate_fitness, group_fractions, group_violations, validate_lambda, DEFAULT_LAMBDA};
use crate::graph::AttributedGraph;
use crate::pagerank::NodeScores;
use crate::rng::{mix_seed, stream_rng};
use crate::selection::{SelectionContext, SelectionState};

const TAG_INIT: u64 = 0x1;
const TAG_CROSSOVER: u64 = 0x2;
const TAG_MUTATION: u64 = 0x3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    CommunityBased,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub pop: usize,
    pub g_max: usize,
    pub cr: f64,
    pub mu: f64,
    pub k: usize,
    pub lambda: f64,
    pub selection_mode: SelectionMode,
    pub rng_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            pop: 10,
            g_max: 150,
            cr: 0.6,
            mu: 0.1,
            k: 40,
            lambda: DEFAULT_LAMBDA,
            selection_mode: SelectionMode::CommunityBased,
            rng_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.pop < 2 || !self.pop.is_multiple_of(2) {
            problems.push(format!("pop must be even and at least 2 (got {})", self.pop));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            problems.push(format!("cr {} outside [0, 1]", self.cr));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            problems.push(format!("mu {} outside [0, 1]", self.mu));
        }
        if self.k == 0 {
            problems.push("k must be at least 1".into());
        }
        if let Err(e) = validate_lambda(self.lambda) {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(FimError::Validation(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    pub value: f64,
    pub mf: f64,
    pub dcv: f64,
    pub ensemble_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genes: Vec<usize>,
    pub fitness: Option<Fitness>,
}

impl Individual {
    pub fn new(genes: Vec<usize>) -> Self {
        Individual { genes, fitness: None }
    }

    /// Fitness value; `-inf` while unevaluated.
    pub fn f(&self) -> f64 {
        self.fitness.map_or(f64::NEG_INFINITY, |f| f.value)
    }

    fn set_gene(&mut self, slot: usize, node: usize) {
        if self.genes[slot] != node {
            self.genes[slot] = node;
            self.fitness = None;
        }
    }
}

/// Fails with an invariant error unless `genes` holds `k` distinct ids below `n`.
pub fn check_individual(genes: &[usize], k: usize, n: usize) -> Result<()> {
    if genes.len() != k {
        return Err(FimError::Invariant(format!("individual has {} genes, expected {k}", genes.len())));
    }
    let mut sorted = genes.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(FimError::Invariant(format!("duplicate gene in {genes:?}")));
    }
    if let Some(&bad) = sorted.last().filter(|&&v| v >= n) {
        return Err(FimError::Invariant(format!("gene {bad} outside graph of {n} nodes")));
    }
    Ok(())
}

/// Source of genes for initialization and for repair/mutation draws.
pub trait NodeSampler: Sync {
    fn node_count(&self) -> usize;

    /// `k` distinct nodes.
    fn initial_genes(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize>;

    /// A node outside `context`, drawn with `context` as the current
    /// selection. Requires `context.len() < node_count()`.
    fn draw_excluding(&self, context: &[usize], rng: &mut ChaCha8Rng) -> usize;
}

/// Community-then-node sampling.
pub struct CommunitySampler<'a> {
    ctx: &'a SelectionContext,
}

impl<'a> CommunitySampler<'a> {
    pub fn new(ctx: &'a SelectionContext) -> Self {
        CommunitySampler { ctx }
    }

    /// Draw counts per community for one individual. A community drawn as
    /// often as it has members is masked from further draws.
    pub fn community_counts(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut state = SelectionState::new(self.ctx);
        let mut counts = vec![0; self.ctx.community_count()];
        for _ in 0..k {
            let t = state
                .select_community(rng)
                .expect("k <= n leaves an unmasked community");
            counts[t] += 1;
            if counts[t] == self.ctx.partition().community(t).len() {
                state.mask(t);
            }
        }
        counts
    }
}

impl NodeSampler for CommunitySampler<'_> {
    fn node_count(&self) -> usize {
        self.ctx.node_count()
    }

    fn initial_genes(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let counts = self.community_counts(k, rng);
        self.ctx.top_nodes(&counts)
    }

    fn draw_excluding(&self, context: &[usize], rng: &mut ChaCha8Rng) -> usize {
        let mut state = SelectionState::with_selected(self.ctx, context.iter().copied());
        state
            .select_fair_node(rng, context)
            .expect("context leaves an eligible node")
    }
}

/// Uniform sampling over the nodes not yet chosen.
pub struct UniformSampler {
    n: usize,
}

impl UniformSampler {
    pub fn new(n: usize) -> Self {
        UniformSampler { n }
    }
}

impl NodeSampler for UniformSampler {
    fn node_count(&self) -> usize {
        self.n
    }

    fn initial_genes(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        index::sample(rng, self.n, k).into_vec()
    }

    fn draw_excluding(&self, context: &[usize], rng: &mut ChaCha8Rng) -> usize {
        if context.len() * 2 < self.n {
            loop {
                let v = rng.gen_range(0..self.n);
                if !context.contains(&v) {
                    return v;
                }
            }
        }
        let free: Vec<usize> = (0..self.n).filter(|v| !context.contains(v)).collect();
        free[rng.gen_range(0..free.len())]
    }
}

/// Fitness of a seed set on a fixed ensemble.
pub struct FitnessEvaluator<'a> {
    graph: &'a AttributedGraph,
    ensemble: &'a LiveEdgeEnsemble,
    group_sizes: Vec<usize>,
    baselines: &'a [f64],
    lambda: f64,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(
        graph: &'a AttributedGraph,
        ensemble: &'a LiveEdgeEnsemble,
        baselines: &'a [f64],
        lambda: f64,
    ) -> Result<Self> {
        graph.require_groups()?;
        validate_lambda(lambda)?;
        if baselines.len() != graph.group_count() {
            return Err(FimError::Contract(format!(
                "{} baselines for {} groups",
                baselines.len(),
                graph.group_count()
            )));
        }
        Ok(FitnessEvaluator {
            graph,
            ensemble,
            group_sizes: graph.group_sizes(),
            baselines,
            lambda,
        })
    }

    pub fn evaluate(&self, genes: &[usize]) -> Result<Fitness> {
        let est = estimate_influence(self.ensemble, self.graph, genes)?;
        let mf = group_fractions(&est, &self.group_sizes)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let v = group_violations(&est, self.baselines)?;
        let dcv = v.iter().sum::<f64>() / v.len() as f64;
        Ok(Fitness {
            value: evaluate_fitness(mf, dcv, self.lambda),
            mf,
            dcv,
            ensemble_id: self.ensemble.id(),
        })
    }

    fn is_current(&self, ind: &Individual) -> bool {
        ind.fitness.is_some_and(|f| f.ensemble_id == self.ensemble.id())
    }
}

/// Evaluates, in parallel, every individual whose cached fitness is missing
/// or belongs to another ensemble. Returns the number of evaluations.
pub fn evaluate_population(pop: &mut [Individual], evaluator: &FitnessEvaluator) -> Result<usize> {
    let counts = pop
        .par_iter_mut()
        .map(|ind| {
            if evaluator.is_current(ind) {
                return Ok(0);
            }
            ind.fitness = Some(evaluator.evaluate(&ind.genes)?);
            Ok(1)
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(counts.into_iter().sum())
}

pub fn initialize_population(sampler: &dyn NodeSampler, config: &EvolutionConfig) -> Vec<Individual> {
    let seed = mix_seed(config.rng_seed, TAG_INIT);
    (0..config.pop)
        .map(|i| Individual::new(sampler.initial_genes(config.k, &mut stream_rng(seed, i as u64))))
        .collect()
}

/// Replaces every repeated gene (all but its first occurrence) in place
/// with a fresh draw, using the remaining genes as context.
pub fn repair_duplicates(ind: &mut Individual, sampler: &dyn NodeSampler, rng: &mut ChaCha8Rng) {
    let mut kept: Vec<usize> = Vec::with_capacity(ind.genes.len());
    let mut dup_slots = Vec::new();
    for (slot, &g) in ind.genes.iter().enumerate() {
        if kept.contains(&g) {
            dup_slots.push(slot);
        } else {
            kept.push(g);
        }
    }
    for slot in dup_slots {
        let v = sampler.draw_excluding(&kept, rng);
        kept.push(v);
        ind.set_gene(slot, v);
    }
}

/// Swaps the genes of `a` and `b` at every position flagged in `swap`, then
/// repairs both children.
pub fn crossover_pair(
    a: &mut Individual,
    b: &mut Individual,
    swap: &[bool],
    sampler: &dyn NodeSampler,
    rng: &mut ChaCha8Rng,
) {
    for (j, _) in swap.iter().enumerate().filter(|(_, &s)| s) {
        let (ga, gb) = (a.genes[j], b.genes[j]);
        a.set_gene(j, gb);
        b.set_gene(j, ga);
    }
    repair_duplicates(a, sampler, rng);
    repair_duplicates(b, sampler, rng);
}

/// Offspring `i` descends from parent `i`; `sorted` must be ordered by
/// descending fitness so that the best pairs with the worst.
pub fn crossover(
    sorted: &[Individual],
    config: &EvolutionConfig,
    sampler: &dyn NodeSampler,
    generation: u64,
) -> Vec<Individual> {
    let seed = mix_seed(mix_seed(config.rng_seed, TAG_CROSSOVER), generation);
    let pop = sorted.len();
    let mut out = sorted.to_vec();
    for i in 0..pop / 2 {
        let mut rng = stream_rng(seed, i as u64);
        let swap: Vec<bool> = (0..config.k).map(|_| rng.gen::<f64>() < config.cr).collect();
        let (left, right) = out.split_at_mut(pop - 1 - i);
        crossover_pair(&mut left[i], &mut right[0], &swap, sampler, &mut rng);
    }
    out
}

/// Redraws the gene at each position whose draw falls below `mu`, using the
/// other genes as context and exclusion set.
pub fn mutate_individual(
    ind: &mut Individual,
    draws: &[f64],
    mu: f64,
    sampler: &dyn NodeSampler,
    rng: &mut ChaCha8Rng,
) {
    for (j, &d) in draws.iter().enumerate() {
        if d < mu {
            let others: Vec<usize> = ind
                .genes
                .iter()
                .enumerate()
                .filter(|&(t, _)| t != j)
                .map(|(_, &g)| g)
                .collect();
            let v = sampler.draw_excluding(&others, rng);
            ind.set_gene(j, v);
        }
    }
}

pub fn mutation(mut pop: Vec<Individual>, config: &EvolutionConfig, sampler: &dyn NodeSampler, generation: u64) -> Vec<Individual> {
    let seed = mix_seed(mix_seed(config.rng_seed, TAG_MUTATION), generation);
    for (i, ind) in pop.iter_mut().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        let draws: Vec<f64> = (0..ind.genes.len()).map(|_| rng.gen()).collect();
        mutate_individual(ind, &draws, config.mu, sampler, &mut rng);
    }
    pop
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_f: f64,
    pub mean_f: f64,
    pub best_mf: f64,
    pub best_dcv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionOutcome {
    pub seeds: Vec<usize>,
    pub fitness: Fitness,
    pub trace: Vec<TraceRow>,
    pub evaluations: usize,
}

/// Index of the best individual, lowest index on ties.
fn best_index(pop: &[Individual]) -> usize {
    let mut best = 0;
    for (i, ind) in pop.iter().enumerate() {
        if ind.f() > pop[best].f() {
            best = i;
        }
    }
    best
}

fn trace_row(generation: usize, pop: &[Individual]) -> TraceRow {
    let best = &pop[best_index(pop)];
    let fit = best.fitness.expect("population evaluated");
    TraceRow {
        generation,
        best_f: fit.value,
        mean_f: pop.iter().map(Individual::f).sum::<f64>() / pop.len() as f64,
        best_mf: fit.mf,
        best_dcv: fit.dcv,
    }
}

fn check_population(pop: &[Individual], k: usize, n: usize) -> Result<()> {
    pop.iter().try_for_each(|ind| check_individual(&ind.genes, k, n))
}

/// Runs the generational loop with any sampler.
pub fn run_evolution(
    sampler: &dyn NodeSampler,
    evaluator: &FitnessEvaluator,
    config: &EvolutionConfig,
) -> Result<EvolutionOutcome> {
    config.validate()?;
    let n = sampler.node_count();
    if config.k > n {
        return Err(FimError::Validation(format!("k = {} exceeds node count {n}", config.k)));
    }
    let mut pop = initialize_population(sampler, config);
    check_population(&pop, config.k, n)?;
    let mut evaluations = evaluate_population(&mut pop, evaluator)?;
    let mut trace = vec![trace_row(0, &pop)];
    for g in 1..=config.g_max {
        pop.sort_by(|a, b| b.f().total_cmp(&a.f()));
        let offspring = crossover(&pop, config, sampler, g as u64);
        let mut offspring = mutation(offspring, config, sampler, g as u64);
        check_population(&offspring, config.k, n)?;
        evaluations += evaluate_population(&mut offspring, evaluator)?;
        for (parent, child) in pop.iter_mut().zip(offspring) {
            if child.f() > parent.f() {
                *parent = child;
            }
        }
        let row = trace_row(g, &pop);
        if row.best_f < trace[trace.len() - 1].best_f {
            return Err(FimError::Invariant(format!("best fitness decreased at generation {g}")));
        }
        trace.push(row);
    }
    let best = &pop[best_index(&pop)];
    Ok(EvolutionOutcome {
        seeds: best.genes.clone(),
        fitness: best.fitness.expect("population evaluated"),
        trace,
        evaluations,
    })
}

/// The full method: community-based sampling throughout.
pub fn evolve(
    graph: &AttributedGraph,
    partition: &Partition,
    scores: &NodeScores,
    ensemble: &LiveEdgeEnsemble,
    baselines: &[f64],
    config: &EvolutionConfig,
) -> Result<EvolutionOutcome> {
    let ctx = SelectionContext::new(graph, partition.clone(), scores.clone())?;
    let evaluator = FitnessEvaluator::new(graph, ensemble, baselines, config.lambda)?;
    match config.selection_mode {
        SelectionMode::CommunityBased => run_evolution(&CommunitySampler::new(&ctx), &evaluator, config),
        SelectionMode::Random => run_evolution(&UniformSampler::new(graph.node_count()), &evaluator, config),
    }
}

/// The ablation: the same loop with uniform node sampling.
pub fn rea_fim_variant(
    graph: &AttributedGraph,
    partition: &Partition,
    scores: &NodeScores,
    ensemble: &LiveEdgeEnsemble,
    baselines: &[f64],
    config: &EvolutionConfig,
) -> Result<EvolutionOutcome> {
    let config = EvolutionConfig {
        selection_mode: SelectionMode::Random,
        ..config.clone()
    };
    evolve(graph, partition, scores, ensemble, baselines, &config)
}

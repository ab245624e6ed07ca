//! Experiment harness behind the command-line tool: network loading,
//! repeated comparisons, λ sweeps and CSV/JSON output.
//!
//! Seeds: repetition `r` uses `seed + r`. The partition, node scores and
//! group baselines depend only on the network and the master seed, so every
//! repetition and algorithm shares them. Within a repetition all algorithms
//! optimize on the same ensemble and are reported on a second, independent
//! ensemble.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{louvain, modularity, Partition};
use crate::diffusion::{estimate_influence, sample_ensemble, LiveEdgeEnsemble};
use crate::error::{FimError, Result};
use crate::evolution::{evolve, EvolutionConfig, SelectionMode, TraceRow};
use crate::fairness::{fairness_report, price_of_fairness, FairnessReport};
use crate::graph::{karate_club, load_edge_list, load_groups_column, write_edge_list, write_groups, AttributedGraph};
use crate::greedy::{greedy_celf, group_baselines, GroupBaselines};
use crate::pagerank::{default_pagerank, NodeScores};
use crate::rng::mix_seed;
use crate::sbm::{generate_sbm, SbmSpec};

const TAG_LOUVAIN: u64 = 0x10;
const TAG_BASELINES: u64 = 0x11;
const TAG_SEARCH: u64 = 0x12;
const TAG_REPORT: u64 = 0x13;
const TAG_EVOLVE: u64 = 0x14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NetworkSource {
    Sbm(SbmSpec),
    Files {
        edges: PathBuf,
        groups: PathBuf,
        #[serde(default)]
        attribute_column: usize,
    },
    Karate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    CeaFim,
    ReaFim,
    Greedy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CeaFim => "cea-fim",
            Algorithm::ReaFim => "rea-fim",
            Algorithm::Greedy => "greedy",
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::CeaFim, Algorithm::ReaFim, Algorithm::Greedy]
}

fn default_lambdas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "defaults::k")]
    pub k: usize,
    #[serde(default = "defaults::pop")]
    pub pop: usize,
    #[serde(default = "defaults::g_max")]
    pub g_max: usize,
    #[serde(default = "defaults::cr")]
    pub cr: f64,
    #[serde(default = "defaults::mu")]
    pub mu: f64,
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    /// Values visited by `sweep-lambda`.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "defaults::p")]
    pub p: f64,
    #[serde(default = "defaults::delta")]
    pub delta: usize,
    #[serde(default = "defaults::repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    use crate::evolution::EvolutionConfig;

    pub fn k() -> usize {
        EvolutionConfig::default().k
    }
    pub fn pop() -> usize {
        EvolutionConfig::default().pop
    }
    pub fn g_max() -> usize {
        EvolutionConfig::default().g_max
    }
    pub fn cr() -> f64 {
        EvolutionConfig::default().cr
    }
    pub fn mu() -> f64 {
        EvolutionConfig::default().mu
    }
    pub fn lambda() -> f64 {
        EvolutionConfig::default().lambda
    }
    pub fn p() -> f64 {
        0.01
    }
    pub fn delta() -> usize {
        1000
    }
    pub fn repetitions() -> usize {
        10
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("results")
    }
}

impl ExperimentConfig {
    /// Default parameters (k = 40, pop = 10, 150 generations, p = 0.01, δ = 1000) on the given network.
    pub fn new(network: NetworkSource) -> Self {
        ExperimentConfig {
            network,
            algorithms: default_algorithms(),
            k: defaults::k(),
            pop: defaults::pop(),
            g_max: defaults::g_max(),
            cr: defaults::cr(),
            mu: defaults::mu(),
            lambda: defaults::lambda(),
            lambdas: default_lambdas(),
            p: defaults::p(),
            delta: defaults::delta(),
            repetitions: defaults::repetitions(),
            seed: 0,
            out_dir: defaults::out_dir(),
        }
    }

    /// Reads a config; relative file paths inside it are taken relative to
    /// the config file's directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FimError::io(path, e))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| FimError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let NetworkSource::Files { edges, groups, .. } = &mut config.network {
            *edges = base.join(&*edges);
            *groups = base.join(&*groups);
        }
        Ok(config)
    }

    pub fn evolution_config(&self, lambda: f64, rng_seed: u64, mode: SelectionMode) -> EvolutionConfig {
        EvolutionConfig {
            pop: self.pop,
            g_max: self.g_max,
            cr: self.cr,
            mu: self.mu,
            k: self.k,
            lambda,
            selection_mode: mode,
            rng_seed,
        }
    }

    /// Collects every problem instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.algorithms.is_empty() {
            problems.push("algorithms: at least one required".to_string());
        }
        if self.repetitions == 0 {
            problems.push("repetitions: must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            problems.push(format!("p: {} outside [0, 1]", self.p));
        }
        if self.delta == 0 {
            problems.push("delta: must be at least 1".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            problems.push(format!("lambdas: {l} outside [0, 1]"));
        }
        if let Err(FimError::Validation(msg)) = self.evolution_config(self.lambda, 0, SelectionMode::CommunityBased).validate() {
            problems.push(msg);
        }
        if let NetworkSource::Sbm(spec) = &self.network {
            if let Err(e) = spec.validate() {
                problems.push(format!("network: {e}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(FimError::Validation(problems.join("; ")))
        }
    }
}

/// Command-line settings that override the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub delta: Option<usize>,
    pub split_timings: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.out_dir = o.clone();
        }
        if let Some(d) = self.delta {
            config.delta = d;
        }
    }
}

pub fn load_network(source: &NetworkSource) -> Result<AttributedGraph> {
    match source {
        NetworkSource::Sbm(spec) => generate_sbm(spec),
        NetworkSource::Files {
            edges,
            groups,
            attribute_column,
        } => load_groups_column(load_edge_list(edges)?, groups, *attribute_column),
        NetworkSource::Karate => Ok(karate_club()),
    }
}

/// Everything computed once per network.
pub struct Prepared {
    pub graph: AttributedGraph,
    pub partition: Partition,
    pub scores: NodeScores,
    pub baselines: GroupBaselines,
    pub setup_seconds: f64,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let start = Instant::now();
    let graph = load_network(&config.network)?;
    graph.require_groups()?;
    if config.k > graph.node_count() {
        return Err(FimError::Validation(format!(
            "k: {} exceeds node count {}",
            config.k,
            graph.node_count()
        )));
    }
    info!(
        "network: {} nodes, {} edges, {} groups",
        graph.node_count(),
        graph.edge_count(),
        graph.group_count()
    );
    let partition = louvain(&graph, mix_seed(config.seed, TAG_LOUVAIN))?;
    let scores = default_pagerank(&graph);
    let baselines = group_baselines(&graph, config.k, config.p, config.delta, mix_seed(config.seed, TAG_BASELINES))?;
    info!(
        "{} communities, group baselines {:?}",
        partition.community_count(),
        baselines.influence
    );
    Ok(Prepared {
        graph,
        partition,
        scores,
        baselines,
        setup_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub repetition: usize,
    pub lambda: f64,
    /// Node labels as they appear in the input.
    pub seeds: Vec<u64>,
    /// Fitness on the optimization ensemble.
    pub search_f: f64,
    /// Spread on the reporting ensemble.
    pub influence: f64,
    pub report: FairnessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRow>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub algorithm: Algorithm,
    pub repetition: usize,
    pub algorithm_seconds: f64,
    pub setup_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub repetitions: usize,
    pub mean_influence: f64,
    pub mean_mf: f64,
    pub mean_dcv: f64,
    pub mean_f: f64,
    pub mean_pof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub node_count: usize,
    pub edge_count: usize,
    pub group_sizes: Vec<usize>,
    pub community_count: usize,
    pub modularity: f64,
    pub baselines: GroupBaselines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub network: NetworkInfo,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<AlgorithmSummary>,
    #[serde(skip)]
    pub timings: Vec<TimingRecord>,
}

struct Repetition {
    index: usize,
    search: LiveEdgeEnsemble,
    report: LiveEdgeEnsemble,
    evolve_seed: u64,
    /// Reporting-ensemble spread of the greedy seeds.
    reference: f64,
    greedy_seeds: Vec<usize>,
    greedy_seconds: f64,
    sampling_seconds: f64,
}

fn repetition(config: &ExperimentConfig, prep: &Prepared, index: usize) -> Result<Repetition> {
    let rep_seed = config.seed.wrapping_add(index as u64);
    let start = Instant::now();
    let search = sample_ensemble(&prep.graph, config.p, config.delta, mix_seed(rep_seed, TAG_SEARCH))?;
    let report = sample_ensemble(&prep.graph, config.p, config.delta, mix_seed(rep_seed, TAG_REPORT))?;
    let sampling_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let greedy = greedy_celf(&search, &prep.graph, config.k)?;
    let greedy_seconds = start.elapsed().as_secs_f64();
    let reference = estimate_influence(&report, &prep.graph, &greedy.seeds)?.total;
    Ok(Repetition {
        index,
        search,
        report,
        evolve_seed: mix_seed(rep_seed, TAG_EVOLVE),
        reference,
        greedy_seeds: greedy.seeds,
        greedy_seconds,
        sampling_seconds,
    })
}

fn record(
    prep: &Prepared,
    rep: &Repetition,
    algorithm: Algorithm,
    lambda: f64,
    seeds: &[usize],
    search_f: f64,
    trace: Option<Vec<TraceRow>>,
) -> Result<RunRecord> {
    let est = estimate_influence(&rep.report, &prep.graph, seeds)?;
    let mut report = fairness_report(&est, &prep.graph.group_sizes(), &prep.baselines.influence, lambda)?;
    report.pof = Some(price_of_fairness(rep.reference, est.total)?);
    Ok(RunRecord {
        algorithm,
        repetition: rep.index,
        lambda,
        seeds: seeds.iter().map(|&v| prep.graph.label(v)).collect(),
        search_f,
        influence: est.total,
        report,
        trace,
    })
}

fn run_algorithm(
    config: &ExperimentConfig,
    prep: &Prepared,
    rep: &Repetition,
    algorithm: Algorithm,
    lambda: f64,
) -> Result<(RunRecord, TimingRecord)> {
    let setup_seconds = prep.setup_seconds + rep.sampling_seconds;
    let (seeds, search_f, trace, seconds) = match algorithm {
        Algorithm::Greedy => {
            let fit = crate::evolution::FitnessEvaluator::new(&prep.graph, &rep.search, &prep.baselines.influence, lambda)?
                .evaluate(&rep.greedy_seeds)?;
            (rep.greedy_seeds.clone(), fit.value, None, rep.greedy_seconds)
        }
        Algorithm::CeaFim | Algorithm::ReaFim => {
            let mode = if algorithm == Algorithm::CeaFim {
                SelectionMode::CommunityBased
            } else {
                SelectionMode::Random
            };
            let evo = config.evolution_config(lambda, rep.evolve_seed, mode);
            let start = Instant::now();
            let out = evolve(&prep.graph, &prep.partition, &prep.scores, &rep.search, &prep.baselines.influence, &evo)?;
            let seconds = start.elapsed().as_secs_f64();
            (out.seeds, out.fitness.value, Some(out.trace), seconds)
        }
    };
    let run = record(prep, rep, algorithm, lambda, &seeds, search_f, trace)?;
    Ok((
        run,
        TimingRecord {
            algorithm,
            repetition: rep.index,
            algorithm_seconds: seconds,
            setup_seconds,
        },
    ))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    sum / count as f64
}

fn summarize(algorithm: Algorithm, runs: &[&RunRecord]) -> AlgorithmSummary {
    AlgorithmSummary {
        algorithm,
        repetitions: runs.len(),
        mean_influence: mean(runs.iter().map(|r| r.influence)),
        mean_mf: mean(runs.iter().map(|r| r.report.mf)),
        mean_dcv: mean(runs.iter().map(|r| r.report.dcv)),
        mean_f: mean(runs.iter().map(|r| r.report.f_value)),
        mean_pof: mean(runs.iter().map(|r| r.report.pof.unwrap_or(f64::NAN))),
    }
}

fn network_info(prep: &Prepared) -> NetworkInfo {
    NetworkInfo {
        node_count: prep.graph.node_count(),
        edge_count: prep.graph.edge_count(),
        group_sizes: prep.graph.group_sizes(),
        community_count: prep.partition.community_count(),
        modularity: modularity(&prep.graph, &prep.partition),
        baselines: prep.baselines.clone(),
    }
}

/// Runs every configured algorithm for every repetition at `config.lambda`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    let prep = prepare(config)?;
    run_prepared(config, &prep)
}

pub fn run_prepared(config: &ExperimentConfig, prep: &Prepared) -> Result<ExperimentResults> {
    let mut algorithms = config.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    let per_rep = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let rep = repetition(config, prep, r)?;
            let out = algorithms
                .iter()
                .map(|&a| run_algorithm(config, prep, &rep, a, config.lambda))
                .collect::<Result<Vec<_>>>()?;
            info!("repetition {r} done");
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let (runs, timings): (Vec<RunRecord>, Vec<TimingRecord>) = per_rep.into_iter().flatten().unzip();
    let summary = algorithms
        .iter()
        .map(|&a| summarize(a, &runs.iter().filter(|r| r.algorithm == a).collect::<Vec<_>>()))
        .collect();
    Ok(ExperimentResults {
        config: config.clone(),
        network: network_info(prep),
        runs,
        summary,
        timings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub repetitions: usize,
    pub mean_mf: f64,
    pub mean_dcv: f64,
    pub mean_pof: f64,
    pub mean_f: f64,
    pub se_mf: f64,
    pub se_dcv: f64,
    pub rank_mf: usize,
    pub rank_dcv: usize,
    pub rank_pof: usize,
    pub rank_f: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub config: ExperimentConfig,
    pub network: NetworkInfo,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunRecord>,
}

fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs.iter().copied());
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// Dense ranks of values rounded to two decimals; rank 1 is the best.
pub fn dense_ranks(values: &[f64], higher_is_better: bool) -> Vec<usize> {
    let key = |x: f64| {
        let r = (x * 100.0).round() as i64;
        if higher_is_better {
            -r
        } else {
            r
        }
    };
    let mut distinct: Vec<i64> = values.iter().map(|&x| key(x)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    values
        .iter()
        .map(|&x| distinct.binary_search(&key(x)).expect("present") + 1)
        .collect()
}

/// Runs the community-based search at every λ in `config.lambdas`. Each
/// repetition uses the same ensembles and evolution seed for every λ, so a
/// one-point sweep reproduces `run` at that λ.
pub fn sweep_lambda(config: &ExperimentConfig) -> Result<SweepResults> {
    if config.lambdas.is_empty() {
        return Err(FimError::Validation("lambdas: at least one value required".into()));
    }
    let prep = prepare(config)?;
    let runs: Vec<RunRecord> = (0..config.repetitions)
        .into_par_iter()
        .map(|r| {
            let rep = repetition(config, &prep, r)?;
            config
                .lambdas
                .iter()
                .map(|&l| run_algorithm(config, &prep, &rep, Algorithm::CeaFim, l).map(|(run, _)| run))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut rows: Vec<SweepRow> = config
        .lambdas
        .iter()
        .map(|&l| {
            let at: Vec<&RunRecord> = runs.iter().filter(|r| r.lambda == l).collect();
            let mf: Vec<f64> = at.iter().map(|r| r.report.mf).collect();
            let dcv: Vec<f64> = at.iter().map(|r| r.report.dcv).collect();
            let s = summarize(Algorithm::CeaFim, &at);
            SweepRow {
                lambda: l,
                repetitions: at.len(),
                mean_mf: s.mean_mf,
                mean_dcv: s.mean_dcv,
                mean_pof: s.mean_pof,
                mean_f: s.mean_f,
                se_mf: standard_error(&mf),
                se_dcv: standard_error(&dcv),
                rank_mf: 0,
                rank_dcv: 0,
                rank_pof: 0,
                rank_f: 0,
            }
        })
        .collect();
    let column = |f: fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let rank_mf = dense_ranks(&column(|r| r.mean_mf), true);
    let rank_dcv = dense_ranks(&column(|r| r.mean_dcv), false);
    let rank_pof = dense_ranks(&column(|r| r.mean_pof), false);
    let rank_f = dense_ranks(&column(|r| r.mean_f), true);
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank_mf = rank_mf[i];
        row.rank_dcv = rank_dcv[i];
        row.rank_pof = rank_pof[i];
        row.rank_f = rank_f[i];
    }
    Ok(SweepResults {
        config: config.clone(),
        network: network_info(&prep),
        rows,
        runs,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FimError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| FimError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| FimError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in trace {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| FimError::io(path, e))
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    algorithm: &'a str,
    repetitions: usize,
    mean_influence: f64,
    mean_mf: f64,
    mean_dcv: f64,
    mean_f: f64,
    mean_pof: f64,
}

#[derive(Serialize)]
struct TimingLine<'a> {
    algorithm: &'a str,
    repetition: usize,
    seconds: f64,
    algorithm_seconds: f64,
    setup_seconds: f64,
}

/// Writes `results.json`, `summary.csv`, `timings.csv` and one trace CSV per
/// evolutionary run into `dir`. With `split_timings` the `seconds` column
/// leaves out network preparation and ensemble sampling.
pub fn write_run_outputs(results: &ExperimentResults, dir: &Path, split_timings: bool) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("results.json"), results)?;

    let path = dir.join("summary.csv");
    let mut w = csv_writer(&path)?;
    for s in &results.summary {
        w.serialize(SummaryLine {
            algorithm: s.algorithm.name(),
            repetitions: s.repetitions,
            mean_influence: s.mean_influence,
            mean_mf: s.mean_mf,
            mean_dcv: s.mean_dcv,
            mean_f: s.mean_f,
            mean_pof: s.mean_pof,
        })?;
    }
    w.flush().map_err(|e| FimError::io(&path, e))?;

    let path = dir.join("timings.csv");
    let mut w = csv_writer(&path)?;
    for t in &results.timings {
        let seconds = if split_timings {
            t.algorithm_seconds
        } else {
            t.algorithm_seconds + t.setup_seconds
        };
        w.serialize(TimingLine {
            algorithm: t.algorithm.name(),
            repetition: t.repetition,
            seconds,
            algorithm_seconds: t.algorithm_seconds,
            setup_seconds: t.setup_seconds,
        })?;
    }
    w.flush().map_err(|e| FimError::io(&path, e))?;

    let traces = dir.join("traces");
    for run in &results.runs {
        if let Some(trace) = &run.trace {
            create_dir(&traces)?;
            let name = format!("{}_rep{}.csv", run.algorithm.name(), run.repetition);
            write_trace_csv(&traces.join(name), trace)?;
        }
    }
    Ok(())
}

/// Writes `sweep.csv` and `sweep.json` into `dir`.
pub fn write_sweep_outputs(results: &SweepResults, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("sweep.json"), results)?;
    let path = dir.join("sweep.csv");
    let mut w = csv_writer(&path)?;
    for row in &results.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| FimError::io(&path, e))
}

/// Materializes an SBM spec as `<prefix>.edges` and `<prefix>.groups`.
pub fn cmd_generate(spec_path: &Path, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let spec = SbmSpec::from_json_file(spec_path)?;
    let graph = generate_sbm(&spec)?;
    let with_ext = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    let (edges, groups) = (with_ext(".edges"), with_ext(".groups"));
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_edge_list(&graph, &edges)?;
    write_groups(&graph, &groups)?;
    info!("wrote {} and {}", edges.display(), groups.display());
    Ok((edges, groups))
}

pub fn cmd_run(config_path: &Path, overrides: &Overrides) -> Result<ExperimentResults> {
    let mut config = ExperimentConfig::from_json_file(config_path)?;
    overrides.apply(&mut config);
    let results = run_experiment(&config)?;
    write_run_outputs(&results, &config.out_dir, overrides.split_timings)?;
    Ok(results)
}

pub fn cmd_sweep_lambda(config_path: &Path, overrides: &Overrides) -> Result<SweepResults> {
    let mut config = ExperimentConfig::from_json_file(config_path)?;
    overrides.apply(&mut config);
    let results = sweep_lambda(&config)?;
    write_sweep_outputs(&results, &config.out_dir)?;
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            k: 4,
            g_max: 5,
            delta: 50,
            p: 0.1,
            repetitions: 2,
            seed: 3,
            lambdas: vec![0.0, 0.5, 1.0],
            ..ExperimentConfig::new(NetworkSource::Karate)
        }
    }

    #[test]
    fn config_defaults_and_parsing() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"network": {"kind": "karate"}}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(NetworkSource::Karate));
        assert_eq!((c.k, c.pop, c.g_max, c.delta, c.repetitions), (40, 10, 150, 1000, 10));
        assert_eq!((c.cr, c.mu, c.lambda, c.p), (0.6, 0.1, 0.5, 0.01));
        assert_eq!(c.lambdas.len(), 11);
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"network": {"kind": "sbm", "group_sizes": [3, 2], "prob_matrix": [[1, 0], [0, 1]], "seed": 4},
                "algorithms": ["greedy", "rea-fim"]}"#,
        )
        .unwrap();
        assert_eq!(c.algorithms, vec![Algorithm::Greedy, Algorithm::ReaFim]);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"network": {"kind": "karate"}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn validation_lists_every_problem() {
        let c = ExperimentConfig {
            repetitions: 0,
            algorithms: vec![],
            pop: 3,
            lambdas: vec![1.5],
            ..tiny()
        };
        let Err(FimError::Validation(msg)) = c.validate() else {
            panic!("expected validation error")
        };
        for field in ["repetitions", "algorithms", "pop", "lambdas"] {
            assert!(msg.contains(field), "{msg}");
        }
        assert!(matches!(
            run_experiment(&ExperimentConfig { k: 35, ..tiny() }),
            Err(FimError::Validation(_))
        ));
    }

    #[test]
    fn greedy_only_has_unit_pof() {
        let r = run_experiment(&ExperimentConfig {
            algorithms: vec![Algorithm::Greedy],
            ..tiny()
        })
        .unwrap();
        assert_eq!(r.runs.len(), 2);
        assert!(r.runs.iter().all(|run| run.report.pof == Some(1.0)));
        assert_eq!(r.summary[0].mean_pof, 1.0);
    }

    #[test]
    fn one_point_sweep_matches_run() {
        let config = ExperimentConfig {
            algorithms: vec![Algorithm::CeaFim],
            lambdas: vec![0.5],
            ..tiny()
        };
        let run = run_experiment(&config).unwrap();
        let sweep = sweep_lambda(&config).unwrap();
        let s = &run.summary[0];
        let row = &sweep.rows[0];
        assert_eq!((row.mean_mf, row.mean_dcv, row.mean_pof, row.mean_f), (s.mean_mf, s.mean_dcv, s.mean_pof, s.mean_f));
        assert_eq!(sweep.runs, run.runs);
    }

    #[test]
    fn dense_ranking() {
        assert_eq!(dense_ranks(&[0.1, 0.3, 0.301, 0.2], true), vec![3, 1, 1, 2]);
        assert_eq!(dense_ranks(&[0.1, 0.3, 0.301, 0.2], false), vec![1, 3, 3, 2]);
    }

    #[test]
    fn outputs_have_stable_headers() {
        let dir = tempfile::tempdir().unwrap();
        let results = run_experiment(&tiny()).unwrap();
        write_run_outputs(&results, dir.path(), true).unwrap();
        let head = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(head("summary.csv"), "algorithm,repetitions,mean_influence,mean_mf,mean_dcv,mean_f,mean_pof");
        assert_eq!(head("timings.csv"), "algorithm,repetition,seconds,algorithm_seconds,setup_seconds");
        assert_eq!(head("traces/cea-fim_rep0.csv"), "generation,best_f,mean_f,best_mf,best_dcv");
        assert_eq!(fs::read_to_string(dir.path().join("traces/rea-fim_rep1.csv")).unwrap().lines().count(), 7);
        let sweep = sweep_lambda(&tiny()).unwrap();
        write_sweep_outputs(&sweep, dir.path()).unwrap();
        assert_eq!(
            head("sweep.csv"),
            "lambda,repetitions,mean_mf,mean_dcv,mean_pof,mean_f,se_mf,se_dcv,rank_mf,rank_dcv,rank_pof,rank_f"
        );
        assert_eq!(sweep.rows.len(), 3);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
        assert_eq!(json["config"]["seed"], 3);
    }
    fn generate_into(dir: &Path, spec: &SbmSpec, name: &str) -> (AttributedGraph, AttributedGraph) {
        let spec_path = dir.join(format!("{name}.json"));
        fs::write(&spec_path, serde_json::to_string(spec).unwrap()).unwrap();
        let (edges, groups) = cmd_generate(&spec_path, &dir.join("nets").join(name)).unwrap();
        let back = load_groups_column(load_edge_list(edges).unwrap(), groups, 0).unwrap();
        (generate_sbm(spec).unwrap(), back)
    }

    #[test]
    fn generated_networks_reload_identically() {
        let dir = tempfile::tempdir().unwrap();
        let (g, back) = generate_into(dir.path(), &SbmSpec::synth2(7), "synth2");
        assert_eq!(back, g);
        assert!((0..g.node_count()).any(|v| g.degree(v) == 0));

        let (g, back) = generate_into(dir.path(), &SbmSpec::synth3(7), "synth3");
        assert_eq!(back, g);
        assert_eq!(back.group_sizes(), vec![300, 125, 75]);

        let zero = SbmSpec {
            group_sizes: vec![2, 2],
            prob_matrix: vec![vec![0.0; 2]; 2],
            rng_seed: 1,
        };
        let (g, back) = generate_into(dir.path(), &zero, "zero");
        assert_eq!((back.node_count(), back.edge_count(), back.group_count()), (4, 0, 2));
        assert_eq!(back, g);
    }
}

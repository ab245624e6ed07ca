//! Fair influence maximization with a community-based evolutionary search.
//!
//! The pipeline: detect communities with Louvain, score nodes with PageRank,
//! then evolve fixed-size seed sets whose fitness trades maximin fairness
//! against diversity-constraint violation, estimated on a shared ensemble of
//! live-edge samples of the independent cascade model.

pub mod community;
pub mod diffusion;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod fairness;
pub mod graph;
pub mod greedy;
pub mod pagerank;
pub mod rng;
pub mod sbm;
pub mod selection;

pub use community::{louvain, modularity, Partition};
pub use diffusion::{estimate_influence, sample_ensemble, InfluenceEstimate, LiveEdgeEnsemble};
pub use error::{FimError, Result};
pub use evolution::{evolve, rea_fim_variant, EvolutionConfig, EvolutionOutcome, SelectionMode};
pub use experiment::{run_experiment, sweep_lambda, ExperimentConfig, NetworkSource};
pub use fairness::{fairness_report, FairnessReport};
pub use graph::AttributedGraph;
pub use greedy::{greedy_celf, group_baselines};
pub use pagerank::{pagerank, NodeScores};
pub use sbm::{generate_sbm, SbmSpec};
pub use selection::{SelectionContext, SelectionState};

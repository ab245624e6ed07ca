//! Stochastic block model generator for the synthetic benchmark networks.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FimError, Result};
use crate::graph::AttributedGraph;
use crate::rng::stream_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub group_sizes: Vec<usize>,
    /// Symmetric block matrix; the diagonal holds intra-group probabilities.
    pub prob_matrix: Vec<Vec<f64>>,
    #[serde(rename = "seed")]
    pub rng_seed: u64,
}

impl SbmSpec {
    /// Two groups of 350 and 150 nodes, intra 0.025, inter 0.001.
    pub fn synth2(seed: u64) -> Self {
        SbmSpec {
            group_sizes: vec![350, 150],
            prob_matrix: vec![vec![0.025, 0.001], vec![0.001, 0.025]],
            rng_seed: seed,
        }
    }

    /// Three groups of 300, 125 and 75 nodes, intra 0.025, inter 0.001 (A-B)
    /// and 0.0005 (A-C, B-C).
    pub fn synth3(seed: u64) -> Self {
        SbmSpec {
            group_sizes: vec![300, 125, 75],
            prob_matrix: vec![
                vec![0.025, 0.001, 0.0005],
                vec![0.001, 0.025, 0.0005],
                vec![0.0005, 0.0005, 0.025],
            ],
            rng_seed: seed,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FimError::io(path, e))?;
        let spec: SbmSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.group_sizes.len();
        if q == 0 {
            return Err(FimError::Validation("SBM needs at least one group".into()));
        }
        if let Some(i) = self.group_sizes.iter().position(|&s| s == 0) {
            return Err(FimError::Validation(format!("SBM group {i} has size 0")));
        }
        if self.prob_matrix.len() != q || self.prob_matrix.iter().any(|row| row.len() != q) {
            return Err(FimError::Validation(format!(
                "SBM probability matrix must be {q}x{q}"
            )));
        }
        for i in 0..q {
            for j in 0..q {
                let p = self.prob_matrix[i][j];
                if !(0.0..=1.0).contains(&p) {
                    return Err(FimError::Validation(format!(
                        "SBM probability [{i}][{j}] = {p} outside [0, 1]"
                    )));
                }
                if p != self.prob_matrix[j][i] {
                    return Err(FimError::Validation(format!(
                        "SBM probability matrix not symmetric at [{i}][{j}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Expected number of edges under independent Bernoulli pairs.
    pub fn expected_edges(&self) -> f64 {
        let q = self.group_sizes.len();
        let mut total = 0.0;
        for i in 0..q {
            let a = self.group_sizes[i] as f64;
            total += self.prob_matrix[i][i] * a * (a - 1.0) / 2.0;
            for j in i + 1..q {
                total += self.prob_matrix[i][j] * a * self.group_sizes[j] as f64;
            }
        }
        total
    }
}

/// Samples a graph from `spec`. Nodes are numbered block by block and each
/// node belongs to the group of its block.
pub fn generate_sbm(spec: &SbmSpec) -> Result<AttributedGraph> {
    spec.validate()?;
    let block: Vec<usize> = spec
        .group_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &size)| std::iter::repeat_n(g, size))
        .collect();
    let n = block.len();
    let mut rng = stream_rng(spec.rng_seed, 0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = spec.prob_matrix[block[u]][block[v]];
            if p > 0.0 && rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let memberships = block.iter().map(|&g| vec![g]).collect();
    let labels = (0..spec.group_sizes.len() as u64).collect();
    AttributedGraph::from_edges(n, edges)?.with_groups(memberships, labels)
}

//! Undirected graphs whose nodes carry one or more group memberships.
//!
//! Node ids are dense (`0..n`). The original identifiers read from disk are
//! kept as *labels* so results can be reported in the caller's id space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{FimError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    labels: Vec<u64>,
    label_index: HashMap<u64, usize>,
    groups: Vec<Vec<usize>>,
    group_labels: Vec<u64>,
    memberships: Vec<Vec<usize>>,
}

impl AttributedGraph {
    /// Builds a graph on nodes `0..n` with identity labels. Duplicate edges
    /// (in either orientation) are merged; self-loops are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::from_labeled_edges((0..n as u64).collect(), edges)
    }

    fn from_labeled_edges(
        labels: Vec<u64>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(FimError::UnknownNode(u.max(v) as u64));
            }
            if u == v {
                return Err(FimError::Validation(format!(
                    "self-loop on node {}",
                    labels[u]
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let label_index = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        Ok(AttributedGraph {
            adjacency,
            edges,
            labels,
            label_index,
            groups: Vec::new(),
            group_labels: Vec::new(),
            memberships: vec![Vec::new(); n],
        })
    }

    /// Attaches group memberships. `memberships[v]` lists the group indices
    /// of node `v`; every node needs at least one and every group in
    /// `0..group_labels.len()` must be nonempty.
    pub fn with_groups(mut self, memberships: Vec<Vec<usize>>, group_labels: Vec<u64>) -> Result<Self> {
        if memberships.len() != self.node_count() {
            return Err(FimError::Validation(format!(
                "membership table has {} rows for {} nodes",
                memberships.len(),
                self.node_count()
            )));
        }
        let q = group_labels.len();
        let mut groups = vec![Vec::new(); q];
        let mut uncovered = Vec::new();
        let mut normalized = Vec::with_capacity(memberships.len());
        for (v, mut member_of) in memberships.into_iter().enumerate() {
            member_of.sort_unstable();
            member_of.dedup();
            if member_of.is_empty() {
                uncovered.push(v);
            }
            for &g in &member_of {
                if g >= q {
                    return Err(FimError::Validation(format!("group index {g} out of range")));
                }
                groups[g].push(v);
            }
            normalized.push(member_of);
        }
        if let Some(&first) = uncovered.first() {
            return Err(FimError::Coverage(uncovered.len(), self.labels[first]));
        }
        if let Some(g) = groups.iter().position(Vec::is_empty) {
            return Err(FimError::Validation(format!(
                "group {} has no members",
                group_labels[g]
            )));
        }
        self.groups = groups;
        self.group_labels = group_labels;
        self.memberships = normalized;
        Ok(self)
    }

    /// Same graph with every node in a single group labelled 0.
    pub fn with_single_group(self) -> Result<Self> {
        let n = self.node_count();
        self.with_groups(vec![vec![0]; n], vec![0])
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn label(&self, v: usize) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn node_of_label(&self, label: u64) -> Option<usize> {
        self.label_index.get(&label).copied()
    }

    pub fn has_groups(&self) -> bool {
        !self.groups.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Sorted members of group `g`.
    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_label(&self, g: usize) -> u64 {
        self.group_labels[g]
    }

    pub fn group_labels(&self) -> &[u64] {
        &self.group_labels
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Groups node `v` belongs to, ascending.
    pub fn memberships(&self, v: usize) -> &[usize] {
        &self.memberships[v]
    }

    pub fn require_groups(&self) -> Result<()> {
        if self.has_groups() {
            Ok(())
        } else {
            Err(FimError::Validation("graph has no group assignment".into()))
        }
    }
}

/// A node-induced subgraph together with the map back to parent ids.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: AttributedGraph,
    /// `to_parent[i]` is the parent id of subgraph node `i`.
    pub to_parent: Vec<usize>,
}

impl Subgraph {
    pub fn to_child(&self, parent: usize) -> Option<usize> {
        self.to_parent.binary_search(&parent).ok()
    }
}

/// `G[nodes]`: keeps exactly the edges with both endpoints in `nodes`.
/// Subgraph ids follow ascending parent id. Group labels are kept; groups
/// left empty by the restriction are dropped.
pub fn induced_subgraph(graph: &AttributedGraph, nodes: &[usize]) -> Result<Subgraph> {
    let mut to_parent = nodes.to_vec();
    to_parent.sort_unstable();
    to_parent.dedup();
    if let Some(&bad) = to_parent.iter().find(|&&v| v >= graph.node_count()) {
        return Err(FimError::UnknownNode(bad as u64));
    }
    let mut to_child = vec![usize::MAX; graph.node_count()];
    for (i, &v) in to_parent.iter().enumerate() {
        to_child[v] = i;
    }
    let mut edges = Vec::new();
    for (i, &v) in to_parent.iter().enumerate() {
        for &w in graph.neighbors(v) {
            let j = to_child[w];
            if j != usize::MAX && i < j {
                edges.push((i, j));
            }
        }
    }
    let labels = to_parent.iter().map(|&v| graph.label(v)).collect();
    let mut sub = AttributedGraph::from_labeled_edges(labels, edges)?;
    if graph.has_groups() {
        let mut kept = BTreeMap::new();
        for &v in &to_parent {
            for &g in graph.memberships(v) {
                let next = kept.len();
                kept.entry(g).or_insert(next);
            }
        }
        // renumber surviving groups in parent order
        let order: Vec<usize> = kept.keys().copied().collect();
        let remap: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let memberships = to_parent
            .iter()
            .map(|&v| graph.memberships(v).iter().map(|g| remap[g]).collect())
            .collect();
        let group_labels = order.iter().map(|&g| graph.group_label(g)).collect();
        sub = sub.with_groups(memberships, group_labels)?;
    }
    Ok(Subgraph {
        graph: sub,
        to_parent,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim();
        (!trimmed.is_empty() && !trimmed.starts_with('#')).then_some((i + 1, trimmed))
    })
}

fn parse_id(token: &str, path: &Path, line: usize) -> Result<u64> {
    token.parse::<u64>().map_err(|_| FimError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected a non-negative integer id, found {token:?}"),
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| FimError::io(path, e))
}

/// Parses a whitespace-separated edge list. A line holding a single id
/// declares an isolated node. Arbitrary integer ids are compacted to `0..n`
/// in ascending id order.
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<AttributedGraph> {
    let mut raw = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, content) in content_lines(text) {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() == 1 {
            ids.insert(parse_id(tokens[0], origin, line)?);
            continue;
        }
        if tokens.len() != 2 {
            return Err(FimError::Parse {
                path: origin.to_path_buf(),
                line,
                message: format!("expected two node ids, found {} fields", tokens.len()),
            });
        }
        let u = parse_id(tokens[0], origin, line)?;
        let v = parse_id(tokens[1], origin, line)?;
        if u == v {
            return Err(FimError::Validation(format!(
                "{}:{line}: self-loop on node {u}",
                origin.display()
            )));
        }
        raw.push((u, v));
    }
    ids.extend(raw.iter().flat_map(|&(u, v)| [u, v]));
    let labels: Vec<u64> = ids.into_iter().collect();
    let index: HashMap<u64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    AttributedGraph::from_labeled_edges(labels, raw.into_iter().map(|(u, v)| (index[&u], index[&v])))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<AttributedGraph> {
    let path = path.as_ref();
    parse_edge_list(&read_text(path)?, path)
}

/// Parses a group file: `<node> <attr_0> [<attr_1> ...]` per line, reading
/// the attribute in `column`. A node may appear on several lines, which
/// gives it several memberships. Group indices follow ascending group id.
pub fn parse_groups(
    graph: AttributedGraph,
    text: &str,
    column: usize,
    origin: &Path,
) -> Result<AttributedGraph> {
    let mut pairs = Vec::new();
    for (line, content) in content_lines(text) {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() < column + 2 {
            return Err(FimError::Parse {
                path: origin.to_path_buf(),
                line,
                message: format!(
                    "expected a node id and at least {} attribute column(s)",
                    column + 1
                ),
            });
        }
        let label = parse_id(tokens[0], origin, line)?;
        let group = parse_id(tokens[column + 1], origin, line)?;
        let node = graph
            .node_of_label(label)
            .ok_or(FimError::UnknownNode(label))?;
        pairs.push((node, group));
    }
    let group_ids: BTreeSet<u64> = pairs.iter().map(|&(_, g)| g).collect();
    let group_labels: Vec<u64> = group_ids.into_iter().collect();
    let index: HashMap<u64, usize> = group_labels.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut memberships = vec![Vec::new(); graph.node_count()];
    for (node, group) in pairs {
        memberships[node].push(index[&group]);
    }
    graph.with_groups(memberships, group_labels)
}

pub fn load_groups(graph: AttributedGraph, path: impl AsRef<Path>) -> Result<AttributedGraph> {
    load_groups_column(graph, path, 0)
}

pub fn load_groups_column(
    graph: AttributedGraph,
    path: impl AsRef<Path>,
    column: usize,
) -> Result<AttributedGraph> {
    let path = path.as_ref();
    parse_groups(graph, &read_text(path)?, column, path)
}

/// Writes `<u> <v>` lines using node labels, then one `<v>` line per
/// isolated node.
pub fn write_edge_list(graph: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for &(u, v) in graph.edges() {
        writeln!(out, "{} {}", graph.label(u), graph.label(v)).expect("write to vec");
    }
    for v in (0..graph.node_count()).filter(|&v| graph.degree(v) == 0) {
        writeln!(out, "{}", graph.label(v)).expect("write to vec");
    }
    fs::write(path, out).map_err(|e| FimError::io(path, e))
}

/// Writes one `<node> <group>` line per membership, using labels.
pub fn write_groups(graph: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for v in 0..graph.node_count() {
        for &g in graph.memberships(v) {
            writeln!(out, "{} {}", graph.label(v), graph.group_label(g)).expect("write to vec");
        }
    }
    fs::write(path, out).map_err(|e| FimError::io(path, e))
}

const KARATE_EDGES: &str = include_str!("../data/karate.edges");
const KARATE_GROUPS: &str = include_str!("../data/karate.groups");

/// Zachary's karate club with the two post-split factions as groups.
pub fn karate_club() -> AttributedGraph {
    let origin = Path::new("karate.edges");
    let graph = parse_edge_list(KARATE_EDGES, origin).expect("bundled karate edges parse");
    parse_groups(graph, KARATE_GROUPS, 0, Path::new("karate.groups"))
        .expect("bundled karate groups parse")
}

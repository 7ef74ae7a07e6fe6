//! Retweet and reply networks, k-core membership, seeded affiliation
//! clusters and inter-coder agreement.

mod io;
mod kappa;
mod kcore;
mod labels;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::ingest::{InteractionRecord, RecordKind};

pub use io::{
    read_class_assignments, read_edge_list, read_seeds, write_class_assignments,
    write_edge_list, write_seeds,
};
pub use kappa::{verify_sample, AgreementBand, KappaResult};
pub use kcore::{k_core, one_degree_users};
pub use labels::cluster_partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    Retweet,
    Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeClass {
    TwoCore,
    OneDegree,
}

impl DegreeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DegreeClass::TwoCore => "two_core",
            DegreeClass::OneDegree => "one_degree",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Affiliation {
    Democratic,
    Republican,
    Unknown,
}

impl Affiliation {
    pub fn as_str(self) -> &'static str {
        match self {
            Affiliation::Democratic => "democratic",
            Affiliation::Republican => "republican",
            Affiliation::Unknown => "unknown",
        }
    }
}

impl std::fmt::Display for Affiliation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserClassAssignment {
    pub user_id: String,
    pub degree_class: DegreeClass,
    pub affiliation: Affiliation,
}

/// Directed user graph with collapsed multi-edges and no self-loops.
///
/// Nodes and edges iterate in sorted order. The stored weight is the number
/// of interactions collapsed into each edge; it is exported but never
/// affects degree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectedGraph {
    nodes: BTreeSet<String>,
    edges: BTreeMap<(String, String), u32>,
}

impl DirectedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) {
        if !self.nodes.contains(id) {
            self.nodes.insert(id.to_string());
        }
    }

    /// Adds `source -> target`. A self-loop only registers the node.
    pub fn add_edge(&mut self, source: &str, target: &str) {
        self.add_weighted_edge(source, target, 1);
    }

    pub(crate) fn add_weighted_edge(&mut self, source: &str, target: &str, weight: u32) {
        self.add_node(source);
        self.add_node(target);
        if source != target {
            *self
                .edges
                .entry((source.to_string(), target.to_string()))
                .or_insert(0) += weight;
        }
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.edges.iter().map(|((s, t), w)| (s.as_str(), t.as_str(), *w))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edges
            .contains_key(&(source.to_string(), target.to_string()))
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<String>) -> DirectedGraph {
        let mut g = DirectedGraph::new();
        for n in self.nodes.intersection(keep) {
            g.add_node(n);
        }
        for ((s, t), w) in &self.edges {
            if keep.contains(s) && keep.contains(t) {
                g.add_weighted_edge(s, t, *w);
            }
        }
        g
    }

    /// Sorted node ids and deduplicated undirected neighbor lists indexed
    /// by position in that id list.
    pub fn undirected_adjacency(&self) -> (Vec<&str>, Vec<Vec<usize>>) {
        let ids: Vec<&str> = self.nodes.iter().map(String::as_str).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
        for (s, t) in self.edges.keys() {
            let (a, b) = (index[s.as_str()], index[t.as_str()]);
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        (ids, adj)
    }
}

/// Maps Reddit fullnames (`t1_<id>` comments, `t3_<id>` submissions) to
/// in-corpus eligible authors.
pub struct ParentIndex<'a> {
    comments: HashMap<&'a str, &'a str>,
    submissions: HashMap<&'a str, &'a str>,
}

impl<'a> ParentIndex<'a> {
    pub fn new(records: &'a [InteractionRecord]) -> Self {
        let mut comments = HashMap::new();
        let mut submissions = HashMap::new();
        for r in records.iter().filter(|r| r.eligible) {
            match r.kind {
                RecordKind::Comment => {
                    comments.insert(r.message_id.as_str(), r.author_id.as_str());
                }
                RecordKind::Submission => {
                    submissions.insert(r.message_id.as_str(), r.author_id.as_str());
                }
                _ => {}
            }
        }
        Self {
            comments,
            submissions,
        }
    }

    pub fn author_of(&self, parent_id: &str) -> Option<&'a str> {
        if let Some(id) = parent_id.strip_prefix("t1_") {
            self.comments.get(id).copied()
        } else if let Some(id) = parent_id.strip_prefix("t3_") {
            self.submissions.get(id).copied()
        } else {
            self.comments
                .get(parent_id)
                .or_else(|| self.submissions.get(parent_id))
                .copied()
        }
    }

    /// The explicit target if present, otherwise the resolved parent author.
    pub fn target_of(&self, r: &'a InteractionRecord) -> Option<&'a str> {
        r.target_author_id
            .as_deref()
            .or_else(|| r.parent_id.as_deref().and_then(|p| self.author_of(p)))
    }
}

/// Fills `target_author_id` of comments whose parent is in the corpus.
pub fn resolve_reply_targets(records: &mut [InteractionRecord]) {
    let resolved: Vec<Option<String>> = {
        let index = ParentIndex::new(records);
        records
            .iter()
            .map(|r| match (r.kind, &r.target_author_id, &r.parent_id) {
                (RecordKind::Comment, None, Some(p)) => index.author_of(p).map(str::to_string),
                _ => None,
            })
            .collect()
    };
    for (r, target) in records.iter_mut().zip(resolved) {
        if target.is_some() {
            r.target_author_id = target;
        }
    }
}

/// Builds the retweet or reply network. Ineligible authors are skipped;
/// qualifying records without a resolvable target contribute their author
/// as an isolated node.
pub fn build_interaction_graph(records: &[InteractionRecord], mode: GraphMode) -> DirectedGraph {
    let index = ParentIndex::new(records);
    let mut g = DirectedGraph::new();
    for r in records.iter().filter(|r| r.eligible) {
        let qualifies = match mode {
            GraphMode::Retweet => r.kind == RecordKind::Retweet,
            GraphMode::Reply => matches!(r.kind, RecordKind::Reply | RecordKind::Comment),
        };
        if !qualifies {
            continue;
        }
        match index.target_of(r) {
            Some(target) => g.add_edge(&r.author_id, target),
            None => g.add_node(&r.author_id),
        }
    }
    g
}

/// Every eligible author plus every graph node.
pub fn interaction_users(records: &[InteractionRecord], graph: &DirectedGraph) -> BTreeSet<String> {
    let mut users: BTreeSet<String> = graph.nodes().clone();
    for r in records.iter().filter(|r| r.eligible) {
        if !users.contains(&r.author_id) {
            users.insert(r.author_id.clone());
        }
    }
    users
}

/// Assigns each user its degree class and (when known) its affiliation.
pub fn classify_users(
    all_users: &BTreeSet<String>,
    core: &BTreeSet<String>,
    affiliations: &BTreeMap<String, Affiliation>,
) -> Vec<UserClassAssignment> {
    all_users
        .iter()
        .map(|u| UserClassAssignment {
            user_id: u.clone(),
            degree_class: if core.contains(u) {
                DegreeClass::TwoCore
            } else {
                DegreeClass::OneDegree
            },
            affiliation: affiliations.get(u).copied().unwrap_or(Affiliation::Unknown),
        })
        .collect()
}

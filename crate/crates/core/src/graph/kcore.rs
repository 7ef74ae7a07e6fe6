use std::collections::{BTreeSet, VecDeque};

use super::DirectedGraph;
use crate::error::{Error, Result};

/// Node set of the k-core: the maximal induced subgraph in which every node
/// keeps at least `k` distinct neighbors in the undirected view.
///
/// Peels nodes of degree below `k` until nothing changes.
pub fn k_core(graph: &DirectedGraph, k: usize) -> Result<BTreeSet<String>> {
    if k == 0 {
        return Err(Error::contract("k must be at least 1"));
    }
    let (ids, adj) = graph.undirected_adjacency();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut removed = vec![false; ids.len()];
    let mut queue: VecDeque<usize> = (0..ids.len()).filter(|&v| degree[v] < k).collect();
    for &v in &queue {
        removed[v] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if removed[u] {
                continue;
            }
            degree[u] -= 1;
            if degree[u] < k {
                removed[u] = true;
                queue.push_back(u);
            }
        }
    }
    Ok(ids
        .into_iter()
        .zip(removed)
        .filter(|(_, gone)| !gone)
        .map(|(id, _)| id.to_string())
        .collect())
}

/// Users outside the core: `all_users \ core_users`.
pub fn one_degree_users(
    all_users: &BTreeSet<String>,
    core_users: &BTreeSet<String>,
) -> Result<BTreeSet<String>> {
    if let Some(stray) = core_users.difference(all_users).next() {
        return Err(Error::contract(format!(
            "core user {stray} is not in the user population"
        )));
    }
    Ok(all_users.difference(core_users).cloned().collect())
}

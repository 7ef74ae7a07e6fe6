use std::cmp::Reverse;
use std::collections::BTreeMap;

use super::{Affiliation, DirectedGraph};
use crate::error::{Error, Result};

/// Seeded label propagation over the undirected view of `core_graph`.
///
/// Seeds are clamped. In each synchronous round every other node adopts the
/// most frequent label among its labeled neighbors; ties go to the label with
/// more seeds, then to the lexicographically smaller name. Nodes never
/// reached stay [`Affiliation::Unknown`].
pub fn cluster_partition(
    core_graph: &DirectedGraph,
    seeds: &BTreeMap<String, Affiliation>,
) -> Result<BTreeMap<String, Affiliation>> {
    if !seeds.values().any(|a| *a != Affiliation::Unknown) {
        return Err(Error::config("cluster partition needs at least one seed"));
    }
    let (ids, adj) = core_graph.undirected_adjacency();
    let n = ids.len();
    let mut labels: Vec<Option<Affiliation>> = ids
        .iter()
        .map(|id| seeds.get(*id).copied().filter(|a| *a != Affiliation::Unknown))
        .collect();
    let clamped: Vec<bool> = labels.iter().map(Option::is_some).collect();

    let mut seed_mass: BTreeMap<Affiliation, usize> = BTreeMap::new();
    for a in labels.iter().flatten() {
        *seed_mass.entry(*a).or_default() += 1;
    }

    // Synchronous updates can cycle on bipartite pieces; the cap keeps the
    // result deterministic either way.
    let max_rounds = 2 * n + 2;
    for _ in 0..max_rounds {
        let mut next = labels.clone();
        for v in (0..n).filter(|&v| !clamped[v]) {
            let mut tally: BTreeMap<Affiliation, usize> = BTreeMap::new();
            for a in adj[v].iter().filter_map(|&u| labels[u]) {
                *tally.entry(a).or_default() += 1;
            }
            next[v] = tally
                .into_iter()
                .max_by_key(|(label, count)| {
                    (
                        *count,
                        seed_mass.get(label).copied().unwrap_or(0),
                        Reverse(label.as_str()),
                    )
                })
                .map(|(label, _)| label)
                .or(labels[v]);
        }
        if next == labels {
            break;
        }
        labels = next;
    }

    Ok(ids
        .into_iter()
        .zip(labels)
        .map(|(id, l)| (id.to_string(), l.unwrap_or(Affiliation::Unknown)))
        .collect())
}

//! Seeded inputs shared by the benchmarks.

use polarlens_core::DirectedGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random directed graph with `nodes` nodes and about `nodes * avg_degree`
/// edges, skewed toward low ids so that a sizeable 2-core forms.
pub fn random_graph(nodes: usize, avg_degree: usize, seed: u64) -> DirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DirectedGraph::new();
    for _ in 0..nodes * avg_degree {
        let a = rng.random_range(0..nodes);
        let b = (rng.random::<f64>().powi(2) * nodes as f64) as usize;
        if a != b {
            g.add_edge(&format!("u{a}"), &format!("u{b}"));
        }
    }
    g
}

/// Entropy-like values in [0, 10) with a dense band around 4.5.
pub fn entropy_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.6) {
                4.1 + rng.random::<f64>() * 0.7
            } else {
                rng.random::<f64>() * 10.0
            }
        })
        .collect()
}

pub fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_seeded() {
        assert_eq!(uniform(5, 1), uniform(5, 1));
        assert_eq!(entropy_values(100, 2).len(), 100);
        assert!(random_graph(100, 3, 0).edge_count() > 0);
    }
}

//! Seeded random instances for tests, benchmarks and experiments.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hypergraph::{Hypergraph, Weight};

/// Shape of a uniformly random hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub vertices: usize,
    pub edges: usize,
    /// Pins per edge are drawn from `2..=max_edge_size` (capped at `vertices`).
    pub max_edge_size: usize,
    pub max_vertex_weight: Weight,
    pub max_edge_weight: Weight,
}

pub fn random_hypergraph(spec: &RandomSpec, seed: u64) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.vertices;
    let weights = (0..n)
        .map(|_| rng.random_range(1..=spec.max_vertex_weight.max(1)))
        .collect();
    let top = spec.max_edge_size.min(n).max(1);
    let low = 2.min(top);
    let edges: Vec<(Weight, Vec<usize>)> = (0..spec.edges)
        .map(|_| {
            let size = rng.random_range(low..=top);
            let mut pins = sample(&mut rng, n, size).into_vec();
            pins.sort_unstable();
            (rng.random_range(1..=spec.max_edge_weight.max(1)), pins)
        })
        .collect();
    Hypergraph::new(weights, edges).expect("generated instance is valid")
}

/// Hypergraph with `groups` planted clusters of `group_size` unit vertices.
/// Each cluster gets `inner_edges` random nets inside it; `cross_edges`
/// nets span two random clusters.
pub fn planted_hypergraph(
    groups: usize,
    group_size: usize,
    inner_edges: usize,
    cross_edges: usize,
    max_edge_size: usize,
    seed: u64,
) -> Hypergraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = groups * group_size;
    let top = max_edge_size.clamp(2, group_size.max(2));
    let mut edges = Vec::with_capacity(groups * inner_edges + cross_edges);
    let net = |rng: &mut ChaCha8Rng, members: &[usize]| {
        let size = rng.random_range(2..=top.min(members.len()));
        let mut pins: Vec<usize> = sample(rng, members.len(), size).into_iter().map(|i| members[i]).collect();
        pins.sort_unstable();
        (1, pins)
    };
    for g in 0..groups {
        let members: Vec<usize> = (g * group_size..(g + 1) * group_size).collect();
        if members.len() < 2 {
            continue;
        }
        for _ in 0..inner_edges {
            edges.push(net(&mut rng, &members));
        }
    }
    if groups >= 2 {
        for _ in 0..cross_edges {
            let a = rng.random_range(0..groups);
            let b = (a + rng.random_range(1..groups)) % groups;
            let u = a * group_size + rng.random_range(0..group_size);
            let v = b * group_size + rng.random_range(0..group_size);
            edges.push((1, vec![u.min(v), u.max(v)]));
        }
    }
    Hypergraph::new(vec![1; n], edges).expect("generated instance is valid")
}

/// Two cliques of `size` vertices each (all pairs as 2-pin nets) joined by
/// one unit net between vertex `size - 1` and vertex `size`.
pub fn two_cliques(size: usize) -> Hypergraph {
    let mut edges = Vec::new();
    for base in [0, size] {
        for i in 0..size {
            for j in i + 1..size {
                edges.push((1, vec![base + i, base + j]));
            }
        }
    }
    edges.push((1, vec![size - 1, size]));
    Hypergraph::new(vec![1; 2 * size], edges).expect("valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_repeats() {
        let spec = RandomSpec {
            vertices: 30,
            edges: 40,
            max_edge_size: 5,
            max_vertex_weight: 3,
            max_edge_weight: 4,
        };
        let a = random_hypergraph(&spec, 7);
        let b = random_hypergraph(&spec, 7);
        assert_eq!(crate::write_hmetis(&a), crate::write_hmetis(&b));
        assert_eq!(a.num_edges(), 40);
        assert!(a.edges().all(|(_, pins)| (2..=5).contains(&pins.len())));
    }

    #[test]
    fn planted_shape() {
        let h = planted_hypergraph(3, 10, 20, 5, 4, 1);
        assert_eq!(h.num_vertices(), 30);
        assert_eq!(h.num_edges(), 65);
        let h = two_cliques(4);
        assert_eq!(h.num_edges(), 13);
    }
}

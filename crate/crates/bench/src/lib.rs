//! Fixed instances shared by the benchmarks in `benches/`.

use mstpart::synthetic::{planted_hypergraph, random_hypergraph, RandomSpec};
use mstpart::Hypergraph;

/// Random hypergraph with `n` vertices, `1.2 n` nets of 2..=6 pins.
pub fn random_instance(n: usize, seed: u64) -> Hypergraph {
    random_hypergraph(
        &RandomSpec {
            vertices: n,
            edges: n + n / 5,
            max_edge_size: 6,
            max_vertex_weight: 3,
            max_edge_weight: 3,
        },
        seed,
    )
}

/// Four dense groups of `group_size` vertices with sparse cross nets.
pub fn planted_instance(group_size: usize, seed: u64) -> Hypergraph {
    planted_hypergraph(4, group_size, 3 * group_size, group_size / 10, 4, seed)
}

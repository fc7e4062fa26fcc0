#![allow(dead_code)]

use std::collections::BTreeSet;

use mstpart::hypergraph::Weight;
use mstpart::Hypergraph;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random hypergraph with `n` vertices and `m` edges of 1..=max_size pins.
pub fn random_hg(r: &mut ChaCha8Rng, n: usize, m: usize, max_size: usize, max_w: Weight) -> Hypergraph {
    let weights = (0..n).map(|_| r.random_range(1..=max_w)).collect();
    let edges: Vec<(Weight, Vec<usize>)> = (0..m)
        .map(|_| {
            let size = r.random_range(1..=max_size.min(n));
            let mut pins = BTreeSet::new();
            while pins.len() < size {
                pins.insert(r.random_range(0..n));
            }
            (r.random_range(1..=max_w), pins.into_iter().collect())
        })
        .collect();
    Hypergraph::new(weights, edges).unwrap()
}

pub fn hypergraph_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = Hypergraph> {
    (1..=max_n).prop_flat_map(move |n| {
        let edge = (1u64..=5, proptest::collection::btree_set(0..n, 1..=n.min(5)));
        (
            proptest::collection::vec(1u64..=5, n),
            proptest::collection::vec(edge, 0..=max_m),
        )
            .prop_map(|(w, edges)| {
                Hypergraph::new(w, edges.into_iter().map(|(w, p)| (w, p.into_iter().collect()))).unwrap()
            })
    })
}

/// Hypergraph together with a k-way assignment.
pub fn partitioned_strategy(max_n: usize, max_m: usize, max_k: usize) -> impl Strategy<Value = (Hypergraph, usize, Vec<usize>)> {
    (hypergraph_strategy(max_n, max_m), 1..=max_k).prop_flat_map(|(h, k)| {
        let n = h.num_vertices();
        (Just(h), Just(k), proptest::collection::vec(0..k, n))
    })
}

/// Connectivity-1 cutsize by counting distinct blocks per edge.
pub fn cutsize_oracle(h: &Hypergraph, assignment: &[usize]) -> Weight {
    h.edges()
        .map(|(w, pins)| {
            let blocks: BTreeSet<usize> = pins.iter().map(|&v| assignment[v]).collect();
            w * (blocks.len() as Weight - 1)
        })
        .sum()
}

/// Dense clique-expansion adjacency built pair by pair.
pub fn dense_clique(h: &Hypergraph) -> Array2<f64> {
    let n = h.num_vertices();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for (w, pins) in h.edges() {
                if pins.len() >= 2 && pins.contains(&i) && pins.contains(&j) {
                    a[[i, j]] += w as f64 / (pins.len() - 1) as f64;
                }
            }
        }
    }
    a
}

pub fn laplacian_of(adj: &Array2<f64>) -> Array2<f64> {
    let n = adj.nrows();
    let mut l = -adj.clone();
    for i in 0..n {
        l[[i, i]] += adj.row(i).sum();
    }
    l
}

/// Adjacency of the complete graph with edge weights `w_i w_j`.
pub fn complete_weighted(w: &[f64]) -> Array2<f64> {
    let n = w.len();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { w[i] * w[j] })
}

/// Adjacency of the complete multipartite graph over `groups`.
pub fn multipartite(groups: &[usize]) -> Array2<f64> {
    let n = groups.len();
    Array2::from_shape_fn((n, n), |(i, j)| if groups[i] != groups[j] { 1.0 } else { 0.0 })
}

/// `Diag(degree) + A`.
pub fn shifted(adj: &Array2<f64>) -> Array2<f64> {
    let mut s = adj.clone();
    for i in 0..adj.nrows() {
        s[[i, i]] += adj.row(i).sum();
    }
    s
}

pub fn dense_c1(h: &Hypergraph, l1: f64, l2: f64) -> Array2<f64> {
    let a = dense_clique(h);
    let ones = vec![1.0; h.num_vertices()];
    let b: Vec<f64> = h.vertex_weights().iter().map(|&w| w as f64).collect();
    l1 * shifted(&a)
        + (1.0 - l1) * (l2 * laplacian_of(&complete_weighted(&ones)) + (1.0 - l2) * laplacian_of(&complete_weighted(&b)))
}

pub fn dense_c2(h: &Hypergraph, groups: &[usize], x1: f64, x2: f64) -> Array2<f64> {
    let a = dense_clique(h);
    let b: Vec<f64> = h.vertex_weights().iter().map(|&w| w as f64).collect();
    x1 * shifted(&a)
        + (1.0 - x1) * (x2 * laplacian_of(&complete_weighted(&b)) + (1.0 - x2) * laplacian_of(&multipartite(groups)))
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Exhaustive minimum cutsize over all feasible 2-way assignments.
pub fn brute_force_bisection(h: &Hypergraph, cap: Weight) -> Option<Weight> {
    let n = h.num_vertices();
    let total = h.total_vertex_weight();
    let mut best = None;
    for mask in 0u32..(1 << n) {
        let assignment: Vec<usize> = (0..n).map(|v| ((mask >> v) & 1) as usize).collect();
        let w1: Weight = (0..n).filter(|&v| assignment[v] == 1).map(|v| h.vertex_weight(v)).sum();
        if w1 > cap || total - w1 > cap {
            continue;
        }
        let c = cutsize_oracle(h, &assignment);
        if best.is_none_or(|b| c < b) {
            best = Some(c);
        }
    }
    best
}

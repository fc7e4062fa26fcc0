//! Multilevel coarsening by score-driven pair matching and contraction.

use std::collections::HashMap;

use crate::hypergraph::{BalanceSpec, Hypergraph, Partition, Weight};

/// Coarsening stops once the coarse vertex count is at most this times `k`.
pub const COARSEST_VERTICES_PER_BLOCK: usize = 625;
/// A round that keeps more than this fraction of the vertices ends coarsening.
pub const STALL_RATIO: f64 = 0.8;
pub const MAX_ROUNDS: usize = 20;

/// Disjoint vertex pairs selected for contraction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// A contracted hypergraph and the map from the finer level onto it.
#[derive(Debug, Clone)]
pub struct CoarseLevel {
    pub hypergraph: Hypergraph,
    pub map_to_coarse: Vec<usize>,
}

/// Levels ordered from finest to coarsest. Level `i` maps the vertices of
/// level `i - 1` (or the original hypergraph for `i = 0`).
#[derive(Debug, Clone, Default)]
pub struct Hierarchy {
    pub levels: Vec<CoarseLevel>,
}

impl Hierarchy {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// The coarsest hypergraph, or `original` when nothing was contracted.
    pub fn coarsest<'a>(&'a self, original: &'a Hypergraph) -> &'a Hypergraph {
        self.levels.last().map_or(original, |l| &l.hypergraph)
    }

    /// Composed map from original vertices to coarsest vertices.
    pub fn composed_map(&self, n: usize) -> Vec<usize> {
        let mut map: Vec<usize> = (0..n).collect();
        for level in &self.levels {
            for m in map.iter_mut() {
                *m = level.map_to_coarse[*m];
            }
        }
        map
    }

    /// Vertex counts per level, starting with the original.
    pub fn sizes(&self, original: &Hypergraph) -> Vec<usize> {
        std::iter::once(original.num_vertices())
            .chain(self.levels.iter().map(|l| l.hypergraph.num_vertices()))
            .collect()
    }
}

/// Matching score: sum of `w_e / max(1, |e| - 1)` over shared hyperedges.
pub fn matching_score(h: &Hypergraph, vi: usize, vj: usize) -> f64 {
    let (a, b) = (h.incident(vi), h.incident(vj));
    let (mut i, mut j) = (0, 0);
    let mut score = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                score += edge_score(h, a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    score
}

fn edge_score(h: &Hypergraph, e: usize) -> f64 {
    h.edge_weight(e) as f64 / (h.edge_size(e).saturating_sub(1).max(1)) as f64
}

/// Greedy matching. Vertices are visited by descending weight (ties by
/// index); each unmatched vertex pairs with the unmatched neighbour of
/// highest score whose combined weight fits under `cap`, ties to the lower
/// index.
pub fn build_matching(h: &Hypergraph, cap: Weight) -> Matching {
    let n = h.num_vertices();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(h.vertex_weight(v)), v));

    let mut matched = vec![false; n];
    let mut score = vec![0.0f64; n];
    let mut touched = Vec::new();
    let mut pairs = Vec::new();
    for &v in &order {
        if matched[v] {
            continue;
        }
        let wv = h.vertex_weight(v);
        for &e in h.incident(v) {
            let s = edge_score(h, e);
            for &u in h.pins(e) {
                if u == v || matched[u] {
                    continue;
                }
                if score[u] == 0.0 {
                    touched.push(u);
                }
                score[u] += s;
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for &u in &touched {
            if wv + h.vertex_weight(u) > cap {
                continue;
            }
            let better = match best {
                None => true,
                Some((bs, bu)) => score[u] > bs || (score[u] == bs && u < bu),
            };
            if better {
                best = Some((score[u], u));
            }
        }
        for &u in &touched {
            score[u] = 0.0;
        }
        touched.clear();
        if let Some((_, u)) = best {
            matched[v] = true;
            matched[u] = true;
            pairs.push((v, u));
        }
    }
    Matching { pairs }
}

/// Contracts the matched pairs. Coarse ids follow the smallest fine index
/// of each group; single-pin hyperedges are dropped and identical pin sets
/// merge with summed weight.
pub fn contract(h: &Hypergraph, m: &Matching) -> CoarseLevel {
    let n = h.num_vertices();
    let mut partner: Vec<Option<usize>> = vec![None; n];
    for &(a, b) in &m.pairs {
        partner[a] = Some(b);
        partner[b] = Some(a);
    }
    let mut map = vec![usize::MAX; n];
    let mut weights = Vec::new();
    for v in 0..n {
        if map[v] != usize::MAX {
            continue;
        }
        let id = weights.len();
        map[v] = id;
        let mut w = h.vertex_weight(v);
        if let Some(u) = partner[v] {
            map[u] = id;
            w += h.vertex_weight(u);
        }
        weights.push(w);
    }

    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut edge_weights: Vec<Weight> = Vec::new();
    let mut edge_pins: Vec<Vec<usize>> = Vec::new();
    for (w, pins) in h.edges() {
        let mut coarse: Vec<usize> = pins.iter().map(|&p| map[p]).collect();
        coarse.sort_unstable();
        coarse.dedup();
        if coarse.len() < 2 {
            continue;
        }
        match index.get(&coarse) {
            Some(&e) => edge_weights[e] += w,
            None => {
                index.insert(coarse.clone(), edge_pins.len());
                edge_weights.push(w);
                edge_pins.push(coarse);
            }
        }
    }
    let mut offsets = Vec::with_capacity(edge_pins.len() + 1);
    offsets.push(0);
    let mut flat = Vec::new();
    for pins in edge_pins {
        flat.extend(pins);
        offsets.push(flat.len());
    }
    CoarseLevel {
        hypergraph: Hypergraph::from_csr(weights, edge_weights, offsets, flat),
        map_to_coarse: map,
    }
}

/// Whether coarsening should stop before another round, given the vertex
/// counts so far (original first) and the number of completed rounds.
pub fn should_stop(sizes: &[usize], k: usize, last_matching_empty: bool) -> bool {
    let rounds = sizes.len() - 1;
    let current = *sizes.last().expect("at least the original size");
    if current <= COARSEST_VERTICES_PER_BLOCK * k || last_matching_empty || rounds >= MAX_ROUNDS {
        return true;
    }
    rounds > 0 && current as f64 > STALL_RATIO * sizes[rounds - 1] as f64
}

/// Builds the hierarchy. Pairs are capped by the first block's upper bound
/// computed on the original instance.
pub fn coarsen(h: &Hypergraph, spec: &BalanceSpec) -> Hierarchy {
    let cap = spec.cap(0);
    let mut levels: Vec<CoarseLevel> = Vec::new();
    let mut sizes = vec![h.num_vertices()];
    let mut empty = false;
    while !should_stop(&sizes, spec.k, empty) {
        let current = levels.last().map_or(h, |l| &l.hypergraph);
        let matching = build_matching(current, cap);
        if matching.is_empty() {
            empty = true;
            continue;
        }
        let level = contract(current, &matching);
        sizes.push(level.hypergraph.num_vertices());
        levels.push(level);
    }
    Hierarchy { levels }
}

/// Maps a partition of `level.hypergraph` onto the finer hypergraph `fine`.
pub fn project_partition(fine: &Hypergraph, level: &CoarseLevel, coarse: &Partition) -> Partition {
    let assignment = level
        .map_to_coarse
        .iter()
        .map(|&c| coarse.block_of(c))
        .collect();
    Partition::new(fine, coarse.k(), assignment).expect("projection preserves validity")
}

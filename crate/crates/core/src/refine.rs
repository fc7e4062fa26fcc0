//! Partition improvement: MST bipartitioning of block pairs on a refined
//! embedding, greedy feasibility repair, and k-way FM.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::hypergraph::{is_feasible, BalanceSpec, Hypergraph, Partition, Weight};
use crate::initial::{pruning_order, prim_mst_bridged, select_representatives, SpanningTree};
use crate::operators::{clique_expand, laplacian, CliqueGraph, CsrMatrix, ObjectiveOperator};
use crate::optimizer::{features_from_assignment, modapg_solve, ApgParams, FeatureMatrix};

/// Blocks paired for joint re-optimization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPlan {
    pub pairs: Vec<(usize, usize)>,
    pub leftover: Option<usize>,
}

/// Sum of hyperedge weights over edges touching both blocks, per block pair.
pub fn block_strengths(h: &Hypergraph, p: &Partition) -> Vec<Vec<Weight>> {
    let k = p.k();
    let mut s = vec![vec![0; k]; k];
    let mut present = Vec::with_capacity(k);
    for e in 0..h.num_edges() {
        if p.connectivity(e) < 2 {
            continue;
        }
        present.clear();
        present.extend((0..k).filter(|&b| p.pin_count(e, b) > 0));
        let w = h.edge_weight(e);
        for (x, &i) in present.iter().enumerate() {
            for &j in &present[x + 1..] {
                s[i][j] += w;
                s[j][i] += w;
            }
        }
    }
    s
}

/// Greedily pairs the two unpaired blocks of highest mutual strength (ties
/// to the lexicographically smallest pair) until `k / 2` pairs exist.
pub fn pair_blocks(h: &Hypergraph, p: &Partition) -> PairPlan {
    let k = p.k();
    let s = block_strengths(h, p);
    let mut free = vec![true; k];
    let mut pairs = Vec::with_capacity(k / 2);
    for _ in 0..k / 2 {
        let mut best: Option<(Weight, usize, usize)> = None;
        for i in 0..k {
            for j in i + 1..k {
                if free[i] && free[j] && best.is_none_or(|(bs, _, _)| s[i][j] > bs) {
                    best = Some((s[i][j], i, j));
                }
            }
        }
        let (_, i, j) = best.expect("two free blocks remain");
        free[i] = false;
        free[j] = false;
        pairs.push((i, j));
    }
    PairPlan {
        pairs,
        leftover: free.iter().position(|&f| f),
    }
}

/// Two-way split of a vertex subset.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartitionResult {
    /// `+1` or `-1` per vertex.
    pub labels: Vec<i8>,
    /// `y^T L y / 4`, the clique-graph weight crossing the split.
    pub objective: f64,
    pub feasible: bool,
}

impl BipartitionResult {
    pub fn side_weights(&self, weights: &[Weight]) -> (Weight, Weight) {
        let mut w = (0, 0);
        for (&y, &b) in self.labels.iter().zip(weights) {
            if y > 0 {
                w.0 += b;
            } else {
                w.1 += b;
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartitionParams {
    /// Fraction of vertices (heaviest first) spanned by the tree.
    pub key_fraction: f64,
    /// Fraction of tree edges tried as cut edges.
    pub cut_fraction: f64,
}

impl Default for BipartitionParams {
    fn default() -> Self {
        Self {
            key_fraction: 0.05,
            cut_fraction: 0.2,
        }
    }
}

/// `y^T L y / 4`.
pub fn split_objective(laplacian: &CsrMatrix, labels: &[i8]) -> f64 {
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    laplacian.quad_form(&y) / 4.0
}

fn key_tree(x: &FeatureMatrix, weights: &[Weight], params: &BipartitionParams) -> SpanningTree {
    let mut key = select_representatives(weights, params.key_fraction);
    if key.len() < 2 {
        key = (0..weights.len()).collect();
    }
    prim_mst_bridged(x, &key, f64::NEG_INFINITY)
}

/// Labels every vertex by the nearer of the two centers induced by cutting
/// `edge` out of `tree`. `+1` marks the side holding the tree root; ties go
/// to `+1`.
fn labels_for_cut(x: &FeatureMatrix, tree: &SpanningTree, edge: usize) -> Vec<i8> {
    let m = tree.vertices.len();
    let mut uf = UnionFind::<usize>::new(m);
    for (i, e) in tree.edges.iter().enumerate() {
        if i != edge {
            uf.union(e.u, e.v);
        }
    }
    let root = uf.find(0);
    let dim = x.ncols();
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 2];
    for local in 0..m {
        let side = usize::from(uf.find(local) != root);
        counts[side] += 1;
        for (s, &f) in sums[side].iter_mut().zip(x.row(tree.vertices[local])) {
            *s += f;
        }
    }
    let centers: Vec<Vec<f64>> = (0..2)
        .map(|s| sums[s].iter().map(|v| v / counts[s] as f64).collect())
        .collect();
    (0..x.nrows())
        .map(|v| {
            let row = x.row(v);
            let d = |c: &[f64]| row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            if d(&centers[0]) <= d(&centers[1]) {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Every candidate split considered by [`mst_bipartition`], in the order
/// the cut edges are tried.
pub fn bipartition_candidates(
    x: &FeatureMatrix,
    weights: &[Weight],
    caps: (Weight, Weight),
    laplacian: &CsrMatrix,
    params: &BipartitionParams,
) -> Vec<BipartitionResult> {
    let tree = key_tree(x, weights, params);
    let edges = tree.edges.len();
    if edges == 0 {
        let labels = vec![1; x.nrows()];
        return vec![evaluate_split(labels, weights, caps, laplacian)];
    }
    let m = ((params.cut_fraction * edges as f64).ceil() as usize).clamp(1, edges);
    pruning_order(&tree)
        .into_iter()
        .take(m)
        .map(|e| evaluate_split(labels_for_cut(x, &tree, e), weights, caps, laplacian))
        .collect()
}

fn evaluate_split(labels: Vec<i8>, weights: &[Weight], caps: (Weight, Weight), laplacian: &CsrMatrix) -> BipartitionResult {
    let mut r = BipartitionResult {
        objective: split_objective(laplacian, &labels),
        labels,
        feasible: false,
    };
    let (plus, minus) = r.side_weights(weights);
    r.feasible = plus <= caps.0 && minus <= caps.1;
    r
}

/// Best split over the candidate cuts of a key-node spanning tree: the
/// feasible one of least objective, or if none is feasible the one of least
/// overload (then objective), flagged infeasible.
pub fn mst_bipartition(
    x: &FeatureMatrix,
    weights: &[Weight],
    caps: (Weight, Weight),
    laplacian: &CsrMatrix,
    params: &BipartitionParams,
) -> BipartitionResult {
    let overload = |r: &BipartitionResult| {
        let (a, b) = r.side_weights(weights);
        a.saturating_sub(caps.0) + b.saturating_sub(caps.1)
    };
    let mut best: Option<BipartitionResult> = None;
    for cand in bipartition_candidates(x, weights, caps, laplacian, params) {
        let better = match &best {
            None => true,
            Some(b) => match (cand.feasible, b.feasible) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => cand.objective < b.objective,
                (false, false) => (overload(&cand), cand.objective) < (overload(b), b.objective),
            },
        };
        if better {
            best = Some(cand);
        }
    }
    best.expect("at least one candidate")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseParams {
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub apg: ApgParams,
    pub bipartition: BipartitionParams,
    pub max_rounds: usize,
    /// Perturbation mixed into the assignment-derived starting features.
    pub start_noise: f64,
}

impl Default for PairwiseParams {
    fn default() -> Self {
        Self {
            xi1: vec![0.5, 0.15],
            xi2: vec![1.0, 0.8, 0.2],
            apg: ApgParams::default(),
            bipartition: BipartitionParams::default(),
            max_rounds: 16,
            start_noise: 0.5,
        }
    }
}

/// Re-splits the union of blocks `a` and `b`. Returns the vertices and new
/// labels (`+1` for `a`) when some feasible split lowers the clique cut.
fn improve_pair(
    h: &Hypergraph,
    graph: &CliqueGraph,
    p: &Partition,
    spec: &BalanceSpec,
    (a, b): (usize, usize),
    params: &PairwiseParams,
) -> Option<(Vec<usize>, Vec<i8>)> {
    let vertices: Vec<usize> = (0..p.num_vertices())
        .filter(|&v| p.block_of(v) == a || p.block_of(v) == b)
        .collect();
    if vertices.len() < 2 {
        return None;
    }
    let sub = graph.induced(&vertices);
    let lap = laplacian(&sub);
    let weights: Vec<Weight> = vertices.iter().map(|&v| h.vertex_weight(v)).collect();
    let groups: Vec<usize> = vertices.iter().map(|&v| usize::from(p.block_of(v) != a)).collect();
    let current: Vec<i8> = groups.iter().map(|&g| if g == 0 { 1 } else { -1 }).collect();
    let mut best_obj = split_objective(&lap, &current);
    let caps = (spec.cap(a), spec.cap(b));
    let mut best = None;
    let grid = params.xi1.iter().flat_map(|&x1| params.xi2.iter().map(move |&x2| (x1, x2)));
    for (i, (xi1, xi2)) in grid.enumerate() {
        let op = ObjectiveOperator::refinement(sub.clone(), &weights, groups.clone(), xi1, xi2);
        let x0 = features_from_assignment(&groups, 2, i as u64, params.start_noise);
        let Ok((x, _)) = modapg_solve(&op, x0, &params.apg) else {
            continue;
        };
        let split = mst_bipartition(&x, &weights, caps, &lap, &params.bipartition);
        if split.feasible && split.objective < best_obj {
            best_obj = split.objective;
            best = Some(split.labels);
        }
    }
    best.map(|labels| (vertices, labels))
}

/// Rounds of pairwise re-optimization. A pair's new split is accepted when
/// it is feasible for the pair, lowers the pair's clique cut, and does not
/// raise the hypergraph cutsize; rounds repeat while the cutsize drops.
pub fn pairwise_improve(h: &Hypergraph, p: Partition, spec: &BalanceSpec, params: &PairwiseParams) -> Partition {
    if p.k() < 2 {
        return p;
    }
    let graph = clique_expand(h);
    pairwise_improve_with(h, &graph, p, spec, params)
}

pub(crate) fn pairwise_improve_with(
    h: &Hypergraph,
    graph: &CliqueGraph,
    mut p: Partition,
    spec: &BalanceSpec,
    params: &PairwiseParams,
) -> Partition {
    for _ in 0..params.max_rounds {
        let start = p.cutsize();
        let plan = pair_blocks(h, &p);
        let proposals: Vec<_> = plan
            .pairs
            .par_iter()
            .map(|&pair| (pair, improve_pair(h, graph, &p, spec, pair, params)))
            .collect();
        for ((a, b), proposal) in proposals {
            let Some((vertices, labels)) = proposal else {
                continue;
            };
            let before = p.cutsize();
            let mut moved = Vec::new();
            for (&v, &y) in vertices.iter().zip(&labels) {
                let to = if y > 0 { a } else { b };
                let from = p.block_of(v);
                if from != to {
                    p.move_vertex(h, v, to);
                    moved.push((v, from));
                }
            }
            if p.cutsize() > before {
                for (v, from) in moved.into_iter().rev() {
                    p.move_vertex(h, v, from);
                }
            }
        }
        if p.cutsize() >= start {
            break;
        }
    }
    p
}

/// Greedy move-and-swap repair. Returns the partition and whether it ended
/// feasible.
pub fn repair_feasibility(h: &Hypergraph, mut p: Partition, spec: &BalanceSpec) -> (Partition, bool) {
    const SWAP_CANDIDATES: usize = 32;
    let k = p.k();
    let budget = 2 * h.num_vertices();
    for _ in 0..budget {
        let excess = |b: usize, p: &Partition| p.block_weight(b).saturating_sub(spec.cap(b));
        let Some(src) = (0..k).filter(|&b| excess(b, &p) > 0).max_by_key(|&b| (excess(b, &p), Reverse(b))) else {
            return (p, true);
        };
        let members = p.members(src);

        // Single move: least cutsize increase, then lighter, then lower id.
        let mut best: Option<((i64, Weight, usize, usize), usize, usize)> = None;
        for &v in &members {
            let w = h.vertex_weight(v);
            for to in (0..k).filter(|&b| b != src && p.block_weight(b) + w <= spec.cap(b)) {
                let key = (-p.gain(h, v, to), w, v, to);
                if best.as_ref().is_none_or(|(bk, _, _)| key < *bk) {
                    best = Some((key, v, to));
                }
            }
        }
        if let Some((_, v, to)) = best {
            p.move_vertex(h, v, to);
            continue;
        }

        // Swap a heavy vertex of `src` with a lighter one elsewhere.
        let mut heavy = members;
        heavy.sort_by_key(|&v| (Reverse(h.vertex_weight(v)), v));
        heavy.truncate(SWAP_CANDIDATES);
        let mut best: Option<(i64, usize, usize, usize)> = None;
        for to in (0..k).filter(|&b| b != src) {
            let mut light = p.members(to);
            light.sort_by_key(|&u| (h.vertex_weight(u), u));
            light.truncate(SWAP_CANDIDATES);
            for &v in &heavy {
                for &u in &light {
                    let (wv, wu) = (h.vertex_weight(v), h.vertex_weight(u));
                    if wv <= wu || p.block_weight(to) - wu + wv > spec.cap(to) {
                        continue;
                    }
                    let g1 = p.move_vertex(h, v, to);
                    let g2 = p.gain(h, u, src);
                    p.move_vertex(h, v, src);
                    let cost = -(g1 + g2);
                    if best.is_none_or(|(bc, ..)| cost < bc) {
                        best = Some((cost, v, u, to));
                    }
                }
            }
        }
        match best {
            Some((_, v, u, to)) => {
                p.move_vertex(h, v, to);
                p.move_vertex(h, u, src);
            }
            None => break,
        }
    }
    let ok = is_feasible(&p, spec);
    (p, ok)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FmParams {
    pub max_passes: usize,
    /// A pass stops after this many moves without a new best cutsize.
    pub stall_moves: usize,
    /// Hyperedges larger than this do not trigger neighbour gain updates.
    pub large_edge: usize,
}

impl Default for FmParams {
    fn default() -> Self {
        Self {
            max_passes: 16,
            stall_moves: 200,
            large_edge: 1000,
        }
    }
}

/// Best balance-preserving move of `v` as `(gain, target)`.
fn best_move(h: &Hypergraph, p: &Partition, spec: &BalanceSpec, v: usize, present: &mut [i64]) -> Option<(i64, usize)> {
    let from = p.block_of(v);
    let k = p.k();
    present.iter_mut().for_each(|x| *x = 0);
    let mut leave = 0i64;
    let mut total = 0i64;
    for &e in h.incident(v) {
        let w = h.edge_weight(e) as i64;
        total += w;
        if p.pin_count(e, from) == 1 {
            leave += w;
        }
        for (b, slot) in present.iter_mut().enumerate() {
            if p.pin_count(e, b) > 0 {
                *slot += w;
            }
        }
    }
    let wv = h.vertex_weight(v);
    let mut best: Option<(i64, usize)> = None;
    for to in 0..k {
        if to == from || present[to] == 0 || p.block_weight(to) + wv > spec.cap(to) {
            continue;
        }
        let gain = leave - total + present[to];
        if best.is_none_or(|(bg, _)| gain > bg) {
            best = Some((gain, to));
        }
    }
    best
}

/// Pass-based k-way FM. Moves never push a block over its cap; each pass
/// is rolled back to its best prefix, so the cutsize never increases.
pub fn kway_fm(h: &Hypergraph, mut p: Partition, spec: &BalanceSpec, params: &FmParams) -> Partition {
    let n = h.num_vertices();
    let k = p.k();
    if k < 2 || n == 0 {
        return p;
    }
    let mut present = vec![0i64; k];
    let mut locked = vec![false; n];
    for _ in 0..params.max_passes {
        let start = p.cutsize();
        locked.iter_mut().for_each(|l| *l = false);
        let mut heap = BinaryHeap::new();
        for v in 0..n {
            if h.incident(v).iter().any(|&e| p.connectivity(e) > 1) {
                if let Some((g, to)) = best_move(h, &p, spec, v, &mut present) {
                    heap.push((g, Reverse(v), Reverse(to)));
                }
            }
        }
        let mut log: Vec<(usize, usize)> = Vec::new();
        let mut best_cut = start;
        let mut best_len = 0;
        while let Some((g, Reverse(v), Reverse(to))) = heap.pop() {
            if locked[v] {
                continue;
            }
            match best_move(h, &p, spec, v, &mut present) {
                Some(cur) if cur == (g, to) => {}
                Some((g2, to2)) => {
                    heap.push((g2, Reverse(v), Reverse(to2)));
                    continue;
                }
                None => continue,
            }
            let from = p.block_of(v);
            p.move_vertex(h, v, to);
            locked[v] = true;
            log.push((v, from));
            if p.cutsize() < best_cut {
                best_cut = p.cutsize();
                best_len = log.len();
            } else if log.len() - best_len >= params.stall_moves {
                break;
            }
            for &e in h.incident(v) {
                if h.edge_size(e) > params.large_edge {
                    continue;
                }
                for &u in h.pins(e) {
                    if !locked[u] {
                        if let Some((gu, tu)) = best_move(h, &p, spec, u, &mut present) {
                            heap.push((gu, Reverse(u), Reverse(tu)));
                        }
                    }
                }
            }
        }
        for &(v, from) in log[best_len..].iter().rev() {
            p.move_vertex(h, v, from);
        }
        if p.cutsize() >= start {
            break;
        }
    }
    p
}

//! Initial partitioning: minimum spanning trees over the embedding,
//! pruning into clusters, and merging clusters into k blocks.
//!
//! Similarity between vertices is the dot product of their unit feature
//! rows; tree edges carry weight `1 - similarity`, half the squared
//! Euclidean distance between the rows.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use ndarray::ArrayView1;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use thiserror::Error;

use crate::hypergraph::{BalanceSpec, Hypergraph, Partition, Weight};
use crate::operators::{clique_expand, ObjectiveOperator};
use crate::optimizer::{initial_features, modapg_solve, ApgParams, FeatureMatrix, OptimizerError};

/// Routing threshold between the full-tree and representative-node methods.
pub const SMALL_INSTANCE_LIMIT: usize = 35_000;
/// Fraction of vertices (heaviest first) used as representatives.
pub const REPRESENTATIVE_FRACTION: f64 = 0.2;
/// Similarity filter of the representative tree.
pub const REPRESENTATIVE_TAU: f64 = 0.2;

/// Added to the key of edges at or below the similarity threshold so that
/// they only join components the thresholded graph leaves apart.
const BRIDGE_PENALTY: f64 = 4.0;

#[derive(Debug, Error, PartialEq)]
pub enum InitialError {
    #[error("thresholded similarity graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("cluster count {p} out of range [{min}, {max}]")]
    ClusterCount { p: usize, min: usize, max: usize },
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeEdge {
    /// Local positions into [`SpanningTree::vertices`].
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    /// Global vertex ids covered by the tree.
    pub vertices: Vec<usize>,
    pub edges: Vec<TreeEdge>,
    /// Parent position of each local vertex; `None` for the root.
    pub parent: Vec<Option<usize>>,
}

impl SpanningTree {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

fn similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

/// Edges `(i, j, 1 - s_ij)` with `i < j` for every pair with `s_ij > tau`.
pub fn build_similarity_graph(x: &FeatureMatrix, tau: f64) -> Vec<(usize, usize, f64)> {
    let n = x.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let s = similarity(x.row(i), x.row(j));
            if s > tau {
                edges.push((i, j, 1.0 - s));
            }
        }
    }
    edges
}

/// Dense Prim over `vertices`, starting from the first one. Candidate edges
/// must have similarity above `tau`.
pub fn prim_mst(x: &FeatureMatrix, vertices: &[usize], tau: f64) -> Result<SpanningTree, InitialError> {
    let (tree, components) = prim(x, vertices, tau, false);
    if components > 1 {
        Err(InitialError::Disconnected { components })
    } else {
        Ok(tree)
    }
}

/// Like [`prim_mst`], but when the thresholded graph is disconnected its
/// components are joined through their lightest unthresholded edges. The
/// result is a minimum spanning forest of the thresholded graph plus a
/// minimum spanning tree over the components.
pub fn prim_mst_bridged(x: &FeatureMatrix, vertices: &[usize], tau: f64) -> SpanningTree {
    prim(x, vertices, tau, true).0
}

fn prim(x: &FeatureMatrix, vertices: &[usize], tau: f64, bridge: bool) -> (SpanningTree, usize) {
    let m = vertices.len();
    let mut key = vec![f64::INFINITY; m];
    let mut real = vec![0.0; m];
    let mut parent: Vec<Option<usize>> = vec![None; m];
    let mut visited = vec![false; m];
    let mut edges = Vec::with_capacity(m.saturating_sub(1));
    let mut components = 0;
    for _ in 0..m {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for v in 0..m {
            if !visited[v] && (u == usize::MAX || key[v] < best) {
                u = v;
                best = key[v];
            }
        }
        if best == f64::INFINITY {
            components += 1;
            parent[u] = None;
        }
        visited[u] = true;
        if let Some(pu) = parent[u] {
            edges.push(TreeEdge {
                u: pu,
                v: u,
                weight: real[u],
            });
        }
        let xu = x.row(vertices[u]);
        for v in 0..m {
            if visited[v] {
                continue;
            }
            let s = similarity(xu, x.row(vertices[v]));
            let w = 1.0 - s;
            let k = if s > tau {
                w
            } else if bridge {
                w + BRIDGE_PENALTY
            } else {
                continue;
            };
            if k < key[v] {
                key[v] = k;
                real[v] = w;
                parent[v] = Some(u);
            }
        }
    }
    (
        SpanningTree {
            vertices: vertices.to_vec(),
            edges,
            parent,
        },
        components,
    )
}

/// Heap-based Prim over an explicit weighted edge list. Returns `None` when
/// the graph is disconnected.
pub fn prim_on_edges(n: usize, edges: &[(usize, usize, f64)]) -> Option<Vec<(usize, usize, f64)>> {
    #[derive(PartialEq)]
    struct Item(f64, usize, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.2.cmp(&self.2))
        }
    }
    if n == 0 {
        return Some(Vec::new());
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    let mut in_tree = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut tree = Vec::with_capacity(n - 1);
    in_tree[0] = true;
    for &(v, w) in &adj[0] {
        heap.push(Item(w, 0, v));
    }
    while let Some(Item(w, from, to)) = heap.pop() {
        if in_tree[to] {
            continue;
        }
        in_tree[to] = true;
        tree.push((from, to, w));
        for &(next, w2) in &adj[to] {
            if !in_tree[next] {
                heap.push(Item(w2, to, next));
            }
        }
    }
    (tree.len() + 1 == n).then_some(tree)
}

/// Clusters with their total weights and mean feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    /// Global vertex ids per cluster, ascending.
    pub clusters: Vec<Vec<usize>>,
    pub weights: Vec<Weight>,
    pub centroids: Vec<Vec<f64>>,
}

impl ClusterSet {
    pub fn from_clusters(clusters: Vec<Vec<usize>>, vertex_weights: &[Weight], x: &FeatureMatrix) -> Self {
        let weights = clusters
            .iter()
            .map(|c| c.iter().map(|&v| vertex_weights[v]).sum())
            .collect();
        let centroids = clusters
            .iter()
            .map(|c| {
                let mut mean = vec![0.0; x.ncols()];
                for &v in c {
                    for (m, &f) in mean.iter_mut().zip(x.row(v)) {
                        *m += f;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= c.len() as f64);
                mean
            })
            .collect();
        Self {
            clusters,
            weights,
            centroids,
        }
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Tree edges in pruning order: heaviest first, ties by endpoint ids.
pub fn pruning_order(tree: &SpanningTree) -> Vec<usize> {
    let key = |e: &TreeEdge| {
        let (a, b) = (tree.vertices[e.u], tree.vertices[e.v]);
        (a.min(b), a.max(b))
    };
    let mut order: Vec<usize> = (0..tree.edges.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&tree.edges[i], &tree.edges[j]);
        b.weight.total_cmp(&a.weight).then(key(a).cmp(&key(b)))
    });
    order
}

/// Removes the `p - 1` heaviest tree edges and returns the `p` components,
/// ordered by their first vertex in tree order.
pub fn prune_clusters(
    tree: &SpanningTree,
    p: usize,
    vertex_weights: &[Weight],
    x: &FeatureMatrix,
) -> Result<ClusterSet, InitialError> {
    let m = tree.vertices.len();
    if p == 0 || p > m {
        return Err(InitialError::ClusterCount { p, min: 1, max: m });
    }
    let order = pruning_order(tree);
    let mut uf = UnionFind::<usize>::new(m);
    for &i in &order[p - 1..] {
        uf.union(tree.edges[i].u, tree.edges[i].v);
    }
    let mut label = vec![usize::MAX; m];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for local in 0..m {
        let root = uf.find(local);
        if label[root] == usize::MAX {
            label[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[label[root]].push(tree.vertices[local]);
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    Ok(ClusterSet::from_clusters(clusters, vertex_weights, x))
}

/// Running block state while clusters and vertices are merged in.
struct Blocks {
    weights: Vec<Weight>,
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl Blocks {
    fn new(k: usize, dim: usize) -> Self {
        Self {
            weights: vec![0; k],
            sums: vec![vec![0.0; dim]; k],
            counts: vec![0; k],
        }
    }

    fn add(&mut self, b: usize, weight: Weight, sum: &[f64], count: usize) {
        self.weights[b] += weight;
        self.counts[b] += count;
        for (s, &v) in self.sums[b].iter_mut().zip(sum) {
            *s += v;
        }
    }

    fn distance_sq(&self, b: usize, point: &[f64]) -> f64 {
        let c = self.counts[b].max(1) as f64;
        self.sums[b]
            .iter()
            .zip(point)
            .map(|(s, p)| (s / c - p) * (s / c - p))
            .sum()
    }

    fn nearest(&self, point: &[f64], admissible: impl Fn(usize) -> bool) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for b in 0..self.weights.len() {
            if !admissible(b) {
                continue;
            }
            let d = self.distance_sq(b, point);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, b));
            }
        }
        best.map(|(_, b)| b)
    }

    fn least_loaded(&self) -> usize {
        (0..self.weights.len())
            .min_by_key(|&b| (self.weights[b], b))
            .expect("k >= 1")
    }
}

/// Clusters ordered by weight, heaviest first, ties by index.
fn by_weight(set: &ClusterSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by_key(|&c| (Reverse(set.weights[c]), c));
    order
}

fn seed_blocks(set: &ClusterSet, k: usize) -> (Vec<usize>, Blocks, Vec<usize>) {
    let order = by_weight(set);
    let dim = set.centroids.first().map_or(0, Vec::len);
    let mut blocks = Blocks::new(k, dim);
    let mut block_of = vec![usize::MAX; set.len()];
    for (b, &c) in order.iter().take(k).enumerate() {
        let sum: Vec<f64> = set.centroids[c]
            .iter()
            .map(|m| m * set.clusters[c].len() as f64)
            .collect();
        blocks.add(b, set.weights[c], &sum, set.clusters[c].len());
        block_of[c] = b;
    }
    let rest = order.into_iter().skip(k).collect();
    (block_of, blocks, rest)
}

fn add_cluster(blocks: &mut Blocks, set: &ClusterSet, c: usize, b: usize) {
    let size = set.clusters[c].len();
    let sum: Vec<f64> = set.centroids[c].iter().map(|m| m * size as f64).collect();
    blocks.add(b, set.weights[c], &sum, size);
}

/// Merges clusters into `k` blocks. The `k` heaviest clusters seed the
/// blocks; every other cluster (heaviest first) joins the block with the
/// nearest centroid when that keeps it within its cap, otherwise the least
/// loaded block. Returns the block of each cluster.
pub fn merge_clusters(set: &ClusterSet, k: usize, caps: &[Weight]) -> Vec<usize> {
    let (mut block_of, mut blocks, rest) = seed_blocks(set, k);
    for c in rest {
        let nearest = blocks
            .nearest(&set.centroids[c], |_| true)
            .expect("k >= 1");
        let b = if blocks.weights[nearest] + set.weights[c] <= caps[nearest] {
            nearest
        } else {
            blocks.least_loaded()
        };
        add_cluster(&mut blocks, set, c, b);
        block_of[c] = b;
    }
    block_of
}

fn trivial_partition(h: &Hypergraph, k: usize) -> Partition {
    let assignment = (0..h.num_vertices()).map(|v| v % k).collect();
    Partition::new(h, k, assignment).expect("ids below k")
}

/// Full-tree method for small instances: Prim over all vertices, prune into
/// `p` clusters, merge into `k` blocks. The result may violate the caps.
pub fn mst_partition_small(
    x: &FeatureMatrix,
    h: &Hypergraph,
    spec: &BalanceSpec,
    p: usize,
    tau: f64,
) -> Result<Partition, InitialError> {
    let n = h.num_vertices();
    let k = spec.k;
    if n <= k {
        return Ok(trivial_partition(h, k));
    }
    if p < k || p > n {
        return Err(InitialError::ClusterCount { p, min: k, max: n });
    }
    let all: Vec<usize> = (0..n).collect();
    let tree = prim_mst_bridged(x, &all, tau);
    let set = prune_clusters(&tree, p, h.vertex_weights(), x)?;
    let block_of = merge_clusters(&set, k, &spec.upper_bounds);
    let mut assignment = vec![0; n];
    for (c, members) in set.clusters.iter().enumerate() {
        for &v in members {
            assignment[v] = block_of[c];
        }
    }
    Ok(Partition::new(h, k, assignment).expect("block ids below k"))
}

/// The `ceil(fraction * n)` heaviest vertices, ties by lower index.
pub fn select_representatives(weights: &[Weight], fraction: f64) -> Vec<usize> {
    let count = ((fraction * weights.len() as f64).ceil() as usize).min(weights.len());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&v| (Reverse(weights[v]), v));
    order.truncate(count);
    order
}

/// Places `vertices` one at a time into the block with the nearest running
/// centroid among those that stay within `caps`, or the least loaded block
/// when none does. Centroids and weights are updated after every vertex.
fn assign_vertices(
    x: &FeatureMatrix,
    weights: &[Weight],
    vertices: impl IntoIterator<Item = usize>,
    caps: &[Weight],
    blocks: &mut Blocks,
    assignment: &mut [usize],
) {
    for v in vertices {
        let row: Vec<f64> = x.row(v).to_vec();
        let w = weights[v];
        let b = blocks
            .nearest(&row, |b| blocks.weights[b] + w <= caps[b])
            .unwrap_or_else(|| blocks.least_loaded());
        blocks.add(b, w, &row, 1);
        assignment[v] = b;
    }
}

/// Representative-node method for large instances: a tree over the heaviest
/// fifth of the vertices is pruned and merged under an averaged cap, then
/// every other vertex joins its nearest admissible block.
pub fn representative_partition_large(
    x: &FeatureMatrix,
    h: &Hypergraph,
    spec: &BalanceSpec,
    p: usize,
) -> Result<Partition, InitialError> {
    let n = h.num_vertices();
    let k = spec.k;
    if n <= k {
        return Ok(trivial_partition(h, k));
    }
    let weights = h.vertex_weights();
    let mut reps = select_representatives(weights, REPRESENTATIVE_FRACTION);
    if reps.len() < k {
        reps = select_representatives(weights, k as f64 / n as f64);
    }
    let p = p.clamp(k, reps.len());
    let tree = prim_mst_bridged(x, &reps, REPRESENTATIVE_TAU);
    let set = prune_clusters(&tree, p, weights, x)?;

    let total: Weight = set.weights.iter().sum();
    let adjusted_cap = (1.0 + spec.epsilon) * total as f64 / k as f64;
    let (mut block_of, mut blocks, rest) = seed_blocks(&set, k);
    for c in rest {
        let cw = set.weights[c];
        let b = blocks
            .nearest(&set.centroids[c], |b| (blocks.weights[b] + cw) as f64 <= adjusted_cap)
            .unwrap_or_else(|| blocks.least_loaded());
        add_cluster(&mut blocks, &set, c, b);
        block_of[c] = b;
    }

    let mut assignment = vec![usize::MAX; n];
    for (c, members) in set.clusters.iter().enumerate() {
        for &v in members {
            assignment[v] = block_of[c];
        }
    }
    let remaining: Vec<usize> = (0..n).filter(|&v| assignment[v] == usize::MAX).collect();
    assign_vertices(x, weights, remaining, &spec.upper_bounds, &mut blocks, &mut assignment);
    Ok(Partition::new(h, k, assignment).expect("every vertex assigned"))
}

/// Rule for the pruning cluster count `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterRule {
    /// `ceil(sqrt(n / 2))`.
    SqrtHalf,
    /// `ceil(n / (5 k))`.
    FifthPerBlock,
    Fixed(usize),
}

impl ClusterRule {
    pub fn raw(self, n: usize, k: usize) -> usize {
        match self {
            ClusterRule::SqrtHalf => (n as f64 / 2.0).sqrt().ceil() as usize,
            ClusterRule::FifthPerBlock => (n as f64 / (5 * k) as f64).ceil() as usize,
            ClusterRule::Fixed(p) => p,
        }
    }

    /// Cluster count clamped to `(k, n]` where possible.
    pub fn count(self, n: usize, k: usize) -> usize {
        self.raw(n, k).max(k + 1).min(n)
    }

    pub fn label(self) -> String {
        match self {
            ClusterRule::SqrtHalf => "sqrt(n/2)".into(),
            ClusterRule::FifthPerBlock => "n/(5k)".into(),
            ClusterRule::Fixed(p) => p.to_string(),
        }
    }
}

/// Settings for candidate generation.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateConfig {
    pub num_init: usize,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub cluster_rules: Vec<ClusterRule>,
    pub tau: f64,
    pub small_limit: usize,
    pub apg: ApgParams,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self {
            num_init: 10,
            lambda1: vec![0.9, 0.5, 0.15, 0.015],
            lambda2: vec![1.0, 0.9, 0.8],
            cluster_rules: vec![ClusterRule::SqrtHalf, ClusterRule::FifthPerBlock],
            tau: 0.2,
            small_limit: SMALL_INSTANCE_LIMIT,
            apg: ApgParams::default(),
        }
    }
}

impl CandidateConfig {
    /// `(lambda1, lambda2)` per candidate: lambda1-major grid, cycled.
    pub fn weight_pairs(&self) -> Vec<(f64, f64)> {
        let grid: Vec<(f64, f64)> = self
            .lambda1
            .iter()
            .flat_map(|&a| self.lambda2.iter().map(move |&b| (a, b)))
            .collect();
        if grid.is_empty() {
            return Vec::new();
        }
        (0..self.num_init).map(|i| grid[i % grid.len()]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub partition: Partition,
    pub lambda1: f64,
    pub lambda2: f64,
    pub clusters: usize,
    pub rule: ClusterRule,
    pub solver_iterations: usize,
    pub solver_converged: bool,
}

/// Splits `h` with the routed method using `p` clusters.
pub fn partition_from_features(
    x: &FeatureMatrix,
    h: &Hypergraph,
    spec: &BalanceSpec,
    p: usize,
    tau: f64,
    small_limit: usize,
) -> Result<Partition, InitialError> {
    if h.num_vertices() <= small_limit {
        mst_partition_small(x, h, spec, p, tau)
    } else {
        representative_partition_large(x, h, spec, p)
    }
}

/// One embedding per `(lambda1, lambda2)` pair, each cut with every cluster
/// rule; per candidate the feasible, then lower-cutsize, result is kept.
pub fn generate_candidates(
    h: &Hypergraph,
    spec: &BalanceSpec,
    config: &CandidateConfig,
) -> Result<Vec<Candidate>, InitialError> {
    let n = h.num_vertices();
    let k = spec.k;
    let graph = clique_expand(h);
    config
        .weight_pairs()
        .into_par_iter()
        .enumerate()
        .map(|(i, (lambda1, lambda2))| {
            let op = ObjectiveOperator::initial(graph.clone(), h.vertex_weights(), lambda1, lambda2);
            let (x, trace) = modapg_solve(&op, initial_features(n, k, i as u64), &config.apg)?;
            let mut best: Option<(bool, Weight, Partition, usize, ClusterRule)> = None;
            let mut tried = Vec::new();
            for &rule in &config.cluster_rules {
                let p = rule.count(n, k);
                if tried.contains(&p) {
                    continue;
                }
                tried.push(p);
                let part = partition_from_features(&x, h, spec, p, config.tau, config.small_limit)?;
                let feasible = crate::hypergraph::is_feasible(&part, spec);
                let better = best.as_ref().is_none_or(|(bf, bc, ..)| {
                    (!feasible, part.cutsize()) < (!*bf, *bc)
                });
                if better {
                    best = Some((feasible, part.cutsize(), part, p, rule));
                }
            }
            let (_, _, partition, clusters, rule) = match best {
                Some(b) => b,
                None => {
                    let part = trivial_partition(h, k);
                    (false, part.cutsize(), part, n, ClusterRule::Fixed(n))
                }
            };
            Ok(Candidate {
                partition,
                lambda1,
                lambda2,
                clusters,
                rule,
                solver_iterations: trace.iterations(),
                solver_converged: trace.converged,
            })
        })
        .collect()
}

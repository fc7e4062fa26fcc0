//! Clique expansion, Laplacians and the matrix-free quadratic objectives
//! used to embed vertices on the row-sphere.
//!
//! An [`ObjectiveOperator`] represents a symmetric matrix `C` built as a
//! weighted sum of structural terms. The objective is `F(X) = -<C, X X^T>`
//! with gradient `-2 C X`. Complete-graph Laplacians are never stored; their
//! products cost `O(n k)`.

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::hypergraph::{Hypergraph, Weight};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("operator has {expected} rows, matrix has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Square sparse matrix in compressed-row form with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets; duplicate entries are summed in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut offsets = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            offsets: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `x^T M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[[i, j]] += v;
            }
        }
        d
    }

    /// Principal submatrix on `vertices` (new index = position in the slice).
    pub fn submatrix(&self, vertices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (pos, &v) in vertices.iter().enumerate() {
            local[v] = pos;
        }
        let mut triplets = Vec::new();
        for (pos, &v) in vertices.iter().enumerate() {
            for (j, val) in self.row(v) {
                if local[j] != usize::MAX {
                    triplets.push((pos, local[j], val));
                }
            }
        }
        Self::from_triplets(vertices.len(), triplets)
    }
}

/// Weighted clique expansion: `a_ij = sum_{e containing i, j} w_e / (|e| - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueGraph {
    pub adjacency: CsrMatrix,
    pub degree: Vec<f64>,
}

impl CliqueGraph {
    pub fn num_vertices(&self) -> usize {
        self.adjacency.dim()
    }

    /// Subgraph induced by `vertices`, degrees recomputed inside it.
    pub fn induced(&self, vertices: &[usize]) -> Self {
        Self::from_adjacency(self.adjacency.submatrix(vertices))
    }

    fn from_adjacency(adjacency: CsrMatrix) -> Self {
        let degree = (0..adjacency.dim())
            .map(|i| adjacency.row(i).map(|(_, v)| v).sum())
            .collect();
        Self { adjacency, degree }
    }
}

pub fn clique_expand(h: &Hypergraph) -> CliqueGraph {
    let mut triplets = Vec::new();
    for (w, pins) in h.edges() {
        if pins.len() < 2 {
            continue;
        }
        let a = w as f64 / (pins.len() - 1) as f64;
        for (x, &i) in pins.iter().enumerate() {
            for &j in &pins[x + 1..] {
                triplets.push((i, j, a));
                triplets.push((j, i, a));
            }
        }
    }
    CliqueGraph::from_adjacency(CsrMatrix::from_triplets(h.num_vertices(), triplets))
}

/// `L = Diag(degree) - A`.
pub fn laplacian(g: &CliqueGraph) -> CsrMatrix {
    let n = g.num_vertices();
    let mut triplets = Vec::with_capacity(g.adjacency.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, g.degree[i]));
        for (j, v) in g.adjacency.row(i) {
            triplets.push((i, j, -v));
        }
    }
    CsrMatrix::from_triplets(n, triplets)
}

/// One structural piece of the combined matrix `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// `A_bar = Diag(degree) + A`.
    ShiftedAdjacency,
    /// Laplacian of the unit-weight complete graph.
    CompleteUnit,
    /// Laplacian of the complete graph with edge weights `B_i B_j`.
    CompleteWeighted,
    /// Laplacian of the unit-weight complete multipartite graph whose parts
    /// are the operator's groups.
    Multipartite,
    /// Identity matrix; diagnostic only.
    Identity,
}

/// Matrix-free symmetric `C = sum_t coef_t * Term_t`.
#[derive(Debug, Clone)]
pub struct ObjectiveOperator {
    graph: CliqueGraph,
    vertex_weights: Vec<f64>,
    total_weight: f64,
    groups: Vec<usize>,
    num_groups: usize,
    terms: Vec<(f64, Term)>,
}

impl ObjectiveOperator {
    /// General constructor. `groups` labels the parts used by
    /// [`Term::Multipartite`] and may be empty when that term is absent.
    pub fn new(
        graph: CliqueGraph,
        vertex_weights: &[Weight],
        groups: Vec<usize>,
        terms: Vec<(f64, Term)>,
    ) -> Self {
        let n = graph.num_vertices();
        assert_eq!(vertex_weights.len(), n, "one weight per vertex");
        let has_parts = terms.iter().any(|&(_, t)| t == Term::Multipartite);
        assert!(!has_parts || groups.len() == n, "multipartite term needs groups");
        let vertex_weights: Vec<f64> = vertex_weights.iter().map(|&w| w as f64).collect();
        let total_weight = vertex_weights.iter().sum();
        let num_groups = groups.iter().max().map_or(0, |&g| g + 1);
        Self {
            graph,
            vertex_weights,
            total_weight,
            groups,
            num_groups,
            terms,
        }
    }

    /// `C1 = l1 A_bar + (1 - l1) (l2 G_u + (1 - l2) G_w)`.
    pub fn initial(graph: CliqueGraph, vertex_weights: &[Weight], lambda1: f64, lambda2: f64) -> Self {
        let rest = 1.0 - lambda1;
        Self::new(
            graph,
            vertex_weights,
            Vec::new(),
            vec![
                (lambda1, Term::ShiftedAdjacency),
                (rest * lambda2, Term::CompleteUnit),
                (rest * (1.0 - lambda2), Term::CompleteWeighted),
            ],
        )
    }

    /// `C2 = x1 A_bar + (1 - x1) (x2 G_w + (1 - x2) K)` where `K` is the
    /// multipartite Laplacian over `groups`.
    pub fn refinement(
        graph: CliqueGraph,
        vertex_weights: &[Weight],
        groups: Vec<usize>,
        xi1: f64,
        xi2: f64,
    ) -> Self {
        let rest = 1.0 - xi1;
        Self::new(
            graph,
            vertex_weights,
            groups,
            vec![
                (xi1, Term::ShiftedAdjacency),
                (rest * xi2, Term::CompleteWeighted),
                (rest * (1.0 - xi2), Term::Multipartite),
            ],
        )
    }

    /// `C = I` on `n` vertices.
    pub fn identity(n: usize) -> Self {
        Self::new(
            CliqueGraph::from_adjacency(CsrMatrix::zeros(n)),
            &vec![1; n],
            Vec::new(),
            vec![(1.0, Term::Identity)],
        )
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn graph(&self) -> &CliqueGraph {
        &self.graph
    }

    pub fn terms(&self) -> &[(f64, Term)] {
        &self.terms
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, OperatorError> {
        if x.nrows() != self.num_vertices() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.num_vertices(),
                got: x.nrows(),
            });
        }
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let (n, k) = x.dim();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; n * k];
        let nf = n as f64;
        let col_sums = || {
            let mut s = vec![0.0; k];
            for row in xs.chunks_exact(k) {
                s.iter_mut().zip(row).for_each(|(a, v)| *a += v);
            }
            s
        };
        for &(coef, term) in &self.terms {
            if coef == 0.0 {
                continue;
            }
            match term {
                Term::ShiftedAdjacency => {
                    let adj = &self.graph.adjacency;
                    if k == 2 {
                        for (i, o) in out.chunks_exact_mut(2).enumerate() {
                            let d = self.graph.degree[i];
                            let (mut a0, mut a1) = (d * xs[2 * i], d * xs[2 * i + 1]);
                            for (j, a) in adj.row(i) {
                                let xj = &xs[2 * j..2 * j + 2];
                                a0 += a * xj[0];
                                a1 += a * xj[1];
                            }
                            o[0] += coef * a0;
                            o[1] += coef * a1;
                        }
                    } else {
                        let mut acc = vec![0.0; k];
                        for (i, o) in out.chunks_exact_mut(k).enumerate() {
                            let d = self.graph.degree[i];
                            acc.iter_mut().zip(&xs[i * k..(i + 1) * k]).for_each(|(a, v)| *a = d * v);
                            for (j, a) in adj.row(i) {
                                acc.iter_mut().zip(&xs[j * k..(j + 1) * k]).for_each(|(s, v)| *s += a * v);
                            }
                            o.iter_mut().zip(&acc).for_each(|(o, a)| *o += coef * a);
                        }
                    }
                }
                Term::CompleteUnit => {
                    let colsum = col_sums();
                    for (o, row) in out.chunks_exact_mut(k).zip(xs.chunks_exact(k)) {
                        for c in 0..k {
                            o[c] += coef * (nf * row[c] - colsum[c]);
                        }
                    }
                }
                Term::CompleteWeighted => {
                    let b = &self.vertex_weights;
                    let s = self.total_weight;
                    let mut btx = vec![0.0; k];
                    for (row, &bi) in xs.chunks_exact(k).zip(b) {
                        btx.iter_mut().zip(row).for_each(|(a, v)| *a += bi * v);
                    }
                    for ((o, row), &bi) in out.chunks_exact_mut(k).zip(xs.chunks_exact(k)).zip(b) {
                        for c in 0..k {
                            o[c] += coef * bi * (s * row[c] - btx[c]);
                        }
                    }
                }
                Term::Multipartite => {
                    let colsum = col_sums();
                    let mut sizes = vec![0.0; self.num_groups];
                    let mut sums = vec![0.0; self.num_groups * k];
                    for (row, &g) in xs.chunks_exact(k).zip(&self.groups) {
                        sizes[g] += 1.0;
                        sums[g * k..(g + 1) * k].iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    for ((o, row), &g) in out.chunks_exact_mut(k).zip(xs.chunks_exact(k)).zip(&self.groups) {
                        for c in 0..k {
                            let full = nf * row[c] - colsum[c];
                            let inner = sizes[g] * row[c] - sums[g * k + c];
                            o[c] += coef * (full - inner);
                        }
                    }
                }
                Term::Identity => {
                    out.iter_mut().zip(xs).for_each(|(o, v)| *o += coef * v);
                }
            }
        }
        Array2::from_shape_vec((n, k), out).expect("n * k entries")
    }

    /// `F(X) = -<C, X X^T> = -<X, C X>`.
    pub fn value(&self, x: ArrayView2<f64>) -> f64 {
        self.value_and_gradient(x).0
    }

    /// `grad F(X) = -2 C X`.
    pub fn gradient(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.value_and_gradient(x).1
    }

    pub fn value_and_gradient(&self, x: ArrayView2<f64>) -> (f64, Array2<f64>) {
        let mut cx = self.apply_unchecked(x);
        let value = -frobenius_dot(x, cx.view());
        cx.mapv_inplace(|v| -2.0 * v);
        (value, cx)
    }
}

pub(crate) fn frobenius_dot(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    // Row-major order keeps the summation sequence fixed.
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `sum_{i<j} a_i a_j`.
pub fn balanced_product(parts: &[u64]) -> u64 {
    let total: u64 = parts.iter().sum();
    let squares: u64 = parts.iter().map(|a| a * a).sum();
    (total * total - squares) / 2
}

/// Enumerates every composition of `total` into `k` nonnegative parts and
/// returns the maximum of [`balanced_product`] with all maximizers.
pub fn max_balanced_product(total: u64, k: usize) -> (u64, Vec<Vec<u64>>) {
    fn rec(left: u64, slots: usize, cur: &mut Vec<u64>, best: &mut (u64, Vec<Vec<u64>>)) {
        if slots == 1 {
            cur.push(left);
            let v = balanced_product(cur);
            if v > best.0 || best.1.is_empty() {
                *best = (v, vec![cur.clone()]);
            } else if v == best.0 {
                best.1.push(cur.clone());
            }
            cur.pop();
            return;
        }
        for a in 0..=left {
            cur.push(a);
            rec(left - a, slots - 1, cur, best);
            cur.pop();
        }
    }
    assert!(k >= 1);
    let mut best = (0, Vec::new());
    rec(total, k, &mut Vec::with_capacity(k), &mut best);
    best
}

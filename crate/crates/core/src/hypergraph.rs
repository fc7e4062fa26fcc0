//! Problem model: weighted hypergraphs, k-way partitions, balance caps,
//! and the hMetis / partition-file formats.

use std::fmt::Write as _;

use thiserror::Error;

/// Vertex and hyperedge weights. Sums are accumulated in the same type.
pub type Weight = u64;

#[derive(Debug, Error, PartialEq)]
pub enum HypergraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("hyperedge {edge}: pin {pin} out of range for {n} vertices")]
    PinOutOfRange { edge: usize, pin: usize, n: usize },
    #[error("hyperedge {0} has no pins")]
    EmptyEdge(usize),
    #[error("{what} {index} has nonpositive weight")]
    NonPositiveWeight { what: &'static str, index: usize },
    #[error("partition has {got} entries, hypergraph has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("vertex {vertex}: block id {block} not in [0, {k})")]
    BlockOutOfRange { vertex: usize, block: usize, k: usize },
    #[error("block count must be at least 1")]
    ZeroBlocks,
    #[error("invalid argument: {0}")]
    Domain(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> HypergraphError {
    HypergraphError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Immutable weighted hypergraph with pins and incidence stored in CSR form.
///
/// Pin lists are sorted and free of duplicates; the incidence lists are the
/// exact transpose of the pin lists and are sorted by hyperedge index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    vertex_weights: Vec<Weight>,
    edge_weights: Vec<Weight>,
    edge_offsets: Vec<usize>,
    pins: Vec<usize>,
    vertex_offsets: Vec<usize>,
    incidence: Vec<usize>,
}

impl Hypergraph {
    /// Builds a hypergraph from vertex weights and `(weight, pins)` hyperedges.
    /// Pins are deduplicated; single-pin hyperedges are kept.
    pub fn new<I>(vertex_weights: Vec<Weight>, edges: I) -> Result<Self, HypergraphError>
    where
        I: IntoIterator<Item = (Weight, Vec<usize>)>,
    {
        let n = vertex_weights.len();
        if let Some(v) = vertex_weights.iter().position(|&w| w == 0) {
            return Err(HypergraphError::NonPositiveWeight {
                what: "vertex",
                index: v,
            });
        }
        let mut edge_weights = Vec::new();
        let mut edge_offsets = vec![0];
        let mut pins = Vec::new();
        for (e, (w, mut list)) in edges.into_iter().enumerate() {
            if w == 0 {
                return Err(HypergraphError::NonPositiveWeight {
                    what: "hyperedge",
                    index: e,
                });
            }
            list.sort_unstable();
            list.dedup();
            if list.is_empty() {
                return Err(HypergraphError::EmptyEdge(e));
            }
            if let Some(&pin) = list.last().filter(|&&p| p >= n) {
                return Err(HypergraphError::PinOutOfRange { edge: e, pin, n });
            }
            edge_weights.push(w);
            pins.extend_from_slice(&list);
            edge_offsets.push(pins.len());
        }
        Ok(Self::from_csr(vertex_weights, edge_weights, edge_offsets, pins))
    }

    /// Assembles a hypergraph from already validated CSR pin data.
    pub(crate) fn from_csr(
        vertex_weights: Vec<Weight>,
        edge_weights: Vec<Weight>,
        edge_offsets: Vec<usize>,
        pins: Vec<usize>,
    ) -> Self {
        let n = vertex_weights.len();
        let mut degree = vec![0usize; n + 1];
        for &p in &pins {
            degree[p + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let vertex_offsets = degree;
        let mut fill = vertex_offsets.clone();
        let mut incidence = vec![0; pins.len()];
        for e in 0..edge_weights.len() {
            for &p in &pins[edge_offsets[e]..edge_offsets[e + 1]] {
                incidence[fill[p]] = e;
                fill[p] += 1;
            }
        }
        Self {
            vertex_weights,
            edge_weights,
            edge_offsets,
            pins,
            vertex_offsets,
            incidence,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_weights.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_weights.len()
    }

    pub fn num_pins(&self) -> usize {
        self.pins.len()
    }

    pub fn vertex_weight(&self, v: usize) -> Weight {
        self.vertex_weights[v]
    }

    pub fn vertex_weights(&self) -> &[Weight] {
        &self.vertex_weights
    }

    pub fn edge_weight(&self, e: usize) -> Weight {
        self.edge_weights[e]
    }

    pub fn edge_weights(&self) -> &[Weight] {
        &self.edge_weights
    }

    /// Sorted pin list of hyperedge `e`.
    pub fn pins(&self, e: usize) -> &[usize] {
        &self.pins[self.edge_offsets[e]..self.edge_offsets[e + 1]]
    }

    pub fn edge_size(&self, e: usize) -> usize {
        self.edge_offsets[e + 1] - self.edge_offsets[e]
    }

    /// Hyperedges incident to `v`, sorted.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incidence[self.vertex_offsets[v]..self.vertex_offsets[v + 1]]
    }

    pub fn total_vertex_weight(&self) -> Weight {
        self.vertex_weights.iter().sum()
    }

    pub fn total_edge_weight(&self) -> Weight {
        self.edge_weights.iter().sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Weight, &[usize])> + '_ {
        (0..self.num_edges()).map(move |e| (self.edge_weights[e], self.pins(e)))
    }
}

/// Parses the hMetis `.hgr` format. Vertex ids in the file are 1-based.
///
/// The header is `m n [fmt]` with `fmt` one of 1 (edge weights), 10
/// (vertex weights) or 11 (both). Lines starting with `%` are comments.
pub fn parse_hmetis(text: &str) -> Result<Hypergraph, HypergraphError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let fields = parse_numbers(hline, header)?;
    let (m, n, fmt) = match fields.as_slice() {
        [m, n] => (*m, *n, 0),
        [m, n, f] => (*m, *n, *f),
        _ => return Err(parse_err(hline, "header must be `m n [fmt]`")),
    };
    let (edge_weighted, vertex_weighted) = match fmt {
        0 => (false, false),
        1 => (true, false),
        10 => (false, true),
        11 => (true, true),
        f => return Err(parse_err(hline, format!("unsupported fmt {f}"))),
    };
    let n = n as usize;
    let m = m as usize;

    let mut edges = Vec::with_capacity(m);
    for e in 0..m {
        let (line, content) = lines
            .next()
            .ok_or_else(|| parse_err(hline, format!("truncated: expected {m} hyperedges, found {e}")))?;
        let nums = parse_numbers(line, content)?;
        let (weight, pin_ids) = if edge_weighted {
            match nums.split_first() {
                Some((w, rest)) => (*w, rest),
                None => return Err(parse_err(line, "empty hyperedge line")),
            }
        } else {
            (1, nums.as_slice())
        };
        if weight == 0 {
            return Err(parse_err(line, "hyperedge weight must be positive"));
        }
        if pin_ids.is_empty() {
            return Err(parse_err(line, "hyperedge has no pins"));
        }
        let mut pins = Vec::with_capacity(pin_ids.len());
        for &id in pin_ids {
            if id == 0 || id as usize > n {
                return Err(parse_err(line, format!("pin {id} out of range 1..={n}")));
            }
            pins.push(id as usize - 1);
        }
        edges.push((weight, pins));
    }

    let mut vertex_weights = vec![1; n];
    if vertex_weighted {
        for (v, slot) in vertex_weights.iter_mut().enumerate() {
            let (line, content) = lines.next().ok_or_else(|| {
                parse_err(hline, format!("truncated: expected {n} vertex weights, found {v}"))
            })?;
            match parse_numbers(line, content)?.as_slice() {
                [w] if *w > 0 => *slot = *w,
                [_] => return Err(parse_err(line, "vertex weight must be positive")),
                _ => return Err(parse_err(line, "expected a single vertex weight")),
            }
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "unexpected trailing content"));
    }
    Hypergraph::new(vertex_weights, edges)
}

fn parse_numbers(line: usize, content: &str) -> Result<Vec<u64>, HypergraphError> {
    content
        .split_whitespace()
        .map(|tok| {
            tok.parse::<u64>()
                .map_err(|_| parse_err(line, format!("invalid integer `{tok}`")))
        })
        .collect()
}

/// Writes `h` in hMetis format, choosing the smallest fmt code that
/// preserves all weights.
pub fn write_hmetis(h: &Hypergraph) -> String {
    let edge_weighted = h.edge_weights.iter().any(|&w| w != 1);
    let vertex_weighted = h.vertex_weights.iter().any(|&w| w != 1);
    let mut out = String::new();
    let _ = write!(out, "{} {}", h.num_edges(), h.num_vertices());
    match (edge_weighted, vertex_weighted) {
        (false, false) => {}
        (true, false) => out.push_str(" 1"),
        (false, true) => out.push_str(" 10"),
        (true, true) => out.push_str(" 11"),
    }
    out.push('\n');
    for (w, pins) in h.edges() {
        let mut first = true;
        if edge_weighted {
            let _ = write!(out, "{w}");
            first = false;
        }
        for &p in pins {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{}", p + 1);
            first = false;
        }
        out.push('\n');
    }
    if vertex_weighted {
        for w in &h.vertex_weights {
            let _ = writeln!(out, "{w}");
        }
    }
    out
}

/// Connectivity-1 cutsize `sum_e w_e (lambda_e - 1)`, recomputed from the
/// assignment alone.
pub fn cutsize(h: &Hypergraph, p: &Partition) -> Weight {
    cutsize_of(h, p.assignment())
}

/// Same as [`cutsize`] for a bare assignment vector.
pub fn cutsize_of(h: &Hypergraph, assignment: &[usize]) -> Weight {
    let mut blocks = Vec::new();
    let mut total = 0;
    for (w, pins) in h.edges() {
        blocks.clear();
        blocks.extend(pins.iter().map(|&v| assignment[v]));
        blocks.sort_unstable();
        blocks.dedup();
        total += w * (blocks.len() as Weight - 1);
    }
    total
}

/// A total k-way assignment with cached block weights, per-edge pin counts
/// and cutsize. All caches are kept exact by [`Partition::move_vertex`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    k: usize,
    assignment: Vec<usize>,
    block_weights: Vec<Weight>,
    /// `pin_counts[e * k + b]` = pins of `e` in block `b`.
    pin_counts: Vec<u32>,
    connectivity: Vec<u32>,
    cut: Weight,
}

impl Partition {
    pub fn new(h: &Hypergraph, k: usize, assignment: Vec<usize>) -> Result<Self, HypergraphError> {
        if k == 0 {
            return Err(HypergraphError::ZeroBlocks);
        }
        if assignment.len() != h.num_vertices() {
            return Err(HypergraphError::LengthMismatch {
                expected: h.num_vertices(),
                got: assignment.len(),
            });
        }
        if let Some((vertex, &block)) = assignment.iter().enumerate().find(|(_, &b)| b >= k) {
            return Err(HypergraphError::BlockOutOfRange { vertex, block, k });
        }
        let mut block_weights = vec![0; k];
        for (v, &b) in assignment.iter().enumerate() {
            block_weights[b] += h.vertex_weight(v);
        }
        let m = h.num_edges();
        let mut pin_counts = vec![0u32; m * k];
        let mut connectivity = vec![0u32; m];
        let mut cut = 0;
        for e in 0..m {
            let counts = &mut pin_counts[e * k..(e + 1) * k];
            for &v in h.pins(e) {
                if counts[assignment[v]] == 0 {
                    connectivity[e] += 1;
                }
                counts[assignment[v]] += 1;
            }
            cut += h.edge_weight(e) * (connectivity[e] as Weight - 1);
        }
        Ok(Self {
            k,
            assignment,
            block_weights,
            pin_counts,
            connectivity,
            cut,
        })
    }

    /// Every vertex in block 0.
    pub fn single_block(h: &Hypergraph, k: usize) -> Result<Self, HypergraphError> {
        Self::new(h, k, vec![0; h.num_vertices()])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn into_assignment(self) -> Vec<usize> {
        self.assignment
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn block_weights(&self) -> &[Weight] {
        &self.block_weights
    }

    pub fn block_weight(&self, b: usize) -> Weight {
        self.block_weights[b]
    }

    /// Cached connectivity-1 cutsize.
    pub fn cutsize(&self) -> Weight {
        self.cut
    }

    pub fn pin_count(&self, e: usize, b: usize) -> u32 {
        self.pin_counts[e * self.k + b]
    }

    /// Number of distinct blocks touched by hyperedge `e`.
    pub fn connectivity(&self, e: usize) -> u32 {
        self.connectivity[e]
    }

    /// Vertices of block `b`, ascending.
    pub fn members(&self, b: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&v| self.assignment[v] == b)
            .collect()
    }

    /// Cutsize decrease obtained by moving `v` to block `to`.
    pub fn gain(&self, h: &Hypergraph, v: usize, to: usize) -> i64 {
        let from = self.assignment[v];
        if from == to {
            return 0;
        }
        let mut gain = 0i64;
        for &e in h.incident(v) {
            let w = h.edge_weight(e) as i64;
            if self.pin_count(e, from) == 1 {
                gain += w;
            }
            if self.pin_count(e, to) == 0 {
                gain -= w;
            }
        }
        gain
    }

    /// Moves `v` to block `to`, updating every cache. Returns the gain.
    pub fn move_vertex(&mut self, h: &Hypergraph, v: usize, to: usize) -> i64 {
        let from = self.assignment[v];
        if from == to {
            return 0;
        }
        let k = self.k;
        let mut gain = 0i64;
        for &e in h.incident(v) {
            let w = h.edge_weight(e) as i64;
            let counts = &mut self.pin_counts[e * k..(e + 1) * k];
            counts[from] -= 1;
            if counts[from] == 0 {
                self.connectivity[e] -= 1;
                gain += w;
            }
            if counts[to] == 0 {
                self.connectivity[e] += 1;
                gain -= w;
            }
            counts[to] += 1;
        }
        let wv = h.vertex_weight(v);
        self.block_weights[from] -= wv;
        self.block_weights[to] += wv;
        self.assignment[v] = to;
        self.cut = (self.cut as i64 - gain) as Weight;
        gain
    }
}

/// Identical per-block caps `U_i = (1 + eps) * ceil(total / k)`.
///
/// Weights are integers, so a block satisfies its cap iff its weight is at
/// most `floor(U_i)`; that integer is what `upper_bounds` stores.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceSpec {
    pub k: usize,
    pub epsilon: f64,
    pub total_weight: Weight,
    pub upper_bounds: Vec<Weight>,
}

impl BalanceSpec {
    pub fn new(total_weight: Weight, k: usize, epsilon: f64) -> Result<Self, HypergraphError> {
        if k == 0 {
            return Err(HypergraphError::ZeroBlocks);
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(HypergraphError::Domain(format!(
                "epsilon must be finite and nonnegative, got {epsilon}"
            )));
        }
        let cap = Self::real_cap(total_weight, k, epsilon).floor() as Weight;
        Ok(Self {
            k,
            epsilon,
            total_weight,
            upper_bounds: vec![cap; k],
        })
    }

    pub fn for_hypergraph(h: &Hypergraph, k: usize, epsilon: f64) -> Result<Self, HypergraphError> {
        Self::new(h.total_vertex_weight(), k, epsilon)
    }

    /// Real-valued cap before integer truncation.
    pub fn real_cap(total_weight: Weight, k: usize, epsilon: f64) -> f64 {
        (1.0 + epsilon) * total_weight.div_ceil(k as Weight) as f64
    }

    pub fn cap(&self, b: usize) -> Weight {
        self.upper_bounds[b]
    }

    /// Total weight above the caps, summed over blocks.
    pub fn overload(&self, block_weights: &[Weight]) -> Weight {
        block_weights
            .iter()
            .zip(&self.upper_bounds)
            .map(|(&w, &u)| w.saturating_sub(u))
            .sum()
    }
}

pub fn is_feasible(p: &Partition, spec: &BalanceSpec) -> bool {
    p.k() == spec.k
        && p
            .block_weights()
            .iter()
            .zip(&spec.upper_bounds)
            .all(|(w, u)| w <= u)
}

/// Balance factor matching hMetis' recursive-bisection `UBfactor`:
/// `eps = ((50 + ubfactor) / 100)^log2(k) * k - 1`.
pub fn epsilon_from_ubfactor(ubfactor: f64, k: usize) -> Result<f64, HypergraphError> {
    if !(ubfactor > 0.0 && ubfactor < 50.0) {
        return Err(HypergraphError::Domain(format!(
            "ubfactor must lie in (0, 50), got {ubfactor}"
        )));
    }
    if k < 2 {
        return Err(HypergraphError::Domain(format!("k must be at least 2, got {k}")));
    }
    let k = k as f64;
    Ok(((50.0 + ubfactor) / 100.0).powf(k.log2()) * k - 1.0)
}

/// Reads a partition file: one block id per vertex, `%` comments allowed.
pub fn read_partition(text: &str, h: &Hypergraph, k: usize) -> Result<Partition, HypergraphError> {
    let mut assignment = Vec::with_capacity(h.num_vertices());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let block: usize = line
            .parse()
            .map_err(|_| parse_err(i + 1, format!("invalid block id `{line}`")))?;
        if block >= k {
            return Err(parse_err(i + 1, format!("block id {block} not in [0, {k})")));
        }
        assignment.push(block);
    }
    Partition::new(h, k, assignment)
}

pub fn write_partition(p: &Partition) -> String {
    let mut out = String::with_capacity(p.num_vertices() * 2);
    for b in p.assignment() {
        let _ = writeln!(out, "{b}");
    }
    out
}

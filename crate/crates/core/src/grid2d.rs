//! Finite signaling agents on rectangular grids.
//!
//! An agent at each vertex reads signals from the up and left channels,
//! emits a symbol, and sends signals right and down. Vertices are numbered
//! row-major from `(0, 0)`. The top and left boundary channels carry the
//! initial signal; the bottom and right ones must end in a final signal. The
//! two outgoing channels of the bottom-right vertex must end in a corner
//! signal, which defaults to the final set.
//!
//! Compiling an agent gives one rank-6 tensor per vertex with labels
//! `(u, l, d, r, o, i)`; boundary channels are summed against the boundary
//! distributions and kept as extent-1 indices.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::automaton::{SymbolKind, SymbolTable, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mps::{Boundary, MatrixProductOperator};
use crate::oracle::digits;
use crate::tensor::{common_pairs, contract, contract_cost, Tensor};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Grids compiled to dense or sparse operators must be at most this many
/// vertices.
pub const MAX_DENSE_GRID_SITES: usize = 10;
pub const MAX_SPARSE_GRID_SITES: usize = 20;
/// Exact 2D environments are limited to this many vertices.
pub const MAX_ENV_SITES: usize = 16;
/// Largest intermediate tensor, in complex entries, an exact 2D
/// contraction may build.
pub const MAX_ENV_ENTRIES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub up: usize,
    pub left: usize,
    pub symbol: usize,
    pub right: usize,
    pub down: usize,
    pub weight: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalingAgent {
    signals: Vec<String>,
    transitions: Vec<Transition>,
    symbols: SymbolTable,
    initial: usize,
    finals: Vec<usize>,
    corner: Vec<usize>,
}

impl SignalingAgent {
    /// `corner` defaults to `finals` when `None`.
    pub fn new(
        signals: Vec<String>,
        transitions: Vec<Transition>,
        symbols: SymbolTable,
        initial: usize,
        finals: Vec<usize>,
        corner: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = signals.len();
        if n == 0 || n > u8::MAX as usize {
            return Err(Error::Precondition(format!("an agent needs 1 to 255 signals, got {n}")));
        }
        for (k, s) in signals.iter().enumerate() {
            if signals[..k].contains(s) {
                return Err(Error::Composition(format!("signal `{s}` defined twice")));
            }
        }
        if symbols.kind() != SymbolKind::Operator {
            return Err(Error::Composition("agents emit operator symbols".into()));
        }
        let corner = corner.unwrap_or_else(|| finals.clone());
        let bad_sig = |s: usize| s >= n;
        if bad_sig(initial) || finals.iter().chain(&corner).any(|&s| bad_sig(s)) {
            return Err(Error::Range("boundary signal out of range".into()));
        }
        for t in &transitions {
            if [t.up, t.left, t.right, t.down].into_iter().any(bad_sig) {
                return Err(Error::Range(format!("transition {t:?} names an unknown signal")));
            }
            if t.symbol >= symbols.len() {
                return Err(Error::Symbol(format!("#{}", t.symbol)));
            }
            if t.weight == ZERO {
                return Err(Error::Precondition(format!("transition {t:?} has zero weight")));
            }
        }
        Ok(Self { signals, transitions, symbols, initial, finals, corner })
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s == name)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn finals(&self) -> &[usize] {
        &self.finals
    }

    pub fn corner(&self) -> &[usize] {
        &self.corner
    }
}

pub const EXTERIOR: usize = 0;
pub const BOUNDARY_X: usize = 1;
pub const BOUNDARY: usize = 2;
pub const INTERIOR_X: usize = 3;
pub const INTERIOR: usize = 4;

/// The agent whose accepted terms are the 2×2 blocks of `X`.
///
/// The exterior, boundary and interior regions all end in accepted signals.
/// The bottom-right corner must see the interior, which rejects the grid
/// with no block.
pub fn four_x_agent() -> SignalingAgent {
    let signals = ["Exterior", "BoundaryX", "Boundary", "InteriorX", "Interior"];
    let (i, x) = (0, 1);
    let t = |up, left, symbol, right, down| Transition { up, left, symbol, right, down, weight: ONE };
    let transitions = vec![
        t(EXTERIOR, EXTERIOR, i, EXTERIOR, EXTERIOR),
        t(EXTERIOR, EXTERIOR, x, BOUNDARY_X, BOUNDARY_X),
        t(BOUNDARY_X, EXTERIOR, x, INTERIOR_X, BOUNDARY),
        t(EXTERIOR, BOUNDARY_X, x, BOUNDARY, INTERIOR_X),
        t(EXTERIOR, BOUNDARY, i, BOUNDARY, INTERIOR),
        t(BOUNDARY, EXTERIOR, i, INTERIOR, BOUNDARY),
        t(INTERIOR_X, INTERIOR_X, x, INTERIOR, INTERIOR),
        t(INTERIOR, INTERIOR, i, INTERIOR, INTERIOR),
    ];
    SignalingAgent::new(
        signals.iter().map(|s| s.to_string()).collect(),
        transitions,
        SymbolTable::paulis(&["I", "X"]),
        EXTERIOR,
        vec![EXTERIOR, BOUNDARY, INTERIOR],
        Some(vec![INTERIOR]),
    )
    .expect("four-X agent")
}

/// One nonzero entry of a compiled vertex, in agent-table order
/// `(up, left, right, down, symbol)`. Boundary channels are index 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexEntry {
    pub up: usize,
    pub left: usize,
    pub right: usize,
    pub down: usize,
    pub symbol: usize,
    pub weight: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOperator {
    rows: usize,
    cols: usize,
    nsig: usize,
    symbols: SymbolTable,
    entries: Vec<Vec<VertexEntry>>,
    tensors: Vec<Tensor>,
}

pub const GRID_LABELS: [&str; 6] = ["u", "l", "d", "r", "o", "i"];

/// Compiles `agent` onto a `rows × cols` grid.
pub fn compile_grid(agent: &SignalingAgent, rows: usize, cols: usize) -> Result<GridOperator> {
    if rows == 0 || cols == 0 {
        return Err(Error::Size("a grid needs at least one row and one column".into()));
    }
    let nsig = agent.signals().len();
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let corner = i + 1 == rows && j + 1 == cols;
            let accept_right = if corner { agent.corner() } else { agent.finals() };
            let accept_down = if corner { agent.corner() } else { agent.finals() };
            let mut merged: Vec<VertexEntry> = Vec::new();
            for t in agent.transitions() {
                if (i == 0 && t.up != agent.initial()) || (j == 0 && t.left != agent.initial()) {
                    continue;
                }
                if (j + 1 == cols && !accept_right.contains(&t.right))
                    || (i + 1 == rows && !accept_down.contains(&t.down))
                {
                    continue;
                }
                let e = VertexEntry {
                    up: if i == 0 { 0 } else { t.up },
                    left: if j == 0 { 0 } else { t.left },
                    right: if j + 1 == cols { 0 } else { t.right },
                    down: if i + 1 == rows { 0 } else { t.down },
                    symbol: t.symbol,
                    weight: t.weight,
                };
                match merged.iter_mut().find(|m| {
                    (m.up, m.left, m.right, m.down, m.symbol) == (e.up, e.left, e.right, e.down, e.symbol)
                }) {
                    Some(m) => m.weight += e.weight,
                    None => merged.push(e),
                }
            }
            merged.retain(|e| e.weight != ZERO);
            entries.push(merged);
        }
    }
    let mut g = GridOperator { rows, cols, nsig, symbols: agent.symbols().clone(), entries, tensors: Vec::new() };
    g.tensors = (0..rows * cols).map(|v| g.realize_vertex(v)).collect::<Result<_>>()?;
    Ok(g)
}

impl GridOperator {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn d(&self) -> usize {
        self.symbols.dim()
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    /// Channel extents `(up, left, down, right)` at a vertex.
    pub fn extents(&self, i: usize, j: usize) -> [usize; 4] {
        let ext = |boundary: bool| if boundary { 1 } else { self.nsig };
        [ext(i == 0), ext(j == 0), ext(i + 1 == self.rows), ext(j + 1 == self.cols)]
    }

    pub fn entries(&self, i: usize, j: usize) -> &[VertexEntry] {
        &self.entries[i * self.cols + j]
    }

    /// Rank-6 tensor at `(i, j)` with labels `(u, l, d, r, o, i)`.
    pub fn tensor(&self, i: usize, j: usize) -> &Tensor {
        &self.tensors[i * self.cols + j]
    }

    fn realize_vertex(&self, v: usize) -> Result<Tensor> {
        let (i, j) = (v / self.cols, v % self.cols);
        let [eu, el, ed, er] = self.extents(i, j);
        let d = self.d();
        let mut t = Tensor::zeros(GRID_LABELS, vec![eu, el, ed, er, d, d])?;
        for e in &self.entries[v] {
            let m = self.symbols.value(e.symbol);
            for o in 0..d {
                for c in 0..d {
                    let idx = [e.up, e.left, e.down, e.right, o, c];
                    t.set(&idx, t.get(&idx) + e.weight * m[(o, c)]);
                }
            }
        }
        Ok(t)
    }

    /// Multiplies the operator by `c` through the `(0, 0)` vertex.
    pub fn scale(&self, c: C64) -> Self {
        let mut g = self.clone();
        for e in &mut g.entries[0] {
            e.weight *= c;
        }
        g.tensors[0] = g.tensors[0].scale(c);
        g
    }

    /// The single row of a `1 × n` grid as an operator chain.
    pub fn row_mpo(&self) -> Result<MatrixProductOperator> {
        if self.rows != 1 {
            return Err(Error::Shape(format!("grid has {} rows", self.rows)));
        }
        let sites = self
            .tensors
            .iter()
            .map(|t| t.squeeze("u")?.squeeze("d")?.permute(&["l", "o", "i", "r"]))
            .collect::<Result<Vec<_>>>()?;
        MatrixProductOperator::new(sites, Boundary::Open)
    }

    fn check_config(&self, config: &[usize]) -> Result<()> {
        if config.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "configuration of {} symbols for a {}×{} grid",
                config.len(),
                self.rows,
                self.cols
            )));
        }
        if let Some(&s) = config.iter().find(|&&s| s >= self.symbols.len()) {
            return Err(Error::Symbol(format!("#{s}")));
        }
        Ok(())
    }

    /// Parses rows of symbols separated by newlines or `/`.
    pub fn parse_config(&self, text: &str) -> Result<Vec<usize>> {
        let rows: Vec<&str> = text.split(['/', '\n']).map(str::trim).filter(|r| !r.is_empty()).collect();
        if rows.len() != self.rows {
            return Err(Error::Shape(format!("{} rows given for a {}-row grid", rows.len(), self.rows)));
        }
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in rows {
            let w = self.symbols.parse_word(r)?;
            if w.len() != self.cols {
                return Err(Error::Shape(format!("row `{r}` has {} symbols, expected {}", w.len(), self.cols)));
            }
            out.extend(w);
        }
        Ok(out)
    }

    pub fn format_config(&self, config: &[usize]) -> String {
        config.chunks(self.cols).map(|r| self.symbols.format_word(r)).collect::<Vec<_>>().join("/")
    }
}

/// Sum over all consistent signal assignments of the product of entry
/// weights, for a row-major symbol grid.
///
/// Row-major frontier recursion: the frontier holds the pending down signal
/// of every column and the current left signal.
pub fn grid_weight(g: &GridOperator, config: &[usize]) -> Result<C64> {
    g.check_config(config)?;
    let cols = g.cols;
    let mut frontier: HashMap<Vec<u8>, C64> = HashMap::from([(vec![0u8; cols + 1], ONE)]);
    for i in 0..g.rows {
        for j in 0..cols {
            let sym = config[i * cols + j];
            let mut next: HashMap<Vec<u8>, C64> = HashMap::new();
            for (f, w) in &frontier {
                let (up, left) = (f[j] as usize, f[cols] as usize);
                for e in g.entries(i, j) {
                    if e.symbol != sym || e.up != up || e.left != left {
                        continue;
                    }
                    let mut nf = f.clone();
                    nf[j] = e.down as u8;
                    nf[cols] = if j + 1 == cols { 0 } else { e.right as u8 };
                    *next.entry(nf).or_insert(ZERO) += w * e.weight;
                }
            }
            frontier = next;
            if frontier.is_empty() {
                return Ok(ZERO);
            }
        }
    }
    Ok(frontier.values().sum())
}

fn guard_enumeration(g: &GridOperator) -> Result<usize> {
    let total = (g.symbols.len() as f64).powi((g.rows * g.cols) as i32);
    if total > crate::oracle::MAX_ENUMERATED_WORDS as f64 {
        return Err(Error::Size(format!("{total} symbol grids exceed the limit of 2^20")));
    }
    Ok(total as usize)
}

/// Every symbol grid with nonzero weight, in row-major index order.
pub fn enumerate_accepted(g: &GridOperator, exec: Execution) -> Result<Vec<(Vec<usize>, C64)>> {
    let total = guard_enumeration(g)?;
    let (base, n) = (g.symbols.len(), g.rows * g.cols);
    let weights = exec.map_range(total, |k| grid_weight(g, &digits(k, base, n)));
    let mut out = Vec::new();
    for (k, w) in weights.into_iter().enumerate() {
        let w = w?;
        if w != ZERO {
            out.push((digits(k, base, n), w));
        }
    }
    Ok(out)
}

/// `Σ_config weight(config) · ⊗ local operators` as sorted nonzero entries.
pub fn sparse_grid_operator(g: &GridOperator, exec: Execution) -> Result<Vec<((usize, usize), C64)>> {
    let n = g.rows * g.cols;
    if n > MAX_SPARSE_GRID_SITES {
        return Err(Error::Size(format!("{n} vertices exceed the sparse limit of {MAX_SPARSE_GRID_SITES}")));
    }
    let d = g.d();
    let local: Vec<Vec<(usize, usize, C64)>> = (0..g.symbols.len())
        .map(|s| {
            let m = g.symbols.value(s);
            let mut nz = Vec::new();
            for r in 0..d {
                for c in 0..d {
                    if m[(r, c)] != ZERO {
                        nz.push((r, c, m[(r, c)]));
                    }
                }
            }
            nz
        })
        .collect();
    let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
    for (config, w) in enumerate_accepted(g, exec)? {
        let mut terms: Vec<(usize, usize, C64)> = vec![(0, 0, w)];
        for &s in &config {
            let mut next = Vec::with_capacity(terms.len() * local[s].len());
            for &(r, c, v) in &terms {
                for &(lr, lc, lv) in &local[s] {
                    next.push((r * d + lr, c * d + lc, v * lv));
                }
            }
            terms = next;
        }
        for (r, c, v) in terms {
            *acc.entry((r, c)).or_insert(ZERO) += v;
        }
    }
    let mut out: Vec<_> = acc.into_iter().filter(|(_, v)| *v != ZERO).collect();
    out.sort_by_key(|e| e.0);
    Ok(out)
}

/// Dense form of [`sparse_grid_operator`].
pub fn dense_grid_operator(g: &GridOperator) -> Result<DMatrix<C64>> {
    let n = g.rows * g.cols;
    if n > MAX_DENSE_GRID_SITES {
        return Err(Error::Size(format!("{n} vertices exceed the dense limit of {MAX_DENSE_GRID_SITES}")));
    }
    let dim = g.d().pow(n as u32);
    let mut m = DMatrix::zeros(dim, dim);
    for ((r, c), v) in sparse_grid_operator(g, Execution::default())? {
        m[(r, c)] = v;
    }
    Ok(m)
}

/// One-dimensional automaton over the row-major order that accepts the same
/// 2×2 blocks of `X` on grids with `cols` columns.
///
/// `S0 … S{cols−1}` track the column before the block starts; `A` follows its
/// first `X`; `B0 … B{cols−2}` count the identities up to the block's second
/// row; `C` follows its third `X`; `F` accepts.
pub fn snake_automaton_four_x(cols: usize) -> Result<WeightedAutomaton> {
    if cols < 2 {
        return Err(Error::Precondition("the snake automaton needs at least two columns".into()));
    }
    let s = |c: usize| format!("S{c}");
    let b = |k: usize| format!("B{k}");
    let mut names: Vec<String> = (0..cols).map(s).collect();
    names.push("A".into());
    names.extend((0..cols - 1).map(b));
    names.push("C".into());
    names.push("F".into());
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut builder = WeightedAutomaton::builder(SymbolTable::paulis(&["I", "X"])).states(&refs);
    for c in 0..cols {
        builder = builder.edge(&s(c), &s((c + 1) % cols), "I", ONE);
        if c + 2 <= cols {
            builder = builder.edge(&s(c), "A", "X", ONE);
        }
    }
    builder = builder.edge("A", &b(0), "X", ONE);
    for k in 0..cols - 2 {
        builder = builder.edge(&b(k), &b(k + 1), "I", ONE);
    }
    builder
        .edge(&b(cols - 2), "C", "X", ONE)
        .edge("C", "F", "X", ONE)
        .edge("F", "F", "I", ONE)
        .initial(&s(0), ONE)
        .accept("F", ONE)
        .build()
}

/// A tensor-network state on the grid: site labels `(u, l, d, r, p)` with
/// extent-1 boundary bonds.
#[derive(Debug, Clone, PartialEq)]
pub struct Peps {
    rows: usize,
    cols: usize,
    d: usize,
    sites: Vec<Tensor>,
}

pub const PEPS_LABELS: [&str; 5] = ["u", "l", "d", "r", "p"];

impl Peps {
    pub fn new(rows: usize, cols: usize, sites: Vec<Tensor>) -> Result<Self> {
        if rows == 0 || cols == 0 || sites.len() != rows * cols {
            return Err(Error::Shape(format!("{} sites for a {rows}×{cols} grid", sites.len())));
        }
        let d = sites[0].dims().get(4).copied().unwrap_or(0);
        for (v, t) in sites.iter().enumerate() {
            let (i, j) = (v / cols, v % cols);
            if t.labels() != PEPS_LABELS || t.dims()[4] != d {
                return Err(Error::Label(format!("site ({i}, {j}) must carry (u, l, d, r, p) with d = {d}")));
            }
            let dims = t.dims();
            let boundary = [i == 0, j == 0, i + 1 == rows, j + 1 == cols];
            if boundary.iter().zip(dims).any(|(&b, &e)| b && e != 1) {
                return Err(Error::Shape(format!("site ({i}, {j}) has a boundary bond of extent > 1")));
            }
            if j + 1 < cols && dims[3] != sites[v + 1].dims()[1] {
                return Err(Error::Shape(format!("horizontal bond right of ({i}, {j}) mismatched")));
            }
            if i + 1 < rows && dims[2] != sites[v + cols].dims()[0] {
                return Err(Error::Shape(format!("vertical bond below ({i}, {j}) mismatched")));
            }
        }
        Ok(Self { rows, cols, d, sites })
    }

    /// Product state from one ket per vertex, row-major.
    pub fn product(rows: usize, cols: usize, kets: &[Vec<C64>]) -> Result<Self> {
        let sites = kets
            .iter()
            .map(|k| Tensor::new(PEPS_LABELS, vec![1, 1, 1, 1, k.len()], k.clone()))
            .collect::<Result<_>>()?;
        Self::new(rows, cols, sites)
    }

    /// Entries uniform in the unit square; interior bonds of extent `bond`.
    pub fn random(rows: usize, cols: usize, d: usize, bond: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut sites = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = |b: bool| if b { 1 } else { bond };
                let dims = vec![e(i == 0), e(j == 0), e(i + 1 == rows), e(j + 1 == cols), d];
                sites.push(Tensor::from_fn(PEPS_LABELS, dims, |_| C64::new(rng.random(), rng.random()))?);
            }
        }
        Self::new(rows, cols, sites)
    }

    pub fn site(&self, i: usize, j: usize) -> &Tensor {
        &self.sites[i * self.cols + j]
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Amplitude vector over row-major configurations.
    pub fn dense(&self) -> Result<DVector<C64>> {
        let n = self.rows * self.cols;
        if n > MAX_ENV_SITES {
            return Err(Error::Size(format!("{n} sites exceed the exact-contraction limit")));
        }
        let mut acc = Tensor::scalar(ONE);
        let mut phys = Vec::with_capacity(n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let p = format!("p{i},{j}");
                let t = globalize(self.site(i, j), i, j, self.rows, self.cols, "", &[("p", &p)])?;
                acc = capped_contract(&acc, &t)?;
                phys.push(p);
            }
        }
        let acc = acc.permute(&phys)?;
        Ok(DVector::from_column_slice(acc.data()))
    }
}

/// Renames a site tensor's bond labels to grid-global names and drops its
/// boundary bonds. Vertical bond below `(i, j)` is `v{i},{j}`; horizontal
/// bond right of it is `h{i},{j}`. `suffix` distinguishes bra, operator and
/// ket layers.
fn globalize(
    t: &Tensor,
    i: usize,
    j: usize,
    rows: usize,
    cols: usize,
    suffix: &str,
    extra: &[(&str, &str)],
) -> Result<Tensor> {
    let mut t = t.clone();
    let names = [
        ("u", i > 0, format!("v{},{j}{suffix}", i.wrapping_sub(1))),
        ("l", j > 0, format!("h{i},{}{suffix}", j.wrapping_sub(1))),
        ("d", i + 1 < rows, format!("v{i},{j}{suffix}")),
        ("r", j + 1 < cols, format!("h{i},{j}{suffix}")),
    ];
    for (label, interior, global) in &names {
        t = if *interior { t.relabel(&[(label, global)])? } else { t.squeeze(label)? };
    }
    if !extra.is_empty() {
        t = t.relabel(extra)?;
    }
    Ok(t)
}

fn contracted_len(a: &Tensor, b: &Tensor) -> usize {
    let pairs = common_pairs(a, b);
    let inner: usize = pairs.iter().map(|(l, _)| a.dim_of(l).unwrap()).product();
    (a.len() / inner).saturating_mul(b.len() / inner)
}

fn capped_contract(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let size = contracted_len(a, b);
    if size > MAX_ENV_ENTRIES {
        return Err(Error::Size(format!("intermediate of {size} entries exceeds {MAX_ENV_ENTRIES}")));
    }
    contract(a, b, &common_pairs(a, b))
}

/// Recursion tensors of the 2D environment scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvKind {
    /// Row `i`, columns left of `j`.
    A,
    /// Row `i`, columns right of `j`.
    B,
    /// All of row `i`.
    C,
    /// Rows above `i`.
    L,
    /// Rows below `i`.
    R,
}

/// Cached environments of `⟨bra| G |ket⟩` on a grid.
///
/// `O(i, j) = L(i, j)·A(i, j)·B(i, j)·R(i, j)` is the network with the
/// transfer tensor at `(i, j)` removed, where
/// `A(i, j) = A(i, j−1)·E(i, j−1)`, `B(i, j) = B(i, j+1)·E(i, j+1)`,
/// `C(i, j) = A(i, j)·E(i, j)·B(i, j)`, `L(i, j) = L(i−1, j)·C(i−1, j)` and
/// `R(i, j) = R(i+1, j)·C(i+1, j)`, with unit tensors on the edges.
pub struct Env2d<'a> {
    g: &'a GridOperator,
    bra: Peps,
    ket: Peps,
    e: Vec<Tensor>,
    cache: HashMap<(EnvKind, usize, usize), Tensor>,
    log: Vec<(EnvKind, usize, usize)>,
    multiply_adds: u64,
}

impl<'a> Env2d<'a> {
    pub fn new(g: &'a GridOperator, bra: Peps, ket: Peps) -> Result<Self> {
        let n = g.rows * g.cols;
        if n > MAX_ENV_SITES {
            return Err(Error::Size(format!("{n} vertices exceed the exact-contraction limit of {MAX_ENV_SITES}")));
        }
        for p in [&bra, &ket] {
            if (p.rows, p.cols, p.d) != (g.rows, g.cols, g.d()) {
                return Err(Error::Shape("state grid does not match the operator grid".into()));
            }
        }
        let mut env = Self { g, bra, ket, e: Vec::new(), cache: HashMap::new(), log: Vec::new(), multiply_adds: 0 };
        env.e = (0..n).map(|v| env.transfer(v / g.cols, v % g.cols)).collect::<Result<_>>()?;
        Ok(env)
    }

    fn transfer(&self, i: usize, j: usize) -> Result<Tensor> {
        let (r, c) = (self.g.rows, self.g.cols);
        let b = globalize(&self.bra.site(i, j).conj(), i, j, r, c, ".b", &[("p", "po")])?;
        let o = globalize(self.g.tensor(i, j), i, j, r, c, ".o", &[("o", "po"), ("i", "pi")])?;
        let k = globalize(self.ket.site(i, j), i, j, r, c, ".k", &[("p", "pi")])?;
        let bo = capped_contract(&b, &o)?;
        capped_contract(&bo, &k)
    }

    /// Transfer tensor at `(i, j)` with grid-global bond labels.
    pub fn e(&self, i: usize, j: usize) -> &Tensor {
        &self.e[i * self.g.cols + j]
    }

    /// Recursion tensors computed since the last call, in order.
    pub fn take_log(&mut self) -> Vec<(EnvKind, usize, usize)> {
        std::mem::take(&mut self.log)
    }

    pub fn multiply_adds(&self) -> u64 {
        self.multiply_adds
    }

    fn join(&mut self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.multiply_adds += contract_cost(a, b, &common_pairs(a, b))?;
        capped_contract(a, b)
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.g.rows || j >= self.g.cols {
            return Err(Error::Range(format!("vertex ({i}, {j}) outside {}×{}", self.g.rows, self.g.cols)));
        }
        Ok(())
    }

    /// Recursion tensor `kind` at `(i, j)`, computed on demand and cached.
    pub fn get(&mut self, kind: EnvKind, i: usize, j: usize) -> Result<Tensor> {
        self.check(i, j)?;
        if let Some(t) = self.cache.get(&(kind, i, j)) {
            return Ok(t.clone());
        }
        let (rows, cols) = (self.g.rows, self.g.cols);
        let unit = Tensor::scalar(ONE);
        let t = match kind {
            EnvKind::A if j == 0 => return Ok(unit),
            EnvKind::B if j + 1 == cols => return Ok(unit),
            EnvKind::L if i == 0 => return Ok(unit),
            EnvKind::R if i + 1 == rows => return Ok(unit),
            EnvKind::A => {
                let prev = self.get(EnvKind::A, i, j - 1)?;
                let e = self.e(i, j - 1).clone();
                self.join(&prev, &e)?
            }
            EnvKind::B => {
                let next = self.get(EnvKind::B, i, j + 1)?;
                let e = self.e(i, j + 1).clone();
                self.join(&e, &next)?
            }
            EnvKind::C => {
                let a = self.get(EnvKind::A, i, j)?;
                let b = self.get(EnvKind::B, i, j)?;
                let e = self.e(i, j).clone();
                let ae = self.join(&a, &e)?;
                self.join(&ae, &b)?
            }
            EnvKind::L => {
                let prev = self.get(EnvKind::L, i - 1, j)?;
                let c = self.get(EnvKind::C, i - 1, j)?;
                self.join(&prev, &c)?
            }
            EnvKind::R => {
                let next = self.get(EnvKind::R, i + 1, j)?;
                let c = self.get(EnvKind::C, i + 1, j)?;
                self.join(&c, &next)?
            }
        };
        self.cache.insert((kind, i, j), t.clone());
        self.log.push((kind, i, j));
        Ok(t)
    }

    /// `O(i, j)`: the network without the transfer tensor at `(i, j)`.
    pub fn o(&mut self, i: usize, j: usize) -> Result<Tensor> {
        let l = self.get(EnvKind::L, i, j)?;
        let a = self.get(EnvKind::A, i, j)?;
        let b = self.get(EnvKind::B, i, j)?;
        let r = self.get(EnvKind::R, i, j)?;
        let la = self.join(&l, &a)?;
        let lab = self.join(&la, &b)?;
        self.join(&lab, &r)
    }

    /// `O(i, j)` by contracting every other transfer tensor row-major,
    /// without the cache.
    pub fn o_uncached(&self, i: usize, j: usize) -> Result<Tensor> {
        self.check(i, j)?;
        let mut acc = Tensor::scalar(ONE);
        for v in 0..self.e.len() {
            if v != i * self.g.cols + j {
                acc = capped_contract(&acc, &self.e[v])?;
            }
        }
        Ok(acc)
    }

    /// `⟨bra| G |ket⟩`.
    pub fn expectation(&mut self) -> Result<C64> {
        let o = self.o(0, 0)?;
        let e = self.e(0, 0).clone();
        self.join(&o, &e)?.scalar_value()
    }

    /// `⟨S| G |S⟩` where `S` is the ket with its `(i, j)` site replaced by
    /// `site`, evaluated through `O(i, j)`.
    pub fn quadratic_form(&mut self, i: usize, j: usize, site: &Tensor) -> Result<C64> {
        let o = self.o(i, j)?;
        let (r, c) = (self.g.rows, self.g.cols);
        let site = site.permute(&PEPS_LABELS)?;
        let b = globalize(&site.conj(), i, j, r, c, ".b", &[("p", "po")])?;
        let op = globalize(self.g.tensor(i, j), i, j, r, c, ".o", &[("o", "po"), ("i", "pi")])?;
        let k = globalize(&site, i, j, r, c, ".k", &[("p", "pi")])?;
        let e = capped_contract(&capped_contract(&b, &op)?, &k)?;
        capped_contract(&o, &e)?.scalar_value()
    }

    /// `d × d` local operator at `(i, j)` for states with extent-1 bonds:
    /// `v* · H · v` is the energy with the `(i, j)` ket replaced by `v`.
    pub fn local_matrix(&mut self, i: usize, j: usize) -> Result<DMatrix<C64>> {
        if self.ket.sites.iter().chain(&self.bra.sites).any(|t| t.dims()[..4].iter().any(|&e| e != 1)) {
            return Err(Error::Precondition("local matrices need extent-1 state bonds".into()));
        }
        let o = self.o(i, j)?;
        let (r, c) = (self.g.rows, self.g.cols);
        let op = globalize(self.g.tensor(i, j), i, j, r, c, ".o", &[("o", "bp"), ("i", "p")])?;
        let mut h = capped_contract(&o, &op)?;
        for l in h.labels().to_vec() {
            if l != "bp" && l != "p" {
                h = h.squeeze(&l)?;
            }
        }
        h.to_matrix(&["bp"], &["p"])
    }

    pub fn bra(&self) -> &Peps {
        &self.bra
    }

    pub fn ket(&self) -> &Peps {
        &self.ket
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::unroll;
    use crate::oracle::dense_operator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_agent() -> SignalingAgent {
        let t = Transition { up: 0, left: 0, symbol: 0, right: 0, down: 0, weight: ONE };
        SignalingAgent::new(vec!["S".into()], vec![t], SymbolTable::paulis(&["I"]), 0, vec![0], None).unwrap()
    }

    /// Brute force straight from the agent's table: every assignment of
    /// signals to every channel.
    fn brute_weight(agent: &SignalingAgent, rows: usize, cols: usize, config: &[usize]) -> C64 {
        fn go(
            a: &SignalingAgent,
            rows: usize,
            cols: usize,
            cfg: &[usize],
            v: usize,
            down: &mut Vec<usize>,
            right: &mut Vec<usize>,
        ) -> C64 {
            if v == rows * cols {
                return ONE;
            }
            let (i, j) = (v / cols, v % cols);
            let up = if i == 0 { a.initial() } else { down[v - cols] };
            let left = if j == 0 { a.initial() } else { right[v - 1] };
            let corner = i + 1 == rows && j + 1 == cols;
            let mut total = ZERO;
            for t in a.transitions() {
                if t.up != up || t.left != left || t.symbol != cfg[v] {
                    continue;
                }
                let ok = |s: usize| if corner { a.corner().contains(&s) } else { a.finals().contains(&s) };
                if (i + 1 == rows && !ok(t.down)) || (j + 1 == cols && !ok(t.right)) {
                    continue;
                }
                down[v] = t.down;
                right[v] = t.right;
                total += t.weight * go(a, rows, cols, cfg, v + 1, down, right);
            }
            total
        }
        let n = rows * cols;
        go(agent, rows, cols, config, 0, &mut vec![0; n], &mut vec![0; n])
    }

    fn placements(rows: usize, cols: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for r in 0..rows - 1 {
            for c in 0..cols - 1 {
                let mut g = vec![0; rows * cols];
                for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    g[(r + dr) * cols + c + dc] = 1;
                }
                out.push(g);
            }
        }
        out
    }

    #[test]
    fn table_shape() {
        let a = four_x_agent();
        assert_eq!(a.transitions().len(), 8);
        assert_eq!(a.signal_index("Interior"), Some(4));
        assert_eq!(a.signals().len(), 5);
        let g = compile_grid(&a, 3, 3).unwrap();
        assert_eq!(g.entries(1, 1).len(), 8);
        let e = g.entries(1, 1);
        assert_eq!((e[0].up, e[0].left, e[0].right, e[0].down, e[0].symbol), (0, 0, 0, 0, 0));
        assert_eq!((e[1].up, e[1].left, e[1].right, e[1].down, e[1].symbol), (0, 0, 1, 1, 1));
        assert_eq!((e[2].up, e[2].left, e[2].right, e[2].down, e[2].symbol), (1, 0, 3, 2, 1));
        assert_eq!(g.tensor(1, 1).dims(), &[5, 5, 5, 5, 2, 2]);
        assert_eq!(g.tensor(0, 0).dims(), &[1, 1, 5, 5, 2, 2]);
    }

    #[test]
    fn unit_agent_single_vertex() {
        let g = compile_grid(&unit_agent(), 1, 1).unwrap();
        assert_eq!(dense_grid_operator(&g).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(grid_weight(&g, &[0]).unwrap(), ONE);
        let g = compile_grid(&unit_agent(), 2, 3).unwrap();
        assert_eq!(dense_grid_operator(&g).unwrap(), DMatrix::identity(64, 64));
    }

    #[test]
    fn weights_match_brute_force() {
        let a = four_x_agent();
        for (rows, cols) in [(1, 3), (2, 2), (2, 3), (3, 3)] {
            let g = compile_grid(&a, rows, cols).unwrap();
            for k in 0..1usize << (rows * cols) {
                let cfg = digits(k, 2, rows * cols);
                assert_eq!(grid_weight(&g, &cfg).unwrap(), brute_weight(&a, rows, cols, &cfg), "{cfg:?}");
            }
        }
    }

    #[test]
    fn small_grid_examples() {
        let g = compile_grid(&four_x_agent(), 3, 3).unwrap();
        let w = |s: &str| grid_weight(&g, &g.parse_config(s).unwrap()).unwrap();
        assert_eq!(w("III/III/III"), ZERO);
        assert_eq!(w("III/IXI/III"), ZERO);
        assert_eq!(w("XXI/XXI/III"), ONE);
        assert!(matches!(grid_weight(&g, &[0; 8]), Err(Error::Shape(_))));
    }

    #[test]
    fn three_by_three_is_four_placements() {
        let g = compile_grid(&four_x_agent(), 3, 3).unwrap();
        let accepted = enumerate_accepted(&g, Execution::Sequential).unwrap();
        let mut expect = placements(3, 3);
        expect.sort();
        let got: Vec<Vec<usize>> = accepted.iter().map(|(c, _)| c.clone()).collect();
        assert_eq!(got, expect);
        let (i, x) = (crate::automaton::pauli("I").unwrap(), crate::automaton::pauli("X").unwrap());
        let mut oracle = DMatrix::zeros(512, 512);
        for p in placements(3, 3) {
            let ops: Vec<_> = p.iter().map(|&s| if s == 1 { x.clone() } else { i.clone() }).collect();
            oracle += crate::oracle::kron_chain(&ops);
        }
        assert_eq!(dense_grid_operator(&g).unwrap(), oracle);
        let c = C64::new(0.5, -2.0);
        assert_eq!(dense_grid_operator(&g.scale(c)).unwrap(), oracle * c);
    }

    #[test]
    fn realized_tensors_contract_to_dense_operator() {
        let g = compile_grid(&four_x_agent(), 2, 3).unwrap();
        let mut acc = Tensor::scalar(ONE);
        let (mut rows, mut cols) = (Vec::new(), Vec::new());
        for i in 0..2 {
            for j in 0..3 {
                let (o, c) = (format!("o{i}{j}"), format!("i{i}{j}"));
                let t = globalize(g.tensor(i, j), i, j, 2, 3, "", &[("o", &o), ("i", &c)]).unwrap();
                acc = contract(&acc, &t, &common_pairs(&acc, &t)).unwrap();
                rows.push(o);
                cols.push(c);
            }
        }
        let m = acc.to_matrix(&rows, &cols).unwrap();
        assert_eq!(m, dense_grid_operator(&g).unwrap());
    }

    #[test]
    fn size_guards() {
        let g = compile_grid(&four_x_agent(), 4, 4).unwrap();
        assert!(matches!(dense_grid_operator(&g), Err(Error::Size(_))));
        let g = compile_grid(&four_x_agent(), 5, 5).unwrap();
        assert!(matches!(enumerate_accepted(&g, Execution::Sequential), Err(Error::Size(_))));
        assert!(matches!(compile_grid(&four_x_agent(), 0, 3), Err(Error::Size(_))));
    }

    #[test]
    fn snake_matches_agent_on_small_grids() {
        for (rows, cols) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let a = snake_automaton_four_x(cols).unwrap();
            let m = unroll(&a, rows * cols).unwrap().to_mpo().unwrap();
            let g = compile_grid(&four_x_agent(), rows, cols).unwrap();
            assert_eq!(dense_operator(&m).unwrap(), dense_grid_operator(&g).unwrap(), "{rows}×{cols}");
        }
        assert_eq!(snake_automaton_four_x(4).unwrap().num_states(), 10);
        assert!(snake_automaton_four_x(1).is_err());
    }

    fn random_product(rows: usize, cols: usize, seed: u64) -> Peps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Peps::random(rows, cols, 2, 1, &mut rng).unwrap()
    }

    #[test]
    fn one_row_reduces_to_chain_environments() {
        let g = compile_grid(&four_x_agent(), 1, 5).unwrap();
        let p = random_product(1, 5, 11);
        let mps = crate::mps::MatrixProductState::product(
            &(0..5).map(|j| p.site(0, j).data().to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        let mpo = g.row_mpo().unwrap();
        let mut env = Env2d::new(&g, p.clone(), p).unwrap();
        let mut chain = crate::variational::EnvironmentCache::new(&mpo, mps).unwrap();
        for j in 1..5 {
            let a = env.get(EnvKind::A, 0, j).unwrap();
            let h = format!("h0,{}", j - 1);
            let a = a.permute(&[format!("{h}.b"), format!("{h}.o"), format!("{h}.k")]).unwrap();
            let l = chain.env_left(j).unwrap().h.clone();
            assert_eq!(a.dims(), l.dims());
            let diff = a.data().iter().zip(l.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "site {j}: {diff}");
        }
    }

    #[test]
    fn cached_matches_uncached_and_dense() {
        let g = compile_grid(&four_x_agent(), 3, 3).unwrap();
        let p = random_product(3, 3, 12);
        let mut env = Env2d::new(&g, p.clone(), p.clone()).unwrap();
        let dense_g = dense_grid_operator(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (i, j) in [(0, 0), (1, 1), (2, 1), (2, 2)] {
            let cached = env.o(i, j).unwrap();
            let fresh = env.o_uncached(i, j).unwrap();
            assert!(cached.max_abs_diff(&fresh).unwrap() < 1e-12);
            let v = Tensor::from_fn(PEPS_LABELS, vec![1, 1, 1, 1, 2], |_| C64::new(rng.random(), rng.random()))
                .unwrap();
            let q = env.quadratic_form(i, j, &v).unwrap();
            let mut sites = p.sites.clone();
            sites[i * 3 + j] = v.clone();
            let s = Peps::new(3, 3, sites).unwrap().dense().unwrap();
            let oracle = (s.adjoint() * &dense_g * &s)[(0, 0)];
            assert!((q - oracle).norm() < 1e-10 * oracle.norm().max(1.0));
            let h = env.local_matrix(i, j).unwrap();
            let vv = DVector::from_column_slice(v.data());
            assert!(((vv.adjoint() * h * &vv)[(0, 0)] - oracle).norm() < 1e-10 * oracle.norm().max(1.0));
        }
    }

    #[test]
    fn moving_down_computes_one_row_and_one_environment() {
        let g = compile_grid(&four_x_agent(), 4, 4).unwrap();
        let p = random_product(4, 4, 14);
        let mut env = Env2d::new(&g, p.clone(), p).unwrap();
        env.o(2, 2).unwrap();
        env.take_log();
        env.o(3, 2).unwrap();
        assert_eq!(env.take_log(), vec![(EnvKind::C, 2, 2), (EnvKind::L, 3, 2)]);
    }

    #[test]
    fn peps_bonds_contract_exactly() {
        let g = compile_grid(&four_x_agent(), 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = Peps::random(2, 2, 2, 2, &mut rng).unwrap();
        let mut env = Env2d::new(&g, p.clone(), p.clone()).unwrap();
        let s = p.dense().unwrap();
        let oracle = (s.adjoint() * dense_grid_operator(&g).unwrap() * &s)[(0, 0)];
        let e = env.expectation().unwrap();
        assert!((e - oracle).norm() < 1e-10 * oracle.norm());
        assert!(env.local_matrix(0, 0).is_err());
    }
}

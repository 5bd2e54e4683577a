//! Complex-weighted finite automata `(Q, Σ, W, α, Ω)`.
//!
//! The output on a word `a₀a₁…a_N` is `α · W_{a₀} ⋯ W_{a_N} · Ω`; the
//! periodic variant replaces the boundary vectors with a trace. Symbols are
//! named and realized as kets or operator matrices through a [`SymbolTable`].

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::complex_fmt::format_complex;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    State,
    Operator,
}

/// Maps symbol names to local kets (`d × 1`) or local operators (`d × d`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    kind: SymbolKind,
    dim: usize,
    names: Vec<String>,
    values: Vec<DMatrix<C64>>,
}

impl SymbolTable {
    pub fn new(kind: SymbolKind, dim: usize) -> Self {
        assert!(dim >= 1, "physical dimension must be positive");
        Self { kind, dim, names: Vec::new(), values: Vec::new() }
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Symbol(name.to_string()))
    }

    fn push(&mut self, name: &str, value: DMatrix<C64>) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Composition(format!("symbol `{name}` defined twice")));
        }
        self.names.push(name.to_string());
        self.values.push(value);
        Ok(())
    }

    pub fn insert_ket(&mut self, name: &str, ket: &[C64]) -> Result<()> {
        if self.kind != SymbolKind::State {
            return Err(Error::Composition("kets belong in a state symbol table".into()));
        }
        if ket.len() != self.dim {
            return Err(Error::Dimension(format!("ket `{name}` has {} entries, d = {}", ket.len(), self.dim)));
        }
        self.push(name, DMatrix::from_column_slice(self.dim, 1, ket))
    }

    pub fn insert_matrix(&mut self, name: &str, m: DMatrix<C64>) -> Result<()> {
        if self.kind != SymbolKind::Operator {
            return Err(Error::Composition("matrices belong in an operator symbol table".into()));
        }
        if m.shape() != (self.dim, self.dim) {
            return Err(Error::Dimension(format!("matrix `{name}` is {:?}, d = {}", m.shape(), self.dim)));
        }
        self.push(name, m)
    }

    /// `d × 1` for kets, `d × d` for operators.
    pub fn value(&self, index: usize) -> &DMatrix<C64> {
        &self.values[index]
    }

    /// Basis kets `0 ↦ (1,0)`, `1 ↦ (0,1)`; `0` is spin up.
    pub fn qubit_basis() -> Self {
        let mut t = Self::new(SymbolKind::State, 2);
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        t.insert_ket("0", &[o, z]).unwrap();
        t.insert_ket("1", &[z, o]).unwrap();
        t
    }

    /// Operator table with the named Pauli matrices (`I`, `X`, `Y`, `Z`).
    pub fn paulis(names: &[&str]) -> Self {
        let mut t = Self::new(SymbolKind::Operator, 2);
        for &n in names {
            t.insert_matrix(n, pauli(n).unwrap_or_else(|| panic!("`{n}` is not a Pauli name")))
                .unwrap();
        }
        t
    }

    /// Splits a word into symbol indices. Words over single-character
    /// alphabets may be written without separators; otherwise symbols are
    /// whitespace-separated.
    pub fn parse_word(&self, word: &str) -> Result<Vec<usize>> {
        let single = self.names.iter().all(|n| n.chars().count() == 1);
        if single && !word.contains(char::is_whitespace) {
            word.chars().map(|c| self.index_of(&c.to_string())).collect()
        } else {
            word.split_whitespace().map(|s| self.index_of(s)).collect()
        }
    }

    pub fn format_word(&self, word: &[usize]) -> String {
        let single = self.names.iter().all(|n| n.chars().count() == 1);
        let parts: Vec<&str> = word.iter().map(|&k| self.names[k].as_str()).collect();
        if single {
            parts.concat()
        } else {
            parts.join(" ")
        }
    }
}

pub fn pauli(name: &str) -> Option<DMatrix<C64>> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let m = match name {
        "I" => [o, z, z, o],
        "X" => [z, o, o, z],
        "Y" => [z, -i, i, z],
        "Z" => [o, z, z, -o],
        _ => return None,
    };
    Some(DMatrix::from_row_slice(2, 2, &m))
}

/// A complex-weighted finite automaton. The alphabet is the symbol table's
/// name list; `weights[a]` is the `|Q| × |Q|` matrix of symbol `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAutomaton {
    states: Vec<String>,
    weights: Vec<DMatrix<C64>>,
    initial: DVector<C64>,
    accept: DVector<C64>,
    symbols: SymbolTable,
}

impl WeightedAutomaton {
    pub fn new(
        states: Vec<String>,
        weights: Vec<DMatrix<C64>>,
        initial: DVector<C64>,
        accept: DVector<C64>,
        symbols: SymbolTable,
    ) -> Result<Self> {
        let q = states.len();
        if q == 0 {
            return Err(Error::Precondition("an automaton needs at least one state".into()));
        }
        if weights.len() != symbols.len() {
            return Err(Error::Composition(format!(
                "{} weight matrices for {} symbols",
                weights.len(),
                symbols.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| w.shape() != (q, q)) {
            return Err(Error::Dimension(format!("weight matrix is {:?}, |Q| = {q}", w.shape())));
        }
        if initial.len() != q || accept.len() != q {
            return Err(Error::Dimension("boundary vectors must have length |Q|".into()));
        }
        Ok(Self { states, weights, initial, accept, symbols })
    }

    pub fn builder(symbols: SymbolTable) -> AutomatonBuilder {
        AutomatonBuilder { symbols, states: Vec::new(), edges: Vec::new(), initial: Vec::new(), accept: Vec::new() }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn alphabet(&self) -> &[String] {
        self.symbols.names()
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn weight(&self, symbol: usize) -> &DMatrix<C64> {
        &self.weights[symbol]
    }

    pub fn initial(&self) -> &DVector<C64> {
        &self.initial
    }

    pub fn accept(&self) -> &DVector<C64> {
        &self.accept
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    fn check_word(&self, word: &[usize]) -> Result<()> {
        if word.is_empty() {
            return Err(Error::Precondition("word must contain at least one symbol".into()));
        }
        if let Some(&bad) = word.iter().find(|&&a| a >= self.symbols.len()) {
            return Err(Error::Symbol(format!("#{bad}")));
        }
        Ok(())
    }

    /// `α · W_{a₀} ⋯ W_{a_N} · Ω` for a word of symbol indices.
    pub fn evaluate(&self, word: &[usize]) -> Result<C64> {
        self.check_word(word)?;
        let mut row = self.initial.transpose();
        for &a in word {
            row *= &self.weights[a];
        }
        Ok((row * &self.accept)[(0, 0)])
    }

    pub fn evaluate_str(&self, word: &str) -> Result<C64> {
        self.evaluate(&self.symbols.parse_word(word)?)
    }

    /// `tr(W_{a₀} ⋯ W_{a_N})`.
    pub fn evaluate_periodic(&self, word: &[usize]) -> Result<C64> {
        self.check_word(word)?;
        let q = self.num_states();
        let mut m = DMatrix::<C64>::identity(q, q);
        for &a in word {
            m *= &self.weights[a];
        }
        Ok(m.trace())
    }

    pub fn evaluate_periodic_str(&self, word: &str) -> Result<C64> {
        self.evaluate_periodic(&self.symbols.parse_word(word)?)
    }

    /// Direct sum: outputs add pointwise.
    pub fn sum(&self, other: &WeightedAutomaton) -> Result<WeightedAutomaton> {
        if self.symbols != other.symbols {
            return Err(Error::Composition("automata use different alphabets or symbol realizations".into()));
        }
        let (p, q) = (self.num_states(), other.num_states());
        let mut states: Vec<String> = self.states.iter().map(|s| format!("a.{s}")).collect();
        states.extend(other.states.iter().map(|s| format!("b.{s}")));
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| {
                let mut m = DMatrix::zeros(p + q, p + q);
                m.view_mut((0, 0), (p, p)).copy_from(a);
                m.view_mut((p, p), (q, q)).copy_from(b);
                m
            })
            .collect();
        let cat = |x: &DVector<C64>, y: &DVector<C64>| DVector::from_iterator(p + q, x.iter().chain(y.iter()).copied());
        WeightedAutomaton::new(
            states,
            weights,
            cat(&self.initial, &other.initial),
            cat(&self.accept, &other.accept),
            self.symbols.clone(),
        )
    }

    /// Re-expresses the automaton over a larger symbol table. Symbols it
    /// already knows must have identical realizations; new symbols get zero
    /// weight.
    pub fn extend_alphabet(&self, symbols: &SymbolTable) -> Result<WeightedAutomaton> {
        if symbols.kind() != self.symbols.kind() || symbols.dim() != self.symbols.dim() {
            return Err(Error::Composition("symbol tables differ in kind or dimension".into()));
        }
        let q = self.num_states();
        let mut weights = vec![DMatrix::zeros(q, q); symbols.len()];
        for (a, name) in self.symbols.names().iter().enumerate() {
            let b = symbols.index_of(name).map_err(|_| {
                Error::Composition(format!("symbol `{name}` missing from the extended table"))
            })?;
            if symbols.value(b) != self.symbols.value(a) {
                return Err(Error::Composition(format!("symbol `{name}` is realized differently")));
            }
            weights[b] = self.weights[a].clone();
        }
        WeightedAutomaton::new(
            self.states.clone(),
            weights,
            self.initial.clone(),
            self.accept.clone(),
            symbols.clone(),
        )
    }

    /// Multiplies every output by `c` (through `α` only).
    pub fn scale(&self, c: C64) -> WeightedAutomaton {
        let mut out = self.clone();
        out.initial *= c;
        out
    }

    /// True when all weights are 0 or 1 and every row of every `W_a`, and
    /// `α`, has exactly one nonzero entry.
    pub fn is_deterministic(&self) -> bool {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let binary = |z: &C64| *z == zero || *z == one;
        let entries_binary = self.weights.iter().all(|w| w.iter().all(binary))
            && self.initial.iter().all(binary)
            && self.accept.iter().all(binary);
        let rows_single = self
            .weights
            .iter()
            .all(|w| w.row_iter().all(|r| r.iter().filter(|z| **z != zero).count() == 1));
        let alpha_single = self.initial.iter().filter(|z| **z != zero).count() == 1;
        entries_binary && rows_single && alpha_single
    }

    /// GraphViz DOT text: one node per state, one edge per nonzero weight
    /// entry labeled `symbol/weight`. Initial and accepting weights are shown
    /// as node attributes.
    pub fn to_dot(&self) -> String {
        let zero = C64::new(0.0, 0.0);
        let mut out = String::from("digraph automaton {\n    rankdir=LR;\n");
        for (k, s) in self.states.iter().enumerate() {
            let mut attrs = Vec::new();
            let shape = if self.accept[k] != zero { "doublecircle" } else { "circle" };
            attrs.push(format!("shape={shape}"));
            let mut marks = Vec::new();
            if self.initial[k] != zero {
                attrs.push("style=bold".to_string());
                marks.push(format!("start/{}", format_complex(self.initial[k])));
            }
            if self.accept[k] != zero {
                marks.push(format!("final/{}", format_complex(self.accept[k])));
            }
            if !marks.is_empty() {
                attrs.push(format!("xlabel=\"{}\"", marks.join(" ")));
            }
            let _ = writeln!(out, "    \"{}\" [{}];", escape(s), attrs.join(", "));
        }
        for (a, w) in self.weights.iter().enumerate() {
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    if w[(i, j)] != zero {
                        let _ = writeln!(
                            out,
                            "    \"{}\" -> \"{}\" [label=\"{}/{}\"];",
                            escape(&self.states[i]),
                            escape(&self.states[j]),
                            escape(&self.symbols.names()[a]),
                            format_complex(w[(i, j)])
                        );
                    }
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Incremental construction by named states and edges.
#[derive(Debug, Clone)]
pub struct AutomatonBuilder {
    symbols: SymbolTable,
    states: Vec<String>,
    edges: Vec<(String, String, String, C64)>,
    initial: Vec<(String, C64)>,
    accept: Vec<(String, C64)>,
}

impl AutomatonBuilder {
    pub fn state(mut self, name: &str) -> Self {
        self.states.push(name.to_string());
        self
    }

    pub fn states(mut self, names: &[&str]) -> Self {
        self.states.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn edge(mut self, from: &str, to: &str, symbol: &str, weight: C64) -> Self {
        self.edges.push((from.into(), to.into(), symbol.into(), weight));
        self
    }

    pub fn initial(mut self, state: &str, weight: C64) -> Self {
        self.initial.push((state.into(), weight));
        self
    }

    pub fn accept(mut self, state: &str, weight: C64) -> Self {
        self.accept.push((state.into(), weight));
        self
    }

    pub fn build(self) -> Result<WeightedAutomaton> {
        let q = self.states.len();
        for (k, s) in self.states.iter().enumerate() {
            if self.states[..k].contains(s) {
                return Err(Error::Composition(format!("state `{s}` defined twice")));
            }
        }
        let idx = |name: &str| {
            self.states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::Composition(format!("unknown state `{name}`")))
        };
        let mut weights = vec![DMatrix::<C64>::zeros(q, q); self.symbols.len()];
        for (from, to, sym, w) in &self.edges {
            let a = self.symbols.index_of(sym)?;
            weights[a][(idx(from)?, idx(to)?)] += *w;
        }
        let mut initial = DVector::zeros(q);
        for (s, w) in &self.initial {
            initial[idx(s)?] += *w;
        }
        let mut accept = DVector::zeros(q);
        for (s, w) in &self.accept {
            accept[idx(s)?] += *w;
        }
        WeightedAutomaton::new(self.states, weights, initial, accept, self.symbols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn w_automaton_outputs() {
        let w = corpus::w_state();
        assert_eq!(w.evaluate_str("0100").unwrap(), re(1.0));
        assert_eq!(w.evaluate_str("0110").unwrap(), re(0.0));
        assert_eq!(w.evaluate_str("0000").unwrap(), re(0.0));
    }

    #[test]
    fn unit_automaton_is_always_one() {
        let u = corpus::unit(SymbolTable::qubit_basis());
        for word in ["0", "1", "0110", "11111"] {
            assert_eq!(u.evaluate_str(word).unwrap(), re(1.0));
            assert_eq!(u.evaluate_periodic_str(word).unwrap(), re(1.0));
        }
        assert!(u.is_deterministic());
    }

    #[test]
    fn ends_in_two_equal_symbols() {
        let d = corpus::ends_in_two_equal();
        assert_eq!(d.evaluate_str("100").unwrap(), re(1.0));
        assert_eq!(d.evaluate_str("10").unwrap(), re(0.0));
        assert_eq!(d.evaluate_str("0011").unwrap(), re(1.0));
        assert!(d.is_deterministic());
    }

    #[test]
    fn w_automaton_is_not_deterministic() {
        assert!(!corpus::w_state().is_deterministic());
    }

    #[test]
    fn errors() {
        let w = corpus::w_state();
        assert!(matches!(w.evaluate_str("012"), Err(Error::Symbol(_))));
        assert!(matches!(w.evaluate(&[]), Err(Error::Precondition(_))));
        let field = corpus::magnetic_field();
        assert!(matches!(w.sum(&field), Err(Error::Composition(_))));
    }

    #[test]
    fn periodic_w_on_all_zeros() {
        // W_0 = [[1,0],[0,1]] so the trace of its fourth power is 2
        let w = corpus::w_state();
        let w0 = w.weight(0);
        let oracle = (w0 * w0 * w0 * w0).trace();
        assert_eq!(w.evaluate_periodic_str("0000").unwrap(), oracle);
        assert_eq!(oracle, re(2.0));
    }

    #[test]
    fn cyclic_pairs_rotation() {
        let a = corpus::cyclic_pairs();
        assert_eq!(a.evaluate_periodic_str("1100").unwrap(), a.evaluate_periodic_str("0011").unwrap());
        assert_eq!(a.evaluate_periodic_str("1001").unwrap(), re(1.0));
    }

    #[test]
    fn scale_and_sum() {
        let w = corpus::w_state();
        assert_eq!(w.scale(re(-2.0)).evaluate_str("0100").unwrap(), re(-2.0));
        assert_eq!(w.scale(re(0.0)).evaluate_str("0100").unwrap(), re(0.0));
        let ww = w.sum(&w).unwrap();
        assert_eq!(ww.num_states(), 4);
        assert_eq!(ww.evaluate_str("0010").unwrap(), re(2.0));
    }

    #[test]
    fn dot_export() {
        let u = corpus::unit(SymbolTable::qubit_basis());
        let dot = u.to_dot();
        assert_eq!(dot.lines().filter(|l| l.contains('[') && !l.contains("->")).count(), 1);
        assert!(dot.contains("label=\"0/1\""));
        let w = corpus::w_state();
        let nonzero: usize = (0..2).map(|a| w.weight(a).iter().filter(|z| z.norm() > 0.0).count()).sum();
        assert_eq!(w.to_dot().matches("->").count(), nonzero);
        assert_eq!(nonzero, 3);
    }
}

//! Unrolling an automaton into a chain of site tensors.
//!
//! Each site gets a copy of the automaton's states. An edge `p → q` on symbol
//! `a` becomes an entry `(p, a, q)` of the site tensor weighted by `W_a[p, q]`.
//! Open chains contract `α` into the first site and `Ω` into the last, so the
//! bond extents are `(1, |Q|, …, |Q|, 1)`. Periodic chains keep `|Q|` on every
//! bond and close the last one onto the first.
//!
//! The intermediate [`MatrixProductDiagram`] keeps each entry tagged with its
//! symbol, so single sites can be re-realized before the numeric tensors are
//! built. Sites are numbered from 0.

use std::collections::BTreeMap;

use crate::automaton::{SymbolKind, SymbolTable, WeightedAutomaton};
use crate::error::{Error, Result};
use crate::mps::{Boundary, MatrixProductOperator, MatrixProductState, MPO_LABELS, MPS_LABELS};
use crate::tensor::Tensor;
use crate::C64;

/// Site entries keyed by `(left bond, symbol, right bond)`.
pub type SiteEntries = BTreeMap<(usize, usize, usize), C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductDiagram {
    sites: Vec<SiteEntries>,
    bonds: Vec<usize>,
    boundary: Boundary,
    states: Vec<String>,
    symbols: SymbolTable,
}

/// Either realization of a diagram, following the symbol table's kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Realized {
    State(MatrixProductState),
    Operator(MatrixProductOperator),
}

fn check_sites(n_sites: usize) -> Result<()> {
    if n_sites < 1 {
        return Err(Error::Size("a chain needs at least one site".into()));
    }
    Ok(())
}

fn insert(entries: &mut SiteEntries, key: (usize, usize, usize), w: C64) {
    if w != C64::new(0.0, 0.0) {
        *entries.entry(key).or_insert(C64::new(0.0, 0.0)) += w;
    }
}

/// Open-boundary unrolling onto `n_sites` sites.
pub fn unroll(a: &WeightedAutomaton, n_sites: usize) -> Result<MatrixProductDiagram> {
    check_sites(n_sites)?;
    let q = a.num_states();
    let nsym = a.symbols().len();
    let alpha = a.initial();
    let omega = a.accept();
    let mut sites = Vec::with_capacity(n_sites);
    for k in 0..n_sites {
        let first = k == 0;
        let last = k + 1 == n_sites;
        let mut entries = SiteEntries::new();
        for s in 0..nsym {
            let w = a.weight(s);
            for p in 0..q {
                for r in 0..q {
                    let wpr = w[(p, r)];
                    if wpr == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let (l, lw) = if first { (0, alpha[p]) } else { (p, C64::new(1.0, 0.0)) };
                    let (rr, rw) = if last { (0, omega[r]) } else { (r, C64::new(1.0, 0.0)) };
                    insert(&mut entries, (l, s, rr), lw * wpr * rw);
                }
            }
        }
        sites.push(entries);
    }
    let mut bonds = vec![q; n_sites + 1];
    bonds[0] = 1;
    bonds[n_sites] = 1;
    Ok(MatrixProductDiagram {
        sites,
        bonds,
        boundary: Boundary::Open,
        states: a.states().to_vec(),
        symbols: a.symbols().clone(),
    })
}

/// Periodic unrolling: `α` and `Ω` are replaced by a trace over the wrap bond.
pub fn unroll_periodic(a: &WeightedAutomaton, n_sites: usize) -> Result<MatrixProductDiagram> {
    check_sites(n_sites)?;
    let q = a.num_states();
    let mut site = SiteEntries::new();
    for s in 0..a.symbols().len() {
        let w = a.weight(s);
        for p in 0..q {
            for r in 0..q {
                insert(&mut site, (p, s, r), w[(p, r)]);
            }
        }
    }
    Ok(MatrixProductDiagram {
        sites: vec![site; n_sites],
        bonds: vec![q; n_sites + 1],
        boundary: Boundary::Periodic,
        states: a.states().to_vec(),
        symbols: a.symbols().clone(),
    })
}

impl MatrixProductDiagram {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn bond_extents(&self) -> &[usize] {
        &self.bonds
    }

    pub fn site_entries(&self, k: usize) -> &SiteEntries {
        &self.sites[k]
    }

    /// Product of the symbolic site matrices selected by `word` (trace for
    /// periodic chains).
    pub fn amplitude(&self, word: &[usize]) -> Result<C64> {
        if word.len() != self.len() {
            return Err(Error::Shape(format!("word of length {} for {} sites", word.len(), self.len())));
        }
        if let Some(&bad) = word.iter().find(|&&a| a >= self.symbols.len()) {
            return Err(Error::Symbol(format!("#{bad}")));
        }
        let mut m = nalgebra::DMatrix::<C64>::identity(self.bonds[0], self.bonds[0]);
        for (k, &a) in word.iter().enumerate() {
            let mut w = nalgebra::DMatrix::<C64>::zeros(self.bonds[k], self.bonds[k + 1]);
            for (&(l, s, r), &x) in &self.sites[k] {
                if s == a {
                    w[(l, r)] += x;
                }
            }
            m *= w;
        }
        Ok(m.trace())
    }

    fn check_edit(&self, site: usize, from: &str, to: &str) -> Result<(usize, usize)> {
        if site >= self.len() {
            return Err(Error::Range(format!("site {site} of {}", self.len())));
        }
        let f = self.symbols.index_of(from)?;
        let t = self.symbols.index_of(to)?;
        Ok((f, t))
    }

    fn retag(&self, site: usize, f: usize, t: usize, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let (moved, stay): (Vec<_>, Vec<_>) =
            self.sites[site].iter().partition(|(&(l, s, _), _)| s == f && keep(l));
        if moved.is_empty() {
            return Err(Error::Edit(format!(
                "site {site} has no selected entry on symbol `{}`",
                self.symbols.names()[f]
            )));
        }
        let mut entries = SiteEntries::new();
        for (&k, &w) in stay {
            insert(&mut entries, k, w);
        }
        for (&(l, _, r), &w) in moved {
            insert(&mut entries, (l, t, r), w);
        }
        let mut out = self.clone();
        out.sites[site] = entries;
        Ok(out)
    }

    /// At `site` only, re-realizes every entry on symbol `from` with `to`.
    /// Bond structure and weights are unchanged.
    pub fn edit_site(&self, site: usize, from: &str, to: &str) -> Result<Self> {
        let (f, t) = self.check_edit(site, from, to)?;
        self.retag(site, f, t, |_| true)
    }

    /// As [`edit_site`](Self::edit_site), restricted to entries leaving the
    /// automaton state `from_state`. Not available on the first site of an
    /// open chain, whose left bond is the absorbed `α`.
    pub fn edit_site_from_state(&self, site: usize, from: &str, to: &str, from_state: &str) -> Result<Self> {
        let (f, t) = self.check_edit(site, from, to)?;
        if site == 0 && self.boundary == Boundary::Open {
            return Err(Error::Edit("the first open site has no incoming automaton state".into()));
        }
        let p = self
            .states
            .iter()
            .position(|s| s == from_state)
            .ok_or_else(|| Error::Edit(format!("unknown state `{from_state}`")))?;
        self.retag(site, f, t, |l| l == p)
    }

    pub fn realize(&self) -> Result<Realized> {
        match self.symbols.kind() {
            SymbolKind::State => self.to_mps().map(Realized::State),
            SymbolKind::Operator => self.to_mpo().map(Realized::Operator),
        }
    }

    pub fn to_mps(&self) -> Result<MatrixProductState> {
        if self.symbols.kind() != SymbolKind::State {
            return Err(Error::Composition("operator symbols realize an MPO".into()));
        }
        let d = self.symbols.dim();
        let sites = (0..self.len())
            .map(|k| {
                let mut t = Tensor::zeros(MPS_LABELS, vec![self.bonds[k], d, self.bonds[k + 1]])?;
                for (&(l, s, r), &w) in &self.sites[k] {
                    let ket = self.symbols.value(s);
                    for p in 0..d {
                        let v = t.get(&[l, p, r]) + w * ket[(p, 0)];
                        t.set(&[l, p, r], v);
                    }
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixProductState::new(sites, self.boundary)
    }

    pub fn to_mpo(&self) -> Result<MatrixProductOperator> {
        if self.symbols.kind() != SymbolKind::Operator {
            return Err(Error::Composition("state symbols realize an MPS".into()));
        }
        let d = self.symbols.dim();
        let sites = (0..self.len())
            .map(|k| {
                let mut t = Tensor::zeros(MPO_LABELS, vec![self.bonds[k], d, d, self.bonds[k + 1]])?;
                for (&(l, s, r), &w) in &self.sites[k] {
                    let m = self.symbols.value(s);
                    for o in 0..d {
                        for i in 0..d {
                            let v = t.get(&[l, o, i, r]) + w * m[(o, i)];
                            t.set(&[l, o, i, r], v);
                        }
                    }
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixProductOperator::new(sites, self.boundary)
    }
}

//! Brute-force dense references for checking the fast paths at small sizes.
//!
//! Configurations are indexed row-major with site 0 most significant, which
//! matches the Kronecker product order `A₀ ⊗ A₁ ⊗ ⋯`. Every routine has a hard
//! size guard.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::automaton::WeightedAutomaton;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mps::{MatrixProductOperator, MatrixProductState};
use crate::C64;

pub const MAX_DENSE_STATE_SITES: usize = 16;
pub const MAX_DENSE_OPERATOR_SITES: usize = 10;
pub const MAX_SPARSE_OPERATOR_SITES: usize = 20;
pub const MAX_ENUMERATED_WORDS: usize = 1 << 20;

const ZERO: C64 = C64::new(0.0, 0.0);

fn guard(what: &str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Size(format!("{what} on {n} sites exceeds the limit of {cap}")));
    }
    Ok(())
}

/// Digits of `index` in base `base`, most significant first.
pub fn digits(mut index: usize, base: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = index % base;
        index /= base;
    }
    out
}

/// Row-major index of a configuration.
pub fn index_of(config: &[usize], base: usize) -> usize {
    config.iter().fold(0, |acc, &c| acc * base + c)
}

/// `m₀ ⊗ m₁ ⊗ ⋯`.
pub fn kron_chain(ms: &[DMatrix<C64>]) -> DMatrix<C64> {
    ms.iter().fold(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)), |acc, m| acc.kronecker(m))
}

/// Amplitude vector of length `d^n` by prefix contraction.
pub fn dense_state(s: &MatrixProductState) -> Result<DVector<C64>> {
    guard("dense state", s.len(), MAX_DENSE_STATE_SITES)?;
    let d = s.d();
    let l0 = s.site(0).dims()[0];
    // rows: (prefix, first-left bond); columns: current right bond
    let mut acc = DMatrix::<C64>::from_fn(l0, l0, |a, b| if a == b { C64::new(1.0, 0.0) } else { ZERO });
    for site in s.sites() {
        let (l, r) = (site.dims()[0], site.dims()[2]);
        let prefixes = acc.nrows() / l0;
        let mut next = DMatrix::<C64>::zeros(prefixes * d * l0, r);
        for pre in 0..prefixes {
            for a in 0..l0 {
                let row = acc.row(pre * l0 + a);
                for p in 0..d {
                    for b in 0..r {
                        let mut v = ZERO;
                        for m in 0..l {
                            v += row[m] * site.get(&[m, p, b]);
                        }
                        next[((pre * d + p) * l0 + a, b)] = v;
                    }
                }
            }
        }
        acc = next;
    }
    let configs = acc.nrows() / l0;
    Ok(DVector::from_fn(configs, |c, _| (0..l0).map(|a| acc[(c * l0 + a, a)]).sum()))
}

/// `d^n × d^n` matrix of an operator chain, element by element.
pub fn dense_operator(m: &MatrixProductOperator) -> Result<DMatrix<C64>> {
    guard("dense operator", m.len(), MAX_DENSE_OPERATOR_SITES)?;
    let sparse = sparse_entries(m)?;
    let dim = m.d().pow(m.len() as u32);
    let mut out = DMatrix::zeros(dim, dim);
    for ((r, c), v) in sparse {
        out[(r, c)] = v;
    }
    Ok(out)
}

/// Nonzero matrix elements `((row, col), value)` of an operator chain,
/// sorted by position. Prefixes whose partial bond vector vanishes are
/// dropped, so the work tracks the number of nonzero elements.
pub fn sparse_operator(m: &MatrixProductOperator) -> Result<Vec<((usize, usize), C64)>> {
    guard("sparse operator", m.len(), MAX_SPARSE_OPERATOR_SITES)?;
    let mut v = sparse_entries(m)?;
    v.sort_by_key(|e| e.0);
    Ok(v)
}

fn sparse_entries(m: &MatrixProductOperator) -> Result<Vec<((usize, usize), C64)>> {
    let d = m.d();
    let l0 = m.site(0).dims()[0];
    // (row prefix, col prefix, first-left bond) → partial product over the current right bond
    let mut frontier: HashMap<(usize, usize, usize), Vec<C64>> = HashMap::new();
    for a in 0..l0 {
        let mut e = vec![ZERO; l0];
        e[a] = C64::new(1.0, 0.0);
        frontier.insert((0, 0, a), e);
    }
    for site in m.sites() {
        let (l, r) = (site.dims()[0], site.dims()[3]);
        let mut next = HashMap::with_capacity(frontier.len() * 2);
        for (&(row, col, a), vec) in &frontier {
            for o in 0..d {
                for i in 0..d {
                    let mut out = vec![ZERO; r];
                    let mut any = false;
                    for (b, slot) in out.iter_mut().enumerate() {
                        let mut v = ZERO;
                        for (k, &x) in vec.iter().enumerate().take(l) {
                            if x != ZERO {
                                v += x * site.get(&[k, o, i, b]);
                            }
                        }
                        any |= v != ZERO;
                        *slot = v;
                    }
                    if any {
                        next.insert((row * d + o, col * d + i, a), out);
                    }
                }
            }
        }
        frontier = next;
    }
    let mut acc: HashMap<(usize, usize), C64> = HashMap::new();
    for ((row, col, a), vec) in frontier {
        *acc.entry((row, col)).or_insert(ZERO) += vec[a];
    }
    Ok(acc.into_iter().filter(|(_, v)| *v != ZERO).collect())
}

/// Minimum eigenpair of a Hermitian matrix by full diagonalization.
pub fn exact_ground(h: &DMatrix<C64>) -> Result<(f64, DVector<C64>)> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::Shape(format!("matrix is {:?}", h.shape())));
    }
    let scale = h.camax().max(1.0);
    let dev = (h - h.adjoint()).camax();
    if dev > 1e-10 * scale {
        return Err(Error::Hermiticity(format!("‖H − H†‖_max = {dev:e}")));
    }
    let eig = nalgebra::SymmetricEigen::new((h + h.adjoint()).scale(0.5));
    let k = eig.eigenvalues.argmin().0;
    Ok((eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
}

/// `evaluate(a, w)` for every word of length `n`, row-major over the
/// alphabet order.
pub fn enumerate_words(a: &WeightedAutomaton, n: usize) -> Result<Vec<C64>> {
    enumerate_words_with(a, n, Execution::default())
}

pub fn enumerate_words_with(a: &WeightedAutomaton, n: usize, exec: Execution) -> Result<Vec<C64>> {
    let base = a.symbols().len();
    let total = (base as f64).powi(n as i32);
    if total > MAX_ENUMERATED_WORDS as f64 {
        return Err(Error::Size(format!("{base}^{n} words exceed the limit of 2^20")));
    }
    if n == 0 {
        return Err(Error::Precondition("words must have at least one symbol".into()));
    }
    exec.map_range(total as usize, |k| a.evaluate(&digits(k, base, n))).into_iter().collect()
}

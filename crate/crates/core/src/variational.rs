//! One-site variational ground-state search on open chains.
//!
//! The cache holds left environments `L_k` (sites `< k` absorbed) and right
//! environments `R_k` (sites `> k` absorbed) for both the Hamiltonian and the
//! identity operator. Changing site `k` invalidates `L_j` for `j > k` and
//! `R_j` for `j < k`. An *absorption* is one site folded into one side's
//! environment pair; the counters make the amortized cost observable.
//!
//! Sites are numbered from 0. The local problem at site `k` is the pencil
//! `(ℋ, 𝒩)` with row labels `(bl, bp, br)` on the conjugated side and column
//! labels `(l, p, r)`, so eigenvectors drop straight into the chain.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::gen_eig_smallest;
use crate::mps::{
    absorb_left, absorb_right, expectation, inner, transfer_matrix, unit_environment, Boundary, MatrixProductOperator,
    MatrixProductState, MPS_LABELS,
};
use crate::tensor::{contract, Tensor};
use crate::C64;

/// Hamiltonian and metric environments for one side of one site.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub h: Tensor,
    pub n: Tensor,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub absorptions: u64,
    pub multiply_adds: u64,
}

fn identity_site(d: usize) -> Tensor {
    Tensor::from_fn(["l", "o", "i", "r"], vec![1, d, d, 1], |i| C64::new((i[1] == i[2]) as u8 as f64, 0.0)).unwrap()
}

fn check_pair(op: &MatrixProductOperator, s: &MatrixProductState) -> Result<()> {
    if op.len() != s.len() || op.d() != s.d() {
        return Err(Error::Shape(format!(
            "operator ({} sites, d={}) and state ({} sites, d={}) differ",
            op.len(),
            op.d(),
            s.len(),
            s.d()
        )));
    }
    if op.boundary() != Boundary::Open || s.boundary() != Boundary::Open {
        return Err(Error::Precondition("variational search runs on open chains".into()));
    }
    Ok(())
}

pub struct EnvironmentCache<'a> {
    op: &'a MatrixProductOperator,
    state: MatrixProductState,
    ident: Tensor,
    left: Vec<Option<Environment>>,
    right: Vec<Option<Environment>>,
    counters: Counters,
}

impl<'a> EnvironmentCache<'a> {
    pub fn new(op: &'a MatrixProductOperator, state: MatrixProductState) -> Result<Self> {
        check_pair(op, &state)?;
        let n = state.len();
        let unit = Environment { h: unit_environment(), n: unit_environment() };
        let mut left = vec![None; n];
        let mut right = vec![None; n];
        left[0] = Some(unit.clone());
        right[n - 1] = Some(unit);
        Ok(Self { op, ident: identity_site(state.d()), state, left, right, counters: Counters::default() })
    }

    pub fn state(&self) -> &MatrixProductState {
        &self.state
    }

    pub fn into_state(self) -> MatrixProductState {
        self.state
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.len() {
            return Err(Error::Range(format!("site {site} of {}", self.len())));
        }
        Ok(())
    }

    /// Marks site `k` as changed.
    pub fn invalidate(&mut self, k: usize) {
        for j in k + 1..self.len() {
            self.left[j] = None;
        }
        for j in 0..k.min(self.len()) {
            self.right[j] = None;
        }
    }

    /// Replaces site `k` and invalidates the environments that saw it.
    pub fn set_site(&mut self, k: usize, t: Tensor) -> Result<()> {
        self.check_site(k)?;
        self.state.set_site(k, t)?;
        self.invalidate(k);
        Ok(())
    }

    fn absorb(&mut self, env: &Environment, k: usize, from_left: bool) -> Result<Environment> {
        let s = self.state.site(k);
        let (eh, c1) = transfer_matrix(s, self.op.site(k), s)?;
        let (en, c2) = transfer_matrix(s, &self.ident, s)?;
        let step = if from_left { absorb_left } else { absorb_right };
        let (h, c3) = step(&env.h, &eh)?;
        let (n, c4) = step(&env.n, &en)?;
        self.counters.absorptions += 1;
        self.counters.multiply_adds += c1 + c2 + c3 + c4;
        Ok(Environment { h, n })
    }

    /// `L_site`, computed from the nearest valid left environment.
    pub fn env_left(&mut self, site: usize) -> Result<&Environment> {
        self.check_site(site)?;
        let start = (0..=site).rev().find(|&j| self.left[j].is_some()).unwrap_or(0);
        for j in start..site {
            let env = self.left[j].clone().expect("valid by construction");
            self.left[j + 1] = Some(self.absorb(&env, j, true)?);
        }
        Ok(self.left[site].as_ref().expect("just computed"))
    }

    /// `R_site`, computed from the nearest valid right environment.
    pub fn env_right(&mut self, site: usize) -> Result<&Environment> {
        self.check_site(site)?;
        let n = self.len();
        let start = (site..n).find(|&j| self.right[j].is_some()).unwrap_or(n - 1);
        for j in (site + 1..=start).rev() {
            let env = self.right[j].clone().expect("valid by construction");
            self.right[j - 1] = Some(self.absorb(&env, j, false)?);
        }
        Ok(self.right[site].as_ref().expect("just computed"))
    }

    /// `(ℋ, 𝒩)` at `site` from cached environments.
    pub fn local_problem(&mut self, site: usize) -> Result<(Tensor, Tensor)> {
        let l = self.env_left(site)?.clone();
        let r = self.env_right(site)?.clone();
        let h = local_from_envs(&l.h, self.op.site(site), &r.h)?;
        let n = local_from_envs(&l.n, &self.ident, &r.n)?;
        Ok((h, n))
    }

    /// Replaces `site` by the smallest generalized eigenvector of its local
    /// problem and returns `(λ, residual)`.
    pub fn optimize_site(&mut self, site: usize, tol: f64) -> Result<(f64, f64)> {
        let (h, n) = self.local_problem(site)?;
        let pair = gen_eig_smallest(&h, &n, tol)?;
        self.set_site(site, pair.vector.permute(&MPS_LABELS)?)?;
        Ok((pair.value, pair.residual))
    }
}

fn local_from_envs(l: &Tensor, op: &Tensor, r: &Tensor) -> Result<Tensor> {
    let l = l.clone().relabel(&[("b", "bl"), ("o", "ol"), ("k", "l")])?;
    let o = op.clone().relabel(&[("l", "ol"), ("o", "bp"), ("i", "p"), ("r", "or")])?;
    let r = r.clone().relabel(&[("b", "br"), ("o", "or"), ("k", "r")])?;
    let lo = contract(&l, &o, &[("ol", "ol")])?;
    let lor = contract(&lo, &r, &[("or", "or")])?;
    lor.permute(&["bl", "bp", "br", "l", "p", "r"])
}

/// `(ℋ, 𝒩)` at `site` with both environments rebuilt from scratch.
pub fn local_problem_uncached(
    op: &MatrixProductOperator,
    s: &MatrixProductState,
    site: usize,
) -> Result<(Tensor, Tensor)> {
    check_pair(op, s)?;
    let mut cache = EnvironmentCache::new(op, s.clone())?;
    cache.local_problem(site)
}

/// Moves the non-isometric part of site `k` into site `k + 1` by QR. The
/// represented state is unchanged. Skipped when the bond cannot hold a full
/// isometry.
fn shift_right(cache: &mut EnvironmentCache, k: usize) -> Result<()> {
    let s = cache.state.site(k);
    let m = s.to_matrix(&["l", "p"], &["r"])?;
    if m.nrows() < m.ncols() {
        return Ok(());
    }
    let qr = m.qr();
    let (q, r) = (qr.q(), qr.r());
    let (l, d, b) = (s.dims()[0], s.dims()[1], s.dims()[2]);
    let qt = Tensor::from_matrix(&q, &[("l", l), ("p", d)], &[("r", b)])?;
    let rt = Tensor::from_matrix(&r, &[("x", b)], &[("l", b)])?;
    let next = contract(&rt, cache.state.site(k + 1), &[("l", "l")])?.relabel(&[("x", "l")])?;
    cache.set_site(k, qt)?;
    cache.set_site(k + 1, next)
}

/// Mirror of [`shift_right`] through an LQ factorization of site `k`.
fn shift_left(cache: &mut EnvironmentCache, k: usize) -> Result<()> {
    let s = cache.state.site(k);
    let m = s.to_matrix(&["l"], &["p", "r"])?;
    if m.ncols() < m.nrows() {
        return Ok(());
    }
    let qr = m.adjoint().qr();
    let (q, r) = (qr.q().adjoint(), qr.r().adjoint());
    let (b, d, rr) = (s.dims()[0], s.dims()[1], s.dims()[2]);
    let qt = Tensor::from_matrix(&q, &[("l", b)], &[("p", d), ("r", rr)])?;
    let lt = Tensor::from_matrix(&r, &[("r", b)], &[("x", b)])?;
    let prev = contract(cache.state.site(k - 1), &lt, &[("r", "r")])?.relabel(&[("x", "r")])?;
    cache.set_site(k, qt)?;
    cache.set_site(k - 1, prev)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub sweep: usize,
    pub site: usize,
    pub lambda: f64,
    pub residual: f64,
    /// Site absorptions performed during this step.
    pub absorptions: u64,
    pub multiply_adds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub steps: Vec<StepRecord>,
    /// Last `λ` of each full sweep.
    pub energies: Vec<f64>,
    /// `Re⟨S|H|S⟩ / ⟨S|S⟩` after each full sweep.
    pub global_energies: Vec<f64>,
    pub setup_absorptions: u64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub fn final_energy(&self) -> Option<f64> {
        self.energies.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub max_sweeps: usize,
    /// Convergence threshold on the per-sweep energy change.
    pub tol: f64,
    /// Residual tolerance handed to the local eigensolver.
    pub eig_tol: f64,
    /// Checks the Hermiticity of the dense operator on chains of up to 10
    /// sites and reports violations as warnings.
    pub verify: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { max_sweeps: 20, tol: 1e-10, eig_tol: 1e-8, verify: false }
    }
}

/// Sweeps with default options apart from `max_sweeps` and `tol`.
pub fn sweep(
    h: &MatrixProductOperator,
    s0: &MatrixProductState,
    max_sweeps: usize,
    tol: f64,
) -> Result<(MatrixProductState, SweepReport)> {
    sweep_with(h, s0, &SweepOptions { max_sweeps, tol, ..SweepOptions::default() })
}

/// Alternating one-site sweeps: sites `0 … n−2` left to right, then
/// `n−1 … 1` right to left, until the per-sweep energy changes by less than
/// `tol`. The state is kept in mixed-canonical gauge by QR moves between
/// steps, which touch only the next site to be optimized.
pub fn sweep_with(
    h: &MatrixProductOperator,
    s0: &MatrixProductState,
    opts: &SweepOptions,
) -> Result<(MatrixProductState, SweepReport)> {
    if opts.max_sweeps == 0 {
        return Err(Error::Precondition("max_sweeps must be at least 1".into()));
    }
    check_pair(h, s0)?;
    let mut warnings = Vec::new();
    if opts.verify && h.len() <= crate::oracle::MAX_DENSE_OPERATOR_SITES {
        let dense = crate::oracle::dense_operator(h)?;
        let dev = (&dense - dense.adjoint()).camax();
        if dev > 1e-10 * dense.camax().max(1.0) {
            warnings.push(format!("operator is not Hermitian: ‖H − H†‖_max = {dev:e}"));
        }
    }

    let n = s0.len();
    let mut cache = EnvironmentCache::new(h, s0.clone())?;
    for k in (1..n).rev() {
        shift_left(&mut cache, k)?;
    }
    // environments for site 1; the first step then absorbs site 1 itself
    if n > 1 {
        cache.env_right(1)?;
    }
    let setup_absorptions = cache.counters().absorptions;

    let order: Vec<usize> = if n == 1 { vec![0] } else { (0..n - 1).chain((1..n).rev()).collect() };
    let mut steps = Vec::new();
    let mut energies = Vec::new();
    let mut global_energies = Vec::new();
    let mut converged = false;
    for sweep_no in 0..opts.max_sweeps {
        let mut lambda = f64::NAN;
        for (pos, &k) in order.iter().enumerate() {
            let before = cache.counters();
            let (l, residual) = cache.optimize_site(k, opts.eig_tol)?;
            let after = cache.counters();
            lambda = l;
            steps.push(StepRecord {
                sweep: sweep_no,
                site: k,
                lambda: l,
                residual,
                absorptions: after.absorptions - before.absorptions,
                multiply_adds: after.multiply_adds - before.multiply_adds,
            });
            if n > 1 {
                if pos < n - 1 {
                    shift_right(&mut cache, k)?;
                } else {
                    shift_left(&mut cache, k)?;
                }
            }
        }
        let s = cache.state();
        let num = expectation(s, h, s)?;
        let den = inner(s, s)?;
        global_energies.push((num / den).re);
        let prev = energies.last().copied();
        energies.push(lambda);
        if let Some(p) = prev {
            if (lambda - p).abs() < opts.tol {
                converged = true;
                break;
            }
        }
        if n == 1 && sweep_no == 0 {
            // a single site is solved exactly in one step
            converged = true;
            break;
        }
    }
    let report = SweepReport { steps, energies, global_energies, setup_absorptions, converged, warnings };
    Ok((cache.into_state(), report))
}

/// Dense matrix form of a local pencil tensor: rows `(bl, bp, br)`, columns
/// `(l, p, r)`.
pub fn local_matrix(t: &Tensor) -> Result<DMatrix<C64>> {
    t.to_matrix(&["bl", "bp", "br"], &["l", "p", "r"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::unroll;
    use crate::corpus;
    use crate::oracle::{dense_operator, exact_ground};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, bond: usize, seed: u64) -> MatrixProductState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MatrixProductState::random(n, 2, bond, Boundary::Open, &mut rng).unwrap()
    }

    #[test]
    fn boundary_environments_are_free() {
        let op = MatrixProductOperator::identity(5, 2).unwrap();
        let mut c = EnvironmentCache::new(&op, random_state(5, 3, 1)).unwrap();
        assert_eq!(c.env_left(0).unwrap().h, unit_environment());
        assert_eq!(c.env_right(4).unwrap().h, unit_environment());
        assert_eq!(c.counters().absorptions, 0);
        assert!(matches!(c.env_left(5), Err(Error::Range(_))));
    }

    #[test]
    fn recursion_depth_after_invalidation() {
        let op = MatrixProductOperator::identity(6, 2).unwrap();
        let mut c = EnvironmentCache::new(&op, random_state(6, 3, 2)).unwrap();
        c.env_left(5).unwrap();
        assert_eq!(c.counters().absorptions, 5);
        c.env_left(3).unwrap();
        assert_eq!(c.counters().absorptions, 5, "cached");
        c.invalidate(1);
        c.env_left(4).unwrap();
        assert_eq!(c.counters().absorptions, 8, "sites 1, 2, 3");
    }

    #[test]
    fn identity_hamiltonian_local_forms_coincide() {
        let op = MatrixProductOperator::identity(2, 2).unwrap();
        let mut c = EnvironmentCache::new(&op, random_state(2, 2, 3)).unwrap();
        let (h, n) = c.local_problem(0).unwrap();
        assert!(h.max_abs_diff(&n).unwrap() < 1e-14);
        let (l, _) = c.optimize_site(0, 1e-10).unwrap();
        assert!((l - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_site_is_dense_eigenproblem() {
        let op = unroll(&corpus::magnetic_field(), 1).unwrap().to_mpo().unwrap();
        let (s, rep) = sweep(&op, &random_state(1, 1, 4), 3, 1e-12).unwrap();
        assert!((rep.final_energy().unwrap() + 1.0).abs() < 1e-12);
        assert!(rep.converged);
        assert!(s.amplitude(&[0]).unwrap().norm() < 1e-12);
    }

    #[test]
    fn field_ground_state_in_two_sweeps() {
        for n in [3, 6] {
            let op = unroll(&corpus::magnetic_field(), n).unwrap().to_mpo().unwrap();
            let (_, rep) = sweep(&op, &random_state(n, 2, 5), 2, 1e-10).unwrap();
            assert!((rep.final_energy().unwrap() + n as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_sweeps_rejected() {
        let op = MatrixProductOperator::identity(3, 2).unwrap();
        assert!(matches!(sweep(&op, &random_state(3, 2, 6), 0, 1e-10), Err(Error::Precondition(_))));
    }

    #[test]
    fn verify_flags_non_hermitian_operator() {
        let sym = crate::automaton::SymbolTable::paulis(&["I", "X"]);
        let a = corpus::neighbor_coupling().extend_alphabet(&sym).unwrap().scale(C64::new(0.0, 1.0));
        let op = unroll(&a, 3).unwrap().to_mpo().unwrap();
        let opts = SweepOptions { max_sweeps: 1, verify: true, eig_tol: f64::INFINITY, ..SweepOptions::default() };
        let (_, rep) = sweep_with(&op, &random_state(3, 2, 7), &opts).unwrap();
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn energy_respects_variational_bound() {
        let op = unroll(&corpus::transverse_ising(0.7), 5).unwrap().to_mpo().unwrap();
        let (e0, _) = exact_ground(&dense_operator(&op).unwrap()).unwrap();
        let (_, rep) = sweep(&op, &random_state(5, 4, 8), 10, 1e-12).unwrap();
        let e = rep.final_energy().unwrap();
        assert!(e >= e0 - 1e-9);
        assert!((e - e0).abs() < 1e-9);
    }
}

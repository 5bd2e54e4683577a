//! Matrix product states and operators.
//!
//! MPS site tensors carry labels `(l, p, r)`; MPO site tensors carry
//! `(l, o, i, r)` where `o` is the row (output) index and `i` the column
//! (input) index. Open chains have extent-1 end bonds. Periodic chains close
//! the last right bond onto the first left bond.
//!
//! Transfer matrices group `(bra-bond, op-bond, ket-bond)` on each side, in
//! that order: labels `(lb, lo, lk, rb, ro, rk)`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{contract, contract_cost, Tensor};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

pub const MPS_LABELS: [&str; 3] = ["l", "p", "r"];
pub const MPO_LABELS: [&str; 4] = ["l", "o", "i", "r"];
pub const TRANSFER_LABELS: [&str; 6] = ["lb", "lo", "lk", "rb", "ro", "rk"];

fn check_chain(sites: &[Tensor], labels: &[&str], boundary: Boundary) -> Result<usize> {
    if sites.is_empty() {
        return Err(Error::Shape("a chain needs at least one site".into()));
    }
    for (k, s) in sites.iter().enumerate() {
        if s.labels() != labels {
            return Err(Error::Label(format!("site {k} has labels {:?}, expected {labels:?}", s.labels())));
        }
    }
    let d = sites[0].dims()[1];
    for (k, s) in sites.iter().enumerate() {
        let phys = &s.dims()[1..s.rank() - 1];
        if phys.iter().any(|&x| x != d) {
            return Err(Error::Shape(format!("site {k} has physical extents {phys:?}, d = {d}")));
        }
    }
    for k in 1..sites.len() {
        let left = sites[k - 1].dims()[sites[k - 1].rank() - 1];
        let right = sites[k].dims()[0];
        if left != right {
            return Err(Error::Shape(format!("bond {k}: extents {left} and {right} differ")));
        }
    }
    let first = sites[0].dims()[0];
    let last = *sites[sites.len() - 1].dims().last().unwrap();
    match boundary {
        Boundary::Open if first != 1 || last != 1 => {
            Err(Error::Shape(format!("open chain has end bonds ({first}, {last})")))
        }
        Boundary::Periodic if first != last => {
            Err(Error::Shape(format!("periodic wrap bond extents {last} and {first} differ")))
        }
        _ => Ok(d),
    }
}

/// Extents `min(max_bond, d^k, d^(n-k))` for an open chain, `max_bond`
/// everywhere for a periodic one. Entry `k` is the bond left of site `k`.
pub fn default_bond_extents(n: usize, d: usize, max_bond: usize, boundary: Boundary) -> Vec<usize> {
    (0..=n)
        .map(|k| match boundary {
            Boundary::Periodic => max_bond,
            Boundary::Open => {
                let left = (d as f64).powi(k as i32);
                let right = (d as f64).powi((n - k) as i32);
                (max_bond as f64).min(left).min(right) as usize
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductState {
    sites: Vec<Tensor>,
    boundary: Boundary,
    d: usize,
}

impl MatrixProductState {
    pub fn new(sites: Vec<Tensor>, boundary: Boundary) -> Result<Self> {
        let d = check_chain(&sites, &MPS_LABELS, boundary)?;
        Ok(Self { sites, boundary, d })
    }

    /// Product state from one ket per site.
    pub fn product(kets: &[Vec<C64>]) -> Result<Self> {
        let sites = kets
            .iter()
            .map(|k| Tensor::new(MPS_LABELS, vec![1, k.len(), 1], k.clone()))
            .collect::<Result<_>>()?;
        Self::new(sites, Boundary::Open)
    }

    /// Random site tensors with entries uniform in the unit square
    /// `[0,1) + i[0,1)`.
    pub fn random(n: usize, d: usize, max_bond: usize, boundary: Boundary, rng: &mut impl Rng) -> Result<Self> {
        Self::random_with(n, d, max_bond, boundary, || C64::new(rng.random(), rng.random()))
    }

    /// Random site tensors with entries drawn from `entry`.
    pub fn random_with(
        n: usize,
        d: usize,
        max_bond: usize,
        boundary: Boundary,
        mut entry: impl FnMut() -> C64,
    ) -> Result<Self> {
        if n == 0 || d == 0 || max_bond == 0 {
            return Err(Error::Precondition("sites, dimension and bond must be positive".into()));
        }
        let bonds = default_bond_extents(n, d, max_bond, boundary);
        let sites = (0..n)
            .map(|k| Tensor::from_fn(MPS_LABELS, vec![bonds[k], d, bonds[k + 1]], |_| entry()))
            .collect::<Result<_>>()?;
        Self::new(sites, boundary)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> &Tensor {
        &self.sites[k]
    }

    /// Replaces one site tensor; its bond and physical extents must match.
    pub fn set_site(&mut self, k: usize, t: Tensor) -> Result<()> {
        if k >= self.len() {
            return Err(Error::Range(format!("site {k} of {}", self.len())));
        }
        let t = t.permute(&MPS_LABELS)?;
        if t.dims() != self.sites[k].dims() {
            return Err(Error::Shape(format!(
                "site {k} extents {:?} differ from {:?}",
                t.dims(),
                self.sites[k].dims()
            )));
        }
        self.sites[k] = t;
        Ok(())
    }

    /// Entry `k` is the extent of the bond left of site `k`; the last entry
    /// is the right end bond.
    pub fn bond_extents(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.sites.iter().map(|s| s.dims()[0]).collect();
        b.push(self.sites.last().unwrap().dims()[2]);
        b
    }

    fn site_matrix(&self, k: usize, p: usize) -> DMatrix<C64> {
        let s = &self.sites[k];
        let (l, r) = (s.dims()[0], s.dims()[2]);
        DMatrix::from_fn(l, r, |a, b| s.get(&[a, p, b]))
    }

    /// Amplitude of a configuration of physical indices.
    pub fn amplitude(&self, config: &[usize]) -> Result<C64> {
        if config.len() != self.len() {
            return Err(Error::Shape(format!("configuration of length {} for {} sites", config.len(), self.len())));
        }
        if let Some(&p) = config.iter().find(|&&p| p >= self.d) {
            return Err(Error::Shape(format!("physical index {p} out of range, d = {}", self.d)));
        }
        let mut m = self.site_matrix(0, config[0]);
        for (k, &p) in config.iter().enumerate().skip(1) {
            m *= self.site_matrix(k, p);
        }
        Ok(match self.boundary {
            Boundary::Open => m[(0, 0)],
            Boundary::Periodic => m.trace(),
        })
    }

    /// Applies `x` on the right of site `bond − 1` and `x_inv` on the left
    /// of site `bond`. Requires `x · x_inv = 1` on the original bond space;
    /// rectangular `x` resizes the bond.
    pub fn apply_gauge(&self, bond: usize, x: &DMatrix<C64>, x_inv: &DMatrix<C64>) -> Result<Self> {
        if bond == 0 || bond >= self.len() {
            return Err(Error::Range(format!("bond {bond} is not interior to {} sites", self.len())));
        }
        let extent = self.sites[bond].dims()[0];
        if x.nrows() != extent || x_inv.ncols() != extent || x.ncols() != x_inv.nrows() {
            return Err(Error::Gauge(format!(
                "bond extent {extent} incompatible with X {:?} and X⁻¹ {:?}",
                x.shape(),
                x_inv.shape()
            )));
        }
        let prod = x * x_inv;
        let dev = (prod - DMatrix::<C64>::identity(extent, extent)).camax();
        if dev > 1e-10 {
            return Err(Error::Gauge(format!("X · X⁻¹ deviates from identity by {dev:e}")));
        }
        let new = x.ncols();
        let xt = Tensor::from_matrix(x, &[("r", extent)], &[("x", new)])?;
        let xit = Tensor::from_matrix(x_inv, &[("x", new)], &[("l", extent)])?;
        let left = contract(&self.sites[bond - 1], &xt, &[("r", "r")])?.relabel(&[("x", "r")])?;
        let right = contract(&xit, &self.sites[bond], &[("l", "l")])?.relabel(&[("x", "l")])?;
        let mut sites = self.sites.clone();
        sites[bond - 1] = left;
        sites[bond] = right.permute(&MPS_LABELS)?;
        Self::new(sites, self.boundary)
    }

    /// Re-splits sites `bond − 1` and `bond` by SVD, keeping singular values
    /// strictly above `rel_tol · s_max`.
    pub fn compress_bond(&self, bond: usize, rel_tol: f64) -> Result<Self> {
        if bond == 0 || bond >= self.len() {
            return Err(Error::Range(format!("bond {bond} is not interior to {} sites", self.len())));
        }
        let a = self.sites[bond - 1].clone().relabel(&[("p", "p1")])?;
        let b = self.sites[bond].clone().relabel(&[("p", "p2")])?;
        let theta = contract(&a, &b, &[("r", "l")])?;
        let (u, s, v) = crate::linalg::svd_split(&theta, &["l", "p1"], "k")?;
        let smax = s.first().copied().unwrap_or(0.0);
        let keep = s.iter().filter(|&&x| x > rel_tol * smax).count().max(1);
        let lk = u.dim_of("l")?;
        let rk = v.dim_of("r")?;
        let left = Tensor::from_fn(["l", "p", "r"], vec![lk, self.d, keep], |i| u.get(&[i[0], i[1], i[2]]))?;
        let right = Tensor::from_fn(["l", "p", "r"], vec![keep, self.d, rk], |i| {
            v.get(&[i[0], i[1], i[2]]) * s[i[0]]
        })?;
        let mut sites = self.sites.clone();
        sites[bond - 1] = left;
        sites[bond] = right;
        Self::new(sites, self.boundary)
    }

    fn check_compatible(&self, other: &MatrixProductState) -> Result<()> {
        if self.len() != other.len() || self.d != other.d || self.boundary != other.boundary {
            return Err(Error::Shape(format!(
                "chains differ: ({}, d={}, {:?}) vs ({}, d={}, {:?})",
                self.len(),
                self.d,
                self.boundary,
                other.len(),
                other.d,
                other.boundary
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductOperator {
    sites: Vec<Tensor>,
    boundary: Boundary,
    d: usize,
}

impl MatrixProductOperator {
    pub fn new(sites: Vec<Tensor>, boundary: Boundary) -> Result<Self> {
        let d = check_chain(&sites, &MPO_LABELS, boundary)?;
        Ok(Self { sites, boundary, d })
    }

    pub fn identity(n: usize, d: usize) -> Result<Self> {
        let site = Tensor::from_fn(MPO_LABELS, vec![1, d, d, 1], |i| C64::new((i[1] == i[2]) as u8 as f64, 0.0))?;
        Self::new(vec![site; n], Boundary::Open)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site(&self, k: usize) -> &Tensor {
        &self.sites[k]
    }

    pub fn bond_extents(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.sites.iter().map(|s| s.dims()[0]).collect();
        b.push(self.sites.last().unwrap().dims()[3]);
        b
    }

    /// Operator matrix element for row configuration `out` and column
    /// configuration `inp`.
    pub fn element(&self, out: &[usize], inp: &[usize]) -> Result<C64> {
        if out.len() != self.len() || inp.len() != self.len() {
            return Err(Error::Shape("configuration length differs from chain length".into()));
        }
        let mat = |k: usize| {
            let s = &self.sites[k];
            DMatrix::from_fn(s.dims()[0], s.dims()[3], |a, b| s.get(&[a, out[k], inp[k], b]))
        };
        let mut m = mat(0);
        for k in 1..self.len() {
            m *= mat(k);
        }
        Ok(match self.boundary {
            Boundary::Open => m[(0, 0)],
            Boundary::Periodic => m.trace(),
        })
    }
}

/// `E = Σ conj(bra) · op · ket` over the physical indices, with grouped
/// bonds `(lb, lo, lk)` and `(rb, ro, rk)`. Returns the tensor and its
/// multiply-add count.
pub fn transfer_matrix(bra: &Tensor, op: &Tensor, ket: &Tensor) -> Result<(Tensor, u64)> {
    let b = bra.conj().relabel(&[("l", "lb"), ("p", "o"), ("r", "rb")])?;
    let o = op.clone().relabel(&[("l", "lo"), ("r", "ro")])?;
    let k = ket.clone().relabel(&[("l", "lk"), ("p", "i"), ("r", "rk")])?;
    let c1 = contract_cost(&b, &o, &[("o", "o")])?;
    let bo = contract(&b, &o, &[("o", "o")])?;
    let c2 = contract_cost(&bo, &k, &[("i", "i")])?;
    let e = contract(&bo, &k, &[("i", "i")])?;
    Ok((e.permute(&TRANSFER_LABELS)?, c1 + c2))
}

/// Left boundary for open chains: extent-1 grouped bond `(b, o, k)`.
pub fn unit_environment() -> Tensor {
    Tensor::new(["b", "o", "k"], vec![1, 1, 1], vec![C64::new(1.0, 0.0)]).unwrap()
}

/// Absorbs a transfer matrix into a left environment `(b, o, k)`.
pub fn absorb_left(env: &Tensor, e: &Tensor) -> Result<(Tensor, u64)> {
    let pairs = [("b", "lb"), ("o", "lo"), ("k", "lk")];
    let cost = contract_cost(env, e, &pairs)?;
    let out = contract(env, e, &pairs)?.relabel(&[("rb", "b"), ("ro", "o"), ("rk", "k")])?;
    Ok((out, cost))
}

/// Absorbs a transfer matrix into a right environment `(b, o, k)`.
pub fn absorb_right(env: &Tensor, e: &Tensor) -> Result<(Tensor, u64)> {
    let pairs = [("rb", "b"), ("ro", "o"), ("rk", "k")];
    let cost = contract_cost(e, env, &pairs)?;
    let out = contract(e, env, &pairs)?.relabel(&[("lb", "b"), ("lo", "o"), ("lk", "k")])?;
    Ok((out, cost))
}

/// `⟨bra| op |ket⟩` and the number of scalar multiply-adds spent.
pub fn expectation_counted(
    bra: &MatrixProductState,
    op: &MatrixProductOperator,
    ket: &MatrixProductState,
) -> Result<(C64, u64)> {
    bra.check_compatible(ket)?;
    if op.len() != ket.len() || op.d() != ket.d() || op.boundary() != ket.boundary() {
        return Err(Error::Shape("operator chain does not match the states".into()));
    }
    let mut cost = 0u64;
    match ket.boundary() {
        Boundary::Open => {
            let mut env = unit_environment();
            for k in 0..ket.len() {
                let (e, c) = transfer_matrix(bra.site(k), op.site(k), ket.site(k))?;
                let (next, c2) = absorb_left(&env, &e)?;
                env = next;
                cost += c + c2;
            }
            Ok((env.scalar_value()?, cost))
        }
        Boundary::Periodic => {
            // carry (first-left bonds, current-right bonds) and close with a trace
            let (first, c) = transfer_matrix(bra.site(0), op.site(0), ket.site(0))?;
            cost += c;
            let mut acc = first;
            for k in 1..ket.len() {
                let (e, c) = transfer_matrix(bra.site(k), op.site(k), ket.site(k))?;
                let pairs = [("rb", "lb"), ("ro", "lo"), ("rk", "lk")];
                cost += c + contract_cost(&acc, &e, &pairs)?;
                acc = contract(&acc, &e, &pairs)?;
            }
            let t = acc.trace("lb", "rb")?.trace("lo", "ro")?.trace("lk", "rk")?;
            Ok((t.scalar_value()?, cost))
        }
    }
}

pub fn expectation(bra: &MatrixProductState, op: &MatrixProductOperator, ket: &MatrixProductState) -> Result<C64> {
    expectation_counted(bra, op, ket).map(|r| r.0)
}

/// `Σ_w conj(bra(w)) · ket(w)` by bond contraction.
pub fn inner(bra: &MatrixProductState, ket: &MatrixProductState) -> Result<C64> {
    bra.check_compatible(ket)?;
    let site = |k: usize| -> Result<Tensor> {
        let b = bra.site(k).conj().relabel(&[("l", "lb"), ("r", "rb")])?;
        let kk = ket.site(k).clone().relabel(&[("l", "lk"), ("r", "rk")])?;
        contract(&b, &kk, &[("p", "p")])
    };
    let mut acc = site(0)?;
    for k in 1..ket.len() {
        let e = site(k)?;
        acc = contract(&acc, &e, &[("rb", "lb"), ("rk", "lk")])?;
    }
    let closed = acc.trace("lb", "rb")?.trace("lk", "rk")?;
    closed.scalar_value()
}

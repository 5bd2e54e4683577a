//! Dense complex tensors with named indices.
//!
//! Index identity is by label. A [`Tensor`] stores its amplitudes in
//! row-major order over its labels as listed, so the last label varies
//! fastest. Contraction is specified by pairs of labels, one from each
//! operand; the result carries the unpaired labels of the left operand
//! followed by those of the right operand.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    labels: Vec<String>,
    dims: Vec<usize>,
    data: Vec<C64>,
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

impl Tensor {
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        dims: Vec<usize>,
        data: Vec<C64>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} dimensions",
                labels.len(),
                dims.len()
            )));
        }
        if let Some(k) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Dimension(format!("index `{}` has extent 0", labels[k])));
        }
        for (k, l) in labels.iter().enumerate() {
            if labels[..k].contains(l) {
                return Err(Error::Label(format!("duplicate label `{l}`")));
            }
        }
        let size: usize = dims.iter().product();
        if size != data.len() {
            return Err(Error::Dimension(format!(
                "extents {:?} need {} amplitudes, got {}",
                dims,
                size,
                data.len()
            )));
        }
        Ok(Self { labels, dims, data })
    }

    pub fn zeros<S: Into<String>>(labels: impl IntoIterator<Item = S>, dims: Vec<usize>) -> Result<Self> {
        let size = dims.iter().product();
        Self::new(labels, dims, vec![C64::new(0.0, 0.0); size])
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        dims: Vec<usize>,
        mut f: impl FnMut(&[usize]) -> C64,
    ) -> Result<Self> {
        let mut t = Self::zeros(labels, dims)?;
        let mut idx = vec![0; t.dims.len()];
        for k in 0..t.data.len() {
            t.data[k] = f(&idx);
            t.increment(&mut idx);
        }
        Ok(t)
    }

    pub fn scalar(value: C64) -> Self {
        Self { labels: Vec::new(), dims: Vec::new(), data: vec![value] }
    }

    fn increment(&self, idx: &mut [usize]) {
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < self.dims[k] {
                return;
            }
            idx[k] = 0;
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Label(format!("no index `{label}` in {:?}", self.labels)))
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    fn offset(&self, idx: &[usize]) -> usize {
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[k]);
            off = off * self.dims[k] + i;
        }
        off
    }

    /// Amplitude at a multi-index given in label order.
    pub fn get(&self, idx: &[usize]) -> C64 {
        assert_eq!(idx.len(), self.rank(), "index rank mismatch");
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        assert_eq!(idx.len(), self.rank(), "index rank mismatch");
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// Value of a rank-0 tensor (or the single entry of an all-unit tensor).
    pub fn scalar_value(&self) -> Result<C64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::Shape(format!("expected a single amplitude, found extents {:?}", self.dims)))
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            labels: self.labels.clone(),
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Renames indices; labels not mentioned keep their names.
    pub fn relabel(mut self, map: &[(&str, &str)]) -> Result<Self> {
        for &(from, to) in map {
            let k = self.position(from)?;
            self.labels[k] = to.to_string();
        }
        for (k, l) in self.labels.iter().enumerate() {
            if self.labels[..k].contains(l) {
                return Err(Error::Label(format!("relabeling produced duplicate `{l}`")));
            }
        }
        Ok(self)
    }

    /// Reorders the indices to the given label order.
    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::Label(format!(
                "permutation lists {} labels, tensor has {}",
                order.len(),
                self.rank()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.position(l.as_ref()))
            .collect::<Result<_>>()?;
        for (k, p) in perm.iter().enumerate() {
            if perm[..k].contains(p) {
                return Err(Error::Label("permutation repeats a label".into()));
            }
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let src_strides = strides(&self.dims);
        let gather: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; dims.len()];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[off]);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                off += gather[k];
                if idx[k] < dims[k] {
                    break;
                }
                off -= gather[k] * dims[k];
                idx[k] = 0;
            }
        }
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        Ok(Self { labels, dims, data })
    }

    /// Fuses the tensor into a matrix with the given row and column labels.
    pub fn to_matrix<S: AsRef<str>>(&self, rows: &[S], cols: &[S]) -> Result<DMatrix<C64>> {
        let order: Vec<&str> = rows.iter().chain(cols).map(|s| s.as_ref()).collect();
        let p = self.permute(&order)?;
        let nr: usize = p.dims[..rows.len()].iter().product();
        let nc: usize = p.dims[rows.len()..].iter().product();
        Ok(DMatrix::from_row_slice(nr, nc, &p.data))
    }

    /// Inverse of [`Tensor::to_matrix`].
    pub fn from_matrix(
        m: &DMatrix<C64>,
        rows: &[(&str, usize)],
        cols: &[(&str, usize)],
    ) -> Result<Self> {
        let nr: usize = rows.iter().map(|r| r.1).product();
        let nc: usize = cols.iter().map(|c| c.1).product();
        if m.nrows() != nr || m.ncols() != nc {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, index extents need {}x{}",
                m.nrows(),
                m.ncols(),
                nr,
                nc
            )));
        }
        let mut data = Vec::with_capacity(nr * nc);
        for i in 0..nr {
            for j in 0..nc {
                data.push(m[(i, j)]);
            }
        }
        let labels: Vec<&str> = rows.iter().chain(cols).map(|x| x.0).collect();
        let dims = rows.iter().chain(cols).map(|x| x.1).collect();
        Self::new(labels, dims, data)
    }

    /// Elementwise sum; `other` is permuted to match `self`'s label order.
    pub fn add(&self, other: &Tensor) -> Result<Self> {
        let o = other.permute(&self.labels)?;
        if o.dims != self.dims {
            return Err(Error::Dimension(format!("cannot add extents {:?} and {:?}", self.dims, o.dims)));
        }
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect();
        Ok(Self { labels: self.labels.clone(), dims: self.dims.clone(), data })
    }

    /// Sums the diagonal over two indices of equal extent.
    pub fn trace(&self, a: &str, b: &str) -> Result<Self> {
        let (pa, pb) = (self.position(a)?, self.position(b)?);
        if pa == pb {
            return Err(Error::Label(format!("cannot trace `{a}` with itself")));
        }
        if self.dims[pa] != self.dims[pb] {
            return Err(Error::Dimension(format!(
                "trace over `{a}` ({}) and `{b}` ({})",
                self.dims[pa], self.dims[pb]
            )));
        }
        let rest: Vec<usize> = (0..self.rank()).filter(|&k| k != pa && k != pb).collect();
        let labels: Vec<String> = rest.iter().map(|&k| self.labels[k].clone()).collect();
        let dims: Vec<usize> = rest.iter().map(|&k| self.dims[k]).collect();
        let mut out = Tensor::zeros(labels, dims)?;
        let mut full = vec![0usize; self.rank()];
        let mut sub = vec![0usize; rest.len()];
        for k in 0..out.data.len() {
            for (s, &r) in sub.iter().zip(&rest) {
                full[r] = *s;
            }
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..self.dims[pa] {
                full[pa] = t;
                full[pb] = t;
                acc += self.data[self.offset(&full)];
            }
            out.data[k] = acc;
            out.increment(&mut sub);
        }
        Ok(out)
    }

    /// Drops an index of extent 1.
    pub fn squeeze(&self, label: &str) -> Result<Self> {
        let p = self.position(label)?;
        if self.dims[p] != 1 {
            return Err(Error::Dimension(format!("cannot squeeze `{label}` of extent {}", self.dims[p])));
        }
        let mut t = self.clone();
        t.labels.remove(p);
        t.dims.remove(p);
        Ok(t)
    }

    /// Appends an index of extent 1.
    pub fn unsqueeze(&self, label: &str) -> Result<Self> {
        if self.has_label(label) {
            return Err(Error::Label(format!("label `{label}` already present")));
        }
        let mut t = self.clone();
        t.labels.push(label.to_string());
        t.dims.push(1);
        Ok(t)
    }

    /// Largest absolute elementwise difference; labels are matched by name.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        let o = other.permute(&self.labels)?;
        if o.dims != self.dims {
            return Err(Error::Dimension(format!("extents {:?} vs {:?}", self.dims, o.dims)));
        }
        Ok(self.data.iter().zip(&o.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

fn split_pairs<S: AsRef<str>>(a: &Tensor, b: &Tensor, pairs: &[(S, S)]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut pa = Vec::with_capacity(pairs.len());
    let mut pb = Vec::with_capacity(pairs.len());
    for (la, lb) in pairs {
        let (la, lb) = (la.as_ref(), lb.as_ref());
        let i = a.position(la)?;
        let j = b.position(lb)?;
        if a.dims[i] != b.dims[j] {
            return Err(Error::Dimension(format!(
                "`{la}` has extent {} but `{lb}` has extent {}",
                a.dims[i], b.dims[j]
            )));
        }
        if pa.contains(&i) || pb.contains(&j) {
            return Err(Error::Label(format!("label paired twice in ({la}, {lb})")));
        }
        pa.push(i);
        pb.push(j);
    }
    Ok((pa, pb))
}

/// Number of scalar multiply-adds [`contract`] performs for these operands.
pub fn contract_cost<S: AsRef<str>>(a: &Tensor, b: &Tensor, pairs: &[(S, S)]) -> Result<u64> {
    let (pa, _) = split_pairs(a, b, pairs)?;
    let inner: usize = pa.iter().map(|&i| a.dims[i]).product();
    Ok((a.len() as u64) * (b.len() as u64) / inner as u64)
}

/// Sums over paired indices. The result carries the unpaired labels of `a`
/// then those of `b`, in their original order.
pub fn contract<S: AsRef<str>>(a: &Tensor, b: &Tensor, pairs: &[(S, S)]) -> Result<Tensor> {
    let (pa, pb) = split_pairs(a, b, pairs)?;
    let free_a: Vec<usize> = (0..a.rank()).filter(|k| !pa.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|k| !pb.contains(k)).collect();
    let mut labels: Vec<String> = free_a.iter().map(|&k| a.labels[k].clone()).collect();
    labels.extend(free_b.iter().map(|&k| b.labels[k].clone()));
    for (k, l) in labels.iter().enumerate() {
        if labels[..k].contains(l) {
            return Err(Error::Label(format!("label `{l}` would appear twice in the result")));
        }
    }
    let mut dims: Vec<usize> = free_a.iter().map(|&k| a.dims[k]).collect();
    dims.extend(free_b.iter().map(|&k| b.dims[k]));

    let order_a: Vec<&str> = free_a.iter().chain(&pa).map(|&k| a.labels[k].as_str()).collect();
    let order_b: Vec<&str> = pb.iter().chain(&free_b).map(|&k| b.labels[k].as_str()).collect();
    let am = a.permute(&order_a)?;
    let bm = b.permute(&order_b)?;
    let m: usize = free_a.iter().map(|&k| a.dims[k]).product();
    let inner: usize = pa.iter().map(|&k| a.dims[k]).product();
    let n: usize = free_b.iter().map(|&k| b.dims[k]).product();

    let zero = C64::new(0.0, 0.0);
    let mut data = vec![zero; m * n];
    for i in 0..m {
        let row = &mut data[i * n..(i + 1) * n];
        let arow = &am.data[i * inner..(i + 1) * inner];
        for (p, &x) in arow.iter().enumerate() {
            if x == zero {
                continue;
            }
            let brow = &bm.data[p * n..(p + 1) * n];
            for (r, &y) in row.iter_mut().zip(brow) {
                *r += x * y;
            }
        }
    }
    Tensor::new(labels, dims, data)
}

/// Contracts every label the two tensors share.
pub fn contract_common(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let pairs = common_pairs(a, b);
    contract(a, b, &pairs)
}

pub(crate) fn common_pairs(a: &Tensor, b: &Tensor) -> Vec<(String, String)> {
    a.labels
        .iter()
        .filter(|l| b.has_label(l))
        .map(|l| (l.clone(), l.clone()))
        .collect()
}

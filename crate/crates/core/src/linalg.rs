//! SVD splitting and the smallest generalized Hermitian eigenpair.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::C64;

/// Metric eigenvalues at or below this fraction of the largest one are
/// treated as null directions.
pub const METRIC_CUTOFF: f64 = 1e-10;

/// Smallest generalized eigenpair of a Hermitian pencil.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Flattened over the column labels of the operator; normalized so that
    /// `v* · n · v = 1`.
    pub vector: Tensor,
    /// `‖h·v − λ n·v‖` restricted to the range of the metric.
    pub residual: f64,
}

/// Splits `t` into `u · diag(s) · v` across the bipartition
/// `left_labels | rest`. The new bond index is called `bond` in both
/// factors. Singular values are returned nonincreasing.
pub fn svd_split<S: AsRef<str>>(t: &Tensor, left_labels: &[S], bond: &str) -> Result<(Tensor, Vec<f64>, Tensor)> {
    if left_labels.is_empty() || left_labels.len() >= t.rank() {
        return Err(Error::Split(format!(
            "left side must be a nonempty proper subset of {:?}",
            t.labels()
        )));
    }
    let left: Vec<&str> = left_labels.iter().map(|s| s.as_ref()).collect();
    for l in &left {
        t.position(l)?;
    }
    let right: Vec<&str> = t
        .labels()
        .iter()
        .map(String::as_str)
        .filter(|l| !left.contains(l))
        .collect();
    if right.len() + left.len() != t.rank() {
        return Err(Error::Split("left labels repeat an index".into()));
    }
    let m = t.to_matrix(&left, &right)?;
    let (u, s, vt) = thin_svd(&m);
    let k = s.len();
    let left_dims: Vec<(&str, usize)> = left.iter().map(|l| (*l, t.dim_of(l).unwrap())).collect();
    let right_dims: Vec<(&str, usize)> = right.iter().map(|l| (*l, t.dim_of(l).unwrap())).collect();
    let ut = Tensor::from_matrix(&u, &left_dims, &[(bond, k)])?;
    let vt = Tensor::from_matrix(&vt, &[(bond, k)], &right_dims)?;
    Ok((ut, s, vt))
}

/// Thin SVD with singular values sorted nonincreasing.
pub fn thin_svd(m: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>, DMatrix<C64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s: Vec<f64> = order.iter().map(|&k| svd.singular_values[k].max(0.0)).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vt = DMatrix::from_fn(order.len(), vt.ncols(), |i, j| vt[(order[i], j)]);
    (u, s, vt)
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending. Ties keep
/// the solver's order.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Matrix form of [`gen_eig_smallest`]: returns `(λ, v, residual)`.
pub fn gen_eig_smallest_matrix(h: &DMatrix<C64>, n: &DMatrix<C64>, tol: f64) -> Result<(f64, DVector<C64>, f64)> {
    if !h.is_square() || h.shape() != n.shape() {
        return Err(Error::Dimension(format!("pencil shapes {:?} and {:?}", h.shape(), n.shape())));
    }
    let (nvals, nvecs) = hermitian_eigen(n);
    let top = nvals.last().copied().unwrap_or(0.0);
    if top.is_nan() || top <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateMetric(format!("largest metric eigenvalue is {top:e}")));
    }
    let keep: Vec<usize> = (0..nvals.len()).filter(|&k| nvals[k] > METRIC_CUTOFF * top).collect();
    // whitening map from the retained subspace: P = U_k diag(λ_k^{-1/2})
    let p = DMatrix::from_fn(n.nrows(), keep.len(), |i, j| nvecs[(i, keep[j])] / nvals[keep[j]].sqrt());
    let reduced = p.adjoint() * hermitian_part(h) * &p;
    let (vals, vecs) = hermitian_eigen(&reduced);
    let lambda = vals[0];
    let v = &p * vecs.column(0);

    let r = h * &v - (n * &v).scale(lambda);
    let basis = DMatrix::from_fn(n.nrows(), keep.len(), |i, j| nvecs[(i, keep[j])]);
    let residual = (basis.adjoint() * r).norm();
    let bound = tol * h.norm().max(f64::MIN_POSITIVE);
    if residual > bound {
        return Err(Error::Residual { residual, bound });
    }
    Ok((lambda, v, residual))
}

/// Smallest `λ` with `h·v = λ n·v`, solved on the range of `n`.
///
/// Both tensors are read as square matrices: the first half of `h`'s labels
/// index rows, the second half columns. `n` must carry the same labels (in
/// any order). The returned vector carries the column labels.
pub fn gen_eig_smallest(h: &Tensor, n: &Tensor, tol: f64) -> Result<EigenPair> {
    if !h.rank().is_multiple_of(2) {
        return Err(Error::Shape(format!("operator tensor has odd rank {}", h.rank())));
    }
    let half = h.rank() / 2;
    let rows: Vec<&str> = h.labels()[..half].iter().map(String::as_str).collect();
    let cols: Vec<&str> = h.labels()[half..].iter().map(String::as_str).collect();
    let hm = h.to_matrix(&rows, &cols)?;
    let nm = n.to_matrix(&rows, &cols)?;
    let (value, v, residual) = gen_eig_smallest_matrix(&hm, &nm, tol)?;
    let col_dims: Vec<usize> = h.dims()[half..].to_vec();
    let vector = Tensor::new(cols.iter().copied(), col_dims, v.iter().copied().collect())?;
    Ok(EigenPair { value, vector, residual })
}

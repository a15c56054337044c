//! Dense linear algebra helpers shared by the basis generators.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD with singular values sorted in decreasing order (ties keep the
/// solver's column order, which is the lowest index first).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd_sorted(m: &DMatrix<f64>) -> Result<SortedSvd> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SortedSvd {
            u: DMatrix::zeros(rows, 0),
            sigma: Vec::new(),
            v: DMatrix::zeros(cols, 0),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| decomposition("svd: left vectors", f64::NAN))?;
    let vt = svd.v_t.ok_or_else(|| decomposition("svd: right vectors", f64::NAN))?;
    let order = descending_order(svd.singular_values.as_slice());
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = u.select_columns(order.iter());
    let v = vt.transpose().select_columns(order.iter());
    Ok(SortedSvd { u, sigma, v })
}

/// Left singular vectors of a complex matrix, sorted by decreasing singular value.
pub fn complex_left_singular(m: &DMatrix<Complex<f64>>) -> Result<(DMatrix<Complex<f64>>, Vec<f64>)> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok((DMatrix::zeros(rows, 0), Vec::new()));
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| decomposition("complex svd: left vectors", f64::NAN))?;
    let order = descending_order(svd.singular_values.as_slice());
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((u.select_columns(order.iter()), sigma))
}

/// Indices sorting `values` in decreasing order; stable, so ties go to the lowest index.
pub fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Orthonormal basis of the orthogonal complement of `range(x)`.
///
/// `x` must have full column rank; columns are normalized before the QR so
/// that widely different column scales do not bias the complement.
pub fn orthonormal_complement(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, r) = x.shape();
    if r == 0 {
        return DMatrix::identity(m, m);
    }
    if r >= m {
        return DMatrix::zeros(m, 0);
    }
    let mut stacked = DMatrix::zeros(m, r + m);
    for j in 0..r {
        let c = x.column(j);
        let nrm = c.norm();
        let scale = if nrm > 0.0 { 1.0 / nrm } else { 0.0 };
        stacked.column_mut(j).copy_from(&(c * scale));
    }
    stacked.view_mut((0, r), (m, m)).fill_with_identity();
    let q = stacked.qr().q();
    q.columns(r, m - r).into_owned()
}

/// Symplectic-style canonical pairs of a real skew-symmetric matrix.
///
/// Returns `(lambda, x, y)` with `K x = lambda y`, `K y = -lambda x`, all
/// vectors orthonormal, for every `lambda > tol`, sorted by decreasing
/// `lambda`. The pairs come from the Hermitian matrix `iK`, whose positive
/// eigenvalues are the `lambda`s and whose eigenvectors are `x + i y`.
pub fn skew_pairs(k: &DMatrix<f64>, tol: f64) -> Result<Vec<(f64, DVector<f64>, DVector<f64>)>> {
    let r = k.nrows();
    if r == 0 {
        return Ok(Vec::new());
    }
    let herm = k.map(|x| Complex::new(0.0, x));
    let eig = herm.symmetric_eigen();
    let lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&lambdas);

    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    for &i in &order {
        let lambda = lambdas[i];
        if lambda <= tol {
            break;
        }
        let w = eig.eigenvectors.column(i);
        let mut x = DVector::from_iterator(r, w.iter().map(|c| c.re));
        let xi = DVector::from_iterator(r, w.iter().map(|c| c.im));
        // The phase of w is arbitrary; pick whichever real part is better conditioned.
        if xi.norm() > x.norm() {
            x = xi;
        }
        for (_, px, py) in &pairs {
            x -= px * px.dot(&x);
            x -= py * py.dot(&x);
        }
        let nx = x.norm();
        if nx == 0.0 {
            return Err(decomposition("skew pairing lost a direction", lambda));
        }
        x /= nx;
        let mut y = k * &x / lambda;
        for (_, px, py) in &pairs {
            y -= px * px.dot(&y);
            y -= py * py.dot(&y);
        }
        y -= &x * x.dot(&y);
        let ny = y.norm();
        if ny == 0.0 {
            return Err(decomposition("skew pairing lost a partner", lambda));
        }
        y /= ny;
        let lambda = y.dot(&(k * &x));
        pairs.push((lambda, x, y));
    }
    Ok(pairs)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn decomposition(what: &str, residual: f64) -> Error {
    Error::DecompositionFailure {
        what: what.to_string(),
        residual,
    }
}

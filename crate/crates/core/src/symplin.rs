//! Symplectic linear algebra on `R^{2n}` with the canonical ordering
//! `y = (q_1..q_n, p_1..p_n)`.
//!
//! The Poisson matrix `J_2n = [[0, I], [-I, 0]]` is never formed inside the
//! hot paths; [`j_mul`] and [`jt_mul`] apply it by swapping and negating the
//! two row blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, orthonormal_complement, skew_pairs, svd_sorted};

/// Default tolerance for the structure checks, relative to `max(1, ||A||_F^2)`.
pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-10;

/// Dense `J_2n`.
pub fn poisson_matrix(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::dim("Poisson matrix needs n >= 1"));
    }
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    Ok(j)
}

fn half_rows(rows: usize) -> Result<usize> {
    if rows % 2 != 0 {
        return Err(Error::dim(format!("expected an even row count, got {rows}")));
    }
    Ok(rows / 2)
}

/// `J_2n · Y`.
pub fn j_mul(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows() / 2;
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    out.rows_mut(0, n).copy_from(&y.rows(n, n));
    out.rows_mut(n, n).copy_from(&(-y.rows(0, n)));
    out
}

/// `J_2nᵀ · Y`.
pub fn jt_mul(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows() / 2;
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    out.rows_mut(0, n).copy_from(&(-y.rows(n, n)));
    out.rows_mut(n, n).copy_from(&y.rows(0, n));
    out
}

/// `J_2n · v` for a vector.
pub fn j_mul_vec(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len() / 2;
    let mut out = DVector::zeros(v.len());
    out.rows_mut(0, n).copy_from(&v.rows(n, n));
    out.rows_mut(n, n).copy_from(&(-v.rows(0, n)));
    out
}

/// `J_2nᵀ · v` for a vector.
pub fn jt_mul_vec(v: &DVector<f64>) -> DVector<f64> {
    -j_mul_vec(v)
}

/// `Ω(u, v) = uᵀ J v`.
pub fn omega(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    u.dot(&j_mul_vec(v))
}

/// `‖AᵀJ_2nA − J_2k‖_max`.
pub fn symplecticity_residual(a: &DMatrix<f64>) -> Result<f64> {
    half_rows(a.nrows())?;
    let k = half_rows(a.ncols())?;
    if k == 0 {
        return Ok(0.0);
    }
    let gram = a.transpose() * j_mul(a);
    Ok(max_abs(&(gram - poisson_matrix(k)?)))
}

/// `‖AᵀA − I‖_max`.
pub fn orthonormality_residual(a: &DMatrix<f64>) -> f64 {
    let m = a.ncols();
    max_abs(&(a.transpose() * a - DMatrix::identity(m, m)))
}

/// True iff `‖AᵀJ_2nA − J_2k‖_max ≤ tol`.
pub fn is_symplectic(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(symplecticity_residual(a)? <= tol)
}

/// Which quarter of a `2n×2k` basis, named by the coordinates it couples:
/// `q = A_qr r + A_qs s`, `p = A_pr r + A_ps s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Qr,
    Qs,
    Pr,
    Ps,
}

/// A matrix `A ∈ R^{2n×2k}` with `AᵀJ_2nA = J_2k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticBasis {
    a: DMatrix<f64>,
    orthonormal: bool,
}

impl SymplecticBasis {
    /// Validates `a` at the default relative tolerance and detects orthonormality.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(a, DEFAULT_STRUCTURE_TOL)
    }

    pub fn with_tolerance(a: DMatrix<f64>, rel_tol: f64) -> Result<Self> {
        let n = half_rows(a.nrows())?;
        let k = half_rows(a.ncols())?;
        if k == 0 || k > n {
            return Err(Error::dim(format!("basis needs 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        let tol = rel_tol * a.norm_squared().max(1.0);
        let residual = symplecticity_residual(&a)?;
        if residual > tol {
            return Err(Error::StructureViolation {
                what: "AᵀJA ≠ J".into(),
                residual,
            });
        }
        let orthonormal =
            orthonormality_residual(&a) <= tol && max_abs(&(a.columns(k, k) - jt_mul(&a.columns(0, k).into_owned()))) <= tol;
        Ok(SymplecticBasis { a, orthonormal })
    }

    /// Builds an ortho-symplectic basis `[E, J_2nᵀE]` from `E`.
    pub fn from_isotropic_frame(e: &DMatrix<f64>) -> Result<Self> {
        half_rows(e.nrows())?;
        let k = e.ncols();
        let mut a = DMatrix::zeros(e.nrows(), 2 * k);
        a.columns_mut(0, k).copy_from(e);
        a.columns_mut(k, k).copy_from(&jt_mul(e));
        let basis = Self::new(a)?;
        if !basis.orthonormal {
            return Err(Error::StructureViolation {
                what: "[E, JᵀE] is not orthonormal".into(),
                residual: orthonormality_residual(&basis.a),
            });
        }
        Ok(basis)
    }

    /// Skips validation; callers guarantee the structure.
    pub(crate) fn from_trusted(a: DMatrix<f64>, orthonormal: bool) -> Self {
        SymplecticBasis { a, orthonormal }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.a
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// `n` of the ambient space `R^{2n}`.
    pub fn full_half_dim(&self) -> usize {
        self.a.nrows() / 2
    }

    /// `k` of the reduced space `R^{2k}`.
    pub fn reduced_half_dim(&self) -> usize {
        self.a.ncols() / 2
    }

    /// The `E` half of an ortho-symplectic `[E, JᵀE]` basis.
    pub fn isotropic_frame(&self) -> DMatrix<f64> {
        self.a.columns(0, self.reduced_half_dim()).into_owned()
    }

    pub fn block(&self, block: Block) -> DMatrix<f64> {
        let (n, k) = (self.full_half_dim(), self.reduced_half_dim());
        let (r0, c0) = match block {
            Block::Qr => (0, 0),
            Block::Qs => (0, k),
            Block::Pr => (n, 0),
            Block::Ps => (n, k),
        };
        self.a.view((r0, c0), (n, k)).into_owned()
    }

    /// Symplectic inverse `A⁺ = J_2kᵀ Aᵀ J_2n`.
    pub fn inverse(&self) -> DMatrix<f64> {
        jt_mul(&jt_mul(&self.a).transpose())
    }

    /// `A A⁺ Y`.
    pub fn project(&self, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if y.nrows() != self.a.nrows() {
            return Err(Error::dim(format!(
                "projection of {} rows onto a basis with {} rows",
                y.nrows(),
                self.a.nrows()
            )));
        }
        Ok(&self.a * (self.inverse() * y))
    }

    pub fn project_vec(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.a.nrows() {
            return Err(Error::dim(format!(
                "projection of length {} onto a basis with {} rows",
                y.len(),
                self.a.nrows()
            )));
        }
        Ok(&self.a * (self.inverse() * y))
    }
}

/// `A⁺` for any matrix passing [`is_symplectic`] at `tol`.
pub fn symplectic_inverse(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let residual = symplecticity_residual(a)?;
    if residual > tol {
        return Err(Error::StructureViolation {
            what: "symplectic inverse of a non-symplectic matrix".into(),
            residual,
        });
    }
    Ok(jt_mul(&jt_mul(a).transpose()))
}

/// `A A⁺ Y`.
pub fn symplectic_project(basis: &SymplecticBasis, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    basis.project(y)
}

/// One step of symplectic Gram–Schmidt against an ortho-symplectic `[E, JᵀE]`.
///
/// Returns a unit `e` with `[E, e, JᵀE, Jᵀe]` ortho-symplectic. The
/// candidate is orthogonalized twice against every column of `[E, JᵀE]`.
/// Fails with [`Error::DegenerateCandidate`] when the remaining part of `v`
/// has norm `≤ tol · ‖v‖`.
pub fn sr_insert(e: &DMatrix<f64>, v: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let n = half_rows(e.nrows())?;
    if v.len() != 2 * n {
        return Err(Error::dim(format!("candidate of length {} for R^{}", v.len(), 2 * n)));
    }
    let k = e.ncols();
    if k >= n {
        return Err(Error::dim(format!("basis already spans R^{} (k = {k})", 2 * n)));
    }
    let frame = {
        let mut f = DMatrix::zeros(2 * n, 2 * k);
        f.columns_mut(0, k).copy_from(e);
        f.columns_mut(k, k).copy_from(&jt_mul(e));
        f
    };
    if k > 0 {
        let residual = orthonormality_residual(&frame).max(symplecticity_residual(&frame)?);
        if residual > 1e-8 {
            return Err(Error::StructureViolation {
                what: "[E, JᵀE] is not ortho-symplectic".into(),
                residual,
            });
        }
    }
    let v_norm = v.norm();
    let mut w = v.clone();
    for _ in 0..2 {
        for c in frame.column_iter() {
            let coeff = c.dot(&w);
            w.axpy(-coeff, &c, 1.0);
        }
    }
    let residual = w.norm();
    if residual <= tol * v_norm || residual == 0.0 {
        return Err(Error::DegenerateCandidate {
            residual,
            tol: tol * v_norm,
        });
    }
    Ok(w / residual)
}

/// Factors of the SVD-like decomposition `B = S D Q`.
///
/// Column groups of `D` are `(b, q, b, n_s − 2b − q)` wide; its nonzero
/// entries are `D[i, i] = σ_i`, `D[b+j, b+j] = 1` and `D[n+i, b+q+i] = σ_i`.
#[derive(Clone, Debug)]
pub struct SvdLikeFactors {
    /// `S ∈ Sp(2n)`.
    pub s: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Orthogonal `n_s × n_s`.
    pub q: DMatrix<f64>,
    /// Number of symplectic singular values (`b`).
    pub pairs: usize,
    /// Number of isotropic directions (`q`).
    pub isotropic: usize,
    pub sigma: Vec<f64>,
}

impl SvdLikeFactors {
    pub fn rank(&self) -> usize {
        2 * self.pairs + self.isotropic
    }

    pub fn half_dim(&self) -> usize {
        self.s.nrows() / 2
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.s * &self.d * &self.q
    }

    /// `w_i = σ_i·sqrt(‖S_i‖² + ‖S_{n+i}‖²)` for the pairs, then `‖S_i‖` for
    /// the isotropic directions.
    pub fn weighted_singular_values(&self) -> Vec<f64> {
        let n = self.half_dim();
        let pairs = (0..self.pairs).map(|i| {
            self.sigma[i] * (self.s.column(i).norm_squared() + self.s.column(n + i).norm_squared()).sqrt()
        });
        let iso = (self.pairs..self.pairs + self.isotropic).map(|i| self.s.column(i).norm());
        pairs.chain(iso).collect()
    }
}

/// Free-function form of [`SvdLikeFactors::weighted_singular_values`].
pub fn weighted_symplectic_singular_values(f: &SvdLikeFactors) -> Vec<f64> {
    f.weighted_singular_values()
}

/// SVD-like decomposition of `B ∈ R^{2n×n_s}`.
///
/// Singular values of `B` at or below `tol_rank · σ_max` are treated as zero
/// (default `1e-10`). The construction works on the compressed range
/// `C = U_r Σ_r`: the skew form `Cᵀ J C` is brought to canonical pairs, the
/// pairs become columns of `S`, the null directions become the isotropic
/// columns, and the rest of `S` is completed symplectically.
pub fn svd_like(b: &DMatrix<f64>, tol_rank: Option<f64>) -> Result<SvdLikeFactors> {
    let n = half_rows(b.nrows())?;
    if n == 0 {
        return Err(Error::dim("SVD-like decomposition of an empty matrix"));
    }
    let ns = b.ncols();
    let tol_rank = tol_rank.unwrap_or(1e-10);
    let svd = svd_sorted(b)?;
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let rank = svd.sigma.iter().take_while(|&&s| s > tol_rank * smax && s > 0.0).count();
    if rank == 0 {
        return Ok(SvdLikeFactors {
            s: DMatrix::identity(2 * n, 2 * n),
            d: DMatrix::zeros(2 * n, ns),
            q: DMatrix::identity(ns, ns),
            pairs: 0,
            isotropic: 0,
            sigma: Vec::new(),
        });
    }

    let ur = svd.u.columns(0, rank).into_owned();
    let vr = svd.v.columns(0, rank).into_owned();
    let c = DMatrix::from_fn(2 * n, rank, |i, j| ur[(i, j)] * svd.sigma[j]);
    // Pairs are extracted scale by scale: after each round the skew form is
    // restricted to the unpaired directions and thresholded against their own
    // largest singular value, so small but genuinely symplectic directions are
    // not mistaken for isotropic ones.
    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    let mut free = DMatrix::<f64>::identity(rank, rank);
    loop {
        let g = &c * &free;
        let scale = svd_sorted(&g)?.sigma.first().copied().unwrap_or(0.0);
        if free.ncols() < 2 || scale == 0.0 {
            break;
        }
        let kg = g.transpose() * j_mul(&g);
        let kg = (&kg - kg.transpose()) * 0.5;
        let floor = (tol_rank * scale * scale).max(64.0 * f64::EPSILON * smax * scale);
        let found = skew_pairs(&kg, floor)?;
        if found.is_empty() {
            break;
        }
        for (lambda, x, y) in found {
            pairs.push((lambda, &free * x, &free * y));
        }
        let mut taken = DMatrix::zeros(rank, 2 * pairs.len());
        for (i, (_, x, y)) in pairs.iter().enumerate() {
            taken.set_column(2 * i, x);
            taken.set_column(2 * i + 1, y);
        }
        free = orthonormal_complement(&taken);
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let nb = pairs.len();
    let nq = rank - 2 * nb;
    if nb + nq > n {
        return Err(Error::DecompositionFailure {
            what: format!("rank structure b = {nb}, q = {nq} exceeds n = {n}"),
            residual: 0.0,
        });
    }

    // Coordinates in R^rank: u_i (first of pair), z_j (null), v_i (second of pair).
    let mut paired = DMatrix::zeros(rank, 2 * nb);
    for (i, (_, x, y)) in pairs.iter().enumerate() {
        paired.set_column(i, y);
        paired.set_column(nb + i, x);
    }
    let mut null = orthonormal_complement(&paired);
    debug_assert_eq!(null.ncols(), nq);
    if nq > 0 {
        // Rotate so that the isotropic columns C z_j are mutually orthogonal.
        let rot = svd_sorted(&(&c * &null))?.v;
        null = &null * rot;
    }

    let mut order = DMatrix::zeros(rank, rank);
    order.columns_mut(0, nb).copy_from(&paired.columns(0, nb));
    order.columns_mut(nb, nq).copy_from(&null);
    order.columns_mut(nb + nq, nb).copy_from(&paired.columns(nb, nb));
    let cp = &c * &order;

    let mut s = DMatrix::zeros(2 * n, 2 * n);
    let mut sigma = Vec::with_capacity(nb);
    for i in 0..nb {
        let cu = cp.column(i).into_owned();
        let cv = cp.column(nb + nq + i).into_owned();
        let w = omega(&cu, &cv);
        if w <= 0.0 {
            return Err(Error::DecompositionFailure {
                what: "symplectic pair lost its orientation".into(),
                residual: w,
            });
        }
        let sg = w.sqrt();
        sigma.push(sg);
        s.set_column(i, &(cu / sg));
        s.set_column(n + i, &(cv / sg));
    }

    // Isotropic directions g_j and their dual partners h_j.
    if nq > 0 {
        let g = cp.columns(nb, nq).into_owned();
        let gram = g.transpose() * &g;
        let gram_inv = gram.clone().try_inverse().ok_or_else(|| Error::DecompositionFailure {
            what: "isotropic directions are linearly dependent".into(),
            residual: gram.norm(),
        })?;
        let mut h = -j_mul(&g) * gram_inv;
        if nb > 0 {
            let mut pairs_basis = DMatrix::zeros(2 * n, 2 * nb);
            pairs_basis.columns_mut(0, nb).copy_from(&s.columns(0, nb));
            pairs_basis.columns_mut(nb, nb).copy_from(&s.columns(n, nb));
            let inv = jt_mul(&jt_mul(&pairs_basis).transpose());
            for _ in 0..2 {
                h -= &pairs_basis * (&inv * &h);
            }
        }
        let skew = h.transpose() * j_mul(&h);
        h += &g * (skew * 0.5);
        s.columns_mut(nb, nq).copy_from(&g);
        s.columns_mut(n + nb, nq).copy_from(&h);
    }

    // Symplectic completion on the Ω-complement of everything placed so far.
    let m = n - nb - nq;
    if m > 0 {
        let placed = nb + nq;
        let mut t = DMatrix::zeros(2 * n, 2 * placed);
        t.columns_mut(0, placed).copy_from(&s.columns(0, placed));
        t.columns_mut(placed, placed).copy_from(&s.columns(n, placed));
        let comp = orthonormal_complement(&jt_mul(&t));
        let g_c = comp.transpose() * j_mul(&comp);
        let g_c = (&g_c - g_c.transpose()) * 0.5;
        let cpairs = skew_pairs(&g_c, 1e-8)?;
        if cpairs.len() != m {
            return Err(Error::DecompositionFailure {
                what: format!("symplectic completion found {} of {m} pairs", cpairs.len()),
                residual: 0.0,
            });
        }
        for (i, (lambda, x, y)) in cpairs.iter().enumerate() {
            let scale = 1.0 / lambda.sqrt();
            s.set_column(placed + i, &(&comp * y * scale));
            s.set_column(n + placed + i, &(&comp * x * scale));
        }
    }

    let mut d = DMatrix::zeros(2 * n, ns);
    for (i, sg) in sigma.iter().enumerate() {
        d[(i, i)] = *sg;
        d[(n + i, nb + nq + i)] = *sg;
    }
    for j in 0..nq {
        d[(nb + j, nb + j)] = 1.0;
    }

    let mut q = DMatrix::zeros(ns, ns);
    q.rows_mut(0, rank).copy_from(&(order.transpose() * vr.transpose()));
    if rank < ns {
        let v_perp = orthonormal_complement(&vr);
        q.rows_mut(rank, ns - rank).copy_from(&v_perp.transpose());
    }

    Ok(SvdLikeFactors {
        s,
        d,
        q,
        pairs: nb,
        isotropic: nq,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(len: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(len);
        v[i] = 1.0;
        v
    }

    fn cols(len: usize, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_columns(&idx.iter().map(|&i| unit(len, i)).collect::<Vec<_>>())
    }

    #[test]
    fn poisson_small_cases() {
        assert_eq!(poisson_matrix(1).unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let j2 = poisson_matrix(2).unwrap();
        assert_eq!(j2.transpose() * &j2, DMatrix::identity(4, 4));
        let j3 = poisson_matrix(3).unwrap();
        assert_eq!(&j3 * &j3, -DMatrix::identity(6, 6));
        assert!(matches!(poisson_matrix(0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn j_helpers_match_dense() {
        let y = DMatrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let j = poisson_matrix(3).unwrap();
        assert_eq!(j_mul(&y), &j * &y);
        assert_eq!(jt_mul(&y), j.transpose() * &y);
    }

    #[test]
    fn symplectic_checks() {
        assert!(is_symplectic(&cols(4, &[0, 2]), 1e-14).unwrap());
        assert!(!is_symplectic(&cols(4, &[0, 1]), 1e-14).unwrap());
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0]);
        assert!(is_symplectic(&a, 0.0).unwrap());
        assert!(matches!(
            is_symplectic(&DMatrix::zeros(3, 2), 1e-10),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            is_symplectic(&DMatrix::zeros(4, 3), 1e-10),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn inverse_examples() {
        let basis = SymplecticBasis::new(cols(4, &[0, 2])).unwrap();
        assert!(basis.is_orthonormal());
        assert_eq!(basis.inverse(), basis.matrix().transpose());

        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0]);
        let basis = SymplecticBasis::new(a.clone()).unwrap();
        assert!(!basis.is_orthonormal());
        assert!(max_abs(&(basis.inverse() * &a - DMatrix::identity(2, 2))) < 1e-15);

        let bad = cols(4, &[0, 1]);
        assert!(matches!(symplectic_inverse(&bad, 1e-10), Err(Error::StructureViolation { .. })));
        assert!(matches!(SymplecticBasis::new(bad), Err(Error::StructureViolation { .. })));
    }

    #[test]
    fn projection_examples() {
        let basis = SymplecticBasis::new(cols(4, &[0, 2])).unwrap();
        let y = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(basis.project(&y).unwrap(), DMatrix::zeros(4, 1));
        let inside = DMatrix::from_column_slice(4, 1, &[2.0, 0.0, -1.0, 0.0]);
        assert_eq!(basis.project(&inside).unwrap(), inside);
        assert!(basis.project(&DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn sr_insert_examples() {
        let empty = DMatrix::zeros(4, 0);
        let e = sr_insert(&empty, &(unit(4, 0) * 2.0), 1e-12).unwrap();
        assert_eq!(e, unit(4, 0));

        let e1 = cols(4, &[0]);
        assert!(matches!(
            sr_insert(&e1, &unit(4, 0), 1e-12),
            Err(Error::DegenerateCandidate { .. })
        ));
        let e = sr_insert(&e1, &(unit(4, 0) + unit(4, 1)), 1e-12).unwrap();
        assert!((e - unit(4, 1)).norm() < 1e-15);
    }

    #[test]
    fn svd_like_zero_matrix() {
        let f = svd_like(&DMatrix::zeros(4, 3), None).unwrap();
        assert_eq!((f.pairs, f.isotropic), (0, 0));
        assert_eq!(f.s, DMatrix::identity(4, 4));
        assert_eq!(f.q, DMatrix::identity(3, 3));
        assert_eq!(f.d, DMatrix::zeros(4, 3));
        assert!(f.weighted_singular_values().is_empty());
    }

    #[test]
    fn svd_like_rank_one_column() {
        let b = DMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        let f = svd_like(&b, None).unwrap();
        assert_eq!((f.pairs, f.isotropic), (0, 1));
        assert!((f.reconstruct() - &b).norm() < 1e-14);
        assert!(symplecticity_residual(&f.s).unwrap() < 1e-14);
        let w = f.weighted_singular_values();
        assert_eq!(w.len(), 1);
        assert!((w[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn svd_like_full_rank_wide() {
        let b = DMatrix::from_fn(4, 6, |i, j| ((i * 5 + j * 7) % 11) as f64 / 3.0 - 1.5 + (i == j) as u8 as f64);
        let f = svd_like(&b, None).unwrap();
        assert_eq!(f.rank(), 4);
        assert!((f.reconstruct() - &b).norm() <= 1e-8 * b.norm());
        assert!(orthonormality_residual(&f.q) < 1e-12);
        let energy: f64 = f.weighted_singular_values().iter().map(|w| w * w).sum();
        assert!((energy - b.norm_squared()).abs() <= 1e-8 * b.norm_squared());
    }
}

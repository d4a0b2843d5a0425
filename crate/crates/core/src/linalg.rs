//! Dense linear-algebra helpers shared by the solvers.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Seeded generator used everywhere randomness enters the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed from a root seed and a stream label.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = root ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    // filled column-major so the draw order is fixed
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Ridge added to a Gram matrix: `1e-8 * trace / dim`.
pub fn gram_ridge(gram: MatRef<'_, f64>) -> f64 {
    let n = gram.nrows();
    if n == 0 {
        return 0.0;
    }
    let tr: f64 = (0..n).map(|i| gram[(i, i)]).sum();
    1e-8 * tr / n as f64
}

/// Solves `(XᵀX + εI) Y = Xᵀ B` for `Y`, with `ε` from [`gram_ridge`].
pub struct RidgeGram {
    llt: faer::linalg::solvers::Llt<f64>,
    pub ridge: f64,
}

impl RidgeGram {
    pub fn new(x: MatRef<'_, f64>) -> Result<Self> {
        Self::with_ridge(x, None)
    }

    pub fn with_ridge(x: MatRef<'_, f64>, ridge: Option<f64>) -> Result<Self> {
        let mut gram = x.transpose() * x;
        let ridge = ridge.unwrap_or_else(|| gram_ridge(gram.as_ref()));
        let scale = (0..gram.nrows()).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        // an all-zero view still needs an invertible system
        let ridge = if scale == 0.0 { ridge.max(1e-12) } else { ridge };
        for i in 0..gram.nrows() {
            gram[(i, i)] += ridge;
        }
        let llt = gram
            .llt(Side::Lower)
            .map_err(|e| Error::Singular(format!("gram matrix: {e:?}")))?;
        Ok(Self { llt, ridge })
    }

    pub fn solve(&self, rhs: MatRef<'_, f64>) -> Mat<f64> {
        self.llt.solve(rhs)
    }

    /// Returns `Z = X L⁻ᵀ` so that `Z Zᵀ = X (XᵀX + εI)⁻¹ Xᵀ`.
    pub fn whiten(&self, x: MatRef<'_, f64>) -> Mat<f64> {
        // Zᵀ = L⁻¹ Xᵀ
        let mut zt = x.transpose().to_owned();
        self.llt
            .L()
            .solve_lower_triangular_in_place(zt.as_mut());
        zt.transpose().to_owned()
    }
}

/// Moore-Penrose pseudoinverse by SVD; singular values below `rcond * s_max`
/// are dropped. Returns the pseudoinverse and the number of dropped values.
pub fn pinv(a: MatRef<'_, f64>, rcond: f64) -> Result<(Mat<f64>, usize)> {
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
    let u = svd.U();
    let v = svd.V();
    let mut out = Mat::zeros(a.ncols(), a.nrows());
    let mut dropped = 0;
    for idx in 0..s.nrows() {
        if s[idx] <= rcond * smax || s[idx] == 0.0 {
            dropped += 1;
            continue;
        }
        let inv = 1.0 / s[idx];
        for i in 0..a.ncols() {
            let vi = v[(i, idx)] * inv;
            for j in 0..a.nrows() {
                out[(i, j)] += vi * u[(j, idx)];
            }
        }
    }
    Ok((out, dropped))
}

/// Orthonormal basis of the column space of `a` (thin Householder QR).
pub fn orthonormal_basis(a: MatRef<'_, f64>) -> Mat<f64> {
    a.qr().compute_thin_Q()
}

/// Largest principal angle (radians) between the column spaces of `a` and `b`.
///
/// Computed from the sine form `‖(I − QₐQₐᵀ) Q_b‖₂`, which stays accurate for
/// tiny angles where `acos` of the cosine would not.
pub fn max_principal_angle(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "principal angle between {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let proj = &qa * (qa.transpose() * &qb);
    let resid = &qb - proj;
    let svd = resid
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = if s.nrows() > 0 { s[0] } else { 0.0 };
    Ok(smax.clamp(0.0, 1.0).asin())
}

/// Flips each column so its first non-negligible coordinate is positive.
pub fn fix_column_signs(m: &mut Mat<f64>) {
    for j in 0..m.ncols() {
        let col_max = (0..m.nrows()).map(|i| m[(i, j)].abs()).fold(0.0, f64::max);
        let tol = col_max * 1e-8;
        if let Some(first) = (0..m.nrows()).find(|&i| m[(i, j)].abs() > tol) {
            if m[(first, j)] < 0.0 {
                for i in 0..m.nrows() {
                    m[(i, j)] = -m[(i, j)];
                }
            }
        }
    }
}

/// Full symmetric eigendecomposition with eigenvalues in descending order.
pub fn symmetric_eigen_desc(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let n = s.nrows();
    let values: Vec<f64> = (0..n).rev().map(|i| s[i]).collect();
    let vectors = Mat::from_fn(m.nrows(), n, |i, j| u[(i, n - 1 - j)]);
    Ok((values, vectors))
}

/// Top eigenpairs of a symmetric PSD matrix whose rank is known not to
/// exceed `rank_bound`.
///
/// The range of `m` is captured exactly by `m Ω` for a Gaussian `Ω` with
/// `rank_bound + 8` columns; one extra subspace pass cleans up rounding, and
/// Rayleigh-Ritz on the captured range yields the eigenpairs.
pub fn low_rank_eigen_desc(
    m: MatRef<'_, f64>,
    rank_bound: usize,
    seed: u64,
) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = m.nrows();
    let width = (rank_bound + 8).min(n);
    if width == n {
        return symmetric_eigen_desc(m);
    }
    let mut rng = seeded_rng(seed);
    let omega = gaussian_matrix(n, width, &mut rng);
    let q = orthonormal_basis((m * &omega).as_ref());
    let q = orthonormal_basis((m * &q).as_ref());
    let mq = m * &q;
    let mut small = q.transpose() * &mq;
    symmetrize(&mut small);
    let (values, vecs) = symmetric_eigen_desc(small.as_ref())?;
    Ok((values, &q * vecs))
}

pub fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

pub fn identity(n: usize) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Scales row `i` of `m` by `factors[i]`.
pub fn scale_rows(m: &Mat<f64>, factors: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * factors[i])
}

pub fn to_rows(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

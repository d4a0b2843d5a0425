//! Spectral solvers for MAX-VAR GCCA with missing rows.
//!
//! `M = Σ_d P^(d)` sums the projections onto the column spaces of the views.
//! `G*` holds its top-k orthonormal eigenvectors and the group configuration
//! is `G = √n K^p G*`, with `p = −½` for the standard constraint `GᵀKG = nI`
//! and `p = +½` for the inverse-sum constraint `GᵀK⁻¹G = nI`. The two
//! variants share `G*` and differ only in how rows of `G` are weighted.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use super::model::{constraint_error, FitDiagnostics, GccaModel, Variant};
use super::view::{validate_views, ViewMatrix};
use crate::error::{Error, Result};
use crate::linalg::{fix_column_signs, low_rank_eigen_desc, symmetric_eigen_desc, RidgeGram};

const MIB: u64 = 1 << 20;
const RANGE_FINDER_SEED: u64 = 0x6763_6361;

/// How `P^(d)` is formed in the exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssmProjection {
    /// `P^(d) = X(XᵀX + εI)⁻¹Xᵀ` for every variant.
    #[default]
    Projection,
    /// `P^(d) = K^(d) − X(XᵀX + εI)⁻¹Xᵀ` for the inverse-sum variant.
    Literal,
}

/// Settings for the rank-m approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastConfig {
    /// Truncation rank per view.
    pub m: usize,
    /// Ridge noise `r` inside `S(rI + SSᵀ)⁻¹S`.
    pub r: f64,
    /// Take `G*` from `K^½ M̃` instead of `M̃`. Off by default, since only
    /// the unweighted factor reproduces the exact solver's `G*`.
    pub row_weighted: bool,
}

impl Default for FastConfig {
    fn default() -> Self {
        Self {
            m: 50,
            r: 1e-6,
            row_weighted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GccaOptions {
    /// Fixed Gram ridge; `None` uses `1e-8 · tr(XᵀX) / k_d`.
    pub ridge: Option<f64>,
    pub issm_projection: IssmProjection,
    /// Working-set ceiling in MiB. The exact solver refuses above it.
    pub memory_budget_mib: u64,
    pub fast: FastConfig,
    /// Eigenvalues at or below `rank_tol · λ_max` count as zero.
    pub rank_tol: f64,
    /// Relative ridge `ρ` of the reconstruction `G Wᵀ(WWᵀ + εI)⁻¹`, with
    /// `ε = ρ · tr(WWᵀ) / k_d`. Zero gives the plain pseudoinverse.
    pub reconstruction_ridge: f64,
}

impl Default for GccaOptions {
    fn default() -> Self {
        Self {
            ridge: None,
            issm_projection: IssmProjection::Projection,
            memory_budget_mib: 4096,
            fast: FastConfig::default(),
            rank_tol: 1e-9,
            reconstruction_ridge: 1e-2,
        }
    }
}

/// Bytes needed to hold the dense `L × L` matrix of the exact solver.
pub fn exact_memory_bytes(rows: usize) -> u64 {
    (rows as u64) * (rows as u64) * 8
}

/// Bytes held by the fast solver: the stacked `L × Σm` factor plus `G`.
pub fn fast_memory_bytes(rows: usize, total_rank: usize, k: usize) -> u64 {
    (rows as u64) * ((total_rank + k) as u64) * 8
}

fn check_budget(required: u64, opts: &GccaOptions) -> Result<()> {
    let budget = opts.memory_budget_mib.saturating_mul(MIB);
    if required > budget {
        return Err(Error::MemoryBudget {
            required_mib: required.div_ceil(MIB),
            budget_mib: opts.memory_budget_mib,
        });
    }
    Ok(())
}

/// Fits any variant; `FastIssm` is routed to [`fit_fast_gcca_issm`].
pub fn fit(views: &[ViewMatrix], k: usize, variant: Variant, opts: &GccaOptions) -> Result<GccaModel> {
    match variant {
        Variant::FastIssm => fit_fast_gcca_issm(views, k, &opts.fast, opts),
        _ => fit_gcca(views, k, variant, opts),
    }
}

/// Dense `M = Σ_d P^(d)` for the given views.
pub fn sum_of_projections(views: &[ViewMatrix], ridge: Option<f64>) -> Result<Mat<f64>> {
    let rows = views.first().map_or(0, ViewMatrix::rows);
    let mut m = Mat::<f64>::zeros(rows, rows);
    for v in views {
        let z = RidgeGram::with_ridge(v.x(), ridge)?.whiten(v.x());
        matmul(m.as_mut(), Accum::Add, &z, z.transpose(), 1.0, Par::Seq);
    }
    Ok(m)
}

/// Exact spectral solution. Materializes the `L × L` matrix `M`.
pub fn fit_gcca(
    views: &[ViewMatrix],
    k: usize,
    variant: Variant,
    opts: &GccaOptions,
) -> Result<GccaModel> {
    if variant == Variant::FastIssm {
        return Err(Error::Config(
            "fit_gcca solves standard or issm; use fit_fast_gcca_issm for fast_issm".into(),
        ));
    }
    let counts = validate_views(views, k)?;
    let rows = counts.len();
    let n = views.len();
    let required = exact_memory_bytes(rows);
    check_budget(required, opts)?;

    let literal = variant == Variant::Issm && opts.issm_projection == IssmProjection::Literal;
    let mut m = Mat::<f64>::zeros(rows, rows);
    let mut grams = Vec::with_capacity(n);
    let mut rank_bound = 0;
    for v in views {
        let gram = RidgeGram::with_ridge(v.x(), opts.ridge)?;
        let z = gram.whiten(v.x());
        if literal {
            for (i, &p) in v.presence().iter().enumerate() {
                if p {
                    m[(i, i)] += 1.0;
                }
            }
            matmul(m.as_mut(), Accum::Add, &z, z.transpose(), -1.0, Par::Seq);
        } else {
            matmul(m.as_mut(), Accum::Add, &z, z.transpose(), 1.0, Par::Seq);
        }
        rank_bound += v.width().min(v.present_count());
        grams.push(gram);
    }

    let (values, vectors) = if literal {
        symmetric_eigen_desc(m.as_ref())?
    } else {
        low_rank_eigen_desc(m.as_ref(), rank_bound, RANGE_FINDER_SEED)?
    };
    check_rank(&values, k, opts.rank_tol)?;

    let mut g_star = vectors.subcols(0, k).to_owned();
    fix_column_signs(&mut g_star);
    let lambda: Vec<f64> = values[..k].to_vec();

    let resid = {
        let mg = &m * &g_star;
        let gl = Mat::from_fn(rows, k, |i, j| g_star[(i, j)] * lambda[j]);
        (mg - gl).norm_l2() / m.norm_l2().max(f64::MIN_POSITIVE)
    };
    drop(m);

    finish(views, grams, counts, g_star, lambda, variant, resid, required, opts)
}

/// Rank-m approximation of the inverse-sum variant.
///
/// Each view contributes `A^(d) T^(d)` from its rank-m SVD, with
/// `T² = S(rI + S²)⁻¹S`; `G*` are the top left singular vectors of
/// `M̃ = [A^(1)T^(1) … A^(n)T^(n)]`, so `M̃M̃ᵀ` stands in for `M`. Nothing of
/// size `L × L` is formed.
pub fn fit_fast_gcca_issm(
    views: &[ViewMatrix],
    k: usize,
    cfg: &FastConfig,
    opts: &GccaOptions,
) -> Result<GccaModel> {
    let counts = validate_views(views, k)?;
    let rows = counts.len();
    let max_m = views
        .iter()
        .map(|v| v.width().min(rows))
        .min()
        .unwrap_or(0);
    if cfg.m == 0 || cfg.m > max_m {
        return Err(Error::Config(format!(
            "fast truncation rank m = {} must be in 1..={max_m}",
            cfg.m
        )));
    }
    if cfg.r <= 0.0 || !cfg.r.is_finite() {
        return Err(Error::Config(format!("fast ridge r = {} must be positive", cfg.r)));
    }
    let total = cfg.m * views.len();
    let required = fast_memory_bytes(rows, total, k);
    check_budget(required, opts)?;

    let row_weight: Vec<f64> = if cfg.row_weighted {
        counts.iter().map(|c| c.sqrt()).collect()
    } else {
        vec![1.0; rows]
    };
    let mut stacked = Mat::<f64>::zeros(rows, total);
    for (d, v) in views.iter().enumerate() {
        let svd = v
            .x()
            .thin_svd()
            .map_err(|e| Error::Numerical(format!("svd of view {} failed: {e:?}", v.label())))?;
        let s = svd.S().column_vector();
        let a = svd.U();
        for c in 0..cfg.m {
            let t = fast_weight(s[c], cfg.r);
            for i in 0..rows {
                stacked[(i, d * cfg.m + c)] = row_weight[i] * a[(i, c)] * t;
            }
        }
    }

    let svd = stacked
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd of stacked factors failed: {e:?}")))?;
    let sv = svd.S().column_vector();
    let values: Vec<f64> = (0..sv.nrows()).map(|i| sv[i] * sv[i]).collect();
    check_rank(&values, k, opts.rank_tol)?;

    let mut g_star = svd.U().subcols(0, k).to_owned();
    fix_column_signs(&mut g_star);
    let lambda: Vec<f64> = values[..k].to_vec();

    // residual of (Y Yᵀ) G* = G* Λ without forming Y Yᵀ; ‖YYᵀ‖_F = ‖YᵀY‖_F
    let resid = {
        let ytg = stacked.transpose() * &g_star;
        let mg = &stacked * ytg;
        let gl = Mat::from_fn(rows, k, |i, j| g_star[(i, j)] * lambda[j]);
        let norm = (stacked.transpose() * &stacked).norm_l2();
        (mg - gl).norm_l2() / norm.max(f64::MIN_POSITIVE)
    };
    drop(stacked);

    let grams = views
        .iter()
        .map(|v| RidgeGram::with_ridge(v.x(), opts.ridge))
        .collect::<Result<Vec<_>>>()?;
    finish(
        views,
        grams,
        counts,
        g_star,
        lambda,
        Variant::FastIssm,
        resid,
        required,
        opts,
    )
}

/// Diagonal entry of `T` for singular value `s`: `T² = s² / (r + s²)`.
pub fn fast_weight(s: f64, r: f64) -> f64 {
    s / (r + s * s).sqrt()
}

fn check_rank(values: &[f64], k: usize, tol: f64) -> Result<()> {
    let top = values.first().copied().unwrap_or(0.0);
    let attainable = values.iter().filter(|&&v| v > tol * top && v > 0.0).count();
    if k > attainable {
        return Err(Error::RankDeficient {
            requested: k,
            attainable,
        });
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    views: &[ViewMatrix],
    grams: Vec<RidgeGram>,
    counts: Vec<f64>,
    g_star: Mat<f64>,
    lambda: Vec<f64>,
    variant: Variant,
    eigen_residual: f64,
    estimated_bytes: u64,
    opts: &GccaOptions,
) -> Result<GccaModel> {
    let n = views.len();
    let p = variant.row_power();
    let root_n = (n as f64).sqrt();
    let g = Mat::from_fn(g_star.nrows(), g_star.ncols(), |i, j| {
        root_n * counts[i].powf(p) * g_star[(i, j)]
    });
    let w: Vec<Mat<f64>> = views
        .iter()
        .zip(&grams)
        .map(|(v, gram)| gram.solve((v.x().transpose() * &g).as_ref()))
        .collect();
    let constraint_error = constraint_error(g.as_ref(), &counts, variant, n);
    Ok(GccaModel {
        variant,
        g,
        w,
        labels: views.iter().map(|v| v.label().to_string()).collect(),
        view_means: views.iter().map(|v| v.means().to_vec()).collect(),
        eigenvalues: lambda,
        selection_counts: counts,
        reconstruction_ridge: opts.reconstruction_ridge,
        diagnostics: FitDiagnostics {
            eigen_residual,
            constraint_error,
            estimated_bytes,
        },
    })
}

/// Projection matrix `P = X(XᵀX + εI)⁻¹Xᵀ` of a single view.
pub fn projection(x: MatRef<'_, f64>, ridge: Option<f64>) -> Result<Mat<f64>> {
    let z = RidgeGram::with_ridge(x, ridge)?.whiten(x);
    Ok(&z * z.transpose())
}

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which constraint (and therefore which row weighting of `G`) a fit used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// MAX-VAR with missing samples: `GᵀKG = nI`.
    Standard,
    /// Inverse sum of selection matrices: `GᵀK⁻¹G = nI`.
    Issm,
    /// Rank-m SVD approximation of `Issm` that never forms the L×L matrix.
    FastIssm,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Issm => "issm",
            Variant::FastIssm => "fast_issm",
        }
    }

    /// Exponent `p` of the row weighting `G = √n K^p G*`.
    pub(crate) fn row_power(self) -> f64 {
        match self {
            Variant::Standard => -0.5,
            Variant::Issm | Variant::FastIssm => 0.5,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "gcca" => Ok(Variant::Standard),
            "issm" => Ok(Variant::Issm),
            "fast_issm" | "fast-issm" => Ok(Variant::FastIssm),
            other => Err(Error::Config(format!("unknown gcca variant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerical self-checks recorded at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `‖A G* − G* Λ‖_F / ‖A‖_F` for the operator `A` that was decomposed.
    pub eigen_residual: f64,
    /// `‖GᵀK^{∓1}G − nI‖_F / n`.
    pub constraint_error: f64,
    /// Peak working-set estimate for the solve, in bytes.
    pub estimated_bytes: u64,
}

/// A fitted multi-view model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GccaModel {
    pub variant: Variant,
    /// `L × k` group configuration.
    #[serde(with = "crate::dump::mat_rows")]
    pub g: Mat<f64>,
    /// Per-view `k_d × k` canonical components.
    #[serde(with = "crate::dump::mat_list")]
    pub w: Vec<Mat<f64>>,
    pub labels: Vec<String>,
    /// Column means removed from each view before fitting.
    pub view_means: Vec<Vec<f64>>,
    /// Top eigenvalues of `M`, descending.
    pub eigenvalues: Vec<f64>,
    /// Diagonal of `K`.
    pub selection_counts: Vec<f64>,
    /// Relative ridge used by [`GccaModel::reconstruct_view`].
    pub reconstruction_ridge: f64,
    pub diagnostics: FitDiagnostics,
}

impl GccaModel {
    pub fn k(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_views(&self) -> usize {
        self.w.len()
    }

    pub fn rows(&self) -> usize {
        self.g.nrows()
    }

    pub fn view_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Config(format!("view {label:?} is not part of the model")))
    }

    /// Orthonormal `G*` recovered from `G` by undoing the row weighting.
    pub fn normalized_configuration(&self) -> Mat<f64> {
        let n = self.n_views() as f64;
        let p = self.variant.row_power();
        Mat::from_fn(self.g.nrows(), self.g.ncols(), |i, j| {
            self.g[(i, j)] * self.selection_counts[i].powf(-p) / n.sqrt()
        })
    }

    /// `‖GᵀK^{∓1}G − nI‖_F / n` evaluated from the stored fields.
    pub fn constraint_error(&self) -> f64 {
        constraint_error(
            self.g.as_ref(),
            &self.selection_counts,
            self.variant,
            self.n_views(),
        )
    }

    /// Least-squares view reconstruction `Û = G Wᵀ(WWᵀ + εI)⁻¹` in the
    /// centered space.
    pub fn reconstruct_view(&self, label: &str) -> Result<Mat<f64>> {
        let d = self.view_index(label)?;
        self.reconstruct_index(d)
    }

    pub fn reconstruct_index(&self, d: usize) -> Result<Mat<f64>> {
        let w = self.w.get(d).ok_or(Error::OutOfRange {
            what: "view",
            index: d,
            size: self.w.len(),
        })?;
        reconstruct(self.g.as_ref(), w.as_ref(), self.reconstruction_ridge)
    }

    /// Reconstruction with the view's column means added back.
    pub fn reconstruct_view_uncentered(&self, label: &str) -> Result<Mat<f64>> {
        let d = self.view_index(label)?;
        let centered = self.reconstruct_index(d)?;
        let means = &self.view_means[d];
        Ok(Mat::from_fn(centered.nrows(), centered.ncols(), |i, j| {
            centered[(i, j)] + means[j]
        }))
    }
}

/// Solves `Û W ≈ G` for `Û` by ridge least squares,
/// `Û = G Wᵀ(WWᵀ + εI)⁻¹` with `ε = ridge · tr(WWᵀ) / k_d`.
///
/// `ridge = 0` gives `G W⁺`, which is `G W⁻¹` for square invertible `W`.
pub fn reconstruct(g: MatRef<'_, f64>, w: MatRef<'_, f64>, ridge: f64) -> Result<Mat<f64>> {
    if w.ncols() != g.ncols() {
        return Err(Error::Dimension(format!(
            "W has {} columns but G has {}",
            w.ncols(),
            g.ncols()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("reconstruction ridge must be >= 0, got {ridge}")));
    }
    // in the SVD basis W = Q S Vᵀ the ridge solution is G V S(S² + ε)⁻¹ Qᵀ
    let svd = w
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd of W failed: {e:?}")))?;
    let s = svd.S().column_vector();
    let energy: f64 = s.iter().map(|v| v * v).sum();
    let eps = ridge * energy / w.nrows().max(1) as f64;
    let top = s.iter().copied().fold(0.0, f64::max);
    let mut dropped = 0;
    let gain: Vec<f64> = s
        .iter()
        .map(|&v| {
            if v <= 1e-12 * top {
                dropped += 1;
                0.0
            } else {
                v / (v * v + eps)
            }
        })
        .collect();
    if dropped > 0 {
        log::warn!("reconstruction: W has {dropped} negligible singular values");
    }
    let gv = g * svd.V();
    let scaled = Mat::from_fn(gv.nrows(), gv.ncols(), |i, j| gv[(i, j)] * gain[j]);
    Ok(scaled * svd.U().transpose())
}

pub(crate) fn constraint_error(
    g: MatRef<'_, f64>,
    counts: &[f64],
    variant: Variant,
    n_views: usize,
) -> f64 {
    let k = g.ncols();
    let n = n_views as f64;
    // standard weighs rows by K, issm by K⁻¹
    let weights: Vec<f64> = counts
        .iter()
        .map(|&c| c.powf(-2.0 * variant.row_power()))
        .collect();
    let mut err = 0.0;
    for a in 0..k {
        for b in a..k {
            let s: f64 = (0..g.nrows())
                .map(|i| g[(i, a)] * g[(i, b)] * weights[i])
                .sum();
            let target = if a == b { n } else { 0.0 };
            let d = (s - target).powi(2);
            err += if a == b { d } else { 2.0 * d };
        }
    }
    err.sqrt() / n
}

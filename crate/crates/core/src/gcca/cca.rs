//! Two-view canonical correlation analysis.
//!
//! Used as an independent reference for the multi-view solvers: with two
//! fully observed views the spectrum of the summed projections is `1 ± ρ`.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CcaModel {
    /// `k_x × p` canonical basis for the first view, one pair per column.
    pub a: Mat<f64>,
    /// `k_y × p` canonical basis for the second view.
    pub b: Mat<f64>,
    /// Canonical correlations, descending, `p = min(k_x, k_y)`.
    pub rho: Vec<f64>,
}

fn centered(m: MatRef<'_, f64>) -> Mat<f64> {
    let n = m.nrows() as f64;
    let means: Vec<f64> = (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)]).sum::<f64>() / n)
        .collect();
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - means[j])
}

fn covariance_factor(c: &Mat<f64>, which: &str) -> Result<faer::linalg::solvers::Llt<f64>> {
    let llt = c
        .llt(Side::Lower)
        .map_err(|_| Error::Singular(format!("C_{which}{which} is not positive definite")))?;
    let l = llt.L();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= 1e-12 * max) {
        return Err(Error::Singular(format!("C_{which}{which} is numerically rank deficient")));
    }
    Ok(llt)
}

/// Fits all `min(k_x, k_y)` canonical pairs of `x` and `y` (samples in rows).
///
/// `ridge` is added to both auto-covariances. The bases are scaled so each
/// canonical variate has unit variance.
pub fn fit_cca(x: MatRef<'_, f64>, y: MatRef<'_, f64>, ridge: f64) -> Result<CcaModel> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "cca views have {} and {} samples",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() < 2 {
        return Err(Error::EmptyDataset("cca needs at least 2 samples".into()));
    }
    let denom = (x.nrows() - 1) as f64;
    let xc = centered(x);
    let yc = centered(y);
    let mut cxx = xc.transpose() * &xc * faer::Scale(1.0 / denom);
    let mut cyy = yc.transpose() * &yc * faer::Scale(1.0 / denom);
    let cxy = xc.transpose() * &yc * faer::Scale(1.0 / denom);
    for i in 0..cxx.nrows() {
        cxx[(i, i)] += ridge;
    }
    for i in 0..cyy.nrows() {
        cyy[(i, i)] += ridge;
    }
    let lx = covariance_factor(&cxx, "x")?;
    let ly = covariance_factor(&cyy, "y")?;

    // T = Lx⁻¹ Cxy Ly⁻ᵀ; its singular values are the canonical correlations.
    let mut t = cxy.clone();
    lx.L().solve_lower_triangular_in_place(t.as_mut());
    let mut tt = t.transpose().to_owned();
    ly.L().solve_lower_triangular_in_place(tt.as_mut());
    let t = tt.transpose().to_owned();

    let svd = t
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    let p = x.ncols().min(y.ncols());
    let s = svd.S().column_vector();
    let mut ua = svd.U().subcols(0, p).to_owned();
    let mut vb = svd.V().subcols(0, p).to_owned();
    // a = Lx⁻ᵀ u, b = Ly⁻ᵀ v
    lx.L()
        .transpose()
        .solve_upper_triangular_in_place(ua.as_mut());
    ly.L()
        .transpose()
        .solve_upper_triangular_in_place(vb.as_mut());
    let (mut a, mut b) = (ua, vb);
    for j in 0..p {
        let col_max = (0..a.nrows()).map(|i| a[(i, j)].abs()).fold(0.0, f64::max);
        if let Some(first) = (0..a.nrows()).find(|&i| a[(i, j)].abs() > 1e-8 * col_max) {
            if a[(first, j)] < 0.0 {
                for i in 0..a.nrows() {
                    a[(i, j)] = -a[(i, j)];
                }
                for i in 0..b.nrows() {
                    b[(i, j)] = -b[(i, j)];
                }
            }
        }
    }
    let rho = (0..p).map(|i| s[i].clamp(0.0, 1.0)).collect();
    Ok(CcaModel { a, b, rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, seeded_rng};

    #[test]
    fn identical_views_are_perfectly_correlated() {
        let mut rng = seeded_rng(11);
        let x = gaussian_matrix(100, 3, &mut rng);
        let model = fit_cca(x.as_ref(), x.as_ref(), 0.0).unwrap();
        assert!((model.rho[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn permuted_columns_give_unit_correlations() {
        let mut rng = seeded_rng(12);
        let x = gaussian_matrix(80, 4, &mut rng);
        let y = Mat::from_fn(80, 4, |i, j| x[(i, (j + 2) % 4)]);
        let model = fit_cca(x.as_ref(), y.as_ref(), 0.0).unwrap();
        for r in &model.rho {
            assert!((r - 1.0).abs() < 1e-8, "rho {r}");
        }
    }

    #[test]
    fn canonical_variates_are_uncorrelated_with_unit_variance() {
        let mut rng = seeded_rng(13);
        let x = gaussian_matrix(150, 4, &mut rng);
        let noise = gaussian_matrix(150, 3, &mut rng);
        let mix = gaussian_matrix(4, 3, &mut rng);
        let y = &x * &mix + noise;
        let model = fit_cca(x.as_ref(), y.as_ref(), 0.0).unwrap();
        let xc = centered(x.as_ref());
        let cxx = xc.transpose() * &xc * faer::Scale(1.0 / 149.0);
        let gram = model.a.transpose() * &cxx * &model.a;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-8);
            }
        }
        assert!(model.rho.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rank_deficient_covariance_without_ridge_is_an_error() {
        let mut rng = seeded_rng(14);
        let base = gaussian_matrix(50, 2, &mut rng);
        let x = Mat::from_fn(50, 3, |i, j| if j < 2 { base[(i, j)] } else { base[(i, 0)] });
        let y = gaussian_matrix(50, 2, &mut rng);
        assert!(matches!(
            fit_cca(x.as_ref(), y.as_ref(), 0.0),
            Err(Error::Singular(_))
        ));
        assert!(fit_cca(x.as_ref(), y.as_ref(), 1e-3).is_ok());
    }
}

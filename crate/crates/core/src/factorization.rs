//! Per-domain matrix factorization `r̂_ij = μ + u_iᵀv_j` trained by SGD, the
//! global-mean Offset baseline, and PCA user features.

use faer::Mat;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::RatingsMatrix;
use crate::error::{Error, Result};
use crate::linalg::{derive_seed, fix_column_signs, seeded_rng, symmetric_eigen_desc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Latent dimension `k_d`.
    pub factors: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative decay of the learning rate.
    pub lr_decay: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub init_sigma: f64,
    pub seed: u64,
    /// Bounds applied to predictions, not during training.
    pub clamp: Option<(f64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            factors: 50,
            learning_rate: 0.005,
            lr_decay: 0.95,
            lambda: 0.05,
            epochs: 30,
            init_sigma: 0.1,
            seed: 0,
            clamp: Some((1.0, 5.0)),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.factors == 0 {
            return bad("factors must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return bad("init_sigma must be positive");
        }
        if let Some((lo, hi)) = self.clamp {
            if !(lo < hi) {
                return bad("clamp needs lo < hi");
            }
        }
        Ok(())
    }
}

fn clamp_to(x: f64, bounds: Option<(f64, f64)>) -> f64 {
    match bounds {
        Some((lo, hi)) => x.clamp(lo, hi),
        None => x,
    }
}

/// A fitted factorization of one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub domain: String,
    pub mu: f64,
    /// `n_users × k` user factors.
    #[serde(with = "crate::dump::mat_rows")]
    pub u: Mat<f64>,
    /// `n_items × k` item factors.
    #[serde(with = "crate::dump::mat_rows")]
    pub v: Mat<f64>,
    pub lambda: f64,
    pub clamp: Option<(f64, f64)>,
    /// SGD epochs run so far; the learning-rate schedule continues from here.
    pub epochs_done: usize,
}

impl FactorModel {
    /// Starting point for SGD: `μ` from the ratings, factors drawn from
    /// `N(0, init_sigma²)`. Rows of users and items without ratings are
    /// zero, so they predict `μ` until something else sets them.
    pub fn initialize(r: &RatingsMatrix, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mu = r
            .mean()
            .ok_or_else(|| Error::EmptyDataset(format!("no training ratings in {:?}", r.domain())))?;
        let mut rng = seeded_rng(derive_seed(cfg.seed, 0));
        let normal = Normal::new(0.0, cfg.init_sigma).map_err(|e| Error::Config(e.to_string()))?;
        let k = cfg.factors;
        let mut draw = |rows: usize| {
            let mut m = Mat::zeros(rows, k);
            for i in 0..rows {
                for j in 0..k {
                    m[(i, j)] = normal.sample(&mut rng);
                }
            }
            m
        };
        let mut u = draw(r.n_users());
        let mut v = draw(r.n_items());
        for (i, &c) in r.user_counts().iter().enumerate() {
            if c == 0 {
                u.row_mut(i).fill(0.0);
            }
        }
        for (j, &c) in r.item_counts().iter().enumerate() {
            if c == 0 {
                v.row_mut(j).fill(0.0);
            }
        }
        Ok(Self {
            domain: r.domain().to_string(),
            mu,
            u,
            v,
            lambda: cfg.lambda,
            clamp: cfg.clamp,
            epochs_done: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_users(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.v.nrows()
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_users() {
            return Err(Error::OutOfRange {
                what: "user",
                index: i,
                size: self.n_users(),
            });
        }
        if j >= self.n_items() {
            return Err(Error::OutOfRange {
                what: "item",
                index: j,
                size: self.n_items(),
            });
        }
        Ok(())
    }

    /// `μ + u_iᵀv_j` without clamping.
    pub fn predict_raw(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i, j)?;
        Ok(self.mu + (0..self.k()).map(|c| self.u[(i, c)] * self.v[(j, c)]).sum::<f64>())
    }

    pub fn predict(&self, i: usize, j: usize) -> Result<f64> {
        Ok(clamp_to(self.predict_raw(i, j)?, self.clamp))
    }

    /// Mean squared error of clamped predictions over `r`'s entries.
    pub fn mse(&self, r: &RatingsMatrix) -> Result<f64> {
        mean_squared_error(r, |i, j| self.predict(i, j))
    }

    /// `Σ_Ω (r − μ − uᵀv)² + λ(‖u_i‖² + ‖v_j‖²)`.
    pub fn objective(&self, r: &RatingsMatrix) -> Result<f64> {
        let mut total = 0.0;
        for e in r.entries() {
            let (i, j) = (e.user as usize, e.item as usize);
            let err = e.value - self.predict_raw(i, j)?;
            let norms: f64 = (0..self.k())
                .map(|c| self.u[(i, c)].powi(2) + self.v[(j, c)].powi(2))
                .sum();
            total += err * err + self.lambda * norms;
        }
        Ok(total)
    }

    /// Runs `epochs` more SGD epochs over `r`, continuing the schedule.
    /// Returns the objective after each epoch.
    pub fn train_epochs(&mut self, r: &RatingsMatrix, cfg: &TrainConfig, epochs: usize) -> Result<Vec<f64>> {
        cfg.validate()?;
        if r.n_users() != self.n_users() || r.n_items() != self.n_items() {
            return Err(Error::Dimension(format!(
                "model is {}x{} users/items but ratings are {}x{}",
                self.n_users(),
                self.n_items(),
                r.n_users(),
                r.n_items()
            )));
        }
        let k = self.k();
        // row-major working copies so each update touches contiguous memory
        let mut u: Vec<f64> = (0..self.n_users()).flat_map(|i| (0..k).map(move |c| (i, c))).map(|(i, c)| self.u[(i, c)]).collect();
        let mut v: Vec<f64> = (0..self.n_items()).flat_map(|i| (0..k).map(move |c| (i, c))).map(|(i, c)| self.v[(i, c)]).collect();
        let entries = r.entries();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut trace = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let epoch = self.epochs_done;
            let lr = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
            order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
            order.shuffle(&mut seeded_rng(derive_seed(cfg.seed, epoch as u64 + 1)));
            for &p in &order {
                let e = entries[p];
                let ui = &mut u[e.user as usize * k..(e.user as usize + 1) * k];
                let vj = &mut v[e.item as usize * k..(e.item as usize + 1) * k];
                let dot: f64 = ui.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
                let err = e.value - self.mu - dot;
                for c in 0..k {
                    let (a, b) = (ui[c], vj[c]);
                    ui[c] += lr * (err * b - self.lambda * a);
                    vj[c] += lr * (err * a - self.lambda * b);
                }
            }
            self.epochs_done += 1;
            let obj = objective_rows(entries, self.mu, self.lambda, &u, &v, k);
            if !obj.is_finite() {
                return Err(Error::Diverged { epoch: self.epochs_done });
            }
            trace.push(obj);
        }
        self.u = Mat::from_fn(self.n_users(), k, |i, c| u[i * k + c]);
        self.v = Mat::from_fn(self.n_items(), k, |i, c| v[i * k + c]);
        Ok(trace)
    }
}

fn objective_rows(entries: &[crate::corpus::Rating], mu: f64, lambda: f64, u: &[f64], v: &[f64], k: usize) -> f64 {
    entries
        .iter()
        .map(|e| {
            let ui = &u[e.user as usize * k..(e.user as usize + 1) * k];
            let vj = &v[e.item as usize * k..(e.item as usize + 1) * k];
            let dot: f64 = ui.iter().zip(vj).map(|(a, b)| a * b).sum();
            let norms: f64 = ui.iter().chain(vj).map(|x| x * x).sum();
            (e.value - mu - dot).powi(2) + lambda * norms
        })
        .sum()
}

/// Fits a factorization with `cfg.epochs` epochs of SGD. Users or items
/// without ratings keep their zero rows.
pub fn fit_mf(r: &RatingsMatrix, cfg: &TrainConfig) -> Result<FactorModel> {
    fit_mf_traced(r, cfg).map(|(m, _)| m)
}

/// As [`fit_mf`], also returning the objective at the start and after each
/// epoch.
pub fn fit_mf_traced(r: &RatingsMatrix, cfg: &TrainConfig) -> Result<(FactorModel, Vec<f64>)> {
    let mut model = FactorModel::initialize(r, cfg)?;
    let mut trace = vec![model.objective(r)?];
    trace.extend(model.train_epochs(r, cfg, cfg.epochs)?);
    Ok((model, trace))
}

/// Predicts the training mean everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetModel {
    pub mu: f64,
}

impl OffsetModel {
    pub fn predict(&self, _i: usize, _j: usize) -> f64 {
        self.mu
    }

    pub fn mse(&self, r: &RatingsMatrix) -> Result<f64> {
        mean_squared_error(r, |_, _| Ok(self.mu))
    }
}

pub fn offset_baseline(r: &RatingsMatrix) -> Result<OffsetModel> {
    r.mean()
        .map(|mu| OffsetModel { mu })
        .ok_or_else(|| Error::EmptyDataset(format!("no ratings in {:?} for the offset baseline", r.domain())))
}

/// Mean of `(r_ij − f(i, j))²` over the entries of `r`.
pub fn mean_squared_error(r: &RatingsMatrix, mut f: impl FnMut(usize, usize) -> Result<f64>) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::EmptyDataset(format!("no ratings in {:?} to score", r.domain())));
    }
    let mut total = 0.0;
    for e in r.entries() {
        total += (e.value - f(e.user as usize, e.item as usize)?).powi(2);
    }
    Ok(total / r.len() as f64)
}

/// Principal-component user features of a rating matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFeatures {
    /// `n_users × k` scores.
    pub scores: Mat<f64>,
    /// `n_items × k` orthonormal directions.
    pub components: Mat<f64>,
    /// Variance along each component, descending.
    pub explained_variance: Vec<f64>,
    /// Column means removed before projecting.
    pub item_means: Vec<f64>,
}

/// Dense user-item matrix with missing ratings as zero, columns centered.
pub fn centered_dense(r: &RatingsMatrix) -> (Mat<f64>, Vec<f64>) {
    let mut x = Mat::<f64>::zeros(r.n_users(), r.n_items());
    for e in r.entries() {
        x[(e.user as usize, e.item as usize)] = e.value;
    }
    let rows = r.n_users().max(1) as f64;
    let means: Vec<f64> = (0..r.n_items())
        .map(|j| (0..r.n_users()).map(|i| x[(i, j)]).sum::<f64>() / rows)
        .collect();
    for j in 0..r.n_items() {
        for i in 0..r.n_users() {
            x[(i, j)] -= means[j];
        }
    }
    (x, means)
}

/// Scores of every user on the top `k` principal components of the
/// zero-imputed, column-centered user-item matrix.
pub fn pca_user_features(r: &RatingsMatrix, k: usize) -> Result<PcaFeatures> {
    let limit = r.n_users().min(r.n_items());
    if k == 0 || k > limit {
        return Err(Error::Config(format!("pca needs 1 <= k <= {limit}, got {k}")));
    }
    let (x, item_means) = centered_dense(r);
    let denom = (r.n_users().max(2) - 1) as f64;
    // eigendecompose whichever Gram matrix is smaller
    let components = if r.n_items() <= r.n_users() {
        let gram = x.transpose() * &x;
        let (_, vecs) = symmetric_eigen_desc(gram.as_ref())?;
        vecs.subcols(0, k).to_owned()
    } else {
        let gram = &x * x.transpose();
        let (vals, vecs) = symmetric_eigen_desc(gram.as_ref())?;
        let top = vals[0].max(f64::MIN_POSITIVE);
        let mut dirs = x.transpose() * vecs.subcols(0, k);
        for j in 0..k {
            let norm = vals[j].max(0.0).sqrt();
            let scale = if vals[j] > 1e-14 * top { 1.0 / norm } else { 0.0 };
            for i in 0..dirs.nrows() {
                dirs[(i, j)] *= scale;
            }
        }
        dirs
    };
    let mut components = components;
    fix_column_signs(&mut components);
    let scores = &x * &components;
    let explained_variance = (0..k)
        .map(|j| (0..scores.nrows()).map(|i| scores[(i, j)].powi(2)).sum::<f64>() / denom)
        .collect();
    Ok(PcaFeatures {
        scores,
        components,
        explained_variance,
        item_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Rating;
    use crate::linalg::gaussian_matrix;

    pub(crate) fn dense_matrix(values: &Mat<f64>) -> RatingsMatrix {
        let entries = (0..values.nrows())
            .flat_map(|i| (0..values.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| Rating {
                user: i as u32,
                item: j as u32,
                value: values[(i, j)],
            })
            .collect();
        RatingsMatrix::new(
            "d",
            (0..values.nrows()).map(|i| format!("u{i}")).collect(),
            (0..values.ncols()).map(|j| format!("i{j}")).collect(),
            entries,
        )
        .unwrap()
    }

    fn planted_rank_one() -> RatingsMatrix {
        let mut rng = seeded_rng(77);
        let u = gaussian_matrix(20, 1, &mut rng);
        let v = gaussian_matrix(15, 1, &mut rng);
        dense_matrix(&Mat::from_fn(20, 15, |i, j| 3.0 + 0.5 * u[(i, 0)] * v[(j, 0)]))
    }

    #[test]
    fn constant_ratings_predict_the_constant() {
        let r = dense_matrix(&Mat::from_fn(6, 5, |_, _| 3.0));
        let cfg = TrainConfig {
            factors: 3,
            epochs: 600,
            learning_rate: 0.05,
            lr_decay: 1.0,
            lambda: 0.1,
            ..TrainConfig::default()
        };
        let m = fit_mf(&r, &cfg).unwrap();
        assert_eq!(m.mu, 3.0);
        assert!(m.u.norm_l2() < 1e-3 && m.v.norm_l2() < 1e-3);
        for i in 0..6 {
            for j in 0..5 {
                assert!((m.predict(i, j).unwrap() - 3.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn planted_rank_one_is_fit() {
        let r = planted_rank_one();
        let cfg = TrainConfig {
            factors: 2,
            lambda: 1e-4,
            learning_rate: 0.05,
            lr_decay: 1.0,
            epochs: 2000,
            clamp: None,
            ..TrainConfig::default()
        };
        let m = fit_mf(&r, &cfg).unwrap();
        let mse = m.mse(&r).unwrap();
        assert!(mse < 1e-3, "mse {mse}");
    }

    #[test]
    fn prediction_arithmetic_and_clamp() {
        let mut m = FactorModel {
            domain: "d".into(),
            mu: 3.0,
            u: Mat::from_fn(1, 2, |_, j| if j == 0 { 1.0 } else { 0.0 }),
            v: Mat::from_fn(2, 2, |i, j| if j == 0 { 2.0 + 1.6 * i as f64 } else { 0.0 }),
            lambda: 0.0,
            clamp: Some((1.0, 5.0)),
            epochs_done: 0,
        };
        assert_eq!(m.predict(0, 0).unwrap(), 5.0);
        assert!((m.predict_raw(0, 1).unwrap() - 6.6).abs() < 1e-12);
        assert_eq!(m.predict(0, 1).unwrap(), 5.0);
        assert!(matches!(m.predict(1, 0), Err(Error::OutOfRange { what: "user", .. })));
        m.u = Mat::zeros(1, 2);
        m.v = Mat::zeros(2, 2);
        assert_eq!(m.predict(0, 1).unwrap(), 3.0);
    }

    #[test]
    fn offset_predicts_the_mean() {
        let r = dense_matrix(&Mat::from_fn(1, 2, |_, j| if j == 0 { 2.0 } else { 4.0 }));
        assert_eq!(offset_baseline(&r).unwrap().predict(0, 0), 3.0);
        let single = dense_matrix(&Mat::from_fn(1, 1, |_, _| 5.0));
        assert_eq!(offset_baseline(&single).unwrap().predict(0, 0), 5.0);
    }

    #[test]
    fn offset_train_mse_is_the_variance() {
        let r = planted_rank_one();
        let values: Vec<f64> = r.entries().iter().map(|e| e.value).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mse = offset_baseline(&r).unwrap().mse(&r).unwrap();
        assert!((mse - var).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let r = planted_rank_one();
        let cfg = TrainConfig {
            factors: 2,
            learning_rate: 1e3,
            lr_decay: 1.0,
            init_sigma: 10.0,
            ..TrainConfig::default()
        };
        assert!(matches!(fit_mf(&r, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn warm_start_continues_the_schedule() {
        let r = planted_rank_one();
        let cfg = TrainConfig {
            factors: 2,
            epochs: 6,
            ..TrainConfig::default()
        };
        let full = fit_mf(&r, &cfg).unwrap();
        let mut part = FactorModel::initialize(&r, &cfg).unwrap();
        part.train_epochs(&r, &cfg, 2).unwrap();
        part.train_epochs(&r, &cfg, 4).unwrap();
        assert_eq!(full, part);
    }

    #[test]
    fn unrated_users_predict_the_mean() {
        let mut r = planted_rank_one();
        r = r.subset(&(15..r.len()).collect::<Vec<_>>()).unwrap();
        let cfg = TrainConfig {
            factors: 2,
            epochs: 5,
            ..TrainConfig::default()
        };
        let m = fit_mf(&r, &cfg).unwrap();
        assert_eq!(m.predict(0, 3).unwrap(), m.mu);
        assert!(m.u.row(1).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn pca_rank_one_is_exact() {
        let mut rng = seeded_rng(5);
        let a = gaussian_matrix(12, 1, &mut rng);
        let b = gaussian_matrix(8, 1, &mut rng);
        let r = dense_matrix(&Mat::from_fn(12, 8, |i, j| 3.0 + a[(i, 0)] * b[(j, 0)]));
        let pca = pca_user_features(&r, 1).unwrap();
        let (x, _) = centered_dense(&r);
        let rec = &pca.scores * pca.components.transpose();
        assert!((&rec - &x).norm_l2() < 1e-10);
    }

    #[test]
    fn pca_matches_singular_values_and_is_orthogonal() {
        let mut rng = seeded_rng(6);
        let raw = gaussian_matrix(50, 30, &mut rng);
        let r = dense_matrix(&Mat::from_fn(50, 30, |i, j| 3.0 + raw[(i, j)]));
        let pca = pca_user_features(&r, 5).unwrap();
        let (x, _) = centered_dense(&r);
        let svd = x.thin_svd().unwrap();
        let s = svd.S().column_vector();
        for j in 0..5 {
            let oracle = s[j] * s[j] / 49.0;
            assert!((pca.explained_variance[j] - oracle).abs() < 1e-9 * oracle);
        }
        let gram = pca.components.transpose() * &pca.components;
        for a in 0..5 {
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[(a, b)] - want).abs() < 1e-8);
            }
        }
        let sg = pca.scores.transpose() * &pca.scores;
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    assert!(sg[(a, b)].abs() < 1e-8 * sg[(0, 0)]);
                }
            }
        }
    }

    #[test]
    fn pca_wide_matrix_uses_user_gram() {
        let mut rng = seeded_rng(8);
        let raw = gaussian_matrix(10, 25, &mut rng);
        let r = dense_matrix(&Mat::from_fn(10, 25, |i, j| raw[(i, j)]));
        let pca = pca_user_features(&r, 3).unwrap();
        let gram = pca.components.transpose() * &pca.components;
        assert!((gram - crate::linalg::identity(3)).norm_l2() < 1e-8);
        assert!(pca_user_features(&r, 11).is_err());
    }
}

//! Alternating MF and GCCA training for cross-domain cold-start prediction,
//! and the cross-validated evaluation protocol around it.
//!
//! Each iteration refines every domain's factorization by SGD, ties the user
//! factors of all domains together with GCCA, and replaces each domain's user
//! factors by their reconstruction from the shared representation. Users with
//! no ratings in the target domain thereby receive target factors.

mod data;

pub use data::{amazon_file_name, amazon_pairs, movielens_pairs, DataDir, AMAZON_DOMAINS, MOVIELENS_DOMAINS};

use std::collections::BTreeMap;
use std::io::Write;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{align_users, make_cold_start, split_folds, FoldSplit, RatingsMatrix, UserAlignment};
use crate::error::{Error, Result};
use crate::factorization::{fit_mf, mean_squared_error, offset_baseline, pca_user_features, FactorModel, TrainConfig};
use crate::gcca::{fit, GccaModel, GccaOptions, Variant, ViewMatrix};
use crate::linalg::derive_seed;

/// Target and auxiliary matrices re-expressed over one shared user index.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDomainData {
    pub alignment: UserAlignment,
    pub target: RatingsMatrix,
    pub auxiliaries: Vec<RatingsMatrix>,
}

impl CrossDomainData {
    pub fn new(
        matrices: &BTreeMap<String, RatingsMatrix>,
        target: &str,
        auxiliaries: &[String],
    ) -> Result<Self> {
        let get = |name: &str| {
            matrices
                .get(name)
                .ok_or_else(|| Error::Config(format!("domain {name:?} is not loaded")))
        };
        let mut all = vec![get(target)?];
        for a in auxiliaries {
            if a == target {
                return Err(Error::Config(format!("{a:?} is both target and auxiliary")));
            }
            all.push(get(a)?);
        }
        let alignment = align_users(&all)?;
        let mut reindexed = all
            .iter()
            .map(|m| m.reindex_users(&alignment.user_ids))
            .collect::<Result<Vec<_>>>()?;
        let target = reindexed.remove(0);
        Ok(Self {
            alignment,
            target,
            auxiliaries: reindexed,
        })
    }

    pub fn rows(&self) -> usize {
        self.alignment.len()
    }

    pub fn domains(&self) -> impl Iterator<Item = &RatingsMatrix> {
        std::iter::once(&self.target).chain(&self.auxiliaries)
    }

    /// Users rated in the target and in at least one auxiliary domain; only
    /// they can be turned into cold-start test users.
    pub fn eligible(&self) -> Vec<bool> {
        let counts: Vec<Vec<usize>> = self.auxiliaries.iter().map(RatingsMatrix::user_counts).collect();
        self.target
            .user_counts()
            .iter()
            .enumerate()
            .map(|(i, &c)| c > 0 && counts.iter().any(|a| a[i] > 0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub target: String,
    pub auxiliaries: Vec<String>,
    pub k_mf: usize,
    pub k_gcca: usize,
    pub variant: Variant,
    pub max_iterations: usize,
    /// Stop once the relative validation improvement falls below this.
    pub tol: f64,
    /// SGD epochs per domain in every iteration after the first, which runs
    /// `mf.epochs`.
    pub refit_epochs: usize,
    /// When false, every iteration after the first re-draws the item factors
    /// and runs the full `mf.epochs` from the reconstructed user factors.
    pub warm_start: bool,
    /// Enter the auxiliary factorizations as views. When false the
    /// auxiliaries only supply users, and the shared space comes from the
    /// target factors plus the extra views.
    pub auxiliary_mf_views: bool,
    pub mf: TrainConfig,
    pub gcca: GccaOptions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            target: String::new(),
            auxiliaries: Vec::new(),
            k_mf: 50,
            k_gcca: 75,
            variant: Variant::Issm,
            max_iterations: 20,
            tol: 1e-4,
            refit_epochs: 5,
            warm_start: true,
            auxiliary_mf_views: true,
            mf: TrainConfig::default(),
            gcca: GccaOptions::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target.is_empty() {
            return Err(Error::Config("no target domain".into()));
        }
        if self.auxiliaries.is_empty() {
            return Err(Error::Config("at least one auxiliary domain is required".into()));
        }
        if self.auxiliaries.contains(&self.target) {
            return Err(Error::Config(format!("{:?} is both target and auxiliary", self.target)));
        }
        if self.k_mf == 0 || self.k_gcca == 0 {
            return Err(Error::Config("k_mf and k_gcca must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        self.mf.validate()
    }

    /// SGD settings of domain `d` (0 is the target).
    pub fn domain_train_config(&self, d: usize) -> TrainConfig {
        TrainConfig {
            factors: self.k_mf,
            seed: derive_seed(self.seed, d as u64),
            ..self.mf.clone()
        }
    }
}

/// The best iteration of a cross-domain fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDomainModel {
    pub target: String,
    pub auxiliaries: Vec<String>,
    pub user_ids: Vec<String>,
    pub gcca: GccaModel,
    /// Reconstructed `L × k_mf` target user factors.
    #[serde(with = "crate::dump::mat_rows")]
    pub target_factors: Mat<f64>,
    #[serde(with = "crate::dump::mat_rows")]
    pub target_items: Mat<f64>,
    pub mu_t: f64,
    pub clamp: Option<(f64, f64)>,
    /// Validation MSE after each iteration.
    pub iteration_trace: Vec<f64>,
    /// 1-based index into the trace of the kept iteration.
    pub best_iteration: usize,
    /// Worst GCCA constraint error over all iterations.
    pub max_constraint_error: f64,
    /// Worst relative GCCA eigen residual over all iterations.
    pub max_eigen_residual: f64,
}

impl CrossDomainModel {
    pub fn predict_raw(&self, user: usize, item: usize) -> Result<f64> {
        if user >= self.target_factors.nrows() {
            return Err(Error::OutOfRange {
                what: "user",
                index: user,
                size: self.target_factors.nrows(),
            });
        }
        if item >= self.target_items.nrows() {
            return Err(Error::OutOfRange {
                what: "item",
                index: item,
                size: self.target_items.nrows(),
            });
        }
        let k = self.target_factors.ncols();
        Ok(self.mu_t
            + (0..k)
                .map(|c| self.target_factors[(user, c)] * self.target_items[(item, c)])
                .sum::<f64>())
    }

    /// `μ_t + û_userᵀ v_item`, clamped.
    pub fn predict_target(&self, user: usize, item: usize) -> Result<f64> {
        let raw = self.predict_raw(user, item)?;
        Ok(match self.clamp {
            Some((lo, hi)) => raw.clamp(lo, hi),
            None => raw,
        })
    }

    /// Predictions for every entry of `r`, in entry order.
    pub fn predict_batch(&self, r: &RatingsMatrix) -> Result<Vec<f64>> {
        let u = self.target_factors.as_ref();
        let rows: Vec<usize> = r.entries().iter().map(|e| e.user as usize).collect();
        if let Some(&bad) = rows.iter().find(|&&i| i >= u.nrows()) {
            return Err(Error::OutOfRange {
                what: "user",
                index: bad,
                size: u.nrows(),
            });
        }
        r.entries()
            .iter()
            .map(|e| self.predict_target(e.user as usize, e.item as usize))
            .collect()
    }

    pub fn mse(&self, r: &RatingsMatrix) -> Result<f64> {
        mean_squared_error(r, |i, j| self.predict_target(i, j))
    }

    pub fn iterations(&self) -> usize {
        self.iteration_trace.len()
    }
}

fn restrict_rows(x: &Mat<f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// Runs the alternating procedure on one cold-start split of the target.
///
/// `extra_views` are additional row-aligned views (PCA or topic features)
/// that enter every GCCA fit but are never reconstructed.
pub fn train_cross_domain(
    data: &CrossDomainData,
    split: &FoldSplit,
    cfg: &PipelineConfig,
    extra_views: &[ViewMatrix],
) -> Result<CrossDomainModel> {
    cfg.validate()?;
    if split.domain != data.target.domain() {
        return Err(Error::Config(format!(
            "split is for {:?} but the target is {:?}",
            split.domain,
            data.target.domain()
        )));
    }
    let rows = data.rows();
    for v in extra_views {
        if v.rows() != rows {
            return Err(Error::Dimension(format!(
                "extra view {:?} has {} rows, expected {rows}",
                v.label(),
                v.rows()
            )));
        }
    }
    let factorized = if cfg.auxiliary_mf_views { 1 + data.auxiliaries.len() } else { 1 };
    let labels: Vec<String> = data.domains().take(factorized).map(|m| m.domain().to_string()).collect();
    if labels.len() + extra_views.len() < 2 {
        return Err(Error::Config("cross-domain training needs at least two views".into()));
    }

    let target_train = data.target.subset(&split.train)?;
    let validation = data.target.subset(&split.validation)?;
    if validation.is_empty() {
        return Err(Error::EmptyDataset("the split has no validation ratings".into()));
    }
    let trains: Vec<RatingsMatrix> = std::iter::once(target_train)
        .chain(data.auxiliaries.iter().cloned())
        .take(factorized)
        .collect();
    let configs: Vec<TrainConfig> = (0..trains.len()).map(|d| cfg.domain_train_config(d)).collect();
    let mut models = trains
        .iter()
        .zip(&configs)
        .map(|(r, c)| FactorModel::initialize(r, c))
        .collect::<Result<Vec<_>>>()?;

    let presence: Vec<Vec<bool>> = trains
        .iter()
        .map(|r| r.user_counts().iter().map(|&c| c > 0).collect())
        .collect();
    // users with no training data anywhere stay out of the GCCA fit
    let active: Vec<usize> = (0..rows)
        .filter(|&i| presence.iter().any(|p| p[i]) || extra_views.iter().any(|v| v.presence()[i]))
        .collect();
    let extra: Vec<ViewMatrix> = extra_views
        .iter()
        .map(|v| {
            let x = restrict_rows(&v.x().to_owned(), &active);
            ViewMatrix::new(v.label(), x.as_ref(), active.iter().map(|&i| v.presence()[i]).collect())
        })
        .collect::<Result<_>>()?;

    let mut trace = Vec::new();
    let mut best: Option<CrossDomainModel> = None;
    let mut best_val = f64::INFINITY;
    let (mut worst_constraint, mut worst_residual) = (0.0f64, 0.0f64);
    for iteration in 1..=cfg.max_iterations {
        let wrap = |e: Error| Error::Iteration {
            iteration,
            source: Box::new(e),
        };
        let epochs = if iteration == 1 || !cfg.warm_start {
            cfg.mf.epochs
        } else {
            cfg.refit_epochs
        };
        if iteration > 1 && !cfg.warm_start {
            for ((m, r), c) in models.iter_mut().zip(&trains).zip(&configs) {
                let restart = TrainConfig {
                    seed: derive_seed(c.seed, iteration as u64),
                    ..c.clone()
                };
                let mut fresh = FactorModel::initialize(r, &restart).map_err(wrap)?;
                fresh.u = std::mem::replace(&mut m.u, Mat::zeros(0, 0));
                *m = fresh;
            }
        }
        if epochs > 0 {
            models
                .par_iter_mut()
                .zip(trains.par_iter())
                .zip(configs.par_iter())
                .map(|((m, r), c)| m.train_epochs(r, c, epochs).map(|_| ()))
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?;
        }

        let mut views = Vec::with_capacity(models.len() + extra.len());
        for (d, m) in models.iter().enumerate() {
            let x = restrict_rows(&m.u, &active);
            let p = active.iter().map(|&i| presence[d][i]).collect();
            views.push(ViewMatrix::new(labels[d].clone(), x.as_ref(), p).map_err(wrap)?);
        }
        views.extend(extra.iter().cloned());
        let gcca = fit(&views, cfg.k_gcca, cfg.variant, &cfg.gcca).map_err(wrap)?;
        worst_constraint = worst_constraint.max(gcca.diagnostics.constraint_error);
        worst_residual = worst_residual.max(gcca.diagnostics.eigen_residual);

        for (d, m) in models.iter_mut().enumerate() {
            let rec = gcca.reconstruct_view_uncentered(&labels[d]).map_err(wrap)?;
            for (r, &i) in active.iter().enumerate() {
                for c in 0..rec.ncols() {
                    m.u[(i, c)] = rec[(r, c)];
                }
            }
        }

        let target = &models[0];
        let val = target.mse(&validation).map_err(wrap)?;
        log::debug!("iteration {iteration}: validation mse {val}");
        let previous = trace.last().copied();
        trace.push(val);
        if best.is_none() || val < best_val {
            best_val = val;
            best = Some(CrossDomainModel {
                target: cfg.target.clone(),
                auxiliaries: cfg.auxiliaries.clone(),
                user_ids: data.alignment.user_ids.clone(),
                gcca,
                target_factors: target.u.clone(),
                target_items: target.v.clone(),
                mu_t: target.mu,
                clamp: target.clamp,
                iteration_trace: Vec::new(),
                best_iteration: iteration,
                max_constraint_error: 0.0,
                max_eigen_residual: 0.0,
            });
        }
        if let Some(prev) = previous {
            if val > prev || (prev - val) / prev < cfg.tol {
                break;
            }
        }
    }
    let mut model = best.expect("at least one iteration runs");
    model.iteration_trace = trace;
    model.max_constraint_error = worst_constraint;
    model.max_eigen_residual = worst_residual;
    Ok(model)
}

/// PCA scores of one aligned domain as an extra view; users without
/// ratings there are absent.
pub fn pca_view(matrix: &RatingsMatrix, k: usize, label: &str) -> Result<ViewMatrix> {
    let pca = pca_user_features(matrix, k)?;
    let presence: Vec<bool> = matrix.user_counts().iter().map(|&c| c > 0).collect();
    let raw = Mat::from_fn(matrix.n_users(), k, |i, j| if presence[i] { pca.scores[(i, j)] } else { 0.0 });
    ViewMatrix::new(label, raw.as_ref(), presence)
}

/// `(baseline − method) / baseline`.
pub fn improvement_ratio(baseline_mse: f64, method_mse: f64) -> f64 {
    (baseline_mse - method_mse) / baseline_mse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalPlan {
    pub folds: usize,
    /// Evaluate only the first few folds.
    pub max_folds: Option<usize>,
    pub variants: Vec<Variant>,
}

impl Default for EvalPlan {
    fn default() -> Self {
        Self {
            folds: 5,
            max_folds: None,
            variants: vec![Variant::Standard, Variant::Issm],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_ratings: usize,
    pub cold_users: usize,
    pub offset: f64,
    pub mf: f64,
    /// Test MSE per cross-domain variant.
    pub methods: BTreeMap<String, f64>,
    /// Iterations run per variant.
    pub iterations: BTreeMap<String, usize>,
    /// Worst GCCA constraint error and eigen residual per variant.
    pub diagnostics: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_mse: f64,
    pub improvement_over_offset: f64,
    pub improvement_over_mf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target: String,
    pub auxiliaries: Vec<String>,
    pub c: usize,
    pub folds: usize,
    pub seed: u64,
    pub fold_results: Vec<FoldResult>,
    /// Offset, MF, then each variant, with MSE averaged over folds.
    pub summary: Vec<MethodSummary>,
}

impl EvalReport {
    pub fn mean_mse(&self, method: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.method == method).map(|s| s.mean_mse)
    }

    fn summarize(&mut self) {
        let mean = |f: &dyn Fn(&FoldResult) -> f64| {
            self.fold_results.iter().map(f).sum::<f64>() / self.fold_results.len() as f64
        };
        let offset = mean(&|r| r.offset);
        let mf = mean(&|r| r.mf);
        let mut rows = vec![("offset".to_string(), offset), ("mf".to_string(), mf)];
        if let Some(first) = self.fold_results.first() {
            for name in first.methods.keys() {
                rows.push((format!("mf_gcca_{name}"), mean(&|r| r.methods[name])));
            }
        }
        self.summary = rows
            .into_iter()
            .map(|(method, mse)| MethodSummary {
                method,
                mean_mse: mse,
                improvement_over_offset: improvement_ratio(offset, mse),
                improvement_over_mf: improvement_ratio(mf, mse),
            })
            .collect();
    }
}

/// Cross-validated cold-start evaluation of the target domain at cap `c`.
pub fn evaluate_cold_start(
    data: &CrossDomainData,
    cfg: &PipelineConfig,
    plan: &EvalPlan,
    c: usize,
    extra_views: &[ViewMatrix],
) -> Result<EvalReport> {
    cfg.validate()?;
    if plan.variants.is_empty() {
        return Err(Error::Config("no gcca variants to evaluate".into()));
    }
    let splits = split_folds(&data.target, plan.folds, derive_seed(cfg.seed, FOLD_STREAM))?;
    let eligible = data.eligible();
    let take = plan.max_folds.unwrap_or(plan.folds).min(plan.folds);
    let fold_results = splits
        .into_par_iter()
        .take(take)
        .map(|split| evaluate_fold(data, cfg, plan, c, &split, &eligible, extra_views))
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport {
        target: cfg.target.clone(),
        auxiliaries: cfg.auxiliaries.clone(),
        c,
        folds: fold_results.len(),
        seed: cfg.seed,
        fold_results,
        summary: Vec::new(),
    };
    report.summarize();
    Ok(report)
}

fn evaluate_fold(
    data: &CrossDomainData,
    cfg: &PipelineConfig,
    plan: &EvalPlan,
    c: usize,
    split: &FoldSplit,
    eligible: &[bool],
    extra_views: &[ViewMatrix],
) -> Result<FoldResult> {
    let cold = make_cold_start(split, &data.target, c, eligible)?;
    let train = data.target.subset(&cold.train)?;
    let test = data.target.subset(&cold.test)?;
    let fold_cfg = fold_config(cfg, split.fold);
    let offset = offset_baseline(&train)?.mse(&test)?;
    // same seed as the pipeline's own target factorization
    let mf = fit_mf(&train, &fold_cfg.domain_train_config(0))?.mse(&test)?;
    let mut methods = BTreeMap::new();
    let mut iterations = BTreeMap::new();
    let mut diagnostics = BTreeMap::new();
    for &variant in &plan.variants {
        let vcfg = PipelineConfig {
            variant,
            ..fold_cfg.clone()
        };
        let model = train_cross_domain(data, &cold, &vcfg, extra_views)?;
        methods.insert(variant.name().to_string(), model.mse(&test)?);
        iterations.insert(variant.name().to_string(), model.iterations());
        diagnostics.insert(
            variant.name().to_string(),
            (model.max_constraint_error, model.max_eigen_residual),
        );
    }
    log::info!(
        "{} c={c} fold {}: offset {offset:.4} mf {mf:.4} {:?}",
        cfg.target,
        split.fold,
        methods
    );
    Ok(FoldResult {
        fold: split.fold,
        test_ratings: cold.test.len(),
        cold_users: cold.cold_users.len(),
        offset,
        mf,
        methods,
        iterations,
        diagnostics,
    })
}

const FOLD_STREAM: u64 = 0x666f_6c64;

fn fold_config(cfg: &PipelineConfig, fold: usize) -> PipelineConfig {
    PipelineConfig {
        seed: derive_seed(cfg.seed, fold as u64),
        ..cfg.clone()
    }
}

/// Fold `fold` of the cross-validation run by [`evaluate_cold_start`],
/// censored at `c`, together with the config seeded for that fold.
pub fn cold_start_fold(
    data: &CrossDomainData,
    cfg: &PipelineConfig,
    folds: usize,
    fold: usize,
    c: usize,
) -> Result<(FoldSplit, PipelineConfig)> {
    if fold >= folds {
        return Err(Error::OutOfRange {
            what: "fold",
            index: fold,
            size: folds,
        });
    }
    let splits = split_folds(&data.target, folds, derive_seed(cfg.seed, FOLD_STREAM))?;
    let cold = make_cold_start(&splits[fold], &data.target, c, &data.eligible())?;
    Ok((cold, fold_config(cfg, fold)))
}

/// One independent evaluation per cap.
pub fn sweep_cold_start(
    data: &CrossDomainData,
    cfg: &PipelineConfig,
    plan: &EvalPlan,
    c_values: &[usize],
    extra_views: &[ViewMatrix],
) -> Result<Vec<EvalReport>> {
    if c_values.is_empty() {
        return Err(Error::Config("no cold-start caps given".into()));
    }
    c_values
        .iter()
        .map(|&c| evaluate_cold_start(data, cfg, plan, c, extra_views))
        .collect()
}

pub const REPORT_CSV_HEADER: [&str; 7] = ["target", "auxiliary_set", "c", "fold", "method", "mse", "improvement"];

/// Per-fold and mean rows of each report; `improvement` is over Offset.
pub fn write_reports_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        let aux = r.auxiliaries.join("+");
        let mut row = |fold: String, method: &str, mse: f64, offset: f64| {
            w.write_record([
                r.target.clone(),
                aux.clone(),
                r.c.to_string(),
                fold,
                method.to_string(),
                mse.to_string(),
                improvement_ratio(offset, mse).to_string(),
            ])
        };
        for f in &r.fold_results {
            let fold = f.fold.to_string();
            row(fold.clone(), "offset", f.offset, f.offset)?;
            row(fold.clone(), "mf", f.mf, f.offset)?;
            for (name, &mse) in &f.methods {
                row(fold.clone(), &format!("mf_gcca_{name}"), mse, f.offset)?;
            }
        }
        let offset = r.mean_mse("offset").unwrap_or(f64::NAN);
        for s in &r.summary {
            row("mean".into(), &s.method, s.mean_mse, offset)?;
        }
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_planted_ratings, PlantedRatingsConfig};

    fn planted(seed: u64) -> CrossDomainData {
        let m = generate_planted_ratings(&PlantedRatingsConfig {
            seed,
            ..PlantedRatingsConfig::default()
        })
        .unwrap();
        CrossDomainData::new(&m, "d0", &["d1".to_string()]).unwrap()
    }

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            target: "d0".into(),
            auxiliaries: vec!["d1".into()],
            k_mf: 4,
            k_gcca: 4,
            max_iterations: 5,
            mf: TrainConfig {
                epochs: 40,
                learning_rate: 0.02,
                ..TrainConfig::default()
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn improvement_arithmetic() {
        assert!((improvement_ratio(1.2398, 0.8044) - 0.3512).abs() < 1e-4);
        assert_eq!(improvement_ratio(0.9, 0.9), 0.0);
    }

    #[test]
    fn zero_factors_predict_the_mean_and_clamp() {
        let data = planted(1);
        let split = make_cold_start(
            &split_folds(&data.target, 5, 0).unwrap()[0],
            &data.target,
            0,
            &data.eligible(),
        )
        .unwrap();
        let mut model = train_cross_domain(&data, &split, &small_cfg(), &[]).unwrap();
        model.target_factors.fill(0.0);
        assert_eq!(model.predict_target(3, 2).unwrap(), model.mu_t);
        model.mu_t = 0.3;
        assert_eq!(model.predict_target(3, 2).unwrap(), 1.0);
    }

    #[test]
    fn best_iteration_has_minimum_validation_mse() {
        let data = planted(2);
        let split = make_cold_start(
            &split_folds(&data.target, 5, 0).unwrap()[1],
            &data.target,
            0,
            &data.eligible(),
        )
        .unwrap();
        let model = train_cross_domain(&data, &split, &small_cfg(), &[]).unwrap();
        let min = model.iteration_trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(model.iteration_trace[model.best_iteration - 1], min);
        assert!(model.iterations() <= 5);
        let test = data.target.subset(&split.test).unwrap();
        let batch = model.predict_batch(&test).unwrap();
        for (e, p) in test.entries().iter().zip(batch) {
            assert_eq!(p, model.predict_target(e.user as usize, e.item as usize).unwrap());
        }
    }

    #[test]
    fn cold_start_mf_equals_offset_at_c0() {
        let data = planted(3);
        let plan = EvalPlan {
            max_folds: Some(2),
            variants: vec![Variant::Issm],
            ..EvalPlan::default()
        };
        let report = evaluate_cold_start(&data, &small_cfg(), &plan, 0, &[]).unwrap();
        for f in &report.fold_results {
            assert_eq!(f.mf, f.offset);
        }
        assert_eq!(report.folds, 2);
    }

    #[test]
    fn config_rejects_target_as_auxiliary() {
        let cfg = PipelineConfig {
            target: "a".into(),
            auxiliaries: vec!["a".into()],
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    fn cold_split(data: &CrossDomainData, fold: usize, c: usize) -> FoldSplit {
        let folds = split_folds(&data.target, 5, 0).unwrap();
        make_cold_start(&folds[fold], &data.target, c, &data.eligible()).unwrap()
    }

    #[test]
    fn planted_cold_start_beats_offset() {
        let data = planted(0);
        let plan = EvalPlan {
            max_folds: Some(2),
            ..EvalPlan::default()
        };
        let report = evaluate_cold_start(&data, &small_cfg(), &plan, 0, &[]).unwrap();
        let offset = report.mean_mse("offset").unwrap();
        for method in ["mf_gcca_standard", "mf_gcca_issm"] {
            let mse = report.mean_mse(method).unwrap();
            assert!(mse < offset, "{method}: {mse} vs offset {offset}");
        }
    }

    #[test]
    fn duplicated_domain_reproduces_target_factors() {
        let m = generate_planted_ratings(&PlantedRatingsConfig {
            domains: 1,
            density: 0.6,
            noise: 0.0,
            seed: 4,
            ..PlantedRatingsConfig::default()
        })
        .unwrap();
        let split = split_folds(&m["d0"], 5, 0).unwrap().remove(0);
        let train = m["d0"].subset(&split.train).unwrap();
        let mut matrices = m.clone();
        matrices.insert("copy".into(), train.clone().with_domain("copy"));
        let data = CrossDomainData::new(&matrices, "d0", &["copy".to_string()]).unwrap();
        let cfg = PipelineConfig {
            auxiliaries: vec!["copy".into()],
            max_iterations: 1,
            gcca: GccaOptions {
                ridge: Some(0.0),
                reconstruction_ridge: 0.0,
                ..GccaOptions::default()
            },
            mf: TrainConfig {
                epochs: 400,
                learning_rate: 0.02,
                lr_decay: 0.99,
                lambda: 1e-3,
                ..TrainConfig::default()
            },
            ..small_cfg()
        };
        let model = train_cross_domain(&data, &split, &cfg, &[]).unwrap();
        let mf = fit_mf(&train, &cfg.domain_train_config(0)).unwrap();
        let diff = (&model.target_factors - &mf.u).norm_l2() / mf.u.norm_l2();
        assert!(diff < 1e-3, "relative difference {diff}");
    }

    #[test]
    fn identical_inputs_give_identical_models() {
        let data = planted(5);
        let split = cold_split(&data, 2, 3);
        let a = train_cross_domain(&data, &split, &small_cfg(), &[]).unwrap();
        let b = train_cross_domain(&data, &split, &small_cfg(), &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cold_restart_runs_and_keeps_best() {
        let data = planted(6);
        let split = cold_split(&data, 0, 0);
        let cfg = PipelineConfig {
            warm_start: false,
            ..small_cfg()
        };
        let model = train_cross_domain(&data, &split, &cfg, &[]).unwrap();
        let min = model.iteration_trace.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(model.iteration_trace[model.best_iteration - 1], min);
    }

    #[test]
    fn single_view_is_rejected() {
        let data = planted(7);
        let split = cold_split(&data, 0, 0);
        let cfg = small_cfg();
        let lone = CrossDomainData {
            auxiliaries: Vec::new(),
            ..data
        };
        assert!(matches!(
            train_cross_domain(&lone, &split, &cfg, &[]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sweep_with_one_cap_matches_single_evaluation() {
        let data = planted(8);
        let plan = EvalPlan {
            max_folds: Some(1),
            variants: vec![Variant::Issm],
            ..EvalPlan::default()
        };
        let single = evaluate_cold_start(&data, &small_cfg(), &plan, 2, &[]).unwrap();
        let sweep = sweep_cold_start(&data, &small_cfg(), &plan, &[2], &[]).unwrap();
        assert_eq!(sweep, vec![single]);
    }

    #[test]
    fn cold_start_fold_reproduces_the_evaluated_fold() {
        let data = planted(9);
        let plan = EvalPlan {
            max_folds: Some(2),
            variants: vec![Variant::Issm],
            ..EvalPlan::default()
        };
        let report = evaluate_cold_start(&data, &small_cfg(), &plan, 1, &[]).unwrap();
        let (cold, cfg) = cold_start_fold(&data, &small_cfg(), 5, 1, 1).unwrap();
        let model = train_cross_domain(&data, &cold, &cfg, &[]).unwrap();
        let test = data.target.subset(&cold.test).unwrap();
        assert_eq!(model.mse(&test).unwrap(), report.fold_results[1].methods["issm"]);
        assert!(matches!(
            cold_start_fold(&data, &small_cfg(), 5, 5, 0),
            Err(Error::OutOfRange { .. })
        ));
    }
}

use std::collections::BTreeSet;
use std::path::Path;

use gcca_rec::dump::save_json;
use gcca_rec::factorization::offset_baseline;
use gcca_rec::pipeline::{cold_start_fold, improvement_ratio, train_cross_domain};
use serde::{Deserialize, Serialize};

use crate::config::{PairConfig, RunConfig, ViewSet};
use crate::data;
use crate::error::{CliError, Result};
use crate::evaluate::{pipeline_config, prepare};

/// Written next to the model as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub target: String,
    pub auxiliaries: Vec<String>,
    pub views: ViewSet,
    pub variant: String,
    pub fold: usize,
    pub c: usize,
    pub train_ratings: usize,
    pub test_ratings: usize,
    pub cold_users: usize,
    pub best_iteration: usize,
    pub validation_trace: Vec<f64>,
    pub offset_mse: f64,
    pub test_mse: f64,
    pub improvement_over_offset: f64,
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<TrainMetrics> {
    let t = &cfg.train;
    let target = t
        .target
        .clone()
        .ok_or_else(|| CliError::usage("no target domain; set train.target or pass --target"))?;
    if t.auxiliaries.is_empty() {
        return Err(CliError::usage("no auxiliary domains; set train.auxiliaries or pass --auxiliary"));
    }
    let pair = PairConfig {
        target,
        auxiliaries: t.auxiliaries.clone(),
    };
    let domains: BTreeSet<String> = std::iter::once(pair.target.clone())
        .chain(pair.auxiliaries.iter().cloned())
        .collect();
    let loaded = data::load(&cfg.data, &domains)?;
    let (data, extra) = prepare(cfg, &loaded, &pair, &t.views)?;
    let pcfg = pipeline_config(cfg, &pair, &t.views);
    let (cold, fold_cfg) = cold_start_fold(&data, &pcfg, t.folds, t.fold, t.c)?;
    let model = train_cross_domain(&data, &cold, &fold_cfg, &extra)?;
    let train = data.target.subset(&cold.train)?;
    let test = data.target.subset(&cold.test)?;
    let offset_mse = offset_baseline(&train)?.mse(&test)?;
    let test_mse = model.mse(&test)?;
    save_json(&model, &out.join("model.json"))?;
    let metrics = TrainMetrics {
        target: pair.target,
        auxiliaries: pair.auxiliaries,
        views: t.views.clone(),
        variant: pcfg.variant.name().to_string(),
        fold: t.fold,
        c: t.c,
        train_ratings: train.len(),
        test_ratings: test.len(),
        cold_users: cold.cold_users.len(),
        best_iteration: model.best_iteration,
        validation_trace: model.iteration_trace.clone(),
        offset_mse,
        test_mse,
        improvement_over_offset: improvement_ratio(offset_mse, test_mse),
    };
    save_json(&metrics, &out.join("metrics.json"))?;
    Ok(metrics)
}

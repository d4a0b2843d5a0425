//! Python bindings. Matrices cross the boundary as lists of row lists.

use std::collections::BTreeMap;

use faer::Mat;
use gcca_rec::corpus::{RatingTriple, RatingsMatrix};
use gcca_rec::dump::{from_json, to_json};
use gcca_rec::factorization::{fit_mf as core_fit_mf, offset_baseline, FactorModel, TrainConfig};
use gcca_rec::gcca::{self, GccaModel, GccaOptions, Variant, ViewMatrix};
use gcca_rec::pipeline::{self, CrossDomainData, CrossDomainModel, DataDir, EvalPlan, EvalReport, PipelineConfig};
use gcca_rec::simulator::{self, PlantedRatingsConfig, SimConfig, SweepGrid, SweepSettings};
use gcca_rec::Error;
use pyo3::exceptions::{PyMemoryError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) | Error::OutOfRange { .. } | Error::Dimension(_) | Error::Parse { .. } => {
            PyValueError::new_err(msg)
        }
        Error::Io { .. } => PyOSError::new_err(msg),
        Error::MemoryBudget { .. } => PyMemoryError::new_err(msg),
        Error::Iteration { ref source, .. } if matches!(**source, Error::MemoryBudget { .. }) => {
            PyMemoryError::new_err(msg)
        }
        _ => PyRuntimeError::new_err(msg),
    }
}

fn to_mat(rows: &[Vec<f64>]) -> PyResult<Mat<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(Mat::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

fn to_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn variant(name: &str) -> PyResult<Variant> {
    name.parse().map_err(err)
}

#[pyclass(name = "RatingsMatrix", module = "gcca_rec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRatings(RatingsMatrix);

#[pymethods]
impl PyRatings {
    /// Builds a matrix from `(user, item, rating)` triples; a repeated pair
    /// keeps its last rating.
    #[new]
    fn new(domain: &str, triples: Vec<(String, String, f64)>) -> PyResult<Self> {
        let triples: Vec<RatingTriple> = triples
            .into_iter()
            .map(|(user, item, rating)| RatingTriple {
                user,
                item,
                rating,
                timestamp: None,
            })
            .collect();
        RatingsMatrix::from_triples(domain, &triples).map(Self).map_err(err)
    }

    #[getter]
    fn domain(&self) -> &str {
        self.0.domain()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.0.n_users()
    }

    #[getter]
    fn n_items(&self) -> usize {
        self.0.n_items()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn user_ids(&self) -> Vec<String> {
        self.0.user_ids().to_vec()
    }

    fn item_ids(&self) -> Vec<String> {
        self.0.item_ids().to_vec()
    }

    /// `(user_index, item_index, rating)` for every observed cell.
    fn entries(&self) -> Vec<(u32, u32, f64)> {
        self.0.entries().iter().map(|e| (e.user, e.item, e.value)).collect()
    }

    fn sparsity(&self) -> f64 {
        self.0.sparsity()
    }

    fn mean(&self) -> Option<f64> {
        self.0.mean()
    }

    fn __repr__(&self) -> String {
        format!(
            "RatingsMatrix({:?}, users={}, items={}, ratings={})",
            self.0.domain(),
            self.0.n_users(),
            self.0.n_items(),
            self.0.len()
        )
    }
}

fn wrap_domains(m: BTreeMap<String, RatingsMatrix>) -> BTreeMap<String, PyRatings> {
    m.into_iter().map(|(k, v)| (k, PyRatings(v))).collect()
}

/// Ratings for several domains sharing a planted user representation,
/// keyed `d0`, `d1`, ...
#[pyfunction]
#[pyo3(signature = (users=400, items_per_domain=150, latent_dim=4, domains=2, density=0.15, noise=0.3, seed=0))]
fn planted_ratings(
    users: usize,
    items_per_domain: usize,
    latent_dim: usize,
    domains: usize,
    density: f64,
    noise: f64,
    seed: u64,
) -> PyResult<BTreeMap<String, PyRatings>> {
    let cfg = PlantedRatingsConfig {
        users,
        items_per_domain,
        latent_dim,
        domains,
        density,
        noise,
        seed,
        ..PlantedRatingsConfig::default()
    };
    simulator::generate_planted_ratings(&cfg).map(wrap_domains).map_err(err)
}

/// One matrix per genre from `<data_dir>/movielens/{ratings,movies}.dat`.
#[pyfunction]
fn read_movielens(py: Python<'_>, data_dir: &str, genres: Vec<String>) -> PyResult<BTreeMap<String, PyRatings>> {
    let dir = DataDir::new(data_dir);
    py.detach(|| dir.movielens(&genres)).map(wrap_domains).map_err(err)
}

/// One matrix per category from `<data_dir>/amazon/reviews_*_5.json`.
#[pyfunction]
fn read_amazon(py: Python<'_>, data_dir: &str, categories: Vec<String>) -> PyResult<BTreeMap<String, PyRatings>> {
    let dir = DataDir::new(data_dir);
    py.detach(|| dir.amazon(&categories))
        .map(|a| wrap_domains(a.matrices))
        .map_err(err)
}

#[pyclass(name = "FactorModel", module = "gcca_rec", frozen)]
struct PyFactorModel(FactorModel);

#[pymethods]
impl PyFactorModel {
    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }

    /// Clamped prediction for a user and item index.
    fn predict(&self, user: usize, item: usize) -> PyResult<f64> {
        self.0.predict(user, item).map_err(err)
    }

    fn mse(&self, ratings: &PyRatings) -> PyResult<f64> {
        self.0.mse(&ratings.0).map_err(err)
    }

    fn user_factors(&self) -> Vec<Vec<f64>> {
        to_rows(&self.0.u)
    }

    fn item_factors(&self) -> Vec<Vec<f64>> {
        to_rows(&self.0.v)
    }
}

/// Matrix factorization by SGD.
#[pyfunction]
#[pyo3(signature = (ratings, factors=50, epochs=30, learning_rate=0.005, lambda_=0.05, seed=0))]
fn fit_mf(
    py: Python<'_>,
    ratings: &PyRatings,
    factors: usize,
    epochs: usize,
    learning_rate: f64,
    lambda_: f64,
    seed: u64,
) -> PyResult<PyFactorModel> {
    let cfg = TrainConfig {
        factors,
        epochs,
        learning_rate,
        lambda: lambda_,
        seed,
        ..TrainConfig::default()
    };
    let r = &ratings.0;
    py.detach(|| core_fit_mf(r, &cfg)).map(PyFactorModel).map_err(err)
}

/// Test MSE of predicting every rating with the training mean.
#[pyfunction]
fn offset_mse(train: &PyRatings, test: &PyRatings) -> PyResult<f64> {
    offset_baseline(&train.0).and_then(|m| m.mse(&test.0)).map_err(err)
}

#[pyclass(name = "GccaModel", module = "gcca_rec", frozen)]
struct PyGcca(GccaModel);

#[pymethods]
impl PyGcca {
    #[getter]
    fn k(&self) -> usize {
        self.0.k()
    }

    #[getter]
    fn n_views(&self) -> usize {
        self.0.n_views()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.0.variant.name()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.0.eigenvalues.clone()
    }

    /// The `L × k` group configuration.
    fn g(&self) -> Vec<Vec<f64>> {
        to_rows(&self.0.g)
    }

    fn constraint_error(&self) -> f64 {
        self.0.constraint_error()
    }

    fn eigen_residual(&self) -> f64 {
        self.0.diagnostics.eigen_residual
    }

    /// View `index` rebuilt from the shared space, means restored.
    fn reconstruct(&self, index: usize) -> PyResult<Vec<Vec<f64>>> {
        let label = self.0.labels.get(index).ok_or_else(|| {
            PyValueError::new_err(format!("view {index} out of range for {} views", self.0.n_views()))
        })?;
        self.0.reconstruct_view_uncentered(label).map(|m| to_rows(&m)).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        from_json(text).map(Self).map_err(err)
    }
}

/// Generalized CCA over row-aligned views. `presence[d][i]` marks whether
/// sample `i` is observed in view `d`; absent rows are ignored.
#[pyfunction]
#[pyo3(signature = (views, k, variant="issm", presence=None, ridge=None, memory_budget_mib=4096, fast_rank=50))]
#[allow(clippy::too_many_arguments)]
fn fit_gcca(
    py: Python<'_>,
    views: Vec<Vec<Vec<f64>>>,
    k: usize,
    variant: &str,
    presence: Option<Vec<Vec<bool>>>,
    ridge: Option<f64>,
    memory_budget_mib: u64,
    fast_rank: usize,
) -> PyResult<PyGcca> {
    let v = self::variant(variant)?;
    if let Some(p) = &presence {
        if p.len() != views.len() {
            return Err(PyValueError::new_err(format!(
                "{} presence masks for {} views",
                p.len(),
                views.len()
            )));
        }
    }
    let views = views
        .iter()
        .enumerate()
        .map(|(d, rows)| {
            let x = to_mat(rows)?;
            let label = format!("view{d}");
            match &presence {
                Some(p) => ViewMatrix::new(label, x.as_ref(), p[d].clone()),
                None => ViewMatrix::complete(label, x.as_ref()),
            }
            .map_err(err)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let mut opts = GccaOptions {
        ridge,
        memory_budget_mib,
        ..GccaOptions::default()
    };
    opts.fast.m = fast_rank;
    py.detach(|| gcca::fit(&views, k, v, &opts)).map(PyGcca).map_err(err)
}

/// Canonical correlations of two fully observed views, descending.
#[pyfunction]
#[pyo3(signature = (x, y, ridge=0.0))]
fn canonical_correlations(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, ridge: f64) -> PyResult<Vec<f64>> {
    let (x, y) = (to_mat(&x)?, to_mat(&y)?);
    gcca::fit_cca(x.as_ref(), y.as_ref(), ridge).map(|m| m.rho).map_err(err)
}

/// One synthetic trial scoring both GCCA variants on masked rows.
#[pyfunction]
#[pyo3(signature = (domains=4, sparsity=0.3, rows=500, latent_dim=10, sigma=0.1, k=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate_trial(
    py: Python<'_>,
    domains: usize,
    sparsity: f64,
    rows: usize,
    latent_dim: usize,
    sigma: f64,
    k: Option<usize>,
    seed: u64,
) -> PyResult<BTreeMap<&'static str, Option<f64>>> {
    let cfg = SimConfig {
        rows,
        latent_dim,
        domains,
        sparsity,
        sigma,
        seed,
    };
    let r = py
        .detach(|| simulator::run_trial(&cfg, k.unwrap_or(latent_dim), &GccaOptions::default()))
        .map_err(err)?;
    Ok(BTreeMap::from([
        ("mse_all_gcca", Some(r.mse_all_gcca)),
        ("mse_all_issm", Some(r.mse_all_issm)),
        ("mse_missing_gcca", r.mse_missing_gcca),
        ("mse_missing_issm", r.mse_missing_issm),
        ("improvement_ratio", r.improvement_ratio),
    ]))
}

/// Monte Carlo sweep over every `(domains, sparsity, rows)` combination;
/// one dict of mean results per cell.
#[pyfunction]
#[pyo3(signature = (domains, sparsity, rows, reps=100, latent_dim=10, sigma=0.1, k=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate_sweep(
    py: Python<'_>,
    domains: Vec<usize>,
    sparsity: Vec<f64>,
    rows: Vec<usize>,
    reps: usize,
    latent_dim: usize,
    sigma: f64,
    k: Option<usize>,
    seed: u64,
) -> PyResult<Vec<BTreeMap<&'static str, f64>>> {
    let grid = SweepGrid { domains, sparsity, rows };
    let settings = SweepSettings {
        reps,
        k,
        latent_dim,
        sigma,
        seed,
    };
    let cells = py
        .detach(|| simulator::sweep(&grid, &settings, &GccaOptions::default()))
        .map_err(err)?;
    Ok(cells
        .iter()
        .map(|c| {
            BTreeMap::from([
                ("domains", c.domains as f64),
                ("sparsity", c.sparsity),
                ("rows", c.rows as f64),
                ("mse_missing_gcca", c.mse_missing_gcca.mean),
                ("mse_missing_issm", c.mse_missing_issm.mean),
                ("improvement", c.improvement.mean),
                ("improvement_std", c.improvement.std),
            ])
        })
        .collect())
}

#[pyclass(name = "CrossDomainData", module = "gcca_rec", frozen)]
struct PyData(CrossDomainData);

#[pymethods]
impl PyData {
    /// Aligns the target and auxiliary domains on their users.
    #[new]
    fn new(matrices: BTreeMap<String, PyRef<'_, PyRatings>>, target: &str, auxiliaries: Vec<String>) -> PyResult<Self> {
        let m: BTreeMap<String, RatingsMatrix> = matrices.iter().map(|(k, v)| (k.clone(), v.0.clone())).collect();
        CrossDomainData::new(&m, target, &auxiliaries).map(Self).map_err(err)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.0.rows()
    }

    #[getter]
    fn target(&self) -> PyRatings {
        PyRatings(self.0.target.clone())
    }

    fn user_ids(&self) -> Vec<String> {
        self.0.alignment.user_ids.clone()
    }
}

#[pyclass(name = "PipelineConfig", module = "gcca_rec", skip_from_py_object)]
#[derive(Clone)]
struct PyPipelineConfig(PipelineConfig);

#[pymethods]
impl PyPipelineConfig {
    #[new]
    #[pyo3(signature = (target, auxiliaries, k_mf=50, k_gcca=75, variant="issm", max_iterations=20, epochs=30, learning_rate=0.005, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        target: String,
        auxiliaries: Vec<String>,
        k_mf: usize,
        k_gcca: usize,
        variant: &str,
        max_iterations: usize,
        epochs: usize,
        learning_rate: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = PipelineConfig {
            target,
            auxiliaries,
            k_mf,
            k_gcca,
            variant: self::variant(variant)?,
            max_iterations,
            mf: TrainConfig {
                epochs,
                learning_rate,
                ..TrainConfig::default()
            },
            seed,
            ..PipelineConfig::default()
        };
        cfg.validate().map_err(err)?;
        Ok(Self(cfg))
    }

    /// Every field, including the nested SGD and GCCA settings.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        from_json(text).map(Self).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0).map_err(err)
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.0.variant.name()
    }

    #[setter]
    fn set_variant(&mut self, name: &str) -> PyResult<()> {
        self.0.variant = variant(name)?;
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }
}

#[pyclass(name = "CrossDomainModel", module = "gcca_rec", frozen)]
struct PyModel(CrossDomainModel);

#[pymethods]
impl PyModel {
    /// Clamped target-domain prediction for aligned user and item indices.
    fn predict(&self, user: usize, item: usize) -> PyResult<f64> {
        self.0.predict_target(user, item).map_err(err)
    }

    fn mse(&self, ratings: &PyRatings) -> PyResult<f64> {
        self.0.mse(&ratings.0).map_err(err)
    }

    #[getter]
    fn best_iteration(&self) -> usize {
        self.0.best_iteration
    }

    #[getter]
    fn iteration_trace(&self) -> Vec<f64> {
        self.0.iteration_trace.clone()
    }

    #[getter]
    fn gcca(&self) -> PyGcca {
        PyGcca(self.0.gcca.clone())
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0).map_err(err)
    }
}

/// Trains on one cross-validation fold censored at `c` and returns the
/// model with that fold's held-out target ratings.
#[pyfunction]
#[pyo3(signature = (data, config, fold=0, folds=5, c=0))]
fn train_cross_domain(
    py: Python<'_>,
    data: &PyData,
    config: &PyPipelineConfig,
    fold: usize,
    folds: usize,
    c: usize,
) -> PyResult<(PyModel, PyRatings)> {
    let (data, cfg) = (&data.0, &config.0);
    py.detach(|| {
        let (cold, fold_cfg) = pipeline::cold_start_fold(data, cfg, folds, fold, c)?;
        let model = pipeline::train_cross_domain(data, &cold, &fold_cfg, &[])?;
        let test = data.target.subset(&cold.test)?;
        Ok((PyModel(model), PyRatings(test)))
    })
    .map_err(err)
}

#[pyclass(name = "EvalReport", module = "gcca_rec", frozen)]
struct PyReport(EvalReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn c(&self) -> usize {
        self.0.c
    }

    #[getter]
    fn folds(&self) -> usize {
        self.0.folds
    }

    /// `(method, mean_mse, improvement_over_offset, improvement_over_mf)`.
    fn summary(&self) -> Vec<(String, f64, f64, f64)> {
        self.0
            .summary
            .iter()
            .map(|s| (s.method.clone(), s.mean_mse, s.improvement_over_offset, s.improvement_over_mf))
            .collect()
    }

    fn mean_mse(&self, method: &str) -> Option<f64> {
        self.0.mean_mse(method)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.0).map_err(err)
    }
}

/// Cross-validated cold-start evaluation of Offset, MF and each variant.
#[pyfunction]
#[pyo3(signature = (data, config, c=0, folds=5, max_folds=None, variants=vec!["standard".to_string(), "issm".to_string()]))]
fn evaluate_cold_start(
    py: Python<'_>,
    data: &PyData,
    config: &PyPipelineConfig,
    c: usize,
    folds: usize,
    max_folds: Option<usize>,
    variants: Vec<String>,
) -> PyResult<PyReport> {
    let plan = EvalPlan {
        folds,
        max_folds,
        variants: variants.iter().map(|v| variant(v)).collect::<PyResult<_>>()?,
    };
    let (data, cfg) = (&data.0, &config.0);
    py.detach(|| pipeline::evaluate_cold_start(data, cfg, &plan, c, &[]))
        .map(PyReport)
        .map_err(err)
}

#[pymodule]
#[pyo3(name = "gcca_rec")]
fn gcca_rec_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRatings>()?;
    m.add_class::<PyFactorModel>()?;
    m.add_class::<PyGcca>()?;
    m.add_class::<PyData>()?;
    m.add_class::<PyPipelineConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(planted_ratings, m)?)?;
    m.add_function(wrap_pyfunction!(read_movielens, m)?)?;
    m.add_function(wrap_pyfunction!(read_amazon, m)?)?;
    m.add_function(wrap_pyfunction!(fit_mf, m)?)?;
    m.add_function(wrap_pyfunction!(offset_mse, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gcca, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_correlations, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_trial, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(train_cross_domain, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_cold_start, m)?)?;
    Ok(())
}

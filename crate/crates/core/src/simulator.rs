//! Synthetic multi-view data with a planted shared representation, and the
//! reconstruction study comparing the standard and inverse-sum GCCA variants.

use std::io::Write;

use faer::{Mat, MatRef};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcca::{fit_gcca, GccaModel, GccaOptions, Variant, ViewMatrix};
use crate::linalg::{derive_seed, gaussian_matrix, orthonormal_basis, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Number of samples `L`.
    pub rows: usize,
    /// Latent dimension `M`, also the width of each view.
    pub latent_dim: usize,
    /// Number of views `n`.
    pub domains: usize,
    /// Fraction of rows removed from each view.
    pub sparsity: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rows: 500,
            latent_dim: 10,
            domains: 4,
            sparsity: 0.3,
            sigma: 0.1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn missing_per_view(&self) -> usize {
        (self.sparsity * self.rows as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains < 2 {
            return Err(Error::Config("simulation needs at least 2 domains".into()));
        }
        if self.latent_dim == 0 || self.latent_dim > self.rows {
            return Err(Error::Config(format!(
                "latent_dim must be in 1..={}, got {}",
                self.rows, self.latent_dim
            )));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Config(format!(
                "sparsity must be in [0, 1), got {}",
                self.sparsity
            )));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Masked, centered views handed to the solvers.
    pub views: Vec<ViewMatrix>,
    /// Unmasked `G₀A^(d) + σB^(d)` per view.
    pub complete: Vec<Mat<f64>>,
    /// Masked row indices per view, ascending.
    pub missing: Vec<Vec<usize>>,
    /// The planted orthonormal configuration `G₀`.
    pub planted: Mat<f64>,
}

/// Draws one synthetic problem.
///
/// Masks are drawn view by view; each view removes `⌊sL⌋` rows chosen
/// uniformly among rows that are still observed in some other view, so no
/// row ends up absent everywhere.
pub fn generate_synthetic(cfg: &SimConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let l = cfg.rows;
    let planted = orthonormal_basis(gaussian_matrix(l, cfg.latent_dim, &mut rng).as_ref());

    let mut complete = Vec::with_capacity(cfg.domains);
    for _ in 0..cfg.domains {
        let a = gaussian_matrix(cfg.latent_dim, cfg.latent_dim, &mut rng);
        let b = gaussian_matrix(l, cfg.latent_dim, &mut rng);
        let x = &planted * &a + b * faer::Scale(cfg.sigma);
        complete.push(x);
    }

    let drop = cfg.missing_per_view();
    let mut observed_in = vec![cfg.domains; l];
    let mut missing = Vec::with_capacity(cfg.domains);
    for d in 0..cfg.domains {
        let eligible: Vec<usize> = (0..l).filter(|&i| observed_in[i] >= 2).collect();
        if eligible.len() < drop {
            return Err(Error::Config(format!(
                "cannot mask {drop} rows in view {d}: only {} rows are observed elsewhere",
                eligible.len()
            )));
        }
        let mut rows: Vec<usize> = sample(&mut rng, eligible.len(), drop)
            .into_iter()
            .map(|i| eligible[i])
            .collect();
        rows.sort_unstable();
        for &i in &rows {
            observed_in[i] -= 1;
        }
        missing.push(rows);
    }

    let views = complete
        .iter()
        .zip(&missing)
        .enumerate()
        .map(|(d, (x, rows))| {
            let mut presence = vec![true; l];
            for &i in rows {
                presence[i] = false;
            }
            ViewMatrix::new(format!("d{d}"), x.as_ref(), presence)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticData {
        views,
        complete,
        missing,
        planted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mse_all_gcca: f64,
    pub mse_all_issm: f64,
    /// `None` when no rows were masked.
    pub mse_missing_gcca: Option<f64>,
    pub mse_missing_issm: Option<f64>,
    /// `(missing_gcca − missing_issm) / missing_gcca`, when defined.
    pub improvement_ratio: Option<f64>,
    /// Worst constraint error of the two fits.
    pub constraint_error: f64,
    /// Worst relative eigen residual of the two fits.
    pub eigen_residual: f64,
}

/// Per-view-averaged reconstruction errors of one fitted model.
pub fn reconstruction_errors(
    model: &GccaModel,
    data: &SyntheticData,
) -> Result<(f64, Option<f64>)> {
    let mut all = 0.0;
    let mut miss = 0.0;
    let mut any_missing = false;
    for (d, complete) in data.complete.iter().enumerate() {
        let rec = model.reconstruct_view_uncentered(&model.labels[d])?;
        all += mse_rows(rec.as_ref(), complete.as_ref(), None);
        if !data.missing[d].is_empty() {
            any_missing = true;
            miss += mse_rows(rec.as_ref(), complete.as_ref(), Some(&data.missing[d]));
        }
    }
    let n = data.complete.len() as f64;
    Ok((all / n, any_missing.then_some(miss / n)))
}

fn mse_rows(a: MatRef<'_, f64>, b: MatRef<'_, f64>, rows: Option<&[usize]>) -> f64 {
    let cols = a.ncols();
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut add_row = |i: usize| {
        for j in 0..cols {
            let d = a[(i, j)] - b[(i, j)];
            sum += d * d;
        }
        count += cols;
    };
    match rows {
        Some(rows) => rows.iter().for_each(|&i| add_row(i)),
        None => (0..a.nrows()).for_each(&mut add_row),
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Fits both variants on one synthetic draw and scores the reconstructions.
pub fn run_trial(cfg: &SimConfig, k: usize, opts: &GccaOptions) -> Result<SimResult> {
    let data = generate_synthetic(cfg)?;
    let standard = fit_gcca(&data.views, k, Variant::Standard, opts)?;
    let issm = fit_gcca(&data.views, k, Variant::Issm, opts)?;
    let (all_g, miss_g) = reconstruction_errors(&standard, &data)?;
    let (all_i, miss_i) = reconstruction_errors(&issm, &data)?;
    let improvement_ratio = match (miss_g, miss_i) {
        (Some(g), Some(i)) if g > 0.0 => Some((g - i) / g),
        _ => None,
    };
    Ok(SimResult {
        mse_all_gcca: all_g,
        mse_all_issm: all_i,
        mse_missing_gcca: miss_g,
        mse_missing_issm: miss_i,
        improvement_ratio,
        constraint_error: standard.constraint_error().max(issm.constraint_error()),
        eigen_residual: standard
            .diagnostics
            .eigen_residual
            .max(issm.diagnostics.eigen_residual),
    })
}

/// Grid for [`sweep`]; every combination of the three axes is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub domains: Vec<usize>,
    pub sparsity: Vec<f64>,
    pub rows: Vec<usize>,
}

impl SweepGrid {
    /// Sparsity sweep for 4 and 8 views at L = 500.
    pub fn sparsity_preset() -> Self {
        Self {
            domains: vec![4, 8],
            sparsity: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
            rows: vec![500],
        }
    }

    /// Row-count sweep for 2 views at 40% sparsity.
    pub fn rows_preset() -> Self {
        Self {
            domains: vec![2],
            sparsity: vec![0.4],
            rows: vec![500, 1000, 1500, 2000, 2500],
        }
    }

    pub fn cells(&self) -> Vec<(usize, f64, usize)> {
        let mut out = Vec::new();
        for &n in &self.domains {
            for &s in &self.sparsity {
                for &l in &self.rows {
                    out.push((n, s, l));
                }
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty() || self.sparsity.is_empty() || self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics of the finite values; NaN when there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub domains: usize,
    pub sparsity: f64,
    pub rows: usize,
    pub k: usize,
    pub reps: usize,
    pub mse_all_gcca: MeanStd,
    pub mse_all_issm: MeanStd,
    pub mse_missing_gcca: MeanStd,
    pub mse_missing_issm: MeanStd,
    pub improvement: MeanStd,
    pub trials: Vec<SimResult>,
}

impl SweepCell {
    pub fn aggregate(
        (domains, sparsity, rows): (usize, f64, usize),
        k: usize,
        trials: Vec<SimResult>,
    ) -> Self {
        let nan = |o: Option<f64>| o.unwrap_or(f64::NAN);
        Self {
            domains,
            sparsity,
            rows,
            k,
            reps: trials.len(),
            mse_all_gcca: MeanStd::of(trials.iter().map(|t| t.mse_all_gcca)),
            mse_all_issm: MeanStd::of(trials.iter().map(|t| t.mse_all_issm)),
            mse_missing_gcca: MeanStd::of(trials.iter().map(|t| nan(t.mse_missing_gcca))),
            mse_missing_issm: MeanStd::of(trials.iter().map(|t| nan(t.mse_missing_issm))),
            improvement: MeanStd::of(trials.iter().map(|t| nan(t.improvement_ratio))),
            trials,
        }
    }
}

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub reps: usize,
    /// Common-space dimension; `None` uses the latent dimension.
    pub k: Option<usize>,
    pub latent_dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            reps: 100,
            k: None,
            latent_dim: 10,
            sigma: 0.1,
            seed: 0,
        }
    }
}

/// Seed of trial `rep` in cell `cell`; independent of execution order.
pub fn trial_seed(root: u64, cell: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(root, cell as u64), rep as u64)
}

/// Runs `reps` trials per grid cell and aggregates them.
pub fn sweep(grid: &SweepGrid, settings: &SweepSettings, opts: &GccaOptions) -> Result<Vec<SweepCell>> {
    if settings.reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::Config("empty simulation grid".into()));
    }
    let k = settings.k.unwrap_or(settings.latent_dim);
    grid.cells()
        .into_iter()
        .enumerate()
        .map(|(ci, cell)| {
            let (n, s, l) = cell;
            let trials = (0..settings.reps)
                .into_par_iter()
                .map(|rep| {
                    let cfg = SimConfig {
                        rows: l,
                        latent_dim: settings.latent_dim,
                        domains: n,
                        sparsity: s,
                        sigma: settings.sigma,
                        seed: trial_seed(settings.seed, ci, rep),
                    };
                    run_trial(&cfg, k, opts)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepCell::aggregate(cell, k, trials))
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: [&str; 11] = [
    "n",
    "s",
    "L",
    "k",
    "reps",
    "mse_all_gcca",
    "mse_all_issm",
    "mse_missing_gcca",
    "mse_missing_issm",
    "improvement_mean",
    "improvement_std",
];

/// Writes the aggregated sweep table, one row per cell.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for c in cells {
        w.write_record([
            c.domains.to_string(),
            c.sparsity.to_string(),
            c.rows.to_string(),
            c.k.to_string(),
            c.reps.to_string(),
            c.mse_all_gcca.mean.to_string(),
            c.mse_all_issm.mean.to_string(),
            c.mse_missing_gcca.mean.to_string(),
            c.mse_missing_issm.mean.to_string(),
            c.improvement.mean.to_string(),
            c.improvement.std.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Writes every trial of every cell, for re-aggregation.
pub fn write_trials_csv<W: Write>(cells: &[SweepCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "s",
        "L",
        "rep",
        "mse_all_gcca",
        "mse_all_issm",
        "mse_missing_gcca",
        "mse_missing_issm",
        "improvement",
    ])?;
    let opt = |o: Option<f64>| o.map_or_else(|| "NaN".to_string(), |v| v.to_string());
    for c in cells {
        for (rep, t) in c.trials.iter().enumerate() {
            w.write_record([
                c.domains.to_string(),
                c.sparsity.to_string(),
                c.rows.to_string(),
                rep.to_string(),
                t.mse_all_gcca.to_string(),
                t.mse_all_issm.to_string(),
                opt(t.mse_missing_gcca),
                opt(t.mse_missing_issm),
                opt(t.improvement_ratio),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Rating data for several domains whose user factors share one planted
/// representation: `r_ij = μ + (F A^(d))_i · v_j + noise`, clamped to [1, 5].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedRatingsConfig {
    pub users: usize,
    pub items_per_domain: usize,
    pub latent_dim: usize,
    pub domains: usize,
    /// Probability that a (user, item) pair is rated.
    pub density: f64,
    pub noise: f64,
    pub mu: f64,
    pub seed: u64,
}

impl Default for PlantedRatingsConfig {
    fn default() -> Self {
        Self {
            users: 400,
            items_per_domain: 150,
            latent_dim: 4,
            domains: 2,
            density: 0.15,
            noise: 0.3,
            mu: 3.5,
            seed: 0,
        }
    }
}

/// Draws planted ratings; domains are labeled `d0`, `d1`, ...
pub fn generate_planted_ratings(
    cfg: &PlantedRatingsConfig,
) -> Result<std::collections::BTreeMap<String, crate::corpus::RatingsMatrix>> {
    use crate::corpus::{RatingTriple, RatingsMatrix};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    if cfg.users == 0 || cfg.items_per_domain == 0 || cfg.latent_dim == 0 || cfg.domains == 0 {
        return Err(Error::Config("planted ratings need positive sizes".into()));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::Config(format!("density must be in (0, 1], got {}", cfg.density)));
    }
    let mut rng = seeded_rng(cfg.seed);
    let r = cfg.latent_dim;
    let shared = gaussian_matrix(cfg.users, r, &mut rng);
    let norm = 1.0 / (r as f64).sqrt();
    let mut out = std::collections::BTreeMap::new();
    for d in 0..cfg.domains {
        let a = gaussian_matrix(r, r, &mut rng) * faer::Scale(norm);
        let items = gaussian_matrix(cfg.items_per_domain, r, &mut rng) * faer::Scale(norm);
        let users = &shared * &a;
        let mut triples = Vec::new();
        for i in 0..cfg.users {
            for j in 0..cfg.items_per_domain {
                if rng.random::<f64>() >= cfg.density {
                    continue;
                }
                let signal: f64 = (0..r).map(|c| users[(i, c)] * items[(j, c)]).sum();
                let eps: f64 = StandardNormal.sample(&mut rng);
                triples.push(RatingTriple {
                    user: format!("u{i:05}"),
                    item: format!("d{d}i{j:05}"),
                    rating: (cfg.mu + signal + cfg.noise * eps).clamp(1.0, 5.0),
                    timestamp: None,
                });
            }
        }
        let label = format!("d{d}");
        out.insert(label.clone(), RatingsMatrix::from_triples(label, &triples)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen_desc;

    #[test]
    fn zero_sparsity_keeps_every_row() {
        let cfg = SimConfig {
            sparsity: 0.0,
            rows: 50,
            latent_dim: 3,
            domains: 3,
            ..SimConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        for v in &data.views {
            assert!(v.presence().iter().all(|&p| p));
        }
        assert!(data.missing.iter().all(Vec::is_empty));
    }

    #[test]
    fn noiseless_complete_views_have_planted_rank() {
        let cfg = SimConfig {
            sparsity: 0.0,
            sigma: 0.0,
            rows: 40,
            latent_dim: 3,
            domains: 2,
            seed: 4,
        };
        let data = generate_synthetic(&cfg).unwrap();
        for x in &data.complete {
            let gram = x.transpose() * x;
            let (vals, _) = symmetric_eigen_desc(gram.as_ref()).unwrap();
            assert!(vals.iter().filter(|&&v| v > 1e-10 * vals[0]).count() <= 3);
        }
    }

    #[test]
    fn shapes_and_mask_counts() {
        let cfg = SimConfig {
            rows: 100,
            latent_dim: 5,
            domains: 3,
            sparsity: 0.25,
            ..SimConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        assert_eq!(data.views.len(), 3);
        for (v, miss) in data.views.iter().zip(&data.missing) {
            assert_eq!((v.rows(), v.width()), (100, 5));
            assert_eq!(miss.len(), 25);
            let zero_rows = (0..100)
                .filter(|&i| (0..5).all(|j| v.x()[(i, j)] == 0.0))
                .count();
            assert_eq!(zero_rows, 25);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig::default();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.missing, b.missing);
        assert_eq!(a.complete[1], b.complete[1]);
    }

    #[test]
    fn noiseless_planted_model_is_recovered_exactly() {
        let cfg = SimConfig {
            sparsity: 0.0,
            sigma: 0.0,
            rows: 60,
            latent_dim: 4,
            domains: 3,
            seed: 2,
        };
        let opts = GccaOptions {
            reconstruction_ridge: 0.0,
            ..GccaOptions::default()
        };
        let r = run_trial(&cfg, 4, &opts).unwrap();
        assert!(r.mse_all_gcca < 1e-8, "{}", r.mse_all_gcca);
        assert!(r.mse_all_issm < 1e-8, "{}", r.mse_all_issm);
        assert!(r.improvement_ratio.is_none());
    }

    #[test]
    fn reported_mse_matches_elementwise_sum() {
        let cfg = SimConfig {
            rows: 80,
            latent_dim: 3,
            domains: 3,
            sparsity: 0.3,
            ..SimConfig::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let model = fit_gcca(&data.views, 3, Variant::Issm, &GccaOptions::default()).unwrap();
        let (all, miss) = reconstruction_errors(&model, &data).unwrap();
        let (mut brute_all, mut brute_miss) = (0.0, 0.0);
        for d in 0..3 {
            let rec = model.reconstruct_view_uncentered(&model.labels[d]).unwrap();
            let mut s = 0.0;
            for i in 0..80 {
                for j in 0..3 {
                    s += (rec[(i, j)] - data.complete[d][(i, j)]).powi(2);
                }
            }
            brute_all += s / 240.0 / 3.0;
            let mut s = 0.0;
            for &i in &data.missing[d] {
                for j in 0..3 {
                    s += (rec[(i, j)] - data.complete[d][(i, j)]).powi(2);
                }
            }
            brute_miss += s / (data.missing[d].len() * 3) as f64 / 3.0;
        }
        assert!((all - brute_all).abs() < 1e-12);
        assert!((miss.unwrap() - brute_miss).abs() < 1e-12);
    }

    #[test]
    fn infeasible_masks_are_rejected() {
        let cfg = SimConfig {
            rows: 10,
            latent_dim: 2,
            domains: 2,
            sparsity: 0.6,
            ..SimConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn single_rep_sweep_equals_run_trial() {
        let grid = SweepGrid {
            domains: vec![3],
            sparsity: vec![0.2],
            rows: vec![60],
        };
        let settings = SweepSettings {
            reps: 1,
            k: Some(3),
            latent_dim: 3,
            sigma: 0.1,
            seed: 5,
        };
        let opts = GccaOptions::default();
        let cells = sweep(&grid, &settings, &opts).unwrap();
        let cfg = SimConfig {
            rows: 60,
            latent_dim: 3,
            domains: 3,
            sparsity: 0.2,
            sigma: 0.1,
            seed: trial_seed(5, 0, 0),
        };
        let direct = run_trial(&cfg, 3, &opts).unwrap();
        assert_eq!(cells[0].trials[0], direct);
        assert_eq!(cells[0].mse_missing_issm.mean, direct.mse_missing_issm.unwrap());
    }
}

//! The `evaluate` grid of (pair, views, c) cells and the aggregate tables
//! that `report` regenerates.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use gcca_rec::corpus::{select_common_users, RatingsMatrix, Review};
use gcca_rec::dump::{load_json, save_json};
use gcca_rec::gcca::{Variant, ViewMatrix};
use gcca_rec::pipeline::{
    amazon_pairs, evaluate_cold_start, movielens_pairs, pca_view, write_reports_csv, CrossDomainData, EvalPlan,
    EvalReport, PipelineConfig,
};
use gcca_rec::topics::{build_corpus, fit_lda, user_topic_view, DEFAULT_STOPWORDS};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PairConfig, RunConfig, Source, ViewKind, ViewSet};
use crate::data::{self, create, create_dir, slug, writeln_to, Loaded};
use crate::error::{CliError, Result};

/// One evaluated cell as written to `cells/<name>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutput {
    /// Position in the requested grid.
    pub index: usize,
    pub views: ViewSet,
    pub min_ratings: usize,
    pub report: EvalReport,
}

pub fn cell_name(pair: &PairConfig, views: &ViewSet, c: usize) -> String {
    let aux: Vec<String> = pair.auxiliaries.iter().map(|a| slug(a)).collect();
    format!("{}__{}__{}__c{c}", slug(&pair.target), aux.join("+"), views)
}

/// Preset pairs followed by explicit ones, without repeats.
pub fn requested_pairs(cfg: &RunConfig) -> Vec<PairConfig> {
    let preset = match cfg.evaluate.preset {
        Some(Source::Movielens) => movielens_pairs(),
        Some(Source::Amazon) => amazon_pairs(),
        None => Vec::new(),
    };
    let mut out: Vec<PairConfig> = Vec::new();
    let all = preset
        .into_iter()
        .map(|(target, aux)| PairConfig {
            target,
            auxiliaries: vec![aux],
        })
        .chain(cfg.evaluate.pairs.iter().cloned());
    for p in all {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

pub fn pipeline_config(cfg: &RunConfig, pair: &PairConfig, views: &ViewSet) -> PipelineConfig {
    PipelineConfig {
        target: pair.target.clone(),
        auxiliaries: pair.auxiliaries.clone(),
        auxiliary_mf_views: views.contains(ViewKind::Mf),
        ..cfg.pipeline.clone()
    }
}

/// Aligned data of one pair plus the PCA and LDA views it asks for.
pub fn prepare(
    cfg: &RunConfig,
    loaded: &Loaded,
    pair: &PairConfig,
    views: &ViewSet,
) -> Result<(CrossDomainData, Vec<ViewMatrix>)> {
    let names: Vec<String> = std::iter::once(pair.target.clone())
        .chain(pair.auxiliaries.iter().cloned())
        .collect();
    let matrices: BTreeMap<String, RatingsMatrix> = if cfg.data.min_ratings > 0 {
        select_common_users(&loaded.matrices, &names, cfg.data.min_ratings)?
    } else {
        names
            .iter()
            .filter_map(|n| loaded.matrices.get(n).map(|m| (n.clone(), m.clone())))
            .collect()
    };
    let data = CrossDomainData::new(&matrices, &pair.target, &pair.auxiliaries)?;
    let mut extra = Vec::new();
    if views.contains(ViewKind::Pca) {
        for aux in &data.auxiliaries {
            let k = cfg.evaluate.pca_components.min(aux.n_users()).min(aux.n_items());
            extra.push(pca_view(aux, k, &format!("pca:{}", aux.domain()))?);
        }
    }
    if views.contains(ViewKind::Lda) {
        let mut reviews: Vec<Review> = Vec::new();
        for aux in &pair.auxiliaries {
            let r = loaded.reviews.get(aux).ok_or_else(|| {
                CliError::usage(format!("the lda view needs review text, and {aux:?} has none"))
            })?;
            reviews.extend(r.reviews.iter().cloned());
        }
        let corpus = build_corpus(&reviews, DEFAULT_STOPWORDS, cfg.data.min_token_count)?;
        let model = fit_lda(&corpus, &cfg.evaluate.lda)?;
        extra.push(user_topic_view(&model, &data.alignment, "lda")?);
    }
    Ok((data, extra))
}

fn check(cfg: &RunConfig, pairs: &[PairConfig]) -> Result<()> {
    let e = &cfg.evaluate;
    if pairs.is_empty() {
        return Err(CliError::usage("no pairs to evaluate; pass --preset or --target with --auxiliary"));
    }
    if e.c.is_empty() || e.variants.is_empty() || e.views.is_empty() {
        return Err(CliError::usage("c, variants and views each need at least one value"));
    }
    for p in pairs {
        if p.auxiliaries.is_empty() {
            return Err(CliError::usage(format!("pair with target {:?} has no auxiliaries", p.target)));
        }
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<Vec<CellOutput>> {
    let pairs = requested_pairs(cfg);
    check(cfg, &pairs)?;
    let e = &cfg.evaluate;
    let domains: BTreeSet<String> = pairs
        .iter()
        .flat_map(|p| std::iter::once(p.target.clone()).chain(p.auxiliaries.iter().cloned()))
        .collect();
    let loaded = data::load(&cfg.data, &domains)?;
    let plan = EvalPlan {
        folds: e.folds,
        max_folds: e.max_folds,
        variants: e.variants.clone(),
    };

    let groups: Vec<(&PairConfig, &ViewSet)> = pairs.iter().flat_map(|p| e.views.iter().map(move |v| (p, v))).collect();
    log::info!("{} cells", groups.len() * e.c.len());
    let outcomes: Vec<Vec<std::result::Result<EvalReport, String>>> = groups
        .par_iter()
        .map(|&(pair, views)| {
            let prepared = prepare(cfg, &loaded, pair, views);
            let pcfg = pipeline_config(cfg, pair, views);
            e.c.iter()
                .map(|&c| match &prepared {
                    Ok((data, extra)) => evaluate_cold_start(data, &pcfg, &plan, c, extra).map_err(|e| e.to_string()),
                    Err(err) => Err(err.to_string()),
                })
                .collect()
        })
        .collect();

    let cells_dir = out.join("cells");
    create_dir(&cells_dir)?;
    let failures_path = out.join("failures.csv");
    let mut failures = csv::Writer::from_writer(create(&failures_path)?);
    failures.write_record(["cell", "error"])?;
    let mut done = Vec::new();
    let mut failed = 0;
    let mut index = 0;
    for ((pair, views), results) in groups.iter().zip(outcomes) {
        for (&c, result) in e.c.iter().zip(results) {
            let name = cell_name(pair, views, c);
            match result {
                Ok(report) => {
                    let cell = CellOutput {
                        index,
                        views: (*views).clone(),
                        min_ratings: cfg.data.min_ratings,
                        report,
                    };
                    save_json(&cell, &cells_dir.join(format!("{name}.json")))?;
                    write_reports_csv(
                        std::slice::from_ref(&cell.report),
                        create(&cells_dir.join(format!("{name}.csv")))?,
                    )?;
                    done.push(cell);
                }
                Err(msg) => {
                    log::error!("cell {name} failed: {msg}");
                    failures.write_record([name.as_str(), msg.as_str()])?;
                    failed += 1;
                }
            }
            index += 1;
        }
    }
    failures.flush().map_err(|e| CliError::io(&failures_path, e))?;
    write_tables(&done, out)?;
    if failed > 0 {
        return Err(CliError::CellsFailed {
            failed,
            total: index,
            report: failures_path,
        });
    }
    Ok(done)
}

/// Every `cells/*.json` under `dir`, in grid order.
pub fn read_cells(dir: &Path) -> Result<Vec<CellOutput>> {
    let cells_dir = dir.join("cells");
    let entries = std::fs::read_dir(&cells_dir).map_err(|e| CliError::io(&cells_dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(&cells_dir, e))?.path();
        if path.extension().is_some_and(|x| x == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut cells = paths
        .iter()
        .map(|p| load_json::<CellOutput>(p).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by_key(|c| c.index);
    Ok(cells)
}

fn method_order(cells: &[CellOutput]) -> Vec<String> {
    let present: BTreeSet<&str> = cells
        .iter()
        .flat_map(|c| c.report.summary.iter().map(|s| s.method.as_str()))
        .collect();
    let mut order = vec!["offset".to_string(), "mf".to_string()];
    for v in [Variant::Standard, Variant::Issm, Variant::FastIssm] {
        let name = format!("mf_gcca_{}", v.name());
        if present.contains(name.as_str()) {
            order.push(name);
        }
    }
    order
}

/// `table.csv` with one row per cell and an MSE plus improvement-over-Offset
/// column pair per method, and the same as a markdown `table.md`.
pub fn write_tables(cells: &[CellOutput], out: &Path) -> Result<()> {
    let methods = method_order(cells);
    let csv_path = out.join("table.csv");
    let mut w = csv::Writer::from_writer(create(&csv_path)?);
    let mut header = vec!["target".to_string(), "auxiliaries".into(), "views".into(), "c".into(), "folds".into()];
    for m in &methods {
        header.push(format!("{m}_mse"));
        header.push(format!("{m}_improvement"));
    }
    w.write_record(&header)?;

    let md_path = out.join("table.md");
    let mut md = create(&md_path)?;
    let mut md_header = vec!["Target", "Auxiliary", "Views", "c"];
    md_header.extend(methods.iter().map(String::as_str));
    writeln_to(&mut md, &md_path, &format!("| {} |", md_header.join(" | ")))?;
    writeln_to(&mut md, &md_path, &format!("|{}", "---|".repeat(md_header.len())))?;

    for cell in cells {
        let r = &cell.report;
        let aux = r.auxiliaries.join("+");
        let mut row = vec![
            r.target.clone(),
            aux.clone(),
            cell.views.to_string(),
            r.c.to_string(),
            r.folds.to_string(),
        ];
        let mut md_row = vec![r.target.clone(), aux, cell.views.to_string(), r.c.to_string()];
        for m in &methods {
            match r.summary.iter().find(|s| &s.method == m) {
                Some(s) => {
                    row.push(s.mean_mse.to_string());
                    row.push(s.improvement_over_offset.to_string());
                    md_row.push(if m == "offset" {
                        format!("{:.4}", s.mean_mse)
                    } else {
                        format!("{:.4} ({:.2}%)", s.mean_mse, 100.0 * s.improvement_over_offset)
                    });
                }
                None => {
                    row.extend([String::new(), String::new()]);
                    md_row.push(String::new());
                }
            }
        }
        w.write_record(&row)?;
        writeln_to(&mut md, &md_path, &format!("| {} |", md_row.join(" | ")))?;
    }
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;
    data::finish(md, &md_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand_to_the_table_grids() {
        let mut cfg = RunConfig::default();
        cfg.evaluate.preset = Some(Source::Movielens);
        assert_eq!(requested_pairs(&cfg).len(), 12);
        cfg.evaluate.pairs.push(PairConfig {
            target: "Action".into(),
            auxiliaries: vec!["Drama".into()],
        });
        assert_eq!(requested_pairs(&cfg).len(), 12);
        cfg.evaluate.preset = Some(Source::Amazon);
        assert_eq!(requested_pairs(&cfg).len(), 13);
    }

    #[test]
    fn cell_names_are_unique_per_grid_point() {
        let p = PairConfig {
            target: "Digital Music".into(),
            auxiliaries: vec!["CD".into(), "Books".into()],
        };
        assert_eq!(cell_name(&p, &"mf+lda".parse().unwrap(), 5), "digital-music__cd+books__lda+mf__c5");
    }
}

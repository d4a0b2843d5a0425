//! Loading domains from a raw dataset root or an ingested directory, and the
//! `ingest` command that writes the latter.
//!
//! An ingested directory holds `dataset.json`, `stats.csv`, and per domain
//! `domains/<slug>/{ratings,users,items}.csv` plus, for review datasets,
//! `reviews/<slug>.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use gcca_rec::corpus::{
    domain_stats, read_manifest_csv, read_ratings_csv, write_manifest_csv, write_ratings_csv, CategoryReviews,
    RatingsMatrix,
};
use gcca_rec::dump::{load_json, save_json};
use gcca_rec::pipeline::{DataDir, AMAZON_DOMAINS, MOVIELENS_DOMAINS};
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, Source};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: Source,
    /// Domain name to directory slug.
    pub domains: BTreeMap<String, String>,
    /// Records skipped while parsing, per domain.
    pub skipped: BTreeMap<String, usize>,
    pub reviews: bool,
}

#[derive(Debug, Default)]
pub struct Loaded {
    pub matrices: BTreeMap<String, RatingsMatrix>,
    pub reviews: BTreeMap<String, CategoryReviews>,
}

/// Lowercase ASCII with runs of anything else collapsed to `-`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn default_domains(source: Source) -> Vec<String> {
    let names: &[&str] = match source {
        Source::Movielens => &MOVIELENS_DOMAINS,
        Source::Amazon => &AMAZON_DOMAINS,
    };
    names.iter().map(|s| s.to_string()).collect()
}

fn raw_dir(cfg: &DataConfig) -> Result<(Source, DataDir)> {
    let source = cfg
        .source
        .ok_or_else(|| CliError::usage("no dataset source; set data.source or pass --source"))?;
    let dir = cfg
        .dir
        .clone()
        .ok_or_else(|| CliError::usage("no dataset directory; set data.dir or pass --data-dir"))?;
    Ok((source, DataDir::new(dir)))
}

fn read_raw(source: Source, dir: &DataDir, domains: &[String]) -> Result<(Loaded, BTreeMap<String, usize>)> {
    Ok(match source {
        Source::Movielens => (
            Loaded {
                matrices: dir.movielens(domains)?,
                reviews: BTreeMap::new(),
            },
            BTreeMap::new(),
        ),
        Source::Amazon => {
            let ingest = dir.amazon(domains)?;
            (
                Loaded {
                    matrices: ingest.matrices,
                    reviews: ingest.reviews,
                },
                ingest.skipped,
            )
        }
    })
}

/// Loads the named domains, preferring an ingested directory.
pub fn load(cfg: &DataConfig, domains: &BTreeSet<String>) -> Result<Loaded> {
    let wanted: Vec<String> = domains.iter().cloned().collect();
    if let Some(root) = &cfg.ingested {
        return load_ingested(root, &wanted, cfg.source);
    }
    let (source, dir) = raw_dir(cfg)?;
    Ok(read_raw(source, &dir, &wanted)?.0)
}

fn load_ingested(root: &Path, wanted: &[String], source: Option<Source>) -> Result<Loaded> {
    let manifest: DatasetManifest = load_json(&root.join(MANIFEST))?;
    if let Some(s) = source {
        if s != manifest.source {
            return Err(CliError::usage(format!(
                "{} holds {} data but the source is {s}",
                root.display(),
                manifest.source
            )));
        }
    }
    let mut out = Loaded::default();
    for name in wanted {
        let slug = manifest.domains.get(name).ok_or_else(|| {
            CliError::usage(format!(
                "domain {name:?} is not in {}; it has {:?}",
                root.display(),
                manifest.domains.keys().collect::<Vec<_>>()
            ))
        })?;
        let dir = root.join("domains").join(slug);
        let users = read_manifest_csv(open(&dir.join("users.csv"))?)?;
        let items = read_manifest_csv(open(&dir.join("items.csv"))?)?;
        let matrix = read_ratings_csv(name, open(&dir.join("ratings.csv"))?, users, items)?;
        out.matrices.insert(name.clone(), matrix);
        let reviews = root.join("reviews").join(format!("{slug}.json"));
        if manifest.reviews && reviews.is_file() {
            out.reviews.insert(name.clone(), load_json(&reviews)?);
        }
    }
    Ok(out)
}

/// Writes the canonical dumps of every requested domain into `out`.
pub fn ingest(cfg: &DataConfig, out: &Path) -> Result<DatasetManifest> {
    let (source, dir) = raw_dir(cfg)?;
    let domains = if cfg.domains.is_empty() {
        default_domains(source)
    } else {
        cfg.domains.clone()
    };
    let (loaded, skipped) = read_raw(source, &dir, &domains)?;
    let mut manifest = DatasetManifest {
        source,
        domains: BTreeMap::new(),
        skipped,
        reviews: !loaded.reviews.is_empty(),
    };
    for (name, m) in &loaded.matrices {
        let slug = slug(name);
        if manifest.domains.values().any(|s| *s == slug) {
            return Err(CliError::usage(format!("two domains share the directory name {slug:?}")));
        }
        let dir = out.join("domains").join(&slug);
        create_dir(&dir)?;
        write_ratings_csv(m, create(&dir.join("ratings.csv"))?)?;
        write_manifest_csv(m.user_ids(), create(&dir.join("users.csv"))?)?;
        write_manifest_csv(m.item_ids(), create(&dir.join("items.csv"))?)?;
        if let Some(r) = loaded.reviews.get(name) {
            let path: PathBuf = out.join("reviews").join(format!("{slug}.json"));
            create_dir(path.parent().expect("joined path"))?;
            save_json(r, &path)?;
        }
        manifest.domains.insert(name.clone(), slug);
    }
    let mut w = csv::Writer::from_writer(create(&out.join("stats.csv"))?);
    w.write_record(["domain", "users", "items", "ratings", "sparsity", "skipped"])?;
    for s in domain_stats(&loaded.matrices) {
        let skipped = manifest.skipped.get(&s.domain).copied().unwrap_or(0);
        w.write_record([
            s.domain.clone(),
            s.users.to_string(),
            s.items.to_string(),
            s.ratings.to_string(),
            s.sparsity.to_string(),
            skipped.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(out.join("stats.csv"), e))?;
    save_json(&manifest, &out.join(MANIFEST))?;
    Ok(manifest)
}

pub fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Appends one line to a text report.
pub fn writeln_to(w: &mut impl Write, path: &Path, line: &str) -> Result<()> {
    writeln!(w, "{line}").map_err(|e| CliError::io(path, e))
}

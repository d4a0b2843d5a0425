//! Rating ingestion, user alignment across domains, cross-validation folds
//! and cold-start censoring.

mod ingest;
mod matrix;
mod split;

pub use ingest::{
    ingest_amazon, ingest_movielens, movielens_domains, read_amazon_reviews, read_movie_genres,
    read_movielens_ratings, AmazonIngest, Review, CategoryReviews, MOVIELENS_GENRES,
};
pub use matrix::{domain_stats, filter_min_ratings, DomainStats, Rating, RatingTriple, RatingsMatrix};
pub use split::{
    align_users, common_users, make_cold_start, select_common_users, split_folds, FoldSplit, UserAlignment,
};

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Writes `user_index,item_index,rating` rows.
pub fn write_ratings_csv<W: Write>(matrix: &RatingsMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_index", "item_index", "rating"])?;
    for e in matrix.entries() {
        w.write_record([e.user.to_string(), e.item.to_string(), e.value.to_string()])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

/// Writes `index,id` rows for a user or item index.
pub fn write_manifest_csv<W: Write>(ids: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "id"])?;
    for (i, id) in ids.iter().enumerate() {
        w.write_record([i.to_string(), id.clone()])?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

pub fn read_manifest_csv<R: Read>(input: R) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_reader(input);
    let mut ids = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let index: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Serde(format!("manifest row {line}: bad index")))?;
        if index != ids.len() {
            return Err(Error::Serde(format!("manifest row {line}: index {index} out of order")));
        }
        ids.push(rec.get(1).unwrap_or_default().to_string());
    }
    Ok(ids)
}

/// Reads a ratings dump produced by [`write_ratings_csv`] with its manifests.
pub fn read_ratings_csv<R: Read>(
    domain: &str,
    input: R,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
) -> Result<RatingsMatrix> {
    let mut r = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    for rec in r.deserialize::<(u32, u32, f64)>() {
        let (user, item, value) = rec?;
        entries.push(Rating { user, item, value });
    }
    RatingsMatrix::new(domain, user_ids, item_ids, entries)
}

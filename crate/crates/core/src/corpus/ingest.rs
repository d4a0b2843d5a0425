use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::{RatingTriple, RatingsMatrix};
use crate::error::{Error, Result};

/// Genre labels of the MovieLens-1M movies file.
pub const MOVIELENS_GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Splits a byte stream into lines, decoding lossily so stray Latin-1 bytes
/// in titles do not abort ingestion.
fn lossy_lines<'a, R: BufRead + 'a>(
    mut reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    let mut buf = Vec::new();
    let mut line_no = 0;
    std::iter::from_fn(move || {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                line_no += 1;
                let text = String::from_utf8_lossy(&buf);
                Some(Ok((line_no, text.trim_end_matches(['\n', '\r']).to_string())))
            }
            Err(e) => Some(Err(Error::io(path, e))),
        }
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_rating(raw: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad rating {raw:?}")))?;
    if !(1.0..=5.0).contains(&v) {
        return Err(parse_err(path, line, format!("rating {v} outside [1, 5]")));
    }
    Ok(v)
}

/// Reads `MovieID::Title::Genre|Genre|...` into a map from movie to genres.
pub fn read_movie_genres<R: BufRead>(reader: R, path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for line in lossy_lines(reader, path) {
        let (no, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        // titles may not contain "::", so the genre field is the last one
        let mut parts = text.split("::");
        let id = parts.next().unwrap_or_default().trim();
        let genres = text.rsplit("::").next().unwrap_or_default();
        if id.is_empty() || text.matches("::").count() < 2 {
            return Err(parse_err(path, no, "expected MovieID::Title::Genres"));
        }
        out.insert(
            id.to_string(),
            genres.split('|').map(|g| g.trim().to_string()).collect(),
        );
    }
    Ok(out)
}

/// Reads `UserID::MovieID::Rating::Timestamp` lines.
pub fn read_movielens_ratings<R: BufRead>(reader: R, path: &Path) -> Result<Vec<RatingTriple>> {
    let mut out = Vec::new();
    for line in lossy_lines(reader, path) {
        let (no, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split("::").collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                no,
                format!("expected 4 fields separated by '::', found {}", fields.len()),
            ));
        }
        let timestamp = fields[3]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(path, no, format!("bad timestamp {:?}", fields[3])))?;
        out.push(RatingTriple {
            user: fields[0].trim().to_string(),
            item: fields[1].trim().to_string(),
            rating: parse_rating(fields[2], path, no)?,
            timestamp: Some(timestamp),
        });
    }
    Ok(out)
}

/// Builds one matrix per requested genre. A rating is copied into every
/// requested genre its movie carries.
pub fn movielens_domains(
    ratings: &[RatingTriple],
    movie_genres: &HashMap<String, Vec<String>>,
    genres: &[String],
) -> Result<BTreeMap<String, RatingsMatrix>> {
    if genres.is_empty() {
        return Err(Error::Config("no genres requested".into()));
    }
    for g in genres {
        if !MOVIELENS_GENRES.contains(&g.as_str()) {
            return Err(Error::Config(format!(
                "unknown genre {g:?}; expected one of {MOVIELENS_GENRES:?}"
            )));
        }
    }
    let mut per_genre: BTreeMap<&str, Vec<RatingTriple>> =
        genres.iter().map(|g| (g.as_str(), Vec::new())).collect();
    for r in ratings {
        let Some(tags) = movie_genres.get(&r.item) else {
            continue;
        };
        for tag in tags {
            if let Some(bucket) = per_genre.get_mut(tag.as_str()) {
                bucket.push(r.clone());
            }
        }
    }
    per_genre
        .into_iter()
        .map(|(g, triples)| Ok((g.to_string(), RatingsMatrix::from_triples(g, &triples)?)))
        .collect()
}

/// Reads the MovieLens-1M `ratings.dat` and `movies.dat` files.
pub fn ingest_movielens(
    ratings_path: &Path,
    movies_path: &Path,
    genres: &[String],
) -> Result<BTreeMap<String, RatingsMatrix>> {
    let movies = read_movie_genres(open(movies_path)?, movies_path)?;
    let ratings = read_movielens_ratings(open(ratings_path)?, ratings_path)?;
    let out = movielens_domains(&ratings, &movies, genres)?;
    for (g, m) in &out {
        log::info!("movielens {g}: {} users, {} items, {} ratings", m.n_users(), m.n_items(), m.len());
    }
    Ok(out)
}

/// One review with its text, kept for topic modeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub user: String,
    pub item: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryReviews {
    pub category: String,
    pub reviews: Vec<Review>,
}

#[derive(Debug, Clone, Default)]
pub struct AmazonIngest {
    pub matrices: BTreeMap<String, RatingsMatrix>,
    pub reviews: BTreeMap<String, CategoryReviews>,
    /// Records skipped per category for missing or malformed fields.
    pub skipped: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct AmazonRecord {
    #[serde(rename = "reviewerID")]
    reviewer_id: Option<String>,
    asin: Option<String>,
    overall: Option<f64>,
    #[serde(rename = "reviewText")]
    review_text: Option<String>,
    #[serde(rename = "unixReviewTime")]
    unix_review_time: Option<i64>,
}

/// Parses line-delimited JSON review records. Returns the triples, the
/// reviews that carried text, and the number of skipped records.
pub fn read_amazon_reviews<R: BufRead>(
    reader: R,
    path: &Path,
    category: &str,
) -> Result<(Vec<RatingTriple>, CategoryReviews, usize)> {
    let mut triples = Vec::new();
    let mut corpus = CategoryReviews {
        category: category.to_string(),
        reviews: Vec::new(),
    };
    let mut skipped = 0;
    for line in lossy_lines(reader, path) {
        let (no, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: AmazonRecord = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}:{no}: unreadable record skipped: {e}", path.display());
                skipped += 1;
                continue;
            }
        };
        let (Some(user), Some(item), Some(rating)) = (rec.reviewer_id, rec.asin, rec.overall) else {
            log::warn!("{}:{no}: record without reviewerID/asin/overall skipped", path.display());
            skipped += 1;
            continue;
        };
        if !(1.0..=5.0).contains(&rating) {
            log::warn!("{}:{no}: rating {rating} outside [1, 5] skipped", path.display());
            skipped += 1;
            continue;
        }
        if let Some(text) = rec.review_text {
            corpus.reviews.push(Review {
                user: user.clone(),
                item: item.clone(),
                text,
            });
        }
        triples.push(RatingTriple {
            user,
            item,
            rating,
            timestamp: rec.unix_review_time,
        });
    }
    Ok((triples, corpus, skipped))
}

/// Reads one review file per category.
pub fn ingest_amazon(review_paths: &BTreeMap<String, PathBuf>) -> Result<AmazonIngest> {
    let mut out = AmazonIngest::default();
    for (category, path) in review_paths {
        let (triples, corpus, skipped) = read_amazon_reviews(open(path)?, path, category)?;
        if skipped > 0 {
            log::warn!("amazon {category}: skipped {skipped} records");
        }
        let matrix = RatingsMatrix::from_triples(category.clone(), &triples)?;
        log::info!(
            "amazon {category}: {} users, {} items, {} ratings",
            matrix.n_users(),
            matrix.n_items(),
            matrix.len()
        );
        out.matrices.insert(category.clone(), matrix);
        out.reviews.insert(category.clone(), corpus);
        out.skipped.insert(category.clone(), skipped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MOVIES: &str = "1193::One Flew Over the Cuckoo's Nest (1975)::Drama\n\
                          1::Toy Story (1995)::Animation|Children's|Comedy\n\
                          2::Heat (1995)::Action|Crime|Thriller\n";

    #[test]
    fn documented_line_lands_in_drama() {
        let movies = read_movie_genres(MOVIES.as_bytes(), Path::new("movies")).unwrap();
        let ratings =
            read_movielens_ratings("1::1193::5::978300760\n".as_bytes(), Path::new("ratings")).unwrap();
        let domains = movielens_domains(&ratings, &movies, &["Drama".into()]).unwrap();
        let drama = &domains["Drama"];
        assert_eq!(drama.len(), 1);
        assert_eq!(drama.user_ids()[0], "1");
        assert_eq!(drama.item_ids()[0], "1193");
        assert_eq!(drama.entries()[0].value, 5.0);
    }

    #[test]
    fn multi_genre_ratings_are_replicated() {
        let movies = read_movie_genres(MOVIES.as_bytes(), Path::new("movies")).unwrap();
        let ratings = read_movielens_ratings(
            "7::2::4::1\n7::1::3::2\n8::2::2::3\n".as_bytes(),
            Path::new("ratings"),
        )
        .unwrap();
        let genres: Vec<String> = ["Action", "Thriller", "Comedy"].map(String::from).to_vec();
        let d = movielens_domains(&ratings, &movies, &genres).unwrap();
        assert_eq!((d["Action"].len(), d["Thriller"].len(), d["Comedy"].len()), (2, 2, 1));
    }

    #[test]
    fn latin1_titles_are_tolerated() {
        let bytes = b"5::Caf\xe9 (1990)::Drama\n";
        let movies = read_movie_genres(&bytes[..], Path::new("movies")).unwrap();
        assert_eq!(movies["5"], vec!["Drama".to_string()]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = read_movielens_ratings("1::2::3::4\n1::2::x\n".as_bytes(), Path::new("r")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_genre_is_rejected() {
        let err = movielens_domains(&[], &HashMap::new(), &["Cooking".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn amazon_records_map_fields_and_count_skips() {
        let data = r#"{"reviewerID": "A1", "asin": "B00X", "overall": 4.0, "reviewText": "great"}
{"reviewerID": "A2", "asin": "B00X", "reviewText": "no rating"}
not json
{"reviewerID": "A2", "asin": "B00Y", "overall": 2.0, "unixReviewTime": 5}
"#;
        let (triples, corpus, skipped) =
            read_amazon_reviews(data.as_bytes(), Path::new("a"), "Music").unwrap();
        assert_eq!(skipped, 2);
        assert_eq!(triples.len(), 2);
        assert_eq!(triples[0].user, "A1");
        assert_eq!(triples[0].rating, 4.0);
        assert_eq!(corpus.reviews.len(), 1);
        assert_eq!(corpus.reviews[0].text, "great");
    }
}

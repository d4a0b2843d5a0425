//! Locations of the public datasets inside a local data directory, and the
//! domain pairings of the published experiments.
//!
//! Expected layout:
//!
//! ```text
//! <root>/movielens/ratings.dat
//! <root>/movielens/movies.dat
//! <root>/amazon/reviews_Books_5.json
//! <root>/amazon/reviews_Kindle_Store_5.json
//! ...
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::corpus::{ingest_amazon, ingest_movielens, AmazonIngest, RatingsMatrix};
use crate::error::{Error, Result};

pub const MOVIELENS_DOMAINS: [&str; 4] = ["Action", "Comedy", "Drama", "Thriller"];

pub const AMAZON_DOMAINS: [&str; 6] = ["Books", "Kindle", "Movies", "CD", "Digital Music", "Videogames"];

/// Review file of an Amazon category in the 5-core release.
pub fn amazon_file_name(category: &str) -> Result<&'static str> {
    Ok(match category {
        "Books" => "reviews_Books_5.json",
        "Kindle" => "reviews_Kindle_Store_5.json",
        "Movies" => "reviews_Movies_and_TV_5.json",
        "CD" => "reviews_CDs_and_Vinyl_5.json",
        "Digital Music" => "reviews_Digital_Music_5.json",
        "Videogames" => "reviews_Video_Games_5.json",
        other => {
            return Err(Error::Config(format!(
                "unknown amazon category {other:?}; expected one of {AMAZON_DOMAINS:?}"
            )))
        }
    })
}

/// Every ordered (target, auxiliary) pair of the MovieLens genres.
pub fn movielens_pairs() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for t in MOVIELENS_DOMAINS {
        for a in MOVIELENS_DOMAINS {
            if t != a {
                out.push((t.to_string(), a.to_string()));
            }
        }
    }
    out
}

/// The two strongest auxiliaries reported for each Amazon target.
pub fn amazon_pairs() -> Vec<(String, String)> {
    [
        ("CD", "Digital Music"),
        ("CD", "Movies"),
        ("Movies", "Books"),
        ("Movies", "CD"),
        ("Kindle", "Books"),
        ("Kindle", "Movies"),
        ("Books", "Kindle"),
        ("Books", "Movies"),
        ("Digital Music", "CD"),
        ("Digital Music", "Movies"),
        ("Videogames", "Digital Music"),
        ("Videogames", "Movies"),
    ]
    .iter()
    .map(|(t, a)| (t.to_string(), a.to_string()))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataDir {
    pub root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn movielens_ratings(&self) -> PathBuf {
        self.root.join("movielens").join("ratings.dat")
    }

    pub fn movielens_movies(&self) -> PathBuf {
        self.root.join("movielens").join("movies.dat")
    }

    pub fn amazon_path(&self, category: &str) -> Result<PathBuf> {
        Ok(self.root.join("amazon").join(amazon_file_name(category)?))
    }

    pub fn has_movielens(&self) -> bool {
        self.movielens_ratings().is_file() && self.movielens_movies().is_file()
    }

    pub fn has_amazon(&self, categories: &[&str]) -> bool {
        categories
            .iter()
            .all(|c| self.amazon_path(c).map(|p| p.is_file()).unwrap_or(false))
    }

    pub fn movielens(&self, genres: &[String]) -> Result<BTreeMap<String, RatingsMatrix>> {
        require(&self.movielens_ratings())?;
        require(&self.movielens_movies())?;
        ingest_movielens(&self.movielens_ratings(), &self.movielens_movies(), genres)
    }

    pub fn amazon(&self, categories: &[String]) -> Result<AmazonIngest> {
        let paths = categories
            .iter()
            .map(|c| {
                let p = self.amazon_path(c)?;
                require(&p)?;
                Ok((c.clone(), p))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        ingest_amazon(&paths)
    }
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
        ))
    }
}

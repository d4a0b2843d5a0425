//! Bag-of-words user documents and a collapsed-Gibbs LDA whose per-user
//! topic proportions serve as an extra view.

use std::collections::{BTreeMap, BTreeSet};

use faer::Mat;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Review, UserAlignment};
use crate::error::{Error, Result};
use crate::gcca::ViewMatrix;
use crate::linalg::seeded_rng;

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "but", "by", "can", "could", "did", "do", "does",
    "for", "from", "had", "has", "have", "he", "her", "here", "him", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "just", "me", "more", "most", "my", "no", "not", "now",
    "of", "on", "one", "only", "or", "other", "our", "out", "over", "she", "so", "some",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to",
    "too", "up", "very", "was", "we", "were", "what", "when", "which", "who", "will", "with",
    "would", "you", "your",
];

/// One document per reviewing user, over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewCorpus {
    /// User id of each document, sorted.
    pub users: Vec<String>,
    pub vocabulary: Vec<String>,
    /// Sparse `(word, count)` pairs per document, sorted by word.
    pub documents: Vec<Vec<(u32, u32)>>,
}

impl ReviewCorpus {
    pub fn token_count(&self) -> usize {
        self.documents
            .iter()
            .flat_map(|d| d.iter().map(|&(_, c)| c as usize))
            .sum()
    }
}

/// Lowercased alphabetic runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Concatenates each user's reviews into one document, drops stopwords and
/// tokens seen fewer than `min_token_count` times across the corpus.
pub fn build_corpus(reviews: &[Review], stopwords: &[&str], min_token_count: usize) -> Result<ReviewCorpus> {
    let stop: BTreeSet<&str> = stopwords.iter().copied().collect();
    let mut per_user: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut totals: BTreeMap<String, usize> = BTreeMap::new();
    for r in reviews {
        let tokens = per_user.entry(r.user.as_str()).or_default();
        for t in tokenize(&r.text) {
            if stop.contains(t.as_str()) {
                continue;
            }
            *totals.entry(t.clone()).or_default() += 1;
            tokens.push(t);
        }
    }
    let vocabulary: Vec<String> = totals
        .into_iter()
        .filter(|&(_, c)| c >= min_token_count)
        .map(|(t, _)| t)
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::EmptyDataset("no tokens survive corpus filtering".into()));
    }
    let index: BTreeMap<&str, u32> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i as u32)).collect();
    let mut users = Vec::with_capacity(per_user.len());
    let mut documents = Vec::with_capacity(per_user.len());
    for (user, tokens) in per_user {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in &tokens {
            if let Some(&w) = index.get(t.as_str()) {
                *counts.entry(w).or_default() += 1;
            }
        }
        users.push(user.to_string());
        documents.push(counts.into_iter().collect());
    }
    Ok(ReviewCorpus {
        users,
        vocabulary,
        documents,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior; `None` uses `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            topics: 50,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub users: Vec<String>,
    pub vocabulary: Vec<String>,
    /// `T × V` topic-word distributions.
    #[serde(with = "crate::dump::mat_rows")]
    pub phi: Mat<f64>,
    /// `documents × T` user-topic distributions.
    #[serde(with = "crate::dump::mat_rows")]
    pub theta: Mat<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TopicModel {
    pub fn topics(&self) -> usize {
        self.phi.nrows()
    }
}

/// Collapsed Gibbs sampling; `theta` and `phi` come from the final sample's
/// counts with the Dirichlet priors added.
pub fn fit_lda(corpus: &ReviewCorpus, cfg: &LdaConfig) -> Result<TopicModel> {
    let t = cfg.topics;
    if t == 0 || cfg.iterations == 0 {
        return Err(Error::Config("lda needs topics >= 1 and iterations >= 1".into()));
    }
    let alpha = cfg.alpha.unwrap_or(50.0 / t as f64);
    if !(alpha > 0.0 && cfg.beta > 0.0) {
        return Err(Error::Config("lda priors must be positive".into()));
    }
    let v = corpus.vocabulary.len();
    let d = corpus.documents.len();
    let mut rng = seeded_rng(cfg.seed);

    let mut words: Vec<Vec<u32>> = Vec::with_capacity(d);
    for doc in &corpus.documents {
        words.push(doc.iter().flat_map(|&(w, c)| std::iter::repeat_n(w, c as usize)).collect());
    }
    let mut ndk = vec![0u32; d * t];
    let mut nkw = vec![0u32; t * v];
    let mut nk = vec![0u32; t];
    let mut z: Vec<Vec<u32>> = Vec::with_capacity(d);
    for (doc, ws) in words.iter().enumerate() {
        let mut zd = Vec::with_capacity(ws.len());
        for &w in ws {
            let k = rng.random_range(0..t);
            ndk[doc * t + k] += 1;
            nkw[k * v + w as usize] += 1;
            nk[k] += 1;
            zd.push(k as u32);
        }
        z.push(zd);
    }

    let vbeta = v as f64 * cfg.beta;
    let mut p = vec![0.0; t];
    for _ in 0..cfg.iterations {
        for (doc, ws) in words.iter().enumerate() {
            for (pos, &w) in ws.iter().enumerate() {
                let w = w as usize;
                let old = z[doc][pos] as usize;
                ndk[doc * t + old] -= 1;
                nkw[old * v + w] -= 1;
                nk[old] -= 1;
                let mut total = 0.0;
                for k in 0..t {
                    total += (ndk[doc * t + k] as f64 + alpha) * (nkw[k * v + w] as f64 + cfg.beta)
                        / (nk[k] as f64 + vbeta);
                    p[k] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = p.iter().position(|&c| u < c).unwrap_or(t - 1);
                ndk[doc * t + new] += 1;
                nkw[new * v + w] += 1;
                nk[new] += 1;
                z[doc][pos] = new as u32;
            }
        }
    }

    let theta = Mat::from_fn(d, t, |doc, k| {
        let len = words[doc].len() as f64;
        (ndk[doc * t + k] as f64 + alpha) / (len + t as f64 * alpha)
    });
    let phi = Mat::from_fn(t, v, |k, w| (nkw[k * v + w] as f64 + cfg.beta) / (nk[k] as f64 + vbeta));
    Ok(TopicModel {
        users: corpus.users.clone(),
        vocabulary: corpus.vocabulary.clone(),
        phi,
        theta,
        alpha,
        beta: cfg.beta,
        iterations: cfg.iterations,
        seed: cfg.seed,
    })
}

/// Topic proportions as a view over the aligned users; users without a
/// document are absent.
pub fn user_topic_view(model: &TopicModel, alignment: &UserAlignment, label: &str) -> Result<ViewMatrix> {
    let row_of: BTreeMap<&str, usize> = model.users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let t = model.topics();
    let mut raw = Mat::<f64>::zeros(alignment.len(), t);
    let mut presence = vec![false; alignment.len()];
    for (i, user) in alignment.user_ids.iter().enumerate() {
        if let Some(&r) = row_of.get(user.as_str()) {
            presence[i] = true;
            for k in 0..t {
                raw[(i, k)] = model.theta[(r, k)];
            }
        }
    }
    ViewMatrix::new(label, raw.as_ref(), presence)
}

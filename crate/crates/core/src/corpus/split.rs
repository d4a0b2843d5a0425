use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::matrix::RatingsMatrix;
use crate::error::{Error, Result};
use crate::linalg::{derive_seed, seeded_rng};

/// Shared user index across domains with per-domain presence (the
/// diagonals of the selection matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAlignment {
    pub user_ids: Vec<String>,
    pub domains: Vec<String>,
    /// `presence[d][i]` is true when user `i` has ratings in domain `d`.
    pub presence: Vec<Vec<bool>>,
}

impl UserAlignment {
    pub fn len(&self) -> usize {
        self.user_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.user_ids.is_empty()
    }

    /// Diagonal of `K = Σ_d K^(d)`.
    pub fn counts(&self) -> Vec<usize> {
        (0..self.len())
            .map(|i| self.presence.iter().filter(|p| p[i]).count())
            .collect()
    }

    pub fn domain_index(&self, domain: &str) -> Result<usize> {
        self.domains
            .iter()
            .position(|d| d == domain)
            .ok_or_else(|| Error::Config(format!("domain {domain:?} is not aligned")))
    }

    /// Users present in `domain` and in at least one other domain.
    pub fn shared_with_others(&self, domain: &str) -> Result<Vec<bool>> {
        let t = self.domain_index(domain)?;
        Ok((0..self.len())
            .map(|i| {
                self.presence[t][i]
                    && self
                        .presence
                        .iter()
                        .enumerate()
                        .any(|(d, p)| d != t && p[i])
            })
            .collect())
    }
}

/// Builds the union user index, sorted by id.
pub fn align_users(matrices: &[&RatingsMatrix]) -> Result<UserAlignment> {
    if matrices.is_empty() {
        return Err(Error::Config("align_users needs at least one matrix".into()));
    }
    let mut users = BTreeSet::new();
    for m in matrices {
        let counts = m.user_counts();
        for (i, id) in m.user_ids().iter().enumerate() {
            if counts[i] > 0 {
                users.insert(id.clone());
            }
        }
    }
    let user_ids: Vec<String> = users.into_iter().collect();
    let pos: BTreeMap<&str, usize> = user_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let presence = matrices
        .iter()
        .map(|m| {
            let mut p = vec![false; user_ids.len()];
            for e in m.entries() {
                p[pos[m.user_ids()[e.user as usize].as_str()]] = true;
            }
            p
        })
        .collect();
    Ok(UserAlignment {
        user_ids,
        domains: matrices.iter().map(|m| m.domain().to_string()).collect(),
        presence,
    })
}

/// Keeps only users that appear in every given matrix.
pub fn common_users(matrices: &[&RatingsMatrix]) -> BTreeSet<String> {
    let mut iter = matrices.iter().map(|m| {
        let counts = m.user_counts();
        m.user_ids()
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[*i] > 0)
            .map(|(_, u)| u.clone())
            .collect::<BTreeSet<_>>()
    });
    let first = iter.next().unwrap_or_default();
    iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
}

/// Restricts the named domains to users with at least `min_count` ratings
/// in every one of them.
pub fn select_common_users(
    matrices: &BTreeMap<String, RatingsMatrix>,
    domains: &[String],
    min_count: usize,
) -> Result<BTreeMap<String, RatingsMatrix>> {
    if domains.is_empty() {
        return Err(Error::Config("no domains to intersect".into()));
    }
    let mut keep: Option<BTreeSet<String>> = None;
    for d in domains {
        let m = matrices
            .get(d)
            .ok_or_else(|| Error::Config(format!("domain {d:?} is not loaded")))?;
        let counts = m.user_counts();
        let heavy: BTreeSet<String> = m
            .user_ids()
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c >= min_count.max(1))
            .map(|(u, _)| u.clone())
            .collect();
        keep = Some(match keep {
            None => heavy,
            Some(k) => k.intersection(&heavy).cloned().collect(),
        });
    }
    let keep = keep.unwrap_or_default();
    if keep.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no user has {min_count} ratings in each of {domains:?}"
        )));
    }
    Ok(domains
        .iter()
        .map(|d| (d.clone(), matrices[d].restrict_users(&keep)))
        .collect())
}

/// Train/validation/test partition of one domain's entries, as sorted
/// positions into [`RatingsMatrix::entries`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub domain: String,
    pub fold: usize,
    pub k: usize,
    pub seed: u64,
    /// Cold-start cap once [`make_cold_start`] has been applied.
    pub c: Option<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Users whose target ratings were censored.
    pub cold_users: Vec<u32>,
}

impl FoldSplit {
    pub fn train_matrix(&self, m: &RatingsMatrix) -> Result<RatingsMatrix> {
        m.subset(&self.train)
    }

    pub fn validation_matrix(&self, m: &RatingsMatrix) -> Result<RatingsMatrix> {
        m.subset(&self.validation)
    }

    pub fn test_matrix(&self, m: &RatingsMatrix) -> Result<RatingsMatrix> {
        m.subset(&self.test)
    }
}

/// Partitions entries into `k` folds by a seeded shuffle; split `f` tests on
/// fold `f`, validates on fold `f + 1 (mod k)` and trains on the rest.
pub fn split_folds(matrix: &RatingsMatrix, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > matrix.len() {
        return Err(Error::Config(format!(
            "cannot split {} ratings into {k} folds",
            matrix.len()
        )));
    }
    let mut order: Vec<usize> = (0..matrix.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut fold_of = vec![0; matrix.len()];
    for (rank, &p) in order.iter().enumerate() {
        fold_of[p] = rank % k;
    }
    Ok((0..k)
        .map(|f| {
            let val = (f + 1) % k;
            let pick = |want: &dyn Fn(usize) -> bool| -> Vec<usize> {
                (0..matrix.len()).filter(|&p| want(fold_of[p])).collect()
            };
            FoldSplit {
                domain: matrix.domain().to_string(),
                fold: f,
                k,
                seed,
                c: None,
                train: pick(&|x| x != f && x != val),
                validation: pick(&|x| x == val),
                test: pick(&|x| x == f),
                cold_users: Vec::new(),
            }
        })
        .collect())
}

/// Turns a rating-level split of the target domain into a cold-start split.
///
/// Eligible users (normally those who also appear in an auxiliary domain)
/// are dealt into `k` user folds by a seeded shuffle; the users in fold
/// `split.fold` become the cold users. The test set keeps only their test
/// ratings, and the test-fold ratings of everyone else go back to training.
/// Each cold user keeps at most `c` training ratings, chosen uniformly; the
/// censored ones move to validation.
pub fn make_cold_start(
    split: &FoldSplit,
    target: &RatingsMatrix,
    c: usize,
    eligible: &[bool],
) -> Result<FoldSplit> {
    if split.domain != target.domain() {
        return Err(Error::Config(format!(
            "split is for {:?} but the target is {:?}",
            split.domain,
            target.domain()
        )));
    }
    if eligible.len() != target.n_users() {
        return Err(Error::Dimension(format!(
            "eligibility mask has {} users, target has {}",
            eligible.len(),
            target.n_users()
        )));
    }
    let entries = target.entries();
    let mut candidates: Vec<u32> = (0..target.n_users() as u32)
        .filter(|&u| eligible[u as usize])
        .collect();
    candidates.shuffle(&mut seeded_rng(derive_seed(split.seed, 0x636f_6c64)));
    let mut cold = vec![false; target.n_users()];
    for (rank, &u) in candidates.iter().enumerate() {
        if rank % split.k == split.fold {
            cold[u as usize] = true;
        }
    }

    let mut train = Vec::with_capacity(split.train.len());
    let mut validation = split.validation.clone();
    let mut test = Vec::new();
    for &p in &split.test {
        if cold[entries[p].user as usize] {
            test.push(p);
        } else {
            train.push(p);
        }
    }
    if test.is_empty() {
        return Err(Error::NoColdStartUsers { c });
    }

    let mut per_user: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for &p in &split.train {
        let u = entries[p].user;
        if cold[u as usize] {
            per_user.entry(u).or_default().push(p);
        } else {
            train.push(p);
        }
    }
    for (u, mut positions) in per_user {
        if positions.len() > c {
            positions.shuffle(&mut seeded_rng(derive_seed(split.seed, u as u64)));
            validation.extend_from_slice(&positions[c..]);
            positions.truncate(c);
        }
        train.extend(positions);
    }
    train.sort_unstable();
    validation.sort_unstable();

    let mut cold_users: Vec<u32> = test.iter().map(|&p| entries[p].user).collect();
    cold_users.dedup();
    Ok(FoldSplit {
        domain: split.domain.clone(),
        fold: split.fold,
        k: split.k,
        seed: split.seed,
        c: Some(c),
        train,
        validation,
        test,
        cold_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RatingTriple;

    fn matrix(domain: &str, pairs: &[(&str, &str)]) -> RatingsMatrix {
        let triples: Vec<RatingTriple> = pairs
            .iter()
            .map(|(u, i)| RatingTriple {
                user: u.to_string(),
                item: i.to_string(),
                rating: 3.0,
                timestamp: None,
            })
            .collect();
        RatingsMatrix::from_triples(domain, &triples).unwrap()
    }

    #[test]
    fn presence_reflects_membership() {
        let d1 = matrix("d1", &[("a", "x"), ("b", "x")]);
        let d2 = matrix("d2", &[("a", "y")]);
        let al = align_users(&[&d1, &d2]).unwrap();
        assert_eq!(al.user_ids, vec!["a", "b"]);
        assert_eq!(al.presence[1], vec![true, false]);
        assert_eq!(al.counts(), vec![2, 1]);
    }

    #[test]
    fn single_domain_alignment_is_identity() {
        let d1 = matrix("d1", &[("a", "x"), ("b", "x"), ("c", "y")]);
        let al = align_users(&[&d1]).unwrap();
        assert_eq!(al.counts(), vec![1, 1, 1]);
    }

    #[test]
    fn ten_ratings_in_five_folds() {
        let pairs: Vec<(String, String)> = (0..10).map(|i| (format!("u{}", i % 3), format!("i{i}"))).collect();
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let m = matrix("d", &refs);
        let splits = split_folds(&m, 5, 1).unwrap();
        for s in &splits {
            assert_eq!((s.test.len(), s.validation.len(), s.train.len()), (2, 2, 6));
        }
        assert_eq!(splits, split_folds(&m, 5, 1).unwrap());
        assert!(split_folds(&m, 11, 1).is_err());
    }

    fn cold_fixture() -> (RatingsMatrix, Vec<bool>) {
        let mut pairs = vec![];
        for u in 0..20 {
            for i in 0..30 {
                pairs.push((format!("u{u:02}"), format!("i{i:02}")));
            }
        }
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let m = matrix("t", &refs);
        let eligible = (0..20).map(|u| u % 4 != 0).collect();
        (m, eligible)
    }

    #[test]
    fn cold_start_caps_training_ratings() {
        let (m, eligible) = cold_fixture();
        for split in split_folds(&m, 5, 3).unwrap() {
            for c in [0, 5, 25] {
                let cs = make_cold_start(&split, &m, c, &eligible).unwrap();
                let mut train_counts = vec![0; 20];
                for &p in &cs.train {
                    train_counts[m.entries()[p].user as usize] += 1;
                }
                assert!(!cs.cold_users.is_empty());
                for &u in &cs.cold_users {
                    assert!(eligible[u as usize]);
                    let before = split.train.iter().filter(|&&p| m.entries()[p].user == u).count();
                    assert_eq!(train_counts[u as usize], before.min(c));
                }
                let mut all: Vec<usize> = cs.train.iter().chain(&cs.validation).chain(&cs.test).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..m.len()).collect::<Vec<_>>());
                assert_eq!(cs, make_cold_start(&split, &m, c, &eligible).unwrap());
            }
        }
    }

    #[test]
    fn every_eligible_user_is_cold_exactly_once() {
        let (m, eligible) = cold_fixture();
        let mut seen = vec![0; 20];
        for split in split_folds(&m, 5, 9).unwrap() {
            for u in make_cold_start(&split, &m, 0, &eligible).unwrap().cold_users {
                seen[u as usize] += 1;
            }
        }
        for u in 0..20 {
            assert_eq!(seen[u], usize::from(eligible[u]), "user {u}");
        }
    }

    #[test]
    fn common_selection_requires_the_minimum_everywhere() {
        let a = matrix("a", &[("x", "1"), ("x", "2"), ("y", "1"), ("y", "2"), ("z", "1")]);
        let b = matrix("b", &[("x", "9"), ("x", "8"), ("y", "9"), ("z", "9"), ("z", "8")]);
        let all = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        let names = ["a".to_string(), "b".to_string()];
        let out = select_common_users(&all, &names, 2).unwrap();
        assert_eq!(out["a"].user_ids(), ["x"]);
        assert_eq!(out["b"].user_ids(), ["x"]);
        assert!(select_common_users(&all, &names, 3).is_err());
    }
}

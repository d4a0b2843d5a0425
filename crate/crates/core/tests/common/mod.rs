#![allow(dead_code)]

use faer::Mat;
use gcca_rec::corpus::{Rating, RatingsMatrix};
use gcca_rec::linalg::{gaussian_matrix, seeded_rng};

pub fn dense_matrix(domain: &str, values: &Mat<f64>) -> RatingsMatrix {
    let users = (0..values.nrows()).map(|i| format!("u{i}")).collect();
    let items = (0..values.ncols()).map(|j| format!("i{j}")).collect();
    let mut entries = Vec::new();
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            entries.push(Rating {
                user: i as u32,
                item: j as u32,
                value: values[(i, j)],
            });
        }
    }
    RatingsMatrix::new(domain, users, items, entries).unwrap()
}

pub fn planted_rank_one(seed: u64) -> RatingsMatrix {
    let mut rng = seeded_rng(seed);
    let u = gaussian_matrix(20, 1, &mut rng);
    let v = gaussian_matrix(15, 1, &mut rng);
    dense_matrix("r1", &Mat::from_fn(20, 15, |i, j| 3.0 + 0.5 * u[(i, 0)] * v[(j, 0)]))
}

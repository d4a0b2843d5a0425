use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// A row-aligned observation matrix for one view plus its selection diagonal.
///
/// Rows are the shared sample index. The matrix is centered over present rows
/// and absent rows are exactly zero; the removed column means are kept so
/// reconstructions can be mapped back to the original scale.
#[derive(Debug, Clone)]
pub struct ViewMatrix {
    label: String,
    data: Mat<f64>,
    presence: Vec<bool>,
    means: Vec<f64>,
}

impl ViewMatrix {
    /// Builds a view from raw (uncentered) rows. Values in absent rows are ignored.
    pub fn new(label: impl Into<String>, raw: MatRef<'_, f64>, presence: Vec<bool>) -> Result<Self> {
        if raw.nrows() != presence.len() {
            return Err(Error::Dimension(format!(
                "view has {} rows but presence has {} entries",
                raw.nrows(),
                presence.len()
            )));
        }
        let present = presence.iter().filter(|&&p| p).count();
        let width = raw.ncols();
        let mut means = vec![0.0; width];
        if present > 0 {
            for (j, mean) in means.iter_mut().enumerate() {
                let sum: f64 = (0..raw.nrows())
                    .filter(|&i| presence[i])
                    .map(|i| raw[(i, j)])
                    .sum();
                *mean = sum / present as f64;
            }
        }
        let data = Mat::from_fn(raw.nrows(), width, |i, j| {
            if presence[i] {
                raw[(i, j)] - means[j]
            } else {
                0.0
            }
        });
        Ok(Self {
            label: label.into(),
            data,
            presence,
            means,
        })
    }

    /// Builds a fully observed view.
    pub fn complete(label: impl Into<String>, raw: MatRef<'_, f64>) -> Result<Self> {
        let n = raw.nrows();
        Self::new(label, raw, vec![true; n])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn x(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn presence(&self) -> &[bool] {
        &self.presence
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn present_count(&self) -> usize {
        self.presence.iter().filter(|&&p| p).count()
    }

    /// Adds this view's column means back onto a centered reconstruction.
    pub fn restore_means(&self, centered: MatRef<'_, f64>) -> Mat<f64> {
        Mat::from_fn(centered.nrows(), centered.ncols(), |i, j| {
            centered[(i, j)] + self.means[j]
        })
    }
}

/// Diagonal of `K = Σ_d K^(d)`: how many views observe each row.
pub fn selection_counts(views: &[ViewMatrix]) -> Vec<f64> {
    let rows = views.first().map_or(0, ViewMatrix::rows);
    let mut counts = vec![0.0; rows];
    for v in views {
        for (c, &p) in counts.iter_mut().zip(v.presence()) {
            if p {
                *c += 1.0;
            }
        }
    }
    counts
}

pub(crate) fn validate_views(views: &[ViewMatrix], k: usize) -> Result<Vec<f64>> {
    if views.len() < 2 {
        return Err(Error::Config(format!(
            "gcca needs at least 2 views, got {}",
            views.len()
        )));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let rows = views[0].rows();
    for v in views {
        if v.rows() != rows {
            return Err(Error::Dimension(format!(
                "view {} has {} rows, expected {rows}",
                v.label(),
                v.rows()
            )));
        }
        if v.width() == 0 {
            return Err(Error::Dimension(format!("view {} has no columns", v.label())));
        }
    }
    let counts = selection_counts(views);
    if let Some(row) = counts.iter().position(|&c| c == 0.0) {
        return Err(Error::OrphanRow { row });
    }
    Ok(counts)
}

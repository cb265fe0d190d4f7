use rand::Rng;

use super::{TrainConfig, TrainError};
use crate::seed::stream_rng;

/// Center (`Φ`) and context (`Φ'`) matrices, row-major `n × dim`.
///
/// Rows of the center matrix are the reported place vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    n: usize,
    dim: usize,
    pub(crate) center: Vec<f64>,
    pub(crate) context: Vec<f64>,
}

impl EmbeddingModel {
    pub fn zeros(n: usize, dim: usize) -> Self {
        EmbeddingModel { n, dim, center: vec![0.0; n * dim], context: vec![0.0; n * dim] }
    }

    pub fn from_parts(n: usize, dim: usize, center: Vec<f64>, context: Vec<f64>) -> Result<Self, TrainError> {
        if center.len() != n * dim || context.len() != n * dim {
            return Err(TrainError::Shape { n, dim });
        }
        Ok(EmbeddingModel { n, dim, center, context })
    }

    pub fn n_places(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn center_row(&self, i: usize) -> &[f64] {
        &self.center[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn center_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.center[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn context_row(&self, i: usize) -> &[f64] {
        &self.context[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn context_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.context[i * self.dim..(i + 1) * self.dim]
    }

    pub fn center_matrix(&self) -> &[f64] {
        &self.center
    }

    pub fn context_matrix(&self) -> &[f64] {
        &self.context
    }

    pub fn is_finite(&self) -> bool {
        self.center.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// Copy of the center matrix, the per-place vectors used for evaluation.
    pub fn embeddings(&self) -> Embeddings {
        Embeddings { dim: self.dim, data: self.center.clone() }
    }
}

/// Center matrix rows uniform in `[-0.5/dim, 0.5/dim]`; context matrix zero.
pub fn init_model(n_places: usize, cfg: &TrainConfig) -> Result<EmbeddingModel, TrainError> {
    if n_places == 0 {
        return Err(TrainError::InvalidConfig("model needs at least one place".into()));
    }
    cfg.validate()?;
    let dim = cfg.dim;
    let half = 0.5 / dim as f64;
    let mut rng = stream_rng(cfg.seed, "init", 0);
    let center = (0..n_places * dim).map(|_| rng.random_range(-half..half)).collect();
    Ok(EmbeddingModel { n: n_places, dim, center, context: vec![0.0; n_places * dim] })
}

/// Dense per-place vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Embeddings {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "data length must be a multiple of dim");
        Embeddings { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        Embeddings::new(dim, rows.iter().flatten().copied().collect())
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

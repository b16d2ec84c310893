//! Training configuration and the data source abstraction that lets
//! chained-model training re-draw its inputs every pass.

use ndarray::{Array1, Array2, CowArray, Ix2};

use crate::data::Dataset;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimizer {
    /// Plain stochastic gradient descent with a fixed rate.
    Sgd,
    /// Adaptive-moment updates; useful when plain SGD stalls.
    Adam,
}

/// Knobs shared by all trainers. Each family reads the fields it needs.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Run-level seed; the experiment driver turns this into the generator
    /// handed to trainers.
    pub seed: u64,
    /// Gibbs steps per contrastive-divergence update.
    pub cd_steps: usize,
    /// Importance samples for marginal-likelihood evaluation of amortized
    /// models.
    pub iw_samples: usize,
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub optimizer: Optimizer,
    /// When training on inferred representations, draw fresh ones every
    /// epoch instead of fixing one materialized set.
    pub resample_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 0,
            cd_steps: 1,
            iw_samples: 16,
            em_max_iters: 100,
            em_tol: 1e-6,
            optimizer: Optimizer::Sgd,
            resample_each_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.epochs == 0
            || self.batch_size == 0
            || self.cd_steps == 0
            || self.iw_samples == 0
            || self.em_max_iters == 0
        {
            return Err(Error::BadParams("training counts must be positive".into()));
        }
        if !(self.learning_rate > 0.0) && self.learning_rate != 0.0 {
            return Err(Error::BadParams("learning rate must be >= 0".into()));
        }
        if !(self.em_tol > 0.0) {
            return Err(Error::BadParams("em_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Source of training rows. A fixed dataset returns the same matrix every
/// epoch; a chained source re-infers representations on demand.
pub trait StageSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize;

    /// Per-example weights, normalized to mean 1.
    fn weights(&self) -> Array1<f64>;

    /// Rows for one training pass. `epoch` distinguishes passes so a
    /// resampling source can vary while a fixed one stays put; sources carry
    /// their own derived generator substreams, keeping row draws independent
    /// of the trainer's consumption pattern.
    fn epoch_rows(&self, epoch: usize) -> Result<CowArray<'_, f64, Ix2>>;

    /// Whether consecutive epochs see different rows.
    fn resamples(&self) -> bool;
}

/// A plain dataset as a training source.
pub struct FixedSource<'a> {
    data: &'a Dataset,
}

impl<'a> FixedSource<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        FixedSource { data }
    }
}

impl StageSource for FixedSource<'_> {
    fn len(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn weights(&self) -> Array1<f64> {
        self.data.trainer_weights()
    }

    fn epoch_rows(&self, _epoch: usize) -> Result<CowArray<'_, f64, Ix2>> {
        Ok(CowArray::from(self.data.points().view()))
    }

    fn resamples(&self) -> bool {
        false
    }
}

/// An owned matrix with explicit weights, used for materialized
/// representations.
pub struct MatrixSource {
    pub rows: Array2<f64>,
    pub weights: Array1<f64>,
}

impl StageSource for MatrixSource {
    fn len(&self) -> usize {
        self.rows.nrows()
    }

    fn dim(&self) -> usize {
        self.rows.ncols()
    }

    fn weights(&self) -> Array1<f64> {
        self.weights.clone()
    }

    fn epoch_rows(&self, _epoch: usize) -> Result<CowArray<'_, f64, Ix2>> {
        Ok(CowArray::from(self.rows.view()))
    }

    fn resamples(&self) -> bool {
        false
    }
}

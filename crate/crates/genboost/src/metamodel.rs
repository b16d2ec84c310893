//! The uniform meta-model contract.
//!
//! Every family exposes the same five operations: marginal likelihood of a
//! visible point, posterior sampling, conditional generation, prior draws of
//! the hidden variable, and the hidden variable's marginal likelihood. Any
//! model with these operations can take part in a chain or an ensemble.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::Result;
use crate::models::{GmmModel, RbmModel, TabularModel, VaeModel};
use crate::rng::{self, Prng};
use crate::space::Space;

/// A log-likelihood value with its Monte Carlo uncertainty. Exact values
/// carry `std_err == 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLikEstimate {
    /// Nats per example.
    pub value: f64,
    pub std_err: f64,
    pub is_exact: bool,
}

impl LogLikEstimate {
    pub fn exact(value: f64) -> Self {
        LogLikEstimate {
            value,
            std_err: 0.0,
            is_exact: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Gmm,
    Rbm,
    Vae,
    /// Explicit joint tables; internal to the exact-verification tooling.
    Tabular,
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Gmm => "gmm",
            Family::Rbm => "rbm",
            Family::Vae => "vae",
            Family::Tabular => "tabular",
        }
    }
}

/// A trained latent-variable model of any family.
#[derive(Clone, Debug)]
pub enum MetaModel {
    Gmm(GmmModel),
    Rbm(RbmModel),
    Vae(VaeModel),
    Tabular(TabularModel),
}

impl From<GmmModel> for MetaModel {
    fn from(m: GmmModel) -> Self {
        MetaModel::Gmm(m)
    }
}

impl From<RbmModel> for MetaModel {
    fn from(m: RbmModel) -> Self {
        MetaModel::Rbm(m)
    }
}

impl From<VaeModel> for MetaModel {
    fn from(m: VaeModel) -> Self {
        MetaModel::Vae(m)
    }
}

impl From<TabularModel> for MetaModel {
    fn from(m: TabularModel) -> Self {
        MetaModel::Tabular(m)
    }
}

impl MetaModel {
    pub fn family(&self) -> Family {
        match self {
            MetaModel::Gmm(_) => Family::Gmm,
            MetaModel::Rbm(_) => Family::Rbm,
            MetaModel::Vae(_) => Family::Vae,
            MetaModel::Tabular(_) => Family::Tabular,
        }
    }

    pub fn visible_space(&self) -> Space {
        match self {
            MetaModel::Gmm(m) => m.visible_space(),
            MetaModel::Rbm(m) => m.visible_space(),
            MetaModel::Vae(m) => m.visible_space(),
            MetaModel::Tabular(m) => m.visible_space(),
        }
    }

    pub fn hidden_space(&self) -> Space {
        match self {
            MetaModel::Gmm(m) => m.hidden_space(),
            MetaModel::Rbm(m) => m.hidden_space(),
            MetaModel::Vae(m) => m.hidden_space(),
            MetaModel::Tabular(m) => m.hidden_space(),
        }
    }

    /// log m(x) for one visible point. Exact for mixtures, small Boltzmann
    /// machines and tables; the `n_samples`-sample importance-weighted lower
    /// bound for amortized models (exact families ignore `n_samples` and the
    /// generator entirely).
    pub fn log_marginal_visible_one(
        &self,
        x: ArrayView1<f64>,
        n_samples: usize,
        rng: &mut Prng,
    ) -> Result<LogLikEstimate> {
        match self {
            MetaModel::Gmm(m) => m.log_marginal_visible(x),
            MetaModel::Rbm(m) => m.log_marginal_visible(x),
            MetaModel::Vae(m) => m.iwae_log_likelihood(x, n_samples, rng),
            MetaModel::Tabular(m) => m.log_marginal_visible(x),
        }
    }

    /// Batched [`Self::log_marginal_visible_one`] with one independent
    /// generator substream per row.
    pub fn log_marginal_visible(
        &self,
        xs: ArrayView2<f64>,
        n_samples: usize,
        rng: &mut Prng,
    ) -> Result<Vec<LogLikEstimate>> {
        if self.is_exact_density() {
            return xs
                .rows()
                .into_iter()
                .map(|x| self.log_marginal_visible_one(x, n_samples, rng))
                .collect();
        }
        let base = rng::substream_base(rng);
        xs.rows()
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut sub = rng::substream(base, i as u64);
                self.log_marginal_visible_one(x, n_samples, &mut sub)
            })
            .collect()
    }

    /// Draw h ~ m(h | x).
    pub fn sample_posterior(&self, x: ArrayView1<f64>, rng: &mut Prng) -> Result<Array1<f64>> {
        match self {
            MetaModel::Gmm(m) => m.sample_posterior(x, rng),
            MetaModel::Rbm(m) => m.sample_posterior(x, rng),
            MetaModel::Vae(m) => m.sample_posterior(x, rng),
            MetaModel::Tabular(m) => m.sample_posterior(x, rng),
        }
    }

    /// Draw x ~ m(x | h).
    pub fn sample_conditional_visible(
        &self,
        h: ArrayView1<f64>,
        rng: &mut Prng,
    ) -> Result<Array1<f64>> {
        match self {
            MetaModel::Gmm(m) => m.sample_conditional_visible(h, rng),
            MetaModel::Rbm(m) => m.sample_conditional_visible(h, rng),
            MetaModel::Vae(m) => m.sample_conditional_visible(h, rng),
            MetaModel::Tabular(m) => m.sample_conditional_visible(h, rng),
        }
    }

    /// Draw a batch from the hidden prior m(h).
    pub fn sample_prior_hidden(&self, n: usize, rng: &mut Prng) -> Result<Array2<f64>> {
        match self {
            MetaModel::Gmm(m) => {
                let mut out = Array2::zeros((n, 1));
                for i in 0..n {
                    out.row_mut(i).assign(&m.sample_prior_hidden(rng));
                }
                Ok(out)
            }
            MetaModel::Rbm(m) => m.sample_prior_hidden(n, rng),
            MetaModel::Vae(m) => Ok(m.sample_prior_hidden(n, rng)),
            MetaModel::Tabular(m) => {
                let dim = m.hidden_space().point_dim();
                let mut out = Array2::zeros((n, dim));
                for i in 0..n {
                    out.row_mut(i).assign(&m.sample_prior_hidden(rng));
                }
                Ok(out)
            }
        }
    }

    /// Exact log m(h) (all families support this exactly).
    pub fn log_marginal_hidden_one(&self, h: ArrayView1<f64>) -> Result<LogLikEstimate> {
        match self {
            MetaModel::Gmm(m) => m.log_marginal_hidden(h),
            MetaModel::Rbm(m) => m.log_marginal_hidden(h),
            MetaModel::Vae(m) => m.log_marginal_hidden(h),
            MetaModel::Tabular(m) => m.log_marginal_hidden(h),
        }
    }

    pub fn log_marginal_hidden(&self, hs: ArrayView2<f64>) -> Result<Vec<LogLikEstimate>> {
        hs.rows()
            .into_iter()
            .map(|h| self.log_marginal_hidden_one(h))
            .collect()
    }

    /// Whether log m(x) is available exactly (no Monte Carlo).
    pub fn is_exact_density(&self) -> bool {
        !matches!(self, MetaModel::Vae(_))
    }

    /// Exact log m(x) for families that have it.
    pub fn exact_log_marginal_visible(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            MetaModel::Gmm(m) => m.log_density(x),
            MetaModel::Rbm(m) => Ok(m.log_marginal_visible(x)?.value),
            MetaModel::Tabular(m) => Ok(m.log_marginal_visible(x)?.value),
            MetaModel::Vae(_) => Err(crate::error::Error::Unsupported(
                "amortized models have no exact marginal density".into(),
            )),
        }
    }

    /// Draw from the model's visible marginal m(x).
    pub fn sample_visible(&self, rng: &mut Prng) -> Result<Array1<f64>> {
        match self {
            MetaModel::Gmm(m) => {
                let h = m.sample_prior_hidden(rng);
                m.sample_conditional_visible(h.view(), rng)
            }
            MetaModel::Rbm(m) => {
                let h = m.sample_prior_hidden(1, rng)?;
                m.sample_conditional_visible(h.row(0), rng)
            }
            MetaModel::Vae(m) => {
                let h = m.sample_prior_hidden(1, rng);
                m.sample_conditional_visible(h.row(0), rng)
            }
            MetaModel::Tabular(m) => Ok(m.sample_prior_visible(rng)),
        }
    }
}

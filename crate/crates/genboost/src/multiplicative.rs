//! Multiplicative boosting: an exponent-weighted geometric average of
//! component densities. The normalizer is explicit, so density estimation
//! needs an importance-sampled partition estimate and sampling runs through
//! an independence Metropolis-Hastings chain. Chains from the cascade
//! module drop in as components, which is all hybrid boosting is.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::cascade::{train_stage, CascadeModel, StageSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metamodel::{LogLikEstimate, MetaModel};
use crate::numerics::{log_mean_exp, log_mean_exp_std_err};
use crate::rng::Prng;
use crate::space::Space;
use crate::train::FixedSource;

/// Minimum effective sample size before weight-based estimates are refused.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10.0;

/// Either a single model or a whole chain, used as one density factor.
#[derive(Clone, Debug)]
pub enum ComponentModel {
    Meta(MetaModel),
    Cascade(CascadeModel),
}

impl ComponentModel {
    pub fn visible_space(&self) -> Space {
        match self {
            ComponentModel::Meta(m) => m.visible_space(),
            ComponentModel::Cascade(c) => c.visible_space(),
        }
    }

    /// Short identifier for manifests and reports.
    pub fn label(&self) -> String {
        match self {
            ComponentModel::Meta(m) => m.family().tag().to_string(),
            ComponentModel::Cascade(c) => {
                let tags: Vec<&str> = c.models().iter().map(|m| m.family().tag()).collect();
                tags.join("+")
            }
        }
    }

    /// Whether log density of a visible point is available without Monte
    /// Carlo: exact families, and chains small enough to enumerate.
    pub fn has_exact_density(&self) -> bool {
        match self {
            ComponentModel::Meta(m) => m.is_exact_density(),
            ComponentModel::Cascade(c) => crate::oracle::is_enumerable(c),
        }
    }

    pub fn exact_log_density(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            ComponentModel::Meta(m) => m.exact_log_marginal_visible(x),
            ComponentModel::Cascade(c) => crate::oracle::exact_cascade_log_marginal(c, x),
        }
    }

    /// log density of a visible point: exact when possible, otherwise the
    /// component's own lower-bound estimator.
    pub fn log_density_estimate(
        &self,
        x: ArrayView1<f64>,
        n_mc: usize,
        rng: &mut Prng,
    ) -> Result<LogLikEstimate> {
        match self {
            ComponentModel::Meta(m) => m.log_marginal_visible_one(x, n_mc, rng),
            ComponentModel::Cascade(c) => {
                if crate::oracle::is_enumerable(c) {
                    Ok(LogLikEstimate::exact(crate::oracle::exact_cascade_log_marginal(c, x)?))
                } else {
                    c.log_marginal_estimate(x, n_mc, rng)
                }
            }
        }
    }

    pub fn sample_visible(&self, rng: &mut Prng) -> Result<Array1<f64>> {
        match self {
            ComponentModel::Meta(m) => m.sample_visible(rng),
            ComponentModel::Cascade(c) => {
                let path = c.sample_one(rng)?;
                Ok(path.into_iter().next().expect("nonempty path"))
            }
        }
    }
}

/// One factor of the geometric average: a model and its exponent.
#[derive(Clone, Debug)]
pub struct DensityComponent {
    pub model: ComponentModel,
    pub alpha: f64,
}

/// Stored partition estimate with its estimator metadata.
#[derive(Clone, Debug)]
pub struct LogZEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_samples: usize,
    pub proposal: String,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct MultiplicativeEnsemble {
    pub components: Vec<DensityComponent>,
    pub log_z: Option<LogZEstimate>,
}

impl MultiplicativeEnsemble {
    pub fn new(components: Vec<DensityComponent>, log_z: Option<LogZEstimate>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::BadParams("ensemble needs at least one component".into()));
        }
        let space = components[0].model.visible_space();
        for c in &components[1..] {
            if c.model.visible_space() != space {
                return Err(Error::IncompatibleSpaces(
                    "all components must share the visible space".into(),
                ));
            }
        }
        if components
            .iter()
            .any(|c| !(0.0..=1.0).contains(&c.alpha) || !c.alpha.is_finite())
        {
            return Err(Error::BadParams("exponent weights must lie in [0, 1]".into()));
        }
        Ok(MultiplicativeEnsemble {
            components,
            log_z,
        })
    }

    pub fn visible_space(&self) -> Space {
        self.components[0].model.visible_space()
    }
}

/// Sum of alpha-weighted component log densities at x (the log of the
/// unnormalized ensemble density).
pub fn unnormalized_log_density(
    ens: &MultiplicativeEnsemble,
    x: ArrayView1<f64>,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<LogLikEstimate> {
    ens.visible_space().check_dim(x)?;
    let mut value = 0.0;
    let mut var = 0.0;
    let mut exact = true;
    for comp in &ens.components {
        let est = comp.model.log_density_estimate(x, n_mc, rng)?;
        value += comp.alpha * est.value;
        var += comp.alpha * comp.alpha * est.std_err * est.std_err;
        exact &= est.is_exact;
    }
    Ok(LogLikEstimate {
        value,
        std_err: var.sqrt(),
        is_exact: exact,
    })
}

fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for &lw in log_weights {
        let u = (lw - max).exp();
        sum += u;
        sum_sq += u * u;
    }
    if sum_sq == 0.0 {
        0.0
    } else {
        sum * sum / sum_sq
    }
}

/// Importance-sampling estimate of ln Z: draw from an exact-density
/// proposal and average the importance ratios in log space.
pub fn estimate_log_partition(
    ens: &MultiplicativeEnsemble,
    proposal: &ComponentModel,
    n: usize,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<LogZEstimate> {
    if n < 2 {
        return Err(Error::BadParams("need at least two importance samples".into()));
    }
    if !proposal.has_exact_density() {
        return Err(Error::Unsupported(
            "partition estimation needs a proposal with exact density".into(),
        ));
    }
    if proposal.visible_space() != ens.visible_space() {
        return Err(Error::IncompatibleSpaces(
            "proposal must live on the ensemble's visible space".into(),
        ));
    }
    let mut log_weights = Vec::with_capacity(n);
    for _ in 0..n {
        let x = proposal.sample_visible(rng)?;
        let f = unnormalized_log_density(ens, x.view(), n_mc, rng)?.value;
        let q = proposal.exact_log_density(x.view())?;
        log_weights.push(f - q);
    }
    let ess = effective_sample_size(&log_weights);
    if ess < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::DegenerateWeights {
            ess,
            min_ess: MIN_EFFECTIVE_SAMPLES,
        });
    }
    Ok(LogZEstimate {
        value: log_mean_exp(&log_weights),
        std_err: log_mean_exp_std_err(&log_weights),
        n_samples: n,
        proposal: proposal.label(),
        seed: 0,
    })
}

/// Reweight a dataset against the current ensemble: weights proportional to
/// exp(-beta * unnormalized log density), self-normalized to mean 1.
pub fn reweighted_dataset(
    data: &Dataset,
    ens: &MultiplicativeEnsemble,
    beta: f64,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BadParams("beta must lie in [0, 1]".into()));
    }
    let n = data.n();
    let mut log_weights = Vec::with_capacity(n);
    for i in 0..n {
        let f = unnormalized_log_density(ens, data.point(i), n_mc, rng)?.value;
        log_weights.push(-beta * f);
    }
    let ess = effective_sample_size(&log_weights);
    if ess < MIN_EFFECTIVE_SAMPLES.min(n as f64) {
        return Err(Error::DegenerateWeights {
            ess,
            min_ess: MIN_EFFECTIVE_SAMPLES,
        });
    }
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    let weights = Array1::from_iter(unnorm.iter().map(|&u| u * n as f64 / total));
    data.replace_weights(weights)
}

/// Train a parallel ensemble: the first model on the data itself, each
/// later model on the data reweighted against everything trained so far,
/// then estimate ln Z with the first component as the proposal.
pub fn multiplicative_train(
    data: &Dataset,
    specs: &[StageSpec],
    alphas: &[f64],
    betas: &[f64],
    n_z: usize,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<MultiplicativeEnsemble> {
    if specs.is_empty() {
        return Err(Error::BadParams("need at least one component spec".into()));
    }
    if alphas.len() != specs.len() || betas.len() + 1 != specs.len() {
        return Err(Error::BadParams(
            "need one alpha per component and one beta per later component".into(),
        ));
    }
    let source = FixedSource::new(data);
    let first = train_stage(&specs[0], &source, data.space(), rng)?;
    let mut components = vec![DensityComponent {
        model: ComponentModel::Meta(first),
        alpha: alphas[0],
    }];
    for (i, spec) in specs.iter().enumerate().skip(1) {
        let partial = MultiplicativeEnsemble::new(components.clone(), None)?;
        let reweighted = reweighted_dataset(data, &partial, betas[i - 1], n_mc, rng)?;
        let rw_source = FixedSource::new(&reweighted);
        let model = train_stage(spec, &rw_source, data.space(), rng)?;
        components.push(DensityComponent {
            model: ComponentModel::Meta(model),
            alpha: alphas[i],
        });
    }
    let mut ens = MultiplicativeEnsemble::new(components, None)?;
    let proposal = ens.components[0].model.clone();
    if proposal.has_exact_density() {
        ens.log_z = Some(estimate_log_partition(&ens, &proposal, n_z, n_mc, rng)?);
    }
    Ok(ens)
}

/// Independence-chain settings.
#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thinning: usize,
    /// Monte Carlo budget for estimated component densities.
    pub n_mc: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 500,
            thinning: 1,
            n_mc: 8,
        }
    }
}

/// Result of an independence Metropolis-Hastings run.
#[derive(Clone, Debug)]
pub struct McmcResult {
    pub samples: Array2<f64>,
    pub acceptance_rate: f64,
}

/// Sample the ensemble with an independence Metropolis-Hastings chain whose
/// proposals come from `proposal` (any component or chain with tractable
/// sampling and an exact or estimated density).
pub fn mcmc_sample(
    ens: &MultiplicativeEnsemble,
    n: usize,
    proposal: &ComponentModel,
    cfg: &ChainConfig,
    rng: &mut Prng,
) -> Result<McmcResult> {
    if n == 0 {
        return Err(Error::BadParams("need n >= 1 samples".into()));
    }
    if cfg.thinning == 0 {
        return Err(Error::BadParams("thinning must be >= 1".into()));
    }
    if proposal.visible_space() != ens.visible_space() {
        return Err(Error::IncompatibleSpaces(
            "proposal must live on the ensemble's visible space".into(),
        ));
    }
    let d = ens.visible_space().point_dim();
    let mut samples = Array2::zeros((n, d));

    let score = |x: ArrayView1<f64>, rng: &mut Prng| -> Result<f64> {
        let f = unnormalized_log_density(ens, x, cfg.n_mc, rng)?.value;
        let q = proposal.log_density_estimate(x, cfg.n_mc, rng)?.value;
        Ok(f - q)
    };

    let mut current = proposal.sample_visible(rng)?;
    let mut current_score = score(current.view(), rng)?;
    let mut accepted_burn_in = 0usize;
    let mut accepted_total = 0usize;
    let total_steps = cfg.burn_in + n * cfg.thinning;
    let mut kept = 0usize;
    for step in 0..total_steps {
        let candidate = proposal.sample_visible(rng)?;
        let candidate_score = score(candidate.view(), rng)?;
        let log_ratio = candidate_score - current_score;
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            current = candidate;
            current_score = candidate_score;
            accepted_total += 1;
            if step < cfg.burn_in {
                accepted_burn_in += 1;
            }
        }
        if step + 1 == cfg.burn_in && cfg.burn_in > 0 {
            let rate = accepted_burn_in as f64 / cfg.burn_in as f64;
            if rate < 1e-3 {
                return Err(Error::ZeroAcceptance {
                    rate,
                    min_rate: 1e-3,
                });
            }
        }
        if step >= cfg.burn_in && (step - cfg.burn_in + 1) % cfg.thinning == 0 && kept < n {
            samples.row_mut(kept).assign(&current);
            kept += 1;
        }
    }
    Ok(McmcResult {
        samples,
        acceptance_rate: accepted_total as f64 / total_steps as f64,
    })
}

/// Wire chains and single models into one multiplicative ensemble.
pub fn hybrid_build(
    components: Vec<ComponentModel>,
    alphas: &[f64],
) -> Result<MultiplicativeEnsemble> {
    if components.len() != alphas.len() {
        return Err(Error::BadParams("need one alpha per component".into()));
    }
    let comps = components
        .into_iter()
        .zip(alphas.iter())
        .map(|(model, &alpha)| DensityComponent { model, alpha })
        .collect();
    MultiplicativeEnsemble::new(comps, None)
}

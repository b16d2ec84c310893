//! Chained boosting: the joint model, its chained approximate posterior,
//! the per-layer decomposition of the variational bound, greedy layer-wise
//! training, and the convergence diagnostics.
//!
//! A chain p(x, h_1..h_k) puts model i's visible variable on model i-1's
//! hidden variable. Inference runs bottom-up through the per-model
//! posteriors, sampling runs top-down through the conditionals, and the
//! bound on E_D[log p(x)] splits into
//!
//!   L_1 = E_D[log m_1(x)]
//!   L_i = E_D E_q[log m_i(h_{i-1}) - log m_{i-1}(h_{i-1})]   (i >= 2)
//!
//! so each layer trains against a single term with everything below frozen.
//! Both logs inside L_i are evaluated on the same posterior draws; the
//! difference of a near-identical pair has far lower variance than the
//! difference of independent estimates, which is what makes the
//! near-zero-term diagnosis usable.

use ndarray::{Array1, Array2, CowArray, Ix2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metamodel::{LogLikEstimate, MetaModel};
use crate::models::gmm::GmmInit;
use crate::models::{gmm_fit_em_source, rbm_train_cd_source, vae_train_source};
use crate::numerics::{CompensatedSum, LN_2PI};
use crate::rng::{self, Prng};
use crate::space::{Space, SpaceKind};
use crate::train::{StageSource, TrainConfig};

/// An ordered chain of meta-models. Position 0 is the bottom (data-facing)
/// model; every model's visible space equals its predecessor's hidden space,
/// and binary-visible models all sit below real-visible ones.
#[derive(Clone, Debug)]
pub struct CascadeModel {
    models: Vec<MetaModel>,
}

impl CascadeModel {
    pub fn new(models: Vec<MetaModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::BadParams("a chain needs at least one model".into()));
        }
        let mut cascade = CascadeModel {
            models: vec![models[0].clone()],
        };
        for m in models.into_iter().skip(1) {
            cascade.push(m)?;
        }
        Ok(cascade)
    }

    pub fn single(model: MetaModel) -> Self {
        CascadeModel {
            models: vec![model],
        }
    }

    /// Append a model on top, checking both chain invariants.
    pub fn push(&mut self, model: MetaModel) -> Result<()> {
        let top_hidden = self.top_hidden_space();
        if model.visible_space() != top_hidden {
            return Err(Error::IncompatibleSpaces(format!(
                "new model's visible space {} != current top hidden space {}",
                model.visible_space(),
                top_hidden
            )));
        }
        let seen_real = self
            .models
            .iter()
            .any(|m| m.visible_space().kind() == SpaceKind::Real);
        if seen_real && model.visible_space().kind() == SpaceKind::Binary {
            return Err(Error::IncompatibleSpaces(
                "binary-visible models must precede real-visible ones".into(),
            ));
        }
        self.models.push(model);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[MetaModel] {
        &self.models
    }

    pub fn visible_space(&self) -> Space {
        self.models[0].visible_space()
    }

    pub fn top_hidden_space(&self) -> Space {
        self.models.last().expect("nonempty chain").hidden_space()
    }

    /// One top-down draw; `levels[0]` is x, `levels[j]` is h_j.
    pub fn sample_one(&self, rng: &mut Prng) -> Result<Vec<Array1<f64>>> {
        let k = self.models.len();
        let top = &self.models[k - 1];
        let h_top = top.sample_prior_hidden(1, rng)?.row(0).to_owned();
        let mut levels = vec![h_top];
        for i in (0..k).rev() {
            let below = self.models[i].sample_conditional_visible(levels.last().unwrap().view(), rng)?;
            levels.push(below);
        }
        levels.reverse();
        Ok(levels)
    }

    /// Draw n visible points top-down.
    pub fn sample(&self, n: usize, rng: &mut Prng) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::BadParams("need n >= 1 samples".into()));
        }
        let d = self.visible_space().point_dim();
        let mut out = Array2::zeros((n, d));
        for i in 0..n {
            let path = self.sample_one(rng)?;
            out.row_mut(i).assign(&path[0]);
        }
        Ok(out)
    }

    /// Bottom-up posterior draws h_1..h_k. Adding a model on top extends the
    /// result without disturbing the earlier levels' draws.
    pub fn infer(&self, x: ndarray::ArrayView1<f64>, rng: &mut Prng) -> Result<Vec<Array1<f64>>> {
        self.visible_space().check_dim(x)?;
        let mut levels = Vec::with_capacity(self.models.len());
        let mut h = x.to_owned();
        for m in &self.models {
            h = m.sample_posterior(h.view(), rng)?;
            levels.push(h.clone());
        }
        Ok(levels)
    }

    /// The top-level representation h_k of a visible point.
    pub fn infer_top(&self, x: ndarray::ArrayView1<f64>, rng: &mut Prng) -> Result<Array1<f64>> {
        let mut h = x.to_owned();
        for m in &self.models {
            h = m.sample_posterior(h.view(), rng)?;
        }
        Ok(h)
    }

    /// Per-point estimate of log p(x): the layer-decomposed bound evaluated
    /// with `n_mc` posterior chains (exact when the chain is a single
    /// exact-density model).
    pub fn log_marginal_estimate(
        &self,
        x: ndarray::ArrayView1<f64>,
        n_mc: usize,
        rng: &mut Prng,
    ) -> Result<LogLikEstimate> {
        let k = self.models.len();
        let first = self.models[0].log_marginal_visible_one(x, n_mc, rng)?;
        if k == 1 {
            return Ok(first);
        }
        let mut value = first.value;
        let mut var = first.std_err * first.std_err;
        let mut level_sums = vec![Vec::with_capacity(n_mc); k - 1];
        for _ in 0..n_mc {
            let mut h = x.to_owned();
            for j in 1..k {
                h = self.models[j - 1].sample_posterior(h.view(), rng)?;
                let up = self.models[j].log_marginal_visible_one(h.view(), n_mc, rng)?;
                let down = self.models[j - 1].log_marginal_hidden_one(h.view())?;
                level_sums[j - 1].push(up.value - down.value);
            }
        }
        for vals in &level_sums {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            value += mean;
            if vals.len() >= 2 {
                let s2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (vals.len() - 1) as f64;
                var += s2 / vals.len() as f64;
            }
        }
        Ok(LogLikEstimate {
            value,
            std_err: var.sqrt(),
            is_exact: false,
        })
    }
}

/// What to train at one position of a chain.
#[derive(Clone, Debug)]
pub enum ModelSpec {
    Gmm { components: usize, init: GmmInit },
    Rbm { hidden: usize },
    Vae { latent: usize, hidden_layers: Vec<usize> },
}

impl ModelSpec {
    pub fn accepts_visible(&self, space: Space) -> bool {
        match self {
            ModelSpec::Gmm { .. } => space.kind() == SpaceKind::Real,
            ModelSpec::Rbm { .. } => space.kind() == SpaceKind::Binary,
            ModelSpec::Vae { .. } => matches!(space.kind(), SpaceKind::Binary | SpaceKind::Real),
        }
    }

    pub fn hidden_space(&self) -> Space {
        match self {
            ModelSpec::Gmm { components, .. } => Space::categorical(*components),
            ModelSpec::Rbm { hidden } => Space::binary(*hidden),
            ModelSpec::Vae { latent, .. } => Space::real(*latent),
        }
    }
}

/// A model spec plus its training knobs.
#[derive(Clone, Debug)]
pub struct StageSpec {
    pub model: ModelSpec,
    pub train: TrainConfig,
}

/// Train one stage on a source whose rows live in `visible`.
pub(crate) fn train_stage(
    spec: &StageSpec,
    source: &dyn StageSource,
    visible: Space,
    rng: &mut Prng,
) -> Result<MetaModel> {
    if !spec.model.accepts_visible(visible) {
        return Err(Error::IncompatibleSpaces(format!(
            "stage cannot sit on visible space {visible}"
        )));
    }
    Ok(match &spec.model {
        ModelSpec::Gmm { components, init } => {
            let (m, _) = gmm_fit_em_source(source, *components, *init, &spec.train, rng)?;
            MetaModel::Gmm(m)
        }
        ModelSpec::Rbm { hidden } => {
            MetaModel::Rbm(rbm_train_cd_source(source, *hidden, &spec.train, rng)?)
        }
        ModelSpec::Vae {
            latent,
            hidden_layers,
        } => MetaModel::Vae(vae_train_source(
            source,
            visible,
            *latent,
            hidden_layers,
            &spec.train,
            rng,
        )?),
    })
}

/// Representations of a dataset inferred through an existing chain; rows are
/// re-drawn per epoch (or fixed, matching the literal materialize-once
/// reading) using per-row substreams.
pub struct InferredSource<'a> {
    cascade: &'a CascadeModel,
    data: &'a Dataset,
    resample: bool,
    base: u64,
}

impl<'a> InferredSource<'a> {
    pub fn new(
        cascade: &'a CascadeModel,
        data: &'a Dataset,
        resample: bool,
        rng: &mut Prng,
    ) -> Self {
        InferredSource {
            cascade,
            data,
            resample,
            base: rng::substream_base(rng),
        }
    }
}

impl StageSource for InferredSource<'_> {
    fn len(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.cascade.top_hidden_space().point_dim()
    }

    fn weights(&self) -> Array1<f64> {
        self.data.trainer_weights()
    }

    fn epoch_rows(&self, epoch: usize) -> Result<CowArray<'_, f64, Ix2>> {
        let pass = if self.resample { epoch as u64 } else { 0 };
        let d = self.dim();
        let mut rows = Array2::zeros((self.data.n(), d));
        for i in 0..self.data.n() {
            let mut sub = rng::substream(self.base, (pass << 32) | i as u64);
            let h = self.cascade.infer_top(self.data.point(i), &mut sub)?;
            rows.row_mut(i).assign(&h);
        }
        Ok(CowArray::from(rows))
    }

    fn resamples(&self) -> bool {
        self.resample
    }
}

/// One term of the decomposed bound.
#[derive(Clone, Copy, Debug)]
pub struct BoundTerm {
    pub value: f64,
    pub std_err: f64,
}

/// The decomposed bound: per-layer terms, their sum, and the Monte Carlo
/// budget used.
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub terms: Vec<BoundTerm>,
    pub total: f64,
    pub total_std_err: f64,
    pub n_mc_samples: usize,
}

impl BoundReport {
    fn from_terms(terms: Vec<BoundTerm>, n_mc: usize) -> Self {
        let total = terms.iter().map(|t| t.value).sum();
        let total_std_err = terms
            .iter()
            .map(|t| t.std_err * t.std_err)
            .sum::<f64>()
            .sqrt();
        BoundReport {
            terms,
            total,
            total_std_err,
            n_mc_samples: n_mc,
        }
    }

    /// One line per term: `term <index> <value> <std_err>`, then a total line.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            let _ = writeln!(out, "term {} {} {}", i + 1, t.value, t.std_err);
        }
        let _ = writeln!(out, "total {} {}", self.total, self.total_std_err);
        out
    }
}

struct TermAccumulator {
    /// Weighted mean accumulator.
    value: CompensatedSum,
    /// Sum of w^2 * per-example variance-of-the-mean.
    var: CompensatedSum,
    /// Fallback spread across examples when per-example variances are
    /// unavailable (single-draw estimates).
    raw: Vec<(f64, f64)>,
    exact: bool,
}

impl TermAccumulator {
    fn new() -> Self {
        TermAccumulator {
            value: CompensatedSum::new(),
            var: CompensatedSum::new(),
            raw: Vec::new(),
            exact: true,
        }
    }

    fn add_example(&mut self, weight: f64, mean: f64, var_of_mean: Option<f64>, exact: bool) {
        self.value.add(weight * mean);
        self.exact &= exact;
        match var_of_mean {
            Some(v) => self.var.add(weight * weight * v),
            None => self.raw.push((weight, mean)),
        }
    }

    fn finish(self) -> BoundTerm {
        let value = self.value.value();
        let mut var = self.var.value();
        if !self.exact && self.raw.len() >= 2 {
            // Single-draw fallback: pool the spread across examples.
            let n = self.raw.len() as f64;
            let mean = self.raw.iter().map(|(_, m)| m).sum::<f64>() / n;
            let pooled = self
                .raw
                .iter()
                .map(|(_, m)| (m - mean) * (m - mean))
                .sum::<f64>()
                / (n - 1.0);
            var += pooled * self.raw.iter().map(|(w, _)| w * w).sum::<f64>();
        }
        BoundTerm {
            value,
            std_err: var.sqrt(),
        }
    }
}

fn mean_and_var_of_mean(vals: &[f64]) -> (f64, Option<f64>) {
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let s2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(s2 / n as f64))
}

/// Estimate every term of the decomposed bound with `n_mc` posterior chains
/// per example. The two logs inside each difference term are evaluated on
/// the same draws. Amortized visible marginals inside the terms use `n_mc`
/// importance samples as well; [`bound_terms_with`] decouples that budget.
pub fn bound_terms(
    model: &CascadeModel,
    data: &Dataset,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<BoundReport> {
    bound_terms_with(model, data, n_mc, n_mc, rng)
}

/// [`bound_terms`] with a separate importance-sample budget for the
/// amortized marginal evaluations inside each term.
pub fn bound_terms_with(
    model: &CascadeModel,
    data: &Dataset,
    n_mc: usize,
    inner_samples: usize,
    rng: &mut Prng,
) -> Result<BoundReport> {
    if n_mc == 0 || inner_samples == 0 {
        return Err(Error::BadParams("need n_mc >= 1".into()));
    }
    if model.visible_space() != data.space() {
        return Err(Error::IncompatibleSpaces(format!(
            "data space {} != chain visible space {}",
            data.space(),
            model.visible_space()
        )));
    }
    let k = model.len();
    let wbar = data.probability_weights();
    let base = rng::substream_base(rng);

    let mut accs: Vec<TermAccumulator> = (0..k).map(|_| TermAccumulator::new()).collect();
    for i in 0..data.n() {
        let x = data.point(i);
        let mut sub = rng::substream(base, i as u64);
        let first = model.models[0].log_marginal_visible_one(x, inner_samples, &mut sub)?;
        let var = if first.is_exact {
            Some(0.0)
        } else if first.std_err > 0.0 {
            Some(first.std_err * first.std_err)
        } else {
            None
        };
        accs[0].add_example(wbar[i], first.value, var, first.is_exact);

        if k > 1 {
            let mut deltas = vec![Vec::with_capacity(n_mc); k - 1];
            for _ in 0..n_mc {
                let mut h = x.to_owned();
                for j in 1..k {
                    h = model.models[j - 1].sample_posterior(h.view(), &mut sub)?;
                    let up =
                        model.models[j].log_marginal_visible_one(h.view(), inner_samples, &mut sub)?;
                    let down = model.models[j - 1].log_marginal_hidden_one(h.view())?;
                    deltas[j - 1].push(up.value - down.value);
                }
            }
            for (j, vals) in deltas.iter().enumerate() {
                let (mean, var) = mean_and_var_of_mean(vals);
                accs[j + 1].add_example(wbar[i], mean, var, false);
            }
        }
    }
    let terms = accs.into_iter().map(TermAccumulator::finish).collect();
    Ok(BoundReport::from_terms(terms, n_mc))
}

/// Estimate only the top term L_k (k >= 2), with paired draws.
pub fn bound_term_top(
    model: &CascadeModel,
    data: &Dataset,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<LogLikEstimate> {
    let k = model.len();
    if k < 2 {
        return Err(Error::BadParams("the top term needs a chain of length >= 2".into()));
    }
    let wbar = data.probability_weights();
    let base = rng::substream_base(rng);
    let mut acc = TermAccumulator::new();
    for i in 0..data.n() {
        let mut sub = rng::substream(base, i as u64);
        let mut vals = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            let mut h = data.point(i).to_owned();
            for j in 1..k {
                h = model.models[j - 1].sample_posterior(h.view(), &mut sub)?;
            }
            let up = model.models[k - 1].log_marginal_visible_one(h.view(), n_mc, &mut sub)?;
            let down = model.models[k - 2].log_marginal_hidden_one(h.view())?;
            vals.push(up.value - down.value);
        }
        let (mean, var) = mean_and_var_of_mean(&vals);
        acc.add_example(wbar[i], mean, var, false);
    }
    let term = acc.finish();
    Ok(LogLikEstimate {
        value: term.value,
        std_err: term.std_err,
        is_exact: false,
    })
}

/// Train one more model on top of an existing chain; everything below stays
/// frozen. Returns the grown chain and the new top term.
pub fn incorporate_next(
    model: &CascadeModel,
    spec: &StageSpec,
    data: &Dataset,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<(CascadeModel, LogLikEstimate)> {
    let visible = model.top_hidden_space();
    if !spec.model.accepts_visible(visible) {
        return Err(Error::IncompatibleSpaces(format!(
            "spec cannot sit on hidden space {visible}"
        )));
    }
    let source = InferredSource::new(model, data, spec.train.resample_each_epoch, rng);
    let new_model = train_stage(spec, &source, visible, rng)?;
    let mut grown = model.clone();
    grown.push(new_model)?;
    let term = bound_term_top(&grown, data, n_mc, rng)?;
    Ok((grown, term))
}

/// Greedy layer-wise training: fit the bottom model on the data, then each
/// later model on representations inferred through the frozen chain below
/// it. A full bound report is emitted after every incorporation.
pub fn greedy_train(
    data: &Dataset,
    recipe: &[StageSpec],
    n_mc: usize,
    rng: &mut Prng,
) -> Result<(CascadeModel, Vec<BoundReport>)> {
    if recipe.is_empty() {
        return Err(Error::BadParams("recipe must name at least one stage".into()));
    }
    let source = crate::train::FixedSource::new(data);
    let first = train_stage(&recipe[0], &source, data.space(), rng)?;
    let mut cascade = CascadeModel::single(first);
    let mut reports = vec![bound_terms(&cascade, data, n_mc, rng)?];
    for spec in &recipe[1..] {
        let (grown, _) = incorporate_next(&cascade, spec, data, n_mc, rng)?;
        cascade = grown;
        reports.push(bound_terms(&cascade, data, n_mc, rng)?);
    }
    Ok((cascade, reports))
}

/// Thresholds for reading a top term.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosisThresholds {
    /// A term below -(base + se_mult * std_err) means the new layer is
    /// undertrained.
    pub undertrained_base: f64,
    pub undertrained_se_mult: f64,
    /// |term| within near_zero_se_mult * std_err of zero: the layer below is
    /// already close to the best reachable marginal.
    pub near_zero_se_mult: f64,
    /// Prior-entropy gap below this many nats: the chain has converged.
    pub converged_gap: f64,
}

impl Default for DiagnosisThresholds {
    fn default() -> Self {
        DiagnosisThresholds {
            undertrained_base: 0.5,
            undertrained_se_mult: 5.0,
            near_zero_se_mult: 3.0,
            converged_gap: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Healthy,
    Undertrained,
    NearOptimal,
    Converged,
}

#[derive(Clone, Copy, Debug)]
pub struct TermDiagnosis {
    pub verdict: Verdict,
    pub term: LogLikEstimate,
    pub gap: Option<f64>,
}

/// Classify a freshly trained top term.
pub fn diagnose_term(
    term: LogLikEstimate,
    gap: Option<f64>,
    thresholds: &DiagnosisThresholds,
) -> TermDiagnosis {
    let tau_neg = thresholds.undertrained_base + thresholds.undertrained_se_mult * term.std_err;
    let tau_zero = thresholds.near_zero_se_mult * term.std_err;
    let verdict = if term.value < -tau_neg {
        Verdict::Undertrained
    } else if term.value.abs() <= tau_zero {
        Verdict::NearOptimal
    } else if gap.is_some_and(|g| g.abs() <= thresholds.converged_gap) {
        Verdict::Converged
    } else {
        Verdict::Healthy
    };
    TermDiagnosis {
        verdict,
        term,
        gap,
    }
}

/// The prior-entropy gap estimate and the closed-form prior term it uses.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceGap {
    /// E_D E_q[log m_k(h_k)] - E_{m_k(h_k)}[log m_k(h_k)].
    pub value: f64,
    pub std_err: f64,
    /// The second expectation, available in closed form or by enumeration.
    pub prior_expected_log: f64,
}

/// Convergence diagnostic for the top model: compare the aggregate posterior
/// expectation of log m_k(h_k) against its expectation under the prior
/// itself. Zero (up to noise) means the top model cannot be improved by
/// stacking more layers.
pub fn convergence_gap(
    model: &CascadeModel,
    data: &Dataset,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<ConvergenceGap> {
    if n_mc == 0 {
        return Err(Error::BadParams("need n_mc >= 1".into()));
    }
    let top = model.models().last().expect("nonempty chain");
    let prior_expected_log = prior_expected_log(top)?;

    let wbar = data.probability_weights();
    let base = rng::substream_base(rng);
    let mut acc = TermAccumulator::new();
    for i in 0..data.n() {
        let mut sub = rng::substream(base, i as u64);
        let mut vals = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            let h = model.infer_top(data.point(i), &mut sub)?;
            vals.push(top.log_marginal_hidden_one(h.view())?.value);
        }
        let (mean, var) = mean_and_var_of_mean(&vals);
        acc.add_example(wbar[i], mean, var, false);
    }
    let term = acc.finish();
    Ok(ConvergenceGap {
        value: term.value - prior_expected_log,
        std_err: term.std_err,
        prior_expected_log,
    })
}

/// E_{m(h)}[log m(h)] for the supported tops: closed form for the standard
/// normal, a finite sum for the discrete families.
fn prior_expected_log(top: &MetaModel) -> Result<f64> {
    match top {
        MetaModel::Vae(v) => {
            let d = v.hidden_space().point_dim() as f64;
            Ok(-0.5 * d * (1.0 + LN_2PI))
        }
        MetaModel::Gmm(g) => Ok(g
            .params
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|&w| w * w.ln())
            .sum()),
        MetaModel::Rbm(r) => {
            let h_bits = r.hidden_space().point_dim();
            if h_bits > crate::models::rbm::MAX_ENUM_BITS {
                return Err(Error::SizeTooLarge {
                    states: 1u128 << h_bits.min(127),
                    cap: 1u128 << crate::models::rbm::MAX_ENUM_BITS,
                });
            }
            let mut acc = CompensatedSum::new();
            for idx in 0..(1usize << h_bits) {
                let h = r.hidden_space().state_point(idx);
                let lp = r.log_marginal_hidden(h.view())?.value;
                acc.add(lp.exp() * lp);
            }
            Ok(acc.value())
        }
        MetaModel::Tabular(t) => Ok(t
            .hidden_marginal()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum()),
    }
}

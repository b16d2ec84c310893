//! Bernoulli restricted Boltzmann machines with contrastive-divergence
//! training and exact evaluation for small instances.
//!
//! Exact quantities (partition function, marginals, prior sampling) come
//! from enumerating whichever side is smaller and summing the analytic
//! softplus free energy over the other; anything past 2^20 states is
//! refused rather than silently approximated.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::metamodel::LogLikEstimate;
use crate::numerics::{log_sum_exp, sigmoid, softplus, CompensatedSum};
use crate::rng::Prng;
use crate::space::Space;
use crate::train::{StageSource, TrainConfig};

/// Enumerating more than 2^20 states is refused.
pub const MAX_ENUM_BITS: usize = 20;

#[derive(Clone, Debug)]
pub struct RbmParams {
    /// V x H coupling matrix.
    pub w: Array2<f64>,
    pub b_visible: Array1<f64>,
    pub c_hidden: Array1<f64>,
}

impl RbmParams {
    pub fn zeros(v: usize, h: usize) -> Self {
        RbmParams {
            w: Array2::zeros((v, h)),
            b_visible: Array1::zeros(v),
            c_hidden: Array1::zeros(h),
        }
    }

    pub fn v(&self) -> usize {
        self.w.nrows()
    }

    pub fn h(&self) -> usize {
        self.w.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_visible.len() != self.v() || self.c_hidden.len() != self.h() {
            return Err(Error::BadParams("bias lengths must match W".into()));
        }
        if self
            .w
            .iter()
            .chain(self.b_visible.iter())
            .chain(self.c_hidden.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("RBM parameters".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RbmModel {
    pub params: RbmParams,
    visible: Space,
    hidden: Space,
    log_z: OnceLock<f64>,
}

impl RbmModel {
    pub fn new(params: RbmParams) -> Result<Self> {
        params.validate()?;
        let visible = Space::binary(params.v());
        let hidden = Space::binary(params.h());
        Ok(RbmModel {
            params,
            visible,
            hidden,
            log_z: OnceLock::new(),
        })
    }

    pub fn visible_space(&self) -> Space {
        self.visible
    }

    pub fn hidden_space(&self) -> Space {
        self.hidden
    }

    /// log of the unnormalized visible marginal: b'v + sum_j softplus(c_j + W_:j'v).
    pub fn log_unnorm_visible(&self, v: ArrayView1<f64>) -> Result<f64> {
        self.visible.check_dim(v)?;
        let p = &self.params;
        let mut acc = p.b_visible.dot(&v);
        for j in 0..p.h() {
            let act = p.c_hidden[j] + p.w.column(j).dot(&v);
            acc += softplus(act);
        }
        Ok(acc)
    }

    /// log of the unnormalized hidden marginal: c'h + sum_i softplus(b_i + W_i:'h).
    pub fn log_unnorm_hidden(&self, h: ArrayView1<f64>) -> Result<f64> {
        self.hidden.check_dim(h)?;
        let p = &self.params;
        let mut acc = p.c_hidden.dot(&h);
        for i in 0..p.v() {
            let act = p.b_visible[i] + p.w.row(i).dot(&h);
            acc += softplus(act);
        }
        Ok(acc)
    }

    fn enumeration_side(&self) -> Result<EnumSide> {
        let v = self.params.v();
        let h = self.params.h();
        let bits = v.min(h);
        if bits > MAX_ENUM_BITS {
            return Err(Error::SizeTooLarge {
                states: 1u128 << bits.min(127),
                cap: 1u128 << MAX_ENUM_BITS,
            });
        }
        Ok(if h <= v { EnumSide::Hidden } else { EnumSide::Visible })
    }

    /// Exact ln Z by enumerating the smaller side.
    pub fn log_partition(&self) -> Result<f64> {
        if let Some(z) = self.log_z.get() {
            return Ok(*z);
        }
        let side = self.enumeration_side()?;
        let z = self.log_partition_over(side)?;
        Ok(*self.log_z.get_or_init(|| z))
    }

    /// ln Z by enumerating an explicit side; both sides agree for small
    /// machines, which the tests exercise.
    pub fn log_partition_over(&self, side: EnumSide) -> Result<f64> {
        let (bits, space) = match side {
            EnumSide::Visible => (self.params.v(), self.visible),
            EnumSide::Hidden => (self.params.h(), self.hidden),
        };
        if bits > MAX_ENUM_BITS {
            return Err(Error::SizeTooLarge {
                states: 1u128 << bits.min(127),
                cap: 1u128 << MAX_ENUM_BITS,
            });
        }
        let mut terms = Vec::with_capacity(1 << bits);
        for idx in 0..(1usize << bits) {
            let point = space.state_point(idx);
            let t = match side {
                EnumSide::Visible => self.log_unnorm_visible(point.view())?,
                EnumSide::Hidden => self.log_unnorm_hidden(point.view())?,
            };
            terms.push(t);
        }
        Ok(log_sum_exp(&terms))
    }

    pub fn log_marginal_visible(&self, v: ArrayView1<f64>) -> Result<LogLikEstimate> {
        let val = self.log_unnorm_visible(v)? - self.log_partition()?;
        Ok(LogLikEstimate::exact(val))
    }

    pub fn log_marginal_hidden(&self, h: ArrayView1<f64>) -> Result<LogLikEstimate> {
        let val = self.log_unnorm_hidden(h)? - self.log_partition()?;
        Ok(LogLikEstimate::exact(val))
    }

    /// p(h_j = 1 | v) for every j.
    pub fn hidden_activation(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.visible.check_dim(v)?;
        let p = &self.params;
        Ok(Array1::from_iter(
            (0..p.h()).map(|j| sigmoid(p.c_hidden[j] + p.w.column(j).dot(&v))),
        ))
    }

    /// p(v_i = 1 | h) for every i.
    pub fn visible_activation(&self, h: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.hidden.check_dim(h)?;
        let p = &self.params;
        Ok(Array1::from_iter(
            (0..p.v()).map(|i| sigmoid(p.b_visible[i] + p.w.row(i).dot(&h))),
        ))
    }

    pub fn sample_posterior(&self, v: ArrayView1<f64>, rng: &mut Prng) -> Result<Array1<f64>> {
        let probs = self.hidden_activation(v)?;
        Ok(bernoulli_vector(&probs, rng))
    }

    pub fn sample_conditional_visible(
        &self,
        h: ArrayView1<f64>,
        rng: &mut Prng,
    ) -> Result<Array1<f64>> {
        let probs = self.visible_activation(h)?;
        Ok(bernoulli_vector(&probs, rng))
    }

    /// Exact prior draws: sample the smaller side's exact marginal, then one
    /// conditional step if the smaller side was the visible one.
    pub fn sample_prior_hidden(&self, n: usize, rng: &mut Prng) -> Result<Array2<f64>> {
        let side = self.enumeration_side()?;
        let (bits, space) = match side {
            EnumSide::Visible => (self.params.v(), self.visible),
            EnumSide::Hidden => (self.params.h(), self.hidden),
        };
        let log_z = self.log_partition()?;
        let mut cumulative = Vec::with_capacity(1 << bits);
        let mut acc = CompensatedSum::new();
        for idx in 0..(1usize << bits) {
            let point = space.state_point(idx);
            let lp = match side {
                EnumSide::Visible => self.log_unnorm_visible(point.view())?,
                EnumSide::Hidden => self.log_unnorm_hidden(point.view())?,
            } - log_z;
            acc.add(lp.exp());
            cumulative.push(acc.value());
        }
        let total = *cumulative.last().expect("nonempty enumeration");
        let mut out = Array2::zeros((n, self.params.h()));
        for row in 0..n {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min((1 << bits) - 1);
            let point = space.state_point(idx);
            match side {
                EnumSide::Hidden => out.row_mut(row).assign(&point),
                EnumSide::Visible => {
                    let h = self.sample_posterior(point.view(), rng)?;
                    out.row_mut(row).assign(&h);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnumSide {
    Visible,
    Hidden,
}

fn bernoulli_vector(probs: &Array1<f64>, rng: &mut Prng) -> Array1<f64> {
    Array1::from_iter(probs.iter().map(|&p| f64::from(rng.random::<f64>() < p)))
}

/// Exact ln Z of an RBM; errors with `SizeTooLarge` past the enumeration cap.
pub fn rbm_log_partition_exact(rbm: &RbmModel) -> Result<f64> {
    rbm.log_partition()
}

fn init_params(v: usize, h: usize, rng: &mut Prng) -> RbmParams {
    let scale = 1.0 / (v as f64).sqrt();
    let w = Array2::from_shape_fn((v, h), |_| (rng.random::<f64>() * 2.0 - 1.0) * scale);
    RbmParams {
        w,
        b_visible: Array1::zeros(v),
        c_hidden: Array1::zeros(h),
    }
}

/// CD-k stochastic gradient training on binary rows.
pub fn rbm_train_cd(
    data: &crate::data::Dataset,
    hidden: usize,
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<RbmModel> {
    let source = crate::train::FixedSource::new(data);
    rbm_train_cd_source(&source, hidden, cfg, rng)
}

pub fn rbm_train_cd_source(
    source: &dyn StageSource,
    hidden: usize,
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<RbmModel> {
    if hidden == 0 {
        return Err(Error::BadParams("need at least one hidden unit".into()));
    }
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let v = source.dim();
    let mut params = init_params(v, hidden, rng);
    cd_epochs(&mut params, source, cfg, rng)?;
    RbmModel::new(params)
}

/// Run `cfg.epochs` passes of CD-k updates in place.
pub(crate) fn cd_epochs(
    params: &mut RbmParams,
    source: &dyn StageSource,
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<()> {
    let weights = source.weights();
    let n = source.len();
    let v = params.v();
    let h = params.h();
    for epoch in 0..cfg.epochs {
        let rows = source.epoch_rows(epoch)?;
        let mut order: Vec<usize> = (0..n).collect();
        shuffle(&mut order, rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad_w = Array2::zeros((v, h));
            let mut grad_b = Array1::zeros(v);
            let mut grad_c = Array1::zeros(h);
            let mut batch_weight = 0.0;
            for &i in batch {
                let x = rows.row(i);
                let wi = weights[i];
                batch_weight += wi;
                let model = RbmModel {
                    params: params.clone(),
                    visible: Space::binary(v),
                    hidden: Space::binary(h),
                    log_z: OnceLock::new(),
                };
                let ph0 = model.hidden_activation(x)?;
                let mut hs = bernoulli_vector(&ph0, rng);
                let mut vk = x.to_owned();
                let mut phk = ph0.clone();
                for step in 0..cfg.cd_steps {
                    let pv = model.visible_activation(hs.view())?;
                    vk = bernoulli_vector(&pv, rng);
                    phk = model.hidden_activation(vk.view())?;
                    if step + 1 < cfg.cd_steps {
                        hs = bernoulli_vector(&phk, rng);
                    }
                }
                for a in 0..v {
                    for bj in 0..h {
                        grad_w[[a, bj]] += wi * (x[a] * ph0[bj] - vk[a] * phk[bj]);
                    }
                    grad_b[a] += wi * (x[a] - vk[a]);
                }
                for bj in 0..h {
                    grad_c[bj] += wi * (ph0[bj] - phk[bj]);
                }
            }
            if batch_weight > 0.0 {
                let scale = cfg.learning_rate / batch_weight;
                params.w.scaled_add(scale, &grad_w);
                params.b_visible.scaled_add(scale, &grad_b);
                params.c_hidden.scaled_add(scale, &grad_c);
            }
        }
        if params
            .w
            .iter()
            .chain(params.b_visible.iter())
            .chain(params.c_hidden.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite(format!("RBM training diverged at epoch {epoch}")));
        }
    }
    Ok(())
}

pub(crate) fn shuffle(order: &mut [usize], rng: &mut Prng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

//! Diagonal-Gaussian variational autoencoders built on a small tanh MLP
//! with hand-written backpropagation.
//!
//! The reconstruction term is Bernoulli for binary visible spaces and a
//! fixed-variance (sigma^2 = 1) Gaussian for real ones. Training maximizes
//! the single-sample reparameterized bound with the KL term in closed form;
//! evaluation uses the importance-weighted estimator, which at one sample
//! reduces to the plain stochastic bound.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metamodel::LogLikEstimate;
use crate::numerics::{
    log_mean_exp, log_mean_exp_std_err, sigmoid, softplus, std_normal_log_density, LN_2PI,
};
use crate::rng::Prng;
use crate::space::{Space, SpaceKind};
use crate::train::{Optimizer, StageSource, TrainConfig};

#[derive(Clone, Debug)]
pub struct Dense {
    /// out x in weight matrix.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Fully connected layers with tanh between them and a linear output.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    pub fn new(dims: &[usize], rng: &mut Prng) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                Dense {
                    w: Array2::from_shape_fn((fan_out, fan_in), |_| {
                        (rng.random::<f64>() * 2.0 - 1.0) * scale
                    }),
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("nonempty mlp").w.nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_dim()];
        d.extend(self.layers.iter().map(|l| l.w.nrows()));
        d
    }

    /// Forward pass returning the output and the post-activation values of
    /// every layer input (needed by the backward pass).
    pub fn forward(&self, x: ArrayView1<f64>) -> (Array1<f64>, Vec<Array1<f64>>) {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.w.dot(&a) + &layer.b;
            if i + 1 < self.layers.len() {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z.clone());
            a = z;
        }
        (a, acts)
    }

    /// Backward pass from the gradient at the (linear) output; returns the
    /// parameter gradients and the gradient at the input.
    pub fn backward(&self, acts: &[Array1<f64>], grad_out: Array1<f64>) -> (MlpGrad, Array1<f64>) {
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
            .collect();
        let mut gz = grad_out;
        for i in (0..self.layers.len()).rev() {
            let input = &acts[i];
            for r in 0..self.layers[i].w.nrows() {
                let g = gz[r];
                grads[i].1[r] = g;
                for c in 0..self.layers[i].w.ncols() {
                    grads[i].0[[r, c]] = g * input[c];
                }
            }
            let mut ga = self.layers[i].w.t().dot(&gz);
            if i > 0 {
                // acts[i] holds tanh(z) for hidden layers.
                for (gaj, aj) in ga.iter_mut().zip(acts[i].iter()) {
                    *gaj *= 1.0 - aj * aj;
                }
            }
            gz = ga;
        }
        (MlpGrad { layers: grads }, gz)
    }

    fn add_scaled(&mut self, grad: &MlpGrad, scale: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grad.layers) {
            layer.w.scaled_add(scale, gw);
            layer.b.scaled_add(scale, gb);
        }
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }
}

#[derive(Clone, Debug)]
pub struct MlpGrad {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl MlpGrad {
    fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrad {
            layers: mlp
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.w.dim()), Array1::zeros(l.b.len())))
                .collect(),
        }
    }

    fn accumulate(&mut self, other: &MlpGrad, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.scaled_add(scale, ow);
            b.scaled_add(scale, ob);
        }
    }

    fn flat(&self, out: &mut Vec<f64>) {
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
    }
}

#[derive(Clone, Debug)]
pub struct VaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
    visible: Space,
    hidden: Space,
}

#[derive(Clone, Debug)]
pub struct VaeGrads {
    pub encoder: MlpGrad,
    pub decoder: MlpGrad,
}

impl VaeGrads {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.encoder.flat(&mut out);
        self.decoder.flat(&mut out);
        out
    }
}

impl VaeModel {
    /// Build an untrained VAE. `hidden_layers` lists the deterministic layer
    /// widths shared by encoder and decoder.
    pub fn new(visible: Space, latent_dim: usize, hidden_layers: &[usize], rng: &mut Prng) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::BadParams("latent_dim must be >= 1".into()));
        }
        if matches!(visible, Space::Categorical { .. }) {
            return Err(Error::IncompatibleSpaces(
                "VAE visible space must be Binary or Real".into(),
            ));
        }
        let d = visible.point_dim();
        let mut enc_dims = vec![d];
        enc_dims.extend_from_slice(hidden_layers);
        enc_dims.push(2 * latent_dim);
        let mut dec_dims = vec![latent_dim];
        dec_dims.extend_from_slice(hidden_layers);
        dec_dims.push(d);
        Ok(VaeModel {
            encoder: Mlp::new(&enc_dims, rng),
            decoder: Mlp::new(&dec_dims, rng),
            latent_dim,
            visible,
            hidden: Space::real(latent_dim),
        })
    }

    pub fn from_parts(visible: Space, latent_dim: usize, encoder: Mlp, decoder: Mlp) -> Result<Self> {
        if encoder.out_dim() != 2 * latent_dim
            || decoder.in_dim() != latent_dim
            || encoder.in_dim() != visible.point_dim()
            || decoder.out_dim() != visible.point_dim()
        {
            return Err(Error::BadParams("encoder/decoder shapes do not chain".into()));
        }
        Ok(VaeModel {
            encoder,
            decoder,
            latent_dim,
            visible,
            hidden: Space::real(latent_dim),
        })
    }

    pub fn visible_space(&self) -> Space {
        self.visible
    }

    pub fn hidden_space(&self) -> Space {
        self.hidden
    }

    /// Encoder output split into (mean, log variance).
    pub fn encode(&self, x: ArrayView1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        self.visible.check_dim(x)?;
        let (out, _) = self.encoder.forward(x);
        let mu = out.slice(ndarray::s![..self.latent_dim]).to_owned();
        let logvar = out.slice(ndarray::s![self.latent_dim..]).to_owned();
        Ok((mu, logvar))
    }

    pub fn decode(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.hidden.check_dim(z)?;
        Ok(self.decoder.forward(z).0)
    }

    /// log p(x | z) under the decoder head.
    pub fn log_conditional_visible(&self, x: ArrayView1<f64>, out: &Array1<f64>) -> f64 {
        match self.visible.kind() {
            SpaceKind::Binary => x
                .iter()
                .zip(out.iter())
                .map(|(&xi, &l)| xi * l - softplus(l))
                .sum(),
            _ => {
                let sq: f64 = x
                    .iter()
                    .zip(out.iter())
                    .map(|(&xi, &m)| (xi - m) * (xi - m))
                    .sum();
                -0.5 * (x.len() as f64 * LN_2PI + sq)
            }
        }
    }

    pub fn sample_posterior(&self, x: ArrayView1<f64>, rng: &mut Prng) -> Result<Array1<f64>> {
        let (mu, logvar) = self.encode(x)?;
        let mut z = mu;
        for j in 0..self.latent_dim {
            let e: f64 = rng.sample(StandardNormal);
            z[j] += (0.5 * logvar[j]).exp() * e;
        }
        Ok(z)
    }

    pub fn sample_conditional_visible(
        &self,
        z: ArrayView1<f64>,
        rng: &mut Prng,
    ) -> Result<Array1<f64>> {
        let out = self.decode(z)?;
        Ok(match self.visible.kind() {
            SpaceKind::Binary => Array1::from_iter(
                out.iter().map(|&l| f64::from(rng.random::<f64>() < sigmoid(l))),
            ),
            _ => Array1::from_iter(out.iter().map(|&m| {
                let e: f64 = rng.sample(StandardNormal);
                m + e
            })),
        })
    }

    pub fn sample_prior_hidden(&self, n: usize, rng: &mut Prng) -> Array2<f64> {
        Array2::from_shape_fn((n, self.latent_dim), |_| rng.sample(StandardNormal))
    }

    pub fn log_marginal_hidden(&self, h: ArrayView1<f64>) -> Result<LogLikEstimate> {
        self.hidden.check_dim(h)?;
        Ok(LogLikEstimate::exact(std_normal_log_density(
            h.as_slice().expect("contiguous point"),
        )))
    }

    /// One importance weight: log p(x, z) - log q(z | x) with z drawn from
    /// the encoder.
    fn importance_weight(&self, x: ArrayView1<f64>, mu: &Array1<f64>, logvar: &Array1<f64>, rng: &mut Prng) -> f64 {
        let mut z = mu.clone();
        let mut log_q = 0.0;
        for j in 0..self.latent_dim {
            let e: f64 = rng.sample(StandardNormal);
            let sd = (0.5 * logvar[j]).exp();
            z[j] += sd * e;
            log_q += -0.5 * (LN_2PI + logvar[j] + e * e);
        }
        let out = self.decoder.forward(z.view()).0;
        let log_px_z = self.log_conditional_visible(x, &out);
        let log_pz = std_normal_log_density(z.as_slice().expect("contiguous z"));
        log_px_z + log_pz - log_q
    }

    /// Importance-weighted marginal-likelihood estimate from `s` samples.
    pub fn iwae_log_likelihood(
        &self,
        x: ArrayView1<f64>,
        s: usize,
        rng: &mut Prng,
    ) -> Result<LogLikEstimate> {
        if s == 0 {
            return Err(Error::BadParams("need at least one importance sample".into()));
        }
        let (mu, logvar) = self.encode(x)?;
        let weights: Vec<f64> = (0..s)
            .map(|_| self.importance_weight(x, &mu, &logvar, rng))
            .collect();
        let value = log_mean_exp(&weights);
        if !value.is_finite() {
            return Err(Error::NonFinite("importance-weighted estimate".into()));
        }
        Ok(LogLikEstimate {
            value,
            std_err: log_mean_exp_std_err(&weights),
            is_exact: false,
        })
    }

    /// Single-sample stochastic bound; by construction identical to the
    /// one-sample importance-weighted estimate drawn from the same state.
    pub fn elbo_estimate(&self, x: ArrayView1<f64>, rng: &mut Prng) -> Result<f64> {
        let (mu, logvar) = self.encode(x)?;
        Ok(self.importance_weight(x, &mu, &logvar, rng))
    }

    /// Loss (negative bound with closed-form KL) of one example given fixed
    /// reparameterization noise, plus all parameter gradients.
    fn example_loss_grad(
        &self,
        x: ArrayView1<f64>,
        eps: ArrayView1<f64>,
        want_grads: bool,
    ) -> (f64, Option<VaeGrads>) {
        let (enc_out, enc_acts) = self.encoder.forward(x);
        let l = self.latent_dim;
        let mu = enc_out.slice(ndarray::s![..l]);
        let logvar = enc_out.slice(ndarray::s![l..]);
        let sd = logvar.mapv(|v| (0.5 * v).exp());
        let z = Array1::from_iter((0..l).map(|j| mu[j] + sd[j] * eps[j]));
        let (dec_out, dec_acts) = self.decoder.forward(z.view());
        let recon = self.log_conditional_visible(x, &dec_out);
        let kl: f64 = (0..l)
            .map(|j| -0.5 * (1.0 + logvar[j] - mu[j] * mu[j] - logvar[j].exp()))
            .sum();
        let loss = -recon + kl;
        if !want_grads {
            return (loss, None);
        }

        // d(-recon)/d dec_out
        let gdec_out = match self.visible.kind() {
            SpaceKind::Binary => {
                Array1::from_iter(dec_out.iter().zip(x.iter()).map(|(&li, &xi)| sigmoid(li) - xi))
            }
            _ => Array1::from_iter(dec_out.iter().zip(x.iter()).map(|(&mi, &xi)| mi - xi)),
        };
        let (dec_grads, gz) = self.decoder.backward(&dec_acts, gdec_out);
        let mut genc_out = Array1::zeros(2 * l);
        for j in 0..l {
            genc_out[j] = gz[j] + mu[j];
            genc_out[l + j] = gz[j] * 0.5 * sd[j] * eps[j] + 0.5 * (logvar[j].exp() - 1.0);
        }
        let (enc_grads, _) = self.encoder.backward(&enc_acts, genc_out);
        (
            loss,
            Some(VaeGrads {
                encoder: enc_grads,
                decoder: dec_grads,
            }),
        )
    }

    /// Weighted mean loss of a batch under fixed noise.
    pub fn batch_loss(
        &self,
        xs: ArrayView2<f64>,
        weights: &[f64],
        eps: ArrayView2<f64>,
    ) -> Result<f64> {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        for (i, x) in xs.rows().into_iter().enumerate() {
            self.visible.check_dim(x)?;
            let (loss, _) = self.example_loss_grad(x, eps.row(i), false);
            acc += weights[i] * loss;
        }
        Ok(acc / total)
    }

    /// Weighted mean loss and its gradients under fixed noise.
    pub fn batch_loss_grad(
        &self,
        xs: ArrayView2<f64>,
        weights: &[f64],
        eps: ArrayView2<f64>,
    ) -> Result<(f64, VaeGrads)> {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut grads = VaeGrads {
            encoder: MlpGrad::zeros_like(&self.encoder),
            decoder: MlpGrad::zeros_like(&self.decoder),
        };
        for (i, x) in xs.rows().into_iter().enumerate() {
            self.visible.check_dim(x)?;
            let (loss, g) = self.example_loss_grad(x, eps.row(i), true);
            let g = g.expect("gradients requested");
            let scale = weights[i] / total;
            acc += scale * loss;
            grads.encoder.accumulate(&g.encoder, scale);
            grads.decoder.accumulate(&g.decoder, scale);
        }
        Ok((acc, grads))
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoder.param_count() + self.decoder.param_count());
        for mlp in [&self.encoder, &self.decoder] {
            for layer in &mlp.layers {
                out.extend(layer.w.iter());
                out.extend(layer.b.iter());
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for mlp in [&mut self.encoder, &mut self.decoder] {
            for layer in &mut mlp.layers {
                for w in layer.w.iter_mut() {
                    *w = *it.next().expect("flat params too short");
                }
                for b in layer.b.iter_mut() {
                    *b = *it.next().expect("flat params too short");
                }
            }
        }
        assert!(it.next().is_none(), "flat params too long");
    }
}

/// Closed-form KL between a diagonal Gaussian and the standard normal.
pub fn gaussian_kl_to_standard(mu: &Array1<f64>, logvar: &Array1<f64>) -> f64 {
    mu.iter()
        .zip(logvar.iter())
        .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum()
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

/// Train a VAE by minibatch gradient descent on the single-sample bound.
pub fn vae_train(
    data: &crate::data::Dataset,
    latent_dim: usize,
    hidden_layers: &[usize],
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<VaeModel> {
    let source = crate::train::FixedSource::new(data);
    vae_train_source(&source, data.space(), latent_dim, hidden_layers, cfg, rng)
}

pub fn vae_train_source(
    source: &dyn StageSource,
    visible: Space,
    latent_dim: usize,
    hidden_layers: &[usize],
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<VaeModel> {
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let mut model = VaeModel::new(visible, latent_dim, hidden_layers, rng)?;
    let weights = source.weights();
    let n = source.len();
    let mut adam = AdamState {
        m: vec![0.0; model.flat_params().len()],
        v: vec![0.0; model.flat_params().len()],
        t: 0,
    };
    for epoch in 0..cfg.epochs {
        let rows = source.epoch_rows(epoch)?;
        let mut order: Vec<usize> = (0..n).collect();
        super::rbm::shuffle(&mut order, rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut xs = Array2::zeros((batch.len(), source.dim()));
            let mut ws = Vec::with_capacity(batch.len());
            for (r, &i) in batch.iter().enumerate() {
                xs.row_mut(r).assign(&rows.row(i));
                ws.push(weights[i]);
            }
            let eps = Array2::from_shape_fn((batch.len(), latent_dim), |_| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let (loss, grads) = model.batch_loss_grad(xs.view(), &ws, eps.view())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("VAE training diverged at epoch {epoch}")));
            }
            match cfg.optimizer {
                Optimizer::Sgd => {
                    model.encoder.add_scaled(&grads.encoder, -cfg.learning_rate);
                    model.decoder.add_scaled(&grads.decoder, -cfg.learning_rate);
                }
                Optimizer::Adam => {
                    let flat_g = grads.flat();
                    let mut flat_p = model.flat_params();
                    adam.t += 1;
                    let (b1, b2, eps_adam) = (0.9, 0.999, 1e-8);
                    let bc1 = 1.0 - b1f(b1, adam.t);
                    let bc2 = 1.0 - b1f(b2, adam.t);
                    for (i, g) in flat_g.iter().enumerate() {
                        adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
                        adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g;
                        let mhat = adam.m[i] / bc1;
                        let vhat = adam.v[i] / bc2;
                        flat_p[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + eps_adam);
                    }
                    model.set_flat_params(&flat_p);
                }
            }
        }
    }
    Ok(model)
}

fn b1f(beta: f64, t: usize) -> f64 {
    beta.powi(t as i32)
}

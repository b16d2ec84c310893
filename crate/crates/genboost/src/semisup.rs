//! Semi-supervised boosting: a class variable lives in the top model only.
//!
//! The lower chain is trained exactly as in the unsupervised case, on the
//! weighted pool of unlabeled and (label-stripped) labeled data. The top is
//! a class-conditional Gaussian mixture over the chain's representations:
//! a class prior, per-class component weights, and one diagonal Gaussian
//! per (class, component) pair. Its EM clamps the class responsibilities of
//! labeled rows and leaves unlabeled rows free, so the same objective
//! blends the unlabeled marginal and the labeled joint likelihoods.
//! Classification reads the exact class posterior of inferred
//! representations; no classification loss appears anywhere.

use ndarray::{Array1, Array2, ArrayView1};

use crate::cascade::{bound_terms, greedy_train, BoundReport, BoundTerm, CascadeModel, StageSpec};
use crate::data::{Dataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::metamodel::LogLikEstimate;
use crate::models::gmm::{fit_em_engine, initial_params, GmmInit, GmmModel};
use crate::numerics::{log_sum_exp, CompensatedSum};
use crate::rng::{self, Prng};
use crate::space::{Space, SpaceKind};
use crate::train::TrainConfig;

/// Weights of the unlabeled and labeled bounds; they must sum to 1.
#[derive(Clone, Copy, Debug)]
pub struct SemiSupConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Train the lower chain on unlabeled data only instead of the weighted
    /// pool.
    pub lower_on_unlabeled_only: bool,
}

impl SemiSupConfig {
    /// Proportional weighting: alpha = |unlabeled| / total.
    pub fn proportional(data: &LabeledDataset) -> Self {
        let nu = data.unlabeled.n() as f64;
        let nl = data.labeled.n() as f64;
        SemiSupConfig {
            alpha: nu / (nu + nl),
            beta: nl / (nu + nl),
            lower_on_unlabeled_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            return Err(Error::BadParams(
                "bound weights must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(())
    }
}

/// The class-conditional mixture on top: internally a flat mixture of
/// n_classes * comps_per_class Gaussians whose component index encodes
/// (class, within-class component).
#[derive(Clone, Debug)]
pub struct ClassMixture {
    pub gmm: GmmModel,
    pub n_classes: usize,
    pub comps_per_class: usize,
}

impl ClassMixture {
    pub fn new(gmm: GmmModel, n_classes: usize, comps_per_class: usize) -> Result<Self> {
        if gmm.params.k() != n_classes * comps_per_class {
            return Err(Error::BadParams(
                "mixture size must be n_classes * comps_per_class".into(),
            ));
        }
        Ok(ClassMixture {
            gmm,
            n_classes,
            comps_per_class,
        })
    }

    pub fn visible_space(&self) -> Space {
        self.gmm.visible_space()
    }

    fn class_block(&self, y: usize) -> std::ops::Range<usize> {
        y * self.comps_per_class..(y + 1) * self.comps_per_class
    }

    /// Marginal class probabilities (sums of per-class component weights).
    pub fn class_prior(&self) -> Array1<f64> {
        Array1::from_iter(
            (0..self.n_classes).map(|y| self.class_block(y).map(|c| self.gmm.params.weights[c]).sum()),
        )
    }

    /// log m(h): the flat-mixture marginal.
    pub fn log_marginal(&self, h: ArrayView1<f64>) -> Result<f64> {
        self.gmm.log_density(h)
    }

    /// log m(h, y): prior-weighted class block only.
    pub fn log_joint(&self, h: ArrayView1<f64>, y: usize) -> Result<f64> {
        if y >= self.n_classes {
            return Err(Error::BadParams("label out of range".into()));
        }
        self.visible_space().check_dim(h)?;
        let p = &self.gmm.params;
        let logs: Vec<f64> = self
            .class_block(y)
            .map(|c| {
                p.weights[c].ln()
                    + crate::numerics::diag_gaussian_log_density(
                        h.as_slice().expect("contiguous point"),
                        p.means.row(c).as_slice().expect("contiguous mean"),
                        p.variances.row(c).as_slice().expect("contiguous variance"),
                    )
            })
            .collect();
        Ok(log_sum_exp(&logs))
    }

    /// Exact q(y | h): responsibilities summed within each class block.
    pub fn class_posterior(&self, h: ArrayView1<f64>) -> Result<Array1<f64>> {
        let resp = self.gmm.responsibilities(h)?;
        let mut out = Array1::zeros(self.n_classes);
        for y in 0..self.n_classes {
            out[y] = self.class_block(y).map(|c| resp[c]).sum();
        }
        Ok(out)
    }
}

/// Lower chain plus class-conditional top.
#[derive(Clone, Debug)]
pub struct SemiSupModel {
    pub lower: CascadeModel,
    pub top: ClassMixture,
}

/// Spec of the class-conditional top.
#[derive(Clone, Debug)]
pub struct TopSpec {
    pub comps_per_class: usize,
    pub train: TrainConfig,
}

/// Canonical order of the labeled block: sort by point bits then label, so
/// any permutation of the labeled input trains the same model.
fn canonical_labeled(data: &LabeledDataset) -> (Dataset, Vec<usize>) {
    let mut order: Vec<usize> = (0..data.labeled.n()).collect();
    order.sort_by(|&a, &b| {
        let ra = data.labeled.point(a);
        let rb = data.labeled.point(b);
        for (va, vb) in ra.iter().zip(rb.iter()) {
            match va.total_cmp(vb) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        data.labels[a].cmp(&data.labels[b])
    });
    let labeled = data.labeled.subset(&order).expect("subset of valid rows");
    let labels = order.iter().map(|&i| data.labels[i]).collect();
    (labeled, labels)
}

/// The weighted pool the bounds run over: unlabeled rows first, then the
/// canonicalized labeled rows, weighted alpha/|Du| and beta/|Dl|. With
/// beta = 0 the pool is the unlabeled data alone, which makes the top
/// training literally the unsupervised fit. The second element lists the
/// labels of the pooled labeled block.
fn pooled_data(data: &LabeledDataset, cfg: &SemiSupConfig) -> Result<(Dataset, Vec<usize>)> {
    let (labeled, labels) = canonical_labeled(data);
    if cfg.beta == 0.0 {
        return Ok((data.unlabeled.clone(), Vec::new()));
    }
    let pooled = Dataset::pooled(&data.unlabeled, cfg.alpha, &labeled, cfg.beta)?;
    Ok((pooled, labels))
}

/// Initial top-mixture parameters anchored on the labeled representations:
/// each class block is seeded by k-means++ over that class's labeled rows,
/// so clamped EM starts with every block on its own class's clusters.
/// Classes without labels fall back to seeding over all rows.
fn class_anchored_init(
    source: &dyn crate::train::StageSource,
    n_unlabeled: usize,
    labels: &[usize],
    n_classes: usize,
    top: &TopSpec,
    rng: &mut Prng,
) -> Result<crate::models::gmm::GmmParams> {
    use crate::models::gmm::{kmeans_pp_means, weighted_variance, VARIANCE_FLOOR};
    let rows = source.epoch_rows(0)?;
    let weights = source.weights();
    let d = source.dim();
    let r = top.comps_per_class;
    let k = n_classes * r;
    let var = weighted_variance(rows.view(), &weights);
    let mut means = Array2::zeros((k, d));
    for y in 0..n_classes {
        let class_rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == y)
            .map(|(i, _)| n_unlabeled + i)
            .collect();
        let seeded = if class_rows.is_empty() {
            kmeans_pp_means(rows.view(), &weights, r, rng)
        } else {
            let sub = rows.view().select(ndarray::Axis(0), &class_rows);
            let sub_weights = Array1::from_elem(class_rows.len(), 1.0);
            kmeans_pp_means(sub.view(), &sub_weights, r, rng)
        };
        for j in 0..r {
            means.row_mut(y * r + j).assign(&seeded.row(j));
        }
    }
    let mut variances = Array2::zeros((k, d));
    for c in 0..k {
        for j in 0..d {
            variances[[c, j]] = var[j].max(VARIANCE_FLOOR);
        }
    }
    Ok(crate::models::gmm::GmmParams {
        weights: Array1::from_elem(k, 1.0 / k as f64),
        means,
        variances,
    })
}

/// Greedy semi-supervised training: the lower chain by the unsupervised
/// algorithm on the pool, the top by EM with clamped class responsibilities
/// for labeled rows.
pub fn semisup_train(
    data: &LabeledDataset,
    lower_recipe: &[StageSpec],
    top: &TopSpec,
    cfg: &SemiSupConfig,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<SemiSupModel> {
    cfg.validate()?;
    if lower_recipe.is_empty() {
        return Err(Error::BadParams(
            "need at least one lower model below the class top".into(),
        ));
    }
    if top.comps_per_class == 0 || data.n_classes == 0 {
        return Err(Error::BadParams("need classes and components".into()));
    }
    let (pooled, labels) = pooled_data(data, cfg)?;
    let lower_data = if cfg.lower_on_unlabeled_only {
        data.unlabeled.clone()
    } else {
        pooled.clone()
    };
    let (lower, _) = greedy_train(&lower_data, lower_recipe, n_mc, rng)?;
    if lower.top_hidden_space().kind() != SpaceKind::Real {
        return Err(Error::IncompatibleSpaces(
            "the class-conditional top needs a real-valued representation".into(),
        ));
    }

    let k = data.n_classes * top.comps_per_class;
    let mut masks: Vec<Option<std::ops::Range<usize>>> = vec![None; data.unlabeled.n()];
    masks.extend(
        labels
            .iter()
            .map(|&y| Some(y * top.comps_per_class..(y + 1) * top.comps_per_class)),
    );
    let source = crate::cascade::InferredSource::new(
        &lower,
        &pooled,
        top.train.resample_each_epoch,
        rng,
    );
    let init = if cfg.beta == 0.0 {
        initial_params(&source, k, GmmInit::KmeansPp, rng)?
    } else {
        class_anchored_init(&source, data.unlabeled.n(), &labels, data.n_classes, top, rng)?
    };
    let row_masks = if cfg.beta == 0.0 { None } else { Some(masks.as_slice()) };
    let fit = fit_em_engine(
        &source,
        init,
        row_masks,
        top.train.em_max_iters,
        top.train.em_tol,
        rng,
    )?;
    let mixture = ClassMixture::new(GmmModel::new(fit.params)?, data.n_classes, top.comps_per_class)?;
    Ok(SemiSupModel {
        lower,
        top: mixture,
    })
}

/// The top term of the semi-supervised bound: the alpha-weighted unlabeled
/// marginal plus the beta-weighted labeled joint, minus the paired hidden
/// marginal of the model below.
pub fn bound_term_top_semisup(
    model: &SemiSupModel,
    data: &LabeledDataset,
    cfg: &SemiSupConfig,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<LogLikEstimate> {
    cfg.validate()?;
    let (labeled, labels) = canonical_labeled(data);
    let below = model
        .lower
        .models()
        .last()
        .expect("nonempty lower chain");
    let base = rng::substream_base(rng);
    let mut acc_value = CompensatedSum::new();
    let mut acc_var = CompensatedSum::new();
    let mut eval_rows = |ds: &Dataset,
                         labels: Option<&[usize]>,
                         block_weight: f64,
                         index_offset: u64|
     -> Result<()> {
        let per_row = block_weight / ds.n() as f64;
        for i in 0..ds.n() {
            let mut sub = rng::substream(base, index_offset + i as u64);
            let mut vals = Vec::with_capacity(n_mc);
            for _ in 0..n_mc {
                let h = model.lower.infer_top(ds.point(i), &mut sub)?;
                let up = match labels {
                    None => model.top.log_marginal(h.view())?,
                    Some(ls) => model.top.log_joint(h.view(), ls[i])?,
                };
                let down = below.log_marginal_hidden_one(h.view())?.value;
                vals.push(up - down);
            }
            let mean = vals.iter().sum::<f64>() / n_mc as f64;
            acc_value.add(per_row * mean);
            if n_mc >= 2 {
                let s2 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n_mc - 1) as f64;
                acc_var.add(per_row * per_row * s2 / n_mc as f64);
            }
        }
        Ok(())
    };
    if cfg.alpha > 0.0 {
        eval_rows(&data.unlabeled, None, cfg.alpha, 0)?;
    }
    if cfg.beta > 0.0 {
        // Offset the labeled substreams only past an evaluated unlabeled block.
        let offset = if cfg.alpha > 0.0 { data.unlabeled.n() as u64 } else { 0 };
        eval_rows(&labeled, Some(&labels), cfg.beta, offset)?;
    }
    Ok(LogLikEstimate {
        value: acc_value.value(),
        std_err: acc_var.value().sqrt(),
        is_exact: false,
    })
}

/// All terms of the semi-supervised bound. The first n-1 terms are the
/// chain terms over the weighted pool; the top term mixes the unlabeled
/// marginal and the labeled joint.
pub fn semisup_bound_terms(
    model: &SemiSupModel,
    data: &LabeledDataset,
    cfg: &SemiSupConfig,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<BoundReport> {
    cfg.validate()?;
    let (pooled, _) = pooled_data(data, cfg)?;
    let lower_report = bound_terms(&model.lower, &pooled, n_mc, rng)?;
    let top = bound_term_top_semisup(model, data, cfg, n_mc, rng)?;
    let mut terms = lower_report.terms;
    terms.push(BoundTerm {
        value: top.value,
        std_err: top.std_err,
    });
    let total: f64 = terms.iter().map(|t| t.value).sum();
    let total_std_err = terms
        .iter()
        .map(|t| t.std_err * t.std_err)
        .sum::<f64>()
        .sqrt();
    Ok(BoundReport {
        terms,
        total,
        total_std_err,
        n_mc_samples: n_mc,
    })
}

/// Class posterior of one point, averaged over `n_mc` inferred
/// representations; ties go to the lowest label.
pub fn classify(
    model: &SemiSupModel,
    x: ArrayView1<f64>,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<(usize, Array1<f64>)> {
    if n_mc == 0 {
        return Err(Error::BadParams("need n_mc >= 1".into()));
    }
    let mut posterior = Array1::zeros(model.top.n_classes);
    for _ in 0..n_mc {
        let h = model.lower.infer_top(x, rng)?;
        posterior = posterior + model.top.class_posterior(h.view())?;
    }
    posterior /= n_mc as f64;
    let mut best = 0;
    for y in 1..model.top.n_classes {
        if posterior[y] > posterior[best] {
            best = y;
        }
    }
    Ok((best, posterior))
}

/// Fraction of correct argmax labels on a test set.
pub fn accuracy_eval(
    model: &SemiSupModel,
    test: &Dataset,
    labels: &[usize],
    n_mc: usize,
    rng: &mut Prng,
) -> Result<f64> {
    if test.n() == 0 || labels.len() != test.n() {
        return Err(Error::BadParams("test set and labels must match".into()));
    }
    let base = rng::substream_base(rng);
    let mut correct = 0usize;
    for i in 0..test.n() {
        let mut sub = rng::substream(base, i as u64);
        let (label, _) = classify(model, test.point(i), n_mc, &mut sub)?;
        if label == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.n() as f64)
}

/// Per-class precision/recall plus accuracy, as a plain text table.
pub fn classification_report(
    model: &SemiSupModel,
    test: &Dataset,
    labels: &[usize],
    n_mc: usize,
    rng: &mut Prng,
) -> Result<String> {
    use std::fmt::Write;
    let c = model.top.n_classes;
    let base = rng::substream_base(rng);
    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fng = vec![0usize; c];
    let mut correct = 0usize;
    for i in 0..test.n() {
        let mut sub = rng::substream(base, i as u64);
        let (pred, _) = classify(model, test.point(i), n_mc, &mut sub)?;
        if pred == labels[i] {
            tp[pred] += 1;
            correct += 1;
        } else {
            fp[pred] += 1;
            fng[labels[i]] += 1;
        }
    }
    let mut out = String::new();
    for y in 0..c {
        let precision = if tp[y] + fp[y] > 0 {
            tp[y] as f64 / (tp[y] + fp[y]) as f64
        } else {
            0.0
        };
        let recall = if tp[y] + fng[y] > 0 {
            tp[y] as f64 / (tp[y] + fng[y]) as f64
        } else {
            0.0
        };
        let _ = writeln!(out, "class {y} precision {precision:.4} recall {recall:.4}");
    }
    let _ = writeln!(out, "accuracy {:.4}", correct as f64 / test.n() as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::ModelSpec;
    use crate::metamodel::MetaModel;
    use crate::models::gmm::GmmParams;
    use ndarray::Array2;
    use crate::rng::seeded;
    use ndarray::array;
    use rand::Rng;

    fn four_cluster_labeled(
        n_unlabeled: usize,
        labels_per_class: usize,
        seed: u64,
    ) -> LabeledDataset {
        // Two classes, two tight clusters each, at the corners of a square.
        let centers = [
            ([3.0, 3.0], 0usize),
            ([-3.0, -3.0], 0),
            ([3.0, -3.0], 1),
            ([-3.0, 3.0], 1),
        ];
        let mut rng = seeded(seed);
        let draw = |center: [f64; 2], rng: &mut crate::rng::Prng| {
            let dx: f64 = rng.sample(rand_distr::StandardNormal);
            let dy: f64 = rng.sample(rand_distr::StandardNormal);
            [center[0] + 0.45 * dx, center[1] + 0.45 * dy]
        };
        let mut upts = Array2::zeros((n_unlabeled, 2));
        for i in 0..n_unlabeled {
            let (c, _) = centers[rng.random_range(0..4)];
            let p = draw(c, &mut rng);
            upts[[i, 0]] = p[0];
            upts[[i, 1]] = p[1];
        }
        let n_l = labels_per_class * 2;
        let mut lpts = Array2::zeros((n_l, 2));
        let mut labels = Vec::with_capacity(n_l);
        for i in 0..n_l {
            let (c, y) = centers[i % 4];
            let p = draw(c, &mut rng);
            lpts[[i, 0]] = p[0];
            lpts[[i, 1]] = p[1];
            labels.push(y);
        }
        LabeledDataset::new(
            Dataset::new(upts, Space::real(2)).unwrap(),
            Dataset::new(lpts, Space::real(2)).unwrap(),
            labels,
            2,
        )
        .unwrap()
    }

    fn identical_block_mixture(prior: &[f64]) -> ClassMixture {
        // Class blocks share means/variances/relative weights, so
        // log m(h, y) = ln prior_y + log m(h) pointwise.
        let c = prior.len();
        let r = 2usize;
        let mut weights = Array1::zeros(c * r);
        let mut means = Array2::zeros((c * r, 2));
        let mut variances = Array2::ones((c * r, 2));
        for y in 0..c {
            for j in 0..r {
                let idx = y * r + j;
                weights[idx] = prior[y] * if j == 0 { 0.25 } else { 0.75 };
                means[[idx, 0]] = if j == 0 { -1.0 } else { 1.5 };
                means[[idx, 1]] = 0.5;
                variances[[idx, 0]] = 0.8;
            }
        }
        ClassMixture::new(
            GmmModel::new(GmmParams {
                weights,
                means,
                variances,
            })
            .unwrap(),
            c,
            r,
        )
        .unwrap()
    }

    #[test]
    fn class_posterior_rows_sum_to_one() {
        let top = identical_block_mixture(&[0.3, 0.7]);
        let mut rng = seeded(1);
        for _ in 0..20 {
            let h = array![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            let q = top.class_posterior(h.view()).unwrap();
            assert!((q.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_prior_always_predicts_that_class() {
        let mut rng = seeded(2);
        let v = crate::models::VaeModel::new(Space::real(2), 2, &[4], &mut rng).unwrap();
        let lower = CascadeModel::single(v.into());
        let top = identical_block_mixture(&[1.0, 0.0]);
        let model = SemiSupModel { lower, top };
        let (label, posterior) = classify(&model, array![0.5, -0.5].view(), 16, &mut rng).unwrap();
        assert_eq!(label, 0);
        assert!((posterior[0] - 1.0).abs() < 1e-12);
        assert!(posterior[1].abs() < 1e-12);
    }

    #[test]
    fn symmetric_posterior_breaks_ties_to_the_lowest_label() {
        let mut rng = seeded(3);
        let v = crate::models::VaeModel::new(Space::real(2), 2, &[4], &mut rng).unwrap();
        let lower = CascadeModel::single(v.into());
        // Identical class blocks with a 50/50 prior: posterior is exactly
        // (0.5, 0.5) for every h.
        let top = identical_block_mixture(&[0.5, 0.5]);
        let model = SemiSupModel { lower, top };
        let (label, posterior) = classify(&model, array![0.3, 0.3].view(), 8, &mut rng).unwrap();
        assert_eq!(label, 0);
        assert!((posterior[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn joint_reduces_to_marginal_plus_log_prior_for_identical_blocks() {
        let top = identical_block_mixture(&[0.25, 0.75]);
        let mut rng = seeded(4);
        for _ in 0..20 {
            let h = array![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            for y in 0..2 {
                let joint = top.log_joint(h.view(), y).unwrap();
                let marginal = top.log_marginal(h.view()).unwrap();
                let prior = top.class_prior()[y];
                assert!(
                    (joint - marginal - prior.ln()).abs() < 1e-12,
                    "joint {joint} marginal {marginal} prior {prior}"
                );
            }
        }
    }

    fn quick_lower_spec() -> StageSpec {
        StageSpec {
            model: ModelSpec::Vae {
                latent: 2,
                hidden_layers: vec![8],
            },
            train: TrainConfig {
                epochs: 10,
                learning_rate: 0.01,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn beta_zero_training_is_bitwise_identical_to_the_unsupervised_path() {
        let data = four_cluster_labeled(120, 5, 11);
        let cfg = SemiSupConfig {
            alpha: 1.0,
            beta: 0.0,
            lower_on_unlabeled_only: false,
        };
        let top_spec = TopSpec {
            comps_per_class: 2,
            train: TrainConfig::default(),
        };
        let model = semisup_train(&data, &[quick_lower_spec()], &top_spec, &cfg, 8, &mut seeded(21))
            .unwrap();

        // The unsupervised path with the same seed: same lower chain, then a
        // plain 4-component mixture on the same inferred representations.
        let mut rng = seeded(21);
        let (lower, _) = greedy_train(&data.unlabeled, &[quick_lower_spec()], 8, &mut rng).unwrap();
        let source = crate::cascade::InferredSource::new(&lower, &data.unlabeled, true, &mut rng);
        let init = initial_params(&source, 4, GmmInit::KmeansPp, &mut rng).unwrap();
        let fit = fit_em_engine(&source, init, None, 100, 1e-6, &mut rng).unwrap();
        assert_eq!(model.top.gmm.params.weights, fit.params.weights);
        assert_eq!(model.top.gmm.params.means, fit.params.means);
        assert_eq!(model.top.gmm.params.variances, fit.params.variances);
    }

    #[test]
    fn permuting_labeled_rows_trains_the_same_top_bitwise() {
        let data = four_cluster_labeled(80, 6, 13);
        let permuted = {
            let n = data.labeled.n();
            let order: Vec<usize> = (0..n).rev().collect();
            let labeled = data.labeled.subset(&order).unwrap();
            let labels = order.iter().map(|&i| data.labels[i]).collect();
            LabeledDataset::new(data.unlabeled.clone(), labeled, labels, 2).unwrap()
        };
        let cfg = SemiSupConfig {
            alpha: 0.6,
            beta: 0.4,
            lower_on_unlabeled_only: false,
        };
        let top_spec = TopSpec {
            comps_per_class: 2,
            train: TrainConfig::default(),
        };
        let a = semisup_train(&data, &[quick_lower_spec()], &top_spec, &cfg, 4, &mut seeded(31))
            .unwrap();
        let b = semisup_train(&permuted, &[quick_lower_spec()], &top_spec, &cfg, 4, &mut seeded(31))
            .unwrap();
        assert_eq!(a.top.gmm.params.weights, b.top.gmm.params.weights);
        assert_eq!(a.top.gmm.params.means, b.top.gmm.params.means);
        assert_eq!(a.top.gmm.params.variances, b.top.gmm.params.variances);
    }

    #[test]
    fn separable_task_reaches_high_accuracy() {
        let data = four_cluster_labeled(400, 10, 17);
        let cfg = SemiSupConfig::proportional(&data);
        let top_spec = TopSpec {
            comps_per_class: 2,
            train: TrainConfig::default(),
        };
        let mut rng = seeded(41);
        let model = semisup_train(
            &data,
            &[StageSpec {
                model: ModelSpec::Vae {
                    latent: 2,
                    hidden_layers: vec![16],
                },
                train: TrainConfig {
                    epochs: 30,
                    learning_rate: 0.01,
                    batch_size: 32,
                    ..TrainConfig::default()
                },
            }],
            &top_spec,
            &cfg,
            16,
            &mut rng,
        )
        .unwrap();
        let test = four_cluster_labeled(2, 100, 99);
        let acc = accuracy_eval(&model, &test.labeled, &test.labels, 16, &mut rng).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn all_labeled_single_class_top_term_is_marginal_term_plus_log_prior() {
        // alpha = 0, every label is class 1, and a top with identical class
        // blocks: the top bound term equals the unsupervised top term plus
        // ln prior(class 1), with the very same draws.
        let base = four_cluster_labeled(5, 20, 23);
        let all_one = LabeledDataset::new(
            base.unlabeled.clone(),
            base.labeled.clone(),
            vec![1; base.labeled.n()],
            2,
        )
        .unwrap();
        let mut rng = seeded(51);
        let v = crate::models::VaeModel::new(Space::real(2), 2, &[6], &mut rng).unwrap();
        let lower = CascadeModel::single(v.into());
        let top = identical_block_mixture(&[0.25, 0.75]);
        let model = SemiSupModel {
            lower: lower.clone(),
            top: top.clone(),
        };
        let cfg = SemiSupConfig {
            alpha: 0.0,
            beta: 1.0,
            lower_on_unlabeled_only: false,
        };
        let jn = bound_term_top_semisup(&model, &all_one, &cfg, 8, &mut seeded(61)).unwrap();

        // The unsupervised top term over the same labeled rows: same chain,
        // flat-mixture top, same seed (and therefore the same draws; the
        // labeled rows are canonically sorted in both paths).
        let (sorted_labeled, _) = canonical_labeled(&all_one);
        let mut grown = lower;
        grown.push(MetaModel::Gmm(top.gmm.clone())).unwrap();
        let ln = crate::cascade::bound_term_top(&grown, &sorted_labeled, 8, &mut seeded(61)).unwrap();
        let prior = top.class_prior()[1];
        assert!(
            (jn.value - ln.value - prior.ln()).abs() < 1e-9,
            "top term {} vs marginal term {} + ln prior {}",
            jn.value,
            ln.value,
            prior.ln()
        );
    }

    #[test]
    fn clamped_objective_is_monotone() {
        let data = four_cluster_labeled(60, 8, 29);
        let cfg = SemiSupConfig::proportional(&data);
        let (pooled, labels) = pooled_data(&data, &cfg).unwrap();
        let mut masks: Vec<Option<std::ops::Range<usize>>> = vec![None; data.unlabeled.n()];
        masks.extend(labels.iter().map(|&y| Some(y * 2..(y + 1) * 2)));
        let source = crate::train::FixedSource::new(&pooled);
        let mut rng = seeded(71);
        let init = initial_params(&source, 4, GmmInit::KmeansPp, &mut rng).unwrap();
        let fit = fit_em_engine(&source, init, Some(&masks), 40, 1e-9, &mut rng).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective dropped: {} -> {}", w[0], w[1]);
        }
    }
// temporary probe appended to semisup tests


}

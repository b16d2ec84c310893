//! Diagonal-covariance Gaussian mixtures with weighted EM.
//!
//! The EM engine accepts an optional per-row component mask so the
//! class-conditional mixture can clamp labeled rows to their class block
//! while sharing every other line of arithmetic with the plain fit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::metamodel::LogLikEstimate;
use crate::numerics::{diag_gaussian_log_density, log_sum_exp};
use crate::rng::Prng;
use crate::space::Space;
use crate::train::{StageSource, TrainConfig};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GmmParams {
    /// Mixture weights, a simplex vector of length K.
    pub weights: Array1<f64>,
    /// K x d component means.
    pub means: Array2<f64>,
    /// K x d diagonal variances, floored at [`VARIANCE_FLOOR`].
    pub variances: Array2<f64>,
}

impl GmmParams {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.means.nrows() != k || self.variances.nrows() != k {
            return Err(Error::BadParams("component count mismatch".into()));
        }
        if self.means.ncols() != self.variances.ncols() {
            return Err(Error::BadParams("mean/variance dim mismatch".into()));
        }
        if (self.weights.sum() - 1.0).abs() > 1e-12 || self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::BadParams("weights must form a simplex".into()));
        }
        if self.variances.iter().any(|&v| v < VARIANCE_FLOOR) {
            return Err(Error::BadParams("variance below floor".into()));
        }
        if self.means.iter().chain(self.variances.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mixture parameters".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GmmModel {
    pub params: GmmParams,
    visible: Space,
    hidden: Space,
}

impl GmmModel {
    pub fn new(params: GmmParams) -> Result<Self> {
        params.validate()?;
        let visible = Space::real(params.dim());
        let hidden = Space::categorical(params.k());
        Ok(GmmModel {
            params,
            visible,
            hidden,
        })
    }

    pub fn visible_space(&self) -> Space {
        self.visible
    }

    pub fn hidden_space(&self) -> Space {
        self.hidden
    }

    fn component_log_densities(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let p = &self.params;
        (0..p.k())
            .map(|k| {
                p.weights[k].ln()
                    + diag_gaussian_log_density(
                        x.as_slice().expect("contiguous point"),
                        p.means.row(k).as_slice().expect("contiguous mean"),
                        p.variances.row(k).as_slice().expect("contiguous variance"),
                    )
            })
            .collect()
    }

    /// Exact log marginal density of a visible point.
    pub fn log_density(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.visible.check_dim(x)?;
        let v = log_sum_exp(&self.component_log_densities(x));
        if !v.is_finite() {
            return Err(Error::NonFinite("mixture log density".into()));
        }
        Ok(v)
    }

    /// Exact posterior over component indices.
    pub fn responsibilities(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.visible.check_dim(x)?;
        let logs = self.component_log_densities(x);
        let z = log_sum_exp(&logs);
        Ok(Array1::from_iter(logs.iter().map(|&l| (l - z).exp())))
    }

    pub fn log_marginal_visible(&self, x: ArrayView1<f64>) -> Result<LogLikEstimate> {
        Ok(LogLikEstimate::exact(self.log_density(x)?))
    }

    pub fn log_marginal_hidden(&self, h: ArrayView1<f64>) -> Result<LogLikEstimate> {
        self.hidden.check_point(h)?;
        Ok(LogLikEstimate::exact(self.params.weights[h[0] as usize].ln()))
    }

    pub fn sample_posterior(&self, x: ArrayView1<f64>, rng: &mut Prng) -> Result<Array1<f64>> {
        let resp = self.responsibilities(x)?;
        let idx = sample_categorical(resp.view(), rng);
        Ok(Array1::from_elem(1, idx as f64))
    }

    pub fn sample_conditional_visible(
        &self,
        h: ArrayView1<f64>,
        rng: &mut Prng,
    ) -> Result<Array1<f64>> {
        self.hidden.check_point(h)?;
        let k = h[0] as usize;
        let d = self.params.dim();
        let mut out = Array1::zeros(d);
        for j in 0..d {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            out[j] = self.params.means[[k, j]] + self.params.variances[[k, j]].sqrt() * z;
        }
        Ok(out)
    }

    pub fn sample_prior_hidden(&self, rng: &mut Prng) -> Array1<f64> {
        let idx = sample_categorical(self.params.weights.view(), rng);
        Array1::from_elem(1, idx as f64)
    }
}

/// Draw an index proportionally to the given nonnegative weights.
pub(crate) fn sample_categorical(weights: ArrayView1<f64>, rng: &mut Prng) -> usize {
    let total: f64 = weights.sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// All components near N(0, I): component 0 exactly, the rest with a tiny
/// deterministic jitter so EM can tell them apart. The initial mixture's
/// log density stays within 1e-6 of the standard normal everywhere a test
/// will look.
pub fn gmm_init_cover_standard_normal(k: usize, d: usize) -> GmmParams {
    assert!(k >= 1 && d >= 1);
    let mut means = Array2::zeros((k, d));
    let mut jitter_rng = crate::rng::seeded(0x9e3779b97f4a7c15);
    for c in 1..k {
        for j in 0..d {
            means[[c, j]] = (jitter_rng.random::<f64>() - 0.5) * 2e-8;
        }
    }
    GmmParams {
        weights: Array1::from_elem(k, 1.0 / k as f64),
        means,
        variances: Array2::ones((k, d)),
    }
}

/// Weighted k-means++ seeding: the first center is drawn by weight, later
/// centers by weight times squared distance to the nearest chosen center.
pub(crate) fn kmeans_pp_means(
    rows: ArrayView2<f64>,
    weights: &Array1<f64>,
    k: usize,
    rng: &mut Prng,
) -> Array2<f64> {
    let n = rows.nrows();
    let d = rows.ncols();
    let mut means = Array2::zeros((k, d));
    let first = sample_categorical(weights.view(), rng);
    means.row_mut(0).assign(&rows.row(first));
    let mut dist2 = Array1::from_elem(n, f64::INFINITY);
    for c in 1..k {
        for i in 0..n {
            let prev = means.row(c - 1);
            let row = rows.row(i);
            let mut sq = 0.0;
            for j in 0..d {
                let diff = row[j] - prev[j];
                sq += diff * diff;
            }
            if sq < dist2[i] {
                dist2[i] = sq;
            }
        }
        let scores = Array1::from_iter((0..n).map(|i| weights[i] * dist2[i]));
        let idx = if scores.sum() > 0.0 {
            sample_categorical(scores.view(), rng)
        } else {
            sample_categorical(weights.view(), rng)
        };
        means.row_mut(c).assign(&rows.row(idx));
    }
    means
}

pub(crate) fn weighted_variance(rows: ArrayView2<f64>, weights: &Array1<f64>) -> Array1<f64> {
    let n = rows.nrows();
    let d = rows.ncols();
    let total: f64 = weights.sum();
    let mut mean = Array1::zeros(d);
    for i in 0..n {
        for j in 0..d {
            mean[j] += weights[i] * rows[[i, j]];
        }
    }
    mean /= total;
    let mut var = Array1::zeros(d);
    for i in 0..n {
        for j in 0..d {
            let diff = rows[[i, j]] - mean[j];
            var[j] += weights[i] * diff * diff;
        }
    }
    var /= total;
    var.mapv_inplace(|v| v.max(VARIANCE_FLOOR));
    var
}

/// Allowed component range per row; `None` means all components.
pub(crate) type RowMask<'a> = Option<&'a [Option<std::ops::Range<usize>>]>;

pub(crate) struct EmFit {
    pub params: GmmParams,
    pub trace: Vec<f64>,
    pub reseeded: bool,
}

/// Diagnostics of one EM fit.
#[derive(Clone, Debug)]
pub struct FitDiagnostics {
    /// Weighted mean log objective at the start of each iteration plus one
    /// final value; consecutive entries are non-decreasing on fixed data.
    pub trace: Vec<f64>,
    /// Whether any component lost its responsibility mass and was re-seeded
    /// (which restarts the monotone segment).
    pub reseeded: bool,
}

/// The weighted EM loop. `row_masks` restricts each row's responsibilities
/// to a component range (clamped rows); the objective is then the weighted
/// mean of log sum over allowed components, which plain fits reduce to the
/// ordinary log-likelihood.
pub(crate) fn fit_em_engine(
    source: &dyn StageSource,
    init: GmmParams,
    row_masks: RowMask<'_>,
    max_iters: usize,
    tol: f64,
    rng: &mut Prng,
) -> Result<EmFit> {
    let k = init.k();
    let d = init.dim();
    let weights = source.weights();
    let n = source.len();
    if let Some(masks) = row_masks {
        if masks.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: masks.len(),
            });
        }
    }
    let total_weight: f64 = weights.sum();
    let mut params = init;
    let mut trace = Vec::with_capacity(max_iters + 1);
    let mut reseeds_left = vec![true; k];
    let mut reseeded = false;

    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 0..max_iters {
        let rows = source.epoch_rows(iter)?;
        if rows.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rows.ncols(),
            });
        }
        // E step: masked responsibilities and the current objective.
        let mut resp = Array2::zeros((n, k));
        let mut ll_acc = 0.0;
        for i in 0..n {
            let range = match row_masks.and_then(|m| m[i].clone()) {
                Some(r) => r,
                None => 0..k,
            };
            let x = rows.row(i);
            let logs: Vec<f64> = range
                .clone()
                .map(|c| {
                    params.weights[c].ln()
                        + diag_gaussian_log_density(
                            x.as_slice().expect("contiguous row"),
                            params.means.row(c).as_slice().expect("contiguous mean"),
                            params.variances.row(c).as_slice().expect("contiguous var"),
                        )
                })
                .collect();
            let z = log_sum_exp(&logs);
            if !z.is_finite() {
                return Err(Error::NonFinite("EM objective".into()));
            }
            ll_acc += weights[i] * z;
            for (off, c) in range.enumerate() {
                resp[[i, c]] = (logs[off] - z).exp();
            }
        }
        let ll = ll_acc / total_weight;
        trace.push(ll);

        // M step: weighted closed-form updates.
        let mut mass = Array1::<f64>::zeros(k);
        for i in 0..n {
            for c in 0..k {
                mass[c] += weights[i] * resp[[i, c]];
            }
        }
        let mut degenerate: Vec<usize> = (0..k)
            .filter(|&c| mass[c] < total_weight * 1e-12)
            .collect();
        if !degenerate.is_empty() {
            for &c in &degenerate {
                if !reseeds_left[c] {
                    return Err(Error::DegenerateComponent { component: c });
                }
            }
            reseeded = true;
            let var = weighted_variance(rows.view(), &weights);
            for c in degenerate.drain(..) {
                reseeds_left[c] = false;
                let idx = sample_categorical(weights.view(), rng);
                for j in 0..d {
                    let jit: f64 = rng.random::<f64>() - 0.5;
                    params.means[[c, j]] = rows[[idx, j]] + 1e-3 * jit * var[j].sqrt();
                    params.variances[[c, j]] = var[j];
                }
                params.weights[c] = 1.0 / k as f64;
            }
            let wsum = params.weights.sum();
            params.weights.mapv_inplace(|w| w / wsum);
            prev_ll = f64::NEG_INFINITY;
            continue;
        }
        for c in 0..k {
            params.weights[c] = mass[c] / total_weight;
            for j in 0..d {
                let mut m = 0.0;
                for i in 0..n {
                    m += weights[i] * resp[[i, c]] * rows[[i, j]];
                }
                params.means[[c, j]] = m / mass[c];
            }
            for j in 0..d {
                let mut v: f64 = 0.0;
                for i in 0..n {
                    let diff = rows[[i, j]] - params.means[[c, j]];
                    v += weights[i] * resp[[i, c]] * diff * diff;
                }
                params.variances[[c, j]] = (v / mass[c]).max(VARIANCE_FLOOR);
            }
        }

        if !source.resamples() && (ll - prev_ll).abs() < tol && iter > 0 {
            break;
        }
        prev_ll = ll;
    }

    // Final objective after the last M step, on a fresh epoch index.
    let rows = source.epoch_rows(max_iters)?;
    let mut ll_acc = 0.0;
    for i in 0..n {
        let range = match row_masks.and_then(|m| m[i].clone()) {
            Some(r) => r,
            None => 0..k,
        };
        let x = rows.row(i);
        let logs: Vec<f64> = range
            .map(|c| {
                params.weights[c].ln()
                    + diag_gaussian_log_density(
                        x.as_slice().expect("contiguous row"),
                        params.means.row(c).as_slice().expect("contiguous mean"),
                        params.variances.row(c).as_slice().expect("contiguous var"),
                    )
            })
            .collect();
        ll_acc += weights[i] * log_sum_exp(&logs);
    }
    trace.push(ll_acc / total_weight);

    Ok(EmFit {
        params,
        trace,
        reseeded,
    })
}

/// How the mixture is initialized before EM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GmmInit {
    /// Weighted k-means++ seeding.
    KmeansPp,
    /// Start at (a jittered copy of) the standard normal.
    CoverStandardNormal,
}

/// Seed initial parameters from a source's first epoch.
pub(crate) fn initial_params(
    source: &dyn StageSource,
    k: usize,
    init: GmmInit,
    rng: &mut Prng,
) -> Result<GmmParams> {
    match init {
        GmmInit::CoverStandardNormal => Ok(gmm_init_cover_standard_normal(k, source.dim())),
        GmmInit::KmeansPp => {
            let rows = source.epoch_rows(0)?;
            let weights = source.weights();
            let means = kmeans_pp_means(rows.view(), &weights, k, rng);
            let var = weighted_variance(rows.view(), &weights);
            let mut variances = Array2::zeros((k, source.dim()));
            for c in 0..k {
                variances.row_mut(c).assign(&var);
            }
            Ok(GmmParams {
                weights: Array1::from_elem(k, 1.0 / k as f64),
                means,
                variances,
            })
        }
    }
}

/// Weighted EM fit of a K-component mixture.
pub fn gmm_fit_em(
    data: &crate::data::Dataset,
    k: usize,
    init: GmmInit,
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<GmmModel> {
    let source = crate::train::FixedSource::new(data);
    gmm_fit_em_source(&source, k, init, cfg, rng).map(|(m, _)| m)
}

/// As [`gmm_fit_em`], for an arbitrary stage source; also returns the fit
/// diagnostics.
pub fn gmm_fit_em_source(
    source: &dyn StageSource,
    k: usize,
    init: GmmInit,
    cfg: &TrainConfig,
    rng: &mut Prng,
) -> Result<(GmmModel, FitDiagnostics)> {
    if k == 0 {
        return Err(Error::BadParams("need at least one component".into()));
    }
    if source.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let params = initial_params(source, k, init, rng)?;
    let fit = fit_em_engine(source, params, None, cfg.em_max_iters, cfg.em_tol, rng)?;
    Ok((
        GmmModel::new(fit.params)?,
        FitDiagnostics {
            trace: fit.trace,
            reseeded: fit.reseeded,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::numerics::LN_2PI;
    use crate::rng::seeded;
    use ndarray::array;

    fn standard_normal_gmm(d: usize) -> GmmModel {
        GmmModel::new(gmm_init_cover_standard_normal(1, d)).unwrap()
    }

    #[test]
    fn single_gaussian_log_density_at_origin() {
        let m = standard_normal_gmm(2);
        let v = m.log_density(array![0.0, 0.0].view()).unwrap();
        assert!((v - (-LN_2PI)).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn cover_init_matches_standard_normal_everywhere() {
        let params = gmm_init_cover_standard_normal(10, 20);
        let m = GmmModel::new(params).unwrap();
        let origin = Array1::zeros(20);
        let v = m.log_density(origin.view()).unwrap();
        assert!((v - (-10.0 * LN_2PI)).abs() < 1e-6, "got {v}");
        let mut rng = seeded(4);
        for _ in 0..20 {
            let h = Array1::from_iter((0..20).map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                3.0 * z
            }));
            let got = m.log_density(h.view()).unwrap();
            let want = crate::numerics::std_normal_log_density(h.as_slice().unwrap());
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn k1_fit_recovers_weighted_moments() {
        let pts = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 4.0]];
        let ds = Dataset::new(pts.clone(), Space::real(2)).unwrap();
        let cfg = TrainConfig::default();
        let m = gmm_fit_em(&ds, 1, GmmInit::KmeansPp, &cfg, &mut seeded(1)).unwrap();
        let mean = pts.sum_axis(ndarray::Axis(0)) / 4.0;
        for j in 0..2 {
            assert!((m.params.means[[0, j]] - mean[j]).abs() < 1e-10);
            let var = pts.column(j).iter().map(|v| (v - mean[j]) * (v - mean[j])).sum::<f64>() / 4.0;
            assert!((m.params.variances[[0, j]] - var).abs() < 1e-10);
        }
    }

    #[test]
    fn equal_weights_match_unweighted_bitwise() {
        let (ds, _) =
            crate::data::make_synthetic(&crate::data::SynthKind::two_cluster_default(), 60, 7)
                .unwrap();
        let weighted = ds
            .replace_weights(Array1::from_elem(ds.n(), 2.5))
            .unwrap();
        let cfg = TrainConfig::default();
        let a = gmm_fit_em(&ds, 2, GmmInit::KmeansPp, &cfg, &mut seeded(3)).unwrap();
        let b = gmm_fit_em(&weighted, 2, GmmInit::KmeansPp, &cfg, &mut seeded(3)).unwrap();
        assert_eq!(a.params.means, b.params.means);
        assert_eq!(a.params.variances, b.params.variances);
        assert_eq!(a.params.weights, b.params.weights);
    }

    #[test]
    fn two_clusters_are_recovered() {
        let (ds, _) =
            crate::data::make_synthetic(&crate::data::SynthKind::two_cluster_default(), 400, 21)
                .unwrap();
        let cfg = TrainConfig::default();
        let m = gmm_fit_em(&ds, 2, GmmInit::KmeansPp, &cfg, &mut seeded(5)).unwrap();
        let mut found = [false, false];
        for c in 0..2 {
            let mean = m.params.means.row(c);
            if (mean[0] - 3.0).abs() < 0.1 && (mean[1] - 3.0).abs() < 0.1 {
                found[0] = true;
            }
            if (mean[0] + 3.0).abs() < 0.1 && (mean[1] + 3.0).abs() < 0.1 {
                found[1] = true;
            }
        }
        assert!(found[0] && found[1], "means: {:?}", m.params.means);
    }

    #[test]
    fn em_objective_is_monotone() {
        let (ds, _) =
            crate::data::make_synthetic(&crate::data::SynthKind::two_cluster_default(), 150, 13)
                .unwrap();
        let cfg = TrainConfig {
            em_max_iters: 40,
            ..TrainConfig::default()
        };
        let source = crate::train::FixedSource::new(&ds);
        let (_, diag) =
            gmm_fit_em_source(&source, 3, GmmInit::KmeansPp, &cfg, &mut seeded(17)).unwrap();
        assert!(!diag.reseeded);
        for w in diag.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "objective dropped: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn em_from_cover_init_never_falls_below_standard_normal() {
        let mut rng = seeded(23);
        let pts = Array2::from_shape_fn((200, 2), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let ds = Dataset::new(pts, Space::real(2)).unwrap();
        let base: f64 = (0..ds.n())
            .map(|i| crate::numerics::std_normal_log_density(ds.point(i).as_slice().unwrap()))
            .sum::<f64>()
            / ds.n() as f64;
        let cfg = TrainConfig::default();
        let source = crate::train::FixedSource::new(&ds);
        let (_, diag) =
            gmm_fit_em_source(&source, 4, GmmInit::CoverStandardNormal, &cfg, &mut seeded(29))
                .unwrap();
        for v in &diag.trace {
            assert!(*v >= base - 1e-6, "objective {v} fell below base {base}");
        }
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let params = GmmParams {
            weights: array![0.3, 0.7],
            means: array![[0.0, 0.0], [4.0, 4.0]],
            variances: array![[1.0, 1.0], [2.0, 0.5]],
        };
        let m = GmmModel::new(params).unwrap();
        let mut rng = seeded(2);
        for _ in 0..50 {
            let x = array![rng.random::<f64>() * 8.0 - 2.0, rng.random::<f64>() * 8.0 - 2.0];
            let r = m.responsibilities(x.view()).unwrap();
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_at_far_component_mean_is_decisive() {
        let params = GmmParams {
            weights: array![0.5, 0.5],
            means: array![[0.0, 0.0], [20.0, 20.0]],
            variances: array![[1.0, 1.0], [1.0, 1.0]],
        };
        let m = GmmModel::new(params).unwrap();
        let r = m.responsibilities(array![20.0, 20.0].view()).unwrap();
        assert!(r[1] >= 0.999, "responsibility {r}");
        let mut rng = seeded(8);
        let mut hits = 0usize;
        for _ in 0..2000 {
            let h = m.sample_posterior(array![20.0, 20.0].view(), &mut rng).unwrap();
            if h[0] == 1.0 {
                hits += 1;
            }
        }
        assert!(hits >= 1998, "hits {hits}");
    }

    #[test]
    fn conditional_moments_match_component() {
        let params = GmmParams {
            weights: array![0.4, 0.6],
            means: array![[1.0, -2.0], [5.0, 5.0]],
            variances: array![[0.25, 4.0], [1.0, 1.0]],
        };
        let m = GmmModel::new(params.clone()).unwrap();
        let mut rng = seeded(31);
        let n = 100_000;
        let mut sum = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        let h = array![0.0];
        for _ in 0..n {
            let x = m.sample_conditional_visible(h.view(), &mut rng).unwrap();
            for j in 0..2 {
                sum[j] += x[j];
                sq[j] += x[j] * x[j];
            }
        }
        for j in 0..2 {
            let mean = sum[j] / n as f64;
            let var = sq[j] / n as f64 - mean * mean;
            let want_mean = params.means[[0, j]];
            let want_var = params.variances[[0, j]];
            let se_mean = (want_var / n as f64).sqrt();
            assert!((mean - want_mean).abs() < 3.0 * se_mean, "mean {mean} vs {want_mean}");
            // Var(s^2) ~ 2 var^2 / n for Gaussians.
            let se_var = (2.0 * want_var * want_var / n as f64).sqrt();
            assert!((var - want_var).abs() < 4.0 * se_var, "var {var} vs {want_var}");
        }
    }

    #[test]
    fn prior_hidden_frequencies_match_weights() {
        let params = GmmParams {
            weights: array![0.3, 0.7],
            means: array![[0.0], [1.0]],
            variances: array![[1.0], [1.0]],
        };
        let m = GmmModel::new(params).unwrap();
        let mut rng = seeded(12);
        let n = 100_000;
        let mut ones = 0usize;
        for _ in 0..n {
            if m.sample_prior_hidden(&mut rng)[0] == 1.0 {
                ones += 1;
            }
        }
        let freq = ones as f64 / n as f64;
        let se = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.7).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn hidden_marginal_is_log_weight() {
        let params = GmmParams {
            weights: array![0.25, 0.25, 0.25, 0.25],
            means: Array2::zeros((4, 2)),
            variances: Array2::ones((4, 2)),
        };
        let m = GmmModel::new(params).unwrap();
        let est = m.log_marginal_hidden(array![2.0].view()).unwrap();
        assert!(est.is_exact);
        assert!((est.value - 0.25f64.ln()).abs() < 1e-12);
        // Exact normalization over the hidden states.
        let total: f64 = (0..4)
            .map(|i| m.log_marginal_hidden(array![i as f64].view()).unwrap().value.exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

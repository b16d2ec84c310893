//! Experiment driver: runs a configured mode end to end, streaming one
//! self-contained metrics record per stage and writing per-stage model
//! checkpoints. Everything except wall-clock fields is reproducible bit for
//! bit from (config, seed).

use ndarray::{Array2, ArrayView2};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::cascade::{
    bound_terms, greedy_train, incorporate_next, BoundReport, CascadeModel, ModelSpec, StageSpec,
};
use crate::config::{DataSource, ExperimentConfig, Mode};
use crate::data::{load_dataset, make_synthetic, save_dataset, Dataset, LabeledDataset, SynthKind};
use crate::error::{Error, Result};
use crate::metamodel::MetaModel;
use crate::models::gmm::GmmInit;
use crate::multiplicative::{
    estimate_log_partition, hybrid_build, mcmc_sample, multiplicative_train, unnormalized_log_density,
    ChainConfig, ComponentModel, MultiplicativeEnsemble,
};
use crate::rng::{self, Prng};
use crate::semisup::{semisup_train, SemiSupConfig, SemiSupModel, TopSpec};
use crate::space::SpaceKind;
use crate::train::{FixedSource, TrainConfig};

/// One appendable metrics line. Field order is fixed; `ts_ms` and the
/// `*_s` wall-clock fields are the only run-dependent parts.
#[derive(Clone, Debug)]
pub struct MetricsRecord {
    pub timestamp_ms: u128,
    pub stage: usize,
    pub train_seconds: f64,
    pub density_seconds: f64,
    pub sampling_seconds: f64,
    pub terms: Vec<(f64, f64)>,
    pub total: f64,
    pub total_std_err: f64,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "metric ts_ms={} stage={} train_s={:.6} density_s={:.6} sample_s={:.6} total={} total_se={}",
            self.timestamp_ms,
            self.stage,
            self.train_seconds,
            self.density_seconds,
            self.sampling_seconds,
            self.total,
            self.total_std_err
        );
        line.push_str(" terms=");
        for (i, (v, se)) in self.terms.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{v}:{se}");
        }
        line
    }

    pub fn parse_line(line: &str) -> Result<MetricsRecord> {
        let mut rec = MetricsRecord {
            timestamp_ms: 0,
            stage: 0,
            train_seconds: 0.0,
            density_seconds: 0.0,
            sampling_seconds: 0.0,
            terms: Vec::new(),
            total: 0.0,
            total_std_err: 0.0,
        };
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("metric") {
            return Err(Error::format(1, "metrics line must start with 'metric'"));
        }
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::format(1, format!("bad metrics token '{tok}'")))?;
            match k {
                "ts_ms" => rec.timestamp_ms = v.parse().map_err(|_| Error::format(1, "bad ts"))?,
                "stage" => rec.stage = v.parse().map_err(|_| Error::format(1, "bad stage"))?,
                "train_s" => {
                    rec.train_seconds = v.parse().map_err(|_| Error::format(1, "bad train_s"))?
                }
                "density_s" => {
                    rec.density_seconds = v.parse().map_err(|_| Error::format(1, "bad density_s"))?
                }
                "sample_s" => {
                    rec.sampling_seconds = v.parse().map_err(|_| Error::format(1, "bad sample_s"))?
                }
                "total" => rec.total = v.parse().map_err(|_| Error::format(1, "bad total"))?,
                "total_se" => {
                    rec.total_std_err = v.parse().map_err(|_| Error::format(1, "bad total_se"))?
                }
                "terms" => {
                    for pair in v.split(',').filter(|p| !p.is_empty()) {
                        let (a, b) = pair
                            .split_once(':')
                            .ok_or_else(|| Error::format(1, "bad term pair"))?;
                        rec.terms.push((
                            a.parse().map_err(|_| Error::format(1, "bad term value"))?,
                            b.parse().map_err(|_| Error::format(1, "bad term se"))?,
                        ));
                    }
                }
                other => return Err(Error::format(1, format!("unknown metrics field '{other}'"))),
            }
        }
        Ok(rec)
    }

    /// Equality of everything except timestamps and wall-clock fields.
    pub fn values_equal(&self, other: &MetricsRecord) -> bool {
        self.stage == other.stage
            && self.total.to_bits() == other.total.to_bits()
            && self.total_std_err.to_bits() == other.total_std_err.to_bits()
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .zip(&other.terms)
                .all(|(a, b)| a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits())
    }
}

fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn report_terms(report: &BoundReport) -> Vec<(f64, f64)> {
    report.terms.iter().map(|t| (t.value, t.std_err)).collect()
}

/// Everything a finished run leaves behind.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub metrics: Vec<MetricsRecord>,
}

struct MetricsSink {
    path: PathBuf,
    records: Vec<MetricsRecord>,
    last_ts: u128,
}

impl MetricsSink {
    fn new(path: PathBuf) -> Result<Self> {
        std::fs::write(&path, "")?;
        Ok(MetricsSink {
            path,
            records: Vec::new(),
            last_ts: 0,
        })
    }

    fn push(&mut self, mut rec: MetricsRecord) -> Result<()> {
        // Keep timestamps monotone within the run.
        rec.timestamp_ms = rec.timestamp_ms.max(self.last_ts);
        self.last_ts = rec.timestamp_ms;
        let mut line = rec.to_line();
        line.push('\n');
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new().append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        self.records.push(rec);
        Ok(())
    }
}

/// Load or synthesize the run's dataset; synthetic data and its ground-truth
/// manifest are written next to the run outputs.
fn materialize_data(cfg: &ExperimentConfig, out: &Path) -> Result<(Dataset, Option<LabeledDataset>)> {
    match &cfg.data {
        DataSource::Path(p) => {
            let (ds, labels) = load_dataset(Path::new(p))?;
            let labeled = match labels {
                Some(ls) => {
                    let n_classes = ls.iter().copied().max().unwrap_or(0) + 1;
                    Some(LabeledDataset::new(ds.clone(), ds.clone(), ls, n_classes)?)
                }
                None => None,
            };
            Ok((ds, labeled))
        }
        DataSource::Synth {
            kind,
            n,
            labels_per_class,
        } => {
            let (ds, manifest) = make_synthetic(kind, *n, cfg.seed)?;
            save_dataset(&ds, &out.join("data.gbds"))?;
            std::fs::write(out.join("data.gbds.manifest"), manifest)?;
            let labeled = if cfg.mode == Mode::SemiSup {
                Some(synth_labeled(kind, ds.clone(), *labels_per_class, cfg)?)
            } else {
                None
            };
            Ok((ds, labeled))
        }
    }
}

/// For semi-supervised synthetic runs: labels follow the generating mixture
/// component, grouped into two classes by component parity.
fn synth_labeled(
    kind: &SynthKind,
    unlabeled: Dataset,
    labels_per_class: usize,
    cfg: &ExperimentConfig,
) -> Result<LabeledDataset> {
    let n_classes = cfg.semisup.as_ref().map_or(2, |s| s.n_classes);
    match kind {
        SynthKind::GaussianMixture {
            weights,
            means,
            variances,
        } => {
            let k = weights.len();
            let (labeled_ds, _) = make_synthetic(kind, labels_per_class * n_classes, cfg.seed ^ 0x5eed)?;
            // Label by nearest generating mean, classes by component index
            // round-robin.
            let mut labels = Vec::with_capacity(labeled_ds.n());
            for i in 0..labeled_ds.n() {
                let p = labeled_ds.point(i);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (c, m) in means.iter().enumerate() {
                    let d: f64 = p
                        .iter()
                        .zip(m.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                labels.push(best % n_classes);
            }
            let _ = variances;
            let _ = k;
            LabeledDataset::new(unlabeled, labeled_ds, labels, n_classes)
        }
        _ => Err(Error::Config(
            "semi-supervised synthesis needs a gaussian-mixture source".into(),
        )),
    }
}

fn stage_specs(cfg: &ExperimentConfig) -> Vec<StageSpec> {
    cfg.stages.iter().map(|s| s.spec.clone()).collect()
}

/// Fit a small exact-density mixture to serve as an importance/MH proposal
/// when no component has an exact density.
fn fit_proposal(data: &Dataset, seed: u64) -> Result<ComponentModel> {
    let cfg = TrainConfig::default();
    let mut rng = rng::seeded(seed ^ 0x9e37);
    let k = 8.min(data.n());
    let gmm = crate::models::gmm_fit_em(data, k, GmmInit::KmeansPp, &cfg, &mut rng)?;
    Ok(ComponentModel::Meta(MetaModel::Gmm(gmm)))
}

fn pick_proposal(ens: &MultiplicativeEnsemble, data: &Dataset, seed: u64) -> Result<ComponentModel> {
    for comp in &ens.components {
        if comp.model.has_exact_density() {
            return Ok(comp.model.clone());
        }
    }
    if data.space().kind() == SpaceKind::Real {
        fit_proposal(data, seed)
    } else {
        Err(Error::Unsupported(
            "no exact-density proposal available for this ensemble".into(),
        ))
    }
}

/// Mean unnormalized log density minus the stored/estimated ln Z.
fn ensemble_mean_log_density(
    ens: &MultiplicativeEnsemble,
    data: &Dataset,
    n_mc: usize,
    rng: &mut Prng,
) -> Result<(f64, f64)> {
    let w = data.probability_weights();
    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..data.n() {
        let est = unnormalized_log_density(ens, data.point(i), n_mc, rng)?;
        mean += w[i] * est.value;
        var += w[i] * w[i] * est.std_err * est.std_err;
    }
    let z = ens.log_z.as_ref().map(|z| (z.value, z.std_err)).unwrap_or((0.0, 0.0));
    Ok((mean - z.0, (var + z.1 * z.1).sqrt()))
}

fn run_cascade_mode(
    cfg: &ExperimentConfig,
    data: &Dataset,
    out: &Path,
    sink: &mut MetricsSink,
    rng: &mut Prng,
) -> Result<CascadeModel> {
    let specs = stage_specs(cfg);
    let mut cascade: Option<CascadeModel> = None;
    for (i, spec) in specs.iter().enumerate() {
        let t0 = Instant::now();
        let grown = match cascade.take() {
            None => {
                let source = FixedSource::new(data);
                CascadeModel::single(crate::cascade::train_stage(
                    spec,
                    &source,
                    data.space(),
                    rng,
                )?)
            }
            Some(chain) => incorporate_next(&chain, spec, data, cfg.n_mc, rng)?.0,
        };
        let train_s = t0.elapsed().as_secs_f64();

        let t1 = Instant::now();
        let report = bound_terms(&grown, data, cfg.n_mc, rng)?;
        let density_s = t1.elapsed().as_secs_f64();

        let t2 = Instant::now();
        let _samples = grown.sample(cfg.n_sample, rng)?;
        let sampling_s = t2.elapsed().as_secs_f64();

        crate::serialize::save_cascade(&grown, &out.join(format!("stage_{:02}.gbc", i + 1)))?;
        std::fs::write(
            out.join(format!("report_{:02}.txt", i + 1)),
            report.to_text(),
        )?;
        sink.push(MetricsRecord {
            timestamp_ms: now_ms(),
            stage: i + 1,
            train_seconds: train_s,
            density_seconds: density_s,
            sampling_seconds: sampling_s,
            terms: report_terms(&report),
            total: report.total,
            total_std_err: report.total_std_err,
        })?;
        cascade = Some(grown);
    }
    Ok(cascade.expect("at least one stage"))
}

fn run_semisup_mode(
    cfg: &ExperimentConfig,
    labeled: &LabeledDataset,
    out: &Path,
    sink: &mut MetricsSink,
    rng: &mut Prng,
) -> Result<SemiSupModel> {
    let section = cfg
        .semisup
        .as_ref()
        .ok_or_else(|| Error::Config("semisup mode needs a [semisup] section".into()))?;
    let specs = stage_specs(cfg);
    if specs.is_empty() {
        return Err(Error::Config("semisup mode needs lower stages".into()));
    }
    let ss_cfg = match section.alpha {
        Some(a) => SemiSupConfig {
            alpha: a,
            beta: 1.0 - a,
            lower_on_unlabeled_only: section.lower_on_unlabeled_only,
        },
        None => {
            let mut c = SemiSupConfig::proportional(labeled);
            c.lower_on_unlabeled_only = section.lower_on_unlabeled_only;
            c
        }
    };
    let top = TopSpec {
        comps_per_class: section.comps_per_class,
        train: specs.last().expect("nonempty").train.clone(),
    };
    let t0 = Instant::now();
    let model = semisup_train(labeled, &specs, &top, &ss_cfg, cfg.n_mc, rng)?;
    let train_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let report = crate::semisup::semisup_bound_terms(&model, labeled, &ss_cfg, cfg.n_mc, rng)?;
    let density_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let reportext =
        crate::semisup::classification_report(&model, &labeled.labeled, &labeled.labels, cfg.n_mc, rng)?;
    let sampling_s = t2.elapsed().as_secs_f64();

    crate::serialize::save_cascade(&model.lower, &out.join("lower.gbc"))?;
    crate::serialize::save_metamodel(
        &MetaModel::Gmm(model.top.gmm.clone()),
        &out.join("top.gbm"),
    )?;
    std::fs::write(
        out.join("top.meta"),
        format!(
            "classes {} comps_per_class {}\n",
            model.top.n_classes, model.top.comps_per_class
        ),
    )?;
    std::fs::write(out.join("report.txt"), report.to_text())?;
    std::fs::write(out.join("classification.txt"), reportext)?;
    sink.push(MetricsRecord {
        timestamp_ms: now_ms(),
        stage: specs.len() + 1,
        train_seconds: train_s,
        density_seconds: density_s,
        sampling_seconds: sampling_s,
        terms: report_terms(&report),
        total: report.total,
        total_std_err: report.total_std_err,
    })?;
    Ok(model)
}

fn run_multiplicative_mode(
    cfg: &ExperimentConfig,
    data: &Dataset,
    out: &Path,
    sink: &mut MetricsSink,
    rng: &mut Prng,
) -> Result<MultiplicativeEnsemble> {
    let specs = stage_specs(cfg);
    let alphas: Vec<f64> = cfg.stages.iter().map(|s| s.alpha).collect();
    let betas: Vec<f64> = cfg.stages.iter().skip(1).map(|s| s.beta).collect();
    let t0 = Instant::now();
    let mut ens = multiplicative_train(data, &specs, &alphas, &betas, cfg.n_z, cfg.n_mc, rng)?;
    if ens.log_z.is_none() {
        let proposal = pick_proposal(&ens, data, cfg.seed)?;
        ens.log_z = Some(estimate_log_partition(&ens, &proposal, cfg.n_z, cfg.n_mc, rng)?);
    }
    let train_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (mean_ld, se) = ensemble_mean_log_density(&ens, data, cfg.n_mc, rng)?;
    let density_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let proposal = pick_proposal(&ens, data, cfg.seed)?;
    let chain_cfg = ChainConfig {
        burn_in: cfg.mcmc.burn_in,
        thinning: cfg.mcmc.thinning,
        n_mc: cfg.n_mc,
    };
    let _mc = mcmc_sample(&ens, cfg.n_sample, &proposal, &chain_cfg, rng)?;
    let sampling_s = t2.elapsed().as_secs_f64();

    crate::serialize::save_ensemble(&ens, &out.join("ensemble"))?;
    sink.push(MetricsRecord {
        timestamp_ms: now_ms(),
        stage: specs.len(),
        train_seconds: train_s,
        density_seconds: density_s,
        sampling_seconds: sampling_s,
        terms: vec![(mean_ld, se)],
        total: mean_ld,
        total_std_err: se,
    })?;
    Ok(ens)
}

fn run_hybrid_mode(
    cfg: &ExperimentConfig,
    data: &Dataset,
    out: &Path,
    sink: &mut MetricsSink,
    rng: &mut Prng,
) -> Result<MultiplicativeEnsemble> {
    let mut component_models = Vec::new();
    let mut alphas = Vec::new();
    let t0 = Instant::now();
    for group in &cfg.components {
        let recipe: Vec<StageSpec> = group
            .stages
            .iter()
            .map(|&i| cfg.stages[i - 1].spec.clone())
            .collect();
        let (chain, _) = greedy_train(data, &recipe, cfg.n_mc, rng)?;
        component_models.push(if chain.len() == 1 {
            ComponentModel::Meta(chain.models()[0].clone())
        } else {
            ComponentModel::Cascade(chain)
        });
        alphas.push(group.alpha);
    }
    let mut ens = hybrid_build(component_models, &alphas)?;
    let proposal = pick_proposal(&ens, data, cfg.seed)?;
    ens.log_z = Some(estimate_log_partition(&ens, &proposal, cfg.n_z, cfg.n_mc, rng)?);
    let train_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (mean_ld, se) = ensemble_mean_log_density(&ens, data, cfg.n_mc, rng)?;
    let density_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let chain_cfg = ChainConfig {
        burn_in: cfg.mcmc.burn_in,
        thinning: cfg.mcmc.thinning,
        n_mc: cfg.n_mc,
    };
    let _mc = mcmc_sample(&ens, cfg.n_sample, &proposal, &chain_cfg, rng)?;
    let sampling_s = t2.elapsed().as_secs_f64();

    crate::serialize::save_ensemble(&ens, &out.join("ensemble"))?;
    sink.push(MetricsRecord {
        timestamp_ms: now_ms(),
        stage: cfg.components.len(),
        train_seconds: train_s,
        density_seconds: density_s,
        sampling_seconds: sampling_s,
        terms: vec![(mean_ld, se)],
        total: mean_ld,
        total_std_err: se,
    })?;
    Ok(ens)
}

/// Run a configured experiment end to end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out)?;
    let mut sink = MetricsSink::new(out.join("metrics.txt"))?;
    let (data, labeled) = materialize_data(cfg, &out)?;
    let mut rng = rng::seeded(cfg.seed);
    match cfg.mode {
        Mode::Cascade => {
            run_cascade_mode(cfg, &data, &out, &mut sink, &mut rng)?;
        }
        Mode::SemiSup => {
            let labeled = labeled.ok_or_else(|| {
                Error::Config("semisup mode needs labeled data (synth or L-flagged file)".into())
            })?;
            run_semisup_mode(cfg, &labeled, &out, &mut sink, &mut rng)?;
        }
        Mode::Multiplicative => {
            run_multiplicative_mode(cfg, &data, &out, &mut sink, &mut rng)?;
        }
        Mode::Hybrid => {
            run_hybrid_mode(cfg, &data, &out, &mut sink, &mut rng)?;
        }
    }
    Ok(RunArtifacts {
        out_dir: out,
        metrics: sink.records,
    })
}

/// Sample export formats.
#[derive(Clone, Debug)]
pub enum ExportFormat {
    Csv,
    /// Binary PGM (P5), one width x height tile per sample arranged in a
    /// near-square grid.
    Pgm { width: usize, height: usize },
}

pub fn write_samples_csv(samples: ArrayView2<f64>, path: &Path) -> Result<()> {
    let mut text = String::new();
    for row in samples.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_samples_pgm(
    samples: ArrayView2<f64>,
    width: usize,
    height: usize,
    path: &Path,
) -> Result<()> {
    if width * height != samples.ncols() {
        return Err(Error::Shape(format!(
            "{}x{} tiles do not match dimension {}",
            width,
            height,
            samples.ncols()
        )));
    }
    let n = samples.nrows();
    let grid = (n as f64).sqrt().ceil() as usize;
    let (full_w, full_h) = (grid * width, grid * height);
    let mut pixels = vec![0u8; full_w * full_h];
    for (i, row) in samples.rows().into_iter().enumerate() {
        let (tile_r, tile_c) = (i / grid, i % grid);
        for y in 0..height {
            for x in 0..width {
                let v = row[y * width + x].clamp(0.0, 1.0);
                let px = (v * 255.0).round() as u8;
                pixels[(tile_r * height + y) * full_w + tile_c * width + x] = px;
            }
        }
    }
    let mut bytes = format!("P5\n{full_w} {full_h}\n255\n").into_bytes();
    bytes.extend_from_slice(&pixels);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Draw from a chain or single model and write the result.
pub fn export_samples(
    model: &ComponentModel,
    n: usize,
    path: &Path,
    format: &ExportFormat,
    rng: &mut Prng,
) -> Result<()> {
    if n == 0 {
        return Err(Error::BadParams("need n >= 1 samples".into()));
    }
    if matches!(format, ExportFormat::Pgm { .. })
        && model.visible_space().kind() == SpaceKind::Categorical
    {
        return Err(Error::Shape("PGM export needs a Binary or Real space".into()));
    }
    let d = model.visible_space().point_dim();
    let mut samples = Array2::zeros((n, d));
    for i in 0..n {
        samples.row_mut(i).assign(&model.sample_visible(rng)?);
    }
    match format {
        ExportFormat::Csv => write_samples_csv(samples.view(), path),
        ExportFormat::Pgm { width, height } => {
            write_samples_pgm(samples.view(), *width, *height, path)
        }
    }
}

/// One comparison row of the boosting-method benchmark.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub mode: &'static str,
    pub layout: String,
    /// Estimated mean log density (a lower bound where estimators are
    /// bounds) on the evaluation set.
    pub log_density: f64,
    pub train_seconds: f64,
    pub density_seconds: f64,
    pub sampling_seconds: f64,
}

impl BenchRow {
    pub fn to_line(&self) -> String {
        format!(
            "bench mode={} layout={} logp={:.4} train_s={:.6} density_s={:.6} sample_s={:.6}",
            self.mode,
            self.layout,
            self.log_density,
            self.train_seconds,
            self.density_seconds,
            self.sampling_seconds
        )
    }
}

/// The chained / parallel / hybrid comparison on one synthetic dataset:
/// every row reports the same four measurement columns.
pub fn run_bench(
    train: &Dataset,
    eval: &Dataset,
    n_samples: usize,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let vae_spec = |seed: u64| StageSpec {
        model: ModelSpec::Vae {
            latent: 2,
            hidden_layers: vec![16],
        },
        train: TrainConfig {
            epochs: 20,
            learning_rate: 0.01,
            seed,
            ..TrainConfig::default()
        },
    };
    let gmm_spec = StageSpec {
        model: ModelSpec::Gmm {
            components: 6,
            init: GmmInit::CoverStandardNormal,
        },
        train: TrainConfig::default(),
    };
    let gmm_data_spec = StageSpec {
        model: ModelSpec::Gmm {
            components: 6,
            init: GmmInit::KmeansPp,
        },
        train: TrainConfig::default(),
    };
    let mut rows = Vec::new();

    // Chained: VAE with a mixture on top; ancestral sampling.
    {
        let mut rng = rng::seeded(seed);
        let t0 = Instant::now();
        let (chain, _) = greedy_train(train, &[vae_spec(seed), gmm_spec.clone()], n_mc, &mut rng)?;
        let train_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let report = bound_terms(&chain, eval, n_mc, &mut rng)?;
        let density_s = t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let _ = chain.sample(n_samples, &mut rng)?;
        let sampling_s = t2.elapsed().as_secs_f64();
        rows.push(BenchRow {
            mode: "cascade",
            layout: "vae+gmm".into(),
            log_density: report.total,
            train_seconds: train_s,
            density_seconds: density_s,
            sampling_seconds: sampling_s,
        });
    }

    // Parallel: VAE and a mixture side by side; Metropolis-Hastings sampling.
    {
        let mut rng = rng::seeded(seed ^ 1);
        let t0 = Instant::now();
        let specs = [vae_spec(seed ^ 1), gmm_data_spec.clone()];
        let mut ens =
            multiplicative_train(train, &specs, &[1.0, 1.0], &[1.0], 20_000, n_mc, &mut rng)?;
        let proposal = pick_proposal(&ens, train, seed)?;
        if ens.log_z.is_none() {
            ens.log_z = Some(estimate_log_partition(&ens, &proposal, 20_000, n_mc, &mut rng)?);
        }
        let train_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let (mean_ld, _) = ensemble_mean_log_density(&ens, eval, n_mc, &mut rng)?;
        let density_s = t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let chain_cfg = ChainConfig {
            burn_in: 300,
            thinning: 3,
            n_mc,
        };
        let _ = mcmc_sample(&ens, n_samples, &proposal, &chain_cfg, &mut rng)?;
        let sampling_s = t2.elapsed().as_secs_f64();
        rows.push(BenchRow {
            mode: "parallel",
            layout: "vae||gmm".into(),
            log_density: mean_ld,
            train_seconds: train_s,
            density_seconds: density_s,
            sampling_seconds: sampling_s,
        });
    }

    // Hybrid: two chains in parallel; Metropolis-Hastings sampling.
    {
        let mut rng = rng::seeded(seed ^ 2);
        let t0 = Instant::now();
        let (c1, _) = greedy_train(train, &[vae_spec(seed ^ 2), gmm_spec.clone()], n_mc, &mut rng)?;
        let (c2, _) = greedy_train(train, &[vae_spec(seed ^ 3), gmm_spec], n_mc, &mut rng)?;
        let mut ens = hybrid_build(
            vec![ComponentModel::Cascade(c1), ComponentModel::Cascade(c2)],
            &[0.5, 0.5],
        )?;
        let proposal = pick_proposal(&ens, train, seed)?;
        ens.log_z = Some(estimate_log_partition(&ens, &proposal, 5_000, n_mc, &mut rng)?);
        let train_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let (mean_ld, _) = ensemble_mean_log_density(&ens, eval, n_mc, &mut rng)?;
        let density_s = t1.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let chain_cfg = ChainConfig {
            burn_in: 300,
            thinning: 3,
            n_mc,
        };
        let _ = mcmc_sample(&ens, n_samples, &proposal, &chain_cfg, &mut rng)?;
        let sampling_s = t2.elapsed().as_secs_f64();
        rows.push(BenchRow {
            mode: "hybrid",
            layout: "(vae+gmm)||(vae+gmm)".into(),
            log_density: mean_ld,
            train_seconds: train_s,
            density_seconds: density_s,
            sampling_seconds: sampling_s,
        });
    }

    Ok(rows)
}

//! Command-line driver: dataset synthesis, training in every boosting mode,
//! bound evaluation, classification, partition estimation, sampling, exact
//! verification, and the boosting-method benchmark.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! failure.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use genboost::cascade::CascadeModel;
use genboost::config::{load_config, Mode};
use genboost::data::{load_dataset, make_synthetic, save_dataset, SynthKind};
use genboost::error::Error;
use genboost::experiment::{export_samples, run_bench, run_experiment, ExportFormat};
use genboost::multiplicative::{estimate_log_partition, mcmc_sample, ChainConfig, ComponentModel};
use genboost::rng::seeded;
use genboost::semisup::{classification_report, ClassMixture, SemiSupModel};
use genboost::serialize::{load_cascade, load_ensemble, load_metamodel};
use genboost::{MetaModel, Space};

#[derive(Parser)]
#[command(name = "genboost", about = "Boosting generative models by chaining and multiplying meta-models", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (with a ground-truth manifest sidecar).
    MakeSynth {
        /// two-cluster | four-cluster | parity | arcs
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Bit width for parity data.
        #[arg(long, default_value_t = 6)]
        dim: usize,
        /// Noise level for arcs data.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
    /// Train a chained model from an experiment config (mode=cascade).
    TrainCascade(ConfigArgs),
    /// Train the semi-supervised model from a config (mode=semisup).
    TrainSemisup(ConfigArgs),
    /// Train a parallel (multiplicative) ensemble from a config.
    TrainMult(ConfigArgs),
    /// Train the chains of a hybrid ensemble and assemble it.
    BuildHybrid(ConfigArgs),
    /// Evaluate the decomposed bound of a saved chain on a dataset.
    EvalBound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 32)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prior-entropy convergence gap of a saved chain's top model.
    ConvergenceGap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 32)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify a labeled dataset with a trained semi-supervised run.
    Classify {
        /// Directory produced by train-semisup.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 32)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Importance-sampling estimate of a saved ensemble's ln Z.
    EstimateZ {
        /// Directory produced by train-mult / build-hybrid.
        #[arg(long)]
        ensemble: PathBuf,
        /// Component index to use as the proposal.
        #[arg(long, default_value_t = 0)]
        proposal: usize,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Metropolis-Hastings samples from a saved ensemble.
    McmcSample {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        burn_in: usize,
        #[arg(long, default_value_t = 2)]
        thinning: usize,
        #[arg(long, default_value_t = 0)]
        proposal: usize,
        #[arg(long, default_value_t = 8)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ancestral samples from a saved chain or single model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// csv | pgm
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
    /// Run the exact-enumeration verification suite on random tiny chains.
    OracleVerify {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on the joint state count (as a power of two).
        #[arg(long, default_value_t = 14)]
        budget_bits: u32,
    },
    /// Compare chained, parallel and hybrid boosting on one dataset.
    Bench {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        n_sample: usize,
        #[arg(long, default_value_t = 8)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the configured dataset path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured Monte Carlo budget.
    #[arg(long)]
    n_mc: Option<usize>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::BadParams(_)
        | Error::DimensionMismatch { .. }
        | Error::IncompatibleSpaces(_)
        | Error::Shape(_)
        | Error::Unsupported(_) => 2,
        Error::Format { .. } | Error::Io(_) | Error::EmptyDataset | Error::EmptyLabeledSet => 3,
        Error::NonFinite(_)
        | Error::SizeTooLarge { .. }
        | Error::DegenerateComponent { .. }
        | Error::DegenerateWeights { .. }
        | Error::ZeroAcceptance { .. } => 4,
    }
}

fn run_config_mode(args: &ConfigArgs, want: Mode) -> genboost::Result<()> {
    let mut cfg = load_config(&args.config)?;
    if cfg.mode != want {
        return Err(Error::Config(format!(
            "config mode is '{}', this subcommand runs '{}'",
            cfg.mode.tag(),
            want.tag()
        )));
    }
    if let Some(data) = &args.data {
        cfg.data = genboost::config::DataSource::Path(data.display().to_string());
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.display().to_string();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n_mc) = args.n_mc {
        cfg.n_mc = n_mc;
    }
    let artifacts = run_experiment(&cfg)?;
    for rec in &artifacts.metrics {
        println!("{}", rec.to_line());
    }
    println!("artifacts written to {}", artifacts.out_dir.display());
    Ok(())
}

/// Load either a chain file or a single-model file as a sampleable model.
fn load_component(path: &Path) -> genboost::Result<ComponentModel> {
    match load_cascade(path) {
        Ok(c) => Ok(ComponentModel::Cascade(c)),
        Err(_) => Ok(ComponentModel::Meta(load_metamodel(path)?)),
    }
}

fn load_semisup_run(dir: &Path) -> genboost::Result<SemiSupModel> {
    let lower: CascadeModel = load_cascade(&dir.join("lower.gbc"))?;
    let top = match load_metamodel(&dir.join("top.gbm"))? {
        MetaModel::Gmm(g) => g,
        _ => return Err(Error::Format {
            line: 1,
            msg: "top.gbm must hold a mixture".into(),
        }),
    };
    let meta = std::fs::read_to_string(dir.join("top.meta"))?;
    let mut classes = 0usize;
    let mut comps = 0usize;
    for tok in meta.split_whitespace().collect::<Vec<_>>().chunks(2) {
        match tok {
            ["classes", v] => classes = v.parse().map_err(|_| Error::format(1, "bad classes"))?,
            ["comps_per_class", v] => {
                comps = v.parse().map_err(|_| Error::format(1, "bad comps_per_class"))?
            }
            _ => {}
        }
    }
    Ok(SemiSupModel {
        lower,
        top: ClassMixture::new(top, classes, comps)?,
    })
}

fn run(cli: Cli) -> genboost::Result<()> {
    match cli.command {
        Command::MakeSynth {
            kind,
            n,
            seed,
            out,
            dim,
            noise,
        } => {
            let kind = match kind.as_str() {
                "two-cluster" => SynthKind::two_cluster_default(),
                "four-cluster" => SynthKind::GaussianMixture {
                    weights: vec![0.25; 4],
                    means: vec![
                        vec![3.0, 3.0],
                        vec![-3.0, -3.0],
                        vec![3.0, -3.0],
                        vec![-3.0, 3.0],
                    ],
                    variances: vec![vec![0.3, 0.3]; 4],
                },
                "parity" => SynthKind::BinaryParity { dim },
                "arcs" => SynthKind::TwoArcs { noise },
                other => return Err(Error::Config(format!("unknown synthetic kind '{other}'"))),
            };
            let (ds, manifest) = make_synthetic(&kind, n, seed)?;
            save_dataset(&ds, &out)?;
            std::fs::write(out.with_extension("gbds.manifest"), manifest)?;
            println!("wrote {} rows to {}", ds.n(), out.display());
            Ok(())
        }
        Command::TrainCascade(args) => run_config_mode(&args, Mode::Cascade),
        Command::TrainSemisup(args) => run_config_mode(&args, Mode::SemiSup),
        Command::TrainMult(args) => run_config_mode(&args, Mode::Multiplicative),
        Command::BuildHybrid(args) => run_config_mode(&args, Mode::Hybrid),
        Command::EvalBound {
            model,
            data,
            n_mc,
            seed,
            out,
        } => {
            let chain = load_cascade(&model)?;
            let (ds, _) = load_dataset(&data)?;
            let report = genboost::cascade::bound_terms(&chain, &ds, n_mc, &mut seeded(seed))?;
            let text = report.to_text();
            print!("{text}");
            if let Some(out) = out {
                std::fs::write(out, text)?;
            }
            Ok(())
        }
        Command::ConvergenceGap {
            model,
            data,
            n_mc,
            seed,
        } => {
            let chain = load_cascade(&model)?;
            let (ds, _) = load_dataset(&data)?;
            let gap = genboost::cascade::convergence_gap(&chain, &ds, n_mc, &mut seeded(seed))?;
            println!(
                "gap {} std_err {} prior_expected_log {}",
                gap.value, gap.std_err, gap.prior_expected_log
            );
            Ok(())
        }
        Command::Classify {
            model,
            data,
            n_mc,
            seed,
        } => {
            let ss = load_semisup_run(&model)?;
            let (ds, labels) = load_dataset(&data)?;
            match labels {
                Some(labels) => {
                    let text =
                        classification_report(&ss, &ds, &labels, n_mc, &mut seeded(seed))?;
                    print!("{text}");
                }
                None => {
                    let mut rng = seeded(seed);
                    for i in 0..ds.n() {
                        let (label, posterior) =
                            genboost::semisup::classify(&ss, ds.point(i), n_mc, &mut rng)?;
                        let probs: Vec<String> =
                            posterior.iter().map(|p| format!("{p:.6}")).collect();
                        println!("{label} {}", probs.join(" "));
                    }
                }
            }
            Ok(())
        }
        Command::EstimateZ {
            ensemble,
            proposal,
            n,
            n_mc,
            seed,
        } => {
            let ens = load_ensemble(&ensemble)?;
            let comp = ens
                .components
                .get(proposal)
                .ok_or_else(|| Error::Config(format!("no component {proposal}")))?
                .model
                .clone();
            let est = estimate_log_partition(&ens, &comp, n, n_mc, &mut seeded(seed))?;
            println!(
                "log_z {} std_err {} n {} proposal {} seed {seed}",
                est.value, est.std_err, est.n_samples, est.proposal
            );
            Ok(())
        }
        Command::McmcSample {
            ensemble,
            n,
            burn_in,
            thinning,
            proposal,
            n_mc,
            seed,
            out,
        } => {
            let ens = load_ensemble(&ensemble)?;
            let comp = ens
                .components
                .get(proposal)
                .ok_or_else(|| Error::Config(format!("no component {proposal}")))?
                .model
                .clone();
            let cfg = ChainConfig {
                burn_in,
                thinning,
                n_mc,
            };
            let result = mcmc_sample(&ens, n, &comp, &cfg, &mut seeded(seed))?;
            genboost::experiment::write_samples_csv(result.samples.view(), &out)?;
            println!(
                "wrote {n} samples to {} (acceptance rate {:.4})",
                out.display(),
                result.acceptance_rate
            );
            Ok(())
        }
        Command::Sample {
            model,
            n,
            seed,
            out,
            format,
            width,
            height,
        } => {
            let component = load_component(&model)?;
            let format = match format.as_str() {
                "csv" => ExportFormat::Csv,
                "pgm" => {
                    let (w, h) = match (width, height) {
                        (Some(w), Some(h)) => (w, h),
                        _ => {
                            return Err(Error::Config(
                                "pgm export needs --width and --height".into(),
                            ))
                        }
                    };
                    ExportFormat::Pgm {
                        width: w,
                        height: h,
                    }
                }
                other => return Err(Error::Config(format!("unknown format '{other}'"))),
            };
            export_samples(&component, n, &out, &format, &mut seeded(seed))?;
            println!("wrote {n} samples to {}", out.display());
            Ok(())
        }
        Command::OracleVerify {
            trials,
            seed,
            budget_bits,
        } => {
            let budget = 1u128 << budget_bits.min(22);
            let mut rng = seeded(seed);
            let mut worst_gap = f64::INFINITY;
            let mut worst_partial: f64 = f64::NEG_INFINITY;
            for trial in 0..trials {
                let chain = genboost::oracle::random_discrete_cascade(&mut rng, 2, budget)?;
                let data = genboost::oracle::random_discrete_dataset(
                    chain.visible_space(),
                    6,
                    &mut rng,
                )?;
                let ll = genboost::oracle::exact_data_loglik(&chain, &data)?;
                let total: f64 = genboost::oracle::exact_bound_terms(&chain, &data)?
                    .iter()
                    .sum();
                let gap = ll - total;
                worst_gap = worst_gap.min(gap);
                if gap < -1e-9 {
                    println!("FAIL trial {trial}: bound {total} exceeds log-likelihood {ll}");
                    return Err(Error::NonFinite("bound inequality violated".into()));
                }
                let opt = genboost::oracle::optimal_top_model(
                    Some(&chain),
                    &data,
                    Space::categorical(3),
                    None,
                )?;
                let mut grown = chain.clone();
                let k = grown.len() + 1;
                grown.push(opt.into())?;
                let vis = grown.top_hidden_space();
                grown.push(
                    genboost::models::TabularModel::random(vis, Space::categorical(2), &mut rng)?
                        .into(),
                )?;
                let partial = genboost::oracle::max_appended_partial_sum(&grown, &data, k)?;
                worst_partial = worst_partial.max(partial);
                if partial > 1e-9 {
                    println!("FAIL trial {trial}: appended layers gained {partial}");
                    return Err(Error::NonFinite("optimal-top stall violated".into()));
                }
            }
            println!("PASS bound-vs-loglik over {trials} trials (min slack {worst_gap:.3e})");
            println!("PASS optimal-top partial sums over {trials} trials (max {worst_partial:.3e})");
            Ok(())
        }
        Command::Bench {
            n,
            n_sample,
            n_mc,
            seed,
            out,
        } => {
            let (train, _) = make_synthetic(&SynthKind::two_cluster_default(), n, seed)?;
            let (eval, _) = make_synthetic(&SynthKind::two_cluster_default(), n / 2, seed ^ 0xbe)?;
            let rows = run_bench(&train, &eval, n_sample, n_mc, seed)?;
            let mut text = String::new();
            for row in &rows {
                println!("{}", row.to_line());
                text.push_str(&row.to_line());
                text.push('\n');
            }
            if let Some(out) = out {
                std::fs::write(out, text)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

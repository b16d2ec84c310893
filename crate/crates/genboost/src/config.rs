//! Experiment configuration: flat sectioned key=value text.
//!
//! A config is a sequence of whitespace-separated tokens; `[section]`
//! switches the current section and `key=value` adds an entry to it, so
//! both one-line and multi-line layouts parse the same way:
//!
//! ```text
//! [experiment] mode=cascade seed=42 n_mc=32 out=runs/demo
//! [data] synth=two-cluster n=400
//! [stage.1] family=vae latent=2 hidden=16 epochs=30 lr=0.01
//! [stage.2] family=gmm components=8 init=cover
//! ```

use std::collections::BTreeMap;

use crate::cascade::{ModelSpec, StageSpec};
use crate::data::SynthKind;
use crate::error::{Error, Result};
use crate::models::gmm::GmmInit;
use crate::train::{Optimizer, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Cascade,
    SemiSup,
    Multiplicative,
    Hybrid,
}

impl Mode {
    pub fn tag(&self) -> &'static str {
        match self {
            Mode::Cascade => "cascade",
            Mode::SemiSup => "semisup",
            Mode::Multiplicative => "multiplicative",
            Mode::Hybrid => "hybrid",
        }
    }
}

/// Where the run's data comes from.
#[derive(Clone, Debug)]
pub enum DataSource {
    Path(String),
    Synth {
        kind: SynthKind,
        n: usize,
        /// For semi-supervised synthesis: labeled examples per class.
        labels_per_class: usize,
    },
}

/// One stage plus the ensemble knobs that only some modes read.
#[derive(Clone, Debug)]
pub struct ConfiguredStage {
    pub spec: StageSpec,
    /// Exponent weight when the stage is an ensemble component.
    pub alpha: f64,
    /// Reweighting exponent used when training this component.
    pub beta: f64,
}

/// Component grouping for hybrid mode: which stages chain into each
/// component, and the component's exponent.
#[derive(Clone, Debug)]
pub struct ComponentGroup {
    pub stages: Vec<usize>,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct SemiSupSection {
    pub comps_per_class: usize,
    pub alpha: Option<f64>,
    pub lower_on_unlabeled_only: bool,
    pub n_classes: usize,
}

#[derive(Clone, Debug)]
pub struct McmcSection {
    pub burn_in: usize,
    pub thinning: usize,
    pub n_samples: usize,
}

impl Default for McmcSection {
    fn default() -> Self {
        McmcSection {
            burn_in: 500,
            thinning: 2,
            n_samples: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub n_mc: usize,
    pub out_dir: String,
    pub data: DataSource,
    pub stages: Vec<ConfiguredStage>,
    pub components: Vec<ComponentGroup>,
    pub semisup: Option<SemiSupSection>,
    pub mcmc: McmcSection,
    /// Importance samples for partition estimation.
    pub n_z: usize,
    /// Samples drawn when timing/sampling.
    pub n_sample: usize,
}

type Section = BTreeMap<String, String>;

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current = String::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            if let Some(name) = token.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                current = name.to_string();
                sections.entry(current.clone()).or_default();
            } else if let Some((k, v)) = token.split_once('=') {
                if current.is_empty() {
                    return Err(Error::Config(format!(
                        "line {}: key '{k}' before any [section]",
                        lineno + 1
                    )));
                }
                sections
                    .get_mut(&current)
                    .expect("section exists")
                    .insert(k.to_string(), v.to_string());
            } else {
                return Err(Error::Config(format!(
                    "line {}: cannot parse token '{token}'",
                    lineno + 1
                )));
            }
        }
    }
    Ok(sections)
}

fn get<'a>(section: &'a Section, key: &str) -> Option<&'a str> {
    section.get(key).map(|s| s.as_str())
}

fn parse_num<T: std::str::FromStr>(section: &Section, key: &str, default: T) -> Result<T> {
    match get(section, key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'"))),
    }
}

fn require<'a>(section: &'a Section, key: &str, ctx: &str) -> Result<&'a str> {
    get(section, key).ok_or_else(|| Error::Config(format!("missing '{key}' in [{ctx}]")))
}

fn parse_train(section: &Section, seed: u64) -> Result<TrainConfig> {
    let base = TrainConfig::default();
    let optimizer = match get(section, "optimizer").unwrap_or("sgd") {
        "sgd" => Optimizer::Sgd,
        "adam" => Optimizer::Adam,
        other => return Err(Error::Config(format!("unknown optimizer '{other}'"))),
    };
    let cfg = TrainConfig {
        epochs: parse_num(section, "epochs", base.epochs)?,
        batch_size: parse_num(section, "batch", base.batch_size)?,
        learning_rate: parse_num(section, "lr", base.learning_rate)?,
        seed,
        cd_steps: parse_num(section, "cd_steps", base.cd_steps)?,
        iw_samples: parse_num(section, "iw_samples", base.iw_samples)?,
        em_max_iters: parse_num(section, "em_iters", base.em_max_iters)?,
        em_tol: parse_num(section, "em_tol", base.em_tol)?,
        optimizer,
        resample_each_epoch: parse_num(section, "resample", base.resample_each_epoch)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_stage(section: &Section, seed: u64, name: &str) -> Result<ConfiguredStage> {
    let family = require(section, "family", name)?;
    let model = match family {
        "gmm" => {
            let components = parse_num(section, "components", 4usize)?;
            let init = match get(section, "init").unwrap_or("kmeans") {
                "kmeans" => GmmInit::KmeansPp,
                "cover" => GmmInit::CoverStandardNormal,
                other => return Err(Error::Config(format!("unknown gmm init '{other}'"))),
            };
            ModelSpec::Gmm { components, init }
        }
        "rbm" => ModelSpec::Rbm {
            hidden: parse_num(section, "hidden_units", 8usize)?,
        },
        "vae" => {
            let hidden: Vec<usize> = get(section, "hidden")
                .unwrap_or("16")
                .split(',')
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Config(format!("bad hidden layer size '{t}'")))
                })
                .collect::<Result<_>>()?;
            ModelSpec::Vae {
                latent: parse_num(section, "latent", 2usize)?,
                hidden_layers: hidden,
            }
        }
        other => return Err(Error::Config(format!("unknown family '{other}'"))),
    };
    Ok(ConfiguredStage {
        spec: StageSpec {
            model,
            train: parse_train(section, seed)?,
        },
        alpha: parse_num(section, "alpha", 1.0f64)?,
        beta: parse_num(section, "beta", 1.0f64)?,
    })
}

fn parse_synth(section: &Section) -> Result<SynthKind> {
    match require(section, "synth", "data")? {
        "two-cluster" => Ok(SynthKind::two_cluster_default()),
        "four-cluster" => Ok(SynthKind::GaussianMixture {
            weights: vec![0.25; 4],
            means: vec![
                vec![3.0, 3.0],
                vec![-3.0, -3.0],
                vec![3.0, -3.0],
                vec![-3.0, 3.0],
            ],
            variances: vec![vec![0.3, 0.3]; 4],
        }),
        "parity" => Ok(SynthKind::BinaryParity {
            dim: parse_num(section, "dim", 6usize)?,
        }),
        "arcs" => Ok(SynthKind::TwoArcs {
            noise: parse_num(section, "noise", 0.1f64)?,
        }),
        other => Err(Error::Config(format!("unknown synthetic kind '{other}'"))),
    }
}

/// Parse a full experiment config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let sections = parse_sections(text)?;
    let exp = sections
        .get("experiment")
        .ok_or_else(|| Error::Config("missing [experiment] section".into()))?;
    let mode = match require(exp, "mode", "experiment")? {
        "cascade" => Mode::Cascade,
        "semisup" => Mode::SemiSup,
        "multiplicative" => Mode::Multiplicative,
        "hybrid" => Mode::Hybrid,
        other => return Err(Error::Config(format!("unknown mode '{other}'"))),
    };
    let seed: u64 = parse_num(exp, "seed", 0u64)?;
    let n_mc: usize = parse_num(exp, "n_mc", 32usize)?;
    if n_mc == 0 {
        return Err(Error::Config("n_mc must be >= 1".into()));
    }
    let out_dir = require(exp, "out", "experiment")?.to_string();

    let data_section = sections
        .get("data")
        .ok_or_else(|| Error::Config("missing [data] section".into()))?;
    let data = if let Some(path) = get(data_section, "path") {
        DataSource::Path(path.to_string())
    } else {
        DataSource::Synth {
            kind: parse_synth(data_section)?,
            n: parse_num(data_section, "n", 500usize)?,
            labels_per_class: parse_num(data_section, "labels_per_class", 10usize)?,
        }
    };

    let mut stages = Vec::new();
    for i in 1.. {
        match sections.get(&format!("stage.{i}")) {
            None => break,
            Some(s) => stages.push(parse_stage(s, seed, &format!("stage.{i}"))?),
        }
    }
    if stages.is_empty() {
        return Err(Error::Config("no [stage.N] sections".into()));
    }

    let mut components = Vec::new();
    for i in 1.. {
        match sections.get(&format!("component.{i}")) {
            None => break,
            Some(s) => {
                let stage_list: Vec<usize> = require(s, "stages", &format!("component.{i}"))?
                    .split(',')
                    .map(|t| {
                        t.parse::<usize>()
                            .map_err(|_| Error::Config(format!("bad stage index '{t}'")))
                    })
                    .collect::<Result<_>>()?;
                for &s_idx in &stage_list {
                    if s_idx == 0 || s_idx > stages.len() {
                        return Err(Error::Config(format!(
                            "component.{i} references stage {s_idx} which does not exist"
                        )));
                    }
                }
                components.push(ComponentGroup {
                    stages: stage_list,
                    alpha: parse_num(s, "alpha", 1.0f64)?,
                });
            }
        }
    }
    if mode == Mode::Hybrid && components.is_empty() {
        return Err(Error::Config("hybrid mode needs [component.N] sections".into()));
    }

    let semisup = match sections.get("semisup") {
        None => None,
        Some(s) => Some(SemiSupSection {
            comps_per_class: parse_num(s, "comps_per_class", 2usize)?,
            alpha: get(s, "alpha")
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad alpha '{v}'")))
                })
                .transpose()?,
            lower_on_unlabeled_only: parse_num(s, "lower_on_unlabeled_only", false)?,
            n_classes: parse_num(s, "n_classes", 2usize)?,
        }),
    };
    if mode == Mode::SemiSup && semisup.is_none() {
        return Err(Error::Config("semisup mode needs a [semisup] section".into()));
    }

    let mcmc = match sections.get("mcmc") {
        None => McmcSection::default(),
        Some(s) => McmcSection {
            burn_in: parse_num(s, "burn_in", 500usize)?,
            thinning: parse_num(s, "thinning", 2usize)?,
            n_samples: parse_num(s, "n", 2000usize)?,
        },
    };

    Ok(ExperimentConfig {
        mode,
        seed,
        n_mc,
        out_dir,
        data,
        stages,
        components,
        semisup,
        mcmc,
        n_z: parse_num(exp, "n_z", 20_000usize)?,
        n_sample: parse_num(exp, "n_sample", 2000usize)?,
    })
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
[experiment] mode=cascade seed=7 n_mc=16 out=runs/demo
[data] synth=two-cluster n=200
[stage.1] family=vae latent=2 hidden=16,8 epochs=5 lr=0.01
[stage.2] family=gmm components=4 init=cover
";

    #[test]
    fn sample_config_parses() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.mode, Mode::Cascade);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.stages.len(), 2);
        match &cfg.stages[0].spec.model {
            ModelSpec::Vae {
                latent,
                hidden_layers,
            } => {
                assert_eq!(*latent, 2);
                assert_eq!(hidden_layers, &vec![16, 8]);
            }
            other => panic!("unexpected spec {other:?}"),
        }
        match &cfg.stages[1].spec.model {
            ModelSpec::Gmm { components, init } => {
                assert_eq!(*components, 4);
                assert_eq!(*init, GmmInit::CoverStandardNormal);
            }
            other => panic!("unexpected spec {other:?}"),
        }
    }

    #[test]
    fn inline_and_multiline_parse_identically() {
        let multiline = "\
[experiment]
mode=cascade
seed=7
n_mc=16
out=runs/demo
[data]
synth=two-cluster
n=200
[stage.1]
family=vae
latent=2
hidden=16,8
epochs=5
lr=0.01
[stage.2]
family=gmm
components=4
init=cover
";
        let a = parse_config(SAMPLE).unwrap();
        let b = parse_config(multiline).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn missing_required_fields_are_reported() {
        assert!(parse_config("[experiment] mode=cascade").is_err());
        let no_stage = "[experiment] mode=cascade out=x [data] synth=two-cluster";
        let err = parse_config(no_stage).unwrap_err();
        assert!(err.to_string().contains("stage"));
        let bad_mode = "[experiment] mode=blob out=x [data] synth=two-cluster [stage.1] family=gmm";
        assert!(parse_config(bad_mode).is_err());
    }

    #[test]
    fn hybrid_requires_components_and_valid_stage_refs() {
        let no_comp = "\
[experiment] mode=hybrid out=x [data] synth=two-cluster [stage.1] family=gmm";
        assert!(parse_config(no_comp).is_err());
        let bad_ref = "\
[experiment] mode=hybrid out=x [data] synth=two-cluster [stage.1] family=gmm \
[component.1] stages=1,5 alpha=0.5";
        assert!(parse_config(bad_ref).is_err());
    }
}

//! Self-describing text records for trained models.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so
//! save -> load -> save reproduces files byte for byte. A chain file is a
//! manifest (count, space chain, version) followed by the concatenated
//! model records; an ensemble is a manifest that references per-component
//! files plus the stored partition estimate and its estimator metadata.

use ndarray::{Array1, Array2};
use std::fmt::Write as _;
use std::path::Path;

use crate::cascade::CascadeModel;
use crate::error::{Error, Result};
use crate::metamodel::MetaModel;
use crate::models::gmm::{GmmModel, GmmParams};
use crate::models::rbm::{RbmModel, RbmParams};
use crate::models::tabular::TabularModel;
use crate::models::vae::{Dense, Mlp, VaeModel};
use crate::multiplicative::{ComponentModel, DensityComponent, LogZEstimate, MultiplicativeEnsemble};
use crate::space::Space;

const MODEL_MAGIC: &str = "genboost-model 1";
const CASCADE_MAGIC: &str = "genboost-cascade 1";
const ENSEMBLE_MAGIC: &str = "genboost-ensemble 1";

fn push_vec(out: &mut String, name: &str, v: &Array1<f64>) {
    let _ = write!(out, "{name} {}", v.len());
    for x in v {
        let _ = write!(out, " {x}");
    }
    out.push('\n');
}

fn push_mat(out: &mut String, name: &str, m: &Array2<f64>) {
    let _ = write!(out, "{name} {} {}", m.nrows(), m.ncols());
    for x in m.iter() {
        let _ = write!(out, " {x}");
    }
    out.push('\n');
}

/// Line cursor with 1-based positions for error reporting.
struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.iter.by_ref() {
            if !line.trim().is_empty() {
                return Ok((i + 1, line));
            }
        }
        Err(Error::format(0, "unexpected end of file"))
    }

    fn expect(&mut self, want: &str) -> Result<()> {
        let (no, line) = self.next()?;
        if line.trim() != want {
            return Err(Error::format(no, format!("expected '{want}', got '{line}'")));
        }
        Ok(())
    }
}

fn parse_vec(line: &str, no: usize, name: &str) -> Result<Array1<f64>> {
    let mut toks = line.split_whitespace();
    let tag = toks.next().unwrap_or("");
    if tag != name {
        return Err(Error::format(no, format!("expected '{name}', got '{tag}'")));
    }
    let len: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(no, "bad vector length"))?;
    let vals: Vec<f64> = toks
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(no, "bad float"))?;
    if vals.len() != len {
        return Err(Error::format(no, format!("expected {len} values, got {}", vals.len())));
    }
    Ok(Array1::from_vec(vals))
}

fn parse_mat(line: &str, no: usize, name: &str) -> Result<Array2<f64>> {
    let mut toks = line.split_whitespace();
    let tag = toks.next().unwrap_or("");
    if tag != name {
        return Err(Error::format(no, format!("expected '{name}', got '{tag}'")));
    }
    let rows: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(no, "bad row count"))?;
    let cols: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(no, "bad column count"))?;
    let vals: Vec<f64> = toks
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(no, "bad float"))?;
    if vals.len() != rows * cols {
        return Err(Error::format(
            no,
            format!("expected {} values, got {}", rows * cols, vals.len()),
        ));
    }
    Array2::from_shape_vec((rows, cols), vals).map_err(|e| Error::format(no, e.to_string()))
}

fn check_finite(model: &MetaModel) -> Result<()> {
    let ok = match model {
        MetaModel::Gmm(g) => g
            .params
            .weights
            .iter()
            .chain(g.params.means.iter())
            .chain(g.params.variances.iter())
            .all(|v| v.is_finite()),
        MetaModel::Rbm(r) => r
            .params
            .w
            .iter()
            .chain(r.params.b_visible.iter())
            .chain(r.params.c_hidden.iter())
            .all(|v| v.is_finite()),
        MetaModel::Vae(v) => v.flat_params().iter().all(|x| x.is_finite()),
        MetaModel::Tabular(t) => t.joint.iter().all(|v| v.is_finite()),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::NonFinite("model parameters".into()))
    }
}

fn push_mlp(out: &mut String, name: &str, mlp: &Mlp) {
    let _ = writeln!(out, "{name} {}", mlp.layers.len());
    for layer in &mlp.layers {
        push_mat(out, "w", &layer.w);
        push_vec(out, "b", &layer.b);
    }
}

fn parse_mlp(lines: &mut Lines<'_>, name: &str) -> Result<Mlp> {
    let (no, header) = lines.next()?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some(name) {
        return Err(Error::format(no, format!("expected '{name}' block")));
    }
    let count: usize = toks
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format(no, "bad layer count"))?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, line) = lines.next()?;
        let w = parse_mat(line, no, "w")?;
        let (no, line) = lines.next()?;
        let b = parse_vec(line, no, "b")?;
        if b.len() != w.nrows() {
            return Err(Error::format(no, "bias length mismatch"));
        }
        layers.push(Dense { w, b });
    }
    Ok(Mlp { layers })
}

/// Serialize one model to its text record.
pub fn metamodel_to_text(model: &MetaModel) -> Result<String> {
    check_finite(model)?;
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "family {}", model.family().tag());
    let _ = writeln!(out, "visible {}", model.visible_space());
    let _ = writeln!(out, "hidden {}", model.hidden_space());
    match model {
        MetaModel::Gmm(g) => {
            push_vec(&mut out, "weights", &g.params.weights);
            push_mat(&mut out, "means", &g.params.means);
            push_mat(&mut out, "variances", &g.params.variances);
        }
        MetaModel::Rbm(r) => {
            push_mat(&mut out, "w", &r.params.w);
            push_vec(&mut out, "b_visible", &r.params.b_visible);
            push_vec(&mut out, "c_hidden", &r.params.c_hidden);
        }
        MetaModel::Vae(v) => {
            let _ = writeln!(out, "latent {}", v.latent_dim);
            push_mlp(&mut out, "encoder", &v.encoder);
            push_mlp(&mut out, "decoder", &v.decoder);
        }
        MetaModel::Tabular(t) => {
            push_mat(&mut out, "joint", &t.joint);
        }
    }
    out.push_str("end\n");
    Ok(out)
}

fn metamodel_from_lines(lines: &mut Lines<'_>) -> Result<MetaModel> {
    lines.expect(MODEL_MAGIC)?;
    let (no, fam_line) = lines.next()?;
    let family = fam_line
        .strip_prefix("family ")
        .ok_or_else(|| Error::format(no, "expected 'family <tag>'"))?
        .trim()
        .to_string();
    let (no, vis_line) = lines.next()?;
    let visible: Space = vis_line
        .strip_prefix("visible ")
        .ok_or_else(|| Error::format(no, "expected 'visible <space>'"))?
        .trim()
        .parse()
        .map_err(|e: Error| Error::format(no, e.to_string()))?;
    let (no, hid_line) = lines.next()?;
    let hidden: Space = hid_line
        .strip_prefix("hidden ")
        .ok_or_else(|| Error::format(no, "expected 'hidden <space>'"))?
        .trim()
        .parse()
        .map_err(|e: Error| Error::format(no, e.to_string()))?;

    let model = match family.as_str() {
        "gmm" => {
            let (no, line) = lines.next()?;
            let weights = parse_vec(line, no, "weights")?;
            let (no, line) = lines.next()?;
            let means = parse_mat(line, no, "means")?;
            let (no, line) = lines.next()?;
            let variances = parse_mat(line, no, "variances")?;
            MetaModel::Gmm(GmmModel::new(GmmParams {
                weights,
                means,
                variances,
            })?)
        }
        "rbm" => {
            let (no, line) = lines.next()?;
            let w = parse_mat(line, no, "w")?;
            let (no, line) = lines.next()?;
            let b_visible = parse_vec(line, no, "b_visible")?;
            let (no, line) = lines.next()?;
            let c_hidden = parse_vec(line, no, "c_hidden")?;
            MetaModel::Rbm(RbmModel::new(RbmParams {
                w,
                b_visible,
                c_hidden,
            })?)
        }
        "vae" => {
            let (no, line) = lines.next()?;
            let latent: usize = line
                .strip_prefix("latent ")
                .and_then(|t| t.trim().parse().ok())
                .ok_or_else(|| Error::format(no, "expected 'latent <n>'"))?;
            let encoder = parse_mlp(lines, "encoder")?;
            let decoder = parse_mlp(lines, "decoder")?;
            MetaModel::Vae(VaeModel::from_parts(visible, latent, encoder, decoder)?)
        }
        "tabular" => {
            let (no, line) = lines.next()?;
            let joint = parse_mat(line, no, "joint")?;
            MetaModel::Tabular(TabularModel::new(visible, hidden, joint)?)
        }
        other => {
            return Err(Error::format(no, format!("unknown family '{other}'")));
        }
    };
    lines.expect("end")?;
    if model.visible_space() != visible || model.hidden_space() != hidden {
        return Err(Error::format(no, "declared spaces do not match parameters"));
    }
    Ok(model)
}

pub fn metamodel_from_text(text: &str) -> Result<MetaModel> {
    let mut lines = Lines::new(text);
    metamodel_from_lines(&mut lines)
}

pub fn save_metamodel(model: &MetaModel, path: &Path) -> Result<()> {
    std::fs::write(path, metamodel_to_text(model)?)?;
    Ok(())
}

pub fn load_metamodel(path: &Path) -> Result<MetaModel> {
    metamodel_from_text(&std::fs::read_to_string(path)?)
}

/// Chain record: manifest plus concatenated model records.
pub fn cascade_to_text(model: &CascadeModel) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{CASCADE_MAGIC}");
    let _ = writeln!(out, "models {}", model.len());
    let mut spaces = vec![model.visible_space().to_string()];
    for m in model.models() {
        spaces.push(m.hidden_space().to_string());
    }
    let _ = writeln!(out, "spaces {}", spaces.join(" "));
    for m in model.models() {
        out.push_str(&metamodel_to_text(m)?);
    }
    Ok(out)
}

pub fn cascade_from_text(text: &str) -> Result<CascadeModel> {
    let mut lines = Lines::new(text);
    lines.expect(CASCADE_MAGIC)?;
    let (no, count_line) = lines.next()?;
    let count: usize = count_line
        .strip_prefix("models ")
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| Error::format(no, "expected 'models <k>'"))?;
    let (no, spaces_line) = lines.next()?;
    if !spaces_line.starts_with("spaces ") {
        return Err(Error::format(no, "expected 'spaces ...'"));
    }
    let mut models = Vec::with_capacity(count);
    for _ in 0..count {
        models.push(metamodel_from_lines(&mut lines)?);
    }
    CascadeModel::new(models)
}

pub fn save_cascade(model: &CascadeModel, path: &Path) -> Result<()> {
    std::fs::write(path, cascade_to_text(model)?)?;
    Ok(())
}

pub fn load_cascade(path: &Path) -> Result<CascadeModel> {
    cascade_from_text(&std::fs::read_to_string(path)?)
}

/// Save an ensemble as a directory: a manifest naming per-component files,
/// the exponent vector, and the stored partition estimate with its
/// estimator metadata.
pub fn save_ensemble(ens: &MultiplicativeEnsemble, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "{ENSEMBLE_MAGIC}");
    let _ = writeln!(manifest, "components {}", ens.components.len());
    for (i, comp) in ens.components.iter().enumerate() {
        let (kind, file) = match &comp.model {
            ComponentModel::Meta(m) => {
                let file = format!("component_{i}.gbm");
                save_metamodel(m, &dir.join(&file))?;
                ("meta", file)
            }
            ComponentModel::Cascade(c) => {
                let file = format!("component_{i}.gbc");
                save_cascade(c, &dir.join(&file))?;
                ("cascade", file)
            }
        };
        let _ = writeln!(manifest, "component {i} {kind} {} {file}", comp.alpha);
    }
    match &ens.log_z {
        Some(z) => {
            let _ = writeln!(
                manifest,
                "logz {} {} {} {} {}",
                z.value, z.std_err, z.n_samples, z.proposal, z.seed
            );
        }
        None => {
            let _ = writeln!(manifest, "logz none");
        }
    }
    std::fs::write(dir.join("manifest"), manifest)?;
    Ok(())
}

pub fn load_ensemble(dir: &Path) -> Result<MultiplicativeEnsemble> {
    let text = std::fs::read_to_string(dir.join("manifest"))?;
    let mut lines = Lines::new(&text);
    lines.expect(ENSEMBLE_MAGIC)?;
    let (no, count_line) = lines.next()?;
    let count: usize = count_line
        .strip_prefix("components ")
        .and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| Error::format(no, "expected 'components <n>'"))?;
    let mut components = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, line) = lines.next()?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "component" {
            return Err(Error::format(no, "expected 'component <i> <kind> <alpha> <file>'"));
        }
        let alpha: f64 = toks[3]
            .parse()
            .map_err(|_| Error::format(no, "bad alpha"))?;
        let model = match toks[2] {
            "meta" => ComponentModel::Meta(load_metamodel(&dir.join(toks[4]))?),
            "cascade" => ComponentModel::Cascade(load_cascade(&dir.join(toks[4]))?),
            other => return Err(Error::format(no, format!("unknown component kind '{other}'"))),
        };
        components.push(DensityComponent { model, alpha });
    }
    let (no, z_line) = lines.next()?;
    let log_z = if z_line.trim() == "logz none" {
        None
    } else {
        let toks: Vec<&str> = z_line.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "logz" {
            return Err(Error::format(no, "expected 'logz <value> <se> <n> <proposal> <seed>'"));
        }
        Some(LogZEstimate {
            value: toks[1].parse().map_err(|_| Error::format(no, "bad logz value"))?,
            std_err: toks[2].parse().map_err(|_| Error::format(no, "bad logz se"))?,
            n_samples: toks[3].parse().map_err(|_| Error::format(no, "bad logz n"))?,
            proposal: toks[4].to_string(),
            seed: toks[5].parse().map_err(|_| Error::format(no, "bad logz seed"))?,
        })
    };
    MultiplicativeEnsemble::new(components, log_z)
}

//! Datasets: in-memory representation, the GBDS text format, and synthetic
//! generators used by the benchmarks.
//!
//! GBDS is a deliberately plain format: a one-line header
//! `GBDS 1 <n> <d> <kind>` optionally followed by the flags `W` (per-example
//! weight column) and `L` (trailing integer label column), then one
//! whitespace-separated row per example. Anything a shell script can cut
//! apart can read it.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::{Space, SpaceKind};

#[derive(Clone, Debug)]
pub struct Dataset {
    points: Array2<f64>,
    weights: Option<Array1<f64>>,
    space: Space,
}

impl Dataset {
    pub fn new(points: Array2<f64>, space: Space) -> Result<Self> {
        Self::with_weights(points, None, space)
    }

    pub fn with_weights(
        points: Array2<f64>,
        weights: Option<Array1<f64>>,
        space: Space,
    ) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        for row in points.rows() {
            space.check_point(row)?;
        }
        if let Some(w) = &weights {
            if w.len() != points.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: points.nrows(),
                    got: w.len(),
                });
            }
            if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::BadParams("weights must be finite and >= 0".into()));
            }
            if w.sum() <= 0.0 {
                return Err(Error::BadParams("weights must not all be zero".into()));
            }
        }
        Ok(Dataset {
            points,
            weights,
            space,
        })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn weights(&self) -> Option<&Array1<f64>> {
        self.weights.as_ref()
    }

    /// Per-example weights normalized to sum to 1 (the empirical
    /// distribution the expectations run over).
    pub fn probability_weights(&self) -> Array1<f64> {
        match &self.weights {
            Some(w) => {
                let total = w.sum();
                w.mapv(|v| v / total)
            }
            None => Array1::from_elem(self.n(), 1.0 / self.n() as f64),
        }
    }

    /// Per-example weights normalized to mean 1 (what trainers consume).
    pub fn trainer_weights(&self) -> Array1<f64> {
        match &self.weights {
            Some(w) => {
                let mean = w.sum() / w.len() as f64;
                w.mapv(|v| v / mean)
            }
            None => Array1::from_elem(self.n(), 1.0),
        }
    }

    pub fn replace_weights(&self, weights: Array1<f64>) -> Result<Dataset> {
        Dataset::with_weights(self.points.clone(), Some(weights), self.space)
    }
}

/// Labeled + unlabeled pool sharing one visible space.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub unlabeled: Dataset,
    pub labeled: Dataset,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        unlabeled: Dataset,
        labeled: Dataset,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyLabeledSet);
        }
        if labels.len() != labeled.n() {
            return Err(Error::DimensionMismatch {
                expected: labeled.n(),
                got: labels.len(),
            });
        }
        if unlabeled.space() != labeled.space() {
            return Err(Error::IncompatibleSpaces(
                "labeled and unlabeled parts must share the visible space".into(),
            ));
        }
        if labels.iter().any(|&y| y >= n_classes) {
            return Err(Error::BadParams("label out of range".into()));
        }
        Ok(LabeledDataset {
            unlabeled,
            labeled,
            labels,
            n_classes,
        })
    }
}

fn kind_token(space: Space) -> &'static str {
    match space.kind() {
        SpaceKind::Binary => "binary",
        SpaceKind::Real => "real",
        SpaceKind::Categorical => "categorical",
    }
}

fn space_from_tokens(kind: &str, d: usize, line: usize) -> Result<Space> {
    match kind {
        "binary" => Ok(Space::binary(d)),
        "real" => Ok(Space::real(d)),
        "categorical" => Ok(Space::categorical(d.max(2))),
        other => Err(Error::format(line, format!("unknown space kind '{other}'"))),
    }
}

/// Serialize a dataset (and optional labels) in GBDS form.
pub fn format_dataset(ds: &Dataset, labels: Option<&[usize]>) -> String {
    let mut header = format!(
        "GBDS 1 {} {} {}",
        ds.n(),
        ds.dim(),
        kind_token(ds.space())
    );
    if ds.weights().is_some() {
        header.push_str(" W");
    }
    if labels.is_some() {
        header.push_str(" L");
    }
    let mut out = header;
    out.push('\n');
    for i in 0..ds.n() {
        let mut first = true;
        for v in ds.point(i) {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        if let Some(w) = ds.weights() {
            let _ = write!(out, " {}", w[i]);
        }
        if let Some(ls) = labels {
            let _ = write!(out, " {}", ls[i]);
        }
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, format_dataset(ds, None))?;
    Ok(())
}

pub fn save_labeled(ds: &Dataset, labels: &[usize], path: &Path) -> Result<()> {
    std::fs::write(path, format_dataset(ds, Some(labels)))?;
    Ok(())
}

/// Parse GBDS text. Returns the dataset plus labels when the `L` flag is
/// present.
pub fn parse_dataset(text: &str) -> Result<(Dataset, Option<Vec<usize>>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(1, "empty file, expected GBDS header"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "GBDS" {
        return Err(Error::format(1, "expected header 'GBDS 1 <n> <d> <kind>'"));
    }
    if tokens[1] != "1" {
        return Err(Error::format(1, format!("unsupported version '{}'", tokens[1])));
    }
    let n: usize = tokens[2]
        .parse()
        .map_err(|_| Error::format(1, "bad row count in header"))?;
    let d: usize = tokens[3]
        .parse()
        .map_err(|_| Error::format(1, "bad dimension in header"))?;
    let space = space_from_tokens(tokens[4], d, 1)?;
    let mut has_weights = false;
    let mut has_labels = false;
    for flag in &tokens[5..] {
        match *flag {
            "W" => has_weights = true,
            "L" => has_labels = true,
            other => return Err(Error::format(1, format!("unknown header flag '{other}'"))),
        }
    }

    let expected_cols = d + usize::from(has_weights) + usize::from(has_labels);
    let mut points = Array2::zeros((n, d));
    let mut weights = if has_weights {
        Some(Array1::zeros(n))
    } else {
        None
    };
    let mut labels = if has_labels { Some(Vec::with_capacity(n)) } else { None };

    let mut row = 0usize;
    for (lineno, line) in lines {
        let line_number = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        if row >= n {
            return Err(Error::format(
                line_number,
                format!("more than the {n} rows declared in the header"),
            ));
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != expected_cols {
            return Err(Error::format(
                line_number,
                format!("expected {expected_cols} columns, got {}", cols.len()),
            ));
        }
        for j in 0..d {
            let v: f64 = cols[j].parse().map_err(|_| {
                Error::format(line_number, format!("bad value '{}' in column {}", cols[j], j + 1))
            })?;
            match space.kind() {
                SpaceKind::Binary if v != 0.0 && v != 1.0 => {
                    return Err(Error::format(line_number, "value outside Binary space"));
                }
                SpaceKind::Categorical
                    if v.fract() != 0.0 || v < 0.0 || space.check_point(ndarray::aview1(&[v])).is_err() =>
                {
                    return Err(Error::format(line_number, "value outside Categorical space"));
                }
                _ => {}
            }
            if !v.is_finite() {
                return Err(Error::format(line_number, "non-finite value"));
            }
            points[[row, j]] = v;
        }
        let mut col = d;
        if let Some(w) = weights.as_mut() {
            let v: f64 = cols[col]
                .parse()
                .map_err(|_| Error::format(line_number, "bad weight value"))?;
            w[row] = v;
            col += 1;
        }
        if let Some(ls) = labels.as_mut() {
            let v: usize = cols[col]
                .parse()
                .map_err(|_| Error::format(line_number, "bad label value"))?;
            ls.push(v);
        }
        row += 1;
    }
    if row != n {
        return Err(Error::format(
            row + 1,
            format!("truncated file: header declared {n} rows, found {row}"),
        ));
    }
    let ds = Dataset::with_weights(points, weights, space)?;
    Ok((ds, labels))
}

pub fn load_dataset(path: &Path) -> Result<(Dataset, Option<Vec<usize>>)> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

/// Threshold a [0,1]-scaled real dataset into a binary one. The threshold is
/// recorded in the manifest of any dataset produced this way.
pub fn binarize(ds: &Dataset, threshold: f64) -> Result<Dataset> {
    let points = ds.points().mapv(|v| if v >= threshold { 1.0 } else { 0.0 });
    Dataset::with_weights(points, ds.weights().cloned(), Space::binary(ds.dim()))
}

/// Synthetic dataset families for desk-scale experiments.
#[derive(Clone, Debug)]
pub enum SynthKind {
    /// Mixture of diagonal Gaussians.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    },
    /// Uniform binary vectors with an even number of ones.
    BinaryParity { dim: usize },
    /// Two interleaved half-circles with Gaussian noise.
    TwoArcs { noise: f64 },
}

impl SynthKind {
    /// Two tight clusters at +/-(3,3); the stock two-cluster benchmark.
    pub fn two_cluster_default() -> Self {
        SynthKind::GaussianMixture {
            weights: vec![0.5, 0.5],
            means: vec![vec![3.0, 3.0], vec![-3.0, -3.0]],
            variances: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        }
    }
}

/// Generate a synthetic dataset together with its ground-truth manifest.
pub fn make_synthetic(kind: &SynthKind, n: usize, seed: u64) -> Result<(Dataset, String)> {
    if n == 0 {
        return Err(Error::BadParams("need n >= 1 samples".into()));
    }
    let mut rng = rng::seeded(seed);
    match kind {
        SynthKind::GaussianMixture {
            weights,
            means,
            variances,
        } => {
            let k = weights.len();
            if k == 0 || means.len() != k || variances.len() != k {
                return Err(Error::BadParams(
                    "mixture needs matching weights/means/variances".into(),
                ));
            }
            let d = means[0].len();
            if d == 0 || means.iter().any(|m| m.len() != d) || variances.iter().any(|v| v.len() != d)
            {
                return Err(Error::BadParams("inconsistent mixture dimensions".into()));
            }
            if weights.iter().any(|&w| w < 0.0) {
                return Err(Error::BadParams("mixture weights must be >= 0".into()));
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(Error::BadParams("mixture weights must not all be zero".into()));
            }
            let mut points = Array2::zeros((n, d));
            for i in 0..n {
                let u: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut comp = k - 1;
                for (j, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        comp = j;
                        break;
                    }
                }
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    points[[i, j]] = means[comp][j] + variances[comp][j].sqrt() * z;
                }
            }
            let ds = Dataset::new(points, Space::real(d))?;
            let mut manifest = format!("kind gaussian-mixture\nseed {seed}\nn {n}\nd {d}\nK {k}\n");
            for j in 0..k {
                let _ = writeln!(
                    manifest,
                    "component {j} weight {} mean {:?} variance {:?}",
                    weights[j] / total,
                    means[j],
                    variances[j]
                );
            }
            Ok((ds, manifest))
        }
        SynthKind::BinaryParity { dim } => {
            if *dim < 2 {
                return Err(Error::BadParams("parity data needs dim >= 2".into()));
            }
            let mut points = Array2::zeros((n, *dim));
            for i in 0..n {
                let mut parity = 0u8;
                for j in 0..dim - 1 {
                    let bit = u8::from(rng.random::<f64>() < 0.5);
                    parity ^= bit;
                    points[[i, j]] = bit as f64;
                }
                points[[i, dim - 1]] = parity as f64;
            }
            let ds = Dataset::new(points, Space::binary(*dim))?;
            let manifest = format!("kind binary-parity\nseed {seed}\nn {n}\nd {dim}\nparity even\n");
            Ok((ds, manifest))
        }
        SynthKind::TwoArcs { noise } => {
            let mut points = Array2::zeros((n, 2));
            for i in 0..n {
                let upper = rng.random::<f64>() < 0.5;
                let t = rng.random::<f64>() * std::f64::consts::PI;
                let (cx, cy, sign) = if upper { (0.0, 0.0, 1.0) } else { (1.0, 0.5, -1.0) };
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                points[[i, 0]] = cx + t.cos() + noise * nx;
                points[[i, 1]] = cy + sign * t.sin() - 0.25 + noise * ny;
            }
            let ds = Dataset::new(points, Space::real(2))?;
            let manifest = format!("kind two-arcs\nseed {seed}\nn {n}\nnoise {noise}\n");
            Ok((ds, manifest))
        }
    }
}

/// Split rows into the halves nearest each of two reference points; used by
/// generation checks on two-cluster data.
pub fn split_by_nearest(ds: &Dataset, a: &[f64], b: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut ia = Vec::new();
    let mut ib = Vec::new();
    for i in 0..ds.n() {
        let p = ds.point(i);
        let da: f64 = p.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
        let db: f64 = p.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        if da <= db {
            ia.push(i);
        } else {
            ib.push(i);
        }
    }
    (ia, ib)
}

pub fn mean_of_rows(ds: &Dataset, idx: &[usize]) -> Array1<f64> {
    let mut m = Array1::zeros(ds.dim());
    for &i in idx {
        m = m + ds.point(i);
    }
    m / idx.len().max(1) as f64
}

impl Dataset {
    /// Stack two datasets (same space) with explicit weights per block.
    pub fn pooled(a: &Dataset, wa: f64, b: &Dataset, wb: f64) -> Result<Dataset> {
        if a.space() != b.space() {
            return Err(Error::IncompatibleSpaces("pooled datasets must share a space".into()));
        }
        let mut points = Array2::zeros((a.n() + b.n(), a.dim()));
        points
            .slice_mut(ndarray::s![..a.n(), ..])
            .assign(a.points());
        points
            .slice_mut(ndarray::s![a.n().., ..])
            .assign(b.points());
        let mut weights = Array1::zeros(a.n() + b.n());
        for i in 0..a.n() {
            weights[i] = wa / a.n() as f64;
        }
        for i in 0..b.n() {
            weights[a.n() + i] = wb / b.n() as f64;
        }
        Dataset::with_weights(points, Some(weights), a.space())
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        let points = self.points.select(Axis(0), idx);
        let weights = self.weights.as_ref().map(|w| {
            Array1::from_iter(idx.iter().map(|&i| w[i]))
        });
        Dataset::with_weights(points, weights, self.space)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_identical() {
        let (ds, _) = make_synthetic(&SynthKind::two_cluster_default(), 50, 3).unwrap();
        let text = format_dataset(&ds, None);
        let (back, labels) = parse_dataset(&text).unwrap();
        assert!(labels.is_none());
        let text2 = format_dataset(&back, None);
        assert_eq!(text, text2);
        for i in 0..ds.n() {
            for j in 0..ds.dim() {
                assert_eq!(ds.points()[[i, j]].to_bits(), back.points()[[i, j]].to_bits());
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, _) = make_synthetic(&SynthKind::two_cluster_default(), 64, 9).unwrap();
        let (b, _) = make_synthetic(&SynthKind::two_cluster_default(), 64, 9).unwrap();
        assert_eq!(format_dataset(&a, None), format_dataset(&b, None));
    }

    #[test]
    fn parity_rows_have_even_parity() {
        let (ds, _) = make_synthetic(&SynthKind::BinaryParity { dim: 6 }, 200, 5).unwrap();
        for i in 0..ds.n() {
            let ones: f64 = ds.point(i).sum();
            assert_eq!((ones as usize) % 2, 0, "row {i} has odd parity");
        }
    }

    #[test]
    fn gaussian_mixture_cluster_means() {
        let (ds, _) = make_synthetic(&SynthKind::two_cluster_default(), 1000, 11).unwrap();
        let (ia, ib) = split_by_nearest(&ds, &[3.0, 3.0], &[-3.0, -3.0]);
        let ma = mean_of_rows(&ds, &ia);
        let mb = mean_of_rows(&ds, &ib);
        for j in 0..2 {
            assert!((ma[j] - 3.0).abs() < 0.3, "cluster A mean off: {ma}");
            assert!((mb[j] + 3.0).abs() < 0.3, "cluster B mean off: {mb}");
        }
    }

    #[test]
    fn truncated_file_names_offset() {
        let text = "GBDS 1 3 2 real\n0.0 1.0\n0.5 0.5\n";
        let err = parse_dataset(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "unexpected message: {msg}");
        assert!(msg.contains("truncated"), "unexpected message: {msg}");
    }

    #[test]
    fn binary_value_out_of_space_is_rejected() {
        let text = "GBDS 1 1 2 binary\n0 2\n";
        let err = parse_dataset(text).unwrap_err();
        assert!(err.to_string().contains("value outside Binary space"));
    }

    #[test]
    fn binarize_thresholds_at_half() {
        let pts = ndarray::array![[0.2, 0.7], [0.5, 0.49]];
        let ds = Dataset::new(pts, Space::real(2)).unwrap();
        let b = binarize(&ds, 0.5).unwrap();
        assert_eq!(b.points(), &ndarray::array![[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(b.space(), Space::binary(2));
    }
}

//! Synthetic spiked-covariance data and dataset file formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::problems::Dataset;
use crate::sampling::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LabelModel {
    /// y = ±1 with P(y = 1) = 1/(1 + e^{−⟨x, θ⟩}).
    #[default]
    LogisticPlanted,
    /// y = ⟨x, θ⟩ + N(0, 1).
    LinearGaussian,
    /// y = sign⟨x, θ⟩, ties to +1.
    SignPlanted,
}

/// Gaussian design with covariance
/// Σ = floor·I + Σ_j (spike_j − floor) v_j v_jᵀ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikedModelSpec {
    pub n: usize,
    pub p: usize,
    /// Strictly decreasing, all above `noise_floor`. Its length is r.
    #[serde(default = "default_spikes")]
    pub spike_values: Vec<f64>,
    #[serde(default = "default_floor")]
    pub noise_floor: f64,
    #[serde(default)]
    pub label_model: LabelModel,
    /// ‖θ_true‖₂; θ_true is uniform on the sphere of this radius.
    #[serde(default = "default_signal")]
    pub signal: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_spikes() -> Vec<f64> {
    vec![20.0, 15.0, 10.0]
}

fn default_floor() -> f64 {
    1.0
}

fn default_signal() -> f64 {
    1.0
}

// Independent streams per generation stage.
const DIRECTIONS: u64 = 0;
const THETA: u64 = 1;
const ROWS: u64 = 2;
const LABELS: u64 = 3;

impl SpikedModelSpec {
    /// Default spikes 20/15/10 over floor 1 with logistic labels.
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            spike_values: default_spikes(),
            noise_floor: default_floor(),
            label_model: LabelModel::default(),
            signal: default_signal(),
            seed,
        }
    }

    pub fn with_spikes(mut self, spikes: Vec<f64>) -> Self {
        self.spike_values = spikes;
        self
    }

    pub fn with_labels(mut self, model: LabelModel) -> Self {
        self.label_model = model;
        self
    }

    pub fn with_signal(mut self, signal: f64) -> Self {
        self.signal = signal;
        self
    }

    pub fn rank(&self) -> usize {
        self.spike_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if self.rank() >= self.p {
            return bad(format!(
                "number of spikes r = {} must be less than p = {}",
                self.rank(),
                self.p
            ));
        }
        if !(self.noise_floor > 0.0 && self.noise_floor.is_finite()) {
            return bad(format!("noise floor must be positive, got {}", self.noise_floor));
        }
        if self.spike_values.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("spike values must be strictly decreasing".into());
        }
        if self
            .spike_values
            .iter()
            .any(|s| !(*s > self.noise_floor && s.is_finite()))
        {
            return bad("spike values must exceed the noise floor".into());
        }
        if !(self.signal >= 0.0 && self.signal.is_finite()) {
            return bad(format!("signal must be non-negative, got {}", self.signal));
        }
        Ok(())
    }

    /// Σ as a dense matrix.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.validate()?;
        let v = self.directions();
        let mut sigma = DMatrix::identity(self.p, self.p) * self.noise_floor;
        for (j, s) in self.spike_values.iter().enumerate() {
            let col = v.column(j);
            sigma += (col * col.transpose()) * (s - self.noise_floor);
        }
        Ok(sigma)
    }

    /// Orthonormal spike directions, p×r.
    fn directions(&self) -> DMatrix<f64> {
        let r = self.rank();
        if r == 0 {
            return DMatrix::zeros(self.p, 0);
        }
        let mut rng = stream(self.seed, DIRECTIONS);
        let g: DMatrix<f64> = DMatrix::from_fn(self.p, r, |_, _| StandardNormal.sample(&mut rng));
        g.qr().q()
    }
}

/// Draws a dataset from the spiked model.
pub fn generate_spiked(spec: &SpikedModelSpec) -> Result<Dataset> {
    Ok(generate_spiked_with_truth(spec)?.0)
}

/// Like [`generate_spiked`], also returning the planted θ_true.
pub fn generate_spiked_with_truth(spec: &SpikedModelSpec) -> Result<(Dataset, DVector<f64>)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let v = spec.directions();
    let root_floor = spec.noise_floor.sqrt();
    let gains: Vec<f64> = spec.spike_values.iter().map(|s| s.sqrt() - root_floor).collect();

    let mut rng = stream(spec.seed, THETA);
    let dir: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
    let theta = if spec.signal == 0.0 {
        DVector::zeros(p)
    } else {
        &dir * (spec.signal / dir.norm())
    };

    // x = Σ^{1/2} z = √floor·z + Σ_j (√s_j − √floor) v_j ⟨v_j, z⟩.
    let mut rng = stream(spec.seed, ROWS);
    let mut x = Vec::with_capacity(n * p);
    for _ in 0..n {
        let z: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let mut row = &z * root_floor;
        for (j, gain) in gains.iter().enumerate() {
            let col = v.column(j);
            row.axpy(gain * col.dot(&z), &col, 1.0);
        }
        x.extend(row.iter());
    }

    let mut rng = stream(spec.seed, LABELS);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let y = (0..n)
        .map(|i| {
            let z: f64 = x[i * p..(i + 1) * p].iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            match spec.label_model {
                LabelModel::LogisticPlanted => {
                    let prob = 1.0 / (1.0 + (-z).exp());
                    if rng.random::<f64>() < prob {
                        1.0
                    } else {
                        -1.0
                    }
                }
                LabelModel::LinearGaussian => z + noise.sample(&mut rng),
                LabelModel::SignPlanted => {
                    if z >= 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            }
        })
        .collect();
    Ok((Dataset::new(n, p, x, y)?, theta))
}

/// Maps labels taking exactly two distinct values to ±1 (smaller → −1).
/// Any other label set is returned unchanged.
pub fn map_binary_labels(y: &mut [f64]) {
    let mut distinct: Vec<f64> = Vec::new();
    for v in y.iter() {
        if !distinct.contains(v) {
            distinct.push(*v);
            if distinct.len() > 2 {
                return;
            }
        }
    }
    if distinct.len() != 2 {
        return;
    }
    let lo = distinct[0].min(distinct[1]);
    for v in y.iter_mut() {
        *v = if *v == lo { -1.0 } else { 1.0 };
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("{tok:?}: {e}"),
    })
}

/// Parses comma-separated numeric rows; `label_column` is 0-based.
pub fn parse_csv(text: &str, label_column: usize) -> Result<Dataset> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut width = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let vals = raw
            .split(',')
            .map(|t| parse_num(t, line))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => {
                if label_column >= vals.len() {
                    return Err(Error::Shape(format!(
                        "label column {label_column} out of range for {} columns",
                        vals.len()
                    )));
                }
                width = Some(vals.len());
            }
            Some(w) if w != vals.len() => {
                return Err(Error::Shape(format!(
                    "line {line} has {} columns, expected {w}",
                    vals.len()
                )))
            }
            _ => {}
        }
        for (j, v) in vals.into_iter().enumerate() {
            if j == label_column {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    let Some(w) = width else {
        return Err(Error::Shape("no data rows".into()));
    };
    if w < 2 {
        return Err(Error::Shape("need at least one feature column besides the label".into()));
    }
    map_binary_labels(&mut y);
    Dataset::new(y.len(), w - 1, x, y)
}

pub fn load_csv(path: impl AsRef<Path>, label_column: usize) -> Result<Dataset> {
    parse_csv(&fs::read_to_string(path)?, label_column)
}

/// Parses LIBSVM lines `label idx:val ...` with 1-based indices.
/// Without `p`, the width is the largest index seen.
pub fn parse_libsvm(text: &str, p: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut y = Vec::new();
    let mut max_idx = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let label = parse_num(toks.next().expect("non-empty line"), line)?;
        let mut row = Vec::new();
        for tok in toks {
            let (i, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected idx:val, got {tok:?}"),
            })?;
            let i: usize = i.parse().map_err(|e| Error::Parse {
                line,
                message: format!("bad index {i:?}: {e}"),
            })?;
            if i == 0 {
                return Err(Error::Parse {
                    line,
                    message: "indices are 1-based".into(),
                });
            }
            max_idx = max_idx.max(i);
            row.push((i - 1, parse_num(v, line)?));
        }
        rows.push(row);
        y.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Shape("no data rows".into()));
    }
    let p = match p {
        Some(p) if p < max_idx => {
            return Err(Error::Shape(format!("feature index {max_idx} exceeds p = {p}")));
        }
        Some(p) => p,
        None => max_idx,
    };
    if p == 0 {
        return Err(Error::Shape("no features".into()));
    }
    let mut x = vec![0.0; rows.len() * p];
    for (r, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            x[r * p + j] = v;
        }
    }
    map_binary_labels(&mut y);
    Dataset::new(rows.len(), p, x, y)
}

pub fn load_libsvm(path: impl AsRef<Path>, p: Option<usize>) -> Result<Dataset> {
    parse_libsvm(&fs::read_to_string(path)?, p)
}

/// CSV text with the label in the last column. Values use the shortest
/// representation that parses back to the same f64.
pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.n() {
        for v in ds.row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", ds.labels()[i]);
    }
    out
}

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, to_csv(ds))?)
}

/// LIBSVM text; zero entries are omitted.
pub fn to_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.n() {
        let _ = write!(out, "{}", ds.labels()[i]);
        for (j, v) in ds.row(i).iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{v}", j + 1);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, to_libsvm(ds))?)
}

/// Centers each column and divides by its standard deviation, computed
/// with the n denominator so that (1, 3) maps to (−1, 1). Constant columns
/// are left untouched.
pub fn standardize(ds: &Dataset) -> Dataset {
    let (n, p) = (ds.n(), ds.p());
    let mut x = ds.design().to_vec();
    if n < 2 {
        return ds.clone();
    }
    for j in 0..p {
        let mut sum = CompensatedSum::new();
        (0..n).for_each(|i| sum.add(x[i * p + j]));
        let mean = sum.value() / n as f64;
        let mut ss = CompensatedSum::new();
        (0..n).for_each(|i| ss.add((x[i * p + j] - mean).powi(2)));
        let sd = (ss.value() / n as f64).sqrt();
        if !(sd > 0.0) {
            continue;
        }
        for i in 0..n {
            x[i * p + j] = (x[i * p + j] - mean) / sd;
        }
    }
    Dataset::new(n, p, x, ds.labels().to_vec()).expect("standardized data stays finite")
}

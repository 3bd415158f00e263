//! Datasets: teacher-generated Gaussian inputs for the perceptron task and
//! small 2D blob mixtures for the multiclass model.
//!
//! CSV layout: `sample_id,label,true_margin,x0,...,x{K-1}` with an empty
//! `true_margin` field when the data has no teacher.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{contract, Error, Result};
use crate::models::Label;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    /// Row-major `n x dim`.
    pub features: Vec<f64>,
    pub labels: Vec<Label>,
    pub true_margins: Option<Vec<f64>>,
    pub sample_ids: Vec<u64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<Label>, true_margins: Option<Vec<f64>>, sample_ids: Vec<u64>) -> Result<Self> {
        if dim == 0 {
            return Err(contract("dataset dimension must be positive"));
        }
        let n = labels.len();
        if features.len() != n * dim || sample_ids.len() != n {
            return Err(contract("dataset row counts disagree"));
        }
        if true_margins.as_ref().is_some_and(|m| m.len() != n) {
            return Err(contract("true margins row count disagrees"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(contract("features must be finite"));
        }
        Ok(Self {
            dim,
            features,
            labels,
            true_margins,
            sample_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows at `positions`, in that order, keeping their sample ids.
    pub fn subset(&self, positions: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(positions.len() * self.dim);
        positions.iter().for_each(|&i| features.extend_from_slice(self.row(i)));
        Dataset {
            dim: self.dim,
            features,
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            true_margins: self.true_margins.as_ref().map(|m| positions.iter().map(|&i| m[i]).collect()),
            sample_ids: positions.iter().map(|&i| self.sample_ids[i]).collect(),
        }
    }

    /// Position of each sample id, for joining manifests onto the data.
    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.sample_ids.iter().position(|s| *s == id)
    }
}

/// `n` standard normal inputs in `k` dimensions labelled by the teacher
/// `(1, 0, ..., 0)`; the true margin is `|x_1|`.
pub fn generate_teacher_dataset(k: usize, n: usize, seed: u64) -> Result<Dataset> {
    if k == 0 || n == 0 {
        return Err(contract("teacher data needs k >= 1 and n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * k).map(|_| StandardNormal.sample(&mut rng)).collect();
    let first = |i: usize| features[i * k];
    let labels = (0..n).map(|i| if first(i) >= 0.0 { 1 } else { -1 }).collect();
    let margins = (0..n).map(|i| first(i).abs()).collect();
    Dataset::new(k, features, labels, Some(margins), (0..n as u64).collect())
}

/// Blob centres for [`make_toy_multiclass`]: evenly spaced on the unit
/// circle, the first at `(1, 0)`.
pub fn toy_means(classes: usize) -> Vec<[f64; 2]> {
    (0..classes)
        .map(|c| {
            let t = TAU * c as f64 / classes as f64;
            let (s, co) = t.sin_cos();
            [if c == 0 { 1.0 } else { co }, if c == 0 { 0.0 } else { s }]
        })
        .collect()
}

/// `n` points from `classes` unit-variance Gaussian blobs in 2D; sample `i`
/// belongs to class `i % classes`.
pub fn make_toy_multiclass(classes: usize, n: usize, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(contract("toy data needs at least two classes"));
    }
    let means = toy_means(classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for mean in means[c] {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(mean + z);
        }
        labels.push(c as Label);
    }
    Dataset::new(2, features, labels, None, (0..n as u64).collect())
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::from("sample_id,label,true_margin");
    for j in 0..data.dim {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for i in 0..data.len() {
        out.push_str(&format!("{},{},", data.sample_ids[i], data.labels[i]));
        if let Some(m) = &data.true_margins {
            out.push_str(&m[i].to_string());
        }
        for v in data.row(i) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?.split(',').collect();
    if header.len() < 4 || header[..3] != ["sample_id", "label", "true_margin"] {
        return Err(Error::Parse("bad dataset header".into()));
    }
    let dim = header.len() - 3;
    let (mut ids, mut labels, mut margins, mut features) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut have_margins = None;
    for (row, line) in lines.enumerate() {
        let bad = |what: &str| Error::Parse(format!("dataset row {}: bad {what}", row + 1));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != dim + 3 {
            return Err(bad("column count"));
        }
        ids.push(cells[0].trim().parse::<u64>().map_err(|_| bad("sample_id"))?);
        labels.push(cells[1].trim().parse::<Label>().map_err(|_| bad("label"))?);
        let m = cells[2].trim();
        match (have_margins, m.is_empty()) {
            (None, empty) => have_margins = Some(!empty),
            (Some(h), empty) if h == empty => return Err(bad("true_margin (present on some rows only)")),
            _ => {}
        }
        if !m.is_empty() {
            margins.push(m.parse::<f64>().map_err(|_| bad("true_margin"))?);
        }
        for c in &cells[3..] {
            features.push(c.trim().parse::<f64>().map_err(|_| bad("feature"))?);
        }
    }
    let margins = have_margins.unwrap_or(false).then_some(margins);
    Dataset::new(dim, features, labels, margins, ids)
}

//! Binary soft-margin SVM trained with Platt's SMO, plus the data split and
//! ROC utilities around it.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    /// RBF with `γ = 1/dim`.
    pub fn rbf_for_dim(dim: usize) -> Self {
        Kernel::Rbf {
            gamma: 1.0 / dim.max(1) as f64,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Linear => f.write_str("linear"),
            Kernel::Rbf { gamma } => write!(f, "rbf(gamma={gamma})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: Kernel,
    pub c: f64,
    /// KKT tolerance.
    pub tol: f64,
    /// Consecutive full sweeps without an α change before stopping.
    pub max_passes: usize,
    /// Hard cap on sweeps.
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Linear,
            c: 10.0,
            tol: 1e-3,
            max_passes: 10,
            max_sweeps: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// Training-set index of each support vector.
    pub support_indices: Vec<usize>,
    pub alphas: Vec<f64>,
    pub labels: Vec<i8>,
    pub bias: f64,
    pub kernel: Kernel,
    pub c: f64,
    pub dimension: usize,
    pub sweeps: usize,
    /// Every training point met the KKT conditions within `tol` at exit.
    pub converged: bool,
}

fn check_labels(labels: &[i8]) -> Result<()> {
    if let Some(l) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::DegenerateLabels(format!("label {l} is not -1 or +1")));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::DegenerateLabels("both classes must be present".into()));
    }
    Ok(())
}

struct Smo<'a> {
    gram: Vec<f64>,
    n: usize,
    y: &'a [i8],
    alpha: Vec<f64>,
    /// Decision value `f(x_i)` without the bias.
    f: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
    rng: ChaCha8Rng,
}

const ALPHA_EPS: f64 = 1e-8;
const STEP_EPS: f64 = 1e-12;

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn error(&self, i: usize) -> f64 {
        self.f[i] + self.b - self.y[i] as f64
    }

    fn violates(&self, i: usize) -> bool {
        let r = self.error(i) * self.y[i] as f64;
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1] as f64, self.y[i2] as f64);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut new2 = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // objective at both ends of the segment
            let f1 = y1 * (e1 + self.b) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 + self.b) - s * a1 * k12 - a2 * k22;
            let obj = |a2n: f64| {
                let a1n = a1 + s * (a2 - a2n);
                a1n * f1 + a2n * f2 + 0.5 * a1n * a1n * k11 + 0.5 * a2n * a2n * k22 + s * a1n * a2n * k12
            };
            let (ol, oh) = (obj(lo), obj(hi));
            if ol < oh - STEP_EPS {
                lo
            } else if ol > oh + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        if new2 < ALPHA_EPS {
            new2 = 0.0;
        } else if new2 > self.c - ALPHA_EPS {
            new2 = self.c;
        }
        if (new2 - a2).abs() < STEP_EPS * (new2 + a2 + STEP_EPS) {
            return false;
        }
        let mut new1 = a1 + s * (a2 - new2);
        if new1 < 0.0 {
            new2 += s * new1;
            new1 = 0.0;
        } else if new1 > self.c {
            new2 += s * (new1 - self.c);
            new1 = self.c;
        }

        let (d1, d2) = (y1 * (new1 - a1), y2 * (new2 - a2));
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let bound = |a: f64| a > 0.0 && a < self.c;
        self.b = if bound(new1) {
            b1
        } else if bound(new2) {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        for k in 0..self.n {
            self.f[k] += d1 * self.gram[i1 * self.n + k] + d2 * self.gram[i2 * self.n + k];
        }
        self.alpha[i1] = new1;
        self.alpha[i2] = new2;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates(i2) {
            return false;
        }
        let e2 = self.error(i2);
        let free: Vec<usize> = (0..self.n)
            .filter(|&i| self.alpha[i] > 0.0 && self.alpha[i] < self.c)
            .collect();
        if free.len() > 1 {
            let mut best = None;
            let mut gap = -1.0;
            for &i in &free {
                let g = (self.error(i) - e2).abs();
                if g > gap {
                    gap = g;
                    best = Some(i);
                }
            }
            if let Some(i1) = best {
                if self.take_step(i1, i2) {
                    return true;
                }
            }
        }
        if !free.is_empty() {
            let start = self.rng.gen_range(0..free.len());
            for off in 0..free.len() {
                if self.take_step(free[(start + off) % free.len()], i2) {
                    return true;
                }
            }
        }
        let start = self.rng.gen_range(0..self.n);
        for off in 0..self.n {
            if self.take_step((start + off) % self.n, i2) {
                return true;
            }
        }
        false
    }
}

/// Trains on rows labeled `-1` / `+1`.
pub fn train_svm(rows: &[Vec<f64>], labels: &[i8], cfg: &SvmConfig) -> Result<SvmModel> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension(format!("{} rows but {} labels", rows.len(), labels.len())));
    }
    check_labels(labels)?;
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension("rows have unequal lengths".into()));
    }
    if !(cfg.c > 0.0) || !cfg.c.is_finite() || !(cfg.tol > 0.0) {
        return Err(Error::Config("svm needs C > 0 and tol > 0".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }

    let n = rows.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = cfg.kernel.eval(&rows[i], &rows[j]);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let mut smo = Smo {
        gram,
        n,
        y: labels,
        alpha: vec![0.0; n],
        f: vec![0.0; n],
        b: 0.0,
        c: cfg.c,
        tol: cfg.tol,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };

    let mut examine_all = true;
    let mut quiet_passes = 0;
    let mut sweeps = 0;
    while sweeps < cfg.max_sweeps && quiet_passes < cfg.max_passes {
        sweeps += 1;
        let mut changed = 0;
        if examine_all {
            for i in 0..n {
                changed += smo.examine(i) as usize;
            }
        } else {
            for i in 0..n {
                if smo.alpha[i] > 0.0 && smo.alpha[i] < smo.c {
                    changed += smo.examine(i) as usize;
                }
            }
        }
        if examine_all {
            quiet_passes = if changed == 0 { quiet_passes + 1 } else { 0 };
            examine_all = changed == 0;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    let converged = (0..n).all(|i| !smo.violates(i));
    let support: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();
    Ok(SvmModel {
        support_vectors: support.iter().map(|&i| rows[i].clone()).collect(),
        alphas: support.iter().map(|&i| smo.alpha[i]).collect(),
        labels: support.iter().map(|&i| labels[i]).collect(),
        support_indices: support,
        bias: smo.b,
        kernel: cfg.kernel,
        c: cfg.c,
        dimension: dim,
        sweeps,
        converged,
    })
}

impl SvmModel {
    /// Decision value and class; a score of exactly zero maps to `+1`.
    pub fn predict(&self, row: &[f64]) -> Result<(f64, i8)> {
        if row.len() != self.dimension {
            return Err(Error::Dimension(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.dimension
            )));
        }
        let score = self
            .support_vectors
            .iter()
            .zip(&self.alphas)
            .zip(&self.labels)
            .map(|((sv, a), &y)| a * y as f64 * self.kernel.eval(sv, row))
            .sum::<f64>()
            + self.bias;
        Ok((score, if score >= 0.0 { 1 } else { -1 }))
    }

    /// `|Σ αᵢyᵢ|`.
    pub fn equality_residual(&self) -> f64 {
        self.alphas.iter().zip(&self.labels).map(|(a, &y)| a * y as f64).sum::<f64>().abs()
    }

    pub fn satisfies_box(&self) -> bool {
        self.alphas.iter().all(|&a| (0.0..=self.c).contains(&a))
    }

    /// Largest KKT violation over the training set the model was fit on.
    pub fn kkt_violation(&self, rows: &[Vec<f64>], labels: &[i8]) -> Result<f64> {
        let mut alpha = vec![0.0; rows.len()];
        for (&i, &a) in self.support_indices.iter().zip(&self.alphas) {
            *alpha.get_mut(i).ok_or_else(|| Error::Dimension("support index out of range".into()))? = a;
        }
        let mut worst: f64 = 0.0;
        for ((row, &y), &a) in rows.iter().zip(labels).zip(&alpha) {
            let margin = y as f64 * self.predict(row)?.0;
            let v = if a == 0.0 {
                1.0 - margin
            } else if a >= self.c {
                margin - 1.0
            } else {
                (margin - 1.0).abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    /// Ascending.
    pub train: Vec<usize>,
    /// Ascending.
    pub test: Vec<usize>,
}

fn train_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Seeded train/test partition of row indices. Under stratification each
/// class (in ascending label order) is shuffled and cut separately.
pub fn split_dataset<L: Ord + Copy + std::fmt::Debug>(labels: &[L], spec: &SplitSpec) -> Result<SplitIndices> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if labels.is_empty() {
        return Err(Error::Split("no rows to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut classes: Vec<L> = labels.to_vec();
        classes.sort();
        classes.dedup();
        classes
            .iter()
            .map(|c| (0..labels.len()).filter(|&i| labels[i] == *c).collect::<Vec<_>>())
            .collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut split = SplitIndices {
        train: Vec::new(),
        test: Vec::new(),
    };
    for mut group in groups {
        if spec.stratified && group.len() < 2 {
            return Err(Error::Split(format!(
                "class {:?} has {} row(s); stratification needs at least 2",
                labels[group[0]],
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        let cut = train_count(spec.train_fraction, group.len());
        split.train.extend_from_slice(&group[..cut]);
        split.test.extend_from_slice(&group[cut..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Per-column min-max scaling to `[0, 1]`, fit on one set and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::EmptyData("no rows to scale".into()))?;
        let mut min = first.clone();
        let mut max = first.clone();
        for r in rows {
            if r.len() != min.len() {
                return Err(Error::Dimension("rows have unequal lengths".into()));
            }
            for (j, &v) in r.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Constant columns map to 0.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC over every distinct score taken as a threshold (descending). Tied
/// scores enter together, so ties contribute a diagonal segment.
pub fn roc_curve(scores: &[f64], truth: &[i8]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::Dimension(format!("{} scores but {} labels", scores.len(), truth.len())));
    }
    check_labels(truth)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let pos = truth.iter().filter(|&&t| t == 1).count() as f64;
    let neg = truth.len() as f64 - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let (px, py) = *points.last().expect("starts with origin");
        let (x, y) = (fp / neg, tp / pos);
        auc += (x - px) * (y + py) / 2.0;
        points.push((x, y));
    }
    Ok(RocCurve { points, auc })
}

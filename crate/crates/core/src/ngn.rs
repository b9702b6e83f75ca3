//! Neural gas vector quantization.
//!
//! Every presented sample ranks all neurons by distance and pulls each one
//! toward the sample by `epsilon * exp(-rank / lambda)`. Both `epsilon` and
//! `lambda` decay exponentially from their initial to final values over the
//! total number of presentations.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgnConfig {
    pub neuron_count: usize,
    /// Full passes over the sample set.
    pub iterations: usize,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    pub lambda_initial: f64,
    pub lambda_final: f64,
    pub seed: u64,
}

impl Default for NgnConfig {
    fn default() -> Self {
        Self {
            neuron_count: 5,
            iterations: 20,
            epsilon_initial: 0.3,
            epsilon_final: 0.02,
            lambda_initial: 2.0,
            lambda_final: 0.1,
            seed: 0,
        }
    }
}

impl NgnConfig {
    pub fn validate(&self) -> Result<()> {
        let eps_ok = |e: f64| e > 0.0 && e <= 1.0;
        if self.neuron_count == 0 || self.iterations == 0 {
            return Err(Error::Config("neuron_count and iterations must be >= 1".into()));
        }
        if !eps_ok(self.epsilon_initial) || !eps_ok(self.epsilon_final) {
            return Err(Error::Config("epsilon values must lie in (0, 1]".into()));
        }
        if self.epsilon_final > self.epsilon_initial {
            return Err(Error::Config("epsilon_final must not exceed epsilon_initial".into()));
        }
        if !(self.lambda_final > 0.0 && self.lambda_final <= self.lambda_initial) {
            return Err(Error::Config("need 0 < lambda_final <= lambda_initial".into()));
        }
        Ok(())
    }
}

/// Trained prototype vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CodebookDoc", try_from = "CodebookDoc")]
pub struct Codebook {
    dimension: usize,
    /// Row-major `neuron_count × dimension`.
    weights: Vec<f64>,
    /// Mean quantization error at initialization, then after each pass.
    train_log: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CodebookDoc {
    dimension: usize,
    weights: Vec<Vec<f64>>,
    train_log: Vec<f64>,
}

impl From<Codebook> for CodebookDoc {
    fn from(c: Codebook) -> Self {
        CodebookDoc {
            dimension: c.dimension,
            weights: c.weights().map(<[f64]>::to_vec).collect(),
            train_log: c.train_log,
        }
    }
}

impl TryFrom<CodebookDoc> for Codebook {
    type Error = Error;

    fn try_from(doc: CodebookDoc) -> Result<Self> {
        let mut cb = Codebook::from_weights(&doc.weights)?;
        if cb.dimension != doc.dimension {
            return Err(Error::Dimension("codebook dimension field disagrees with weights".into()));
        }
        cb.train_log = doc.train_log;
        Ok(cb)
    }
}

impl Codebook {
    pub fn from_weights(weights: &[Vec<f64>]) -> Result<Self> {
        let dimension = weights
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::EmptyData("codebook needs at least one weight".into()))?;
        if dimension == 0 || weights.iter().any(|w| w.len() != dimension) {
            return Err(Error::Dimension("weights must share a positive dimension".into()));
        }
        Ok(Self {
            dimension,
            weights: weights.concat(),
            train_log: Vec::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn neuron_count(&self) -> usize {
        self.weights.len() / self.dimension
    }

    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn weights(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.dimension)
    }

    pub fn train_log(&self) -> &[f64] {
        &self.train_log
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::Dimension(format!(
                "sample has dimension {}, codebook {}",
                x.len(),
                self.dimension
            )));
        }
        Ok(())
    }

    /// Index of the nearest weight; ties go to the lower index.
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.nearest_unchecked(x).0)
    }

    fn nearest_unchecked(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, w) in self.weights().enumerate() {
            let d = squared_distance(w, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Neuron indices ordered by ascending Euclidean distance to `x`.
pub fn rank_neurons(codebook: &Codebook, x: &[f64]) -> Result<Vec<usize>> {
    codebook.check_dim(x)?;
    let dists: Vec<f64> = codebook.weights().map(|w| squared_distance(w, x)).collect();
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
    Ok(order)
}

/// One adaptation step: the neuron at rank `k` moves toward `x` by
/// `epsilon * exp(-k / lambda)`.
pub fn ngn_step(codebook: &mut Codebook, x: &[f64], epsilon: f64, lambda: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) || lambda <= 0.0 {
        return Err(Error::Config("need epsilon in (0, 1] and lambda > 0".into()));
    }
    let order = rank_neurons(codebook, x)?;
    let dim = codebook.dimension;
    for (k, &i) in order.iter().enumerate() {
        let factor = epsilon * (-(k as f64) / lambda).exp();
        let w = &mut codebook.weights[i * dim..(i + 1) * dim];
        for (wc, xc) in w.iter_mut().zip(x) {
            *wc += factor * (xc - *wc);
        }
    }
    Ok(())
}

/// Exponential interpolation `initial * (final / initial)^(t / t_max)`.
pub fn anneal(initial: f64, final_: f64, t: usize, t_max: usize) -> f64 {
    if t_max == 0 {
        return initial;
    }
    initial * (final_ / initial).powf(t as f64 / t_max as f64)
}

/// Mean Euclidean distance from each sample to its nearest weight.
pub fn quantization_error(codebook: &Codebook, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyData("no samples".into()));
    }
    for s in samples {
        codebook.check_dim(s)?;
    }
    Ok(mean_error(codebook, samples.iter().map(Vec::as_slice)))
}

fn mean_error<'a>(codebook: &Codebook, samples: impl ExactSizeIterator<Item = &'a [f64]>) -> f64 {
    let n = samples.len();
    let total: f64 = samples.map(|s| codebook.nearest_unchecked(s).1.sqrt()).sum();
    total / n as f64
}

/// Trains a codebook on vector samples.
pub fn train_ngn(samples: &[Vec<f64>], cfg: &NgnConfig) -> Result<Codebook> {
    let dim = samples
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::EmptyData("no training samples".into()))?;
    if samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Dimension("samples have unequal dimensions".into()));
    }
    train_ngn_flat(&samples.concat(), dim, cfg)
}

/// Trains a codebook on `data`, a row-major `n × dim` sample matrix.
///
/// Weights start at `neuron_count` distinct samples (drawn with replacement
/// when there are fewer samples than neurons). Each pass presents every
/// sample once in a seeded shuffled order.
pub fn train_ngn_flat(data: &[f64], dim: usize, cfg: &NgnConfig) -> Result<Codebook> {
    cfg.validate()?;
    if dim == 0 || data.is_empty() {
        return Err(Error::EmptyData("no training samples".into()));
    }
    if !data.len().is_multiple_of(dim) {
        return Err(Error::Dimension("data length is not a multiple of dim".into()));
    }
    let n = data.len() / dim;
    let neurons = cfg.neuron_count;
    let sample = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let init: Vec<usize> = if n >= neurons {
        index::sample(&mut rng, n, neurons).into_vec()
    } else {
        (0..neurons).map(|_| rng.gen_range(0..n)).collect()
    };
    let mut cb = Codebook {
        dimension: dim,
        weights: init.iter().flat_map(|&i| sample(i).iter().copied()).collect(),
        train_log: Vec::with_capacity(cfg.iterations + 1),
    };
    cb.train_log.push(mean_error(&cb, data.chunks_exact(dim)));

    let t_max = cfg.iterations * n;
    let eps_ratio = (cfg.epsilon_final / cfg.epsilon_initial).ln();
    let inv_lambda_ratio = (cfg.lambda_initial / cfg.lambda_final).ln();
    // per-presentation multiplicative decay, resynchronized at each pass
    let eps_decay = (eps_ratio / t_max as f64).exp();
    let inv_lambda_growth = (inv_lambda_ratio / t_max as f64).exp();

    let mut order: Vec<usize> = (0..n).collect();
    let mut dists = vec![0.0; neurons];
    let mut rank_factor = vec![0.0; neurons];
    let mut ranks = vec![0usize; neurons];
    let mut order_buf: Vec<usize> = (0..neurons).collect();
    for pass in 0..cfg.iterations {
        order.shuffle(&mut rng);
        let t0 = (pass * n) as f64 / t_max as f64;
        let mut epsilon = cfg.epsilon_initial * (eps_ratio * t0).exp();
        let mut inv_lambda = (inv_lambda_ratio * t0).exp() / cfg.lambda_initial;
        for &s in &order {
            let (eps_now, decay) = (epsilon, (-inv_lambda).exp());
            epsilon *= eps_decay;
            inv_lambda *= inv_lambda_growth;
            if dim == 1 && neurons <= SMALL {
                present_scalar(&mut cb.weights, data[s], eps_now, decay);
                continue;
            }
            let x = sample(s);
            for (d, w) in dists.iter_mut().zip(cb.weights.chunks_exact(dim)) {
                *d = squared_distance(w, x);
            }
            let mut h = eps_now;
            for f in rank_factor.iter_mut() {
                *f = h;
                h *= decay;
            }
            fill_ranks(&dists, &mut ranks, &mut order_buf);
            for (w, &rank) in cb.weights.chunks_exact_mut(dim).zip(&ranks) {
                let factor = rank_factor[rank];
                for (wc, xc) in w.iter_mut().zip(x) {
                    *wc += factor * (xc - *wc);
                }
            }
        }
        cb.train_log.push(mean_error(&cb, data.chunks_exact(dim)));
    }
    Ok(cb)
}

const SMALL: usize = 8;

/// One presentation for scalar samples and at most [`SMALL`] neurons.
/// Same arithmetic as the general path, without the indirection.
#[inline]
fn present_scalar(weights: &mut [f64], x: f64, epsilon: f64, decay: f64) {
    let n = weights.len();
    let mut dists = [0.0; SMALL];
    let mut factors = [0.0; SMALL];
    let mut h = epsilon;
    for i in 0..n {
        let d = weights[i] - x;
        dists[i] = d * d;
        factors[i] = h;
        h *= decay;
    }
    for i in 0..n {
        let di = dists[i];
        let mut rank = 0;
        for &dj in &dists[..i] {
            rank += (dj <= di) as usize;
        }
        for &dj in &dists[i + 1..n] {
            rank += (dj < di) as usize;
        }
        weights[i] += factors[rank] * (x - weights[i]);
    }
}

/// Rank of every neuron given its distance; ties go to the lower index.
fn fill_ranks(dists: &[f64], ranks: &mut [usize], order: &mut [usize]) {
    if dists.len() <= SMALL {
        for (i, r) in ranks.iter_mut().enumerate() {
            let di = dists[i];
            *r = dists
                .iter()
                .enumerate()
                .filter(|&(j, &dj)| dj < di || (dj == di && j < i))
                .count();
        }
    } else {
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        order.sort_unstable_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
        for (k, &i) in order.iter().enumerate() {
            ranks[i] = k;
        }
    }
}

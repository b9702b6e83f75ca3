//! Firefly optimizer and the contrast enhancement built on it.
//!
//! Dimmer fireflies move toward brighter ones with attraction
//! `beta0 * exp(-gamma * r^2)` plus a uniform random walk whose scale decays
//! geometrically each generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaConfig {
    pub population: usize,
    pub iterations: usize,
    /// Random-walk coefficient (alpha).
    pub mutation_rate: f64,
    /// Light absorption (gamma).
    pub light_absorption: f64,
    /// Attraction at zero distance (beta0).
    pub attraction: f64,
    /// Walk-scale multiplier per generation.
    pub damping: f64,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Default for FaConfig {
    fn default() -> Self {
        Self {
            population: 10,
            iterations: 20,
            mutation_rate: 0.2,
            light_absorption: 1.0,
            attraction: 2.0,
            damping: 0.98,
            bounds: EnhanceParams::BOUNDS.to_vec(),
            seed: 0,
        }
    }
}

impl FaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::Config("firefly bounds are empty".into()));
        }
        if let Some((lo, hi)) = self.bounds.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config(format!("bound ({lo}, {hi}) needs lo < hi")));
        }
        if self.population == 0 {
            return Err(Error::Config("population must be >= 1".into()));
        }
        if self.mutation_rate < 0.0 || self.light_absorption < 0.0 || self.attraction < 0.0 {
            return Err(Error::Config("alpha, gamma and beta0 must be nonnegative".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Walk scale used during generation `g` (zero-based).
    pub fn walk_scale(&self, g: usize) -> f64 {
        self.mutation_rate * self.damping.powi(g as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Best-so-far fitness after initialization and after every generation.
    pub history: Vec<f64>,
    /// Walk scale applied in each generation.
    pub walk_scales: Vec<f64>,
}

/// Moves firefly `xi` toward the brighter `xj`, adds the random walk and clamps.
pub fn firefly_move(
    xi: &[f64],
    xj: &[f64],
    cfg: &FaConfig,
    alpha_t: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let r2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
    let beta = cfg.attraction * (-cfg.light_absorption * r2).exp();
    xi.iter()
        .zip(xj)
        .zip(&cfg.bounds)
        .map(|((&a, &b), &(lo, hi))| {
            let u: f64 = rng.gen_range(-0.5..0.5);
            let moved = if beta.is_finite() { a + beta * (b - a) } else { a };
            (moved + alpha_t * (hi - lo) * u).clamp(lo, hi)
        })
        .collect()
}

/// Maximizes `fitness` over the box in `cfg.bounds`.
///
/// `seeded` positions occupy the first population slots (clamped to the
/// bounds); the rest start uniformly at random.
pub fn fa_optimize(
    mut fitness: impl FnMut(&[f64]) -> f64,
    cfg: &FaConfig,
    seeded: &[Vec<f64>],
) -> Result<FaOutcome> {
    cfg.validate()?;
    let dim = cfg.bounds.len();
    if let Some(s) = seeded.iter().find(|s| s.len() != dim) {
        return Err(Error::Dimension(format!(
            "seeded position has dimension {}, bounds {dim}",
            s.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pos: Vec<Vec<f64>> = (0..cfg.population)
        .map(|i| match seeded.get(i) {
            Some(s) => s
                .iter()
                .zip(&cfg.bounds)
                .map(|(&v, &(lo, hi))| v.clamp(lo, hi))
                .collect(),
            None => cfg.bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect(),
        })
        .collect();
    let mut fit: Vec<f64> = pos.iter().map(|p| fitness(p)).collect();

    let mut best = 0;
    for i in 1..fit.len() {
        if fit[i] > fit[best] {
            best = i;
        }
    }
    let mut best_position = pos[best].clone();
    let mut best_fitness = fit[best];
    let mut history = vec![best_fitness];
    let mut walk_scales = Vec::with_capacity(cfg.iterations);

    for g in 0..cfg.iterations {
        let alpha_t = cfg.walk_scale(g);
        walk_scales.push(alpha_t);
        for i in 0..cfg.population {
            for j in 0..cfg.population {
                if fit[j] > fit[i] {
                    pos[i] = firefly_move(&pos[i], &pos[j], cfg, alpha_t, &mut rng);
                    fit[i] = fitness(&pos[i]);
                    if fit[i] > best_fitness {
                        best_fitness = fit[i];
                        best_position.clone_from(&pos[i]);
                    }
                }
            }
        }
        history.push(best_fitness);
    }
    Ok(FaOutcome {
        best_position,
        best_fitness,
        history,
        walk_scales,
    })
}

/// Intensity transform `v' = clamp(gain * v^gamma + bias, 0, 1)` on `v = I / 255`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceParams {
    pub gain: f64,
    pub bias: f64,
    pub gamma: f64,
}

impl EnhanceParams {
    /// Search box for (gain, bias, gamma).
    pub const BOUNDS: [(f64, f64); 3] = [(0.5, 2.0), (-0.3, 0.3), (0.3, 3.0)];

    pub const IDENTITY: EnhanceParams = EnhanceParams {
        gain: 1.0,
        bias: 0.0,
        gamma: 1.0,
    };

    pub fn from_position(p: &[f64]) -> Self {
        Self {
            gain: p[0],
            bias: p[1],
            gamma: p[2],
        }
    }

    pub fn to_position(self) -> Vec<f64> {
        vec![self.gain, self.bias, self.gamma]
    }

    pub fn lut(&self) -> [u8; 256] {
        let mut lut = [0u8; 256];
        for (i, out) in lut.iter_mut().enumerate() {
            let v = i as f64 / 255.0;
            let mapped = (self.gain * v.powf(self.gamma) + self.bias).clamp(0.0, 1.0);
            *out = (255.0 * mapped).round() as u8;
        }
        lut
    }
}

pub fn apply_enhance(img: &GrayImage, p: &EnhanceParams) -> GrayImage {
    img.map_lut(&p.lut())
}

/// Shannon entropy (bits) of the intensity histogram plus half the mean
/// normalized gradient magnitude.
pub fn enhance_fitness(img: &GrayImage) -> f64 {
    let mut identity = [0u8; 256];
    for (i, v) in identity.iter_mut().enumerate() {
        *v = i as u8;
    }
    fitness_through_lut(img, &img.histogram(), &identity)
}

/// Fitness of `img` after mapping it through `lut`, without materializing it.
fn fitness_through_lut(img: &GrayImage, hist: &[u64; 256], lut: &[u8; 256]) -> f64 {
    let mut mapped = [0u64; 256];
    for (v, &count) in hist.iter().enumerate() {
        mapped[lut[v] as usize] += count;
    }
    let total = img.len() as f64;
    let entropy: f64 = mapped
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();

    let mut level = [0f64; 256];
    for (l, &v) in level.iter_mut().zip(lut) {
        *l = v as f64 / 255.0;
    }
    let (w, h) = (img.width(), img.height());
    let data = img.data();
    let mut grad_sum = 0.0;
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        let up = &data[y.saturating_sub(1) * w..][..w];
        let down = &data[(y + 1).min(h - 1) * w..][..w];
        for x in 0..w {
            let left = row[x.saturating_sub(1)];
            let right = row[(x + 1).min(w - 1)];
            let gx = 0.5 * (level[right as usize] - level[left as usize]);
            let gy = 0.5 * (level[down[x] as usize] - level[up[x] as usize]);
            grad_sum += (gx * gx + gy * gy).sqrt();
        }
    }
    let edge = grad_sum / total / std::f64::consts::FRAC_1_SQRT_2;
    entropy + 0.5 * edge
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enhanced {
    pub image: GrayImage,
    pub params: EnhanceParams,
    pub fitness: f64,
    /// Fitness of the untransformed input, for comparison.
    pub identity_fitness: f64,
}

/// Searches (gain, bias, gamma) with the firefly optimizer to maximize
/// [`enhance_fitness`]. The identity transform is seeded as firefly 0, so
/// the result is never worse than the input. `cfg.bounds` is replaced by
/// [`EnhanceParams::BOUNDS`].
pub fn fa_enhance(img: &GrayImage, cfg: &FaConfig) -> Result<Enhanced> {
    let cfg = FaConfig {
        bounds: EnhanceParams::BOUNDS.to_vec(),
        ..cfg.clone()
    };
    let hist = img.histogram();
    let fitness = |p: &[f64]| fitness_through_lut(img, &hist, &EnhanceParams::from_position(p).lut());
    let identity_fitness = fitness(&EnhanceParams::IDENTITY.to_position());
    let outcome = fa_optimize(fitness, &cfg, &[EnhanceParams::IDENTITY.to_position()])?;
    let params = EnhanceParams::from_position(&outcome.best_position);
    Ok(Enhanced {
        image: apply_enhance(img, &params),
        params,
        fitness: outcome.best_fitness,
        identity_fitness,
    })
}

//! Multi-level Otsu thresholding by exhaustive search over the histogram.
//!
//! Thresholds `t_1 < … < t_{K-1}` split the intensities into the classes
//! `[0, t_1], (t_1, t_2], …, (t_{K-1}, 255]`. The between-class variance is
//! maximized through the equivalent objective `Σ S_k² / n_k` (class sums and
//! counts). Candidates within floating-point noise of the incumbent are
//! settled with exact integer arithmetic, so ties resolve to the
//! lexicographically smallest threshold tuple.

use num_bigint::BigUint;

use super::LabelMap;
use crate::error::{Error, Result};
use crate::image::GrayImage;

const MAX_SEGMENTS: usize = 5;

struct Search<'a> {
    k: usize,
    counts: &'a [u64; 257],
    sums: &'a [u64; 257],
    /// `term[a * 256 + b]` = objective contribution of the class `a..=b`.
    term: Vec<f64>,
    best: Option<(f64, Vec<usize>)>,
    current: Vec<usize>,
}

impl Search<'_> {
    /// (count, sum) per class for a threshold tuple; unused slots stay zero.
    fn class_stats(&self, t: &[usize]) -> [(u64, u64); MAX_SEGMENTS] {
        let mut out = [(0, 0); MAX_SEGMENTS];
        let mut start = 0;
        for (slot, end) in out.iter_mut().zip(t.iter().copied().chain([255])) {
            *slot = (
                self.counts[end + 1] - self.counts[start],
                self.sums[end + 1] - self.sums[start],
            );
            start = end + 1;
        }
        out
    }

    /// Exact `Σ S²/n` as a fraction (numerator, denominator).
    fn exact(&self, t: &[usize]) -> (BigUint, BigUint) {
        let mut num = BigUint::from(0u32);
        let mut den = BigUint::from(1u32);
        for (n, s) in self.class_stats(t).into_iter().filter(|&(n, _)| n > 0) {
            // num/den + s²/n = (num·n + s²·den) / (den·n)
            let s2 = BigUint::from(s) * BigUint::from(s);
            num = num * BigUint::from(n) + s2 * &den;
            den *= BigUint::from(n);
        }
        (num, den)
    }

    fn offer(&mut self, value: f64) {
        let replace = match &self.best {
            None => true,
            Some((best, best_t)) => {
                let tol = 1e-10 * best.abs().max(1.0);
                if value > best + tol {
                    true
                } else if value < best - tol || self.class_stats(best_t) == self.class_stats(&self.current) {
                    false
                } else {
                    let (na, da) = self.exact(&self.current);
                    let (nb, db) = self.exact(best_t);
                    na * db > nb * da
                }
            }
        };
        if replace {
            self.best = Some((value, self.current.clone()));
        }
    }

    fn recurse(&mut self, depth: usize, start: usize, partial: f64) {
        let remaining = self.k - 1 - depth;
        if remaining == 0 {
            let value = partial + self.term[start * 256 + 255];
            self.offer(value);
            return;
        }
        // leave room for the remaining thresholds below 255
        for t in start..=(255 - remaining) {
            let value = partial + self.term[start * 256 + t];
            self.current.push(t);
            self.recurse(depth + 1, t + 1, value);
            self.current.pop();
        }
    }
}

/// Thresholds maximizing between-class variance for `k` classes.
pub fn otsu_thresholds(hist: &[u64; 256], k: usize) -> Result<Vec<u8>> {
    if !(2..=MAX_SEGMENTS).contains(&k) {
        return Err(Error::Config(format!("otsu supports 2..={MAX_SEGMENTS} segments, got {k}")));
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let mut counts = [0u64; 257];
    let mut sums = [0u64; 257];
    for v in 0..256 {
        counts[v + 1] = counts[v] + hist[v];
        sums[v + 1] = sums[v] + hist[v] * v as u64;
    }
    let mut term = vec![0.0; 256 * 256];
    for a in 0..256 {
        for b in a..256 {
            let n = counts[b + 1] - counts[a];
            if n > 0 {
                let s = (sums[b + 1] - sums[a]) as f64;
                term[a * 256 + b] = s * s / n as f64;
            }
        }
    }
    let mut search = Search {
        k,
        counts: &counts,
        sums: &sums,
        term,
        best: None,
        current: Vec::with_capacity(k - 1),
    };
    search.recurse(0, 0, 0.0);
    let (_, best) = search.best.expect("at least one threshold tuple exists");
    Ok(best.into_iter().map(|t| t as u8).collect())
}

/// Labels pixels by the Otsu intervals they fall into.
pub fn segment_otsu(img: &GrayImage, k: usize) -> Result<LabelMap> {
    let thresholds = otsu_thresholds(&img.histogram(), k)?;
    let labels = img
        .data()
        .iter()
        .map(|&v| 1 + thresholds.iter().filter(|&&t| v > t).count() as u32)
        .collect();
    LabelMap::new(img.width(), img.height(), k as u32, labels)
}

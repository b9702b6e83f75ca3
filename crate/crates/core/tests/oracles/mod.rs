//! Brute-force reference computations shared by integration tests.
#![allow(dead_code)]

use ngnseg::features::LassoModel;
use ngnseg::image::GrayImage;

/// Cumulative counts and intensity sums; `prefix[i]` covers levels `< i`.
fn prefix_sums(hist: &[u64; 256]) -> Vec<(u128, u128)> {
    let mut out = vec![(0u128, 0u128)];
    for (v, &c) in hist.iter().enumerate() {
        let (n, s) = *out.last().unwrap();
        out.push((n + c as u128, s + c as u128 * v as u128));
    }
    out
}

/// Exact `Σ S²/n` over the classes cut by `t`, as a fraction.
fn otsu_objective(prefix: &[(u128, u128)], t: &[usize]) -> (u128, u128) {
    let mut bounds = vec![0usize];
    bounds.extend(t.iter().map(|&x| x + 1));
    bounds.push(256);
    let (mut num, mut den) = (0u128, 1u128);
    for w in bounds.windows(2) {
        let n = prefix[w[1]].0 - prefix[w[0]].0;
        let s = prefix[w[1]].1 - prefix[w[0]].1;
        if n == 0 {
            continue;
        }
        num = num
            .checked_mul(n)
            .and_then(|a| s.checked_mul(s).and_then(|s2| s2.checked_mul(den)).and_then(|b| a.checked_add(b)))
            .expect("oracle overflow");
        den = den.checked_mul(n).expect("oracle overflow");
    }
    (num, den)
}

fn greater(a: (u128, u128), b: (u128, u128)) -> bool {
    a.0.checked_mul(b.1).expect("oracle overflow") > b.0.checked_mul(a.1).expect("oracle overflow")
}

/// Every threshold tuple in lexicographic order; the first exact maximizer wins.
pub fn otsu_brute(hist: &[u64; 256], k: usize) -> Vec<u8> {
    fn walk(
        prefix: &[(u128, u128)],
        k: usize,
        cur: &mut Vec<usize>,
        best: &mut Option<((u128, u128), Vec<usize>)>,
    ) {
        if cur.len() == k - 1 {
            let v = otsu_objective(prefix, cur);
            if best.as_ref().is_none_or(|(b, _)| greater(v, *b)) {
                *best = Some((v, cur.clone()));
            }
            return;
        }
        let start = cur.last().map_or(0, |&t| t + 1);
        let remaining = k - 1 - cur.len();
        for t in start..=(255 - remaining) {
            cur.push(t);
            walk(prefix, k, cur, best);
            cur.pop();
        }
    }
    let mut best = None;
    walk(&prefix_sums(hist), k, &mut Vec::new(), &mut best);
    best.expect("non-empty search").1.into_iter().map(|t| t as u8).collect()
}

/// Entropy (bits) plus half the mean central-difference gradient magnitude
/// on `[0, 1]` intensities, normalized by its `1/√2` maximum.
pub fn fitness_direct(img: &GrayImage) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut counts = vec![0usize; 256];
    for &v in img.data() {
        counts[v as usize] += 1;
    }
    let n = img.len() as f64;
    let mut entropy = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / n;
            entropy -= p * p.log2();
        }
    }
    let at = |x: i64, y: i64| img.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize) as f64 / 255.0;
    let mut grad = 0.0;
    for y in 0..h {
        for x in 0..w {
            let gx = (at(x + 1, y) - at(x - 1, y)) / 2.0;
            let gy = (at(x, y + 1) - at(x, y - 1)) / 2.0;
            grad += gx.hypot(gy);
        }
    }
    entropy + 0.5 * (grad / n) / (0.5f64).sqrt()
}

/// Number of 4-connected plateaus whose neighbours are all strictly higher.
pub fn regional_minima(relief: &[u32], w: usize, h: usize) -> usize {
    let mut seen = vec![false; relief.len()];
    let mut count = 0;
    for start in 0..relief.len() {
        if seen[start] {
            continue;
        }
        let level = relief[start];
        let mut stack = vec![start];
        seen[start] = true;
        let mut is_min = true;
        while let Some(p) = stack.pop() {
            let (x, y) = (p % w, p / w);
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(p - 1);
            }
            if x + 1 < w {
                nbrs.push(p + 1);
            }
            if y > 0 {
                nbrs.push(p - w);
            }
            if y + 1 < h {
                nbrs.push(p + w);
            }
            for q in nbrs {
                if relief[q] < level {
                    is_min = false;
                } else if relief[q] == level && !seen[q] {
                    seen[q] = true;
                    stack.push(q);
                }
            }
        }
        count += is_min as usize;
    }
    count
}

/// Largest violation of the Lasso optimality conditions on the
/// standardized problem: `|g_j - λ·sign(β_j)|` for active columns and
/// `max(|g_j| - λ, 0)` for inactive ones, where `g = Zᵀr/n`.
pub fn lasso_kkt_residual(x: &[Vec<f64>], y: &[f64], model: &LassoModel) -> f64 {
    let n = x.len() as f64;
    let p = x[0].len();
    let y_mean = y.iter().sum::<f64>() / n;
    let mut z = vec![vec![0.0; p]; x.len()];
    let mut active = vec![true; p];
    for j in 0..p {
        let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let sd = (x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            active[j] = false;
            continue;
        }
        for (zi, r) in z.iter_mut().zip(x) {
            zi[j] = (r[j] - mean) / sd;
        }
    }
    let beta = &model.standardized;
    let resid: Vec<f64> = z
        .iter()
        .zip(y)
        .map(|(zi, yi)| yi - y_mean - zi.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let mut worst: f64 = 0.0;
    for j in (0..p).filter(|&j| active[j]) {
        let g = z.iter().zip(&resid).map(|(zi, r)| zi[j] * r).sum::<f64>() / n;
        let v = if beta[j] != 0.0 {
            (g - model.lambda * beta[j].signum()).abs()
        } else {
            (g.abs() - model.lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

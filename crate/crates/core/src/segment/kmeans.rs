use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{relabel_by_key, LabelMap};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_log: Vec<f64>,
    /// True when the assignment reached a fixpoint before `max_iters`.
    pub converged: bool,
}

/// Nearest centroid, ties to the lower index.
#[inline]
fn nearest(centroids: &[f64], v: f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in centroids.iter().enumerate() {
        let d = (v - c) * (v - c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Lloyd's algorithm on scalar values from explicit initial centroids.
///
/// An empty cluster is re-seeded to the value farthest from its centroid.
pub fn kmeans_1d(values: &[f64], init: Vec<f64>, max_iters: usize) -> Result<KMeansFit> {
    if values.is_empty() || init.is_empty() {
        return Err(Error::EmptyData("k-means needs values and centroids".into()));
    }
    let k = init.len();
    let mut centroids = init;
    let mut assignments = vec![usize::MAX; values.len()];
    let mut dists = vec![0.0; values.len()];
    let mut objective_log = Vec::new();
    let mut converged = false;

    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut objective = 0.0;
        for ((a, d), &v) in assignments.iter_mut().zip(dists.iter_mut()).zip(values) {
            let (i, dist) = nearest(&centroids, v);
            changed |= *a != i;
            *a = i;
            *d = dist;
            objective += dist;
        }
        objective_log.push(objective);
        if !changed {
            converged = true;
            break;
        }

        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&a, &v) in assignments.iter().zip(values) {
            sums[a] += v;
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = 0;
                for i in 1..values.len() {
                    if dists[i] > dists[far] {
                        far = i;
                    }
                }
                centroids[c] = values[far];
                dists[far] = 0.0;
            }
        }
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        objective_log,
        converged,
    })
}

/// K-means on pixel intensities with `k` seeded distinct starting values.
pub fn segment_kmeans(img: &GrayImage, k: usize, seed: u64, max_iters: usize) -> Result<LabelMap> {
    if k == 0 {
        return Err(Error::Config("segment count must be >= 1".into()));
    }
    let values: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
    let fit = kmeans_1d(&values, initial_centroids(img, k, seed), max_iters)?;
    relabel_by_key(img.width(), img.height(), &fit.assignments, &fit.centroids)
}

/// `k` distinct intensities from a seeded pixel ordering; repeats the last
/// one when the image has fewer than `k` distinct values.
fn initial_centroids(img: &GrayImage, k: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..img.len()).collect();
    order.shuffle(&mut rng);
    let mut seen = [false; 256];
    let mut init = Vec::with_capacity(k);
    for i in order {
        let v = img.data()[i];
        if !seen[v as usize] {
            seen[v as usize] = true;
            init.push(v as f64);
            if init.len() == k {
                break;
            }
        }
    }
    while init.len() < k {
        init.push(*init.last().expect("image is non-empty"));
    }
    init
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn two_clusters_stable_immediately() {
        let fit = kmeans_1d(&[0.0, 0.0, 10.0, 10.0], vec![0.0, 10.0], 100).unwrap();
        assert_eq!(fit.centroids, vec![0.0, 10.0]);
        assert_eq!(fit.assignments, vec![0, 0, 1, 1]);
        assert!(fit.converged);
        // one assignment pass to reach the fixpoint, a second to confirm it
        assert_eq!(fit.objective_log.len(), 2);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let fit = kmeans_1d(&[1.0, 2.0, 6.0], vec![2.0], 100).unwrap();
        assert_eq!(fit.centroids, vec![3.0]);
        let img = GrayImage::from_fn(5, 5, |x, _| x as u8 * 10).unwrap();
        let map = segment_kmeans(&img, 1, 0, 100).unwrap();
        assert!(map.labels().iter().all(|&l| l == 1));
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // both centroids start on the same value; one cluster is empty
        let fit = kmeans_1d(&[0.0, 1.0, 9.0, 10.0], vec![0.0, 0.0], 100).unwrap();
        let mut c = fit.centroids.clone();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.5, 9.5]);
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..10 {
            let img = GrayImage::from_fn(40, 40, |_, _| rng.gen()).unwrap();
            let values: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();
            let fit = kmeans_1d(&values, initial_centroids(&img, 4, seed), 100).unwrap();
            assert!(fit.objective_log.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            if fit.converged {
                let again = kmeans_1d(&values, fit.centroids.clone(), 1).unwrap();
                assert_eq!(again.assignments, fit.assignments);
            }
        }
    }

    #[test]
    fn deterministic_and_ordered() {
        let img = GrayImage::from_fn(30, 30, |x, y| ((x * 31 + y * 17) % 256) as u8).unwrap();
        let a = segment_kmeans(&img, 3, 5, 100).unwrap();
        assert_eq!(a, segment_kmeans(&img, 3, 5, 100).unwrap());
        let means: Vec<f64> = a.segment_means(&img).into_iter().flatten().collect();
        assert!(means.windows(2).all(|w| w[0] <= w[1]));
    }
}

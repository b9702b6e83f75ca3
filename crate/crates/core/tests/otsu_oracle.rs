mod oracles;

use ngnseg::segment::{otsu_thresholds, segment_otsu};
use ngnseg::synth::{bimodal_image, random_histogram};
use oracles::otsu_brute;

#[test]
fn random_histograms_match_brute_force() {
    for seed in 0..120 {
        let hist = random_histogram(seed);
        for k in [2, 3] {
            assert_eq!(otsu_thresholds(&hist, k).unwrap(), otsu_brute(&hist, k), "seed {seed} k {k}");
        }
    }
}

#[test]
fn bimodal_images_match_brute_force() {
    for seed in 0..10 {
        let img = bimodal_image(64, seed).unwrap();
        let hist = img.histogram();
        for k in [2, 3] {
            assert_eq!(otsu_thresholds(&hist, k).unwrap(), otsu_brute(&hist, k), "seed {seed} k {k}");
        }
    }
}

#[test]
fn symmetric_ties_pick_first_tuple() {
    let mut hist = [0u64; 256];
    for v in [10, 20, 30, 40] {
        hist[v] = 7;
    }
    for k in [2, 3, 4] {
        assert_eq!(otsu_thresholds(&hist, k).unwrap(), otsu_brute(&hist, k));
    }
}

#[test]
fn labels_follow_thresholds() {
    let img = bimodal_image(32, 4).unwrap();
    let t = otsu_thresholds(&img.histogram(), 2).unwrap()[0];
    let map = segment_otsu(&img, 2).unwrap();
    for (&l, &v) in map.labels().iter().zip(img.data()) {
        assert_eq!(l, if v > t { 2 } else { 1 });
    }
}

//! Acceptance checks, one PASS/FAIL line each.
//!
//! Failures are reported but do not fail the run unless
//! `ACCEPTANCE_STRICT=1` is set.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::time::Instant;

use ngnseg::eval::{seg_metrics, ConfusionCounts, RunReport};
use ngnseg::features::{fit_lasso, lambda_max, extract_hog, extract_ngn_features, GaborBank, GaborConfig, HogConfig};
use ngnseg::firefly::{fa_enhance, fa_optimize, FaConfig};
use ngnseg::image::{load_gray, GrayImage};
use ngnseg::ngn::{train_ngn, NgnConfig};
use ngnseg::segment::{otsu_thresholds, segment_kmeans, segment_ngn, segment_otsu};
use ngnseg::svm::{train_svm, Kernel, SvmConfig, SvmModel};
use ngnseg::synth::{band_dataset, bimodal_image, random_histogram, ring_blob_points, texture_dataset, write_dataset};
use ngnseg_cli::{run_classification_pipeline, run_segmentation_pipeline, PipelineConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    println!(
        "{} {id:>2} {name}: {} [{:.2}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o.pass
}

fn metric_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut iou_err, mut f1_err): (f64, f64) = (0.0, 0.0);
    let mut f1_checked = 0;
    for _ in 0..1000 {
        let c = ConfusionCounts {
            tp: rng.gen_range(0..1000),
            tn: rng.gen_range(0..1000),
            fp: rng.gen_range(0..1000),
            fn_: rng.gen_range(0..1000),
        };
        if c.total() == 0 {
            continue;
        }
        let m = seg_metrics(&c).unwrap();
        let union = c.tp + c.fp + c.fn_;
        if union > 0 {
            iou_err = iou_err.max((m.iou - c.tp as f64 / union as f64).abs());
        }
        if c.tp + c.fp > 0 && c.tp + c.fn_ > 0 {
            let p = c.tp as f64 / (c.tp + c.fp) as f64;
            let r = c.tp as f64 / (c.tp + c.fn_) as f64;
            if p + r > 0.0 {
                f1_err = f1_err.max((m.f_measure - 2.0 * p * r / (p + r)).abs());
                f1_checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: iou_err <= 1e-12 && f1_err <= 1e-12 && secs < 1.0,
        detail: format!("max |iou - jaccard| {iou_err:.1e}, max |f1 - harmonic| {f1_err:.1e} over {f1_checked} tuples, {secs:.3}s < 1s"),
    }
}

fn otsu_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut cases = 0;
    let mut hists: Vec<[u64; 256]> = (0..200).map(random_histogram).collect();
    let images: Vec<GrayImage> = (0..20).map(|s| bimodal_image(64, s).unwrap()).collect();
    hists.extend(images.iter().map(GrayImage::histogram));
    for (i, h) in hists.iter().enumerate() {
        for k in [2, 3] {
            cases += 1;
            let brute = oracles::otsu_brute(h, k);
            if otsu_thresholds(h, k).unwrap() != brute {
                mismatches += 1;
            }
            if let Some(img) = i.checked_sub(200).map(|j| &images[j]) {
                // labels must follow the brute-force cut points
                let map = segment_otsu(img, k).unwrap();
                let ok = map
                    .labels()
                    .iter()
                    .zip(img.data())
                    .all(|(&l, &v)| l == 1 + brute.iter().filter(|&&t| v > t).count() as u32);
                mismatches += !ok as usize;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: mismatches == 0 && secs < 5.0,
        detail: format!("{mismatches} mismatches in {cases} threshold searches (K=2,3), {secs:.2}s < 5s"),
    }
}

fn ngn_convergence() -> Outcome {
    let start = Instant::now();
    let (mut worst_pass, mut worst_init): (f64, f64) = (0.0, 0.0);
    let mut inside = true;
    for seed in 0..10 {
        let pts = ring_blob_points(700, seed);
        let cfg = NgnConfig {
            neuron_count: 50,
            iterations: 100,
            seed,
            ..NgnConfig::default()
        };
        let cb = train_ngn(&pts, &cfg).unwrap();
        let log = cb.train_log();
        worst_pass = worst_pass.max(log[log.len() - 1] / log[1]);
        worst_init = worst_init.max(log[log.len() - 1] / log[0]);
        for d in 0..2 {
            let lo = pts.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max);
            inside &= cb.weights().all(|w| (lo..=hi).contains(&w[d]));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst_pass <= 0.5 && inside && secs < 10.0,
        detail: format!(
            "worst final/first-pass error {worst_pass:.3} (need <= 0.5), final/initialization {worst_init:.3}, weights in bbox {inside}, {secs:.2}s < 10s"
        ),
    }
}

fn mean_of(report: &RunReport, method: &str) -> (f64, f64) {
    let a = report
        .methods
        .iter()
        .find(|m| m.method == method)
        .and_then(|m| m.aggregate)
        .expect("aggregate present");
    (a.accuracy, a.iou)
}

fn segmentation_analogue(dir: &std::path::Path) -> Outcome {
    let start = Instant::now();
    let samples = band_dataset(50, 256, 0).unwrap();
    let manifest = write_dataset(&samples, dir, "bands").unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.manifest = Some(manifest.root.join("manifest.csv"));
    let report = run_segmentation_pipeline(&cfg).unwrap();
    let (acc, iou) = mean_of(&report, "ngn");
    let (km_acc, _) = mean_of(&report, "kmeans");
    let (otsu_acc, _) = mean_of(&report, "otsu");
    let (ws_acc, _) = mean_of(&report, "watershed");
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: acc >= 0.97 && iou >= 0.90 && acc >= km_acc - 0.02 && secs < 120.0,
        detail: format!(
            "ngn accuracy {acc:.4} (>= 0.97), IoU {iou:.4} (>= 0.90), kmeans accuracy {km_acc:.4}, otsu {otsu_acc:.4}, watershed {ws_acc:.4}, {secs:.1}s < 120s"
        ),
    }
}

fn batch_median(images: &[GrayImage], mut f: impl FnMut(&GrayImage)) -> f64 {
    ngnseg::eval::benchmark(
        || {
            for img in images {
                f(img);
            }
        },
        3,
    )
}

fn runtime_ordering(dir: &std::path::Path) -> Outcome {
    let images: Vec<GrayImage> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "png") && !p.to_string_lossy().ends_with("_mask.png"))
        .map(|p| load_gray(p).unwrap())
        .collect();
    let ngn_cfg = NgnConfig::default();
    let fa_cfg = FaConfig::default();
    let bank = GaborBank::new(GaborConfig::default()).unwrap();
    let hog_cfg = HogConfig::default();
    let ngn = batch_median(&images, |img| {
        extract_ngn_features(img, &ngn_cfg, false, &fa_cfg).unwrap();
    });
    let hog = batch_median(&images, |img| {
        extract_hog(img, &hog_cfg).unwrap();
    });
    let gabor = batch_median(&images, |img| {
        bank.extract(img);
    });
    let seg_ngn = batch_median(&images, |img| {
        segment_ngn(img, 4, &ngn_cfg).unwrap();
    });
    let seg_km = batch_median(&images, |img| {
        segment_kmeans(img, 4, 0, 100).unwrap();
    });
    let features_ok = ngn * 1.1 < hog.min(gabor);
    let seg_ok = seg_ngn * 1.1 < seg_km;
    Outcome {
        pass: features_ok && seg_ok,
        detail: format!(
            "{} images, batch medians: features ngn {ngn:.3}s hog {hog:.3}s gabor {gabor:.3}s (ngn fastest by 10%: {features_ok}); segmentation ngn {seg_ngn:.3}s kmeans {seg_km:.3}s (ngn faster by 10%: {seg_ok})",
            images.len()
        ),
    }
}

fn classification_analogue(dir: &std::path::Path) -> Outcome {
    let start = Instant::now();
    let samples = texture_dataset(200, 256, 0).unwrap();
    let manifest = write_dataset(&samples, dir, "textures").unwrap();
    let mut accs = Vec::new();
    for seed in 0..5 {
        let mut cfg = PipelineConfig::default();
        cfg.manifest = Some(manifest.root.join("manifest.csv"));
        cfg.set("seed", &seed.to_string()).unwrap();
        let report = run_classification_pipeline(&cfg).unwrap();
        accs.push(report.classification.unwrap().test_accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: mean >= 90.0 && secs < 300.0,
        detail: format!("test accuracy per seed {accs:?}, mean {mean:.2}% (>= 90%), {secs:.1}s < 300s"),
    }
}

/// Independent KKT, box and equality check on the training set.
fn constraints_hold(model: &SvmModel, rows: &[Vec<f64>], labels: &[i8], tol: f64) -> bool {
    let mut alpha = vec![0.0; rows.len()];
    for (&i, &a) in model.support_indices.iter().zip(&model.alphas) {
        alpha[i] = a;
    }
    let kernel = |a: &[f64], b: &[f64]| match model.kernel {
        Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>(),
        Kernel::Rbf { gamma } => (-gamma * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).exp(),
    };
    let equality: f64 = alpha.iter().zip(labels).map(|(a, &y)| a * y as f64).sum();
    if equality.abs() > 1e-8 || alpha.iter().any(|&a| !(0.0..=model.c).contains(&a)) {
        return false;
    }
    rows.iter().zip(labels).zip(&alpha).all(|((x, &y), &a)| {
        let f: f64 = rows
            .iter()
            .zip(labels)
            .zip(&alpha)
            .map(|((xi, &yi), &ai)| ai * yi as f64 * kernel(xi, x))
            .sum::<f64>()
            + model.bias;
        let m = y as f64 * f;
        if a == 0.0 {
            m >= 1.0 - tol - 1e-9
        } else if a >= model.c {
            m <= 1.0 + tol + 1e-9
        } else {
            (m - 1.0).abs() <= tol + 1e-9
        }
    })
}

fn train_accuracy(model: &SvmModel, rows: &[Vec<f64>], labels: &[i8]) -> f64 {
    let hits = rows
        .iter()
        .zip(labels)
        .filter(|(r, &y)| model.predict(r).unwrap().1 == y)
        .count();
    hits as f64 / rows.len() as f64
}

fn svm_correctness() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut suite: Vec<(Vec<Vec<f64>>, Vec<i8>, SvmConfig)> = Vec::new();

    let two = (vec![vec![-1.0], vec![1.0]], vec![-1i8, 1]);
    let cfg = SvmConfig {
        kernel: Kernel::Linear,
        c: 10.0,
        ..SvmConfig::default()
    };
    let m = train_svm(&two.0, &two.1, &cfg).unwrap();
    let err = m
        .alphas
        .iter()
        .map(|a| (a - 0.5).abs())
        .fold(m.bias.abs(), f64::max)
        .max((2 - m.alphas.len()) as f64);
    ok &= err <= 1e-6;
    notes.push(format!("two-point |α-0.5|,|b| max {err:.1e}"));
    suite.push((two.0, two.1, cfg));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut blobs = (Vec::new(), Vec::new());
    for i in 0..60 {
        let y: i8 = if i % 2 == 0 { 1 } else { -1 };
        let c = 2.0 * y as f64;
        blobs.0.push(vec![c + rng.gen_range(-0.9..0.9), c + rng.gen_range(-0.9..0.9)]);
        blobs.1.push(y);
    }
    let cfg = SvmConfig {
        kernel: Kernel::Linear,
        c: 100.0,
        ..SvmConfig::default()
    };
    let m = train_svm(&blobs.0, &blobs.1, &cfg).unwrap();
    let acc = train_accuracy(&m, &blobs.0, &blobs.1);
    ok &= acc == 1.0;
    notes.push(format!("separable blobs train accuracy {acc}"));
    suite.push((blobs.0, blobs.1, cfg));

    let xor = (
        vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![-1i8, -1, 1, 1],
    );
    let cfg = SvmConfig {
        kernel: Kernel::Rbf { gamma: 1.0 },
        c: 10.0,
        ..SvmConfig::default()
    };
    let m = train_svm(&xor.0, &xor.1, &cfg).unwrap();
    let acc = train_accuracy(&m, &xor.0, &xor.1);
    ok &= acc == 1.0;
    notes.push(format!("xor rbf train accuracy {acc}"));
    suite.push((xor.0, xor.1, cfg));

    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.gen_range(6..40);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut labels: Vec<i8> = rows.iter().map(|r| if r[0] + 0.3 * r[1] > 0.0 { 1 } else { -1 }).collect();
        labels[0] = 1;
        labels[1] = -1;
        let kernel = if seed % 2 == 0 { Kernel::Linear } else { Kernel::Rbf { gamma: 0.5 } };
        suite.push((rows, labels, SvmConfig {
            kernel,
            c: [0.5, 1.0, 10.0][seed as usize % 3],
            seed,
            ..SvmConfig::default()
        }));
    }
    let (mut converged, mut satisfied) = (0, 0);
    for (rows, labels, cfg) in &suite {
        let m = train_svm(rows, labels, cfg).unwrap();
        if m.converged {
            converged += 1;
            satisfied += constraints_hold(&m, rows, labels, cfg.tol) as usize;
        }
    }
    ok &= converged == satisfied && converged > 0;
    notes.push(format!("constraints hold on {satisfied}/{converged} converged models ({} trained)", suite.len()));
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn lasso_correctness() -> Outcome {
    let x = vec![vec![1.0], vec![3.0]];
    let y = vec![2.0, 6.5];
    let m = fit_lasso(&x, &y, 0.0).unwrap();
    // closed form through two points: slope 2.25, intercept -0.25
    let ls_err = (m.coefficients[0] - 2.25).abs().max((m.intercept + 0.25).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut zero_ok = true;
    let mut worst_kkt: f64 = 0.0;
    for _ in 0..10 {
        let x: Vec<Vec<f64>> = (0..50).map(|_| (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[5] + rng.gen_range(-0.2..0.2)).collect();
        let lmax = lambda_max(&x, &y).unwrap();
        for f in [1.0, 1.5] {
            let z = fit_lasso(&x, &y, f * lmax).unwrap();
            zero_ok &= z.coefficients.iter().all(|&c| c == 0.0) && z.selected.is_empty();
        }
        for f in [0.001, 0.01, 0.1, 0.5] {
            let fit = fit_lasso(&x, &y, f * lmax).unwrap();
            if fit.converged {
                worst_kkt = worst_kkt.max(oracles::lasso_kkt_residual(&x, &y, &fit));
            }
        }
    }
    Outcome {
        pass: ls_err <= 1e-9 && zero_ok && worst_kkt <= 1e-5,
        detail: format!(
            "λ=0 vs closed form {ls_err:.1e} (<= 1e-9), zero model at λ >= λ_max {zero_ok}, worst KKT residual {worst_kkt:.1e} (<= 1e-5)"
        ),
    }
}

fn fa_sanity() -> Outcome {
    let mut monotone = true;
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let cfg = FaConfig {
            bounds: vec![(-5.0, 5.0); 2],
            seed,
            ..FaConfig::default()
        };
        let out = fa_optimize(|p: &[f64]| -(p[0] * p[0] + p[1] * p[1]), &cfg, &[]).unwrap();
        monotone &= out.history.windows(2).all(|w| w[1] >= w[0]);
        worst = if seed == 0 { out.best_fitness } else { worst.min(out.best_fitness) };
        let shifted = fa_optimize(|p: &[f64]| -((p[0] - 1.0).powi(2) + (p[1] + 2.0).abs()), &cfg, &[]).unwrap();
        monotone &= shifted.history.windows(2).all(|w| w[1] >= w[0]);
    }
    let mut images: Vec<GrayImage> = band_dataset(5, 64, 7).unwrap().into_iter().map(|s| s.image).collect();
    images.extend(texture_dataset(5, 64, 7).unwrap().into_iter().map(|s| s.image));
    images.push(GrayImage::from_fn(64, 64, |x, _| (100 + x / 2) as u8).unwrap());
    let mut below = 0;
    for (i, img) in images.iter().enumerate() {
        let e = fa_enhance(img, &FaConfig {
            seed: i as u64,
            ..FaConfig::default()
        })
        .unwrap();
        below += (e.fitness < e.identity_fitness) as usize;
    }
    Outcome {
        pass: monotone && worst >= -0.05 && below == 0,
        detail: format!(
            "history monotone {monotone}, worst sphere best fitness {worst:.2e} over 10 seeds (>= -0.05), enhancements below identity {below}/{}",
            images.len()
        ),
    }
}

fn determinism(dir: &std::path::Path) -> Outcome {
    let bands = write_dataset(&band_dataset(8, 128, 40).unwrap(), dir.join("bands"), "bands").unwrap();
    let textures = write_dataset(&texture_dataset(24, 128, 40).unwrap(), dir.join("textures"), "textures").unwrap();
    let stable = |run: &dyn Fn() -> RunReport| {
        let a = run().without_timing().to_json().unwrap();
        let b = run().without_timing().to_json().unwrap();
        a == b
    };
    let mut seg_cfg = PipelineConfig::default();
    seg_cfg.resize = 128;
    seg_cfg.manifest = Some(bands.root.join("manifest.csv"));
    seg_cfg.set("seed", "3").unwrap();
    let seg = stable(&|| run_segmentation_pipeline(&seg_cfg).unwrap());
    let mut cls_cfg = seg_cfg.clone();
    cls_cfg.manifest = Some(textures.root.join("manifest.csv"));
    let cls = stable(&|| run_classification_pipeline(&cls_cfg).unwrap());
    Outcome {
        pass: seg && cls,
        detail: format!("segmentation rerun identical {seg}, classification rerun identical {cls} (timestamps and runtimes excluded)"),
    }
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let bands = tmp.path().join("bands");
    let mut results = vec![
        check(1, "metric identities", metric_identities),
        check(2, "otsu oracle equivalence", otsu_equivalence),
        check(3, "ngn convergence", ngn_convergence),
        check(4, "segmentation analogue", || segmentation_analogue(&bands)),
        check(5, "runtime ordering", || runtime_ordering(&bands)),
        check(6, "classification analogue", || classification_analogue(&tmp.path().join("textures"))),
    ];
    results.push(check(7, "svm correctness", svm_correctness));
    results.push(check(8, "lasso correctness", lasso_correctness));
    results.push(check(9, "firefly sanity", fa_sanity));
    results.push(check(10, "determinism", || determinism(&tmp.path().join("det"))));
    let failed = results.iter().filter(|&&p| !p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

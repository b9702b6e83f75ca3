//! Segmentation and classification metrics, timing, and run reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::BwMask;
use crate::svm::RocCurve;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "method,accuracy,precision,recall,f_measure,iou,runtime";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tally of predicted vs. true labels, positive class `+1`.
    pub fn from_labels(pred: &[i8], truth: &[i8]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} labels",
                pred.len(),
                truth.len()
            )));
        }
        let mut c = Self::default();
        for (&p, &t) in pred.iter().zip(truth) {
            c.add(p == 1, t == 1);
        }
        Ok(c)
    }

    fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

pub fn confusion(pred: &BwMask, gt: &BwMask) -> Result<ConfusionCounts> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::Dimension(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.bits().iter().zip(gt.bits()) {
        c.add(p, t);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub iou: f64,
    pub runtime_seconds: f64,
}

/// Pixelwise metrics. An empty denominator counts as success (1.0), e.g.
/// precision when nothing was predicted positive.
pub fn seg_metrics(c: &ConfusionCounts) -> Result<SegMetrics> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyComparison);
    }
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let ratio = |num: f64, den: f64| if den == 0.0 { 1.0 } else { num / den };
    let f_measure = ratio(2.0 * tp, 2.0 * tp + fp + fn_);
    Ok(SegMetrics {
        accuracy: (tp + tn) / total as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f_measure,
        iou: f_measure / (2.0 - f_measure),
        runtime_seconds: 0.0,
    })
}

/// `100·(tp+tn)/total`, rounded to two decimals.
pub fn classification_accuracy(c: &ConfusionCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyComparison);
    }
    let pct = 100.0 * (c.tp + c.tn) as f64 / total as f64;
    Ok((pct * 100.0).round() / 100.0)
}

/// Unweighted mean of each field; `None` for an empty slice.
pub fn aggregate(items: &[SegMetrics]) -> Option<SegMetrics> {
    if items.is_empty() {
        return None;
    }
    let n = items.len() as f64;
    let mean = |f: fn(&SegMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
    Some(SegMetrics {
        accuracy: mean(|m| m.accuracy),
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f_measure: mean(|m| m.f_measure),
        iou: mean(|m| m.iou),
        runtime_seconds: mean(|m| m.runtime_seconds),
    })
}

/// Median wall-clock seconds over `repetitions` runs after one untimed warm-up.
pub fn benchmark(mut op: impl FnMut(), repetitions: usize) -> f64 {
    op();
    let mut samples: Vec<f64> = (0..repetitions.max(1))
        .map(|_| {
            let start = Instant::now();
            op();
            start.elapsed().as_secs_f64()
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let m = samples.len();
    if m % 2 == 1 {
        samples[m / 2]
    } else {
        0.5 * (samples[m / 2 - 1] + samples[m / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub id: String,
    pub metrics: SegMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub dataset: String,
    pub images: Vec<ImageResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<SegMetrics>,
}

impl MethodReport {
    pub fn new(method: impl Into<String>, dataset: impl Into<String>, images: Vec<ImageResult>) -> Self {
        let metrics: Vec<SegMetrics> = images.iter().map(|i| i.metrics).collect();
        Self {
            method: method.into(),
            dataset: dataset.into(),
            aggregate: aggregate(&metrics),
            images,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub descriptor: String,
    pub kernel: String,
    pub c: f64,
    pub lambda: f64,
    pub selected_features: Vec<usize>,
    pub train_size: usize,
    pub test_size: usize,
    pub train_confusion: ConfusionCounts,
    pub test_confusion: ConfusionCounts,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub roc: RocCurve,
    pub svm_converged: bool,
    pub extraction_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    /// Complete effective configuration, including fields with no effect.
    pub config: BTreeMap<String, String>,
    pub methods: Vec<MethodReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Skipped>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    /// Unix seconds.
    pub started_at: f64,
    pub finished_at: f64,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunReport {
    pub fn new(kind: impl Into<String>, config: BTreeMap<String, String>) -> Self {
        let now = unix_now();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: kind.into(),
            config,
            methods: Vec::new(),
            skipped: Vec::new(),
            classification: None,
            started_at: now,
            finished_at: now,
        }
    }

    /// Copy with timestamps and wall-clock measurements zeroed, for
    /// comparing reruns.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.started_at = 0.0;
        r.finished_at = 0.0;
        for m in &mut r.methods {
            for img in &mut m.images {
                img.metrics.runtime_seconds = 0.0;
            }
            if let Some(a) = &mut m.aggregate {
                a.runtime_seconds = 0.0;
            }
        }
        if let Some(c) = &mut r.classification {
            c.extraction_seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per method with an aggregate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for m in &self.methods {
            if let Some(a) = &m.aggregate {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    m.method, a.accuracy, a.precision, a.recall, a.f_measure, a.iou, a.runtime_seconds
                ));
            }
        }
        out
    }
}

/// Writes the JSON report to `path` and the CSV table next to it
/// (same stem, `.csv`). Returns the CSV path.
pub fn emit_report(report: &RunReport, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    std::fs::write(path, report.to_json()? + "\n").map_err(|e| Error::io(path, e))?;
    let csv = path.with_extension("csv");
    std::fs::write(&csv, report.to_csv()).map_err(|e| Error::io(&csv, e))?;
    Ok(csv)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<RunReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunReport::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    #[test]
    fn confusion_examples() {
        let white = BwMask::new(2, 2, vec![true; 4]).unwrap();
        let half = BwMask::new(2, 2, vec![true, false, true, false]).unwrap();
        assert_eq!(confusion(&white, &white).unwrap(), counts(4, 0, 0, 0));
        assert_eq!(confusion(&white, &half).unwrap(), counts(2, 0, 2, 0));
        let c = confusion(&half.inverted(), &half).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        let small = BwMask::new(1, 2, vec![true; 2]).unwrap();
        assert!(matches!(confusion(&small, &white), Err(Error::Dimension(_))));
    }

    #[test]
    fn metric_examples() {
        let m = seg_metrics(&counts(2, 0, 2, 0)).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.recall, 1.0);
        assert!((m.f_measure - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.iou - 0.5).abs() < 1e-15);

        let perfect = seg_metrics(&counts(5, 7, 0, 0)).unwrap();
        assert_eq!(
            [perfect.accuracy, perfect.precision, perfect.recall, perfect.f_measure, perfect.iou],
            [1.0; 5]
        );
        let empty = seg_metrics(&counts(0, 9, 0, 0)).unwrap();
        assert_eq!([empty.precision, empty.recall, empty.f_measure, empty.iou], [1.0; 4]);
        assert!(matches!(seg_metrics(&counts(0, 0, 0, 0)), Err(Error::EmptyComparison)));
    }

    #[test]
    fn accuracy_percentage() {
        assert_eq!(classification_accuracy(&counts(50, 45, 3, 2)).unwrap(), 95.0);
        assert_eq!(classification_accuracy(&counts(3, 4, 0, 0)).unwrap(), 100.0);
        assert_eq!(classification_accuracy(&counts(33, 29, 3, 5)).unwrap(), 88.57);
        assert!(matches!(classification_accuracy(&counts(0, 0, 0, 0)), Err(Error::EmptyComparison)));
    }

    #[test]
    fn benchmark_noop() {
        let t = benchmark(|| {}, 3);
        assert!((0.0..0.01).contains(&t));
        let mut calls = 0;
        benchmark(|| calls += 1, 3);
        assert_eq!(calls, 4);
    }

    fn sample_report() -> RunReport {
        let mut config = BTreeMap::new();
        config.insert("seed".into(), "0".into());
        let mut r = RunReport::new("segmentation", config);
        let m = SegMetrics {
            runtime_seconds: 0.125,
            ..seg_metrics(&counts(3, 1, 0, 1)).unwrap()
        };
        r.methods.push(MethodReport::new(
            "otsu",
            "synthetic",
            vec![ImageResult {
                id: "a".into(),
                metrics: m,
            }],
        ));
        r.methods.push(MethodReport::new("kmeans", "synthetic", vec![]));
        r
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let r = sample_report();
        let csv = emit_report(&r, &path).unwrap();
        assert_eq!(load_report(&path).unwrap(), r);
        let table = std::fs::read_to_string(csv).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("otsu,0.8,1,0.75,"));
    }

    #[test]
    fn empty_report_has_no_aggregates() {
        let r = RunReport::new("segmentation", BTreeMap::new());
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
        assert!(!r.to_json().unwrap().contains("aggregate"));
        let m = MethodReport::new("ngn", "empty", vec![]);
        assert!(m.aggregate.is_none());
    }

    proptest! {
        #[test]
        fn iou_matches_jaccard(tp in 0u64..10_000, tn in 0u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000) {
            prop_assume!(tp + fp + fn_ > 0);
            let m = seg_metrics(&counts(tp, tn, fp, fn_)).unwrap();
            let jaccard = tp as f64 / (tp + fp + fn_) as f64;
            prop_assert!((m.iou - jaccard).abs() <= 1e-12);
            prop_assert!(m.iou <= m.f_measure + 1e-15);
            for v in [m.accuracy, m.precision, m.recall, m.f_measure, m.iou] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn swapping_pred_and_truth(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..64)) {
            let n = bits.len();
            let a = BwMask::new(n, 1, bits.iter().map(|b| b.0).collect()).unwrap();
            let b = BwMask::new(n, 1, bits.iter().map(|b| b.1).collect()).unwrap();
            let ab = confusion(&a, &b).unwrap();
            let ba = confusion(&b, &a).unwrap();
            prop_assert_eq!((ab.fp, ab.fn_), (ba.fn_, ba.fp));
            let (mab, mba) = (seg_metrics(&ab).unwrap(), seg_metrics(&ba).unwrap());
            prop_assert_eq!(mab.accuracy, mba.accuracy);
            prop_assert_eq!(mab.precision, mba.recall);
        }
    }
}

//! The two end-to-end pipelines and the stages they share.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use ngnseg::dataset::{DatasetManifest, ManifestEntry};
use ngnseg::eval::{
    benchmark, classification_accuracy, confusion, seg_metrics, ConfusionCounts, ClassificationReport,
    ImageResult, MethodReport, RunReport, SegMetrics, Skipped,
};
use ngnseg::features::{
    extract_hog, extract_ngn_features, fit_lasso, lambda_max, select_features, DescriptorKind, FeatureVector,
    GaborBank, GaborConfig, HogConfig,
};
use ngnseg::firefly::fa_enhance;
use ngnseg::image::{load_gray, load_mask, resize_bilinear, resize_nearest, GrayImage};
use ngnseg::segment::{segment_kmeans, segment_ngn, segment_otsu, segment_watershed, to_bw, BwMask, LabelMap};
use ngnseg::svm::{roc_curve, split_dataset, train_svm, MinMaxScaler};
use ngnseg::{Error, Result};

use crate::config::PipelineConfig;

/// Pipeline stage, used to name failures and pick the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Enhance,
    Segment,
    Extract,
    Split,
    Select,
    Scale,
    TrainSvm,
    Evaluate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Enhance => "enhance",
            Stage::Segment => "segment",
            Stage::Extract => "extract",
            Stage::Split => "split",
            Stage::Select => "select",
            Stage::Scale => "scale",
            Stage::TrainSvm => "train_svm",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Load => 3,
            Stage::Enhance => 4,
            Stage::Segment => 5,
            Stage::Extract => 6,
            Stage::Split => 7,
            Stage::Select => 8,
            Stage::Scale => 9,
            Stage::TrainSvm => 10,
            Stage::Evaluate => 11,
            Stage::Report => 12,
        }
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub source: Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {}", self.stage.name(), self.source)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

pub type StageResult<T> = std::result::Result<T, PipelineError>;

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

/// Loads a grayscale image and resizes it to `size × size` (bilinear) unless
/// `size` is 0 or already matches.
pub fn load_image(path: &Path, size: usize) -> Result<GrayImage> {
    let img = load_gray(path)?;
    if size == 0 || (img.width() == size && img.height() == size) {
        return Ok(img);
    }
    resize_bilinear(&img, size, size)
}

/// Loads a mask, resized with nearest neighbour to match the image size.
pub fn load_mask_sized(path: &Path, size: usize) -> Result<BwMask> {
    let mask = load_mask(path)?;
    if size == 0 || (mask.width() == size && mask.height() == size) {
        return Ok(mask);
    }
    let g = resize_nearest(&mask.to_gray(), size, size)?;
    Ok(BwMask::from_gray(&g, 128))
}

pub fn segment_image(method: &str, img: &GrayImage, cfg: &PipelineConfig) -> Result<LabelMap> {
    match method {
        "ngn" => segment_ngn(img, cfg.segments, &cfg.ngn),
        "otsu" => segment_otsu(img, cfg.segments),
        "kmeans" => segment_kmeans(img, cfg.segments, cfg.kmeans_seed, cfg.kmeans_max_iters),
        "watershed" => segment_watershed(img),
        other => Err(Error::Config(format!("unknown segmentation method `{other}`"))),
    }
}

/// Reusable per-descriptor state.
pub enum Extractor {
    Ngn { enhance: bool },
    Hog(HogConfig),
    Gabor(Box<GaborBank>),
}

impl Extractor {
    pub fn new(kind: DescriptorKind, cfg: &PipelineConfig) -> Result<Self> {
        Ok(match kind {
            DescriptorKind::Ngn => Extractor::Ngn {
                enhance: cfg.enhance_features,
            },
            DescriptorKind::Hog => Extractor::Hog(HogConfig::default()),
            DescriptorKind::Gabor => Extractor::Gabor(Box::new(GaborBank::new(GaborConfig::default())?)),
        })
    }

    pub fn extract(&self, img: &GrayImage, cfg: &PipelineConfig) -> Result<FeatureVector> {
        match self {
            Extractor::Ngn { enhance } => extract_ngn_features(img, &cfg.ngn, *enhance, &cfg.fa),
            Extractor::Hog(h) => extract_hog(img, h),
            Extractor::Gabor(bank) => Ok(bank.extract(img)),
        }
    }
}

/// One feature row per image, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub descriptor: DescriptorKind,
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub rows: Vec<Vec<f64>>,
    /// Wall-clock seconds spent extracting.
    pub seconds: f64,
}

impl FeatureTable {
    /// `id,label,f0..fD-1` with a header line.
    pub fn to_csv(&self) -> String {
        let dim = self.rows.first().map_or(0, Vec::len);
        let mut out = String::from("id,label");
        for j in 0..dim {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            out.push_str(&format!("{id},{label}"));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, descriptor: DescriptorKind) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::EmptyData("feature table is empty".into()))?;
        let dim = header.split(',').count().saturating_sub(2);
        let mut table = FeatureTable {
            descriptor,
            ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
            seconds: 0.0,
        };
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |msg: String| Error::Format(format!("feature row {}: {msg}", i + 1));
            if fields.len() != dim + 2 {
                return Err(bad(format!("expected {} fields, got {}", dim + 2, fields.len())));
            }
            table.ids.push(fields[0].to_string());
            table.labels.push(match fields[1] {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(format!("label must be 0 or 1, got `{other}`"))),
            });
            let row = fields[2..]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            table.rows.push(row);
        }
        Ok(table)
    }
}

/// Extracts one descriptor for every manifest entry. Images are processed in
/// parallel; rows keep manifest order.
pub fn extract_table(
    manifest: &DatasetManifest,
    kind: DescriptorKind,
    cfg: &PipelineConfig,
) -> StageResult<FeatureTable> {
    let enhance = kind == DescriptorKind::Ngn && cfg.enhance_features;
    let extractor = match kind {
        DescriptorKind::Ngn => Extractor::Ngn { enhance: false },
        _ => Extractor::new(kind, cfg).at(Stage::Config)?,
    };
    let start = Instant::now();
    let rows = manifest
        .entries
        .par_iter()
        .map(|e| {
            let mut img = load_image(&e.image, cfg.resize).at(Stage::Load)?;
            if enhance {
                img = fa_enhance(&img, &cfg.fa).at(Stage::Enhance)?.image;
            }
            Ok(extractor.extract(&img, cfg).at(Stage::Extract)?.values)
        })
        .collect::<StageResult<Vec<_>>>()?;
    Ok(FeatureTable {
        descriptor: kind,
        ids: manifest.entries.iter().map(ManifestEntry::id).collect(),
        labels: manifest.entries.iter().map(|e| e.label).collect(),
        rows,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn to_sign(label: u8) -> i8 {
    if label == 1 {
        1
    } else {
        -1
    }
}

fn check_two_classes(labels: &[u8]) -> StageResult<()> {
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Err(PipelineError {
            stage: Stage::TrainSvm,
            source: Error::DegenerateLabels(format!(
                "{} samples, classifier needs both classes",
                labels.len()
            )),
        });
    }
    Ok(())
}

/// Split, Lasso selection on the training rows (skipped when `lambda_factor`
/// is `None`), min-max scaling, SVM, and evaluation on both splits.
pub fn classify_table(
    table: &FeatureTable,
    cfg: &PipelineConfig,
    lambda_factor: Option<f64>,
) -> StageResult<ClassificationReport> {
    check_two_classes(&table.labels)?;
    let split = split_dataset(&table.labels, &cfg.split).at(Stage::Split)?;
    let pick = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&i| table.rows[i].clone()).collect() };
    let signs = |idx: &[usize]| -> Vec<i8> { idx.iter().map(|&i| to_sign(table.labels[i])).collect() };
    let (train_raw, test_raw) = (pick(&split.train), pick(&split.test));
    let (y_train, y_test) = (signs(&split.train), signs(&split.test));

    let (train_sel, test_sel, lambda, selected) = match lambda_factor {
        Some(factor) => {
            let target: Vec<f64> = y_train.iter().map(|&y| y as f64).collect();
            let lambda = factor * lambda_max(&train_raw, &target).at(Stage::Select)?;
            let model = fit_lasso(&train_raw, &target, lambda).at(Stage::Select)?;
            (
                select_features(&train_raw, &model).at(Stage::Select)?,
                select_features(&test_raw, &model).at(Stage::Select)?,
                lambda,
                model.kept_columns(),
            )
        }
        None => {
            let all = (0..train_raw.first().map_or(0, Vec::len)).collect();
            (train_raw, test_raw, 0.0, all)
        }
    };

    let scaler = MinMaxScaler::fit(&train_sel).at(Stage::Scale)?;
    let train_x: Vec<Vec<f64>> = train_sel.iter().map(|r| scaler.transform(r)).collect();
    let test_x: Vec<Vec<f64>> = test_sel.iter().map(|r| scaler.transform(r)).collect();

    let svm_cfg = cfg.svm_config(selected.len());
    let model = train_svm(&train_x, &y_train, &svm_cfg).at(Stage::TrainSvm)?;

    let predict_all = |rows: &[Vec<f64>]| -> Result<(Vec<f64>, Vec<i8>)> {
        let mut scores = Vec::with_capacity(rows.len());
        let mut classes = Vec::with_capacity(rows.len());
        for r in rows {
            let (s, c) = model.predict(r)?;
            scores.push(s);
            classes.push(c);
        }
        Ok((scores, classes))
    };
    let (_, train_pred) = predict_all(&train_x).at(Stage::Evaluate)?;
    let (test_scores, test_pred) = predict_all(&test_x).at(Stage::Evaluate)?;
    let train_confusion = ConfusionCounts::from_labels(&train_pred, &y_train).at(Stage::Evaluate)?;
    let test_confusion = ConfusionCounts::from_labels(&test_pred, &y_test).at(Stage::Evaluate)?;

    Ok(ClassificationReport {
        descriptor: table.descriptor.to_string(),
        kernel: svm_cfg.kernel.to_string(),
        c: svm_cfg.c,
        lambda,
        selected_features: selected,
        train_size: split.train.len(),
        test_size: split.test.len(),
        train_accuracy: classification_accuracy(&train_confusion).at(Stage::Evaluate)?,
        test_accuracy: classification_accuracy(&test_confusion).at(Stage::Evaluate)?,
        train_confusion,
        test_confusion,
        roc: roc_curve(&test_scores, &y_test).at(Stage::Evaluate)?,
        svm_converged: model.converged,
        extraction_seconds: table.seconds,
    })
}

fn load_manifest(cfg: &PipelineConfig) -> StageResult<DatasetManifest> {
    let path = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| Error::Config("no manifest given".into()))
        .at(Stage::Config)?;
    DatasetManifest::load(path).at(Stage::Load)
}

/// Name used for the dataset column: the manifest's directory.
pub fn dataset_name(manifest: &DatasetManifest) -> String {
    manifest
        .root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| manifest.name.clone())
}

/// Enhance, NGN features, Lasso on the training split, SVM, evaluation.
pub fn run_classification_pipeline(cfg: &PipelineConfig) -> StageResult<RunReport> {
    cfg.validate().at(Stage::Config)?;
    let mut report = RunReport::new("classification", cfg.echo());
    let manifest = load_manifest(cfg)?;
    let labels: Vec<u8> = manifest.entries.iter().map(|e| e.label).collect();
    check_two_classes(&labels)?;
    let table = extract_table(&manifest, DescriptorKind::Ngn, cfg)?;
    report.classification = Some(classify_table(&table, cfg, Some(cfg.lambda_factor))?);
    report.finished_at = ngnseg::eval::unix_now();
    Ok(report)
}

/// How per-image segmentation runtime is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    /// One timed run.
    Single,
    /// Median of `n` runs after a warm-up.
    Median(usize),
}

type EntryOutcome = std::result::Result<Vec<ImageResult>, Skipped>;

fn segment_entry(entry: &ManifestEntry, cfg: &PipelineConfig, timing: Timing) -> StageResult<EntryOutcome> {
    let id = entry.id();
    let Some(mask_path) = &entry.mask else {
        return Ok(Err(Skipped {
            id,
            reason: Error::Manifest("entry has no ground-truth mask".into()).to_string(),
        }));
    };
    let mut img = load_image(&entry.image, cfg.resize).at(Stage::Load)?;
    let gt = load_mask_sized(mask_path, cfg.resize).at(Stage::Load)?;
    if (gt.width(), gt.height()) != (img.width(), img.height()) {
        return Err(Error::Dimension(format!(
            "mask {}x{} does not match image {}x{}",
            gt.width(),
            gt.height(),
            img.width(),
            img.height()
        )))
        .at(Stage::Load);
    }
    if cfg.enhance_segmentation {
        img = fa_enhance(&img, &cfg.fa).at(Stage::Enhance)?.image;
    }
    let mut results = Vec::with_capacity(cfg.methods.len());
    for method in &cfg.methods {
        let start = Instant::now();
        let map = segment_image(method, &img, cfg).at(Stage::Segment)?;
        let mut runtime = start.elapsed().as_secs_f64();
        if let Timing::Median(n) = timing {
            runtime = benchmark(
                || {
                    let _ = segment_image(method, &img, cfg);
                },
                n,
            );
        }
        let bw = to_bw(&map, cfg.bw_mode).at(Stage::Evaluate)?;
        let counts = confusion(&bw, &gt).at(Stage::Evaluate)?;
        let metrics = SegMetrics {
            runtime_seconds: runtime,
            ..seg_metrics(&counts).at(Stage::Evaluate)?
        };
        results.push(ImageResult {
            id: id.clone(),
            metrics,
        });
    }
    Ok(Ok(results))
}

fn segmentation_report(kind: &str, cfg: &PipelineConfig, timing: Timing) -> StageResult<RunReport> {
    cfg.validate().at(Stage::Config)?;
    let mut report = RunReport::new(kind, cfg.echo());
    let manifest = load_manifest(cfg)?;
    let dataset = dataset_name(&manifest);
    // timed runs are measured one image at a time
    let outcomes: Vec<EntryOutcome> = match timing {
        Timing::Single => manifest
            .entries
            .par_iter()
            .map(|e| segment_entry(e, cfg, timing))
            .collect::<StageResult<_>>()?,
        Timing::Median(_) => manifest
            .entries
            .iter()
            .map(|e| segment_entry(e, cfg, timing))
            .collect::<StageResult<_>>()?,
    };
    let mut per_method: Vec<Vec<ImageResult>> = vec![Vec::new(); cfg.methods.len()];
    for outcome in outcomes {
        match outcome {
            Ok(results) => {
                for (slot, r) in per_method.iter_mut().zip(results) {
                    slot.push(r);
                }
            }
            Err(skip) => report.skipped.push(skip),
        }
    }
    report.methods = cfg
        .methods
        .iter()
        .zip(per_method)
        .map(|(m, images)| MethodReport::new(m.clone(), dataset.clone(), images))
        .collect();
    report.finished_at = ngnseg::eval::unix_now();
    Ok(report)
}

/// Every configured segmenter against the manifest's masks.
pub fn run_segmentation_pipeline(cfg: &PipelineConfig) -> StageResult<RunReport> {
    segmentation_report("segmentation", cfg, Timing::Single)
}

/// Like [`run_segmentation_pipeline`], with runtimes taken as medians of
/// `cfg.repetitions` sequential runs.
pub fn run_segmentation_benchmark(cfg: &PipelineConfig) -> StageResult<RunReport> {
    segmentation_report("benchmark", cfg, Timing::Median(cfg.repetitions))
}

/// Mean per-image extraction time (median of `cfg.repetitions` runs each)
/// for every descriptor. NGN is timed without enhancement and, separately,
/// with it as `ngn+fa`.
pub fn benchmark_descriptors(cfg: &PipelineConfig) -> StageResult<Vec<(String, f64)>> {
    cfg.validate().at(Stage::Config)?;
    let manifest = load_manifest(cfg)?;
    let images = manifest
        .entries
        .iter()
        .map(|e| load_image(&e.image, cfg.resize))
        .collect::<Result<Vec<_>>>()
        .at(Stage::Load)?;
    let mut plain = cfg.clone();
    plain.enhance_features = false;
    let mut with_fa = cfg.clone();
    with_fa.enhance_features = true;
    let runs: [(&str, DescriptorKind, &PipelineConfig); 4] = [
        ("ngn", DescriptorKind::Ngn, &plain),
        ("ngn+fa", DescriptorKind::Ngn, &with_fa),
        ("hog", DescriptorKind::Hog, &plain),
        ("gabor", DescriptorKind::Gabor, &plain),
    ];
    let mut out = Vec::new();
    for (name, kind, c) in runs {
        let extractor = Extractor::new(kind, c).at(Stage::Config)?;
        for img in &images {
            extractor.extract(img, c).at(Stage::Extract)?;
        }
        let total: f64 = images
            .iter()
            .map(|img| {
                benchmark(
                    || {
                        let _ = extractor.extract(img, c);
                    },
                    cfg.repetitions,
                )
            })
            .sum();
        out.push((name.to_string(), if images.is_empty() { 0.0 } else { total / images.len() as f64 }));
    }
    Ok(out)
}

/// True when a segmentation report has no evaluated images.
pub fn is_empty_report(report: &RunReport) -> bool {
    report.methods.iter().all(|m| m.images.is_empty())
}

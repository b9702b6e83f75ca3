//! `ngnseg` command-line entry point.
//!
//! Exit codes: 0 success, 1 unexpected failure, and one code per failing
//! stage: 2 config or usage, 3 load, 4 enhance, 5 segment, 6 extract,
//! 7 split, 8 select, 9 scale, 10 train_svm, 11 evaluate, 12 report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ngnseg::eval::{emit_report, RunReport, REPORT_SCHEMA_VERSION};
use ngnseg::features::DescriptorKind;
use ngnseg::firefly::{apply_enhance, enhance_fitness, fa_enhance, EnhanceParams};
use ngnseg::image::{labelmap_to_color, save_png_gray, save_png_rgb, IndexedPalette};
use ngnseg::Error;
use ngnseg_cli::pipeline::{is_empty_report, load_image, segment_image, AtStage};
use ngnseg_cli::{
    benchmark_descriptors, classify_table, extract_table, run_classification_pipeline, run_segmentation_benchmark,
    run_segmentation_pipeline, FeatureTable, PipelineConfig, PipelineError, Stage, StageResult,
};

#[derive(Parser)]
#[command(name = "ngnseg", about = "Neural gas segmentation, features and classification", disable_version_flag = true)]
struct Cli {
    /// Print the configuration schema version and exit.
    #[arg(long, short = 'V')]
    version: bool,

    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key (repeatable), e.g. `--set ngn.neurons=8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Worker threads for per-image work (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct SeedArg {
    /// Seed for every random stage.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Contrast-enhance one image.
    Enhance {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        /// Skip the search and apply `gain,bias,gamma` directly.
        #[arg(long, value_name = "A,B,G")]
        params: Option<String>,
    },
    /// Segment one image into an indexed PNG plus a JSON sidecar.
    Segment {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "ngn")]
        method: String,
        #[arg(long)]
        segments: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
        /// Enhance contrast before segmenting.
        #[arg(long)]
        enhance: bool,
    },
    /// Write a feature table for a manifest.
    Extract {
        #[arg(long, default_value = "ngn")]
        method: String,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train and evaluate the SVM on a feature table.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long)]
        c: Option<f64>,
        /// Training fraction.
        #[arg(long)]
        split: Option<f64>,
        #[command(flatten)]
        seed: SeedArg,
        /// Lasso λ as a fraction of λ_max; omitted means no selection.
        #[arg(long)]
        lambda_factor: Option<f64>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Evaluate segmenters against the manifest's masks.
    EvalSeg {
        /// Comma-separated methods (default: all).
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Time every segmenter and descriptor; writes the report, its CSV table
    /// and `<out>_features.csv`.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Enhance, NGN features, Lasso, SVM.
    PipelineClassify {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// All segmenters against ground truth.
    PipelineSegment {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        enhance: bool,
    },
}

fn base_config(cli: &Cli, flags: &[(&str, String)]) -> StageResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p).at(Stage::Config)?,
        None => PipelineConfig::default(),
    };
    for (k, v) in flags {
        cfg.set(k, v).at(Stage::Config)?;
    }
    cfg.apply_overrides(&cli.overrides).at(Stage::Config)?;
    cfg.validate().at(Stage::Config)?;
    Ok(cfg)
}

fn seed_flag(seed: &SeedArg, flags: &mut Vec<(&'static str, String)>) {
    if let Some(s) = seed.seed {
        flags.push(("seed", s.to_string()));
    }
}

fn write_report(report: &RunReport, path: &Path) -> StageResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })
            .at(Stage::Report)?;
    }
    emit_report(report, path).at(Stage::Report)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> StageResult<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
        .at(Stage::Report)
}

#[derive(Serialize)]
struct EnhanceOutput {
    params: EnhanceParams,
    fitness: f64,
    identity_fitness: f64,
}

#[derive(Serialize)]
struct SegmentSidecar<'a> {
    method: &'a str,
    #[serde(rename = "K")]
    k: u32,
    runtime_seconds: f64,
}

fn run(cli: Cli) -> StageResult<()> {
    let Some(command) = &cli.command else {
        return Err(Error::Config("no subcommand given; see --help".into())).at(Stage::Config);
    };
    match command {
        Command::Enhance {
            input,
            output,
            seed,
            params,
        } => {
            let mut flags = Vec::new();
            seed_flag(seed, &mut flags);
            let cfg = base_config(&cli, &flags)?;
            let img = load_image(input, 0).at(Stage::Load)?;
            let out = match params {
                Some(text) => {
                    let p = text
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<f64>, _>>()
                        .ok()
                        .filter(|p| p.len() == 3)
                        .ok_or_else(|| Error::Config(format!("--params expects gain,bias,gamma, got `{text}`")))
                        .at(Stage::Config)?;
                    let params = EnhanceParams::from_position(&p);
                    let image = apply_enhance(&img, &params);
                    save_png_gray(&image, output).at(Stage::Report)?;
                    EnhanceOutput {
                        params,
                        fitness: enhance_fitness(&image),
                        identity_fitness: enhance_fitness(&img),
                    }
                }
                None => {
                    let e = fa_enhance(&img, &cfg.fa).at(Stage::Enhance)?;
                    save_png_gray(&e.image, output).at(Stage::Report)?;
                    EnhanceOutput {
                        params: e.params,
                        fitness: e.fitness,
                        identity_fitness: e.identity_fitness,
                    }
                }
            };
            println!("{}", serde_json::to_string(&out).expect("plain data serializes"));
        }
        Command::Segment {
            input,
            output,
            method,
            segments,
            seed,
            enhance,
        } => {
            let mut flags = vec![("methods", method.clone())];
            if let Some(k) = segments {
                flags.push(("segments", k.to_string()));
            }
            seed_flag(seed, &mut flags);
            let cfg = base_config(&cli, &flags)?;
            let mut img = load_image(input, 0).at(Stage::Load)?;
            if *enhance {
                img = fa_enhance(&img, &cfg.fa).at(Stage::Enhance)?.image;
            }
            let start = Instant::now();
            let map = segment_image(method, &img, &cfg).at(Stage::Segment)?;
            let runtime_seconds = start.elapsed().as_secs_f64();
            let rgb = labelmap_to_color(&map, &IndexedPalette::default_for(map.k() as usize)).at(Stage::Report)?;
            save_png_rgb(&rgb, output).at(Stage::Report)?;
            let sidecar = SegmentSidecar {
                method,
                k: map.k(),
                runtime_seconds,
            };
            let text = serde_json::to_string_pretty(&sidecar).expect("plain data serializes");
            write_text(&output.with_extension("json"), &(text + "\n"))?;
        }
        Command::Extract {
            method,
            manifest,
            out,
            seed,
        } => {
            let mut flags = Vec::new();
            seed_flag(seed, &mut flags);
            let cfg = base_config(&cli, &flags)?;
            let kind: DescriptorKind = method.parse().at(Stage::Config)?;
            let m = ngnseg::dataset::DatasetManifest::load(manifest).at(Stage::Load)?;
            let table = extract_table(&m, kind, &cfg)?;
            write_text(out, &table.to_csv())?;
        }
        Command::Train {
            features,
            kernel,
            c,
            split,
            seed,
            lambda_factor,
            report,
        } => {
            let mut flags = Vec::new();
            seed_flag(seed, &mut flags);
            if let Some(k) = kernel {
                flags.push(("svm.kernel", k.clone()));
            }
            if let Some(c) = c {
                flags.push(("svm.c", c.to_string()));
            }
            if let Some(s) = split {
                flags.push(("split.train_fraction", s.to_string()));
            }
            if let Some(l) = lambda_factor {
                flags.push(("lasso.lambda_factor", l.to_string()));
            }
            let cfg = base_config(&cli, &flags)?;
            let text = std::fs::read_to_string(features)
                .map_err(|e| Error::Io {
                    path: features.clone(),
                    source: e,
                })
                .at(Stage::Load)?;
            let table = FeatureTable::from_csv(&text, DescriptorKind::Ngn).at(Stage::Load)?;
            let mut r = RunReport::new("classification", cfg.echo());
            r.config.insert("features".into(), features.display().to_string());
            r.classification = Some(classify_table(&table, &cfg, lambda_factor.map(|_| cfg.lambda_factor))?);
            r.finished_at = ngnseg::eval::unix_now();
            write_report(&r, report)?;
        }
        Command::EvalSeg {
            method,
            manifest,
            out,
            seed,
        } => {
            let mut flags = vec![("manifest", manifest.display().to_string())];
            if let Some(m) = method {
                flags.push(("methods", m.clone()));
            }
            seed_flag(seed, &mut flags);
            let cfg = base_config(&cli, &flags)?;
            let r = run_segmentation_pipeline(&cfg)?;
            warn_if_empty(&r);
            write_report(&r, out)?;
        }
        Command::Bench {
            manifest,
            out,
            repetitions,
        } => {
            let mut flags = vec![("manifest", manifest.display().to_string())];
            if let Some(n) = repetitions {
                flags.push(("bench.repetitions", n.to_string()));
            }
            let cfg = base_config(&cli, &flags)?;
            let r = run_segmentation_benchmark(&cfg)?;
            warn_if_empty(&r);
            write_report(&r, out)?;
            let mut csv = String::from("descriptor,runtime\n");
            for (name, secs) in benchmark_descriptors(&cfg)? {
                csv.push_str(&format!("{name},{secs}\n"));
            }
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            write_text(&out.with_file_name(format!("{stem}_features.csv")), &csv)?;
        }
        Command::PipelineClassify { manifest, out, seed } => {
            let mut flags = Vec::new();
            if let Some(m) = manifest {
                flags.push(("manifest", m.display().to_string()));
            }
            seed_flag(seed, &mut flags);
            let cfg = base_config(&cli, &flags)?;
            let r = run_classification_pipeline(&cfg)?;
            write_report(&r, out)?;
        }
        Command::PipelineSegment {
            manifest,
            out,
            seed,
            enhance,
        } => {
            let mut flags = Vec::new();
            if let Some(m) = manifest {
                flags.push(("manifest", m.display().to_string()));
            }
            if *enhance {
                flags.push(("enhance.segmentation", "true".into()));
            }
            seed_flag(seed, &mut flags);
            let cfg = base_config(&cli, &flags)?;
            let r = run_segmentation_pipeline(&cfg)?;
            warn_if_empty(&r);
            write_report(&r, out)?;
        }
    }
    Ok(())
}

fn warn_if_empty(report: &RunReport) {
    if is_empty_report(report) {
        eprintln!("warning: no images were evaluated; the report is empty");
    }
    for s in &report.skipped {
        eprintln!("warning: skipped {}: {}", s.id, s.reason);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.version {
        println!("ngnseg {} (config schema {REPORT_SCHEMA_VERSION})", env!("CARGO_PKG_VERSION"));
        return ExitCode::SUCCESS;
    }
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError { stage, source }) => {
            eprintln!("error: stage `{}` failed: {source}", stage.name());
            ExitCode::from(stage.exit_code() as u8)
        }
    }
}

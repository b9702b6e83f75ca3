//! Pipeline configuration: defaults, `key=value` files and overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ngnseg::firefly::FaConfig;
use ngnseg::ngn::NgnConfig;
use ngnseg::segment::BwMode;
use ngnseg::svm::{Kernel, SplitSpec, SvmConfig};
use ngnseg::{Error, Result};

/// Segmenters run by the segmentation pipeline, in report order.
pub const SEGMENT_METHODS: [&str; 4] = ["ngn", "otsu", "kmeans", "watershed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelChoice {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ngn: NgnConfig,
    /// Listed with the NGN parameters but not used by training.
    pub t_initial: f64,
    pub t_final: f64,
    pub fa: FaConfig,
    pub kernel: KernelChoice,
    /// `None` means `1 / feature count`.
    pub gamma: Option<f64>,
    pub c: f64,
    pub svm_tol: f64,
    pub svm_seed: u64,
    pub split: SplitSpec,
    /// Lasso λ as a fraction of λ_max on the training split.
    pub lambda_factor: f64,
    pub segments: usize,
    pub kmeans_seed: u64,
    pub kmeans_max_iters: usize,
    /// Side length images are resized to; 0 keeps the original size.
    pub resize: usize,
    pub enhance_features: bool,
    pub enhance_segmentation: bool,
    pub bw_mode: BwMode,
    pub methods: Vec<String>,
    pub repetitions: usize,
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ngn: NgnConfig::default(),
            t_initial: 5.0,
            t_final: 10.0,
            fa: FaConfig::default(),
            kernel: KernelChoice::Rbf,
            gamma: None,
            c: 10.0,
            svm_tol: 1e-3,
            svm_seed: 0,
            split: SplitSpec::default(),
            lambda_factor: 0.01,
            segments: 4,
            kmeans_seed: 0,
            kmeans_max_iters: 100,
            resize: 256,
            enhance_features: true,
            enhance_segmentation: false,
            bw_mode: BwMode::Brightest,
            methods: SEGMENT_METHODS.iter().map(|s| s.to_string()).collect(),
            repetitions: 3,
            manifest: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

impl PipelineConfig {
    /// Sets one parameter. `seed` sets every seed at once.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "seed" => {
                let s: u64 = parse(key, value)?;
                self.ngn.seed = s;
                self.fa.seed = s;
                self.svm_seed = s;
                self.split.seed = s;
                self.kmeans_seed = s;
            }
            "ngn.neurons" => self.ngn.neuron_count = parse(key, value)?,
            "ngn.iterations" => self.ngn.iterations = parse(key, value)?,
            "ngn.epsilon_initial" => self.ngn.epsilon_initial = parse(key, value)?,
            "ngn.epsilon_final" => self.ngn.epsilon_final = parse(key, value)?,
            "ngn.lambda_initial" => self.ngn.lambda_initial = parse(key, value)?,
            "ngn.lambda_final" => self.ngn.lambda_final = parse(key, value)?,
            "ngn.t_initial" => self.t_initial = parse(key, value)?,
            "ngn.t_final" => self.t_final = parse(key, value)?,
            "ngn.seed" => self.ngn.seed = parse(key, value)?,
            "fa.population" => self.fa.population = parse(key, value)?,
            "fa.iterations" => self.fa.iterations = parse(key, value)?,
            "fa.mutation_rate" => self.fa.mutation_rate = parse(key, value)?,
            "fa.light_absorption" => self.fa.light_absorption = parse(key, value)?,
            "fa.attraction" => self.fa.attraction = parse(key, value)?,
            "fa.damping" => self.fa.damping = parse(key, value)?,
            "fa.seed" => self.fa.seed = parse(key, value)?,
            "svm.kernel" => {
                self.kernel = match value {
                    "linear" => KernelChoice::Linear,
                    "rbf" => KernelChoice::Rbf,
                    other => return Err(Error::Config(format!("unknown kernel `{other}`"))),
                }
            }
            "svm.gamma" => self.gamma = if value == "auto" { None } else { Some(parse(key, value)?) },
            "svm.c" => self.c = parse(key, value)?,
            "svm.tol" => self.svm_tol = parse(key, value)?,
            "svm.seed" => self.svm_seed = parse(key, value)?,
            "split.train_fraction" => self.split.train_fraction = parse(key, value)?,
            "split.seed" => self.split.seed = parse(key, value)?,
            "split.stratified" => self.split.stratified = parse(key, value)?,
            "lasso.lambda_factor" => self.lambda_factor = parse(key, value)?,
            "segments" => self.segments = parse(key, value)?,
            "kmeans.seed" => self.kmeans_seed = parse(key, value)?,
            "kmeans.max_iters" => self.kmeans_max_iters = parse(key, value)?,
            "resize" => self.resize = parse(key, value)?,
            "enhance.features" => self.enhance_features = parse(key, value)?,
            "enhance.segmentation" => self.enhance_segmentation = parse(key, value)?,
            "bw_mode" => self.bw_mode = parse(key, value)?,
            "methods" => {
                let methods: Vec<String> = value.split(',').map(|m| m.trim().to_string()).collect();
                if let Some(bad) = methods.iter().find(|m| !SEGMENT_METHODS.contains(&m.as_str())) {
                    return Err(Error::Config(format!("unknown segmentation method `{bad}`")));
                }
                self.methods = methods;
            }
            "bench.repetitions" => self.repetitions = parse(key, value)?,
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines in order. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides, e.g. from repeated `--set` flags.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        for p in pairs {
            let (k, v) = p
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{}` is not key=value", p.as_ref())))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.ngn.validate()?;
        self.fa.validate()?;
        if !(self.c > 0.0) {
            return Err(Error::Config("svm.c must be positive".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config("split.train_fraction must be in (0, 1)".into()));
        }
        if !(self.lambda_factor >= 0.0) {
            return Err(Error::Config("lasso.lambda_factor must be >= 0".into()));
        }
        if self.segments == 0 {
            return Err(Error::Config("segments must be >= 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("bench.repetitions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn svm_config(&self, dim: usize) -> SvmConfig {
        let kernel = match (self.kernel, self.gamma) {
            (KernelChoice::Linear, _) => Kernel::Linear,
            (KernelChoice::Rbf, Some(gamma)) => Kernel::Rbf { gamma },
            (KernelChoice::Rbf, None) => Kernel::rbf_for_dim(dim),
        };
        SvmConfig {
            kernel,
            c: self.c,
            tol: self.svm_tol,
            seed: self.svm_seed,
            ..SvmConfig::default()
        }
    }

    /// Every effective parameter, keyed as in configuration files.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("ngn.neurons", self.ngn.neuron_count.to_string());
        put("ngn.iterations", self.ngn.iterations.to_string());
        put("ngn.epsilon_initial", self.ngn.epsilon_initial.to_string());
        put("ngn.epsilon_final", self.ngn.epsilon_final.to_string());
        put("ngn.lambda_initial", self.ngn.lambda_initial.to_string());
        put("ngn.lambda_final", self.ngn.lambda_final.to_string());
        put("ngn.t_initial", format!("{} (unused)", self.t_initial));
        put("ngn.t_final", format!("{} (unused)", self.t_final));
        put("ngn.seed", self.ngn.seed.to_string());
        put("fa.population", self.fa.population.to_string());
        put("fa.iterations", self.fa.iterations.to_string());
        put("fa.mutation_rate", self.fa.mutation_rate.to_string());
        put("fa.light_absorption", self.fa.light_absorption.to_string());
        put("fa.attraction", self.fa.attraction.to_string());
        put("fa.damping", self.fa.damping.to_string());
        put("fa.bounds", format!("{:?}", self.fa.bounds));
        put("fa.seed", self.fa.seed.to_string());
        put(
            "svm.kernel",
            match self.kernel {
                KernelChoice::Linear => "linear",
                KernelChoice::Rbf => "rbf",
            }
            .to_string(),
        );
        put("svm.gamma", self.gamma.map_or("auto".to_string(), |g| g.to_string()));
        put("svm.c", self.c.to_string());
        put("svm.tol", self.svm_tol.to_string());
        put("svm.max_passes", SvmConfig::default().max_passes.to_string());
        put("svm.seed", self.svm_seed.to_string());
        put("split.train_fraction", self.split.train_fraction.to_string());
        put("split.seed", self.split.seed.to_string());
        put("split.stratified", self.split.stratified.to_string());
        put("lasso.lambda_factor", self.lambda_factor.to_string());
        put("segments", self.segments.to_string());
        put("kmeans.seed", self.kmeans_seed.to_string());
        put("kmeans.max_iters", self.kmeans_max_iters.to_string());
        put("resize", self.resize.to_string());
        put("enhance.features", self.enhance_features.to_string());
        put("enhance.segmentation", self.enhance_segmentation.to_string());
        put("bw_mode", self.bw_mode.to_string());
        put("methods", self.methods.join(","));
        put("bench.repetitions", self.repetitions.to_string());
        put(
            "manifest",
            self.manifest
                .as_ref()
                .map_or(String::new(), |p| p.display().to_string()),
        );
        put("out_dir", self.out_dir.display().to_string());
        m
    }
}

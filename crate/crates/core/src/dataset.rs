//! Dataset manifests: one `relative/path.png,label[,mask.png]` entry per line.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image: PathBuf,
    /// Binary class label, 0 or 1.
    pub label: u8,
    pub mask: Option<PathBuf>,
}

impl ManifestEntry {
    /// Identifier used in reports and feature tables.
    pub fn id(&self) -> String {
        self.image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Parses manifest text. Paths are resolved against `root`.
    pub fn parse(text: &str, root: impl Into<PathBuf>, name: impl Into<String>) -> Result<Self> {
        let root = root.into();
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |msg: &str| Error::Manifest(format!("line {}: {msg}", lineno + 1));
            if !(2..=3).contains(&fields.len()) || fields[0].is_empty() {
                return Err(bad("expected `path,label[,mask]`"));
            }
            let label = match fields[1] {
                "0" => 0,
                "1" => 1,
                other => return Err(bad(&format!("label must be 0 or 1, got `{other}`"))),
            };
            let mask = fields.get(2).filter(|m| !m.is_empty()).map(|m| root.join(m));
            entries.push(ManifestEntry {
                image: root.join(fields[0]),
                label,
                mask,
            });
        }
        Ok(Self {
            name: name.into(),
            root,
            entries,
        })
    }

    /// Loads a manifest file and checks that every image exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let manifest = Self::parse(&text, root, name)?;
        for e in &manifest.entries {
            if !e.image.is_file() {
                return Err(Error::Manifest(format!("missing image {}", e.image.display())));
            }
        }
        Ok(manifest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Renders the manifest back to text with paths relative to `root`.
    pub fn to_text(&self) -> String {
        let rel = |p: &Path| {
            p.strip_prefix(&self.root)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&rel(&e.image));
            out.push(',');
            out.push_str(&e.label.to_string());
            if let Some(m) = &e.mask {
                out.push(',');
                out.push_str(&rel(m));
            }
            out.push('\n');
        }
        out
    }
}

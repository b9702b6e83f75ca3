//! Image descriptors and Lasso-based feature selection.

mod gabor;
mod hog;
mod lasso;
mod ngn;

pub use gabor::{extract_gabor, GaborBank, GaborConfig};
pub use hog::{extract_hog, HogConfig};
pub use lasso::{fit_lasso, lambda_max, select_features, soft_threshold, LassoModel};
pub use ngn::extract_ngn_features;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Ngn,
    Hog,
    Gabor,
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DescriptorKind::Ngn => "ngn",
            DescriptorKind::Hog => "hog",
            DescriptorKind::Gabor => "gabor",
        })
    }
}

impl std::str::FromStr for DescriptorKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "ngn" => Ok(DescriptorKind::Ngn),
            "hog" => Ok(DescriptorKind::Hog),
            "gabor" => Ok(DescriptorKind::Gabor),
            other => Err(crate::Error::Config(format!("unknown descriptor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: DescriptorKind,
    /// Image identifier.
    pub source: String,
}

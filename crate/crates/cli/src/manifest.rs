//! Per-image input description. Relative paths resolve against the
//! manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use panoptic3d::{Camera, LayoutCategories};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub camera: Option<CameraSpec>,
    pub depth: DepthSpec,
    pub panoptic: PanopticSpec,
    #[serde(default)]
    pub instances: Vec<InstanceSpec>,
    #[serde(default)]
    pub layout: Option<LayoutSpec>,
    #[serde(default)]
    pub options: ManifestOptions,
}

/// Either the six intrinsics or a horizontal field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CameraSpec {
    Intrinsics(Camera),
    Fov {
        fov_deg: f64,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSpec {
    pub path: PathBuf,
    /// PNG value per meter; ignored for PFM.
    #[serde(default)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanopticSpec {
    pub png: PathBuf,
    pub json: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub segment_id: u32,
    /// Normalized mesh, OBJ or PLY.
    pub mesh: PathBuf,
    #[serde(default)]
    pub amodal_mask: Option<PathBuf>,
    #[serde(default)]
    pub modal_mask: Option<PathBuf>,
    #[serde(default)]
    pub inv_zc: Option<f64>,
    #[serde(default)]
    pub dz_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub corners: [[f64; 3]; 8],
    pub categories: LayoutCategories,
    pub segment_ids: LayoutCategories,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestOptions {
    pub percentiles: Option<(f64, f64)>,
    pub depth_range: Option<(f64, f64)>,
    pub margin: Option<usize>,
    pub taus: Option<Vec<f64>>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.is_file() {
            return Err(CliError::missing(path));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::new("io_error", e.to_string()).at(path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::new("manifest_error", e.to_string()).at(path))
    }
}

/// Joins `rel` onto `base` and checks that the file exists.
pub fn resolve(base: &Path, rel: &Path) -> Result<PathBuf, CliError> {
    let p = base.join(rel);
    if p.is_file() {
        Ok(p)
    } else {
        Err(CliError::missing(&p))
    }
}

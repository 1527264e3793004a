//! Pose files: JSON with a row-major rotation and a translation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::IoError;
use crate::geometry::RigidTransform;
use crate::registration::RegistrationResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inlier_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated_by: Option<String>,
}

impl PoseFile {
    pub fn from_transform(t: &RigidTransform) -> Self {
        Self {
            r: t.rotation_row_major(),
            t: [t.translation.x, t.translation.y, t.translation.z],
            inlier_ratio: None,
            elapsed_s: None,
            terminated_by: None,
        }
    }

    pub fn from_result(res: &RegistrationResult) -> Self {
        Self {
            inlier_ratio: Some(res.inlier_ratio),
            elapsed_s: Some(res.elapsed),
            terminated_by: Some(res.terminated_by.as_str().to_string()),
            ..Self::from_transform(&res.transform)
        }
    }

    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from_row_major(&self.r, &self.t)
    }
}

fn write_json(path: &Path, pose: &PoseFile) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(pose).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| IoError::from_io(path, e))
}

pub fn save_transform(path: &Path, t: &RigidTransform) -> Result<(), IoError> {
    write_json(path, &PoseFile::from_transform(t))
}

pub fn save_result(path: &Path, res: &RegistrationResult) -> Result<(), IoError> {
    write_json(path, &PoseFile::from_result(res))
}

pub fn load_pose(path: &Path) -> Result<PoseFile, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::from_io(path, e))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_transform(path: &Path) -> Result<RigidTransform, IoError> {
    Ok(load_pose(path)?.transform())
}

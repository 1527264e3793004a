//! File formats: PLY and XYZ models, XYZ curves, pose JSON and pair-index
//! files.

pub mod index_file;
pub mod ply;
pub mod pose;
pub mod xyz;

use std::path::Path;

use crate::differential::{Curve, SurfaceSamples};
use crate::error::IoError;

pub use index_file::{load_index, save_index};
pub use ply::{read_ply, write_ply, Mesh};
pub use pose::{load_pose, load_transform, save_result, save_transform, PoseFile};
pub use xyz::{read_curve, read_points, write_curve};

fn is_ply(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

/// PLY (by extension) or whitespace-separated point text.
pub fn load_mesh(path: &Path) -> Result<Mesh, IoError> {
    if is_ply(path) {
        read_ply(path)
    } else {
        let s = read_points(path)?;
        Ok(Mesh {
            points: s.points,
            normals: s.normals,
            faces: Vec::new(),
        })
    }
}

pub fn load_model(path: &Path) -> Result<SurfaceSamples, IoError> {
    let m = load_mesh(path)?;
    Ok(SurfaceSamples {
        points: m.points,
        normals: m.normals,
    })
}

pub fn load_curve(path: &Path) -> Result<Curve, IoError> {
    read_curve(path)
}

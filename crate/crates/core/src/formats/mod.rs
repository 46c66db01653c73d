//! Readers and writers for the geometry file formats the toolkit accepts.

pub mod obj;
pub mod pcd;
pub mod ply;

use std::path::Path;

/// Lower-cased file extension, if any.
pub(crate) fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

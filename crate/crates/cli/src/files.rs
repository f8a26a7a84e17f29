use std::fs;
use std::path::{Path, PathBuf};

use dentmesh::mesh::{load_mesh, save_mesh, write_ply, MeshFormat, PlyEncoding, PlyWriteOptions};
use dentmesh::{TriangleMesh, MAX_LABEL};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::missing_input(path))
    }
}

pub fn require_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::missing_input(path))
    }
}

pub fn mesh_format(path: &Path) -> CliResult<MeshFormat> {
    MeshFormat::from_path(path).ok_or_else(|| {
        CliError::usage(
            "invalid_config",
            format!("cannot tell the mesh format of {}; use .ply or .obj", path.display()),
        )
    })
}

pub fn read_mesh(path: &Path) -> CliResult<TriangleMesh> {
    require_file(path)?;
    let loaded = load_mesh(path, mesh_format(path)?)?;
    if loaded.dropped_triangles > 0 {
        log::warn!("{}: dropped {} degenerate triangles", path.display(), loaded.dropped_triangles);
    }
    Ok(loaded.mesh)
}

pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> CliResult<()> {
    Ok(save_mesh(mesh, path, mesh_format(path)?)?)
}

/// PLY regardless of the file name, for `.partial` pipeline artifacts.
pub fn write_ply_mesh(mesh: &TriangleMesh, path: &Path) -> CliResult<()> {
    Ok(write_ply(mesh, path, &PlyWriteOptions::default())?)
}

pub fn write_ascii_or_binary(mesh: &TriangleMesh, path: &Path, ascii: bool) -> CliResult<()> {
    match mesh_format(path)? {
        MeshFormat::Ply if ascii => Ok(write_ply(
            mesh,
            path,
            &PlyWriteOptions {
                encoding: PlyEncoding::Ascii,
                colors: None,
            },
        )?),
        _ => write_mesh(mesh, path),
    }
}

/// Labels from a mesh file (its `label` property or sidecar), a bare JSON
/// array, or a `{"labels": [...]}` object.
pub fn read_labels(path: &Path) -> CliResult<Vec<u8>> {
    require_file(path)?;
    if MeshFormat::from_path(path).is_some() {
        return read_mesh(path)?
            .labels()
            .map(<[u8]>::to_vec)
            .ok_or_else(|| dentmesh::Error::MissingLabels.into());
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |m: String| CliError::usage("parse", format!("{}: {m}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
    let items = match &value {
        serde_json::Value::Array(items) => items,
        serde_json::Value::Object(map) => match map.get("labels") {
            Some(serde_json::Value::Array(items)) => items,
            _ => return Err(parse_err("expected a `labels` array".into())),
        },
        _ => return Err(parse_err("expected a JSON array of class ids".into())),
    };
    items
        .iter()
        .map(|v| {
            let id = v.as_u64().ok_or_else(|| parse_err(format!("class id `{v}` is not a non-negative integer")))?;
            if id > MAX_LABEL as u64 {
                return Err(dentmesh::Error::InvalidClass(id.min(u32::MAX as u64) as u32).into());
            }
            Ok(id as u8)
        })
        .collect()
}

pub fn labels_json(labels: &[u8]) -> String {
    serde_json::to_string(labels).expect("labels serialize") + "\n"
}

pub fn pretty_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes") + "\n"
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &pretty_json(value))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `dir/a.ply` -> `dir/a.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn view_file(dir: &Path, index: usize, ext: &str) -> PathBuf {
    dir.join(format!("view_{index:03}.{ext}"))
}

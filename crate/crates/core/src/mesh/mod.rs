//! Triangle mesh and point cloud data model.

mod io;
mod repair;
mod transform;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3, MAX_LABEL};

pub use io::{
    labels_sidecar_path, load_mesh, read_labels_json, save_mesh, write_labels_json, write_ply,
    LoadedMesh, MeshFormat, PlyEncoding, PlyWriteOptions,
};
pub use repair::{nonmanifold_edge_count, nonmanifold_vertex_count, split_nonmanifold_vertices};
pub(crate) use transform::area_weighted_normals;
pub use transform::{
    compute_vertex_normals, mesh_to_pointcloud, normalize_coordinates, NormalizeTransform,
};

/// Maximum deviation from unit length accepted for stored normals.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// Indexed triangle surface with optional per-vertex normals and labels.
///
/// Construction validates that every index is in range, no triangle repeats
/// a vertex, normals are unit length and labels are valid class ids. All
/// operations on a mesh return a new value.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Option<Vec<Vec3>>,
    labels: Option<Vec<u8>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        if n > u32::MAX as usize {
            return Err(Error::InvalidMesh("too many vertices".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex outside 0..{n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
            normals: None,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.vertices.len() {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                vertices: self.vertices.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > MAX_LABEL) {
            return Err(Error::InvalidClass(bad as u32));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.vertices.len() {
            return Err(Error::LengthMismatch {
                expected: self.vertices.len(),
                actual: normals.len(),
            });
        }
        if let Some(i) = normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > NORMAL_TOLERANCE)
        {
            return Err(Error::InvalidMesh(format!("normal {i} is not unit length")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Positions of the three corners of triangle `t`.
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Replaces vertex positions, keeping connectivity and attributes.
    /// Normals are dropped since they no longer match the geometry.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::LengthMismatch {
                expected: self.vertices.len(),
                actual: vertices.len(),
            });
        }
        let mut out = TriangleMesh::new(vertices, self.triangles.clone())?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    /// Same mesh with every triangle's winding reversed.
    pub fn with_flipped_winding(&self) -> Self {
        let mut out = self.clone();
        for t in &mut out.triangles {
            t.swap(1, 2);
        }
        if let Some(normals) = &mut out.normals {
            for n in normals {
                *n = -*n;
            }
        }
        out
    }

    /// Axis-aligned bounding box, `None` for an empty mesh.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        bounding_box(&self.vertices)
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.vertices)
    }

    pub fn stats(&self) -> MeshStats {
        let (lo, hi) = self
            .bounding_box()
            .unwrap_or((Vec3::zeros(), Vec3::zeros()));
        MeshStats {
            vertex_count: self.vertex_count(),
            triangle_count: self.triangle_count(),
            bbox_min: lo.into(),
            bbox_max: hi.into(),
            nonmanifold_edge_count: nonmanifold_edge_count(self),
            dropped_triangle_count: 0,
        }
    }

    /// Number of triangles incident to each undirected edge.
    pub fn edge_triangle_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 2);
        for tri in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Sorted list of unique undirected edges.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| edge_key(t[k], t[(k + 1) % 3])))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Triangle indices incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<u32>> {
        let mut fans = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                fans[v as usize].push(t as u32);
            }
        }
        fans
    }

    pub(crate) fn from_parts_unchecked(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        normals: Option<Vec<Vec3>>,
        labels: Option<Vec<u8>>,
    ) -> Self {
        TriangleMesh {
            vertices,
            triangles,
            normals,
            labels,
        }
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Vec<[u32; 3]>, Option<Vec<Vec3>>, Option<Vec<u8>>) {
        (self.vertices, self.triangles, self.normals, self.labels)
    }
}

pub(crate) fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = points.first()?;
    Some(points.iter().fold((*first, *first), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    }))
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    if points.is_empty() {
        return Vec3::zeros();
    }
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Twice-area-weighted face normal (cross product of two edges).
pub(crate) fn face_cross(corners: &[Vec3; 3]) -> Vec3 {
    (corners[1] - corners[0]).cross(&(corners[2] - corners[0]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub nonmanifold_edge_count: usize,
    /// Zero-area or index-repeating triangles discarded while loading.
    pub dropped_triangle_count: usize,
}

/// Per-vertex points with unit normals and optional labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPointCloud {
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
    labels: Option<Vec<u8>>,
}

impl LabeledPointCloud {
    pub fn new(positions: Vec<Vec3>, normals: Vec<Vec3>, labels: Option<Vec<u8>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidMesh("point cloud is empty".into()));
        }
        if normals.len() != positions.len() {
            return Err(Error::LengthMismatch {
                expected: positions.len(),
                actual: normals.len(),
            });
        }
        if let Some(i) = normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > NORMAL_TOLERANCE)
        {
            return Err(Error::InvalidMesh(format!("normal {i} is not unit length")));
        }
        if let Some(labels) = &labels {
            if labels.len() != positions.len() {
                return Err(Error::LabelMismatch {
                    labels: labels.len(),
                    vertices: positions.len(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l > MAX_LABEL) {
                return Err(Error::InvalidClass(bad as u32));
            }
        }
        Ok(LabeledPointCloud {
            positions,
            normals,
            labels,
        })
    }

    /// Cloud carrying only positions, with a placeholder +Z normal per point.
    /// Useful for metrics that ignore normals.
    pub fn from_positions(positions: Vec<Vec3>, labels: Option<Vec<u8>>) -> Result<Self> {
        let normals = vec![Vec3::z(); positions.len()];
        Self::new(positions, normals, labels)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.positions.clone(), self.normals.clone(), Some(labels))
    }

    /// Geometric features: position followed by normal, six values per point.
    pub fn geometric_features(&self) -> Vec<[f64; 6]> {
        self.positions
            .iter()
            .zip(&self.normals)
            .map(|(p, n)| [p.x, p.y, p.z, n.x, n.y, n.z])
            .collect()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        bounding_box(&self.positions).expect("cloud is nonempty")
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.positions)
    }

    pub(crate) fn from_parts_unchecked(
        positions: Vec<Vec3>,
        normals: Vec<Vec3>,
        labels: Option<Vec<u8>>,
    ) -> Self {
        LabeledPointCloud {
            positions,
            normals,
            labels,
        }
    }
}

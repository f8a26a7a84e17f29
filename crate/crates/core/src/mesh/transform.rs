use serde::{Deserialize, Serialize};

use super::{face_cross, LabeledPointCloud, TriangleMesh};
use crate::{Error, Result, Vec3};

/// Affine map `p' = (p - center) * scale` recorded by [`normalize_coordinates`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - Vec3::from(self.center)) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale + Vec3::from(self.center)
    }

    pub fn invert_mesh(&self, mesh: &TriangleMesh) -> Result<TriangleMesh> {
        let restored = mesh.vertices().iter().map(|p| self.invert(p)).collect();
        let out = mesh.with_positions(restored)?;
        Ok(match mesh.normals() {
            Some(n) => out.with_normals(n.to_vec())?,
            None => out,
        })
    }
}

/// Centers the mesh on its bounding-box center and scales the largest
/// bounding-box side to 1. Normals and labels are kept.
pub fn normalize_coordinates(mesh: &TriangleMesh) -> Result<(TriangleMesh, NormalizeTransform)> {
    let (lo, hi) = mesh
        .bounding_box()
        .ok_or(Error::DegenerateMesh("mesh has no vertices"))?;
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(Error::DegenerateMesh("bounding box has zero extent"));
    }
    let transform = NormalizeTransform {
        center: ((lo + hi) * 0.5).into(),
        scale: 1.0 / extent,
    };
    let positions = mesh.vertices().iter().map(|p| transform.apply(p)).collect();
    let mut out = mesh.with_positions(positions)?;
    if let Some(n) = mesh.normals() {
        out = out.with_normals(n.to_vec())?;
    }
    Ok((out, transform))
}

/// Area-weighted vertex normals oriented by triangle winding.
///
/// Vertices whose incident triangles have zero total area (or that have no
/// triangles) get +Z; their indices are returned alongside the mesh.
pub fn compute_vertex_normals(mesh: &TriangleMesh) -> (TriangleMesh, Vec<usize>) {
    let normals = area_weighted_normals(mesh.vertices(), mesh.triangles());
    let mut flagged = Vec::new();
    let normals = normals
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len > 0.0 && len.is_finite() {
                n / len
            } else {
                flagged.push(i);
                Vec3::z()
            }
        })
        .collect();
    let mut out = mesh.clone();
    out.normals = Some(normals);
    (out, flagged)
}

/// Unnormalized sum of incident face cross products per vertex.
pub(crate) fn area_weighted_normals(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for tri in triangles {
        let corners = tri.map(|i| vertices[i as usize]);
        let n = face_cross(&corners);
        for &i in tri {
            acc[i as usize] += n;
        }
    }
    acc
}

/// One point per vertex, carrying position, normal and label.
pub fn mesh_to_pointcloud(mesh: &TriangleMesh) -> Result<LabeledPointCloud> {
    let normals = match mesh.normals() {
        Some(n) => n.to_vec(),
        None => compute_vertex_normals(mesh).0.normals.expect("normals computed"),
    };
    LabeledPointCloud::new(
        mesh.vertices().to_vec(),
        normals,
        mesh.labels().map(<[_]>::to_vec),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use approx::assert_abs_diff_eq;

    fn cube_at(c: f64) -> TriangleMesh {
        let verts = (0..8)
            .map(|i| {
                Vec3::new(
                    c - 0.5 + (i & 1) as f64,
                    c - 0.5 + ((i >> 1) & 1) as f64,
                    c - 0.5 + ((i >> 2) & 1) as f64,
                )
            })
            .collect();
        let tris = vec![
            [0, 2, 1], [1, 2, 3], [4, 5, 6], [5, 7, 6],
            [0, 1, 4], [1, 5, 4], [2, 6, 3], [3, 6, 7],
            [0, 4, 2], [2, 4, 6], [1, 3, 5], [3, 7, 5],
        ];
        TriangleMesh::new(verts, tris).unwrap()
    }

    #[test]
    fn normalize_unit_cube() {
        let (m, t) = normalize_coordinates(&cube_at(5.0)).unwrap();
        let (lo, hi) = m.bounding_box().unwrap();
        assert_abs_diff_eq!(lo, Vec3::repeat(-0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(hi, Vec3::repeat(0.5), epsilon = 1e-12);
        assert_eq!(t.center, [5.0, 5.0, 5.0]);
    }

    #[test]
    fn normalize_round_trip() {
        let mesh = synth::icosphere(2, 3.7).with_positions(
            synth::icosphere(2, 3.7)
                .vertices()
                .iter()
                .map(|p| p + Vec3::new(10.0, -4.0, 2.5))
                .collect(),
        )
        .unwrap();
        let (m, t) = normalize_coordinates(&mesh).unwrap();
        let back = t.invert_mesh(&m).unwrap();
        for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn coincident_vertices_are_degenerate() {
        let m = TriangleMesh::new(vec![Vec3::repeat(1.0); 3], vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            normalize_coordinates(&m),
            Err(Error::DegenerateMesh(_))
        ));
    }

    #[test]
    fn square_normals_point_up() {
        let m = synth::grid(3, 3, 1.0);
        let (m, flagged) = compute_vertex_normals(&m);
        assert!(flagged.is_empty());
        for n in m.normals().unwrap() {
            assert_abs_diff_eq!(*n, Vec3::z(), epsilon = 1e-12);
        }
        let (flipped, _) = compute_vertex_normals(&m.with_flipped_winding().without_normals());
        for n in flipped.normals().unwrap() {
            assert_abs_diff_eq!(*n, -Vec3::z(), epsilon = 1e-12);
        }
    }

    #[test]
    fn icosphere_normals_radial() {
        let (m, _) = compute_vertex_normals(&synth::icosphere(3, 1.0));
        let worst = m
            .vertices()
            .iter()
            .zip(m.normals().unwrap())
            .map(|(p, n)| (p.normalize() - n).norm())
            .fold(0.0, f64::max);
        assert!(worst < 2e-2, "{worst}");
    }

    #[test]
    fn isolated_vertex_flagged() {
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::repeat(4.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let (m, flagged) = compute_vertex_normals(&m);
        assert_eq!(flagged, vec![3]);
        assert_eq!(m.normals().unwrap()[3], Vec3::z());
    }

    #[test]
    fn cloud_from_normalized_mesh_in_unit_box() {
        let (m, _) = normalize_coordinates(&synth::crown_on_slab(&synth::CrownSlabParams::small())).unwrap();
        let cloud = mesh_to_pointcloud(&m).unwrap();
        assert_eq!(cloud.len(), m.vertex_count());
        assert_eq!(cloud.labels(), m.labels());
        for p in cloud.positions() {
            assert!(p.iter().all(|c| (-0.5 - 1e-12..=0.5 + 1e-12).contains(c)));
        }
    }
}

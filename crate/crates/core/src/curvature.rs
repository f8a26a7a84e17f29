//! Discrete mean curvature from the cotangent Laplace-Beltrami operator.
//!
//! For an interior vertex `i` with one-ring `j`, the mean curvature normal is
//!
//! ```text
//! K(i) = 1/(2 A_mixed) * Σ_j (cot α_ij + cot β_ij) (p_i - p_j)  =  2 H n
//! ```
//!
//! with the mixed Voronoi area of Meyer et al. The magnitude gives `|H|`, the
//! sign comes from `K · n`: convex regions (outward normal) are positive,
//! concave valleys negative. Open-boundary and non-manifold vertices get
//! `H = 0`.

use std::path::Path;

use crate::mesh::{edge_key, face_cross, write_ply, PlyEncoding, PlyWriteOptions};
use crate::{Error, Result, TriangleMesh, Vec3};

/// One mean curvature value per vertex, in inverse length units.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureField {
    values: Vec<f64>,
    fallback: Vec<usize>,
}

impl CurvatureField {
    pub fn from_values(values: Vec<f64>) -> Self {
        CurvatureField {
            values,
            fallback: Vec::new(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Vertices computed with uniform (umbrella) weights because their
    /// one-ring was degenerate for cotangent weights.
    pub fn fallback_vertices(&self) -> &[usize] {
        &self.fallback
    }
}

pub fn mean_curvature(mesh: &TriangleMesh) -> CurvatureField {
    mean_curvature_of(mesh.vertices(), mesh.triangles(), mesh.normals())
}

/// Curvature of an arbitrary triangle soup over `vertices`. Vertices not
/// referenced by any triangle get `H = 0`. Without `normals`, area-weighted
/// face normals decide the sign.
pub(crate) fn mean_curvature_of(
    vertices: &[Vec3],
    triangles: &[[u32; 3]],
    normals: Option<&[Vec3]>,
) -> CurvatureField {
    let n = vertices.len();
    let mut laplace = vec![Vec3::zeros(); n];
    let mut area = vec![0.0f64; n];
    let mut degenerate = vec![false; n];
    let mut open = vec![false; n];
    let mut face_normals = vec![Vec3::zeros(); n];

    let mut edge_use: std::collections::HashMap<(u32, u32), u32> =
        std::collections::HashMap::with_capacity(triangles.len() * 2);
    for tri in triangles {
        for k in 0..3 {
            *edge_use.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    for (&(a, b), &c) in &edge_use {
        if c != 2 {
            open[a as usize] = true;
            open[b as usize] = true;
        }
    }

    for tri in triangles {
        let p = tri.map(|i| vertices[i as usize]);
        let cross = face_cross(&p);
        let double_area = cross.norm();
        for &i in tri {
            face_normals[i as usize] += cross;
        }
        let longest2 = (0..3)
            .map(|k| (p[(k + 1) % 3] - p[k]).norm_squared())
            .fold(0.0, f64::max);
        if !(double_area > 1e-14 * longest2) {
            for &i in tri {
                degenerate[i as usize] = true;
            }
            continue;
        }
        // cot of the angle at corner k
        let cot: [f64; 3] = std::array::from_fn(|k| {
            let u = p[(k + 1) % 3] - p[k];
            let w = p[(k + 2) % 3] - p[k];
            u.dot(&w) / double_area
        });
        for k in 0..3 {
            let (i, j, l) = (k, (k + 1) % 3, (k + 2) % 3);
            // edge (i, j) is opposite corner l, edge (i, l) opposite corner j
            laplace[tri[i] as usize] += (p[i] - p[j]) * cot[l] + (p[i] - p[l]) * cot[j];
        }
        let tri_area = double_area / 2.0;
        let obtuse = (0..3).find(|&k| cot[k] < 0.0);
        for k in 0..3 {
            let a = match obtuse {
                None => {
                    let (j, l) = ((k + 1) % 3, (k + 2) % 3);
                    ((p[k] - p[j]).norm_squared() * cot[l] + (p[k] - p[l]).norm_squared() * cot[j])
                        / 8.0
                }
                Some(o) if o == k => tri_area / 2.0,
                Some(_) => tri_area / 4.0,
            };
            area[tri[k] as usize] += a;
        }
    }

    let mut values = vec![0.0; n];
    let mut fallback = Vec::new();
    let mut umbrella_needed = Vec::new();
    for v in 0..n {
        if open[v] || area[v] == 0.0 && !degenerate[v] {
            continue;
        }
        let normal = normals.map(|ns| ns[v]).unwrap_or(face_normals[v]);
        let k = laplace[v] / (2.0 * area[v]);
        if degenerate[v] || !k.iter().all(|c| c.is_finite()) {
            umbrella_needed.push(v);
            continue;
        }
        values[v] = signed_half_norm(&k, &normal);
    }

    if !umbrella_needed.is_empty() {
        let mut ring: Vec<Vec<u32>> = vec![Vec::new(); n];
        for tri in triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                ring[a as usize].push(b);
                ring[b as usize].push(a);
            }
        }
        for v in umbrella_needed {
            let nbrs = &mut ring[v];
            nbrs.sort_unstable();
            nbrs.dedup();
            if nbrs.is_empty() {
                continue;
            }
            let p = vertices[v];
            let sum: Vec3 = nbrs.iter().map(|&j| p - vertices[j as usize]).sum();
            let mean_len2 = nbrs
                .iter()
                .map(|&j| (p - vertices[j as usize]).norm_squared())
                .sum::<f64>()
                / nbrs.len() as f64;
            if mean_len2 > 0.0 {
                // sphere calibration: Σ(p - p_j) ≈ valence·e²/(2r)·n
                let k = sum * (4.0 / (nbrs.len() as f64 * mean_len2));
                let normal = normals.map(|ns| ns[v]).unwrap_or(face_normals[v]);
                values[v] = signed_half_norm(&k, &normal);
            }
            fallback.push(v);
        }
    }
    CurvatureField { values, fallback }
}

fn signed_half_norm(k: &Vec3, normal: &Vec3) -> f64 {
    let h = k.norm() / 2.0;
    if k.dot(normal) < 0.0 {
        -h
    } else {
        h
    }
}

/// Linear red (lowest) to blue (highest) colors, clamped at the 2nd and 98th
/// percentiles. A constant field maps to the midpoint color.
pub fn curvature_colors(field: &CurvatureField) -> Vec<[u8; 3]> {
    let values = field.values();
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let lo = percentile(&sorted, 0.02);
    let hi = percentile(&sorted, 0.98);
    values
        .iter()
        .map(|&h| {
            let t = if hi > lo {
                ((h - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            };
            colormap(t)
        })
        .collect()
}

/// Red at `t = 0` to blue at `t = 1`.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    [((1.0 - t) * 255.0).round() as u8, 0, (t * 255.0).round() as u8]
}

/// Linear interpolation between closest ranks.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let below = pos.floor() as usize;
    let above = pos.ceil() as usize;
    let frac = pos - below as f64;
    sorted[below] + (sorted[above] - sorted[below]) * frac
}

/// Writes the mesh as binary PLY with per-vertex curvature colors.
pub fn export_curvature_colormap(mesh: &TriangleMesh, field: &CurvatureField, path: &Path) -> Result<()> {
    if field.len() != mesh.vertex_count() {
        return Err(Error::LengthMismatch {
            expected: mesh.vertex_count(),
            actual: field.len(),
        });
    }
    let colors = curvature_colors(field);
    write_ply(
        mesh,
        path,
        &PlyWriteOptions {
            encoding: PlyEncoding::BinaryLittleEndian,
            colors: Some(&colors),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::compute_vertex_normals;
    use crate::synth;

    #[test]
    fn plane_interior_is_zero() {
        let (m, _) = compute_vertex_normals(&synth::grid(12, 12, 0.25));
        let h = mean_curvature(&m);
        assert!(h.values().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn boundary_vertices_are_zero() {
        let (m, _) = compute_vertex_normals(&synth::crown_on_slab(&synth::CrownSlabParams::small()));
        let h = mean_curvature(&m);
        // first row of the heightfield is on the open boundary
        assert!(h.values()[..80].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_sphere_positive_and_flipped_negative() {
        let (m, _) = compute_vertex_normals(&synth::icosphere(3, 1.0));
        let h = mean_curvature(&m);
        for &v in h.values() {
            assert!((v - 1.0).abs() < 0.05, "{v}");
        }
        let flipped = m.with_flipped_winding();
        let h = mean_curvature(&flipped);
        for &v in h.values() {
            assert!((v + 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn degenerate_fan_uses_umbrella() {
        // a sliver triangle with three collinear corners poisons vertex 0's fan
        let (mut v, t, _, _) = synth::icosphere(2, 1.0).into_parts();
        let a = v[t[0][0] as usize];
        let b = v[t[0][1] as usize];
        v[t[0][2] as usize] = (a + b) * 0.5;
        let m = TriangleMesh::new(v, t).unwrap();
        let h = mean_curvature(&m);
        assert!(!h.fallback_vertices().is_empty());
        assert!(h.values().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn colormap_endpoints_and_constant() {
        let field = CurvatureField::from_values(vec![-1.0, 0.0, 1.0, 2.0]);
        let colors = curvature_colors(&field);
        assert_eq!(colors[0], [255, 0, 0]);
        assert_eq!(colors[3], [0, 0, 255]);

        let constant = curvature_colors(&CurvatureField::from_values(vec![0.3; 10]));
        assert!(constant.iter().all(|&c| c == constant[0]));
        assert_eq!(constant[0], colormap(0.5));
    }

    #[test]
    fn outlier_barely_moves_colors() {
        let base: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut with_outlier = base.clone();
        with_outlier.push(1e6);
        let a = curvature_colors(&CurvatureField::from_values(base));
        let b = curvature_colors(&CurvatureField::from_values(with_outlier));
        for (x, y) in a.iter().zip(&b) {
            for c in 0..3 {
                assert!((x[c] as i32 - y[c] as i32).abs() <= 1);
            }
        }
    }
}

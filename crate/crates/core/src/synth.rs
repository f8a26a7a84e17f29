//! Synthetic meshes used as fixtures by the tests, the CLI `demo` command
//! and the browser demo.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::{TriangleMesh, Vec3};

/// Icosahedron refined `subdivisions` times by edge midpoints, projected
/// onto a sphere of `radius` centered at the origin. Outward CCW winding.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let (mut vertices, mut triangles) = icosahedron();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoint.entry(key).or_insert_with(|| {
                let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        for [a, b, c] in triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(vertices, triangles).expect("icosphere is valid")
}

/// Class-I geodesic sphere: every icosahedron face is split into
/// `frequency²` triangles. Has `10·f² + 2` vertices, so `f = 100` gives a
/// 100,002-vertex sphere.
pub fn geodesic_sphere(frequency: u32, radius: f64) -> TriangleMesh {
    let f = frequency.max(1);
    let (ico_v, ico_t) = icosahedron();
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut lookup: HashMap<[i64; 3], u32> = HashMap::new();
    let mut index_of = |p: Vec3, vertices: &mut Vec<Vec3>| -> u32 {
        let p = p.normalize();
        let key = [p.x, p.y, p.z].map(|c| (c * 1e9).round() as i64);
        *lookup.entry(key).or_insert_with(|| {
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };
    let mut triangles = Vec::with_capacity(ico_t.len() * (f * f) as usize);
    for [a, b, c] in ico_t {
        let (pa, pb, pc) = (ico_v[a as usize], ico_v[b as usize], ico_v[c as usize]);
        let point = |i: u32, j: u32| pa + (pb - pa) * (i as f64 / f as f64) + (pc - pa) * (j as f64 / f as f64);
        // row-major indices of the lattice points i + j <= f
        let mut ids = vec![vec![0u32; (f + 1) as usize]; (f + 1) as usize];
        for i in 0..=f {
            for j in 0..=(f - i) {
                ids[i as usize][j as usize] = index_of(point(i, j), &mut vertices);
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                let (i, j) = (i as usize, j as usize);
                triangles.push([ids[i][j], ids[i + 1][j], ids[i][j + 1]]);
                if i + j + 1 < f as usize {
                    triangles.push([ids[i + 1][j], ids[i + 1][j + 1], ids[i][j + 1]]);
                }
            }
        }
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(vertices, triangles).expect("geodesic sphere is valid")
}

fn icosahedron() -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let vertices = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::from(*v).normalize())
    .collect();
    let triangles = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    (vertices, triangles)
}

/// Planar `nx × ny` vertex grid in the XY plane with CCW (+Z facing) winding.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    heightfield(nx, ny, spacing, spacing, |_, _| 0.0)
}

fn heightfield(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    height: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    jittered_heightfield(nx, ny, dx, dy, 0.0, 0, height)
}

/// Heightfield whose interior grid nodes are displaced in XY by up to
/// `jitter` grid steps, from a seeded generator. Border nodes stay put so
/// the outline remains a rectangle.
fn jittered_heightfield(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    jitter: f64,
    seed: u64,
    height: impl Fn(f64, f64) -> f64,
) -> TriangleMesh {
    assert!(nx >= 2 && ny >= 2, "heightfield needs at least 2x2 vertices");
    let x0 = -((nx - 1) as f64) * dx / 2.0;
    let y0 = -((ny - 1) as f64) * dy / 2.0;
    let mut vertices = Vec::with_capacity(nx * ny);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for j in 0..ny {
        for i in 0..nx {
            let (mut x, mut y) = (x0 + i as f64 * dx, y0 + j as f64 * dy);
            if jitter > 0.0 && i > 0 && j > 0 && i + 1 < nx && j + 1 < ny {
                x += rng.random_range(-jitter..=jitter) * dx;
                y += rng.random_range(-jitter..=jitter) * dy;
            }
            vertices.push(Vec3::new(x, y, height(x, y)));
        }
    }
    let id = |i: usize, j: usize| (j * nx + i) as u32;
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            // alternate the diagonal so the grid has no preferred direction
            if (i + j) % 2 == 0 {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles).expect("heightfield is valid")
}

/// Shape of the synthetic crown-on-slab model.
///
/// Rounded crowns stand in a row along a shallow arch on a gingiva ridge
/// that follows the same arch. Each crown foot runs into a circular groove
/// whose bottom is the tooth/gingiva label boundary, so boundary vertices
/// sit in a concave (negative mean curvature) valley ring. The grid nodes
/// are displaced in XY and the label threshold is perturbed per vertex, as
/// in a scanned and hand-annotated arch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrownSlabParams {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub depth: f64,
    pub crowns: usize,
    pub crown_radius: f64,
    pub crown_height: f64,
    pub groove_depth: f64,
    pub groove_width: f64,
    /// Sagitta of the arch the crown centers follow.
    pub arch_bow: f64,
    /// Height of the gingiva ridge under the crown row.
    pub ridge_height: f64,
    /// XY displacement of grid nodes, in grid steps.
    pub jitter: f64,
    /// Per-vertex perturbation of the label boundary radius, in grid steps.
    pub label_jitter: f64,
    pub seed: u64,
}

impl Default for CrownSlabParams {
    /// About 50k vertices with eight crowns.
    fn default() -> Self {
        CrownSlabParams {
            nx: 432,
            ny: 116,
            width: 60.0,
            depth: 16.0,
            crowns: 8,
            crown_radius: 3.4,
            crown_height: 5.0,
            groove_depth: 0.8,
            groove_width: 0.7,
            arch_bow: 2.0,
            ridge_height: 3.0,
            jitter: 0.2,
            label_jitter: 1.0,
            seed: 7,
        }
    }
}

impl CrownSlabParams {
    /// About 3k vertices, for fast unit tests.
    pub fn small() -> Self {
        CrownSlabParams {
            nx: 108,
            ny: 30,
            ..Self::default()
        }
    }

    pub fn crown_centers(&self) -> Vec<(f64, f64)> {
        let n = self.crowns.max(1);
        let span = self.width * 0.8;
        (0..n)
            .map(|k| {
                let u = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 * 2.0 - 1.0 };
                (u * span / 2.0, self.arch_curve(u))
            })
            .collect()
    }

    fn arch_curve(&self, u: f64) -> f64 {
        self.arch_bow * (0.5 - (u * u).min(1.5))
    }

    /// Nominal radius of the label boundary around each crown center.
    pub fn boundary_radius(&self) -> f64 {
        self.crown_radius * 1.12
    }

    /// Grid step along X.
    pub fn step(&self) -> f64 {
        self.width / (self.nx - 1) as f64
    }
}

/// Labeled crown-on-slab heightfield. Crown `k` carries label `k + 1`,
/// the gingiva label 0.
pub fn crown_on_slab(params: &CrownSlabParams) -> TriangleMesh {
    let centers = params.crown_centers();
    let rb = params.boundary_radius();
    let span = params.width * 0.8;
    let p = params.clone();
    let c = centers.clone();
    let height = move |x: f64, y: f64| -> f64 {
        let ridge_y = p.arch_curve(2.0 * x / span);
        let ridge = p.ridge_height * (1.0 - ((y - ridge_y) / (p.depth / 2.0)).powi(2));
        ridge
            + c.iter()
                .map(|&(cx, cy)| {
                    let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    let dome = p.crown_height * (-(r / p.crown_radius).powi(4)).exp();
                    let groove = -p.groove_depth * (-((r - rb) / p.groove_width).powi(2)).exp();
                    dome + groove
                })
                .sum::<f64>()
    };
    let dx = params.step();
    let dy = params.depth / (params.ny - 1) as f64;
    let mesh = jittered_heightfield(params.nx, params.ny, dx, dy, params.jitter, params.seed, height);
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed.wrapping_add(1));
    let labels = mesh
        .vertices()
        .iter()
        .map(|v| {
            let threshold = rb + params.label_jitter * dx * rng.random_range(-1.0..=1.0);
            centers
                .iter()
                .enumerate()
                .map(|(k, &(cx, cy))| (k, ((v.x - cx).powi(2) + (v.y - cy).powi(2)).sqrt()))
                .filter(|&(_, r)| r < threshold)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| (k as u8 % 16) + 1)
                .unwrap_or(0)
        })
        .collect();
    mesh.with_labels(labels).expect("labels in range")
}

/// Crown-on-slab model with two non-manifold defects grafted on: a fin
/// triangle making a slab edge three-way, and a triangle hanging off a
/// single slab vertex (a bowtie vertex).
pub fn bowtie_fixture(params: &CrownSlabParams) -> TriangleMesh {
    let base = crown_on_slab(params);
    let (mut vertices, mut triangles, _, labels) = base.into_parts();
    let mut labels = labels.expect("crown model is labeled");

    // fin on the diagonal of the first grid cell, an interior edge
    let [a, _, b] = triangles[0];
    let (pa, pb) = (vertices[a as usize], vertices[b as usize]);
    let apex = (pa + pb) * 0.5 + Vec3::new(0.0, 0.0, (pb - pa).norm());
    vertices.push(apex);
    labels.push(0);
    triangles.push([b, a, (vertices.len() - 1) as u32]);

    // triangle touching the mesh only at one vertex near the opposite corner
    let corner = (params.nx * params.ny - 1) as u32 - 1;
    let pc = vertices[corner as usize];
    let step = params.step();
    vertices.push(pc + Vec3::new(step, step, step));
    vertices.push(pc + Vec3::new(-step, step, 2.0 * step));
    labels.extend([0, 0]);
    let n = vertices.len() as u32;
    triangles.push([corner, n - 2, n - 1]);

    TriangleMesh::new(vertices, triangles)
        .and_then(|m| m.with_labels(labels))
        .expect("fixture is valid")
}

/// Two parallel horizontal squares, the upper one smaller, both facing +Z.
/// Each square is an `n × n` vertex grid. Used for visibility tests.
pub fn stacked_squares(n: usize) -> TriangleMesh {
    let lower = heightfield(n, n, 1.0 / (n - 1) as f64, 1.0 / (n - 1) as f64, |_, _| 0.0);
    let upper = heightfield(n, n, 0.5 / (n - 1) as f64, 0.5 / (n - 1) as f64, |_, _| 0.3);
    let offset = lower.vertex_count() as u32;
    let (mut vertices, mut triangles, _, _) = lower.into_parts();
    let (uv, ut, _, _) = upper.into_parts();
    vertices.extend(uv);
    triangles.extend(ut.into_iter().map(|t| t.map(|i| i + offset)));
    let labels = (0..vertices.len())
        .map(|i| if (i as u32) < offset { 0 } else { 1 })
        .collect();
    TriangleMesh::new(vertices, triangles)
        .and_then(|m| m.with_labels(labels))
        .expect("scene is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{nonmanifold_edge_count, nonmanifold_vertex_count};

    #[test]
    fn icosphere_counts() {
        for s in 0..4 {
            let m = icosphere(s, 1.0);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.triangle_count(), 20 * 4usize.pow(s));
        }
    }

    #[test]
    fn geodesic_counts_and_closed() {
        let m = geodesic_sphere(7, 2.0);
        assert_eq!(m.vertex_count(), 10 * 49 + 2);
        assert_eq!(m.triangle_count(), 20 * 49);
        assert!(m.edge_triangle_counts().values().all(|&c| c == 2));
        for v in m.vertices() {
            assert!((v.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_outward_winding() {
        let m = geodesic_sphere(3, 1.0);
        for t in 0..m.triangle_count() {
            let c = m.corners(t);
            let n = (c[1] - c[0]).cross(&(c[2] - c[0]));
            assert!(n.dot(&(c[0] + c[1] + c[2])) > 0.0);
        }
    }

    #[test]
    fn crown_slab_is_labeled_manifold() {
        let p = CrownSlabParams::default();
        let m = crown_on_slab(&p);
        assert_eq!(m.vertex_count(), p.nx * p.ny);
        assert!(m.vertex_count() >= 45_000);
        let labels = m.labels().unwrap();
        for k in 1..=p.crowns as u8 {
            assert!(labels.contains(&k));
        }
        assert_eq!(nonmanifold_edge_count(&m), 0);
    }

    #[test]
    fn bowtie_fixture_is_nonmanifold() {
        let m = bowtie_fixture(&CrownSlabParams::small());
        assert_eq!(nonmanifold_edge_count(&m), 1);
        assert!(nonmanifold_vertex_count(&m) >= 1);
    }
}

//! Non-manifold repair by vertex cutting.

use std::collections::HashMap;

use super::{edge_key, TriangleMesh};

/// Edges shared by more than two triangles.
pub fn nonmanifold_edge_count(mesh: &TriangleMesh) -> usize {
    mesh.edge_triangle_counts()
        .values()
        .filter(|&&c| c > 2)
        .count()
}

/// Vertices whose incident triangles split into more than one fan when
/// walking only across manifold edges.
pub fn nonmanifold_vertex_count(mesh: &TriangleMesh) -> usize {
    let edge_counts = mesh.edge_triangle_counts();
    let fans = mesh.vertex_triangles();
    (0..mesh.vertex_count())
        .filter(|&v| fan_components(mesh, v as u32, &fans[v], &edge_counts).len() > 1)
        .count()
}

/// Splits vertices so that every edge has at most two triangles and every
/// vertex has a single connected triangle fan.
///
/// Triangles around a vertex are grouped into fans connected through edges
/// that have exactly two incident triangles. The fan containing the
/// lowest-indexed triangle keeps the original vertex; each further fan gets
/// a fresh copy appended to the vertex list, inheriting position, normal and
/// label. The triangle count never changes.
pub fn split_nonmanifold_vertices(mesh: &TriangleMesh) -> TriangleMesh {
    let edge_counts = mesh.edge_triangle_counts();
    let fans = mesh.vertex_triangles();

    let mut vertices = mesh.vertices().to_vec();
    let mut normals = mesh.normals().map(<[_]>::to_vec);
    let mut labels = mesh.labels().map(<[_]>::to_vec);
    let mut triangles = mesh.triangles().to_vec();

    for v in 0..mesh.vertex_count() as u32 {
        let components = fan_components(mesh, v, &fans[v as usize], &edge_counts);
        for component in components.iter().skip(1) {
            let copy = vertices.len() as u32;
            vertices.push(vertices[v as usize]);
            if let Some(n) = &mut normals {
                n.push(n[v as usize]);
            }
            if let Some(l) = &mut labels {
                l.push(l[v as usize]);
            }
            for &t in component {
                for corner in &mut triangles[t as usize] {
                    if *corner == v {
                        *corner = copy;
                    }
                }
            }
        }
    }
    if vertices.len() > mesh.vertex_count() {
        log::info!(
            "split {} non-manifold vertex copies",
            vertices.len() - mesh.vertex_count()
        );
    }
    TriangleMesh::from_parts_unchecked(vertices, triangles, normals, labels)
}

/// Connected fans of `v`, each sorted, ordered by their smallest triangle.
fn fan_components(
    mesh: &TriangleMesh,
    v: u32,
    fan: &[u32],
    edge_counts: &HashMap<(u32, u32), u32>,
) -> Vec<Vec<u32>> {
    if fan.len() <= 1 {
        return vec![fan.to_vec()];
    }
    // local union-find over the fan
    let mut parent: Vec<usize> = (0..fan.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut by_edge: HashMap<u32, usize> = HashMap::new();
    for (slot, &t) in fan.iter().enumerate() {
        for &w in &mesh.triangles()[t as usize] {
            if w == v || edge_counts[&edge_key(v, w)] != 2 {
                continue;
            }
            match by_edge.get(&w) {
                Some(&other) => {
                    let (a, b) = (find(&mut parent, slot), find(&mut parent, other));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => {
                    by_edge.insert(w, slot);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<u32>> = HashMap::new();
    for slot in 0..fan.len() {
        let root = find(&mut parent, slot);
        groups.entry(root).or_default().push(fan[slot]);
    }
    let mut components: Vec<Vec<u32>> = groups.into_values().collect();
    for c in &mut components {
        c.sort_unstable();
    }
    components.sort_unstable_by_key(|c| c[0]);
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn square() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn manifold_input_unchanged() {
        let m = square();
        assert_eq!(split_nonmanifold_vertices(&m), m);
    }

    #[test]
    fn three_triangles_on_one_edge() {
        // edge (0,1) shared by three fins
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, 1.0, 0.0),
                Vec3::new(0.5, -1.0, 0.0),
                Vec3::new(0.5, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap()
        .with_labels(vec![0, 1, 2, 3, 4])
        .unwrap();
        assert_eq!(nonmanifold_edge_count(&m), 1);

        let fixed = split_nonmanifold_vertices(&m);
        assert_eq!(nonmanifold_edge_count(&fixed), 0);
        assert_eq!(nonmanifold_vertex_count(&fixed), 0);
        assert_eq!(fixed.triangle_count(), 3);
        // two extra copies each for vertices 0 and 1
        assert_eq!(fixed.vertex_count(), 9);
        // enumerate edges: every edge now has exactly one triangle
        assert!(fixed.edge_triangle_counts().values().all(|&c| c == 1));
        let labels = fixed.labels().unwrap();
        for (v, p) in fixed.vertices().iter().enumerate() {
            let original = m.vertices().iter().position(|q| q == p).unwrap();
            assert_eq!(labels[v], m.labels().unwrap()[original]);
        }
    }

    #[test]
    fn bowtie_vertex_split() {
        // two triangles touching only at vertex 0
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(-1.0, 0.0, 0.0),
                Vec3::new(-1.0, -1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 3, 4]],
        )
        .unwrap();
        assert_eq!(nonmanifold_vertex_count(&m), 1);
        let fixed = split_nonmanifold_vertices(&m);
        assert_eq!(fixed.vertex_count(), 6);
        assert_eq!(nonmanifold_vertex_count(&fixed), 0);
        assert_eq!(fixed.triangles()[1], [5, 3, 4]);
    }

    #[test]
    fn idempotent() {
        let m = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, 1.0, 0.0),
                Vec3::new(0.5, -1.0, 0.0),
                Vec3::new(0.5, 0.0, 1.0),
            ],
            vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
        )
        .unwrap();
        let once = split_nonmanifold_vertices(&m);
        assert_eq!(split_nonmanifold_vertices(&once), once);
    }
}

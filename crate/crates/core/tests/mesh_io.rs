use dentmesh::mesh::*;
use dentmesh::{synth, TriangleMesh};

fn labeled_model() -> TriangleMesh {
    compute_vertex_normals(&synth::crown_on_slab(&synth::CrownSlabParams::small())).0
}

#[test]
fn ply_round_trip_is_exact() {
    let m = labeled_model();
    let dir = tempfile::tempdir().unwrap();
    for encoding in [PlyEncoding::Ascii, PlyEncoding::BinaryLittleEndian] {
        let path = dir.path().join(format!("{encoding:?}.ply"));
        write_ply(&m, &path, &PlyWriteOptions { encoding, colors: None }).unwrap();
        let back = load_mesh(&path, MeshFormat::Ply).unwrap();
        assert_eq!(back.dropped_triangles, 0);
        assert_eq!(back.mesh, m, "{encoding:?}");
    }
}

#[test]
fn obj_round_trip_uses_label_sidecar() {
    let m = labeled_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.obj");
    save_mesh(&m, &path, MeshFormat::Obj).unwrap();
    assert!(dir.path().join("scan.labels.json").exists());
    let back = load_mesh(&path, MeshFormat::Obj).unwrap().mesh;
    assert_eq!(back.triangles(), m.triangles());
    assert_eq!(back.labels(), m.labels());
    for (a, b) in back.vertices().iter().zip(m.vertices()) {
        assert_eq!(a, b);
    }
}

#[test]
fn bowtie_loads_and_repairs() {
    let m = synth::bowtie_fixture(&synth::CrownSlabParams::small());
    assert!(nonmanifold_edge_count(&m) > 0);
    assert!(nonmanifold_vertex_count(&m) > 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bowtie.ply");
    save_mesh(&m, &path, MeshFormat::Ply).unwrap();
    let loaded = load_mesh(&path, MeshFormat::Ply).unwrap().mesh;
    let fixed = split_nonmanifold_vertices(&loaded);
    assert_eq!(nonmanifold_edge_count(&fixed), 0);
    assert_eq!(nonmanifold_vertex_count(&fixed), 0);
    assert_eq!(fixed.triangle_count(), loaded.triangle_count());
    assert_eq!(fixed.labels().unwrap().len(), fixed.vertex_count());
}

#[test]
fn normalization_fits_unit_box_and_inverts() {
    let m = labeled_model();
    let (n, t) = normalize_coordinates(&m).unwrap();
    let (lo, hi) = n.bounding_box().unwrap();
    assert!(((hi - lo).max() - 1.0).abs() < 1e-12);
    assert!(((hi + lo) / 2.0).norm() < 1e-12);
    let back = t.invert_mesh(&n).unwrap();
    for (a, b) in back.vertices().iter().zip(m.vertices()) {
        assert!((a - b).norm() < 1e-9);
    }
    let cloud = mesh_to_pointcloud(&n).unwrap();
    assert_eq!(cloud.len(), m.vertex_count());
    assert_eq!(cloud.labels(), m.labels());
}

use dentmesh::curvature::mean_curvature;
use dentmesh::mesh::{compute_vertex_normals, nonmanifold_edge_count, nonmanifold_vertex_count};
use dentmesh::simplify::*;
use dentmesh::{synth, Error, TriangleMesh};

fn assert_clean(m: &TriangleMesh) {
    assert_eq!(nonmanifold_edge_count(m), 0);
    assert_eq!(nonmanifold_vertex_count(m), 0);
    for t in 0..m.triangle_count() {
        let c = m.corners(t);
        assert!((c[1] - c[0]).cross(&(c[2] - c[0])).norm() > 0.0);
    }
    let mut used = vec![false; m.vertex_count()];
    for t in m.triangles() {
        for &i in t {
            used[i as usize] = true;
        }
    }
    assert!(used.iter().all(|&u| u));
}

#[test]
fn plane_stays_planar() {
    let m = synth::grid(100, 100, 0.01);
    let out = qem_simplify(&m, 1000).unwrap();
    assert_eq!(out.vertex_count(), 1000);
    assert!(out.vertices().iter().all(|p| p.z.abs() < 1e-8));
    assert_clean(&out);
}

#[test]
fn sphere_keeps_its_radius() {
    let m = synth::geodesic_sphere(100, 1.0);
    assert!(m.vertex_count() >= 100_000);
    let out = qem_simplify(&m, 16_000).unwrap();
    assert_eq!(out.vertex_count(), 16_000);
    let worst = out.vertices().iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 0.01, "{worst}");
    assert_clean(&out);
}

#[test]
fn qem_costs_never_decrease() {
    let m = synth::icosphere(4, 1.0);
    let (_, report) = qem_simplify_with(&m, &SimplifyConfig::qem(400)).unwrap();
    assert_eq!(report.retries, 0);
    for w in report.executed_costs.windows(2) {
        assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1e-300), "{} then {}", w[0], w[1]);
    }
}

#[test]
fn unit_weights_reproduce_qem() {
    let m = compute_vertex_normals(&synth::crown_on_slab(&synth::CrownSlabParams::small())).0;
    let target = m.vertex_count() / 4;
    let qem = qem_simplify(&m, target).unwrap();
    let config = SimplifyConfig { k_neg: 1.0, k_pos: 1.0, ..SimplifyConfig::with_target(target) };
    let sel = selective_downsample(&m, &config).unwrap();
    assert_eq!(qem, sel);
}

#[test]
fn deterministic_and_clean() {
    let m = compute_vertex_normals(&synth::crown_on_slab(&synth::CrownSlabParams::small())).0;
    let config = SimplifyConfig::with_target(800);
    let (a, ra) = selective_downsample_with_report(&m, &config).unwrap();
    let (b, rb) = selective_downsample_with_report(&m, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.executed_costs, rb.executed_costs);
    assert_eq!(a.vertex_count(), 800);
    assert!(ra.refreshes > 0);
    assert_clean(&a);
    assert_eq!(a.labels().unwrap().len(), 800);
}

#[test]
fn selective_keeps_more_valley_vertices() {
    let m = compute_vertex_normals(&synth::crown_on_slab(&synth::CrownSlabParams::small())).0;
    let target = m.vertex_count() / 4;
    let count_negative = |x: &TriangleMesh| {
        let x = compute_vertex_normals(x).0;
        mean_curvature(&x).values().iter().filter(|&&h| h < 0.0).count()
    };
    let qem = qem_simplify(&m, target).unwrap();
    let sel = selective_downsample(&m, &SimplifyConfig::with_target(target)).unwrap();
    assert!(count_negative(&sel) > count_negative(&qem));
}

#[test]
fn triangle_target() {
    let m = synth::icosphere(3, 1.0);
    let config = SimplifyConfig { target_kind: TargetKind::Triangles, ..SimplifyConfig::qem(300) };
    let (out, report) = qem_simplify_with(&m, &config).unwrap();
    assert!(out.triangle_count() <= 300 && out.triangle_count() >= 299);
    assert_eq!(report.output_triangles, out.triangle_count());
}

#[test]
fn target_equal_to_input_is_identity() {
    let m = synth::icosphere(1, 1.0);
    assert_eq!(qem_simplify(&m, m.vertex_count()).unwrap().vertices(), m.vertices());
    assert!(matches!(qem_simplify(&m, m.vertex_count() + 1), Err(Error::InvalidConfig(_))));
}

#[test]
fn closed_mesh_cannot_go_below_tetrahedron() {
    let m = synth::icosphere(1, 1.0);
    assert!(matches!(qem_simplify(&m, 3), Err(Error::TargetUnreachable { .. })));
}

#[test]
fn nonedge_pairs_join_nearby_components() {
    // two coplanar grids separated by a small gap
    let a = synth::grid(6, 6, 0.1);
    let (mut v, mut t, _, _) = a.clone().into_parts();
    let off = v.len() as u32;
    let (v2, t2, _, _) = a.into_parts();
    v.extend(v2.iter().map(|p| p + dentmesh::Vec3::new(0.52, 0.0, 0.0)));
    t.extend(t2.iter().map(|tri| tri.map(|i| i + off)));
    let m = TriangleMesh::new(v, t).unwrap();
    let config = SimplifyConfig { allow_nonedge_pairs: true, pair_distance: 0.05, ..SimplifyConfig::qem(20) };
    let (out, _) = qem_simplify_with(&m, &config).unwrap();
    assert_eq!(out.vertex_count(), 20);
    assert_eq!(nonmanifold_edge_count(&out), 0);
}

use dentmesh::fusion::*;
use dentmesh::mesh::{compute_vertex_normals, mesh_to_pointcloud};
use dentmesh::metrics::miou;
use dentmesh::render::*;
use dentmesh::{synth, Error, LabeledPointCloud, TriangleMesh, Vec3, NUM_CLASSES};

fn small_model() -> (TriangleMesh, LabeledPointCloud) {
    let m = compute_vertex_normals(&synth::crown_on_slab(&synth::CrownSlabParams::small())).0;
    let cloud = mesh_to_pointcloud(&m).unwrap();
    (m, cloud)
}

fn views(m: &TriangleMesh, config: &RigConfig) -> Vec<RenderedView> {
    render_rig(m, &build_hemisphere_rig(m, config).unwrap(), &DirectionalLight::default())
}

#[test]
fn oracle_scores_recover_labels() {
    let (m, cloud) = small_model();
    let gt = cloud.labels().unwrap().to_vec();
    let views = views(&m, &RigConfig { resolution: 512, ..Default::default() });
    let maps: Vec<PixelScoreMap> = views.iter().map(|v| PixelScoreMap::oracle(v, &gt).unwrap()).collect();
    let pairs: Vec<(&RenderedView, &PixelScoreMap)> = views.iter().zip(&maps).collect();
    let pred = majority_vote_segment(&cloud, &pairs, &GatherOptions::default()).unwrap();
    let score = miou(&pred, &gt).unwrap();
    assert!(score >= 0.95, "mIoU {score}");
}

#[test]
fn single_top_view_recovers_labels_exactly() {
    let m = compute_vertex_normals(&synth::grid(20, 20, 0.05)).0;
    let labels: Vec<u8> = (0..m.vertex_count()).map(|i| ((i % 20) / 3) as u8).collect();
    let m = m.with_labels(labels.clone()).unwrap();
    let cloud = mesh_to_pointcloud(&m).unwrap();
    let c = m.centroid();
    let cam = Camera::new(c + Vec3::new(0.0, 0.0, 3.0), c, Vec3::y(), 0.5, 1024, 0.1, 10.0).unwrap();
    let view = rasterize_view(&m, &cam, &DirectionalLight::default());
    let map = PixelScoreMap::oracle(&view, &labels).unwrap();
    let g = gather_pixel_scores(&cloud, &[(&view, &map)], &GatherOptions::default()).unwrap();
    assert!(g.never_visible().is_empty());
    assert_eq!(vote_labels(&cloud, &g).unwrap(), labels);
}

#[test]
fn uniform_scores_pick_class_zero() {
    let (m, cloud) = small_model();
    let views = views(&m, &RigConfig { n_lat: 1, n_lon: 4, resolution: 64, ..Default::default() });
    let map = PixelScoreMap::constant(64, 64, &[1.0 / NUM_CLASSES as f32; NUM_CLASSES]).unwrap();
    let pairs: Vec<_> = views.iter().map(|v| (v, &map)).collect();
    let pred = majority_vote_segment(&cloud, &pairs, &GatherOptions::default()).unwrap();
    assert!(pred.iter().all(|&l| l == 0));
}

#[test]
fn averaging_ignores_view_order_and_empty_views() {
    let (m, cloud) = small_model();
    let gt = cloud.labels().unwrap().to_vec();
    let views = views(&m, &RigConfig { n_lat: 2, n_lon: 3, resolution: 96, ..Default::default() });
    let maps: Vec<PixelScoreMap> = views.iter().map(|v| PixelScoreMap::oracle(v, &gt).unwrap()).collect();
    let forward: Vec<_> = views.iter().zip(&maps).collect();
    let mut reversed = forward.clone();
    reversed.reverse();
    let opts = GatherOptions::default();
    let a = gather_pixel_scores(&cloud, &forward, &opts).unwrap();
    let b = gather_pixel_scores(&cloud, &reversed, &opts).unwrap();
    assert_eq!(a.visible_views, b.visible_views);
    for (x, y) in a.means.iter().zip(&b.means) {
        for c in 0..NUM_CLASSES {
            assert!((x[c] - y[c]).abs() < 1e-12);
        }
    }

    // a camera looking away from the model sees nothing
    let away = Camera::new(Vec3::new(0.0, 0.0, 50.0), Vec3::new(0.0, 0.0, 100.0), Vec3::y(), 0.5, 96, 0.1, 10.0).unwrap();
    let empty = rasterize_view(&m, &away, &DirectionalLight::default());
    let empty_map = PixelScoreMap::oracle(&empty, &gt).unwrap();
    let mut with_empty = forward.clone();
    with_empty.push((&empty, &empty_map));
    assert_eq!(gather_pixel_scores(&cloud, &with_empty, &opts).unwrap(), a);
}

#[test]
fn shape_mismatch_is_reported() {
    let (m, cloud) = small_model();
    let views = views(&m, &RigConfig { n_lat: 1, n_lon: 1, resolution: 32, ..Default::default() });
    let map = PixelScoreMap::constant(16, 16, &[0.0; NUM_CLASSES]).unwrap();
    assert!(matches!(
        gather_pixel_scores(&cloud, &[(&views[0], &map)], &GatherOptions::default()),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn fused_features_are_consistent() {
    let (m, cloud) = small_model();
    let gt = cloud.labels().unwrap().to_vec();
    let views = views(&m, &RigConfig { n_lat: 2, n_lon: 4, resolution: 128, ..Default::default() });
    let maps: Vec<PixelScoreMap> = views.iter().map(|v| PixelScoreMap::oracle(v, &gt).unwrap()).collect();
    let pairs: Vec<_> = views.iter().zip(&maps).collect();
    let g = gather_pixel_scores(&cloud, &pairs, &GatherOptions::default()).unwrap();
    let hots = one_hot_encode(&g.means);
    let f = concat_features(&cloud, &hots, &g.visible_views).unwrap();
    assert_eq!(f.width(), 23);
    for i in 0..f.len() {
        let sum: f32 = f.one_hot(i).iter().sum();
        if g.visible_views[i] > 0 {
            assert_eq!(sum, 1.0);
        } else {
            assert_eq!(sum, 0.0);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("features.bin");
    f.write(&path).unwrap();
    assert_eq!(FusedPointFeatures::from_bytes(&std::fs::read(&path).unwrap()).unwrap(), f);
}

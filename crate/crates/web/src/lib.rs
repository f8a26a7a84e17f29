//! Browser demo: orbit a synthetic labeled scan, compare QEM against
//! curvature-weighted simplification, and fuse oracle views back onto the
//! mesh. [`Scene`] holds the logic; [`Demo`] is its wasm-bindgen face.

use dentmesh::boundary::{boundary_density, detect_boundary_points, DEFAULT_K, DEFAULT_M};
use dentmesh::curvature::{curvature_colors, mean_curvature};
use dentmesh::fusion::{gather_pixel_scores, vote_labels, GatherOptions, PixelScoreMap};
use dentmesh::mesh::{compute_vertex_normals, mesh_to_pointcloud, normalize_coordinates, split_nonmanifold_vertices};
use dentmesh::metrics;
use dentmesh::render::{build_hemisphere_rig, pca_align, rasterize_view, Camera, DirectionalLight, RigConfig, NO_VERTEX};
use dentmesh::simplify::{qem_simplify_with, selective_downsample_with_report, SimplifyConfig};
use dentmesh::synth::{self, CrownSlabParams};
use dentmesh::{Error, LabeledPointCloud, Result, TriangleMesh, Vec3, NUM_CLASSES};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Per-pixel coloring of [`Scene::view`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorMode {
    Shaded,
    Labels,
    Curvature,
    Boundary,
    Predicted,
}

impl ColorMode {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "shaded" => ColorMode::Shaded,
            "labels" => ColorMode::Labels,
            "curvature" => ColorMode::Curvature,
            "boundary" => ColorMode::Boundary,
            "predicted" => ColorMode::Predicted,
            _ => return Err(Error::InvalidConfig(format!("unknown color mode {s:?}"))),
        })
    }
}

/// Gingiva pink, then sixteen hues for the teeth.
pub fn label_color(label: u8) -> [u8; 3] {
    if label == 0 {
        return [232, 160, 160];
    }
    let h = (label as f64 - 1.0) / (NUM_CLASSES - 1) as f64 * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r, g, b].map(|c: f64| (60.0 + 180.0 * c).round() as u8)
}

fn boundary_set(mesh: &TriangleMesh) -> Result<Vec<bool>> {
    let cloud = mesh_to_pointcloud(mesh)?;
    Ok(detect_boundary_points(&cloud, DEFAULT_K)?.mask(mesh.vertex_count()))
}

fn density(mesh: &TriangleMesh) -> Result<Value> {
    let cloud = mesh_to_pointcloud(mesh)?;
    let set = detect_boundary_points(&cloud, DEFAULT_K)?;
    Ok(match boundary_density(&cloud, &set, DEFAULT_M) {
        Ok(r) => json!({ "boundary_points": r.boundary_count, "avg_distance": r.avg_distance }),
        Err(_) => json!({ "boundary_points": set.len(), "avg_distance": null }),
    })
}

/// A normalized, aligned scene and the current (possibly simplified) mesh.
pub struct Scene {
    original: TriangleMesh,
    current: TriangleMesh,
    vertex_colors: Option<(ColorMode, Vec<[u8; 3]>)>,
    predicted: Option<Vec<u8>>,
}

impl Scene {
    /// `model` is `small`, `full` or `bowtie`; the bowtie fixture is
    /// repaired by vertex splitting.
    pub fn new(model: &str, seed: u64) -> Result<Self> {
        let mut params = match model {
            "small" => CrownSlabParams::small(),
            "full" | "bowtie" => CrownSlabParams::default(),
            _ => return Err(Error::InvalidConfig(format!("unknown model {model:?}"))),
        };
        params.seed = seed;
        let mesh = if model == "bowtie" {
            split_nonmanifold_vertices(&synth::bowtie_fixture(&params))
        } else {
            synth::crown_on_slab(&params)
        };
        let (aligned, _) = pca_align(&compute_vertex_normals(&mesh).0)?;
        let (scene, _) = normalize_coordinates(&aligned)?;
        Ok(Scene {
            original: scene.clone(),
            current: scene,
            vertex_colors: None,
            predicted: None,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.current
    }

    pub fn reset(&mut self) {
        self.current = self.original.clone();
        self.vertex_colors = None;
        self.predicted = None;
    }

    fn colors(&mut self, mode: ColorMode) -> Result<Option<&[[u8; 3]]>> {
        if mode == ColorMode::Shaded {
            return Ok(None);
        }
        if self.vertex_colors.as_ref().is_none_or(|(m, _)| *m != mode) {
            let labels = |l: &[u8]| l.iter().map(|&l| label_color(l)).collect::<Vec<_>>();
            let colors = match mode {
                ColorMode::Labels => labels(self.current.labels().ok_or(Error::MissingLabels)?),
                ColorMode::Predicted => labels(self.predicted.as_deref().ok_or_else(|| Error::InvalidConfig("run fuse first".into()))?),
                ColorMode::Curvature => curvature_colors(&mean_curvature(&self.current)),
                ColorMode::Boundary => boundary_set(&self.current)?
                    .into_iter()
                    .map(|b| if b { [220, 30, 30] } else { [200, 200, 200] })
                    .collect(),
                ColorMode::Shaded => unreachable!(),
            };
            self.vertex_colors = Some((mode, colors));
        }
        Ok(self.vertex_colors.as_ref().map(|(_, c)| c.as_slice()))
    }

    /// RGBA image of the current mesh from a camera at the given azimuth
    /// and elevation (degrees) around the centroid.
    pub fn view(&mut self, azimuth: f64, elevation: f64, resolution: u32, mode: ColorMode) -> Result<Vec<u8>> {
        let (lo, hi) = self.current.bounding_box().ok_or(Error::DegenerateMesh("empty mesh"))?;
        let diag = (hi - lo).norm();
        let c = self.current.centroid();
        let (phi, theta) = (azimuth.to_radians(), elevation.clamp(-89.0, 89.0).to_radians());
        let dir = Vec3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin());
        let radius = 1.3 * diag;
        let camera = Camera::new(c + dir * radius, c, Vec3::z(), 40f64.to_radians(), resolution, radius - diag, radius + diag)?;
        let light = DirectionalLight {
            direction: (-dir).into(),
            ..DirectionalLight::with_intensity(1.1)
        };
        let view = rasterize_view(&self.current, &camera, &light);
        let colors = self.colors(mode)?;
        let mut rgba = Vec::with_capacity(view.rgb().len() / 3 * 4);
        for (shade, &id) in view.rgb().chunks(3).zip(view.vertex_ids()) {
            if id == NO_VERTEX {
                rgba.extend_from_slice(&[24, 26, 32, 255]);
                continue;
            }
            let base = colors.map_or([255; 3], |c| c[id as usize]);
            let s = 0.3 + 0.7 * shade[0] as f64 / 255.0;
            rgba.extend(base.map(|b| (b as f64 * s).round() as u8));
            rgba.push(255);
        }
        Ok(rgba)
    }

    /// Simplifies the original mesh to `target` vertices; `k_neg` 0 selects
    /// plain QEM. Replaces the current mesh and reports boundary density.
    pub fn simplify(&mut self, target: usize, k_neg: f64) -> Result<Value> {
        let before = density(&self.original)?;
        let (mesh, report) = if k_neg == 0.0 {
            qem_simplify_with(&self.original, &SimplifyConfig::qem(target))?
        } else {
            let config = SimplifyConfig {
                k_neg,
                ..SimplifyConfig::with_target(target)
            };
            selective_downsample_with_report(&self.original, &config)?
        };
        self.current = compute_vertex_normals(&mesh).0;
        self.vertex_colors = None;
        self.predicted = None;
        Ok(json!({
            "method": if k_neg == 0.0 { "qem" } else { "selective" },
            "k_neg": k_neg,
            "vertices": report.output_vertices,
            "triangles": report.output_triangles,
            "collapses": report.collapses,
            "before": before,
            "after": density(&self.current)?,
        }))
    }

    /// Renders an `n_lat × n_lon` rig of the current mesh, paints each view
    /// with the labels it shows, fuses them back onto the vertices and
    /// scores the voted labels against the mesh labels.
    pub fn fuse(&mut self, n_lat: usize, n_lon: usize, resolution: u32) -> Result<Value> {
        let gt = self.current.labels().ok_or(Error::MissingLabels)?.to_vec();
        let rig = build_hemisphere_rig(
            &self.current,
            &RigConfig {
                n_lat,
                n_lon,
                resolution,
                ..RigConfig::default()
            },
        )?;
        let light = DirectionalLight::default();
        let views: Vec<_> = rig.cameras.iter().map(|c| rasterize_view(&self.current, c, &light)).collect();
        let scores = views.iter().map(|v| PixelScoreMap::oracle(v, &gt)).collect::<Result<Vec<_>>>()?;
        let pairs: Vec<_> = views.iter().zip(&scores).collect();
        let cloud: LabeledPointCloud = mesh_to_pointcloud(&self.current)?;
        let gathered = gather_pixel_scores(&cloud, &pairs, &GatherOptions::default())?;
        let labels = vote_labels(&cloud, &gathered)?;
        let report = metrics::evaluate(&labels, &gt, &cloud, DEFAULT_K)?;
        let never = gathered.never_visible().len();
        self.predicted = Some(labels);
        self.vertex_colors = None;
        Ok(json!({
            "views": rig.len(),
            "resolution": resolution,
            "points": cloud.len(),
            "never_visible": never,
            "miou": report.miou,
            "boundary_iou": report.boundary_iou,
        }))
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(model: &str, seed: u32) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            scene: Scene::new(model, seed as u64).map_err(js)?,
        })
    }

    #[wasm_bindgen(js_name = vertexCount)]
    pub fn vertex_count(&self) -> usize {
        self.scene.mesh().vertex_count()
    }

    #[wasm_bindgen(js_name = triangleCount)]
    pub fn triangle_count(&self) -> usize {
        self.scene.mesh().triangle_count()
    }

    pub fn reset(&mut self) {
        self.scene.reset();
    }

    /// RGBA bytes, `resolution × resolution`.
    pub fn view(&mut self, azimuth: f64, elevation: f64, resolution: u32, mode: &str) -> std::result::Result<Vec<u8>, JsError> {
        let mode = ColorMode::parse(mode).map_err(js)?;
        self.scene.view(azimuth, elevation, resolution, mode).map_err(js)
    }

    /// JSON summary of the run.
    pub fn simplify(&mut self, target: usize, k_neg: f64) -> std::result::Result<String, JsError> {
        self.scene.simplify(target, k_neg).map(|v| v.to_string()).map_err(js)
    }

    /// JSON summary of the fusion and its scores.
    pub fn fuse(&mut self, n_lat: usize, n_lon: usize, resolution: u32) -> std::result::Result<String, JsError> {
        self.scene.fuse(n_lat, n_lon, resolution).map(|v| v.to_string()).map_err(js)
    }
}

//! Work shared by the single-step subcommands and the pipeline.

use std::path::{Path, PathBuf};

use dentmesh::boundary::{boundary_density, detect_boundary_points, DEFAULT_K, DEFAULT_M};
use dentmesh::fusion::{view_contribution, GatherOptions, GatheredScores, PixelScoreMap, ScoreAccumulator};
use dentmesh::mesh::{compute_vertex_normals, mesh_to_pointcloud, normalize_coordinates, NormalizeTransform};
use dentmesh::render::{
    pca_align, project_points_with, rasterize_view, read_geom, CameraRig, DirectionalLight, PcaAlignment, ProjectOptions,
    RenderedView,
};
use dentmesh::simplify::{SimplifyConfig, SimplifyReport, TargetKind};
use dentmesh::{Error, LabeledPointCloud, TriangleMesh};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::{require_dir, require_file, view_file};
use crate::options::Method;

/// Views processed per parallel batch when streaming from disk.
const VIEW_BATCH: usize = 8;

/// Transforms taking an input mesh into the rendered scene frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneTransform {
    pub alignment: Option<PcaAlignment>,
    pub normalize: NormalizeTransform,
}

/// PCA alignment (optional), then normalization to a unit bounding box,
/// with vertex normals computed when the mesh has none.
pub fn prepare_scene(mesh: &TriangleMesh, align: bool) -> CliResult<(TriangleMesh, SceneTransform)> {
    let mesh = if mesh.normals().is_some() {
        mesh.clone()
    } else {
        let (m, flagged) = compute_vertex_normals(mesh);
        if !flagged.is_empty() {
            log::warn!("{} vertices have no incident area; their normals default to +Z", flagged.len());
        }
        m
    };
    let (mesh, alignment) = if align {
        let (m, a) = pca_align(&mesh)?;
        (m, Some(a))
    } else {
        (mesh, None)
    };
    let (mesh, normalize) = normalize_coordinates(&mesh)?;
    Ok((mesh, SceneTransform { alignment, normalize }))
}

/// Renders every camera and writes `view_NNN.png`, `view_NNN.geom` and
/// `rig.json` into `dir`.
pub fn render_to_dir(mesh: &TriangleMesh, rig: &CameraRig, light: &DirectionalLight, dir: &Path) -> CliResult<()> {
    (0..rig.len()).into_par_iter().try_for_each(|i| -> CliResult<()> {
        let view = rasterize_view(mesh, &rig.cameras[i], light);
        view.write_png(&view_file(dir, i, "png"))?;
        view.write_geom(&view_file(dir, i, "geom"))?;
        Ok(())
    })?;
    rig.write_json(&dir.join("rig.json"))?;
    Ok(())
}

/// Rig and view count of a rendered directory; every `.geom` must exist.
pub fn read_rig(dir: &Path) -> CliResult<CameraRig> {
    require_dir(dir)?;
    let path = dir.join("rig.json");
    require_file(&path)?;
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let rig: CameraRig =
        serde_json::from_str(&text).map_err(|e| CliError::usage("parse", format!("{}: {e}", path.display())))?;
    for i in 0..rig.len() {
        require_file(&view_file(dir, i, "geom"))?;
    }
    Ok(rig)
}

pub fn load_view(dir: &Path, i: usize) -> CliResult<RenderedView> {
    Ok(read_geom(&view_file(dir, i, "geom"))?)
}

/// Visible point indices and their integer pixels for one view.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViewProjection {
    pub view: usize,
    pub visible: usize,
    /// `[point index, pixel x, pixel y]`.
    pub points: Vec<[u32; 3]>,
}

pub fn project_dir(cloud: &LabeledPointCloud, dir: &Path, n_views: usize, options: &ProjectOptions) -> CliResult<Vec<ViewProjection>> {
    let mut out = Vec::with_capacity(n_views);
    for batch in (0..n_views).collect::<Vec<_>>().chunks(VIEW_BATCH) {
        let done: Vec<CliResult<ViewProjection>> = batch
            .par_iter()
            .map(|&i| {
                let view = load_view(dir, i)?;
                let res = view.resolution();
                let points: Vec<[u32; 3]> = project_points_with(cloud, &view, options)
                    .into_iter()
                    .filter(|p| p.visible)
                    .filter_map(|p| p.pixel_index(res).map(|(x, y)| [p.index, x as u32, y as u32]))
                    .collect();
                Ok(ViewProjection {
                    view: i,
                    visible: points.len(),
                    points,
                })
            })
            .collect();
        for p in done {
            out.push(p?);
        }
    }
    Ok(out)
}

/// Where per-view class scores come from.
#[derive(Clone, Debug)]
pub enum ScoreSource {
    /// One-hot maps painted from the point labels through the vertex ids.
    Oracle(Vec<u8>),
    /// `view_NNN.scores` (dense) or `view_NNN.labels.png` per view.
    Dir(PathBuf),
}

impl ScoreSource {
    fn file(dir: &Path, i: usize) -> Option<PathBuf> {
        [view_file(dir, i, "scores"), view_file(dir, i, "labels.png")]
            .into_iter()
            .find(|p| p.is_file())
    }

    pub fn check(&self, n_views: usize) -> CliResult<()> {
        if let ScoreSource::Dir(dir) = self {
            require_dir(dir)?;
            for i in 0..n_views {
                if Self::file(dir, i).is_none() {
                    return Err(CliError::missing_input(&view_file(dir, i, "scores")).context("no score map for view"));
                }
            }
        }
        Ok(())
    }

    fn map(&self, view: &RenderedView, i: usize) -> CliResult<PixelScoreMap> {
        match self {
            ScoreSource::Oracle(labels) => Ok(PixelScoreMap::oracle(view, labels)?),
            ScoreSource::Dir(dir) => {
                let path = Self::file(dir, i).ok_or_else(|| CliError::missing_input(&view_file(dir, i, "scores")))?;
                let map = if path.extension().is_some_and(|e| e == "png") {
                    PixelScoreMap::read_label_png(&path)?
                } else {
                    PixelScoreMap::read(&path)?
                };
                Ok(map)
            }
        }
    }
}

/// Streams views from `dir` in batches and averages their scores per
/// point; views are accumulated in index order.
pub fn gather_dir(
    cloud: &LabeledPointCloud,
    dir: &Path,
    n_views: usize,
    source: &ScoreSource,
    options: &GatherOptions,
) -> CliResult<GatheredScores> {
    if let ScoreSource::Oracle(labels) = source {
        if labels.len() != cloud.len() {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                vertices: cloud.len(),
            }
            .into());
        }
    }
    source.check(n_views)?;
    let mut acc = ScoreAccumulator::new(cloud.len());
    for batch in (0..n_views).collect::<Vec<_>>().chunks(VIEW_BATCH) {
        let done: Vec<CliResult<_>> = batch
            .par_iter()
            .map(|&i| {
                let view = load_view(dir, i)?;
                let map = source.map(&view, i)?;
                Ok(view_contribution(cloud, &view, &map, options)?)
            })
            .collect();
        for c in done {
            acc.add(&c?);
        }
    }
    Ok(acc.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplifyStats {
    pub method: Method,
    pub target: usize,
    pub target_kind: TargetKind,
    pub k_neg: f64,
    pub k_pos: f64,
    pub refresh_interval: Option<usize>,
    pub input_vertices: usize,
    pub input_triangles: usize,
    pub output_vertices: usize,
    pub output_triangles: usize,
    pub collapses: usize,
    pub rejected: usize,
    pub refreshes: usize,
    pub retries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryStats>,
}

/// Boundary density before and after, in the input's normalized frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryStats {
    pub k: usize,
    pub m: usize,
    pub units: String,
    pub boundary_points_before: usize,
    pub boundary_points_after: usize,
    pub boundary_avg_distance_before: Option<f64>,
    pub boundary_avg_distance_after: Option<f64>,
}

impl SimplifyStats {
    pub fn new(input: &TriangleMesh, output: &TriangleMesh, method: Method, config: &SimplifyConfig, report: &SimplifyReport) -> CliResult<Self> {
        let boundary = if input.labels().is_some() {
            let (_, t) = normalize_coordinates(input)?;
            let before = density_in(input, &t)?;
            let after = density_in(output, &t)?;
            Some(BoundaryStats {
                k: DEFAULT_K,
                m: DEFAULT_M,
                units: "normalized".into(),
                boundary_points_before: before.0,
                boundary_points_after: after.0,
                boundary_avg_distance_before: before.1,
                boundary_avg_distance_after: after.1,
            })
        } else {
            None
        };
        Ok(SimplifyStats {
            method,
            target: config.target,
            target_kind: config.target_kind,
            k_neg: config.k_neg,
            k_pos: config.k_pos,
            refresh_interval: (method == Method::Selective).then(|| config.effective_refresh_interval(input.vertex_count())),
            input_vertices: input.vertex_count(),
            input_triangles: input.triangle_count(),
            output_vertices: output.vertex_count(),
            output_triangles: output.triangle_count(),
            collapses: report.collapses,
            rejected: report.rejected,
            refreshes: report.refreshes,
            retries: report.retries,
            boundary,
        })
    }
}

/// Boundary point count and density of `mesh` after applying `t`.
fn density_in(mesh: &TriangleMesh, t: &NormalizeTransform) -> CliResult<(usize, Option<f64>)> {
    let positions = mesh.vertices().iter().map(|p| t.apply(p)).collect();
    let cloud = LabeledPointCloud::from_positions(positions, mesh.labels().map(<[u8]>::to_vec))?;
    let set = detect_boundary_points(&cloud, DEFAULT_K)?;
    match boundary_density(&cloud, &set, DEFAULT_M) {
        Ok(r) => Ok((set.len(), Some(r.avg_distance))),
        Err(Error::TooFewBoundaryPoints { found, .. }) => {
            log::warn!("only {found} boundary points; density undefined");
            Ok((set.len(), None))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cloud_of(mesh: &TriangleMesh) -> CliResult<LabeledPointCloud> {
    Ok(mesh_to_pointcloud(mesh)?)
}

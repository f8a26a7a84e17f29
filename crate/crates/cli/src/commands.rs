use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use dentmesh::augment;
use dentmesh::boundary::{boundary_colors, boundary_density, detect_boundary_points};
use dentmesh::curvature::{export_curvature_colormap, mean_curvature};
use dentmesh::fusion::{concat_features, one_hot_encode, vote_labels, GatherOptions};
use dentmesh::mesh::{nonmanifold_edge_count, nonmanifold_vertex_count, split_nonmanifold_vertices, write_ply, PlyWriteOptions};
use dentmesh::metrics;
use dentmesh::render::{build_hemisphere_rig, DirectionalLight, ProjectOptions};
use dentmesh::synth::{self, CrownSlabParams};
use dentmesh::{Error, TriangleMesh};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::files::*;
use crate::options::{read_table, run_simplify};
use crate::stages::*;
use crate::{AugmentCmd, BoundaryArgs, CurvatureArgs, DemoArgs, EvaluateArgs, FuseArgs, ProjectArgs, RenderCmd, SimplifyCmd};

fn summary(value: serde_json::Value) {
    println!("{value}");
}

pub fn demo_mesh(small: bool, bowtie: bool, seed: Option<u64>) -> TriangleMesh {
    let mut params = if small { CrownSlabParams::small() } else { CrownSlabParams::default() };
    if let Some(s) = seed {
        params.seed = s;
    }
    if bowtie {
        synth::bowtie_fixture(&params)
    } else {
        synth::crown_on_slab(&params)
    }
}

pub fn demo(args: DemoArgs) -> CliResult<()> {
    mesh_format(&args.output)?;
    let mesh = demo_mesh(args.small, args.bowtie, args.seed);
    write_ascii_or_binary(&mesh, &args.output, args.ascii)?;
    summary(json!({
        "output": args.output,
        "vertices": mesh.vertex_count(),
        "triangles": mesh.triangle_count(),
        "nonmanifold_edges": nonmanifold_edge_count(&mesh),
    }));
    Ok(())
}

/// Splits non-manifold vertices when asked; refuses non-manifold input
/// otherwise.
fn manifold_input(mesh: TriangleMesh, repair: bool) -> CliResult<TriangleMesh> {
    let edges = nonmanifold_edge_count(&mesh);
    let vertices = nonmanifold_vertex_count(&mesh);
    if edges == 0 && vertices == 0 {
        return Ok(mesh);
    }
    if !repair {
        return Err(Error::InvalidMesh(format!(
            "{edges} non-manifold edges and {vertices} non-manifold vertices; rerun with --repair"
        ))
        .into());
    }
    let fixed = split_nonmanifold_vertices(&mesh);
    log::info!("split {vertices} non-manifold vertices ({} -> {} vertices)", mesh.vertex_count(), fixed.vertex_count());
    Ok(fixed)
}

pub fn simplify(args: SimplifyCmd) -> CliResult<()> {
    let table = args.config.as_deref().map(read_table).transpose()?;
    let (method, config) = args.params.resolve(table)?;
    mesh_format(&args.output)?;
    let input = manifold_input(read_mesh(&args.input)?, args.repair)?;
    config.validate(&input)?;
    let start = Instant::now();
    let (output, report) = run_simplify(&input, method, &config)?;
    let runtime = start.elapsed().as_secs_f64();
    write_mesh(&output, &args.output)?;
    let stats = SimplifyStats::new(&input, &output, method, &config, &report)?;
    let stats_path = args.stats.clone().unwrap_or_else(|| sibling(&args.output, "stats.json"));
    write_json(&stats_path, &stats)?;
    summary(json!({
        "output": args.output,
        "stats": stats_path,
        "vertices": output.vertex_count(),
        "triangles": output.triangle_count(),
        "runtime_seconds": runtime,
    }));
    Ok(())
}

pub fn curvature(args: CurvatureArgs) -> CliResult<()> {
    let mesh = read_mesh(&args.input)?;
    let field = mean_curvature(&mesh);
    export_curvature_colormap(&mesh, &field, &args.output)?;
    if let Some(path) = &args.values {
        write_json(path, &json!({ "units": "inverse input length", "values": field.values() }))?;
    }
    let v = field.values();
    let n = v.len().max(1) as f64;
    summary(json!({
        "output": args.output,
        "vertices": v.len(),
        "min": v.iter().copied().fold(f64::INFINITY, f64::min),
        "max": v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "mean": v.iter().sum::<f64>() / n,
        "negative_fraction": v.iter().filter(|&&h| h < 0.0).count() as f64 / n,
        "umbrella_fallback_vertices": field.fallback_vertices().len(),
    }));
    Ok(())
}

pub fn boundary(args: BoundaryArgs) -> CliResult<()> {
    let mesh = read_mesh(&args.input)?;
    let (normalized, _) = dentmesh::mesh::normalize_coordinates(&mesh)?;
    let cloud = cloud_of(&normalized)?;
    let set = detect_boundary_points(&cloud, args.k)?;
    if let Some(path) = &args.colored {
        let colors = boundary_colors(mesh.vertex_count(), &set);
        write_ply(
            &mesh,
            path,
            &PlyWriteOptions {
                colors: Some(&colors),
                ..Default::default()
            },
        )?;
    }
    let density = boundary_density(&cloud, &set, args.m)?;
    let mut report = serde_json::to_value(&density).expect("report serializes");
    report["k"] = json!(args.k);
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    summary(report);
    Ok(())
}

pub fn render(args: RenderCmd) -> CliResult<()> {
    let settings = args.rig.resolve(None)?;
    let mesh = read_mesh(&args.input)?;
    let (scene, transform) = prepare_scene(&mesh, !args.no_align)?;
    let rig = build_hemisphere_rig(&scene, &settings.rig)?;
    create_dir(&args.out_dir)?;
    let start = Instant::now();
    render_to_dir(&scene, &rig, &DirectionalLight::with_intensity(settings.light_intensity), &args.out_dir)?;
    write_ply_mesh(&scene, &args.out_dir.join("scene.ply"))?;
    write_json(&args.out_dir.join("scene_transform.json"), &transform)?;
    summary(json!({
        "out_dir": args.out_dir,
        "views": rig.len(),
        "resolution": settings.rig.resolution,
        "runtime_seconds": start.elapsed().as_secs_f64(),
    }));
    Ok(())
}

fn scene_mesh(views: &Path, mesh: Option<&Path>) -> CliResult<TriangleMesh> {
    match mesh {
        Some(p) => read_mesh(p),
        None => read_mesh(&views.join("scene.ply")),
    }
}

pub fn project(args: ProjectArgs) -> CliResult<()> {
    let rig = read_rig(&args.views)?;
    let cloud = cloud_of(&scene_mesh(&args.views, args.mesh.as_deref())?)?;
    let options = ProjectOptions {
        depth_epsilon: args.depth_epsilon,
        match_vertex_ids: !args.no_id_match,
    };
    let projections = project_dir(&cloud, &args.views, rig.len(), &options)?;
    let mut text = String::new();
    for p in &projections {
        text.push_str(&serde_json::to_string(p).expect("projection serializes"));
        text.push('\n');
    }
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::runtime("io", format!("stdout: {e}")))?,
    }
    Ok(())
}

pub fn fuse(args: FuseArgs) -> CliResult<()> {
    let rig = read_rig(&args.views)?;
    let mesh = scene_mesh(&args.views, args.mesh.as_deref())?;
    let cloud = cloud_of(&mesh)?;
    let source = match &args.scores {
        Some(dir) => ScoreSource::Dir(dir.clone()),
        None => ScoreSource::Oracle(mesh.labels().ok_or(Error::MissingLabels)?.to_vec()),
    };
    let options = GatherOptions {
        softmax: args.softmax,
        depth_epsilon: args.depth_epsilon,
    };
    let gathered = gather_dir(&cloud, &args.views, rig.len(), &source, &options)?;
    let features = concat_features(&cloud, &one_hot_encode(&gathered.means), &gathered.visible_views)?;
    let labels = vote_labels(&cloud, &gathered)?;
    create_dir(&args.out_dir)?;
    features.write(&args.out_dir.join("features.bin"))?;
    write_text(&args.out_dir.join("predicted_labels.json"), &labels_json(&labels))?;
    summary(json!({
        "out_dir": args.out_dir,
        "points": cloud.len(),
        "views": rig.len(),
        "never_visible": gathered.never_visible().len(),
    }));
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let mesh = read_mesh(&args.mesh)?;
    let pred = read_labels(&args.pred)?;
    let gt = match &args.gt {
        Some(p) => read_labels(p)?,
        None => mesh.labels().ok_or(Error::MissingLabels)?.to_vec(),
    };
    let cloud = dentmesh::LabeledPointCloud::from_positions(mesh.vertices().to_vec(), None)?;
    let report = metrics::evaluate(&pred, &gt, &cloud, args.k)?.to_json();
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    summary(report);
    Ok(())
}

pub fn augment(args: AugmentCmd) -> CliResult<()> {
    let table = args.config.as_deref().map(read_table).transpose()?;
    let config = args.params.resolve(table, 0)?;
    mesh_format(&args.output)?;
    let mesh = read_mesh(&args.input)?;
    let (out, record) = augment_mesh(&mesh, &config)?;
    write_mesh(&out, &args.output)?;
    let sidecar = sibling(&args.output, "augment.json");
    record.write_json(&sidecar)?;
    summary(json!({ "output": args.output, "metadata": sidecar, "offset": record.offset, "angles": record.rotation.angles }));
    Ok(())
}

/// Augments the mesh's vertex cloud and carries connectivity along.
pub fn augment_mesh(mesh: &TriangleMesh, config: &augment::AugmentConfig) -> CliResult<(TriangleMesh, augment::AugmentRecord)> {
    let had_normals = mesh.normals().is_some();
    let (cloud, record) = augment::augment(&cloud_of(mesh)?, config)?;
    let mut out = mesh.with_positions(cloud.positions().to_vec())?;
    if had_normals {
        out = out.with_normals(cloud.normals().to_vec())?;
    }
    Ok((out, record))
}

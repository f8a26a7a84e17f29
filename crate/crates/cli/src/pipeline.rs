//! End-to-end run from a TOML config.
//!
//! Stage outputs are first written under a `.partial` name and renamed when
//! the stage completes, so a failed run leaves its unfinished artifacts
//! marked. `manifest.json` is written last and lists every artifact with
//! its SHA-256; it carries no timings, so identical inputs give identical
//! manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dentmesh::fusion::{concat_features, one_hot_encode, vote_labels, GatherOptions};
use dentmesh::mesh::{nonmanifold_edge_count, nonmanifold_vertex_count, split_nonmanifold_vertices};
use dentmesh::metrics;
use dentmesh::render::{build_hemisphere_rig, DirectionalLight, ProjectOptions};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{augment_mesh, demo_mesh};
use crate::error::{CliError, CliResult};
use crate::files::*;
use crate::options::{from_table, read_table, run_simplify, AugmentArgs, FusionSettings, RigArgs, SimplifyArgs};
use crate::stages::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SyntheticModel {
    #[default]
    CrownOnSlab,
    Bowtie,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SyntheticInput {
    #[serde(default)]
    model: SyntheticModel,
    #[serde(default)]
    small: bool,
    seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FusionSection {
    /// `"oracle"` or a directory of per-view score files.
    #[serde(default = "oracle")]
    scores: String,
    #[serde(default)]
    softmax: bool,
    depth_epsilon: Option<f64>,
}

fn oracle() -> String {
    "oracle".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
struct EvaluateSection {
    k: usize,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            k: dentmesh::boundary::DEFAULT_K,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct PipelineFile {
    #[serde(default)]
    seed: u64,
    input: Option<PathBuf>,
    synthetic: Option<SyntheticInput>,
    output_dir: PathBuf,
    #[serde(default = "yes")]
    align: bool,
    simplify: Option<toml::Table>,
    render: Option<toml::Table>,
    fusion: Option<FusionSection>,
    augment: Option<toml::Table>,
    #[serde(default)]
    evaluate: EvaluateSection,
}

fn yes() -> bool {
    true
}

enum Input {
    File(PathBuf),
    Synthetic(SyntheticInput),
}

/// Validated config with paths resolved against the config directory.
pub struct PipelineConfig {
    seed: u64,
    input: Input,
    output_dir: PathBuf,
    align: bool,
    simplify: (crate::options::Method, dentmesh::simplify::SimplifyConfig),
    render: crate::options::RenderSettings,
    scores: Option<PathBuf>,
    fusion: FusionSettings,
    augment: Option<dentmesh::augment::AugmentConfig>,
    k: usize,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let file: PipelineFile = from_table(read_table(path)?, "pipeline")?;
        let base = path.parent().unwrap_or(Path::new("."));
        let input = match (file.input, file.synthetic) {
            (Some(p), None) => {
                let p = base.join(p);
                require_file(&p)?;
                mesh_format(&p)?;
                Input::File(p)
            }
            (None, Some(s)) => Input::Synthetic(s),
            _ => return Err(CliError::usage("invalid_config", "set exactly one of `input` and `[synthetic]`")),
        };
        let fusion = file.fusion.unwrap_or(FusionSection {
            scores: oracle(),
            softmax: false,
            depth_epsilon: None,
        });
        let scores = (fusion.scores != "oracle").then(|| base.join(&fusion.scores));
        if let Some(dir) = &scores {
            require_dir(dir)?;
        }
        Ok(PipelineConfig {
            seed: file.seed,
            input,
            output_dir: base.join(file.output_dir),
            align: file.align,
            simplify: SimplifyArgs::default().resolve(file.simplify)?,
            render: RigArgs::default().resolve(file.render)?,
            scores,
            fusion: FusionSettings {
                softmax: fusion.softmax,
                depth_epsilon: fusion.depth_epsilon,
            },
            augment: file
                .augment
                .map(|t| AugmentArgs::default().resolve(Some(t), file.seed))
                .transpose()?,
            k: file.evaluate.k,
        })
    }
}

/// Artifacts of one stage, written as `<name>.partial` until committed.
struct Stage<'a> {
    name: &'static str,
    dir: &'a Path,
    started: Instant,
    pending: Vec<String>,
}

impl<'a> Stage<'a> {
    fn new(name: &'static str, dir: &'a Path) -> Self {
        log::info!("stage {name}");
        Stage {
            name,
            dir,
            started: Instant::now(),
            pending: Vec::new(),
        }
    }

    fn file(&mut self, name: &str) -> PathBuf {
        self.pending.push(name.to_string());
        self.dir.join(format!("{name}.partial"))
    }

    fn subdir(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.file(name);
        if path.exists() {
            fs::remove_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        }
        create_dir(&path)?;
        Ok(path)
    }

    fn commit(self, run: &mut Run) -> CliResult<()> {
        for name in &self.pending {
            let from = self.dir.join(format!("{name}.partial"));
            let to = self.dir.join(name);
            if to.is_dir() {
                fs::remove_dir_all(&to).map_err(|e| CliError::io(&to, e))?;
            }
            fs::rename(&from, &to).map_err(|e| CliError::io(&from, e))?;
            run.artifacts.push(name.clone());
        }
        let seconds = self.started.elapsed().as_secs_f64();
        log::info!("stage {} done in {seconds:.2} s", self.name);
        run.stages.push(self.name);
        run.timings.insert(self.name.into(), json!(seconds));
        Ok(())
    }
}

#[derive(Default)]
struct Run {
    stages: Vec<&'static str>,
    artifacts: Vec<String>,
    timings: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    config_sha256: String,
    stages: Vec<&'static str>,
    artifacts: Vec<ManifestEntry>,
}

fn hash_artifacts(dir: &Path, names: &[String]) -> CliResult<Vec<ManifestEntry>> {
    let mut files = Vec::new();
    for name in names {
        let path = dir.join(name);
        if path.is_dir() {
            let entries = fs::read_dir(&path).map_err(|e| CliError::io(&path, e))?;
            for entry in entries {
                let entry = entry.map_err(|e| CliError::io(&path, e))?;
                files.push(format!("{name}/{}", entry.file_name().to_string_lossy()));
            }
        } else {
            files.push(name.clone());
        }
    }
    files.sort();
    files
        .into_iter()
        .map(|rel| {
            let path = dir.join(&rel);
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            Ok(ManifestEntry {
                path: rel,
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect()
}

fn stage_error(name: &'static str) -> impl Fn(CliError) -> CliError {
    move |e| e.context(&format!("stage {name}"))
}

pub fn run(config_path: &Path) -> CliResult<()> {
    let config = PipelineConfig::load(config_path)?;
    let config_bytes = fs::read(config_path).map_err(|e| CliError::io(config_path, e))?;
    let out = config.output_dir.as_path();
    create_dir(out)?;
    let manifest_path = out.join("manifest.json");
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    }
    let mut run = Run::default();

    let mut stage = Stage::new("load", out);
    let mesh = match &config.input {
        Input::File(p) => read_mesh(p),
        Input::Synthetic(s) => Ok(demo_mesh(s.small, s.model == SyntheticModel::Bowtie, s.seed)),
    }
    .map_err(stage_error("load"))?;
    if mesh.labels().is_none() && config.scores.is_none() {
        return Err(CliError::from(dentmesh::Error::MissingLabels).context("oracle fusion and evaluation need a labeled input"));
    }
    let input_stats = json!({
        "vertices": mesh.vertex_count(),
        "triangles": mesh.triangle_count(),
        "nonmanifold_edges": nonmanifold_edge_count(&mesh),
        "nonmanifold_vertices": nonmanifold_vertex_count(&mesh),
    });
    write_json(&stage.file("input_stats.json"), &input_stats)?;
    stage.commit(&mut run)?;

    let mut stage = Stage::new("repair", out);
    let repaired = split_nonmanifold_vertices(&mesh);
    let remaining = nonmanifold_edge_count(&repaired);
    if remaining > 0 {
        return Err(CliError::runtime("repair", format!("{remaining} non-manifold edges left after vertex splitting")));
    }
    write_json(
        &stage.file("repair.json"),
        &json!({
            "vertices_before": mesh.vertex_count(),
            "vertices_after": repaired.vertex_count(),
            "nonmanifold_edges_after": remaining,
            "nonmanifold_vertices_after": nonmanifold_vertex_count(&repaired),
        }),
    )?;
    stage.commit(&mut run)?;

    let mut stage = Stage::new("align", out);
    let (aligned, transform) = prepare_scene(&repaired, config.align).map_err(stage_error("align"))?;
    write_ply_mesh(&aligned, &stage.file("aligned.ply"))?;
    write_json(&stage.file("scene_transform.json"), &transform)?;
    stage.commit(&mut run)?;

    let mut stage = Stage::new("simplify", out);
    let (method, simplify_config) = &config.simplify;
    let simplified = simplify_config
        .validate(&aligned)
        .map_err(CliError::from)
        .and_then(|_| Ok(run_simplify(&aligned, *method, simplify_config)?))
        .and_then(|(m, report)| {
            let stats = SimplifyStats::new(&aligned, &m, *method, simplify_config, &report)?;
            Ok((m, stats))
        })
        .map_err(stage_error("simplify"));
    let (simplified, stats) = simplified?;
    let simplified = dentmesh::mesh::compute_vertex_normals(&simplified).0;
    write_ply_mesh(&simplified, &stage.file("simplified.ply"))?;
    write_json(&stage.file("simplify_stats.json"), &stats)?;
    stage.commit(&mut run)?;

    if let Some(aug) = &config.augment {
        let mut stage = Stage::new("augment", out);
        let (augmented, record) = augment_mesh(&simplified, aug).map_err(stage_error("augment"))?;
        write_ply_mesh(&augmented, &stage.file("augmented.ply"))?;
        record.write_json(&stage.file("augmented.augment.json"))?;
        stage.commit(&mut run)?;
    }

    let mut stage = Stage::new("render", out);
    let rig = build_hemisphere_rig(&simplified, &config.render.rig)
        .map_err(CliError::from)
        .map_err(stage_error("render"))?;
    let views_partial = stage.subdir("views")?;
    render_to_dir(&simplified, &rig, &DirectionalLight::with_intensity(config.render.light_intensity), &views_partial)
        .map_err(stage_error("render"))?;
    stage.commit(&mut run)?;
    let views = out.join("views");

    let cloud = cloud_of(&simplified)?;
    let mut stage = Stage::new("project", out);
    let options = ProjectOptions {
        depth_epsilon: config.fusion.depth_epsilon,
        ..Default::default()
    };
    let projections = project_dir(&cloud, &views, rig.len(), &options).map_err(stage_error("project"))?;
    let mut seen = vec![false; cloud.len()];
    for p in &projections {
        for &[i, _, _] in &p.points {
            seen[i as usize] = true;
        }
    }
    write_json(
        &stage.file("projection_summary.json"),
        &json!({
            "points": cloud.len(),
            "never_visible": seen.iter().filter(|&&s| !s).count(),
            "visible_per_view": projections.iter().map(|p| p.visible).collect::<Vec<_>>(),
        }),
    )?;
    stage.commit(&mut run)?;

    let mut stage = Stage::new("fuse", out);
    let gt = simplified.labels().map(<[u8]>::to_vec);
    let source = match (&config.scores, &gt) {
        (Some(dir), _) => ScoreSource::Dir(dir.clone()),
        (None, Some(labels)) => ScoreSource::Oracle(labels.clone()),
        (None, None) => unreachable!("checked at load"),
    };
    let gather = GatherOptions {
        softmax: config.fusion.softmax,
        depth_epsilon: config.fusion.depth_epsilon,
    };
    let gathered = gather_dir(&cloud, &views, rig.len(), &source, &gather).map_err(stage_error("fuse"))?;
    let features = concat_features(&cloud, &one_hot_encode(&gathered.means), &gathered.visible_views)?;
    features.write(&stage.file("features.bin"))?;
    stage.commit(&mut run)?;

    let mut stage = Stage::new("vote", out);
    let pred = vote_labels(&cloud, &gathered).map_err(|e| CliError::from(e).context("stage vote"))?;
    write_text(&stage.file("predicted_labels.json"), &labels_json(&pred))?;
    stage.commit(&mut run)?;

    let mut report = None;
    if let Some(gt) = &gt {
        let mut stage = Stage::new("evaluate", out);
        let r = metrics::evaluate(&pred, gt, &cloud, config.k)
            .map_err(|e| CliError::from(e).context("stage evaluate"))?
            .to_json();
        write_json(&stage.file("report.json"), &r)?;
        stage.commit(&mut run)?;
        report = Some(r);
    }

    let manifest = Manifest {
        seed: config.seed,
        config_sha256: sha256_hex(&config_bytes),
        stages: run.stages.clone(),
        artifacts: hash_artifacts(out, &run.artifacts)?,
    };
    let partial = out.join("manifest.json.partial");
    write_json(&partial, &manifest)?;
    fs::rename(&partial, &manifest_path).map_err(|e| CliError::io(&partial, e))?;

    println!(
        "{}",
        json!({
            "output_dir": out,
            "manifest": manifest_path,
            "vertices": simplified.vertex_count(),
            "views": rig.len(),
            "miou": report.as_ref().map(|r| r["miou"].clone()),
            "boundary_iou": report.as_ref().map(|r| r["boundary_iou"].clone()),
            "stage_seconds": run.timings,
        })
    );
    Ok(())
}

//! Stage parameters shared by subcommand flags and TOML config tables.
//! Flags override config values; config values override defaults.

use std::path::Path;

use clap::{Args, ValueEnum};
use dentmesh::augment::{AugmentConfig, Axis, RotationUnit};
use dentmesh::render::RigConfig;
use dentmesh::simplify::{self, SimplifyConfig, SimplifyReport, TargetKind};
use dentmesh::TriangleMesh;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::files::require_file;

pub fn read_table(path: &Path) -> CliResult<toml::Table> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::usage("invalid_config", format!("{}: {e}", path.display())))
}

pub fn from_table<T: DeserializeOwned>(table: toml::Table, what: &str) -> CliResult<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::usage("invalid_config", format!("{what}: {e}")))
}

/// Removes `key` from `table` and deserializes it.
pub fn take<T: DeserializeOwned>(table: &mut toml::Table, key: &str, what: &str) -> CliResult<Option<T>> {
    match table.remove(key) {
        None => Ok(None),
        Some(v) => v
            .try_into()
            .map(Some)
            .map_err(|e| CliError::usage("invalid_config", format!("{what}.{key}: {e}"))),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qem,
    #[default]
    Selective,
}

fn parse_target_kind(s: &str) -> Result<TargetKind, String> {
    match s {
        "vertices" => Ok(TargetKind::Vertices),
        "triangles" => Ok(TargetKind::Triangles),
        _ => Err("expected `vertices` or `triangles`".into()),
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct SimplifyArgs {
    /// Plain quadric error metric or curvature-weighted selective collapse.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Target count [default: 16000].
    #[arg(long)]
    pub target: Option<usize>,
    /// What the target counts: vertices or triangles [default: vertices].
    #[arg(long, value_parser = parse_target_kind)]
    pub target_kind: Option<TargetKind>,
    /// Cost multiplier for edges in concave regions (selective only) [default: 10].
    #[arg(long)]
    pub k_neg: Option<f64>,
    /// Cost multiplier for other edges (selective only) [default: 1].
    #[arg(long)]
    pub k_pos: Option<f64>,
    /// Collapses between curvature refreshes (selective only) [default: 10% of the input vertices].
    #[arg(long)]
    pub refresh_interval: Option<usize>,
    /// Also contract close vertex pairs that share no edge.
    #[arg(long)]
    pub allow_nonedge_pairs: bool,
    /// Distance threshold for non-edge pairs.
    #[arg(long)]
    pub pair_distance: Option<f64>,
}

impl SimplifyArgs {
    /// Merges flags over an optional config table with keys `method`,
    /// `target`, `target-kind`, `k-neg`, `k-pos`, `refresh-interval`,
    /// `allow-nonedge-pairs`, `pair-distance`.
    pub fn resolve(&self, table: Option<toml::Table>) -> CliResult<(Method, SimplifyConfig)> {
        let mut table = table.unwrap_or_default();
        let file_method: Option<Method> = take(&mut table, "method", "simplify")?;
        let method = self.method.or(file_method).unwrap_or_default();
        let weights_in_file = ["k-neg", "k-pos", "refresh-interval"].iter().any(|k| table.contains_key(*k));
        let weights_in_flags = self.k_neg.is_some() || self.k_pos.is_some() || self.refresh_interval.is_some();
        if method == Method::Qem && (weights_in_file || weights_in_flags) {
            return Err(CliError::usage(
                "invalid_config",
                "weight options (k-neg, k-pos, refresh-interval) require method selective",
            ));
        }
        let mut config: SimplifyConfig = from_table(table, "simplify")?;
        if let Some(v) = self.target {
            config.target = v;
        }
        if let Some(v) = self.target_kind {
            config.target_kind = v;
        }
        if let Some(v) = self.k_neg {
            config.k_neg = v;
        }
        if let Some(v) = self.k_pos {
            config.k_pos = v;
        }
        if self.refresh_interval.is_some() {
            config.refresh_interval = self.refresh_interval;
        }
        if self.allow_nonedge_pairs {
            config.allow_nonedge_pairs = true;
        }
        if let Some(v) = self.pair_distance {
            config.pair_distance = v;
        }
        if method == Method::Qem {
            config.k_neg = 1.0;
            config.k_pos = 1.0;
        }
        Ok((method, config))
    }
}

pub fn run_simplify(mesh: &TriangleMesh, method: Method, config: &SimplifyConfig) -> dentmesh::Result<(TriangleMesh, SimplifyReport)> {
    match method {
        Method::Qem => simplify::qem_simplify_with(mesh, config),
        Method::Selective => simplify::selective_downsample_with_report(mesh, config),
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct RigArgs {
    /// Total number of views; must equal n-lat × n-lon [default: 96].
    #[arg(long)]
    pub views: Option<usize>,
    /// Latitude rings [default: 6].
    #[arg(long)]
    pub n_lat: Option<usize>,
    /// Cameras per ring [default: 16].
    #[arg(long)]
    pub n_lon: Option<usize>,
    /// Vertical field of view in degrees [default: 40].
    #[arg(long)]
    pub fov: Option<f64>,
    /// Image side in pixels [default: 1024].
    #[arg(long)]
    pub resolution: Option<u32>,
    /// Camera distance as a multiple of the bounding-box diagonal [default: 2].
    #[arg(long)]
    pub radius_factor: Option<f64>,
    /// Directional light intensity [default: 2].
    #[arg(long)]
    pub light_intensity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderSettings {
    pub rig: RigConfig,
    pub light_intensity: f64,
}

impl RigArgs {
    /// Merges flags over an optional table with keys `views`, `n-lat`,
    /// `n-lon`, `fov`, `resolution`, `radius-factor`, `light-intensity`.
    pub fn resolve(&self, table: Option<toml::Table>) -> CliResult<RenderSettings> {
        let mut table = table.unwrap_or_default();
        let views = self.views.or(take(&mut table, "views", "render")?);
        let fov = self.fov.or(take(&mut table, "fov", "render")?);
        let light = self.light_intensity.or(take(&mut table, "light-intensity", "render")?);
        let lat_given = self.n_lat.is_some() || table.contains_key("n-lat");
        let lon_given = self.n_lon.is_some() || table.contains_key("n-lon");
        let mut rig: RigConfig = from_table(table, "render")?;
        if let Some(v) = self.n_lat {
            rig.n_lat = v;
        }
        if let Some(v) = self.n_lon {
            rig.n_lon = v;
        }
        if let Some(v) = fov {
            rig.fov_deg = v;
        }
        if let Some(v) = self.resolution {
            rig.resolution = v;
        }
        if let Some(v) = self.radius_factor {
            rig.radius_factor = v;
        }
        if let Some(v) = views {
            match (lat_given, lon_given) {
                (true, false) if rig.n_lat > 0 && v % rig.n_lat == 0 => rig.n_lon = v / rig.n_lat,
                (false, true) if rig.n_lon > 0 && v % rig.n_lon == 0 => rig.n_lat = v / rig.n_lon,
                (false, false) if rig.n_lat * rig.n_lon != v && v % rig.n_lat == 0 => rig.n_lon = v / rig.n_lat,
                _ => {}
            }
            if rig.n_lat * rig.n_lon != v {
                return Err(CliError::usage(
                    "invalid_grid",
                    format!("--views {v} does not equal n-lat {} × n-lon {}", rig.n_lat, rig.n_lon),
                ));
            }
        }
        if rig.n_lat == 0 || rig.n_lon == 0 {
            return Err(dentmesh::Error::InvalidGrid {
                n_lat: rig.n_lat,
                n_lon: rig.n_lon,
            }
            .into());
        }
        if !(rig.fov_deg > 0.0 && rig.fov_deg < 180.0) {
            return Err(CliError::usage("invalid_config", format!("fov {} must lie in (0, 180) degrees", rig.fov_deg)));
        }
        if rig.resolution == 0 || rig.resolution > 16384 {
            return Err(CliError::usage("invalid_config", format!("resolution {} must lie in 1..=16384", rig.resolution)));
        }
        if !(rig.radius_factor > 0.0 && rig.radius_factor.is_finite()) {
            return Err(CliError::usage("invalid_config", "radius factor must be positive"));
        }
        let light_intensity = light.unwrap_or(2.0);
        if !(light_intensity >= 0.0 && light_intensity.is_finite()) {
            return Err(CliError::usage("invalid_config", "light intensity must be a finite value >= 0"));
        }
        Ok(RenderSettings { rig, light_intensity })
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s.to_ascii_lowercase().as_str() {
        "x" => Ok(Axis::X),
        "y" => Ok(Axis::Y),
        "z" => Ok(Axis::Z),
        _ => Err(format!("unknown axis `{s}`")),
    }
}

fn parse_unit(s: &str) -> Result<RotationUnit, String> {
    match s {
        "radians" | "rad" => Ok(RotationUnit::Radians),
        "degrees" | "deg" => Ok(RotationUnit::Degrees),
        _ => Err("expected `radians` or `degrees`".into()),
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct AugmentArgs {
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Offset bound per axis as a fraction of the bounding-box extent [default: 0.1].
    #[arg(long)]
    pub translation_range: Option<f64>,
    /// Standard deviation of each rotation angle [default: 1].
    #[arg(long)]
    pub rotation_sigma: Option<f64>,
    /// Unit of the rotation sigma: radians or degrees [default: radians].
    #[arg(long, value_parser = parse_unit)]
    pub rotation_unit: Option<RotationUnit>,
    /// Comma-separated rotation axes [default: z].
    #[arg(long, value_delimiter = ',', value_parser = parse_axis)]
    pub axes: Option<Vec<Axis>>,
}

impl AugmentArgs {
    /// Merges flags over an optional table of augmentation keys; a table
    /// without `seed` takes `default_seed`.
    pub fn resolve(&self, table: Option<toml::Table>, default_seed: u64) -> CliResult<AugmentConfig> {
        let table = table.unwrap_or_default();
        let has_seed = table.contains_key("seed");
        let mut config: AugmentConfig = from_table(table, "augment")?;
        if !has_seed {
            config.seed = default_seed;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.translation_range {
            config.translation_range = v;
        }
        if let Some(v) = self.rotation_sigma {
            config.rotation_sigma = v;
        }
        if let Some(v) = self.rotation_unit {
            config.rotation_unit = v;
        }
        if let Some(v) = &self.axes {
            config.rotation_axes = v.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct FusionSettings {
    pub softmax: bool,
    pub depth_epsilon: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> toml::Table {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn flags_override_config() {
        let args = SimplifyArgs {
            target: Some(500),
            ..Default::default()
        };
        let (method, cfg) = args.resolve(Some(table("target = 100\nk-neg = 4.0"))).unwrap();
        assert_eq!(method, Method::Selective);
        assert_eq!(cfg.target, 500);
        assert_eq!(cfg.k_neg, 4.0);
    }

    #[test]
    fn qem_rejects_weights() {
        let args = SimplifyArgs {
            method: Some(Method::Qem),
            k_neg: Some(5.0),
            ..Default::default()
        };
        assert_eq!(args.resolve(None).unwrap_err().code, 2);
        let args = SimplifyArgs::default();
        assert!(args.resolve(Some(table("method = \"qem\"\nrefresh-interval = 3"))).is_err());
        assert!(args.resolve(Some(table("method = \"qem\"\ntarget = 3"))).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SimplifyArgs::default().resolve(Some(table("targett = 3"))).is_err());
        assert!(RigArgs::default().resolve(Some(table("lat = 3"))).is_err());
        assert!(AugmentArgs::default().resolve(Some(table("sigma = 3")), 0).is_err());
    }

    #[test]
    fn views_fill_the_grid() {
        let rig = |args: RigArgs| args.resolve(None).map(|s| (s.rig.n_lat, s.rig.n_lon));
        assert_eq!(rig(RigArgs::default()).unwrap(), (6, 16));
        assert_eq!(rig(RigArgs { n_lat: Some(1), n_lon: Some(4), ..Default::default() }).unwrap(), (1, 4));
        assert_eq!(rig(RigArgs { views: Some(12), ..Default::default() }).unwrap(), (6, 2));
        assert_eq!(rig(RigArgs { views: Some(8), n_lat: Some(2), ..Default::default() }).unwrap(), (2, 4));
        let bad = rig(RigArgs { views: Some(5), n_lat: Some(2), n_lon: Some(2), ..Default::default() }).unwrap_err();
        assert_eq!((bad.code, bad.kind.as_str()), (2, "invalid_grid"));
        assert_eq!(rig(RigArgs { n_lat: Some(0), ..Default::default() }).unwrap_err().kind, "invalid_grid");
    }

    #[test]
    fn augment_seed_defaults_to_global() {
        assert_eq!(AugmentArgs::default().resolve(None, 9).unwrap().seed, 9);
        assert_eq!(AugmentArgs::default().resolve(Some(table("seed = 3")), 9).unwrap().seed, 3);
        let args = AugmentArgs {
            seed: Some(4),
            ..Default::default()
        };
        assert_eq!(args.resolve(Some(table("seed = 3")), 9).unwrap().seed, 4);
    }
}

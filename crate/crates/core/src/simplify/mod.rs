//! Quadric error metric simplification and curvature-weighted selective
//! downsampling.
//!
//! Both entry points share one greedy engine: candidate pairs sit in a
//! lazy-deletion min-heap keyed on `(weighted cost, squared edge length, v1,
//! v2)`; per-vertex version counters mark heap entries stale once an
//! endpoint changes. Plain QEM weights every pair by 1. Selective downsampling multiplies each
//! pair's cost by `k_neg` when the mean of its endpoint curvatures is
//! negative and by `k_pos` otherwise, and recomputes curvature on the
//! partially simplified surface every `curvature_refresh_interval`
//! collapses.

mod engine;
mod quadric;

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureField;
use crate::{Error, Result, TriangleMesh};

pub use engine::SimplifyReport;
pub use quadric::{compute_quadrics, optimal_contraction_target, Quadric, SINGULAR_DET};

/// What the simplification target counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    #[default]
    Vertices,
    Triangles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct SimplifyConfig {
    pub target: usize,
    pub target_kind: TargetKind,
    pub k_neg: f64,
    pub k_pos: f64,
    /// Collapses between curvature recomputations; `None` means 10% of the
    /// initial vertex count.
    pub refresh_interval: Option<usize>,
    /// Also contract vertex pairs closer than `pair_distance` that share no
    /// edge. Such contractions go through the same manifold checks.
    pub allow_nonedge_pairs: bool,
    pub pair_distance: f64,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        SimplifyConfig {
            target: 16_000,
            target_kind: TargetKind::Vertices,
            k_neg: 10.0,
            k_pos: 1.0,
            refresh_interval: None,
            allow_nonedge_pairs: false,
            pair_distance: 0.0,
        }
    }
}

impl SimplifyConfig {
    pub fn with_target(target: usize) -> Self {
        SimplifyConfig {
            target,
            ..Self::default()
        }
    }

    /// Plain QEM: unit weights, no curvature refresh.
    pub fn qem(target: usize) -> Self {
        SimplifyConfig {
            target,
            k_neg: 1.0,
            k_pos: 1.0,
            ..Self::default()
        }
    }

    pub fn effective_refresh_interval(&self, initial_vertices: usize) -> usize {
        self.refresh_interval
            .unwrap_or_else(|| (initial_vertices / 10).max(1))
    }

    pub fn validate(&self, mesh: &TriangleMesh) -> Result<()> {
        let available = match self.target_kind {
            TargetKind::Vertices => mesh.vertex_count(),
            TargetKind::Triangles => mesh.triangle_count(),
        };
        if self.target > available {
            return Err(Error::InvalidConfig(format!(
                "target {} exceeds the input count {available}",
                self.target
            )));
        }
        if !(self.k_pos > 0.0) || !(self.k_neg >= self.k_pos) || !self.k_neg.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "weights must satisfy k_neg >= k_pos > 0 (got k_neg={}, k_pos={})",
                self.k_neg, self.k_pos
            )));
        }
        if self.refresh_interval == Some(0) {
            return Err(Error::InvalidConfig("refresh interval must be at least 1".into()));
        }
        if self.allow_nonedge_pairs && !(self.pair_distance > 0.0) {
            return Err(Error::InvalidConfig(
                "non-edge pairs need a positive pair distance".into(),
            ));
        }
        Ok(())
    }
}

/// Weight applied to a pair's cost from the mean curvature of its endpoints.
/// A mean of exactly zero takes the positive branch.
pub fn edge_collapse_coefficient(field: &CurvatureField, v1: usize, v2: usize, config: &SimplifyConfig) -> f64 {
    coefficient_for(field.get(v1), field.get(v2), config.k_neg, config.k_pos)
}

pub(crate) fn coefficient_for(h1: f64, h2: f64, k_neg: f64, k_pos: f64) -> f64 {
    if (h1 + h2) / 2.0 < 0.0 {
        k_neg
    } else {
        k_pos
    }
}

/// Garland-Heckbert simplification to `target` vertices.
pub fn qem_simplify(mesh: &TriangleMesh, target: usize) -> Result<TriangleMesh> {
    qem_simplify_with(mesh, &SimplifyConfig::qem(target)).map(|(m, _)| m)
}

/// QEM honoring `config`'s target kind and pair options; weights and the
/// refresh interval are ignored.
pub fn qem_simplify_with(mesh: &TriangleMesh, config: &SimplifyConfig) -> Result<(TriangleMesh, SimplifyReport)> {
    let config = SimplifyConfig {
        k_neg: 1.0,
        k_pos: 1.0,
        ..config.clone()
    };
    config.validate(mesh)?;
    engine::run(mesh, &config, false)
}

/// Curvature-weighted simplification.
pub fn selective_downsample(mesh: &TriangleMesh, config: &SimplifyConfig) -> Result<TriangleMesh> {
    selective_downsample_with_report(mesh, config).map(|(m, _)| m)
}

pub fn selective_downsample_with_report(
    mesh: &TriangleMesh,
    config: &SimplifyConfig,
) -> Result<(TriangleMesh, SimplifyReport)> {
    config.validate(mesh)?;
    engine::run(mesh, config, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimplifyConfig {
        SimplifyConfig::default()
    }

    #[test]
    fn coefficient_examples() {
        let field = CurvatureField::from_values(vec![-0.4, -0.2, 0.3, 0.3, 0.5, -0.5]);
        assert_eq!(edge_collapse_coefficient(&field, 0, 1, &cfg()), 10.0);
        assert_eq!(edge_collapse_coefficient(&field, 2, 3, &cfg()), 1.0);
        assert_eq!(edge_collapse_coefficient(&field, 4, 5, &cfg()), 1.0);
    }

    #[test]
    fn config_validation() {
        let m = crate::synth::grid(4, 4, 1.0);
        assert!(SimplifyConfig::with_target(20).validate(&m).is_err());
        assert!(SimplifyConfig::with_target(8).validate(&m).is_ok());
        let bad = SimplifyConfig { k_neg: 0.5, ..SimplifyConfig::with_target(8) };
        assert!(bad.validate(&m).is_err());
        let bad = SimplifyConfig { refresh_interval: Some(0), ..SimplifyConfig::with_target(8) };
        assert!(bad.validate(&m).is_err());
    }

    #[test]
    fn default_refresh_is_ten_percent() {
        assert_eq!(cfg().effective_refresh_interval(50_000), 5_000);
        assert_eq!(cfg().effective_refresh_interval(5), 1);
    }

    #[test]
    fn config_keys_are_kebab_case() {
        let c: SimplifyConfig = toml_like(r#"{"target": 10, "k-neg": 5.0, "refresh-interval": 3}"#);
        assert_eq!(c.target, 10);
        assert_eq!(c.k_neg, 5.0);
        assert_eq!(c.refresh_interval, Some(3));
        assert!(serde_json::from_str::<SimplifyConfig>(r#"{"bogus": 1}"#).is_err());
    }

    fn toml_like(s: &str) -> SimplifyConfig {
        serde_json::from_str(s).unwrap()
    }
}

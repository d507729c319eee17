//! Run configuration: a versioned TOML schema with strict key checking.
//!
//! ```toml
//! version = 1
//!
//! [geometry]
//! kind = "planar"
//! components = [
//!     { shape = "circle", center = [-2.0, 0.0], radius = 1.0 },
//!     { shape = "circle", center = [2.0, 0.0], radius = 1.0 },
//! ]
//!
//! [physics]
//! bc = "dirichlet"
//!
//! [kappa]
//! min = 0.5
//! max = 8.0
//! count = 32
//!
//! [mesh]
//! resolutions = [64]
//! ```

use crate::error::CliError;
use reltrace::geometry::{Configuration, Curve};
use reltrace::layer_ops::TransmissionParams;
use reltrace::xi::BoundaryCondition;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub physics: PhysicsSpec,
    #[serde(default)]
    pub kappa: KappaGrid,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub energy: EnergySpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Seed for the randomized checks of `verify`.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Planar { components: Vec<ComponentSpec> },
    PointPlates { gap: f64 },
    Slabs { gap: f64, thickness: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComponentSpec {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    /// `r(t) = r0 (1 + Σ_k cos_k cos(kt) + sin_k sin(kt))`, `k ≥ 1`.
    Star {
        center: [f64; 2],
        r0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    #[default]
    Dirichlet,
    Neumann,
    Transmission,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    #[serde(default)]
    pub bc: BcKind,
    #[serde(default)]
    pub mass: f64,
    #[serde(default = "half")]
    pub s: f64,
    pub media: Option<MediaSpec>,
}

fn half() -> f64 {
    0.5
}

impl Default for PhysicsSpec {
    fn default() -> Self {
        PhysicsSpec {
            bc: BcKind::Dirichlet,
            mass: 0.0,
            s: 0.5,
            media: None,
        }
    }
}

/// Transmission media; `nu0`, `nu1` default to the dielectric choice
/// `ν₀ = 1`, `ν₁ = (κ₋/κ₊)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaSpec {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub nu0: Option<f64>,
    pub nu1: Option<f64>,
}

impl MediaSpec {
    pub fn params(&self) -> TransmissionParams {
        let d = TransmissionParams::dielectric(self.kappa_plus, self.kappa_minus);
        TransmissionParams {
            nu0: self.nu0.unwrap_or(d.nu0),
            nu1: self.nu1.unwrap_or(d.nu1),
            ..d
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaGrid {
    #[serde(default = "default_kmin")]
    pub min: f64,
    #[serde(default = "default_kmax")]
    pub max: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// Explicit samples; replaces `min`/`max`/`count` when present.
    pub values: Option<Vec<f64>>,
    /// Transverse momentum `|ξ|` for slab Ξ curves.
    #[serde(default)]
    pub transverse: f64,
}

fn default_kmin() -> f64 {
    0.1
}
fn default_kmax() -> f64 {
    8.0
}
fn default_count() -> usize {
    32
}

impl Default for KappaGrid {
    fn default() -> Self {
        KappaGrid {
            min: 0.1,
            max: 8.0,
            count: 32,
            spacing: Spacing::Linear,
            values: None,
            transverse: 0.0,
        }
    }
}

impl KappaGrid {
    /// Samples in ascending order.
    pub fn samples(&self) -> Result<Vec<f64>, CliError> {
        let mut v = match &self.values {
            Some(v) => v.clone(),
            None => {
                if self.count == 0 {
                    return Err(CliError::Usage("the kappa grid is empty".into()));
                }
                if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
                    return Err(CliError::Config(format!(
                        "kappa grid needs 0 < min <= max, got [{}, {}]",
                        self.min, self.max
                    )));
                }
                let n = self.count;
                (0..n)
                    .map(|i| {
                        let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        match self.spacing {
                            Spacing::Linear => self.min + t * (self.max - self.min),
                            Spacing::Log => (self.min.ln() + t * (self.max / self.min).ln()).exp(),
                        }
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(CliError::Usage("the kappa grid is empty".into()));
        }
        if let Some(bad) = v.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(CliError::Config(format!("kappa samples must be positive, got {bad}")));
        }
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Nodes per component; each entry yields its own Ξ curve.
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
}

fn default_resolutions() -> Vec<usize> {
    vec![64]
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            resolutions: default_resolutions(),
        }
    }
}

/// Overrides of the trace-formula integration; unset fields keep the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    pub kappa_min: Option<f64>,
    pub kappa_max: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    /// Mesh for energies; defaults to the finest entry of `mesh.resolutions`.
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir() }
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        match &self.geometry {
            GeometrySpec::Planar { components } => {
                if components.is_empty() {
                    return Err(CliError::Config("planar geometry has no components".into()));
                }
                self.configuration()?;
                if self.mesh.resolutions.is_empty() {
                    return Err(CliError::Config("mesh.resolutions is empty".into()));
                }
                if let Some(n) = self.mesh.resolutions.iter().find(|&&n| n < 8) {
                    return Err(CliError::Config(format!("mesh resolution {n} is below 8")));
                }
            }
            GeometrySpec::PointPlates { gap } => positive("geometry.gap", *gap)?,
            GeometrySpec::Slabs { gap, thickness } => {
                positive("geometry.gap", *gap)?;
                positive("geometry.thickness", *thickness)?;
                if self.physics.bc != BcKind::Transmission {
                    return Err(CliError::Config("slabs require bc = \"transmission\"".into()));
                }
            }
        }
        if !(self.physics.mass.is_finite() && self.physics.mass >= 0.0) {
            return Err(CliError::Config(format!(
                "mass must be >= 0, got {}",
                self.physics.mass
            )));
        }
        if !(self.physics.s > 0.0 && self.physics.s < 1.0) {
            return Err(CliError::Config(format!(
                "s must lie in (0, 1), got {}",
                self.physics.s
            )));
        }
        match (self.physics.bc, &self.physics.media) {
            (BcKind::Transmission, None) => {
                return Err(CliError::Config("bc = \"transmission\" needs [physics.media]".into()))
            }
            (BcKind::Transmission, Some(m)) => {
                m.params().validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
            (_, Some(_)) => {
                return Err(CliError::Config(
                    "[physics.media] is only used with transmission".into(),
                ))
            }
            _ => {}
        }
        if !(self.kappa.transverse.is_finite() && self.kappa.transverse >= 0.0) {
            return Err(CliError::Config("kappa.transverse must be >= 0".into()));
        }
        Ok(())
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        match self.physics.bc {
            BcKind::Dirichlet => BoundaryCondition::Dirichlet,
            BcKind::Neumann => BoundaryCondition::Neumann,
            BcKind::Transmission => BoundaryCondition::Transmission(self.physics.media.expect("validated").params()),
        }
    }

    /// The planar configuration; an error for 1D geometries.
    pub fn configuration(&self) -> Result<Configuration, CliError> {
        let GeometrySpec::Planar { components } = &self.geometry else {
            return Err(CliError::Config("geometry is not planar".into()));
        };
        let curves = components
            .iter()
            .map(|c| match c {
                ComponentSpec::Circle { center, radius } => Curve::circle(*center, *radius),
                ComponentSpec::Star { center, r0, cos, sin } => Curve::star(*center, *r0, cos.clone(), sin.clone()),
                ComponentSpec::Polygon { vertices } => Curve::polygon(vertices.clone()),
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let cfg = Configuration::new(curves).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.components.len() > 1 {
            cfg.min_separation().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, so formatting and comments in
    /// the TOML source do not change it.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

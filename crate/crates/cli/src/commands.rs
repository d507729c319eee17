//! `xi`, `energy` and `plates` subcommands.

use crate::config::{BcKind, GeometrySpec, RunConfig};
use crate::error::CliError;
use reltrace::geometry::discretize;
use reltrace::layer_ops::TransmissionParams;
use reltrace::plates1d::{
    casimir_per_area_slabs, energy_point_plates, xi_point_plates, xi_slabs, PlateBc, ReducedSpectralPoint, SlabConfig,
    SlabXi,
};
use reltrace::trace_formula::{default_kappa_min, trace_rs, EnergyResult, TraceOptions};
use reltrace::xi::{BoundaryCondition, XiCurve, XiSolver};
use serde::Serialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Command-line overrides shared by the subcommands.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub kappa_min: Option<f64>,
    pub kappa_max: Option<f64>,
    pub tol: Option<f64>,
}

impl Overrides {
    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiRunReport {
    pub config_hash: String,
    pub bc: String,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn bc_name(cfg: &RunConfig) -> &'static str {
    cfg.boundary_condition().name()
}

fn plate_bc(cfg: &RunConfig) -> Result<PlateBc, CliError> {
    match cfg.physics.bc {
        BcKind::Dirichlet => Ok(PlateBc::Dirichlet),
        BcKind::Neumann => Ok(PlateBc::Neumann),
        BcKind::Transmission => Err(CliError::Config("point plates take dirichlet or neumann".into())),
    }
}

fn kappa_samples(cfg: &RunConfig, ov: &Overrides) -> Result<Vec<f64>, CliError> {
    let mut grid = cfg.kappa.clone();
    if ov.kappa_min.is_some() || ov.kappa_max.is_some() {
        if let Some(values) = grid.values.as_mut() {
            let (lo, hi) = (ov.kappa_min.unwrap_or(0.0), ov.kappa_max.unwrap_or(f64::INFINITY));
            values.retain(|k| *k >= lo && *k <= hi);
        } else {
            grid.min = ov.kappa_min.unwrap_or(grid.min);
            grid.max = ov.kappa_max.unwrap_or(grid.max);
        }
    }
    grid.samples()
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Ξ curves, one CSV per mesh resolution, named `xi_{bc}_n{n}.csv`.
///
/// Point plates use the exact 2×2 operators (`n2`), slabs the four faces (`n4`).
pub fn cmd_xi(cfg: &RunConfig, ov: &Overrides) -> Result<XiRunReport, CliError> {
    let kappas = kappa_samples(cfg, ov)?;
    let bc = cfg.boundary_condition();
    let hash = cfg.hash();
    let dir = ov.out_dir(cfg);
    let mut curves: Vec<(usize, XiCurve)> = Vec::new();
    match &cfg.geometry {
        GeometrySpec::Planar { .. } => {
            let conf = cfg.configuration()?;
            for &n in &cfg.mesh.resolutions {
                let mesh = discretize(&conf, &vec![n; conf.components.len()])?;
                let mut curve = XiSolver::new(&mesh, bc).curve(&kappas)?;
                curve.config_hash = Some(hash.clone());
                curves.push((n, curve));
            }
        }
        GeometrySpec::PointPlates { gap } => {
            let pbc = plate_bc(cfg)?;
            let samples = kappas
                .iter()
                .map(|&k| Ok((k, xi_point_plates(k, *gap, pbc)?)))
                .collect::<Result<Vec<_>, reltrace::Error>>()?;
            curves.push((
                2,
                XiCurve {
                    bc,
                    samples,
                    resolution: vec![1, 1],
                    config_hash: Some(hash.clone()),
                    warnings: vec![],
                },
            ));
        }
        GeometrySpec::Slabs { gap, thickness } => {
            let BoundaryCondition::Transmission(media) = bc else {
                unreachable!("validated")
            };
            let slab = SlabConfig::new(*gap, *thickness, media)?;
            let samples = kappas
                .iter()
                .map(|&k| {
                    Ok((
                        k,
                        xi_slabs(&ReducedSpectralPoint::new(k, cfg.kappa.transverse)?, &slab)?,
                    ))
                })
                .collect::<Result<Vec<_>, reltrace::Error>>()?;
            curves.push((
                4,
                XiCurve {
                    bc,
                    samples,
                    resolution: vec![2, 2],
                    config_hash: Some(hash.clone()),
                    warnings: vec![],
                },
            ));
        }
    }
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for (n, curve) in &curves {
        let path = dir.join(format!("xi_{}_n{n}.csv", bc.name()));
        write_file(&path, &curve.to_csv())?;
        files.push(path);
        warnings.extend(curve.warnings.iter().cloned());
    }
    let report = XiRunReport {
        config_hash: hash,
        bc: bc.name().into(),
        files,
        warnings,
    };
    write_file(
        &dir.join(format!("xi_{}_manifest.json", bc.name())),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyJson {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub kappa_max: f64,
    pub n_evaluations: usize,
    pub warnings: Vec<String>,
}

impl From<EnergyResult> for EnergyJson {
    fn from(r: EnergyResult) -> Self {
        EnergyJson {
            value: r.value,
            abs_error_estimate: r.abs_error_estimate,
            kappa_max: r.kappa_max,
            n_evaluations: r.n_evaluations,
            warnings: r.warnings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub config_hash: String,
    pub geometry: &'static str,
    pub bc: String,
    pub mass: f64,
    pub s: f64,
    /// `½ tr R_s`; the Casimir energy at `s = ½`.
    pub energy: EnergyJson,
    /// Per unit area of the plates in ℝ³ (point plates only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_area: Option<EnergyJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

fn trace_options(cfg: &RunConfig, ov: &Overrides, kappa_min: f64) -> TraceOptions {
    let d = TraceOptions::default();
    TraceOptions {
        kappa_min: ov.kappa_min.or(cfg.energy.kappa_min).unwrap_or(kappa_min),
        kappa_max: ov.kappa_max.or(cfg.energy.kappa_max).unwrap_or(d.kappa_max),
        rel_tol: ov.tol.or(cfg.energy.rel_tol).unwrap_or(d.rel_tol),
        abs_tol: cfg.energy.abs_tol.unwrap_or(d.abs_tol),
        ..d
    }
}

fn halved(r: EnergyResult) -> EnergyJson {
    EnergyJson {
        value: 0.5 * r.value,
        abs_error_estimate: 0.5 * r.abs_error_estimate,
        ..r.into()
    }
}

pub fn cmd_energy(cfg: &RunConfig, ov: &Overrides) -> Result<EnergyReport, CliError> {
    let bc = cfg.boundary_condition();
    let (m, s) = (cfg.physics.mass, cfg.physics.s);
    let mut report = EnergyReport {
        config_hash: cfg.hash(),
        geometry: "",
        bc: bc.name().into(),
        mass: m,
        s,
        energy: EnergyJson {
            value: 0.0,
            abs_error_estimate: 0.0,
            kappa_max: 0.0,
            n_evaluations: 0,
            warnings: vec![],
        },
        per_area: None,
        resolution: None,
    };
    match &cfg.geometry {
        GeometrySpec::Planar { .. } => {
            let conf = cfg.configuration()?;
            let n = cfg
                .energy
                .resolution
                .unwrap_or_else(|| *cfg.mesh.resolutions.iter().max().expect("validated"));
            let mesh = discretize(&conf, &vec![n; conf.components.len()])?;
            let solver = XiSolver::new(&mesh, bc);
            let mut opts = trace_options(cfg, ov, default_kappa_min(&bc));
            if conf.components.len() > 1 {
                opts.min_decay_rate = 0.5 * conf.min_separation()?;
            }
            report.geometry = "planar";
            report.resolution = Some(n);
            report.energy = halved(trace_rs(|k| solver.xi(k), s, m, &opts)?);
        }
        GeometrySpec::PointPlates { gap } => {
            plate_bc(cfg)?;
            let e = energy_point_plates(*gap, m, s, &trace_options(cfg, ov, 0.0))?;
            report.geometry = "point_plates";
            report.energy = e.line.into();
            report.per_area = Some(e.per_area.into());
        }
        GeometrySpec::Slabs { gap, thickness } => {
            if m != 0.0 || s != 0.5 {
                return Err(CliError::Config(
                    "slab energies are available for s = 0.5 and mass = 0".into(),
                ));
            }
            let BoundaryCondition::Transmission(media) = bc else {
                unreachable!("validated")
            };
            let slab = SlabConfig::new(*gap, *thickness, media)?;
            report.geometry = "slabs";
            report.energy = casimir_per_area_slabs(&slab, SlabXi::Finite, &trace_options(cfg, ov, 0.0))?.into();
        }
    }
    let dir = ov.out_dir(cfg);
    write_file(
        &dir.join(format!("energy_{}.json", bc_name(cfg))),
        &serde_json::to_string_pretty(&report).unwrap(),
    )?;
    Ok(report)
}

/// Arguments of the `plates` subcommand.
#[derive(Clone, Debug, PartialEq)]
pub struct PlatesArgs {
    pub gap: f64,
    pub mass: f64,
    /// Slab thickness; enables the dielectric slab energies.
    pub thickness: Option<f64>,
    /// `κ₋/κ₊` of the slabs.
    pub contrast: f64,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabReport {
    pub thickness: f64,
    pub contrast: f64,
    pub per_area: EnergyJson,
    pub lifshitz_per_area: EnergyJson,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlatesReport {
    pub gap: f64,
    pub mass: f64,
    pub line: EnergyJson,
    pub per_area: EnergyJson,
    /// Closed forms `-π/(24a)` and `-π²/(1440a³)`, massless case only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_area_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slabs: Option<SlabReport>,
}

pub fn cmd_plates(args: &PlatesArgs) -> Result<PlatesReport, CliError> {
    let opts = TraceOptions {
        rel_tol: args.tol.unwrap_or(TraceOptions::default().rel_tol),
        ..Default::default()
    };
    let e = energy_point_plates(args.gap, args.mass, 0.5, &opts)?;
    let massless = args.mass == 0.0;
    let slabs = match args.thickness {
        None => None,
        Some(t) => {
            if !massless {
                return Err(CliError::Usage("slab energies are available for mass = 0 only".into()));
            }
            let media = TransmissionParams::dielectric(1.0, args.contrast);
            let cfg = SlabConfig::new(args.gap, t, media)?;
            Some(SlabReport {
                thickness: t,
                contrast: args.contrast,
                per_area: casimir_per_area_slabs(&cfg, SlabXi::Finite, &opts)?.into(),
                lifshitz_per_area: casimir_per_area_slabs(&cfg, SlabXi::Lifshitz, &opts)?.into(),
            })
        }
    };
    Ok(PlatesReport {
        gap: args.gap,
        mass: args.mass,
        line: e.line.into(),
        per_area: e.per_area.into(),
        line_exact: massless.then(|| -PI / (24.0 * args.gap)),
        per_area_exact: massless.then(|| -PI * PI / (1440.0 * args.gap.powi(3))),
        slabs,
    })
}

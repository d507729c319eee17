//! Verification suites behind `reltrace verify`.

use crate::error::CliError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reltrace::geometry::{discretize, BoundaryMesh, Configuration, Curve, Vec2};
use reltrace::layer_ops::{
    assemble_layers, identity_residuals_from, jump_residuals, IdentityResiduals, TransmissionParams,
};
use reltrace::multipole_oracle::{discs_from_configuration, xi_discs_at_order};
use reltrace::plates1d::{
    cauchy_oracle_slabs, energy_point_plates, relative_resolvent_trace_closed_form,
    relative_resolvent_trace_integrated, xi_lifshitz, xi_point_plates, xi_point_plates_derivative,
    xi_point_plates_from_operators, xi_slabs, PlateBc, ReducedSpectralPoint, SlabConfig,
};
use reltrace::specfun::Kappa;
use reltrace::trace_formula::{default_kappa_min, energy_from_xi, TraceOptions};
use reltrace::xi::{BoundaryCondition, XiSolver};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

/// Deliberate defects, used to check that the suites can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    FlipHypersingularSign,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub level: Level,
    pub seed: u64,
    pub mutation: Option<Mutation>,
}

impl VerifyOptions {
    pub fn new(level: Level) -> Self {
        VerifyOptions {
            level,
            seed: 0,
            mutation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// Worst measured quantity and the bound it is held to.
    pub measured: f64,
    pub tolerance: f64,
    pub details: Vec<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
    pub tables: Vec<ConvergenceTable>,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let tag = if s.passed { "PASS" } else { "FAIL" };
            writeln!(
                out,
                "{tag}  {:<24} {:>10.3e} (bound {:.0e})  {:.2} s",
                s.name, s.measured, s.tolerance, s.seconds
            )
            .unwrap();
            for d in &s.details {
                writeln!(out, "      {d}").unwrap();
            }
        }
        for t in &self.tables {
            writeln!(out, "\n{}", t.title).unwrap();
            writeln!(
                out,
                "{}",
                t.columns.iter().map(|c| format!("{c:>14}")).collect::<String>()
            )
            .unwrap();
            for r in &t.rows {
                writeln!(out, "{}", r.iter().map(|v| format!("{v:>14.4e}")).collect::<String>()).unwrap();
            }
        }
        let failed = self.suites.iter().filter(|s| !s.passed).count();
        writeln!(out, "\n{} suites, {failed} failed", self.suites.len()).unwrap();
        out
    }

    pub fn failures(&self) -> Vec<&str> {
        self.suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| s.name.as_str())
            .collect()
    }
}

/// Two unit discs with centers `(±2, 0)`, gap 2.
pub fn disc_pair() -> Configuration {
    Configuration::new(vec![
        Curve::circle([-2.0, 0.0], 1.0).unwrap(),
        Curve::circle([2.0, 0.0], 1.0).unwrap(),
    ])
    .expect("valid discs")
}

fn kite_pair() -> Configuration {
    Configuration::new(vec![
        Curve::star([-1.6, 0.1], 1.0, vec![0.0, 0.2, 0.05], vec![0.1, 0.0, -0.03]).unwrap(),
        Curve::circle([1.8, 0.0], 0.9).unwrap(),
    ])
    .expect("valid kite pair")
}

/// Interior charges and exterior probes for the disc pair.
pub const DISC_SOURCES: [Vec2; 2] = [[-2.1, 0.2], [1.8, -0.3]];
pub const DISC_PROBES: [Vec2; 4] = [[0.0, 0.4], [0.0, 3.0], [-5.0, 1.0], [3.5, -2.5]];

pub const IDENTITY_KAPPAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const IDENTITY_TOL: f64 = 1e-8;
/// Residuals below this at both resolutions count as converged.
pub const ROUNDING_FLOOR: f64 = 1e-13;

/// Identity residuals on the disc pair, optionally with a mutated `N`.
pub fn disc_identity_residuals(
    n: usize,
    kappa: f64,
    mutation: Option<Mutation>,
) -> Result<IdentityResiduals, CliError> {
    let mesh = discretize(&disc_pair(), &[n, n])?;
    let mut ops = assemble_layers(&mesh, Kappa::new(kappa)?, true)?;
    if mutation == Some(Mutation::FlipHypersingularSign) {
        ops.n.as_mut().expect("assembled").matrix *= -1.0;
    }
    Ok(identity_residuals_from(&mesh, &ops, &DISC_SOURCES, &DISC_PROBES)?)
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }
    fn done(&self, name: &str, measured: f64, tolerance: f64, passed: bool, details: Vec<String>) -> SuiteResult {
        SuiteResult {
            name: name.into(),
            passed: passed && measured.is_finite(),
            measured,
            tolerance,
            details,
            seconds: self.0.elapsed().as_secs_f64(),
        }
    }
}

/// The identity residual `pick` holds at n = 64 and shrinks tenfold from n = 32.
pub fn converging(coarse: f64, fine: f64) -> bool {
    fine <= IDENTITY_TOL && (coarse >= 10.0 * fine || (coarse < ROUNDING_FLOOR && fine < ROUNDING_FLOOR))
}

fn identity_suites(opts: &VerifyOptions) -> Result<Vec<SuiteResult>, CliError> {
    let t = Timer::start();
    let mut pairs = Vec::new();
    for &k in &IDENTITY_KAPPAS {
        pairs.push((
            k,
            disc_identity_residuals(32, k, opts.mutation)?,
            disc_identity_residuals(64, k, opts.mutation)?,
        ));
    }
    type Pick = fn(&IdentityResiduals) -> f64;
    let groups: [(&str, &[(&str, Pick)]); 5] = [
        ("multitrace square", &[("A^2 - 1/4", |r| r.multitrace_square)]),
        (
            "calderon idempotence",
            &[
                ("(P+)^2 - P+", |r| r.projector_plus),
                ("(P-)^2 - P-", |r| r.projector_minus),
                ("P+ P-", |r| r.projector_product),
            ],
        ),
        (
            "sn factorization",
            &[
                ("SN - (D^2 - 1/4)", |r| r.sn_factorization),
                ("NS + (1/2 + D')(1/2 - D')", |r| r.ns_factorization),
                ("N + (1/2 - D')Q-", |r| r.n_dtn_factorization),
            ],
        ),
        ("dtn sum rule", &[("S(Q- + Q+) - 1", |r| r.dtn_sum_rule)]),
        ("third green", &[("point-source reconstruction", |r| r.third_green)]),
    ];
    let elapsed = t.0.elapsed().as_secs_f64() / groups.len() as f64;
    Ok(groups
        .iter()
        .map(|(name, picks)| {
            let mut worst = 0.0f64;
            let mut ok = true;
            let mut details = Vec::new();
            for (label, pick) in picks.iter() {
                for (k, coarse, fine) in &pairs {
                    let (c, f) = (pick(coarse), pick(fine));
                    worst = worst.max(f);
                    ok &= converging(c, f);
                    details.push(format!("{label} at kappa {k}: n=32 {c:.2e}, n=64 {f:.2e}"));
                }
            }
            SuiteResult {
                name: name.to_string(),
                passed: ok,
                measured: worst,
                tolerance: IDENTITY_TOL,
                details,
                seconds: elapsed,
            }
        })
        .collect())
}

fn jump_suite(opts: &VerifyOptions) -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let mesh = discretize(&kite_pair(), &[64, 64])?;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for &k in &IDENTITY_KAPPAS {
        let mut ops = assemble_layers(&mesh, Kappa::new(k)?, true)?;
        if opts.mutation == Some(Mutation::FlipHypersingularSign) {
            ops.n.as_mut().unwrap().matrix *= -1.0;
        }
        let r = jump_residuals(&mesh, &ops, &[[1.0, 0.0], [0.6, -0.8]], &[[-1.6, 0.1], [1.8, 0.2]])?;
        worst = worst.max(r.interior).max(r.exterior);
        details.push(format!(
            "kappa {k}: interior {:.2e}, exterior {:.2e}",
            r.interior, r.exterior
        ));
    }
    Ok(t.done("jump relations", worst, IDENTITY_TOL, worst <= IDENTITY_TOL, details))
}

pub const JACOBI_TOL: f64 = 1e-6;

/// `|dΞ/dκ - central difference|` for all three conditions on the disc pair.
pub fn jacobi_discrepancies(n: usize, kappa: f64) -> Result<Vec<(&'static str, f64)>, CliError> {
    let mesh = discretize(&disc_pair(), &[n, n])?;
    let h = 1e-3;
    let mut out = Vec::new();
    for bc in [
        BoundaryCondition::Dirichlet,
        BoundaryCondition::Neumann,
        BoundaryCondition::Transmission(TransmissionParams::dielectric(1.0, 2.0)),
    ] {
        let solver = XiSolver::new(&mesh, bc);
        let jac = solver.derivative(kappa)?;
        // fourth-order central difference
        let f = |d: f64| solver.xi(kappa + d);
        let fd = (8.0 * (f(h)? - f(-h)?) - (f(2.0 * h)? - f(-2.0 * h)?)) / (12.0 * h);
        out.push((bc.name(), (jac - fd).abs()));
    }
    Ok(out)
}

fn jacobi_suite() -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for (name, d) in jacobi_discrepancies(64, 1.0)? {
        worst = worst.max(d);
        details.push(format!("{name}: |jacobi - central difference| = {d:.2e}"));
    }
    for &(k, a) in &[(0.5, 1.0), (1.0, 1.0), (2.0, 0.5)] {
        let integrated = relative_resolvent_trace_integrated(k, a)?;
        let jac = xi_point_plates_derivative(k, a, PlateBc::Neumann)? / (2.0 * k);
        let d = (integrated - jac).abs();
        worst = worst.max(d);
        details.push(format!("1D resolvent trace at kappa {k}, a {a}: {d:.2e}"));
    }
    Ok(t.done("jacobi derivative", worst, JACOBI_TOL, worst <= JACOBI_TOL, details))
}

/// The slab grid: 5 × 5 × 3 points over `t`, `ξ` and the contrast.
pub fn slab_grid() -> Vec<(ReducedSpectralPoint, SlabConfig)> {
    let mut out = Vec::new();
    for &t in &[0.1, 0.5, 1.0, 3.0, 10.0] {
        for &xi in &[0.0, 1.0, 2.0, 3.5, 5.0] {
            for &c in &[0.5, 2.0, 10.0] {
                let cfg = SlabConfig::new(0.8, 0.6, TransmissionParams::dielectric(1.0, c)).unwrap();
                out.push((ReducedSpectralPoint::new(t, xi).unwrap(), cfg));
            }
        }
    }
    out
}

pub const SLAB_ORACLE_TOL: f64 = 1e-10;
pub const LIFSHITZ_TOL: f64 = 1e-6;

/// Worst `|formula - oracle|` on the grid and worst Lifshitz gap for `aη₋ = 20`.
pub fn slab_discrepancies() -> Result<(f64, f64, usize), CliError> {
    let grid = slab_grid();
    let mut oracle = 0.0f64;
    let mut lifshitz = 0.0f64;
    for (p, cfg) in &grid {
        oracle = oracle.max((xi_slabs(p, cfg)? - cauchy_oracle_slabs(p, cfg)?).abs());
        let (_, em) = p.etas(&cfg.media);
        let thick = SlabConfig::new(cfg.d, 20.0 / em, cfg.media)?;
        lifshitz = lifshitz.max((xi_slabs(p, &thick)? - xi_lifshitz(p, cfg.d, &cfg.media)?).abs());
    }
    Ok((oracle, lifshitz, grid.len()))
}

fn slab_suite() -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let (oracle, lifshitz, count) = slab_discrepancies()?;
    let details = vec![
        format!("closed form vs Cauchy-data oracle on {count} points: {oracle:.2e}"),
        format!("thick-slab limit: {lifshitz:.2e} (bound {LIFSHITZ_TOL:.0e})"),
    ];
    Ok(t.done(
        "slab oracle",
        oracle,
        SLAB_ORACLE_TOL,
        oracle <= SLAB_ORACLE_TOL && lifshitz <= LIFSHITZ_TOL,
        details,
    ))
}

pub const MULTIPOLE_TOL: f64 = 1e-6;

/// `|Ξ_BEM - Ξ_multipole|` on the disc pair for Dirichlet and Neumann.
pub fn multipole_discrepancies(n: usize, l: usize, kappas: &[f64]) -> Result<Vec<(&'static str, f64, f64)>, CliError> {
    let cfg = disc_pair();
    let mesh = discretize(&cfg, &[n, n])?;
    let discs = discs_from_configuration(&cfg)?;
    let mut out = Vec::new();
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let solver = XiSolver::new(&mesh, bc);
        for &k in kappas {
            out.push((
                bc.name(),
                k,
                (solver.xi(k)? - xi_discs_at_order(k, &discs, &bc, l)?).abs(),
            ));
        }
    }
    Ok(out)
}

fn multipole_suite() -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for (name, k, d) in multipole_discrepancies(64, 24, &IDENTITY_KAPPAS)? {
        worst = worst.max(d);
        details.push(format!("{name} at kappa {k}: {d:.2e}"));
    }
    Ok(t.done(
        "multipole oracle",
        worst,
        MULTIPOLE_TOL,
        worst <= MULTIPOLE_TOL,
        details,
    ))
}

fn point_plate_suite() -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for bc in [PlateBc::Dirichlet, PlateBc::Neumann] {
        for &(k, a) in &[(0.1, 1.0), (1.0, 1.0), (3.0, 0.5)] {
            let d = (xi_point_plates(k, a, bc)? - xi_point_plates_from_operators(k, a, bc)?).abs();
            worst = worst.max(d);
        }
    }
    details.push(format!("closed-form Xi vs operator determinant: {worst:.2e}"));
    for a in [0.5, 1.0, 2.0] {
        let e = energy_point_plates(a, 0.0, 0.5, &TraceOptions::default())?;
        let line = (e.line.value / (-PI / (24.0 * a)) - 1.0).abs();
        let area = (e.per_area.value / (-PI * PI / (1440.0 * a.powi(3))) - 1.0).abs();
        details.push(format!("gap {a}: line energy rel {line:.2e}, per-area rel {area:.2e}"));
        worst = worst.max(line * 1e-2).max(area * 1e-2);
    }
    let k = 0.7;
    let d = (relative_resolvent_trace_closed_form(k, 1.0)? - relative_resolvent_trace_integrated(k, 1.0)?).abs();
    worst = worst.max(d);
    Ok(t.done("point plates", worst, 1e-8, worst <= 1e-8, details))
}

fn refinement_table() -> Result<(SuiteResult, ConvergenceTable), CliError> {
    let t = Timer::start();
    let cfg = disc_pair();
    let discs = discs_from_configuration(&cfg)?;
    let mut rows = Vec::new();
    let k = 1.0;
    let exact_d = xi_discs_at_order(k, &discs, &BoundaryCondition::Dirichlet, 32)?;
    let exact_n = xi_discs_at_order(k, &discs, &BoundaryCondition::Neumann, 32)?;
    let kite = kite_pair();
    let mut prev_kite: Option<f64> = None;
    for n in [16usize, 32, 64, 128, 256] {
        let mesh = discretize(&cfg, &[n, n])?;
        let ed = (XiSolver::new(&mesh, BoundaryCondition::Dirichlet).xi(k)? - exact_d).abs();
        let en = (XiSolver::new(&mesh, BoundaryCondition::Neumann).xi(k)? - exact_n).abs();
        let id = disc_identity_residuals(n, k, None)?.max();
        let kmesh = discretize(&kite, &[n, n])?;
        let xk = XiSolver::new(&kmesh, BoundaryCondition::Dirichlet).xi(k)?;
        let dk = prev_kite.map_or(f64::NAN, |p| (xk - p).abs());
        prev_kite = Some(xk);
        rows.push(vec![n as f64, ed, en, id, dk]);
    }
    let last = rows.last().unwrap();
    let worst = last[1].max(last[2]);
    let table = ConvergenceTable {
        title: "mesh refinement at kappa = 1 (disc pair vs multipole; kite pair successive differences)".into(),
        columns: ["n", "|dXi_D|", "|dXi_N|", "max identity", "kite |dXi_D|"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
    };
    Ok((t.done("mesh refinement", worst, 1e-12, worst <= 1e-12, vec![]), table))
}

fn rigid_motion_suite(seed: u64) -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = kite_pair();
    let mesh = discretize(&base, &[64, 64])?;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    let reference: Vec<f64> = [0.5, 2.0]
        .iter()
        .map(|&k| XiSolver::new(&mesh, BoundaryCondition::Dirichlet).xi(k))
        .collect::<Result<_, _>>()?;
    for _ in 0..4 {
        let angle = rng.random_range(0.0..2.0 * PI);
        let shift = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let moved = base.transformed(angle, shift).permuted(&[1, 0]);
        let mm = discretize(&moved, &[64, 64])?;
        for (i, &k) in [0.5, 2.0].iter().enumerate() {
            let x = XiSolver::new(&mm, BoundaryCondition::Dirichlet).xi(k)?;
            let d = (x - reference[i]).abs() / reference[i].abs();
            worst = worst.max(d);
        }
        details.push(format!("angle {angle:.3}, shift ({:.2}, {:.2})", shift[0], shift[1]));
    }
    Ok(t.done("rigid motion", worst, 1e-10, worst <= 1e-10, details))
}

fn energy_oracle_suite() -> Result<SuiteResult, CliError> {
    let t = Timer::start();
    let cfg = disc_pair();
    let discs = discs_from_configuration(&cfg)?;
    let mesh = discretize(&cfg, &[64, 64])?;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let opts = TraceOptions {
            kappa_min: default_kappa_min(&bc),
            rel_tol: 1e-9,
            min_decay_rate: 1.0,
            ..Default::default()
        };
        let solver = XiSolver::new(&mesh, bc);
        let bem = energy_from_xi(|k| solver.xi(k), 0.0, &opts)?;
        let orc = energy_from_xi(|k| xi_discs_at_order(k, &discs, &bc, 24), 0.0, &opts)?;
        let rel = ((bem.value - orc.value) / orc.value).abs();
        worst = worst.max(rel);
        details.push(format!(
            "{}: BEM {:.12e}, multipole {:.12e}",
            bc.name(),
            bem.value,
            orc.value
        ));
    }
    Ok(t.done("energy vs multipole", worst, 1e-6, worst <= 1e-6, details))
}

/// Runs the suites of the requested level. Suite failures are reported,
/// not returned as errors; errors mean a suite could not run at all.
pub fn cmd_verify(opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let mut suites = identity_suites(opts)?;
    suites.push(jump_suite(opts)?);
    suites.push(jacobi_suite()?);
    suites.push(slab_suite()?);
    suites.push(multipole_suite()?);
    suites.push(point_plate_suite()?);
    let mut tables = Vec::new();
    if opts.level == Level::Full {
        let (s, t) = refinement_table()?;
        suites.push(s);
        tables.push(t);
        suites.push(rigid_motion_suite(opts.seed)?);
        suites.push(energy_oracle_suite()?);
    }
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport {
        level: opts.level,
        passed,
        suites,
        tables,
    })
}

/// Meshes reused by several suites; exposed for the acceptance harness.
pub fn disc_pair_mesh(n: usize) -> Result<BoundaryMesh, CliError> {
    Ok(discretize(&disc_pair(), &[n, n])?)
}

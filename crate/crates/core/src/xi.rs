//! Relative log-determinants `Ξ(iκ) = log det(O O_diag^{-1})` for the
//! Dirichlet (`O = S`), Neumann (`O = N`) and transmission (`O = H̃`) problems,
//! and their κ-derivatives through Jacobi's formula.

use crate::error::{Error, Result};
use crate::geometry::BoundaryMesh;
use crate::layer_ops::{self, diag_part, TransmissionParams};
use crate::linalg;
use crate::specfun::Kappa;
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::ops::Range;

/// Boundary condition of the scattering problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Transmission(TransmissionParams),
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Transmission(_) => "transmission",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiOptions {
    /// Take the determinant of `W^{1/2} M W^{-1/2}` instead of `M`.
    pub symmetrize: bool,
    /// Below this κ a Neumann evaluation carries a conditioning warning.
    pub kappa_warn: f64,
}

impl Default for XiOptions {
    fn default() -> Self {
        XiOptions {
            symmetrize: true,
            kappa_warn: 1e-2,
        }
    }
}

/// One evaluation of Ξ with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct XiSample {
    pub kappa: f64,
    pub value: f64,
    /// Pivot ratio of the LU factor of `O O_diag^{-1}`.
    pub pivot_ratio: f64,
    pub warnings: Vec<String>,
}

/// Ξ evaluator bound to one mesh and boundary condition.
#[derive(Clone, Debug)]
pub struct XiSolver<'a> {
    pub mesh: &'a BoundaryMesh,
    pub bc: BoundaryCondition,
    pub options: XiOptions,
}

/// Assembled full and diagonal operators at one κ.
struct OperatorPair {
    full: DMatrix<f64>,
    diag: DMatrix<f64>,
}

fn ranges(mesh: &BoundaryMesh) -> Vec<Range<usize>> {
    mesh.components.iter().map(|c| c.range.clone()).collect()
}

/// `M = O O_diag^{-1} = I + O_off O_diag^{-1}`, computed block by block.
fn relative_operator(full: &DMatrix<f64>, diag: &DMatrix<f64>, blocks: &[Range<usize>]) -> Result<DMatrix<f64>> {
    let n = full.nrows();
    let mut m = DMatrix::identity(n, n);
    for c in blocks {
        let len = c.len();
        // columns in block c: M[:, c] = O[:, c] O_cc^{-1} with O[c, c] O_cc^{-1} = I
        let occ_t = diag.view((c.start, c.start), (len, len)).transpose();
        let rhs_t = full.columns(c.start, len).transpose();
        let sol_t = linalg::solve(&occ_t, &rhs_t.into_owned(), "diagonal block")?;
        let mut cols = sol_t.transpose();
        cols.view_mut((c.start, 0), (len, len)).fill_with_identity();
        m.columns_mut(c.start, len).copy_from(&cols);
    }
    Ok(m)
}

impl<'a> XiSolver<'a> {
    pub fn new(mesh: &'a BoundaryMesh, bc: BoundaryCondition) -> Self {
        XiSolver {
            mesh,
            bc,
            options: XiOptions::default(),
        }
    }

    pub fn with_options(mut self, options: XiOptions) -> Self {
        self.options = options;
        self
    }

    fn operators(&self, kappa: f64) -> Result<OperatorPair> {
        let k = Kappa::with_floor(kappa, 0.0)?;
        match self.bc {
            BoundaryCondition::Dirichlet => {
                let s = layer_ops::assemble_s(self.mesh, k)?;
                let d = diag_part(&s);
                Ok(OperatorPair {
                    full: s.matrix,
                    diag: d.matrix,
                })
            }
            BoundaryCondition::Neumann => {
                let n = layer_ops::assemble_n(self.mesh, k)?;
                let d = diag_part(&n);
                Ok(OperatorPair {
                    full: n.matrix,
                    diag: d.matrix,
                })
            }
            BoundaryCondition::Transmission(p) => {
                let t = layer_ops::transmission_reduced(self.mesh, k, &p)?;
                Ok(OperatorPair {
                    full: t.full.matrix,
                    diag: t.diag.matrix,
                })
            }
        }
    }

    fn check_kappa(&self, kappa: f64) -> Result<()> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(())
    }

    /// Ξ(iκ) with diagnostics.
    pub fn sample(&self, kappa: f64) -> Result<XiSample> {
        self.check_kappa(kappa)?;
        let mut warnings = Vec::new();
        if self.mesh.n_components() < 2 {
            return Ok(XiSample {
                kappa,
                value: 0.0,
                pivot_ratio: 1.0,
                warnings,
            });
        }
        if matches!(self.bc, BoundaryCondition::Neumann) && kappa < self.options.kappa_warn {
            warnings.push(format!(
                "kappa = {kappa:e} is below {:e}; cond(N_diag) grows like kappa^-2",
                self.options.kappa_warn
            ));
        }
        let ops = self.operators(kappa)?;
        let mut m = relative_operator(&ops.full, &ops.diag, &ranges(self.mesh))?;
        if self.options.symmetrize {
            m = linalg::weight_similarity(&m, &nalgebra::DVector::from_vec(self.mesh.weights.clone()));
        }
        let ld = linalg::log_det(&m);
        let n = m.nrows();
        let series = linalg::log_det_near_identity(&(m - DMatrix::identity(n, n)));
        if series.is_none() && (!(ld.sign > 0.0) || !ld.log_abs.is_finite()) {
            return Err(Error::Breakdown {
                message: format!(
                    "{} determinant at kappa = {kappa} is not positive (sign {}, log|det| {})",
                    self.bc.name(),
                    ld.sign,
                    ld.log_abs
                ),
                condition: ld.pivot_ratio,
            });
        }
        let value = series.unwrap_or(ld.log_abs);
        if matches!(self.bc, BoundaryCondition::Dirichlet) && value > 0.0 {
            warnings.push(format!("Dirichlet xi is positive ({value:e}) at kappa = {kappa}"));
        }
        Ok(XiSample {
            kappa,
            value,
            pivot_ratio: ld.pivot_ratio,
            warnings,
        })
    }

    pub fn xi(&self, kappa: f64) -> Result<f64> {
        Ok(self.sample(kappa)?.value)
    }

    /// Finite-difference step used for `Ȯ`.
    pub fn derivative_step(kappa: f64) -> f64 {
        (1e-4 * kappa.max(1.0)).min(0.5 * kappa)
    }

    /// `dΞ/dκ = tr(O^{-1} Ȯ) - tr(O_diag^{-1} Ȯ_diag)` with `Ȯ` by central differences.
    pub fn derivative(&self, kappa: f64) -> Result<f64> {
        self.check_kappa(kappa)?;
        if self.mesh.n_components() < 2 {
            return Ok(0.0);
        }
        let h = Self::derivative_step(kappa);
        let (o, (op, om)) = rayon::join(
            || self.operators(kappa),
            || rayon::join(|| self.operators(kappa + h), || self.operators(kappa - h)),
        );
        let (o, op, om) = (o?, op?, om?);
        let dot_full = (&op.full - &om.full) / (2.0 * h);
        let dot_diag = (&op.diag - &om.diag) / (2.0 * h);
        let full = linalg::trace_solve(&o.full, &dot_full, "full operator")?;
        let mut diag = 0.0;
        for c in ranges(self.mesh) {
            let len = c.len();
            let a = o.diag.view((c.start, c.start), (len, len)).into_owned();
            let b = dot_diag.view((c.start, c.start), (len, len)).into_owned();
            diag += linalg::trace_solve(&a, &b, "diagonal block")?;
        }
        Ok(full - diag)
    }

    /// Samples Ξ on a grid in parallel; output order follows `kappas`.
    pub fn curve(&self, kappas: &[f64]) -> Result<XiCurve> {
        let samples: Vec<Result<XiSample>> = kappas.par_iter().map(|&k| self.sample(k)).collect();
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(XiCurve {
            bc: self.bc,
            samples: samples.iter().map(|s| (s.kappa, s.value)).collect(),
            resolution: self.mesh.components.iter().map(|c| c.len()).collect(),
            config_hash: None,
            warnings: samples.into_iter().flat_map(|s| s.warnings).collect(),
        })
    }
}

/// `Ξ_D(iκ) = log det(S S_diag^{-1})`.
pub fn xi_dirichlet(mesh: &BoundaryMesh, kappa: f64) -> Result<f64> {
    XiSolver::new(mesh, BoundaryCondition::Dirichlet).xi(kappa)
}

/// `Ξ_N(iκ) = log det(N N_diag^{-1})`.
pub fn xi_neumann(mesh: &BoundaryMesh, kappa: f64) -> Result<f64> {
    XiSolver::new(mesh, BoundaryCondition::Neumann).xi(kappa)
}

/// `Ξ_T(iκ) = log det(H̃ H̃_diag^{-1})`.
pub fn xi_transmission(mesh: &BoundaryMesh, kappa: f64, params: &TransmissionParams) -> Result<f64> {
    XiSolver::new(mesh, BoundaryCondition::Transmission(*params)).xi(kappa)
}

pub fn xi_derivative(bc: BoundaryCondition, mesh: &BoundaryMesh, kappa: f64) -> Result<f64> {
    XiSolver::new(mesh, bc).derivative(kappa)
}

/// A sampled Ξ curve.
#[derive(Clone, Debug, PartialEq)]
pub struct XiCurve {
    pub bc: BoundaryCondition,
    pub samples: Vec<(f64, f64)>,
    /// Nodes per component.
    pub resolution: Vec<usize>,
    pub config_hash: Option<String>,
    pub warnings: Vec<String>,
}

impl XiCurve {
    /// `kappa,xi` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kappa,xi\n");
        for (k, x) in &self.samples {
            writeln!(out, "{k:.16e},{x:.16e}").unwrap();
        }
        out
    }

    pub fn from_csv(bc: BoundaryCondition, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("kappa,xi") {
            return Err(Error::domain("missing kappa,xi header"));
        }
        let mut samples = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (k, x) = line
                .split_once(',')
                .ok_or_else(|| Error::domain(format!("malformed row {line:?}")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::domain(format!("{s:?}: {e}")))
            };
            samples.push((parse(k)?, parse(x)?));
        }
        Ok(XiCurve {
            bc,
            samples,
            resolution: Vec::new(),
            config_hash: None,
            warnings: Vec::new(),
        })
    }

    /// Least-squares slope of `log|Ξ|` against κ over samples in `[lo, hi]`.
    pub fn log_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|(k, x)| *k >= lo && *k <= hi && *x != 0.0)
            .map(|&(k, x)| (k, x.abs().ln()))
            .collect();
        log_linear_slope(&pts)
    }
}

/// Slope of the least-squares line through `(x, y)` points.
pub fn log_linear_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

//! Nyström discretizations of the boundary layer operators at `λ = iκ`.
//!
//! Same-component blocks use Kress's product quadrature for the logarithmic
//! singularity: a kernel is split as `M(t,τ) = M1 L + M2` with
//! `L = log(4 sin²((t-τ)/2))`, `M1`, `M2` smooth, and
//! `∫ L(t_i, τ) f(τ) dτ ≈ Σ_j R_{ij} f(t_j)`. Cross-component blocks use the
//! plain trapezoid rule, where the kernels are analytic.
//!
//! The hypersingular operator is assembled from the Maue form
//! `N = ∂_s S ∂_s - κ² ν·S ν`. In the parameter variable this becomes
//! `(1/|x'(t)|) ∫ -∂_t∂_τ G φ dτ - κ² ν·Sν`. The singular part
//! `(1/4π) ∂_t∂_τ L` acts as the Fourier multiplier `-2π|m|` (Nyquist mode
//! included), and the remainder has a logarithmic singularity handled by the
//! same product rule. The sign convention is that of the relations
//! `SN = D² - 1/4` and `NS = D'² - 1/4`.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMesh, Vec2};
use crate::linalg;
use crate::specfun::{bessel_i01, bessel_k01, radial_green, Kappa, EULER_GAMMA};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::ops::Range;
use std::sync::Arc;

const FRAC_1_4PI: f64 = 1.0 / (4.0 * PI);

/// Sobolev-space label of a discrete density (`H^{1/2}` or `H^{-1/2}`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    HalfPlus,
    HalfMinus,
}

/// Component ranges and quadrature weights shared by all operators of a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLayout {
    pub ranges: Vec<Range<usize>>,
    pub weights: DVector<f64>,
}

impl BlockLayout {
    pub fn from_mesh(mesh: &BoundaryMesh) -> Self {
        BlockLayout {
            ranges: mesh.components.iter().map(|c| c.range.clone()).collect(),
            weights: DVector::from_vec(mesh.weights.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn component_of(&self, i: usize) -> usize {
        self.ranges
            .iter()
            .position(|r| r.contains(&i))
            .expect("index inside layout")
    }
}

/// A discretized layer operator.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub matrix: DMatrix<f64>,
    pub row_space: Space,
    pub col_space: Space,
    pub kappa: f64,
    pub layout: Arc<BlockLayout>,
}

impl BoundaryOperator {
    /// `W^{1/2} M W^{-1/2}`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        linalg::weight_similarity(&self.matrix, &self.layout.weights)
    }

    pub fn diag_part(&self) -> BoundaryOperator {
        diag_part(self)
    }

    fn with_matrix(&self, matrix: DMatrix<f64>, row_space: Space, col_space: Space) -> Self {
        BoundaryOperator {
            matrix,
            row_space,
            col_space,
            kappa: self.kappa,
            layout: self.layout.clone(),
        }
    }
}

/// Zeroes every cross-component block.
pub fn diag_part(op: &BoundaryOperator) -> BoundaryOperator {
    let mut m = DMatrix::zeros(op.matrix.nrows(), op.matrix.ncols());
    for r in &op.layout.ranges {
        let len = r.len();
        m.view_mut((r.start, r.start), (len, len))
            .copy_from(&op.matrix.view((r.start, r.start), (len, len)));
    }
    op.with_matrix(m, op.row_space, op.col_space)
}

/// Kress weights and related periodic tables for one node count.
struct PeriodicTables {
    /// `R(k)`: log-quadrature weights at offset `k = i - j (mod n)`.
    r: Vec<f64>,
    /// `H(k)`: discrete multiplier `2π|m|`, Nyquist included.
    h: Vec<f64>,
    /// `log(4 sin²(πk/n))`, unused at `k = 0`.
    log4sin2: Vec<f64>,
    /// `1/sin²(πk/n)`, unused at `k = 0`.
    csc2: Vec<f64>,
}

impl PeriodicTables {
    fn new(n: usize) -> Self {
        let nf = n as f64;
        let half = n / 2;
        let mut r = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut log4sin2 = vec![0.0; n];
        let mut csc2 = vec![0.0; n];
        for k in 0..=half {
            let alt = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mut sr = 0.0;
            let mut sh = 0.0;
            for m in 1..half {
                let c = (2.0 * PI * (m * k % n) as f64 / nf).cos();
                sr += c / m as f64;
                sh += m as f64 * c;
            }
            r[k] = -4.0 * PI / nf * sr - 4.0 * PI / (nf * nf) * alt;
            h[k] = (4.0 * PI * sh + PI * nf * alt) / nf;
            if k != 0 {
                let s = (PI * k as f64 / nf).sin();
                log4sin2[k] = (4.0 * s * s).ln();
                csc2[k] = 1.0 / (s * s);
            }
        }
        for k in half + 1..n {
            r[k] = r[n - k];
            h[k] = h[n - k];
            log4sin2[k] = log4sin2[n - k];
            csc2[k] = csc2[n - k];
        }
        PeriodicTables { r, h, log4sin2, csc2 }
    }
}

#[derive(Clone, Copy)]
struct Wanted {
    s: bool,
    d: bool,
    n: bool,
}

#[derive(Default)]
struct Raw {
    s: Option<DMatrix<f64>>,
    d: Option<DMatrix<f64>>,
    n: Option<DMatrix<f64>>,
}

fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// `d/dq I_0(κ√q)` and `d²/dq² I_0(κ√q)` at `q = r²`.
fn i0_q_derivatives(kappa: f64, r: f64, i0: f64, i1: f64) -> (f64, f64) {
    let z = kappa * r;
    let c = 0.25 * kappa * kappa;
    if z < 2.0 {
        let y = 0.25 * z * z;
        let mut t1 = 1.0;
        let mut t2 = 0.5;
        let mut s1 = t1;
        let mut s2 = t2;
        for j in 1..40 {
            let jf = j as f64;
            t1 *= y / (jf * (jf + 1.0));
            t2 *= y / (jf * (jf + 2.0));
            s1 += t1;
            s2 += t2;
            if t1 < 1e-18 * s1 {
                break;
            }
        }
        (c * s1, c * c * s2)
    } else {
        (
            kappa * i1 / (2.0 * r),
            kappa * kappa / (4.0 * r * r) * (i0 - 2.0 * i1 / z),
        )
    }
}

/// The log split is applied with the coefficient multiplied by a window in
/// `z = κr` that is 1 below `WINDOW_Z0` and 0 above `WINDOW_Z1`. Away from
/// the diagonal `L` is smooth, so the split stays exact, while the growth of
/// `I_0(κr)` no longer has to be resolved by the product rule.
const WINDOW_Z0: f64 = 3.0;
const WINDOW_Z1: f64 = 10.0;
const WINDOW_SHARPNESS: f64 = 2.0;

/// `χ(q)`, `dχ/dq`, `d²χ/dq²` of the log-split window at `q = r²`.
///
/// In the transition variable `s ∈ (0,1)`, `χ = erfc(c φ(s))/2` with
/// `φ = (s - 1/2)/sqrt(s(1-s))`, which is flat to all orders at both ends.
fn log_window(kappa: f64, r: f64) -> (f64, f64, f64) {
    let z = kappa * r;
    if z <= WINDOW_Z0 {
        return (1.0, 0.0, 0.0);
    }
    if z >= WINDOW_Z1 {
        return (0.0, 0.0, 0.0);
    }
    let width = (WINDOW_Z1 - WINDOW_Z0) / kappa;
    let s = (z - WINDOW_Z0) / (WINDOW_Z1 - WINDOW_Z0);
    let c = WINDOW_SHARPNESS;
    let p = s * (1.0 - s);
    let phi = (s - 0.5) / p.sqrt();
    let chi = 0.5 * libm::erfc(c * phi);
    let expo = (c * phi).powi(2);
    if expo > 700.0 {
        return (chi, 0.0, 0.0);
    }
    let gauss = c / PI.sqrt() * (-expo).exp();
    let phi1 = 0.25 / p.powf(1.5);
    let phi2 = 0.75 * (s - 0.5) / p.powf(2.5);
    // derivatives in r, then in q = r²
    let chi_r = -gauss * phi1 / width;
    let chi_rr = -gauss * (phi2 - 2.0 * c * c * phi * phi1 * phi1) / (width * width);
    (chi, chi_r / (2.0 * r), (chi_rr - chi_r / r) / (4.0 * r * r))
}

/// `-∂²_{tτ}` of the Laplace-regularized kernel on the diagonal, minus its
/// log coefficient times `L`: `(x'·x''' / 3 + |x''|²/2)/|x'|² - (x'·x'')²/|x'|⁴ - 1/6`.
fn laplace_mixed_diagonal(d1: Vec2, d2: Vec2, d3: Vec2) -> f64 {
    let s2 = dot(d1, d1);
    (0.5 * dot(d2, d2) + dot(d1, d3) / 3.0) / s2 - dot(d1, d2).powi(2) / (s2 * s2) - 1.0 / 6.0
}

fn assemble_raw(mesh: &BoundaryMesh, kappa: f64, want: Wanted, diag_only: bool) -> Result<Raw> {
    if want.n && !mesh.all_smooth() {
        return Err(Error::Unsupported(
            "hypersingular operator on polygonal components".into(),
        ));
    }
    let total = mesh.len();
    let tables: Vec<PeriodicTables> = mesh.components.iter().map(|c| PeriodicTables::new(c.len())).collect();
    let log_half_kappa = (0.5 * kappa).ln();
    let k2 = kappa * kappa;
    let nmats = want.s as usize + want.d as usize + want.n as usize;

    let rows: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let mut row_s = if want.s { vec![0.0; total] } else { Vec::new() };
            let mut row_d = if want.d { vec![0.0; total] } else { Vec::new() };
            let mut row_n = if want.n { vec![0.0; total] } else { Vec::new() };
            let ci = mesh.component_id[i];
            let comp = &mesh.components[ci];
            let tab = &tables[ci];
            let nc = comp.len();
            let h = 2.0 * PI / nc as f64;
            let p = i - comp.range.start;
            let xi = mesh.nodes[i];
            let nui = mesh.normals[i];
            let d1i = mesh.d1[i];
            let spi = mesh.speed[i];
            for j in 0..total {
                let same = mesh.component_id[j] == ci;
                if !same && diag_only {
                    continue;
                }
                let spj = mesh.speed[j];
                let wj = mesh.weights[j];
                let nuj = mesh.normals[j];
                if i == j {
                    let geo = d1i[0].hypot(d1i[1]);
                    let m1 = -FRAC_1_4PI * spj;
                    let m2 = spj / (2.0 * PI) * (-log_half_kappa - EULER_GAMMA - geo.ln());
                    let s_ii = tab.r[0] * m1 + h * m2;
                    if want.s {
                        row_s[j] = s_ii;
                    }
                    if want.d {
                        row_d[j] = -h * FRAC_1_4PI * cross(d1i, mesh.d2[i]) / (spj * geo);
                    }
                    if want.n {
                        let d2 = mesh.d2[i];
                        let d3 = mesh.d3[i];
                        let s2 = spi * spi;
                        let p1 = -k2 * s2 / (8.0 * PI);
                        let q1 = k2 * s2 * FRAC_1_4PI * (-0.5 - EULER_GAMMA - (0.5 * kappa * spi).ln())
                            + FRAC_1_4PI * laplace_mixed_diagonal(d1i, d2, d3);
                        let hyper = (-FRAC_1_4PI * tab.h[0] + tab.r[0] * p1 + h * q1) / spi;
                        row_n[j] = hyper - k2 * s_ii;
                    }
                    continue;
                }
                let xj = mesh.nodes[j];
                let u = [xi[0] - xj[0], xi[1] - xj[1]];
                let r = u[0].hypot(u[1]);
                let z = kappa * r;
                let (k0, k1) = bessel_k01(z);
                let g = k0 / (2.0 * PI);
                let dg = -kappa * k1 / (2.0 * PI);
                if !same {
                    if want.s {
                        row_s[j] = g * wj;
                    }
                    if want.d {
                        row_d[j] = -dg * dot(u, nuj) / r * wj;
                    }
                    if want.n {
                        let d2g = k2 * (k0 + k1 / z) / (2.0 * PI);
                        let ui = dot(u, nui) / r;
                        let uj = dot(u, nuj) / r;
                        row_n[j] = -((d2g - dg / r) * ui * uj + dg / r * dot(nui, nuj)) * wj;
                    }
                    continue;
                }
                let q = j - comp.range.start;
                let k = (p + nc - q) % nc;
                let rk = tab.r[k];
                let lk = tab.log4sin2[k];
                let (i0, i1) = bessel_i01(z);
                let (chi, chi1, chi2) = log_window(kappa, r);
                let m1 = -FRAC_1_4PI * i0 * chi;
                let s_sym = rk * m1 + h * (g - m1 * lk);
                if want.s {
                    row_s[j] = spj * s_sym;
                }
                if want.d {
                    let dn = dot(u, nuj) / r;
                    let kern = -dg * dn;
                    let l1 = FRAC_1_4PI * kappa * i1 * dn * chi;
                    row_d[j] = spj * (rk * l1 + h * (kern - l1 * lk));
                }
                if want.n {
                    let d1j = mesh.d1[j];
                    let d2g = k2 * (k0 + k1 / z) / (2.0 * PI);
                    let ux = dot(u, d1i) / r;
                    let uy = dot(u, d1j) / r;
                    let k1val = (d2g - dg / r) * ux * uy + dg / r * dot(d1i, d1j) - tab.csc2[k] / (8.0 * PI);
                    let (f1, f2) = i0_q_derivatives(kappa, r, i0, i1);
                    let ip1 = f1 * chi + i0 * chi1;
                    let ip2 = f2 * chi + 2.0 * f1 * chi1 + i0 * chi2;
                    let q_t = 2.0 * dot(u, d1i);
                    let q_tau = -2.0 * dot(u, d1j);
                    let q_ttau = -2.0 * dot(d1i, d1j);
                    let p1 = FRAC_1_4PI * (ip2 * q_t * q_tau + ip1 * q_ttau);
                    let hyper = (-FRAC_1_4PI * tab.h[k] + rk * p1 + h * (k1val - p1 * lk)) / spi;
                    row_n[j] = hyper - k2 * dot(nui, nuj) * spj * s_sym;
                }
            }
            let mut out = Vec::with_capacity(nmats * total);
            out.extend(row_s);
            out.extend(row_d);
            out.extend(row_n);
            out
        })
        .collect();

    let pick = |slot: usize| DMatrix::from_fn(total, total, |i, j| rows[i][slot * total + j]);
    let mut raw = Raw::default();
    let mut slot = 0;
    if want.s {
        raw.s = Some(pick(slot));
        slot += 1;
    }
    if want.d {
        raw.d = Some(pick(slot));
        slot += 1;
    }
    if want.n {
        raw.n = Some(pick(slot));
    }
    for m in [&raw.s, &raw.d, &raw.n].into_iter().flatten() {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Breakdown {
                message: format!("non-finite layer operator entry at kappa = {kappa}"),
                condition: f64::INFINITY,
            });
        }
    }
    Ok(raw)
}

/// `D' = W^{-1} Dᵀ W`, the weighted transpose.
fn weighted_transpose(d: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[(j, i)] * w[j] / w[i])
}

/// All four layer operators at one κ, assembled in a single pass.
#[derive(Clone, Debug)]
pub struct LayerOperators {
    pub s: BoundaryOperator,
    pub d: BoundaryOperator,
    pub dp: BoundaryOperator,
    /// Absent on meshes with polygonal components.
    pub n: Option<BoundaryOperator>,
}

fn wrap(m: DMatrix<f64>, rows: Space, cols: Space, kappa: f64, layout: &Arc<BlockLayout>) -> BoundaryOperator {
    BoundaryOperator {
        matrix: m,
        row_space: rows,
        col_space: cols,
        kappa,
        layout: layout.clone(),
    }
}

pub fn assemble_layers(mesh: &BoundaryMesh, kappa: Kappa, with_n: bool) -> Result<LayerOperators> {
    assemble_layers_inner(mesh, kappa, with_n, false)
}

/// Like [`assemble_layers`] but only the same-component blocks are computed.
pub fn assemble_layers_diag(mesh: &BoundaryMesh, kappa: Kappa, with_n: bool) -> Result<LayerOperators> {
    assemble_layers_inner(mesh, kappa, with_n, true)
}

fn assemble_layers_inner(mesh: &BoundaryMesh, kappa: Kappa, with_n: bool, diag_only: bool) -> Result<LayerOperators> {
    let k = kappa.value();
    let layout = Arc::new(BlockLayout::from_mesh(mesh));
    let raw = assemble_raw(
        mesh,
        k,
        Wanted {
            s: true,
            d: true,
            n: with_n,
        },
        diag_only,
    )?;
    let d = raw.d.unwrap();
    let dp = weighted_transpose(&d, &layout.weights);
    Ok(LayerOperators {
        s: wrap(raw.s.unwrap(), Space::HalfPlus, Space::HalfMinus, k, &layout),
        d: wrap(d, Space::HalfPlus, Space::HalfPlus, k, &layout),
        dp: wrap(dp, Space::HalfMinus, Space::HalfMinus, k, &layout),
        n: raw.n.map(|n| wrap(n, Space::HalfMinus, Space::HalfPlus, k, &layout)),
    })
}

/// Single layer operator `S`.
pub fn assemble_s(mesh: &BoundaryMesh, kappa: Kappa) -> Result<BoundaryOperator> {
    let layout = Arc::new(BlockLayout::from_mesh(mesh));
    let raw = assemble_raw(
        mesh,
        kappa.value(),
        Wanted {
            s: true,
            d: false,
            n: false,
        },
        false,
    )?;
    Ok(wrap(
        raw.s.unwrap(),
        Space::HalfPlus,
        Space::HalfMinus,
        kappa.value(),
        &layout,
    ))
}

/// Double layer operator `D` (kernel `∂_{ν_y} G`).
pub fn assemble_d(mesh: &BoundaryMesh, kappa: Kappa) -> Result<BoundaryOperator> {
    let layout = Arc::new(BlockLayout::from_mesh(mesh));
    let raw = assemble_raw(
        mesh,
        kappa.value(),
        Wanted {
            s: false,
            d: true,
            n: false,
        },
        false,
    )?;
    Ok(wrap(
        raw.d.unwrap(),
        Space::HalfPlus,
        Space::HalfPlus,
        kappa.value(),
        &layout,
    ))
}

/// Adjoint double layer operator `D'`, exactly `W^{-1} Dᵀ W`.
pub fn assemble_dp(mesh: &BoundaryMesh, kappa: Kappa) -> Result<BoundaryOperator> {
    let d = assemble_d(mesh, kappa)?;
    let dp = weighted_transpose(&d.matrix, &d.layout.weights);
    Ok(d.with_matrix(dp, Space::HalfMinus, Space::HalfMinus))
}

/// Hypersingular operator `N` (kernel `∂_{ν_x}∂_{ν_y} G`); smooth curves only.
pub fn assemble_n(mesh: &BoundaryMesh, kappa: Kappa) -> Result<BoundaryOperator> {
    let layout = Arc::new(BlockLayout::from_mesh(mesh));
    let raw = assemble_raw(
        mesh,
        kappa.value(),
        Wanted {
            s: false,
            d: false,
            n: true,
        },
        false,
    )?;
    Ok(wrap(
        raw.n.unwrap(),
        Space::HalfMinus,
        Space::HalfPlus,
        kappa.value(),
        &layout,
    ))
}

/// A 2×2 block operator on discrete Cauchy data `(φ, ψ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyBlockOperator {
    pub blocks: [[DMatrix<f64>; 2]; 2],
    pub layout: Arc<BlockLayout>,
}

impl CauchyBlockOperator {
    pub fn identity(layout: Arc<BlockLayout>) -> Self {
        let n = layout.len();
        let id = DMatrix::identity(n, n);
        let z = DMatrix::zeros(n, n);
        CauchyBlockOperator {
            blocks: [[id.clone(), z.clone()], [z, id]],
            layout,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.layout.len();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..2 {
            for b in 0..2 {
                m.view_mut((a * n, b * n), (n, n)).copy_from(&self.blocks[a][b]);
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        let b =
            |a: usize, c: usize| &self.blocks[a][0] * &other.blocks[0][c] + &self.blocks[a][1] * &other.blocks[1][c];
        CauchyBlockOperator {
            blocks: [[b(0, 0), b(0, 1)], [b(1, 0), b(1, 1)]],
            layout: self.layout.clone(),
        }
    }

    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        let b = |a: usize, d: usize| &self.blocks[a][d] + &other.blocks[a][d] * c;
        CauchyBlockOperator {
            blocks: [[b(0, 0), b(0, 1)], [b(1, 0), b(1, 1)]],
            layout: self.layout.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let b = |a: usize, d: usize| &self.blocks[a][d] * c;
        CauchyBlockOperator {
            blocks: [[b(0, 0), b(0, 1)], [b(1, 0), b(1, 1)]],
            layout: self.layout.clone(),
        }
    }

    /// Multiplies the Dirichlet columns by `c0` and the Neumann columns by `c1`.
    pub fn right_diag(&self, c0: f64, c1: f64) -> Self {
        let b = |a: usize, d: usize| &self.blocks[a][d] * if d == 0 { c0 } else { c1 };
        CauchyBlockOperator {
            blocks: [[b(0, 0), b(0, 1)], [b(1, 0), b(1, 1)]],
            layout: self.layout.clone(),
        }
    }

    pub fn left_diag(&self, c0: f64, c1: f64) -> Self {
        let b = |a: usize, d: usize| &self.blocks[a][d] * if a == 0 { c0 } else { c1 };
        CauchyBlockOperator {
            blocks: [[b(0, 0), b(0, 1)], [b(1, 0), b(1, 1)]],
            layout: self.layout.clone(),
        }
    }

    /// Frobenius norm after the `W^{1/2}` similarity in every block.
    pub fn weighted_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(|b| linalg::weighted_norm(b, &self.layout.weights).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Multitrace operator `A = [[-D, S], [-N, D']]`.
pub fn multitrace(mesh: &BoundaryMesh, kappa: Kappa) -> Result<CauchyBlockOperator> {
    let ops = assemble_layers(mesh, kappa, true)?;
    Ok(multitrace_from(&ops))
}

fn multitrace_from(ops: &LayerOperators) -> CauchyBlockOperator {
    let n = ops.n.as_ref().expect("hypersingular operator assembled");
    CauchyBlockOperator {
        blocks: [
            [-&ops.d.matrix, ops.s.matrix.clone()],
            [-&n.matrix, ops.dp.matrix.clone()],
        ],
        layout: ops.s.layout.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectorSign {
    Plus,
    Minus,
}

/// Calderon projector `P^± = 1/2 ∓ A`.
pub fn calderon(mesh: &BoundaryMesh, kappa: Kappa, sign: ProjectorSign) -> Result<CauchyBlockOperator> {
    Ok(calderon_from(&multitrace(mesh, kappa)?, sign))
}

pub fn calderon_from(a: &CauchyBlockOperator, sign: ProjectorSign) -> CauchyBlockOperator {
    let half = CauchyBlockOperator::identity(a.layout.clone()).scaled(0.5);
    match sign {
        ProjectorSign::Plus => half.add_scaled(a, -1.0),
        ProjectorSign::Minus => half.add_scaled(a, 1.0),
    }
}

/// Interior Dirichlet-to-Neumann map `Q^- = S^{-1}(1/2 + D)`, solved per component.
///
/// The interior problem decouples across components, so `Q^-` is block
/// diagonal and only the same-component blocks of `S` and `D` enter.
pub fn dtn_minus(mesh: &BoundaryMesh, kappa: Kappa) -> Result<BoundaryOperator> {
    let ops = assemble_layers_diag(mesh, kappa, false)?;
    dtn_minus_from(&ops.s, &ops.d)
}

fn dtn_minus_from(s: &BoundaryOperator, d: &BoundaryOperator) -> Result<BoundaryOperator> {
    let n = s.matrix.nrows();
    let mut q = DMatrix::zeros(n, n);
    for r in &s.layout.ranges {
        let len = r.len();
        let sb = s.matrix.view((r.start, r.start), (len, len)).into_owned();
        let rhs = d.matrix.view((r.start, r.start), (len, len)).into_owned() + DMatrix::identity(len, len) * 0.5;
        let block = linalg::solve(&sb, &rhs, "interior single layer block")?;
        q.view_mut((r.start, r.start), (len, len)).copy_from(&block);
    }
    Ok(s.with_matrix(q, Space::HalfMinus, Space::HalfPlus))
}

/// Exterior Dirichlet-to-Neumann map `Q^+ = S^{-1}(1/2 - D)`, a dense solve.
pub fn dtn_plus(mesh: &BoundaryMesh, kappa: Kappa) -> Result<BoundaryOperator> {
    let ops = assemble_layers(mesh, kappa, false)?;
    let n = mesh.len();
    let rhs = DMatrix::identity(n, n) * 0.5 - &ops.d.matrix;
    let q = linalg::solve(&ops.s.matrix, &rhs, "single layer operator")?;
    Ok(ops.s.with_matrix(q, Space::HalfMinus, Space::HalfPlus))
}

/// Transmission media: exterior/interior wavenumber scales and the entries
/// of the jump matrix `diag(ν₀, ν₁)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransmissionParams {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub nu0: f64,
    pub nu1: f64,
}

impl TransmissionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kappa_plus", self.kappa_plus),
            ("kappa_minus", self.kappa_minus),
            ("nu0", self.nu0),
            ("nu1", self.nu1),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "transmission parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Dielectric media: `ν₀ = 1`, `ν₁ = (κ₋/κ₊)²`.
    pub fn dielectric(kappa_plus: f64, kappa_minus: f64) -> Self {
        TransmissionParams {
            kappa_plus,
            kappa_minus,
            nu0: 1.0,
            nu1: (kappa_minus / kappa_plus).powi(2),
        }
    }

    pub fn exterior_kappa(&self, kappa: f64) -> f64 {
        kappa / self.kappa_plus
    }

    pub fn interior_kappa(&self, kappa: f64) -> f64 {
        kappa / self.kappa_minus
    }
}

/// The reduced transmission operator `H̃` and its diagonal counterpart.
#[derive(Clone, Debug)]
pub struct TransmissionOperators {
    pub full: BoundaryOperator,
    pub diag: BoundaryOperator,
}

/// `H̃ = -ν₀(1/2 - D_{κ/κ₊}) - ν₁ S_{κ/κ₊} Q^-_{κ/κ₋}`; the diagonal version uses
/// the diagonal parts of `S` and `D` with the same `Q^-`.
pub fn transmission_reduced(
    mesh: &BoundaryMesh,
    kappa: Kappa,
    params: &TransmissionParams,
) -> Result<TransmissionOperators> {
    params.validate()?;
    let ext = Kappa::with_floor(params.exterior_kappa(kappa.value()), 0.0)?;
    let int = Kappa::with_floor(params.interior_kappa(kappa.value()), 0.0)?;
    let outer = assemble_layers(mesh, ext, false)?;
    let inner = assemble_layers_diag(mesh, int, false)?;
    let q = dtn_minus_from(&inner.s, &inner.d)?;
    let n = mesh.len();
    let half = DMatrix::identity(n, n) * 0.5;
    let build = |s: &DMatrix<f64>, d: &DMatrix<f64>| -> DMatrix<f64> {
        (&half - d) * (-params.nu0) - s * &q.matrix * params.nu1
    };
    let s_diag = diag_part(&outer.s);
    let d_diag = diag_part(&outer.d);
    let full = build(&outer.s.matrix, &outer.d.matrix);
    let diag = build(&s_diag.matrix, &d_diag.matrix);
    let mk = |m| BoundaryOperator {
        matrix: m,
        row_space: Space::HalfPlus,
        col_space: Space::HalfPlus,
        kappa: kappa.value(),
        layout: outer.s.layout.clone(),
    };
    Ok(TransmissionOperators {
        full: mk(full),
        diag: mk(diag),
    })
}

/// `H = -A_{κ/κ₊} 𝕄 - 𝕄 A_{κ/κ₋}` with `𝕄 = diag(ν₀, ν₁)`, and the two
/// multitrace operators it was built from.
pub fn transmission_block(
    mesh: &BoundaryMesh,
    kappa: Kappa,
    params: &TransmissionParams,
) -> Result<(CauchyBlockOperator, CauchyBlockOperator, CauchyBlockOperator)> {
    params.validate()?;
    let a_plus = multitrace(mesh, Kappa::with_floor(params.exterior_kappa(kappa.value()), 0.0)?)?;
    let a_minus = multitrace(mesh, Kappa::with_floor(params.interior_kappa(kappa.value()), 0.0)?)?;
    let h = a_plus
        .right_diag(params.nu0, params.nu1)
        .add_scaled(&a_minus.left_diag(params.nu0, params.nu1), 1.0)
        .scaled(-1.0);
    Ok((h, a_plus, a_minus))
}

/// Single layer potential `Σ_j G(z, x_j) w_j ψ_j` at off-boundary points.
pub fn single_layer_potential(mesh: &BoundaryMesh, kappa: Kappa, points: &[Vec2], psi: &DVector<f64>) -> Vec<f64> {
    points
        .iter()
        .map(|z| {
            (0..mesh.len())
                .map(|j| {
                    let x = mesh.nodes[j];
                    let r = (z[0] - x[0]).hypot(z[1] - x[1]);
                    radial_green(2, kappa.value(), r).g * mesh.weights[j] * psi[j]
                })
                .sum()
        })
        .collect()
}

/// Double layer potential `Σ_j ∂_{ν_y} G(z, x_j) w_j φ_j` at off-boundary points.
pub fn double_layer_potential(mesh: &BoundaryMesh, kappa: Kappa, points: &[Vec2], phi: &DVector<f64>) -> Vec<f64> {
    points
        .iter()
        .map(|z| {
            (0..mesh.len())
                .map(|j| {
                    let x = mesh.nodes[j];
                    let u = [z[0] - x[0], z[1] - x[1]];
                    let r = u[0].hypot(u[1]);
                    let dg = radial_green(2, kappa.value(), r).dg;
                    -dg * dot(u, mesh.normals[j]) / r * mesh.weights[j] * phi[j]
                })
                .sum()
        })
        .collect()
}

/// Residual norms of the discrete operator identities on one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResiduals {
    /// `‖A² - 1/4‖`.
    pub multitrace_square: f64,
    /// `‖(P^+)² - P^+‖`.
    pub projector_plus: f64,
    /// `‖(P^-)² - P^-‖`.
    pub projector_minus: f64,
    /// `‖P^+ P^-‖`.
    pub projector_product: f64,
    /// `‖S(Q^- + Q^+) - 1‖`.
    pub dtn_sum_rule: f64,
    /// `‖NS + (1/2 + D')(1/2 - D')‖`.
    pub ns_factorization: f64,
    /// `‖SN + (1/2 + D)(1/2 - D)‖`.
    pub sn_factorization: f64,
    /// `‖N + (1/2 - D') Q^-‖`.
    pub n_dtn_factorization: f64,
    /// Relative error of the exterior third-Green reconstruction of a point source.
    pub third_green: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.multitrace_square,
            self.projector_plus,
            self.projector_minus,
            self.projector_product,
            self.dtn_sum_rule,
            self.ns_factorization,
            self.sn_factorization,
            self.n_dtn_factorization,
            self.third_green,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("A^2 - 1/4", self.multitrace_square),
            ("(P+)^2 - P+", self.projector_plus),
            ("(P-)^2 - P-", self.projector_minus),
            ("P+ P-", self.projector_product),
            ("S(Q- + Q+) - 1", self.dtn_sum_rule),
            ("NS + (1/2 + D')(1/2 - D')", self.ns_factorization),
            ("SN + (1/2 + D)(1/2 - D)", self.sn_factorization),
            ("N + (1/2 - D')Q-", self.n_dtn_factorization),
            ("third Green point source", self.third_green),
        ]
    }
}

/// Per-component trigonometric test densities `cos(ℓt)`, `sin(ℓt)` for
/// `ℓ ≤ degree`, one column each, supported on a single component.
pub fn smooth_test_densities(mesh: &BoundaryMesh, degree: usize) -> DMatrix<f64> {
    let per = 2 * degree + 1;
    let mut v = DMatrix::zeros(mesh.len(), per * mesh.n_components());
    for (c, comp) in mesh.components.iter().enumerate() {
        for j in comp.range.clone() {
            let t = mesh.params[j];
            v[(j, c * per)] = 1.0;
            for l in 1..=degree {
                let lt = l as f64 * t;
                v[(j, c * per + 2 * l - 1)] = lt.cos();
                v[(j, c * per + 2 * l)] = lt.sin();
            }
        }
    }
    v
}

/// Degree of the test densities used by [`identity_residuals`].
pub const TEST_DEGREE: usize = 4;

fn w_norm(m: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let sq = w.map(f64::sqrt);
    let wrows = sq.len();
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += (sq[i % wrows] * m[(i, j)]).powi(2);
        }
    }
    acc.sqrt()
}

/// Applies a Cauchy block operator to stacked data `[φ; ψ]`.
fn apply_block(op: &CauchyBlockOperator, v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = op.layout.len();
    let top = v.rows(0, n);
    let bot = v.rows(n, n);
    let mut out = DMatrix::zeros(2 * n, v.ncols());
    out.rows_mut(0, n)
        .copy_from(&(&op.blocks[0][0] * top + &op.blocks[0][1] * bot));
    out.rows_mut(n, n)
        .copy_from(&(&op.blocks[1][0] * top + &op.blocks[1][1] * bot));
    out
}

/// Block test data: Dirichlet-only and Neumann-only copies of `v`.
fn stacked_densities(v: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = v.shape();
    let mut out = DMatrix::zeros(2 * n, 2 * k);
    out.view_mut((0, 0), (n, k)).copy_from(v);
    out.view_mut((n, k), (n, k)).copy_from(v);
    out
}

/// Relative residual `‖E V‖_W / ‖V‖_W` of a Cauchy block operator on smooth data.
pub fn block_residual_on_smooth(mesh: &BoundaryMesh, e: &CauchyBlockOperator) -> f64 {
    let v = stacked_densities(&smooth_test_densities(mesh, TEST_DEGREE));
    let w = &e.layout.weights;
    w_norm(&apply_block(e, &v), w) / w_norm(&v, w)
}

/// Evaluates the identity suite.
///
/// Every residual is measured on the smooth test densities of
/// [`smooth_test_densities`] as `‖E V‖_W / ‖V‖_W`, where `‖·‖_W` is the
/// quadrature-weighted Frobenius norm. The top discrete modes are aliased by
/// any Nyström rule, so a full matrix norm would floor at `O(1/n)`.
/// `sources` are point charges, one inside each component; `probes` are
/// exterior evaluation points.
pub fn identity_residuals(
    mesh: &BoundaryMesh,
    kappa: Kappa,
    sources: &[Vec2],
    probes: &[Vec2],
) -> Result<IdentityResiduals> {
    let ops = assemble_layers(mesh, kappa, true)?;
    identity_residuals_from(mesh, &ops, sources, probes)
}

/// [`identity_residuals`] on already assembled operators, which must include `N`.
pub fn identity_residuals_from(
    mesh: &BoundaryMesh,
    ops: &LayerOperators,
    sources: &[Vec2],
    probes: &[Vec2],
) -> Result<IdentityResiduals> {
    let kappa = Kappa::with_floor(ops.s.kappa, 0.0)?;
    let nmat = &ops
        .n
        .as_ref()
        .ok_or_else(|| Error::domain("identity suite needs the hypersingular operator"))?
        .matrix;
    let w = ops.s.layout.weights.clone();
    let s = &ops.s.matrix;
    let d = &ops.d.matrix;
    let dp = &ops.dp.matrix;
    let v = smooth_test_densities(mesh, TEST_DEGREE);
    let vn = w_norm(&v, &w);
    let rel = |m: DMatrix<f64>| w_norm(&m, &w) / vn;

    let a = multitrace_from(ops);
    let vb = stacked_densities(&v);
    let vbn = w_norm(&vb, &w);
    let rel_block = |m: DMatrix<f64>| w_norm(&m, &w) / vbn;
    let av = apply_block(&a, &vb);
    let aav = apply_block(&a, &av);
    let a2 = &aav - &vb * 0.25;
    // P^± V = V/2 ∓ AV and (P^±)² V = V/4 ∓ AV + A²V.
    let pp2_minus_pp = &aav - &vb * 0.25;
    let pm2_minus_pm = &aav - &vb * 0.25;
    // P^+ P^- = 1/4 - A².
    let pp_pm = &vb * 0.25 - &aav;

    let qm = dtn_minus_from(&diag_part(&ops.s), &diag_part(&ops.d))?;
    let half_v = &v * 0.5;
    let qp_v = linalg::solve(s, &(&half_v - d * &v), "single layer operator")?;
    let sum_rule = s * (&qm.matrix * &v + qp_v) - &v;

    let sv = s * &v;
    let ns = nmat * &sv + (&half_v + dp * &v) * 0.5 - dp * (&half_v + dp * &v);
    let nv = nmat * &v;
    let sn = s * &nv + (&half_v + d * &v) * 0.5 - d * (&half_v + d * &v);
    let qv = &qm.matrix * &v;
    let ndtn = &nv + &qv * 0.5 - dp * &qv;

    Ok(IdentityResiduals {
        multitrace_square: rel_block(a2),
        projector_plus: rel_block(pp2_minus_pp),
        projector_minus: rel_block(pm2_minus_pm),
        projector_product: rel_block(pp_pm),
        dtn_sum_rule: rel(sum_rule),
        ns_factorization: rel(ns),
        sn_factorization: rel(sn),
        n_dtn_factorization: w_norm(&ndtn, &w) / w_norm(&nv, &w).max(vn),
        third_green: third_green_residual(mesh, kappa, sources, probes),
    })
}

/// Projector residuals on exact Cauchy data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpResiduals {
    /// `‖(P^- - 1) X‖ / ‖X‖` for plane waves `e^{κ e·x}`, which solve the
    /// interior problem in every component.
    pub interior: f64,
    /// `‖(P^+ - 1) X‖ / ‖X‖` for `G(·, z₀)` with `z₀` inside an obstacle.
    pub exterior: f64,
}

/// Checks that interior and exterior Cauchy data are fixed by `P^-` and `P^+`.
pub fn jump_residuals(
    mesh: &BoundaryMesh,
    ops: &LayerOperators,
    directions: &[Vec2],
    sources: &[Vec2],
) -> Result<JumpResiduals> {
    if ops.n.is_none() {
        return Err(Error::domain("jump residuals need the hypersingular operator"));
    }
    let k = ops.s.kappa;
    let n = mesh.len();
    let a = multitrace_from(ops);
    let w = &ops.s.layout.weights;
    let mut interior = DMatrix::zeros(2 * n, directions.len());
    for (c, e) in directions.iter().enumerate() {
        let len = e[0].hypot(e[1]);
        let e = [e[0] / len, e[1] / len];
        for j in 0..n {
            let u = (k * dot(e, mesh.nodes[j])).exp();
            interior[(j, c)] = u;
            interior[(n + j, c)] = k * dot(e, mesh.normals[j]) * u;
        }
    }
    let mut exterior = DMatrix::zeros(2 * n, sources.len());
    for (c, z0) in sources.iter().enumerate() {
        for j in 0..n {
            let x = mesh.nodes[j];
            let u = [x[0] - z0[0], x[1] - z0[1]];
            let r = u[0].hypot(u[1]);
            let rg = radial_green(2, k, r);
            exterior[(j, c)] = rg.g;
            exterior[(n + j, c)] = rg.dg * dot(u, mesh.normals[j]) / r;
        }
    }
    // P^- - 1 = A - 1/2 and P^+ - 1 = -(A + 1/2)
    let ai = apply_block(&a, &interior) - &interior * 0.5;
    let ae = apply_block(&a, &exterior) + &exterior * 0.5;
    Ok(JumpResiduals {
        interior: w_norm(&ai, w) / w_norm(&interior, w),
        exterior: w_norm(&ae, w) / w_norm(&exterior, w),
    })
}

/// For each source `z₀` inside an obstacle, `u = G(·, z₀)` is an exterior
/// solution, so `u = D̃[u|_∂Ω] - S̃[∂_ν u]` at exterior points.
pub fn third_green_residual(mesh: &BoundaryMesh, kappa: Kappa, sources: &[Vec2], probes: &[Vec2]) -> f64 {
    let k = kappa.value();
    let mut worst = 0.0f64;
    for z0 in sources {
        let mut phi = DVector::zeros(mesh.len());
        let mut psi = DVector::zeros(mesh.len());
        for j in 0..mesh.len() {
            let x = mesh.nodes[j];
            let u = [x[0] - z0[0], x[1] - z0[1]];
            let r = u[0].hypot(u[1]);
            let rg = radial_green(2, k, r);
            phi[j] = rg.g;
            psi[j] = rg.dg * dot(u, mesh.normals[j]) / r;
        }
        let dl = double_layer_potential(mesh, kappa, probes, &phi);
        let sl = single_layer_potential(mesh, kappa, probes, &psi);
        let exact: Vec<f64> = probes
            .iter()
            .map(|p| radial_green(2, k, (p[0] - z0[0]).hypot(p[1] - z0[1])).g)
            .collect();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (idx, e) in exact.iter().enumerate() {
            worst = worst.max((dl[idx] - sl[idx] - e).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, Configuration, Curve};
    use crate::specfun::{bessel_i, bessel_k};

    fn disc(n: usize, radius: f64) -> BoundaryMesh {
        let cfg = Configuration::new(vec![Curve::circle([0.3, -0.1], radius).unwrap()]).unwrap();
        discretize(&cfg, &[n]).unwrap()
    }

    fn two_discs(n: usize) -> BoundaryMesh {
        let cfg = Configuration::new(vec![
            Curve::circle([-2.0, 0.0], 1.0).unwrap(),
            Curve::circle([2.0, 0.0], 1.0).unwrap(),
        ])
        .unwrap();
        discretize(&cfg, &[n, n]).unwrap()
    }

    fn kite_and_disc(n: usize) -> BoundaryMesh {
        let cfg = Configuration::new(vec![
            Curve::star([-1.6, 0.1], 1.0, vec![0.0, 0.2, 0.05], vec![0.1, 0.0, -0.03]).unwrap(),
            Curve::circle([1.8, 0.0], 0.9).unwrap(),
        ])
        .unwrap();
        discretize(&cfg, &[n, n]).unwrap()
    }

    #[test]
    fn log_window_derivatives() {
        let k = 2.0;
        for &r in &[1.6, 2.2, 3.0, 4.1, 4.9] {
            let q = r * r;
            let dq = 1e-5;
            let at = |q: f64| log_window(k, q.sqrt()).0;
            let (c, c1, c2) = log_window(k, r);
            assert!((0.0..=1.0).contains(&c));
            let fd1 = (at(q + dq) - at(q - dq)) / (2.0 * dq);
            let fd2 = (at(q + dq) - 2.0 * c + at(q - dq)) / (dq * dq);
            assert!((fd1 - c1).abs() < 1e-7 * (1.0 + c1.abs()), "{fd1} {c1}");
            assert!((fd2 - c2).abs() < 1e-4 * (1.0 + c2.abs()), "{fd2} {c2}");
        }
        assert_eq!(log_window(k, 1.4), (1.0, 0.0, 0.0));
        assert_eq!(log_window(k, 5.1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn large_kappa_circle_modes() {
        let a = 1.0;
        let k = 10.0;
        let x = k * a;
        for n in [256, 512] {
            let mesh = disc(n, a);
            let ops = assemble_layers(&mesh, kappa(k), true).unwrap();
            let tol = if n == 256 { 1e-4 } else { 1e-6 };
            for m in [0u32, 3, 30, 60] {
                let s_m = a * bessel_i(m, x).unwrap() * bessel_k(m, x).unwrap();
                let n_m = k * x * i_deriv(m, x) * k_deriv(m, x);
                let got_s = mode_value(&ops.s.matrix, m as usize);
                let got_n = mode_value(&ops.n.as_ref().unwrap().matrix, m as usize);
                assert!((got_s - s_m).abs() < tol * s_m, "n={n} S m={m}: {got_s} vs {s_m}");
                assert!((got_n - n_m).abs() < tol * n_m.abs(), "n={n} N m={m}: {got_n} vs {n_m}");
            }
            let sym = ops.s.symmetrized();
            assert!(((&sym + sym.transpose()) * 0.5).symmetric_eigenvalues().min() > 0.0);
        }
    }

    fn kappa(k: f64) -> Kappa {
        Kappa::new(k).unwrap()
    }

    /// Projection of a circulant operator onto `cos(m t)`: `(c·M c)/(c·c)`.
    fn mode_value(m_op: &DMatrix<f64>, mode: usize) -> f64 {
        let n = m_op.nrows();
        let c = DVector::from_fn(n, |j, _| (2.0 * PI * (mode * j) as f64 / n as f64).cos());
        c.dot(&(m_op * &c)) / c.dot(&c)
    }

    fn i_deriv(m: u32, x: f64) -> f64 {
        if m == 0 {
            bessel_i(1, x).unwrap()
        } else {
            0.5 * (bessel_i(m - 1, x).unwrap() + bessel_i(m + 1, x).unwrap())
        }
    }

    fn k_deriv(m: u32, x: f64) -> f64 {
        if m == 0 {
            -bessel_k(1, x).unwrap()
        } else {
            -0.5 * (bessel_k(m - 1, x).unwrap() + bessel_k(m + 1, x).unwrap())
        }
    }

    #[test]
    fn circle_modes_match_bessel_products() {
        let a = 0.8;
        for &(k, n) in &[(0.1, 64), (1.0, 64), (5.0, 128)] {
            let mesh = disc(n, a);
            let ops = assemble_layers(&mesh, kappa(k), true).unwrap();
            let x = k * a;
            // beyond κ·diam ≈ 3 the log split is windowed and converges more slowly
            let loose = if k > 2.0 { 1e3 } else { 1.0 };
            for m in [0u32, 1, 2, 7, 12, 16] {
                let im = bessel_i(m, x).unwrap();
                let km = bessel_k(m, x).unwrap();
                let s_m = a * im * km;
                let d_m = x * i_deriv(m, x) * km - 0.5;
                let n_m = k * x * i_deriv(m, x) * k_deriv(m, x);
                let got_s = mode_value(&ops.s.matrix, m as usize);
                let got_d = mode_value(&ops.d.matrix, m as usize);
                let got_n = mode_value(&ops.n.as_ref().unwrap().matrix, m as usize);
                assert!(
                    (got_s - s_m).abs() < loose * 1e-10 * s_m.abs().max(1e-3),
                    "S k={k} m={m}: {got_s} vs {s_m}"
                );
                assert!((got_d - d_m).abs() < loose * 1e-11, "D k={k} m={m}: {got_d} vs {d_m}");
                assert!(
                    (got_n - n_m).abs() < loose * 1e-9 * n_m.abs().max(1.0),
                    "N k={k} m={m}: {got_n} vs {n_m}"
                );
            }
        }
    }

    #[test]
    fn unit_circle_single_layer_top_eigenvalue() {
        let mesh = disc(64, 1.0);
        let s = assemble_s(&mesh, kappa(1.0)).unwrap();
        let sym = s.symmetrized();
        assert!((&sym - sym.transpose()).norm() < 1e-14 * sym.norm());
        let eig = sym.symmetric_eigenvalues();
        let top = eig.iter().fold(f64::MIN, |m, &v| m.max(v));
        let want = bessel_i(0, 1.0).unwrap() * bessel_k(0, 1.0).unwrap();
        assert!((top - want).abs() < 1e-10, "{top} vs {want}");
    }

    #[test]
    fn single_layer_is_spd() {
        for &(k, n) in &[(0.1, 48), (1.0, 48), (10.0, 256)] {
            let mesh = kite_and_disc(n);
            let s = assemble_s(&mesh, kappa(k)).unwrap().symmetrized();
            let sym = (&s + s.transpose()) * 0.5;
            assert!(
                (&s - &sym).norm() < 1e-12 * s.norm(),
                "asym {:e}",
                (&s - &sym).norm() / s.norm()
            );
            let lo = sym.symmetric_eigenvalues().min();
            assert!(lo > 0.0, "kappa={k}: {lo:e}");
        }
    }

    #[test]
    fn hypersingular_negative_on_mean_zero() {
        let mesh = disc(48, 1.0);
        let n = assemble_n(&mesh, kappa(1.0)).unwrap().symmetrized();
        let sym = (&n + n.transpose()) * 0.5;
        assert!((&n - &sym).norm() < 1e-12 * n.norm());
        let eig = sym.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn hypersingular_constants_near_kernel() {
        let mesh = kite_and_disc(48);
        let mut prev = f64::INFINITY;
        for &k in &[1e-1, 1e-2, 1e-3] {
            let n = assemble_n(&mesh, kappa(k)).unwrap();
            let nd = diag_part(&n);
            let r = mesh.components[0].range.clone();
            let e = DVector::from_fn(mesh.len(), |j, _| if r.contains(&j) { 1.0 } else { 0.0 });
            let v = (&n.matrix * &e).norm();
            assert!(v < 10.0 * k * k * mesh.len() as f64, "kappa={k}: {v}");
            assert!(v < prev);
            prev = v;
            let vd = (&nd.matrix * &e).norm();
            assert!(vd < 10.0 * k * k * mesh.len() as f64);
        }
    }

    #[test]
    fn adjoint_is_weighted_transpose() {
        let mesh = kite_and_disc(32);
        let d = assemble_d(&mesh, kappa(0.7)).unwrap();
        let dp = assemble_dp(&mesh, kappa(0.7)).unwrap();
        let w = &d.layout.weights;
        for i in 0..mesh.len() {
            for j in 0..mesh.len() {
                assert_eq!(dp.matrix[(i, j)], d.matrix[(j, i)] * w[j] / w[i]);
            }
        }
    }

    #[test]
    fn small_kappa_double_layer_on_circle() {
        let mesh = disc(32, 1.3);
        let d = assemble_d(&mesh, kappa(1e-6)).unwrap();
        for i in 0..mesh.len() {
            let row: f64 = d.matrix.row(i).sum();
            assert!((row + 0.5).abs() < 1e-9, "{row}");
            for j in 0..mesh.len() {
                assert!((d.matrix[(i, j)] + mesh.weights[j] / (4.0 * PI * 1.3)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn diag_part_properties() {
        let mesh = two_discs(16);
        let s = assemble_s(&mesh, kappa(1.0)).unwrap();
        let d = diag_part(&s);
        assert!(d.matrix.view((0, 16), (16, 16)).iter().all(|&v| v == 0.0));
        assert!(d.matrix.view((16, 0), (16, 16)).iter().all(|&v| v == 0.0));
        assert_eq!(diag_part(&d).matrix, d.matrix);
        let single = assemble_s(&disc(16, 1.0), kappa(1.0)).unwrap();
        assert_eq!(diag_part(&single).matrix, single.matrix);
        // the diagonal part does not commute with products
        let prod = &s.matrix * &s.matrix;
        let lhs = diag_part(&BoundaryOperator {
            matrix: prod,
            ..s.clone()
        })
        .matrix;
        let rhs = &d.matrix * &d.matrix;
        assert!((lhs - rhs).norm() > 1e-6);
    }

    #[test]
    fn polygon_hypersingular_is_unsupported() {
        let cfg = Configuration::new(vec![Curve::polygon(vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
        ])
        .unwrap()])
        .unwrap();
        let mesh = discretize(&cfg, &[32]).unwrap();
        assert!(matches!(assemble_n(&mesh, kappa(1.0)), Err(Error::Unsupported(_))));
        assert!(assemble_s(&mesh, kappa(1.0)).is_ok());
    }

    #[test]
    fn polygon_single_layer_converges() {
        let sq = |n| {
            let cfg = Configuration::new(vec![Curve::polygon(vec![
                [-1.0, -1.0],
                [1.0, -1.0],
                [1.0, 1.0],
                [-1.0, 1.0],
            ])
            .unwrap()])
            .unwrap();
            discretize(&cfg, &[n]).unwrap()
        };
        // capacity-like functional: <1, S^{-1} 1>
        let functional = |n| {
            let mesh = sq(n);
            let s = assemble_s(&mesh, kappa(1.0)).unwrap();
            let ones = DVector::from_element(mesh.len(), 1.0);
            let sol = s.matrix.clone().lu().solve(&ones).unwrap();
            sol.dot(&DVector::from_vec(mesh.weights.clone()))
        };
        let f64_ = functional(64);
        let f128 = functional(128);
        let f256 = functional(256);
        assert!((f128 - f256).abs() < 0.5 * (f64_ - f128).abs(), "{f64_} {f128} {f256}");
    }

    #[test]
    fn dtn_minus_circle_modes() {
        let a = 1.0;
        let mesh = disc(64, a);
        for &k in &[0.5, 2.0] {
            let q = dtn_minus(&mesh, kappa(k)).unwrap();
            for m in [0u32, 1, 3, 10] {
                let want = k * i_deriv(m, k * a) / bessel_i(m, k * a).unwrap();
                let got = mode_value(&q.matrix, m as usize);
                assert!(
                    (got - want).abs() < 1e-9 * want.abs().max(1.0),
                    "k={k} m={m}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn identity_suite_on_kite_pair() {
        let sources = [[-1.6, 0.1], [1.8, 0.0]];
        let probes = [[0.1, 1.5], [0.1, -1.5], [-3.5, 0.0], [3.5, 0.4], [0.0, 3.0]];
        let mut prev: Option<IdentityResiduals> = None;
        for n in [32, 64, 128] {
            let res = identity_residuals(&kite_and_disc(n), kappa(1.0), &sources, &probes).unwrap();
            if let Some(p) = &prev {
                for ((name, a), (_, b)) in p.named().into_iter().zip(res.named()) {
                    assert!(b < a || b < 1e-11, "{name}: n={n} {b:e} vs {a:e}");
                }
            }
            prev = Some(res);
        }
        let last = prev.unwrap();
        assert!(last.max() < 1e-8, "{last:?}");
    }

    #[test]
    fn exact_cauchy_data_are_projector_fixed_points() {
        let mesh = kite_and_disc(64);
        let ops = assemble_layers(&mesh, kappa(1.0), true).unwrap();
        let r = jump_residuals(&mesh, &ops, &[[1.0, 0.0], [0.3, -1.0]], &[[-1.6, 0.1], [1.8, 0.0]]).unwrap();
        assert!(r.interior < 1e-9 && r.exterior < 1e-9, "{r:?}");
        let mut bad = ops.clone();
        bad.n.as_mut().unwrap().matrix *= -1.0;
        let r = jump_residuals(&mesh, &bad, &[[1.0, 0.0]], &[[-1.6, 0.1]]).unwrap();
        assert!(r.interior > 1e-2 && r.exterior > 1e-2, "{r:?}");
    }

    #[test]
    fn corrupted_hypersingular_sign_is_detected() {
        let mesh = two_discs(32);
        let ops = assemble_layers(&mesh, kappa(1.0), true).unwrap();
        let n = mesh.len();
        let half = DMatrix::<f64>::identity(n, n) * 0.5;
        let w = &ops.s.layout.weights;
        let v = smooth_test_densities(&mesh, TEST_DEGREE);
        let nmat = ops.n.unwrap().matrix;
        let good = (&ops.s.matrix * &nmat + (&half + &ops.d.matrix) * (&half - &ops.d.matrix)) * &v;
        let bad = (&ops.s.matrix * (-&nmat) + (&half + &ops.d.matrix) * (&half - &ops.d.matrix)) * &v;
        assert!(w_norm(&good, w) < 1e-8 * w_norm(&v, w));
        assert!(w_norm(&bad, w) > 0.1 * w_norm(&v, w));
    }

    #[test]
    fn transmission_equal_media_single_component() {
        let mesh = disc(32, 1.0);
        let p = TransmissionParams {
            kappa_plus: 1.0,
            kappa_minus: 1.0,
            nu0: 1.0,
            nu1: 1.0,
        };
        let t = transmission_reduced(&mesh, kappa(1.0), &p).unwrap();
        assert_eq!(t.full.matrix, t.diag.matrix);
        let bad = TransmissionParams { nu0: 0.0, ..p };
        assert!(transmission_reduced(&mesh, kappa(1.0), &bad).is_err());
    }

    #[test]
    fn transmission_intertwining() {
        let mesh = kite_and_disc(64);
        let p = TransmissionParams::dielectric(1.0, 2.0);
        let (h, a_plus, a_minus) = transmission_block(&mesh, kappa(1.0), &p).unwrap();
        for sign in [ProjectorSign::Plus, ProjectorSign::Minus] {
            let pp = calderon_from(&a_plus, sign);
            let pm = calderon_from(&a_minus, sign);
            let r = block_residual_on_smooth(&mesh, &pp.mul(&h).add_scaled(&h.mul(&pm), -1.0));
            assert!(r < 1e-9, "{sign:?}: {r:e}");
        }
    }
}

//! One-dimensional plates: closed-form layer operators for two point plates,
//! Ξ and Casimir energies, finite dielectric slabs with transverse momentum,
//! and an independent Cauchy-data determinant for the slab Ξ.
//!
//! Point plates sit at `±a/2`. Normals point away from the gap, so the
//! boundary data are ordered `(-a/2, a/2)` with normals `(-1, +1)`.

use crate::error::{Error, Result};
use crate::layer_ops::TransmissionParams;
use crate::quadrature::{integrate, QuadOptions};
use crate::trace_formula::{
    energy_from_xi, reduced_trace_rs, trace_rs, weighted_xi_integral, EnergyResult, TraceOptions,
};
use nalgebra::{Matrix2, Matrix4};
use std::f64::consts::PI;
use std::sync::Mutex;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// Boundary condition for point plates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlateBc {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerMatrices1d {
    pub s: Matrix2<f64>,
    pub d: Matrix2<f64>,
    pub n: Matrix2<f64>,
}

/// `S`, `D`, `N` of two point plates at distance `a`, at `λ = iκ`.
pub fn layer_matrices_1d(kappa: f64, a: f64) -> Result<LayerMatrices1d> {
    check_positive("kappa", kappa)?;
    check_positive("a", a)?;
    let e = (-kappa * a).exp();
    Ok(LayerMatrices1d {
        s: Matrix2::new(1.0, e, e, 1.0) / (2.0 * kappa),
        d: Matrix2::new(0.0, e, e, 0.0) * -0.5,
        n: Matrix2::new(-1.0, e, e, -1.0) * (0.5 * kappa),
    })
}

/// κ-derivatives of [`layer_matrices_1d`].
pub fn layer_matrices_1d_dkappa(kappa: f64, a: f64) -> Result<LayerMatrices1d> {
    check_positive("kappa", kappa)?;
    check_positive("a", a)?;
    let e = (-kappa * a).exp();
    let ds_off = -e * (1.0 + kappa * a) / (2.0 * kappa * kappa);
    let ds_diag = -1.0 / (2.0 * kappa * kappa);
    let dn_off = 0.5 * e * (1.0 - kappa * a);
    Ok(LayerMatrices1d {
        s: Matrix2::new(ds_diag, ds_off, ds_off, ds_diag),
        d: Matrix2::new(0.0, e, e, 0.0) * (0.5 * a),
        n: Matrix2::new(-0.5, dn_off, dn_off, -0.5),
    })
}

fn diag2(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], 0.0, 0.0, m[(1, 1)])
}

/// `Ξ(iκ) = log(1 - e^{-2κa})`, identical for Dirichlet and Neumann plates.
pub fn xi_point_plates(kappa: f64, a: f64, _bc: PlateBc) -> Result<f64> {
    check_positive("kappa", kappa)?;
    check_positive("a", a)?;
    Ok((-(-2.0 * kappa * a).exp()).ln_1p())
}

/// `log det(O O_diag^{-1})` from the layer matrices, `O ∈ {S, N}`.
pub fn xi_point_plates_from_operators(kappa: f64, a: f64, bc: PlateBc) -> Result<f64> {
    let ops = layer_matrices_1d(kappa, a)?;
    let o = match bc {
        PlateBc::Dirichlet => ops.s,
        PlateBc::Neumann => ops.n,
    };
    let m = o * diag2(&o).try_inverse().expect("nonzero diagonal");
    Ok(m.determinant().ln())
}

/// `dΞ/dκ` by Jacobi's formula with the exact operator derivatives.
pub fn xi_point_plates_derivative(kappa: f64, a: f64, bc: PlateBc) -> Result<f64> {
    let ops = layer_matrices_1d(kappa, a)?;
    let dops = layer_matrices_1d_dkappa(kappa, a)?;
    let (o, od) = match bc {
        PlateBc::Dirichlet => (ops.s, dops.s),
        PlateBc::Neumann => (ops.n, dops.n),
    };
    let full = (o.try_inverse().expect("invertible") * od).trace();
    let diag = (diag2(&o).try_inverse().expect("invertible") * diag2(&od)).trace();
    Ok(full - diag)
}

/// `-Ξ'(iκ)/(2iκ) = (dΞ/dκ)/(2κ) = a e^{-2κa} / (κ(1 - e^{-2κa}))`.
pub fn relative_resolvent_trace_closed_form(kappa: f64, a: f64) -> Result<f64> {
    check_positive("kappa", kappa)?;
    check_positive("a", a)?;
    let e = (-2.0 * kappa * a).exp();
    Ok(a * e / (kappa * -(-2.0 * kappa * a).exp_m1()))
}

/// Diagonal of the Neumann relative resolvent
/// `R_Ω - R_{Ω₁} - R_{Ω₂} + R_0` of `-d²/dx² + κ²` at `x`.
pub fn neumann_relative_resolvent_diagonal(kappa: f64, a: f64, x: f64) -> f64 {
    let h = 0.5 * a;
    let free = 1.0 / (2.0 * kappa);
    // half-line Neumann kernel on the diagonal at distance t from its end
    let half_line = |t: f64| (1.0 + (-2.0 * kappa * t).exp()) / (2.0 * kappa);
    if x.abs() >= h {
        // outside the gap only the far plate contributes
        let far = x.abs() + h;
        return free - half_line(far);
    }
    let (l, r) = (x + h, h - x);
    // interval Neumann kernel cosh(κl)cosh(κr)/(κ sinh κa), written with
    // decaying exponentials
    let ea = (-2.0 * kappa * a).exp();
    let interval = (1.0 + (-2.0 * kappa * l).exp()) * (1.0 + (-2.0 * kappa * r).exp()) / (2.0 * kappa * (1.0 - ea));
    interval - half_line(l) - half_line(r) + free
}

/// `∫ R_rel(x, x) dx` by adaptive quadrature over the gap and both outer
/// half-lines.
pub fn relative_resolvent_trace_integrated(kappa: f64, a: f64) -> Result<f64> {
    check_positive("kappa", kappa)?;
    check_positive("a", a)?;
    let o = QuadOptions {
        abs_tol: 1e-16,
        rel_tol: 1e-13,
        ..Default::default()
    };
    let h = 0.5 * a;
    let inside = integrate(|x| Ok(neumann_relative_resolvent_diagonal(kappa, a, x)), -h, h, &o)?;
    // outside: substitute x = h + u/(1-u) on u ∈ [0, 1)
    let outside = integrate(
        |u: f64| {
            let t = u / (1.0 - u);
            Ok(neumann_relative_resolvent_diagonal(kappa, a, h + t) / ((1.0 - u) * (1.0 - u)))
        },
        0.0,
        1.0,
        &o,
    )?;
    Ok(inside.value + 2.0 * outside.value)
}

/// Energies of two point plates.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateEnergies {
    /// `½ tr R_s` on the line.
    pub line: EnergyResult,
    /// `½ tr R̃_s` per unit area of the plates in ℝ³.
    pub per_area: EnergyResult,
}

pub fn energy_point_plates(a: f64, m: f64, s: f64, opts: &TraceOptions) -> Result<PlateEnergies> {
    check_positive("a", a)?;
    let xi = |k: f64| xi_point_plates(k, a, PlateBc::Dirichlet);
    let half = |mut r: EnergyResult| {
        r.value *= 0.5;
        r.abs_error_estimate *= 0.5;
        r
    };
    let line = if s == 0.5 {
        energy_from_xi(xi, m, opts)?
    } else {
        half(trace_rs(xi, s, m, opts)?)
    };
    let per_area = half(reduced_trace_rs(xi, s, m, opts)?);
    Ok(PlateEnergies { line, per_area })
}

/// A point `λ = it` with transverse momentum `|ξ|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedSpectralPoint {
    pub t: f64,
    pub xi: f64,
}

impl ReducedSpectralPoint {
    pub fn new(t: f64, xi: f64) -> Result<Self> {
        check_positive("t", t)?;
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::domain(format!("transverse momentum must be >= 0, got {xi}")));
        }
        Ok(ReducedSpectralPoint { t, xi })
    }

    /// `η = sqrt((t/κ_s)² + ξ²)` for the medium scale `κ_s`.
    pub fn eta(&self, kappa_scale: f64) -> f64 {
        (self.t / kappa_scale).hypot(self.xi)
    }

    pub fn etas(&self, media: &TransmissionParams) -> (f64, f64) {
        (self.eta(media.kappa_plus), self.eta(media.kappa_minus))
    }
}

/// `R = (ν₁η₋ - ν₀η₊)/(ν₁η₋ + ν₀η₊)`.
///
/// With dielectric media (`ν₀ = 1`, `ν₁ = (κ₋/κ₊)²`) this is
/// `(κ₋²η₋ - κ₊²η₊)/(κ₋²η₋ + κ₊²η₊)`.
pub fn reflection_coefficient(p: &ReducedSpectralPoint, media: &TransmissionParams) -> Result<f64> {
    media.validate()?;
    let (ep, em) = p.etas(media);
    let (num, den) = (media.nu1 * em - media.nu0 * ep, media.nu1 * em + media.nu0 * ep);
    Ok(num / den)
}

/// Slab geometry: gap `d`, thickness `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlabConfig {
    pub d: f64,
    pub a: f64,
    pub media: TransmissionParams,
}

impl SlabConfig {
    pub fn new(d: f64, a: f64, media: TransmissionParams) -> Result<Self> {
        check_positive("d", d)?;
        check_positive("a", a)?;
        media.validate()?;
        Ok(SlabConfig { d, a, media })
    }
}

/// Closed-form slab Ξ:
/// `log[((1 - R²E₋)² - R²E₊(1 - E₋)²) / (1 - R²E₋)²]` with
/// `E₋ = e^{-2aη₋}`, `E₊ = e^{-2dη₊}`.
pub fn xi_slabs(p: &ReducedSpectralPoint, cfg: &SlabConfig) -> Result<f64> {
    let r = reflection_coefficient(p, &cfg.media)?;
    let (ep, em) = p.etas(&cfg.media);
    let e_minus = (-2.0 * cfg.a * em).exp();
    let e_plus = (-2.0 * cfg.d * ep).exp();
    let one_minus_em = -(-2.0 * cfg.a * em).exp_m1();
    let r2 = r * r;
    let q = 1.0 - r2 * e_minus;
    Ok((-r2 * e_plus * one_minus_em * one_minus_em / (q * q)).ln_1p())
}

/// Thick-slab limit `log(1 - R² e^{-2dη₊})`.
pub fn xi_lifshitz(p: &ReducedSpectralPoint, d: f64, media: &TransmissionParams) -> Result<f64> {
    check_positive("d", d)?;
    let r = reflection_coefficient(p, media)?;
    let ep = p.eta(media.kappa_plus);
    Ok((-r * r * (-2.0 * d * ep).exp()).ln_1p())
}

/// Reference value by the reduced transmission operator on the four slab
/// faces: `H̃ = -ν₀(½ - D₊) - ν₁ S₊ Q⁻`, with `S`, `D` from the kernel
/// `e^{-η|x-y|}/(2η)` and `Q⁻ = S₋^{-1}(½ + D₋)` per slab.
pub fn cauchy_oracle_slabs(p: &ReducedSpectralPoint, cfg: &SlabConfig) -> Result<f64> {
    let (ep, em) = p.etas(&cfg.media);
    let h = 0.5 * cfg.d;
    let x = [-h - cfg.a, -h, h, h + cfg.a];
    let nu = [-1.0, 1.0, -1.0, 1.0];
    let slab = |i: usize| i / 2;
    let s_of = |eta: f64, i: usize, j: usize| (-eta * (x[i] - x[j]).abs()).exp() / (2.0 * eta);
    let d_of = |eta: f64, i: usize, j: usize| {
        let dx = x[i] - x[j];
        nu[j] * 0.5 * dx.signum() * if dx == 0.0 { 0.0 } else { (-eta * dx.abs()).exp() }
    };
    let s_plus = Matrix4::from_fn(|i, j| s_of(ep, i, j));
    let d_plus = Matrix4::from_fn(|i, j| d_of(ep, i, j));
    let mut q_minus = Matrix4::zeros();
    for k in 0..2 {
        let o = 2 * k;
        let sb = Matrix2::from_fn(|i, j| s_of(em, o + i, o + j));
        let db = Matrix2::from_fn(|i, j| d_of(em, o + i, o + j));
        let qb = sb.try_inverse().ok_or_else(|| Error::Breakdown {
            message: "interior slab single layer is singular".into(),
            condition: f64::INFINITY,
        })? * (Matrix2::identity() * 0.5 + db);
        q_minus.fixed_view_mut::<2, 2>(o, o).copy_from(&qb);
    }
    let nu0 = cfg.media.nu0;
    let nu1 = cfg.media.nu1;
    let build = |s: &Matrix4<f64>, d: &Matrix4<f64>| (Matrix4::identity() * 0.5 - d) * -nu0 - s * q_minus * nu1;
    let blockdiag = |m: &Matrix4<f64>| Matrix4::from_fn(|i, j| if slab(i) == slab(j) { m[(i, j)] } else { 0.0 });
    let full = build(&s_plus, &d_plus);
    let diag = build(&blockdiag(&s_plus), &blockdiag(&d_plus));
    let inv = diag.try_inverse().ok_or_else(|| Error::Breakdown {
        message: "diagonal reduced transmission operator is singular".into(),
        condition: f64::INFINITY,
    })?;
    let det = (full * inv).determinant();
    if !(det > 0.0) {
        return Err(Error::Breakdown {
            message: format!("slab determinant {det} is not positive"),
            condition: f64::NAN,
        });
    }
    Ok(det.ln())
}

/// Which slab Ξ to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlabXi {
    Finite,
    Lifshitz,
}

/// Casimir energy per unit area,
/// `E = (1/8π³) ∫_0^∞ dλ ∫_0^∞ 2πξ dξ Ξ_T(iλ, ξ)`.
pub fn casimir_per_area_slabs(cfg: &SlabConfig, kind: SlabXi, opts: &TraceOptions) -> Result<EnergyResult> {
    let inner_opts = TraceOptions {
        kappa_start: 2.0 / cfg.d,
        kappa_min: 0.0,
        ..*opts
    };
    let inner_err = Mutex::new(Vec::<(f64, f64)>::new());
    let inner = |lam: f64| -> Result<f64> {
        let xi_fn = |xi: f64| {
            let p = ReducedSpectralPoint { t: lam, xi };
            match kind {
                SlabXi::Finite => xi_slabs(&p, cfg),
                SlabXi::Lifshitz => xi_lifshitz(&p, cfg.d, &cfg.media),
            }
        };
        // ∫_0^∞ ξ Ξ dξ is the weighted integral with p = 1, m = 0
        let r = weighted_xi_integral(xi_fn, 0.0, 1.0, &inner_opts)?;
        inner_err.lock().unwrap().push((lam, r.abs_error_estimate));
        Ok(r.value)
    };
    let outer_opts = TraceOptions {
        kappa_start: 2.0 * cfg.media.kappa_plus / cfg.d,
        kappa_min: 0.0,
        ..*opts
    };
    let mut r = weighted_xi_integral(inner, 0.0, 0.5, &outer_opts)?;
    let scale = 2.0 * PI / (8.0 * PI * PI * PI);
    // propagate the inner errors by integrating them over the sampled λ
    let mut errs = inner_err.into_inner().unwrap();
    errs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let propagated: f64 = errs
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum::<f64>()
        + errs.first().map_or(0.0, |e| e.0 * e.1);
    r.abs_error_estimate = (r.abs_error_estimate + propagated) * scale;
    r.value *= scale;
    Ok(r)
}

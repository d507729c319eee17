//! Fourier–Bessel reference values for configurations of discs.
//!
//! On a circle of radius `a` the single layer and hypersingular operators are
//! diagonal in `e^{imθ}`. Between discs `i` and `j` (centers `c_i`, `c_j`,
//! `d = c_j - c_i` at angle `α`) the addition theorem gives
//!
//! ```text
//! S_ij[m, n] = a_j I_m(κa_i) I_n(κa_j) (-1)^n K_{n-m}(κ|d|) e^{i(n-m)α}
//! ```
//!
//! and `N_ij` is the same with `I → κI'`. Ξ is evaluated as
//! `log det(I + B)` with `B` the off-diagonal coupling after symmetric
//! scaling by the single-disc mode values, written in the basis
//! `e^{imθ}/√(2πa)` that is orthonormal on each circle. `B` is Hermitian.
//! Nothing here shares code with the Nyström assembly.

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Curve, Vec2};
use crate::linalg::log_det_near_identity;
use crate::specfun::{ln_bessel_i, ln_bessel_k_seq};
use crate::xi::BoundaryCondition;
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultipoleTruncation {
    /// Starting Fourier order.
    pub l: usize,
    pub l_max: usize,
    pub l_step: usize,
    /// Accept once two successive orders differ by less than this.
    pub tol: f64,
}

impl Default for MultipoleTruncation {
    fn default() -> Self {
        MultipoleTruncation {
            l: 24,
            l_max: 64,
            l_step: 4,
            tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Result<Disc> {
        if !(radius.is_finite() && radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::geometry(format!("bad disc: center {center:?}, radius {radius}")));
        }
        Ok(Disc { center, radius })
    }
}

/// Discs of a configuration made only of circles.
pub fn discs_from_configuration(cfg: &Configuration) -> Result<Vec<Disc>> {
    cfg.components
        .iter()
        .map(|c| match c {
            Curve::Circle { center, radius, .. } => Disc::new(*center, *radius),
            _ => Err(Error::Unsupported("multipole oracle handles circles only".into())),
        })
        .collect()
}

/// Single-disc eigenvalues on modes `m = -L..=L`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleModes {
    pub orders: Vec<i64>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub n: Vec<f64>,
    pub q_minus: Vec<f64>,
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && kappa > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("kappa must be positive, got {kappa}")))
    }
}

/// `ln I_m(x)`, `ln I'_m(x)`, `ln K_m(x)`, `ln |K'_m(x)|` for `m = 0..=l`.
struct LogModes {
    li: Vec<f64>,
    ldi: Vec<f64>,
    lk: Vec<f64>,
    ldk: Vec<f64>,
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_modes(l: usize, x: f64) -> Result<LogModes> {
    let li = (0..=l + 1)
        .map(|m| ln_bessel_i(m as u32, x))
        .collect::<Result<Vec<_>>>()?;
    let lk = ln_bessel_k_seq(l as u32 + 1, x)?;
    let half = 0.5f64.ln();
    let mut ldi = Vec::with_capacity(l + 1);
    let mut ldk = Vec::with_capacity(l + 1);
    for m in 0..=l {
        // I'_m = (I_{m-1} + I_{m+1})/2, K'_m = -(K_{m-1} + K_{m+1})/2, I_{-1} = I_1
        let prev = m.abs_diff(1);
        ldi.push(half + log_add(li[prev], li[m + 1]));
        ldk.push(half + log_add(lk[prev], lk[m + 1]));
    }
    Ok(LogModes {
        li: li[..=l].to_vec(),
        ldi,
        lk: lk[..=l].to_vec(),
        ldk,
    })
}

pub fn circle_mode_values(kappa: f64, radius: f64, l: usize) -> Result<CircleModes> {
    check_kappa(kappa)?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::domain(format!("radius must be positive, got {radius}")));
    }
    let x = kappa * radius;
    let lm = log_modes(l, x)?;
    let mut out = CircleModes {
        orders: vec![],
        s: vec![],
        d: vec![],
        n: vec![],
        q_minus: vec![],
    };
    for m in -(l as i64)..=(l as i64) {
        let k = m.unsigned_abs() as usize;
        out.orders.push(m);
        out.s.push(radius * (lm.li[k] + lm.lk[k]).exp());
        out.d.push(x * (lm.ldi[k] + lm.lk[k]).exp() - 0.5);
        out.n.push(-kappa * kappa * radius * (lm.ldi[k] + lm.ldk[k]).exp());
        out.q_minus.push(kappa * (lm.ldi[k] - lm.li[k]).exp());
    }
    Ok(out)
}

fn sign_and_scale(bc: &BoundaryCondition) -> Result<f64> {
    match bc {
        BoundaryCondition::Dirichlet => Ok(1.0),
        BoundaryCondition::Neumann => Ok(-1.0),
        BoundaryCondition::Transmission(_) => Err(Error::Unsupported(
            "multipole oracle covers Dirichlet and Neumann only".into(),
        )),
    }
}

/// The scaled coupling `B` at fixed truncation `l`.
pub fn coupling_matrix(kappa: f64, discs: &[Disc], bc: &BoundaryCondition, l: usize) -> Result<DMatrix<Complex64>> {
    check_kappa(kappa)?;
    let sign = sign_and_scale(bc)?;
    let size = 2 * l + 1;
    let nd = discs.len();
    for i in 0..nd {
        for j in i + 1..nd {
            let (a, b) = (discs[i], discs[j]);
            let dist = (b.center[0] - a.center[0]).hypot(b.center[1] - a.center[1]);
            if dist <= a.radius + b.radius {
                return Err(Error::geometry(format!("discs {i} and {j} overlap")));
            }
        }
    }
    // ½ ln(|mode of S or N| ratio) per disc and |m|
    let rho: Vec<Vec<f64>> = discs
        .iter()
        .map(|dsc| {
            let lm = log_modes(l, kappa * dsc.radius)?;
            Ok((0..=l)
                .map(|m| match bc {
                    BoundaryCondition::Dirichlet => 0.5 * (lm.li[m] - lm.lk[m]),
                    _ => 0.5 * (lm.ldi[m] - lm.ldk[m]),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut b = DMatrix::zeros(nd * size, nd * size);
    for i in 0..nd {
        for j in 0..nd {
            if i == j {
                continue;
            }
            let dx = discs[j].center[0] - discs[i].center[0];
            let dy = discs[j].center[1] - discs[i].center[1];
            let alpha = dy.atan2(dx);
            let lk = ln_bessel_k_seq(2 * l as u32, kappa * dx.hypot(dy))?;
            for (r, m) in (-(l as i64)..=l as i64).enumerate() {
                for (c, n) in (-(l as i64)..=l as i64).enumerate() {
                    // the radius factors cancel in the orthonormal mode basis
                    let mag = (rho[i][m.unsigned_abs() as usize]
                        + rho[j][n.unsigned_abs() as usize]
                        + lk[(n - m).unsigned_abs() as usize])
                        .exp();
                    let parity = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    b[(i * size + r, j * size + c)] =
                        Complex64::from_polar(sign * parity * mag, (n - m) as f64 * alpha);
                }
            }
        }
    }
    Ok(b)
}

/// Ξ at a fixed truncation order.
pub fn xi_discs_at_order(kappa: f64, discs: &[Disc], bc: &BoundaryCondition, l: usize) -> Result<f64> {
    if discs.len() < 2 {
        sign_and_scale(bc)?;
        return Ok(0.0);
    }
    let b = coupling_matrix(kappa, discs, bc, l)?;
    if let Some(v) = log_det_near_identity(&b) {
        return Ok(v.re);
    }
    let det = (DMatrix::identity(b.nrows(), b.nrows()) + b).lu().determinant();
    if !(det.re > 0.0) || det.im.abs() > 1e-10 * det.re {
        return Err(Error::Breakdown {
            message: format!("multipole determinant {det} is not positive real"),
            condition: f64::NAN,
        });
    }
    Ok(det.re.ln())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultipoleXi {
    pub value: f64,
    /// Truncation order that was accepted.
    pub l: usize,
    /// Change from the previous order.
    pub delta: f64,
}

/// Ξ of a disc configuration, raising the order until it settles.
pub fn xi_discs(
    kappa: f64,
    discs: &[Disc],
    bc: &BoundaryCondition,
    trunc: &MultipoleTruncation,
) -> Result<MultipoleXi> {
    let mut l = trunc.l;
    let mut prev = xi_discs_at_order(kappa, discs, bc, l)?;
    while l < trunc.l_max {
        let next_l = (l + trunc.l_step.max(1)).min(trunc.l_max);
        let next = xi_discs_at_order(kappa, discs, bc, next_l)?;
        let delta = (next - prev).abs();
        if delta < trunc.tol {
            return Ok(MultipoleXi {
                value: next,
                l: next_l,
                delta,
            });
        }
        prev = next;
        l = next_l;
    }
    Err(Error::NotConverged(format!(
        "multipole expansion not settled at L = {}",
        trunc.l_max
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{bessel_i, bessel_k};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Two unit discs at centers (±2, 0), κ = 1, Dirichlet.
    const FROZEN_DIRICHLET_GAP2_K1: f64 = -4.4665337040976e-3;

    fn pair(sep: f64) -> Vec<Disc> {
        vec![
            Disc::new([-sep / 2.0, 0.0], 1.0).unwrap(),
            Disc::new([sep / 2.0, 0.0], 1.0).unwrap(),
        ]
    }

    #[test]
    fn mode_values() {
        let m = circle_mode_values(1.0, 1.0, 6).unwrap();
        assert_eq!(m.s.len(), 13);
        let i0k0 = bessel_i(0, 1.0).unwrap() * bessel_k(0, 1.0).unwrap();
        assert!((m.s[6] - i0k0).abs() < 1e-15);
        assert!((m.s[6] - 0.533_044_7).abs() < 1e-7);
        for k in 0..13 {
            assert_eq!(m.s[k], m.s[12 - k]);
            assert!(m.n[k] < 0.0 && m.s[k] > 0.0);
            // N = -(½ - D) Q⁻
            let f = -(0.5 - m.d[k]) * m.q_minus[k];
            assert!((f - m.n[k]).abs() < 1e-13 * m.n[k].abs());
        }
        let tiny = circle_mode_values(1e-5, 2.0, 4).unwrap();
        for (k, &ord) in tiny.orders.iter().enumerate() {
            if ord != 0 {
                assert!((tiny.q_minus[k] - ord.abs() as f64 / 2.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn addition_theorem_reproduces_k0() {
        // K_0(κ|u - v|) = Σ_k K_k(κ|u|) I_k(κ|v|) e^{ik(arg u - arg v)}
        let kappa = 0.8;
        let (u, v): (Vec2, Vec2) = ([2.3, 0.7], [-0.4, 0.9]);
        let (ru, rv) = (u[0].hypot(u[1]), v[0].hypot(v[1]));
        let dth = u[1].atan2(u[0]) - v[1].atan2(v[0]);
        let mut sum = 0.0;
        for k in -40i64..=40 {
            let ka = k.unsigned_abs() as u32;
            sum += bessel_k(ka, kappa * ru).unwrap() * bessel_i(ka, kappa * rv).unwrap() * (k as f64 * dth).cos();
        }
        let w = (u[0] - v[0]).hypot(u[1] - v[1]);
        assert!((sum - bessel_k(0, kappa * w).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn cross_block_matches_brute_force_quadrature() {
        // Fourier coefficients of the cross single layer by a 512² trapezoid sum
        let kappa = 1.0;
        let discs = [
            Disc::new([-1.5, -0.3], 1.0).unwrap(),
            Disc::new([1.4, 0.8], 0.7).unwrap(),
        ];
        let l = 6;
        let b = coupling_matrix(kappa, &discs, &BoundaryCondition::Dirichlet, l).unwrap();
        let modes: Vec<CircleModes> = discs
            .iter()
            .map(|d| circle_mode_values(kappa, d.radius, l).unwrap())
            .collect();
        let q = 512;
        let pts = |d: &Disc, t: f64| [d.center[0] + d.radius * t.cos(), d.center[1] + d.radius * t.sin()];
        for &(m, n) in &[(0i64, 0i64), (1, 0), (0, -2), (3, 2), (-4, 5)] {
            let mut acc = Complex64::new(0.0, 0.0);
            for p in 0..q {
                let th = 2.0 * PI * p as f64 / q as f64;
                let x = pts(&discs[0], th);
                for r in 0..q {
                    let ph = 2.0 * PI * r as f64 / q as f64;
                    let y = pts(&discs[1], ph);
                    let g = bessel_k(0, kappa * (x[0] - y[0]).hypot(x[1] - y[1])).unwrap() / (2.0 * PI);
                    acc += Complex64::from_polar(g, -(m as f64) * th + n as f64 * ph);
                }
            }
            // matrix element between the orthonormal modes e^{imθ}/√(2πa)
            let s12 = acc * (discs[0].radius * discs[1].radius).sqrt() * (2.0 * PI / q as f64) / q as f64;
            let (im, in_) = ((m + l as i64) as usize, (n + l as i64) as usize);
            let scaled = s12 / (modes[0].s[im] * modes[1].s[in_]).sqrt();
            let graf = b[(im, 2 * l + 1 + in_)];
            assert!((scaled - graf).norm() < 1e-12, "({m},{n}): {scaled} vs {graf}");
        }
    }

    #[test]
    fn coupling_is_hermitian() {
        let discs = [
            Disc::new([0.0, 0.0], 1.0).unwrap(),
            Disc::new([2.5, 1.5], 0.5).unwrap(),
            Disc::new([-1.0, 3.0], 0.8).unwrap(),
        ];
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let b = coupling_matrix(0.7, &discs, &bc, 8).unwrap();
            assert!((&b - b.adjoint()).norm() < 1e-14 * b.norm());
        }
    }

    #[test]
    fn frozen_regression_value() {
        let r = xi_discs(
            1.0,
            &pair(4.0),
            &BoundaryCondition::Dirichlet,
            &MultipoleTruncation::default(),
        )
        .unwrap();
        assert!((r.value - FROZEN_DIRICHLET_GAP2_K1).abs() < 1e-14, "{r:?}");
        assert!(r.delta < 1e-12);
    }

    #[test]
    fn trivial_configurations() {
        let one = [Disc::new([0.3, 0.1], 1.2).unwrap()];
        assert_eq!(
            xi_discs(1.0, &one, &BoundaryCondition::Neumann, &MultipoleTruncation::default())
                .unwrap()
                .value,
            0.0
        );
        let overlap = pair(1.5);
        assert!(matches!(
            xi_discs_at_order(1.0, &overlap, &BoundaryCondition::Dirichlet, 8),
            Err(Error::Geometry(_))
        ));
        let t = BoundaryCondition::Transmission(crate::layer_ops::TransmissionParams::dielectric(1.0, 2.0));
        assert!(matches!(
            xi_discs_at_order(1.0, &pair(4.0), &t, 8),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn truncation_converges_monotonically() {
        for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
            let vals: Vec<f64> = (4..=24)
                .step_by(2)
                .map(|l| xi_discs_at_order(2.0, &pair(4.0), &bc, l).unwrap())
                .collect();
            let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            for w in diffs.windows(2) {
                assert!(w[1] < w[0] || w[1] < 1e-15, "{diffs:?}");
            }
        }
    }

    #[test]
    fn signs_of_xi() {
        for k in [0.5, 1.0, 2.0] {
            let d = xi_discs(
                k,
                &pair(4.0),
                &BoundaryCondition::Dirichlet,
                &MultipoleTruncation::default(),
            )
            .unwrap();
            let n = xi_discs(
                k,
                &pair(4.0),
                &BoundaryCondition::Neumann,
                &MultipoleTruncation::default(),
            )
            .unwrap();
            assert!(d.value < 0.0 && n.value < 0.0, "{d:?} {n:?}");
        }
    }

    proptest! {
        #[test]
        fn rigid_motion_and_swap(angle in 0.0..6.3f64, sx in -3.0..3.0f64, sy in -3.0..3.0f64, k in 0.2..3.0f64) {
            let base = [Disc::new([0.0, 0.0], 1.0).unwrap(), Disc::new([3.2, 0.0], 0.6).unwrap()];
            let (c, s) = (angle.cos(), angle.sin());
            let mv = |d: &Disc| Disc::new([c * d.center[0] - s * d.center[1] + sx, s * d.center[0] + c * d.center[1] + sy], d.radius).unwrap();
            let moved = [mv(&base[1]), mv(&base[0])];
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
                let a = xi_discs_at_order(k, &base, &bc, 16).unwrap();
                let b = xi_discs_at_order(k, &moved, &bc, 16).unwrap();
                // Ξ = ln det with det ≈ 1: absolute accuracy is what survives
                prop_assert!((a - b).abs() < 1e-14);
            }
        }
    }
}

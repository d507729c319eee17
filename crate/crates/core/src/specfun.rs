//! Modified Bessel functions and free-space Green's kernels on the imaginary
//! spectral axis.
//!
//! `K_0`, `K_1` use the ascending series for `x <= 2` and Steed's continued
//! fraction (the CF2 / Temme form) above, so no platform Bessel routines are
//! involved. `I_n` uses the ascending series, switching to the Hankel
//! asymptotic expansion once `x` is large compared with `n^2`.

use crate::error::{Error, Result};
use std::f64::consts::PI;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Default floor for κ in boundary-integral assemblies.
pub const KAPPA_MIN_DEFAULT: f64 = 1e-6;

const SERIES_SWITCH: f64 = 2.0;
const I_ASYMPTOTIC_SWITCH: f64 = 30.0;

/// A point `λ = iκ` with `κ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Kappa(f64);

impl Kappa {
    /// Validates against [`KAPPA_MIN_DEFAULT`].
    pub fn new(kappa: f64) -> Result<Self> {
        Self::with_floor(kappa, KAPPA_MIN_DEFAULT)
    }

    pub fn with_floor(kappa: f64, floor: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 || kappa < floor {
            return Err(Error::domain(format!(
                "kappa must be finite and >= {floor:e}, got {kappa}"
            )));
        }
        Ok(Kappa(kappa))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} requires a finite positive argument, got {x}"
        )))
    }
}

/// Ascending series for `(K_0, K_1)`, accurate for `0 < x <= 2`.
fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    // t0 = y^k/(k!)^2, t1 = y^k/(k!(k+1)!), h = H_k.
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut h = 0.0;
    let mut sum_i0 = 1.0;
    let mut sum_i1 = 1.0;
    let mut sum_k0 = 0.0;
    // psi(1) + psi(2) = 1 - 2γ
    let mut sum_k1 = 1.0 - 2.0 * EULER_GAMMA;
    for k in 1..60 {
        let kf = k as f64;
        t0 *= y / (kf * kf);
        t1 *= y / (kf * (kf + 1.0));
        h += 1.0 / kf;
        let h_next = h + 1.0 / (kf + 1.0);
        sum_i0 += t0;
        sum_i1 += t1;
        sum_k0 += h * t0;
        sum_k1 += (h + h_next - 2.0 * EULER_GAMMA) * t1;
        if t0 < 1e-18 * sum_i0 && t1 < 1e-18 * sum_i1 {
            break;
        }
    }
    let i0 = sum_i0;
    let i1 = 0.5 * x * sum_i1;
    let k0 = -(log_half + EULER_GAMMA) * i0 + sum_k0;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * sum_k1;
    (k0, k1)
}

/// Steed's continued fraction for `(e^x K_0(x), e^x K_1(x))`, `x > 2`.
fn k01_scaled_cf(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-17;
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0e = (PI / (2.0 * x)).sqrt() / s;
    let k1e = k0e * (x + 0.5 - h) / x;
    (k0e, k1e)
}

/// `(K_0(x), K_1(x))` for `x > 0`, without argument checks.
pub fn bessel_k01(x: f64) -> (f64, f64) {
    if x <= SERIES_SWITCH {
        k01_series(x)
    } else {
        let (k0e, k1e) = k01_scaled_cf(x);
        let e = (-x).exp();
        (k0e * e, k1e * e)
    }
}

/// `(e^x K_0(x), e^x K_1(x))`.
pub fn bessel_k01_scaled(x: f64) -> (f64, f64) {
    if x <= SERIES_SWITCH {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        k01_scaled_cf(x)
    }
}

/// Modified Bessel function of the second kind `K_ν(x)` for integer `ν`.
///
/// Orders above 1 come from upward recurrence, which is stable for `K`.
/// Results underflow to `0.0` once `e^{-x}` leaves the double range.
pub fn bessel_k(nu: u32, x: f64) -> Result<f64> {
    check_positive(x, "bessel_k")?;
    Ok(*bessel_k_seq(nu, x)?.last().expect("non-empty"))
}

/// `[K_0(x), ..., K_nmax(x)]`.
pub fn bessel_k_seq(nmax: u32, x: f64) -> Result<Vec<f64>> {
    check_positive(x, "bessel_k_seq")?;
    let (k0e, k1e) = bessel_k01_scaled(x);
    let mut out = Vec::with_capacity(nmax as usize + 1);
    out.push(k0e);
    if nmax >= 1 {
        out.push(k1e);
    }
    for n in 1..nmax as usize {
        let next = out[n - 1] + 2.0 * n as f64 / x * out[n];
        out.push(next);
    }
    let e = (-x).exp();
    for v in &mut out {
        *v *= e;
    }
    Ok(out)
}

/// `[ln K_0(x), ..., ln K_nmax(x)]`, free of overflow for tiny `x` and large orders.
pub fn ln_bessel_k_seq(nmax: u32, x: f64) -> Result<Vec<f64>> {
    check_positive(x, "ln_bessel_k_seq")?;
    let (k0e, k1e) = bessel_k01_scaled(x);
    let mut out = Vec::with_capacity(nmax as usize + 1);
    out.push(k0e.ln() - x);
    if nmax >= 1 {
        out.push(k1e.ln() - x);
    }
    // ratio r_n = K_{n+1}/K_n obeys r_n = 1/r_{n-1} + 2n/x
    let mut ratio = k1e / k0e;
    for n in 1..nmax as usize {
        ratio = 1.0 / ratio + 2.0 * n as f64 / x;
        let prev = out[n];
        out.push(prev + ratio.ln());
    }
    Ok(out)
}

/// Ascending series `Σ_k (x²/4)^k n!/(k!(n+k)!)`, i.e. `I_n(x)/((x/2)^n/n!)`.
fn i_series_normalized(n: u32, x: f64) -> f64 {
    let y = 0.25 * x * x;
    let nf = n as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= y / (k * (nf + k));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum
}

/// `(x/2)^n / n!`, computed by a running product.
fn i_leading(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= half / k as f64;
    }
    lead
}

/// Hankel expansion of `e^{-x} I_n(x)`, used for `x >> n^2`.
fn i_asymptotic_scaled(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

fn use_asymptotic(n: u32, x: f64) -> bool {
    x > I_ASYMPTOTIC_SWITCH && (n as f64) * (n as f64) <= 0.5 * x
}

/// Modified Bessel function of the first kind `I_n(x)`, `x >= 0`.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("bessel_i requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    if use_asymptotic(n, x) {
        Ok(i_asymptotic_scaled(n, x) * x.exp())
    } else {
        Ok(i_leading(n, x) * i_series_normalized(n, x))
    }
}

/// `(I_0(x), I_1(x))` for `x >= 0`, without argument checks.
pub fn bessel_i01(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (1.0, 0.0);
    }
    if use_asymptotic(1, x) {
        let e = x.exp();
        (i_asymptotic_scaled(0, x) * e, i_asymptotic_scaled(1, x) * e)
    } else {
        (i_series_normalized(0, x), 0.5 * x * i_series_normalized(1, x))
    }
}

/// `ln I_n(x)` for `x > 0`.
pub fn ln_bessel_i(n: u32, x: f64) -> Result<f64> {
    check_positive(x, "ln_bessel_i")?;
    if use_asymptotic(n, x) {
        Ok(x + i_asymptotic_scaled(n, x).ln())
    } else {
        let nf = n as f64;
        Ok(nf * (0.5 * x).ln() - libm::lgamma(nf + 1.0) + i_series_normalized(n, x).ln())
    }
}

/// Free Green's function of `-Δ + κ²` as a function of distance, with its
/// first two radial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialGreen {
    pub g: f64,
    pub dg: f64,
    pub d2g: f64,
}

/// Radial profile of the Green's function in dimension `dim`, `r > 0`.
pub fn radial_green(dim: usize, kappa: f64, r: f64) -> RadialGreen {
    match dim {
        1 => {
            let e = (-kappa * r).exp();
            RadialGreen {
                g: e / (2.0 * kappa),
                dg: -0.5 * e,
                d2g: 0.5 * kappa * e,
            }
        }
        2 => {
            let z = kappa * r;
            let (k0, k1) = bessel_k01(z);
            let c = 1.0 / (2.0 * PI);
            RadialGreen {
                g: c * k0,
                dg: -c * kappa * k1,
                d2g: c * kappa * kappa * (k0 + k1 / z),
            }
        }
        3 => {
            let z = kappa * r;
            let e = (-z).exp() / (4.0 * PI);
            RadialGreen {
                g: e / r,
                dg: -e * (z + 1.0) / (r * r),
                d2g: e * (z * z + 2.0 * z + 2.0) / (r * r * r),
            }
        }
        _ => unreachable!("dimension validated by caller"),
    }
}

/// Value and derivatives of `G(x, y)`.
///
/// Entries beyond the first `dim` components of `grad_x` and `hess_xy` are zero.
/// `hess_xy[a][b] = ∂²G/∂x_a∂y_b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenEval {
    pub value: f64,
    pub grad_x: [f64; 3],
    pub hess_xy: [[f64; 3]; 3],
}

fn separation(dim: usize, x: &[f64], y: &[f64]) -> Result<([f64; 3], f64)> {
    if !(1..=3).contains(&dim) {
        return Err(Error::domain(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if x.len() != dim || y.len() != dim {
        return Err(Error::domain(format!(
            "points must have {dim} coordinates, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut u = [0.0; 3];
    for k in 0..dim {
        u[k] = x[k] - y[k];
    }
    let r = u.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(Error::domain("Green's function evaluated at x == y"));
    }
    Ok((u, r))
}

/// Free Green's function `G(x, y)` of `-Δ + κ²` in dimension 1, 2 or 3.
pub fn green(dim: usize, kappa: Kappa, x: &[f64], y: &[f64]) -> Result<GreenEval> {
    let (u, r) = separation(dim, x, y)?;
    let rg = radial_green(dim, kappa.value(), r);
    let mut grad_x = [0.0; 3];
    let mut hess_xy = [[0.0; 3]; 3];
    let radial = rg.d2g - rg.dg / r;
    for a in 0..dim {
        let ua = u[a] / r;
        grad_x[a] = rg.dg * ua;
        for b in 0..dim {
            let ub = u[b] / r;
            let delta = if a == b { rg.dg / r } else { 0.0 };
            hess_xy[a][b] = -(radial * ua * ub + delta);
        }
    }
    Ok(GreenEval {
        value: rg.g,
        grad_x,
        hess_xy,
    })
}

/// Normal derivative in the second argument, `ν_y · ∇_y G(x, y)`.
pub fn green_dn(dim: usize, kappa: Kappa, x: &[f64], y: &[f64], normal_y: &[f64]) -> Result<f64> {
    if normal_y.len() != dim {
        return Err(Error::domain("normal has wrong dimension"));
    }
    let norm = normal_y.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("normal must be a unit vector, |ν| = {norm}")));
    }
    let ev = green(dim, kappa, x, y)?;
    Ok(-(0..dim).map(|a| ev.grad_x[a] * normal_y[a]).sum::<f64>())
}

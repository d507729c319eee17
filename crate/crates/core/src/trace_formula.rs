//! Spectral integrals of Ξ(iλ): traces of the relative operators `R_s`
//! and Casimir energies.
//!
//! All of them reduce to the weighted integral
//!
//! ```text
//! I_p[Ξ] = ∫_m^∞ λ (λ² - m²)^{p-1} Ξ(iλ) dλ.
//! ```
//!
//! The first piece `[m, m + κ₀]` is integrated in `w = (λ² - m²)^p`, where the
//! weight becomes the constant `1/(2p)` and the endpoint singularity at `λ = m`
//! disappears. Beyond `m + κ₀` the upper limit doubles until a fitted
//! exponential tail is negligible.

use crate::error::{Error, Result};
use crate::geometry::{discretize, Configuration};
use crate::quadrature::{integrate, QuadOptions};
use crate::xi::{log_linear_slope, BoundaryCondition, XiSolver};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    /// Ξ is evaluated at `max(λ, kappa_min)`.
    pub kappa_min: f64,
    /// Width of the first integration piece above `m`.
    pub kappa_start: f64,
    /// Upper limits stop doubling here.
    pub kappa_max: f64,
    /// Relative tolerance for the integral and for the truncated tail.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Fitted decay rates below this are not trusted for truncation.
    pub min_decay_rate: f64,
    pub max_evals: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            kappa_min: 0.0,
            kappa_start: 2.0,
            kappa_max: 1e4,
            rel_tol: 1e-11,
            abs_tol: 1e-15,
            min_decay_rate: 0.0,
            max_evals: 40_000,
        }
    }
}

/// Value of a spectral integral with its error budget.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    /// Upper integration limit in λ.
    pub kappa_max: f64,
    pub n_evaluations: usize,
    pub warnings: Vec<String>,
}

impl EnergyResult {
    fn scaled(mut self, c: f64) -> Self {
        self.value *= c;
        self.abs_error_estimate *= c.abs();
        self
    }
}

/// Caches Ξ by the bit pattern of its argument.
pub struct MemoXi<F> {
    f: F,
    cache: Mutex<HashMap<u64, f64>>,
}

impl<F: Fn(f64) -> Result<f64> + Sync> MemoXi<F> {
    pub fn new(f: F) -> Self {
        MemoXi {
            f,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn eval(&self, kappa: f64) -> Result<f64> {
        if let Some(v) = self.cache.lock().unwrap().get(&kappa.to_bits()) {
            return Ok(*v);
        }
        let v = (self.f)(kappa)?;
        self.cache.lock().unwrap().insert(kappa.to_bits(), v);
        Ok(v)
    }

    /// Number of distinct arguments evaluated.
    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `I_p[Ξ] = ∫_m^∞ λ(λ² - m²)^{p-1} Ξ(iλ) dλ` for `p > 0`.
pub fn weighted_xi_integral<F>(xi: F, m: f64, p: f64, opts: &TraceOptions) -> Result<EnergyResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::domain(format!("mass must be finite and >= 0, got {m}")));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::domain(format!("weight exponent must be positive, got {p}")));
    }
    let memo = MemoXi::new(xi);
    let kmin = opts.kappa_min;
    let at = |lam: f64| memo.eval(lam.max(kmin));
    let mut warnings = Vec::new();
    let mut quad = QuadOptions {
        abs_tol: opts.abs_tol,
        rel_tol: opts.rel_tol,
        max_evals: opts.max_evals,
        batch: 8,
    };

    let mut upper = m + opts.kappa_start;
    let w_top = (upper * upper - m * m).powf(p);
    let first = integrate(
        |w: f64| {
            let lam = (m * m + w.powf(1.0 / p)).sqrt();
            Ok(at(lam)? / (2.0 * p))
        },
        0.0,
        w_top,
        &quad,
    )?;
    let mut value = first.value;
    let mut error = first.error;
    let mut converged = first.converged;

    let weight = |lam: f64| lam * (lam * lam - m * m).powf(p - 1.0);
    loop {
        let probes = [0.75 * upper, 0.875 * upper, upper];
        let vals = probes.iter().map(|&l| at(l)).collect::<Result<Vec<_>>>()?;
        // an underflowed sample means the tail is below representable size
        let tail = if vals.contains(&0.0) {
            Some(0.0)
        } else {
            let pts: Vec<(f64, f64)> = probes.iter().zip(&vals).map(|(&l, v)| (l, v.abs().ln())).collect();
            let rate = -log_linear_slope(&pts).unwrap();
            // a growing Ξ may still turn over; keep extending until the cap
            if rate <= 0.0 && 2.0 * upper > opts.kappa_max {
                return Err(Error::NotConverged(format!(
                    "xi does not decay near lambda = {upper}: samples {vals:?} at {probes:?}"
                )));
            }
            (rate > 0.0 && rate > opts.min_decay_rate).then(|| 2.0 * vals[2].abs() * weight(upper) / rate)
        };
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if let Some(t) = tail {
            if t <= target {
                error += t;
                break;
            }
        }
        if 2.0 * upper > opts.kappa_max {
            let t = tail.unwrap_or(vals[2].abs() * weight(upper) * upper);
            warnings.push(format!("upper limit capped at {upper}; tail estimate {t:e}"));
            error += t;
            break;
        }
        quad.abs_tol = (0.5 * target).max(opts.abs_tol);
        let piece = integrate(|lam: f64| Ok(weight(lam) * at(lam)?), upper, 2.0 * upper, &quad)?;
        value += piece.value;
        error += piece.error;
        converged &= piece.converged;
        upper *= 2.0;
    }
    if !converged {
        warnings.push("adaptive quadrature hit its evaluation budget".into());
    }
    if kmin > m {
        // the constant extrapolation below kappa_min
        let xi_min = at(kmin)?;
        error += 2.0 * xi_min.abs() * (kmin * kmin - m * m).powf(p) / (2.0 * p);
    }
    Ok(EnergyResult {
        value,
        abs_error_estimate: error,
        kappa_max: upper,
        n_evaluations: memo.len(),
        warnings,
    })
}

/// `tr R_s = (2s/π) sin(πs) ∫_m^∞ λ(λ² - m²)^{s-1} Ξ(iλ) dλ` for `s ∈ (0, 1)`.
pub fn trace_rs<F>(xi: F, s: f64, m: f64, opts: &TraceOptions) -> Result<EnergyResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0, 1), got {s}")));
    }
    let r = weighted_xi_integral(xi, m, s, opts)?;
    Ok(r.scaled(2.0 * s / PI * (PI * s).sin()))
}

/// Casimir energy `½ tr R_{1/2}` of a Ξ function.
pub fn energy_from_xi<F>(xi: F, m: f64, opts: &TraceOptions) -> Result<EnergyResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    Ok(trace_rs(xi, 0.5, m, opts)?.scaled(0.5))
}

/// Prefactor of the dimensionally reduced trace,
/// `tr R̃_s = -1/(2π Γ(-s) Γ(1+s)) ∫_m^∞ λ(λ² - m²)^s Ξ(iλ) dλ`.
pub fn reduced_prefactor(s: f64) -> f64 {
    -1.0 / (2.0 * PI * libm::tgamma(-s) * libm::tgamma(1.0 + s))
}

/// Trace of `R̃_s` for a configuration translation-invariant in two extra
/// dimensions, per unit transverse area.
pub fn reduced_trace_rs<F>(xi: F, s: f64, m: f64, opts: &TraceOptions) -> Result<EnergyResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("s must lie in (0, 1), got {s}")));
    }
    let r = weighted_xi_integral(xi, m, s + 1.0, opts)?;
    Ok(r.scaled(reduced_prefactor(s)))
}

/// Default κ floor for the BEM Ξ integrands.
pub fn default_kappa_min(bc: &BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Neumann => 1e-4,
        _ => 1e-6,
    }
}

/// Casimir energy of a planar configuration with the BEM Ξ at the given
/// per-component resolution.
pub fn casimir_energy(
    bc: BoundaryCondition,
    config: &Configuration,
    resolution: &[usize],
    m: f64,
    opts: &TraceOptions,
) -> Result<EnergyResult> {
    let mesh = discretize(config, resolution)?;
    let solver = XiSolver::new(&mesh, bc);
    let delta = config.min_separation()?;
    let mut o = *opts;
    o.min_decay_rate = o.min_decay_rate.max(0.5 * delta);
    energy_from_xi(|k| solver.xi(k), m, &o)
}

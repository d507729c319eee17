//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Each round bisects the intervals with the largest error estimates and
//! evaluates all new nodes in parallel. The summation order depends only on
//! the interval list, never on worker scheduling, so results are bitwise
//! reproducible for any thread count.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Kronrod abscissae on [-1, 1], positive half, descending; `XGK[7] = 0`.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

/// Gauss weights at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// The 15 Kronrod nodes of `[a, b]`, in a fixed order.
fn nodes(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut x = [0.0; 15];
    for j in 0..7 {
        x[2 * j] = c - h * XGK[j];
        x[2 * j + 1] = c + h * XGK[j];
    }
    x[14] = c;
    x
}

/// Kronrod estimate and `|K15 - G7|` from function values in [`nodes`] order.
fn rule(a: f64, b: f64, f: &[f64]) -> (f64, f64) {
    let h = 0.5 * (b - a);
    let mut k = WGK[7] * f[14];
    let mut g = WG[3] * f[14];
    for j in 0..7 {
        let pair = f[2 * j] + f[2 * j + 1];
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on integrand evaluations.
    pub max_evals: usize,
    /// Intervals bisected per round.
    pub batch: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_evals: 20_000,
            batch: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub n_evals: usize,
    /// Whether the requested tolerance was met.
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn evaluate<F>(f: &F, segs: &[(f64, f64)]) -> Result<Vec<Segment>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let xs: Vec<f64> = segs.iter().flat_map(|&(a, b)| nodes(a, b)).collect();
    let fx: Vec<Result<f64>> = xs.par_iter().map(|&x| f(x)).collect();
    let mut vals = Vec::with_capacity(fx.len());
    for (x, v) in xs.iter().zip(fx) {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::Quadrature(format!("integrand is not finite at {x}: {v}")));
        }
        vals.push(v);
    }
    Ok(segs
        .iter()
        .zip(vals.chunks(15))
        .map(|(&(a, b), fv)| {
            let (value, error) = rule(a, b, fv);
            Segment { a, b, value, error }
        })
        .collect())
}

/// `∫_a^b f` by global adaptive G7K15.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`
/// or the evaluation budget is spent; the latter is reported through
/// `converged = false` rather than an error.
pub fn integrate<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("interval [{a}, {b}] is not finite")));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            n_evals: 0,
            converged: true,
        });
    }
    let mut segs = evaluate(&f, &[(a, b)])?;
    let mut n_evals = 15;
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || n_evals + 30 > opts.max_evals {
            return Ok(QuadResult {
                value,
                error,
                n_evals,
                converged: error <= target,
            });
        }
        // worst intervals first; ties broken by position for determinism
        let mut order: Vec<usize> = (0..segs.len()).collect();
        order.sort_by(|&i, &j| segs[j].error.total_cmp(&segs[i].error).then(i.cmp(&j)));
        let budget = (opts.max_evals - n_evals) / 30;
        let take = opts.batch.max(1).min(budget).min(order.len());
        let mut chosen: Vec<usize> = order[..take].iter().copied().filter(|&i| segs[i].error > 0.0).collect();
        if chosen.is_empty() {
            return Ok(QuadResult {
                value,
                error,
                n_evals,
                converged: error <= target,
            });
        }
        chosen.sort_unstable();
        let mut halves = Vec::with_capacity(2 * chosen.len());
        for &i in &chosen {
            let s = segs[i];
            let m = 0.5 * (s.a + s.b);
            if m <= s.a || m >= s.b {
                return Ok(QuadResult {
                    value,
                    error,
                    n_evals,
                    converged: false,
                });
            }
            halves.push((s.a, m));
            halves.push((m, s.b));
        }
        let fresh = evaluate(&f, &halves)?;
        n_evals += 15 * fresh.len();
        let mut next = Vec::with_capacity(segs.len() + chosen.len());
        let mut fresh_iter = fresh.chunks(2);
        let mut pick = chosen.iter().peekable();
        for (i, s) in segs.iter().enumerate() {
            if pick.peek() == Some(&&i) {
                pick.next();
                next.extend_from_slice(fresh_iter.next().unwrap());
            } else {
                next.push(*s);
            }
        }
        segs = next;
    }
}

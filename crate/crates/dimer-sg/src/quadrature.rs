//! Adaptive Gauss-Kronrod quadrature on finite intervals and the periodic
//! trapezoid rule.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

struct Piece {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64) -> Piece {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kron += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).norm();
    Piece {
        lo,
        hi,
        value,
        error,
    }
}

/// Integrates a complex-valued `f` over `[lo, hi]` by globally adaptive
/// bisection of the interval with the largest Kronrod error estimate.
pub fn integrate_complex<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> Complex64,
{
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain("integration limits must be finite"));
    }
    if lo == hi {
        return Ok(Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        });
    }
    let mut pieces = vec![kronrod(&f, lo, hi)];
    loop {
        let value: Complex64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::accuracy("non-finite integrand", f64::INFINITY, tol.abs));
        }
        if error <= tol.abs.max(tol.rel * value.norm()) {
            return Ok(Estimate { value, error });
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::accuracy(
                "adaptive quadrature hit the interval limit",
                error,
                tol.abs.max(tol.rel * value.norm()),
            ));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        pieces.push(kronrod(&f, p.lo, mid));
        pieces.push(kronrod(&f, mid, p.hi));
    }
}

/// Real-valued convenience wrapper around [`integrate_complex`].
pub fn integrate<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let est = integrate_complex(|x| Complex64::new(f(x), 0.0), lo, hi, tol)?;
    Ok((est.value.re, est.error))
}

/// Mean of `f` over the `n` midpoint nodes `θ_j = 2π(j + ½)/n` of the circle.
/// For a smooth periodic integrand this is the trapezoid approximation of
/// `(1/2π)∫₀^{2π} f(θ) dθ`.
pub fn periodic_mean<F>(n: usize, f: F) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let step = std::f64::consts::TAU / n as f64;
    let sum: Complex64 = (0..n).map(|j| f(step * (j as f64 + 0.5))).sum();
    sum / n as f64
}

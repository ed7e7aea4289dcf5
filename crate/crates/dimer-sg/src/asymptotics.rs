//! Scaling limits of the inverse Kasteleyn matrix under a = 1 − λε.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel_exact::{g_map, i_pow, ia_prefetch, kinv, kinv_indices, WeightParams};
use crate::lattice::VertexG;
use crate::par;
use crate::quadrature::{integrate_complex, Tolerance};
use crate::special_functions::{
    identity_rhs, k0_k1, radial_exponential, root_pair, tail_cutoff, BesselIdentity, RadialPair,
    EULER_GAMMA,
};

/// Parity case (ε1, ε2) of a white/black pair: x ∈ W_{ε1}, y ∈ B_{ε2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParityCase {
    pub eps1: u8,
    pub eps2: u8,
}

impl ParityCase {
    pub const ALL: [ParityCase; 4] = [
        ParityCase { eps1: 0, eps2: 0 },
        ParityCase { eps1: 0, eps2: 1 },
        ParityCase { eps1: 1, eps2: 0 },
        ParityCase { eps1: 1, eps2: 1 },
    ];

    pub fn new(eps1: u8, eps2: u8) -> Result<Self> {
        if eps1 > 1 || eps2 > 1 {
            return Err(Error::domain(format!("parity case ({eps1}, {eps2}) out of range")));
        }
        Ok(Self { eps1, eps2 })
    }

    fn sign1(&self) -> f64 {
        if self.eps1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn sign2(&self) -> f64 {
        if self.eps2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl std::fmt::Display for ParityCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.eps1, self.eps2)
    }
}

/// The sign pair (σ1, σ2).
pub fn sigmas(alpha: f64, beta: f64, case: ParityCase) -> (i8, i8) {
    let sign = |x: f64| if x > 0.0 { 1 } else { -1 };
    let s1 = if alpha != -beta {
        sign(alpha + beta)
    } else if case.eps1 == 0 {
        -1
    } else {
        1
    };
    let s2 = if alpha != beta {
        sign(alpha - beta)
    } else if case.eps2 == 0 {
        1
    } else {
        -1
    };
    (s1, s2)
}

/// Scaled separation data for one parity case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementParams {
    pub alpha: f64,
    pub beta: f64,
    pub case: ParityCase,
    pub sigma1: i8,
    pub sigma2: i8,
    pub r1: f64,
    pub r2: f64,
    pub z: f64,
}

impl DisplacementParams {
    pub fn new(alpha: f64, beta: f64, case: ParityCase) -> Result<Self> {
        if alpha == 0.0 && beta == 0.0 {
            return Err(Error::domain("displacement (0, 0) is excluded"));
        }
        let (sigma1, sigma2) = sigmas(alpha, beta, case);
        Ok(Self {
            alpha,
            beta,
            case,
            sigma1,
            sigma2,
            r1: 0.5 * (alpha - beta).abs(),
            r2: 0.5 * (alpha + beta).abs(),
            z: alpha.hypot(beta),
        })
    }

    pub fn radial(&self) -> RadialPair {
        RadialPair::new(self.r1, self.r2).expect("nonzero displacement")
    }

    /// (−1)^{ε1}σ1 r2 − (−1)^{ε2}σ2 r1, the K1 coefficient numerator.
    pub fn k1_coefficient(&self) -> f64 {
        self.case.sign1() * self.sigma1 as f64 * self.r2 - self.case.sign2() * self.sigma2 as f64 * self.r1
    }
}

/// ε, λ and the derived weight a = 1 − λε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub eps: f64,
    pub lambda: f64,
}

impl ScalingParams {
    pub fn new(eps: f64, lambda: f64) -> Result<Self> {
        if !(eps > 0.0 && lambda > 0.0) {
            return Err(Error::domain(format!("need eps > 0 and lambda > 0, got ({eps}, {lambda})")));
        }
        if lambda * eps >= 1.0 {
            return Err(Error::domain(format!("a = 1 - lambda*eps must be positive, got {}", 1.0 - lambda * eps)));
        }
        Ok(Self { eps, lambda })
    }

    pub fn a(&self) -> f64 {
        1.0 - self.lambda * self.eps
    }

    pub fn weights(&self) -> WeightParams {
        WeightParams::new(self.a()).expect("validated in constructor")
    }

    /// The sine-Gordon coupling |z| = λ e^{γ/2}/(4√2 π) matched to λ.
    pub fn z_sg(&self) -> f64 {
        self.lambda * (0.5 * EULER_GAMMA).exp() / (4.0 * SQRT_2 * PI)
    }
}

/// g(w) = a^{ε2} A^{σ2(1−ε2)} B^{σ1(2ε1−1)(1−ε2)} + a^{1−ε2} A^{−σ2ε2} B^{σ1ε2(2ε1−1)}
/// with A = −iG(w), B = −iG(1/w).
pub fn g_fn(w: Complex64, case: ParityCase, sigma1: i8, sigma2: i8, p: &WeightParams) -> Result<Complex64> {
    let mi = -Complex64::i();
    let ga = mi * g_map(w, p)?;
    let gb = mi * g_map(1.0 / w, p)?;
    let (e1, e2) = (case.eps1 as i32, case.eps2 as i32);
    let (s1, s2) = (sigma1 as i32, sigma2 as i32);
    let a = p.a();
    let t1 = a.powi(e2) * ga.powi(s2 * (1 - e2)) * gb.powi(s1 * (2 * e1 - 1) * (1 - e2));
    let t2 = a.powi(1 - e2) * ga.powi(-s2 * e2) * gb.powi(s1 * e2 * (2 * e1 - 1));
    Ok(t1 + t2)
}

/// g̃(t) = −1 − ((−1)^{ε1}σ1/√2)√(1−4it) + ((−1)^{ε2}σ2/√2)√(1+4it).
pub fn g_tilde(t: f64, case: ParityCase, sigma1: i8, sigma2: i8) -> Complex64 {
    let (sp, sm) = root_pair(t);
    -1.0 - sm * (case.sign1() * sigma1 as f64 * FRAC_1_SQRT_2)
        + sp * (case.sign2() * sigma2 as f64 * FRAC_1_SQRT_2)
}

/// f(t) = r1 log(−iG(ie^{it})) + r2 log(−iG(−ie^{−it})), principal logs.
pub fn saddle_f(t: f64, r1: f64, r2: f64, p: &WeightParams) -> Result<Complex64> {
    if !(t > 0.0 && t < PI / 2.0) {
        return Err(Error::domain(format!("saddle function needs t in (0, π/2), got {t}")));
    }
    let i = Complex64::i();
    let a = -i * g_map(i * Complex64::from_polar(1.0, t), p)?;
    let b = -i * g_map(-i * Complex64::from_polar(1.0, -t), p)?;
    Ok(a.ln() * r1 + b.ln() * r2)
}

/// 2∫₀^∞ dt (1+16t²)^{-1/2} exp(−(r1√(1+4it)+r2√(1−4it))/√2) g̃(t).
pub fn limit_integral(case: ParityCase, sigma1: i8, sigma2: i8, p: RadialPair) -> Result<Complex64> {
    let (t_max, tail) = tail_cutoff(p.r1() + p.r2(), true);
    if tail > 1e-14 {
        return Err(Error::accuracy("limit integral tail", tail, 1e-14));
    }
    let f = |t: f64| {
        radial_exponential(p.r1(), p.r2(), t) * g_tilde(t, case, sigma1, sigma2) / (1.0 + 16.0 * t * t).sqrt()
    };
    let est = integrate_complex(
        |s| f(s * s) * (2.0 * s),
        0.0,
        t_max.sqrt(),
        Tolerance {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 8000,
        },
    )?;
    Ok(est.value * 2.0)
}

/// Real part of [`limit_integral`] assembled from the three closed-form
/// Bessel identities: −K0(ρ) − (−1)^{ε1}σ1 · r2 K1(ρ)/ρ + (−1)^{ε2}σ2 · r1 K1(ρ)/ρ.
pub fn limit_integral_closed_form(case: ParityCase, sigma1: i8, sigma2: i8, p: RadialPair) -> Result<f64> {
    let k0_term = identity_rhs(BesselIdentity::K0, p)?;
    let sum = identity_rhs(BesselIdentity::K1Sum, p)?;
    let diff = identity_rhs(BesselIdentity::K1Diff, p)?;
    // the √(1+4it) and √(1−4it) pieces separately
    let plus = 0.5 * (sum + diff);
    let minus = 0.5 * (sum - diff);
    Ok(-k0_term - case.sign1() * sigma1 as f64 * minus + case.sign2() * sigma2 as f64 * plus)
}

/// Closed-form limit of the rescaled K⁻¹ for separation (α, β).
pub fn kinv_limit(case: ParityCase, alpha: f64, beta: f64, lambda: f64) -> Result<Complex64> {
    if alpha == 0.0 && beta == 0.0 {
        return Err(Error::domain("displacement (0, 0) is excluded"));
    }
    let z = alpha.hypot(beta);
    let (k0v, k1v) = k0_k1(lambda * z * FRAC_1_SQRT_2)?;
    let base = lambda / (2.0 * PI) * k0v;
    let coef = lambda / (SQRT_2 * PI * z) * k1v;
    let i = Complex64::i();
    Ok(match (case.eps1, case.eps2) {
        (0, 0) => i * (base + beta * coef),
        (0, _) => Complex64::new(-base - alpha * coef, 0.0),
        (_, 0) => Complex64::new(-base + alpha * coef, 0.0),
        _ => i * (base - beta * coef),
    })
}

/// The pair (x(j), y(i)) for separation (α, β) = (α_j − α_i, β_j − β_i) with
/// y(i) anchored in the a-face at (1, 1).
pub fn scaled_pair(case: ParityCase, alpha: f64, beta: f64, eps: f64) -> Result<(VertexG, VertexG)> {
    let a_steps = integral_steps(alpha, eps)?;
    let b_steps = integral_steps(beta, eps)?;
    let e1 = case.eps1 as i64;
    let e2 = case.eps2 as i64;
    let y = VertexG::new(1 + 2 * e2 - 1, 1)?;
    let x = VertexG::new(1 + a_steps - b_steps, 1 + a_steps + b_steps + 2 * e1 - 1)?;
    Ok((x, y))
}

fn integral_steps(v: f64, eps: f64) -> Result<i64> {
    let q = v / eps;
    let r = q.round();
    if (q - r).abs() > 1e-9 || (r as i64).rem_euclid(2) != 0 {
        return Err(Error::Schedule(format!(
            "{v}/{eps} = {q} is not an even integer; pick eps from the admissible schedule"
        )));
    }
    Ok(r as i64)
}

/// ((−1)^{(α+β)/(2ε)}/ε) · K⁻¹(x(j), y(i)) at a = 1 − λε.
pub fn scaled_kinv(case: ParityCase, alpha: f64, beta: f64, s: &ScalingParams) -> Result<Complex64> {
    let (x, y) = scaled_pair(case, alpha, beta, s.eps)?;
    let half = (integral_steps(alpha, s.eps)? + integral_steps(beta, s.eps)?) / 2;
    let sign = if half.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Ok(kinv(&x, &y, &s.weights())?.value * (sign / s.eps))
}

/// K⁻¹(x(j), y(i)) from the quarter-circle integral
/// −(i^{1+h}/((1+a²)π)) Re ∫₀^{π/2} dt/|e^{2it}−2c| · A^{|α−β|/2ε} B^{|α+β|/2ε} g(ie^{it}),
/// with A = −iG(ie^{it}), B = −iG(−ie^{−it}).
pub fn kinv_quarter_circle(case: ParityCase, alpha: f64, beta: f64, eps: f64, p: &WeightParams) -> Result<Complex64> {
    let d = DisplacementParams::new(alpha, beta, case)?;
    let m = ((alpha - beta).abs() / (2.0 * eps)).round() as i32;
    let n = ((alpha + beta).abs() / (2.0 * eps)).round() as i32;
    let c = p.c();
    let i = Complex64::i();
    let f = |t: f64| -> Complex64 {
        let w = i * Complex64::from_polar(1.0, t);
        let a = -i * g_map(w, p).unwrap();
        let b = -i * g_map(-i * Complex64::from_polar(1.0, -t), p).unwrap();
        let g = g_fn(w, case, d.sigma1, d.sigma2, p).unwrap();
        a.powi(m) * b.powi(n) * g / (Complex64::from_polar(1.0, 2.0 * t) - 2.0 * c).norm()
    };
    let est = integrate_complex(
        f,
        0.0,
        PI / 2.0,
        Tolerance {
            abs: 1e-14,
            rel: 1e-12,
            max_intervals: 20_000,
        },
    )?;
    let h = crate::lattice::parity_h(case.eps1, case.eps2);
    let a = p.a();
    Ok(-i_pow(1 + h) / ((1.0 + a * a) * PI) * est.value.re)
}

/// ε schedule s/(4m) with s = |α|, or |β| when α = 0.
pub fn epsilon_schedule(alpha: f64, beta: f64, ms: &[u32]) -> Result<Vec<f64>> {
    let s = if alpha != 0.0 { alpha.abs() } else { beta.abs() };
    if s == 0.0 {
        return Err(Error::domain("displacement (0, 0) is excluded"));
    }
    ms.iter()
        .map(|&m| {
            let eps = s / (4.0 * m as f64);
            integral_steps(alpha, eps)?;
            integral_steps(beta, eps)?;
            Ok(eps)
        })
        .collect()
}

/// One row of a convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub case: ParityCase,
    pub alpha: f64,
    pub beta: f64,
    pub exact: Complex64,
    pub limit: Complex64,
    pub abs_err: f64,
}

/// Exact rescaled kernel against its closed-form limit along a schedule.
pub fn convergence_sweep(
    case: ParityCase,
    alpha: f64,
    beta: f64,
    lambda: f64,
    eps_list: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    let limit = kinv_limit(case, alpha, beta, lambda)?;
    eps_list
        .iter()
        .map(|&eps| {
            let s = ScalingParams::new(eps, lambda)?;
            let (x, y) = scaled_pair(case, alpha, beta, eps)?;
            ia_prefetch(&kinv_indices(&x, &y)?, &s.weights())?;
            let exact = scaled_kinv(case, alpha, beta, &s)?;
            Ok(ConvergenceRow {
                eps,
                case,
                alpha,
                beta,
                exact,
                limit,
                abs_err: (exact - limit).norm(),
            })
        })
        .collect()
}

/// Runs several sweeps, sharing one I_a sweep per ε across all of them.
pub fn convergence_sweeps(
    jobs: &[(ParityCase, f64, f64)],
    lambda: f64,
    eps_of: impl Fn(f64, f64) -> Result<Vec<f64>>,
) -> Result<Vec<Vec<ConvergenceRow>>> {
    let mut by_eps: std::collections::BTreeMap<u64, Vec<(i64, i64)>> = Default::default();
    let mut schedules = Vec::new();
    for &(case, alpha, beta) in jobs {
        let eps_list = eps_of(alpha, beta)?;
        for &eps in &eps_list {
            let (x, y) = scaled_pair(case, alpha, beta, eps)?;
            by_eps.entry(eps.to_bits()).or_default().extend(kinv_indices(&x, &y)?);
        }
        schedules.push(eps_list);
    }
    for (bits, idx) in &by_eps {
        let s = ScalingParams::new(f64::from_bits(*bits), lambda)?;
        ia_prefetch(idx, &s.weights())?;
    }
    let out = par::map_range(jobs.len(), |j| {
        let (case, alpha, beta) = jobs[j];
        convergence_sweep(case, alpha, beta, lambda, &schedules[j])
    });
    out.into_iter().collect()
}

/// Least-squares slope of log(err) against log(eps).
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> Result<f64> {
    if eps.len() != err.len() || eps.len() < 2 {
        return Err(Error::domain("slope fit needs at least two matching points"));
    }
    if eps.iter().chain(err).any(|v| !(*v > 0.0)) {
        return Err(Error::domain("slope fit needs positive values"));
    }
    let xs: Vec<f64> = eps.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

//! Modified Bessel functions K0 and K1, plus the oscillatory integral
//! representations of K0(√(r1²+r2²)) and K1(√(r1²+r2²)) used by the
//! asymptotic formulas.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_complex, Tolerance};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_CUTOFF: f64 = 2.0;

/// K0(x) for x > 0.
pub fn k0(x: f64) -> Result<f64> {
    k0_k1(x).map(|(a, _)| a)
}

/// K1(x) for x > 0.
pub fn k1(x: f64) -> Result<f64> {
    k0_k1(x).map(|(_, b)| b)
}

/// Both K0(x) and K1(x); cheaper than two separate calls.
pub fn k0_k1(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::domain(format!("K0/K1 need x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok((0.0, 0.0));
    }
    Ok(if x <= SERIES_CUTOFF {
        small_x(x)
    } else {
        steed_cf2(x)
    })
}

// Ascending series:
//   K0 = -(ln(x/2)+γ) I0 + Σ H_k q^k/(k!)²
//   K1 = 1/x + ln(x/2) I1 - (x/4) Σ (ψ(k+1)+ψ(k+2)) q^k/(k!(k+1)!)
// with q = x²/4 and ψ(n+1) = H_n - γ.
fn small_x(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut t0 = 1.0; // q^k/(k!)²
    let mut harmonic = 0.0; // H_k
    for k in 0..60 {
        let kf = k as f64;
        let t1 = t0 / (kf + 1.0); // q^k/(k!(k+1)!)
        i0 += t0;
        i1 += t1;
        s0 += harmonic * t0;
        let h_next = harmonic + 1.0 / (kf + 1.0);
        s1 += (harmonic + h_next - 2.0 * EULER_GAMMA) * t1;
        if t0 < 1e-18 * i0 && k > 2 {
            break;
        }
        t0 *= q / ((kf + 1.0) * (kf + 1.0));
        harmonic = h_next;
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(log_half + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

// Steed's continued fraction for K_ν with ν = 0, followed by the
// Wronskian-free relation K1 = K0 (x + ½ - h)/x.
fn steed_cf2(x: f64) -> (f64, f64) {
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
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// A point (r1, r2) of the closed first quadrant, excluding the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPair {
    r1: f64,
    r2: f64,
}

impl RadialPair {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 >= 0.0 && r2 >= 0.0) || !r1.is_finite() || !r2.is_finite() {
            return Err(Error::domain(format!("radial pair needs r1, r2 >= 0, got ({r1}, {r2})")));
        }
        if r1 == 0.0 && r2 == 0.0 {
            return Err(Error::domain("radial pair (0, 0) is excluded"));
        }
        Ok(Self { r1, r2 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    /// √(r1² + r2²)
    pub fn radius(&self) -> f64 {
        self.r1.hypot(self.r2)
    }

    pub fn swapped(&self) -> Self {
        Self {
            r1: self.r2,
            r2: self.r1,
        }
    }
}

/// K0(√(r1²+r2²)) computed as
/// ∫₁^∞ (u²−1)^{-1/2} e^{-(r1+r2)u/√2} cos((r1−r2)√(u²−1)/√2) du,
/// evaluated after the substitution u = cosh s.
pub fn k0_alt_rep(p: RadialPair) -> Result<f64> {
    let sum = (p.r1 + p.r2) * FRAC_1_SQRT_2;
    let diff = (p.r1 - p.r2) * FRAC_1_SQRT_2;
    // e^{-sum cosh s} < 1e-17 beyond s_max
    let s_max = (40.0 / sum).max(1.0).acosh();
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-13,
        max_intervals: 4000,
    };
    let (v, _) = integrate(
        |s| (-sum * s.cosh()).exp() * (diff * s.sinh()).cos(),
        0.0,
        s_max,
        tol,
    )?;
    Ok(v)
}

/// Which of the three oscillatory identities to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselIdentity {
    /// weight 1, equals K0(ρ)
    K0,
    /// weight (√(1+4it)+√(1−4it))/√2, equals (r1+r2)/ρ · K1(ρ)
    K1Sum,
    /// weight (√(1+4it)−√(1−4it))/√2, equals (r1−r2)/ρ · K1(ρ)
    K1Diff,
}

impl BesselIdentity {
    pub const ALL: [BesselIdentity; 3] = [Self::K0, Self::K1Sum, Self::K1Diff];

    pub fn name(&self) -> &'static str {
        match self {
            Self::K0 => "k0",
            Self::K1Sum => "k1-sum",
            Self::K1Diff => "k1-diff",
        }
    }
}

/// exp(−(r1√(1+4it) + r2√(1−4it))/√2) with principal roots.
pub(crate) fn radial_exponential(r1: f64, r2: f64, t: f64) -> Complex64 {
    let (sp, sm) = root_pair(t);
    (-(sp * r1 + sm * r2) * FRAC_1_SQRT_2).exp()
}

/// (√(1+4it), √(1−4it)), principal branches.
pub(crate) fn root_pair(t: f64) -> (Complex64, Complex64) {
    let sp = Complex64::new(1.0, 4.0 * t).sqrt();
    (sp, sp.conj())
}

const TAIL_TOL: f64 = 1e-14;

/// Upper limit T beyond which the integrand modulus times its e-folding
/// scale falls under `TAIL_TOL`; also returns that tail estimate.
pub(crate) fn tail_cutoff(r_sum: f64, weight_growth: bool) -> (f64, f64) {
    let tail = |t: f64| {
        let re = Complex64::new(1.0, 4.0 * t).sqrt().re;
        let decay = (-r_sum * re * FRAC_1_SQRT_2).exp();
        let w = if weight_growth { 2.0 * re * FRAC_1_SQRT_2 + 1.0 } else { 1.0 };
        // ∫_T^∞ e^{-c√(2t)} dt ≈ e^{-c√(2T)} · 2√(2T)/c, divided by √(1+16T²)
        let efold = (2.0 * (2.0 * t).sqrt() / (r_sum * FRAC_1_SQRT_2)).max(1.0);
        2.0 * decay * w * efold / (1.0 + 16.0 * t * t).sqrt()
    };
    let mut t = 1.0;
    while tail(t) > TAIL_TOL && t < 1e12 {
        t *= 2.0;
    }
    (t, tail(t))
}

/// Left-hand side: 2·Re ∫₀^∞ dt (1+16t²)^{-1/2} exp(−(r1√(1+4it)+r2√(1−4it))/√2) · weight(t).
pub fn identity_lhs(which: BesselIdentity, p: RadialPair) -> Result<f64> {
    let weighted = which != BesselIdentity::K0;
    let (t_max, tail) = tail_cutoff(p.r1 + p.r2, weighted);
    if tail > TAIL_TOL {
        return Err(Error::accuracy("identity integral tail", tail, TAIL_TOL));
    }
    let integrand = |t: f64| {
        let (sp, sm) = root_pair(t);
        let e = radial_exponential(p.r1, p.r2, t);
        let w = match which {
            BesselIdentity::K0 => Complex64::new(1.0, 0.0),
            BesselIdentity::K1Sum => (sp + sm) * FRAC_1_SQRT_2,
            BesselIdentity::K1Diff => (sp - sm) * FRAC_1_SQRT_2,
        };
        e * w / (1.0 + 16.0 * t * t).sqrt()
    };
    // t = s² smooths the e^{-c√t} decay
    let est = integrate_complex(
        |s| integrand(s * s) * (2.0 * s),
        0.0,
        t_max.sqrt(),
        Tolerance {
            abs: 1e-13,
            rel: 1e-12,
            max_intervals: 8000,
        },
    )?;
    Ok(2.0 * est.value.re)
}

/// Closed-form right-hand side of [`identity_lhs`].
pub fn identity_rhs(which: BesselIdentity, p: RadialPair) -> Result<f64> {
    let rho = p.radius();
    let (k0v, k1v) = k0_k1(rho)?;
    Ok(match which {
        BesselIdentity::K0 => k0v,
        BesselIdentity::K1Sum => (p.r1 + p.r2) / rho * k1v,
        BesselIdentity::K1Diff => (p.r1 - p.r2) / rho * k1v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // ∫₀^∞ e^{-x cosh s} cosh(νs) ds by a plain trapezoid; independent of the
    // series/continued-fraction code.
    fn k_nu_quadrature(nu: f64, x: f64) -> f64 {
        let h = 1.0 / 128.0;
        let mut sum = 0.5 * (-x).exp();
        let mut j = 1;
        loop {
            let s = j as f64 * h;
            let term = (-x * s.cosh() + nu * s).exp() * 0.5 * (1.0 + (-2.0 * nu * s).exp());
            sum += term;
            if x * s.cosh() > 745.0 + nu * s {
                break;
            }
            j += 1;
        }
        sum * h
    }

    #[test]
    fn k0_at_one_matches_reference() {
        assert!((k0(1.0).unwrap() - 0.421_024_438_240_708_3).abs() < 1e-15);
    }

    #[test]
    fn k0_log_singularity() {
        let x = 1e-8;
        assert!((k0(x).unwrap() + (0.5 * x).ln() + EULER_GAMMA).abs() < 1e-14);
    }

    #[test]
    fn k1_pole() {
        let x = 1e-6;
        assert!((x * k1(x).unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn k0_derivative_is_minus_k1() {
        let h = 1e-5;
        let d = (k0(2.0 + h).unwrap() - k0(2.0 - h).unwrap()) / (2.0 * h);
        assert!((d + k1(2.0).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn matches_quadrature_on_log_grid() {
        for j in 0..=60 {
            let x = 1e-3 * (30.0f64 / 1e-3).powf(j as f64 / 60.0);
            let (a, b) = k0_k1(x).unwrap();
            let qa = k_nu_quadrature(0.0, x);
            let qb = k_nu_quadrature(1.0, x);
            assert!((a - qa).abs() / qa < 1e-12, "K0({x}): {a} vs {qa}");
            assert!((b - qb).abs() / qb < 1e-12, "K1({x}): {b} vs {qb}");
        }
    }

    #[test]
    fn crossover_is_continuous() {
        let below = small_x(2.0);
        let above = steed_cf2(2.0);
        assert!((below.0 - above.0).abs() / above.0 < 1e-14);
        assert!((below.1 - above.1).abs() / above.1 < 1e-14);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(k0(0.0).is_err());
        assert!(k1(-1.0).is_err());
        assert!(k0(f64::NAN).is_err());
    }

    #[test]
    fn alt_rep_examples() {
        let v = k0_alt_rep(RadialPair::new(3.0, 4.0).unwrap()).unwrap();
        assert!((v - k0(5.0).unwrap()).abs() < 1e-9);
        let v = k0_alt_rep(RadialPair::new(1.0, 0.0).unwrap()).unwrap();
        assert!((v - k0(1.0).unwrap()).abs() < 1e-9);
        let r = 0.7;
        let v = k0_alt_rep(RadialPair::new(r, r).unwrap()).unwrap();
        assert!((v - k0(r * 2f64.sqrt()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identity_examples() {
        let p = RadialPair::new(1.3, 1.3).unwrap();
        assert!(identity_lhs(BesselIdentity::K1Diff, p).unwrap().abs() < 1e-10);
        let p = RadialPair::new(3.0, 4.0).unwrap();
        let lhs = identity_lhs(BesselIdentity::K0, p).unwrap();
        assert!((lhs - k0(5.0).unwrap()).abs() < 1e-8);
        let p = RadialPair::new(1.0, 1.0).unwrap();
        let lhs = identity_lhs(BesselIdentity::K1Sum, p).unwrap();
        let want = 2f64.sqrt() * k1(2f64.sqrt()).unwrap();
        assert!((lhs - want).abs() < 1e-8);
    }

    #[test]
    fn radial_pair_validation() {
        assert!(RadialPair::new(0.0, 0.0).is_err());
        assert!(RadialPair::new(-1.0, 1.0).is_err());
        assert!(RadialPair::new(0.0, 2.0).is_ok());
    }
}

//! Two-point functions of the sine-Gordon field at β = 4π and of the free
//! massive Dirac fermion.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::height_field::{Axis, TestFunction};
use crate::par;
use crate::special_functions::{k0, k0_k1, EULER_GAMMA};

/// Mass constant A = 4π e^{−γ/2}.
pub fn mass_constant() -> f64 {
    4.0 * PI * (-0.5 * EULER_GAMMA).exp()
}

/// Field normalisation B = √π.
pub const FIELD_CONSTANT: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SGParams {
    z: f64,
}

impl SGParams {
    pub fn new(z: f64) -> Result<Self> {
        if z == 0.0 || !z.is_finite() {
            return Err(Error::domain(format!("coupling z must be finite and nonzero, got {z}")));
        }
        Ok(Self { z })
    }

    /// The coupling matched to a = 1 − λε: |z| = λ e^{γ/2}/(4√2 π).
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda * (0.5 * EULER_GAMMA).exp() / (4.0 * std::f64::consts::SQRT_2 * PI))
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// μ = A|z|.
    pub fn mu(&self) -> f64 {
        mass_constant() * self.z.abs()
    }
}

/// F(x) = 1/x² − 4 arcsinh(x/2)/(x³ √(4 + x²)), with F(0) = 1/6.
pub fn f_profile(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("F needs finite x >= 0, got {x}")));
    }
    if x < 1.0 {
        // Σ_{n≥1} (−1)^{n+1} (n!)²/(2n+1)! x^{2n−2}
        let x2 = x * x;
        let mut coef = 1.0 / 6.0;
        let mut pow = 1.0;
        let mut sum: f64 = 0.0;
        for n in 1..60 {
            let term = coef * pow;
            sum += if n % 2 == 1 { term } else { -term };
            if term < 1e-18 * sum.abs() {
                break;
            }
            let nf = n as f64;
            coef *= (nf + 1.0) * (nf + 1.0) / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
            pow *= x2;
        }
        return Ok(sum);
    }
    Ok(1.0 / (x * x) - 4.0 * (0.5 * x).asinh() / (x * x * x * (4.0 + x * x).sqrt()))
}

/// C_μ(p) = μ^{−2} F(|p|/μ).
pub fn c_mu(p: (f64, f64), mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::domain(format!("mass must be positive, got {mu}")));
    }
    Ok(f_profile(p.0.hypot(p.1) / mu)? / (mu * mu))
}

/// Grid control for the Fourier route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierGrid {
    /// Box side as a multiple of the joint support extent.
    pub padding: f64,
    /// Initial spacing as a fraction of the smallest support radius.
    pub initial_spacing: f64,
    /// Relative change between doublings at which refinement stops.
    pub rel_tol: f64,
    pub max_points: usize,
}

impl Default for FourierGrid {
    fn default() -> Self {
        Self {
            padding: 4.0,
            initial_spacing: 1.0 / 8.0,
            rel_tol: 1e-6,
            max_points: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierEstimate {
    pub value: f64,
    pub change: f64,
    pub points: usize,
    pub box_side: f64,
}

fn fft_2d(values: &mut [Complex64], n: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(n);
    fft.process(values);
    // transpose, then transform the other axis; the frequency order stays
    // transposed, which is harmless for radial kernels
    for i in 0..n {
        for j in i + 1..n {
            values.swap(i * n + j, j * n + i);
        }
    }
    fft.process(values);
}

fn fourier_sum(f1: &TestFunction, f2: &TestFunction, mu: f64, origin: (f64, f64), side: f64, n: usize) -> Result<f64> {
    let h = side / n as f64;
    let sample = |f: &TestFunction| -> Vec<Complex64> {
        let rows = par::map_range(n, |i| {
            (0..n)
                .map(|j| Complex64::new(f.value((origin.0 + i as f64 * h, origin.1 + j as f64 * h)), 0.0))
                .collect::<Vec<_>>()
        });
        rows.concat()
    };
    let mut planner = FftPlanner::new();
    let mut a = sample(f1);
    let mut b = sample(f2);
    fft_2d(&mut a, n, &mut planner);
    fft_2d(&mut b, n, &mut planner);
    let dp = 2.0 * PI / side;
    let freq = |k: usize| -> f64 {
        let k = k as i64;
        let k = if k > n as i64 / 2 { k - n as i64 } else { k };
        k as f64 * dp
    };
    let mut total = 0.0;
    for i in 0..n {
        let pi = freq(i);
        let mut row = 0.0;
        for j in 0..n {
            let c = c_mu((pi, freq(j)), mu)?;
            let (u, v) = (a[i * n + j], b[i * n + j]);
            row += (u.re * v.re + u.im * v.im) * c;
        }
        total += row;
    }
    // f̂ = h² · DFT; Σ over the dual lattice with dp²/(2π)² = 1/side²
    Ok(total * h.powi(4) / (side * side))
}

/// E_SG[φ(f1) φ(f2)] = ∫ dp/(2π)² f̂1(p) f̂2(−p) C_μ(p) on a padded periodic
/// grid, doubling the resolution until the relative change drops below the
/// grid tolerance.
pub fn sg_two_point(f1: &TestFunction, f2: &TestFunction, s: &SGParams, grid: &FourierGrid) -> Result<FourierEstimate> {
    let (c1, c2) = (f1.centre(), f2.centre());
    let (r1, r2) = (f1.radius(), f2.radius());
    let lo = ((c1.0 - r1).min(c2.0 - r2), (c1.1 - r1).min(c2.1 - r2));
    let hi = ((c1.0 + r1).max(c2.0 + r2), (c1.1 + r1).max(c2.1 + r2));
    let extent = (hi.0 - lo.0).max(hi.1 - lo.1);
    let side = grid.padding * extent;
    let mid = (0.5 * (lo.0 + hi.0), 0.5 * (lo.1 + hi.1));
    let origin = (mid.0 - 0.5 * side, mid.1 - 0.5 * side);
    let mut n = ((side / (grid.initial_spacing * r1.min(r2))).ceil() as usize).max(16);
    n += n % 2;
    let mut prev = fourier_sum(f1, f2, s.mu(), origin, side, n)?;
    loop {
        if 2 * n > grid.max_points {
            return Err(Error::accuracy("Fourier grid refinement", f64::NAN, grid.rel_tol));
        }
        n *= 2;
        let next = fourier_sum(f1, f2, s.mu(), origin, side, n)?;
        let change = (next - prev).abs() / next.abs().max(f64::MIN_POSITIVE);
        if change < grid.rel_tol {
            return Ok(FourierEstimate {
                value: next,
                change,
                points: n,
                box_side: side,
            });
        }
        prev = next;
    }
}

/// Derivative pairings with closed-form Bessel kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DerivKind {
    /// E[∂φ ∂φ], principal value.
    DD,
    /// E[∂φ ∂̄φ].
    DDbar,
    /// E[∂_i φ ∂_j φ].
    Directional(Axis, Axis),
}

impl DerivKind {
    pub const ALL: [DerivKind; 6] = [
        DerivKind::DD,
        DerivKind::DDbar,
        DerivKind::Directional(Axis::Horizontal, Axis::Horizontal),
        DerivKind::Directional(Axis::Horizontal, Axis::Vertical),
        DerivKind::Directional(Axis::Vertical, Axis::Horizontal),
        DerivKind::Directional(Axis::Vertical, Axis::Vertical),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DerivKind::DD => "dd",
            DerivKind::DDbar => "ddbar",
            DerivKind::Directional(Axis::Horizontal, Axis::Horizontal) => "d0d0",
            DerivKind::Directional(Axis::Horizontal, Axis::Vertical) => "d0d1",
            DerivKind::Directional(Axis::Vertical, Axis::Horizontal) => "d1d0",
            DerivKind::Directional(Axis::Vertical, Axis::Vertical) => "d1d1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown derivative kind {s:?}")))
    }
}

/// Pointwise kernel k(x, y) such that E[X(f1) Y(f2)] = ∫∫ f1(x) f2(y) k(x, y).
pub fn deriv_kernel(kind: DerivKind, x: (f64, f64), y: (f64, f64), s: &SGParams) -> Result<Complex64> {
    let d0 = x.0 - y.0;
    let d1 = x.1 - y.1;
    let r2 = d0 * d0 + d1 * d1;
    if r2 == 0.0 {
        return Err(Error::domain("coincident points"));
    }
    let mu = s.mu();
    let (k0v, k1v) = k0_k1(mu * r2.sqrt())?;
    let b2 = FIELD_CONSTANT * FIELD_CONSTANT;
    let scale = b2 * mu * mu / (PI * PI);
    let v = match kind {
        DerivKind::DD => {
            // −(B²/π²) (∂_x K0)², ∂_x K0 = −μ K1 (−i d0 + d1)/(2r)
            let w = Complex64::new(d1, -d0);
            -b2 / (PI * PI) * (mu * mu * k1v * k1v) * w * w / (4.0 * r2)
        }
        DerivKind::DDbar => Complex64::new(-0.25 * scale * k0v * k0v, 0.0),
        DerivKind::Directional(Axis::Horizontal, Axis::Horizontal) => {
            Complex64::new(0.5 * scale * (-k0v * k0v + (d1 * d1 - d0 * d0) / r2 * k1v * k1v), 0.0)
        }
        DerivKind::Directional(Axis::Vertical, Axis::Vertical) => {
            Complex64::new(0.5 * scale * (-k0v * k0v + (d0 * d0 - d1 * d1) / r2 * k1v * k1v), 0.0)
        }
        DerivKind::Directional(..) => Complex64::new(-scale * d0 * d1 / r2 * k1v * k1v, 0.0),
    };
    Ok(v)
}

fn support_nodes(f: &TestFunction, n: usize) -> Vec<((f64, f64), f64)> {
    let (c, r) = (f.centre(), f.radius());
    let h = 2.0 * r / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = (c.0 - r + (i as f64 + 0.5) * h, c.1 - r + (j as f64 + 0.5) * h);
            let v = f.value(x);
            if v != 0.0 {
                out.push((x, v * h * h));
            }
        }
    }
    out
}

// Returns the pairing and ∫∫ |f1 f2 k|, the scale for convergence checks.
fn kernel_pairing(
    kind: DerivKind,
    f1: &TestFunction,
    f2: &TestFunction,
    s: &SGParams,
    n: usize,
    excision: f64,
) -> Result<(Complex64, f64)> {
    let p1 = support_nodes(f1, n);
    let p2 = support_nodes(f2, n);
    let rows = par::map(&p1, |&(x, wx)| -> Result<(Complex64, f64)> {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for &(y, wy) in &p2 {
            if (x.0 - y.0).hypot(x.1 - y.1) < excision {
                continue;
            }
            let v = deriv_kernel(kind, x, y, s)? * wy;
            acc += v;
            mass += v.norm();
        }
        Ok((acc * wx, mass * wx.abs()))
    });
    let mut total = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for r in rows {
        let (v, m) = r?;
        total += v;
        mass += m;
    }
    Ok((total, mass))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingEstimate {
    pub value: Complex64,
    pub change: f64,
    pub nodes_per_side: usize,
}

/// Direct quadrature of ∫∫ f1(x) f2(y) k(x, y) over the two supports,
/// refining the tensor grid until the change relative to ∫∫ |f1 f2 k| is
/// below `rel_tol`.
/// The ∂∂ kernel uses δ-excision at δ ∈ {0.02, 0.01, 0.005}·R with linear
/// extrapolation to δ = 0.
pub fn sg_deriv_two_point(
    kind: DerivKind,
    f1: &TestFunction,
    f2: &TestFunction,
    s: &SGParams,
    rel_tol: f64,
) -> Result<PairingEstimate> {
    if f1.supports_overlap(f2) {
        return Err(Error::domain("derivative pairings need disjoint supports"));
    }
    let scale = f1.radius().min(f2.radius());
    let eval = |n: usize| -> Result<(Complex64, f64)> {
        match kind {
            DerivKind::DD => {
                let v: Vec<(Complex64, f64)> = [0.02, 0.01, 0.005]
                    .iter()
                    .map(|d| kernel_pairing(kind, f1, f2, s, n, d * scale))
                    .collect::<Result<_>>()?;
                Ok((v[2].0 * 2.0 - v[1].0, v[2].1))
            }
            _ => kernel_pairing(kind, f1, f2, s, n, 0.0),
        }
    };
    let mut n = 24;
    let (mut prev, _) = eval(n)?;
    loop {
        n *= 2;
        let (next, mass) = eval(n)?;
        let change = (next - prev).norm() / mass.max(f64::MIN_POSITIVE);
        if change < rel_tol {
            return Ok(PairingEstimate {
                value: next,
                change,
                nodes_per_side: n,
            });
        }
        if n >= 384 {
            return Err(Error::accuracy("kernel pairing refinement", change, rel_tol));
        }
        prev = next;
    }
}

/// E_SG[φ(f1) φ(f2)] for directional test functions f = c0 ∂0 b + c1 ∂1 b,
/// assembled from the directional Bessel kernels: φ(∂_j b) = −∂_jφ(b).
pub fn sg_two_point_real_space(f1: &TestFunction, f2: &TestFunction, s: &SGParams, rel_tol: f64) -> Result<f64> {
    let parts = |f: &TestFunction| -> Result<(TestFunction, [f64; 2])> {
        match *f {
            TestFunction::Directional { bump, c0, c1 } => Ok((TestFunction::Bump(bump), [c0, c1])),
            TestFunction::Bump(_) => Err(Error::domain("real-space route needs directional test functions")),
        }
    };
    let (b1, w1) = parts(f1)?;
    let (b2, w2) = parts(f2)?;
    let mut total = 0.0;
    for (i, ai) in [Axis::Horizontal, Axis::Vertical].into_iter().enumerate() {
        for (j, aj) in [Axis::Horizontal, Axis::Vertical].into_iter().enumerate() {
            let c = w1[i] * w2[j];
            if c == 0.0 {
                continue;
            }
            total += c * sg_deriv_two_point(DerivKind::Directional(ai, aj), &b1, &b2, s, rel_tol)?.value.re;
        }
    }
    Ok(total)
}

/// 2×2 Dirac propagator S(x, y) for mass μ.
pub fn dirac_propagator(x: (f64, f64), y: (f64, f64), mu: f64) -> Result<[[Complex64; 2]; 2]> {
    let d0 = x.0 - y.0;
    let d1 = x.1 - y.1;
    let r = d0.hypot(d1);
    if r == 0.0 {
        return Err(Error::domain("coincident points"));
    }
    if !(mu > 0.0) {
        return Err(Error::domain(format!("mass must be positive, got {mu}")));
    }
    let (k0v, k1v) = k0_k1(mu * r)?;
    let d = -mu * k1v * Complex64::new(d1, -d0) * 0.5 / r;
    let dbar = -mu * k1v * Complex64::new(d1, d0) * 0.5 / r;
    let pref = -1.0 / (2.0 * PI);
    let diag = Complex64::new(-mu * k0v, 0.0) * pref;
    Ok([[diag, dbar * 2.0 * pref], [d * 2.0 * pref, diag]])
}

/// Component indices and position of ψ̄_α ψ_β(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermionIndex {
    pub alpha: u8,
    pub beta: u8,
    pub point: (f64, f64),
}

impl FermionIndex {
    pub fn new(alpha: u8, beta: u8, point: (f64, f64)) -> Result<Self> {
        if !(1..=2).contains(&alpha) || !(1..=2).contains(&beta) {
            return Err(Error::domain(format!("component indices must be 1 or 2, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta, point })
    }
}

/// ⟨ψ̄_{α1}ψ_{β1}(x1) ψ̄_{α2}ψ_{β2}(x2)⟩^T = −S_{α2β1}(x2, x1) S_{α1β2}(x1, x2).
pub fn truncated_corr(i1: FermionIndex, i2: FermionIndex, mu: f64) -> Result<Complex64> {
    let s21 = dirac_propagator(i2.point, i1.point, mu)?;
    let s12 = dirac_propagator(i1.point, i2.point, mu)?;
    let a = s21[(i2.alpha - 1) as usize][(i1.beta - 1) as usize];
    let b = s12[(i1.alpha - 1) as usize][(i2.beta - 1) as usize];
    Ok(-a * b)
}

/// The K0² form μ²K0(μ|x − y|)²/(4π²) of the off-diagonal truncated pair.
pub fn fermion_k0_form(x: (f64, f64), y: (f64, f64), mu: f64) -> Result<f64> {
    let r = (x.0 - y.0).hypot(x.1 - y.1);
    if r == 0.0 {
        return Err(Error::domain("coincident points"));
    }
    let k = k0(mu * r)?;
    Ok(mu * mu * k * k / (4.0 * PI * PI))
}

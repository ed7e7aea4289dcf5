//! Exact finite-a evaluation of the inverse Kasteleyn matrix.
//!
//! Everything reduces to the single contour integral
//!
//! I_a(k, ℓ) = −1/(2(1+a²)) · (1/2πi) ∮ dw/w · (−iG(w))^{|ℓ|} (−iG(1/w))^{|k|}
//!             / (√(w²+2c) √(1/w²+2c))
//!
//! over the unit circle, evaluated by the trapezoid rule. Values are memoized
//! process-wide by (|k|, |ℓ|, a).

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::TAU;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{kasteleyn_entry, kl_indices, EdgeDimer, VertexG};
use crate::par;

/// Edge weight a ∈ (0, 1) and c = a/(1+a²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    a: f64,
    c: f64,
}

impl WeightParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::domain(format!("weight a must lie in (0, 1), got {a}")));
        }
        Ok(Self {
            a,
            c: a / (1.0 + a * a),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Half-width of the annulus of analyticity of the I_a integrand in the
    /// angle variable: −½ ln(2c).
    pub fn strip_width(&self) -> f64 {
        -0.5 * (2.0 * self.c).ln()
    }
}

fn sqrt_shifted(w: Complex64, s: f64) -> Complex64 {
    let i = Complex64::i();
    i * (-s - i * w).sqrt() * (s - i * w).sqrt()
}

const CUT_MARGIN: f64 = 1e-9;

/// √(w² + 2c) on the branch analytic off the cut i[−√(2c), √(2c)].
pub fn sqrt_w2(w: Complex64, p: &WeightParams) -> Result<Complex64> {
    check_cut(w, p)?;
    Ok(sqrt_shifted(w, (2.0 * p.c).sqrt()))
}

fn check_cut(w: Complex64, p: &WeightParams) -> Result<()> {
    let s = (2.0 * p.c).sqrt();
    let i = Complex64::i();
    if (w - i * s).norm() < CUT_MARGIN || (w + i * s).norm() < CUT_MARGIN {
        return Err(Error::Branch(format!("{w} is at a branch point")));
    }
    if w.re.abs() < CUT_MARGIN && w.im.abs() <= s {
        return Err(Error::Branch(format!("{w} lies on the cut")));
    }
    Ok(())
}

/// G(w) = (w − √(w²+2c))/√(2c), the inverse of J(u) = √(c/2)(u − 1/u)
/// mapping into the punctured unit disc.
pub fn g_map(w: Complex64, p: &WeightParams) -> Result<Complex64> {
    check_cut(w, p)?;
    Ok(g_unchecked(w, (2.0 * p.c).sqrt()))
}

#[inline]
fn g_unchecked(w: Complex64, s: f64) -> Complex64 {
    (w - sqrt_shifted(w, s)) / s
}

/// J(u) = √(c/2)(u − 1/u).
pub fn j_map(u: Complex64, p: &WeightParams) -> Complex64 {
    (p.c / 2.0).sqrt() * (u - 1.0 / u)
}

/// P(z, w) = −2 − 2a² − a/w − aw − a/z − az.
pub fn char_poly(z: Complex64, w: Complex64, p: &WeightParams) -> Result<Complex64> {
    if z.norm() == 0.0 || w.norm() == 0.0 {
        return Err(Error::domain("characteristic polynomial needs z, w ≠ 0"));
    }
    let a = p.a;
    Ok(-2.0 - 2.0 * a * a - a / w - a * w - a / z - a * z)
}

/// P̃(u1, u2) = −2(1+a²)(1 + (c/2)(u1 + 1/u1)(u2 + 1/u2)) = P(u2/u1, u1 u2).
pub fn char_poly_factored(u1: Complex64, u2: Complex64, p: &WeightParams) -> Result<Complex64> {
    if u1.norm() == 0.0 || u2.norm() == 0.0 {
        return Err(Error::domain("characteristic polynomial needs u1, u2 ≠ 0"));
    }
    let a = p.a;
    Ok(-2.0 * (1.0 + a * a) * (1.0 + 0.5 * p.c * (u1 + 1.0 / u1) * (u2 + 1.0 / u2)))
}

// ---------------------------------------------------------------------------
// I_a memo cache and trapezoid evaluation

type Key = (u32, u32, u64);

fn cache() -> &'static RwLock<HashMap<Key, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<Key, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn key(k: i64, l: i64, p: &WeightParams) -> Key {
    (k.unsigned_abs() as u32, l.unsigned_abs() as u32, p.a.to_bits())
}

/// Agreement required between successive node doublings.
pub const IA_TOLERANCE: f64 = 1e-11;
const MAX_NODES: usize = 1 << 26;
const CHUNK: usize = 4096;

/// Starting node count: the larger of 512, 64(|k|+|ℓ|+1) and a count that
/// resolves the analyticity annulus, rounded up to a power of two.
pub fn initial_nodes(k: u32, l: u32, p: &WeightParams) -> usize {
    let base = 512usize.max(64 * (k as usize + l as usize + 1));
    let strip = (16.0 / p.strip_width()).ceil() as usize;
    base.max(strip).next_power_of_two()
}

struct NodeData {
    log_a: Complex64,
    log_b: Complex64,
    d: Complex64,
}

#[inline]
fn node(theta: f64, s: f64) -> NodeData {
    let w = Complex64::from_polar(1.0, theta);
    let winv = w.conj();
    let mi = -Complex64::i();
    let ga = mi * g_unchecked(w, s);
    let gb = mi * g_unchecked(winv, s);
    let d = 1.0 / (sqrt_shifted(w, s) * sqrt_shifted(winv, s));
    NodeData {
        log_a: ga.ln(),
        log_b: gb.ln(),
        d,
    }
}

// Raw sums Σ_j Re(A^ℓ B^k D) over the nodes θ_j = 2πj/n for j in `idx`
// (step 1 or 2). Only half of the circle is visited; the other half repeats
// it for even k+ℓ.
fn partial_sums(pairs: &[(u32, u32)], n: usize, odd_only: bool, s: f64) -> Vec<f64> {
    let half = n / 2;
    let (start, step) = if odd_only { (1, 2) } else { (0, 1) };
    let count = (half - start).div_ceil(step);
    let ls: BTreeSet<u32> = pairs.iter().map(|p| p.1).collect();
    let ks: BTreeSet<u32> = pairs.iter().map(|p| p.0).collect();
    let ls: Vec<u32> = ls.into_iter().collect();
    let ks: Vec<u32> = ks.into_iter().collect();
    let l_pos: Vec<usize> = pairs.iter().map(|p| ls.binary_search(&p.1).unwrap()).collect();
    let k_pos: Vec<usize> = pairs.iter().map(|p| ks.binary_search(&p.0).unwrap()).collect();
    let chunks = par::map_chunks(count, CHUNK, |range| {
        let mut acc = vec![0.0; pairs.len()];
        let mut pa = vec![Complex64::new(0.0, 0.0); ls.len()];
        let mut pb = vec![Complex64::new(0.0, 0.0); ks.len()];
        for idx in range {
            let j = start + idx * step;
            let nd = node(TAU * j as f64 / n as f64, s);
            for (slot, &l) in pa.iter_mut().zip(&ls) {
                *slot = (nd.log_a * l as f64).exp();
            }
            for (slot, &k) in pb.iter_mut().zip(&ks) {
                *slot = (nd.log_b * k as f64).exp() * nd.d;
            }
            for (i, a) in acc.iter_mut().enumerate() {
                let x = pa[l_pos[i]];
                let y = pb[k_pos[i]];
                *a += x.re * y.re - x.im * y.im;
            }
        }
        acc
    });
    let mut total = vec![0.0; pairs.len()];
    for c in chunks {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    total
}

/// Computes I_a for every pair (|k|, |ℓ|) in `pairs` with one shared set of
/// trapezoid nodes, doubling until all values agree to [`IA_TOLERANCE`].
fn compute_batch(pairs: &[(u32, u32)], p: &WeightParams) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let s = (2.0 * p.c).sqrt();
    let pref = -1.0 / (2.0 * (1.0 + p.a * p.a));
    let kmax = pairs.iter().map(|p| p.0).max().unwrap();
    let lmax = pairs.iter().map(|p| p.1).max().unwrap();
    let mut n = initial_nodes(kmax, lmax, p);
    let mut sums = partial_sums(pairs, n, false, s);
    let value = |sums: &[f64], n: usize| -> Vec<f64> {
        sums.iter().map(|v| pref * 2.0 * v / n as f64).collect()
    };
    let mut current = value(&sums, n);
    loop {
        if 2 * n > MAX_NODES {
            return Err(Error::accuracy("I_a trapezoid node limit", f64::NAN, IA_TOLERANCE));
        }
        let extra = partial_sums(pairs, 2 * n, true, s);
        for (t, e) in sums.iter_mut().zip(extra) {
            *t += e;
        }
        n *= 2;
        let next = value(&sums, n);
        let change = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if change < IA_TOLERANCE {
            return Ok(current);
        }
    }
}

/// I_a(k, ℓ) by the single contour integral. Memoized by (|k|, |ℓ|, a).
pub fn ia_single(k: i64, l: i64, p: &WeightParams) -> Result<f64> {
    if (k + l).rem_euclid(2) == 1 {
        // w ↦ −w flips the sign of the integrand
        return Ok(0.0);
    }
    let key = key(k, l, p);
    if let Some(v) = cache().read().unwrap().get(&key) {
        return Ok(*v);
    }
    let v = compute_batch(&[(key.0, key.1)], p)?[0];
    cache().write().unwrap().insert(key, v);
    Ok(v)
}

/// Fills the memo cache for a set of (k, ℓ) in a single sweep over shared
/// nodes. Pairs already cached are skipped.
pub fn ia_prefetch(indices: &[(i64, i64)], p: &WeightParams) -> Result<()> {
    let missing: Vec<(u32, u32)> = {
        let guard = cache().read().unwrap();
        let set: BTreeSet<(u32, u32)> = indices
            .iter()
            .filter(|(k, l)| (k + l).rem_euclid(2) == 0)
            .map(|&(k, l)| key(k, l, p))
            .filter(|kk| !guard.contains_key(kk))
            .map(|kk| (kk.0, kk.1))
            .collect();
        set.into_iter().collect()
    };
    if missing.is_empty() {
        return Ok(());
    }
    let values = compute_batch(&missing, p)?;
    let mut guard = cache().write().unwrap();
    for (pr, v) in missing.iter().zip(values) {
        guard.insert((pr.0, pr.1, p.a.to_bits()), v);
    }
    Ok(())
}

/// Snapshot of the cached values for one weight, sorted by (|k|, |ℓ|).
pub fn ia_cache_entries(p: &WeightParams) -> Vec<(u32, u32, f64)> {
    let guard = cache().read().unwrap();
    let mut out: Vec<(u32, u32, f64)> = guard
        .iter()
        .filter(|(k, _)| k.2 == p.a.to_bits())
        .map(|(k, v)| (k.0, k.1, *v))
        .collect();
    out.sort_by_key(|e| (e.0, e.1));
    out
}

/// Seeds the memo cache, e.g. from a file written by an earlier run.
pub fn ia_cache_insert(entries: &[(u32, u32, f64)], p: &WeightParams) {
    let mut guard = cache().write().unwrap();
    for &(k, l, v) in entries {
        guard.insert((k, l, p.a.to_bits()), v);
    }
}

/// Drops every cached value for one weight.
pub fn ia_cache_clear(p: &WeightParams) {
    cache().write().unwrap().retain(|k, _| k.2 != p.a.to_bits());
}

/// Largest |k| and |ℓ| the torus oracle will accept.
pub const ORACLE_MAX_INDEX: i64 = 12;

/// I_a(k, ℓ) as the mean over an N×N torus grid of u1^ℓ u2^k / P̃(u1, u2),
/// refined until doubling N changes the value by less than 1e-12.
pub fn ia_double_oracle(k: i64, l: i64, p: &WeightParams) -> Result<f64> {
    if k.abs() > ORACLE_MAX_INDEX || l.abs() > ORACLE_MAX_INDEX {
        return Err(Error::CostGuard(format!(
            "torus oracle limited to |k|, |l| <= {ORACLE_MAX_INDEX}; use ia_single"
        )));
    }
    let one = |n: usize| -> Complex64 {
        let tw: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, TAU * j as f64 / n as f64)).collect();
        let cosines: Vec<f64> = tw.iter().map(|u| 2.0 * u.re).collect();
        let nn = n as i64;
        let rows = par::map_range(n, |j1| {
            let mut row = Complex64::new(0.0, 0.0);
            for (j2, c2) in cosines.iter().enumerate() {
                let ptilde = -2.0 * (1.0 + p.a * p.a) * (1.0 + 0.5 * p.c * cosines[j1] * c2);
                row += tw[(k * j2 as i64).rem_euclid(nn) as usize] / ptilde;
            }
            tw[(l * j1 as i64).rem_euclid(nn) as usize] * row
        });
        rows.into_iter().sum::<Complex64>() / (n * n) as f64
    };
    let mut n = 64;
    let mut prev = one(n);
    loop {
        n *= 2;
        let next = one(n);
        if (next - prev).norm() < 1e-12 {
            return Ok(next.re);
        }
        if n >= 8192 {
            return Err(Error::accuracy("torus oracle refinement", (next - prev).norm(), 1e-12));
        }
        prev = next;
    }
}

/// K⁻¹ together with h(ε1, ε2): the value is i^{1+h} times a real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: Complex64,
    pub h: i64,
}

/// i^n for integer n.
pub fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// K⁻¹(x, y) for white x ∈ W_{ε1} and black y ∈ B_{ε2}:
/// i^{1+h}(a^{ε2} I_a(k1, ℓ1) + a^{1−ε2} I_a(k2, ℓ2)).
pub fn kinv(x: &VertexG, y: &VertexG, p: &WeightParams) -> Result<KernelValue> {
    let q = kl_indices(x, y)?;
    let eps2 = y.class().index() as i32;
    let re = p.a.powi(eps2) * ia_single(q.k1, q.l1, p)? + p.a.powi(1 - eps2) * ia_single(q.k2, q.l2, p)?;
    Ok(KernelValue {
        value: i_pow(1 + q.h) * re,
        h: q.h,
    })
}

/// The (|k|, |ℓ|) pairs that [`kinv`] will request for (x, y).
pub fn kinv_indices(x: &VertexG, y: &VertexG) -> Result<[(i64, i64); 2]> {
    let q = kl_indices(x, y)?;
    Ok([(q.k1, q.l1), (q.k2, q.l2)])
}

/// Position of a vertex inside the reference fundamental domain, the a-face
/// centred at (1,1): W_{ε} at (1, 2ε) and B_{ε} at (2ε, 1).
fn domain_anchor(v: &VertexG) -> (i64, i64) {
    let e = v.class().index() as i64;
    if v.is_black() {
        (v.x - (2 * e - 1), v.y)
    } else {
        (v.x, v.y - (2 * e - 1))
    }
}

/// Largest |u| + |v| accepted by [`kinv_double_oracle`].
pub const ORACLE_MAX_SHIFT: i64 = 12;

/// K⁻¹(x, y) from the double contour integral
/// (1/(2πi)²)∮∮ Q_{ε1ε2}(z,w)/P(z,w) · z^u w^v dz/z dw/w, with (u, v) the
/// fundamental-domain translation from x to y.
pub fn kinv_double_oracle(x: &VertexG, y: &VertexG, p: &WeightParams) -> Result<Complex64> {
    if x.is_black() || !y.is_black() {
        return Err(Error::Parity("double oracle needs (white, black)".into()));
    }
    let fx = domain_anchor(x);
    let fy = domain_anchor(y);
    let d = (fy.0 - fx.0, fy.1 - fx.1);
    if (d.0 + d.1).rem_euclid(4) != 0 || (d.1 - d.0).rem_euclid(4) != 0 {
        return Err(Error::Parity(format!("{x} and {y} are not in translated domains")));
    }
    let u = (d.0 + d.1) / 4;
    let v = (d.1 - d.0) / 4;
    if u.abs() + v.abs() > ORACLE_MAX_SHIFT {
        return Err(Error::CostGuard(format!(
            "double oracle limited to |u|+|v| <= {ORACLE_MAX_SHIFT}; use kinv"
        )));
    }
    let e1 = x.class().index();
    let e2 = y.class().index();
    let a = p.a;
    let i = Complex64::i();
    let q = move |z: Complex64, w: Complex64| match (e1, e2) {
        (0, 0) => i * (a + w),
        (0, _) => -(a + z),
        (_, 0) => -(a + 1.0 / z),
        _ => i * (a + 1.0 / w),
    };
    let one = |n: usize| -> Complex64 {
        let tw: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, TAU * j as f64 / n as f64)).collect();
        let nn = n as i64;
        let rows = par::map_range(n, |jz| {
            let z = tw[jz];
            let mut row = Complex64::new(0.0, 0.0);
            for (jw, &w) in tw.iter().enumerate() {
                let pz = -2.0 - 2.0 * a * a - a * (w + w.conj()) - a * (z + z.conj());
                row += q(z, w) / pz * tw[(v * jw as i64).rem_euclid(nn) as usize];
            }
            row * tw[(u * jz as i64).rem_euclid(nn) as usize]
        });
        rows.into_iter().sum::<Complex64>() / (n * n) as f64
    };
    let mut n = 64;
    let mut prev = one(n);
    loop {
        n *= 2;
        let next = one(n);
        if (next - prev).norm() < 1e-12 {
            return Ok(next);
        }
        if n >= 8192 {
            return Err(Error::accuracy("double oracle refinement", (next - prev).norm(), 1e-12));
        }
        prev = next;
    }
}

/// L(e_i, e_j) = K_a(b_i, w_i) K⁻¹(w_j, b_i).
pub fn corr_kernel(ei: &EdgeDimer, ej: &EdgeDimer, p: &WeightParams) -> Result<Complex64> {
    let k = kasteleyn_entry(&ei.black, &ei.white, p.a);
    Ok(k * kinv(&ej.white, &ei.black, p)?.value)
}

/// All (k, ℓ) pairs needed to evaluate `corr_kernel` over `edges × edges`.
pub fn corr_indices(edges: &[EdgeDimer]) -> Result<Vec<(i64, i64)>> {
    let mut out = Vec::new();
    for ei in edges {
        for ej in edges {
            out.extend(kinv_indices(&ej.white, &ei.black)?);
        }
    }
    Ok(out)
}

/// Determinant of a small complex matrix by Gaussian elimination with
/// partial pivoting.
pub fn det(mut m: Vec<Vec<Complex64>>) -> Complex64 {
    let n = m.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| m[r1][col].norm().total_cmp(&m[r2][col].norm()))
            .unwrap();
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                let t = m[col][c];
                m[r][c] -= f * t;
            }
        }
    }
    det
}

/// Probability that every edge in `edges` is occupied: det L(e_i, e_j).
pub fn cylinder_prob(edges: &[EdgeDimer], p: &WeightParams) -> Result<f64> {
    for (i, e) in edges.iter().enumerate() {
        if edges[..i].contains(e) {
            return Err(Error::domain(format!("edge {e} repeated")));
        }
    }
    ia_prefetch(&corr_indices(edges)?, p)?;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); edges.len()]; edges.len()];
    for (i, ei) in edges.iter().enumerate() {
        for (j, ej) in edges.iter().enumerate() {
            m[i][j] = corr_kernel(ei, ej, p)?;
        }
    }
    Ok(det(m).re)
}

/// Cov(1_e, 1_f); the variance P(1 − P) when e = f.
pub fn edge_covariance(e: &EdgeDimer, f: &EdgeDimer, p: &WeightParams) -> Result<f64> {
    if e == f {
        let pe = corr_kernel(e, e, p)?.re;
        return Ok(pe * (1.0 - pe));
    }
    Ok(-(corr_kernel(e, f, p)? * corr_kernel(f, e, p)?).re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(a: f64) -> WeightParams {
        WeightParams::new(a).unwrap()
    }

    fn v(x: i64, y: i64) -> VertexG {
        VertexG::new(x, y).unwrap()
    }

    #[test]
    fn weight_params_range() {
        assert!(WeightParams::new(1.0).is_err());
        assert!(WeightParams::new(0.0).is_err());
        let p = wp(0.6);
        assert!(p.c() > 0.0 && p.c() < 0.5);
    }

    #[test]
    fn g_map_example_and_symmetries() {
        let p = wp(1.0 - 1e-12);
        let g = g_map(Complex64::new(1.0, 0.0), &p).unwrap();
        assert!((g.re - (1.0 - 2f64.sqrt())).abs() < 1e-5);
        let p = wp(0.6);
        for &w in &[Complex64::new(0.3, 0.9), Complex64::new(-1.2, 0.4), Complex64::new(2.0, -1.5)] {
            let g = g_map(w, &p).unwrap();
            assert!((g_map(w.conj(), &p).unwrap() - g.conj()).norm() < 1e-14);
            assert!((g_map(-w, &p).unwrap() + g).norm() < 1e-14);
            assert!(g.norm() < 1.0 && g.norm() > 0.0);
            assert!((j_map(g, &p) - w).norm() < 1e-13);
        }
    }

    #[test]
    fn g_map_exact_half() {
        // c = 1/2 is not reachable with a < 1; evaluate the formula with s = 1
        let g = g_unchecked(Complex64::new(1.0, 0.0), 1.0);
        assert!((g.re - (1.0 - 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn g_map_rejects_cut() {
        let p = wp(0.5);
        let s = (2.0 * p.c()).sqrt();
        assert!(g_map(Complex64::new(0.0, 0.5 * s), &p).is_err());
        assert!(g_map(Complex64::new(0.0, s), &p).is_err());
    }

    #[test]
    fn char_poly_forms_agree() {
        let p = wp(0.7);
        let a = p.a();
        let one = Complex64::new(1.0, 0.0);
        let v = char_poly(one, one, &p).unwrap();
        assert!((v.re - (-2.0 - 2.0 * a * a - 4.0 * a)).abs() < 1e-15);
        for t in 0..10 {
            let u1 = Complex64::from_polar(1.0, 0.37 * t as f64);
            let u2 = Complex64::from_polar(1.0, 1.3 + 0.91 * t as f64);
            let lhs = char_poly_factored(u1, u2, &p).unwrap();
            let rhs = char_poly(u2 / u1, u1 * u2, &p).unwrap();
            assert!((lhs - rhs).norm() < 1e-13);
        }
        assert!(char_poly(Complex64::new(0.0, 0.0), one, &p).is_err());
    }

    #[test]
    fn char_poly_no_torus_zeros() {
        let p = wp(0.9);
        let n = 512;
        let mut min = f64::INFINITY;
        for j1 in 0..n {
            for j2 in 0..n {
                let z = Complex64::from_polar(1.0, TAU * j1 as f64 / n as f64);
                let w = Complex64::from_polar(1.0, TAU * j2 as f64 / n as f64);
                min = min.min(char_poly(z, w, &p).unwrap().norm());
            }
        }
        assert!(min > 0.0);
    }

    #[test]
    fn ia_sign_symmetry() {
        let p = wp(0.55);
        let v = ia_single(4, 2, &p).unwrap();
        assert_eq!(v, ia_single(-4, 2, &p).unwrap());
        assert_eq!(v, ia_single(4, -2, &p).unwrap());
    }

    #[test]
    fn ia_matches_torus_oracle() {
        for &(k, l, a, tol) in &[(0, 0, 0.5, 1e-9), (5, 3, 0.9, 1e-8), (2, 2, 0.8, 1e-9), (1, 0, 0.5, 1e-12)] {
            let p = wp(a);
            let s = ia_single(k, l, &p).unwrap();
            let o = ia_double_oracle(k, l, &p).unwrap();
            assert!((s - o).abs() <= tol * (1.0 + o.abs()), "({k},{l},{a}): {s} vs {o}");
        }
    }

    #[test]
    fn oracle_grid_converged() {
        let p = wp(0.5);
        let v = ia_double_oracle(0, 0, &p).unwrap();
        assert!(v.is_finite());
        assert!(ia_double_oracle(13, 0, &p).is_err());
    }

    #[test]
    fn prefetch_matches_single() {
        let p = wp(0.61);
        ia_prefetch(&[(0, 2), (3, 5), (7, 1)], &p).unwrap();
        let cached = ia_single(3, 5, &p).unwrap();
        let fresh = compute_batch(&[(3, 5)], &p).unwrap()[0];
        assert!((cached - fresh).abs() < 1e-12);
    }

    #[test]
    fn kinv_is_inverse_of_kasteleyn() {
        // Σ_w K(b, w) K⁻¹(w, b') = δ(b, b')
        let p = wp(0.65);
        let bs = [v(0, 1), v(2, 1), v(4, 3), v(-2, 3)];
        for b in &bs {
            for b2 in &bs {
                let mut s = Complex64::new(0.0, 0.0);
                for d in [(1, 1), (-1, 1), (-1, -1), (1, -1)] {
                    let w = b.offset(d).unwrap();
                    s += kasteleyn_entry(b, &w, p.a()) * kinv(&w, b2, &p).unwrap().value;
                }
                let want = if b == b2 { 1.0 } else { 0.0 };
                assert!((s - want).norm() < 1e-10, "{b} {b2}: {s}");
            }
        }
    }

    #[test]
    fn kinv_matches_double_oracle_nearby() {
        let p = wp(0.7);
        let y = v(0, 1);
        for x in [v(1, 0), v(1, 2), v(3, 2), v(-1, 4), v(5, -2)] {
            let a = kinv(&x, &y, &p).unwrap().value;
            let b = kinv_double_oracle(&x, &y, &p).unwrap();
            assert!((a - b).norm() < 1e-8, "{x}: {a} vs {b}");
        }
    }

    #[test]
    fn kinv_purity_and_translation() {
        let p = wp(0.7);
        let y = v(2, 1);
        for x in [v(1, 0), v(1, 2), v(3, 6), v(-3, 2)] {
            let kv = kinv(&x, &y, &p).unwrap();
            let m = kv.value.norm();
            if kv.h == 0 {
                assert!(kv.value.re.abs() <= 1e-12 * m.max(1e-300));
            } else {
                assert!(kv.value.im.abs() <= 1e-12 * m.max(1e-300));
            }
            let t = (2, 2);
            let shifted = kinv(&x.offset(t).unwrap(), &y.offset(t).unwrap(), &p).unwrap();
            assert!((shifted.value - kv.value).norm() < 1e-12);
        }
    }

    #[test]
    fn oracle_same_domain_is_imaginary() {
        let p = wp(0.7);
        let val = kinv_double_oracle(&v(1, 0), &v(0, 1), &p).unwrap();
        assert!(val.re.abs() < 1e-12);
    }

    #[test]
    fn vertex_cover_and_equal_a_edges() {
        let p = wp(0.8);
        let b = v(0, 1);
        let mut total = 0.0;
        let mut a_probs = Vec::new();
        for d in [(1, 1), (-1, 1), (-1, -1), (1, -1)] {
            let e = EdgeDimer::new(b, b.offset(d).unwrap()).unwrap();
            let pr = cylinder_prob(&[e], &p).unwrap();
            total += pr;
            if e.weight_class() == crate::lattice::WeightClass::A {
                a_probs.push(pr);
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert_eq!(a_probs.len(), 2);
        assert!((a_probs[0] - a_probs[1]).abs() < 1e-10);
    }

    #[test]
    fn cylinder_rejects_repeats() {
        let p = wp(0.8);
        let e = EdgeDimer::new(v(0, 1), v(1, 2)).unwrap();
        assert!(cylinder_prob(&[e, e], &p).is_err());
    }

    #[test]
    fn det_small() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let m = vec![vec![c(0.0), c(2.0)], vec![c(3.0), c(1.0)]];
        assert!((det(m) - c(-6.0)).norm() < 1e-15);
    }
}

//! Free Green's function (`d >= 3`) and the planar potential kernel.
//!
//! Both are one-dimensional integrals over products of scaled modified Bessel
//! functions `Ĩ_k(s) = e^{-s} I_k(s)`:
//!
//! * `G(x) = d ∫_0^∞ Π_i Ĩ_{|x_i|}(s) ds`
//! * `a(x) = 2 ∫_0^∞ [Ĩ_0(s)^2 - Ĩ_{|x_1|}(s) Ĩ_{|x_2|}(s)] ds`
//!
//! The integral over `[0, S]` uses Gauss-Legendre panels on a dyadic grid and
//! the tail `[S, ∞)` is integrated term by term from the large-argument
//! expansion of `Ĩ_k`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{HarmlatError, Result};
use crate::lattice::{LatticePoint, MAX_DIM};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Additive constant of the planar kernel, `(2γ + ln 8)/π`.
pub const KAPPA_2D: f64 = (2.0 * EULER_GAMMA + 2.079_441_541_679_835_9) / PI;

const GL_ORDER: usize = 24;
const FIRST_PANEL_EXP: i32 = -4;
const LAST_PANEL_EXP: i32 = 26;
const TAIL_TERMS: usize = 7;
/// Beyond this radius the planar kernel uses its far-field expansion.
const PLANAR_TABLE_EXTENT: i64 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    PotentialKernel2d,
    FreeGreen,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `Ĩ_0(s), ..., Ĩ_kmax(s)` by Miller's backward recurrence, normalized with
/// `Ĩ_0 + 2 Σ_{k≥1} Ĩ_k = 1`.
pub fn scaled_bessel_sequence(s: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if s == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = (kmax + 20).max((100.0 * s + (kmax * kmax) as f64).sqrt().ceil() as usize + 20);
    let mut f_next = 0.0f64;
    let mut f = 1e-30f64;
    let mut sum = 0.0f64;
    for k in (1..=start).rev() {
        if k <= kmax {
            out[k] = f;
        }
        sum += 2.0 * f;
        let f_prev = (2.0 * k as f64 / s) * f + f_next;
        f_next = f;
        f = f_prev;
        if f > 1e200 {
            f *= 1e-200;
            f_next *= 1e-200;
            sum *= 1e-200;
            for v in out.iter_mut().skip(k) {
                *v *= 1e-200;
            }
        }
    }
    out[0] = f;
    let norm = sum + f;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Coefficients `c_m(ν)` with `Ĩ_ν(s) ≈ (2πs)^{-1/2} Σ_m c_m s^{-m}`.
fn asymptotic_coeffs(nu: i64) -> [f64; TAIL_TERMS] {
    let mut c = [0.0; TAIL_TERMS];
    c[0] = 1.0;
    let mu = 4.0 * (nu as f64) * (nu as f64);
    for m in 1..TAIL_TERMS {
        let k = (2 * m - 1) as f64;
        c[m] = -c[m - 1] * (mu - k * k) / (8.0 * m as f64);
    }
    c
}

fn series_product(a: &[f64; TAIL_TERMS], b: &[f64; TAIL_TERMS]) -> [f64; TAIL_TERMS] {
    let mut out = [0.0; TAIL_TERMS];
    for i in 0..TAIL_TERMS {
        for j in 0..TAIL_TERMS - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    s_max: f64,
}

impl Quadrature {
    fn new() -> Self {
        let (gx, gw) = gauss_legendre(GL_ORDER);
        let mut edges = vec![0.0];
        for e in FIRST_PANEL_EXP..=LAST_PANEL_EXP {
            edges.push(2f64.powi(e));
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, wt) in gx.iter().zip(&gw) {
                nodes.push(0.5 * (b - a) * x + 0.5 * (a + b));
                weights.push(0.5 * (b - a) * wt);
            }
        }
        Self { nodes, weights, s_max: *edges.last().expect("panels") }
    }

    fn bessel_table(&self, kmax: usize) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|&s| scaled_bessel_sequence(s, kmax)).collect()
    }

    fn green(&self, key: &[i64], bessel: &[Vec<f64>]) -> f64 {
        let d = key.len();
        let mut body = 0.0;
        for (w, row) in self.weights.iter().zip(bessel) {
            let mut prod = 1.0;
            for &k in key {
                prod *= row[k as usize];
            }
            body += w * prod;
        }
        let mut series = [0.0; TAIL_TERMS];
        series[0] = 1.0;
        for &k in key {
            series = series_product(&series, &asymptotic_coeffs(k));
        }
        let half = d as f64 / 2.0;
        let tail: f64 = (0..TAIL_TERMS)
            .map(|m| series[m] * self.s_max.powf(1.0 - half - m as f64) / (half + m as f64 - 1.0))
            .sum::<f64>()
            * (2.0 * PI).powf(-half);
        d as f64 * (body + tail)
    }

    fn planar(&self, x: i64, y: i64, bessel: &[Vec<f64>]) -> f64 {
        let mut body = 0.0;
        for (w, row) in self.weights.iter().zip(bessel) {
            body += w * (row[0] * row[0] - row[x as usize] * row[y as usize]);
        }
        let c0 = asymptotic_coeffs(0);
        let p0 = series_product(&c0, &c0);
        let p1 = series_product(&asymptotic_coeffs(x), &asymptotic_coeffs(y));
        let tail: f64 = (1..TAIL_TERMS).map(|m| (p0[m] - p1[m]) * self.s_max.powi(-(m as i32)) / m as f64).sum::<f64>()
            / (2.0 * PI);
        2.0 * (body + tail)
    }
}

/// Far-field expansion of the planar potential kernel.
pub fn planar_far_field(x: i64, y: i64) -> f64 {
    let (xf, yf) = (x as f64, y as f64);
    let r2 = xf * xf + yf * yf;
    let th = yf.atan2(xf);
    let c4 = (4.0 * th).cos();
    let c8 = (8.0 * th).cos();
    (2.0 / PI) * 0.5 * r2.ln() + KAPPA_2D
        - c4 / (6.0 * PI * r2)
        - (3.0 * c4 / (20.0 * PI) + 5.0 * c8 / (24.0 * PI)) / (r2 * r2)
}

/// All `extent >= k_0 >= k_1 >= ... >= k_{d-1} >= 0`.
fn nonincreasing_tuples(d: usize, extent: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(d: usize, cap: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for k in 0..=cap {
            cur.push(k);
            rec(d, k, cur, out);
            cur.pop();
        }
    }
    rec(d, extent, &mut cur, &mut out);
    out
}

fn canonical_key(p: &LatticePoint) -> [i64; MAX_DIM] {
    let mut k = [0i64; MAX_DIM];
    for (i, v) in p.coords().iter().enumerate() {
        k[i] = v.abs();
    }
    k.sort_unstable_by(|a, b| b.cmp(a));
    k
}

/// Cached kernel values on `|x|_inf <= extent`, read-only after construction.
pub struct PotentialTable {
    kind: KernelKind,
    d: usize,
    extent: i64,
    values: HashMap<[i64; MAX_DIM], f64>,
    tol: f64,
}

impl std::fmt::Debug for PotentialTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialTable")
            .field("kind", &self.kind)
            .field("d", &self.d)
            .field("extent", &self.extent)
            .field("entries", &self.values.len())
            .finish()
    }
}

impl PotentialTable {
    /// Builds the table and checks the defining identities on every cached
    /// point whose neighbors are cached too.
    pub fn build(kind: KernelKind, d: usize, extent: i64, tol: f64) -> Result<Self> {
        match kind {
            KernelKind::PotentialKernel2d if d != 2 => {
                return Err(HarmlatError::InvalidInput("potential kernel needs d = 2".into()))
            }
            KernelKind::FreeGreen if !(3..=MAX_DIM).contains(&d) => {
                return Err(HarmlatError::InvalidInput("free Green's function needs d >= 3".into()))
            }
            _ => {}
        }
        let extent = match kind {
            KernelKind::PotentialKernel2d => PLANAR_TABLE_EXTENT,
            KernelKind::FreeGreen => extent.max(1),
        };
        let quad = Quadrature::new();
        let bessel = quad.bessel_table(extent as usize + 1);
        let mut values = HashMap::new();
        for key in nonincreasing_tuples(d, extent) {
            let mut full = [0i64; MAX_DIM];
            full[..d].copy_from_slice(&key);
            let v = match kind {
                KernelKind::PotentialKernel2d => quad.planar(key[0], key[1], &bessel),
                KernelKind::FreeGreen => quad.green(&key, &bessel),
            };
            values.insert(full, v);
        }
        let table = Self { kind, d, extent, values, tol };
        table.verify()?;
        Ok(table)
    }

    /// Process-wide table for dimension `d` covering at least `extent`.
    pub fn shared(d: usize, extent: i64) -> Result<Arc<PotentialTable>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PotentialTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("kernel cache poisoned");
        if let Some(t) = guard.get(&d) {
            if t.kind == KernelKind::PotentialKernel2d || t.extent >= extent {
                return Ok(Arc::clone(t));
            }
        }
        let kind = if d == 2 { KernelKind::PotentialKernel2d } else { KernelKind::FreeGreen };
        let grown = guard.get(&d).map_or(extent, |t| extent.max(t.extent * 3 / 2));
        let t = Arc::new(Self::build(kind, d, grown.max(16), 1e-12)?);
        guard.insert(d, Arc::clone(&t));
        Ok(t)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn extent(&self) -> i64 {
        self.extent
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Kernel value at `x` (`a(x)` for d = 2, `G(0, x)` otherwise).
    pub fn value(&self, x: &LatticePoint) -> f64 {
        let key = canonical_key(x);
        if key[0] <= self.extent {
            return self.values[&key];
        }
        match self.kind {
            KernelKind::PotentialKernel2d => planar_far_field(x.get(0), x.get(1)),
            KernelKind::FreeGreen => {
                let quad = Quadrature::new();
                let bessel = quad.bessel_table(key[0] as usize);
                quad.green(&key[..self.d], &bessel)
            }
        }
    }

    pub fn between(&self, x: &LatticePoint, y: &LatticePoint) -> f64 {
        self.value(&x.sub(y))
    }

    fn verify(&self) -> Result<()> {
        let d = self.d;
        let o = LatticePoint::origin(d);
        let mut worst = 0.0f64;
        let lim = self.extent - 1;
        for (key, &v) in &self.values {
            if key[0] > lim {
                continue;
            }
            let p = LatticePoint::new(&key[..d]).expect("valid key");
            let avg: f64 = p.neighbors().iter().map(|q| self.value(q)).sum::<f64>() / (2 * d) as f64;
            let delta = if p == o { 1.0 } else { 0.0 };
            let resid = match self.kind {
                KernelKind::PotentialKernel2d => avg - v - delta,
                KernelKind::FreeGreen => v - avg - delta,
            };
            worst = worst.max(resid.abs());
        }
        if self.kind == KernelKind::PotentialKernel2d && self.value(&o).abs() > self.tol {
            worst = worst.max(self.value(&o).abs());
        }
        if worst > self.tol {
            return Err(HarmlatError::Numerical(format!("kernel table fails its defining identity by {worst:e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_small_argument() {
        // I_0(1) e^{-1}, I_1(1) e^{-1}
        let v = scaled_bessel_sequence(1.0, 2);
        assert!((v[0] - 1.266_065_877_752_008_4 * (-1f64).exp()).abs() < 1e-15);
        assert!((v[1] - 0.565_159_103_992_485_0 * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bessel_large_argument_matches_asymptotics() {
        let s = 1e6;
        let v = scaled_bessel_sequence(s, 3);
        for (k, &val) in v.iter().enumerate() {
            let c = asymptotic_coeffs(k as i64);
            let approx: f64 = (0..TAIL_TERMS).map(|m| c[m] * s.powi(-(m as i32))).sum::<f64>() / (2.0 * PI * s).sqrt();
            assert!((val - approx).abs() < 1e-14 * approx, "k={k}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(GL_ORDER);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((int - 2.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn planar_kernel_exact_values() {
        let t = PotentialTable::build(KernelKind::PotentialKernel2d, 2, 0, 1e-12).unwrap();
        let a = |x, y| t.value(&LatticePoint::p2(x, y));
        assert!(a(0, 0).abs() < 1e-13);
        assert!((a(1, 0) - 1.0).abs() < 1e-13);
        assert!((a(1, 1) - 4.0 / PI).abs() < 1e-13);
        assert!((a(2, 0) - (4.0 - 8.0 / PI)).abs() < 1e-13);
        // table and far field agree at the seam
        let q = Quadrature::new();
        let b = q.bessel_table(60);
        for (x, y) in [(50, 0), (35, 35), (60, 11)] {
            assert!((q.planar(x, y, &b) - planar_far_field(x, y)).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_green_watson_value() {
        let t = PotentialTable::build(KernelKind::FreeGreen, 3, 4, 1e-12).unwrap();
        let g0 = t.value(&LatticePoint::origin(3));
        assert!((g0 - 1.516_386_059_151_978).abs() < 1e-12);
        assert!((t.value(&LatticePoint::p3(1, 0, 0)) - (g0 - 1.0)).abs() < 1e-12);
        assert_eq!(t.value(&LatticePoint::p3(1, -2, 3)), t.value(&LatticePoint::p3(3, 1, 2)));
        let beyond = t.value(&LatticePoint::p3(7, 0, 0));
        assert!((beyond - 3.0 / (2.0 * PI * 7.0)).abs() < 2e-3);
    }
}

//! Dirichlet problems for the simple random walk on finite regions of `Z^d`.
//!
//! A region is given by a box window and a predicate selecting the free
//! (transient) sites. Non-free sites, including everything outside the window,
//! carry boundary data. The system matrix `2d·I − Adj` restricted to the free
//! sites is a symmetric M-matrix and is factored once by sparse Cholesky.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{HarmlatError, Result};
use crate::lattice::{BoxWindow, LatticePoint};

const NONE: u32 = u32::MAX;

pub struct LaplaceSystem {
    window: BoxWindow,
    slot: Vec<u32>,
    free: Vec<LatticePoint>,
    llt: Option<Llt<usize, f64>>,
    d: usize,
}

impl std::fmt::Debug for LaplaceSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LaplaceSystem").field("window", &self.window).field("free", &self.free.len()).finish()
    }
}

impl LaplaceSystem {
    /// Factors the operator on `{p in window : is_free(p)}`.
    pub fn new(window: BoxWindow, is_free: impl Fn(&LatticePoint) -> bool) -> Result<Self> {
        let d = window.d();
        let mut slot = vec![NONE; window.len()];
        let mut free = Vec::new();
        for (i, p) in window.points().enumerate() {
            if is_free(&p) {
                if free.len() >= NONE as usize {
                    return Err(HarmlatError::Budget("too many free sites".into()));
                }
                slot[i] = free.len() as u32;
                free.push(p);
            }
        }
        let mut sys = Self { window, slot, free, llt: None, d };
        if sys.free.is_empty() {
            return Ok(sys);
        }
        let n = sys.free.len();
        let mut trip = Vec::with_capacity(n * (2 * d + 1));
        for (i, p) in sys.free.iter().enumerate() {
            trip.push(Triplet::new(i, i, (2 * d) as f64));
            for q in p.neighbors() {
                if let Some(j) = sys.slot_of(&q) {
                    trip.push(Triplet::new(j, i, -1.0));
                }
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| HarmlatError::Numerical(format!("sparse assembly: {e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| HarmlatError::Numerical(format!("sparse Cholesky: {e:?}")))?;
        sys.llt = Some(llt);
        Ok(sys)
    }

    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn free_points(&self) -> &[LatticePoint] {
        &self.free
    }

    pub fn slot_of(&self, p: &LatticePoint) -> Option<usize> {
        let i = self.window.index(p)?;
        let s = self.slot[i];
        (s != NONE).then_some(s as usize)
    }

    /// Solves `(2d·I − Adj) u = rhs` on the free sites for every column.
    pub fn solve_columns(&self, rhs: &mut Mat<f64>) {
        if let Some(llt) = &self.llt {
            llt.solve_in_place(rhs.as_mut());
        }
    }

    pub fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let mut m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_columns(&mut m);
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }

    /// The function harmonic at every free site and equal to `value` on all
    /// other sites.
    pub fn harmonic(&self, value: impl Fn(&LatticePoint) -> f64) -> Solution<'_> {
        let rhs = self
            .free
            .iter()
            .map(|p| p.neighbors().iter().filter(|q| self.slot_of(q).is_none()).map(&value).sum::<f64>())
            .collect();
        let u = self.solve(rhs);
        Solution { sys: self, u }
    }

    /// Expected visits to the free site `y` before leaving the free region,
    /// started from each free site.
    pub fn green_column(&self, y: &LatticePoint) -> Option<Vec<f64>> {
        let j = self.slot_of(y)?;
        let mut rhs = vec![0.0; self.len()];
        rhs[j] = (2 * self.d) as f64;
        Some(self.solve(rhs))
    }

    /// Max-norm residual of `(2d·I − Adj) u = rhs`.
    pub fn residual(&self, u: &[f64], rhs: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, p) in self.free.iter().enumerate() {
            let mut r = rhs[i] - (2 * self.d) as f64 * u[i];
            for q in p.neighbors() {
                if let Some(j) = self.slot_of(&q) {
                    r += u[j];
                }
            }
            worst = worst.max(r.abs());
        }
        worst
    }
}

/// A harmonic extension together with its boundary data.
pub struct Solution<'a> {
    sys: &'a LaplaceSystem,
    pub u: Vec<f64>,
}

impl Solution<'_> {
    /// Value at a free site, `None` elsewhere.
    pub fn at(&self, p: &LatticePoint) -> Option<f64> {
        self.sys.slot_of(p).map(|i| self.u[i])
    }

    /// Value at any site, using `boundary` off the free region.
    pub fn eval(&self, p: &LatticePoint, boundary: impl Fn(&LatticePoint) -> f64) -> f64 {
        self.at(p).unwrap_or_else(|| boundary(p))
    }

    /// `Σ_{z ~ y} u(z)` with `boundary` off the free region.
    pub fn neighbor_sum(&self, y: &LatticePoint, boundary: impl Fn(&LatticePoint) -> f64) -> f64 {
        y.neighbors().iter().map(|z| self.eval(z, &boundary)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamblers_ruin_on_a_segment() {
        // sites 1..=4 of a 1-wide strip in d=2 with walls above and below
        let w = BoxWindow::new(LatticePoint::p2(0, 0), LatticePoint::p2(5, 0));
        let sys = LaplaceSystem::new(w, |p| (1..=4).contains(&p.get(0))).unwrap();
        let sol = sys.harmonic(|p| if p.get(0) >= 5 && p.get(1) == 0 { 1.0 } else { 0.0 });
        // u_i = (u_{i-1} + u_{i+1})/4, u_0 = 0, u_5 = 1
        let l = 2.0 + 3f64.sqrt();
        let exact = |i: i32| (l.powi(i) - l.powi(-i)) / (l.powi(5) - l.powi(-5));
        for i in 1..=4 {
            let u = sol.at(&LatticePoint::p2(i as i64, 0)).unwrap();
            assert!((u - exact(i)).abs() < 1e-15);
        }
        let rhs = [0.0, 0.0, 0.0, 1.0];
        assert!(sys.residual(&sol.u, &rhs) < 1e-15);
    }

    #[test]
    fn green_column_is_symmetric() {
        let w = BoxWindow::cube(&LatticePoint::origin(3), 3);
        let sys = LaplaceSystem::new(w, |p| p.linf() <= 2).unwrap();
        let x = LatticePoint::p3(1, -1, 0);
        let y = LatticePoint::p3(-2, 0, 1);
        let gx = sys.green_column(&x).unwrap();
        let gy = sys.green_column(&y).unwrap();
        let a = gx[sys.slot_of(&y).unwrap()];
        let b = gy[sys.slot_of(&x).unwrap()];
        assert!((a - b).abs() < 1e-14 * a.abs());
        assert!(gx[sys.slot_of(&x).unwrap()] > 1.0);
    }
}

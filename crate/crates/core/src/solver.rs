//! Exact hitting distributions, Green's functions, escape probabilities and
//! removal prices.
//!
//! Two independent routes are available for harmonic measure from infinity:
//!
//! * **wired**: the walk on a large ball with its exterior collapsed to one
//!   vertex, solved by sparse Cholesky at geometrically growing radii and
//!   extrapolated in the radius;
//! * **dense**: an `|A| x |A|` system built from the planar potential kernel
//!   (`d = 2`) or the free Green's function (`d >= 3`), followed by one sparse
//!   harmonic extension on a window around `A` that recovers tiny values with
//!   relative accuracy.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, HarmlatError, Result};
use crate::grid::LaplaceSystem;
use crate::kernel::PotentialTable;
use crate::lattice::{boundary, Adjacency, BoundaryKind, BoxWindow, LatticePoint, SiteSet};
use crate::measure::{MeasureVector, Method};

/// Extra layers around `A` for the dense-route harmonic extension.
pub const REFINE_MARGIN: i64 = 4;
/// Larger windows skip the extension and report the dense values.
pub const REFINE_MAX_SITES: usize = 400_000;
/// Doublings allowed past the starting radius.
pub const MAX_DOUBLINGS: u32 = 5;

/// Free-site budget of one wired solve.
pub fn wired_budget(d: usize) -> usize {
    if d == 2 {
        2_200_000
    } else {
        160_000
    }
}

/// Available routes for `H_A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Wired,
    Dense,
    Escape,
}

fn kernel_for(set: &SiteSet, margin: i64) -> Result<Arc<PotentialTable>> {
    let (lo, hi) = set.bbox().ok_or_else(|| HarmlatError::InvalidInput("empty set".into()))?;
    let span = (0..set.d()).map(|a| hi.get(a) - lo.get(a)).max().unwrap_or(0);
    let extent = if set.d() == 2 { 0 } else { span + margin + 1 };
    PotentialTable::shared(set.d(), extent)
}

fn dense_solve(m: Mat<f64>, rhs: &[f64]) -> (Vec<f64>, f64) {
    let n = rhs.len();
    let mut x = Mat::from_fn(n, 1, |i, _| rhs[i]);
    m.partial_piv_lu().solve_in_place(x.as_mut());
    let mut res = 0.0f64;
    for i in 0..n {
        let r: f64 = (0..n).map(|j| m[(i, j)] * x[(j, 0)]).sum::<f64>() - rhs[i];
        res = res.max(r.abs());
    }
    ((0..n).map(|i| x[(i, 0)]).collect(), res)
}

// ---------------------------------------------------------------------------
// dense route

/// Equilibrium data of the dense route: for `d = 2` the harmonic measure and
/// the Robin-type constant of the bordered kernel system, for `d >= 3` the
/// equilibrium charge `G_AA^{-1} 1`.
#[derive(Clone, Debug)]
struct Equilibrium {
    charge: Vec<f64>,
    constant: f64,
    residual: f64,
}

fn planar_equilibrium(set: &SiteSet, a: &PotentialTable) -> Equilibrium {
    let n = set.len();
    let pts = set.points();
    let m = Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => a.between(&pts[i], &pts[j]),
        (true, false) => -1.0,
        (false, true) => 1.0,
        (false, false) => 0.0,
    });
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    let (x, residual) = dense_solve(m, &rhs);
    Equilibrium { charge: x[..n].to_vec(), constant: x[n], residual }
}

fn green_equilibrium(set: &SiteSet, g: &PotentialTable) -> Result<Equilibrium> {
    let n = set.len();
    let pts = set.points();
    let m = Mat::from_fn(n, n, |i, j| g.between(&pts[i], &pts[j]));
    let llt = m
        .llt(Side::Lower)
        .map_err(|e| HarmlatError::Numerical(format!("Green matrix not positive definite: {e:?}")))?;
    let mut x = Mat::from_fn(n, 1, |_, _| 1.0);
    llt.solve_in_place(x.as_mut());
    let charge: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let mut residual = 0.0f64;
    for i in 0..n {
        let r: f64 = (0..n).map(|j| m[(i, j)] * charge[j]).sum::<f64>() - 1.0;
        residual = residual.max(r.abs());
    }
    Ok(Equilibrium { charge, constant: 0.0, residual })
}

/// The potential `φ` vanishing on `A` whose discrete Laplacian at `y ∈ A`
/// is the dense-route weight of `y`: `Σ a(x-a_j) μ_j - c` for `d = 2`,
/// `1 - Σ G(x-a_j) e_j` for `d >= 3`.
fn outer_potential(set: &SiteSet, kern: &PotentialTable, eq: &Equilibrium, x: &LatticePoint) -> f64 {
    let s: f64 = set.iter().zip(&eq.charge).map(|(p, w)| kern.between(x, p) * w).sum();
    if set.d() == 2 {
        s - eq.constant
    } else {
        1.0 - s
    }
}

/// Harmonic extension of the outer potential from the shell of a window
/// around `A`; returns `(1/2d) Σ_{z~y} φ(z)` for every `y ∈ A`.
fn refine(set: &SiteSet, kern: &PotentialTable, eq: &Equilibrium) -> Result<Option<Vec<f64>>> {
    let window = BoxWindow::around(set, REFINE_MARGIN);
    if window.len() > REFINE_MAX_SITES {
        return Ok(None);
    }
    let shell = window.clone();
    let sys = LaplaceSystem::new(window, |p| !shell.on_shell(p) && !set.contains(p))?;
    let value = |p: &LatticePoint| if set.contains(p) { 0.0 } else { outer_potential(set, kern, eq, p) };
    let sol = sys.harmonic(value);
    let dd = (2 * set.d()) as f64;
    let w = set.iter().map(|y| sol.neighbor_sum(y, value) / dd).collect();
    Ok(Some(w))
}

/// Dense-route harmonic measure (`d = 2`: potential kernel; `d >= 3`:
/// `Es_A / cap(A)`).
pub fn dense_harmonic_measure(set: &SiteSet) -> Result<MeasureVector> {
    if set.is_empty() {
        return invalid("empty set");
    }
    if set.d() >= 3 {
        let ec = escape_capacity(set)?;
        let w = ec.es.iter().map(|e| e / ec.cap).collect();
        return Ok(MeasureVector::on_sites(set, w, Method::EsOverCap, ec.error_estimate / ec.cap));
    }
    if set.len() == 1 {
        return Ok(MeasureVector::on_sites(set, vec![1.0], Method::DenseKernel, 0.0));
    }
    let kern = kernel_for(set, REFINE_MARGIN)?;
    let eq = planar_equilibrium(set, &kern);
    let (weights, err) = match refine(set, &kern, &eq)? {
        Some(w) => {
            let total: f64 = w.iter().sum();
            let gap = w.iter().zip(&eq.charge).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let w: Vec<f64> = w.iter().map(|v| v / total).collect();
            (w, gap.max((total - 1.0).abs()).max(eq.residual))
        }
        None => {
            let w: Vec<f64> = eq.charge.iter().map(|v| v.max(0.0)).collect();
            let total: f64 = w.iter().sum();
            (w.iter().map(|v| v / total).collect(), eq.residual.max((total - 1.0).abs()))
        }
    };
    Ok(MeasureVector::on_sites(set, weights, Method::DenseKernel, err))
}

/// Escape probabilities and capacity of a finite set in `d >= 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeCapacity {
    pub es: Vec<f64>,
    pub cap: f64,
    /// The equilibrium charge before the harmonic extension.
    pub dense_es: Vec<f64>,
    pub error_estimate: f64,
}

/// `Es_A(x)` for `x ∈ A` and `cap(A)`.
pub fn escape_capacity(set: &SiteSet) -> Result<EscapeCapacity> {
    if set.d() < 3 {
        return invalid("escape probabilities need d >= 3");
    }
    if set.is_empty() {
        return invalid("empty set");
    }
    let kern = kernel_for(set, REFINE_MARGIN)?;
    let eq = green_equilibrium(set, &kern)?;
    let (es, gap) = match refine(set, &kern, &eq)? {
        Some(w) => {
            let gap = w.iter().zip(&eq.charge).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (w, gap)
        }
        None => (eq.charge.iter().map(|v| v.max(0.0)).collect(), 0.0),
    };
    let cap = es.iter().sum();
    Ok(EscapeCapacity { es, cap, dense_es: eq.charge, error_estimate: gap.max(eq.residual) })
}

/// `Es_A` at every point of `A` together with the escape function
/// `P_x(τ_A = ∞)` on a window around `A`.
pub struct EscapeField {
    pub set: SiteSet,
    pub es: Vec<f64>,
    pub cap: f64,
    window: BoxWindow,
    values: Vec<f64>,
}

impl EscapeField {
    /// Requires `d >= 3`; `margin` layers around the bounding box.
    pub fn new(set: &SiteSet, margin: i64) -> Result<Self> {
        if set.d() < 3 {
            return invalid("escape probabilities need d >= 3");
        }
        let kern = kernel_for(set, margin)?;
        let eq = green_equilibrium(set, &kern)?;
        let window = BoxWindow::around(set, margin.max(2));
        let shell = window.clone();
        let sys = LaplaceSystem::new(window.clone(), |p| !shell.on_shell(p) && !set.contains(p))?;
        let value = |p: &LatticePoint| if set.contains(p) { 0.0 } else { outer_potential(set, &kern, &eq, p) };
        let sol = sys.harmonic(value);
        let values: Vec<f64> = window.points().map(|p| sol.eval(&p, value)).collect();
        let dd = (2 * set.d()) as f64;
        let es: Vec<f64> = set.iter().map(|y| sol.neighbor_sum(y, value) / dd).collect();
        let cap = es.iter().sum();
        Ok(Self { set: set.clone(), es, cap, window, values })
    }

    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    /// `P_x(τ_A = ∞)` for `x` in the window (0 on `A`).
    pub fn escape(&self, x: &LatticePoint) -> Option<f64> {
        self.window.index(x).map(|i| self.values[i])
    }

    pub fn es_at(&self, x: &LatticePoint) -> Option<f64> {
        self.set.index_of(x).map(|i| self.es[i])
    }
}

/// Lower and upper bounds on `Es_A(x)` from the walk stopped on leaving
/// `Λ(radius)`: with `U = P_x(exit before τ⁺_A)` and `δ` the largest
/// union bound on returning to `A` from outside the box,
/// `Es_A(x) ∈ [U(1-δ), U]`.
pub fn escape_bracket(set: &SiteSet, radius: i64) -> Result<Vec<(f64, f64)>> {
    if set.d() < 3 {
        return invalid("escape probabilities need d >= 3");
    }
    if set.radius_inf() >= radius {
        return invalid("set must lie inside the box");
    }
    let d = set.d();
    let origin = LatticePoint::origin(d);
    let window = BoxWindow::cube(&origin, radius + 1);
    let sys = LaplaceSystem::new(window.clone(), |p| p.linf() <= radius && !set.contains(p))?;
    let value = |p: &LatticePoint| if p.linf() > radius { 1.0 } else { 0.0 };
    let sol = sys.harmonic(value);
    let delta = return_bound(set, radius)?;
    let dd = (2 * d) as f64;
    Ok(set
        .iter()
        .map(|x| {
            let u = sol.neighbor_sum(x, value) / dd;
            (u * (1.0 - delta).max(0.0), u)
        })
        .collect())
}

/// `max_{|w|_inf = radius+1} Σ_{a ∈ A} G(w-a)/G(0)`, a union bound on
/// `P_w(τ_A < ∞)` for walks leaving `Λ(radius)`.
pub fn return_bound(set: &SiteSet, radius: i64) -> Result<f64> {
    if set.d() < 3 {
        return invalid("return probabilities need d >= 3");
    }
    let d = set.d();
    let origin = LatticePoint::origin(d);
    let window = BoxWindow::cube(&origin, radius + 1);
    let g = PotentialTable::shared(d, 2 * radius + 2)?;
    let g0 = g.value(&origin);
    let mut delta = 0.0f64;
    for w in window.points().filter(|p| window.on_shell(p)) {
        let s: f64 = set.iter().map(|a| g.between(&w, a)).sum::<f64>() / g0;
        delta = delta.max(s);
    }
    Ok(delta)
}

// ---------------------------------------------------------------------------
// wired route

/// `2·c` where `c` is the midpoint of the bounding box, so that balls around
/// it are described in integers.
fn doubled_center(set: &SiteSet) -> Vec<i64> {
    let (lo, hi) = set.bbox().expect("non-empty set");
    (0..set.d()).map(|a| lo.get(a) + hi.get(a)).collect()
}

fn doubled_l1(p: &LatticePoint, c2: &[i64]) -> i64 {
    (0..p.d()).map(|a| (2 * p.get(a) - c2[a]).abs()).sum()
}

/// `L1` radius of `A` around its bounding-box midpoint, rounded up.
pub fn wired_base_radius(set: &SiteSet) -> i64 {
    let c2 = doubled_center(set);
    let m = set.iter().map(|p| doubled_l1(p, &c2)).max().unwrap_or(0);
    (m + 1) / 2
}

/// Number of lattice points of the `L1` ball of radius `r` in dimension `d`
/// (upper estimate).
fn ball_size(d: usize, r: i64) -> usize {
    let r = r as f64 + 1.0;
    match d {
        2 => (2.0 * r * r) as usize,
        3 => (4.0 * r * r * r / 3.0) as usize,
        _ => (2.0 * r.powi(4) / 3.0) as usize,
    }
}

/// Wired harmonic measure on the `L1` ball of radius `r` around the
/// bounding-box midpoint of `A`.
pub fn wired_harmonic_measure(set: &SiteSet, r: i64) -> Result<MeasureVector> {
    if set.is_empty() {
        return invalid("empty set");
    }
    let c2 = doubled_center(set);
    if set.iter().any(|p| doubled_l1(p, &c2) >= 2 * r) {
        return invalid(format!("set is not strictly inside the ball of radius {r}"));
    }
    if ball_size(set.d(), r) > 4 * wired_budget(set.d()) {
        return Err(HarmlatError::Budget(format!("wired ball of radius {r} too large")));
    }
    let d = set.d();
    let mut lo = LatticePoint::origin(d);
    let mut hi = LatticePoint::origin(d);
    for a in 0..d {
        lo = lo.shifted(a, c2[a].div_euclid(2) - r - 1);
        hi = hi.shifted(a, (c2[a] + 1).div_euclid(2) + r + 1);
    }
    let inside = |p: &LatticePoint| doubled_l1(p, &c2) <= 2 * r;
    let sys = LaplaceSystem::new(BoxWindow::new(lo, hi), |p| inside(p) && !set.contains(p))?;
    let value = |p: &LatticePoint| if set.contains(p) { 0.0 } else { 1.0 };
    let sol = sys.harmonic(value);
    let raw: Vec<f64> = set.iter().map(|y| sol.neighbor_sum(y, value)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(HarmlatError::Numerical("no site of the set is reachable".into()));
    }
    Ok(MeasureVector::on_sites(set, raw.iter().map(|v| v / total).collect(), Method::WiredR, f64::NAN))
}

/// Leading exponent of the wired error `H_r - H ~ r^{-p}`.
pub fn wired_leading_exponent(d: usize) -> u32 {
    if d == 2 {
        2
    } else {
        3
    }
}

/// Wired measures at radii `r0, 2r0, ...` combined by Richardson
/// extrapolation in `1/r` with exponents `p, p+1, ...`, stopping when two
/// consecutive diagonal entries differ by less than `tol`.
pub fn wired_extrapolated(set: &SiteSet, tol: f64) -> Result<MeasureVector> {
    if set.len() == 1 {
        return Ok(MeasureVector::on_sites(set, vec![1.0], Method::Extrapolated, 0.0));
    }
    let d = set.d();
    let p0 = wired_leading_exponent(d);
    let r0 = 4 * (wired_base_radius(set) + 1);
    let n = set.len();
    let mut table: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for k in 0..=MAX_DOUBLINGS {
        let r = r0 << k;
        if ball_size(d, r) > wired_budget(d) {
            break;
        }
        let h = wired_harmonic_measure(set, r)?.weights;
        let mut row = vec![h];
        for j in 1..=k as usize {
            let f = 2f64.powi((p0 as usize + j - 1) as i32) - 1.0;
            let prev = &table[k as usize - 1][j - 1];
            let cur = &row[j - 1];
            row.push((0..n).map(|i| cur[i] + (cur[i] - prev[i]) / f).collect());
        }
        if k >= 1 {
            let diag = &row[k as usize];
            let prev_diag = &table[k as usize - 1][k as usize - 1];
            let gap = diag.iter().zip(prev_diag).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if best.as_ref().is_none_or(|b| gap < b.1) {
                best = Some((diag.clone(), gap));
            }
            if gap < tol {
                table.push(row);
                break;
            }
        }
        table.push(row);
    }
    match best {
        Some((w, gap)) if gap < tol => {
            let total: f64 = w.iter().sum();
            Ok(MeasureVector::on_sites(set, w.iter().map(|v| v / total).collect(), Method::Extrapolated, gap))
        }
        Some((w, gap)) => Err(HarmlatError::ToleranceUnreachable { tol, achieved: gap, best: w }),
        None => Err(HarmlatError::Budget("no wired radius fits the budget".into())),
    }
}

/// `H_A` by the requested route.
pub fn harmonic_measure(set: &SiteSet, route: Route, tol: f64) -> Result<MeasureVector> {
    match route {
        Route::Wired => wired_extrapolated(set, tol),
        Route::Dense => dense_harmonic_measure(set),
        Route::Escape if set.d() >= 3 => dense_harmonic_measure(set),
        Route::Escape => invalid("escape route needs d >= 3"),
    }
}

/// `H_A`: wired extrapolation for `d = 2`, `Es_A/cap(A)` for `d >= 3`.
pub fn harmonic_measure_infinity(set: &SiteSet, tol: f64) -> Result<MeasureVector> {
    if set.d() == 2 {
        wired_extrapolated(set, tol)
    } else {
        dense_harmonic_measure(set)
    }
}

// ---------------------------------------------------------------------------
// Green's functions

/// `G_A(x, y)`, the expected number of visits to `y` before `τ_A`, in
/// infinite volume.
pub fn green_killed(set: &SiteSet, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
    if set.is_empty() {
        return invalid("Green's function needs a non-empty set");
    }
    if set.contains(x) || set.contains(y) {
        return Ok(0.0);
    }
    let probe = SiteSet::new(set.d(), set.iter().copied().chain([*x, *y]))?;
    let kern = kernel_for(&probe, 0)?;
    Ok(GreenKilled::new(set, kern)?.eval(x, y))
}

/// Green's function of the walk killed on `A`, for repeated evaluation with
/// a fixed second argument.
pub struct GreenKilled {
    set: SiteSet,
    kern: Arc<PotentialTable>,
    factor: faer::linalg::solvers::PartialPivLu<f64>,
    n: usize,
}

impl GreenKilled {
    fn new(set: &SiteSet, kern: Arc<PotentialTable>) -> Result<Self> {
        let n = set.len();
        let pts = set.points();
        let planar = set.d() == 2;
        let dim = if planar { n + 1 } else { n };
        let m = Mat::from_fn(dim, dim, |i, j| {
            if i < n && j < n {
                kern.between(&pts[i], &pts[j])
            } else if i < n {
                -1.0
            } else if j < n {
                1.0
            } else {
                0.0
            }
        });
        Ok(Self { set: set.clone(), kern, factor: m.partial_piv_lu(), n })
    }

    /// Builds the solver for `A`, with kernel values covering `extra` too.
    pub fn for_set(set: &SiteSet, extra: &[LatticePoint]) -> Result<Self> {
        let probe = SiteSet::new(set.d(), set.iter().chain(extra).copied())?;
        Self::new(set, kernel_for(&probe, 0)?)
    }

    pub fn eval(&self, x: &LatticePoint, y: &LatticePoint) -> f64 {
        if self.set.contains(x) || self.set.contains(y) {
            return 0.0;
        }
        let n = self.n;
        let pts = self.set.points();
        let k = &self.kern;
        if self.set.d() == 2 {
            // Σ_w a(a-w) ν(w) - c = -a(a-y), Σ ν = -1;
            // G_A(x,y) = c - a(x-y) - Σ_w a(x-w) ν(w)
            let mut rhs = Mat::from_fn(n + 1, 1, |i, _| if i < n { -k.between(&pts[i], y) } else { -1.0 });
            self.factor.solve_in_place(rhs.as_mut());
            let c = rhs[(n, 0)];
            let s: f64 = (0..n).map(|j| k.between(x, &pts[j]) * rhs[(j, 0)]).sum();
            c - k.between(x, y) - s
        } else {
            // G_AA ν = -G_{A,y}; G_A(x,y) = G(x-y) + Σ_w G(x-w) ν(w)
            let mut rhs = Mat::from_fn(n, 1, |i, _| -k.between(&pts[i], y));
            self.factor.solve_in_place(rhs.as_mut());
            let s: f64 = (0..n).map(|j| k.between(x, &pts[j]) * rhs[(j, 0)]).sum();
            k.between(x, y) + s
        }
    }
}

/// The walk on `Λ(radius)` killed on `A` and on leaving the box. Every
/// quantity is exact for this finite chain.
pub struct KilledWalk {
    set: SiteSet,
    radius: i64,
    sys: LaplaceSystem,
}

impl KilledWalk {
    pub fn new(set: &SiteSet, radius: i64) -> Result<Self> {
        if set.radius_inf() > radius {
            return invalid("set must lie inside the box");
        }
        let window = BoxWindow::cube(&LatticePoint::origin(set.d()), radius + 1);
        let sys = LaplaceSystem::new(window, |p| p.linf() <= radius && !set.contains(p))?;
        Ok(Self { set: set.clone(), radius, sys })
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn set(&self) -> &SiteSet {
        &self.set
    }

    pub fn is_killed(&self, p: &LatticePoint) -> bool {
        p.linf() > self.radius || self.set.contains(p)
    }

    pub fn free_points(&self) -> &[LatticePoint] {
        self.sys.free_points()
    }

    /// `G(·, y)` on the free sites.
    pub fn green_row(&self, y: &LatticePoint) -> Option<Vec<f64>> {
        self.sys.green_column(y)
    }

    pub fn green(&self, x: &LatticePoint, y: &LatticePoint) -> f64 {
        match (self.sys.slot_of(x), self.sys.green_column(y)) {
            (Some(i), Some(col)) => col[i],
            _ => 0.0,
        }
    }

    /// `P_x(walk is killed at w)` for `x` free or killed (a killed start is
    /// killed at once).
    pub fn exit_law(&self, w: &LatticePoint) -> impl Fn(&LatticePoint) -> f64 + '_ {
        let w = *w;
        let sol = self.sys.harmonic(move |p| if *p == w { 1.0 } else { 0.0 });
        let u = sol.u;
        move |x: &LatticePoint| match self.sys.slot_of(x) {
            Some(i) => u[i],
            None => (*x == w) as u8 as f64,
        }
    }

    /// `P_x(τ⁺ hits the killed set at w)`, one step then [`Self::exit_law`].
    pub fn exit_law_plus(&self, x: &LatticePoint, w: &LatticePoint) -> f64 {
        let f = self.exit_law(w);
        x.neighbors().iter().map(&f).sum::<f64>() / (2 * self.set.d()) as f64
    }

    /// `P_x(τ_y < τ_killed)` for free `y`.
    pub fn reach_before_kill(&self, x: &LatticePoint, y: &LatticePoint) -> Result<f64> {
        if self.is_killed(y) {
            return invalid("target must be a free site");
        }
        if x == y {
            return Ok(1.0);
        }
        let r = self.radius;
        let set = &self.set;
        let sys = LaplaceSystem::new(self.sys.window().clone(), |p| p.linf() <= r && !set.contains(p) && p != y)?;
        let sol = sys.harmonic(|p| if p == y { 1.0 } else { 0.0 });
        Ok(sol.at(x).unwrap_or(0.0))
    }

    /// `P_x(τ_killed < τ⁺_x)` for free `x`.
    pub fn escape_before_return(&self, x: &LatticePoint) -> Result<f64> {
        if self.is_killed(x) {
            return invalid("start must be a free site");
        }
        let r = self.radius;
        let set = &self.set;
        let sys = LaplaceSystem::new(self.sys.window().clone(), |p| p.linf() <= r && !set.contains(p) && p != x)?;
        let value = |p: &LatticePoint| if p == x { 0.0 } else { 1.0 };
        let sol = sys.harmonic(value);
        Ok(sol.neighbor_sum(x, value) / (2 * set.d()) as f64)
    }
}

/// Both sides of the last-exit decomposition for the killed walk on
/// `Λ(radius)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LastExit {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

/// `P_z(τ_{A1} = τ_y) = Σ_{v ∈ A2∖A1} G_{A1}(z,v) P_v(τ⁺_{A2} = τ_y)`.
pub fn last_exit_check(
    a1: &SiteSet,
    a2: &SiteSet,
    y: &LatticePoint,
    z: &LatticePoint,
    radius: i64,
) -> Result<LastExit> {
    if !a1.is_subset(a2) || !a1.contains(y) || !a2.contains(z) || a1.contains(z) {
        return precondition("need A1 ⊂ A2, y ∈ A1, z ∈ A2 \\ A1");
    }
    let w1 = KilledWalk::new(a1, radius)?;
    let w2 = KilledWalk::new(a2, radius)?;
    let lhs = w1.exit_law(y)(z);
    let gz = w1.green_row(z).expect("z is free for A1");
    let hit2 = w2.exit_law(y);
    let dd = (2 * a1.d()) as f64;
    let mut rhs = 0.0;
    for v in a2.without(a1).iter() {
        let g = w1.sys.slot_of(v).map_or(0.0, |i| gz[i]);
        let plus = v.neighbors().iter().map(&hit2).sum::<f64>() / dd;
        rhs += g * plus;
    }
    Ok(LastExit { lhs, rhs, diff: (lhs - rhs).abs() })
}

// ---------------------------------------------------------------------------
// removal prices

/// `ρ` with its propagated error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Price {
    pub rho: f64,
    pub error: f64,
    pub h_before: f64,
    pub h_after: f64,
}

fn weight_with_error(m: &MeasureVector, y: &LatticePoint) -> Result<(f64, f64)> {
    Ok((m.at(y)?, m.error_estimate))
}

/// `ρ_{A,y}(z) = H_{A∖z}(y) / H_A(y)` by the given route.
pub fn removal_price_with(set: &SiteSet, y: &LatticePoint, z: &LatticePoint, route: Route, tol: f64) -> Result<Price> {
    if !set.contains(y) {
        return Err(HarmlatError::NotInSet(*y));
    }
    if !set.contains(z) {
        return Err(HarmlatError::NotInSet(*z));
    }
    if y == z {
        return invalid("y and z must differ");
    }
    let before = harmonic_measure(set, route, tol)?;
    removal_price_given(set, &before, y, z, route, tol)
}

fn removal_price_given(
    set: &SiteSet,
    before: &MeasureVector,
    y: &LatticePoint,
    z: &LatticePoint,
    route: Route,
    tol: f64,
) -> Result<Price> {
    let (hb, eb) = weight_with_error(before, y)?;
    if hb <= 0.0 {
        return precondition(format!("H_A({y}) = 0"));
    }
    let after = harmonic_measure(&set.without_point(z), route, tol)?;
    let (ha, ea) = weight_with_error(&after, y)?;
    let rho = ha / hb;
    let error = rho * (ea / ha.max(f64::MIN_POSITIVE) + eb / hb);
    if rho < 1.0 - tol.max(error) {
        return Err(HarmlatError::Numerical(format!("removal price {rho} below 1")));
    }
    Ok(Price { rho, error, h_before: hb, h_after: ha })
}

/// `ρ_{A,y}(z)` with the default dense route.
pub fn removal_price(set: &SiteSet, y: &LatticePoint, z: &LatticePoint, tol: f64) -> Result<Price> {
    removal_price_with(set, y, z, Route::Dense, tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinPrice {
    pub z_star: LatticePoint,
    pub rho_min: f64,
    pub error: f64,
}

/// `min_{z ∈ A∖y} ρ_{A,y}(z)`; ties go to the lexicographically smallest `z`.
pub fn min_removal_price(set: &SiteSet, y: &LatticePoint, tol: f64) -> Result<MinPrice> {
    if set.len() < 2 {
        return invalid("need at least two points");
    }
    if !set.contains(y) {
        return Err(HarmlatError::NotInSet(*y));
    }
    let before = harmonic_measure(set, Route::Dense, tol)?;
    let prices: Vec<(LatticePoint, Price)> = set
        .points()
        .par_iter()
        .filter(|z| *z != y)
        .map(|z| removal_price_given(set, &before, y, z, Route::Dense, tol).map(|p| (*z, p)))
        .collect::<Result<_>>()?;
    let (z, p) = prices
        .into_iter()
        .min_by(|a, b| a.1.rho.total_cmp(&b.1.rho).then(a.0.cmp(&b.0)))
        .expect("at least one candidate");
    Ok(MinPrice { z_star: z, rho_min: p.rho, error: p.error })
}

// ---------------------------------------------------------------------------
// tunnels

/// `γ(L, d)`: probability that the walk from one end of a straight tunnel of
/// length `L` with absorbing walls reaches the other end.
pub fn gamma_path(len: usize, d: usize) -> f64 {
    let d = d as f64;
    let s = (d * d - 1.0).sqrt();
    let k = (len + 1) as i32;
    2.0 * s / ((d + s).powi(k) - (d - s).powi(k))
}

/// Solution of `q_i = (q_{i-1} + q_{i+1}) / b` for `1 < i < n`, with
/// `q_1 = c_at_1` and `q_n = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunnelSolution {
    /// `q[0] = q_1, ..., q[n-1] = q_n`.
    pub q: Vec<f64>,
    /// `(b - √(b²-4))/2` and `(b + √(b²-4))/2`.
    pub roots: (f64, f64),
    pub residual: f64,
}

pub fn tunnel_recurrence(b: f64, n: usize, c_at_1: f64) -> Result<TunnelSolution> {
    if !(b > 2.0) {
        return invalid("need b > 2");
    }
    if n < 2 {
        return invalid("need n >= 2");
    }
    let disc = (b * b - 4.0).sqrt();
    let roots = ((b - disc) / 2.0, (b + disc) / 2.0);
    let mut q = vec![0.0; n];
    q[0] = c_at_1;
    let m = n - 2;
    if m > 0 {
        // b q_i - q_{i-1} - q_{i+1} = 0 on interior sites, Thomas algorithm
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        for i in 0..m {
            let rhs = if i == 0 { c_at_1 } else { 0.0 };
            let denom = b + if i == 0 { 0.0 } else { cp[i - 1] };
            cp[i] = -1.0 / denom;
            dp[i] = (rhs + if i == 0 { 0.0 } else { dp[i - 1] }) / denom;
        }
        q[m] = dp[m - 1];
        for i in (0..m - 1).rev() {
            q[i + 1] = dp[i] - cp[i] * q[i + 2];
        }
    }
    let residual = (1..n - 1).map(|i| (b * q[i] - q[i - 1] - q[i + 1]).abs()).fold(0.0, f64::max);
    Ok(TunnelSolution { q, roots, residual })
}

/// `γ(L, d)` through [`tunnel_recurrence`] with `b = 2d`.
pub fn gamma_path_tridiagonal(len: usize, d: usize) -> f64 {
    let sol = tunnel_recurrence((2 * d) as f64, len + 2, 1.0).expect("valid tunnel");
    sol.q[len]
}

// ---------------------------------------------------------------------------
// ratio diagnostics

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostic {
    pub ratio: f64,
    pub bound: f64,
    pub pairs: usize,
    pub holds: bool,
}

/// Compares `H_{A∖D}(0)/H_A(0)` (for `d >= 3` the escape ratio
/// `Es_{A∖D}(0)/Es_A(0)`) with `max G_{A∖D}(v1,v2)/G_A(v1,v2)` over
/// `v1 ∈ F̂1`, `v2 ∈ F̌2`.
pub fn ratio_upper_bound_diagnostic(
    set: &SiteSet,
    removed: &SiteSet,
    f1: &SiteSet,
    f2: &SiteSet,
    tol: f64,
) -> Result<RatioDiagnostic> {
    let o = LatticePoint::origin(set.d());
    if !set.contains(&o) {
        return precondition("the set must contain the origin");
    }
    if removed.contains(&o) || !removed.is_subset(set) {
        return invalid("D must be a subset of A \\ {0}");
    }
    if !f1.is_subset(f2) || f1.intersection(set) != *removed || f2.intersection(set) != *removed {
        return invalid("need F1 ⊂ F2 and F_j ∩ A = D");
    }
    let reduced = set.without(removed);
    let hat = boundary(&set.union(f1)?, BoundaryKind::InnerExt, Adjacency::Plain)?.without(&reduced);
    let check = boundary(&set.union(f2)?, BoundaryKind::InnerZero, Adjacency::Plain)?.without(&reduced);
    let ratio = if set.d() == 2 {
        dense_harmonic_measure(&reduced)?.at(&o)? / dense_harmonic_measure(set)?.at(&o)?
    } else {
        let a = escape_capacity(&reduced)?;
        let b = escape_capacity(set)?;
        a.es[reduced.index_of(&o).expect("origin kept")] / b.es[set.index_of(&o).expect("origin")]
    };
    let extra: Vec<LatticePoint> = hat.iter().chain(check.iter()).copied().collect();
    let g_red = GreenKilled::for_set(&reduced, &extra)?;
    let g_full = GreenKilled::for_set(set, &extra)?;
    let mut bound = 0.0f64;
    let mut pairs = 0;
    for v2 in check.iter() {
        for v1 in hat.iter() {
            let num = g_red.eval(v1, v2);
            let den = g_full.eval(v1, v2);
            if num <= 0.0 && den <= 0.0 {
                continue;
            }
            pairs += 1;
            bound = bound.max(if den <= 0.0 { f64::INFINITY } else { num / den });
        }
    }
    Ok(RatioDiagnostic { ratio, bound, pairs, holds: ratio <= bound + tol })
}

// ---------------------------------------------------------------------------
// escape after single removals

/// `Es_{A∖z}(y) / Es_A(y)` for one removed point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeRatio {
    pub z: LatticePoint,
    pub ratio: f64,
    /// `P_y(τ⁺_A = τ_z)`.
    pub first_hit: f64,
}

/// For every `z ∈ A∖{y}`, `d >= 3`:
/// `Es_{A∖z}(y) = Es_A(y) + P_y(τ⁺_A = τ_z) G_{A∖z}(z,z) Es_A(z)`.
///
/// `G_{A∖z}(z,z) = 1/(G_AA^{-1})_{zz}`. The first-hit law from `y` is the
/// exit law of one sparse solve on a window with `margin` layers, completed
/// on the window shell by the dense formula
/// `P_u(τ_A = τ_z) = Σ_a G(u-a) (G_AA^{-1})_{az}`.
pub fn removal_escape_ratios(set: &SiteSet, y: &LatticePoint, margin: i64) -> Result<Vec<EscapeRatio>> {
    if set.d() < 3 {
        return invalid("escape probabilities need d >= 3");
    }
    let iy = set.index_of(y).ok_or(HarmlatError::NotInSet(*y))?;
    let n = set.len();
    let pts = set.points();
    let kern = kernel_for(set, margin)?;
    let gm = Mat::from_fn(n, n, |i, j| kern.between(&pts[i], &pts[j]));
    let llt = gm
        .llt(Side::Lower)
        .map_err(|e| HarmlatError::Numerical(format!("Green matrix not positive definite: {e:?}")))?;
    let mut ginv = Mat::<f64>::identity(n, n);
    llt.solve_in_place(ginv.as_mut());

    let field = EscapeField::new(set, margin)?;
    let es_y = field.es[iy];
    if !(es_y > 0.0) {
        return precondition(format!("Es_A({y}) = 0"));
    }

    let window = field.window().clone();
    let shell = window.clone();
    let sys = LaplaceSystem::new(window, |p| !shell.on_shell(p) && !set.contains(p))?;
    let dd = (2 * set.d()) as f64;
    let mut src = vec![0.0; sys.len()];
    let mut direct = vec![0.0; n];
    let mut shell_mass: Vec<(LatticePoint, f64)> = Vec::new();
    for w in y.neighbors() {
        match sys.slot_of(&w) {
            Some(i) => src[i] += 1.0 / dd,
            None => match set.index_of(&w) {
                Some(j) => direct[j] += 1.0 / dd,
                None => shell_mass.push((w, 1.0 / dd)),
            },
        }
    }
    let x = sys.solve(src);
    for (i, p) in sys.free_points().iter().enumerate() {
        for q in p.neighbors() {
            if sys.slot_of(&q).is_some() {
                continue;
            }
            match set.index_of(&q) {
                Some(j) => direct[j] += x[i],
                None => shell_mass.push((q, x[i])),
            }
        }
    }
    // Σ_u m(u) G(u - a), then against G_AA^{-1}
    let mut t = vec![0.0; n];
    for (u, m) in &shell_mass {
        for (a, ta) in pts.iter().zip(t.iter_mut()) {
            *ta += m * kern.between(u, a);
        }
    }
    let out = (0..n)
        .filter(|&j| j != iy)
        .map(|j| {
            let back: f64 = (0..n).map(|a| t[a] * ginv[(a, j)]).sum::<f64>().max(0.0);
            let first_hit = direct[j] + back;
            let g_zz = 1.0 / ginv[(j, j)];
            let ratio = 1.0 + first_hit * g_zz * field.es[j] / es_y;
            EscapeRatio { z: pts[j], ratio, first_hit }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2(x: i64, y: i64) -> LatticePoint {
        LatticePoint::p2(x, y)
    }

    #[test]
    fn two_point_symmetry_both_routes() {
        let a = SiteSet::from_coords(&[[0, 0], [1, 0]]);
        for m in [dense_harmonic_measure(&a).unwrap(), wired_extrapolated(&a, 1e-9).unwrap()] {
            assert!((m.weights[0] - 0.5).abs() < 1e-12, "{m:?}");
        }
        let b = SiteSet::from_coords(&[[0, 0, 0], [1, 0, 0]]);
        let m = dense_harmonic_measure(&b).unwrap();
        assert!((m.weights[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cross_is_uniform() {
        let a = SiteSet::from_coords(&[[1, 0], [-1, 0], [0, 1], [0, -1]]);
        let m = dense_harmonic_measure(&a).unwrap();
        for w in &m.weights {
            assert!((w - 0.25).abs() < 1e-13);
        }
    }

    #[test]
    fn point_capacity_is_inverse_green() {
        let a = SiteSet::from_coords(&[[0, 0, 0]]);
        let ec = escape_capacity(&a).unwrap();
        let g0 = PotentialTable::shared(3, 4).unwrap().value(&LatticePoint::origin(3));
        assert!((ec.cap - 1.0 / g0).abs() < 1e-12);
        assert!((ec.cap - 0.659_462_670_5).abs() < 1e-9);
    }

    #[test]
    fn single_point_killed_green_matches_formula() {
        let a = SiteSet::from_coords(&[[0, 0]]);
        let t = PotentialTable::shared(2, 0).unwrap();
        let (x, y) = (p2(2, 1), p2(-1, 3));
        let g = green_killed(&a, &x, &y).unwrap();
        let exact = t.value(&x) + t.value(&y) - t.between(&x, &y);
        assert!((g - exact).abs() < 1e-12);
        assert!((green_killed(&a, &y, &x).unwrap() - g).abs() < 1e-12);
    }

    #[test]
    fn enclosed_site_has_exactly_zero_measure() {
        let mut pts: Vec<LatticePoint> = p2(0, 0).star_neighbors();
        pts.push(p2(0, 0));
        let a = SiteSet::new(2, pts).unwrap();
        let m = dense_harmonic_measure(&a).unwrap();
        assert_eq!(m.at(&p2(0, 0)).unwrap(), 0.0);
        assert!((m.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_small_cases() {
        assert!((gamma_path(0, 2) - 1.0).abs() < 1e-15);
        assert!((gamma_path(1, 2) - 0.25).abs() < 1e-15);
        assert!((gamma_path(2, 2) - 1.0 / 15.0).abs() < 1e-15);
        for l in 0..=64 {
            for d in [2, 3] {
                let a = gamma_path(l, d);
                let b = gamma_path_tridiagonal(l, d);
                assert!((a - b).abs() <= 1e-12 * a.max(1e-300) || (a - b).abs() < 1e-300, "{l} {d}");
            }
        }
    }

    #[test]
    fn tunnel_roots() {
        let s = tunnel_recurrence(3.0, 10, 1.0).unwrap();
        assert!((s.roots.0 - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((s.roots.1 - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        let s = tunnel_recurrence(4.0, 2, 0.7).unwrap();
        assert_eq!(s.q, vec![0.7, 0.0]);
        assert!((tunnel_recurrence(4.0, 5, 1.0).unwrap().roots.0 - (2.0 - 3f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn two_point_price_is_two() {
        let a = SiteSet::from_coords(&[[0, 0], [1, 0]]);
        let p = removal_price(&a, &p2(0, 0), &p2(1, 0), 1e-10).unwrap();
        assert!((p.rho - 2.0).abs() < 1e-12);
        let m = min_removal_price(&a, &p2(0, 0), 1e-10).unwrap();
        assert!((m.rho_min - 2.0).abs() < 1e-12);
    }

    #[test]
    fn last_exit_single_term() {
        let a1 = SiteSet::from_coords(&[[0, 0], [2, 1]]);
        let a2 = a1.with_point(p2(1, -1)).unwrap();
        let r = last_exit_check(&a1, &a2, &p2(0, 0), &p2(1, -1), 5).unwrap();
        assert!(r.diff < 1e-12, "{r:?}");
        assert!(r.lhs > 0.0);
    }

    #[test]
    fn escape_bracket_contains_dense_value() {
        let a = SiteSet::from_coords(&[[0, 0, 0], [1, 0, 0], [0, 1, 1]]);
        let ec = escape_capacity(&a).unwrap();
        let br = escape_bracket(&a, 12).unwrap();
        for (e, (lo, hi)) in ec.es.iter().zip(br) {
            assert!(lo <= *e && *e <= hi, "{lo} {e} {hi}");
        }
    }

    #[test]
    fn removal_escape_ratios_match_direct_solves() {
        // a cup around the origin, open on one side
        let mut pts = vec![LatticePoint::p3(0, 0, 0)];
        for x in -1..=1 {
            for y in -1..=1 {
                pts.push(LatticePoint::p3(x, y, -2));
                if (x, y) != (0, 0) {
                    pts.push(LatticePoint::p3(x, y, -1));
                }
            }
        }
        pts.push(LatticePoint::p3(2, 0, 0));
        let a = SiteSet::new(3, pts).unwrap();
        let o = LatticePoint::origin(3);
        let base = escape_capacity(&a).unwrap().es[a.index_of(&o).unwrap()];
        for r in removal_escape_ratios(&a, &o, REFINE_MARGIN).unwrap() {
            let b = a.without_point(&r.z);
            let direct = escape_capacity(&b).unwrap().es[b.index_of(&o).unwrap()] / base;
            assert!((r.ratio - direct).abs() < 1e-9 * direct, "{:?} {direct}", r);
            assert!(r.ratio >= 1.0);
        }
    }
}

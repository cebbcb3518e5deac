//! Example sets and graphs: the tube, the spiral arm, tetration sets, the
//! discrete Klein bottle, the hairs graph, the tree tunnel and random sets.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::AbsorbingChain;
use crate::error::{invalid, HarmlatError, Result};
use crate::lattice::{is_connected, Adjacency, ComplementDecomposition, Exposure, LatticePath, LatticePoint, SiteSet};

/// The tube with its marked interior point `y` and mouth blocker `z`.
#[derive(Clone, Debug)]
pub struct Tube {
    pub set: SiteSet,
    pub y: LatticePoint,
    pub z: LatticePoint,
}

/// Walls `{0..=m} x {0, 2}`, open on the left, closed on the right by
/// `z = (m, 1)`; `y = (m - 1, 1)` sits just inside.
pub fn tube_set(m: i64) -> Result<Tube> {
    if m < 2 {
        return invalid("tube length must be at least 2");
    }
    let y = LatticePoint::p2(m - 1, 1);
    let z = LatticePoint::p2(m, 1);
    let walls = (0..=m).flat_map(|x| [LatticePoint::p2(x, 0), LatticePoint::p2(x, 2)]);
    let set = SiteSet::new(2, walls.chain([y, z]))?;
    Ok(Tube { set, y, z })
}

/// Frozen point sequence of the square spiral arm; `D_n` is its first `n`
/// points.
pub const SPIRAL: [(i64, i64); 76] = [
    (0, 0),
    (0, 1),
    (0, -1),
    (-1, 1),
    (-2, 0),
    (1, 0),
    (-1, -2),
    (-2, -3),
    (-3, -2),
    (-4, -1),
    (-5, 0),
    (-4, 1),
    (-3, 2),
    (-2, 3),
    (-1, 4),
    (0, 4),
    (1, 3),
    (2, 2),
    (3, 1),
    (4, 0),
    (3, -1),
    (2, -2),
    (1, -3),
    (0, -4),
    (-1, -5),
    (-2, -6),
    (-3, -5),
    (-4, -4),
    (-5, -3),
    (-6, -2),
    (-7, -1),
    (-8, 0),
    (-7, 1),
    (-6, 2),
    (-5, 3),
    (-4, 4),
    (-3, 5),
    (-2, 6),
    (-1, 7),
    (0, 7),
    (1, 6),
    (2, 5),
    (3, 4),
    (4, 3),
    (5, 2),
    (6, 1),
    (7, 0),
    (6, -1),
    (5, -2),
    (4, -3),
    (3, -4),
    (2, -5),
    (1, -6),
    (0, -7),
    (-1, -8),
    (-2, -9),
    (-3, -8),
    (-4, -7),
    (-5, -6),
    (-6, -5),
    (-7, -4),
    (-8, -3),
    (-9, -2),
    (-10, -1),
    (-11, 0),
    (-10, 1),
    (-9, 2),
    (-8, 3),
    (-7, 4),
    (-6, 5),
    (-5, 6),
    (-4, 7),
    (-3, 8),
    (-2, 9),
    (-1, 10),
    (0, 10),
];

pub fn spiral_set(n: usize) -> Result<SiteSet> {
    if n < 2 || n > SPIRAL.len() {
        return invalid(format!("spiral size must lie in 2..={}", SPIRAL.len()));
    }
    SiteSet::from_unique(2, SPIRAL[..n].iter().map(|&(x, y)| LatticePoint::p2(x, y)))
}

/// `^k 2`, or `None` when it does not fit in an `i64`.
pub fn tetration(k: u32) -> Option<i64> {
    let mut v: i64 = 1;
    for _ in 0..k {
        let e = u32::try_from(v).ok()?;
        v = 2i64.checked_pow(e)?;
    }
    Some(v)
}

/// `{0} ∪ {(^k 2, 0) : 0 <= k <= n - 2}`.
pub fn tetration_set(n: usize, cap_k: usize) -> Result<SiteSet> {
    if n < 2 {
        return invalid("tetration set needs n >= 2");
    }
    if cap_k > 5 || n - 2 > cap_k {
        return invalid(format!("n - 2 = {} must not exceed cap {cap_k} (cap at most 5)", n - 2));
    }
    let mut pts = vec![LatticePoint::origin(2)];
    for k in 0..=(n - 2) as u32 {
        match tetration(k) {
            Some(x) if x <= 1 << 16 => pts.push(LatticePoint::p2(x, 0)),
            _ => return invalid(format!("^{k}2 overflows the coordinate range")),
        }
    }
    SiteSet::from_unique(2, pts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KleinBottleSpec {
    pub n: i64,
    pub d: usize,
}

/// The pieces of a discrete Klein bottle.
#[derive(Clone, Debug)]
pub struct KleinParts {
    pub shell: SiteSet,
    pub punctured: SiteSet,
    pub outer_tube: SiteSet,
    pub inner_tube: SiteSet,
    pub holes: [LatticePoint; 3],
    pub outer_path: LatticePath,
    pub inner_path: LatticePath,
    pub set: SiteSet,
}

impl KleinBottleSpec {
    pub fn new(n: i64, d: usize) -> Result<Self> {
        let s = Self { n, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return invalid("Klein bottle size must be even and positive");
        }
        if !(3..=crate::lattice::MAX_DIM).contains(&self.d) {
            return invalid("Klein bottle needs 3 <= d <= 4");
        }
        Ok(())
    }

    fn pt(&self, x: i64, y: i64) -> LatticePoint {
        let mut c = vec![0; self.d];
        c[0] = x;
        c[1] = y;
        LatticePoint::new(&c).expect("valid dimension")
    }

    pub fn holes(&self) -> [LatticePoint; 3] {
        let n = self.n;
        [self.pt(0, n), self.pt(n, 0), self.pt(n / 2, -n)]
    }

    pub fn outer_path(&self) -> Result<LatticePath> {
        let n = self.n;
        let [x1, x2, _] = self.holes();
        LatticePath::broken_line(&[x1, self.pt(0, 2 * n), self.pt(2 * n, 2 * n), self.pt(2 * n, 0), x2])
    }

    pub fn inner_path(&self) -> Result<LatticePath> {
        let [_, x2, x3] = self.holes();
        LatticePath::broken_line(&[x2, self.pt(self.n / 2, 0), x3])
    }

    pub fn parts(&self) -> Result<KleinParts> {
        self.validate()?;
        let (n, d) = (self.n, self.d);
        let inside = |p: &LatticePoint, r: i64| p.linf() <= r;

        let mut shell = Vec::new();
        let lo = LatticePoint::new(&vec![-n; d])?;
        let hi = LatticePoint::new(&vec![n; d])?;
        for p in crate::lattice::BoxWindow::new(lo, hi).points() {
            if p.coords().iter().filter(|c| c.abs() == n).count() == 1 {
                shell.push(p);
            }
        }
        let holes = self.holes();
        let mut removed: HashSet<LatticePoint> = HashSet::new();
        for h in &holes {
            removed.insert(*h);
            removed.extend(h.neighbors());
        }
        let punctured: Vec<LatticePoint> = shell.iter().copied().filter(|p| !removed.contains(p)).collect();

        let outer_path = self.outer_path()?;
        let inner_path = self.inner_path()?;
        let outer_tube: Vec<LatticePoint> = tube_walls(&outer_path).into_iter().filter(|p| !inside(p, n)).collect();
        let inner_tube: Vec<LatticePoint> = tube_walls(&inner_path).into_iter().filter(|p| inside(p, n - 1)).collect();

        let all = punctured.iter().chain(&outer_tube).chain(&inner_tube).copied().chain([LatticePoint::origin(d)]);
        Ok(KleinParts {
            shell: SiteSet::new(d, shell)?,
            punctured: SiteSet::new(d, punctured.clone())?,
            outer_tube: SiteSet::new(d, outer_tube.clone())?,
            inner_tube: SiteSet::new(d, inner_tube.clone())?,
            holes,
            outer_path,
            inner_path,
            set: SiteSet::new(d, all)?,
        })
    }
}

/// Plain outer boundary of the range of a path.
fn tube_walls(path: &LatticePath) -> Vec<LatticePoint> {
    let range: HashSet<LatticePoint> = path.vertices().iter().copied().collect();
    let mut out: Vec<LatticePoint> = range.iter().flat_map(|p| p.neighbors()).filter(|q| !range.contains(q)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn klein_bottle(spec: &KleinBottleSpec) -> Result<SiteSet> {
    Ok(spec.parts()?.set)
}

/// A non-lattice example graph as a finite absorbing chain.
#[derive(Clone, Debug)]
pub struct GalleryChain {
    pub name: String,
    pub chain: AbsorbingChain,
    pub targets: Vec<String>,
    pub root: String,
}

fn hair_label(x: i64, y: i64) -> String {
    format!("({x},{y})")
}

/// `Z` with a hair at every spine vertex, cut at graph distance `r` from
/// `(0,0)` with everything beyond collapsed into `zeta`. Targets
/// `(0,0)`, `(-1,0)`, `(k,1)` absorb.
pub fn hairs_chain(k: i64, r: i64) -> Result<GalleryChain> {
    if k < 1 {
        return invalid("hair index k must be at least 1");
    }
    if r <= k + 2 {
        return invalid(format!("truncation radius {r} must exceed k + 2 = {}", k + 2));
    }
    let mut c = AbsorbingChain::new();
    let zeta = c.add_state("zeta");
    let spine: Vec<usize> = (-r..=r).map(|x| c.add_state(hair_label(x, 0))).collect();
    let s = |x: i64| spine[(x + r) as usize];
    for x in -r..r {
        c.add_undirected(s(x), s(x + 1), 1.0);
    }
    for x in -r..=r {
        if x.abs() < r {
            let h = c.add_state(hair_label(x, 1));
            c.add_undirected(s(x), h, 1.0);
        } else {
            // the spine edge and the hair edge leaving the ball
            c.add_undirected(s(x), zeta, 2.0);
        }
    }
    let targets = [hair_label(0, 0), hair_label(-1, 0), hair_label(k, 1)];
    for t in &targets {
        let i = c.state(t).expect("target inside the ball");
        c.set_absorbing(i);
    }
    Ok(GalleryChain { name: format!("hairs(k={k},r={r})"), chain: c, targets: targets.to_vec(), root: "zeta".into() })
}

/// Tunnel of length `n` in the 3-regular tree: states `1..=n`, with `1` the
/// target, `n` a dead end and every interior state leaking to `kill`.
pub fn tree_tunnel_chain(n: usize) -> Result<GalleryChain> {
    if n < 2 {
        return invalid("tunnel length must be at least 2");
    }
    let mut c = AbsorbingChain::new();
    let st: Vec<usize> = (1..=n).map(|i| c.add_state(i.to_string())).collect();
    let kill = c.add_state("kill");
    for i in 1..n - 1 {
        c.add_edge(st[i], st[i - 1], 1.0);
        c.add_edge(st[i], st[i + 1], 1.0);
        c.add_edge(st[i], kill, 1.0);
    }
    c.set_absorbing(st[0]);
    c.set_absorbing(st[n - 1]);
    c.set_absorbing(kill);
    Ok(GalleryChain {
        name: format!("tree_tunnel(n={n})"),
        chain: c,
        targets: vec!["1".into()],
        root: (n - 1).max(1).to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Any,
    StarConnected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSetParams {
    pub size: usize,
    /// Points are drawn from `Λ(window)`.
    pub window: i64,
    pub d: usize,
    pub connectivity: Connectivity,
    pub require_origin_exposed: bool,
}

impl RandomSetParams {
    pub fn planar(size: usize, window: i64, connectivity: Connectivity) -> Self {
        Self { size, window, d: 2, connectivity, require_origin_exposed: true }
    }
}

const RANDOM_SET_TRIES: usize = 1000;

/// A random set containing the origin, deterministic in `seed`.
pub fn random_site_set(params: &RandomSetParams, seed: u64) -> Result<SiteSet> {
    let RandomSetParams { size, window, d, connectivity, require_origin_exposed } = *params;
    if size == 0 || window < 0 {
        return invalid("random set needs size >= 1 and window >= 0");
    }
    let o = LatticePoint::origin(d);
    let lo = LatticePoint::new(&vec![-window; d])?;
    let hi = LatticePoint::new(&vec![window; d])?;
    let frame = crate::lattice::BoxWindow::new(lo, hi);
    if size > frame.len() {
        return invalid("window too small for the requested size");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_SET_TRIES {
        let pts = match connectivity {
            Connectivity::Any => {
                let mut chosen: HashSet<LatticePoint> = HashSet::from([o]);
                while chosen.len() < size {
                    chosen.insert(frame.point(rng.random_range(0..frame.len())));
                }
                chosen.into_iter().collect::<Vec<_>>()
            }
            Connectivity::StarConnected => {
                let mut chosen = vec![o];
                let mut member: HashSet<LatticePoint> = HashSet::from([o]);
                while chosen.len() < size {
                    let mut frontier: Vec<LatticePoint> = chosen
                        .iter()
                        .flat_map(|p| p.star_neighbors())
                        .filter(|q| frame.contains(q) && !member.contains(q))
                        .collect();
                    frontier.sort_unstable();
                    frontier.dedup();
                    let Some(&q) = frontier.choose(&mut rng) else { break };
                    member.insert(q);
                    chosen.push(q);
                }
                chosen
            }
        };
        let set = SiteSet::new(d, pts)?;
        if set.len() != size {
            continue;
        }
        if connectivity == Connectivity::StarConnected && !is_connected(&set, Adjacency::Star) {
            continue;
        }
        if require_origin_exposed {
            let dec = ComplementDecomposition::new(&set)?;
            if dec.neighborhood(&o, Exposure::Infinite, Adjacency::Plain).is_empty() {
                continue;
            }
        }
        return Ok(set);
    }
    Err(HarmlatError::Precondition(format!("no admissible random set after {RANDOM_SET_TRIES} tries")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_hitting, hitting_before_return};
    use crate::lattice::clusters;

    #[test]
    fn tube_shape() {
        let t = tube_set(5).unwrap();
        assert_eq!(t.set.len(), 2 * 6 + 2);
        let dec = ComplementDecomposition::new(&t.set).unwrap();
        assert!(dec.neighborhood(&t.y, Exposure::Infinite, Adjacency::Plain).len() == 1);
        assert_eq!(dec.neighborhood(&t.z, Exposure::Infinite, Adjacency::Plain), vec![LatticePoint::p2(6, 1)]);
        assert!(tube_set(1).is_err());
    }

    #[test]
    fn spiral_prefixes() {
        assert_eq!(spiral_set(2).unwrap(), SiteSet::from_coords(&[[0, 0], [0, 1]]));
        let d = spiral_set(76).unwrap();
        assert_eq!(d.len(), 76);
        assert!(spiral_set(77).is_err());
    }

    #[test]
    fn tetration_values() {
        let v: Vec<i64> = (0..5).map(|k| tetration(k).unwrap()).collect();
        assert_eq!(v, vec![1, 2, 4, 16, 65536]);
        assert_eq!(tetration(5), None);
        assert_eq!(tetration_set(3, 3).unwrap(), SiteSet::from_coords(&[[0, 0], [1, 0], [2, 0]]));
        assert_eq!(tetration_set(6, 4).unwrap().bbox().unwrap().1.get(0), 65536);
        assert!(tetration_set(7, 5).is_err());
        assert!(tetration_set(6, 3).is_err());
    }

    #[test]
    fn klein_bottle_basics() {
        let spec = KleinBottleSpec::new(6, 3).unwrap();
        let k = klein_bottle(&spec).unwrap();
        assert!(k.contains(&LatticePoint::origin(3)));
        assert!(!k.contains(&LatticePoint::p3(0, 6, 0)));
        let dec = ComplementDecomposition::new(&k).unwrap();
        assert!(dec.zero_reaches_infinity());
        assert!(KleinBottleSpec::new(5, 3).is_err());
        assert!(KleinBottleSpec::new(6, 2).is_err());
    }

    #[test]
    fn klein_bottle_matches_set_comprehension() {
        // membership predicate written out coordinate by coordinate
        let n = 6i64;
        let member = |x: i64, y: i64, z: i64| -> bool {
            if (x, y, z) == (0, 0, 0) {
                return true;
            }
            let m = x.abs().max(y.abs()).max(z.abs());
            let faces = [x, y, z].iter().filter(|c| c.abs() == n).count();
            let near = |a: i64, b: i64, c: i64| (x - a).abs() + (y - b).abs() + (z - c).abs() <= 1;
            let shell = faces == 1 && m == n && !near(0, n, 0) && !near(n, 0, 0) && !near(n / 2, -n, 0);
            let dist_seg = |p: (i64, i64), q: (i64, i64)| -> i64 {
                let (x0, x1) = (p.0.min(q.0), p.0.max(q.0));
                let (y0, y1) = (p.1.min(q.1), p.1.max(q.1));
                let dx = if x < x0 {
                    x0 - x
                } else if x > x1 {
                    x - x1
                } else {
                    0
                };
                let dy = if y < y0 {
                    y0 - y
                } else if y > y1 {
                    y - y1
                } else {
                    0
                };
                dx + dy + z.abs()
            };
            let outer = [(0, n), (0, 2 * n), (2 * n, 2 * n), (2 * n, 0), (n, 0)];
            let inner = [(n, 0), (n / 2, 0), (n / 2, -n)];
            let d_out = outer.windows(2).map(|w| dist_seg(w[0], w[1])).min().unwrap();
            let d_in = inner.windows(2).map(|w| dist_seg(w[0], w[1])).min().unwrap();
            shell || (d_out == 1 && m > n) || (d_in == 1 && m < n)
        };
        let mut expect = Vec::new();
        for x in -n - 2..=3 * n {
            for y in -n - 2..=3 * n {
                for z in -2..=2 {
                    if member(x, y, z) {
                        expect.push(LatticePoint::p3(x, y, z));
                    }
                }
            }
        }
        let k = klein_bottle(&KleinBottleSpec::new(n, 3).unwrap()).unwrap();
        let z_extent = k.iter().map(|p| p.get(2).abs()).max().unwrap();
        assert!(z_extent <= n);
        let filtered: Vec<LatticePoint> = k.iter().copied().filter(|p| p.get(2).abs() <= 2).collect();
        assert_eq!(filtered, SiteSet::new(3, expect).unwrap().points().to_vec());
    }

    #[test]
    fn hairs_graph() {
        let g = hairs_chain(1, 10).unwrap();
        for x in -9..=9 {
            let s = g.chain.state(&hair_label(x, 0)).unwrap();
            if !g.chain.is_absorbing(s) {
                assert_eq!(g.chain.out_degree_weight(s), 3.0);
            }
        }
        let root = g.chain.state("zeta").unwrap();
        let h = hitting_before_return(&g.chain, root).unwrap();
        assert!(h.at_label("(0,0)").unwrap() < 0.5);
        assert!((h.total() - 1.0).abs() < 1e-12);
        assert!(hairs_chain(3, 5).is_err());
    }

    #[test]
    fn tree_tunnel_two_states() {
        let g = tree_tunnel_chain(2).unwrap();
        let m = chain_hitting(&g.chain, g.chain.state("1").unwrap()).unwrap();
        assert_eq!(m.at_label("1"), Some(1.0));
        let g = tree_tunnel_chain(3).unwrap();
        let m = chain_hitting(&g.chain, g.chain.state("2").unwrap()).unwrap();
        assert!((m.at_label("1").unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_sets() {
        let p = RandomSetParams::planar(1, 3, Connectivity::Any);
        assert_eq!(random_site_set(&p, 1).unwrap(), SiteSet::from_coords(&[[0, 0]]));
        let p = RandomSetParams::planar(10, 4, Connectivity::StarConnected);
        let a = random_site_set(&p, 7).unwrap();
        assert_eq!(clusters(&a, Adjacency::Star).len(), 1);
        assert_eq!(a, random_site_set(&p, 7).unwrap());
        let p = RandomSetParams::planar(12, 4, Connectivity::Any);
        let b = random_site_set(&p, 9).unwrap();
        assert_eq!(b.len(), 12);
        assert!(b.contains_origin());
    }
}

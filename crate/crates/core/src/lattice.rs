//! Points, finite site sets, adjacency, clusters, complement components,
//! boundaries and neighborhoods on `Z^d`.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, HarmlatError, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// A vertex of `Z^d`, `1 <= d <= 4`. Unused trailing slots are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    d: u8,
    c: [i64; MAX_DIM],
}

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return invalid(format!("dimension {} outside 1..={MAX_DIM}", coords.len()));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self { d: coords.len() as u8, c })
    }

    /// Shorthand for planar points.
    pub fn p2(x: i64, y: i64) -> Self {
        Self { d: 2, c: [x, y, 0, 0] }
    }

    pub fn p3(x: i64, y: i64, z: i64) -> Self {
        Self { d: 3, c: [x, y, z, 0] }
    }

    pub fn origin(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d), "dimension out of range");
        Self { d: d as u8, c: [0; MAX_DIM] }
    }

    /// Unit vector `e_axis`.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut p = Self::origin(d);
        p.c[axis] = 1;
        p
    }

    /// Parses `"x,y"` or `"x,y,z"`.
    pub fn parse(s: &str) -> Result<Self> {
        let coords: std::result::Result<Vec<i64>, _> = s.split(',').map(|t| t.trim().parse::<i64>()).collect();
        match coords {
            Ok(v) => Self::new(&v),
            Err(e) => invalid(format!("bad point {s:?}: {e}")),
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.c[..self.d as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i64 {
        self.c[axis]
    }

    #[inline]
    pub fn is_origin(&self) -> bool {
        self.c == [0; MAX_DIM]
    }

    /// The point moved by `delta` along `axis`.
    #[inline]
    pub fn shifted(&self, axis: usize, delta: i64) -> Self {
        let mut p = *self;
        p.c[axis] += delta;
        p
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.d, o.d);
        let mut p = *self;
        for i in 0..MAX_DIM {
            p.c[i] += o.c[i];
        }
        p
    }

    pub fn sub(&self, o: &Self) -> Self {
        debug_assert_eq!(self.d, o.d);
        let mut p = *self;
        for i in 0..MAX_DIM {
            p.c[i] -= o.c[i];
        }
        p
    }

    pub fn l1(&self) -> i64 {
        self.c.iter().map(|v| v.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.c.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn l2(&self) -> f64 {
        self.c.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// The `2d` plain neighbors: `+e_0, -e_0, +e_1, -e_1, ...`.
    pub fn neighbors(&self) -> Vec<LatticePoint> {
        let mut out = Vec::with_capacity(2 * self.d());
        for axis in 0..self.d() {
            out.push(self.shifted(axis, 1));
            out.push(self.shifted(axis, -1));
        }
        out
    }

    /// The `3^d - 1` star neighbors in lexicographic order of the offset.
    pub fn star_neighbors(&self) -> Vec<LatticePoint> {
        let d = self.d();
        let total = 3usize.pow(d as u32);
        let mut out = Vec::with_capacity(total - 1);
        for code in 0..total {
            let mut rem = code;
            let mut off = [0i64; MAX_DIM];
            for axis in (0..d).rev() {
                off[axis] = (rem % 3) as i64 - 1;
                rem /= 3;
            }
            if off == [0; MAX_DIM] {
                continue;
            }
            let mut p = *self;
            for axis in 0..d {
                p.c[axis] += off[axis];
            }
            out.push(p);
        }
        out
    }

    pub fn adjacent(&self, o: &Self, adj: Adjacency) -> bool {
        let diff = self.sub(o);
        match adj {
            Adjacency::Plain => diff.l1() == 1,
            Adjacency::Star => diff.linf() == 1,
        }
    }

    pub fn neighbors_of(&self, adj: Adjacency) -> Vec<LatticePoint> {
        match adj {
            Adjacency::Plain => self.neighbors(),
            Adjacency::Star => self.star_neighbors(),
        }
    }
}

/// Offsets of the eight star neighbors of a planar point in clockwise order
/// (with `+y` up), starting from `(0,1)`.
pub const CLOCKWISE: [(i64, i64); 8] = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)];

/// The star neighbors of a planar point in the fixed clockwise order.
pub fn clockwise_ring(p: &LatticePoint) -> Result<[LatticePoint; 8]> {
    if p.d() != 2 {
        return invalid("clockwise order is defined only for d = 2");
    }
    Ok(CLOCKWISE.map(|(dx, dy)| LatticePoint::p2(p.get(0) + dx, p.get(1) + dy)))
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(de)?;
        LatticePoint::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Plain (`|x-y|_1 = 1`) or star (`|x-y|_inf = 1`) adjacency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adjacency {
    Plain,
    Star,
}

/// A finite set of lattice points with a lexicographic ordering and an index.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "SiteSetJson", into = "SiteSetJson")]
pub struct SiteSet {
    d: usize,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
    bbox: Option<(LatticePoint, LatticePoint)>,
}

#[derive(Serialize, Deserialize)]
struct SiteSetJson {
    d: usize,
    points: Vec<Vec<i64>>,
}

impl TryFrom<SiteSetJson> for SiteSet {
    type Error = HarmlatError;
    fn try_from(j: SiteSetJson) -> Result<Self> {
        let pts = j
            .points
            .iter()
            .map(|c| {
                if c.len() != j.d {
                    invalid(format!("point {c:?} has wrong dimension for d = {}", j.d))
                } else {
                    LatticePoint::new(c)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        SiteSet::from_unique(j.d, pts)
    }
}

impl From<SiteSet> for SiteSetJson {
    fn from(s: SiteSet) -> Self {
        SiteSetJson { d: s.d, points: s.points.iter().map(|p| p.coords().to_vec()).collect() }
    }
}

impl PartialEq for SiteSet {
    fn eq(&self, o: &Self) -> bool {
        self.d == o.d && self.points == o.points
    }
}
impl Eq for SiteSet {}

impl fmt::Debug for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SiteSet(d={}, {:?})", self.d, self.points)
    }
}

impl SiteSet {
    /// Builds a set, silently merging duplicates.
    pub fn new(d: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        let mut pts: Vec<LatticePoint> = points.into_iter().collect();
        pts.sort_unstable();
        pts.dedup();
        Self::from_sorted(d, pts)
    }

    /// Builds a set and rejects duplicate points.
    pub fn from_unique(d: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        let mut pts: Vec<LatticePoint> = points.into_iter().collect();
        pts.sort_unstable();
        if let Some(w) = pts.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate point {}", w[0]));
        }
        Self::from_sorted(d, pts)
    }

    /// Convenience constructor from coordinate arrays; panics on bad input.
    pub fn from_coords<const D: usize>(coords: &[[i64; D]]) -> Self {
        Self::new(D, coords.iter().map(|c| LatticePoint::new(c).expect("valid dimension"))).expect("valid site set")
    }

    pub fn empty(d: usize) -> Self {
        Self { d, points: Vec::new(), index: HashMap::new(), bbox: None }
    }

    fn from_sorted(d: usize, pts: Vec<LatticePoint>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return invalid(format!("dimension {d} outside 1..={MAX_DIM}"));
        }
        if let Some(p) = pts.iter().find(|p| p.d() != d) {
            return invalid(format!("point {p} does not have dimension {d}"));
        }
        let index = pts.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let bbox = if pts.is_empty() {
            None
        } else {
            let mut lo = pts[0];
            let mut hi = pts[0];
            for p in &pts {
                for a in 0..d {
                    lo.c[a] = lo.c[a].min(p.c[a]);
                    hi.c[a] = hi.c[a].max(p.c[a]);
                }
            }
            Some((lo, hi))
        };
        Ok(Self { d, points: pts, index, bbox })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticePoint> {
        self.points.iter()
    }

    #[inline]
    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.index.contains_key(p)
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Per-axis tight bounds `(min, max)`.
    pub fn bbox(&self) -> Option<(LatticePoint, LatticePoint)> {
        self.bbox
    }

    /// `max |x|_inf` over the set (0 for the empty set).
    pub fn radius_inf(&self) -> i64 {
        self.points.iter().map(|p| p.linf()).max().unwrap_or(0)
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&LatticePoint::origin(self.d))
    }

    pub fn with_point(&self, p: LatticePoint) -> Result<Self> {
        Self::new(self.d, self.points.iter().copied().chain(std::iter::once(p)))
    }

    pub fn without_point(&self, p: &LatticePoint) -> Self {
        let pts = self.points.iter().copied().filter(|q| q != p).collect();
        Self::from_sorted(self.d, pts).expect("subset of a valid set")
    }

    pub fn without(&self, other: &SiteSet) -> Self {
        let pts = self.points.iter().copied().filter(|q| !other.contains(q)).collect();
        Self::from_sorted(self.d, pts).expect("subset of a valid set")
    }

    pub fn union(&self, other: &SiteSet) -> Result<Self> {
        Self::new(self.d, self.points.iter().chain(other.points.iter()).copied())
    }

    pub fn intersection(&self, other: &SiteSet) -> Self {
        let pts = self.points.iter().copied().filter(|q| other.contains(q)).collect();
        Self::from_sorted(self.d, pts).expect("subset of a valid set")
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn translated(&self, by: &LatticePoint) -> Self {
        Self::new(self.d, self.points.iter().map(|p| p.add(by))).expect("translation is valid")
    }

    /// Canonical JSON: `{"d": 2, "points": [[x,y], ...]}`, points sorted.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("site sets serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// An axis-aligned box `lo..=hi` with row-major linear indexing.
#[derive(Clone, Debug)]
pub struct BoxWindow {
    d: usize,
    lo: [i64; MAX_DIM],
    hi: [i64; MAX_DIM],
    strides: [usize; MAX_DIM],
    len: usize,
}

impl BoxWindow {
    pub fn new(lo: LatticePoint, hi: LatticePoint) -> Self {
        let d = lo.d();
        assert_eq!(d, hi.d());
        let mut strides = [0usize; MAX_DIM];
        let mut len = 1usize;
        for a in (0..d).rev() {
            assert!(hi.c[a] >= lo.c[a], "empty window");
            strides[a] = len;
            len *= (hi.c[a] - lo.c[a] + 1) as usize;
        }
        Self { d, lo: lo.c, hi: hi.c, strides, len }
    }

    /// Bounding box of `set` expanded by `margin` on every side.
    pub fn around(set: &SiteSet, margin: i64) -> Self {
        let (mut lo, mut hi) = set.bbox().expect("non-empty set");
        for a in 0..set.d() {
            lo.c[a] -= margin;
            hi.c[a] += margin;
        }
        Self::new(lo, hi)
    }

    /// `Lambda_center(radius)`.
    pub fn cube(center: &LatticePoint, radius: i64) -> Self {
        let mut lo = *center;
        let mut hi = *center;
        for a in 0..center.d() {
            lo.c[a] -= radius;
            hi.c[a] += radius;
        }
        Self::new(lo, hi)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lo(&self) -> LatticePoint {
        LatticePoint { d: self.d as u8, c: self.lo }
    }

    pub fn hi(&self) -> LatticePoint {
        LatticePoint { d: self.d as u8, c: self.hi }
    }

    #[inline]
    pub fn contains(&self, p: &LatticePoint) -> bool {
        (0..self.d).all(|a| p.c[a] >= self.lo[a] && p.c[a] <= self.hi[a])
    }

    #[inline]
    pub fn index(&self, p: &LatticePoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        Some((0..self.d).map(|a| (p.c[a] - self.lo[a]) as usize * self.strides[a]).sum())
    }

    #[inline]
    pub fn point(&self, mut i: usize) -> LatticePoint {
        let mut c = [0i64; MAX_DIM];
        for a in 0..self.d {
            c[a] = self.lo[a] + (i / self.strides[a]) as i64;
            i %= self.strides[a];
        }
        LatticePoint { d: self.d as u8, c }
    }

    /// True when `p` lies on a face of the box.
    pub fn on_shell(&self, p: &LatticePoint) -> bool {
        self.contains(p) && (0..self.d).any(|a| p.c[a] == self.lo[a] || p.c[a] == self.hi[a])
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }
}

/// Splits `set` into clusters, ordered by their smallest member.
pub fn clusters(set: &SiteSet, adj: Adjacency) -> Vec<SiteSet> {
    let n = set.len();
    let mut label = vec![usize::MAX; n];
    let mut parts: Vec<Vec<LatticePoint>> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = parts.len();
        label[start] = id;
        let mut members = vec![set.points[start]];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for q in set.points[i].neighbors_of(adj) {
                if let Some(j) = set.index_of(&q) {
                    if label[j] == usize::MAX {
                        label[j] = id;
                        members.push(q);
                        queue.push_back(j);
                    }
                }
            }
        }
        parts.push(members);
    }
    // points are scanned in sorted order, so parts already follow their minima
    parts.into_iter().map(|m| SiteSet::new(set.d(), m).expect("subset")).collect()
}

/// Connectivity under `adj`; the empty set counts as connected.
pub fn is_connected(set: &SiteSet, adj: Adjacency) -> bool {
    set.len() <= 1 || clusters(set, adj).len() == 1
}

/// Which complement cluster a neighborhood or boundary is filtered by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exposure {
    All,
    Infinite,
    Zero,
}

/// The infinite complement cluster and the cluster of `A^c ∪ {0}` containing
/// the origin, restricted to a window around `A`. Outside the window every
/// point belongs to the infinite cluster.
#[derive(Clone, Debug)]
pub struct ComplementDecomposition {
    window: BoxWindow,
    in_set: Vec<bool>,
    infinite: Vec<bool>,
    zero: Vec<bool>,
    zero_reaches_infinity: bool,
}

impl ComplementDecomposition {
    pub fn new(set: &SiteSet) -> Result<Self> {
        Self::with_margin(set, 2)
    }

    /// Margins below 2 are raised to 2.
    pub fn with_margin(set: &SiteSet, margin: i64) -> Result<Self> {
        if set.is_empty() {
            return invalid("complement decomposition of an empty set");
        }
        let window = BoxWindow::around(set, margin.max(2));
        let n = window.len();
        let mut in_set = vec![false; n];
        for p in set.iter() {
            in_set[window.index(p).expect("inside window")] = true;
        }
        let mut infinite = vec![false; n];
        let mut queue = VecDeque::new();
        for i in 0..n {
            let p = window.point(i);
            if window.on_shell(&p) && !in_set[i] {
                infinite[i] = true;
                queue.push_back(i);
            }
        }
        flood(&window, &in_set, &mut infinite, queue);

        let origin = LatticePoint::origin(set.d());
        let (zero, zero_reaches_infinity) = match window.index(&origin) {
            None => (infinite.clone(), true),
            Some(o) => {
                let mut zero = vec![false; n];
                zero[o] = true;
                // the origin may sit in A; the fill leaves it through A^c only
                flood(&window, &in_set, &mut zero, VecDeque::from([o]));
                let reaches = zero.iter().zip(&infinite).any(|(&z, &f)| z && f);
                (zero, reaches)
            }
        };
        Ok(Self { window, in_set, infinite, zero, zero_reaches_infinity })
    }

    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn zero_reaches_infinity(&self) -> bool {
        self.zero_reaches_infinity
    }

    #[inline]
    pub fn in_set(&self, p: &LatticePoint) -> bool {
        self.window.index(p).is_some_and(|i| self.in_set[i])
    }

    /// Membership in `A^c_inf`.
    #[inline]
    pub fn is_infinite(&self, p: &LatticePoint) -> bool {
        match self.window.index(p) {
            Some(i) => self.infinite[i],
            None => true,
        }
    }

    /// Membership in `A^c_0`.
    #[inline]
    pub fn is_zero(&self, p: &LatticePoint) -> bool {
        if p.is_origin() {
            return true;
        }
        match self.window.index(p) {
            Some(i) => self.zero[i],
            None => self.zero_reaches_infinity,
        }
    }

    #[inline]
    pub fn exposed(&self, p: &LatticePoint, e: Exposure) -> bool {
        if self.in_set(p) {
            return false;
        }
        match e {
            Exposure::All => true,
            Exposure::Infinite => self.is_infinite(p),
            Exposure::Zero => self.is_zero(p),
        }
    }

    /// `N^A(y)` filtered by exposure, using plain or star neighbors.
    pub fn neighborhood(&self, y: &LatticePoint, e: Exposure, adj: Adjacency) -> Vec<LatticePoint> {
        y.neighbors_of(adj).into_iter().filter(|q| self.exposed(q, e)).collect()
    }
}

fn flood(window: &BoxWindow, blocked: &[bool], mark: &mut [bool], mut queue: VecDeque<usize>) {
    while let Some(i) = queue.pop_front() {
        let p = window.point(i);
        for q in p.neighbors() {
            if let Some(j) = window.index(&q) {
                if !blocked[j] && !mark[j] {
                    mark[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
}

/// `N^A(y)`, `N^A_inf(y)`, `N^A_0(y)` and their star variants.
pub fn outside_neighborhood(set: &SiteSet, y: &LatticePoint, exposure: Exposure, adj: Adjacency) -> Result<SiteSet> {
    if !set.contains(y) {
        return Err(HarmlatError::NotInSet(*y));
    }
    let dec = ComplementDecomposition::new(set)?;
    SiteSet::new(set.d(), dec.neighborhood(y, exposure, adj))
}

/// Boundary operators: outer/inner, each unrestricted, exterior or
/// origin-exposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Outer,
    Inner,
    OuterExt,
    InnerExt,
    OuterZero,
    InnerZero,
}

impl BoundaryKind {
    fn parts(self) -> (bool, Exposure) {
        match self {
            BoundaryKind::Outer => (true, Exposure::All),
            BoundaryKind::Inner => (false, Exposure::All),
            BoundaryKind::OuterExt => (true, Exposure::Infinite),
            BoundaryKind::InnerExt => (false, Exposure::Infinite),
            BoundaryKind::OuterZero => (true, Exposure::Zero),
            BoundaryKind::InnerZero => (false, Exposure::Zero),
        }
    }
}

pub fn boundary(set: &SiteSet, kind: BoundaryKind, adj: Adjacency) -> Result<SiteSet> {
    let dec = ComplementDecomposition::new(set)?;
    Ok(boundary_with(&dec, set, kind, adj))
}

/// As [`boundary`] with a precomputed decomposition of `set`.
pub fn boundary_with(dec: &ComplementDecomposition, set: &SiteSet, kind: BoundaryKind, adj: Adjacency) -> SiteSet {
    let (outer, exposure) = kind.parts();
    let pts: Vec<LatticePoint> = if outer {
        set.iter().flat_map(|y| dec.neighborhood(y, exposure, adj)).collect()
    } else {
        set.iter().copied().filter(|y| !dec.neighborhood(y, exposure, adj).is_empty()).collect()
    };
    SiteSet::new(set.d(), pts).expect("same dimension")
}

/// A nearest-neighbor or star path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    vertices: Vec<LatticePoint>,
    kind: Adjacency,
}

/// Flags and range of a path.
#[derive(Clone, Debug)]
pub struct PathSummary {
    pub is_self_avoiding: bool,
    pub is_circuit: bool,
    pub length: usize,
    pub range: SiteSet,
}

impl LatticePath {
    pub fn new(vertices: Vec<LatticePoint>, kind: Adjacency) -> Result<Self> {
        if vertices.is_empty() {
            return invalid("a path has at least one vertex");
        }
        let d = vertices[0].d();
        for w in vertices.windows(2) {
            if w[1].d() != d || !w[0].adjacent(&w[1], kind) {
                return invalid(format!("malformed step {} -> {}", w[0], w[1]));
            }
        }
        Ok(Self { vertices, kind })
    }

    /// Broken line through axis-aligned waypoints.
    pub fn broken_line(waypoints: &[LatticePoint]) -> Result<Self> {
        let Some(first) = waypoints.first() else {
            return invalid("no waypoints");
        };
        let mut v = vec![*first];
        for w in waypoints.windows(2) {
            let diff = w[1].sub(&w[0]);
            let axes: Vec<usize> = (0..diff.d()).filter(|&a| diff.get(a) != 0).collect();
            if axes.len() > 1 {
                return invalid(format!("segment {} -> {} is not axis-aligned", w[0], w[1]));
            }
            if let Some(&a) = axes.first() {
                let step = diff.get(a).signum();
                let mut cur = w[0];
                while cur != w[1] {
                    cur = cur.shifted(a, step);
                    v.push(cur);
                }
            }
        }
        Self::new(v, Adjacency::Plain)
    }

    /// Straight path of length `len` along `+e_0` from the origin.
    pub fn straight(d: usize, len: usize) -> Self {
        let v = (0..=len as i64).map(|i| LatticePoint::origin(d).shifted(0, i)).collect();
        Self { vertices: v, kind: Adjacency::Plain }
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn kind(&self) -> Adjacency {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first(&self) -> LatticePoint {
        self.vertices[0]
    }

    pub fn last(&self) -> LatticePoint {
        *self.vertices.last().expect("non-empty")
    }

    pub fn range(&self) -> SiteSet {
        SiteSet::new(self.vertices[0].d(), self.vertices.iter().copied()).expect("same dimension")
    }

    /// `self ∘ other`, requiring `self(-1) = other(0)`.
    pub fn concat(&self, other: &LatticePath) -> Result<Self> {
        if self.last() != other.first() || self.kind != other.kind {
            return invalid("paths do not join");
        }
        let mut v = self.vertices.clone();
        v.extend_from_slice(&other.vertices[1..]);
        Ok(Self { vertices: v, kind: self.kind })
    }

    pub fn summary(&self) -> PathSummary {
        let l = self.len();
        let mut first_seen: HashMap<LatticePoint, usize> = HashMap::new();
        let mut self_avoiding = true;
        let mut circuit = true;
        for (j, p) in self.vertices.iter().enumerate() {
            if let Some(&i) = first_seen.get(p) {
                self_avoiding = false;
                if !(i == 0 && j == l) {
                    circuit = false;
                }
            } else {
                first_seen.insert(*p, j);
            }
        }
        if l > 0 && self.vertices[0] != self.vertices[l] {
            circuit = false;
        }
        PathSummary { is_self_avoiding: self_avoiding, is_circuit: circuit, length: l, range: self.range() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i64, y: i64) -> LatticePoint {
        LatticePoint::p2(x, y)
    }

    #[test]
    fn neighbor_orders() {
        assert_eq!(p(0, 0).neighbors(), vec![p(1, 0), p(-1, 0), p(0, 1), p(0, -1)]);
        assert_eq!(p(5, -3).neighbors(), vec![p(6, -3), p(4, -3), p(5, -2), p(5, -4)]);
        assert_eq!(LatticePoint::origin(3).neighbors().len(), 6);
        assert_eq!(p(0, 0).star_neighbors().len(), 8);
        assert_eq!(LatticePoint::origin(3).star_neighbors().len(), 26);
        let ring = clockwise_ring(&p(0, 0)).unwrap();
        assert_eq!(ring.to_vec(), vec![p(0, 1), p(1, 1), p(1, 0), p(1, -1), p(0, -1), p(-1, -1), p(-1, 0), p(-1, 1)]);
        for w in 0..8 {
            assert!(ring[w].adjacent(&ring[(w + 1) % 8], Adjacency::Plain));
        }
    }

    #[test]
    fn cluster_examples() {
        let s = SiteSet::from_coords(&[[0, 0], [1, 1]]);
        assert_eq!(clusters(&s, Adjacency::Plain).len(), 2);
        assert_eq!(clusters(&s, Adjacency::Star).len(), 1);
        let s = SiteSet::from_coords(&[[0, 0], [2, 0], [3, 0]]);
        let c = clusters(&s, Adjacency::Star);
        assert_eq!(c, vec![SiteSet::from_coords(&[[0, 0]]), SiteSet::from_coords(&[[2, 0], [3, 0]])]);
        assert!(clusters(&SiteSet::empty(2), Adjacency::Plain).is_empty());
    }

    #[test]
    fn enclosed_cell() {
        let ring = SiteSet::new(2, p(0, 0).star_neighbors()).unwrap();
        let dec = ComplementDecomposition::new(&ring).unwrap();
        assert!(!dec.is_infinite(&p(0, 0)));
        assert!(dec.is_zero(&p(0, 0)));
        assert!(!dec.zero_reaches_infinity());
        let single = SiteSet::from_coords(&[[0, 0]]);
        let dec = ComplementDecomposition::new(&single).unwrap();
        for q in dec.window().points() {
            if q != p(0, 0) {
                assert!(dec.is_infinite(&q));
            }
        }
    }

    #[test]
    fn boundary_examples() {
        let s = SiteSet::from_coords(&[[0, 0]]);
        assert_eq!(boundary(&s, BoundaryKind::Outer, Adjacency::Plain).unwrap().len(), 4);
        assert_eq!(boundary(&s, BoundaryKind::Inner, Adjacency::Plain).unwrap(), s);
        let block = SiteSet::new(2, (-1..=1).flat_map(|x| (-1..=1).map(move |y| p(x, y)))).unwrap();
        assert_eq!(boundary(&block, BoundaryKind::OuterExt, Adjacency::Plain).unwrap().len(), 12);
        let s = SiteSet::from_coords(&[[0, 0], [1, 0]]);
        let n = outside_neighborhood(&s, &p(1, 0), Exposure::Infinite, Adjacency::Plain).unwrap();
        assert_eq!(n, SiteSet::from_coords(&[[2, 0], [1, 1], [1, -1]]));
        let mut pts = p(0, 0).star_neighbors();
        pts.push(p(0, 0));
        let s = SiteSet::new(2, pts).unwrap();
        assert!(outside_neighborhood(&s, &p(0, 0), Exposure::Infinite, Adjacency::Plain).unwrap().is_empty());
        assert!(outside_neighborhood(&s, &p(5, 5), Exposure::All, Adjacency::Plain).is_err());
    }

    #[test]
    fn path_examples() {
        let single = LatticePath::new(vec![p(0, 0)], Adjacency::Plain).unwrap();
        let s = single.summary();
        assert_eq!(s.length, 0);
        assert!(s.is_self_avoiding);
        let square = LatticePath::new(vec![p(0, 0), p(1, 0), p(1, 1), p(0, 1), p(0, 0)], Adjacency::Plain).unwrap();
        assert!(square.summary().is_circuit);
        let back = LatticePath::new(vec![p(0, 0), p(1, 0), p(0, 0)], Adjacency::Plain).unwrap();
        let s = back.summary();
        assert!(!s.is_self_avoiding);
        assert!(s.is_circuit);
        assert!(LatticePath::new(vec![p(0, 0), p(1, 1)], Adjacency::Plain).is_err());
        assert!(LatticePath::new(vec![p(0, 0), p(1, 1)], Adjacency::Star).is_ok());
        let bl = LatticePath::broken_line(&[p(0, 0), p(0, 3), p(2, 3)]).unwrap();
        assert_eq!(bl.len(), 5);
    }

    #[test]
    fn json_round_trip_and_duplicates() {
        let s = SiteSet::from_coords(&[[3, 1], [0, 0], [-1, 2]]);
        let j = s.to_json();
        assert_eq!(j, r#"{"d":2,"points":[[-1,2],[0,0],[3,1]]}"#);
        assert_eq!(SiteSet::from_json(&j).unwrap(), s);
        assert!(SiteSet::from_json(r#"{"d":2,"points":[[0,0],[0,0]]}"#).is_err());
        assert!(SiteSet::from_json(r#"{"d":2,"points":[[0,0,1]]}"#).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn planar_set(r: i64, max: usize) -> impl Strategy<Value = SiteSet> {
        prop::collection::vec((-r..=r, -r..=r), 1..=max)
            .prop_map(|v| SiteSet::new(2, v.into_iter().map(|(x, y)| LatticePoint::p2(x, y))).unwrap())
    }

    proptest! {
        #[test]
        fn neighbor_counts(c in prop::collection::vec(-50i64..50, 2..=4)) {
            let p = LatticePoint::new(&c).unwrap();
            let d = c.len();
            let n = p.neighbors();
            let s = p.star_neighbors();
            prop_assert_eq!(n.len(), 2 * d);
            prop_assert_eq!(s.len(), 3usize.pow(d as u32) - 1);
            for v in [&n, &s] {
                let uniq: std::collections::HashSet<_> = v.iter().collect();
                prop_assert_eq!(uniq.len(), v.len());
                prop_assert!(!v.contains(&p));
            }
        }

        #[test]
        fn site_set_index_and_bbox(set in planar_set(6, 25)) {
            for (i, p) in set.iter().enumerate() {
                prop_assert_eq!(set.index_of(p), Some(i));
            }
            let (lo, hi) = set.bbox().unwrap();
            for a in 0..2 {
                prop_assert!(set.iter().any(|p| p.get(a) == lo.get(a)));
                prop_assert!(set.iter().any(|p| p.get(a) == hi.get(a)));
            }
            prop_assert_eq!(SiteSet::from_json(&set.to_json()).unwrap(), set);
        }

        #[test]
        fn clusters_partition(set in planar_set(4, 20), star in any::<bool>()) {
            let adj = if star { Adjacency::Star } else { Adjacency::Plain };
            let parts = clusters(&set, adj);
            prop_assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), set.len());
            for (i, a) in parts.iter().enumerate() {
                prop_assert!(is_connected(a, adj));
                for b in &parts[i + 1..] {
                    prop_assert!(a.intersection(b).is_empty());
                    prop_assert!(!a.iter().any(|p| b.iter().any(|q| p.adjacent(q, adj))));
                }
            }
        }

        #[test]
        fn decomposition_masks(set in planar_set(4, 20)) {
            let dec = ComplementDecomposition::new(&set).unwrap();
            let w = dec.window().clone();
            for p in w.points() {
                if w.on_shell(&p) && !set.contains(&p) {
                    prop_assert!(dec.is_infinite(&p));
                }
                if set.contains(&p) {
                    prop_assert!(!dec.is_infinite(&p));
                } else if dec.is_infinite(&p) {
                    for q in p.neighbors() {
                        if w.contains(&q) && !set.contains(&q) {
                            prop_assert!(dec.is_infinite(&q));
                        }
                    }
                }
            }
            prop_assert!(dec.is_zero(&LatticePoint::origin(2)));
        }

        #[test]
        fn boundary_consistency(set in planar_set(4, 20)) {
            let dec = ComplementDecomposition::new(&set).unwrap();
            let outer = boundary_with(&dec, &set, BoundaryKind::Outer, Adjacency::Plain);
            let union = SiteSet::new(2, set.iter().flat_map(|y| dec.neighborhood(y, Exposure::All, Adjacency::Plain))).unwrap();
            prop_assert_eq!(outer, union);
            let inner = boundary_with(&dec, &set, BoundaryKind::InnerExt, Adjacency::Plain);
            let exposed = SiteSet::new(2, set.iter().copied()
                .filter(|y| !dec.neighborhood(y, Exposure::Infinite, Adjacency::Plain).is_empty())).unwrap();
            prop_assert_eq!(inner, exposed);
        }
    }
}

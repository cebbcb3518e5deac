//! Marginal and star-cut vertices, and the planar vertex-removal strategy.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, HarmlatError, Result};
use crate::lattice::{
    clockwise_ring, clusters, is_connected, Adjacency, ComplementDecomposition, Exposure, LatticePoint, SiteSet,
};

/// Marginality of `z ∈ A` against a precomputed decomposition of `A`: every
/// two points of `N^A_inf(z)` are joined by a plain path inside
/// `N^A_{inf,*}(z)`.
pub fn is_marginal_with(dec: &ComplementDecomposition, z: &LatticePoint) -> bool {
    let targets = dec.neighborhood(z, Exposure::Infinite, Adjacency::Plain);
    if targets.len() <= 1 {
        return true;
    }
    let region = dec.neighborhood(z, Exposure::Infinite, Adjacency::Star);
    let mut seen = vec![false; region.len()];
    let start = region.iter().position(|p| *p == targets[0]).expect("plain neighbors are star neighbors");
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for (j, q) in region.iter().enumerate() {
            if !seen[j] && region[i].adjacent(q, Adjacency::Plain) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    targets.iter().all(|t| seen[region.iter().position(|p| p == t).expect("member")])
}

/// Def. of a marginal vertex; `A` must be star-connected.
pub fn is_marginal_vertex(set: &SiteSet, z: &LatticePoint) -> Result<bool> {
    if !set.contains(z) {
        return Err(HarmlatError::NotInSet(*z));
    }
    if !is_connected(set, Adjacency::Star) {
        return precondition("marginality is defined for star-connected sets");
    }
    Ok(is_marginal_with(&ComplementDecomposition::new(set)?, z))
}

/// True when `A ∖ {z}` is not star-connected.
pub fn is_star_cut_vertex(set: &SiteSet, z: &LatticePoint) -> Result<bool> {
    if !set.contains(z) {
        return Err(HarmlatError::NotInSet(*z));
    }
    Ok(clusters(&set.without_point(z), Adjacency::Star).len() >= 2)
}

fn star_distances(set: &SiteSet, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; set.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(i) = queue.pop_front() {
        for q in set.points()[i].star_neighbors() {
            if let Some(j) = set.index_of(&q) {
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
    }
    dist
}

/// A vertex that is not a star-cut vertex, avoiding `forbidden` when
/// possible: an endpoint of a pair realizing the star-graph diameter.
pub fn non_cut_vertex(set: &SiteSet, forbidden: Option<&LatticePoint>) -> Result<LatticePoint> {
    if set.is_empty() {
        return invalid("empty set");
    }
    if !is_connected(set, Adjacency::Star) {
        return precondition("set must be star-connected");
    }
    if set.len() == 1 {
        return Ok(set.points()[0]);
    }
    let mut best = (0usize, 0usize, 0usize);
    for i in 0..set.len() {
        let dist = star_distances(set, i);
        for (j, &dj) in dist.iter().enumerate() {
            if dj > best.0 {
                best = (dj, i, j);
            }
        }
    }
    let (u, v) = (set.points()[best.1], set.points()[best.2]);
    let mut cands = [u.min(v), u.max(v)];
    if forbidden == Some(&cands[0]) {
        cands.swap(0, 1);
    }
    for c in cands {
        if !is_star_cut_vertex(set, &c)? {
            return Ok(c);
        }
    }
    Err(HarmlatError::Numerical("diameter endpoints are cut vertices".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    #[serde(rename = "dead")]
    Dead,
    #[serde(rename = "1a")]
    OneA,
    #[serde(rename = "1b")]
    OneB,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeTag {
    Trivial,
    I,
    Ii,
    Iii,
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CaseLabel::Dead => "dead",
            CaseLabel::OneA => "1a",
            CaseLabel::OneB => "1b",
            CaseLabel::Two => "2",
            CaseLabel::Three => "3",
        })
    }
}

impl std::fmt::Display for TypeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TypeTag::Trivial => "trivial",
            TypeTag::I => "i",
            TypeTag::Ii => "ii",
            TypeTag::Iii => "iii",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovalDecision {
    pub z_dagger: LatticePoint,
    pub case_label: CaseLabel,
    pub type_tag: TypeTag,
    pub witness: Option<LatticePoint>,
    pub cluster_id: Option<usize>,
}

fn smallest_marginal(dec: &ComplementDecomposition, within: &SiteSet) -> Option<LatticePoint> {
    within.iter().copied().find(|z| is_marginal_with(dec, z))
}

/// Picks the vertex to remove from a planar `A ∋ 0` with `H_A(0) > 0`.
pub fn select_removal_vertex(set: &SiteSet) -> Result<RemovalDecision> {
    if set.d() != 2 {
        return invalid("the removal strategy is planar");
    }
    let o = LatticePoint::origin(2);
    if !set.contains(&o) {
        return precondition("the set must contain the origin");
    }
    if set.len() < 2 {
        return precondition("the set needs at least two points");
    }
    let dec = ComplementDecomposition::new(set)?;
    let exposed0 = dec.neighborhood(&o, Exposure::Infinite, Adjacency::Plain);
    if exposed0.is_empty() {
        return precondition("the origin is not exposed to infinity");
    }

    // Step 0
    if let Some(z) =
        set.iter().copied().find(|z| *z != o && dec.neighborhood(z, Exposure::Infinite, Adjacency::Plain).is_empty())
    {
        return Ok(RemovalDecision {
            z_dagger: z,
            case_label: CaseLabel::Dead,
            type_tag: TypeTag::Trivial,
            witness: None,
            cluster_id: None,
        });
    }

    let parts = clusters(set, Adjacency::Star);
    if parts.len() == 1 {
        let start_pt = *exposed0.iter().min().expect("non-empty");
        let ring = clockwise_ring(&o)?;
        let start = ring.iter().position(|p| *p == start_pt).expect("plain neighbors lie on the ring");
        let mut prev = ring[start];
        let mut diamond = None;
        for k in 1..8 {
            let p = ring[(start + k) % 8];
            if set.contains(&p) {
                diamond = Some((p, prev));
                break;
            }
            prev = p;
        }
        let (zd, zw) = diamond.expect("a star-connected set with two points meets the ring");
        if !is_star_cut_vertex(set, &zd)? {
            return Ok(RemovalDecision {
                z_dagger: zd,
                case_label: CaseLabel::OneA,
                type_tag: TypeTag::I,
                witness: Some(zw),
                cluster_id: None,
            });
        }
        let rest = clusters(&set.without_point(&zd), Adjacency::Star);
        let mut found: Option<(LatticePoint, usize)> = None;
        for (id, part) in rest.iter().enumerate() {
            if part.contains(&o) {
                continue;
            }
            if let Some(z) = smallest_marginal(&dec, part) {
                if found.is_none_or(|f| z < f.0) {
                    found = Some((z, id));
                }
            }
        }
        let (z, id) =
            found.ok_or_else(|| HarmlatError::Numerical("no marginal vertex off the origin cluster".into()))?;
        return Ok(RemovalDecision {
            z_dagger: z,
            case_label: CaseLabel::OneB,
            type_tag: TypeTag::Ii,
            witness: None,
            cluster_id: Some(id),
        });
    }

    if let Some((id, part)) = parts.iter().enumerate().find(|(_, p)| !p.contains(&o) && p.len() >= 2) {
        let pdec = ComplementDecomposition::new(part)?;
        let z = smallest_marginal(&pdec, part)
            .ok_or_else(|| HarmlatError::Numerical("star cluster without a marginal vertex".into()))?;
        return Ok(RemovalDecision {
            z_dagger: z,
            case_label: CaseLabel::Two,
            type_tag: TypeTag::Ii,
            witness: None,
            cluster_id: Some(id),
        });
    }

    let z = parts
        .iter()
        .filter(|p| !p.contains(&o))
        .flat_map(|p| p.iter().copied())
        .min()
        .expect("a second cluster exists");
    Ok(RemovalDecision {
        z_dagger: z,
        case_label: CaseLabel::Three,
        type_tag: TypeTag::Iii,
        witness: None,
        cluster_id: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i64, y: i64) -> LatticePoint {
        LatticePoint::p2(x, y)
    }

    #[test]
    fn marginal_examples() {
        let a = SiteSet::from_coords(&[[0, 0], [1, 0]]);
        assert!(is_marginal_vertex(&a, &p(1, 0)).unwrap());
        let seg = SiteSet::from_coords(&[[-1, 0], [0, 0], [1, 0]]);
        assert!(!is_marginal_vertex(&seg, &p(0, 0)).unwrap());
        assert!(is_marginal_vertex(&seg, &p(1, 0)).unwrap());
        assert!(is_marginal_vertex(&a, &p(5, 5)).is_err());
    }

    #[test]
    fn cut_vertex_examples() {
        let diag = SiteSet::from_coords(&[[0, 0], [1, 1], [2, 2]]);
        assert!(is_star_cut_vertex(&diag, &p(1, 1)).unwrap());
        let a = SiteSet::from_coords(&[[0, 0], [1, 0]]);
        assert!(!is_star_cut_vertex(&a, &p(1, 0)).unwrap());
        let block: Vec<[i64; 2]> = (-1..=1).flat_map(|x| (-1..=1).map(move |y| [x, y])).collect();
        let block = SiteSet::from_coords(&block);
        assert!(!is_star_cut_vertex(&block, &p(0, 0)).unwrap());
    }

    #[test]
    fn non_cut_examples() {
        let one = SiteSet::from_coords(&[[3, 4]]);
        assert_eq!(non_cut_vertex(&one, None).unwrap(), p(3, 4));
        let seg = SiteSet::from_coords(&[[0, 0], [1, 0], [2, 0], [3, 0], [4, 0]]);
        let z = non_cut_vertex(&seg, None).unwrap();
        assert!(z == p(0, 0) || z == p(4, 0));
        assert_eq!(non_cut_vertex(&seg, Some(&p(0, 0))).unwrap(), p(4, 0));
    }

    #[test]
    fn strategy_examples() {
        let a = SiteSet::from_coords(&[[0, 0], [1, 0]]);
        let d = select_removal_vertex(&a).unwrap();
        assert_eq!((d.z_dagger, d.case_label, d.type_tag), (p(1, 0), CaseLabel::OneA, TypeTag::I));
        // walk from (-1,0) clockwise: (-1,1), (0,1), (1,1), (1,0)
        assert_eq!(d.witness, Some(p(1, 1)));

        let b = SiteSet::from_coords(&[[0, 0], [5, 5]]);
        let d = select_removal_vertex(&b).unwrap();
        assert_eq!((d.z_dagger, d.case_label, d.type_tag), (p(5, 5), CaseLabel::Three, TypeTag::Iii));

        let c = SiteSet::from_coords(&[[0, 0], [6, 0], [7, 0]]);
        let d = select_removal_vertex(&c).unwrap();
        assert_eq!((d.case_label, d.type_tag), (CaseLabel::Two, TypeTag::Ii));
        assert!(d.z_dagger == p(6, 0) || d.z_dagger == p(7, 0));

        assert!(select_removal_vertex(&SiteSet::from_coords(&[[0, 0]])).is_err());
        assert!(select_removal_vertex(&SiteSet::from_coords(&[[1, 0], [2, 0]])).is_err());
    }

    #[test]
    fn dead_vertex_first() {
        // a ring around (3,0) with the centre included, plus the origin
        let mut pts = p(3, 0).star_neighbors();
        pts.push(p(3, 0));
        pts.push(p(0, 0));
        let a = SiteSet::new(2, pts).unwrap();
        let d = select_removal_vertex(&a).unwrap();
        assert_eq!((d.z_dagger, d.case_label), (p(3, 0), CaseLabel::Dead));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::lattice::LatticePoint;
    use proptest::prelude::*;

    fn with_origin() -> impl Strategy<Value = SiteSet> {
        prop::collection::vec((-3i64..=3, -3i64..=3), 1..=14).prop_map(|v| {
            SiteSet::new(2, v.into_iter().map(|(x, y)| LatticePoint::p2(x, y)).chain([LatticePoint::origin(2)]))
                .unwrap()
        })
    }

    /// Star-connected sets grown from the origin one star neighbor at a time.
    fn star_grown() -> impl Strategy<Value = SiteSet> {
        prop::collection::vec((any::<prop::sample::Index>(), 0usize..8), 0..=24).prop_map(|steps| {
            let mut pts = vec![LatticePoint::origin(2)];
            for (i, k) in steps {
                let q = pts[i.index(pts.len())].star_neighbors()[k];
                if !pts.contains(&q) {
                    pts.push(q);
                }
            }
            SiteSet::new(2, pts).unwrap()
        })
    }

    proptest! {
        #[test]
        fn decision_satisfies_its_type(set in with_origin()) {
            let o = LatticePoint::origin(2);
            let dec = ComplementDecomposition::new(&set).unwrap();
            prop_assume!(set.len() >= 2 && !dec.neighborhood(&o, Exposure::Infinite, Adjacency::Plain).is_empty());
            let d = select_removal_vertex(&set).unwrap();
            prop_assert_eq!(&select_removal_vertex(&set).unwrap(), &d);
            prop_assert!(set.contains(&d.z_dagger) && d.z_dagger != o);
            match d.type_tag {
                TypeTag::I => {
                    let w = d.witness.unwrap();
                    prop_assert!(dec.neighborhood(&d.z_dagger, Exposure::Infinite, Adjacency::Plain).contains(&w));
                    prop_assert!(is_marginal_with(&dec, &d.z_dagger));
                }
                TypeTag::Iii => {
                    prop_assert!(d.z_dagger.star_neighbors().iter().all(|q| !set.contains(q)));
                }
                TypeTag::Trivial => {
                    prop_assert!(dec.neighborhood(&d.z_dagger, Exposure::Infinite, Adjacency::Plain).is_empty());
                }
                TypeTag::Ii => {}
            }
        }

        #[test]
        fn non_cut_vertices_are_marginal(set in star_grown()) {
            prop_assert!(is_connected(&set, Adjacency::Star));
            let dec = ComplementDecomposition::new(&set).unwrap();
            prop_assert!(set.iter().any(|z| is_marginal_with(&dec, z)));
            for z in set.iter() {
                if !is_star_cut_vertex(&set, z).unwrap() {
                    prop_assert!(is_marginal_with(&dec, z));
                }
            }
        }
    }
}

//! Finite absorbing Markov chains and their exact absorption laws.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, HarmlatError, Result};
use crate::measure::{MeasureVector, Method, Support};

/// A chain given by weighted directed edges; each row is normalized by its
/// total weight. Absorbing states have no outgoing edges.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingChain {
    labels: Vec<String>,
    edges: Vec<Vec<(usize, f64)>>,
    absorbing: Vec<bool>,
}

/// Adjacency-list form used for JSON output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainJson {
    pub states: Vec<String>,
    pub edges: Vec<(usize, usize, f64)>,
    pub absorbing: Vec<usize>,
}

impl AbsorbingChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self, label: impl Into<String>) -> usize {
        self.labels.push(label.into());
        self.edges.push(Vec::new());
        self.absorbing.push(false);
        self.labels.len() - 1
    }

    /// Adds weight `w` to the move `u -> v`. Parallel edges accumulate.
    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) {
        if let Some(e) = self.edges[u].iter_mut().find(|e| e.0 == v) {
            e.1 += w;
        } else {
            self.edges[u].push((v, w));
        }
    }

    pub fn add_undirected(&mut self, u: usize, v: usize, w: f64) {
        self.add_edge(u, v, w);
        self.add_edge(v, u, w);
    }

    pub fn set_absorbing(&mut self, s: usize) {
        self.absorbing[s] = true;
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn state(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.absorbing[s]
    }

    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.len()).filter(|&s| self.absorbing[s]).collect()
    }

    pub fn out_degree_weight(&self, s: usize) -> f64 {
        self.edges[s].iter().map(|e| e.1).sum()
    }

    /// Transition probabilities out of `s`.
    pub fn row(&self, s: usize) -> Vec<(usize, f64)> {
        let t = self.out_degree_weight(s);
        self.edges[s].iter().map(|&(v, w)| (v, w / t)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.len() {
            if self.absorbing[s] {
                continue;
            }
            if self.edges[s].is_empty() || self.edges[s].iter().any(|e| !(e.1 > 0.0) || e.0 >= self.len()) {
                return invalid(format!("state {} has no valid outgoing transitions", self.labels[s]));
            }
        }
        Ok(())
    }

    pub fn to_json_form(&self) -> ChainJson {
        let mut edges = Vec::new();
        for (u, row) in self.edges.iter().enumerate() {
            for &(v, w) in row {
                edges.push((u, v, w));
            }
        }
        ChainJson { states: self.labels.clone(), edges, absorbing: self.absorbing_states() }
    }

    /// Absorption law for the initial distribution `init`, where the states in
    /// `extra` are treated as absorbing too. Returns the mass on every
    /// absorbing state (chain order, then `extra` order) and the residual.
    pub fn absorption_from(&self, init: &[(usize, f64)], extra: &[usize]) -> Result<(Vec<usize>, Vec<f64>, f64)> {
        self.validate()?;
        let stops = |s: usize| self.absorbing[s] || extra.contains(&s);
        let mut sinks: Vec<usize> = self.absorbing_states();
        sinks.extend(extra.iter().copied().filter(|s| !self.absorbing[*s]));
        let mut slot = vec![usize::MAX; self.len()];
        let mut transient = Vec::new();
        for s in 0..self.len() {
            if !stops(s) {
                slot[s] = transient.len();
                transient.push(s);
            }
        }
        let n = transient.len();
        let mut mass = vec![0.0; self.len()];
        let mut residual = 0.0;
        if n > 0 {
            // (I - Q)^T v = init restricted to transient states
            let mut trip = Vec::new();
            for (i, &s) in transient.iter().enumerate() {
                let mut diag = 1.0;
                for (v, p) in self.row(s) {
                    if v == s {
                        diag -= p;
                    } else if slot[v] != usize::MAX {
                        trip.push(Triplet::new(i, slot[v], -p));
                    }
                }
                trip.push(Triplet::new(i, i, diag));
            }
            let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
                .map_err(|e| HarmlatError::Numerical(format!("sparse assembly: {e:?}")))?;
            let lu = m.sp_lu().map_err(|e| HarmlatError::Numerical(format!("sparse LU: {e:?}")))?;
            let mut rhs = Mat::<f64>::zeros(n, 1);
            for &(s, w) in init {
                if slot[s] != usize::MAX {
                    rhs[(slot[s], 0)] += w;
                }
            }
            let b = rhs.clone();
            lu.solve_transpose_in_place(rhs.as_mut());
            let visits: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
            residual = transposed_residual(self, &transient, &slot, &visits, &b);
            for (i, &s) in transient.iter().enumerate() {
                for (v, p) in self.row(s) {
                    if slot[v] == usize::MAX {
                        mass[v] += visits[i] * p;
                    }
                }
            }
        }
        for &(s, w) in init {
            if stops(s) {
                mass[s] += w;
            }
        }
        let out = sinks.iter().map(|&s| mass[s]).collect();
        Ok((sinks, out, residual))
    }
}

fn transposed_residual(chain: &AbsorbingChain, transient: &[usize], slot: &[usize], v: &[f64], b: &Mat<f64>) -> f64 {
    let mut r: Vec<f64> = (0..transient.len()).map(|i| b[(i, 0)] - v[i]).collect();
    for (i, &s) in transient.iter().enumerate() {
        for (t, p) in chain.row(s) {
            if slot[t] != usize::MAX {
                r[slot[t]] += p * v[i];
            }
        }
    }
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Absorption distribution over the absorbing states started from `start`.
pub fn chain_hitting(chain: &AbsorbingChain, start: usize) -> Result<MeasureVector> {
    if start >= chain.len() {
        return invalid(format!("no state {start}"));
    }
    let (sinks, w, res) = chain.absorption_from(&[(start, 1.0)], &[])?;
    Ok(MeasureVector {
        support: Support::States(sinks.iter().map(|&s| chain.label(s).to_string()).collect()),
        weights: w,
        method: Method::Chain,
        error_estimate: res,
    })
}

/// Law of the first absorbing state hit after leaving `root`, conditioned on
/// hitting one before returning to `root`.
pub fn hitting_before_return(chain: &AbsorbingChain, root: usize) -> Result<MeasureVector> {
    if chain.is_absorbing(root) {
        return invalid("root must be transient");
    }
    let init = chain.row(root);
    let (sinks, w, res) = chain.absorption_from(&init, &[root])?;
    let keep: Vec<usize> = (0..sinks.len()).filter(|&i| sinks[i] != root).collect();
    let total: f64 = keep.iter().map(|&i| w[i]).sum();
    if !(total > 0.0) {
        return Err(HarmlatError::Numerical("targets unreachable from the root".into()));
    }
    Ok(MeasureVector {
        support: Support::States(keep.iter().map(|&i| chain.label(sinks[i]).to_string()).collect()),
        weights: keep.iter().map(|&i| w[i] / total).collect(),
        method: Method::WiredR,
        error_estimate: res / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(n: usize) -> AbsorbingChain {
        let mut c = AbsorbingChain::new();
        for i in 0..=n {
            c.add_state(i.to_string());
        }
        for i in 0..n {
            c.add_undirected(i, i + 1, 1.0);
        }
        c.set_absorbing(0);
        c.set_absorbing(n);
        c
    }

    #[test]
    fn absorbing_start_is_a_point_mass() {
        let mut c = AbsorbingChain::new();
        let a = c.add_state("a");
        let b = c.add_state("b");
        c.add_edge(a, b, 1.0);
        c.set_absorbing(b);
        let m = chain_hitting(&c, b).unwrap();
        assert_eq!(m.weights, vec![1.0]);
    }

    #[test]
    fn symmetric_gamblers_ruin() {
        let c = segment(4);
        let m = chain_hitting(&c, 2).unwrap();
        assert!((m.at_label("0").unwrap() - 0.5).abs() < 1e-15);
        assert!((m.at_label("4").unwrap() - 0.5).abs() < 1e-15);
        let m = chain_hitting(&c, 1).unwrap();
        assert!((m.at_label("4").unwrap() - 0.25).abs() < 1e-15);
        assert!(m.error_estimate < 1e-15);
    }

    #[test]
    fn rejects_dead_transient_state() {
        let mut c = AbsorbingChain::new();
        c.add_state("x");
        assert!(chain_hitting(&c, 0).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // gambler's ruin with conductances: P_s(hit n before 0) = R(0,s)/R(0,n)
        #[test]
        fn weighted_segment_matches_resistance(c in prop::collection::vec(0.1f64..10.0, 2..30), s in 1usize..29) {
            let n = c.len();
            prop_assume!(s < n);
            let mut ch = AbsorbingChain::new();
            for i in 0..=n {
                ch.add_state(i.to_string());
            }
            for (i, w) in c.iter().enumerate() {
                ch.add_undirected(i, i + 1, *w);
            }
            ch.set_absorbing(0);
            ch.set_absorbing(n);
            let m = chain_hitting(&ch, s).unwrap();
            let r: Vec<f64> = c.iter().map(|w| 1.0 / w).collect();
            let exact = r[..s].iter().sum::<f64>() / r.iter().sum::<f64>();
            prop_assert!((m.total() - 1.0).abs() <= 1e-12);
            prop_assert!((m.at_label(&n.to_string()).unwrap() - exact).abs() <= 1e-12);
        }
    }
}

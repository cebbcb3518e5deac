use serde::{Deserialize, Serialize};

use crate::error::{HarmlatError, Result};
use crate::lattice::{LatticePoint, SiteSet};

/// How a measure was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    WiredR,
    Extrapolated,
    DenseKernel,
    EsOverCap,
    MonteCarlo,
    Chain,
}

/// What the weights are indexed by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Sites(SiteSet),
    States(Vec<String>),
}

impl Support {
    pub fn len(&self) -> usize {
        match self {
            Support::Sites(s) => s.len(),
            Support::States(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nonnegative weights over a finite support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureVector {
    pub support: Support,
    pub weights: Vec<f64>,
    pub method: Method,
    pub error_estimate: f64,
}

impl MeasureVector {
    pub fn on_sites(set: &SiteSet, weights: Vec<f64>, method: Method, error_estimate: f64) -> Self {
        debug_assert_eq!(set.len(), weights.len());
        Self { support: Support::Sites(set.clone()), weights, method, error_estimate }
    }

    pub fn sites(&self) -> Option<&SiteSet> {
        match &self.support {
            Support::Sites(s) => Some(s),
            Support::States(_) => None,
        }
    }

    /// Weight of a site of the support.
    pub fn at(&self, p: &LatticePoint) -> Result<f64> {
        let set = self.sites().ok_or_else(|| HarmlatError::InvalidInput("measure is not indexed by sites".into()))?;
        let i = set.index_of(p).ok_or(HarmlatError::NotInSet(*p))?;
        Ok(self.weights[i])
    }

    /// Weight of a labelled chain state.
    pub fn at_label(&self, label: &str) -> Option<f64> {
        match &self.support {
            Support::States(v) => v.iter().position(|l| l == label).map(|i| self.weights[i]),
            Support::Sites(_) => None,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }
}

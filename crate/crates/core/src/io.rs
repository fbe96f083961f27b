//! JSON model, family and distribution files.
//!
//! Model: `{"states": [..], "rates": [[from, to, k], ..], "energies": {..}?,
//! "edge_betas": [[a, b, beta], ..]?, "beta_ref": 1.0?}`. Unlisted rates are zero.
//!
//! Family: the model fields plus `"k1": [[from, to, delta], ..]`,
//! `"f1": {state: value}`, optional `"eps_grid"` and `"eps_max"`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{ProbDist, RateMatrix, StateSpace};
use crate::perturbation::{default_eps_grid, DistFamily, PerturbationFamily};
use crate::thermo::ThermoModel;

/// Distributions read from files may miss unit mass by this much before renormalization.
pub const INPUT_MASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub rates: Vec<(String, String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_betas: Option<Vec<(String, String, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_ref: Option<f64>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn space(&self) -> Result<StateSpace> {
        StateSpace::new(self.states.iter().cloned())
    }

    pub fn rate_matrix(&self) -> Result<RateMatrix> {
        RateMatrix::from_edges(self.space()?, &self.rates)
    }

    /// Thermodynamic data, present only when energies are given.
    /// Unlisted edges are coupled to the reference reservoir.
    pub fn thermo_model(&self) -> Result<Option<ThermoModel>> {
        let Some(energy_map) = &self.energies else {
            return Ok(None);
        };
        let k = self.rate_matrix()?;
        let space = k.space().clone();
        let n = space.len();
        for label in energy_map.keys() {
            space.index_of(label)?;
        }
        let mut energies = DVector::zeros(n);
        for (i, label) in space.labels().iter().enumerate() {
            energies[i] = *energy_map.get(label).ok_or_else(|| {
                Error::InvalidParameter(format!("no energy given for state `{label}`"))
            })?;
        }
        let beta_ref = self.beta_ref.unwrap_or(1.0);
        let mut beta = DMatrix::from_element(n, n, beta_ref);
        for (a, b, v) in self.edge_betas.iter().flatten() {
            let (i, j) = (space.index_of(a)?, space.index_of(b)?);
            beta[(i, j)] = *v;
            beta[(j, i)] = *v;
        }
        ThermoModel::new(k, energies, beta, beta_ref).map(Some)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFile {
    pub states: Vec<String>,
    pub rates: Vec<(String, String, f64)>,
    pub k1: Vec<(String, String, f64)>,
    pub f1: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_grid: Option<Vec<f64>>,
    /// Defaults to the largest `|eps|` of the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
}

/// A family file resolved into validated objects.
#[derive(Clone, Debug)]
pub struct ScanSetup {
    pub family: PerturbationFamily,
    pub dist: DistFamily,
    pub eps_grid: Vec<f64>,
}

impl FamilyFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the families; `f1` is shifted to zero `rho0`-mean.
    pub fn resolve(&self) -> Result<ScanSetup> {
        let space = StateSpace::new(self.states.iter().cloned())?;
        let k0 = RateMatrix::from_edges(space.clone(), &self.rates)?;
        let n = space.len();
        let mut k1 = DMatrix::zeros(n, n);
        for (a, b, v) in &self.k1 {
            let (i, j) = (space.index_of(a)?, space.index_of(b)?);
            if k1[(i, j)] != 0.0 {
                return Err(Error::DuplicateEdge {
                    from: a.clone(),
                    to: b.clone(),
                });
            }
            k1[(i, j)] = *v;
        }
        let eps_grid = self.eps_grid.clone().unwrap_or_else(default_eps_grid);
        if eps_grid.is_empty() {
            return Err(Error::InvalidParameter("empty eps grid".into()));
        }
        let eps_max = self
            .eps_max
            .unwrap_or_else(|| eps_grid.iter().fold(0.0f64, |m, e| m.max(e.abs())));
        let family = PerturbationFamily::new(k0, k1, eps_max)?;
        let f1 = function_from_map(&space, &self.f1)?;
        let dist = DistFamily::centered(&family, f1)?;
        Ok(ScanSetup {
            family,
            dist,
            eps_grid,
        })
    }
}

/// Function on states from a label map; unlisted states get 0.
pub fn function_from_map(space: &StateSpace, map: &BTreeMap<String, f64>) -> Result<DVector<f64>> {
    let mut v = DVector::zeros(space.len());
    for (label, value) in map {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("value for `{label}` is {value}")));
        }
        v[space.index_of(label)?] = *value;
    }
    Ok(v)
}

/// Distribution from a label map; unlisted states get 0. Total mass within
/// [`INPUT_MASS_TOL`] of one is renormalized.
pub fn distribution_from_map(space: &StateSpace, map: &BTreeMap<String, f64>) -> Result<ProbDist> {
    let p = function_from_map(space, map)?;
    if p.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidDistribution("negative probability".into()));
    }
    let total = p.sum();
    if (total - 1.0).abs() > INPUT_MASS_TOL {
        return Err(Error::InvalidDistribution(format!("total mass {total}")));
    }
    ProbDist::from_weights(space.clone(), p)
}

pub fn distribution_from_json(space: &StateSpace, text: &str) -> Result<ProbDist> {
    let map: BTreeMap<String, f64> = serde_json::from_str(text)?;
    distribution_from_map(space, &map)
}

pub fn function_from_json(space: &StateSpace, text: &str) -> Result<DVector<f64>> {
    let map: BTreeMap<String, f64> = serde_json::from_str(text)?;
    function_from_map(space, &map)
}

/// Reads a file to a string, naming the path on failure.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))
}

//! Parametrized model families and the objectives evaluated on them.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{PstError, Result};
use crate::fock_basis::{Basis, BasisSpec};
use crate::lattice_model::{build_hamiltonian, inverse_distance_couplings, CouplingLayout, ModelParams};
use crate::permutation_targets::{mirror_permutation, parity_permutation, TargetTransform};
use crate::spectral_synthesis::{compare_propagator, HermitianOperator};

/// Model family with named parameters.
///
/// `centro_nn`: uniform on-site energy `eps`, uniform nearest-neighbour
/// interaction `W`, and nearest-neighbour couplings `J12, J23, ...` for the
/// first half of the chain; the mirror half is copied.
///
/// `inverse_distance`: five sites with energies `eps1, eps2, eps3` (mirrored
/// onto sites 4 and 5), nearest-neighbour interaction `W`, and couplings
/// `J / distance` set by `J, r1, r2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Structure {
    CentroNn { sites: usize },
    InverseDistance,
}

impl Structure {
    pub fn sites(&self) -> usize {
        match self {
            Structure::CentroNn { sites } => *sites,
            Structure::InverseDistance => 5,
        }
    }

    fn coupling_names(m: usize) -> Vec<String> {
        let half = m.saturating_sub(1).div_ceil(2);
        (1..=half).map(|i| format!("J{}{}", i, i + 1)).collect()
    }

    /// Every parameter name the family understands.
    pub fn parameter_names(&self) -> Vec<String> {
        match self {
            Structure::CentroNn { sites } => {
                let mut names = vec!["eps".to_string(), "W".to_string()];
                names.extend(Self::coupling_names(*sites));
                names
            }
            Structure::InverseDistance => {
                ["eps1", "eps2", "eps3", "W", "r1", "r2", "J"].iter().map(|s| s.to_string()).collect()
            }
        }
    }

    /// Names that have no default and must be free or fixed.
    fn required_names(&self) -> Vec<String> {
        match self {
            Structure::CentroNn { sites } => Self::coupling_names(*sites),
            Structure::InverseDistance => ["r1", "r2", "J"].iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Structure::CentroNn { sites } = self {
            if !(2..=9).contains(sites) {
                return Err(PstError::Spec(format!("centro_nn supports 2 to 9 sites, got {sites}")));
            }
        }
        Ok(())
    }

    /// Model for a complete name -> value assignment.
    pub fn model(&self, values: &BTreeMap<String, f64>, tau: f64) -> Result<ModelParams> {
        let get = |k: &str| values.get(k).copied().unwrap_or(0.0);
        match self {
            Structure::CentroNn { sites } => {
                let couplings = Self::coupling_names(*sites)
                    .iter()
                    .map(|n| values.get(n).copied().ok_or_else(|| PstError::Spec(format!("missing parameter {n}"))))
                    .collect::<Result<Vec<f64>>>()?;
                let mut p = ModelParams::new(*sites, tau)
                    .with_layout(CouplingLayout::NearestNeighbor { couplings })?
                    .with_nn_interaction(get("W"));
                for s in 1..=*sites {
                    p.set_site_energy(s, get("eps"));
                }
                Ok(p)
            }
            Structure::InverseDistance => {
                let layout = inverse_distance_couplings(get("J"), get("r1"), get("r2"))?;
                let mut p = ModelParams::new(5, tau).with_layout(layout)?.with_nn_interaction(get("W"));
                for (s, name) in [(1, "eps1"), (2, "eps2"), (3, "eps3"), (4, "eps2"), (5, "eps1")] {
                    p.set_site_energy(s, get(name));
                }
                Ok(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Two-excitation states with the first label left of the second.
    Less,
    /// States whose occupied sites sum to an odd number.
    Odd,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Mirror,
    Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `min_phi || U(tau) - e^{i phi} P ||_F^2` on the target support.
    PropagatorMatch,
    /// Squared distance between sorted eigenvalues and the prescribed list.
    SpectrumMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl FreeParameter {
    pub fn new(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.to_string(), lower, upper }
    }
}

/// Basis indices of the requested block, in basis order.
pub fn block_indices(basis: &Basis, kind: BlockKind) -> Result<Vec<usize>> {
    match kind {
        BlockKind::Less => {
            let labels = &basis.spec().labels;
            if labels.len() < 2 {
                return Err(PstError::Spec("the less block needs two labels".into()));
            }
            Ok(basis.partition((&labels[0], &labels[1]))?.less)
        }
        BlockKind::Odd => Ok(basis.odd_parity_indices()),
        BlockKind::Full => Ok(basis.all_indices()),
    }
}

pub(crate) fn build_target(basis: &Basis, block: &[usize], kind: TargetKind) -> Result<TargetTransform> {
    match kind {
        TargetKind::Mirror => mirror_permutation(basis, block),
        TargetKind::Parity => parity_permutation(basis, block),
    }
}

/// Everything an objective evaluation needs, built once per problem.
#[derive(Debug)]
pub(crate) struct Prepared {
    pub structure: Structure,
    pub basis: Basis,
    pub block: Vec<usize>,
    pub target: TargetTransform,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub fixed: BTreeMap<String, f64>,
    pub tau: f64,
    pub objective: ObjectiveKind,
    pub prescribed: Option<Vec<f64>>,
}

impl Prepared {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        structure: &Structure,
        basis_spec: &BasisSpec,
        block: BlockKind,
        target: TargetKind,
        objective: ObjectiveKind,
        prescribed: Option<&[f64]>,
        free: &[FreeParameter],
        fixed: &BTreeMap<String, f64>,
        tau: f64,
    ) -> Result<Self> {
        structure.validate()?;
        if basis_spec.sites != structure.sites() {
            return Err(PstError::Spec(format!(
                "basis has {} sites, structure needs {}",
                basis_spec.sites,
                structure.sites()
            )));
        }
        let known: BTreeSet<String> = structure.parameter_names().into_iter().collect();
        let mut seen = BTreeSet::new();
        for p in free {
            if !known.contains(&p.name) {
                return Err(PstError::Spec(format!("unknown parameter {:?}", p.name)));
            }
            if !seen.insert(p.name.clone()) {
                return Err(PstError::Spec(format!("parameter {:?} listed twice", p.name)));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower <= p.upper) {
                return Err(PstError::Spec(format!("invalid bounds for {:?}", p.name)));
            }
        }
        for (name, v) in fixed {
            if !known.contains(name) {
                return Err(PstError::Spec(format!("unknown parameter {name:?}")));
            }
            if seen.contains(name) {
                return Err(PstError::Spec(format!("parameter {name:?} is both free and fixed")));
            }
            if !v.is_finite() {
                return Err(PstError::Spec(format!("fixed value of {name:?} is not finite")));
            }
        }
        for name in structure.required_names() {
            if !seen.contains(&name) && !fixed.contains_key(&name) {
                return Err(PstError::Spec(format!("parameter {name:?} must be free or fixed")));
            }
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(PstError::Spec(format!("transfer time must be positive, got {tau}")));
        }

        let basis = Basis::new(basis_spec.clone())?;
        let block = block_indices(&basis, block)?;
        let target = build_target(&basis, &block, target)?;
        let prescribed = match objective {
            ObjectiveKind::SpectrumMatch => {
                let list = prescribed
                    .ok_or_else(|| PstError::Spec("spectrum_match needs a prescribed spectrum".into()))?;
                if list.len() != block.len() {
                    return Err(PstError::Spec(format!(
                        "prescribed spectrum has {} energies, block has {} states",
                        list.len(),
                        block.len()
                    )));
                }
                let mut sorted = list.to_vec();
                sorted.sort_by(f64::total_cmp);
                Some(sorted)
            }
            ObjectiveKind::PropagatorMatch => None,
        };
        Ok(Self {
            structure: structure.clone(),
            basis,
            block,
            target,
            names: free.iter().map(|p| p.name.clone()).collect(),
            lower: free.iter().map(|p| p.lower).collect(),
            upper: free.iter().map(|p| p.upper).collect(),
            fixed: fixed.clone(),
            tau,
            objective,
            prescribed,
        })
    }

    pub fn values(&self, theta: &[f64]) -> BTreeMap<String, f64> {
        let mut v = self.fixed.clone();
        for (n, &x) in self.names.iter().zip(theta) {
            v.insert(n.clone(), x);
        }
        v
    }

    pub fn model(&self, theta: &[f64]) -> Result<ModelParams> {
        self.structure.model(&self.values(theta), self.tau)
    }

    pub fn hamiltonian(&self, theta: &[f64]) -> Result<HermitianOperator> {
        build_hamiltonian(&self.model(theta)?, &self.basis, Some(&self.block))
    }

    /// Objective value; parameter sets the model rejects score `+inf`.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        self.try_objective(theta).unwrap_or(f64::INFINITY)
    }

    fn try_objective(&self, theta: &[f64]) -> Result<f64> {
        let h = self.hamiltonian(theta)?;
        match self.objective {
            ObjectiveKind::PropagatorMatch => {
                let u = h.propagator(self.tau)?;
                Ok(compare_propagator(&u, &self.target).operator_distance.powi(2))
            }
            ObjectiveKind::SpectrumMatch => {
                let e = h.eigenvalues()?;
                let p = self.prescribed.as_ref().expect("checked at preparation");
                Ok(e.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum())
            }
        }
    }
}

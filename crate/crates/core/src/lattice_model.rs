//! Number-conserving lattice Hamiltonian with on-site energies, density
//! interactions and label-blind hopping:
//!
//! ```text
//! H = sum eps_{i,s} n_{i,s}
//!   + 1/2 sum U_{ik}^{ss'} n_{i,s} (n_{k,s'} - delta_ik delta_ss')
//!   + sum_{i<k} sum_s J_{ik} (a+_{i,s} a_{k,s} + h.c.)
//! ```
//!
//! Parameters are stored as sparse entries. A label of `"*"` in an on-site
//! energy or interaction entry applies to every label without an explicit
//! entry of its own.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{PstError, Result};
use crate::fock_basis::{Basis, BasisSpec, BasisState, DoubleOccupancy, Statistics};
use crate::linalg::CMatrix;
use crate::permutation_targets::TargetTransform;
use crate::spectral_synthesis::HermitianOperator;

pub const ANY_LABEL: &str = "*";

/// Relative tolerance when reconciling mirror-image parameters.
const CENTROSYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsiteEnergy(pub usize, pub String, pub f64);

/// `[i, k, sigma, sigma2, value]`; symmetric under `(i, sigma) <-> (k, sigma2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction(pub usize, pub usize, pub String, pub String, pub f64);

/// `[i, k, value]` with `i < k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling(pub usize, pub usize, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingLayout {
    /// `J_{i,i+1}` for `i = 1..M-1`, or just the first half, in which case
    /// the mirror half is filled in.
    NearestNeighbor { couplings: Vec<f64> },
    /// Five sites on a line with spacings `r1, r2, r2, r1` and couplings
    /// inversely proportional to the separation.
    InverseDistance { j: f64, r1: f64, r2: f64 },
    /// Couplings are given directly in the `J` list.
    Explicit,
}

impl CouplingLayout {
    /// The `i < k` couplings the layout defines on an `m`-site network.
    pub fn couplings(&self, m: usize) -> Result<Vec<Coupling>> {
        match self {
            CouplingLayout::NearestNeighbor { couplings } => {
                let bonds = m.saturating_sub(1);
                let half = bonds.div_ceil(2);
                let full: Vec<f64> = if couplings.len() == bonds {
                    couplings.clone()
                } else if couplings.len() == half {
                    (0..bonds).map(|b| couplings[b.min(bonds - 1 - b)]).collect()
                } else {
                    return Err(PstError::Spec(format!(
                        "nearest-neighbour layout on {m} sites needs {bonds} or {half} couplings, got {}",
                        couplings.len()
                    )));
                };
                Ok(full.iter().enumerate().map(|(b, &v)| Coupling(b + 1, b + 2, v)).collect())
            }
            CouplingLayout::InverseDistance { j, r1, r2 } => {
                if m != 5 {
                    return Err(PstError::Spec("inverse-distance layout is defined for 5 sites".into()));
                }
                if !(*r1 > 0.0 && *r2 > 0.0) {
                    return Err(PstError::Spec("distances must be positive".into()));
                }
                let (j, r1, r2) = (*j, *r1, *r2);
                let first = [
                    (1, 2, j / r1),
                    (1, 3, j / (r1 + r2)),
                    (1, 4, j / (r1 + 2.0 * r2)),
                    (1, 5, j / (2.0 * r1 + 2.0 * r2)),
                    (2, 3, j / r2),
                    (2, 4, j / (2.0 * r2)),
                ];
                let mut map = BTreeMap::new();
                for (i, k, v) in first {
                    map.insert((i, k), v);
                    map.insert(mirror_pair(m, i, k), v);
                }
                Ok(map.into_iter().map(|((i, k), v)| Coupling(i, k, v)).collect())
            }
            CouplingLayout::Explicit => Ok(Vec::new()),
        }
    }
}

pub fn inverse_distance_couplings(j: f64, r1: f64, r2: f64) -> Result<CouplingLayout> {
    if !(r1 > 0.0 && r2 > 0.0) {
        return Err(PstError::Spec(format!("distances must be positive, got r1={r1}, r2={r2}")));
    }
    Ok(CouplingLayout::InverseDistance { j, r1, r2 })
}

fn mirror_site(m: usize, i: usize) -> usize {
    m + 1 - i
}

fn mirror_pair(m: usize, i: usize, k: usize) -> (usize, usize) {
    let (a, b) = (mirror_site(m, k), mirror_site(m, i));
    (a.min(b), a.max(b))
}

/// Physical parameters of the lattice model plus the transfer time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "M")]
    pub sites: usize,
    pub tau: f64,
    #[serde(default)]
    pub epsilon: Vec<OnsiteEnergy>,
    #[serde(default, rename = "U")]
    pub interactions: Vec<Interaction>,
    #[serde(default, rename = "J")]
    pub couplings: Vec<Coupling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<CouplingLayout>,
}

impl ModelParams {
    pub fn new(sites: usize, tau: f64) -> Self {
        Self { sites, tau, epsilon: vec![], interactions: vec![], couplings: vec![], layout: None }
    }

    pub fn set_epsilon(&mut self, site: usize, label: &str, value: f64) -> &mut Self {
        self.epsilon.retain(|e| !(e.0 == site && e.1 == label));
        self.epsilon.push(OnsiteEnergy(site, label.to_string(), value));
        self
    }

    /// Same on-site energy for every label on `site`.
    pub fn set_site_energy(&mut self, site: usize, value: f64) -> &mut Self {
        self.set_epsilon(site, ANY_LABEL, value)
    }

    pub fn set_interaction(&mut self, i: usize, k: usize, sigma: &str, sigma2: &str, value: f64) -> &mut Self {
        let key = interaction_key(i, sigma, k, sigma2);
        self.interactions.retain(|u| interaction_key(u.0, &u.2, u.1, &u.3) != key);
        self.interactions.push(Interaction(i, k, sigma.to_string(), sigma2.to_string(), value));
        self
    }

    pub fn set_coupling(&mut self, i: usize, k: usize, value: f64) -> &mut Self {
        let (a, b) = (i.min(k), i.max(k));
        self.couplings.retain(|c| !(c.0 == a && c.1 == b));
        self.couplings.push(Coupling(a, b, value));
        self
    }

    pub fn coupling(&self, i: usize, k: usize) -> f64 {
        let (a, b) = (i.min(k), i.max(k));
        self.couplings.iter().find(|c| c.0 == a && c.1 == b).map(|c| c.2).unwrap_or(0.0)
    }

    /// Replaces the coupling list with the couplings of `layout`.
    pub fn with_layout(mut self, layout: CouplingLayout) -> Result<Self> {
        if layout != CouplingLayout::Explicit {
            self.couplings = layout.couplings(self.sites)?;
        }
        self.layout = Some(layout);
        Ok(self)
    }

    /// Uniform nearest-neighbour interaction `W` for every label pair.
    pub fn with_nn_interaction(mut self, w: f64) -> Self {
        for i in 1..self.sites {
            self.set_interaction(i, i + 1, ANY_LABEL, ANY_LABEL, w);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(PstError::Spec("model needs at least one site".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(PstError::Spec(format!("transfer time must be positive, got {}", self.tau)));
        }
        let site_ok = |s: usize| (1..=self.sites).contains(&s);
        for e in &self.epsilon {
            if !site_ok(e.0) || !e.2.is_finite() {
                return Err(PstError::Spec(format!("invalid on-site entry {e:?}")));
            }
        }
        for u in &self.interactions {
            if !site_ok(u.0) || !site_ok(u.1) || !u.4.is_finite() {
                return Err(PstError::Spec(format!("invalid interaction entry {u:?}")));
            }
        }
        for c in &self.couplings {
            if !site_ok(c.0) || !site_ok(c.1) || c.0 >= c.1 || !c.2.is_finite() {
                return Err(PstError::Spec(format!("invalid coupling entry {c:?} (need i < k)")));
            }
        }
        Ok(())
    }

    /// Dense per-mode parameter tables for a basis.
    pub fn resolve(&self, spec: &BasisSpec) -> Result<ResolvedModel> {
        self.validate()?;
        if spec.sites != self.sites {
            return Err(PstError::Spec(format!("model has {} sites, basis has {}", self.sites, spec.sites)));
        }
        let known = |l: &str| l == ANY_LABEL || spec.label_index(l).is_some();
        for e in &self.epsilon {
            if !known(&e.1) {
                return Err(PstError::Spec(format!("unknown label {:?} in on-site energies", e.1)));
            }
        }
        for u in &self.interactions {
            if !known(&u.2) || !known(&u.3) {
                return Err(PstError::Spec(format!("unknown label in interaction {u:?}")));
            }
        }
        let modes = spec.mode_count();
        let mut eps = vec![0.0; modes];
        let mut specific = vec![false; modes];
        for e in &self.epsilon {
            for l in 0..spec.labels.len() {
                let m = spec.mode(e.0, l);
                if e.1 == spec.labels[l] {
                    eps[m] = e.2;
                    specific[m] = true;
                } else if e.1 == ANY_LABEL && !specific[m] {
                    eps[m] = e.2;
                }
            }
        }

        // specificity rank: number of concrete labels in the matching entry
        let mut u = vec![vec![0.0; modes]; modes];
        let mut rank = vec![vec![-1i32; modes]; modes];
        for entry in &self.interactions {
            for (i, si, k, sk) in [(entry.0, &entry.2, entry.1, &entry.3), (entry.1, &entry.3, entry.0, &entry.2)] {
                for la in 0..spec.labels.len() {
                    for lb in 0..spec.labels.len() {
                        let ma = *si == spec.labels[la];
                        let mb = *sk == spec.labels[lb];
                        if !(ma || si == ANY_LABEL) || !(mb || sk == ANY_LABEL) {
                            continue;
                        }
                        let r = ma as i32 + mb as i32;
                        let (a, b) = (spec.mode(i, la), spec.mode(k, lb));
                        if r > rank[a][b] {
                            rank[a][b] = r;
                            rank[b][a] = r;
                            u[a][b] = entry.4;
                            u[b][a] = entry.4;
                        }
                    }
                }
            }
        }

        let mut j = vec![vec![0.0; self.sites + 1]; self.sites + 1];
        for c in &self.couplings {
            j[c.0][c.1] = c.2;
            j[c.1][c.0] = c.2;
        }
        Ok(ResolvedModel { spec: spec.clone(), eps, u, j })
    }
}

fn interaction_key(i: usize, si: &str, k: usize, sk: &str) -> ((usize, String), (usize, String)) {
    let a = (i, si.to_string());
    let b = (k, sk.to_string());
    if a <= b { (a, b) } else { (b, a) }
}

/// Parameter tables indexed by mode (`eps`, `u`) and 1-based site (`j`).
#[derive(Debug, Clone)]
pub struct ResolvedModel {
    pub spec: BasisSpec,
    pub eps: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub j: Vec<Vec<f64>>,
}

impl ResolvedModel {
    /// Diagonal energy of a configuration: one-body energies plus
    /// `U_ab n_a n_b` over distinct mode pairs plus `U_aa n_a (n_a - 1) / 2`.
    pub fn diagonal(&self, state: &BasisState) -> f64 {
        let occ = state.occupations();
        let mut e = 0.0;
        for a in 0..occ.len() {
            let na = occ[a] as f64;
            if na == 0.0 {
                continue;
            }
            e += self.eps[a] * na;
            e += self.u[a][a] * na * (na - 1.0) / 2.0;
            for b in (a + 1)..occ.len() {
                e += self.u[a][b] * na * occ[b] as f64;
            }
        }
        e
    }
}

/// Matrix of the model over `restriction` (all basis states when `None`),
/// in the order given.
pub fn build_hamiltonian(
    params: &ModelParams,
    basis: &Basis,
    restriction: Option<&[usize]>,
) -> Result<HermitianOperator> {
    let model = params.resolve(basis.spec())?;
    let all;
    let indices = match restriction {
        Some(r) => r,
        None => {
            all = basis.all_indices();
            &all
        }
    };
    let mut local = vec![usize::MAX; basis.len()];
    for (l, &g) in indices.iter().enumerate() {
        if g >= basis.len() {
            return Err(PstError::Lookup(format!("restriction index {g} out of range")));
        }
        local[g] = l;
    }
    let spec = basis.spec();
    let n = indices.len();
    let mut h = CMatrix::zeros(n, n);
    for (col, &g) in indices.iter().enumerate() {
        let state = &basis.states()[g];
        h[(col, col)] = C64::new(model.diagonal(state), 0.0);
        let occ = state.occupations();
        for from in 0..occ.len() {
            if occ[from] == 0 {
                continue;
            }
            let (k, label) = spec.mode_site_label(from);
            for i in 1..=spec.sites {
                let jik = model.j[i][k];
                if i == k || jik == 0.0 {
                    continue;
                }
                let to = spec.mode(i, label);
                if spec.statistics == Statistics::Fermion && occ[to] > 0 {
                    continue;
                }
                let mut new_occ = occ.to_vec();
                new_occ[from] -= 1;
                new_occ[to] += 1;
                let target = BasisState::from_occupations(new_occ);
                let Ok(tg) = basis.index_of(&target) else { continue };
                let row = local[tg];
                if row == usize::MAX {
                    continue;
                }
                let mut amp = jik * (occ[from] as f64).sqrt() * (occ[to] as f64 + 1.0).sqrt();
                if spec.statistics == Statistics::Fermion {
                    let (lo, hi) = (from.min(to), from.max(to));
                    let between: u32 = occ[lo + 1..hi].iter().map(|&x| x as u32).sum();
                    if between % 2 == 1 {
                        amp = -amp;
                    }
                }
                h[(row, col)] += C64::new(amp, 0.0);
            }
        }
    }
    Ok(HermitianOperator::from_hermitian_part(h))
}

/// Copies parameters onto their mirror images under `j -> M + 1 - j`
/// (couplings, on-site energies and interactions), filling whichever side
/// is missing. Mirror pairs that are both set and disagree are an error.
pub fn apply_centrosymmetry(params: &ModelParams) -> Result<ModelParams> {
    params.validate()?;
    let m = params.sites;
    let close = |a: f64, b: f64| (a - b).abs() <= CENTROSYMMETRY_TOLERANCE * a.abs().max(b.abs()).max(1.0);

    let mut couplings: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for c in &params.couplings {
        couplings.insert((c.0, c.1), c.2);
    }
    for (&(i, k), &v) in couplings.clone().iter() {
        let mp = mirror_pair(m, i, k);
        match couplings.get(&mp) {
            Some(&w) if !close(v, w) => {
                return Err(PstError::Constraint(format!(
                    "J_{{{i},{k}}} = {v} conflicts with J_{{{},{}}} = {w}",
                    mp.0, mp.1
                )))
            }
            Some(_) => {}
            None => {
                couplings.insert(mp, v);
            }
        }
    }

    let mut eps: BTreeMap<(usize, String), f64> = BTreeMap::new();
    for e in &params.epsilon {
        eps.insert((e.0, e.1.clone()), e.2);
    }
    for ((s, l), v) in eps.clone() {
        let key = (mirror_site(m, s), l.clone());
        match eps.get(&key) {
            Some(&w) if !close(v, w) => {
                return Err(PstError::Constraint(format!(
                    "eps_{{{s},{l}}} = {v} conflicts with eps_{{{},{l}}} = {w}",
                    key.0
                )))
            }
            Some(_) => {}
            None => {
                eps.insert(key, v);
            }
        }
    }

    let mut inter: BTreeMap<((usize, String), (usize, String)), f64> = BTreeMap::new();
    for u in &params.interactions {
        inter.insert(interaction_key(u.0, &u.2, u.1, &u.3), u.4);
    }
    for (((i, si), (k, sk)), v) in inter.clone() {
        let key = interaction_key(mirror_site(m, i), &si, mirror_site(m, k), &sk);
        match inter.get(&key) {
            Some(&w) if !close(v, w) => {
                return Err(PstError::Constraint(format!("interaction U_{{{i},{k}}} = {v} conflicts with its mirror {w}")))
            }
            Some(_) => {}
            None => {
                inter.insert(key, v);
            }
        }
    }

    Ok(ModelParams {
        sites: m,
        tau: params.tau,
        epsilon: eps.into_iter().map(|((s, l), v)| OnsiteEnergy(s, l, v)).collect(),
        interactions: inter.into_iter().map(|(((i, si), (k, sk)), v)| Interaction(i, k, si, sk, v)).collect(),
        couplings: couplings.into_iter().map(|((i, k), v)| Coupling(i, k, v)).collect(),
        layout: params.layout.clone(),
    })
}

/// `|| [P, H] ||_F` restricted to the target's support.
pub fn commutator_residual(h: &HermitianOperator, target: &TargetTransform) -> Result<f64> {
    if h.dim() != target.dim() {
        return Err(PstError::Dimension { expected: target.dim(), found: h.dim() });
    }
    let p = target.completed_matrix(0.0);
    let proj = target.support_projector();
    let comm = p.matmul(h.matrix()).sub(&h.matrix().matmul(&p));
    Ok(proj.matmul(&comm).matmul(&proj).frobenius_norm())
}

/// Nearest-neighbour chain with `J_{i,i+1} = (pi / (2 tau)) sqrt(i (M - i))`,
/// zero on-site energies and no interactions. Its single-excitation spectrum
/// is equally spaced by `pi / tau`, so a single excitation is mirrored at `tau`.
pub fn nn_pst_chain(m: usize, tau: f64) -> Result<ModelParams> {
    if m < 2 {
        return Err(PstError::Spec("chain needs at least two sites".into()));
    }
    if !(tau > 0.0) {
        return Err(PstError::Spec("transfer time must be positive".into()));
    }
    let couplings = (1..m).map(|i| PI / (2.0 * tau) * ((i * (m - i)) as f64).sqrt()).collect();
    ModelParams::new(m, tau).with_layout(CouplingLayout::NearestNeighbor { couplings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingMargin {
    pub ratio: f64,
    pub ok: bool,
}

pub const DEFAULT_DECOUPLING_THRESHOLD: f64 = 0.1;

/// `tau * max_j J_{j-1,j}^2 / min_j |U_jj|` against a threshold (strict `<`).
///
/// The on-site interaction of a site is taken over every label pair that
/// can actually share it in this basis. A basis that forbids double
/// occupancy is decoupled by construction and reports a ratio of zero.
pub fn decoupling_margin(params: &ModelParams, basis: &Basis, threshold: f64) -> Result<DecouplingMargin> {
    let spec = basis.spec();
    if spec.double_occupancy == DoubleOccupancy::Forbidden {
        return Ok(DecouplingMargin { ratio: 0.0, ok: 0.0 < threshold });
    }
    let model = params.resolve(spec)?;
    let nl = spec.labels.len();
    let mut pairs = Vec::new();
    for a in 0..nl {
        for b in a..nl {
            if a == b && spec.statistics == Statistics::Fermion {
                continue;
            }
            if let Some(counts) = &spec.label_counts {
                if (a == b && counts[a] < 2) || counts[a] == 0 || counts[b] == 0 {
                    continue;
                }
            }
            pairs.push((a, b));
        }
    }
    let mut min_u = f64::INFINITY;
    for site in 1..=spec.sites {
        for &(a, b) in &pairs {
            min_u = min_u.min(model.u[spec.mode(site, a)][spec.mode(site, b)].abs());
        }
    }
    let max_j2 = (2..=spec.sites).map(|j| model.j[j - 1][j].powi(2)).fold(0.0, f64::max);
    let ratio = if pairs.is_empty() {
        0.0
    } else if min_u == 0.0 {
        f64::INFINITY
    } else {
        params.tau * max_j2 / min_u
    };
    Ok(DecouplingMargin { ratio, ok: ratio < threshold })
}

//! Occupation-number basis of the N-excitation sector.
//!
//! Modes are `(site, label)` pairs ordered site-major: mode index
//! `(site - 1) * labels.len() + label`. A [`BasisState`] stores one occupation
//! per mode. Sites are 1-based everywhere in the public surface.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

use crate::error::{PstError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Boson,
    Fermion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleOccupancy {
    Allowed,
    Forbidden,
}

/// Description of an N-excitation sector on an M-site network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub sites: usize,
    pub excitations: usize,
    pub labels: Vec<String>,
    pub statistics: Statistics,
    pub double_occupancy: DoubleOccupancy,
    /// Number of excitations carrying each label. `None` leaves the label
    /// content free; `Some(vec![1, 1])` is the sector of two excitations
    /// with distinct labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_counts: Option<Vec<usize>>,
}

impl BasisSpec {
    pub fn new(sites: usize, excitations: usize, labels: &[&str]) -> Self {
        Self {
            sites,
            excitations,
            labels: labels.iter().map(|s| s.to_string()).collect(),
            statistics: Statistics::Boson,
            double_occupancy: DoubleOccupancy::Allowed,
            label_counts: None,
        }
    }

    /// One excitation per label, e.g. `|i,mu;j,nu>` states for labels `[mu, nu]`.
    pub fn distinguishable(sites: usize, labels: &[&str]) -> Self {
        let mut spec = Self::new(sites, labels.len(), labels);
        spec.label_counts = Some(vec![1; labels.len()]);
        spec
    }

    pub fn with_statistics(mut self, statistics: Statistics) -> Self {
        self.statistics = statistics;
        self
    }

    pub fn with_double_occupancy(mut self, double_occupancy: DoubleOccupancy) -> Self {
        self.double_occupancy = double_occupancy;
        self
    }

    pub fn hard_core(self) -> Self {
        self.with_double_occupancy(DoubleOccupancy::Forbidden)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(PstError::Spec("site count must be at least 1".into()));
        }
        if self.excitations == 0 {
            return Err(PstError::Spec("excitation count must be at least 1".into()));
        }
        if self.labels.is_empty() {
            return Err(PstError::Spec("at least one internal label is required".into()));
        }
        for (k, l) in self.labels.iter().enumerate() {
            if l.is_empty() || l.contains([',', ';', '|', '>', ' ']) {
                return Err(PstError::Spec(format!("invalid label {l:?}")));
            }
            if self.labels[..k].contains(l) {
                return Err(PstError::Spec(format!("duplicate label {l:?}")));
            }
        }
        if let Some(counts) = &self.label_counts {
            if counts.len() != self.labels.len() {
                return Err(PstError::Spec(format!(
                    "label_counts has {} entries for {} labels",
                    counts.len(),
                    self.labels.len()
                )));
            }
            if counts.iter().sum::<usize>() != self.excitations {
                return Err(PstError::Spec("label_counts must sum to the excitation count".into()));
            }
        }
        Ok(())
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn mode_count(&self) -> usize {
        self.sites * self.labels.len()
    }

    pub fn mode(&self, site: usize, label: usize) -> usize {
        (site - 1) * self.labels.len() + label
    }

    /// `(site, label)` of a mode index; the site is 1-based.
    pub fn mode_site_label(&self, mode: usize) -> (usize, usize) {
        (mode / self.labels.len() + 1, mode % self.labels.len())
    }
}

/// Occupation configuration `n_{j,sigma}` over all modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisState {
    occupations: Vec<u8>,
}

impl BasisState {
    pub fn from_occupations(occupations: Vec<u8>) -> Self {
        Self { occupations }
    }

    pub fn occupations(&self) -> &[u8] {
        &self.occupations
    }

    pub fn occupation(&self, mode: usize) -> u8 {
        self.occupations[mode]
    }

    pub fn total(&self) -> usize {
        self.occupations.iter().map(|&n| n as usize).sum()
    }

    /// Occupied modes, repeated according to occupation, ascending.
    pub fn occupied_modes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (m, &n) in self.occupations.iter().enumerate() {
            for _ in 0..n {
                out.push(m);
            }
        }
        out
    }

    /// Builds a state from `(site, label)` excitations; sites are 1-based.
    pub fn from_excitations(spec: &BasisSpec, excitations: &[(usize, &str)]) -> Result<Self> {
        let mut occ = vec![0u8; spec.mode_count()];
        for &(site, label) in excitations {
            if site == 0 || site > spec.sites {
                return Err(PstError::Lookup(format!("site {site} outside 1..={}", spec.sites)));
            }
            let l = spec
                .label_index(label)
                .ok_or_else(|| PstError::Lookup(format!("unknown label {label:?}")))?;
            occ[spec.mode(site, l)] += 1;
        }
        Ok(Self { occupations: occ })
    }

    /// Parses the ket notation `"1,mu;2,nu"` (optionally wrapped in `|...>`).
    pub fn parse(spec: &BasisSpec, text: &str) -> Result<Self> {
        let body = text.trim().trim_start_matches('|').trim_end_matches('>').trim();
        let mut excitations = Vec::new();
        for part in body.split(';') {
            let part = part.trim();
            let (site, label) = match part.split_once(',') {
                Some((s, l)) => (s.trim(), l.trim()),
                None if spec.labels.len() == 1 => (part, spec.labels[0].as_str()),
                None => return Err(PstError::Spec(format!("cannot parse excitation {part:?}"))),
            };
            let site: usize = site
                .parse()
                .map_err(|_| PstError::Spec(format!("invalid site {site:?} in {text:?}")))?;
            excitations.push((site, label));
        }
        Self::from_excitations(spec, &excitations)
    }

    /// `(site, label)` pairs, site-ordered; sites are 1-based.
    pub fn excitations(&self, spec: &BasisSpec) -> Vec<(usize, usize)> {
        self.occupied_modes().into_iter().map(|m| spec.mode_site_label(m)).collect()
    }

    /// Total occupation of each site (index 0 is site 1).
    pub fn site_occupations(&self, spec: &BasisSpec) -> Vec<usize> {
        let l = spec.labels.len();
        self.occupations.chunks(l).map(|c| c.iter().map(|&n| n as usize).sum()).collect()
    }

    pub fn ket(&self, spec: &BasisSpec) -> String {
        let parts: Vec<String> = self
            .excitations(spec)
            .into_iter()
            .map(|(s, l)| format!("{},{}", s, spec.labels[l]))
            .collect();
        format!("|{}>", parts.join(";"))
    }

    /// Applies a site map and a label map to every excitation.
    pub fn map_modes(
        &self,
        spec: &BasisSpec,
        site_map: impl Fn(usize) -> usize,
        label_map: impl Fn(usize) -> usize,
    ) -> Self {
        let mut occ = vec![0u8; self.occupations.len()];
        for (m, &n) in self.occupations.iter().enumerate() {
            if n > 0 {
                let (s, l) = spec.mode_site_label(m);
                occ[spec.mode(site_map(s), label_map(l))] += n;
            }
        }
        Self { occupations: occ }
    }
}

/// The enumerated basis together with its index lookup.
#[derive(Debug, Clone)]
pub struct Basis {
    spec: BasisSpec,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl Basis {
    pub fn new(spec: BasisSpec) -> Result<Self> {
        let states = enumerate_basis(&spec)?;
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Self { spec, states, index })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, state: &BasisState) -> Result<usize> {
        self.index
            .get(state)
            .copied()
            .ok_or_else(|| PstError::Lookup(format!("state {} is not in the basis", state.ket(&self.spec))))
    }

    pub fn state_of(&self, index: usize) -> Result<&BasisState> {
        self.states
            .get(index)
            .ok_or_else(|| PstError::Lookup(format!("index {index} out of range 0..{}", self.states.len())))
    }

    pub fn contains(&self, state: &BasisState) -> bool {
        self.index.contains_key(state)
    }

    pub fn parse_state(&self, text: &str) -> Result<usize> {
        let s = BasisState::parse(&self.spec, text)?;
        self.index_of(&s)
    }

    pub fn ket(&self, index: usize) -> String {
        self.states[index].ket(&self.spec)
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.states.len()).collect()
    }

    pub fn partition(&self, reference: (&str, &str)) -> Result<SubspacePartition> {
        partition_two_excitation(self, reference)
    }

    /// Basis indices whose occupied site indices sum to an odd number.
    pub fn odd_parity_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let s: usize = self.states[i].excitations(&self.spec).iter().map(|e| e.0).sum();
                s % 2 == 1
            })
            .collect()
    }

    pub fn dump(&self) -> BasisDump {
        BasisDump(
            self.states
                .iter()
                .enumerate()
                .map(|(index, s)| BasisDumpEntry {
                    index,
                    ket: s.ket(&self.spec),
                    occupations: s
                        .occupations
                        .iter()
                        .enumerate()
                        .filter(|(_, &n)| n > 0)
                        .map(|(m, &n)| {
                            let (site, l) = self.spec.mode_site_label(m);
                            OccupationEntry { site, label: self.spec.labels[l].clone(), n: n as usize }
                        })
                        .collect(),
                })
                .collect(),
        )
    }
}

/// Enumerates every admissible configuration in lexicographic order of the
/// ascending occupied-mode list (site first, then label, then occupation).
pub fn enumerate_basis(spec: &BasisSpec) -> Result<Vec<BasisState>> {
    spec.validate()?;
    let modes = spec.mode_count();
    let max_per_mode = match spec.statistics {
        Statistics::Boson => spec.excitations,
        Statistics::Fermion => 1,
    };
    let mut out = Vec::new();
    let mut occ = vec![0u8; modes];
    let mut label_used = vec![0usize; spec.labels.len()];
    let mut site_used = vec![0usize; spec.sites];
    let mut ctx = Enumeration { spec, max_per_mode, out: &mut out };
    ctx.recurse(0, spec.excitations, &mut occ, &mut label_used, &mut site_used);
    Ok(out)
}

struct Enumeration<'a> {
    spec: &'a BasisSpec,
    max_per_mode: usize,
    out: &'a mut Vec<BasisState>,
}

impl Enumeration<'_> {
    // Places the next excitation on a mode >= `start`; generating modes in
    // ascending order yields the lexicographic ordering of occupied-mode lists.
    fn recurse(
        &mut self,
        start: usize,
        remaining: usize,
        occ: &mut Vec<u8>,
        label_used: &mut Vec<usize>,
        site_used: &mut Vec<usize>,
    ) {
        if remaining == 0 {
            if let Some(counts) = &self.spec.label_counts {
                if counts != label_used {
                    return;
                }
            }
            self.out.push(BasisState::from_occupations(occ.clone()));
            return;
        }
        for m in start..occ.len() {
            let (site, label) = self.spec.mode_site_label(m);
            if occ[m] as usize >= self.max_per_mode {
                continue;
            }
            if self.spec.double_occupancy == DoubleOccupancy::Forbidden && site_used[site - 1] > 0 {
                continue;
            }
            if let Some(counts) = &self.spec.label_counts {
                if label_used[label] >= counts[label] {
                    continue;
                }
            }
            occ[m] += 1;
            label_used[label] += 1;
            site_used[site - 1] += 1;
            self.recurse(m, remaining - 1, occ, label_used, site_used);
            occ[m] -= 1;
            label_used[label] -= 1;
            site_used[site - 1] -= 1;
        }
    }
}

/// The ordering subspaces of the two-excitation sector relative to a
/// reference label pair `(mu, nu)`: the mu-carrying excitation sits left of,
/// on, or right of the nu-carrying one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspacePartition {
    pub less: Vec<usize>,
    pub equal: Vec<usize>,
    pub greater: Vec<usize>,
}

pub fn partition_two_excitation(basis: &Basis, reference: (&str, &str)) -> Result<SubspacePartition> {
    let spec = basis.spec();
    if spec.excitations != 2 {
        return Err(PstError::Unsupported(format!(
            "ordering partition needs N = 2, basis has N = {}",
            spec.excitations
        )));
    }
    let mu = spec
        .label_index(reference.0)
        .ok_or_else(|| PstError::Lookup(format!("unknown label {:?}", reference.0)))?;
    let nu = spec
        .label_index(reference.1)
        .ok_or_else(|| PstError::Lookup(format!("unknown label {:?}", reference.1)))?;

    let mut part = SubspacePartition { less: vec![], equal: vec![], greater: vec![] };
    for (idx, state) in basis.states().iter().enumerate() {
        let ex = state.excitations(spec);
        let (i, j) = if mu == nu {
            // Same label on both excitations: site order is the only ordering.
            (ex[0].0, ex[1].0)
        } else {
            let find = |l: usize| ex.iter().find(|e| e.1 == l).map(|e| e.0);
            match (find(mu), find(nu)) {
                (Some(i), Some(j)) => (i, j),
                // Label content differs from the reference pair: order by site.
                _ => (ex[0].0, ex[1].0),
            }
        };
        match i.cmp(&j) {
            std::cmp::Ordering::Less => part.less.push(idx),
            std::cmp::Ordering::Equal => part.equal.push(idx),
            std::cmp::Ordering::Greater => part.greater.push(idx),
        }
    }
    Ok(part)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEntry {
    pub site: usize,
    pub label: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDumpEntry {
    pub index: usize,
    pub ket: String,
    pub occupations: Vec<OccupationEntry>,
}

/// JSON dump: array of `{index, ket, occupations: [{site, label, n}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisDump(pub Vec<BasisDumpEntry>);

impl fmt::Display for BasisDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_string_pretty(self).map_err(|_| fmt::Error)?;
        f.write_str(&s)
    }
}

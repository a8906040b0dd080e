//! Target transformations and their spectra.
//!
//! A target is either a permutation of basis indices (indices off its
//! support stay fixed) or a partial isometry given by orthonormal
//! source/target vector pairs. Every permutation splits into disjoint cycles
//! whose eigenvectors are discrete Fourier modes; those modes, grouped by
//! eigenvalue, are what the synthesis step works from.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use crate::error::{PstError, Result};
use crate::fock_basis::Basis;
use crate::linalg::{self, CMatrix, CVector};

/// Tolerance for orthonormality and span checks on isometry vectors.
const ISOMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Permutation {
    dim: usize,
    map: BTreeMap<usize, usize>,
}

impl Permutation {
    /// Validates that `map` is a bijection of its support onto itself.
    pub fn new(dim: usize, map: BTreeMap<usize, usize>) -> Result<Self> {
        let keys: BTreeSet<usize> = map.keys().copied().collect();
        let values: BTreeSet<usize> = map.values().copied().collect();
        if values.len() != map.len() {
            return Err(PstError::MalformedPermutation("two indices share an image".into()));
        }
        if keys != values {
            return Err(PstError::MalformedPermutation("image set differs from the support".into()));
        }
        if let Some(&k) = keys.iter().next_back() {
            if k >= dim {
                return Err(PstError::MalformedPermutation(format!("index {k} outside dimension {dim}")));
            }
        }
        Ok(Self { dim, map })
    }

    pub fn from_images(images: &[usize]) -> Result<Self> {
        Self::new(images.len(), images.iter().copied().enumerate().collect())
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, map: (0..dim).map(|i| (i, i)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn map(&self) -> &BTreeMap<usize, usize> {
        &self.map
    }

    pub fn support(&self) -> Vec<usize> {
        self.map.keys().copied().collect()
    }

    pub fn apply(&self, k: usize) -> usize {
        self.map.get(&k).copied().unwrap_or(k)
    }

    pub fn inverse_apply(&self, k: usize) -> usize {
        self.map.iter().find(|(_, &v)| v == k).map(|(&s, _)| s).unwrap_or(k)
    }

    /// Matrix with `P[image][source] = 1`; off-support indices map to themselves.
    pub fn matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            m[(self.apply(k), k)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.dim != other.dim {
            return Err(PstError::Dimension { expected: self.dim, found: other.dim });
        }
        let images: Vec<usize> = (0..self.dim).map(|k| self.apply(other.apply(k))).collect();
        Permutation::from_images(&images)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialIsometry {
    dim: usize,
    pairs: Vec<(CVector, CVector)>,
}

impl PartialIsometry {
    /// Sources must be orthonormal, targets must be orthonormal, and both
    /// must span the same subspace so that the orthogonal complement can be
    /// completed as a fixed eigenspace.
    pub fn new(dim: usize, pairs: Vec<(CVector, CVector)>) -> Result<Self> {
        for (s, t) in &pairs {
            if s.len() != dim {
                return Err(PstError::Dimension { expected: dim, found: s.len() });
            }
            if t.len() != dim {
                return Err(PstError::Dimension { expected: dim, found: t.len() });
            }
        }
        let sources: Vec<&CVector> = pairs.iter().map(|p| &p.0).collect();
        let targets: Vec<&CVector> = pairs.iter().map(|p| &p.1).collect();
        check_orthonormal(&sources, "source")?;
        check_orthonormal(&targets, "target")?;
        for s in &sources {
            let mut residual = (*s).clone();
            for t in &targets {
                let c = linalg::inner(t, s);
                for (r, tv) in residual.iter_mut().zip(t.iter()) {
                    *r -= c * tv;
                }
            }
            if linalg::norm(&residual) > ISOMETRY_TOLERANCE {
                return Err(PstError::Spec(
                    "source and target vectors must span the same subspace (include the reverse map)".into(),
                ));
            }
        }
        Ok(Self { dim, pairs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[(CVector, CVector)] {
        &self.pairs
    }

    /// Unitary completion: the given pairs plus `e^{i kernel_phase}` on the
    /// orthogonal complement of their span.
    pub fn completed(&self, kernel_phase: f64) -> CMatrix {
        let n = self.dim;
        let mut w = CMatrix::zeros(n, n);
        let mut proj = CMatrix::zeros(n, n);
        for (s, t) in &self.pairs {
            for i in 0..n {
                for j in 0..n {
                    w[(i, j)] += t[i] * s[j].conj();
                    proj[(i, j)] += s[i] * s[j].conj();
                }
            }
        }
        let complement = CMatrix::identity(n).sub(&proj);
        w.add(&complement.scale(C64::from_polar(1.0, kernel_phase)))
    }
}

fn check_orthonormal(vectors: &[&CVector], what: &str) -> Result<()> {
    for (a, va) in vectors.iter().enumerate() {
        for (b, vb) in vectors.iter().enumerate().skip(a) {
            let g = linalg::inner(va, vb);
            let expect = if a == b { 1.0 } else { 0.0 };
            if (g - C64::new(expect, 0.0)).norm() > ISOMETRY_TOLERANCE {
                return Err(PstError::Spec(format!("{what} vectors are not orthonormal")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetTransform {
    Permutation(Permutation),
    PartialIsometry(PartialIsometry),
}

impl From<Permutation> for TargetTransform {
    fn from(p: Permutation) -> Self {
        TargetTransform::Permutation(p)
    }
}

impl From<PartialIsometry> for TargetTransform {
    fn from(p: PartialIsometry) -> Self {
        TargetTransform::PartialIsometry(p)
    }
}

impl TargetTransform {
    pub fn dim(&self) -> usize {
        match self {
            TargetTransform::Permutation(p) => p.dim(),
            TargetTransform::PartialIsometry(p) => p.dim(),
        }
    }

    /// The (source, target) vector pairs that define the transfer goal.
    /// For a permutation these are unit vectors over its support.
    pub fn transfer_pairs(&self) -> Vec<(CVector, CVector)> {
        match self {
            TargetTransform::Permutation(p) => p
                .map()
                .iter()
                .map(|(&s, &t)| (linalg::unit(p.dim(), s), linalg::unit(p.dim(), t)))
                .collect(),
            TargetTransform::PartialIsometry(p) => p.pairs().to_vec(),
        }
    }

    /// Full unitary; `kernel_phase` only affects partial isometries.
    pub fn completed_matrix(&self, kernel_phase: f64) -> CMatrix {
        match self {
            TargetTransform::Permutation(p) => p.matrix(),
            TargetTransform::PartialIsometry(p) => p.completed(kernel_phase),
        }
    }

    /// Projector columns spanning the support (sources of the transfer pairs).
    pub fn support_projector(&self) -> CMatrix {
        let n = self.dim();
        let mut proj = CMatrix::zeros(n, n);
        for (s, _) in self.transfer_pairs() {
            for i in 0..n {
                for j in 0..n {
                    proj[(i, j)] += s[i] * s[j].conj();
                }
            }
        }
        proj
    }

    pub fn spectrum(&self, kernel_phase: f64) -> Result<TargetSpectrum> {
        match self {
            TargetTransform::Permutation(p) => Ok(permutation_spectrum(p)),
            TargetTransform::PartialIsometry(p) => isometry_spectrum(p, kernel_phase),
        }
    }

    pub fn as_permutation(&self) -> Option<&Permutation> {
        match self {
            TargetTransform::Permutation(p) => Some(p),
            _ => None,
        }
    }
}

/// One cycle of a permutation.
///
/// `elements` is ascending. `positions[k]` is the step of `elements[k]` along
/// the cycle, counted from the smallest element by repeatedly applying the
/// inverse permutation; with this convention the Fourier vector
/// `sum_k lambda^{positions[k]} |elements[k]>` satisfies `P v = lambda v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub elements: Vec<usize>,
    pub positions: Vec<usize>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position_of(&self, index: usize) -> Option<usize> {
        self.elements.iter().position(|&e| e == index).map(|k| self.positions[k])
    }
}

/// Disjoint cycles covering the support, ordered by their smallest element.
pub fn cycle_decomposition(target: &TargetTransform) -> Result<Vec<Cycle>> {
    let p = target
        .as_permutation()
        .ok_or_else(|| PstError::Unsupported("cycle decomposition needs a permutation".into()))?;
    Ok(decompose(p))
}

pub fn decompose(p: &Permutation) -> Vec<Cycle> {
    let mut inverse = BTreeMap::new();
    for (&s, &t) in p.map() {
        inverse.insert(t, s);
    }
    let mut seen = BTreeSet::new();
    let mut cycles = Vec::new();
    for &start in p.map().keys() {
        if seen.contains(&start) {
            continue;
        }
        let mut walk = vec![start];
        seen.insert(start);
        let mut cur = inverse[&start];
        while cur != start {
            walk.push(cur);
            seen.insert(cur);
            cur = inverse[&cur];
        }
        let mut pairs: Vec<(usize, usize)> = walk.iter().enumerate().map(|(pos, &e)| (e, pos)).collect();
        pairs.sort_unstable();
        cycles.push(Cycle {
            elements: pairs.iter().map(|p| p.0).collect(),
            positions: pairs.iter().map(|p| p.1).collect(),
        });
    }
    cycles
}

/// Eigenvalues `exp(i 2 pi n / L)` and Fourier eigenvectors of one cycle,
/// embedded in a space of dimension `dim`.
#[derive(Debug, Clone)]
pub struct CycleSpectrum {
    pub length: usize,
    pub eigenvalues: Vec<C64>,
    pub vectors: Vec<CVector>,
}

pub fn cycle_spectrum(cycle: &Cycle, dim: usize) -> CycleSpectrum {
    let l = cycle.len();
    let norm = 1.0 / (l as f64).sqrt();
    let mut eigenvalues = Vec::with_capacity(l);
    let mut vectors = Vec::with_capacity(l);
    for n in 0..l {
        eigenvalues.push(root_of_unity(n, l));
        let mut v = vec![C64::new(0.0, 0.0); dim];
        for (&e, &pos) in cycle.elements.iter().zip(&cycle.positions) {
            v[e] = root_of_unity(n * pos % l, l) * norm;
        }
        vectors.push(v);
    }
    CycleSpectrum { length: l, eigenvalues, vectors }
}

fn root_of_unity(k: usize, l: usize) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * k as f64 / l as f64)
}

/// All eigenvectors of a target sharing one eigenvalue.
#[derive(Debug, Clone)]
pub struct Sector {
    /// Eigenvalue `exp(i 2 pi turns)` with `turns` in `(-1/2, 1/2]`.
    pub turns: f64,
    pub vectors: Vec<CVector>,
}

impl Sector {
    pub fn eigenvalue(&self) -> C64 {
        C64::from_polar(1.0, 2.0 * PI * self.turns)
    }

    /// Principal argument of the eigenvalue, in `(-pi, pi]`.
    pub fn arg(&self) -> f64 {
        2.0 * PI * self.turns
    }

    pub fn degeneracy(&self) -> usize {
        self.vectors.len()
    }
}

#[derive(Debug, Clone)]
pub struct TargetSpectrum {
    pub dim: usize,
    /// Sorted by ascending `turns`.
    pub sectors: Vec<Sector>,
}

impl TargetSpectrum {
    pub fn sector_for_turns(&self, turns: f64, tol: f64) -> Option<usize> {
        self.sectors.iter().position(|s| turns_distance(s.turns, turns) < tol)
    }
}

/// Distance between two phases measured in turns, modulo one.
pub fn turns_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Reduces `n / l` to lowest terms and maps it into `(-1/2, 1/2]`.
fn reduced_turns(n: usize, l: usize) -> (i64, i64) {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let g = gcd(n, l).max(1);
    let (num, den) = ((n / g) as i64, (l / g) as i64);
    if 2 * num > den { (num - den, den) } else { (num, den) }
}

fn permutation_spectrum(p: &Permutation) -> TargetSpectrum {
    let dim = p.dim();
    let mut full_map = p.map().clone();
    for k in 0..dim {
        full_map.entry(k).or_insert(k);
    }
    let full = Permutation { dim, map: full_map };
    let mut sectors: BTreeMap<(i64, i64), Vec<CVector>> = BTreeMap::new();
    for cycle in decompose(&full) {
        let spec = cycle_spectrum(&cycle, dim);
        for (n, v) in spec.vectors.into_iter().enumerate() {
            sectors.entry(reduced_turns(n, spec.length)).or_default().push(v);
        }
    }
    let mut out: Vec<Sector> = sectors
        .into_iter()
        .map(|((num, den), vectors)| Sector { turns: num as f64 / den as f64, vectors })
        .collect();
    out.sort_by(|a, b| a.turns.total_cmp(&b.turns));
    TargetSpectrum { dim, sectors: out }
}

fn isometry_spectrum(p: &PartialIsometry, kernel_phase: f64) -> Result<TargetSpectrum> {
    let w = p.completed(kernel_phase);
    let n = p.dim();
    // W is unitary, hence normal: any real combination of its Hermitian and
    // anti-Hermitian parts shares its eigenvectors. The irrational weight
    // keeps distinct unit-circle eigenvalues from colliding.
    let wd = w.adjoint();
    let re = w.add(&wd).scale(C64::new(0.5, 0.0));
    let im = w.sub(&wd).scale(C64::new(0.0, -0.5));
    let k = re.add(&im.scale(C64::new(0.618_033_988_749_894_8, 0.0)));
    let eig = linalg::eigh(&k)?;

    let mut sectors: Vec<Sector> = Vec::new();
    for idx in 0..n {
        let v = eig.vector(idx);
        let wv = w.matvec(&v);
        let lambda = linalg::inner(&v, &wv);
        let residual: f64 = wv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual > 1e-9 {
            return Err(PstError::Spec("completed isometry eigenvectors could not be resolved".into()));
        }
        let turns = normalize_turns(linalg::principal_arg(lambda) / (2.0 * PI));
        match sectors.iter_mut().find(|s| turns_distance(s.turns, turns) < 1e-8) {
            Some(s) => s.vectors.push(v),
            None => sectors.push(Sector { turns, vectors: vec![v] }),
        }
    }
    sectors.sort_by(|a, b| a.turns.total_cmp(&b.turns));
    Ok(TargetSpectrum { dim: n, sectors })
}

/// Maps a phase in turns into `(-1/2, 1/2]`, snapping values within 1e-12 of
/// -1/2 onto +1/2.
pub fn normalize_turns(t: f64) -> f64 {
    let mut r = t.rem_euclid(1.0);
    if r > 0.5 {
        r -= 1.0;
    }
    if (r + 0.5).abs() < 1e-12 || (r - 0.5).abs() < 1e-12 {
        0.5
    } else if r.abs() < 1e-12 {
        0.0
    } else {
        r
    }
}

fn reflect(m: usize, site: usize) -> usize {
    m + 1 - site
}

/// Local-index permutation induced by a basis-state map on `block`.
fn induced_permutation(
    basis: &Basis,
    block: &[usize],
    in_support: impl Fn(usize) -> bool,
    image: impl Fn(usize) -> Result<usize>,
) -> Result<Permutation> {
    let local: BTreeMap<usize, usize> = block.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mut map = BTreeMap::new();
    for (l, &g) in block.iter().enumerate() {
        if !in_support(g) {
            continue;
        }
        let img = image(g)?;
        let li = local.get(&img).ok_or_else(|| {
            PstError::Spec(format!("image {} of {} lies outside the block", basis.ket(img), basis.ket(g)))
        })?;
        map.insert(l, *li);
    }
    Permutation::new(block.len(), map)
}

/// Mirror permutation on a block: sites reflect `j -> M + 1 - j` and the
/// label order is reversed, so on the two-excitation `i < j` block
/// `|i,mu;j,nu> -> |M+1-j,mu;M+1-i,nu>`; with one label it is the plain
/// site reflection.
pub fn mirror_permutation(basis: &Basis, block: &[usize]) -> Result<TargetTransform> {
    let spec = basis.spec();
    if spec.sites < 2 {
        return Err(PstError::Spec("mirror permutation needs at least two sites".into()));
    }
    let m = spec.sites;
    let nl = spec.labels.len();
    let perm = induced_permutation(basis, block, |_| true, |g| {
        let mapped = basis.states()[g].map_modes(spec, |s| reflect(m, s), |l| nl - 1 - l);
        basis.index_of(&mapped)
    })?;
    Ok(perm.into())
}

/// Site reflection `|i,mu;j,nu> -> |M+1-i,mu;M+1-j,nu>` restricted to the
/// states whose occupied sites sum to an odd number; even states are left
/// off the support.
pub fn parity_permutation(basis: &Basis, block: &[usize]) -> Result<TargetTransform> {
    let spec = basis.spec();
    let m = spec.sites;
    let odd: BTreeSet<usize> = basis.odd_parity_indices().into_iter().collect();
    let perm = induced_permutation(basis, block, |g| odd.contains(&g), |g| {
        let mapped = basis.states()[g].map_modes(spec, |s| reflect(m, s), |l| l);
        basis.index_of(&mapped)
    })?;
    Ok(perm.into())
}

// --- JSON ---

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetJson {
    /// `map` lists `[from, to]` pairs; unlisted indices are fixed.
    Permutation { dimension: usize, map: Vec<(usize, usize)> },
    PartialIsometry { dimension: usize, pairs: Vec<PairJson> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairJson {
    pub source: Vec<[f64; 2]>,
    pub target: Vec<[f64; 2]>,
}

pub fn vector_to_json(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

pub fn vector_from_json(v: &[[f64; 2]]) -> CVector {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

impl TargetTransform {
    pub fn to_json(&self) -> TargetJson {
        match self {
            TargetTransform::Permutation(p) => TargetJson::Permutation {
                dimension: p.dim(),
                map: p.map().iter().map(|(&a, &b)| (a, b)).collect(),
            },
            TargetTransform::PartialIsometry(p) => TargetJson::PartialIsometry {
                dimension: p.dim(),
                pairs: p
                    .pairs()
                    .iter()
                    .map(|(s, t)| PairJson { source: vector_to_json(s), target: vector_to_json(t) })
                    .collect(),
            },
        }
    }

    pub fn from_json(json: &TargetJson) -> Result<Self> {
        match json {
            TargetJson::Permutation { dimension, map } => {
                let mut m = BTreeMap::new();
                for &(a, b) in map {
                    if m.insert(a, b).is_some() {
                        return Err(PstError::MalformedPermutation(format!("index {a} listed twice")));
                    }
                }
                Ok(Permutation::new(*dimension, m)?.into())
            }
            TargetJson::PartialIsometry { dimension, pairs } => Ok(PartialIsometry::new(
                *dimension,
                pairs.iter().map(|p| (vector_from_json(&p.source), vector_from_json(&p.target))).collect(),
            )?
            .into()),
        }
    }
}

pub fn cycles_to_json(cycles: &[Cycle]) -> Vec<Vec<usize>> {
    cycles.iter().map(|c| c.elements.clone()).collect()
}

//! Hamiltonians whose propagator equals a prescribed target at time `tau`.
//!
//! Given the eigen-sectors of a target unitary, every eigenvector `y` with
//! eigenvalue `lambda` receives an energy `(-arg(lambda) + 2 pi x) / tau`
//! for some integer `x`, so that `exp(-i H tau)` reproduces `lambda` on it.
//! Mixing coefficients `beta` choose the eigenbasis inside degenerate sectors.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{PstError, Result};
use crate::linalg::{self, CMatrix, Eigen};
use crate::permutation_targets::{
    normalize_turns, turns_distance, PartialIsometry, Permutation, TargetSpectrum, TargetTransform,
};

/// Maximum `|H_ab - conj(H_ba)|` accepted by [`HermitianOperator::new`].
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
const PLAN_TURNS_TOLERANCE: f64 = 1e-9;
const BETA_UNITARITY_TOLERANCE: f64 = 1e-10;

/// Dense Hermitian matrix with a lazily computed, cached eigen-decomposition.
#[derive(Debug)]
pub struct HermitianOperator {
    matrix: CMatrix,
    spectral: OnceLock<Result<Eigen>>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let spectral = OnceLock::new();
        if let Some(s) = self.spectral.get() {
            let _ = spectral.set(s.clone());
        }
        Self { matrix: self.matrix.clone(), spectral }
    }
}

impl PartialEq for HermitianOperator {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl HermitianOperator {
    /// Checks squareness and Hermiticity (relative to the largest entry when
    /// that exceeds one) and stores the Hermitian part.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(PstError::Dimension { expected: matrix.rows(), found: matrix.cols() });
        }
        let defect = matrix.hermiticity_defect();
        if defect > HERMITICITY_TOLERANCE * matrix.max_abs().max(1.0) {
            return Err(PstError::NotHermitian(defect));
        }
        Ok(Self::from_hermitian_part(matrix))
    }

    /// Builds from the Hermitian part of `matrix` without checking.
    pub fn from_hermitian_part(matrix: CMatrix) -> Self {
        Self { matrix: matrix.hermitian_part(), spectral: OnceLock::new() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_hermitian_part(CMatrix::zeros(dim, dim))
    }

    pub fn from_real(dim: usize, values: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_real(dim, dim, values))
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.matrix[(r, c)]
    }

    pub fn eigen(&self) -> Result<&Eigen> {
        self.spectral.get_or_init(|| linalg::eigh(&self.matrix)).as_ref().map_err(Clone::clone)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eigen()?.values.clone())
    }

    /// `exp(-i H t)` assembled from the eigen-decomposition.
    pub fn propagator(&self, t: f64) -> Result<CMatrix> {
        Ok(self.eigen()?.apply_fn(|e| C64::from_polar(1.0, -e * t)))
    }

    /// Restriction to the given rows/columns.
    pub fn restrict(&self, indices: &[usize]) -> HermitianOperator {
        Self::from_hermitian_part(self.matrix.select(indices, indices))
    }

    pub fn to_json(&self) -> OperatorJson {
        OperatorJson {
            dimension: self.dim(),
            entries: self.matrix.as_slice().iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_json(json: &OperatorJson) -> Result<Self> {
        let n = json.dimension;
        if json.entries.len() != n * n {
            return Err(PstError::Dimension { expected: n * n, found: json.entries.len() });
        }
        Self::new(CMatrix::from_fn(n, n, |r, c| {
            let e = json.entries[r * n + c];
            C64::new(e[0], e[1])
        }))
    }
}

/// Hamiltonian as JSON: dimension plus row-major `[re, im]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub dimension: usize,
    pub entries: Vec<[f64; 2]>,
}

/// Integer phase choices and mixing coefficients for one eigen-sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorPlan {
    /// Eigenvalue `exp(i 2 pi turns)` this entry applies to.
    pub turns: f64,
    /// One integer per degeneracy slot.
    pub x: Vec<i64>,
    /// Unitary mixing matrix, `beta[a][i]` weighting the i-th cycle vector
    /// in slot `a`. Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<C64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPlan {
    pub tau: f64,
    pub sectors: Vec<SectorPlan>,
    /// Eigenphase assigned to the complement of a partial isometry.
    #[serde(default)]
    pub kernel_phase: f64,
    /// Constant energy added to the Hamiltonian (a global phase of U(tau)).
    #[serde(default)]
    pub energy_offset: f64,
}

impl SpectralPlan {
    /// Plan assigning the same `x` to every slot of every sector.
    pub fn uniform(spectrum: &TargetSpectrum, tau: f64, x: impl Fn(f64) -> i64) -> Self {
        Self {
            tau,
            sectors: spectrum
                .sectors
                .iter()
                .map(|s| SectorPlan { turns: s.turns, x: vec![x(s.turns); s.degeneracy()], beta: None })
                .collect(),
            kernel_phase: 0.0,
            energy_offset: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(PstError::Plan(format!("transfer time must be positive, got {}", self.tau)));
        }
        Ok(())
    }
}

fn check_beta(beta: &[Vec<C64>], eta: usize) -> Result<()> {
    if beta.len() != eta || beta.iter().any(|row| row.len() != eta) {
        return Err(PstError::Plan(format!("mixing matrix must be {eta}x{eta}")));
    }
    for a in 0..eta {
        for b in 0..eta {
            let g: C64 = (0..eta).map(|i| beta[a][i].conj() * beta[b][i]).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            if (g - expect).norm() > BETA_UNITARITY_TOLERANCE {
                return Err(PstError::Plan("mixing matrix is not unitary".into()));
            }
        }
    }
    Ok(())
}

/// `H = (1/tau) sum epsilon |y><y| + offset`, with
/// `epsilon = -arg(lambda) + 2 pi x` and `arg` the principal value.
pub fn synthesize(target: &TargetTransform, plan: &SpectralPlan) -> Result<HermitianOperator> {
    plan.validate()?;
    let spectrum = target.spectrum(plan.kernel_phase)?;
    synthesize_from_spectrum(&spectrum, plan)
}

pub fn synthesize_from_spectrum(spectrum: &TargetSpectrum, plan: &SpectralPlan) -> Result<HermitianOperator> {
    plan.validate()?;
    for sp in &plan.sectors {
        if spectrum.sector_for_turns(sp.turns, PLAN_TURNS_TOLERANCE).is_none() {
            return Err(PstError::Plan(format!("plan entry for turns {} matches no eigenvalue", sp.turns)));
        }
    }
    let n = spectrum.dim;
    let mut h = CMatrix::identity(n).scale(C64::new(plan.energy_offset, 0.0));
    for sector in &spectrum.sectors {
        let sp = plan
            .sectors
            .iter()
            .find(|p| turns_distance(p.turns, sector.turns) < PLAN_TURNS_TOLERANCE)
            .ok_or_else(|| PstError::Plan(format!("no plan entry for eigenvalue turns {}", sector.turns)))?;
        let eta = sector.degeneracy();
        if sp.x.len() != eta {
            return Err(PstError::Plan(format!(
                "eigenvalue turns {} has {eta} slots, plan gives {}",
                sector.turns,
                sp.x.len()
            )));
        }
        if let Some(beta) = &sp.beta {
            check_beta(beta, eta)?;
        }
        for a in 0..eta {
            let energy = (-sector.arg() + 2.0 * PI * sp.x[a] as f64) / plan.tau;
            let y: Vec<C64> = match &sp.beta {
                None => sector.vectors[a].clone(),
                Some(beta) => (0..n)
                    .map(|k| (0..eta).map(|i| beta[a][i] * sector.vectors[i][k]).sum())
                    .collect(),
            };
            for r in 0..n {
                if y[r] == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    h[(r, c)] += y[r] * y[c].conj() * energy;
                }
            }
        }
    }
    Ok(HermitianOperator::from_hermitian_part(h))
}

/// Matches prescribed energies to target eigen-sectors.
///
/// A common energy offset `delta` is chosen so that every energy `E`
/// satisfies `exp(-i (E - delta) tau) = lambda` for some sector; within a
/// sector, slots receive energies in ascending order.
pub fn plan_from_energies(spectrum: &TargetSpectrum, energies: &[f64], tau: f64) -> Result<SpectralPlan> {
    if energies.len() != spectrum.dim {
        return Err(PstError::Spec(format!(
            "{} prescribed energies for a {}-dimensional target",
            energies.len(),
            spectrum.dim
        )));
    }
    if !(tau > 0.0) {
        return Err(PstError::Plan("transfer time must be positive".into()));
    }
    let mut sorted = energies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let e0 = sorted[0];
    'candidates: for first in &spectrum.sectors {
        // offset making e0 land on `first` with x = 0, folded into (-pi, pi] / tau
        let delta = normalize_turns((e0 * tau + first.arg()) / (2.0 * PI)) * 2.0 * PI / tau;
        let mut slots: Vec<Vec<i64>> = spectrum.sectors.iter().map(|_| Vec::new()).collect();
        for &e in &sorted {
            let eps = (e - delta) * tau;
            let turns = normalize_turns(-eps / (2.0 * PI));
            let Some(s) = spectrum.sector_for_turns(turns, 1e-8) else { continue 'candidates };
            if slots[s].len() == spectrum.sectors[s].degeneracy() {
                continue 'candidates;
            }
            let x = (eps + spectrum.sectors[s].arg()) / (2.0 * PI);
            slots[s].push(x.round() as i64);
        }
        return Ok(SpectralPlan {
            tau,
            sectors: spectrum
                .sectors
                .iter()
                .zip(slots)
                .map(|(sec, x)| SectorPlan { turns: sec.turns, x, beta: None })
                .collect(),
            kernel_phase: 0.0,
            energy_offset: delta,
        });
    }
    Err(PstError::Plan("prescribed energies are incompatible with the target spectrum".into()))
}

/// Outcome of comparing `exp(-i H tau)` with a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PstReport {
    /// `min_phi || U S - e^{i phi} T ||_F` over the transfer pairs.
    pub operator_distance: f64,
    /// `|<t|U(tau)|s>|^2` for each transfer pair.
    pub fidelities: Vec<f64>,
    /// Optimal `phi = arg tr(T^dagger U S)`.
    pub global_phase: f64,
}

impl PstReport {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelities.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn verify_pst(h: &HermitianOperator, target: &TargetTransform, tau: f64) -> Result<PstReport> {
    if h.dim() != target.dim() {
        return Err(PstError::Dimension { expected: target.dim(), found: h.dim() });
    }
    let u = h.propagator(tau)?;
    Ok(compare_propagator(&u, target))
}

/// Same comparison as [`verify_pst`] on an already computed propagator.
pub fn compare_propagator(u: &CMatrix, target: &TargetTransform) -> PstReport {
    let pairs = target.transfer_pairs();
    let images: Vec<Vec<C64>> = pairs.iter().map(|(s, _)| u.matvec(s)).collect();
    let overlaps: Vec<C64> = pairs.iter().zip(&images).map(|((_, t), us)| linalg::inner(t, us)).collect();
    let trace: C64 = overlaps.iter().sum();
    let global_phase = if trace.norm() > 0.0 { trace.arg() } else { 0.0 };
    let phase = C64::from_polar(1.0, global_phase);
    let distance_sq: f64 = pairs
        .iter()
        .zip(&images)
        .map(|((_, t), us)| us.iter().zip(t).map(|(a, b)| (a - phase * b).norm_sqr()).sum::<f64>())
        .sum();
    PstReport {
        operator_distance: distance_sq.sqrt(),
        fidelities: overlaps.iter().map(|o| o.norm_sqr().min(1.0)).collect(),
        global_phase,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocusingVariant {
    /// Basis `{|2,up;2,down>, |1,up;3,down>, |1,down;3,up>}`.
    SpinPair,
    /// Basis `{|2,mu;2,mu>, |1,mu;3,mu>}`.
    BosonPair,
}

/// How the second-order coupling enters the spin-pair effective Hamiltonian.
///
/// Read literally, the printed effective Hamiltonian couples `|2,up;2,down>`
/// to each of `|1,up;3,down>` and `|1,down;3,up>` with strength `J2`
/// ([`PerComponent`](Self::PerComponent)). The doubly occupied state then
/// couples to the bright state `(|1,up;3,down> + |1,down;3,up>)/sqrt 2`
/// with `sqrt 2 * J2`, and the transfer probability becomes
/// `sin^2(sqrt 2 * pi * Delta_-/2)`, which is not one for integer choices.
/// Taking `J2` as the coupling to the normalized bright state
/// ([`BrightState`](Self::BrightState), the default) gives
/// `sin^2(pi * Delta_-/2) = 1` for every odd `Delta_-`, matching the claimed
/// transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConvention {
    #[default]
    BrightState,
    PerComponent,
}

#[derive(Debug, Clone)]
pub struct FocusingHamiltonian {
    pub variant: FocusingVariant,
    pub convention: CouplingConvention,
    pub kets: Vec<String>,
    /// Common diagonal energy `pi Delta_+ / (4 tau)`.
    pub e22: f64,
    /// Second-order coupling `pi Delta_- / (2 tau)`.
    pub j2: f64,
    pub operator: HermitianOperator,
}

pub fn focusing_deltas(x_plus: i64, x_minus: i64) -> (i64, i64) {
    (2 * x_plus + (2 * x_minus - 1), 2 * x_plus - (2 * x_minus - 1))
}

pub fn effective_focusing_hamiltonian(
    x_plus: i64,
    x_minus: i64,
    tau: f64,
    variant: FocusingVariant,
) -> Result<FocusingHamiltonian> {
    effective_focusing_hamiltonian_with(x_plus, x_minus, tau, variant, CouplingConvention::BrightState)
}

pub fn effective_focusing_hamiltonian_with(
    x_plus: i64,
    x_minus: i64,
    tau: f64,
    variant: FocusingVariant,
    convention: CouplingConvention,
) -> Result<FocusingHamiltonian> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PstError::Plan(format!("transfer time must be positive, got {tau}")));
    }
    let (dp, dm) = focusing_deltas(x_plus, x_minus);
    let e22 = PI * dp as f64 / (4.0 * tau);
    let j2 = PI * dm as f64 / (2.0 * tau);
    let (kets, matrix) = match variant {
        FocusingVariant::SpinPair => {
            let g = match convention {
                CouplingConvention::BrightState => j2 * FRAC_1_SQRT_2,
                CouplingConvention::PerComponent => j2,
            };
            (
                vec!["|2,up;2,down>".to_string(), "|1,up;3,down>".into(), "|1,down;3,up>".into()],
                CMatrix::from_real(3, 3, &[e22, g, g, g, e22, 0.0, g, 0.0, e22]),
            )
        }
        FocusingVariant::BosonPair => (
            vec!["|2,mu;2,mu>".to_string(), "|1,mu;3,mu>".into()],
            CMatrix::from_real(2, 2, &[e22, j2, j2, e22]),
        ),
    };
    Ok(FocusingHamiltonian {
        variant,
        convention,
        kets,
        e22,
        j2,
        operator: HermitianOperator::from_hermitian_part(matrix),
    })
}

/// The transfer each focusing variant is built for, in its own basis order:
/// the doubly occupied state exchanged with the (bright) split state.
pub fn focusing_target(variant: FocusingVariant) -> Result<TargetTransform> {
    match variant {
        FocusingVariant::SpinPair => {
            let doubly = linalg::unit(3, 0);
            let h = FRAC_1_SQRT_2;
            let bright = vec![C64::new(0.0, 0.0), C64::new(h, 0.0), C64::new(h, 0.0)];
            Ok(PartialIsometry::new(3, vec![(doubly.clone(), bright.clone()), (bright, doubly)])?.into())
        }
        FocusingVariant::BosonPair => Ok(Permutation::from_images(&[1, 0])?.into()),
    }
}

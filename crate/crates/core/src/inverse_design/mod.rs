//! Recovering lattice parameters that realize a target transform: seeded
//! multistart Nelder–Mead over a parametrized model family.

mod nelder_mead;
mod problem;

pub use nelder_mead::{minimize, Minimum, NelderMeadOptions};
pub use problem::{block_indices, BlockKind, FreeParameter, ObjectiveKind, Structure, TargetKind};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{PstError, Result};
use crate::fock_basis::{Basis, BasisSpec};
use crate::lattice_model::ModelParams;
use crate::permutation_targets::TargetTransform;
use crate::presets::{self, ChainRow};
use crate::spectral_synthesis::{verify_pst, HermitianOperator};
use problem::Prepared;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_ACCEPTANCE: f64 = 1e-8;
pub const DEFAULT_DEDUPE_TOLERANCE: f64 = 1e-4;
/// Spectrum-matched solutions must reproduce the target this closely.
pub const SPECTRUM_VERIFY_DISTANCE: f64 = 1e-6;

fn default_acceptance() -> f64 {
    DEFAULT_ACCEPTANCE
}

fn default_dedupe() -> f64 {
    DEFAULT_DEDUPE_TOLERANCE
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub structure: Structure,
    pub basis: BasisSpec,
    pub block: BlockKind,
    pub target: TargetKind,
    pub objective: ObjectiveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prescribed_spectrum: Option<Vec<f64>>,
    pub free: Vec<FreeParameter>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    pub multistart: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub tau: f64,
    /// Local minima below this objective value are reported.
    #[serde(default = "default_acceptance")]
    pub accept_below: f64,
    #[serde(default = "default_dedupe")]
    pub dedupe_tolerance: f64,
}

impl FitProblem {
    fn prepare(&self) -> Result<Prepared> {
        if self.multistart == 0 {
            return Err(PstError::Spec("multistart must be at least 1".into()));
        }
        Prepared::new(
            &self.structure,
            &self.basis,
            self.block,
            self.target,
            self.objective,
            self.prescribed_spectrum.as_deref(),
            &self.free,
            &self.fixed,
            self.tau,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    pub fn names(&self) -> Vec<String> {
        self.free.iter().map(|p| p.name.clone()).collect()
    }

    /// Model for a free-parameter vector (in `free` order).
    pub fn model(&self, theta: &[f64]) -> Result<ModelParams> {
        self.check_len(theta)?;
        self.prepare()?.model(theta)
    }

    pub fn hamiltonian(&self, theta: &[f64]) -> Result<HermitianOperator> {
        self.check_len(theta)?;
        self.prepare()?.hamiltonian(theta)
    }

    pub fn objective_value(&self, theta: &[f64]) -> Result<f64> {
        self.check_len(theta)?;
        Ok(self.prepare()?.objective(theta))
    }

    /// The block basis and target transform the problem is posed on.
    pub fn setting(&self) -> Result<(Basis, Vec<usize>, TargetTransform)> {
        let p = self.prepare()?;
        Ok((p.basis, p.block, p.target))
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.free.len() {
            return Err(PstError::Dimension { expected: self.free.len(), found: theta.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Index of the restart that produced the representative.
    pub restart: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    /// Recomputed from `params`.
    pub objective: f64,
    pub fidelities: Vec<f64>,
    pub operator_distance: f64,
    pub global_phase: f64,
    pub diagnostics: Diagnostics,
    pub multiplicity: usize,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn min_fidelity(&self) -> f64 {
        self.fidelities.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    /// Distinct accepted minima, ascending by objective.
    pub solutions: Vec<FitResult>,
    pub restarts: usize,
    pub best_objective: f64,
    /// Accepted by the objective but failing propagator verification.
    pub rejected: usize,
}

fn evaluate_prepared(p: &Prepared, theta: &[f64], diagnostics: Diagnostics) -> Result<FitResult> {
    let h = p.hamiltonian(theta)?;
    let report = verify_pst(&h, &p.target, p.tau)?;
    Ok(FitResult {
        names: p.names.clone(),
        params: theta.to_vec(),
        objective: p.objective(theta),
        fidelities: report.fidelities,
        operator_distance: report.operator_distance,
        global_phase: report.global_phase,
        diagnostics,
        multiplicity: 1,
    })
}

/// Objective, fidelities and operator distance at a given parameter vector.
pub fn evaluate(problem: &FitProblem, theta: &[f64]) -> Result<FitResult> {
    problem.check_len(theta)?;
    let p = problem.prepare()?;
    let d = Diagnostics { restart: 0, iterations: 0, evaluations: 1, converged: true };
    evaluate_prepared(&p, theta, d)
}

fn start_points(p: &Prepared, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            p.lower
                .iter()
                .zip(&p.upper)
                .map(|(&lo, &hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect()
}

fn run(problem: &FitProblem, expected: ObjectiveKind) -> Result<FitOutcome> {
    if problem.objective != expected {
        return Err(PstError::Spec(format!(
            "problem objective is {:?}, this routine needs {:?}",
            problem.objective, expected
        )));
    }
    if !(problem.dedupe_tolerance >= 0.0) {
        return Err(PstError::Spec("dedupe tolerance must be non-negative".into()));
    }
    let p = problem.prepare()?;
    let opts = NelderMeadOptions::default();
    let starts = start_points(&p, problem.multistart, problem.seed);
    let minima: Vec<Minimum> = starts
        .par_iter()
        .map(|x0| minimize(|x| p.objective(x), x0, &p.lower, &p.upper, &opts))
        .collect();

    let best_objective = minima.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let mut accepted = Vec::new();
    let mut rejected = 0;
    for (restart, m) in minima.iter().enumerate() {
        if !(m.value < problem.accept_below) {
            continue;
        }
        let d = Diagnostics { restart, iterations: m.iterations, evaluations: m.evaluations, converged: m.converged };
        let r = evaluate_prepared(&p, &m.point, d)?;
        if expected == ObjectiveKind::SpectrumMatch && !(r.operator_distance < SPECTRUM_VERIFY_DISTANCE) {
            rejected += 1;
            continue;
        }
        accepted.push(r);
    }
    Ok(FitOutcome {
        solutions: dedupe_solutions(accepted, problem.dedupe_tolerance),
        restarts: problem.multistart,
        best_objective,
        rejected,
    })
}

/// Minimizes the propagator mismatch from every start point and returns the
/// distinct minima below the acceptance threshold.
pub fn fit_to_target(problem: &FitProblem) -> Result<FitOutcome> {
    run(problem, ObjectiveKind::PropagatorMatch)
}

/// Matches the sorted block spectrum to the prescribed list; accepted minima
/// are kept only if the propagator also reproduces the target.
pub fn fit_to_spectrum(problem: &FitProblem) -> Result<FitOutcome> {
    run(problem, ObjectiveKind::SpectrumMatch)
}

pub fn fit(problem: &FitProblem) -> Result<FitOutcome> {
    run(problem, problem.objective)
}

fn ordering(a: &FitResult, b: &FitResult) -> std::cmp::Ordering {
    a.objective.total_cmp(&b.objective).then_with(|| {
        for (x, y) in a.params.iter().zip(&b.params) {
            match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn length(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Groups results whose parameter vectors lie within `tolerance` relative
/// distance; the lowest-objective member represents each group and carries
/// the group's total multiplicity.
pub fn dedupe_solutions(mut results: Vec<FitResult>, tolerance: f64) -> Vec<FitResult> {
    results.sort_by(ordering);
    let mut reps: Vec<FitResult> = Vec::new();
    for r in results {
        let found = reps.iter_mut().find(|rep| {
            let scale = length(&rep.params).max(length(&r.params)).max(1.0);
            distance(&rep.params, &r.params) <= tolerance * scale
        });
        match found {
            Some(rep) => rep.multiplicity += r.multiplicity,
            None => reps.push(r),
        }
    }
    reps
}

/// One line of the results catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub problem: FitProblem,
    pub outcome: FitOutcome,
}

/// Appends a solved problem, with its seed, to a JSON-lines catalog.
pub fn append_catalog(path: &Path, problem: &FitProblem, outcome: &FitOutcome) -> std::io::Result<()> {
    let entry = CatalogEntry { problem: problem.clone(), outcome: outcome.clone() };
    let line = serde_json::to_string(&entry).map_err(std::io::Error::other)?;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")
}

pub fn read_catalog(path: &Path) -> Result<Vec<CatalogEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| PstError::Spec(format!("{}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| PstError::Spec(format!("catalog line: {e}"))))
        .collect()
}

fn chain_basis(sites: usize) -> BasisSpec {
    BasisSpec::distinguishable(sites, &["mu", "nu"]).hard_core()
}

/// Five-site chain, mirror target on the less block, free `W, J12, J23`,
/// zero on-site energy; `J` in `[0, 10]`, `W` in `[0, 1]`.
pub fn chain_problem(objective: ObjectiveKind, multistart: usize, seed: u64) -> Result<FitProblem> {
    let table = presets::chain_table()?;
    Ok(FitProblem {
        structure: Structure::CentroNn { sites: 5 },
        basis: chain_basis(5),
        block: BlockKind::Less,
        target: TargetKind::Mirror,
        objective,
        prescribed_spectrum: match objective {
            ObjectiveKind::SpectrumMatch => Some(table.spectrum()),
            ObjectiveKind::PropagatorMatch => None,
        },
        free: vec![
            FreeParameter::new("W", 0.0, 1.0),
            FreeParameter::new("J12", 0.0, 10.0),
            FreeParameter::new("J23", 0.0, 10.0),
        ],
        fixed: BTreeMap::from([("eps".to_string(), 0.0)]),
        multistart,
        seed,
        tau: table.tau,
        accept_below: DEFAULT_ACCEPTANCE,
        dedupe_tolerance: DEFAULT_DEDUPE_TOLERANCE,
    })
}

/// Evaluates one published chain row (`W, J12, J23`).
pub fn evaluate_chain_row(row: &ChainRow) -> Result<FitResult> {
    let problem = chain_problem(ObjectiveKind::PropagatorMatch, 1, DEFAULT_SEED)?;
    evaluate(&problem, &[row.w, row.j12, row.j23])
}

/// Inverse-distance family on the odd-parity block against the site
/// reflection, free `eps1, eps2, eps3, W, r1, r2` with `J` fixed to the
/// published value.
pub fn inverse_distance_problem(multistart: usize, seed: u64) -> Result<FitProblem> {
    let set = presets::inverse_distance_set()?;
    Ok(FitProblem {
        structure: Structure::InverseDistance,
        basis: chain_basis(5),
        block: BlockKind::Odd,
        target: TargetKind::Parity,
        objective: ObjectiveKind::PropagatorMatch,
        prescribed_spectrum: None,
        free: vec![
            FreeParameter::new("eps1", -30.0, 30.0),
            FreeParameter::new("eps2", -30.0, 30.0),
            FreeParameter::new("eps3", -30.0, 30.0),
            FreeParameter::new("W", 0.0, 0.1),
            FreeParameter::new("r1", 0.5, 1.5),
            FreeParameter::new("r2", 0.5, 1.5),
        ],
        fixed: BTreeMap::from([("J".to_string(), set.j)]),
        multistart,
        seed,
        tau: set.tau,
        accept_below: 1e-3,
        dedupe_tolerance: DEFAULT_DEDUPE_TOLERANCE,
    })
}

/// Published inverse-distance parameters in `free` order of
/// [`inverse_distance_problem`].
pub fn inverse_distance_published() -> Result<Vec<f64>> {
    let s = presets::inverse_distance_set()?;
    Ok(vec![s.eps1, s.eps2, s.eps3, s.w, s.r1, s.r2])
}

/// Evaluates (does not fit) the published inverse-distance parameters on
/// the odd-parity block.
pub fn reproduce_inverse_distance() -> Result<FitResult> {
    let problem = inverse_distance_problem(1, DEFAULT_SEED)?;
    evaluate(&problem, &inverse_distance_published()?)
}

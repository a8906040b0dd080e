//! Time evolution under a time-independent Hamiltonian, transfer
//! probabilities and occupation traces.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{PstError, Result};
use crate::fock_basis::Basis;
use crate::linalg::{inner, norm, CVector};
use crate::spectral_synthesis::HermitianOperator;

pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// Normalized amplitudes over the index set of some basis block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct StateVector {
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(PstError::Normalization(n));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales to unit norm; a zero vector is an error.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(PstError::Normalization(n));
        }
        Ok(Self { amplitudes: amplitudes.iter().map(|a| a / n).collect() })
    }

    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(PstError::Lookup(format!("basis index {k} out of range for dimension {dim}")));
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    /// Equal-weight superposition of the given local indices.
    pub fn uniform_superposition(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        for &k in indices {
            if k >= dim {
                return Err(PstError::Lookup(format!("basis index {k} out of range for dimension {dim}")));
            }
            v[k] += C64::new(1.0, 0.0);
        }
        Self::normalized(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `<self|other>`
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(PstError::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.amplitudes[k].norm_sqr()
    }
}

impl TryFrom<Vec<[f64; 2]>> for StateVector {
    type Error = PstError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        StateVector::new(v.iter().map(|p| C64::new(p[0], p[1])).collect())
    }
}

impl From<StateVector> for Vec<[f64; 2]> {
    fn from(s: StateVector) -> Self {
        s.amplitudes.iter().map(|a| [a.re, a.im]).collect()
    }
}

/// Initial state expanded in the eigenbasis, so evolving to many times
/// costs one matrix-vector product each.
struct Propagation<'a> {
    h: &'a HermitianOperator,
    initial: CVector,
    coefficients: CVector,
}

impl<'a> Propagation<'a> {
    fn new(h: &'a HermitianOperator, psi0: &StateVector) -> Result<Self> {
        if h.dim() != psi0.dim() {
            return Err(PstError::Dimension { expected: h.dim(), found: psi0.dim() });
        }
        let eig = h.eigen()?;
        let coefficients = (0..h.dim()).map(|k| inner(&eig.vector(k), psi0.amplitudes())).collect();
        Ok(Self { h, initial: psi0.amplitudes().to_vec(), coefficients })
    }

    fn at(&self, t: f64) -> CVector {
        if t == 0.0 {
            return self.initial.clone();
        }
        let eig = self.h.eigen().expect("spectral decomposition cached at construction");
        let n = self.h.dim();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (k, (&e, &c)) in eig.values.iter().zip(&self.coefficients).enumerate() {
            let w = c * C64::from_polar(1.0, -e * t);
            for (r, o) in out.iter_mut().enumerate() {
                *o += eig.vectors[(r, k)] * w;
            }
        }
        out
    }
}

/// `exp(-iHt) psi0` via the spectral decomposition of `h`.
pub fn evolve(h: &HermitianOperator, psi0: &StateVector, t: f64) -> Result<StateVector> {
    let p = Propagation::new(h, psi0)?;
    Ok(StateVector { amplitudes: p.at(t) })
}

/// `|<target| exp(-iH tau) |psi0>|^2`
pub fn transfer_fidelity(
    h: &HermitianOperator,
    psi0: &StateVector,
    target: &StateVector,
    tau: f64,
) -> Result<f64> {
    let psi = evolve(h, psi0, tau)?;
    Ok(target.overlap(&psi)?.norm_sqr().min(1.0))
}

/// Expected excitation number per site (index 0 is site 1) for a state
/// over `block`, a list of basis indices.
pub fn occupation_probabilities(psi: &StateVector, basis: &Basis, block: &[usize]) -> Result<Vec<f64>> {
    if block.len() != psi.dim() {
        return Err(PstError::Dimension { expected: block.len(), found: psi.dim() });
    }
    let spec = basis.spec();
    let mut out = vec![0.0; spec.sites];
    for (local, &g) in block.iter().enumerate() {
        let p = psi.probability(local);
        if p == 0.0 {
            continue;
        }
        let occ = basis.state_of(g)?.site_occupations(spec);
        for (o, &n) in out.iter_mut().zip(&occ) {
            *o += p * n as f64;
        }
    }
    Ok(out)
}

/// What to record along a trajectory.
#[derive(Debug, Clone)]
pub enum TraceTargets<'a> {
    /// `|<target|psi(t)>|^2` for each labelled target.
    States(Vec<(String, StateVector)>),
    /// Expected occupation of every site.
    Sites { basis: &'a Basis, block: &'a [usize] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `values[series][time]`
    pub values: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn series(&self, label: &str) -> Option<&[f64]> {
        self.labels.iter().position(|l| l == label).map(|i| self.values[i].as_slice())
    }

    /// Values of every series at time index `k`.
    pub fn row(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|s| s[k]).collect()
    }

    pub fn last_row(&self) -> Vec<f64> {
        self.row(self.times.len() - 1)
    }

    /// Header `t,<labels...>`, one line per time, 9 significant digits.
    /// Labels containing commas or quotes are quoted.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.labels {
            out.push(',');
            if l.contains([',', '"']) {
                let _ = write!(out, "\"{}\"", l.replace('"', "\"\""));
            } else {
                out.push_str(l);
            }
        }
        out.push('\n');
        for (k, &t) in self.times.iter().enumerate() {
            out.push_str(&format_sig(t, 9));
            for s in &self.values {
                let _ = write!(out, ",{}", format_sig(s[k], 9));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("time series serializes")
    }
}

/// `%.{digits}g`-style formatting, independent of locale.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `points` equally spaced times covering `[0, t_max]`; one point means `{0}`.
pub fn uniform_grid(t_max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(PstError::Spec("time grid needs at least one point".into()));
    }
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(PstError::Spec(format!("invalid grid end {t_max}")));
    }
    if points == 1 {
        return Ok(vec![0.0]);
    }
    let step = t_max / (points - 1) as f64;
    Ok((0..points).map(|k| if k + 1 == points { t_max } else { k as f64 * step }).collect())
}

/// Samples the requested quantities at each grid time. Grid points are
/// evaluated in parallel and assembled in grid order.
pub fn trace_probabilities(
    h: &HermitianOperator,
    psi0: &StateVector,
    targets: &TraceTargets<'_>,
    times: &[f64],
) -> Result<TimeSeries> {
    if times.is_empty() {
        return Err(PstError::Spec("empty time grid".into()));
    }
    let prop = Propagation::new(h, psi0)?;
    let labels: Vec<String> = match targets {
        TraceTargets::States(list) => {
            for (_, s) in list {
                if s.dim() != h.dim() {
                    return Err(PstError::Dimension { expected: h.dim(), found: s.dim() });
                }
            }
            list.iter().map(|(l, _)| l.clone()).collect()
        }
        TraceTargets::Sites { basis, block } => {
            if block.len() != h.dim() {
                return Err(PstError::Dimension { expected: h.dim(), found: block.len() });
            }
            (1..=basis.spec().sites).map(|s| format!("site{s}")).collect()
        }
    };
    let rows: Vec<Result<Vec<f64>>> = times
        .par_iter()
        .map(|&t| {
            let psi = StateVector { amplitudes: prop.at(t) };
            match targets {
                TraceTargets::States(list) => list
                    .iter()
                    .map(|(_, s)| Ok(s.overlap(&psi)?.norm_sqr().min(1.0)))
                    .collect(),
                TraceTargets::Sites { basis, block } => occupation_probabilities(&psi, basis, block),
            }
        })
        .collect();
    let mut values = vec![Vec::with_capacity(times.len()); labels.len()];
    for row in rows {
        for (s, v) in values.iter_mut().zip(row?) {
            s.push(v);
        }
    }
    Ok(TimeSeries { times: times.to_vec(), labels, values })
}

/// `1 - (probability inside subspace)` at each time; `subspace` holds local
/// indices of `h`.
pub fn subspace_leakage(
    h: &HermitianOperator,
    psi0: &StateVector,
    subspace: &[usize],
    times: &[f64],
) -> Result<TimeSeries> {
    if times.is_empty() {
        return Err(PstError::Spec("empty time grid".into()));
    }
    let mut inside = vec![false; h.dim()];
    for &k in subspace {
        if k >= h.dim() {
            return Err(PstError::Lookup(format!("subspace index {k} out of range")));
        }
        inside[k] = true;
    }
    let outside0: f64 = (0..psi0.dim()).filter(|&k| !inside[k]).map(|k| psi0.probability(k)).sum();
    if outside0 > NORMALIZATION_TOLERANCE {
        return Err(PstError::Spec(format!("initial state has weight {outside0} outside the subspace")));
    }
    let prop = Propagation::new(h, psi0)?;
    let values: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            let psi = prop.at(t);
            let kept: f64 = subspace.iter().map(|&k| psi[k].norm_sqr()).sum();
            (1.0 - kept).max(0.0)
        })
        .collect();
    Ok(TimeSeries { times: times.to_vec(), labels: vec!["leakage".into()], values: vec![values] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_basis::BasisSpec;

    fn hard_core_less() -> (Basis, Vec<usize>) {
        let b = Basis::new(BasisSpec::distinguishable(5, &["mu", "nu"]).hard_core()).unwrap();
        let less = b.partition(("mu", "nu")).unwrap().less;
        (b, less)
    }

    #[test]
    fn normalization_is_strict() {
        assert!(StateVector::new(vec![C64::new(1.0, 0.0), C64::new(1e-4, 0.0)]).is_err());
        assert!(StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).is_ok());
        assert!(StateVector::normalized(vec![C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn zero_time_and_diagonal_phase() {
        let h = HermitianOperator::from_real(2, &[1.3, 0.0, 0.0, -0.2]).unwrap();
        let psi = StateVector::basis_state(2, 0).unwrap();
        assert_eq!(evolve(&h, &psi, 0.0).unwrap().amplitudes()[0], C64::new(1.0, 0.0));
        let out = evolve(&h, &psi, 0.7).unwrap();
        assert!((out.amplitudes()[0] - C64::from_polar(1.0, -1.3 * 0.7)).norm() < 1e-14);
    }

    #[test]
    fn fidelity_of_stationary_state() {
        let h = HermitianOperator::zeros(3);
        let psi = StateVector::basis_state(3, 1).unwrap();
        assert_eq!(transfer_fidelity(&h, &psi, &psi, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn occupation_examples() {
        let (b, less) = hard_core_less();
        let at = |k: &str| less.iter().position(|&g| g == b.parse_state(k).unwrap()).unwrap();
        let psi = StateVector::basis_state(10, at("1,mu;2,nu")).unwrap();
        assert_eq!(occupation_probabilities(&psi, &b, &less).unwrap(), vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        let psi = StateVector::uniform_superposition(10, &[at("1,mu;2,nu"), at("1,mu;3,nu")]).unwrap();
        let occ = occupation_probabilities(&psi, &b, &less).unwrap();
        for (o, e) in occ.iter().zip([1.0, 0.5, 0.5, 0.0, 0.0]) {
            assert!((o - e).abs() < 1e-15);
        }
    }

    #[test]
    fn single_point_grid() {
        let h = HermitianOperator::from_real(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let psi = StateVector::basis_state(2, 0).unwrap();
        let ts = trace_probabilities(
            &h,
            &psi,
            &TraceTargets::States(vec![("self".into(), psi.clone())]),
            &uniform_grid(1.0, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(ts.times, vec![0.0]);
        assert_eq!(ts.values, vec![vec![1.0]]);
        assert_eq!(ts.to_csv(), "t,self\n0,1\n");
        assert!(trace_probabilities(&h, &psi, &TraceTargets::States(vec![]), &[]).is_err());
    }

    #[test]
    fn hard_core_block_has_no_leakage() {
        let (b, less) = hard_core_less();
        let mut p = crate::lattice_model::nn_pst_chain(5, 1.0).unwrap();
        p.set_coupling(1, 3, 0.4);
        let h = crate::lattice_model::build_hamiltonian(&p, &b, Some(&less)).unwrap();
        let psi = StateVector::basis_state(10, 0).unwrap();
        let all: Vec<usize> = (0..10).collect();
        let ts = subspace_leakage(&h, &psi, &all, &uniform_grid(1.0, 11).unwrap()).unwrap();
        assert!(ts.values[0].iter().all(|&v| v < 1e-12));
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(1.0, 9), "1");
        assert_eq!(format_sig(0.5, 9), "0.5");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(123456789.4, 9), "123456789");
        assert_eq!(format_sig(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_sig(-2.5e-7, 9), "-2.5e-07");
        assert_eq!(format_sig(0.0001, 9), "0.0001");
        assert_eq!(format_sig(0.99999999999, 9), "1");
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(1.0, 5).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(uniform_grid(1.0, 0).is_err());
    }
}

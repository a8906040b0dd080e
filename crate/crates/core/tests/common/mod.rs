//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pst_core::fock_basis::{Basis, Statistics};
use pst_core::lattice_model::ModelParams;
use pst_core::linalg::CMatrix;

/// `exp(a)` by scaling and squaring a truncated Taylor series.
pub fn expm_taylor(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let norm = a.frobenius_norm();
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let scaled = a.scale(C64::new(1.0 / 2f64.powi(s as i32), 0.0));
    let mut term = CMatrix::identity(n);
    let mut sum = CMatrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    sum
}

/// `exp(-i h t)` through the series oracle.
pub fn propagator_oracle(h: &CMatrix, t: f64) -> CMatrix {
    expm_taylor(&h.scale(C64::new(0.0, -t)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = C64::new(rng.gen_range(-scale..scale), 0.0);
        for j in (i + 1)..n {
            let z = C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-ish random unitary from Gram-Schmidt on Gaussian columns; rows are
/// orthonormal so it can serve directly as a mixing matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<C64>> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    while rows.len() < n {
        let mut v: Vec<C64> = (0..n).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect();
        for r in &rows {
            let p: C64 = r.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= p * y;
            }
        }
        let nrm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-6 {
            rows.push(v.iter().map(|x| x / nrm).collect());
        }
    }
    rows
}

/// Applies `a_mode` to an occupation vector; returns amplitude and result.
fn annihilate(occ: &[u8], mode: usize, fermion: bool) -> Option<(f64, Vec<u8>)> {
    if occ[mode] == 0 {
        return None;
    }
    let mut out = occ.to_vec();
    let mut amp = (occ[mode] as f64).sqrt();
    if fermion && occ[..mode].iter().map(|&x| x as u32).sum::<u32>() % 2 == 1 {
        amp = -amp;
    }
    out[mode] -= 1;
    Some((amp, out))
}

fn create(occ: &[u8], mode: usize, fermion: bool) -> Option<(f64, Vec<u8>)> {
    if fermion && occ[mode] > 0 {
        return None;
    }
    let mut out = occ.to_vec();
    let mut amp = (occ[mode] as f64 + 1.0).sqrt();
    if fermion && occ[..mode].iter().map(|&x| x as u32).sum::<u32>() % 2 == 1 {
        amp = -amp;
    }
    out[mode] += 1;
    Some((amp, out))
}

fn lookup_eps(p: &ModelParams, site: usize, label: &str) -> f64 {
    p.epsilon.iter().find(|e| e.0 == site && e.1 == label).map(|e| e.2).unwrap_or(0.0)
}

fn lookup_u(p: &ModelParams, i: usize, si: &str, k: usize, sk: &str) -> f64 {
    p.interactions
        .iter()
        .find(|u| (u.0 == i && u.2 == si && u.1 == k && u.3 == sk) || (u.0 == k && u.2 == sk && u.1 == i && u.3 == si))
        .map(|u| u.4)
        .unwrap_or(0.0)
}

/// Dense matrix of the lattice Hamiltonian built by acting with ladder
/// operators on occupation vectors. Parameters must use explicit labels.
pub fn second_quantization_oracle(p: &ModelParams, basis: &Basis) -> CMatrix {
    let spec = basis.spec();
    let fermion = spec.statistics == Statistics::Fermion;
    let labels = &spec.labels;
    let nl = labels.len();
    let mode = |site: usize, l: usize| (site - 1) * nl + l;
    let n = basis.len();
    let mut h = CMatrix::zeros(n, n);
    let index = |occ: &[u8]| basis.states().iter().position(|s| s.occupations() == occ);
    for (col, state) in basis.states().iter().enumerate() {
        let occ = state.occupations();
        let num = |m: usize| occ[m] as f64;
        let mut diag = 0.0;
        for site in 1..=spec.sites {
            for l in 0..nl {
                diag += lookup_eps(p, site, &labels[l]) * num(mode(site, l));
            }
        }
        for i in 1..=spec.sites {
            for li in 0..nl {
                for k in 1..=spec.sites {
                    for lk in 0..nl {
                        let (a, b) = (mode(i, li), mode(k, lk));
                        let u = lookup_u(p, i, &labels[li], k, &labels[lk]);
                        let delta = if a == b { 1.0 } else { 0.0 };
                        diag += 0.5 * u * num(a) * (num(b) - delta);
                    }
                }
            }
        }
        h[(col, col)] += C64::new(diag, 0.0);
        for c in &p.couplings {
            for (to, from) in [(c.0, c.1), (c.1, c.0)] {
                for l in 0..nl {
                    let Some((a1, s1)) = annihilate(occ, mode(from, l), fermion) else { continue };
                    let Some((a2, s2)) = create(&s1, mode(to, l), fermion) else { continue };
                    if let Some(row) = index(&s2) {
                        h[(row, col)] += C64::new(c.2 * a1 * a2, 0.0);
                    }
                }
            }
        }
    }
    h
}

/// Two-excitation amplitude on a nearest-neighbour chain with the pair kept
/// in order (hard-core, first label left of second): the antisymmetrized
/// product of single-particle amplitudes.
pub fn ordered_pair_amplitude(u1: &CMatrix, from: (usize, usize), to: (usize, usize)) -> C64 {
    let (i, j) = (from.0 - 1, from.1 - 1);
    let (a, b) = (to.0 - 1, to.1 - 1);
    u1[(a, i)] * u1[(b, j)] - u1[(a, j)] * u1[(b, i)]
}

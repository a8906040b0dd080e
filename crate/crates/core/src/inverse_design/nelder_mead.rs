//! Bounded Nelder–Mead simplex search. Trial points are clamped into the
//! box before evaluation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once `f_worst - f_best` falls below this.
    pub spread_tolerance: f64,
    pub max_iterations: usize,
    /// Initial simplex edge as a fraction of each bound range.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            spread_tolerance: 1e-12,
            max_iterations: 5000,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

fn toward(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> Minimum {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(&start);
    simplex.push((start.clone(), v0));
    for i in 0..n {
        let range = upper[i] - lower[i];
        let step = if range.is_finite() && range > 0.0 {
            opts.initial_step * range
        } else {
            opts.initial_step * start[i].abs().max(1.0)
        };
        let mut x = start.clone();
        x[i] = if x[i] + step <= upper[i] { x[i] + step } else { x[i] - step };
        clamp(&mut x, lower, upper);
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[n].1 - simplex[0].1 < opts.spread_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let mut xr = toward(&centroid, &worst.0, -opts.reflection);
        clamp(&mut xr, lower, upper);
        let fr = eval(&xr);

        if fr < simplex[0].1 {
            let mut xe = toward(&centroid, &xr, opts.expansion);
            clamp(&mut xe, lower, upper);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let mut xc = toward(&centroid, &xr, opts.contraction);
            clamp(&mut xc, lower, upper);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let mut xc = toward(&centroid, &worst.0, opts.contraction);
            clamp(&mut xc, lower, upper);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x = toward(&best, &vertex.0, opts.shrink);
            clamp(&mut x, lower, upper);
            let v = eval(&x);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Minimum { point, value, iterations, evaluations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2),
            &[4.0, 4.0],
            &[-10.0, -10.0],
            &[10.0, 10.0],
            &NelderMeadOptions::default(),
        );
        assert!(m.converged);
        assert!((m.point[0] - 1.0).abs() < 1e-5 && (m.point[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let m = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &NelderMeadOptions::default(),
        );
        assert!(m.value < 1e-9, "{m:?}");
    }

    #[test]
    fn minimum_on_the_boundary() {
        let m = minimize(|x| (x[0] + 1.0).powi(2), &[0.5], &[0.0], &[1.0], &NelderMeadOptions::default());
        assert_eq!(m.point[0], 0.0);
        assert_eq!(m.value, 1.0);
    }

    #[test]
    fn iteration_cap() {
        let opts = NelderMeadOptions { max_iterations: 3, ..Default::default() };
        let m = minimize(|x| x[0].abs() + x[1].abs(), &[3.0, 3.0], &[-9.0; 2], &[9.0; 2], &opts);
        assert_eq!(m.iterations, 3);
        assert!(!m.converged);
    }
}

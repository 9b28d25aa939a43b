use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::decompose::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::fields::SpinorField;
use crate::C64;

/// Log-spaced nodes for trapezoid quadrature of `int_0^inf g(t) dt / t`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        LogGrid { lo: 1e-16, hi: 1e16, points: 400 }
    }
}

impl LogGrid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && points >= 3) {
            return Err(Error::Input(format!("bad log grid [{lo}, {hi}] with {points} points")));
        }
        Ok(LogGrid { lo, hi, points })
    }

    pub fn nodes(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        let n = self.points - 1;
        (0..self.points).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
    }

    fn step(&self) -> f64 {
        (self.hi.ln() - self.lo.ln()) / (self.points - 1) as f64
    }

    /// Trapezoid rule in `ln t` applied to sampled values at [`LogGrid::nodes`].
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        trapezoid(samples, self.step())
    }

    /// Integral of `g` together with its change against the rule on half as
    /// many nodes.
    fn integrate_checked(&self, g: impl Fn(f64) -> f64) -> (f64, f64) {
        let fine = self.integrate(&self.nodes().into_iter().map(&g).collect::<Vec<_>>());
        let half = LogGrid { points: self.points / 2 + 1, ..*self };
        let coarse = half.integrate(&half.nodes().into_iter().map(&g).collect::<Vec<_>>());
        (fine, (fine - coarse).abs())
    }
}

fn trapezoid(y: &[f64], h: f64) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    h * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[n - 1]))
}

/// `C_theta = int_0^inf s^{-theta} / (1 + s) ds` by the log-grid rule.
pub fn c_theta(theta: f64, grid: &LogGrid) -> Result<f64> {
    check_theta(theta)?;
    let (v, err) = grid.integrate_checked(|s| s.powf(1.0 - theta) / (1.0 + s));
    if err > 1e-6 * v {
        return Err(Error::Quadrature(format!("C_theta change {err:.3e} under refinement")));
    }
    Ok(v)
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("theta must lie in (0, 1), got {theta}")))
    }
}

/// `K(t) = x^2 t d / (1 + t d)` for a single mode with `D = d`.
pub fn scalar_k(d: f64, x_sq: f64, t: f64) -> f64 {
    x_sq * t * d / (1.0 + t * d)
}

/// Cost `|x0|^2 + t d |x1|^2` of splitting a scalar `x = x0 + x1`.
pub fn scalar_split_cost(d: f64, t: f64, x: C64, x1: C64) -> f64 {
    (x - x1).norm_sqr() + t * d * x1.norm_sqr()
}

/// Closed-form `K(t, f) = <tD (1 + tD)^{-1} f, f>` with `D = 1 + A^2`.
pub fn k_functional(dec: &SpectralDecomposition, t: f64, f: &SpinorField) -> Result<f64> {
    if !dec.is_complete() {
        return Err(Error::DecompositionIncomplete);
    }
    let c = dec.coefficients(f.values());
    Ok(c
        .iter()
        .zip(dec.eigenvalues())
        .map(|(c, l)| scalar_k(1.0 + l * l, c.norm_sqr(), t))
        .sum())
}

/// Cost of the decomposition `f = (f - f1) + f1` in spectral coordinates.
fn split_cost(values: &[f64], t: f64, c: &[C64], c1: &[C64]) -> f64 {
    c.iter()
        .zip(c1)
        .zip(values)
        .map(|((c, c1), l)| scalar_split_cost(1.0 + l * l, t, *c, *c1))
        .sum()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MinimalityReport {
    pub t: f64,
    pub closed_form: f64,
    /// Smallest cost among the random perturbations of the minimizer.
    pub best_perturbed: f64,
    pub trials: usize,
    pub beaten: bool,
}

/// Perturb the minimizing split `f1 = (1 + tD)^{-1} f` in random directions of
/// several sizes and record whether any cost falls below the closed form.
pub fn brute_force_minimality(
    dec: &SpectralDecomposition,
    t: f64,
    f: &SpinorField,
    trials: usize,
    seed: u64,
) -> Result<MinimalityReport> {
    let k = k_functional(dec, t, f)?;
    let values = dec.eigenvalues();
    let c = dec.coefficients(f.values());
    let c1: Vec<C64> = c.iter().zip(values).map(|(c, l)| c / (1.0 + t * (1.0 + l * l))).collect();
    let scale = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for i in 0..trials {
        let eps = scale * 10f64.powi(-((i % 6) as i32));
        let r = SpinorField::random(dec.grid().clone(), &mut rng);
        let rc = dec.coefficients(r.values());
        let rn = r.norm_l2();
        let trial: Vec<C64> = c1.iter().zip(&rc).map(|(a, b)| a + b * (eps / rn)).collect();
        best = best.min(split_cost(values, t, &c, &trial));
    }
    Ok(MinimalityReport {
        t,
        closed_form: k,
        best_perturbed: best,
        trials,
        beaten: best < k * (1.0 - 1e-12),
    })
}

/// Scalar version of [`brute_force_minimality`] with uniformly random splits.
pub fn scalar_brute_force(d: f64, x: C64, t: f64, trials: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let best = (0..trials)
        .map(|_| {
            let x1 = C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * x.norm();
            scalar_split_cost(d, t, x, x1)
        })
        .fold(f64::INFINITY, f64::min);
    (scalar_k(d, x.norm_sqr(), t), best)
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationReport {
    pub theta: f64,
    /// `int t^{-theta} K(t, f) dt / t`.
    pub lhs: f64,
    /// `C_theta <D^theta f, f>`.
    pub rhs: f64,
    pub ratio: f64,
    pub c_theta: f64,
    pub quadrature_change: f64,
    pub minimality: Vec<MinimalityReport>,
}

/// Compare the interpolation norm computed from the K-functional with the
/// spectral formula `C_theta <(1 + A^2)^theta f, f>`.
pub fn interpolation_identity_check(
    dec: &SpectralDecomposition,
    theta: f64,
    f: &SpinorField,
    grid: &LogGrid,
) -> Result<InterpolationReport> {
    check_theta(theta)?;
    if !dec.is_complete() {
        return Err(Error::DecompositionIncomplete);
    }
    let c = dec.coefficients(f.values());
    let mass: Vec<(f64, f64)> = c
        .iter()
        .zip(dec.eigenvalues())
        .map(|(c, l)| (1.0 + l * l, c.norm_sqr()))
        .collect();
    let (lhs, change) = grid
        .integrate_checked(|t| t.powf(-theta) * mass.iter().map(|&(d, m)| scalar_k(d, m, t)).sum::<f64>());
    if change > 1e-6 * lhs {
        return Err(Error::Quadrature(format!("K-integral change {change:.3e} under refinement")));
    }
    let ct = c_theta(theta, grid)?;
    let rhs = ct * mass.iter().map(|&(d, m)| d.powf(theta) * m).sum::<f64>();
    let minimality = [1e-4, 1e-2, 1.0, 1e2]
        .iter()
        .enumerate()
        .map(|(i, &t)| brute_force_minimality(dec, t, f, 60, i as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(InterpolationReport {
        theta,
        lhs,
        rhs,
        ratio: lhs / rhs,
        c_theta: ct,
        quadrature_change: change,
        minimality,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::dirac::{assemble, ProblemParameters};
    use crate::fields::GraphGrid;
    use crate::graph::{build_example, ExampleKind, PeriodicClosure};
    use crate::spectra::{decompose, EigenRequest};

    #[test]
    fn c_half_is_pi() {
        let c = c_theta(0.5, &LogGrid::default()).unwrap();
        assert!((c - PI).abs() < 1e-6, "{c}");
        // C_theta = pi / sin(pi theta)
        let c = c_theta(0.3, &LogGrid::default()).unwrap();
        assert!((c - PI / (0.3 * PI).sin()).abs() < 1e-4);
    }

    #[test]
    fn scalar_toy() {
        assert!((scalar_k(2.0, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        let (k, best) = scalar_brute_force(2.0, C64::new(1.0, 0.0), 1.0, 10_000, 5);
        assert!(best >= k);
        assert!(best - k < 1e-3);
    }

    #[test]
    fn identity_on_a_small_ring() {
        let g = build_example(ExampleKind::Chain).unwrap();
        let c = PeriodicClosure::new(&g, &[6]).unwrap();
        let grid = Arc::new(GraphGrid::periodic(&c, &[16]).unwrap());
        let op = assemble(&c, grid.clone(), &ProblemParameters::free(1.0).unwrap(), None).unwrap();
        assert!(op.dim() <= 200);
        let dec = decompose(&op, EigenRequest::All).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = SpinorField::random(grid, &mut rng);
        let r = interpolation_identity_check(&dec, 0.5, &f, &LogGrid::default()).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-3, "{r:?}");
        assert!(r.minimality.iter().all(|m| !m.beaten));
    }

    #[test]
    fn bad_theta() {
        assert!(c_theta(1.0, &LogGrid::default()).is_err());
        assert!(LogGrid::new(1.0, 0.5, 10).is_err());
    }
}

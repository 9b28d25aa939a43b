use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::decompose::SpectralDecomposition;
use crate::dirac::ProblemParameters;
use crate::error::{Error, Result};
use crate::fields::SpinorField;
use crate::C64;

fn require_complete(dec: &SpectralDecomposition) -> Result<()> {
    if dec.is_complete() {
        Ok(())
    } else {
        Err(Error::DecompositionIncomplete)
    }
}

fn coefficients_of(dec: &SpectralDecomposition, f: &SpinorField) -> Result<Vec<C64>> {
    if !dec.grid().same_layout(f.grid()) {
        return Err(Error::Input("field and decomposition live on different grids".into()));
    }
    Ok(dec.coefficients(f.values()))
}

/// `|A|^s f` by spectral calculus.
pub fn fractional_apply(dec: &SpectralDecomposition, s: f64, f: &SpinorField) -> Result<SpinorField> {
    require_complete(dec)?;
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Input(format!("fractional power must lie in (0, 1], got {s}")));
    }
    let c = coefficients_of(dec, f)?;
    let scaled: Vec<C64> = c
        .iter()
        .zip(dec.eigenvalues())
        .map(|(c, l)| c * l.abs().powf(s))
        .collect();
    SpinorField::from_values(dec.grid().clone(), dec.synthesize(&scaled))
}

/// Pieces of `f` on the positive and negative spectral subspaces.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplitNorms {
    /// `||f+||^2 = <|A| f+, f+>`.
    pub plus_sq: f64,
    pub minus_sq: f64,
    /// `|f+|_2^2`.
    pub l2_plus_sq: f64,
    pub l2_minus_sq: f64,
    /// Mass on eigenvalues within the zero tolerance.
    pub l2_zero_sq: f64,
}

impl SplitNorms {
    pub fn energy_sq(&self) -> f64 {
        self.plus_sq + self.minus_sq
    }

    pub fn l2_sq(&self) -> f64 {
        self.l2_plus_sq + self.l2_minus_sq + self.l2_zero_sq
    }
}

pub fn split_norms(dec: &SpectralDecomposition, f: &SpinorField) -> Result<SplitNorms> {
    require_complete(dec)?;
    let c = coefficients_of(dec, f)?;
    Ok(split_from_coefficients(dec, &c))
}

fn split_from_coefficients(dec: &SpectralDecomposition, c: &[C64]) -> SplitNorms {
    let tol = dec.zero_tol();
    let mut s = SplitNorms {
        plus_sq: 0.0,
        minus_sq: 0.0,
        l2_plus_sq: 0.0,
        l2_minus_sq: 0.0,
        l2_zero_sq: 0.0,
    };
    for (c, &l) in c.iter().zip(dec.eigenvalues()) {
        let m = c.norm_sqr();
        if l > tol {
            s.plus_sq += l * m;
            s.l2_plus_sq += m;
        } else if l < -tol {
            s.minus_sq += -l * m;
            s.l2_minus_sq += m;
        } else {
            s.l2_zero_sq += m;
        }
    }
    s
}

/// `||f||^2 = <|A| f, f>`.
pub fn energy_norm_sq(dec: &SpectralDecomposition, f: &SpinorField) -> Result<f64> {
    split_norms(dec, f).map(|s| s.energy_sq())
}

/// Spectral window `(gamma0, gamma]` and the eigen-indices inside it.
#[derive(Clone, Debug, Serialize)]
pub struct SplitParameters {
    pub gamma0: f64,
    pub gamma: f64,
    pub window: Vec<usize>,
}

impl SplitParameters {
    pub fn new(dec: &SpectralDecomposition, gamma0: f64, gamma: f64) -> Result<Self> {
        if !(gamma0 < gamma) {
            return Err(Error::Input(format!("need gamma0 < gamma, got {gamma0} and {gamma}")));
        }
        let window = dec
            .eigenvalues()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > gamma0 && l <= gamma)
            .map(|(i, _)| i)
            .collect();
        Ok(SplitParameters { gamma0, gamma, window })
    }

    /// Window used by the linking construction: `gamma0 = a + |omega| + sup V`
    /// and a caller-chosen `gamma > gamma0`.
    pub fn for_linking(dec: &SpectralDecomposition, p: &ProblemParameters, sup_v: f64, gamma: f64) -> Result<Self> {
        let gamma0 = p.a + p.omega.abs() + sup_v;
        if !(p.a + sup_v < gamma) {
            return Err(Error::Input(format!("gamma = {gamma} must exceed a + sup V = {}", p.a + sup_v)));
        }
        Self::new(dec, gamma0, gamma)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub samples: usize,
    /// Smallest `||u||^2 / (a |u|_2^2)` over the corpus.
    pub coercivity_min_ratio: f64,
    pub coercivity_pass: bool,
    /// Largest relative defect of `||u+||^2 - ||u-||^2 = <Au, u>`.
    pub split_identity_defect: f64,
    /// Largest relative violation of the sandwich bounds on `Y+` and `Y-`.
    pub sandwich_violation: f64,
    pub sandwich_pass: bool,
    pub window_size: usize,
    pub window_violation: f64,
    pub window_pass: bool,
}

const REL_TOL: f64 = 1e-10;

fn random_coefficients(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect()
}

/// Random-corpus checks of the quadratic-form inequalities: `a|u|_2^2 <= ||u||^2`,
/// the sandwich `((a-|w|)/a)||u||^2 <= ||u||^2 +- w|u|_2^2 <= ((a+|w|)/a)||u||^2`
/// on `Y+-`, and `gamma0 |u|_2^2 <= ||u||^2 <= gamma |u|_2^2` on the window.
pub fn check_norm_inequalities(
    dec: &SpectralDecomposition,
    p: &ProblemParameters,
    split: Option<&SplitParameters>,
    samples: usize,
    seed: u64,
) -> Result<NormReport> {
    require_complete(dec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, w) = (p.a, p.omega);
    let values = dec.eigenvalues();
    let mut coercivity_min_ratio = f64::INFINITY;
    let mut split_identity_defect: f64 = 0.0;
    let mut sandwich_violation: f64 = 0.0;
    let mut window_violation: f64 = 0.0;
    for _ in 0..samples {
        let f = SpinorField::random_smooth(dec.grid().clone(), &mut rng);
        let c = dec.coefficients(f.values());
        let s = split_from_coefficients(dec, &c);
        coercivity_min_ratio = coercivity_min_ratio.min(s.energy_sq() / (a * s.l2_sq()));
        let form: f64 = c.iter().zip(values).map(|(c, l)| l * c.norm_sqr()).sum();
        split_identity_defect =
            split_identity_defect.max((s.plus_sq - s.minus_sq - form).abs() / s.energy_sq());

        // Y+ and Y- pieces separately, sign +1 for Y+.
        for (sign, norm, mass) in [(1.0, s.plus_sq, s.l2_plus_sq), (-1.0, s.minus_sq, s.l2_minus_sq)] {
            if norm == 0.0 {
                continue;
            }
            let mid = norm + sign * w * mass;
            let lo = (a - w.abs()) / a * norm;
            let hi = (a + w.abs()) / a * norm;
            sandwich_violation = sandwich_violation.max((lo - mid) / norm).max((mid - hi) / norm);
        }

        if let Some(sp) = split {
            if !sp.window.is_empty() {
                let r = random_coefficients(sp.window.len(), &mut rng);
                let (mut norm, mut mass) = (0.0, 0.0);
                for (&i, r) in sp.window.iter().zip(&r) {
                    norm += values[i].abs() * r.norm_sqr();
                    mass += r.norm_sqr();
                }
                window_violation = window_violation
                    .max((sp.gamma0 * mass - norm) / norm)
                    .max((norm - sp.gamma * mass) / norm);
            }
        }
    }
    Ok(NormReport {
        samples,
        coercivity_min_ratio,
        coercivity_pass: coercivity_min_ratio >= 1.0 - REL_TOL,
        split_identity_defect,
        sandwich_violation,
        sandwich_pass: sandwich_violation <= REL_TOL,
        window_size: split.map_or(0, |s| s.window.len()),
        window_violation,
        window_pass: window_violation <= REL_TOL,
    })
}

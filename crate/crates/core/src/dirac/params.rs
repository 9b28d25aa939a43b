use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Cell-periodic potential, given on the edges of the fundamental cell.
#[derive(Clone)]
pub enum Potential {
    Zero,
    Constant(f64),
    /// One value per cell edge.
    PerEdge(Vec<f64>),
    /// `amplitude * (1 + cos(2 pi s / l_e))` on every edge.
    Cosine { amplitude: f64 },
    /// Arbitrary profile `(cell edge, arclength) -> V`.
    Profile(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Constant(v) => write!(f, "Constant({v})"),
            Potential::PerEdge(v) => write!(f, "PerEdge({v:?})"),
            Potential::Cosine { amplitude } => write!(f, "Cosine {{ amplitude: {amplitude} }}"),
            Potential::Profile(_) => write!(f, "Profile(..)"),
        }
    }
}

impl Potential {
    /// Value at arclength `s` on a copy of cell edge `edge` of length `length`.
    pub fn value(&self, edge: usize, s: f64, length: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant(v) => *v,
            Potential::PerEdge(v) => v[edge],
            Potential::Cosine { amplitude } => {
                amplitude * (1.0 + (std::f64::consts::TAU * s / length).cos())
            }
            Potential::Profile(f) => f(edge, s),
        }
    }

    /// Per-edge constants, when the potential is piecewise constant.
    pub fn piecewise_constant(&self, cell_edges: usize) -> Option<Vec<f64>> {
        match self {
            Potential::Zero => Some(vec![0.0; cell_edges]),
            Potential::Constant(v) => Some(vec![*v; cell_edges]),
            Potential::PerEdge(v) => Some(v.clone()),
            _ => None,
        }
    }

    pub(crate) fn check_edges(&self, cell_edges: usize) -> Result<()> {
        if let Potential::PerEdge(v) = self {
            if v.len() != cell_edges {
                return Err(Error::Parameter(format!(
                    "potential has {} edge values, cell has {} edges",
                    v.len(),
                    cell_edges
                )));
            }
        }
        Ok(())
    }
}

/// Mass, frequency and potential of the reduced equation.
#[derive(Clone, Debug)]
pub struct ProblemParameters {
    pub a: f64,
    pub omega: f64,
    pub potential: Potential,
}

impl ProblemParameters {
    /// Rejects `a <= 0` and non-finite values; `|omega| < a` is reported as a
    /// hypothesis failure.
    pub fn new(a: f64, omega: f64, potential: Potential) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Parameter(format!("mass a = {a} must be positive")));
        }
        if !omega.is_finite() {
            return Err(Error::Parameter("omega must be finite".into()));
        }
        if omega.abs() >= a {
            return Err(Error::Hypothesis {
                name: "omega".into(),
                detail: format!("omega = {omega} is outside (-a, a) = ({}, {a})", -a),
            });
        }
        match &potential {
            Potential::Constant(v) if !v.is_finite() => {
                return Err(Error::Parameter("potential must be finite".into()))
            }
            Potential::PerEdge(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(Error::Parameter("potential must be finite".into()))
            }
            Potential::Cosine { amplitude } if !amplitude.is_finite() => {
                return Err(Error::Parameter("potential must be finite".into()))
            }
            _ => {}
        }
        Ok(ProblemParameters { a, omega, potential })
    }

    pub fn free(a: f64) -> Result<Self> {
        Self::new(a, 0.0, Potential::Zero)
    }
}

/// Physical constants of the unreduced equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalScaling {
    pub hbar: f64,
    pub c: f64,
    pub m: f64,
    pub vartheta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingReduction {
    pub a: f64,
    pub omega: f64,
    /// Whether `omega` lies strictly inside `(-a, a)`.
    pub omega_admissible: bool,
}

/// `a = m c^2 / (hbar c)` and `omega = vartheta / c`.
pub fn reduce_scaling(s: &PhysicalScaling) -> Result<ScalingReduction> {
    for (name, v) in [("hbar", s.hbar), ("c", s.c), ("m", s.m)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parameter(format!("{name} = {v} must be positive")));
        }
    }
    if !s.vartheta.is_finite() {
        return Err(Error::Parameter("vartheta must be finite".into()));
    }
    let a = s.m * s.c * s.c / (s.hbar * s.c);
    let omega = s.vartheta / s.c;
    Ok(ScalingReduction {
        a,
        omega,
        omega_admissible: omega.abs() < a,
    })
}

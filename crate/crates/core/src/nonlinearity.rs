//! Built-in nonlinearities `F(x, u)` and sampled checks of the structural
//! hypotheses used by the existence theory.
//!
//! Both families are radial, `F(x, u) = g_x(|u|)`, with the position entering
//! only through a coefficient that is constant on each cell edge. Gradients
//! are taken on `C^2 = R^4` with the real scalar product
//! `u . v = Re(u1* v1 + u2* v2)`, ordered `(Re u1, Im u1, Re u2, Im u2)`.

use std::fmt;

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dirac::ProblemParameters;
use crate::error::{Error, Result};
use crate::graph::PeriodicGraph;
use crate::spectra::sup_potential;
use crate::C64;

/// A coefficient that is constant on every edge of the fundamental cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coefficient {
    Constant(f64),
    PerEdge(Vec<f64>),
}

impl Coefficient {
    pub fn values(&self, cell_edges: usize) -> Result<Vec<f64>> {
        let v = match self {
            Coefficient::Constant(b) => vec![*b; cell_edges],
            Coefficient::PerEdge(v) if v.len() == cell_edges => v.clone(),
            Coefficient::PerEdge(v) => {
                return Err(Error::Input(format!(
                    "coefficient has {} entries for {cell_edges} cell edges",
                    v.len()
                )))
            }
        };
        if v.iter().any(|b| !b.is_finite()) {
            return Err(Error::Input("coefficient must be finite".into()));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `F = |u|^p / p`.
    Power { p: f64 },
    /// `F = b (|u|^2/2 - |u| + ln(1 + |u|))`.
    AsymLinear { b: Coefficient },
}

/// Structural exponents and fitted constants of a nonlinearity.
///
/// Exponents are fixed by the family; the constants are the tightest values
/// on the default sampling grid, loosened by 10%.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Metadata {
    pub kappa: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub c1: f64,
    pub nu: f64,
    #[serde(rename = "C1")]
    pub big_c1: f64,
    pub sigma: f64,
    pub r: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Power(f64),
    AsymLinear,
}

/// Radial profile `g(r)` with `phi = g'(r)/r` and `dphi = phi'(r)/r`, so that
/// `F_u = phi u` and `F_uu = phi I + dphi x x^T`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Radial {
    pub g: f64,
    pub phi: f64,
    pub dphi: f64,
    pub fhat: f64,
}

#[derive(Clone, Debug)]
pub struct Nonlinearity {
    kind: Kind,
    spec: NonlinearitySpec,
    b: Vec<f64>,
    meta: Metadata,
}

/// `p` must lie in `(2, 3)` so that `|F_uu| <= C (1 + |u|^nu)` with `nu < 1`.
pub fn make_power(p: f64) -> Result<Nonlinearity> {
    if !(p > 2.0 && p < 3.0) {
        return Err(Error::Hypothesis {
            name: Hypothesis::F5.to_string(),
            detail: format!("power p = {p} gives nu = p - 2 outside (0, 1); need 2 < p < 3"),
        });
    }
    let mut nl = Nonlinearity {
        kind: Kind::Power(p),
        spec: NonlinearitySpec::Power { p },
        b: Vec::new(),
        meta: Metadata {
            kappa: 1.0,
            big_r: 1.0,
            c1: 0.0,
            nu: p - 2.0,
            big_c1: 0.0,
            sigma: p / (p - 2.0),
            r: 1.0,
            c2: 0.0,
            c3: 0.0,
        },
    };
    nl.fit_constants();
    Ok(nl)
}

/// Asymptotically linear family with slope `b`; requires
/// `inf b > sup V + a + omega` on the cell.
pub fn make_asym_linear(b: &Coefficient, g: &PeriodicGraph, p: &ProblemParameters) -> Result<Nonlinearity> {
    let values = b.values(g.cell().num_edges())?;
    let inf_b = values.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = sup_potential(g, p) + p.a + p.omega;
    if !(inf_b > bound) {
        return Err(Error::Hypothesis {
            name: Hypothesis::F3.to_string(),
            detail: format!("inf b = {inf_b} must exceed sup V + a + omega = {bound}"),
        });
    }
    let mut nl = Nonlinearity {
        kind: Kind::AsymLinear,
        spec: NonlinearitySpec::AsymLinear { b: b.clone() },
        b: values,
        meta: Metadata {
            kappa: 1.0,
            big_r: 1.0,
            c1: 0.0,
            nu: 0.5,
            big_c1: 0.0,
            sigma: 2.0,
            r: 1.0,
            c2: 0.0,
            c3: 0.0,
        },
    };
    nl.fit_constants();
    Ok(nl)
}

// Series tails sum_{k>=3} (-1)^(k-1) c_k r^k for small r.
fn alternating_tail(r: f64, coef: impl Fn(f64) -> f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = r * r * r;
    for k in 3..=12 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * coef(k as f64) * pow;
        pow *= r;
    }
    sum
}

const SERIES_BELOW: f64 = 1e-2;

impl Nonlinearity {
    pub fn from_spec(spec: &NonlinearitySpec, g: &PeriodicGraph, p: &ProblemParameters) -> Result<Self> {
        match spec {
            NonlinearitySpec::Power { p } => make_power(*p),
            NonlinearitySpec::AsymLinear { b } => make_asym_linear(b, g, p),
        }
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn metadata(&self) -> &Metadata {
        &self.meta
    }

    /// Linear coefficient at infinity, if the family has one.
    pub fn linear_coefficient(&self) -> Option<&[f64]> {
        match self.kind {
            Kind::AsymLinear => Some(&self.b),
            Kind::Power(_) => None,
        }
    }

    /// Both built-in families depend on `|u|` only.
    pub fn is_even(&self) -> bool {
        true
    }

    /// Hypotheses of the existence theorem that applies to this family.
    pub fn theorem_set(&self) -> &'static [Hypothesis] {
        match self.kind {
            Kind::Power(_) => &Hypothesis::SUPERQUADRATIC,
            Kind::AsymLinear => &Hypothesis::ASYMPTOTICALLY_LINEAR,
        }
    }

    fn coefficient(&self, edge: usize) -> f64 {
        match self.kind {
            Kind::Power(_) => 1.0,
            Kind::AsymLinear => self.b[edge % self.b.len()],
        }
    }

    pub(crate) fn radial(&self, edge: usize, r: f64) -> Radial {
        match self.kind {
            Kind::Power(p) => {
                if r == 0.0 {
                    return Radial { g: 0.0, phi: 0.0, dphi: 0.0, fhat: 0.0 };
                }
                let rp = r.powf(p);
                Radial {
                    g: rp / p,
                    phi: rp / (r * r),
                    dphi: (p - 2.0) * rp / (r * r * r * r),
                    fhat: (0.5 - 1.0 / p) * rp,
                }
            }
            Kind::AsymLinear => {
                let b = self.coefficient(edge);
                if r == 0.0 {
                    return Radial { g: 0.0, phi: 0.0, dphi: 0.0, fhat: 0.0 };
                }
                let (g, fhat) = if r < SERIES_BELOW {
                    (
                        alternating_tail(r, |k| 1.0 / k),
                        alternating_tail(r, |k| 0.5 - 1.0 / k),
                    )
                } else {
                    let l = r.ln_1p();
                    (0.5 * r * r - r + l, r * (r + 2.0) / (2.0 * (1.0 + r)) - l)
                };
                let q = 1.0 + r;
                Radial {
                    g: b * g,
                    phi: b * r / q,
                    dphi: b / (r * q * q),
                    fhat: b * fhat,
                }
            }
        }
    }

    pub fn f(&self, edge: usize, u: [C64; 2]) -> f64 {
        self.radial(edge, modulus(u)).g
    }

    pub fn f_u(&self, edge: usize, u: [C64; 2]) -> [C64; 2] {
        let phi = self.radial(edge, modulus(u)).phi;
        [u[0] * phi, u[1] * phi]
    }

    pub fn f_uu(&self, edge: usize, u: [C64; 2]) -> [[f64; 4]; 4] {
        let r = modulus(u);
        let rad = self.radial(edge, r);
        let x = real4(u);
        let mut h = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                h[i][j] = rad.dphi * x[i] * x[j];
            }
            h[i][i] += rad.phi;
        }
        h
    }

    /// `Fhat = F_u . u / 2 - F`.
    pub fn fhat(&self, edge: usize, u: [C64; 2]) -> f64 {
        self.radial(edge, modulus(u)).fhat
    }

    fn edge_count(&self) -> usize {
        self.b.len().max(1)
    }

    fn fit_constants(&mut self) {
        let radii = SampleSpec::default().radii();
        let m = self.meta;
        let (mut c1, mut c2, mut c3, mut big_c1) = (f64::INFINITY, f64::INFINITY, 0.0f64, 0.0f64);
        for e in 0..self.edge_count() {
            for &r in &radii {
                let rad = self.radial(e, r);
                let fu = rad.phi * r;
                let huu = rad.phi.abs().max((rad.phi + rad.dphi * r * r).abs());
                big_c1 = big_c1.max(huu / (1.0 + r.powf(m.nu)));
                if r >= m.big_r {
                    c1 = c1.min(rad.fhat / r.powf(m.kappa));
                }
                if r >= m.r {
                    c2 = c2.min(rad.fhat / (r * r));
                    c3 = c3.max(fu.powf(m.sigma) / (rad.fhat * r.powf(m.sigma)));
                }
            }
        }
        self.meta.c1 = 0.9 * c1;
        self.meta.c2 = 0.9 * c2;
        self.meta.c3 = 1.1 * c3;
        self.meta.big_c1 = 1.1 * big_c1;
    }
}

fn modulus(u: [C64; 2]) -> f64 {
    u[0].norm().hypot(u[1].norm())
}

fn real4(u: [C64; 2]) -> [f64; 4] {
    [u[0].re, u[0].im, u[1].re, u[1].im]
}

fn from_real4(x: [f64; 4]) -> [C64; 2] {
    [C64::new(x[0], x[1]), C64::new(x[2], x[3])]
}

/// Real scalar product on `C^2`.
pub fn real_dot(u: [C64; 2], v: [C64; 2]) -> f64 {
    (u[0].conj() * v[0] + u[1].conj() * v[1]).re
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    #[serde(rename = "omega")]
    Omega,
    V1,
    F0,
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 10] = [
        Hypothesis::Omega,
        Hypothesis::V1,
        Hypothesis::F0,
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F3,
        Hypothesis::F4,
        Hypothesis::F5,
        Hypothesis::F6,
        Hypothesis::F7,
    ];

    /// Assumptions for the asymptotically linear existence result.
    pub const ASYMPTOTICALLY_LINEAR: [Hypothesis; 8] = [
        Hypothesis::Omega,
        Hypothesis::V1,
        Hypothesis::F0,
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F3,
        Hypothesis::F4,
        Hypothesis::F5,
    ];

    /// Assumptions for the superquadratic existence result.
    pub const SUPERQUADRATIC: [Hypothesis; 8] = [
        Hypothesis::Omega,
        Hypothesis::V1,
        Hypothesis::F0,
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F5,
        Hypothesis::F6,
        Hypothesis::F7,
    ];

    pub fn parse(s: &str) -> Option<Hypothesis> {
        Hypothesis::ALL.into_iter().find(|h| h.to_string() == s)
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::Omega => "omega",
            Hypothesis::V1 => "V1",
            Hypothesis::F0 => "F0",
            Hypothesis::F1 => "F1",
            Hypothesis::F2 => "F2",
            Hypothesis::F3 => "F3",
            Hypothesis::F4 => "F4",
            Hypothesis::F5 => "F5",
            Hypothesis::F6 => "F6",
            Hypothesis::F7 => "F7",
        };
        f.write_str(s)
    }
}

/// Sampling grid for the hypothesis checks: log-spaced moduli times random
/// directions on the unit sphere of `C^2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { r_min: 1e-6, r_max: 1e6, radii: 200, directions: 16, seed: 0 }
    }
}

impl SampleSpec {
    pub fn radii(&self) -> Vec<f64> {
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        let n = self.radii.max(2) - 1;
        (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
    }

    fn directions(&self) -> Vec<[C64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = vec![[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]];
        while out.len() < self.directions.max(1) {
            let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            out.push(from_real4(x.map(|v| v / n)));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Witness {
    pub edge: usize,
    pub u: [C64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub pass: bool,
    /// Distance from failure in the natural units of the check; negative
    /// when it fails.
    pub margin: f64,
    pub witness: Option<Witness>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub pass: bool,
}

impl HypothesisReport {
    pub fn failed(&self) -> Vec<Hypothesis> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.hypothesis).collect()
    }

    pub fn get(&self, h: Hypothesis) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.hypothesis == h)
    }
}

// Minimum of `rhs - lhs` relative to `|rhs|`, with the worst sample.
struct Inequality {
    margin: f64,
    witness: Option<Witness>,
}

impl Inequality {
    fn new() -> Self {
        Inequality { margin: f64::INFINITY, witness: None }
    }

    fn record(&mut self, lhs: f64, rhs: f64, edge: usize, u: [C64; 2]) {
        let m = if lhs.is_finite() && rhs.is_finite() {
            (rhs - lhs) / rhs.abs().max(f64::MIN_POSITIVE)
        } else {
            f64::NEG_INFINITY
        };
        if m < self.margin {
            self.margin = m;
            self.witness = Some(Witness { edge, u });
        }
    }

    fn holds(&self) -> bool {
        self.margin >= -1e-12
    }
}

const TREND_SLOPE: f64 = 0.05;

/// Log-log slope of `q(r)` over the decade at one end of the grid and
/// whether `q` is monotone in the direction of the slope there.
fn end_trend(radii: &[f64], q: &[f64], low_end: bool) -> (f64, bool) {
    let n = radii.len();
    let decade = radii.iter().filter(|&&r| r <= radii[0] * 10.0).count().max(2);
    let idx: Vec<usize> = if low_end { (0..decade).collect() } else { (n - decade..n).collect() };
    let (i0, i1) = (idx[0], idx[idx.len() - 1]);
    let slope = (q[i1].ln() - q[i0].ln()) / (radii[i1].ln() - radii[i0].ln());
    let tol = 1e-12;
    let monotone = idx.windows(2).all(|w| {
        let (a, b) = (q[w[0]], q[w[1]]);
        if slope >= 0.0 {
            b >= a * (1.0 - tol)
        } else {
            b <= a * (1.0 + tol)
        }
    });
    (slope, monotone)
}

fn spectral_norm4(h: &[[f64; 4]; 4]) -> f64 {
    let m = Mat::<f64>::from_fn(4, 4, |i, j| h[i][j]);
    m.self_adjoint_eigenvalues(Side::Lower)
        .map(|v| v.iter().map(|x| x.abs()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// Check the requested hypotheses on the sampling grid with the stored
/// constants. Decay and growth conditions at `0` and `infinity` are judged
/// by the log-log trend over the outermost decade of the grid.
pub fn check_hypotheses(
    nl: &Nonlinearity,
    which: &[Hypothesis],
    spec: &SampleSpec,
    g: &PeriodicGraph,
    p: &ProblemParameters,
) -> HypothesisReport {
    let radii = spec.radii();
    let dirs = spec.directions();
    let m = nl.meta;
    let edges = nl.edge_count();
    let samples: Vec<(usize, f64, [C64; 2])> = (0..edges)
        .flat_map(|e| {
            let dirs = &dirs;
            radii.iter().flat_map(move |&r| dirs.iter().map(move |d| (e, r, [d[0] * r, d[1] * r])))
        })
        .collect();
    // Worst trend over the edges at one end of the grid.
    let trend = |q: &dyn Fn(usize, f64) -> f64, low_end: bool| -> (f64, bool) {
        (0..edges)
            .map(|e| {
                let qs: Vec<f64> = radii.iter().map(|&r| q(e, r)).collect();
                end_trend(&radii, &qs, low_end)
            })
            .fold((f64::INFINITY, true), |(s, ok), (s1, ok1)| (s.min(s1), ok && ok1))
    };
    let positive_fhat = || {
        let mut w = Inequality::new();
        for &(e, _, u) in &samples {
            w.record(0.0, nl.fhat(e, u), e, u);
        }
        w
    };

    let checks = which
        .iter()
        .map(|&h| match h {
            Hypothesis::Omega => {
                let margin = p.a - p.omega.abs();
                HypothesisCheck {
                    hypothesis: h,
                    pass: margin > 0.0,
                    margin,
                    witness: None,
                    detail: format!("|omega| = {} against a = {}", p.omega.abs(), p.a),
                }
            }
            Hypothesis::V1 => {
                let (mut inf, mut sup) = (f64::INFINITY, f64::NEG_INFINITY);
                for (e, edge) in g.cell().edges().iter().enumerate() {
                    for i in 0..=1000 {
                        let v = p.potential.value(e, edge.length * i as f64 / 1000.0, edge.length);
                        inf = inf.min(v);
                        sup = sup.max(v);
                    }
                }
                let ok = inf >= 0.0 && sup.is_finite() && p.potential.check_edges(g.cell().num_edges()).is_ok();
                HypothesisCheck {
                    hypothesis: h,
                    pass: ok,
                    margin: inf,
                    witness: None,
                    detail: format!("V sampled in [{inf}, {sup}], defined per cell edge"),
                }
            }
            Hypothesis::F0 => {
                let mut w = Inequality::new();
                for &(e, _, u) in &samples {
                    let f = nl.f(e, u);
                    let fu = nl.f_u(e, u);
                    let finite = fu.iter().all(|z| z.re.is_finite() && z.im.is_finite());
                    w.record(0.0, if finite { f } else { f64::NAN }, e, u);
                }
                HypothesisCheck {
                    hypothesis: h,
                    pass: w.holds(),
                    margin: w.margin,
                    witness: (!w.holds()).then_some(w.witness).flatten(),
                    detail: "F >= 0 with finite gradient on every sample".into(),
                }
            }
            Hypothesis::F1 => HypothesisCheck {
                hypothesis: h,
                pass: true,
                margin: 0.0,
                witness: None,
                detail: "F depends on position only through per-cell-edge coefficients".into(),
            },
            Hypothesis::F2 => {
                let (slope, mono) = trend(&|e, r| nl.radial(e, r).phi, true);
                HypothesisCheck {
                    hypothesis: h,
                    pass: slope >= TREND_SLOPE && mono,
                    margin: slope - TREND_SLOPE,
                    witness: None,
                    detail: format!("|F_u|/|u| has log-log slope {slope:.4} near 0 (monotone: {mono})"),
                }
            }
            Hypothesis::F3 => match nl.linear_coefficient() {
                None => HypothesisCheck {
                    hypothesis: h,
                    pass: false,
                    margin: f64::NEG_INFINITY,
                    witness: None,
                    detail: "no asymptotically linear coefficient".into(),
                },
                Some(b) => {
                    let (slope, mono) = trend(&|e, r| (nl.radial(e, r).phi - b[e]).abs(), false);
                    let inf_b = b.iter().copied().fold(f64::INFINITY, f64::min);
                    let gap = inf_b - (sup_potential(g, p) + p.a + p.omega);
                    let ok = slope <= -TREND_SLOPE && mono && gap > 0.0;
                    HypothesisCheck {
                        hypothesis: h,
                        pass: ok,
                        margin: gap.min(-slope - TREND_SLOPE),
                        witness: None,
                        detail: format!(
                            "|F_u - b u|/|u| slope {slope:.4} at infinity; inf b - (sup V + a + omega) = {gap:.6}"
                        ),
                    }
                }
            },
            Hypothesis::F4 => {
                let pos = positive_fhat();
                let mut w = Inequality::new();
                for &(e, r, u) in &samples {
                    if r >= m.big_r {
                        w.record(m.c1 * r.powf(m.kappa), nl.fhat(e, u), e, u);
                    }
                }
                let (slope, _) = trend(&|e, r| nl.radial(e, r).fhat / r.powf(m.kappa), false);
                let ok = pos.margin > 0.0 && w.holds() && m.kappa > 0.0 && m.kappa < 2.0 && slope > -TREND_SLOPE;
                HypothesisCheck {
                    hypothesis: h,
                    pass: ok,
                    margin: w.margin.min(pos.margin),
                    witness: if ok { None } else { w.witness.or(pos.witness) },
                    detail: format!(
                        "Fhat >= {:.4e} |u|^{} for |u| >= {}; Fhat/|u|^kappa slope {slope:.4} at infinity",
                        m.c1, m.kappa, m.big_r
                    ),
                }
            }
            Hypothesis::F5 => {
                let mut w = Inequality::new();
                for &(e, r, u) in &samples {
                    w.record(spectral_norm4(&nl.f_uu(e, u)), m.big_c1 * (1.0 + r.powf(m.nu)), e, u);
                }
                let ok = w.holds() && m.nu > 0.0 && m.nu < 1.0;
                HypothesisCheck {
                    hypothesis: h,
                    pass: ok,
                    margin: w.margin,
                    witness: if ok { None } else { w.witness },
                    detail: format!("|F_uu| <= {:.4} (1 + |u|^{})", m.big_c1, m.nu),
                }
            }
            Hypothesis::F6 => {
                let (slope, mono) = trend(&|e, r| nl.radial(e, r).g / (r * r), false);
                HypothesisCheck {
                    hypothesis: h,
                    pass: slope >= TREND_SLOPE && mono,
                    margin: slope - TREND_SLOPE,
                    witness: None,
                    detail: format!("F/|u|^2 has log-log slope {slope:.4} at infinity (monotone: {mono})"),
                }
            }
            Hypothesis::F7 => {
                let pos = positive_fhat();
                let mut lower = Inequality::new();
                let mut upper = Inequality::new();
                for &(e, r, u) in &samples {
                    if r >= m.r {
                        let fhat = nl.fhat(e, u);
                        let fu = nl.f_u(e, u);
                        lower.record(m.c2 * r * r, fhat, e, u);
                        upper.record(modulus(fu).powf(m.sigma), m.c3 * fhat * r.powf(m.sigma), e, u);
                    }
                }
                let (slope, _) = trend(&|e, r| nl.radial(e, r).fhat / (r * r), false);
                let ok = pos.margin > 0.0
                    && lower.holds()
                    && upper.holds()
                    && m.sigma > 1.0
                    && slope > -TREND_SLOPE;
                HypothesisCheck {
                    hypothesis: h,
                    pass: ok,
                    margin: lower.margin.min(upper.margin).min(pos.margin).min(slope + TREND_SLOPE),
                    witness: if ok { None } else { lower.witness.or(upper.witness) },
                    detail: format!(
                        "Fhat >= {:.4e}|u|^2 and |F_u|^{} <= {:.4} Fhat |u|^{} for |u| >= {}; Fhat/|u|^2 slope {slope:.4}",
                        m.c2, m.sigma, m.c3, m.sigma, m.r
                    ),
                }
            }
        })
        .collect::<Vec<_>>();
    let pass = checks.iter().all(|c| c.pass);
    HypothesisReport { checks, pass }
}

/// Largest relative defect of central differences of `F` against `F_u` and
/// of `F_u` against `F_uu`.
pub fn hessian_consistency(nl: &Nonlinearity, samples: &[(usize, [C64; 2])]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(e, u) in samples {
        let x = real4(u);
        let r = modulus(u);
        let eps = 1e-5 * r.max(1e-3);
        let grad = real4(nl.f_u(e, u));
        let hess = nl.f_uu(e, u);
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let hnorm = spectral_norm4(&hess);
        for k in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += eps;
            xm[k] -= eps;
            let (up, um) = (from_real4(xp), from_real4(xm));
            let fd = (nl.f(e, up) - nl.f(e, um)) / (2.0 * eps);
            worst = worst.max((fd - grad[k]).abs() / gnorm.max(f64::MIN_POSITIVE));
            let gp = real4(nl.f_u(e, up));
            let gm = real4(nl.f_u(e, um));
            for j in 0..4 {
                let fd = (gp[j] - gm[j]) / (2.0 * eps);
                worst = worst.max((fd - hess[j][k]).abs() / hnorm.max(f64::MIN_POSITIVE));
            }
        }
    }
    worst
}

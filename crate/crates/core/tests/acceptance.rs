//! Acceptance gate. Prints one line per criterion and exits non-zero if any
//! criterion fails. Runtime limits count toward the verdict.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dirac_graph::dirac::{assemble, Potential, ProblemParameters};
use dirac_graph::fields::{GraphGrid, SpinorField};
use dirac_graph::graph::{build_example, orbit_translate, Edge, ExampleKind, MetricGraph, PeriodicClosure, PointSource};
use dirac_graph::nonlinearity::{check_hypotheses, make_asym_linear, make_power, Coefficient, Hypothesis, SampleSpec};
use dirac_graph::spectra::{
    band_sweep, check_norm_inequalities, cutoff_test_functions, decompose, eigenvalues, interpolation_identity_check,
    secular_bands, sup_potential, theta_grid, EigenRequest, LogGrid, SecularOptions, SplitParameters,
};
use dirac_graph::variational::{
    action_quadratic, gradient, linking_diagnostics, orbit_distance, phase_aligned_distance, restrict_to_coarse,
    solve_bound_state, ActionContext, BoundState, Initialization, SolverOptions,
};
use dirac_graph::{Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAP_TOL: f64 = 5e-3;
const FLOQUET_REL: f64 = 1e-9;
const SECULAR_TOL: f64 = 1e-6;
const TRANSPARENCY_TOL: f64 = 1e-12;
const RATIO_BAND: (f64, f64) = (0.999, 1.001);
const C_HALF_TOL: f64 = 1e-6;
const CUTOFF_FACTOR: (f64, f64) = (1.6, 2.4);
const CUTOFF_SLACK: f64 = 0.05;
const FD_REL: f64 = 1e-6;
const FD_EPS: f64 = 1e-5;
const STATE_RESIDUAL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-8;
const DISTINCT: f64 = 0.1;
const DISTINCT_ACTION: f64 = 1e-4;
const ORBIT_ZERO: f64 = 1e-10;
const SLOPE_TOL: f64 = 0.1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn chain_ring(cells: usize) -> PeriodicClosure {
    PeriodicClosure::new(&build_example(ExampleKind::Chain).unwrap(), &[cells]).unwrap()
}

fn decorated() -> ExampleKind {
    ExampleKind::DecoratedChain { stub_length: 1.0 }
}

fn min_abs(values: &[f64]) -> f64 {
    values.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
}

fn spectral_gap() -> Result<Verdict> {
    let c = chain_ring(16);
    let grid = Arc::new(GraphGrid::periodic(&c, &[64])?);
    let mut out = Vec::new();
    for (v, expect) in [(0.0, 1.0), (0.5, 1.5)] {
        let p = ProblemParameters::new(1.0, 0.0, Potential::Constant(v))?;
        let op = assemble(&c, grid.clone(), &p, None)?;
        out.push((expect, min_abs(&eigenvalues(&op, EigenRequest::Count(8))?)));
    }
    let pass = out.iter().all(|(e, m)| (m - e).abs() <= GAP_TOL);
    verdict(pass, format!("min|lambda| = {:.6} (V=0), {:.6} (V=0.5)", out[0].1, out[1].1))
}

fn floquet_consistency() -> Result<Verdict> {
    let g = build_example(decorated())?;
    let p = ProblemParameters::new(1.0, 0.0, Potential::Cosine { amplitude: 0.3 })?;
    let n = [6, 6];
    let c = PeriodicClosure::new(&g, &[12])?;
    let grid = Arc::new(GraphGrid::periodic(&c, &n)?);
    let closure = eigenvalues(&assemble(&c, grid, &p, None)?, EigenRequest::All)?;
    let bands = band_sweep(&g, &n, &p, &theta_grid(1, 12), usize::MAX)?;
    let mut union: Vec<f64> = bands.bands.into_iter().flatten().collect();
    union.sort_by(f64::total_cmp);
    let worst = if union.len() == closure.len() {
        closure
            .iter()
            .zip(&union)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    verdict(worst <= FLOQUET_REL, format!("{} eigenvalues, max relative difference {worst:.2e}", closure.len()))
}

fn secular_agreement() -> Result<Verdict> {
    let g = build_example(decorated())?;
    let p = ProblemParameters::free(1.0)?;
    let thetas = theta_grid(1, 8);
    let coarse = band_sweep(&g, &[128, 128], &p, &thetas, 16)?;
    let fine = band_sweep(&g, &[256, 256], &p, &thetas, 16)?;
    let opts = SecularOptions { lambda_max: 6.0, step: Some(1e-3) };
    let mut worst: f64 = 0.0;
    for (i, t) in thetas.iter().enumerate() {
        let exact: Vec<f64> = secular_bands(&g, &p, t, opts)?.roots.into_iter().filter(|&x| x > 0.0).collect();
        for j in 0..3 {
            let h = coarse.bands[i].iter().copied().filter(|&x| x > 0.0).nth(j).unwrap_or(f64::NAN);
            let h2 = fine.bands[i].iter().copied().filter(|&x| x > 0.0).nth(j).unwrap_or(f64::NAN);
            let extrapolated = (4.0 * h2 - h) / 3.0;
            let e = exact.get(j).copied().unwrap_or(f64::NAN);
            worst = worst.max((extrapolated - e).abs()).max(if e.is_nan() { f64::INFINITY } else { 0.0 });
        }
    }
    verdict(worst <= SECULAR_TOL, format!("3 bands x 8 thetas, max |extrapolated - secular| {worst:.2e}"))
}

fn hermiticity_and_transparency() -> Result<Verdict> {
    let p = ProblemParameters::new(1.0, 0.0, Potential::Cosine { amplitude: 0.2 })?;
    let mut worst: f64 = 0.0;
    for kind in ExampleKind::all(0.7) {
        let g = build_example(kind)?;
        let cells = vec![3; g.dim()];
        let c = PeriodicClosure::new(&g, &cells)?;
        let grid = Arc::new(GraphGrid::periodic(&c, &vec![5; g.cell().num_edges()])?);
        worst = worst.max(assemble(&c, grid.clone(), &p, None)?.hermiticity_defect());
        let theta = vec![0.37; g.dim()];
        let cell = PeriodicClosure::bloch_cell(&g);
        let cg = Arc::new(GraphGrid::periodic(&cell, &vec![5; g.cell().num_edges()])?);
        worst = worst.max(assemble(&cell, cg, &p, Some(&theta))?.hermiticity_defect());
    }
    let free = ProblemParameters::new(1.0, 0.0, Potential::Constant(0.3))?;
    let c = chain_ring(10);
    let chain_grid = Arc::new(GraphGrid::periodic(&c, &[8])?);
    let chain = eigenvalues(&assemble(&c, chain_grid, &free, None)?, EigenRequest::All)?;
    let ring = MetricGraph::new(vec!["o".into()], vec![Edge { tail: 0, head: 0, length: 10.0 }])?;
    let rc = PeriodicClosure::finite(ring);
    let ring_grid = Arc::new(GraphGrid::new(rc.graph(), &[80])?);
    let plain = eigenvalues(&assemble(&rc, ring_grid, &free, None)?, EigenRequest::All)?;
    let diff = if chain.len() == plain.len() {
        chain.iter().zip(&plain).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    verdict(
        worst == 0.0 && diff < TRANSPARENCY_TOL,
        format!("Hermiticity defect {worst:.1e} on 5 graphs, chain vs ring {diff:.2e}"),
    )
}

fn interpolation_identity() -> Result<Verdict> {
    let c = chain_ring(6);
    let grid = Arc::new(GraphGrid::periodic(&c, &[16])?);
    let p = ProblemParameters::new(1.0, 0.0, Potential::Cosine { amplitude: 0.2 })?;
    let op = assemble(&c, grid.clone(), &p, None)?;
    let dec = decompose(&op, EigenRequest::All)?;
    let lg = LogGrid::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut lo, mut hi, mut c_half) = (f64::INFINITY, f64::NEG_INFINITY, f64::NAN);
    for _ in 0..20 {
        let f = SpinorField::random_smooth(grid.clone(), &mut rng);
        let r = interpolation_identity_check(&dec, 0.5, &f, &lg)?;
        lo = lo.min(r.ratio);
        hi = hi.max(r.ratio);
        c_half = r.c_theta;
    }
    let pass = op.dim() <= 200
        && lo >= RATIO_BAND.0
        && hi <= RATIO_BAND.1
        && (c_half - std::f64::consts::PI).abs() <= C_HALF_TOL;
    verdict(
        pass,
        format!("dim {}, ratio in [{lo:.6}, {hi:.6}], C_1/2 - pi = {:.1e}", op.dim(), c_half - std::f64::consts::PI),
    )
}

fn cutoff_construction() -> Result<Verdict> {
    let g = build_example(ExampleKind::Chain)?;
    let p = ProblemParameters::free(1.0)?;
    let s = cutoff_test_functions(&g, &[16, 32, 64], &[8], &p)?;
    let factors: Vec<f64> = s.windows(2).map(|w| w[0].derivative_sq / w[1].derivative_sq).collect();
    let bound = p.a + sup_potential(&g, &p) + CUTOFF_SLACK;
    let last = s.last().unwrap().a_norm;
    let pass = factors.iter().all(|f| (CUTOFF_FACTOR.0..=CUTOFF_FACTOR.1).contains(f)) && last <= bound;
    verdict(pass, format!("decay factors {factors:.4?}, |A v_64| = {last:.5} (bound {bound:.2})"))
}

fn norm_inequalities() -> Result<Verdict> {
    let g = build_example(ExampleKind::Chain)?;
    let c = PeriodicClosure::new(&g, &[8])?;
    let grid = Arc::new(GraphGrid::periodic(&c, &[12])?);
    let p = ProblemParameters::new(1.0, 0.2, Potential::Cosine { amplitude: 0.25 })?;
    let dec = decompose(&assemble(&c, grid, &p, None)?, EigenRequest::All)?;
    let sup_v = sup_potential(&g, &p);
    let split = SplitParameters::for_linking(&dec, &p, sup_v, 4.0)?;
    let r = check_norm_inequalities(&dec, &p, Some(&split), 100, 5)?;
    verdict(
        r.coercivity_pass && r.sandwich_pass && r.window_pass,
        format!(
            "{} fields, min ||u||^2/(a|u|^2) = {:.4}, sandwich violation {:.1e}, window violation {:.1e}",
            r.samples, r.coercivity_min_ratio, r.sandwich_violation, r.window_violation
        ),
    )
}

fn gradient_correctness() -> Result<Verdict> {
    let g = build_example(ExampleKind::Chain)?;
    let p = ProblemParameters::new(1.0, 0.3, Potential::Cosine { amplitude: 0.2 })?;
    let c = PeriodicClosure::new(&g, &[6])?;
    let mut worst: f64 = 0.0;
    let families = [make_power(2.5)?, make_asym_linear(&Coefficient::Constant(3.0), &g, &p)?];
    for (k, nl) in families.into_iter().enumerate() {
        let ctx = ActionContext::new(c.clone(), &[8], &p, nl)?;
        let mut rng = ChaCha8Rng::seed_from_u64(20 + k as u64);
        for _ in 0..20 {
            let f = SpinorField::random_smooth(ctx.grid().clone(), &mut rng);
            let phi = SpinorField::random_smooth(ctx.grid().clone(), &mut rng);
            let gr = gradient(&ctx, &f)?;
            let plus = action_quadratic(&ctx, &f.add_scaled(C64::new(FD_EPS, 0.0), &phi)?)?;
            let minus = action_quadratic(&ctx, &f.add_scaled(C64::new(-FD_EPS, 0.0), &phi)?)?;
            let fd = (plus - minus) / (2.0 * FD_EPS);
            let exact = gr.inner(&phi)?.re;
            worst = worst.max((fd - exact).abs() / (gr.norm_l2() * phi.norm_l2()));
        }
    }
    verdict(worst < FD_REL, format!("40 pairs, worst relative defect {worst:.2e}"))
}

fn existence_proxy() -> Result<Verdict> {
    let p = ProblemParameters::free(1.0)?;
    let c = chain_ring(24);
    let init = Initialization::BandEdgeMode { scale: 0.5, center: PointSource::Vertex(0) };
    let opts = SolverOptions::default();
    let mut states = Vec::new();
    for n in [16, 32, 64] {
        let ctx = ActionContext::new(c.clone(), &[n], &p, make_power(2.5)?)?;
        states.push(solve_bound_state(&ctx, &init, &opts, &[])?);
    }
    let s = &states[0];
    let d1 = phase_aligned_distance(&restrict_to_coarse(&states[1].field, states[0].field.grid_arc())?, &states[0].field)?;
    let d2 = phase_aligned_distance(&restrict_to_coarse(&states[2].field, states[1].field.grid_arc())?, &states[1].field)?;
    let gap = (s.action - s.fhat_integral).abs();
    let pass = states.iter().all(|s| s.residual < STATE_RESIDUAL)
        && s.field.norm_l2() > 1e-6
        && s.action > 0.0
        && gap < IDENTITY_TOL
        && d1 < 4.0 * d2;
    verdict(
        pass,
        format!(
            "residual {:.1e}, Phi {:.6}, |Phi - int Fhat| {gap:.1e}, d(h,h/2)/d(h/2,h/4) = {:.3}",
            s.residual,
            s.action,
            d1 / d2
        ),
    )
}

fn multiplicity_proxy() -> Result<Verdict> {
    let g = build_example(decorated())?;
    let p = ProblemParameters::free(1.0)?;
    let c = PeriodicClosure::new(&g, &[16])?;
    let ctx = ActionContext::new(c.clone(), &[8, 8], &p, make_power(2.5)?)?;
    let init = Initialization::BandEdgeMode { scale: 0.5, center: PointSource::Vertex(0) };
    let opts = SolverOptions::default();
    let mut found: Vec<BoundState> = Vec::new();
    for _ in 0..2 {
        found.push(solve_bound_state(&ctx, &init, &opts, &found)?);
    }
    let mut min_d = f64::INFINITY;
    let mut min_action_gap = f64::INFINITY;
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            min_d = min_d.min(orbit_distance(&c, &found[i].field, &found[j].field)?);
            min_action_gap = min_action_gap.min((found[i].action - found[j].action).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shifts = c.translations();
    let mut worst_orbit: f64 = 0.0;
    for _ in 0..10 {
        let u = &found[0].field;
        let k = shifts[rng.random_range(0..shifts.len())];
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let v = orbit_translate(&c, k, u).scaled(C64::from_polar(1.0, t));
        worst_orbit = worst_orbit.max(orbit_distance(&c, u, &v)?);
    }
    let pass = found.len() >= 2
        && found.iter().all(|s| s.residual < STATE_RESIDUAL)
        && min_d > DISTINCT
        && min_action_gap > DISTINCT_ACTION
        && worst_orbit < ORBIT_ZERO;
    verdict(
        pass,
        format!(
            "{} states from {}, min orbit distance {min_d:.3}, min |dPhi| {min_action_gap:.2e}, orbit invariance {worst_orbit:.1e}",
            found.len(),
            found.iter().map(|s| s.center.as_str()).collect::<Vec<_>>().join(" / ")
        ),
    )
}

fn linking_geometry() -> Result<Verdict> {
    let p = ProblemParameters::free(1.0)?;
    let ctx = ActionContext::new(chain_ring(16), &[8], &p, make_power(2.5)?)?;
    let rho: Vec<f64> = (0..25).map(|i| 1e-3 * 1e4f64.powf(i as f64 / 24.0)).collect();
    let r = linking_diagnostics(&ctx, &rho, 1000, 42)?;
    let pass = r.eta_positive && r.y_minus_pass && r.boundary_pass && (r.small_rho_slope - 2.0).abs() <= SLOPE_TOL;
    verdict(
        pass,
        format!(
            "eta {:.3e} at rho {:.3}, max Phi on Y- {:.2e}, on dQ {:.2e} (R1 = {}), slope {:.4}",
            r.eta, r.rho, r.y_minus_max_phi, r.boundary_max_phi, r.r1, r.small_rho_slope
        ),
    )
}

fn hypothesis_gates() -> Result<Verdict> {
    let g = build_example(ExampleKind::Chain)?;
    let p = ProblemParameters::free(1.0)?;
    let spec = SampleSpec::default();
    let power = check_hypotheses(&make_power(2.5)?, &Hypothesis::SUPERQUADRATIC, &spec, &g, &p);
    let asym_nl = make_asym_linear(&Coefficient::Constant(3.0), &g, &p)?;
    let asym = check_hypotheses(&asym_nl, &Hypothesis::ASYMPTOTICALLY_LINEAR, &spec, &g, &p);
    let p4 = match make_power(4.0) {
        Err(dirac_graph::Error::Hypothesis { name, .. }) => name,
        Err(e) => e.to_string(),
        Ok(_) => "accepted".into(),
    };
    verdict(
        power.pass && asym.pass && p4 == Hypothesis::F5.to_string(),
        format!(
            "power 2.5 on superquadratic set: {}, asym_linear on asymptotically linear set: {}, power 4 -> ({p4})",
            power.pass, asym.pass
        ),
    )
}

type Criterion = (&'static str, f64, fn() -> Result<Verdict>);

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("spectral gap", 5.0, spectral_gap),
        ("Floquet consistency", 10.0, floquet_consistency),
        ("secular oracle agreement", 30.0, secular_agreement),
        ("Hermiticity and transparency", f64::INFINITY, hermiticity_and_transparency),
        ("interpolation identity", 20.0, interpolation_identity),
        ("cutoff construction", f64::INFINITY, cutoff_construction),
        ("norm inequalities", f64::INFINITY, norm_inequalities),
        ("gradient correctness", f64::INFINITY, gradient_correctness),
        ("existence proxy", 60.0, existence_proxy),
        ("multiplicity proxy", f64::INFINITY, multiplicity_proxy),
        ("linking geometry", f64::INFINITY, linking_geometry),
        ("hypothesis gates", f64::INFINITY, hypothesis_gates),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && secs < *limit, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if limit.is_finite() { format!(" (limit {limit}s)") } else { String::new() };
        println!(
            "criterion {:>2} {:<30} {}  {detail}  [{secs:.2}s{budget}]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dirac_graph::dirac::assemble;
use dirac_graph::fields::{check_gagliardo_nirenberg, GraphGrid, SpinorField};
use dirac_graph::graph::PeriodicClosure;
use dirac_graph::nonlinearity::{check_hypotheses, Nonlinearity};
use dirac_graph::spectra::{
    band_sweep, c_theta, check_norm_inequalities, cutoff_test_functions, decompose, interpolation_identity_check,
    sup_potential, theta_grid, verify_gap, EigenRequest, LogGrid, SpectralDecomposition, SplitParameters,
};
use dirac_graph::variational::{
    linking_diagnostics, orbit_distance, residual_report, solve_bound_state, ActionContext, Initialization,
    SolverOptions, StateSummary,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{InitSpec, RunConfig, Setup};
use crate::{Failure, Suite};

const RATIO_TOL: f64 = 1e-3;
const C_THETA_TOL: f64 = 1e-6;
const CUTOFF_SPREAD: f64 = 0.2;
const CUTOFF_SLACK: f64 = 0.05;
const GN_DRIFT: f64 = 0.1;

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.resolve(&cfg.output);
    fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn half(cells: &[usize]) -> Vec<usize> {
    cells.iter().map(|n| (n / 2).max(1)).collect()
}

fn gap_report(cfg: &RunConfig, s: &Setup) -> Result<(dirac_graph::spectra::BandStructure, bool, Value), Failure> {
    let thetas = theta_grid(s.graph.dim(), cfg.bands.theta_samples);
    let bands = band_sweep(&s.graph, &s.cells_per_edge, &s.params, &thetas, cfg.bands.count)?;
    let coarse = if cfg.bands.refine {
        Some(band_sweep(&s.graph, &half(&s.cells_per_edge), &s.params, &thetas, cfg.bands.count)?)
    } else {
        None
    };
    let report = verify_gap(&bands, coarse.as_ref(), &s.graph, &s.params);
    let pass = report.lower_bound_pass && report.upper_bound_pass;
    let value = json!({ "report": report, "gap": bands.gap, "pass": pass });
    Ok((bands, pass, value))
}

pub fn bands(cfg: &RunConfig) -> Result<(), Failure> {
    let s = cfg.setup()?;
    let out = output_dir(cfg)?;
    let (bands, pass, mut value) = gap_report(cfg, &s)?;
    let mut w = create(&out.join("bands.csv"))?;
    bands.write_csv(&mut w)?;
    w.flush()?;
    value["config"] = serde_json::to_value(cfg)?;
    write_json(&out.join("gap_report.json"), &value)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "gap bounds violated: min |lambda| = {}, see gap_report.json",
            value["report"]["min_abs_lambda"]
        )))
    }
}

fn nonlinearity(cfg: &RunConfig, s: &Setup) -> Result<Nonlinearity, Failure> {
    let spec = cfg
        .nonlinearity
        .as_ref()
        .ok_or_else(|| Failure::Config("this command needs a `nonlinearity` section".into()))?;
    Ok(Nonlinearity::from_spec(spec, &s.graph, &s.params)?)
}

fn context(cfg: &RunConfig, s: &Setup, nl: Nonlinearity) -> Result<ActionContext, Failure> {
    let closure = PeriodicClosure::new(&s.graph, &cfg.closure)?;
    Ok(ActionContext::new(closure, &s.cells_per_edge, &s.params, nl)?)
}

#[derive(Serialize)]
struct StateFile<'a> {
    #[serde(flatten)]
    summary: StateSummary<'a>,
    config: &'a RunConfig,
}

pub fn solve(cfg: &RunConfig, deflate: Option<usize>) -> Result<(), Failure> {
    if deflate == Some(0) {
        return Err(Failure::Config("--deflate needs at least one state".into()));
    }
    let s = cfg.setup()?;
    let nl = nonlinearity(cfg, &s)?;
    let checks = check_hypotheses(&nl, nl.theorem_set(), &cfg.verify.hypothesis_sampling, &s.graph, &s.params);
    if !checks.pass {
        let names: Vec<String> = checks.failed().iter().map(|h| format!("({h})")).collect();
        return Err(Failure::Hypothesis(format!("hypotheses {} failed for this nonlinearity", names.join(", "))));
    }
    let ctx = context(cfg, &s, nl)?;
    let init = match &cfg.solve.init {
        InitSpec::BandEdgeMode { scale, center } => Initialization::BandEdgeMode { scale: *scale, center: center.point() },
        InitSpec::Bump { center, width, amplitude } => {
            Initialization::Bump { center: center.point(), width: *width, amplitude: *amplitude }
        }
        InitSpec::Given { path } => {
            let full = cfg.resolve(path);
            let file = File::open(&full).map_err(|e| Failure::Config(format!("cannot read {}: {e}", full.display())))?;
            Initialization::Given(SpinorField::read_csv(ctx.grid().clone(), file)?)
        }
    };
    let opts = SolverOptions {
        tol: cfg.solve.tol,
        max_iter: cfg.solve.max_iter,
        lambda0: cfg.solve.lambda0,
        distinct_threshold: cfg.solve.distinct_threshold,
    };
    let out = output_dir(cfg)?;
    let mut found = Vec::new();
    let mut failure = None;
    for _ in 0..deflate.unwrap_or(1) {
        match solve_bound_state(&ctx, &init, &opts, &found) {
            Ok(state) => found.push(state),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let spec = cfg.nonlinearity.as_ref().expect("checked above");
    let mut reports = Vec::new();
    for (i, state) in found.iter().enumerate() {
        let mut w = create(&out.join(format!("state_{i}.csv")))?;
        state.field.write_csv(&mut w)?;
        w.flush()?;
        write_json(
            &out.join(format!("state_{i}.json")),
            &StateFile { summary: state.summary(spec, cfg.seed), config: cfg },
        )?;
        reports.push(json!({ "state": i, "report": residual_report(&ctx, state)? }));
    }
    if !found.is_empty() {
        write_json(&out.join("residual_report.json"), &json!({ "config": cfg, "states": reports }))?;
    }
    if deflate.is_some() && !found.is_empty() {
        let mut csv = String::from("state");
        for j in 0..found.len() {
            write!(csv, ",{j}").unwrap();
        }
        csv.push('\n');
        for (i, u) in found.iter().enumerate() {
            write!(csv, "{i}").unwrap();
            for v in &found {
                write!(csv, ",{}", orbit_distance(ctx.closure(), &u.field, &v.field)?).unwrap();
            }
            csv.push('\n');
        }
        fs::write(out.join("distinctness_matrix.csv"), csv)?;
    }
    match failure {
        None => Ok(()),
        Some(e) => {
            let f = Failure::from(e);
            Err(match f {
                Failure::Solver(m) if !found.is_empty() => {
                    Failure::Solver(format!("{m}; {} state(s) written before the failure", found.len()))
                }
                f => f,
            })
        }
    }
}

fn closure_decomposition(cfg: &RunConfig, s: &Setup) -> Result<(Arc<GraphGrid>, SpectralDecomposition), Failure> {
    let closure = PeriodicClosure::new(&s.graph, &cfg.closure)?;
    let grid = Arc::new(GraphGrid::periodic(&closure, &s.cells_per_edge)?);
    let op = assemble(&closure, grid.clone(), &s.params, None)?;
    Ok((grid, decompose(&op, EigenRequest::All)?))
}

fn run_suite(cfg: &RunConfig, s: &Setup, suite: Suite) -> Result<(bool, Value), Failure> {
    let v = &cfg.verify;
    match suite {
        Suite::Gap => gap_report(cfg, s).map(|(_, pass, value)| (pass, value)),
        Suite::Cutoff => {
            let samples = cutoff_test_functions(&s.graph, &v.cutoff_cells, &s.cells_per_edge, &s.params)?;
            let factors: Vec<f64> = samples.windows(2).map(|w| w[0].derivative_sq / w[1].derivative_sq).collect();
            let expected: Vec<f64> = samples.windows(2).map(|w| w[1].n as f64 / w[0].n as f64).collect();
            let bound = s.params.a + sup_potential(&s.graph, &s.params) + CUTOFF_SLACK;
            let last = samples.last().map_or(f64::NAN, |x| x.a_norm);
            let pass = factors.iter().zip(&expected).all(|(f, e)| (f / e - 1.0).abs() <= CUTOFF_SPREAD) && last <= bound;
            Ok((pass, json!({ "samples": samples, "decay_factors": factors, "expected_factors": expected, "a_norm_bound": bound, "pass": pass })))
        }
        Suite::Interpolation => {
            let (grid, dec) = closure_decomposition(cfg, s)?;
            let lg = LogGrid::default();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut ratios = Vec::new();
            let mut pass = true;
            for _ in 0..v.interpolation_fields {
                let f = SpinorField::random_smooth(grid.clone(), &mut rng);
                let r = interpolation_identity_check(&dec, v.theta, &f, &lg)?;
                pass &= (r.ratio - 1.0).abs() <= RATIO_TOL && r.minimality.iter().all(|m| !m.beaten);
                ratios.push(r.ratio);
            }
            let computed = c_theta(v.theta, &lg)?;
            let exact = std::f64::consts::PI / (std::f64::consts::PI * v.theta).sin();
            pass &= (computed - exact).abs() <= C_THETA_TOL * exact;
            Ok((pass, json!({ "theta": v.theta, "c_theta": computed, "c_theta_closed_form": exact, "ratios": ratios, "pass": pass })))
        }
        Suite::Norms => {
            let (_, dec) = closure_decomposition(cfg, s)?;
            let sup_v = sup_potential(&s.graph, &s.params);
            let gamma = v.gamma.unwrap_or(2.0 * (s.params.a + sup_v) + 1.0);
            let split = SplitParameters::for_linking(&dec, &s.params, sup_v, gamma)?;
            let r = check_norm_inequalities(&dec, &s.params, Some(&split), v.samples, cfg.seed)?;
            let pass = r.coercivity_pass && r.sandwich_pass && r.window_pass;
            Ok((pass, json!({ "report": r, "split": split, "pass": pass })))
        }
        Suite::Hypotheses => {
            let nl = nonlinearity(cfg, s)?;
            let r = check_hypotheses(&nl, nl.theorem_set(), &v.hypothesis_sampling, &s.graph, &s.params);
            Ok((r.pass, json!({ "metadata": nl.metadata(), "report": r, "pass": r.pass })))
        }
        Suite::Linking => {
            let ctx = context(cfg, s, nonlinearity(cfg, s)?)?;
            let ratio = (v.rho_max / v.rho_min).ln();
            let rho: Vec<f64> = (0..v.rho_points)
                .map(|i| v.rho_min * (ratio * i as f64 / (v.rho_points - 1) as f64).exp())
                .collect();
            let r = linking_diagnostics(&ctx, &rho, v.linking_samples, cfg.seed)?;
            Ok((r.pass(), json!({ "report": r, "pass": r.pass() })))
        }
        Suite::Gn => {
            let closure = PeriodicClosure::new(&s.graph, &cfg.closure)?;
            let p = v.gn_p.unwrap_or(f64::INFINITY);
            let mut sup = Vec::new();
            let mut alpha = f64::NAN;
            for cells in [s.cells_per_edge.clone(), s.cells_per_edge.iter().map(|n| 2 * n).collect()] {
                let grid = Arc::new(GraphGrid::periodic(&closure, &cells)?);
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let mut worst: f64 = 0.0;
                for _ in 0..v.samples {
                    let r = check_gagliardo_nirenberg(&SpinorField::random_smooth(grid.clone(), &mut rng), p, v.gn_q)?;
                    alpha = r.alpha;
                    worst = worst.max(r.ratio);
                }
                sup.push(worst);
            }
            let drift = (sup[0] - sup[1]).abs() / sup[0];
            let pass = sup.iter().all(|x| x.is_finite()) && drift <= GN_DRIFT;
            Ok((pass, json!({ "p": v.gn_p, "q": v.gn_q, "alpha": alpha, "sup_ratio": sup, "refinement_drift": drift, "pass": pass })))
        }
    }
}

pub fn verify(cfg: &RunConfig, suites: &[Suite]) -> Result<(), Failure> {
    let s = cfg.setup()?;
    let out = output_dir(cfg)?;
    let mut failed = Vec::new();
    for &suite in suites {
        let (pass, result) = run_suite(cfg, &s, suite)?;
        let doc = json!({ "suite": suite.name(), "pass": pass, "result": result, "config": cfg });
        write_json(&out.join(format!("verify_{}.json", suite.name())), &doc)?;
        if !pass {
            failed.push(suite.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed suites: {}", failed.join(", "))))
    }
}

use std::fs;
use std::path::{Path, PathBuf};

use dirac_graph::dirac::{Potential, ProblemParameters};
use dirac_graph::graph::{build_example, ExampleKind, GraphDocument, PeriodicClosure, PeriodicGraph, PointSource};
use dirac_graph::nonlinearity::{NonlinearitySpec, SampleSpec};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Chain,
    DecoratedChain { stub_length: f64 },
    Ladder,
    Strip,
    SquareLattice,
    /// A graph document on disk, relative to the config file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant { value: f64 },
    PerEdge { values: Vec<f64> },
    Cosine { amplitude: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub a: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub potential: PotentialSpec,
}

/// Point of the fundamental cell (copy 0 of the closure).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterSpec {
    Vertex { index: usize },
    Edge { edge: usize, s: f64 },
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::Vertex { index: 0 }
    }
}

impl CenterSpec {
    pub fn point(self) -> PointSource {
        match self {
            CenterSpec::Vertex { index } => PointSource::Vertex(index),
            CenterSpec::Edge { edge, s } => PointSource::Edge { edge, s },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    BandEdgeMode {
        scale: f64,
        #[serde(default)]
        center: CenterSpec,
    },
    Bump {
        #[serde(default)]
        center: CenterSpec,
        width: f64,
        amplitude: f64,
    },
    /// Field CSV on the solve grid, relative to the config file.
    Given { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsOptions {
    /// Quasi-momenta per lattice direction.
    pub theta_samples: usize,
    /// Eigenvalues closest to zero kept per quasi-momentum.
    pub count: usize,
    /// Repeat the sweep at half resolution to size the discretization tolerance.
    pub refine: bool,
}

impl Default for BandsOptions {
    fn default() -> Self {
        BandsOptions { theta_samples: 32, count: 8, refine: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub init: InitSpec,
    pub tol: f64,
    pub max_iter: usize,
    pub lambda0: f64,
    pub distinct_threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            init: InitSpec::BandEdgeMode { scale: 0.5, center: CenterSpec::default() },
            tol: 1e-10,
            max_iter: 200,
            lambda0: 1e-3,
            distinct_threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Random fields for the norm and GN corpora.
    pub samples: usize,
    pub interpolation_fields: usize,
    pub theta: f64,
    pub cutoff_cells: Vec<usize>,
    /// Upper end of the spectral window; defaults to `2 (a + sup V) + 1`.
    pub gamma: Option<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_points: usize,
    pub linking_samples: usize,
    /// Exponent of the left-hand norm; absent means the sup norm.
    pub gn_p: Option<f64>,
    pub gn_q: f64,
    pub hypothesis_sampling: SampleSpec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 100,
            interpolation_fields: 20,
            theta: 0.5,
            cutoff_cells: vec![16, 32, 64],
            gamma: None,
            rho_min: 1e-3,
            rho_max: 10.0,
            rho_points: 25,
            linking_samples: 1000,
            gn_p: None,
            gn_q: 2.0,
            hypothesis_sampling: SampleSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSpec,
    /// Cells of the periodic closure per lattice direction.
    pub closure: Vec<usize>,
    /// Grid cells per edge; a single entry applies to every edge.
    pub cells_per_edge: Vec<usize>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[serde(default)]
    pub bands: BandsOptions,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the config file. Not echoed into outputs.
    #[serde(default = "default_output", skip_serializing)]
    pub output: PathBuf,
    #[serde(skip)]
    pub base: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// The objects every command needs, built from a checked config.
pub struct Setup {
    pub graph: PeriodicGraph,
    pub params: ProblemParameters,
    pub cells_per_edge: Vec<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Failure::Config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Checks every numeric constraint and builds graph and parameters.
    pub fn setup(&self) -> Result<Setup, Failure> {
        let bad = |m: String| Err(Failure::Config(m));
        let graph = match &self.graph {
            GraphSpec::Chain => build_example(ExampleKind::Chain),
            GraphSpec::DecoratedChain { stub_length } => {
                build_example(ExampleKind::DecoratedChain { stub_length: *stub_length })
            }
            GraphSpec::Ladder => build_example(ExampleKind::Ladder),
            GraphSpec::Strip => build_example(ExampleKind::Strip),
            GraphSpec::SquareLattice => build_example(ExampleKind::SquareLattice),
            GraphSpec::File { path } => {
                let full = self.resolve(path);
                let text = fs::read_to_string(&full)
                    .map_err(|e| Failure::Config(format!("cannot read graph {}: {e}", full.display())))?;
                let de = &mut serde_json::Deserializer::from_str(&text);
                let doc: GraphDocument = serde_path_to_error::deserialize(de).map_err(|e| {
                    Failure::Config(format!("{}: at `{}`: {}", full.display(), e.path(), e.inner()))
                })?;
                PeriodicGraph::from_document(doc)
            }
        }
        .map_err(Failure::from)?;
        let ne = graph.cell().num_edges();
        let cells_per_edge = match self.cells_per_edge.as_slice() {
            [n] => vec![*n; ne],
            v if v.len() == ne => v.to_vec(),
            v => return bad(format!("cells_per_edge has {} entries, the cell has {ne} edges", v.len())),
        };
        if cells_per_edge.contains(&0) {
            return bad("cells_per_edge entries must be positive".into());
        }
        if self.closure.len() != graph.dim() {
            return bad(format!("closure has {} entries, the lattice has dimension {}", self.closure.len(), graph.dim()));
        }
        PeriodicClosure::new(&graph, &self.closure).map_err(Failure::from)?;
        let potential = match &self.problem.potential {
            PotentialSpec::Zero => Potential::Zero,
            PotentialSpec::Constant { value } => Potential::Constant(*value),
            PotentialSpec::PerEdge { values } => {
                if values.len() != ne {
                    return bad(format!("potential has {} values, the cell has {ne} edges", values.len()));
                }
                Potential::PerEdge(values.clone())
            }
            PotentialSpec::Cosine { amplitude } => Potential::Cosine { amplitude: *amplitude },
        };
        let params = ProblemParameters::new(self.problem.a, self.problem.omega, potential).map_err(Failure::from)?;

        let b = &self.bands;
        if b.theta_samples == 0 || b.count == 0 {
            return bad("bands.theta_samples and bands.count must be positive".into());
        }
        let s = &self.solve;
        if !(s.tol > 0.0 && s.lambda0 > 0.0 && s.distinct_threshold > 0.0) || s.max_iter == 0 {
            return bad("solve.tol, solve.lambda0, solve.distinct_threshold and solve.max_iter must be positive".into());
        }
        match &s.init {
            InitSpec::BandEdgeMode { scale, .. } if !(*scale > 0.0) => return bad("init scale must be positive".into()),
            InitSpec::Bump { width, .. } if !(*width > 0.0) => return bad("bump width must be positive".into()),
            _ => {}
        }
        let v = &self.verify;
        if v.samples == 0 || v.interpolation_fields == 0 || v.linking_samples == 0 {
            return bad("verify sample counts must be positive".into());
        }
        if !(v.theta > 0.0 && v.theta < 1.0) {
            return bad(format!("verify.theta = {} must lie in (0, 1)", v.theta));
        }
        if v.cutoff_cells.len() < 2 || v.cutoff_cells.contains(&0) {
            return bad("verify.cutoff_cells needs at least two positive entries".into());
        }
        if !(v.rho_min > 0.0 && v.rho_max > v.rho_min) || v.rho_points < 3 {
            return bad("verify needs 0 < rho_min < rho_max and at least 3 rho_points".into());
        }
        if !(v.gn_q >= 2.0 && v.gn_p.unwrap_or(f64::INFINITY) >= v.gn_q) {
            return bad("verify needs 2 <= gn_q <= gn_p".into());
        }
        Ok(Setup { graph, params, cells_per_edge })
    }
}

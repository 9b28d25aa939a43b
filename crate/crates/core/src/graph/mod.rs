//! Metric graphs, periodic graphs and their finite periodic closures.

mod closure;
mod examples;
mod metric;
mod periodic;

pub use closure::{orbit_translate, PeriodicClosure};
pub use examples::{build_example, ExampleKind};
pub use metric::{Edge, Endpoint, MetricGraph, PointSource};
pub use periodic::{Gluing, GraphDocument, PeriodicGraph};

/// Lattice shift; only the first `dim` entries are meaningful.
pub type Shift = [i64; 2];

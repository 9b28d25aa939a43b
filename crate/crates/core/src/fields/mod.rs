//! Staggered grids on metric graphs and spinor fields living on them.
//!
//! The first spinor component sits on nodes (vertex nodes are shared by all
//! incident edges), the second on cell midpoints. Quadrature weights are the
//! cell width `h_e` for interior nodes and midpoints, and `sum h_e / 2` over
//! incident edge ends for a vertex node.

mod field;
mod grid;
mod io;

pub use field::{check_gagliardo_nirenberg, GnReport, SpinorField};
pub(crate) use field::weighted_norm;
pub use grid::GraphGrid;

//! Rank-controlled homotopies of positive matrix fields.

mod connect;
mod field;
mod flatten;
mod frame;
mod gap;
mod peel;
mod raise;
mod support;

pub use connect::connect_in_band;
pub use field::{path_tol_for, FieldPath, MatrixField};
pub use flatten::{flatten_spectrum, normalize};
pub use frame::{find_trivial_subprojection, TrivialProjection};
pub use gap::find_uniform_gap;
pub use peel::{peel_trivial_summand, Peeled};
pub use raise::raise_min_rank;
pub use support::{computed_strata, well_supported_approx, Stratum, WellSupportedField};

pub(crate) use gap::uniform_gap_with;

//! Discrete dynamic optimal transport.
//!
//! Finite metric spaces and their probability measures ([`metric`]), Young
//! measures on a time grid ([`young`]), transport measures on a
//! time-expanded graph ([`transport`]), minimal-action solvers
//! ([`solvers`]) and decompositions of flows into curves and cycles
//! ([`superposition`]). [`io`] holds the JSON file formats and
//! [`instances`] the seeded random generators used by tests and the CLI.
//!
//! ```
//! use std::sync::Arc;
//! use transport_measures::metric::{kr_distance, DiscreteMeasure, MetricSpace};
//!
//! let space = Arc::new(MetricSpace::line(2, 0.0, 1.0).unwrap());
//! let mu = DiscreteMeasure::dirac(space.clone(), 0).unwrap();
//! let nu = DiscreteMeasure::uniform(space);
//! assert_eq!(kr_distance(&mu, &nu).unwrap().0, 0.5);
//! ```

pub mod error;
pub mod expr;
pub mod instances;
pub mod io;
pub mod lagrangian;
mod lp;
mod mcf;
pub mod metric;
pub mod solvers;
pub mod superposition;
pub mod transport;
pub mod young;

/// Version of this library, recorded in CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/metric.md")]
    mod metric {}
    #[doc = include_str!("../../../book/src/young.md")]
    mod young {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/superposition.md")]
    mod superposition {}
    #[doc = include_str!("../../../book/src/cycles.md")]
    mod cycles {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

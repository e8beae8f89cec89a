//! Exact-arithmetic computation of distinguished Poincare--Dulac normal
//! forms for analytic periodic differential systems, with resonance-lattice
//! analysis, first-integral machinery, small-divisor diagnostics and a
//! numerical Floquet-reduction front end.

pub mod corpus;
pub mod error;
pub mod floquet;
pub mod integrals;
pub mod io;
pub mod normalform;
pub mod resonance;
pub mod scalar;
pub mod series;
pub mod system;
pub mod verify;

pub use error::{Error, Result};

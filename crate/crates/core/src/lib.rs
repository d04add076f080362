//! Numerical laboratory for forward fundamental solutions of Klein-Gordon
//! operators `P(lambda) = box - lambda` on asymptotically de Sitter spaces.
//!
//! The crate is organized around the constructive ingredients of a parametrix
//! for `P(lambda)`:
//!
//! * [`geometry`]: 0-cotangent phase space, bicharacteristic flow, the
//!   projective double-space coordinates, light-cone flowouts and the
//!   embeddedness check for the projected flowout.
//! * [`indexsets`]: polyhomogeneous index sets, extended unions, sums,
//!   pushforwards, and the index families attached to the fundamental
//!   solution and the parametrix.
//! * [`transport`]: log-smooth series, Fuchsian transport equations along the
//!   flowout, the light-cone-face normal operators, and the front-face
//!   coefficient recursion.
//! * [`modelsolver`]: the model problem on the front-face fiber (half-space),
//!   solved mode-by-mode in the transverse frequency and synthesized back to
//!   a grid, with asymptotic-exponent extraction.
//! * [`desitter_pde`]: a direct pseudospectral solver for the global exact
//!   de Sitter equation in two dimensions, expansion extraction at future
//!   infinity, and weighted-Lp scaling scans over source anchors.

pub mod error;
pub mod exact;

pub mod desitter_pde;
mod fitting;
pub mod geometry;
pub mod indexsets;
pub mod modelsolver;
pub mod transport;

pub mod util;

pub use error::{Error, Result};
pub use exact::{characteristic_roots_f64, characteristic_roots_rational, Exponent, Surd};
pub use geometry::{MetricChart, PhasePoint, Trajectory};
pub use indexsets::{Face, IndexFamily, IndexSet};
pub use transport::LogSeries;

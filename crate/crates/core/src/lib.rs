//! Indirect maximum entropy (iMaxEnt) bandwidth selection for kernel
//! estimators of density and distribution functions.
//!
//! The leave-one-out kernel CDF estimates `V_i(b)` of a sample are the
//! nonparametric analogue of probability integral transforms. Their joint
//! support is the rescaled regular permutohedron `Pi_n`, and the iMaxEnt
//! bandwidth makes their distribution close to the uniform law on `Pi_n`,
//! measured through the marginal reference `L_n`.

pub mod data;
pub mod error;
pub mod geometry;
pub mod gof;
pub mod kernel;
pub mod mixtures;
pub mod quadrature;
pub mod reference;
pub mod select;
pub mod sim;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{PermutohedronSpec, PiecewisePolynomialDensity};
pub use gof::{CvMWeight, TransformedPits};
pub use kernel::{Density, Kernel, PitVector, Sample};
pub use mixtures::{MiseBandwidths, MixtureModel};
pub use reference::{MarginalReference, RateFit, ReferenceSource};
pub use select::{BandwidthEstimate, Method, SelectOptions};
pub use sim::{SimConfig, SimResult};

//! Maps from the unit hypercube onto extreme points of moment classes.

pub mod canonical;
pub mod golub_welsch;
pub mod layout;
pub mod projection;
pub mod simplex;

pub use canonical::{canonical_to_moments, canonical_to_quadrature, moments_to_canonical, CanonicalSeq};
pub use golub_welsch::{moments_to_quadrature, QuadratureResult};
pub use layout::{vector_to_extreme, Decoded, ExtraRows, LayoutKind, MarginalLayout, ParamLayout};
pub use projection::{project_weights, Projection};
pub use simplex::simplex_map;

//! Exact computation of Potts-model partition functions on L x N tori.
//!
//! The partition function is computed two independent ways and cross-checked:
//!
//! - [`oracle`] enumerates every edge subset of the torus graph and classifies
//!   cluster configurations by their horizontal winding topology, producing
//!   the restricted partition functions `Z_{j,n1}` as exact polynomials in
//!   `(q, v)`.
//! - [`transfer`] builds the level-`l` transfer operators on marked
//!   connectivity states and computes the characters `K_l`, `K_{l,P}`,
//!   `K_{l,C}`, `K_{l,D}` as exact traces.
//!
//! [`decomp`] ties the two together: coefficient tables, the decomposition
//! and inversion identities connecting `Z` to the characters, and the
//! independent-basis amplitude table. [`degeneracy`] implements the numeric
//! eigenvalue matching that turns the amplitude table into a spectral
//! decomposition of `Z`.
//!
//! All identity checking is exact rational arithmetic; the only floating
//! point in the crate is the eigenvalue sampling in [`degeneracy`].

pub mod connstates;
pub mod decomp;
pub mod degeneracy;
pub mod lattice;
pub mod oracle;
pub mod poly;
pub mod symgroup;
pub mod transfer;

pub use lattice::{LatticeKind, LatticeSpec};
pub use poly::{BivarPoly, PolyError, Rat};

//! Besov norms, level-set sparseness and Navier–Stokes regularity
//! diagnostics on periodic 3D grids.
//!
//! Fields live on a [`Grid3`]. The [`lp`] module measures them in
//! `B^s_{∞,∞}` through a dyadic Fourier partition and in `B^ε_{1,1}` through
//! finite differences, [`sparse`] measures how thinly a level set fills balls
//! and segments, [`experiments`] runs the mixing-lemma constructions and
//! [`nse`] integrates the incompressible equations while recording the
//! regularity-criterion quantities.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod error;
pub mod experiments;
pub mod fft;
pub mod fields;
pub mod io;
pub mod lp;
pub mod nse;
pub mod sparse;

pub use error::{Error, Result};
pub use fields::{
    all_component_superlevels, component_superlevel, linf_norm, scalar_superlevel, AnyField, FieldRef, Grid3, LevelSet,
    LevelSetMeta, Point, ScalarField, Sign, VectorField,
};
pub use lp::{besov_11_fd, besov_inf_inf, dual_lower_bound, lp_block, BesovValue, LPBank};

//! Foliations of equilibria for generalized Frenkel-Kontorova lattice models
//! and numerical certification that their members are ground states.

// Negated comparisons are used to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod comparison;
pub mod error;
pub mod foliation;
pub mod graph;
pub mod groundstate;
pub mod hull;
pub mod model;
pub mod quadrature;
pub mod site;

pub use error::{Error, Result};
pub use site::{Site, SiteSet};

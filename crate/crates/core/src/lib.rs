//! Dirichlet Laplacian on a locally deformed strip with a zero-mean profile.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod forms;
pub mod linalg;
pub mod profiles;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod theory;
pub mod validation;
pub mod variational;

pub use error::{Error, Result};
pub use profiles::{make_profile, Profile, ProfileKind};
pub use theory::Geometry;

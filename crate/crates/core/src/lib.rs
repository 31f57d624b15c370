//! Recalibration of binary probabilistic classifiers defined on discrete
//! score supports to a target class-1 prior.

pub mod auc;
pub mod dist;
pub mod error;
pub mod eval;
pub mod methods;
pub mod quadrature;
pub mod runner;
pub mod scenario;
pub mod solvers;
pub mod special;

pub use error::{RecalError, Result};

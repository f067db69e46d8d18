//! Data-driven finite element analysis of hyperelastic solids.
//!
//! The constitutive law is replaced by a finite set of strain-stress data
//! tuples. Solvers look for the mechanically admissible fields closest to the
//! data in an energy-like metric scaled by `mu0`.

pub mod config;
pub mod data_gen;
pub mod error;
pub mod fem;
pub mod multilevel;
pub mod phase_space;
pub mod reference;
pub mod report;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use phase_space::{DataSet, DataTuple, LocalState, PairingKind};
pub use tensor::{Rotation, Tensor2};

//! Balanced truncation for cascaded (K-power) bilinear systems.
//!
//! A K-power system is a chain of k coupled linear subsystems whose
//! input-output map is homogeneous of degree k. This crate reduces such
//! systems two ways:
//!
//! - **Intrusive** ([`balancing`]): cascaded Lyapunov solves for the
//!   subsystem Gramians, then square-root balanced truncation.
//! - **Data-driven** ([`data_driven`], [`realify`]): the same reduction
//!   assembled purely from samples of the k-th transfer function on a
//!   symmetric quadrature grid, optionally executed entirely in real
//!   arithmetic so the reduced models come out real-valued.
//!
//! [`sim`] integrates full and reduced systems in the time domain for
//! validation; [`reference`] holds slow brute-force routes the test suite
//! checks everything against.

pub mod balancing;
pub mod data_driven;
pub mod error;
pub mod examples;
pub mod quadgrid;
pub mod realify;
pub mod reference;
pub mod sim;
pub mod sysmodel;
pub mod transfer;

pub use error::{Error, Result};
pub use sysmodel::{BlockRealization, ComplexKPowerSystem, KPowerSystem, ReducedKPowerSystem};

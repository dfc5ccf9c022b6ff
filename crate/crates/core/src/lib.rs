//! Contagion models for financial networks.
//!
//! The crate collects the standard network models of systemic risk behind one
//! set of types:
//!
//! - [`network`]: random graph ensembles, the edge-list format, and
//!   maximum-entropy reconstruction of exposure matrices from margins.
//! - [`clearing`]: Eisenberg-Noe clearing vectors and the Rogers-Veraart
//!   default-cost extension.
//! - [`cascade`]: zero-recovery default cascades on Gai-Kapadia balance sheets.
//! - [`theory`]: tree-based and generating-function analysis of threshold
//!   cascades on configuration-model networks.
//! - [`debtrank`]: DebtRank distress propagation and its iterated and
//!   nonlinear variants.
//! - [`firesale`]: price-mediated contagion through overlapping portfolios.
//! - [`structure`]: core-periphery detection.
//! - [`harness`]: seeded Monte Carlo sweeps and the `synrisk` command line.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod clearing;
pub mod debtrank;
pub mod error;
pub mod firesale;
pub mod harness;
pub mod linalg;
pub mod network;
pub mod rng;
pub mod structure;
pub mod theory;

pub use error::{Error, Result};

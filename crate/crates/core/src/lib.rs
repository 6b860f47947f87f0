//! Output-feedback stabilization of nonlinear SISO plants with a
//! nonlinear observer in plant coordinates and a metric-weighted
//! projection of its estimates.
//!
//! Layout:
//! - [`matkit`]: small dense linear algebra.
//! - [`plant`]: plant trait, integrator augmentation, observability map.
//! - [`observer`]: gain design and observer right-hand side.
//! - [`projection`]: convex target sets and the estimate projection.
//! - [`sim`]: closed-loop integration, trajectory records and metrics.
//! - [`example`]: the benchmark plant, controller, sets and presets.
//! - [`trajio`]: CSV and summary files.
//! - [`cli`]: command-line front end used by the `obsproj` binary.

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod example;
pub mod matkit;
pub mod observer;
pub mod plant;
pub mod projection;
pub mod sim;
pub mod trajio;

//! Analytical partial derivatives of the Poincaré return map of a straight-line
//! libration in a two-dimensional Hamiltonian system, and classification of the
//! bifurcations of that libration.
//!
//! The systems treated here have the form H = ½(pₓ² + p_y²) + V(x,y) with
//! ∂V/∂x(0,y) ≡ 0, so the (y,p_y) plane is invariant and the system librates
//! along the y axis. An optional deformation δ·F(x,y,pₓ,p_y) preserving that
//! invariant plane is supported. For a chosen energy offset ε₀ the crate
//! computes, without differencing the flow, the 38 partial derivatives of the
//! return map (Q,P)(q,p,ε,δ) on the section p_y = 0 — up to third order in the
//! section coordinates (q,p) and first order in ε and δ — by solving the
//! variational equations along the orbit and assembling the results through the
//! chain rule. A built-in finite-difference oracle over the directly integrated
//! flow verifies every one of those numbers independently.
//!
//! Module map:
//! - [`symexpr`]: expression parser, exact symbolic partial derivatives, and
//!   checks of the structural hypotheses on V and F.
//! - [`ode`] / [`grid`]: Runge–Kutta integrators (adaptive with dense output
//!   and events; fixed-step on a shared grid) and cubic-Hermite grid functions.
//! - [`prereq`]: turning point y_max, the libration orbit and its period, and
//!   the two fundamental systems of the linearized equations.
//! - [`flowderiv`]: the tables of flow derivatives x^r_*(t) of orders 1–3,
//!   built by variation of constants with specialized inhomogeneities.
//! - [`chain`]: starting-point and flow-time derivative tables, and the chain
//!   rule assembly of the 38 map derivatives.
//! - [`bifurcate`]: singularity test, adapted coordinates, transcritical/fork
//!   classification with fork curvature, and the ε-sweep.
//! - [`oracle`]: the independent finite-difference ground truth.
//! - [`pipeline`]: end-to-end orchestration used by the CLI and the tests.

pub mod bifurcate;
pub mod chain;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod flowderiv;
pub mod grid;
pub mod ode;
pub mod oracle;
pub mod pipeline;
pub mod prereq;
pub mod symexpr;

pub use config::{ClassifyTols, NumericsConfig, OracleConfig};
pub use error::{Error, Result};

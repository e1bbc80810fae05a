//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("structural hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no root of V(0,y) = E in the scanned range [{lo}, {hi}] for E = {energy}")]
    NoTurningPoint { lo: f64, hi: f64, energy: f64 },

    #[error("degenerate turning point: V_y(0, {ymax}) = {v2:.3e} (the procedure divides by it)")]
    DegenerateTurningPoint { ymax: f64, v2: f64 },

    #[error("turning point at y = {ymax} has V_y = {v2:.3e} <= 0; not the upper turning point of a libration")]
    WrongTurningPoint { ymax: f64, v2: f64 },

    #[error("no return to the section within t = {max_time}; not a libration at this energy")]
    NoReturn { max_time: f64 },

    #[error("energy drift {drift:.3e} exceeds tolerance {tol:.3e} along the orbit")]
    EnergyDrift { drift: f64, tol: f64 },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("Newton iteration failed: {0}")]
    Newton(String),

    #[error("unsupported derivative index pattern: {0}")]
    UnsupportedIndex(String),

    #[error("internal table entry missing: {0}")]
    MissingEntry(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

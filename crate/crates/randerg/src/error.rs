//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain.
    #[error("parameter `{name}` = {value} outside {constraint}")]
    ParamDomain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// A requested horizon or index exceeds what the data holds.
    #[error("{what} = {got} exceeds available {limit_name} = {limit}")]
    Range {
        what: &'static str,
        got: u64,
        limit_name: &'static str,
        limit: u64,
    },

    /// An empty domain was requested (for example `n_max = 0`).
    #[error("empty domain: {0}")]
    EmptyDomain(&'static str),

    /// A weight net would exceed its configured size cap.
    #[error("net would hold {required} points, exceeding the cap of {cap}")]
    NetTooLarge { required: u128, cap: u128 },

    /// A modulation exponent lies outside every covered interval.
    #[error("c = {c} lies outside the covered intervals of the net")]
    OutsideNet { c: f64 },

    /// The net being used does not reach the requested horizon.
    #[error("net horizon {horizon} is below the requested N = {n}")]
    Horizon { horizon: u64, n: u64 },

    /// h = 0 is excluded from the off-diagonal kernel.
    #[error("h = 0 is not part of the kernel; that mass lives in the simple term")]
    ZeroShift,

    /// A signal window does not match what an operator expects.
    #[error("window mismatch: {0}")]
    WindowMismatch(&'static str),

    /// An empty weight net cannot be maximised over.
    #[error("empty weight net")]
    EmptyNet,

    /// Orbit evaluation would exhaust the available precision.
    #[error("precision exhausted: {0}")]
    Precision(&'static str),

    /// A configuration document failed to parse or validate.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

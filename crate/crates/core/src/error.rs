use thiserror::Error;

/// Errors raised by the numerical routines when called outside their domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("user index {index} out of range for {users} users")]
    UserIndex { index: usize, users: usize },

    #[error("cardinality {n} outside [{min}, {max}]")]
    Cardinality { n: usize, min: usize, max: usize },

    #[error("uplink rate is undefined without offloading users")]
    NoUplink,

    #[error("transmit power {power} of user {index} must be positive")]
    NonPositivePower { index: usize, power: f64 },

    #[error("Lagrange multiplier must be non-negative, got {0}")]
    NegativeMultiplier(f64),

    #[error("exhaustive search over {users} users exceeds the limit of {limit}")]
    InstanceTooLarge { users: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

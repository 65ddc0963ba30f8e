//! Birth-death chains absorbed at zero: exact ratio-sequence analytics,
//! brute-force oracles on truncated chains, and Monte Carlo estimates of
//! stopped expectations and occupation counts.
//!
//! ```
//! use bdchain_core::{analytics, ChainSpec};
//! use num_rational::BigRational;
//!
//! let chain = ChainSpec::example1(1).unwrap();
//! let visits: BigRational = analytics::occupation_until_extinction(&chain, 1).unwrap();
//! assert_eq!(visits, BigRational::from_integer(3.into()));
//! ```

pub mod analytics;
pub mod chain;
pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod number;
pub mod oracle;
pub mod report;
pub mod spec_io;

pub use chain::{ChainSpec, Family, ProbPair, RationalFormula, TailRule};
pub use error::{AnalyticsError, ChainError, OracleError, SimError, SpecError};
pub use number::{ExtendedValue, Number, Scalar};
pub use spec_io::{parse_spec, spec_to_json};

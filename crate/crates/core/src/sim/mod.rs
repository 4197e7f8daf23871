//! Forward simulation and the exhaustive reference oracle.

mod oracle;
mod simulate;

pub use oracle::{oracle_explanations, OracleError, MAX_ASSUMABLES};
pub use simulate::{arrival, run, simulate, Injection, LogRecord, ObservationLog, SimError, Trace};

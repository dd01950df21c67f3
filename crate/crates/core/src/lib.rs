//! Discrete cake cutting: valuations over a pixel cake, the classic
//! division procedures as state machines, fairness audits, manipulation
//! search, a two-agent learning model, and lab session replication.

pub mod cake;
pub mod experiment;
pub mod fairness;
pub mod fixtures;
pub mod learning;
pub mod procedure;
pub mod profile;
pub mod strategy;
pub mod valuation;

pub use cake::{Allocation, Cake, CakeError, Piece, Points};
pub use procedure::{Action, ProcedureId, Query, QueryKind};
pub use profile::Profile;
pub use valuation::{Segment, Valuation};

//! DC power-flow model, PMU-based line outage detection, and synthesis of
//! load-redistribution attacks that mask a single line outage.

pub mod attack;
pub mod case;
pub mod dc;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod outage;

pub use case::{case39, GridCase, LineId, PmuPlacement};
pub use dc::DcModel;
pub use error::{Error, Result};

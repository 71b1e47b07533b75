pub mod acceleration;
pub mod coexistence;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod extension;
pub mod forcing;
pub mod genfun;
pub mod mather;
pub mod output;
pub mod quadrature;
pub mod validation;

pub use error::{Error, Result};
pub use forcing::ForcingFunction;

pub mod error;
pub mod example4;
pub mod kernel;
pub mod lab;
pub mod nonlinearity;
pub mod numeric;
pub mod ode;
pub mod pde;
pub mod verdict;

pub use error::{Error, Result};
pub use verdict::{Verdict, VerdictKind};

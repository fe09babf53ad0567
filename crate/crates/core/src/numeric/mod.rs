//! Numerical building blocks shared by the modules: adaptive quadrature,
//! log-space arithmetic and least-squares fits.

pub mod fit;
pub mod logspace;
pub mod quadrature;

pub use fit::{fit_blowup, golden_section_min, linear_fit, BlowupFit, LinearFit};
pub use logspace::{log1m_exp, log_add_exp, log_mid, log_sub_exp, CompensatedTime};
pub use quadrature::{integrate, log_integrate, log_integrate_above, Integral, LogIntegral};

//! Spectral analysis of one-term even-order differential operators
//! `(-1)^m (c(x) y^{(m)})^{(m)}` on `[-1, 1]` whose coefficient vanishes at the
//! interior point `0` to integer orders `p` (right) and `q` (left).
//!
//! The crate is organized bottom-up:
//!
//! * [`logseries`] exact truncated series with logarithmic factors,
//! * [`frobenius`] fundamental systems at the singular point,
//! * [`forms`] Lagrange forms, jets, form limits and symplectic normalization,
//! * [`deficiency`] closed-form and constructive deficiency numbers,
//! * [`extensions`] self-adjoint boundary conditions and their validation,
//! * [`spectrum`] shooting, characteristic determinants and eigenvalues.
//!
//! ```
//! use num_complex::Complex64;
//! use singspec::extensions::{build_context, validate, BoundaryConditionSet};
//! use singspec::frobenius::OperatorSpec;
//! use singspec::spectrum::{eigenvalues, EigenConfig, Factor};
//!
//! let ctx = build_context(&OperatorSpec::unit(1, 1, 1)?)?;
//! let mut bc = BoundaryConditionSet::zeros(&ctx);
//! bc.a1[(0, 0)] = Complex64::new(1.0, 0.0); // y(-1) = 0
//! bc.a2[(1, 0)] = Complex64::new(1.0, 0.0); // y(1) = 0
//! bc.b2[(2, 0)] = Complex64::new(1.0, 0.0); // no log part at 0+
//! assert!(validate(&bc, &ctx, 1e-10)?.valid());
//! let res = eigenvalues(&bc, &ctx, (0.0, 10.0), &EigenConfig::default())?;
//! let right = res.of_factor(Factor::Right);
//! assert!((right[0] - 1.445796).abs() < 1e-6);
//! # Ok::<(), singspec::Error>(())
//! ```

pub mod deficiency;
pub mod error;
pub mod extensions;
pub mod forms;
pub mod frobenius;
pub mod linalg;
pub mod logseries;
pub mod ode;
pub mod par;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};
pub use logseries::{AnalyticSeries, LogSeries};
pub use scalar::{Coeff, Gq};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! odekit: symbolic and numeric tools for ordinary differential equations.
//!
//! The crate is organised in four layers:
//!
//! * [`expr`] — expression trees with parsing, evaluation, differentiation,
//!   a restricted antiderivative table, and polynomial / rational-function
//!   algebra (root finding, partial fractions).
//! * [`first_order`] — classification and closed-form solution of first-order
//!   equations (separable, linear, exact, Bernoulli, homogeneous, Riccati).
//! * [`second_order`] — linear second-order machinery: auxiliary equations,
//!   undetermined coefficients, Wronskians, order reduction, variation of
//!   parameters, transform-based initial value problems, and power series.
//! * [`numeric`] — fixed-step Euler, improved Euler, and fourth-order
//!   Runge-Kutta integrators with error and convergence reporting.
//!
//! Every closed-form solution can be checked independently of the solver that
//! produced it via [`verify`], which relies only on evaluation and finite
//! differences.

pub mod error;
pub mod expr;
pub mod first_order;
pub mod numeric;
pub mod poly;
pub mod second_order;
pub mod verify;

mod quad;

pub use error::{Error, Result};
pub use expr::{parse, Bindings, Expr, Symbol};

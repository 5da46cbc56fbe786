//! Traveling-wave and balanced-growth-path solvers for a knowledge-diffusion
//! economy: a nonlocal Fisher-KPP equation with forced-speed kernel coupled to
//! a value-slope equation and a policy argmax.
//!
//! Modules:
//! - [`alpha`]: the concave learning technology α and its calculus,
//! - [`grid`] / [`profile`] / [`quad`]: grid-sampled functions with analytic
//!   exponential tails and weighted quadratures,
//! - [`kpp`]: waves of the forced-speed nonlocal KPP equation (shooting,
//!   foliation, critical waves, decay diagnostics),
//! - [`mfg`]: balanced growth paths via damped fixed-point iteration on the
//!   policy (critical and supercritical branches),
//! - [`verify`]: an independent collocation-Newton oracle and the property
//!   check suites,
//! - [`io`]: CSV/JSON formats shared with the command-line front end.

pub mod alpha;
pub mod config;
pub mod grid;
pub mod io;
pub mod kpp;
pub mod mfg;
pub mod ode;
pub mod profile;
pub mod quad;
pub mod verify;

pub use config::NumericsConfig;

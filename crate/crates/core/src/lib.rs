//! Approximate Bregman proximal gradient methods for composite nonconvex
//! problems `min f(x) + g(x)` over a closed convex set.
//!
//! The main solver pairs a diagonal second-order Bregman model with an
//! Armijo-Wolfe line search. PG, PGL, ABPG and BPG baselines share the same
//! trace and stopping machinery so runs are directly comparable.
//!
//! ```
//! use abpg_core::problems::{build_instance, Family, InstanceSpec};
//! use abpg_core::solvers::{solve, Method, SolverConfig};
//!
//! let spec = InstanceSpec::new(Family::LpLs, 10, 30, 0.1, 7);
//! let inst = build_instance(&spec).unwrap();
//! let x0 = ndarray::Array1::zeros(30);
//! let out = solve(&inst.problem, &x0, &SolverConfig::new(Method::AbpgVmaw)).unwrap();
//! assert!(out.final_obj() <= inst.problem.psi(&x0));
//! ```

// `!(a <= b)` is used on purpose so that NaN lands in the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod kernels;
pub mod linesearch;
pub mod par;
pub mod problems;
pub mod solvers;
pub mod subproblem;

pub use error::{Error, Result};
pub use kernels::Kernel;
pub use problems::{Family, InstanceSpec, Problem};
pub use solvers::{solve, Method, SolveOutcome, SolverConfig, TraceRecord};

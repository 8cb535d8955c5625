//! Algebraic modeling of linear, quadratic, conic and nonlinear optimization
//! problems, with sparse standard-form extraction, exact derivatives and
//! small reference solvers.
//!
//! The library is generic over the scalar type; the aliases at the crate root
//! fix it to `f64`.
//!
//! ```
//! use amlkit::{AffExpr, Expr, Model, ObjectiveSense, RowSense};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let mut m = Model::new();
//! let x = m.add_variable(-1.0, 1.0, false)?;
//! let y = m.add_variable(-1.0, 1.0, false)?;
//! m.set_objective(ObjectiveSense::Max, AffExpr::from_terms(vec![(1.0, x), (1.0, y)], 0.0))?;
//! // x² + y² ≤ 1 as a nonlinear row; the solver outer-approximates it.
//! let disk = Expr::var(x).powi(2) + Expr::var(y).powi(2);
//! m.add_nl_constraint(&disk, RowSense::Le, 1.0)?;
//! let r = amlkit::solve::solve(&m, 1e-6)?;
//! assert!((r.objective - 2f64.sqrt()).abs() < 1e-5);
//! # Ok(())
//! # }
//! ```

pub mod ad;
pub mod bench;
pub mod hessian;
pub mod model;
pub mod nlexpr;
pub mod scalar;
pub mod solve;

pub use model::{ConstraintId, ObjectiveSense, RowSense, VarId};
pub use scalar::{Dual, Real, Scalar};

pub type Model = model::Model<f64>;
pub type AffExpr = model::AffExpr<f64>;
pub type QuadExpr = model::QuadExpr<f64>;
pub type Constraint = model::Constraint<f64>;
pub type StandardForm = model::StandardForm<f64>;
pub type Expr = nlexpr::Expr<f64>;
pub type ExprGraph = nlexpr::ExprGraph<f64>;

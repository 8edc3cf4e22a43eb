//! Quadrature, root finding, ODE integration and linear/nonlinear solvers.

pub mod linear;
pub mod newton;
pub mod ode;
pub mod quadrature;
pub mod roots;

pub use linear::{solve_dense, solve_spd, CgOptions, CgSolution, CsrMatrix, LinearOperator};
pub use newton::{fd_jacobian, newton_solve, NewtonOptions, NewtonSolution};
pub use ode::{ode_solve, OdeOptions, OdeState, Trajectory};
pub use quadrature::{integrate_1d, midpoint_rule, DEFAULT_QUAD_TOL};
pub use roots::{bisect, find_root, Bracket, DEFAULT_ROOT_TOL};

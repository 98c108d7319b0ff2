//! Forward and dual solvers and characteristic flows.

mod dual;
mod flow;
mod forward;
pub mod io;

pub use dual::{solve_dual, DualTrajectory};
pub use flow::{characteristic_flow, FlowExit, FlowOptions, FlowPoint, Side, StateAccess};
pub use forward::{
    solve_forward, BoundaryContext, BoundaryControl, NormSample, SimOptions, Trajectory,
    ZeroControl,
};

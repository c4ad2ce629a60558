//! Multi-period p-center planning on networks with time-dependent travel
//! times.
//!
//! Facilities may be relocated at most `K` times over a planning horizon;
//! the goal is to minimize the sum over periods of the worst customer
//! service time. The crate provides the network model ([`tdnet`]), the
//! constant-length/stepwise-speed travel-time decomposition ([`igp`]), an
//! exact single-period p-center solver ([`pcenter`]), relocation-instant
//! selection ([`planner`]), the two-phase heuristic with bounds and
//! certificates ([`solver`]) and an instance/benchmark toolbox
//! ([`workbench`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod igp;
pub mod pcenter;
pub mod planner;
pub mod solver;
pub mod tdnet;
pub mod workbench;

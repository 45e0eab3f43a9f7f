//! Offline flow-MILP solver and online dispatch simulator for the k-food
//! problem (k servers, requests with source, destination and pickup window,
//! finite travel times) and its maxmin-fair variant.
//!
//! The pipeline is: [`metric`] → [`instance`] → [`flownet`] → [`offline`] for
//! offline optima, or [`instance`] → [`online`] for the dispatch
//! policies, with [`metrics`] summarising either.

#![allow(clippy::needless_range_loop)]

pub mod exec;
pub mod flownet;
pub mod instance;
pub mod metric;
pub mod metrics;
pub mod offline;
pub mod online;

pub use exec::Exec;
pub use instance::{Instance, Request, Time};
pub use metric::{Dist, MetricSpace, NodeId};

//! Impulsive semiflows on compact subsets of Euclidean space.
//!
//! An impulsive dynamical system couples a continuous base semiflow with an
//! impulsive set `D` and an impulse map `I: D -> X`: trajectories follow the
//! base flow until they hit `D`, then jump through `I` and continue. This crate
//! builds those trajectories and the objects used to reason about their
//! long-term behaviour:
//!
//! * [`expr`] – the small expression language used for vector fields, sections
//!   and impulse maps,
//! * [`flow`] – base semiflows (closed forms or fixed-step RK4),
//! * [`impulse`] – first hitting times, impulsive trajectories, Zeno guards,
//! * [`nonwandering`] – grid estimates of the non-wandering set and the
//!   first-hit profile on it,
//! * [`quotient`] – the gluing relation `x ~ I(x)`, its chain pseudometric and
//!   the induced quotient semiflow,
//! * [`measure`] – discrete probability measures, push-forwards, time averages
//!   and invariance defects.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` style guards reject NaN along with the failing range.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod expr;
pub mod flow;
pub mod impulse;
pub mod measure;
pub mod nonwandering;
pub mod point;
pub mod quotient;
pub mod scenarios;

pub use error::{Error, ExprError, Result};
pub use expr::{Expr, FieldExpr};
pub use flow::BaseFlow;
pub use impulse::{
    build_trajectory, check_separation, first_hit, phi, sample_impulsive_set, Crossing, Hit,
    ImpulseMap, ImpulseSurface, ImpulsiveTrajectory, Knobs, Scenario, Truncation,
};
pub use measure::{DefectReport, DiscreteMeasure, Partition};
pub use nonwandering::{Grid, HypothesisAudit, OmegaEstimate, RecurrenceParams, TauDProfile};
pub use point::{Chart, Domain, Point, MAX_DIM};
pub use quotient::{EquivClass, GluingGraph, QuotientPoint};

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axgd;
pub mod baselines;
pub mod error;
pub mod geodesic_map;
pub mod manifold;
pub mod objectives;
pub mod reductions;
pub mod sampling;

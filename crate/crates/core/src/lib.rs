//! k-nearest-neighbour classification with tie-breaking, ball geometry in
//! ultrametric and Heisenberg spaces, and the measure constructions that
//! govern strong consistency of the k-NN rule.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balls;
pub mod experiments;
pub mod knn;
pub mod koranyi;
pub mod measure;
pub mod metric;
pub mod rng;

// Negated float comparisons deliberately reject NaN; series constants keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::too_many_arguments)]

pub mod accounting;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod mechanism;
pub mod parallel;
pub mod secagg;
pub mod seed;
pub mod simulation;

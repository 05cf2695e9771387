//! Certified intersection tests for exact multinomial confidence sets.
//!
//! Given two observed count vectors, decide whether there is a multinomial
//! parameter at which both exact p-values reach the level `α`, with a margin
//! `τ`, or certify that there is none. See [`engine::decide_with_faces`].

pub mod baseline;
pub mod bench;
pub mod bounds;
pub mod domain;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod multinomial;
pub mod oracle;
pub mod report;

pub use bounds::{CellBounds, PValueInterval, VertexProbCache};
pub use domain::SearchDomain;
pub use engine::{decide_interior, decide_with_faces, plan_faces, Decision, DecisionConfig, Verdict};
pub use error::{MvcError, Result};
pub use geometry::{LogOddsPoint, SimplexCell};
pub use multinomial::{exact_p_value, CountVector, OutcomeTable, SimplexPoint};

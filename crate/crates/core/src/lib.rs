//! Reaction diagram parsing: chemistry primitives, geometry, perception, planning,
//! graph reasoning, evaluation and the end-to-end pipeline.

pub mod chem;
pub mod eval;
pub mod geometry;
pub mod perception;
pub mod pipeline;
pub mod planner;
pub mod reaction;
pub mod reasoning;
pub mod util;

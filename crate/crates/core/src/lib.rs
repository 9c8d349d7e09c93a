//! Explanation-stability diagnostics: train a model class many times,
//! reduce each run to a global attribution vector, and ask whether those
//! vectors form one explanatory mode or several.

pub mod attribution;
pub mod data;
pub mod disagreement;
pub mod harness;
pub mod landscape;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod runs;

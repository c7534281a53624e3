//! agielo — a rating engine for benchmark result matrices.
//!
//! Agents (models or humans) and test cases are treated as two player
//! categories of one rating population: every benchmark result becomes a
//! match between an agent and a case, and a Glicko-style update jointly
//! estimates agent competency and case difficulty on the familiar
//! chess-convention scale. On top of the converged ratings the crate
//! predicts per-case performance, extracts long-tail hard sets, quantifies
//! competency gaps to oracle-level mastery, and measures the reliability of
//! its own ratings against the raw data.
//!
//! The pieces, bottom to top:
//!
//! - [`rating`] — rating beliefs and the Elo / Glicko-style update math
//! - [`scoring`] — metric-to-score conversion and metric composition helpers
//! - [`engine`] — CSV ingestion, randomized match scheduling, the rating
//!   loop, checkpoint snapshots, and the run document
//! - [`analysis`] — prediction, hard sets, competency gaps, percentile
//!   curves, and the reliability suite
//! - [`synthetic`] — a ground-truth simulator used to validate recovery
//!   end to end

pub mod analysis;
pub mod engine;
pub mod error;
pub mod rating;
pub mod scoring;
pub mod synthetic;
pub(crate) mod util;

pub use error::{Error, Result};
pub use rating::{Rating, RatingConstants, Variant};

//! Contextual Importance and Utility (CIU) over hierarchical feature
//! coalitions.
//!
//! The crate is organised bottom-up:
//!
//! - [`coalition`], [`game`], [`levels`]: exact cooperative-game primitives
//!   (dividends, core, imputations) and levels structures.
//! - [`data`], [`model`]: CSV ingestion and the black-box predictors.
//! - [`vocabulary`], [`ciu`]: intermediate concepts and the CI/CU/influence
//!   engine.
//! - [`shapley`]: a Shapley-value baseline for comparison.
//! - [`report`]: explanation documents and their text/SVG/JSON renderings.

pub mod coalition;
pub mod game;
pub mod levels;
pub mod config;
pub mod data;
pub mod fixtures;
pub mod model;
pub mod vocabulary;
pub mod sampling;
pub mod ciu;
pub mod shapley;
pub mod report;
pub mod demo;

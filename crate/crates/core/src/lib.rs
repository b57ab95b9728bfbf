//! Perfect-play endgame tablebases and the tooling built on them for
//! measuring human error: blunder labeling of recorded games, difficulty,
//! skill and time features, aggregate blunder-rate curves, the quantal
//! response fit, synthetic populations and the prediction tasks.

pub mod analytics;
pub mod chess;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod synth;
pub mod tablebase;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

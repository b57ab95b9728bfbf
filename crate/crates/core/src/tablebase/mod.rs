//! Endgame tablebases built by retrograde analysis, and blunder labeling
//! against them.

mod generate;
mod index;
mod set;
mod signature;
mod table;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::Move;

pub use generate::{generate, GenStats};
pub use index::Indexer;
pub use set::TablebaseSet;
pub use signature::{MaterialSig, NAME_ORDER};
pub use table::{Tablebase, FORMAT_VERSION, MAGIC};

/// Game-theoretic value for the side to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wdl {
    Loss,
    Draw,
    Win,
}

impl Wdl {
    /// The same outcome seen by the other player.
    pub fn negate(self) -> Wdl {
        match self {
            Wdl::Loss => Wdl::Win,
            Wdl::Draw => Wdl::Draw,
            Wdl::Win => Wdl::Loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveLabel {
    #[serde(rename = "move")]
    pub mv: Move,
    pub child_value_for_mover: Wdl,
    pub is_blunder: bool,
}

/// Result of labeling every legal move of a position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub parent: Wdl,
    pub labels: Vec<MoveLabel>,
    pub n: u32,
    pub b: u32,
}

#[derive(Debug, Error)]
pub enum TablebaseError {
    #[error("no tablebase loaded for {0}")]
    MissingTable(MaterialSig),
    #[error("tablebase {0} has no distance-to-mate data")]
    MissingDtm(MaterialSig),
    #[error("position has castling rights")]
    CastlingRights,
    #[error("invalid material signature {0:?}")]
    BadSignature(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a tablebase file")]
    BadMagic,
    #[error("unsupported tablebase format version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("tablebase file is truncated")]
    Truncated,
    #[error("tablebase checksum mismatch")]
    Checksum,
    #[error("malformed tablebase file: {0}")]
    Malformed(String),
}

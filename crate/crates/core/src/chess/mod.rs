//! Board representation, FEN, legal move generation and symmetry.

pub mod attacks;
mod fen;
mod position;
mod san;
mod symmetry;
mod types;

pub use fen::{placement_fen, FenError};
pub use position::{
    Board, CastlingRights, IllegalMove, Move, MoveList, Position, PositionError, TerminalState,
};
pub use san::{is_san_syntax, SanError};
pub use symmetry::{CastlingRightsPresent, Transform};
pub use types::{Bitboard, Color, Piece, Role, Square};

/// Parses a FEN string into a validated position.
pub fn parse_fen(text: &str) -> Result<Position, FenError> {
    Position::from_fen(text.trim())
}

pub fn to_fen(p: &Position) -> String {
    p.to_fen()
}

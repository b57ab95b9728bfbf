//! Independent reference implementations used to check the fast paths.

pub mod mate;
pub mod naive;

pub use mate::{negamax_violation, MateSearch};
pub use naive::{perft as naive_perft, Mailbox};

use crate::chess::Position;

/// Leaf count of the legal move tree using the bitboard generator.
pub fn perft(p: &Position, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = p.legal_moves();
    if depth == 1 {
        return moves.len() as u64;
    }
    moves.iter().map(|&m| perft(&p.play_unchecked(m), depth - 1)).sum()
}

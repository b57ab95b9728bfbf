//! The four-element symmetry group used to identify equivalent positions:
//! left-right reflection, top-bottom reflection with colors and side to move
//! swapped, and their composition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::position::{Board, CastlingRights, Move, Position};
use super::types::{Color, Piece, Square};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Transform {
    pub mirror_lr: bool,
    pub color_flip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("position has castling rights; symmetry reduction is undefined")]
pub struct CastlingRightsPresent;

impl Transform {
    pub const IDENTITY: Transform = Transform {
        mirror_lr: false,
        color_flip: false,
    };

    pub const ALL: [Transform; 4] = [
        Transform::IDENTITY,
        Transform {
            mirror_lr: true,
            color_flip: false,
        },
        Transform {
            mirror_lr: false,
            color_flip: true,
        },
        Transform {
            mirror_lr: true,
            color_flip: true,
        },
    ];

    pub fn is_identity(self) -> bool {
        self == Transform::IDENTITY
    }

    /// Group product; every element is its own inverse.
    pub fn then(self, other: Transform) -> Transform {
        Transform {
            mirror_lr: self.mirror_lr ^ other.mirror_lr,
            color_flip: self.color_flip ^ other.color_flip,
        }
    }

    #[inline]
    pub fn square(self, sq: Square) -> Square {
        let sq = if self.mirror_lr { sq.mirror_file() } else { sq };
        if self.color_flip {
            sq.mirror_rank()
        } else {
            sq
        }
    }

    #[inline]
    pub fn color(self, color: Color) -> Color {
        if self.color_flip {
            !color
        } else {
            color
        }
    }

    pub fn board(self, board: &Board) -> Board {
        if self.is_identity() {
            return *board;
        }
        let mut out = Board::empty();
        for (sq, piece) in board.pieces() {
            out.put(self.square(sq), Piece::new(self.color(piece.color), piece.role));
        }
        out
    }

    pub fn mv(self, m: Move) -> Move {
        Move {
            from: self.square(m.from),
            to: self.square(m.to),
            promotion: m.promotion,
        }
    }

    /// Applies the transform. Castling rights follow a color flip; they are
    /// dropped by a left-right reflection, which has no castling analogue.
    pub fn apply(self, p: &Position) -> Position {
        let castling = if self.mirror_lr {
            CastlingRights::NONE
        } else if self.color_flip {
            p.castling.swap_colors()
        } else {
            p.castling
        };
        Position {
            board: self.board(&p.board),
            turn: self.color(p.turn),
            ep_square: p.ep_square.map(|s| self.square(s)),
            castling,
            halfmove_clock: p.halfmove_clock,
            fullmove_number: p.fullmove_number,
        }
    }
}

impl Position {
    /// Representative of the position's symmetry orbit with the
    /// lexicographically least FEN (move counters excluded), together with the
    /// transform that maps `self` onto it.
    pub fn canonicalize(&self) -> Result<(Position, Transform), CastlingRightsPresent> {
        if !self.castling.is_empty() {
            return Err(CastlingRightsPresent);
        }
        let mut best: Option<(String, Position, Transform)> = None;
        for t in Transform::ALL {
            let candidate = t.apply(self);
            let key = candidate.epd();
            if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
                best = Some((key, candidate, t));
            }
        }
        let (_, p, t) = best.unwrap();
        Ok((p, t))
    }

    /// Canonical FEN with normalized move counters.
    pub fn canonical_fen(&self) -> Result<String, CastlingRightsPresent> {
        Ok(format!("{} 0 1", self.canonicalize()?.0.epd()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(fen: &str) -> Position {
        Position::from_fen(fen).unwrap()
    }

    #[test]
    fn mirror_pair_shares_canonical_form() {
        let p = pos("k7/8/1K6/8/8/8/2Q5/8 w - - 0 1");
        let m = Transform::ALL[1].apply(&p);
        assert_eq!(m.to_fen(), "7k/8/6K1/8/8/8/5Q2/8 w - - 0 1");
        assert_eq!(p.canonicalize().unwrap().0, m.canonicalize().unwrap().0);
    }

    #[test]
    fn whole_orbit_maps_to_one_representative() {
        let p = pos("8/8/3k4/8/4P3/8/2K5/8 b - - 0 1");
        let canon = p.canonicalize().unwrap().0;
        for t in Transform::ALL {
            let (c, applied) = t.apply(&p).canonicalize().unwrap();
            assert_eq!(c, canon);
            assert_eq!(applied.then(t).apply(&p), c);
        }
    }

    #[test]
    fn black_to_move_can_become_white_to_move() {
        let p = pos("8/8/8/8/8/2k5/7q/K7 b - - 0 1");
        let (c, t) = p.canonicalize().unwrap();
        assert_eq!(c.turn(), Color::White);
        assert!(t.color_flip);
    }

    #[test]
    fn idempotent() {
        let p = pos("8/8/8/3k4/8/8/1PK5/8 w - - 0 1");
        let (c, _) = p.canonicalize().unwrap();
        let (c2, t2) = c.canonicalize().unwrap();
        assert_eq!(c, c2);
        assert!(t2.is_identity());
    }

    #[test]
    fn castling_rights_rejected() {
        let p = pos("r3k3/8/8/8/8/8/8/4K3 b q - 0 1");
        assert_eq!(p.canonicalize(), Err(CastlingRightsPresent));
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TablebaseError;
use crate::chess::{Board, Color, Piece, Position, Role};

/// Non-king roles in the order they appear in signature names.
pub const NAME_ORDER: [Role; 5] = [Role::Queen, Role::Rook, Role::Bishop, Role::Knight, Role::Pawn];

/// Material of both sides, normalized so that White is the stronger side.
/// Sides compare by piece count, then by role counts in `NAME_ORDER`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaterialSig {
    // Counts per side, indexed like `NAME_ORDER`.
    white: [u8; 5],
    black: [u8; 5],
}

fn side_key(counts: &[u8; 5]) -> (u8, [u8; 5]) {
    (counts.iter().sum(), *counts)
}

fn counts_of(board: &Board, color: Color) -> [u8; 5] {
    NAME_ORDER.map(|role| board.by_piece(Piece::new(color, role)).count() as u8)
}

impl MaterialSig {
    /// Builds a normalized signature from the non-king material of each side.
    pub fn from_counts(a: [u8; 5], b: [u8; 5]) -> MaterialSig {
        if side_key(&a) >= side_key(&b) {
            MaterialSig { white: a, black: b }
        } else {
            MaterialSig { white: b, black: a }
        }
    }

    pub fn of_board(board: &Board) -> MaterialSig {
        MaterialSig::from_counts(counts_of(board, Color::White), counts_of(board, Color::Black))
    }

    pub fn of(p: &Position) -> MaterialSig {
        MaterialSig::of_board(p.board())
    }

    pub fn kvk() -> MaterialSig {
        MaterialSig {
            white: [0; 5],
            black: [0; 5],
        }
    }

    /// Non-king counts of one side of the normalized signature.
    pub fn counts(&self, color: Color) -> [u8; 5] {
        match color {
            Color::White => self.white,
            Color::Black => self.black,
        }
    }

    pub fn count(&self, color: Color, role: Role) -> u8 {
        match NAME_ORDER.iter().position(|&r| r == role) {
            Some(i) => self.counts(color)[i],
            None => 1,
        }
    }

    /// Whether the board's White pieces match the signature's White side.
    pub fn white_matches(&self, board: &Board) -> bool {
        counts_of(board, Color::White) == self.white
    }

    /// Both sides carry the same material.
    pub fn is_symmetric(&self) -> bool {
        self.white == self.black
    }

    /// Total piece count including kings.
    pub fn piece_count(&self) -> u32 {
        2 + self.white.iter().chain(&self.black).map(|&c| c as u32).sum::<u32>()
    }

    pub fn pawn_count(&self) -> u32 {
        (self.white[4] + self.black[4]) as u32
    }

    /// Both sides have pawns, so en passant can arise.
    pub fn has_opposing_pawns(&self) -> bool {
        self.white[4] > 0 && self.black[4] > 0
    }

    /// Signatures reachable by one capture and/or one promotion.
    pub fn dependencies(&self) -> Vec<MaterialSig> {
        let mut out = Vec::new();
        for (mover, other) in [(self.white, self.black), (self.black, self.white)] {
            // Plain captures of any non-king piece of `other`.
            for i in 0..5 {
                if other[i] > 0 {
                    let mut o = other;
                    o[i] -= 1;
                    out.push(MaterialSig::from_counts(mover, o));
                }
            }
            // Promotions, optionally capturing on the promotion square (never a pawn there).
            if mover[4] > 0 {
                for promoted in 0..4 {
                    let mut m = mover;
                    m[4] -= 1;
                    m[promoted] += 1;
                    out.push(MaterialSig::from_counts(m, other));
                    for i in 0..4 {
                        if other[i] > 0 {
                            let mut o = other;
                            o[i] -= 1;
                            out.push(MaterialSig::from_counts(m, o));
                        }
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Generation order key: every dependency sorts strictly earlier.
    pub fn order_key(&self) -> (u32, u32, MaterialSig) {
        (self.piece_count(), self.pawn_count(), *self)
    }

    /// All signatures with at most `k` pieces, in dependency order.
    pub fn all_up_to(k: u32) -> Vec<MaterialSig> {
        let mut out = Vec::new();
        for total in 2..=k {
            let extra = total - 2;
            for a in multisets(extra) {
                let b_size = extra - a.iter().map(|&c| c as u32).sum::<u32>();
                for b in multisets(b_size) {
                    let s = MaterialSig::from_counts(a, b);
                    if s.white == a && s.piece_count() == total {
                        out.push(s);
                    }
                }
            }
        }
        out.sort_by_key(|s| s.order_key());
        out.dedup();
        out
    }
}

// All role-count vectors with total at most `max`; callers filter by exact size.
fn multisets(max: u32) -> Vec<[u8; 5]> {
    let mut out = Vec::new();
    let mut cur = [0u8; 5];
    fn rec(i: usize, left: u32, cur: &mut [u8; 5], out: &mut Vec<[u8; 5]>) {
        if i == 5 {
            out.push(*cur);
            return;
        }
        for c in 0..=left {
            cur[i] = c as u8;
            rec(i + 1, left - c, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max, &mut cur, &mut out);
    out
}

impl fmt::Display for MaterialSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |counts: &[u8; 5]| {
            let mut s = String::from("K");
            for (i, role) in NAME_ORDER.iter().enumerate() {
                for _ in 0..counts[i] {
                    s.push(role.upper());
                }
            }
            s
        };
        write!(f, "{}v{}", side(&self.white), side(&self.black))
    }
}

impl fmt::Debug for MaterialSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MaterialSig {
    type Err = TablebaseError;

    /// Accepts names like `KQvK` or `KvKR`; the result is normalized.
    fn from_str(s: &str) -> Result<MaterialSig, TablebaseError> {
        let bad = || TablebaseError::BadSignature(s.to_string());
        let (a, b) = s.split_once('v').ok_or_else(bad)?;
        let side = |text: &str| -> Result<[u8; 5], TablebaseError> {
            let rest = text.strip_prefix('K').ok_or_else(bad)?;
            let mut counts = [0u8; 5];
            for c in rest.chars() {
                let role = Role::from_upper(c).ok_or_else(bad)?;
                let i = NAME_ORDER.iter().position(|&r| r == role).ok_or_else(bad)?;
                counts[i] += 1;
            }
            Ok(counts)
        };
        Ok(MaterialSig::from_counts(side(a)?, side(b)?))
    }
}

impl Serialize for MaterialSig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MaterialSig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<MaterialSig, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

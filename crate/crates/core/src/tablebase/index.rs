//! Dense indexing of the positions of one material signature.
//!
//! Layout, most significant first: side to move (omitted for symmetric
//! material, which stores White to move only), White king on files a-d
//! (32), Black king (64), then every other piece in signature order, White
//! first, 64 squares each or 48 for pawns. Identical pieces are stored with
//! strictly increasing squares. Slots that violate any of this, or describe an
//! illegal position, are broken.

use arrayvec::ArrayVec;

use super::signature::{MaterialSig, NAME_ORDER};
use crate::chess::{attacks, Bitboard, Board, Color, Piece, Position, Role, Square, Transform};

#[derive(Debug, Clone)]
pub struct Indexer {
    sig: MaterialSig,
    // Non-king pieces in table orientation, in index order.
    pieces: ArrayVec<Piece, 8>,
    sides: u64,
    size: u64,
}

fn radix(role: Role) -> u64 {
    if role == Role::Pawn {
        48
    } else {
        64
    }
}

impl Indexer {
    pub fn new(sig: MaterialSig) -> Indexer {
        let mut pieces = ArrayVec::new();
        for color in Color::ALL {
            let counts = sig.counts(color);
            for (i, &role) in NAME_ORDER.iter().enumerate() {
                for _ in 0..counts[i] {
                    pieces.push(Piece::new(color, role));
                }
            }
        }
        let sides = if sig.is_symmetric() { 1 } else { 2 };
        let size = pieces.iter().fold(sides * 32 * 64, |acc, p| acc * radix(p.role));
        Indexer {
            sig,
            pieces,
            sides,
            size,
        }
    }

    pub fn sig(&self) -> MaterialSig {
        self.sig
    }

    /// Number of index slots, broken ones included.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// The transform taking a position of this material to table
    /// orientation: colors follow the signature (or, for symmetric material,
    /// White to move), then the White king is mirrored onto files a-d.
    #[inline]
    pub fn orientation(&self, board: &Board, turn: Color) -> Transform {
        let color_flip = if self.sig.is_symmetric() {
            turn == Color::Black
        } else {
            !self.sig.white_matches(board)
        };
        let white_king = board
            .king_of(if color_flip { Color::Black } else { Color::White })
            .expect("valid position has both kings");
        Transform {
            mirror_lr: white_king.file() >= 4,
            color_flip,
        }
    }

    /// Index of a position with this material, ignoring any en-passant
    /// square. Symmetry-equivalent positions share an index.
    pub fn index(&self, board: &Board, turn: Color) -> u64 {
        let t = self.orientation(board, turn);
        let mut idx = if self.sides == 2 {
            t.color(turn).index() as u64
        } else {
            0
        };
        let wk = t.square(board.king_of(t.color(Color::White)).unwrap());
        idx = idx * 32 + (wk.rank() * 4 + wk.file()) as u64;
        let bk = t.square(board.king_of(t.color(Color::Black)).unwrap());
        idx = idx * 64 + bk.index() as u64;
        let mut i = 0;
        while i < self.pieces.len() {
            let piece = self.pieces[i];
            let source = Piece::new(t.color(piece.color), piece.role);
            let mut squares: ArrayVec<u8, 8> =
                board.by_piece(source).map(|s| t.square(s).index() as u8).collect();
            squares.sort_unstable();
            for s in squares {
                idx = idx * radix(piece.role) + s as u64 - if piece.role == Role::Pawn { 8 } else { 0 };
                i += 1;
            }
        }
        idx
    }

    pub fn index_of(&self, p: &Position) -> u64 {
        self.index(p.board(), p.turn())
    }

    /// The position stored at `idx` in table orientation, or `None` for a
    /// broken slot.
    pub fn raw(&self, mut idx: u64) -> Option<Position> {
        if idx >= self.size {
            return None;
        }
        let mut squares = [0u8; 8];
        for i in (0..self.pieces.len()).rev() {
            let r = radix(self.pieces[i].role);
            squares[i] = (idx % r) as u8 + if r == 48 { 8 } else { 0 };
            idx /= r;
        }
        let bk = Square::new((idx % 64) as u8);
        idx /= 64;
        let wk32 = (idx % 32) as u8;
        let wk = Square::from_coords(wk32 % 4, wk32 / 4);
        idx /= 32;
        let turn = if idx == 0 { Color::White } else { Color::Black };

        if wk == bk || attacks::king(wk).contains(bk) {
            return None;
        }
        let mut board = Board::empty();
        board.put(wk, Piece::new(Color::White, Role::King));
        board.put(bk, Piece::new(Color::Black, Role::King));
        let mut occupied = Bitboard::from_square(wk) | Bitboard::from_square(bk);
        for i in 0..self.pieces.len() {
            let sq = Square::new(squares[i]);
            if occupied.contains(sq) {
                return None;
            }
            if i > 0 && self.pieces[i] == self.pieces[i - 1] && squares[i] < squares[i - 1] {
                return None;
            }
            occupied.set(sq);
            board.put(sq, self.pieces[i]);
        }
        let them = !turn;
        if board.is_attacked(board.king_of(them).unwrap(), turn) {
            return None;
        }
        Some(Position::from_raw(board, turn, None))
    }

    /// Inverse of `index` up to symmetry: the canonical form of the stored
    /// position.
    pub fn deindex(&self, idx: u64) -> Option<Position> {
        self.raw(idx).map(|p| p.canonicalize().expect("tablebase positions have no castling rights").0)
    }
}

use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use super::attacks;
use super::types::{Bitboard, Color, Piece, Role, Square};

/// Piece placement without game-state flags.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Board {
    by_color: [Bitboard; 2],
    by_role: [Bitboard; 6],
}

impl Board {
    pub fn empty() -> Board {
        Board::default()
    }

    #[inline]
    pub fn occupied(&self) -> Bitboard {
        self.by_color[0] | self.by_color[1]
    }

    #[inline]
    pub fn by_color(&self, color: Color) -> Bitboard {
        self.by_color[color.index()]
    }

    #[inline]
    pub fn by_role(&self, role: Role) -> Bitboard {
        self.by_role[role.index()]
    }

    #[inline]
    pub fn by_piece(&self, piece: Piece) -> Bitboard {
        self.by_color[piece.color.index()] & self.by_role[piece.role.index()]
    }

    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        let color = if self.by_color[0].contains(sq) {
            Color::White
        } else if self.by_color[1].contains(sq) {
            Color::Black
        } else {
            return None;
        };
        let role = Role::ALL
            .into_iter()
            .find(|r| self.by_role[r.index()].contains(sq))?;
        Some(Piece { color, role })
    }

    #[inline]
    pub fn put(&mut self, sq: Square, piece: Piece) {
        self.by_color[piece.color.index()].set(sq);
        self.by_role[piece.role.index()].set(sq);
    }

    pub fn remove(&mut self, sq: Square) -> Option<Piece> {
        let piece = self.piece_at(sq)?;
        self.by_color[piece.color.index()].clear(sq);
        self.by_role[piece.role.index()].clear(sq);
        Some(piece)
    }

    pub fn king_of(&self, color: Color) -> Option<Square> {
        self.by_piece(Piece::new(color, Role::King)).first()
    }

    pub fn pieces(&self) -> impl Iterator<Item = (Square, Piece)> + '_ {
        self.occupied().map(move |sq| (sq, self.piece_at(sq).unwrap()))
    }

    pub fn count(&self) -> u32 {
        self.occupied().count()
    }

    /// Pieces of `attacker` color that attack `sq`, given an occupancy.
    #[inline]
    pub fn attackers(&self, sq: Square, attacker: Color, occupied: Bitboard) -> Bitboard {
        let them = self.by_color(attacker);
        let rooks = self.by_role(Role::Rook) | self.by_role(Role::Queen);
        let bishops = self.by_role(Role::Bishop) | self.by_role(Role::Queen);
        them & ((attacks::knight(sq) & self.by_role(Role::Knight))
            | (attacks::king(sq) & self.by_role(Role::King))
            | (attacks::pawn(!attacker, sq) & self.by_role(Role::Pawn))
            | (attacks::rook(sq, occupied) & rooks)
            | (attacks::bishop(sq, occupied) & bishops))
    }

    #[inline]
    pub fn is_attacked(&self, sq: Square, attacker: Color) -> bool {
        self.attackers(sq, attacker, self.occupied()).has_any()
    }
}

impl fmt::Debug for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rank in (0..8).rev() {
            for file in 0..8 {
                let c = self
                    .piece_at(Square::from_coords(file, rank))
                    .map_or('.', Piece::fen_char);
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Castling availability, one bit per (color, side).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Debug)]
pub struct CastlingRights(u8);

impl CastlingRights {
    pub const WHITE_KING: u8 = 1;
    pub const WHITE_QUEEN: u8 = 2;
    pub const BLACK_KING: u8 = 4;
    pub const BLACK_QUEEN: u8 = 8;

    pub const NONE: CastlingRights = CastlingRights(0);
    pub const ALL: CastlingRights = CastlingRights(15);

    pub fn from_bits(bits: u8) -> CastlingRights {
        CastlingRights(bits & 15)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn has(self, flag: u8) -> bool {
        self.0 & flag != 0
    }

    fn remove(&mut self, flag: u8) {
        self.0 &= !flag;
    }

    fn kingside(color: Color) -> u8 {
        match color {
            Color::White => Self::WHITE_KING,
            Color::Black => Self::BLACK_KING,
        }
    }

    fn queenside(color: Color) -> u8 {
        match color {
            Color::White => Self::WHITE_QUEEN,
            Color::Black => Self::BLACK_QUEEN,
        }
    }

    /// Rights lost when a piece leaves or arrives on `sq`.
    fn touched_by(sq: Square) -> u8 {
        match sq.index() {
            0 => Self::WHITE_QUEEN,
            4 => Self::WHITE_KING | Self::WHITE_QUEEN,
            7 => Self::WHITE_KING,
            56 => Self::BLACK_QUEEN,
            60 => Self::BLACK_KING | Self::BLACK_QUEEN,
            63 => Self::BLACK_KING,
            _ => 0,
        }
    }

    pub fn swap_colors(self) -> CastlingRights {
        CastlingRights(((self.0 & 3) << 2) | ((self.0 >> 2) & 3))
    }
}

/// A move in from-to form. Castling is encoded as the king's two-square step.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub from: Square,
    pub to: Square,
    pub promotion: Option<Role>,
}

impl Move {
    pub const fn new(from: Square, to: Square) -> Move {
        Move {
            from,
            to,
            promotion: None,
        }
    }

    pub const fn promote(from: Square, to: Square, role: Role) -> Move {
        Move {
            from,
            to,
            promotion: Some(role),
        }
    }

    /// UCI long algebraic notation, e.g. `e2e4` or `e7e8q`.
    pub fn to_uci(&self) -> String {
        let mut s = format!("{}{}", self.from, self.to);
        if let Some(r) = self.promotion {
            s.push(r.upper().to_ascii_lowercase());
        }
        s
    }

    pub fn from_uci(s: &str) -> Option<Move> {
        if s.len() < 4 || s.len() > 5 || !s.is_ascii() {
            return None;
        }
        let from = Square::parse(&s[0..2])?;
        let to = Square::parse(&s[2..4])?;
        let promotion = match s.as_bytes().get(4) {
            None => None,
            Some(&c) => match Role::from_upper((c as char).to_ascii_uppercase())? {
                Role::Pawn | Role::King => return None,
                r => Some(r),
            },
        };
        (from != to).then_some(Move { from, to, promotion })
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_uci())
    }
}

impl serde::Serialize for Move {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Move {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Move, D::Error> {
        let s = String::deserialize(d)?;
        Move::from_uci(&s).ok_or_else(|| serde::de::Error::custom(format!("bad UCI move {s:?}")))
    }
}

impl fmt::Debug for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_uci())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum TerminalState {
    Checkmate,
    Stalemate,
    InsufficientMaterial,
    Nonterminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PositionError {
    #[error("{color:?} has {count} kings")]
    KingCount { color: Color, count: u32 },
    #[error("pawn on back rank at {0}")]
    PawnOnBackRank(Square),
    #[error("side not to move is in check")]
    OpponentInCheck,
    #[error("castling rights without king and rook on their home squares")]
    InconsistentCastling,
    #[error("en passant square {0} has no matching double-pushed pawn")]
    InconsistentEnPassant(Square),
    #[error("too many pieces for {0:?}")]
    TooManyPieces(Color),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("illegal move {0}")]
pub struct IllegalMove(pub Move);

/// Full chess state. Halfmove clock and fullmove number do not take part in
/// equality or hashing.
#[derive(Clone, Copy)]
pub struct Position {
    pub(crate) board: Board,
    pub(crate) turn: Color,
    pub(crate) ep_square: Option<Square>,
    pub(crate) castling: CastlingRights,
    pub(crate) halfmove_clock: u32,
    pub(crate) fullmove_number: u32,
}

impl PartialEq for Position {
    fn eq(&self, other: &Position) -> bool {
        self.board == other.board
            && self.turn == other.turn
            && self.ep_square == other.ep_square
            && self.castling == other.castling
    }
}

impl Eq for Position {}

impl Hash for Position {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.board.hash(state);
        self.turn.hash(state);
        self.ep_square.hash(state);
        self.castling.hash(state);
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Position({})", self.to_fen())
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fen())
    }
}

pub type MoveList = arrayvec::ArrayVec<Move, 256>;

impl Position {
    pub fn startpos() -> Position {
        Position::from_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1")
            .expect("start position is valid")
    }

    /// Builds a validated position from raw parts. An en-passant square
    /// that admits no legal capture is dropped.
    pub fn from_parts(
        board: Board,
        turn: Color,
        castling: CastlingRights,
        ep_square: Option<Square>,
        halfmove_clock: u32,
        fullmove_number: u32,
    ) -> Result<Position, PositionError> {
        let mut pos = Position {
            board,
            turn,
            ep_square: None,
            castling,
            halfmove_clock,
            fullmove_number: fullmove_number.max(1),
        };
        pos.validate_placement()?;
        if let Some(ep) = ep_square {
            // The capturer's relative sixth rank, with the pushed pawn in
            // front of it and the origin square behind it vacant.
            let ok = ep.relative_rank(turn) == 5 && {
                let pushed = ep.offset(-turn.forward()).unwrap();
                let origin = ep.offset(turn.forward()).unwrap();
                board.by_piece(Piece::new(!turn, Role::Pawn)).contains(pushed)
                    && !board.occupied().contains(ep)
                    && !board.occupied().contains(origin)
            };
            if !ok {
                return Err(PositionError::InconsistentEnPassant(ep));
            }
            pos.ep_square = Some(ep);
            if !pos.has_legal_ep_capture() {
                pos.ep_square = None;
            }
        }
        Ok(pos)
    }

    /// Assembles a position without validation; callers guarantee legality.
    pub(crate) fn from_raw(board: Board, turn: Color, ep_square: Option<Square>) -> Position {
        Position {
            board,
            turn,
            ep_square,
            castling: CastlingRights::NONE,
            halfmove_clock: 0,
            fullmove_number: 1,
        }
    }

    fn validate_placement(&self) -> Result<(), PositionError> {
        for color in Color::ALL {
            let kings = self.board.by_piece(Piece::new(color, Role::King)).count();
            if kings != 1 {
                return Err(PositionError::KingCount { color, count: kings });
            }
            if self.board.by_color(color).count() > 16 {
                return Err(PositionError::TooManyPieces(color));
            }
        }
        let back_ranks = Bitboard(0xff00_0000_0000_00ff);
        if let Some(sq) = (self.board.by_role(Role::Pawn) & back_ranks).first() {
            return Err(PositionError::PawnOnBackRank(sq));
        }
        let c = self.castling;
        let home = |sq: u8, piece: Piece| self.board.by_piece(piece).contains(Square::new(sq));
        let wk = Piece::new(Color::White, Role::King);
        let bk = Piece::new(Color::Black, Role::King);
        let wr = Piece::new(Color::White, Role::Rook);
        let br = Piece::new(Color::Black, Role::Rook);
        if (c.has(CastlingRights::WHITE_KING) && !(home(4, wk) && home(7, wr)))
            || (c.has(CastlingRights::WHITE_QUEEN) && !(home(4, wk) && home(0, wr)))
            || (c.has(CastlingRights::BLACK_KING) && !(home(60, bk) && home(63, br)))
            || (c.has(CastlingRights::BLACK_QUEEN) && !(home(60, bk) && home(56, br)))
        {
            return Err(PositionError::InconsistentCastling);
        }
        let their_king = self.board.king_of(!self.turn).unwrap();
        if self.board.is_attacked(their_king, self.turn) {
            return Err(PositionError::OpponentInCheck);
        }
        Ok(())
    }

    #[inline]
    pub fn board(&self) -> &Board {
        &self.board
    }

    #[inline]
    pub fn turn(&self) -> Color {
        self.turn
    }

    #[inline]
    pub fn ep_square(&self) -> Option<Square> {
        self.ep_square
    }

    #[inline]
    pub fn castling(&self) -> CastlingRights {
        self.castling
    }

    pub fn halfmove_clock(&self) -> u32 {
        self.halfmove_clock
    }

    pub fn fullmove_number(&self) -> u32 {
        self.fullmove_number
    }

    pub fn with_counters(mut self, halfmove_clock: u32, fullmove_number: u32) -> Position {
        self.halfmove_clock = halfmove_clock;
        self.fullmove_number = fullmove_number.max(1);
        self
    }

    pub fn piece_count(&self) -> u32 {
        self.board.count()
    }

    #[inline]
    pub fn king(&self, color: Color) -> Square {
        self.board.king_of(color).expect("valid position has both kings")
    }

    #[inline]
    pub fn checkers(&self) -> Bitboard {
        self.board
            .attackers(self.king(self.turn), !self.turn, self.board.occupied())
    }

    #[inline]
    pub fn in_check(&self) -> bool {
        self.checkers().has_any()
    }

    pub(crate) fn has_legal_ep_capture(&self) -> bool {
        let Some(ep) = self.ep_square else {
            return false;
        };
        let pawns = self.board.by_piece(Piece::new(self.turn, Role::Pawn))
            & attacks::pawn(!self.turn, ep);
        pawns.into_iter().any(|from| self.is_legal(Move::new(from, ep)))
    }

    /// Whether a pseudo-legal move leaves the mover's king safe.
    #[inline]
    fn is_legal(&self, m: Move) -> bool {
        let us = self.turn;
        let board = &self.board;
        let from_bb = Bitboard::from_square(m.from);
        let to_bb = Bitboard::from_square(m.to);
        let mut occupied = Bitboard((board.occupied().0 & !from_bb.0) | to_bb.0);
        let mut removed = to_bb;
        let moving_king = board.by_role(Role::King).contains(m.from);
        if Some(m.to) == self.ep_square && board.by_role(Role::Pawn).contains(m.from) {
            let captured = m.to.offset(-us.forward()).unwrap();
            occupied.clear(captured);
            removed.set(captured);
        }
        let king = if moving_king { m.to } else { self.king(us) };
        let them = board.by_color(!us) & !removed;
        let rooks = board.by_role(Role::Rook) | board.by_role(Role::Queen);
        let bishops = board.by_role(Role::Bishop) | board.by_role(Role::Queen);
        (them
            & ((attacks::knight(king) & board.by_role(Role::Knight))
                | (attacks::king(king) & board.by_role(Role::King))
                | (attacks::pawn(us, king) & board.by_role(Role::Pawn))
                | (attacks::rook(king, occupied) & rooks)
                | (attacks::bishop(king, occupied) & bishops)))
            .is_empty()
    }

    /// Pseudo-legal moves excluding castling.
    fn push_pseudo_moves(&self, out: &mut MoveList) {
        let us = self.turn;
        let board = &self.board;
        let ours = board.by_color(us);
        let theirs = board.by_color(!us);
        let occupied = board.occupied();
        for from in ours {
            let role = match board.piece_at(from) {
                Some(p) => p.role,
                None => continue,
            };
            let targets = match role {
                Role::Pawn => {
                    self.push_pawn_moves(from, theirs, occupied, out);
                    continue;
                }
                Role::Knight => attacks::knight(from),
                Role::Bishop => attacks::bishop(from, occupied),
                Role::Rook => attacks::rook(from, occupied),
                Role::Queen => attacks::queen(from, occupied),
                Role::King => attacks::king(from),
            } & !ours;
            for to in targets {
                out.push(Move::new(from, to));
            }
        }
    }

    fn push_pawn_moves(&self, from: Square, theirs: Bitboard, occupied: Bitboard, out: &mut MoveList) {
        let us = self.turn;
        let push_to = |to: Square, out: &mut MoveList| {
            if to.relative_rank(us) == 7 {
                for role in Role::PROMOTIONS {
                    out.push(Move::promote(from, to, role));
                }
            } else {
                out.push(Move::new(from, to));
            }
        };
        if let Some(one) = from.offset(us.forward()) {
            if !occupied.contains(one) {
                push_to(one, out);
                if from.relative_rank(us) == 1 {
                    let two = one.offset(us.forward()).unwrap();
                    if !occupied.contains(two) {
                        out.push(Move::new(from, two));
                    }
                }
            }
        }
        for to in attacks::pawn(us, from) & theirs {
            push_to(to, out);
        }
        if let Some(ep) = self.ep_square {
            if attacks::pawn(us, from).contains(ep) {
                out.push(Move::new(from, ep));
            }
        }
    }

    fn push_castling_moves(&self, out: &mut MoveList) {
        let us = self.turn;
        if self.castling.is_empty() || self.in_check() {
            return;
        }
        let rank = match us {
            Color::White => 0,
            Color::Black => 7,
        };
        let sq = |file: u8| Square::from_coords(file, rank);
        let occupied = self.board.occupied();
        let king = sq(4);
        if self.castling.has(CastlingRights::kingside(us))
            && !occupied.contains(sq(5))
            && !occupied.contains(sq(6))
            && !self.board.is_attacked(sq(5), !us)
            && !self.board.is_attacked(sq(6), !us)
        {
            out.push(Move::new(king, sq(6)));
        }
        if self.castling.has(CastlingRights::queenside(us))
            && !occupied.contains(sq(1))
            && !occupied.contains(sq(2))
            && !occupied.contains(sq(3))
            && !self.board.is_attacked(sq(2), !us)
            && !self.board.is_attacked(sq(3), !us)
        {
            out.push(Move::new(king, sq(2)));
        }
    }

    /// All legal moves. The list length is the number of options `n(P)`.
    pub fn legal_moves(&self) -> MoveList {
        let mut moves = MoveList::new();
        self.push_pseudo_moves(&mut moves);
        moves.retain(|m| self.is_legal(*m));
        self.push_castling_moves(&mut moves);
        moves
    }

    pub fn has_legal_move(&self) -> bool {
        let mut moves = MoveList::new();
        self.push_pseudo_moves(&mut moves);
        moves.into_iter().any(|m| self.is_legal(m))
    }

    pub fn is_capture(&self, m: Move) -> bool {
        self.board.by_color(!self.turn).contains(m.to)
            || (Some(m.to) == self.ep_square && self.board.by_role(Role::Pawn).contains(m.from))
    }

    pub fn is_castle(&self, m: Move) -> bool {
        self.board.by_role(Role::King).contains(m.from)
            && (m.from.file() as i8 - m.to.file() as i8).abs() == 2
    }

    /// Plays a move after checking it is legal.
    pub fn play(&self, m: Move) -> Result<Position, IllegalMove> {
        if self.legal_moves().contains(&m) {
            Ok(self.play_unchecked(m))
        } else {
            Err(IllegalMove(m))
        }
    }

    /// Plays a move assumed to be legal.
    pub fn play_unchecked(&self, m: Move) -> Position {
        let us = self.turn;
        let mut next = *self;
        let piece = next.board.remove(m.from).expect("move from an occupied square");
        let captured = next.board.remove(m.to);
        let mut reset_clock = captured.is_some() || piece.role == Role::Pawn;
        next.ep_square = None;

        if piece.role == Role::Pawn && Some(m.to) == self.ep_square {
            next.board.remove(m.to.offset(-us.forward()).unwrap());
            reset_clock = true;
        }
        let placed = match m.promotion {
            Some(role) => Piece::new(us, role),
            None => piece,
        };
        next.board.put(m.to, placed);

        if piece.role == Role::King && (m.from.file() as i8 - m.to.file() as i8).abs() == 2 {
            let rank = m.from.rank();
            let (rook_from, rook_to) = if m.to.file() == 6 { (7, 5) } else { (0, 3) };
            let rook = next
                .board
                .remove(Square::from_coords(rook_from, rank))
                .expect("castling rook present");
            next.board.put(Square::from_coords(rook_to, rank), rook);
        }

        next.castling.remove(CastlingRights::touched_by(m.from) | CastlingRights::touched_by(m.to));
        next.halfmove_clock = if reset_clock { 0 } else { self.halfmove_clock + 1 };
        if us == Color::Black {
            next.fullmove_number += 1;
        }
        next.turn = !us;

        if piece.role == Role::Pawn && (m.to.index() as i32 - m.from.index() as i32).abs() == 16 {
            next.ep_square = m.from.offset(us.forward());
            if !next.has_legal_ep_capture() {
                next.ep_square = None;
            }
        }
        next
    }

    /// Whether only kings and at most one minor piece remain.
    pub fn is_insufficient_material(&self) -> bool {
        let b = &self.board;
        let heavy = b.by_role(Role::Pawn) | b.by_role(Role::Rook) | b.by_role(Role::Queen);
        heavy.is_empty() && b.count() <= 3
    }

    pub fn terminal_state(&self) -> TerminalState {
        if !self.has_legal_move() {
            if self.in_check() {
                TerminalState::Checkmate
            } else {
                TerminalState::Stalemate
            }
        } else if self.is_insufficient_material() {
            TerminalState::InsufficientMaterial
        } else {
            TerminalState::Nonterminal
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(fen: &str) -> Position {
        Position::from_fen(fen).unwrap()
    }

    #[test]
    fn lone_kings_have_three_moves() {
        let p = pos("k7/8/8/8/8/8/8/K7 w - - 0 1");
        let mut ucis: Vec<_> = p.legal_moves().iter().map(Move::to_uci).collect();
        ucis.sort();
        assert_eq!(ucis, ["a1a2", "a1b1", "a1b2"]);
    }

    #[test]
    fn mate_and_stalemate() {
        let mate = pos("k7/1Q6/1K6/8/8/8/8/8 b - - 0 1");
        assert!(mate.legal_moves().is_empty());
        assert!(mate.in_check());
        assert_eq!(mate.terminal_state(), TerminalState::Checkmate);

        let stale = pos("k7/2Q5/1K6/8/8/8/8/8 b - - 0 1");
        assert!(stale.legal_moves().is_empty());
        assert!(!stale.in_check());
        assert_eq!(stale.terminal_state(), TerminalState::Stalemate);

        let kbk = pos("k7/8/8/8/8/8/8/KB6 w - - 0 1");
        assert_eq!(kbk.terminal_state(), TerminalState::InsufficientMaterial);
    }

    #[test]
    fn queen_moves_to_mate_and_stalemate() {
        let p = pos("k7/8/1K6/8/8/8/2Q5/8 w - - 0 1");
        let mate = p.play(Move::from_uci("c2c8").unwrap()).unwrap();
        assert_eq!(mate.terminal_state(), TerminalState::Checkmate);
        let stale = p.play(Move::from_uci("c2c7").unwrap()).unwrap();
        assert_eq!(stale.terminal_state(), TerminalState::Stalemate);
        assert_eq!(stale.to_fen(), "k7/2Q5/1K6/8/8/8/8/8 b - - 1 1");
    }

    #[test]
    fn double_push_sets_capturable_ep_only() {
        let p = pos("4k3/8/8/8/3p4/8/4P3/4K3 w - - 0 1");
        let next = p.play(Move::from_uci("e2e4").unwrap()).unwrap();
        assert_eq!(next.ep_square(), Square::parse("e3"));
        let ep = next.play(Move::from_uci("d4e3").unwrap()).unwrap();
        assert_eq!(ep.piece_count(), 3);

        let lonely = pos("4k3/8/8/8/8/8/4P3/4K3 w - - 0 1");
        let next = lonely.play(Move::from_uci("e2e4").unwrap()).unwrap();
        assert_eq!(next.ep_square(), None);
    }

    #[test]
    fn pinned_ep_capture_is_not_an_ep_square() {
        // Capturing en passant would expose the black king on the fourth rank.
        let p = pos("8/8/8/8/k2p3R/8/4P3/4K3 w - - 0 1");
        let next = p.play(Move::from_uci("e2e4").unwrap()).unwrap();
        assert_eq!(next.ep_square(), None);
    }

    #[test]
    fn castling_rules() {
        let p = pos("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1");
        let moves = p.legal_moves();
        assert!(moves.contains(&Move::from_uci("e1g1").unwrap()));
        assert!(moves.contains(&Move::from_uci("e1c1").unwrap()));
        let castled = p.play(Move::from_uci("e1g1").unwrap()).unwrap();
        assert_eq!(castled.to_fen(), "r3k2r/8/8/8/8/8/8/R4RK1 b kq - 1 1");

        // f1 attacked by the rook on f8: no kingside castling.
        let p = pos("r3kr2/8/8/8/8/8/8/R3K2R w KQq - 0 1");
        assert!(!p.legal_moves().contains(&Move::from_uci("e1g1").unwrap()));

        // Capturing the h8 rook removes black's kingside right.
        let p = pos("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1");
        let next = p.play(Move::from_uci("h1h8").unwrap()).unwrap();
        assert_eq!(next.castling().bits(), CastlingRights::WHITE_QUEEN | CastlingRights::BLACK_QUEEN);
    }

    #[test]
    fn promotions_expand_to_four_moves() {
        let p = pos("8/4P3/8/8/8/8/k7/4K3 w - - 0 1");
        let promos = p
            .legal_moves()
            .into_iter()
            .filter(|m| m.promotion.is_some())
            .count();
        assert_eq!(promos, 4);
    }

    #[test]
    fn illegal_move_rejected() {
        let p = pos("k7/8/8/8/8/8/8/K7 w - - 0 1");
        assert!(p.play(Move::from_uci("a1a3").unwrap()).is_err());
    }

    #[test]
    fn counters_do_not_affect_equality() {
        let a = pos("k7/8/8/8/8/8/8/K7 w - - 0 1");
        let b = pos("k7/8/8/8/8/8/8/K7 w - - 12 40");
        assert_eq!(a, b);
    }
}

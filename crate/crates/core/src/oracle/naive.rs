//! Mailbox move generator that scans the board square by square. Shares no
//! code with the bitboard generator, so perft counts from the two can be
//! compared.

use crate::chess::{CastlingRights, Color, Piece, Position, Role, Square};

const KNIGHT: [(i8, i8); 8] = [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)];
const KING: [(i8, i8); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const ORTHO: [(i8, i8); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
const DIAG: [(i8, i8); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];

#[derive(Clone, Copy, Debug)]
pub struct Mailbox {
    squares: [Option<Piece>; 64],
    turn: Color,
    // White king side, white queen side, black king side, black queen side.
    castle: [bool; 4],
    ep: Option<(i8, i8)>,
}

/// A move as (from, to, promotion) in file/rank coordinates.
pub type NaiveMove = ((i8, i8), (i8, i8), Option<Role>);

fn at(f: i8, r: i8) -> Option<usize> {
    ((0..8).contains(&f) && (0..8).contains(&r)).then(|| (r * 8 + f) as usize)
}

impl Mailbox {
    pub fn from_position(p: &Position) -> Mailbox {
        let mut squares = [None; 64];
        for (i, s) in squares.iter_mut().enumerate() {
            *s = p.board().piece_at(Square::new(i as u8));
        }
        let c = p.castling();
        Mailbox {
            squares,
            turn: p.turn(),
            castle: [
                c.has(CastlingRights::WHITE_KING),
                c.has(CastlingRights::WHITE_QUEEN),
                c.has(CastlingRights::BLACK_KING),
                c.has(CastlingRights::BLACK_QUEEN),
            ],
            ep: p.ep_square().map(|s| (s.file() as i8, s.rank() as i8)),
        }
    }

    fn get(&self, f: i8, r: i8) -> Option<Piece> {
        at(f, r).and_then(|i| self.squares[i])
    }

    fn is(&self, f: i8, r: i8, color: Color, role: Role) -> bool {
        self.get(f, r) == Some(Piece::new(color, role))
    }

    /// Whether `by` attacks the square.
    pub fn attacked(&self, f: i8, r: i8, by: Color) -> bool {
        for (df, dr) in KNIGHT {
            if self.is(f + df, r + dr, by, Role::Knight) {
                return true;
            }
        }
        for (df, dr) in KING {
            if self.is(f + df, r + dr, by, Role::King) {
                return true;
            }
        }
        let pawn_rank = if by == Color::White { r - 1 } else { r + 1 };
        if self.is(f - 1, pawn_rank, by, Role::Pawn) || self.is(f + 1, pawn_rank, by, Role::Pawn) {
            return true;
        }
        for (dirs, role) in [(ORTHO, Role::Rook), (DIAG, Role::Bishop)] {
            for (df, dr) in dirs {
                let (mut x, mut y) = (f + df, r + dr);
                while at(x, y).is_some() {
                    if let Some(p) = self.get(x, y) {
                        if p.color == by && (p.role == role || p.role == Role::Queen) {
                            return true;
                        }
                        break;
                    }
                    x += df;
                    y += dr;
                }
            }
        }
        false
    }

    fn king(&self, color: Color) -> (i8, i8) {
        for i in 0..64 {
            if self.squares[i] == Some(Piece::new(color, Role::King)) {
                return ((i % 8) as i8, (i / 8) as i8);
            }
        }
        panic!("no king");
    }

    fn pseudo(&self) -> Vec<NaiveMove> {
        let us = self.turn;
        let mut out = Vec::new();
        for r in 0..8i8 {
            for f in 0..8i8 {
                let Some(p) = self.get(f, r) else { continue };
                if p.color != us {
                    continue;
                }
                let free_or_enemy = |x: i8, y: i8| at(x, y).is_some() && self.get(x, y).is_none_or(|q| q.color != us);
                match p.role {
                    Role::Knight | Role::King => {
                        let steps = if p.role == Role::Knight { KNIGHT } else { KING };
                        for (df, dr) in steps {
                            if free_or_enemy(f + df, r + dr) {
                                out.push(((f, r), (f + df, r + dr), None));
                            }
                        }
                    }
                    Role::Bishop | Role::Rook | Role::Queen => {
                        let mut dirs = Vec::new();
                        if p.role != Role::Bishop {
                            dirs.extend(ORTHO);
                        }
                        if p.role != Role::Rook {
                            dirs.extend(DIAG);
                        }
                        for (df, dr) in dirs {
                            let (mut x, mut y) = (f + df, r + dr);
                            while at(x, y).is_some() {
                                match self.get(x, y) {
                                    None => out.push(((f, r), (x, y), None)),
                                    Some(q) => {
                                        if q.color != us {
                                            out.push(((f, r), (x, y), None));
                                        }
                                        break;
                                    }
                                }
                                x += df;
                                y += dr;
                            }
                        }
                    }
                    Role::Pawn => {
                        let dir = if us == Color::White { 1 } else { -1 };
                        let start = if us == Color::White { 1 } else { 6 };
                        let last = if us == Color::White { 7 } else { 0 };
                        let mut add = |to: (i8, i8)| {
                            if to.1 == last {
                                for role in [Role::Queen, Role::Rook, Role::Bishop, Role::Knight] {
                                    out.push(((f, r), to, Some(role)));
                                }
                            } else {
                                out.push(((f, r), to, None));
                            }
                        };
                        if at(f, r + dir).is_some() && self.get(f, r + dir).is_none() {
                            add((f, r + dir));
                            if r == start && self.get(f, r + 2 * dir).is_none() {
                                add((f, r + 2 * dir));
                            }
                        }
                        for df in [-1, 1] {
                            let to = (f + df, r + dir);
                            if at(to.0, to.1).is_none() {
                                continue;
                            }
                            if self.get(to.0, to.1).is_some_and(|q| q.color != us) || self.ep == Some(to) {
                                add(to);
                            }
                        }
                    }
                }
            }
        }
        // Castling: rights, empty path, king not in check and not crossing attacked squares.
        let (rank, ks, qs) = if us == Color::White {
            (0, self.castle[0], self.castle[1])
        } else {
            (7, self.castle[2], self.castle[3])
        };
        if (ks || qs) && !self.attacked(4, rank, !us) {
            if ks
                && self.get(5, rank).is_none()
                && self.get(6, rank).is_none()
                && !self.attacked(5, rank, !us)
                && !self.attacked(6, rank, !us)
            {
                out.push(((4, rank), (6, rank), None));
            }
            if qs
                && self.get(1, rank).is_none()
                && self.get(2, rank).is_none()
                && self.get(3, rank).is_none()
                && !self.attacked(3, rank, !us)
                && !self.attacked(2, rank, !us)
            {
                out.push(((4, rank), (2, rank), None));
            }
        }
        out
    }

    pub fn play(&self, m: NaiveMove) -> Mailbox {
        let ((ff, fr), (tf, tr), promo) = m;
        let mut next = *self;
        let piece = next.squares[at(ff, fr).unwrap()].take().unwrap();
        let captured = next.squares[at(tf, tr).unwrap()];
        if piece.role == Role::Pawn && Some((tf, tr)) == self.ep && captured.is_none() {
            next.squares[at(tf, fr).unwrap()] = None;
        }
        next.squares[at(tf, tr).unwrap()] = Some(match promo {
            Some(role) => Piece::new(piece.color, role),
            None => piece,
        });
        if piece.role == Role::King && (tf - ff).abs() == 2 {
            let (rf, rt) = if tf == 6 { (7, 5) } else { (0, 3) };
            let rook = next.squares[at(rf, fr).unwrap()].take();
            next.squares[at(rt, fr).unwrap()] = rook;
        }
        for (i, (f, r)) in [(0, (4, 0)), (1, (4, 0)), (2, (4, 7)), (3, (4, 7))] {
            if (ff, fr) == (f, r) {
                next.castle[i] = false;
            }
        }
        for (i, (f, r)) in [(0, (7, 0)), (1, (0, 0)), (2, (7, 7)), (3, (0, 7))] {
            if (ff, fr) == (f, r) || (tf, tr) == (f, r) {
                next.castle[i] = false;
            }
        }
        next.ep = (piece.role == Role::Pawn && (tr - fr).abs() == 2).then_some((ff, (fr + tr) / 2));
        next.turn = !self.turn;
        next
    }

    pub fn legal_moves(&self) -> Vec<NaiveMove> {
        self.pseudo()
            .into_iter()
            .filter(|&m| {
                let next = self.play(m);
                let (kf, kr) = next.king(self.turn);
                !next.attacked(kf, kr, !self.turn)
            })
            .collect()
    }

    /// UCI strings of the legal moves, sorted.
    pub fn legal_uci(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .legal_moves()
            .into_iter()
            .map(|((ff, fr), (tf, tr), p)| {
                let sq = |f: i8, r: i8| format!("{}{}", (b'a' + f as u8) as char, (b'1' + r as u8) as char);
                let mut s = sq(ff, fr) + &sq(tf, tr);
                if let Some(role) = p {
                    s.push(role.upper().to_ascii_lowercase());
                }
                s
            })
            .collect();
        v.sort();
        v
    }
}

/// Leaf count of the legal move tree to `depth`.
pub fn perft(b: &Mailbox, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = b.legal_moves();
    if depth == 1 {
        return moves.len() as u64;
    }
    moves.into_iter().map(|m| perft(&b.play(m), depth - 1)).sum()
}

//! Forward minimax search for forced mates, independent of retrograde
//! generation. Values follow from the rules alone: checkmate, stalemate and
//! the fact that a lone king cannot mate. A tablebase, if given, only orders
//! moves.

use std::collections::HashMap;

use crate::chess::{Move, MoveList, Position};
use crate::tablebase::{TablebaseError, TablebaseSet, Wdl};

#[derive(Clone, Copy, Default)]
struct Bounds {
    // Smallest depth at which the property is proved, 0 if never.
    proved_at: u16,
    // Largest depth at which it is refuted.
    refuted_to: u16,
}

impl Bounds {
    fn lookup(&self, depth: u16) -> Option<bool> {
        if self.proved_at != 0 && depth >= self.proved_at {
            Some(true)
        } else if depth <= self.refuted_to {
            Some(false)
        } else {
            None
        }
    }

    fn record(&mut self, depth: u16, result: bool) {
        if result {
            if self.proved_at == 0 || depth < self.proved_at {
                self.proved_at = depth;
            }
        } else {
            self.refuted_to = self.refuted_to.max(depth);
        }
    }
}

/// Memoizing mate prover. Reuse one instance across queries on related
/// positions to share the transposition table.
pub struct MateSearch<'a> {
    hint: Option<&'a TablebaseSet>,
    wins: HashMap<u128, Bounds>,
    losses: HashMap<u128, Bounds>,
    pub nodes: u64,
}

/// Exact position key: occupancy, then a 4-bit piece code per occupied
/// square in square order, side to move and en-passant square.
fn key(p: &Position) -> u128 {
    let board = p.board();
    let occupied = board.occupied();
    let mut codes = 0u128;
    for (i, sq) in occupied.into_iter().enumerate() {
        let piece = board.piece_at(sq).unwrap();
        codes |= ((piece.color as u128) * 6 + piece.role as u128) << (4 * i);
    }
    let ep = p.ep_square().map_or(0, |s| s.index() as u128 + 1);
    let tail = (codes << 8) | (ep << 1) | (p.turn() as u128);
    ((occupied.0 as u128) << 64) ^ tail
}

fn can_mate(p: &Position, color: crate::chess::Color) -> bool {
    p.board().by_color(color).count() > 1 && !p.is_insufficient_material()
}

impl<'a> MateSearch<'a> {
    pub fn new(hint: Option<&'a TablebaseSet>) -> MateSearch<'a> {
        MateSearch {
            hint,
            wins: HashMap::new(),
            losses: HashMap::new(),
            nodes: 0,
        }
    }

    pub fn clear(&mut self) {
        self.wins.clear();
        self.losses.clear();
    }

    /// Entries held in the transposition tables.
    pub fn table_len(&self) -> usize {
        self.wins.len() + self.losses.len()
    }

    // Most promising moves for the side to move first.
    fn ordered(&self, p: &Position) -> MoveList {
        let mut moves = p.legal_moves();
        if let Some(tbs) = self.hint {
            let key = |m: &Move| match tbs.probe_dtm(&p.play_unchecked(*m)) {
                Ok((Wdl::Loss, d)) => (0, d.unwrap_or(0) as i32),
                Ok((Wdl::Draw, _)) => (1, 0),
                Ok((Wdl::Win, d)) => (2, -(d.unwrap_or(0) as i32)),
                Err(_) => (3, 0),
            };
            moves.sort_by_cached_key(key);
        }
        moves
    }

    /// The side to move can force mate within `depth` plies.
    pub fn wins_within(&mut self, p: &Position, depth: u16) -> bool {
        if depth == 0 || !can_mate(p, p.turn()) {
            return false;
        }
        if let Some(r) = self.wins.get(&key(p)).and_then(|b| b.lookup(depth)) {
            return r;
        }
        self.nodes += 1;
        let mut result = false;
        for m in self.ordered(p) {
            if self.loses_within(&p.play_unchecked(m), depth - 1) {
                result = true;
                break;
            }
        }
        self.wins.entry(key(p)).or_default().record(depth, result);
        result
    }

    /// The side to move is checkmated within `depth` plies whatever it does.
    pub fn loses_within(&mut self, p: &Position, depth: u16) -> bool {
        if !can_mate(p, !p.turn()) {
            return false;
        }
        if let Some(r) = self.losses.get(&key(p)).and_then(|b| b.lookup(depth + 1)) {
            return r;
        }
        self.nodes += 1;
        // Stubborn defences first only pays off in shallow searches, where
        // refutations are common.
        let moves = if depth <= 6 { self.ordered(p) } else { p.legal_moves() };
        let result = if moves.is_empty() {
            p.in_check()
        } else if depth == 0 {
            false
        } else {
            moves.iter().all(|&m| self.wins_within(&p.play_unchecked(m), depth - 1))
        };
        // Stored shifted by one so that depth 0 can be recorded as proved.
        self.losses.entry(key(p)).or_default().record(depth + 1, result);
        result
    }

    /// Value of the position as far as mates within `horizon` plies show.
    pub fn value(&mut self, p: &Position, horizon: u16) -> Wdl {
        if self.wins_within(p, horizon) {
            Wdl::Win
        } else if self.loses_within(p, horizon) {
            Wdl::Loss
        } else {
            Wdl::Draw
        }
    }

    /// Shortest mate distance in plies within `horizon`, by deepening.
    pub fn dtm(&mut self, p: &Position, horizon: u16) -> Option<(Wdl, u16)> {
        if p.legal_moves().is_empty() && p.in_check() {
            return Some((Wdl::Loss, 0));
        }
        for d in 1..=horizon {
            if d % 2 == 1 && self.wins_within(p, d) {
                return Some((Wdl::Win, d));
            }
            if d % 2 == 0 && self.loses_within(p, d) {
                return Some((Wdl::Loss, d));
            }
        }
        None
    }
}

/// Checks one stored entry against its children: the stored value and
/// distance must be the best the mover can reach in one ply. Returns a
/// description of the mismatch, if any.
pub fn negamax_violation(set: &TablebaseSet, p: &Position) -> Result<Option<String>, TablebaseError> {
    let stored = set.probe_dtm(p)?;
    let moves = p.legal_moves();
    let expected = if moves.is_empty() {
        if p.in_check() {
            (Wdl::Loss, Some(0))
        } else {
            (Wdl::Draw, None)
        }
    } else {
        let mut best: Option<(Wdl, Option<u16>)> = None;
        for &m in &moves {
            let (v, d) = set.probe_dtm(&p.play_unchecked(m))?;
            let cand = (v.negate(), d.map(|d| d + 1));
            best = Some(match best {
                None => cand,
                Some(b) if cand.0 != b.0 => {
                    if cand.0 > b.0 {
                        cand
                    } else {
                        b
                    }
                }
                Some(b) => match cand.0 {
                    Wdl::Win => (Wdl::Win, cand.1.min(b.1)),
                    Wdl::Loss => (Wdl::Loss, cand.1.max(b.1)),
                    Wdl::Draw => b,
                },
            });
        }
        best.unwrap()
    };
    Ok((stored != expected).then(|| format!("{p}: stored {stored:?}, children give {expected:?}")))
}

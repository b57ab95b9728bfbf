//! Retrograde generation of one signature.
//!
//! Every node starts with a counter of its moves that stay inside the
//! signature. Captures and promotions leave the signature and are resolved
//! up front from the dependency tables. Resolved nodes are processed in
//! order of distance to mate: a lost node makes each predecessor a win one
//! ply further away; a won node decrements each predecessor's counter, and a
//! predecessor whose counter reaches zero is lost. Nodes still unresolved at
//! the end are draws.
//!
//! Slots never carry an en-passant square. A double push that allows an
//! en-passant capture leads to an extra node, kept outside the index, whose
//! predecessors are recorded explicitly.

use std::collections::HashMap;
use std::time::Instant;

use super::index::Indexer;
use super::set::TablebaseSet;
use super::signature::MaterialSig;
use super::table::{Tablebase, CODE_BROKEN, CODE_DRAW, CODE_LOSS, CODE_WIN};
use super::{TablebaseError, Wdl};
use crate::chess::{attacks, Bitboard, Board, Color, Move, Position, Role};

const UNKNOWN: u8 = 0;
const LOSS: u8 = 1;
const DRAW: u8 = 2;
const WIN: u8 = 3;
const BROKEN: u8 = 4;

// Counter value for nodes that can never be lost.
const BLOCKED: u8 = u8::MAX;

#[derive(Debug, Clone, Default)]
pub struct GenStats {
    pub legal: u64,
    pub wins: u64,
    pub draws: u64,
    pub losses: u64,
    /// Highest distance to mate, in plies, over all nodes.
    pub max_dtm: u16,
    /// Last induction round in which any node was resolved.
    pub rounds: u16,
    pub ep_nodes: usize,
    pub seconds: f64,
}

struct Gen<'a> {
    ix: Indexer,
    size: u32,
    ep_possible: bool,
    deps: &'a TablebaseSet,
    state: Vec<u8>,
    counter: Vec<u8>,
    // Distance to mate once resolved; before that, the longest loss through
    // an exit move.
    dtm: Vec<u16>,
    ep_ids: HashMap<Position, u32>,
    ep_nodes: Vec<Position>,
    ep_preds: Vec<Vec<u32>>,
    ep_pending: Vec<u32>,
    buckets: Vec<Vec<u32>>,
    exit_wins: Vec<Vec<u32>>,
}

fn schedule(buckets: &mut Vec<Vec<u32>>, level: u16, id: u32) {
    let level = level as usize;
    if buckets.len() <= level {
        buckets.resize_with(level + 1, Vec::new);
    }
    buckets[level].push(id);
}

fn is_double_push(p: &Position, m: Move) -> bool {
    p.board().by_role(Role::Pawn).contains(m.from) && (m.to.index() as i32 - m.from.index() as i32).abs() == 16
}

/// Builds the table for `sig`. `deps` must hold, with distance-to-mate data,
/// every signature reachable by a capture or promotion.
pub fn generate(sig: MaterialSig, deps: &TablebaseSet) -> Result<(Tablebase, GenStats), TablebaseError> {
    let started = Instant::now();
    for d in sig.dependencies() {
        let tb = deps.get(d).ok_or(TablebaseError::MissingTable(d))?;
        if !tb.has_dtm() {
            return Err(TablebaseError::MissingDtm(d));
        }
    }
    let ix = Indexer::new(sig);
    let size = u32::try_from(ix.size()).expect("index range fits in u32 at supported piece counts");
    let mut g = Gen {
        ix,
        size,
        ep_possible: sig.has_opposing_pawns(),
        deps,
        state: vec![UNKNOWN; size as usize],
        counter: vec![0; size as usize],
        dtm: vec![0; size as usize],
        ep_ids: HashMap::new(),
        ep_nodes: Vec::new(),
        ep_preds: Vec::new(),
        ep_pending: Vec::new(),
        buckets: Vec::new(),
        exit_wins: Vec::new(),
    };
    for i in 0..size {
        match g.ix.raw(i as u64) {
            Some(p) => g.init_node(i, &p)?,
            None => g.state[i as usize] = BROKEN,
        }
    }
    while let Some(id) = g.ep_pending.pop() {
        let p = g.ep_nodes[(id - size) as usize];
        g.init_node(id, &p)?;
    }
    let rounds = g.run();

    let mut stats = GenStats {
        rounds,
        ep_nodes: g.ep_nodes.len(),
        ..GenStats::default()
    };
    let mut dtm_values = Vec::new();
    let mut codes = Vec::with_capacity(size as usize);
    for i in 0..g.state.len() {
        let s = match g.state[i] {
            UNKNOWN => DRAW,
            s => s,
        };
        if s == WIN || s == LOSS {
            stats.max_dtm = stats.max_dtm.max(g.dtm[i]);
        }
        if i >= size as usize {
            continue;
        }
        codes.push(match s {
            WIN => {
                stats.wins += 1;
                dtm_values.push(g.dtm[i]);
                CODE_WIN
            }
            LOSS => {
                stats.losses += 1;
                dtm_values.push(g.dtm[i]);
                CODE_LOSS
            }
            DRAW => {
                stats.draws += 1;
                CODE_DRAW
            }
            _ => CODE_BROKEN,
        });
    }
    stats.legal = stats.wins + stats.draws + stats.losses;
    stats.seconds = started.elapsed().as_secs_f64();
    Ok((Tablebase::from_codes(sig, codes.into_iter(), Some(dtm_values)), stats))
}

impl Gen<'_> {
    fn exit_value(&self, child: &Position) -> Result<(Wdl, u16), TablebaseError> {
        let sig = MaterialSig::of(child);
        let tb = self.deps.get(sig).ok_or(TablebaseError::MissingTable(sig))?;
        let (wdl, dtm) = tb.lookup(child);
        Ok((wdl, dtm.unwrap_or(0)))
    }

    fn ep_id(&mut self, p: &Position) -> u32 {
        let key = self.ix.orientation(p.board(), p.turn()).apply(p);
        if let Some(&id) = self.ep_ids.get(&key) {
            return id;
        }
        let id = self.size + self.ep_nodes.len() as u32;
        self.ep_ids.insert(key, id);
        self.ep_nodes.push(key);
        self.ep_preds.push(Vec::new());
        self.ep_pending.push(id);
        self.state.push(UNKNOWN);
        self.counter.push(0);
        self.dtm.push(0);
        id
    }

    fn init_node(&mut self, id: u32, p: &Position) -> Result<(), TablebaseError> {
        let i = id as usize;
        let moves = p.legal_moves();
        if moves.is_empty() {
            if p.in_check() {
                self.state[i] = LOSS;
                self.dtm[i] = 0;
                schedule(&mut self.buckets, 0, id);
            } else {
                self.state[i] = DRAW;
            }
            return Ok(());
        }
        let mut internal = 0u32;
        let mut blocked = false;
        let mut loss_max = 0u16;
        let mut win_min: Option<u16> = None;
        for m in moves {
            if m.promotion.is_some() || p.is_capture(m) {
                let (v, d) = self.exit_value(&p.play_unchecked(m))?;
                match v {
                    Wdl::Loss => win_min = Some(win_min.map_or(d + 1, |w| w.min(d + 1))),
                    Wdl::Draw => blocked = true,
                    Wdl::Win => loss_max = loss_max.max(d + 1),
                }
            } else {
                internal += 1;
                if self.ep_possible && is_double_push(p, m) {
                    let child = p.play_unchecked(m);
                    if child.ep_square().is_some() {
                        let c = self.ep_id(&child);
                        self.ep_preds[(c - self.size) as usize].push(id);
                    }
                }
            }
        }
        if let Some(w) = win_min {
            schedule(&mut self.exit_wins, w, id);
            blocked = true;
        }
        self.dtm[i] = loss_max;
        self.counter[i] = if blocked { BLOCKED } else { internal as u8 };
        if !blocked && internal == 0 {
            self.state[i] = LOSS;
            schedule(&mut self.buckets, loss_max, id);
        }
        Ok(())
    }

    fn run(&mut self) -> u16 {
        let mut preds = Vec::new();
        let mut level = 0usize;
        let mut last = 0u16;
        while level < self.buckets.len().max(self.exit_wins.len()) {
            let n = level as u16;
            let mut frontier = self.buckets.get_mut(level).map(std::mem::take).unwrap_or_default();
            if let Some(exits) = self.exit_wins.get_mut(level).map(std::mem::take) {
                for id in exits {
                    if self.state[id as usize] == UNKNOWN {
                        self.state[id as usize] = WIN;
                        self.dtm[id as usize] = n;
                        frontier.push(id);
                    }
                }
            }
            if !frontier.is_empty() {
                last = n;
            }
            for id in frontier {
                self.preds(id, &mut preds);
                if self.state[id as usize] == LOSS {
                    for &p in &preds {
                        let p = p as usize;
                        if self.state[p] == UNKNOWN {
                            self.state[p] = WIN;
                            self.dtm[p] = n + 1;
                            schedule(&mut self.buckets, n + 1, p as u32);
                        }
                    }
                } else {
                    for &p in &preds {
                        let p = p as usize;
                        if self.state[p] == UNKNOWN && self.counter[p] != BLOCKED {
                            self.counter[p] -= 1;
                            if self.counter[p] == 0 {
                                let d = (n + 1).max(self.dtm[p]);
                                self.state[p] = LOSS;
                                self.dtm[p] = d;
                                schedule(&mut self.buckets, d, p as u32);
                            }
                        }
                    }
                }
            }
            level += 1;
        }
        last
    }

    /// Nodes with a move into `id`, with one entry per such move.
    fn preds(&self, id: u32, out: &mut Vec<u32>) {
        out.clear();
        if id >= self.size {
            out.extend_from_slice(&self.ep_preds[(id - self.size) as usize]);
            return;
        }
        let pos = self.ix.raw(id as u64).expect("resolved slot is legal");
        let board = pos.board();
        let to_move = pos.turn();
        let mover = !to_move;
        let occupied = board.occupied();
        let empty = !occupied;
        for to in board.by_color(mover) {
            let piece = board.piece_at(to).unwrap();
            let origins = match piece.role {
                Role::King => attacks::king(to) & empty,
                Role::Knight => attacks::knight(to) & empty,
                Role::Bishop => attacks::bishop(to, occupied) & empty,
                Role::Rook => attacks::rook(to, occupied) & empty,
                Role::Queen => attacks::queen(to, occupied) & empty,
                Role::Pawn => self.pawn_origins(&pos, to),
            };
            for from in origins {
                let mut b = *board;
                b.remove(to);
                b.put(from, piece);
                if b.is_attacked(b.king_of(to_move).unwrap(), mover) {
                    continue;
                }
                out.push(self.ix.index(&b, mover) as u32);
                if self.ep_possible {
                    self.ep_variants(&b, mover, out);
                }
            }
        }
    }

    fn pawn_origins(&self, pos: &Position, to: crate::chess::Square) -> Bitboard {
        let mover = !pos.turn();
        let occupied = pos.board().occupied();
        let mut out = Bitboard::EMPTY;
        if to.relative_rank(mover) < 2 {
            return out;
        }
        let back = to.offset(-mover.forward()).unwrap();
        if occupied.contains(back) {
            return out;
        }
        out.set(back);
        if to.relative_rank(mover) == 3 {
            let back2 = back.offset(-mover.forward()).unwrap();
            // A double push that allows an en-passant capture leads to an
            // en-passant node, not to this slot.
            if !occupied.contains(back2)
                && !Position::from_raw(*pos.board(), pos.turn(), Some(back)).has_legal_ep_capture()
            {
                out.set(back2);
            }
        }
        out
    }

    /// En-passant nodes that reach the same child as the ep-free
    /// predecessor `board`, `turn`.
    fn ep_variants(&self, board: &Board, turn: Color, out: &mut Vec<u32>) {
        let pusher = !turn;
        let occupied = board.occupied();
        let capturers = board.by_piece(crate::chess::Piece::new(turn, Role::Pawn));
        for sq in board.by_piece(crate::chess::Piece::new(pusher, Role::Pawn)) {
            if sq.relative_rank(pusher) != 3 {
                continue;
            }
            let ep = sq.offset(-pusher.forward()).unwrap();
            let origin = ep.offset(-pusher.forward()).unwrap();
            if occupied.contains(ep) || occupied.contains(origin) || (attacks::pawn(pusher, ep) & capturers).is_empty() {
                continue;
            }
            let p = Position::from_raw(*board, turn, Some(ep));
            if !p.has_legal_ep_capture() {
                continue;
            }
            let key = self.ix.orientation(board, turn).apply(&p);
            if let Some(&id) = self.ep_ids.get(&key) {
                out.push(id);
            }
        }
    }
}

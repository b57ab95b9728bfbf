//! Recorded games to labeled decision instances.

mod pgn;

pub use pgn::{open_pgn, parse_clock, Clock, GameRecord, GameResult, PgnMove, PgnReader, TimeControl};

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chess::{Color, Position};
use crate::tablebase::{MaterialSig, TablebaseError, TablebaseSet, Wdl};

/// One decision taken by a player in a tablebase position. Serialized as
/// one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub fen: String,
    pub canonical_fen: String,
    /// UCI.
    #[serde(rename = "move")]
    pub mv: String,
    pub is_blunder: bool,
    pub n: u32,
    pub b: u32,
    pub elo: i32,
    pub opp_elo: i32,
    pub time_left: Option<f64>,
    pub time_spent: Option<f64>,
    pub game_id: String,
}

impl Instance {
    pub fn position(&self) -> Result<Position, crate::chess::FenError> {
        Position::from_fen(&self.fen)
    }

    pub fn beta(&self) -> f64 {
        self.b as f64 / self.n as f64
    }
}

/// Canonical key for grouping repeated positions: the first four FEN
/// fields of the orbit representative.
pub fn canonical_fen(p: &Position) -> String {
    match p.canonicalize() {
        Ok((c, _)) => c.epd(),
        Err(_) => p.epd(),
    }
}

#[derive(Debug, Clone)]
pub struct IngestFilter {
    /// Largest piece count to extract.
    pub k: u32,
    /// Required time control; `None` keeps every game.
    pub time_control: Option<TimeControl>,
}

impl Default for IngestFilter {
    fn default() -> IngestFilter {
        IngestFilter {
            k: 4,
            time_control: Some(TimeControl::BLITZ_3_0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub games: u64,
    pub unparseable_games: u64,
    pub missing_time_control: u64,
    pub other_time_control: u64,
    pub missing_elo: u64,
    pub replay_errors: u64,
    pub castling_skipped: u64,
    pub losing_skipped: u64,
    pub no_blunder_skipped: u64,
    pub instances: u64,
}

/// Keeps games played at exactly `tc`. Games without a TimeControl header
/// are dropped and counted separately.
pub fn filter_time_control(
    records: impl IntoIterator<Item = GameRecord>,
    tc: TimeControl,
    stats: &mut IngestStats,
) -> Vec<GameRecord> {
    let mut out = Vec::new();
    for g in records {
        match g.time_control {
            None => stats.missing_time_control += 1,
            Some(t) if t != tc => stats.other_time_control += 1,
            Some(_) => out.push(g),
        }
    }
    out
}

fn start_position(g: &GameRecord) -> Option<Position> {
    match g.header("FEN") {
        Some(fen) => Position::from_fen(fen).ok(),
        None => Some(Position::startpos()),
    }
}

/// Replays `g` and emits an instance for every eligible ply: at most
/// `filter.k` pieces, no castling rights, mover not lost, and at least one
/// blunder available. The time-control filter is not applied here.
pub fn extract_instances(
    g: &GameRecord,
    tbs: &TablebaseSet,
    filter: &IngestFilter,
    stats: &mut IngestStats,
) -> Result<Vec<Instance>, TablebaseError> {
    let mut out = Vec::new();
    let (Some(white_elo), Some(black_elo)) = (g.white_elo, g.black_elo) else {
        stats.missing_elo += 1;
        return Ok(out);
    };
    let Some(mut pos) = start_position(g) else {
        stats.replay_errors += 1;
        return Ok(out);
    };
    // Clock readings per color, seeded with the base time.
    let base = g.time_control.map(|tc| tc.base as f64);
    let inc = g.time_control.map_or(0.0, |tc| tc.increment as f64);
    let mut clock = [base, base];
    let mut seen_clock = [false, false];
    for pm in &g.moves {
        let mover = pos.turn();
        let m = match pos.parse_san(&pm.san) {
            Ok(m) => m,
            Err(_) => {
                stats.replay_errors += 1;
                break;
            }
        };
        let me = mover.index();
        let time_left = clock[me];
        let time_spent = match pm.clock {
            Some(Clock::Remaining(after)) => {
                let spent = seen_clock[me].then(|| time_left.map(|before| (before - after + inc).max(0.0))).flatten();
                clock[me] = Some(after);
                seen_clock[me] = true;
                spent
            }
            Some(Clock::Elapsed(spent)) => {
                clock[me] = time_left.map(|before| before - spent + inc);
                seen_clock[me] = true;
                Some(spent)
            }
            None => {
                clock[me] = None;
                None
            }
        };
        if pos.piece_count() <= filter.k {
            if !pos.castling().is_empty() {
                stats.castling_skipped += 1;
            } else if tbs.get(MaterialSig::of(&pos)).is_some() {
                let labels = tbs.label_moves(&pos)?;
                if labels.parent == Wdl::Loss {
                    stats.losing_skipped += 1;
                } else if labels.b == 0 {
                    stats.no_blunder_skipped += 1;
                } else {
                    let label = labels.labels.iter().find(|l| l.mv == m).expect("played move is legal");
                    let (elo, opp_elo) = match mover {
                        Color::White => (white_elo, black_elo),
                        Color::Black => (black_elo, white_elo),
                    };
                    out.push(Instance {
                        fen: pos.to_fen(),
                        canonical_fen: canonical_fen(&pos),
                        mv: m.to_uci(),
                        is_blunder: label.is_blunder,
                        n: labels.n,
                        b: labels.b,
                        elo,
                        opp_elo,
                        time_left,
                        time_spent,
                        game_id: g.id.clone(),
                    });
                }
            }
        }
        pos = pos.play_unchecked(m);
    }
    stats.instances += out.len() as u64;
    Ok(out)
}

/// Runs the whole pipeline over a PGN stream, writing JSON lines.
pub fn extract_stream<R: BufRead>(
    reader: &mut PgnReader<R>,
    tbs: &TablebaseSet,
    filter: &IngestFilter,
    out: &mut impl Write,
) -> Result<IngestStats, ExtractError> {
    let mut stats = IngestStats::default();
    for game in reader.by_ref() {
        let game = game?;
        stats.games += 1;
        if let Some(tc) = filter.time_control {
            if filter_time_control([game.clone()], tc, &mut stats).is_empty() {
                continue;
            }
        }
        for inst in extract_instances(&game, tbs, filter, &mut stats)? {
            serde_json::to_writer(&mut *out, &inst)?;
            out.write_all(b"\n")?;
        }
    }
    stats.unparseable_games = reader.skipped;
    Ok(stats)
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Tablebase(#[from] TablebaseError),
}

/// Reads an instance JSONL file.
pub fn read_instances(input: impl BufRead) -> Result<Vec<Instance>, ExtractError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_instances<'a>(out: &mut impl Write, instances: impl IntoIterator<Item = &'a Instance>) -> io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut *out, inst)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

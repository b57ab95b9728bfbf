//! PGN export-format reader with clock comments.

use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chess::is_san_syntax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeControl {
    pub base: u32,
    pub increment: u32,
}

impl TimeControl {
    pub const BLITZ_3_0: TimeControl = TimeControl { base: 180, increment: 0 };
}

impl fmt::Display for TimeControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.base, self.increment)
    }
}

impl FromStr for TimeControl {
    type Err = String;

    /// Accepts "base+inc" and a bare "base".
    fn from_str(s: &str) -> Result<TimeControl, String> {
        let s = s.trim();
        let (base, inc) = s.split_once('+').unwrap_or((s, "0"));
        match (base.parse(), inc.parse()) {
            (Ok(base), Ok(increment)) => Ok(TimeControl { base, increment }),
            _ => Err(format!("bad time control {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameResult {
    WhiteWins,
    BlackWins,
    Draw,
    Unknown,
}

impl GameResult {
    fn parse(token: &str) -> Option<GameResult> {
        match token {
            "1-0" => Some(GameResult::WhiteWins),
            "0-1" => Some(GameResult::BlackWins),
            "1/2-1/2" | "½-½" => Some(GameResult::Draw),
            "*" => Some(GameResult::Unknown),
            _ => None,
        }
    }
}

/// A clock annotation from a move comment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Clock {
    /// `%clk`: time left after the move.
    Remaining(f64),
    /// `%emt`: time spent on the move.
    Elapsed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgnMove {
    pub san: String,
    pub clock: Option<Clock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub id: String,
    pub headers: Vec<(String, String)>,
    pub white_elo: Option<i32>,
    pub black_elo: Option<i32>,
    pub time_control: Option<TimeControl>,
    pub moves: Vec<PgnMove>,
    pub result: GameResult,
}

impl GameRecord {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

fn hms(text: &str) -> Option<f64> {
    let mut total = 0.0;
    let mut parts = 0;
    for part in text.split(':') {
        let v: f64 = part.parse().ok()?;
        if !(v >= 0.0) {
            return None;
        }
        total = total * 60.0 + v;
        parts += 1;
    }
    (1..=3).contains(&parts).then_some(total)
}

/// Reads a `%clk` or `%emt` tag from comment text. Malformed tags give
/// `None`.
pub fn parse_clock(comment: &str) -> Option<Clock> {
    for (tag, make) in [("%clk", Clock::Remaining as fn(f64) -> Clock), ("%emt", Clock::Elapsed)] {
        if let Some(at) = comment.find(tag) {
            let rest = comment[at + tag.len()..].trim_start();
            let value: String = rest.chars().take_while(|c| c.is_ascii_digit() || *c == ':' || *c == '.').collect();
            return hms(&value).map(make);
        }
    }
    None
}

fn parse_header(line: &str) -> Option<(String, String)> {
    let inner = line.trim().strip_prefix('[')?.strip_suffix(']')?;
    let (name, rest) = inner.split_once(char::is_whitespace)?;
    let value = rest.trim().strip_prefix('"')?.strip_suffix('"')?;
    Some((name.to_string(), value.replace("\\\"", "\"").replace("\\\\", "\\")))
}

fn parse_elo(v: Option<&String>) -> Option<i32> {
    v.and_then(|s| s.trim().parse().ok()).filter(|&e| e > 0)
}

#[derive(Debug)]
enum Movetext {
    Done(Vec<PgnMove>, GameResult),
    Bad(String),
}

/// Tokenizes movetext. Comments attach their clock to the preceding move;
/// variations and NAGs are dropped.
fn parse_movetext(text: &str) -> Movetext {
    let mut moves: Vec<PgnMove> = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut depth = 0usize;
    let mut result = None;
    while let Some((i, c)) = chars.next() {
        match c {
            '{' => {
                let start = i + 1;
                let mut end = text.len();
                for (j, d) in chars.by_ref() {
                    if d == '}' {
                        end = j;
                        break;
                    }
                }
                if depth == 0 {
                    if let (Some(clock), Some(last)) = (parse_clock(&text[start..end]), moves.last_mut()) {
                        last.clock.get_or_insert(clock);
                    }
                }
            }
            ';' => {
                for (_, d) in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '(' => depth += 1,
            ')' => {
                if depth == 0 {
                    return Movetext::Bad("unbalanced ')'".into());
                }
                depth -= 1;
            }
            c if c.is_whitespace() => {}
            _ => {
                let mut end = text.len();
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_whitespace() || matches!(d, '{' | '(' | ')' | ';') {
                        end = j;
                        break;
                    }
                    chars.next();
                }
                let token = &text[i..end];
                if depth > 0 || token.starts_with('$') {
                    continue;
                }
                if result.is_some() {
                    return Movetext::Bad(format!("token {token:?} after result"));
                }
                if let Some(r) = GameResult::parse(token) {
                    result = Some(r);
                    continue;
                }
                // Strip a move number, possibly glued to the move ("12.e4").
                let body = token.trim_start_matches(|c: char| c.is_ascii_digit()).trim_start_matches('.');
                if body.is_empty() {
                    continue;
                }
                if body.len() == token.len() || token.contains('.') {
                    if !is_san_syntax(body) {
                        return Movetext::Bad(format!("bad token {token:?}"));
                    }
                    moves.push(PgnMove { san: body.to_string(), clock: None });
                } else {
                    return Movetext::Bad(format!("bad token {token:?}"));
                }
            }
        }
    }
    if depth != 0 {
        return Movetext::Bad("unterminated variation".into());
    }
    Movetext::Done(moves, result.unwrap_or(GameResult::Unknown))
}

/// Streams games from PGN text. Games whose movetext does not tokenize,
/// and stray text between games, are skipped and counted.
pub struct PgnReader<R> {
    input: R,
    line: String,
    pending: Option<String>,
    ordinal: u64,
    pub skipped: u64,
}

impl<R: BufRead> PgnReader<R> {
    pub fn new(input: R) -> PgnReader<R> {
        PgnReader {
            input,
            line: String::new(),
            pending: None,
            ordinal: 0,
            skipped: 0,
        }
    }

    fn next_line(&mut self) -> io::Result<Option<String>> {
        if let Some(l) = self.pending.take() {
            return Ok(Some(l));
        }
        self.line.clear();
        if self.input.read_line(&mut self.line)? == 0 {
            return Ok(None);
        }
        Ok(Some(self.line.trim_end_matches(['\n', '\r']).trim_start_matches('\u{feff}').to_string()))
    }

    /// Next game, `Ok(None)` at end of input.
    pub fn next_game(&mut self) -> io::Result<Option<GameRecord>> {
        loop {
            // Skip to a header block.
            let mut garbage = false;
            let first = loop {
                match self.next_line()? {
                    None => {
                        if garbage {
                            self.skipped += 1;
                        }
                        return Ok(None);
                    }
                    Some(l) if l.trim_start().starts_with('[') => break l,
                    Some(l) if l.trim().is_empty() => {}
                    Some(_) => garbage = true,
                }
            };
            if garbage {
                self.skipped += 1;
            }
            let mut headers = Vec::new();
            let mut bad_header = false;
            let mut line = Some(first);
            while let Some(l) = line.take() {
                if l.trim_start().starts_with('[') {
                    match parse_header(&l) {
                        Some(h) => headers.push(h),
                        None => bad_header = true,
                    }
                    line = self.next_line()?;
                } else {
                    self.pending = Some(l);
                }
            }
            // Movetext runs until its result token or the next header.
            let mut text = String::new();
            while let Some(l) = self.next_line()? {
                if l.trim_start().starts_with('[') {
                    self.pending = Some(l);
                    break;
                }
                text.push_str(&l);
                text.push('\n');
                if text_has_result(&l) {
                    break;
                }
            }
            self.ordinal += 1;
            let moves = match parse_movetext(&text) {
                Movetext::Done(m, r) if !bad_header => (m, r),
                Movetext::Done(..) => {
                    log::debug!("game {}: malformed header", self.ordinal);
                    self.skipped += 1;
                    continue;
                }
                Movetext::Bad(why) => {
                    log::debug!("game {}: {why}", self.ordinal);
                    self.skipped += 1;
                    continue;
                }
            };
            return Ok(Some(self.record(headers, moves)));
        }
    }

    fn record(&self, headers: Vec<(String, String)>, (moves, result): (Vec<PgnMove>, GameResult)) -> GameRecord {
        let get = |name: &str| headers.iter().find(|(k, _)| k == name).map(|(_, v)| v);
        let id = get("GameId")
            .or_else(|| get("FICSGamesDBGameNo"))
            .cloned()
            .unwrap_or_else(|| self.ordinal.to_string());
        GameRecord {
            id,
            white_elo: parse_elo(get("WhiteElo")),
            black_elo: parse_elo(get("BlackElo")),
            time_control: get("TimeControl").and_then(|s| s.parse().ok()),
            headers,
            moves,
            result,
        }
    }
}

// A line ending in a result token closes the movetext, unless the token
// sits inside an open comment.
fn text_has_result(line: &str) -> bool {
    let stripped = line.trim_end();
    let opens = stripped.matches('{').count();
    let closes = stripped.matches('}').count();
    opens == closes
        && stripped
            .rsplit(char::is_whitespace)
            .next()
            .is_some_and(|t| GameResult::parse(t).is_some())
}

impl<R: BufRead> Iterator for PgnReader<R> {
    type Item = io::Result<GameRecord>;

    fn next(&mut self) -> Option<io::Result<GameRecord>> {
        self.next_game().transpose()
    }
}

/// Opens a PGN file, decompressing it when it starts with the gzip magic.
pub fn open_pgn(path: impl AsRef<std::path::Path>) -> io::Result<PgnReader<Box<dyn BufRead>>> {
    let mut file = io::BufReader::new(std::fs::File::open(path)?);
    let gz = file.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    let input: Box<dyn BufRead> = if gz {
        Box::new(io::BufReader::new(flate2::bufread::MultiGzDecoder::new(file)))
    } else {
        Box::new(file)
    };
    Ok(PgnReader::new(input))
}

//! Forsyth-Edwards notation.

use thiserror::Error;

use super::position::{Board, CastlingRights, Position, PositionError};
use super::types::{Color, Piece, Square};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FenError {
    #[error("missing FEN field: {0}")]
    MissingField(&'static str),
    #[error("unexpected trailing data in FEN")]
    TrailingData,
    #[error("expected 8 ranks, found {0}")]
    RankCount(usize),
    #[error("rank {rank} describes {files} files")]
    RankLength { rank: u8, files: usize },
    #[error("invalid piece letter {0:?}")]
    BadPiece(char),
    #[error("invalid side to move {0:?}")]
    BadTurn(String),
    #[error("invalid castling field {0:?}")]
    BadCastling(String),
    #[error("invalid en passant field {0:?}")]
    BadEnPassant(String),
    #[error("invalid move counter {0:?}")]
    BadCounter(String),
    #[error("illegal position: {0}")]
    Position(#[from] PositionError),
}

fn parse_placement(field: &str) -> Result<Board, FenError> {
    let ranks: Vec<&str> = field.split('/').collect();
    if ranks.len() != 8 {
        return Err(FenError::RankCount(ranks.len()));
    }
    let mut board = Board::empty();
    for (i, text) in ranks.iter().enumerate() {
        let rank = 7 - i as u8;
        let mut file = 0usize;
        for c in text.chars() {
            if let Some(d) = c.to_digit(10) {
                if d == 0 || d > 8 {
                    return Err(FenError::BadPiece(c));
                }
                file += d as usize;
            } else {
                let piece = Piece::from_fen_char(c).ok_or(FenError::BadPiece(c))?;
                if file < 8 {
                    board.put(Square::from_coords(file as u8, rank), piece);
                }
                file += 1;
            }
        }
        if file != 8 {
            return Err(FenError::RankLength {
                rank: rank + 1,
                files: file,
            });
        }
    }
    Ok(board)
}

fn parse_castling(field: &str) -> Result<CastlingRights, FenError> {
    if field == "-" {
        return Ok(CastlingRights::NONE);
    }
    let mut bits = 0u8;
    for c in field.chars() {
        let flag = match c {
            'K' => CastlingRights::WHITE_KING,
            'Q' => CastlingRights::WHITE_QUEEN,
            'k' => CastlingRights::BLACK_KING,
            'q' => CastlingRights::BLACK_QUEEN,
            _ => return Err(FenError::BadCastling(field.to_string())),
        };
        if bits & flag != 0 {
            return Err(FenError::BadCastling(field.to_string()));
        }
        bits |= flag;
    }
    Ok(CastlingRights::from_bits(bits))
}

pub fn placement_fen(board: &Board) -> String {
    let mut out = String::with_capacity(64);
    for rank in (0..8).rev() {
        let mut empty = 0;
        for file in 0..8 {
            match board.piece_at(Square::from_coords(file, rank)) {
                Some(p) => {
                    if empty > 0 {
                        out.push(char::from_digit(empty, 10).unwrap());
                        empty = 0;
                    }
                    out.push(p.fen_char());
                }
                None => empty += 1,
            }
        }
        if empty > 0 {
            out.push(char::from_digit(empty, 10).unwrap());
        }
        if rank > 0 {
            out.push('/');
        }
    }
    out
}

fn castling_fen(c: CastlingRights) -> String {
    if c.is_empty() {
        return "-".to_string();
    }
    [
        (CastlingRights::WHITE_KING, 'K'),
        (CastlingRights::WHITE_QUEEN, 'Q'),
        (CastlingRights::BLACK_KING, 'k'),
        (CastlingRights::BLACK_QUEEN, 'q'),
    ]
    .iter()
    .filter(|(flag, _)| c.has(*flag))
    .map(|(_, ch)| *ch)
    .collect()
}

impl Position {
    /// Parses a FEN string. The halfmove and fullmove fields are optional and
    /// default to `0 1`.
    pub fn from_fen(text: &str) -> Result<Position, FenError> {
        let mut fields = text.split_whitespace();
        let placement = fields.next().ok_or(FenError::MissingField("placement"))?;
        let turn = fields.next().ok_or(FenError::MissingField("side to move"))?;
        let castling = fields.next().ok_or(FenError::MissingField("castling"))?;
        let ep = fields.next().ok_or(FenError::MissingField("en passant"))?;
        let counter = |s: Option<&str>, default: u32| -> Result<u32, FenError> {
            match s {
                None => Ok(default),
                Some(s) => s.parse().map_err(|_| FenError::BadCounter(s.to_string())),
            }
        };
        let halfmove = counter(fields.next(), 0)?;
        let fullmove = counter(fields.next(), 1)?;
        if fields.next().is_some() {
            return Err(FenError::TrailingData);
        }

        let board = parse_placement(placement)?;
        let turn = match turn {
            "w" => Color::White,
            "b" => Color::Black,
            other => return Err(FenError::BadTurn(other.to_string())),
        };
        let castling = parse_castling(castling)?;
        let ep_square = match ep {
            "-" => None,
            s => Some(Square::parse(s).ok_or_else(|| FenError::BadEnPassant(s.to_string()))?),
        };
        Ok(Position::from_parts(board, turn, castling, ep_square, halfmove, fullmove)?)
    }

    /// First four FEN fields; identifies the position up to move counters.
    pub fn epd(&self) -> String {
        format!(
            "{} {} {} {}",
            placement_fen(&self.board),
            self.turn.char(),
            castling_fen(self.castling),
            self.ep_square.map_or_else(|| "-".to_string(), |s| s.to_string())
        )
    }

    pub fn to_fen(&self) -> String {
        format!("{} {} {}", self.epd(), self.halfmove_clock, self.fullmove_number)
    }
}

impl std::str::FromStr for Position {
    type Err = FenError;

    fn from_str(s: &str) -> Result<Position, FenError> {
        Position::from_fen(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::types::Role;

    #[test]
    fn parses_basic_positions() {
        let p = Position::from_fen("k7/8/8/8/8/8/8/K5Q1 w - - 0 1").unwrap();
        assert_eq!(p.piece_count(), 3);
        assert_eq!(p.turn(), Color::White);
        assert_eq!(
            p.board().piece_at(Square::parse("g1").unwrap()),
            Some(Piece::new(Color::White, Role::Queen))
        );

        let p = Position::from_fen("k7/1Q6/1K6/8/8/8/8/8 b - - 0 1").unwrap();
        assert_eq!(p.turn(), Color::Black);
    }

    #[test]
    fn round_trips() {
        for fen in [
            "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1",
            "k7/8/8/8/8/8/8/K5Q1 w - - 0 1",
            "r3k2r/8/8/8/8/8/8/R3K2R b Kq - 3 17",
            "4k3/8/8/3Pp3/8/8/8/4K3 w - e6 0 2",
        ] {
            assert_eq!(Position::from_fen(fen).unwrap().to_fen(), fen);
        }
    }

    #[test]
    fn ep_square_written_in_fourth_field() {
        let p = Position::from_fen("4k3/8/8/3Pp3/8/8/8/4K3 w - e6 0 2").unwrap();
        assert_eq!(p.to_fen().split(' ').nth(3), Some("e6"));
    }

    #[test]
    fn optional_counters() {
        let p = Position::from_fen("k7/8/8/8/8/8/8/K7 w - -").unwrap();
        assert_eq!(p.to_fen(), "k7/8/8/8/8/8/8/K7 w - - 0 1");
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(
            Position::from_fen("k7/8/8/8/8/8/8/K7 w"),
            Err(FenError::MissingField("castling"))
        );
        assert!(matches!(Position::from_fen("k7/8/8/8/8/8/K7 w - -"), Err(FenError::RankCount(7))));
        assert!(matches!(
            Position::from_fen("k7/9/8/8/8/8/8/K7 w - -"),
            Err(FenError::BadPiece('9'))
        ));
        assert!(matches!(
            Position::from_fen("k6/8/8/8/8/8/8/K7 w - -"),
            Err(FenError::RankLength { rank: 8, files: 7 })
        ));
        assert!(matches!(
            Position::from_fen("kx6/8/8/8/8/8/8/K7 w - -"),
            Err(FenError::BadPiece('x'))
        ));
        assert!(matches!(
            Position::from_fen("k7/8/8/8/8/8/8/K7 x - -"),
            Err(FenError::BadTurn(_))
        ));
        assert!(matches!(
            Position::from_fen("k7/8/8/8/8/8/8/K7 w - - zero 1"),
            Err(FenError::BadCounter(_))
        ));
    }

    #[test]
    fn rejects_illegal_positions() {
        assert!(matches!(
            Position::from_fen("k7/8/8/8/8/8/8/KK6 w - -"),
            Err(FenError::Position(PositionError::KingCount {
                color: Color::White,
                count: 2
            }))
        ));
        assert!(matches!(
            Position::from_fen("k7/8/8/8/8/8/8/8 w - -"),
            Err(FenError::Position(PositionError::KingCount { .. }))
        ));
        // Black king in check with white to move.
        assert_eq!(
            Position::from_fen("k7/1Q6/1K6/8/8/8/8/8 w - - 0 1"),
            Err(FenError::Position(PositionError::OpponentInCheck))
        );
        // The h1 queen checks a8 along the long diagonal.
        assert_eq!(
            Position::from_fen("k7/8/8/8/8/8/8/K6Q w - - 0 1"),
            Err(FenError::Position(PositionError::OpponentInCheck))
        );
        assert!(matches!(
            Position::from_fen("k7/8/8/8/8/8/8/K6P w - -"),
            Err(FenError::Position(PositionError::PawnOnBackRank(_)))
        ));
        assert!(matches!(
            Position::from_fen("k7/8/8/8/8/8/8/K7 w K -"),
            Err(FenError::Position(PositionError::InconsistentCastling))
        ));
    }
}

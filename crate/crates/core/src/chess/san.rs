//! Standard algebraic notation, resolved against a position's legal moves.

use thiserror::Error;

use super::position::{Move, Position};
use super::types::{Role, Square};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SanError {
    #[error("unparseable SAN {0:?}")]
    Syntax(String),
    #[error("SAN {0:?} matches no legal move")]
    Illegal(String),
    #[error("SAN {0:?} is ambiguous")]
    Ambiguous(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum San {
    Castle { king_side: bool },
    Normal {
        role: Role,
        file: Option<u8>,
        rank: Option<u8>,
        to: Square,
        promotion: Option<Role>,
    },
}

fn parse(text: &str) -> Option<San> {
    let core = text.trim_end_matches(['+', '#', '!', '?']);
    match core {
        "O-O" | "0-0" => return Some(San::Castle { king_side: true }),
        "O-O-O" | "0-0-0" => return Some(San::Castle { king_side: false }),
        _ => {}
    }
    if !core.is_ascii() || core.len() < 2 {
        return None;
    }
    let mut s = core;
    let mut promotion = None;
    if let Some(idx) = s.find('=') {
        let role = Role::from_upper(s[idx + 1..].chars().next()?)?;
        if s.len() != idx + 2 {
            return None;
        }
        promotion = Some(role);
        s = &s[..idx];
    } else if let Some(last) = s.chars().last() {
        // Promotion without '=' as in "e8Q".
        if s.len() >= 3 && last.is_ascii_uppercase() {
            promotion = Some(Role::from_upper(last)?);
            s = &s[..s.len() - 1];
        }
    }
    if matches!(promotion, Some(Role::King) | Some(Role::Pawn)) {
        return None;
    }
    let bytes = s.as_bytes();
    let (role, rest) = match Role::from_upper(bytes[0] as char) {
        Some(Role::Pawn) => return None,
        Some(r) => (r, &s[1..]),
        None => (Role::Pawn, s),
    };
    if rest.len() < 2 {
        return None;
    }
    let to = Square::parse(&rest[rest.len() - 2..])?;
    let mut file = None;
    let mut rank = None;
    for c in rest[..rest.len() - 2].chars() {
        match c {
            'a'..='h' if file.is_none() => file = Some(c as u8 - b'a'),
            '1'..='8' if rank.is_none() => rank = Some(c as u8 - b'1'),
            'x' | '-' | ':' => {}
            _ => return None,
        }
    }
    if promotion.is_some() && role != Role::Pawn {
        return None;
    }
    Some(San::Normal {
        role,
        file,
        rank,
        to,
        promotion,
    })
}

/// Syntactic check only; does not consult a position.
pub fn is_san_syntax(text: &str) -> bool {
    parse(text).is_some()
}

impl Position {
    pub fn parse_san(&self, text: &str) -> Result<Move, SanError> {
        let san = parse(text).ok_or_else(|| SanError::Syntax(text.to_string()))?;
        let legal = self.legal_moves();
        let mut found: Option<Move> = None;
        for m in legal {
            let ok = match &san {
                San::Castle { king_side } => {
                    self.is_castle(m) && ((m.to.file() == 6) == *king_side)
                }
                San::Normal {
                    role,
                    file,
                    rank,
                    to,
                    promotion,
                } => {
                    m.to == *to
                        && !self.is_castle(m)
                        && self.board.piece_at(m.from).map(|p| p.role) == Some(*role)
                        && file.is_none_or(|f| m.from.file() == f)
                        && rank.is_none_or(|r| m.from.rank() == r)
                        && m.promotion == *promotion
                }
            };
            if ok {
                if found.is_some() {
                    return Err(SanError::Ambiguous(text.to_string()));
                }
                found = Some(m);
            }
        }
        found.ok_or_else(|| SanError::Illegal(text.to_string()))
    }

    /// SAN for a legal move, with check and mate suffixes.
    pub fn to_san(&self, m: Move) -> String {
        let mut out = String::new();
        if self.is_castle(m) {
            out.push_str(if m.to.file() == 6 { "O-O" } else { "O-O-O" });
        } else {
            let role = self.board.piece_at(m.from).map(|p| p.role).unwrap_or(Role::Pawn);
            let capture = self.is_capture(m);
            if role == Role::Pawn {
                if capture {
                    out.push((b'a' + m.from.file()) as char);
                }
            } else {
                out.push(role.upper());
                let rivals: Vec<Move> = self
                    .legal_moves()
                    .into_iter()
                    .filter(|o| {
                        o.to == m.to
                            && o.from != m.from
                            && self.board.piece_at(o.from).map(|p| p.role) == Some(role)
                    })
                    .collect();
                if !rivals.is_empty() {
                    let same_file = rivals.iter().any(|o| o.from.file() == m.from.file());
                    let same_rank = rivals.iter().any(|o| o.from.rank() == m.from.rank());
                    if !same_file {
                        out.push((b'a' + m.from.file()) as char);
                    } else if !same_rank {
                        out.push((b'1' + m.from.rank()) as char);
                    } else {
                        out.push_str(&m.from.to_string());
                    }
                }
            }
            if capture {
                out.push('x');
            }
            out.push_str(&m.to.to_string());
            if let Some(p) = m.promotion {
                out.push('=');
                out.push(p.upper());
            }
        }
        let next = self.play_unchecked(m);
        if next.in_check() {
            out.push(if next.has_legal_move() { '+' } else { '#' });
        }
        out
    }
}

//! In-memory tablebase and its on-disk format.
//!
//! File layout, little-endian:
//!
//! ```text
//! magic "EBLB" | version u16 | name length u8 | name | piece count u8
//! | entry count u64 | entries, 2 bits each, 4 per byte, low bits first
//! | has_dtm u8 | [decisive count u64 | u16 per decisive entry]
//! | CRC-64/ECMA-182 u64 of everything before it
//! ```
//!
//! Entry codes: 0 broken, 1 loss, 2 draw, 3 win.

use std::fs;
use std::io::Write;
use std::path::Path;

use crc::{Crc, CRC_64_ECMA_182};

use super::index::Indexer;
use super::signature::MaterialSig;
use super::{TablebaseError, Wdl};
use crate::chess::Position;

pub const MAGIC: &[u8; 4] = b"EBLB";
pub const FORMAT_VERSION: u16 = 1;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_ECMA_182);
const LOW_BITS: u64 = 0x5555_5555_5555_5555;

pub(crate) const CODE_BROKEN: u8 = 0;
pub(crate) const CODE_LOSS: u8 = 1;
pub(crate) const CODE_DRAW: u8 = 2;
pub(crate) const CODE_WIN: u8 = 3;

#[derive(Debug, Clone)]
struct Dtm {
    values: Vec<u16>,
    // Decisive entries stored before each 32-entry word.
    rank: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Tablebase {
    indexer: Indexer,
    len: u64,
    words: Vec<u64>,
    dtm: Option<Dtm>,
}

fn decode(code: u8) -> Option<Wdl> {
    match code {
        CODE_LOSS => Some(Wdl::Loss),
        CODE_DRAW => Some(Wdl::Draw),
        CODE_WIN => Some(Wdl::Win),
        _ => None,
    }
}

impl Tablebase {
    /// Builds a table from one code per slot and, optionally, the
    /// distance to mate of each decisive slot in index order.
    pub(crate) fn from_codes(
        sig: MaterialSig,
        codes: impl ExactSizeIterator<Item = u8>,
        dtm: Option<Vec<u16>>,
    ) -> Tablebase {
        let len = codes.len() as u64;
        let mut words = vec![0u64; len.div_ceil(32) as usize];
        for (i, c) in codes.enumerate() {
            words[i / 32] |= (c as u64 & 3) << (2 * (i % 32));
        }
        let mut tb = Tablebase {
            indexer: Indexer::new(sig),
            len,
            words,
            dtm: None,
        };
        assert_eq!(len, tb.indexer.size(), "entry count must match the index layout");
        if let Some(values) = dtm {
            tb.attach_dtm(values).expect("dtm count matches decisive entries");
        }
        tb
    }

    fn attach_dtm(&mut self, values: Vec<u16>) -> Result<(), TablebaseError> {
        let mut rank = Vec::with_capacity(self.words.len());
        let mut total = 0u32;
        for w in &self.words {
            rank.push(total);
            total += (w & LOW_BITS).count_ones();
        }
        if total as usize != values.len() {
            return Err(TablebaseError::Malformed(format!(
                "{} dtm values for {} decisive entries",
                values.len(),
                total
            )));
        }
        self.dtm = Some(Dtm { values, rank });
        Ok(())
    }

    pub fn sig(&self) -> MaterialSig {
        self.indexer.sig()
    }

    pub fn indexer(&self) -> &Indexer {
        &self.indexer
    }

    /// Number of slots, broken ones included.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn has_dtm(&self) -> bool {
        self.dtm.is_some()
    }

    pub fn drop_dtm(&mut self) {
        self.dtm = None;
    }

    #[inline]
    pub fn code(&self, idx: u64) -> u8 {
        ((self.words[(idx / 32) as usize] >> (2 * (idx % 32))) & 3) as u8
    }

    /// Value at a slot; `None` for broken slots.
    #[inline]
    pub fn wdl(&self, idx: u64) -> Option<Wdl> {
        decode(self.code(idx))
    }

    /// Plies to mate for a decisive slot.
    pub fn dtm(&self, idx: u64) -> Option<u16> {
        let dtm = self.dtm.as_ref()?;
        let word = (idx / 32) as usize;
        let bit = 2 * (idx % 32);
        let w = self.words[word];
        if (w >> bit) & 1 == 0 {
            return None;
        }
        let below = if bit == 0 { 0 } else { w & LOW_BITS & ((1u64 << bit) - 1) };
        Some(dtm.values[(dtm.rank[word] + below.count_ones()) as usize])
    }

    /// Value and distance to mate of an en-passant-free position of this
    /// table's material.
    pub fn lookup(&self, p: &Position) -> (Wdl, Option<u16>) {
        debug_assert!(p.ep_square().is_none());
        let idx = self.indexer.index_of(p);
        let wdl = self.wdl(idx).expect("legal positions index non-broken slots");
        (wdl, self.dtm(idx))
    }

    /// Count of slots per code: broken, loss, draw, win.
    pub fn histogram(&self) -> [u64; 4] {
        let mut h = [0u64; 4];
        for i in 0..self.len {
            h[self.code(i) as usize] += 1;
        }
        h
    }

    /// The packed entry bytes as stored on disk.
    pub fn entry_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(4) as usize;
        let mut out = Vec::with_capacity(n);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(n);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let name = self.sig().to_string();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        out.push(self.sig().piece_count() as u8);
        out.extend_from_slice(&self.len.to_le_bytes());
        out.extend_from_slice(&self.entry_bytes());
        match &self.dtm {
            Some(d) => {
                out.push(1);
                out.extend_from_slice(&(d.values.len() as u64).to_le_bytes());
                for v in &d.values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            None => out.push(0),
        }
        let crc = CRC64.checksum(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Tablebase, TablebaseError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(TablebaseError::BadMagic);
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(TablebaseError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let name_len = r.u8()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| TablebaseError::Malformed("signature is not ASCII".into()))?
            .to_string();
        let pieces = r.u8()?;
        let len = r.u64()?;
        let entry_bytes = r.take(len.div_ceil(4) as usize)?;
        let has_dtm = r.u8()?;
        let dtm_bytes = match has_dtm {
            0 => None,
            1 => {
                let count = r.u64()? as usize;
                Some(r.take(count.checked_mul(2).ok_or(TablebaseError::Truncated)?)?)
            }
            other => return Err(TablebaseError::Malformed(format!("dtm flag {other}"))),
        };
        let body_end = r.pos;
        let stored = r.u64()?;
        if r.pos != bytes.len() {
            return Err(TablebaseError::Malformed("trailing bytes".into()));
        }
        if CRC64.checksum(&bytes[..body_end]) != stored {
            return Err(TablebaseError::Checksum);
        }

        let sig: MaterialSig = name.parse()?;
        if sig.to_string() != name || sig.piece_count() != pieces as u32 {
            return Err(TablebaseError::Malformed(format!("inconsistent header for {name}")));
        }
        let indexer = Indexer::new(sig);
        if indexer.size() != len {
            return Err(TablebaseError::Malformed(format!(
                "{name} has {len} entries, layout expects {}",
                indexer.size()
            )));
        }
        let mut words = vec![0u64; len.div_ceil(32) as usize];
        for (i, chunk) in entry_bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            words[i] = u64::from_le_bytes(buf);
        }
        let mut tb = Tablebase {
            indexer,
            len,
            words,
            dtm: None,
        };
        if let Some(d) = dtm_bytes {
            let values = d.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
            tb.attach_dtm(values)?;
        }
        Ok(tb)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TablebaseError> {
        let path = path.as_ref();
        let tmp = path.with_extension("wdl.tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tablebase, TablebaseError> {
        Tablebase::from_bytes(&fs::read(path)?)
    }

    /// File name used for this table inside a tablebase directory.
    pub fn file_name(sig: MaterialSig) -> String {
        format!("{sig}.wdl")
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TablebaseError> {
        let end = self.pos.checked_add(n).ok_or(TablebaseError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(TablebaseError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, TablebaseError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, TablebaseError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TablebaseError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

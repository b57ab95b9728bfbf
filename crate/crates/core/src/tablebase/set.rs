use std::collections::HashMap;
use std::path::Path;

use log::info;

use super::generate::{generate, GenStats};
use super::signature::MaterialSig;
use super::table::Tablebase;
use super::{Labels, MoveLabel, TablebaseError, Wdl};
use crate::chess::Position;

/// A collection of tablebases keyed by signature.
#[derive(Debug, Default, Clone)]
pub struct TablebaseSet {
    tables: HashMap<MaterialSig, Tablebase>,
}

impl TablebaseSet {
    pub fn new() -> TablebaseSet {
        TablebaseSet::default()
    }

    pub fn insert(&mut self, tb: Tablebase) {
        self.tables.insert(tb.sig(), tb);
    }

    pub fn get(&self, sig: MaterialSig) -> Option<&Tablebase> {
        self.tables.get(&sig)
    }

    pub fn get_mut(&mut self, sig: MaterialSig) -> Option<&mut Tablebase> {
        self.tables.get_mut(&sig)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Loaded signatures in generation order.
    pub fn sigs(&self) -> Vec<MaterialSig> {
        let mut v: Vec<_> = self.tables.keys().copied().collect();
        v.sort_by_key(|s| s.order_key());
        v
    }

    /// Largest piece count covered by every signature up to it.
    pub fn max_pieces(&self) -> u32 {
        (2..=32)
            .take_while(|&k| MaterialSig::all_up_to(k).iter().all(|s| self.tables.contains_key(s)))
            .last()
            .unwrap_or(0)
    }

    /// Generates every missing signature with at most `k` pieces, in
    /// dependency order. `on_table` sees each new table before it is kept.
    pub fn generate_up_to(
        &mut self,
        k: u32,
        mut on_table: impl FnMut(&Tablebase, &GenStats) -> Result<(), TablebaseError>,
    ) -> Result<Vec<(MaterialSig, GenStats)>, TablebaseError> {
        let mut out = Vec::new();
        for sig in MaterialSig::all_up_to(k) {
            if self.tables.contains_key(&sig) {
                continue;
            }
            let (tb, stats) = generate(sig, self)?;
            info!(
                "{sig}: {} legal, {} wins, {} draws, {} losses, max dtm {} in {:.1}s",
                stats.legal, stats.wins, stats.draws, stats.losses, stats.max_dtm, stats.seconds
            );
            on_table(&tb, &stats)?;
            self.insert(tb);
            out.push((sig, stats));
        }
        Ok(out)
    }

    /// Loads `<sig>.wdl` for every signature with at most `k` pieces.
    pub fn load_dir(dir: impl AsRef<Path>, k: u32) -> Result<TablebaseSet, TablebaseError> {
        let mut set = TablebaseSet::new();
        for sig in MaterialSig::all_up_to(k) {
            set.insert(Tablebase::load(dir.as_ref().join(Tablebase::file_name(sig)))?);
        }
        Ok(set)
    }

    /// Loads whatever `.wdl` files the directory holds.
    pub fn load_all(dir: impl AsRef<Path>) -> Result<TablebaseSet, TablebaseError> {
        let mut set = TablebaseSet::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "wdl") {
                set.insert(Tablebase::load(&path)?);
            }
        }
        Ok(set)
    }

    fn table_for(&self, p: &Position) -> Result<&Tablebase, TablebaseError> {
        let sig = MaterialSig::of(p);
        self.tables.get(&sig).ok_or(TablebaseError::MissingTable(sig))
    }

    /// Minimax value for the side to move. A position with an en-passant
    /// capture available is resolved by expanding one ply.
    pub fn probe_wdl(&self, p: &Position) -> Result<Wdl, TablebaseError> {
        if !p.castling().is_empty() {
            return Err(TablebaseError::CastlingRights);
        }
        if p.ep_square().is_none() {
            let tb = self.table_for(p)?;
            return Ok(tb.wdl(tb.indexer().index_of(p)).expect("legal positions index non-broken slots"));
        }
        let mut best = Wdl::Loss;
        for m in p.legal_moves() {
            best = best.max(self.probe_wdl(&p.play_unchecked(m))?.negate());
            if best == Wdl::Win {
                break;
            }
        }
        Ok(best)
    }

    /// Value and plies to mate. Needs distance-to-mate data for every
    /// table involved.
    pub fn probe_dtm(&self, p: &Position) -> Result<(Wdl, Option<u16>), TablebaseError> {
        if !p.castling().is_empty() {
            return Err(TablebaseError::CastlingRights);
        }
        if p.ep_square().is_none() {
            let tb = self.table_for(p)?;
            if !tb.has_dtm() {
                return Err(TablebaseError::MissingDtm(tb.sig()));
            }
            return Ok(tb.lookup(p));
        }
        // Best move for the mover: quickest win, else draw, else slowest loss.
        let mut best: Option<(Wdl, Option<u16>)> = None;
        for m in p.legal_moves() {
            let (v, d) = self.probe_dtm(&p.play_unchecked(m))?;
            let cand = (v.negate(), d.map(|d| d + 1));
            let better = match best {
                None => true,
                Some((bv, bd)) => {
                    cand.0 > bv
                        || (cand.0 == bv && cand.0 == Wdl::Win && cand.1 < bd)
                        || (cand.0 == bv && cand.0 == Wdl::Loss && cand.1 > bd)
                }
            };
            if better {
                best = Some(cand);
            }
        }
        Ok(best.expect("en-passant positions have a legal move"))
    }

    /// Labels every legal move. `n` counts the moves and `b` the blunders,
    /// moves whose resulting value for the mover is worse than the parent's.
    pub fn label_moves(&self, p: &Position) -> Result<Labels, TablebaseError> {
        let parent = self.probe_wdl(p)?;
        let mut labels = Vec::new();
        for m in p.legal_moves() {
            let v = self.probe_wdl(&p.play_unchecked(m))?.negate();
            labels.push(MoveLabel {
                mv: m,
                child_value_for_mover: v,
                is_blunder: v < parent,
            });
        }
        let b = labels.iter().filter(|l| l.is_blunder).count() as u32;
        Ok(Labels {
            parent,
            n: labels.len() as u32,
            b,
            labels,
        })
    }
}

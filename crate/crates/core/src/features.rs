//! Difficulty, skill and time features of a decision.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::chess::Position;
use crate::ingest::Instance;
use crate::tablebase::{TablebaseError, TablebaseSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D1Features {
    pub n: u32,
    pub b: u32,
    pub a: u32,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct D2Features {
    pub a_t0: u32,
    pub b_t0: u32,
    pub a_t1: u32,
    pub b_t1: u32,
    pub beta0: f64,
    pub beta1: f64,
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn depth1(tbs: &TablebaseSet, p: &Position) -> Result<D1Features, TablebaseError> {
    let l = tbs.label_moves(p)?;
    Ok(D1Features {
        n: l.n,
        b: l.b,
        a: l.n - l.b,
        beta: ratio(l.b, l.n),
    })
}

/// Opponent-side counts one ply down, split by whether the move that got
/// there was a blunder. Terminal children add nothing.
pub fn depth2(tbs: &TablebaseSet, p: &Position) -> Result<D2Features, TablebaseError> {
    let l = tbs.label_moves(p)?;
    let mut f = D2Features::default();
    for label in &l.labels {
        let child = p.play_unchecked(label.mv);
        if !child.has_legal_move() {
            continue;
        }
        let c = tbs.label_moves(&child)?;
        let (a, b) = if label.is_blunder {
            (&mut f.a_t1, &mut f.b_t1)
        } else {
            (&mut f.a_t0, &mut f.b_t0)
        };
        *a += c.n - c.b;
        *b += c.b;
    }
    f.beta0 = ratio(f.b_t0, f.a_t0 + f.b_t0);
    f.beta1 = ratio(f.b_t1, f.a_t1 + f.b_t1);
    Ok(f)
}

/// Expected score of a player rated `r1` against one rated `r2`.
pub fn expected_score(r1: f64, r2: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-(r1 - r2) / 400.0))
}

/// Column order of the feature matrix.
pub const FEATURE_NAMES: [&str; 12] = [
    "beta", "a", "b", "a_t0", "b_t0", "a_t1", "b_t1", "beta0", "beta1", "elo", "opp_elo", "time_left",
];

/// Value standing in for an unknown clock.
pub const MISSING_TIME: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub d1: D1Features,
    pub d2: D2Features,
    pub elo: i32,
    pub opp_elo: i32,
    pub time_left: Option<f64>,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.d1.beta,
            self.d1.a as f64,
            self.d1.b as f64,
            self.d2.a_t0 as f64,
            self.d2.b_t0 as f64,
            self.d2.a_t1 as f64,
            self.d2.b_t1 as f64,
            self.d2.beta0,
            self.d2.beta1,
            self.elo as f64,
            self.opp_elo as f64,
            self.time_left.unwrap_or(MISSING_TIME),
        ]
    }
}

/// A named selection of feature columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMask {
    Beta,
    D1,
    D2,
    D1D2,
    S,
    SD1D2,
    T,
    TD1D2,
    Full,
    SD2,
    TD2,
    SD2T,
    ST,
}

impl FeatureMask {
    pub const TASK1: [FeatureMask; 9] = [
        FeatureMask::Beta,
        FeatureMask::D1,
        FeatureMask::D2,
        FeatureMask::D1D2,
        FeatureMask::S,
        FeatureMask::SD1D2,
        FeatureMask::T,
        FeatureMask::TD1D2,
        FeatureMask::Full,
    ];
    pub const TASK2: [FeatureMask; 6] = [
        FeatureMask::D2,
        FeatureMask::S,
        FeatureMask::SD2,
        FeatureMask::T,
        FeatureMask::TD2,
        FeatureMask::SD2T,
    ];
    pub const TASK3: [FeatureMask; 3] = [FeatureMask::S, FeatureMask::T, FeatureMask::ST];
    pub const ALL: [FeatureMask; 13] = [
        FeatureMask::Beta,
        FeatureMask::D1,
        FeatureMask::D2,
        FeatureMask::D1D2,
        FeatureMask::S,
        FeatureMask::SD1D2,
        FeatureMask::T,
        FeatureMask::TD1D2,
        FeatureMask::Full,
        FeatureMask::SD2,
        FeatureMask::TD2,
        FeatureMask::SD2T,
        FeatureMask::ST,
    ];

    /// Column indices into `FEATURE_NAMES`, ascending.
    pub fn columns(self) -> Vec<usize> {
        const D1: [usize; 3] = [0, 1, 2];
        const D2: [usize; 6] = [3, 4, 5, 6, 7, 8];
        const S: [usize; 2] = [9, 10];
        const T: [usize; 1] = [11];
        let parts: &[&[usize]] = match self {
            FeatureMask::Beta => &[&[0]],
            FeatureMask::D1 => &[&D1],
            FeatureMask::D2 => &[&D2],
            FeatureMask::D1D2 => &[&D1, &D2],
            FeatureMask::S => &[&S],
            FeatureMask::SD1D2 => &[&D1, &D2, &S],
            FeatureMask::T => &[&T],
            FeatureMask::TD1D2 => &[&D1, &D2, &T],
            FeatureMask::Full => &[&D1, &D2, &S, &T],
            FeatureMask::SD2 => &[&D2, &S],
            FeatureMask::TD2 => &[&D2, &T],
            FeatureMask::SD2T => &[&D2, &S, &T],
            FeatureMask::ST => &[&S, &T],
        };
        parts.iter().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureMask::Beta => "beta",
            FeatureMask::D1 => "D1",
            FeatureMask::D2 => "D2",
            FeatureMask::D1D2 => "D1+D2",
            FeatureMask::S => "S",
            FeatureMask::SD1D2 => "S+D1+D2",
            FeatureMask::T => "t",
            FeatureMask::TD1D2 => "t+D1+D2",
            FeatureMask::Full => "S+t+D1+D2",
            FeatureMask::SD2 => "S+D2",
            FeatureMask::TD2 => "t+D2",
            FeatureMask::SD2T => "S+t+D2",
            FeatureMask::ST => "S+t",
        }
    }
}

impl std::str::FromStr for FeatureMask {
    type Err = String;

    /// Parses a label such as `D1+D2`, case-insensitively.
    fn from_str(s: &str) -> Result<FeatureMask, String> {
        FeatureMask::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let labels: Vec<_> = FeatureMask::ALL.iter().map(|m| m.label()).collect();
                format!("unknown feature mask {s:?}; expected one of {}", labels.join(", "))
            })
    }
}

/// An instance with its features, as written by the `features` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    #[serde(flatten)]
    pub instance: Instance,
    pub d1: D1Features,
    pub d2: D2Features,
}

impl FeatureRecord {
    pub fn vector(&self) -> FeatureVector {
        FeatureVector {
            d1: self.d1,
            d2: self.d2,
            elo: self.instance.elo,
            opp_elo: self.instance.opp_elo,
            time_left: self.instance.time_left,
        }
    }
}

/// Computes features per instance, reusing results for repeated positions.
#[derive(Default)]
pub struct FeatureCache {
    cache: HashMap<String, (D1Features, D2Features)>,
}

impl FeatureCache {
    pub fn new() -> FeatureCache {
        FeatureCache::default()
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    pub fn features(&mut self, tbs: &TablebaseSet, p: &Position) -> Result<(D1Features, D2Features), TablebaseError> {
        let key = crate::ingest::canonical_fen(p);
        if let Some(f) = self.cache.get(&key) {
            return Ok(*f);
        }
        let f = (depth1(tbs, p)?, depth2(tbs, p)?);
        self.cache.insert(key, f);
        Ok(f)
    }

    pub fn record(&mut self, tbs: &TablebaseSet, inst: &Instance) -> Result<FeatureRecord, FeatureError> {
        let p = inst.position()?;
        let (d1, d2) = self.features(tbs, &p)?;
        Ok(FeatureRecord {
            instance: inst.clone(),
            d1,
            d2,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error(transparent)]
    Fen(#[from] crate::chess::FenError),
    #[error(transparent)]
    Tablebase(#[from] TablebaseError),
}

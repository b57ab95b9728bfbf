//! Quantal-response synthetic players and instance populations.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{Color, Position};
use crate::ingest::{canonical_fen, Instance};
use crate::tablebase::{Labels, MaterialSig, MoveLabel, TablebaseError, TablebaseSet, Wdl};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no eligible position found in {0} draws")]
    NoEligiblePosition(u64),
    #[error("signature {0} is not loaded")]
    MissingTable(MaterialSig),
    #[error("bad population spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Tablebase(#[from] TablebaseError),
}

/// Blunder probability of a player with bias `c` facing `b` blunders among
/// `n` moves.
pub fn blunder_probability(n: u32, b: u32, c: f64) -> f64 {
    let (n, b) = (n as f64, b as f64);
    b / (c * (n - b) + b)
}

/// Picks a move: every non-blunder has weight `c`, every blunder weight 1.
pub fn choose_move<'a, R: Rng + ?Sized>(c: f64, labels: &'a [MoveLabel], rng: &mut R) -> &'a MoveLabel {
    assert!(!labels.is_empty(), "no moves to choose from");
    let b = labels.iter().filter(|l| l.is_blunder).count();
    let a = labels.len() - b;
    let total = c * a as f64 + b as f64;
    let blunder = a == 0 || (b > 0 && rng.gen::<f64>() * total >= c * a as f64);
    let k = rng.gen_range(0..if blunder { b } else { a });
    labels.iter().filter(|l| l.is_blunder == blunder).nth(k).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingDist {
    pub min: i32,
    pub max: i32,
}

impl RatingDist {
    fn sample(&self, rng: &mut impl Rng) -> i32 {
        rng.gen_range(self.min..=self.max)
    }
}

/// Bias as a function of rating, clock and time spent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CModel {
    /// Constant bias, used when `points` is empty.
    pub value: Option<f64>,
    /// (rating, c) knots; c is interpolated linearly in log c and held
    /// constant outside the knots.
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
    /// With a clock, c relaxes toward 1 as time runs out:
    /// `1 + (c - 1) * (1 - exp(-t / time_scale))`.
    pub time_scale: Option<f64>,
    /// Each second spent multiplies `c - 1` by `exp(-spent_slope)`.
    pub spent_slope: Option<f64>,
}

impl CModel {
    pub fn constant(c: f64) -> CModel {
        CModel {
            value: Some(c),
            ..CModel::default()
        }
    }

    pub fn by_rating(points: &[(f64, f64)]) -> CModel {
        CModel {
            points: points.to_vec(),
            ..CModel::default()
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.points.is_empty() && self.value.is_none() {
            return Err(SynthError::Spec("c needs `value` or `points`".into()));
        }
        let ok = self.value.is_none_or(|c| c >= 1.0)
            && self.points.iter().all(|p| p.1 >= 1.0)
            && self.points.windows(2).all(|w| w[0].0 < w[1].0);
        if !ok {
            return Err(SynthError::Spec("c values must be >= 1 with increasing ratings".into()));
        }
        Ok(())
    }

    pub fn base(&self, elo: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return self.value.unwrap_or(1.0);
        }
        if elo <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((x0, c0), (x1, c1)) = (w[0], w[1]);
            if elo <= x1 {
                let f = (elo - x0) / (x1 - x0);
                return (c0.ln() + f * (c1.ln() - c0.ln())).exp();
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn c(&self, elo: f64, time_left: Option<f64>, time_spent: Option<f64>) -> f64 {
        let mut excess = self.base(elo) - 1.0;
        if let (Some(scale), Some(t)) = (self.time_scale, time_left) {
            excess *= 1.0 - (-t / scale).exp();
        }
        if let (Some(slope), Some(s)) = (self.spent_slope, time_spent) {
            excess *= (-slope * s).exp();
        }
        1.0 + excess
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDist {
    /// Seconds left, uniform on `[min, max]`.
    pub min: f64,
    pub max: f64,
    /// Seconds spent, uniform on `[0, spent_max]`; absent means no
    /// time-spent field.
    pub spent_max: Option<f64>,
}

/// Declarative population description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub instances: u64,
    /// Signatures to draw positions from; empty means every loaded table.
    #[serde(default)]
    pub signatures: Vec<MaterialSig>,
    /// Draw this many distinct positions first and sample instances from
    /// them, so that positions repeat.
    pub pool: Option<usize>,
    /// Pool position `j` (from 0) gets weight `(j + 1)^-zipf`.
    #[serde(default)]
    pub zipf: f64,
    #[serde(default)]
    pub white_to_move_only: bool,
    pub rating: RatingDist,
    /// Opponent ratings; defaults to `rating`.
    pub opp_rating: Option<RatingDist>,
    pub c: CModel,
    pub time: Option<TimeDist>,
}

impl PopulationSpec {
    pub fn from_toml(text: &str) -> Result<PopulationSpec, SynthError> {
        let spec: PopulationSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.c.validate()?;
        if self.rating.min > self.rating.max {
            return Err(SynthError::Spec("rating.min > rating.max".into()));
        }
        if let Some(t) = &self.time {
            if !(0.0 <= t.min && t.min <= t.max) {
                return Err(SynthError::Spec("time range".into()));
            }
        }
        if self.pool == Some(0) {
            return Err(SynthError::Spec("pool must be positive".into()));
        }
        Ok(())
    }
}

/// An eligible position with its move labels.
#[derive(Debug, Clone)]
pub struct Drawn {
    pub position: Position,
    pub canonical_fen: String,
    pub labels: Labels,
}

/// Uniform draws over the stored slots of a set of tables, rejecting
/// positions that are lost, terminal, or have no blunder.
pub struct PositionSampler<'a> {
    tbs: &'a TablebaseSet,
    sigs: Vec<MaterialSig>,
    cumulative: Vec<u64>,
    white_only: bool,
}

const MAX_REJECTIONS: u64 = 1_000_000;

impl<'a> PositionSampler<'a> {
    pub fn new(tbs: &'a TablebaseSet, sigs: &[MaterialSig], white_only: bool) -> Result<PositionSampler<'a>, SynthError> {
        let sigs = if sigs.is_empty() { tbs.sigs() } else { sigs.to_vec() };
        let mut cumulative = Vec::new();
        let mut total = 0;
        for &s in &sigs {
            total += tbs.get(s).ok_or(SynthError::MissingTable(s))?.len();
            cumulative.push(total);
        }
        Ok(PositionSampler { tbs, sigs, cumulative, white_only })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<Drawn, SynthError> {
        let total = *self.cumulative.last().unwrap_or(&0);
        if total == 0 {
            return Err(SynthError::NoEligiblePosition(0));
        }
        for _ in 0..MAX_REJECTIONS {
            let r = rng.gen_range(0..total);
            let t = self.cumulative.partition_point(|&c| c <= r);
            let start = if t == 0 { 0 } else { self.cumulative[t - 1] };
            let tb = self.tbs.get(self.sigs[t]).unwrap();
            let Some(mut p) = tb.indexer().raw(r - start) else { continue };
            if tb.wdl(r - start) == Some(Wdl::Loss) {
                continue;
            }
            if self.white_only && p.turn() == Color::Black {
                // Colour-flipped twin has White to move and the same labels.
                p = crate::chess::Transform::ALL
                    .into_iter()
                    .map(|t| t.apply(&p))
                    .find(|q| q.turn() == Color::White)
                    .unwrap();
            }
            if !p.has_legal_move() {
                continue;
            }
            let labels = self.tbs.label_moves(&p)?;
            if labels.b == 0 {
                continue;
            }
            return Ok(Drawn {
                canonical_fen: canonical_fen(&p),
                position: p,
                labels,
            });
        }
        Err(SynthError::NoEligiblePosition(MAX_REJECTIONS))
    }
}

/// Deterministic instance stream for a spec and seed.
pub struct Population<'a> {
    spec: PopulationSpec,
    sampler: PositionSampler<'a>,
    pool: Vec<Drawn>,
    weights: Option<WeightedIndex<f64>>,
    rng: ChaCha8Rng,
    seed: u64,
    next: u64,
}

impl<'a> Population<'a> {
    pub fn new(spec: &PopulationSpec, tbs: &'a TablebaseSet, seed: u64) -> Result<Population<'a>, SynthError> {
        spec.validate()?;
        let sampler = PositionSampler::new(tbs, &spec.signatures, spec.white_to_move_only)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pool = Vec::new();
        let mut weights = None;
        if let Some(size) = spec.pool {
            let mut seen = std::collections::HashSet::new();
            let mut attempts = 0;
            while pool.len() < size && attempts < 20 * size as u64 + 1000 {
                attempts += 1;
                let d = sampler.sample(&mut rng)?;
                if seen.insert(d.canonical_fen.clone()) {
                    pool.push(d);
                }
            }
            let w: Vec<f64> = (0..pool.len()).map(|j| ((j + 1) as f64).powf(-spec.zipf)).collect();
            weights = Some(WeightedIndex::new(w).map_err(|e| SynthError::Spec(e.to_string()))?);
        }
        Ok(Population {
            spec: spec.clone(),
            sampler,
            pool,
            weights,
            rng,
            seed,
            next: 0,
        })
    }

    /// Distinct positions the instances are drawn from, when pooled, with
    /// their sampling weights.
    pub fn pool(&self) -> Vec<(&Drawn, f64)> {
        let total: f64 = (0..self.pool.len()).map(|j| ((j + 1) as f64).powf(-self.spec.zipf)).sum();
        self.pool
            .iter()
            .enumerate()
            .map(|(j, d)| (d, ((j + 1) as f64).powf(-self.spec.zipf) / total))
            .collect()
    }

    fn instance(&mut self) -> Result<Instance, SynthError> {
        let owned;
        let drawn = match &self.weights {
            Some(w) => &self.pool[w.sample(&mut self.rng)],
            None => {
                owned = self.sampler.sample(&mut self.rng)?;
                &owned
            }
        };
        let spec = &self.spec;
        let rng = &mut self.rng;
        let elo = spec.rating.sample(rng);
        let opp_elo = spec.opp_rating.as_ref().unwrap_or(&spec.rating).sample(rng);
        let (time_left, time_spent) = match &spec.time {
            Some(t) => (
                Some(rng.gen_range(t.min..=t.max)),
                t.spent_max.map(|m| rng.gen_range(0.0..=m)),
            ),
            None => (None, None),
        };
        let c = spec.c.c(elo as f64, time_left, time_spent);
        let choice = choose_move(c, &drawn.labels.labels, rng);
        let inst = Instance {
            fen: drawn.position.to_fen(),
            canonical_fen: drawn.canonical_fen.clone(),
            mv: choice.mv.to_uci(),
            is_blunder: choice.is_blunder,
            n: drawn.labels.n,
            b: drawn.labels.b,
            elo,
            opp_elo,
            time_left,
            time_spent,
            game_id: format!("synth-{}-{}", self.seed, self.next),
        };
        self.next += 1;
        Ok(inst)
    }
}

impl Iterator for Population<'_> {
    type Item = Result<Instance, SynthError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.spec.instances {
            return None;
        }
        Some(self.instance())
    }
}

/// Convenience wrapper collecting a whole population.
pub fn generate_population(spec: &PopulationSpec, tbs: &TablebaseSet, seed: u64) -> Result<Vec<Instance>, SynthError> {
    Population::new(spec, tbs, seed)?.collect()
}

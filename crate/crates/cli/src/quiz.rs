//! The blunder-spotting quiz: paired instances, guesses and an append-only
//! record log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blunder_core::chess::Color;
use blunder_core::ingest::Instance;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// What a participant sees of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceView {
    pub fen: String,
    pub white_elo: i32,
    pub black_elo: i32,
    pub white_clock: Option<f64>,
    /// Instances carry only the mover's clock.
    pub black_clock: Option<f64>,
}

impl InstanceView {
    fn of(i: &Instance) -> InstanceView {
        InstanceView {
            fen: i.fen.clone(),
            white_elo: i.elo,
            black_elo: i.opp_elo,
            white_clock: i.time_left,
            black_clock: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizPair {
    pub pair_id: String,
    pub instance_a: InstanceView,
    pub instance_b: InstanceView,
    pub blunder_side: Side,
    pub model_guess: Side,
    pub model_confidence: f64,
    /// Pool positions of the two instances.
    pub source_a: usize,
    pub source_b: usize,
}

/// The served form of a pair, without the answer or the model's guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairView {
    pub pair_id: String,
    pub instance_a: InstanceView,
    pub instance_b: InstanceView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessRecord {
    pub pair_id: String,
    pub participant: String,
    pub choice: Side,
    pub correct: bool,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GuessRequest {
    pub pair_id: String,
    pub participant: String,
    pub choice: Side,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuessResponse {
    #[serde(flatten)]
    pub record: GuessRecord,
    pub blunder_side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Pair(QuizPair),
    Guess(GuessRecord),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub guesses: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.guesses += 1;
        self.correct += correct as u64;
        self.accuracy = Some(self.correct as f64 / self.guesses as f64);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub human: Tally,
    pub participants: BTreeMap<String, Tally>,
    pub pairs_served: u64,
    pub pairs_answered: u64,
    /// The model's guesses on the pairs that received at least one answer.
    pub model: Tally,
    /// The model's guesses on every served pair.
    pub model_all_served: Tally,
}

/// A pool entry: an instance and the model's blunder score for it.
#[derive(Debug, Clone)]
pub struct Scored {
    pub instance: Instance,
    pub score: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum QuizError {
    #[error("the pool needs at least one blunder and one non-blunder with White to move")]
    Exhausted,
    #[error("unknown pair {0}")]
    UnknownPair(String),
    #[error("participant {participant} already answered pair {pair_id}")]
    Duplicate { pair_id: String, participant: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("store: {0}")]
    Store(#[from] std::io::Error),
    #[error("store line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

impl QuizError {
    fn status(&self) -> StatusCode {
        match self {
            QuizError::Exhausted => StatusCode::SERVICE_UNAVAILABLE,
            QuizError::UnknownPair(_) => StatusCode::NOT_FOUND,
            QuizError::Duplicate { .. } => StatusCode::CONFLICT,
            QuizError::BadRequest(_) => StatusCode::BAD_REQUEST,
            QuizError::Store(_) | QuizError::Corrupt { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for QuizError {
    fn into_response(self) -> Response {
        (self.status(), Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

pub struct Quiz {
    pool: Vec<Scored>,
    blunders: Vec<usize>,
    /// Non-blunders sorted by β for matched pairing.
    clean: Vec<usize>,
    match_beta: bool,
    rng: ChaCha8Rng,
    pairs: HashMap<String, QuizPair>,
    order: Vec<String>,
    guesses: Vec<GuessRecord>,
    answered: HashSet<(String, String)>,
    log: Option<File>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl Quiz {
    /// Builds a quiz over the White-to-move part of `pool`, without a store.
    pub fn new(pool: Vec<Scored>, seed: u64, match_beta: bool) -> Quiz {
        let pool: Vec<Scored> = pool
            .into_iter()
            .filter(|s| s.instance.position().is_ok_and(|p| p.turn() == Color::White))
            .collect();
        let blunders = (0..pool.len()).filter(|&i| pool[i].instance.is_blunder).collect();
        let mut clean: Vec<usize> = (0..pool.len()).filter(|&i| !pool[i].instance.is_blunder).collect();
        clean.sort_by(|&a, &b| pool[a].instance.beta().total_cmp(&pool[b].instance.beta()));
        Quiz {
            pool,
            blunders,
            clean,
            match_beta,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pairs: HashMap::new(),
            order: Vec::new(),
            guesses: Vec::new(),
            answered: HashSet::new(),
            log: None,
        }
    }

    /// Replays the record log at `path`, if any, then appends to it.
    pub fn with_store(mut self, path: impl AsRef<Path>, seed: u64) -> Result<Quiz, QuizError> {
        let path = path.as_ref();
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let complete = text.ends_with('\n');
            let lines: Vec<&str> = text.lines().collect();
            for (k, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Event>(line) {
                    Ok(e) => self.apply(e),
                    // A torn final write from a crash.
                    Err(e) if k + 1 == lines.len() && !complete => {
                        log::warn!("ignoring incomplete last record: {e}");
                    }
                    Err(e) => return Err(QuizError::Corrupt { line: k + 1, message: e.to_string() }),
                }
            }
            if !complete && !text.is_empty() {
                // Drop the torn tail so new records start on a fresh line.
                let keep = text.rfind('\n').map_or(0, |i| i + 1);
                OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
            }
        }
        // Continue the pair stream without repeating earlier ids.
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ (self.order.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        self.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(self)
    }

    /// Rebuilds statistics from a record log alone.
    pub fn replay(path: impl AsRef<Path>) -> Result<Stats, QuizError> {
        let mut q = Quiz::new(Vec::new(), 0, false);
        let file = BufReader::new(File::open(path)?);
        for (k, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|e| QuizError::Corrupt { line: k + 1, message: e.to_string() })?;
            q.apply(e);
        }
        Ok(q.stats())
    }

    fn apply(&mut self, e: Event) {
        match e {
            Event::Pair(p) => {
                self.order.push(p.pair_id.clone());
                self.pairs.insert(p.pair_id.clone(), p);
            }
            Event::Guess(g) => {
                self.answered.insert((g.pair_id.clone(), g.participant.clone()));
                self.guesses.push(g);
            }
        }
    }

    fn record(&mut self, e: Event) -> Result<(), QuizError> {
        if let Some(f) = &mut self.log {
            let mut line = serde_json::to_vec(&e).expect("events serialize");
            line.push(b'\n');
            f.write_all(&line)?;
            f.flush()?;
        }
        self.apply(e);
        Ok(())
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    /// The White-to-move pool that pairs are drawn from.
    pub fn pool(&self) -> &[Scored] {
        &self.pool
    }

    fn pick_clean(&mut self, blunder: usize) -> usize {
        if !self.match_beta {
            return self.clean[self.rng.gen_range(0..self.clean.len())];
        }
        let beta = self.pool[blunder].instance.beta();
        let at = self.clean.partition_point(|&i| self.pool[i].instance.beta() < beta);
        let near: Vec<usize> = [at.checked_sub(1), Some(at)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.clean.len())
            .collect();
        self.clean[near[self.rng.gen_range(0..near.len())]]
    }

    pub fn serve_pair(&mut self) -> Result<PairView, QuizError> {
        if self.blunders.is_empty() || self.clean.is_empty() {
            return Err(QuizError::Exhausted);
        }
        let bl = self.blunders[self.rng.gen_range(0..self.blunders.len())];
        let cl = self.pick_clean(bl);
        let blunder_side = if self.rng.gen() { Side::A } else { Side::B };
        let (a, b) = match blunder_side {
            Side::A => (bl, cl),
            Side::B => (cl, bl),
        };
        let (sa, sb) = (self.pool[a].score, self.pool[b].score);
        let model_guess = if sa >= sb { Side::A } else { Side::B };
        let model_confidence = if sa + sb > 0.0 { sa.max(sb) / (sa + sb) } else { 0.5 };
        let pair_id = loop {
            let id = format!("{:016x}", self.rng.gen::<u64>());
            if !self.pairs.contains_key(&id) {
                break id;
            }
        };
        let pair = QuizPair {
            pair_id,
            instance_a: InstanceView::of(&self.pool[a].instance),
            instance_b: InstanceView::of(&self.pool[b].instance),
            blunder_side,
            model_guess,
            model_confidence,
            source_a: a,
            source_b: b,
        };
        let view = PairView {
            pair_id: pair.pair_id.clone(),
            instance_a: pair.instance_a.clone(),
            instance_b: pair.instance_b.clone(),
        };
        self.record(Event::Pair(pair))?;
        Ok(view)
    }

    pub fn guess(&mut self, req: GuessRequest) -> Result<GuessResponse, QuizError> {
        if req.participant.is_empty() {
            return Err(QuizError::BadRequest("empty participant token".into()));
        }
        let pair = self.pairs.get(&req.pair_id).ok_or_else(|| QuizError::UnknownPair(req.pair_id.clone()))?;
        let blunder_side = pair.blunder_side;
        if self.answered.contains(&(req.pair_id.clone(), req.participant.clone())) {
            return Err(QuizError::Duplicate { pair_id: req.pair_id, participant: req.participant });
        }
        let record = GuessRecord {
            pair_id: req.pair_id,
            participant: req.participant,
            choice: req.choice,
            correct: req.choice == blunder_side,
            timestamp: now(),
        };
        self.record(Event::Guess(record.clone()))?;
        Ok(GuessResponse { record, blunder_side })
    }

    pub fn stats(&self) -> Stats {
        let mut s = Stats { pairs_served: self.order.len() as u64, ..Stats::default() };
        let mut answered = HashSet::new();
        for g in &self.guesses {
            s.human.add(g.correct);
            s.participants.entry(g.participant.clone()).or_default().add(g.correct);
            answered.insert(g.pair_id.as_str());
        }
        for id in &self.order {
            let p = &self.pairs[id];
            let right = p.model_guess == p.blunder_side;
            s.model_all_served.add(right);
            if answered.contains(id.as_str()) {
                s.model.add(right);
            }
        }
        s.pairs_answered = answered.len() as u64;
        s
    }

    /// A served pair with its hidden fields.
    pub fn pair(&self, id: &str) -> Option<&QuizPair> {
        self.pairs.get(id)
    }
}

pub type Shared = Arc<Mutex<Quiz>>;

async fn pair(State(q): State<Shared>) -> Result<Json<PairView>, QuizError> {
    q.lock().unwrap().serve_pair().map(Json)
}

async fn guess(State(q): State<Shared>, body: Bytes) -> Result<Json<GuessResponse>, QuizError> {
    let req: GuessRequest = serde_json::from_slice(&body).map_err(|e| QuizError::BadRequest(e.to_string()))?;
    q.lock().unwrap().guess(req).map(Json)
}

async fn stats(State(q): State<Shared>) -> Json<Stats> {
    Json(q.lock().unwrap().stats())
}

async fn api_not_found() -> Response {
    (StatusCode::NOT_FOUND, Json(serde_json::json!({ "error": "no such endpoint" }))).into_response()
}

const PLACEHOLDER: &str = "<!doctype html><title>Blunder quiz</title>\
<p>No UI bundle is being served. Start the service with <code>--static DIR</code>, \
or use the JSON API under <code>/api/quiz/</code>.</p>";

pub fn router(quiz: Shared, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/quiz/pair", get(pair))
        .route("/api/quiz/guess", post(guess))
        .route("/api/quiz/stats", get(stats))
        .route("/api/*rest", get(api_not_found).post(api_not_found))
        .with_state(quiz);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

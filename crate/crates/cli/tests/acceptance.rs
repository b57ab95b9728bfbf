//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use blunder_cli::quiz::{router, Quiz, Scored};
use blunder_core::analytics::{
    classify_skill_profile, fit_gamma, gamma_value, rate_by_beta, AggregateCurve, BinStats, Dim, SkillClass,
};
use blunder_core::chess::Position;
use blunder_core::features::{FeatureCache, FeatureMask, FeatureRecord};
use blunder_core::ingest::{extract_instances, filter_time_control, open_pgn, IngestFilter, IngestStats, Instance};
use blunder_core::learn::{bayes_accuracy, task1, task3, Dataset, LogisticProblem, TaskConfig, TreeModel, TreeParams};
use blunder_core::oracle::mate::{negamax_violation, MateSearch};
use blunder_core::synth::{CModel, Population, PopulationSpec, RatingDist};
use blunder_core::tablebase::{MaterialSig, Tablebase, TablebaseSet, Wdl};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

#[derive(Default)]
struct Report {
    failed: Vec<String>,
    total: usize,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        std::io::stdout().flush().unwrap();
        if !pass {
            self.failed.push(name.to_string());
        }
    }

    fn skip(&self, name: &str, why: &str) {
        println!("SKIP {name}: {why}");
    }
}

fn info(line: String) {
    println!("     {line}");
    std::io::stdout().flush().unwrap();
}

fn random_position(tb: &Tablebase, rng: &mut ChaCha8Rng) -> Position {
    loop {
        if let Some(p) = tb.indexer().raw(rng.gen_range(0..tb.len())) {
            return p;
        }
    }
}

const DRAWN: [&str; 3] = ["KvK", "KBvK", "KNvK"];
const NEGAMAX_SAMPLES: usize = 100_000;
const ORACLE_SAMPLES: usize = 1_000;

fn tablebases(r: &mut Report) -> TablebaseSet {
    let start = Instant::now();
    let mut set = TablebaseSet::new();
    set.generate_up_to(3, |_, _| Ok(())).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for name in DRAWN {
        let tb = set.get(name.parse().unwrap()).unwrap();
        let [_, loss, draw, win] = tb.histogram();
        ok &= loss == 0 && win == 0 && draw > 0;
        detail.push(format!("{name} {draw}/{} draw", loss + draw + win));
    }
    let secs = start.elapsed().as_secs_f64();
    r.check("tablebase/trivial-draws", ok && secs < 60.0, format!("{}, {secs:.1}s", detail.join(", ")));

    set.generate_up_to(4, |_, _| Ok(())).unwrap();
    info(format!("{} tables up to 4 pieces in {:.1}s", set.len(), start.elapsed().as_secs_f64()));

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sigs: Vec<MaterialSig> =
        set.sigs().into_iter().filter(|s| s.piece_count() >= 3 && !DRAWN.contains(&s.to_string().as_str())).collect();
    let mut violations = 0;
    let mut disagreements = 0;
    for &sig in &sigs {
        let t = Instant::now();
        let tb = set.get(sig).unwrap();
        let mut v = 0;
        for _ in 0..NEGAMAX_SAMPLES {
            let p = random_position(tb, &mut rng);
            if let Some(msg) = negamax_violation(&set, &p).unwrap() {
                if v < 3 {
                    info(format!("negamax violation: {msg}"));
                }
                v += 1;
            }
        }
        let mut search = MateSearch::new(Some(&set));
        let mut d = 0;
        for _ in 0..ORACLE_SAMPLES {
            if search.table_len() > 6_000_000 {
                search.clear();
            }
            let p = random_position(tb, &mut rng);
            let (wdl, dtm) = tb.lookup(&p);
            let agrees = match (wdl, dtm) {
                (Wdl::Win, Some(n)) => search.wins_within(&p, n),
                (Wdl::Loss, Some(n)) => search.loses_within(&p, n),
                (Wdl::Draw, _) => search.value(&p, 5) == Wdl::Draw,
                _ => false,
            };
            if !agrees {
                if d < 3 {
                    info(format!("oracle disagrees at {p}: stored {wdl:?} {dtm:?}"));
                }
                d += 1;
            }
        }
        info(format!("{sig}: {v} negamax violations, {d} oracle disagreements, {:.1}s", t.elapsed().as_secs_f64()));
        violations += v;
        disagreements += d;
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(
        "tablebase/consistency",
        violations == 0 && disagreements == 0 && secs < 1800.0,
        format!(
            "{} signatures, {violations} negamax violations over {} samples, {disagreements} oracle disagreements over {} samples, {secs:.0}s",
            sigs.len(),
            sigs.len() * NEGAMAX_SAMPLES,
            sigs.len() * ORACLE_SAMPLES
        ),
    );
    set
}

fn blunder_bound(set: &TablebaseSet, r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let sigs = set.sigs();
    let (mut samples, mut violations) = (0u64, 0u64);
    while samples < 1_000_000 {
        let tb = set.get(sigs[rng.gen_range(0..sigs.len())]).unwrap();
        let p = random_position(tb, &mut rng);
        if !p.has_legal_move() {
            continue;
        }
        let l = set.label_moves(&p).unwrap();
        if l.n == 0 || l.b + 1 > l.n {
            violations += 1;
        }
        samples += 1;
    }
    r.check("labeling/b-at-most-n-minus-1", violations == 0, format!("{violations} violations over {samples} positions"));
}

fn spec(instances: u64, c: CModel) -> PopulationSpec {
    PopulationSpec {
        instances,
        signatures: Vec::new(),
        pool: None,
        zipf: 0.0,
        white_to_move_only: false,
        rating: RatingDist { min: 1000, max: 2000 },
        opp_rating: None,
        c,
        time: None,
    }
}

fn population(set: &TablebaseSet, s: &PopulationSpec, seed: u64) -> Vec<Instance> {
    Population::new(s, set, seed).unwrap().collect::<Result<_, _>>().unwrap()
}

/// Populations of 10⁶ at c = 15 and c = 1, kept for the curve checks.
fn gamma(set: &TablebaseSet, r: &mut Report) -> (Vec<Instance>, Vec<Instance>) {
    let start = Instant::now();
    let betas: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
    let cs = [1.0, 1.5, 2.0, 3.7, 15.0, 15.3, 99.9, 100.0, 1234.5, 1e4];
    let exact = betas.iter().all(|&b| gamma_value(b, 1.0) == b) && cs.iter().all(|&c| gamma_value(1.0, c) == 1.0);
    r.check("gamma/identities", exact, format!("{} values of beta, {} values of c", betas.len(), cs.len()));

    let mut worst = 0.0f64;
    for c in [2.0, 15.0, 100.0] {
        let mut curve = AggregateCurve::new(vec![Dim::width("beta", 0.1)]);
        for k in 0..10 {
            let beta = k as f64 / 10.0 + 0.05;
            let count = 1_000_000_000u64;
            let blunders = (gamma_value(beta, c) * count as f64).round() as u64;
            curve.bins.insert(vec![k], BinStats { count, blunders, beta_sum: beta * count as f64 });
        }
        let fit = fit_gamma(&curve).unwrap();
        worst = worst.max((fit.c - c).abs() / c);
    }
    r.check("gamma/noiseless-fit", worst < 1e-3, format!("worst relative error {worst:.2e}"));

    let mut ok = true;
    let mut detail = Vec::new();
    let mut kept = Vec::new();
    for (c, seed) in [(2.0, 301), (15.0, 302), (100.0, 303)] {
        let pop = population(set, &spec(1_000_000, CModel::constant(c)), seed);
        let fit = fit_gamma(&rate_by_beta(&pop, 0.1).unwrap()).unwrap();
        let rel = (fit.c - c).abs() / c;
        ok &= rel <= 0.10;
        detail.push(format!("c={c}: {:.2} ({:+.1}%)", fit.c, 100.0 * (fit.c - c) / c));
        if c == 15.0 {
            kept = pop;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.check("gamma/population-fit", ok && secs < 300.0, format!("{}, {secs:.0}s", detail.join(", ")));
    let uniform = population(set, &spec(1_000_000, CModel::constant(1.0)), 304);
    (kept, uniform)
}

/// Every bin with at least 500 instances sits within 3σ of the mean of
/// γ_c(β) over its instances.
fn curve_matches(pop: &[Instance], c: f64) -> (bool, String) {
    let dim = Dim::width("beta", 0.1);
    let mut expected: HashMap<i64, f64> = HashMap::new();
    for i in pop {
        *expected.entry(dim.key(i.beta())).or_default() += gamma_value(i.beta(), c);
    }
    let curve = rate_by_beta(pop, 0.1).unwrap();
    let (mut checked, mut worst) = (0, 0.0f64);
    for (key, bin) in curve.bins.iter().filter(|(_, b)| b.count >= 500) {
        let p = expected[&key[0]] / bin.count as f64;
        let z = (bin.rate() - p).abs() / (p * (1.0 - p) / bin.count as f64).sqrt();
        worst = worst.max(z);
        checked += 1;
    }
    (checked > 0 && worst <= 3.0, format!("{checked} bins, worst |z| {worst:.2}"))
}

fn curves(c15: &[Instance], c1: &[Instance], r: &mut Report) {
    let (ok, detail) = curve_matches(c15, 15.0);
    r.check("curves/c15-matches-gamma", ok, detail);
    let (ok, detail) = curve_matches(c1, 1.0);
    r.check("curves/c1-on-diagonal", ok, detail);
}

fn panel(rng: &mut ChaCha8Rng, rate: impl Fn(f64) -> f64) -> Vec<Instance> {
    (0..5000)
        .map(|_| {
            let elo = rng.gen_range(1000..=2000);
            Instance {
                fen: "panel".to_string(),
                canonical_fen: "panel".to_string(),
                mv: "a1a2".to_string(),
                is_blunder: rng.gen::<f64>() < rate((elo - 1000) as f64 / 1000.0),
                n: 10,
                b: 3,
                elo,
                opp_elo: 1500,
                time_left: None,
                time_spent: None,
                game_id: "panel".to_string(),
            }
        })
        .collect()
}

fn skill(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let classes: [(SkillClass, fn(f64) -> f64); 3] = [
        (SkillClass::Monotone, |x| 0.4 - 0.3 * x),
        (SkillClass::Neutral, |_| 0.25),
        (SkillClass::Anomalous, |x| 0.1 + 0.3 * x),
    ];
    const PANELS: usize = 200;
    for (class, rate) in classes {
        let mut wrong = 0;
        for _ in 0..PANELS {
            let inst = panel(&mut rng, rate);
            let refs: Vec<&Instance> = inst.iter().collect();
            if classify_skill_profile("panel", &refs, 1000).map(|p| p.class).ok() != Some(class) {
                wrong += 1;
            }
        }
        let rate = wrong as f64 / PANELS as f64;
        r.check(&format!("skill/{class:?}"), rate <= 0.05, format!("{wrong}/{PANELS} misclassified ({:.1}%)", 100.0 * rate));
    }
}

fn learner(set: &TablebaseSet, r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let x: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y: Vec<bool> = (0..200).map(|_| rng.gen()).collect();
    let problem = LogisticProblem { x, y, l2: 0.05 };
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta: Vec<f64> = (0..problem.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = problem.gradient(&theta);
        let h = 1e-5;
        let fd: Vec<f64> = (0..theta.len())
            .map(|j| {
                let (mut up, mut down) = (theta.clone(), theta.clone());
                up[j] += h;
                down[j] -= h;
                (problem.loss(&up) - problem.loss(&down)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    r.check("learn/gradient", worst < 1e-6, format!("worst relative error {worst:.2e} over 100 points"));

    let mut ds = Dataset::default();
    for _ in 0..20_000 {
        let beta: f64 = rng.gen();
        let mut row = [0.0; blunder_core::learn::NUM_FEATURES];
        row[0] = beta;
        row[9] = rng.gen_range(1000.0..2000.0);
        ds.push(row, (beta > 0.5) != (rng.gen::<f64>() < 0.1));
    }
    let tree = TreeModel::train(&ds, &FeatureMask::D1.columns(), TreeParams::default());
    let split = tree.root_split();
    let ok = matches!(split, Some((0, t)) if (t - 0.5).abs() <= 0.05);
    r.check("learn/tree-threshold", ok, format!("root split {split:?}, planted beta > 0.5"));

    // A pooled γ-mixture: c rises with rating, ratings uniform on 1000..=2000.
    let mut s = spec(1_000_000, CModel::by_rating(&[(1000.0, 3.0), (2000.0, 30.0)]));
    s.pool = Some(400);
    let pop = Population::new(&s, set, 506).unwrap();
    let mut groups: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (drawn, pi) in pop.pool() {
        let beta = drawn.labels.b as f64 / drawn.labels.n as f64;
        let p = (s.rating.min..=s.rating.max).map(|e| gamma_value(beta, s.c.base(e as f64))).sum::<f64>()
            / (s.rating.max - s.rating.min + 1) as f64;
        let g = groups.entry(beta.to_bits()).or_default();
        g.0 += pi;
        g.1 += pi * p;
    }
    let groups: Vec<(f64, f64)> = groups.values().map(|&(pi, m)| (pi, m / pi)).collect();
    let bayes = bayes_accuracy(&groups);
    let instances: Vec<Instance> = pop.collect::<Result<_, _>>().unwrap();
    let mut cache = FeatureCache::new();
    let records: Vec<FeatureRecord> = instances.iter().map(|i| cache.record(set, i).unwrap()).collect();
    let cfg = TaskConfig { seed: 507, ..TaskConfig::default() };
    let report = task1(&records, &[FeatureMask::Beta], &cfg).unwrap();
    let acc = report.results[0].accuracy;
    r.check(
        "learn/task1-bayes",
        (acc - bayes).abs() <= 0.02,
        format!("beta-only accuracy {acc:.4}, Bayes {bayes:.4}, {} test rows", report.results[0].test_rows),
    );
}

fn fics(set: &TablebaseSet, r: &mut Report) {
    let name = "fics/optional";
    let Some(path) = std::env::var_os("BLUNDER_FICS_PGN") else {
        r.skip(name, "BLUNDER_FICS_PGN not set");
        return;
    };
    let mut reader = open_pgn(&path).unwrap();
    let filter = IngestFilter::default();
    let mut stats = IngestStats::default();
    let mut cache = FeatureCache::new();
    let mut records = Vec::new();
    while let Some(g) = reader.next_game().unwrap() {
        for g in filter_time_control([g], filter.time_control.unwrap(), &mut stats) {
            for i in extract_instances(&g, set, &filter, &mut stats).unwrap() {
                records.push(cache.record(set, &i).unwrap());
            }
        }
    }
    let instances: Vec<Instance> = records.iter().map(|r| r.instance.clone()).collect();
    let c = fit_gamma(&rate_by_beta(&instances, 0.1).unwrap()).unwrap().c;
    let cfg = TaskConfig::default();
    let masks = [FeatureMask::Beta, FeatureMask::D1D2, FeatureMask::S, FeatureMask::T];
    let t1 = task1(&records, &masks, &cfg).unwrap();
    let mut ok = (10.0..=20.0).contains(&c);
    let mut detail = vec![format!("{} instances, c={c:.1}", instances.len())];
    for (m, target) in t1.results.iter().zip([0.73, 0.75, 0.55, 0.53]) {
        ok &= (m.accuracy - target).abs() <= 0.03;
        detail.push(format!("{} {:.3}", m.mask, m.accuracy));
    }
    let t3 = task3(&records, &cfg).unwrap();
    if t3.positions.is_empty() {
        ok = false;
        detail.push("task 3 has no positions".to_string());
    }
    for (k, target) in [0.62, 0.54, 0.63].into_iter().enumerate() {
        let mean = t3.positions.iter().map(|p| p.results[k].accuracy).sum::<f64>() / t3.positions.len().max(1) as f64;
        ok &= (mean - target).abs() <= 0.04;
        detail.push(format!("task3 {} {mean:.3}", FeatureMask::TASK3[k].label()));
    }
    r.check(name, ok, detail.join(", "));
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn quiz(set: &TablebaseSet, r: &mut Report) {
    let mut s = spec(20_000, CModel::constant(15.0));
    s.white_to_move_only = true;
    let pool: Vec<Scored> =
        population(set, &s, 606).into_iter().map(|i| Scored { score: i.beta(), instance: i }).collect();
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("quiz-log.jsonl");
    let shared = Arc::new(Mutex::new(Quiz::new(pool, 607, false).with_store(&store, 607).unwrap()));
    let app = router(shared.clone(), None);
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();

    const GUESSERS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(608);
    let (mut bad_pairs, mut errors) = (0, 0);
    let stats = rt.block_on(async {
        for k in 0..GUESSERS {
            let (status, body) = call(&app, "GET", "/api/quiz/pair", None).await;
            if status != StatusCode::OK {
                errors += 1;
                continue;
            }
            let v: Value = serde_json::from_slice(&body).unwrap();
            let id = v["pair_id"].as_str().unwrap().to_string();
            {
                let q = shared.lock().unwrap();
                let p = q.pair(&id).unwrap();
                let pool = q.pool();
                let (a, b) = (&pool[p.source_a].instance, &pool[p.source_b].instance);
                let shown = a.fen == p.instance_a.fen && b.fen == p.instance_b.fen;
                let side_ok = a.is_blunder == (p.blunder_side == blunder_cli::quiz::Side::A);
                if !shown || a.is_blunder == b.is_blunder || !side_ok {
                    bad_pairs += 1;
                }
            }
            let choice = if rng.gen() { "A" } else { "B" };
            let body = json!({ "pair_id": id, "participant": format!("guesser-{k}"), "choice": choice });
            let (status, _) = call(&app, "POST", "/api/quiz/guess", Some(body)).await;
            if status != StatusCode::OK {
                errors += 1;
            }
        }
        call(&app, "GET", "/api/quiz/stats", None).await
    });
    let live: Value = serde_json::from_slice(&stats.1).unwrap();
    let acc = live["human"]["accuracy"].as_f64().unwrap_or(f64::NAN);
    let sigma = (0.25 / GUESSERS as f64).sqrt();
    r.check(
        "quiz/random-guessers",
        errors == 0 && stats.0 == StatusCode::OK && (acc - 0.5).abs() <= 3.0 * sigma,
        format!("accuracy {acc:.4} over {} guesses, 3 sigma = {:.4}, {errors} request errors", live["human"]["guesses"], 3.0 * sigma),
    );
    r.check("quiz/one-blunder-per-pair", bad_pairs == 0, format!("{bad_pairs} bad pairs out of {GUESSERS}"));

    drop(app);
    drop(shared);
    let replayed = serde_json::to_vec(&Quiz::replay(&store).unwrap()).unwrap();
    r.check(
        "quiz/replay",
        replayed == stats.1,
        format!("{} bytes live, {} bytes replayed", stats.1.len(), replayed.len()),
    );
}

fn main() {
    let start = Instant::now();
    let mut r = Report::default();
    let set = tablebases(&mut r);
    blunder_bound(&set, &mut r);
    let (c15, c1) = gamma(&set, &mut r);
    curves(&c15, &c1, &mut r);
    drop((c15, c1));
    skill(&mut r);
    learner(&set, &mut r);
    fics(&set, &mut r);
    quiz(&set, &mut r);
    println!(
        "{} of {} criteria passed in {:.0}s",
        r.total - r.failed.len(),
        r.total,
        start.elapsed().as_secs_f64()
    );
    if !r.failed.is_empty() {
        println!("failed: {}", r.failed.join(", "));
        std::process::exit(1);
    }
}

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use blunder_core::analytics::{self, AggregateCurve};
use blunder_core::chess::Position;
use blunder_core::features::{FeatureCache, FeatureMask, FeatureRecord, FEATURE_NAMES};
use blunder_core::ingest::{self, IngestFilter, Instance, TimeControl};
use blunder_core::learn::{self, Dataset, ModelFile, TaskConfig, TreeModel, TreeParams};
use blunder_core::synth::{Population, PopulationSpec};
use blunder_core::tablebase::{MaterialSig, Tablebase, TablebaseSet, Wdl};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::quiz::{self, Quiz, Scored};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "blunder", version, about = "Endgame tablebases and human blunder analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate every table with at most `--max-pieces` pieces.
    TbGen {
        #[arg(long, default_value_t = 4)]
        max_pieces: u32,
        #[arg(long, default_value = "tables")]
        out: PathBuf,
    },
    /// Print the value of a position and the label of every move.
    TbProbe {
        #[arg(long)]
        fen: String,
        #[arg(long, default_value = "tables")]
        tb: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Extract labeled decision instances from a PGN file.
    Extract {
        #[arg(long)]
        pgn: PathBuf,
        #[arg(long, default_value = "tables")]
        tb: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: u32,
        /// Required time control, or `any`.
        #[arg(long, default_value = "180+0")]
        tc: String,
        #[command(flatten)]
        out: Output,
    },
    /// Generate a synthetic instance population.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "tables")]
        tb: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Add depth-1 and depth-2 features to instances.
    Features {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value = "tables")]
        tb: PathBuf,
        /// Write a CSV table instead of JSON lines.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Aggregate blunder-rate reports.
    Analyze {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum)]
        report: Report,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// β bin width.
        #[arg(long, default_value_t = 0.1)]
        beta_width: f64,
        #[arg(long, default_value_t = analytics::RATING_WIDTH)]
        rating_width: f64,
        /// Minimum instances per position for per-position reports.
        #[arg(long, default_value_t = analytics::POSITION_THRESHOLD)]
        threshold: usize,
        /// Rating range of the time-beta report.
        #[arg(long, default_value_t = 1500)]
        elo_lo: i32,
        #[arg(long, default_value_t = 1600)]
        elo_hi: i32,
        #[command(flatten)]
        out: Output,
    },
    /// Run a prediction task and optionally save a model.
    Train(TrainArgs),
    /// Serve the blunder-spotting quiz.
    QuizServe(ServeArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Report {
    Grid,
    Beta,
    Gamma,
    Rating,
    RatingBeta,
    RatingNb,
    RatingPosition,
    SkillProfiles,
    Time,
    TimeBeta,
    TimeBetaRating,
    TimeSpent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Instances or feature records; plain instances need `--tb`.
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub tb: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub task: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 50)]
    pub min_leaf: usize,
    #[arg(long, default_value_t = 20)]
    pub min_position_count: usize,
    #[arg(long, default_value_t = 200)]
    pub min_pair_rows: usize,
    #[arg(long, default_value_t = 500)]
    pub min_blunders: usize,
    /// JSON report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the accuracies as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Train one tree on all balanced frequent rows and save it here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long, default_value = "D1+D2")]
    pub model_mask: FeatureMask,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub instances: PathBuf,
    /// Tree model file; without one the model guesses the higher β.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Tables for computing features of plain instances.
    #[arg(long)]
    pub tb: Option<PathBuf>,
    #[arg(long, env = "BLUNDER_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "quiz-log.jsonl")]
    pub store: PathBuf,
    /// Directory of the built UI bundle, served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pair each blunder with a non-blunder of nearby β.
    #[arg(long)]
    pub match_beta: bool,
}

fn open_read(path: &Path) -> Result<BufReader<File>, CliError> {
    Ok(BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?))
}

fn load_tables(dir: &Path) -> Result<TablebaseSet, CliError> {
    let set = TablebaseSet::load_all(dir)?;
    if set.is_empty() {
        return Err(CliError::Usage(format!("no tables in {}", dir.display())));
    }
    Ok(set)
}

/// Reads feature records, computing features for lines that are plain
/// instances.
pub fn load_records(path: &Path, tb: Option<&TablebaseSet>) -> Result<Vec<FeatureRecord>, CliError> {
    let mut cache = FeatureCache::new();
    let mut out = Vec::new();
    for (k, line) in open_read(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| CliError::Input(format!("{}:{}: {e}", path.display(), k + 1));
        let value: serde_json::Value = serde_json::from_str(&line).map_err(bad)?;
        if value.get("d1").is_some() {
            out.push(serde_json::from_value(value).map_err(bad)?);
        } else {
            let inst: Instance = serde_json::from_value(value).map_err(bad)?;
            let tb = tb.ok_or_else(|| CliError::Usage("plain instances need --tb to compute features".into()))?;
            out.push(cache.record(tb, &inst)?);
        }
    }
    Ok(out)
}

fn load_instances(path: &Path) -> Result<Vec<Instance>, CliError> {
    Ok(ingest::read_instances(open_read(path)?)?)
}

fn write_json(w: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::TbGen { max_pieces, out } => tb_gen(max_pieces, &out),
        Command::TbProbe { fen, tb, json } => tb_probe(&fen, &tb, json),
        Command::Extract { pgn, tb, k, tc, out } => extract(&pgn, &tb, k, &tc, &out),
        Command::Synth { spec, tb, seed, out } => synth(&spec, &tb, seed, &out),
        Command::Features { instances, tb, csv, out } => features(&instances, &tb, csv, &out),
        Command::Analyze { instances, report, format, beta_width, rating_width, threshold, elo_lo, elo_hi, out } => {
            let inst = load_instances(&instances)?;
            let opts = AnalyzeOptions { beta_width, rating_width, threshold, elo_lo, elo_hi };
            let text = analyze(&inst, report, format, &opts)?;
            let mut w = out.open()?;
            w.write_all(text.as_bytes())?;
            w.flush()?;
            Ok(())
        }
        Command::Train(args) => train(&args),
        Command::QuizServe(args) => serve(args),
    }
}

fn tb_gen(max_pieces: u32, out: &Path) -> Result<(), CliError> {
    if max_pieces > 5 {
        return Err(CliError::Usage("tables are limited to 5 pieces".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut set = TablebaseSet::load_all(out)?;
    let made = set.generate_up_to(max_pieces, |tb, _| tb.save(out.join(Tablebase::file_name(tb.sig()))))?;
    let mut stdout = io::stdout().lock();
    for (sig, st) in made {
        writeln!(
            stdout,
            "{}\tlegal {}\twins {}\tdraws {}\tlosses {}\tmax_dtm {}\t{:.1}s",
            Tablebase::file_name(sig),
            st.legal,
            st.wins,
            st.draws,
            st.losses,
            st.max_dtm,
            st.seconds
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeMove {
    san: String,
    uci: String,
    child_value_for_mover: Wdl,
    is_blunder: bool,
}

#[derive(Serialize)]
struct ProbeReport {
    fen: String,
    signature: String,
    value: Wdl,
    dtm: Option<u16>,
    n: u32,
    b: u32,
    moves: Vec<ProbeMove>,
}

fn tb_probe(fen: &str, dir: &Path, json: bool) -> Result<(), CliError> {
    let p = Position::from_fen(fen).map_err(|e| CliError::Input(format!("bad FEN: {e}")))?;
    let set = load_tables(dir)?;
    let (value, dtm) = set.probe_dtm(&p)?;
    let labels = set.label_moves(&p)?;
    let report = ProbeReport {
        fen: p.to_fen(),
        signature: MaterialSig::of(&p).to_string(),
        value,
        dtm,
        n: labels.n,
        b: labels.b,
        moves: labels
            .labels
            .iter()
            .map(|l| ProbeMove {
                san: p.to_san(l.mv),
                uci: l.mv.to_uci(),
                child_value_for_mover: l.child_value_for_mover,
                is_blunder: l.is_blunder,
            })
            .collect(),
    };
    let mut w = io::stdout().lock();
    if json {
        return write_json(&mut w, &report);
    }
    writeln!(w, "fen\t{}", report.fen)?;
    writeln!(w, "signature\t{}", report.signature)?;
    match report.dtm {
        Some(d) => writeln!(w, "value\t{:?}\tdtm {d}", report.value)?,
        None => writeln!(w, "value\t{:?}", report.value)?,
    }
    writeln!(w, "moves\tn {}\tb {}", report.n, report.b)?;
    for m in &report.moves {
        let tag = if m.is_blunder { "blunder" } else { "ok" };
        writeln!(w, "{}\t{}\t{:?}\t{tag}", m.san, m.uci, m.child_value_for_mover)?;
    }
    Ok(())
}

fn extract(pgn: &Path, dir: &Path, k: u32, tc: &str, out: &Output) -> Result<(), CliError> {
    let time_control = match tc {
        "any" => None,
        s => Some(s.parse::<TimeControl>().map_err(|e| CliError::Usage(format!("--tc {s}: {e}")))?),
    };
    let set = load_tables(dir)?;
    if set.max_pieces() < k {
        return Err(CliError::Usage(format!("--k {k} exceeds the loaded tables ({} pieces)", set.max_pieces())));
    }
    let mut reader = ingest::open_pgn(pgn).map_err(|e| CliError::io(pgn, e))?;
    let mut w = out.open()?;
    let stats = ingest::extract_stream(&mut reader, &set, &IngestFilter { k, time_control }, &mut w)?;
    w.flush()?;
    eprintln!("{}", serde_json::to_string(&stats).expect("stats serialize"));
    Ok(())
}

fn synth(spec: &Path, dir: &Path, seed: u64, out: &Output) -> Result<(), CliError> {
    let text = std::fs::read_to_string(spec).map_err(|e| CliError::io(spec, e))?;
    let spec = PopulationSpec::from_toml(&text)?;
    let set = load_tables(dir)?;
    let mut w = out.open()?;
    for inst in Population::new(&spec, &set, seed)? {
        serde_json::to_writer(&mut w, &inst?).expect("instances serialize");
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn features(instances: &Path, dir: &Path, csv: bool, out: &Output) -> Result<(), CliError> {
    let set = load_tables(dir)?;
    let records = load_records(instances, Some(&set))?;
    let mut w = out.open()?;
    if csv {
        writeln!(w, "game_id,canonical_fen,is_blunder,{}", FEATURE_NAMES.join(","))?;
        for r in &records {
            let v: Vec<String> = r.vector().to_array().iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},\"{}\",{},{}", r.instance.game_id, r.instance.canonical_fen, r.instance.is_blunder as u8, v.join(","))?;
        }
    } else {
        for r in &records {
            serde_json::to_writer(&mut w, r).expect("records serialize");
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub struct AnalyzeOptions {
    pub beta_width: f64,
    pub rating_width: f64,
    pub threshold: usize,
    pub elo_lo: i32,
    pub elo_hi: i32,
}

impl Default for AnalyzeOptions {
    fn default() -> AnalyzeOptions {
        AnalyzeOptions {
            beta_width: 0.1,
            rating_width: analytics::RATING_WIDTH,
            threshold: analytics::POSITION_THRESHOLD,
            elo_lo: 1500,
            elo_hi: 1600,
        }
    }
}

fn render(curve: &AggregateCurve, format: Format) -> String {
    match format {
        Format::Csv => curve.to_csv(),
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&curve.to_json()).expect("json")),
    }
}

/// Renders one report as text.
pub fn analyze(inst: &[Instance], report: Report, format: Format, o: &AnalyzeOptions) -> Result<String, CliError> {
    use analytics::*;
    let curve = match report {
        Report::Grid => rate_grid(inst)?,
        Report::Beta => rate_by_beta(inst, o.beta_width)?,
        Report::Rating => rate_by_rating(inst, o.rating_width)?,
        Report::RatingBeta => rate_by_rating_beta(inst, o.rating_width)?,
        Report::RatingNb => rate_by_rating_nb(inst, o.rating_width)?,
        Report::Time => rate_by_time(inst, &TIME_EDGES)?,
        Report::TimeBeta => rate_by_time_beta(inst, &TIME_EDGES, o.elo_lo, o.elo_hi)?,
        Report::TimeBetaRating => rate_by_time_beta_rating(inst, &TIME_EDGES, o.rating_width)?,
        Report::TimeSpent => rate_by_time_spent(inst, &TIME_EDGES, &SPENT_EDGES)?,
        Report::Gamma => {
            let fit = fit_gamma(&rate_by_beta(inst, o.beta_width)?)?;
            return Ok(match format {
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&fit).expect("json")),
                Format::Csv => {
                    let mut s = format!("# binning: beta width {}\nc,residual,bins\n", o.beta_width);
                    s += &format!("{},{},{}\n", fit.c, fit.residual, fit.bins.len());
                    s
                }
            });
        }
        Report::RatingPosition => {
            let per = rate_by_rating_position(inst, o.rating_width, o.threshold);
            return Ok(match format {
                Format::Json => {
                    let v: Vec<_> = per
                        .iter()
                        .map(|(k, c)| serde_json::json!({ "canonical_fen": k, "curve": c.to_json() }))
                        .collect();
                    format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
                }
                Format::Csv => per.iter().map(|(k, c)| format!("# position: {k}\n{}", c.to_csv())).collect(),
            });
        }
        Report::SkillProfiles => {
            let profiles = skill_profiles(inst, o.threshold);
            return Ok(match format {
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&profiles).expect("json")),
                Format::Csv => {
                    let mut s = format!("# threshold: {} instances, z {}\n", o.threshold, SKILL_Z);
                    s += "canonical_fen,instances,slope,stderr,z,class,separated\n";
                    for p in &profiles {
                        s += &format!(
                            "\"{}\",{},{},{},{},{:?},{}\n",
                            p.canonical_key, p.instances, p.slope, p.stderr, p.z, p.class, p.separated
                        );
                    }
                    s
                }
            });
        }
    };
    Ok(render(&curve, format))
}

#[derive(Serialize)]
struct TrainReport<T> {
    task: u8,
    config: TaskConfig,
    report: T,
}

fn train(a: &TrainArgs) -> Result<(), CliError> {
    let set = a.tb.as_deref().map(load_tables).transpose()?;
    let records = load_records(&a.instances, set.as_ref())?;
    let cfg = TaskConfig {
        seed: a.seed,
        tree: TreeParams { max_depth: a.max_depth, min_leaf: a.min_leaf },
        min_position_count: a.min_position_count,
        task2_min_rows: a.min_pair_rows,
        task3_min_blunders: a.min_blunders,
        ..TaskConfig::default()
    };
    let mut rows: Vec<(String, String, f64, usize)> = Vec::new();
    let json = match a.task {
        1 => {
            let r = learn::task1(&records, &FeatureMask::TASK1, &cfg)?;
            rows.extend(r.results.iter().map(|m| (String::new(), m.mask.clone(), m.accuracy, m.test_rows)));
            serde_json::to_string_pretty(&TrainReport { task: 1, config: cfg.clone(), report: r })
        }
        2 => {
            let r = learn::task2(&records, &cfg)?;
            for p in &r.pairs {
                let key = format!("n={} b={}", p.n, p.b);
                rows.extend(p.results.iter().map(|m| (key.clone(), m.mask.clone(), m.accuracy, m.test_rows)));
            }
            serde_json::to_string_pretty(&TrainReport { task: 2, config: cfg.clone(), report: r })
        }
        _ => {
            let r = learn::task3(&records, &cfg)?;
            if let Some(d) = &r.diagnostic {
                log::warn!("{d}");
            }
            for p in &r.positions {
                rows.extend(p.results.iter().map(|m| (p.canonical_fen.clone(), m.mask.clone(), m.accuracy, m.test_rows)));
            }
            serde_json::to_string_pretty(&TrainReport { task: 3, config: cfg.clone(), report: r })
        }
    }
    .expect("reports serialize");
    let mut w = Output { out: a.out.clone() }.open()?;
    writeln!(w, "{json}")?;
    w.flush()?;
    if let Some(path) = &a.csv {
        let mut f = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
        writeln!(f, "# task {}, seed {}\ngroup,mask,accuracy,test_rows", a.task, a.seed)?;
        for (g, m, acc, n) in rows {
            writeln!(f, "\"{g}\",{m},{acc},{n}")?;
        }
        f.flush()?;
    }
    if let Some(path) = &a.model_out {
        let ds = Dataset::from_records(learn::frequent(&records, cfg.min_position_count)).balance(cfg.seed)?;
        let tree = TreeModel::train(&ds, &a.model_mask.columns(), cfg.tree);
        let text = serde_json::to_string(&ModelFile::new(a.model_mask, tree)).expect("models serialize");
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

/// Scores every record with the model, or by β without one.
pub fn score_pool(records: Vec<FeatureRecord>, model: Option<&ModelFile>) -> Vec<Scored> {
    records
        .into_iter()
        .map(|r| Scored {
            score: model.map_or(r.d1.beta, |m| m.predict_proba(&r)),
            instance: r.instance,
        })
        .collect()
}

/// Builds the quiz for `quiz-serve` without binding a socket.
pub fn build_quiz(a: &ServeArgs) -> Result<Quiz, CliError> {
    let model = match &a.model {
        Some(p) => Some(ModelFile::from_json(&std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?)?),
        None => None,
    };
    let set = a.tb.as_deref().map(load_tables).transpose()?;
    let records = match (&model, &set) {
        (None, None) => load_instances(&a.instances)?
            .into_iter()
            .map(|i| FeatureRecord {
                d1: blunder_core::features::D1Features { n: i.n, b: i.b, a: i.n - i.b, beta: i.beta() },
                d2: Default::default(),
                instance: i,
            })
            .collect(),
        _ => load_records(&a.instances, set.as_ref())?,
    };
    let quiz = Quiz::new(score_pool(records, model.as_ref()), a.seed, a.match_beta).with_store(&a.store, a.seed)?;
    Ok(quiz)
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let quiz = build_quiz(&a)?;
    log::info!("quiz pool: {} White-to-move instances", quiz.pool_len());
    let app = quiz::router(Arc::new(Mutex::new(quiz)), a.static_dir.clone());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", a.port)).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}

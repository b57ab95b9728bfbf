use std::sync::OnceLock;

use blunder_core::chess::{CastlingRights, Color, Piece, Position, Role, Square, Transform};
use blunder_core::oracle::{negamax_violation, MateSearch};
use blunder_core::tablebase::{generate, GenStats, MaterialSig, Tablebase, TablebaseError, TablebaseSet, Wdl, FORMAT_VERSION};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Tables {
    set: TablebaseSet,
    stats: Vec<(MaterialSig, GenStats)>,
}

/// Every table up to three pieces plus KQvKR, generated once per process.
fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut set = TablebaseSet::new();
        let mut stats = set.generate_up_to(3, |_, _| Ok(())).unwrap();
        let (tb, st) = generate(sig("KQvKR"), &set).unwrap();
        set.insert(tb);
        stats.push((sig("KQvKR"), st));
        Tables { set, stats }
    })
}

fn sig(s: &str) -> MaterialSig {
    s.parse().unwrap()
}

fn pos(fen: &str) -> Position {
    Position::from_fen(fen).unwrap()
}

fn sample(tb: &Tablebase, rng: &mut ChaCha8Rng) -> Position {
    loop {
        if let Some(p) = tb.indexer().raw(rng.gen_range(0..tb.len())) {
            return p;
        }
    }
}

#[test]
fn insufficient_material_is_drawn_everywhere() {
    let set = &tables().set;
    for name in ["KvK", "KBvK", "KNvK"] {
        let [broken, loss, draw, win] = set.get(sig(name)).unwrap().histogram();
        assert!(broken > 0 && draw > 0, "{name}");
        assert_eq!((loss, win), (0, 0), "{name}");
    }
}

#[test]
fn probe_examples() {
    let set = &tables().set;
    assert_eq!(set.probe_wdl(&pos("k7/8/2K5/8/8/8/8/7Q w - - 0 1")).unwrap(), Wdl::Win);
    assert_eq!(set.probe_dtm(&pos("k7/1Q6/1K6/8/8/8/8/8 b - - 0 1")).unwrap(), (Wdl::Loss, Some(0)));
    assert_eq!(set.probe_wdl(&pos("k7/2Q5/1K6/8/8/8/8/8 b - - 0 1")).unwrap(), Wdl::Draw);
    assert_eq!(set.probe_dtm(&pos("k7/8/1K6/8/8/8/2Q5/8 w - - 0 1")).unwrap(), (Wdl::Win, Some(1)));
    // Colour-flipped twin reads the same table.
    let flipped = pos("7q/8/8/8/8/2k5/8/K7 b - - 0 1");
    assert_eq!(MaterialSig::of(&flipped), sig("KQvK"));
    assert_eq!(set.probe_wdl(&flipped).unwrap(), Wdl::Win);
}

#[test]
fn probe_errors() {
    let set = &tables().set;
    assert!(matches!(
        set.probe_wdl(&pos("r3k3/8/8/8/8/8/8/4K3 b q - 0 1")),
        Err(TablebaseError::CastlingRights)
    ));
    assert!(matches!(
        set.probe_wdl(&pos("k7/8/8/8/8/8/8/KQQ5 w - - 0 1")),
        Err(TablebaseError::MissingTable(s)) if s == sig("KQQvK")
    ));
}

#[test]
fn label_examples() {
    let set = &tables().set;
    let labels = set.label_moves(&pos("k7/8/1K6/8/8/8/2Q5/8 w - - 0 1")).unwrap();
    assert_eq!(labels.parent, Wdl::Win);
    let find = |uci: &str| labels.labels.iter().find(|l| l.mv.to_uci() == uci).unwrap();
    assert!(find("c2c7").is_blunder);
    assert_eq!(find("c2c7").child_value_for_mover, Wdl::Draw);
    assert!(!find("c2c8").is_blunder);
    assert_eq!(labels.n as usize, labels.labels.len());
    assert!(labels.b >= 1 && labels.b < labels.n);

    let kings = set.label_moves(&pos("k7/8/8/8/8/8/8/K7 w - - 0 1")).unwrap();
    assert_eq!((kings.n, kings.b), (3, 0));
}

#[test]
fn losing_positions_have_no_blunders() {
    let set = &tables().set;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tb = set.get(sig("KRvK")).unwrap();
    let mut seen = 0;
    while seen < 300 {
        let p = sample(tb, &mut rng);
        if set.probe_wdl(&p).unwrap() == Wdl::Loss && p.has_legal_move() {
            assert_eq!(set.label_moves(&p).unwrap().b, 0, "{p}");
            seen += 1;
        }
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let tb = tables().set.get(sig("KQvK")).unwrap();
    let path = dir.path().join(Tablebase::file_name(tb.sig()));
    tb.save(&path).unwrap();
    assert_eq!(path.file_name().unwrap(), "KQvK.wdl");
    let back = Tablebase::load(&path).unwrap();
    assert_eq!(back.entry_bytes(), tb.entry_bytes());
    assert_eq!(back.to_bytes(), tb.to_bytes());

    let mut bytes = tb.to_bytes();
    bytes[4..6].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        Tablebase::from_bytes(&bytes),
        Err(TablebaseError::Version { found, .. }) if found == FORMAT_VERSION + 1
    ));
    let mut bytes = tb.to_bytes();
    *bytes.last_mut().unwrap() ^= 1;
    assert!(matches!(Tablebase::from_bytes(&bytes), Err(TablebaseError::Checksum)));
}

#[test]
fn missing_dependency_is_named() {
    let mut set = TablebaseSet::new();
    set.generate_up_to(2, |_, _| Ok(())).unwrap();
    match generate(sig("KPvK"), &set) {
        Err(TablebaseError::MissingTable(s)) => {
            assert!(sig("KPvK").dependencies().contains(&s) && set.get(s).is_none(), "{s}")
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("generated without dependencies"),
    }
}

#[test]
fn negamax_consistency_on_samples() {
    let set = &tables().set;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in set.sigs() {
        let tb = set.get(s).unwrap();
        for _ in 0..10_000 {
            let p = sample(tb, &mut rng);
            if let Some(v) = negamax_violation(set, &p).unwrap() {
                panic!("{s}: {v}");
            }
        }
    }
}

#[test]
fn forward_search_agrees() {
    let set = &tables().set;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for name in ["KQvK", "KRvK", "KPvK", "KQvKR"] {
        let tb = set.get(sig(name)).unwrap();
        let mut search = MateSearch::new(Some(set));
        for _ in 0..200 {
            let p = sample(tb, &mut rng);
            let (w, d) = tb.lookup(&p);
            match w {
                Wdl::Win => assert!(search.wins_within(&p, d.unwrap()), "{p}"),
                Wdl::Loss => assert!(search.loses_within(&p, d.unwrap()), "{p}"),
                Wdl::Draw => assert_eq!(search.value(&p, 5), Wdl::Draw, "{p}"),
            }
        }
    }
}

#[test]
fn forward_search_without_hints() {
    let mut search = MateSearch::new(None);
    assert_eq!(search.dtm(&pos("k7/8/1K6/8/8/8/2Q5/8 w - - 0 1"), 5), Some((Wdl::Win, 1)));
    assert_eq!(search.dtm(&pos("k7/1Q6/1K6/8/8/8/8/8 b - - 0 1"), 5), Some((Wdl::Loss, 0)));
    assert_eq!(search.value(&pos("k7/2Q5/1K6/8/8/8/8/8 b - - 0 1"), 5), Wdl::Draw);
    let tb = tables().set.get(sig("KQvK")).unwrap();
    let p = pos("k7/8/2K5/8/8/8/8/7Q w - - 0 1");
    let (_, d) = tb.lookup(&p);
    assert_eq!(search.dtm(&p, 9), Some((Wdl::Win, d.unwrap())));
}

#[test]
fn dtm_parity_and_rounds() {
    let t = tables();
    for (s, stats) in &t.stats {
        assert_eq!(stats.rounds, stats.max_dtm, "{s}");
        let tb = t.set.get(*s).unwrap();
        let mut max = 0;
        for i in 0..tb.len() {
            match tb.wdl(i) {
                Some(Wdl::Win) => {
                    let d = tb.dtm(i).unwrap();
                    assert_eq!(d % 2, 1, "{s} {i}");
                    max = max.max(d);
                }
                Some(Wdl::Loss) => {
                    let d = tb.dtm(i).unwrap();
                    assert_eq!(d % 2, 0, "{s} {i}");
                    max = max.max(d);
                }
                _ => assert_eq!(tb.dtm(i), None),
            }
        }
        assert_eq!(max, stats.max_dtm, "{s}");
    }
    let maxima: Vec<_> = t.stats.iter().map(|(s, st)| (s.to_string(), st.max_dtm)).collect();
    assert!(maxima.contains(&("KQvK".to_string(), 20)));
    assert!(maxima.contains(&("KRvK".to_string(), 32)));
}

/// Random placement of the given pieces, `None` when illegal.
fn place(seed: u64, pieces: &[Piece]) -> Option<Position> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut board = blunder_core::chess::Board::empty();
    for &piece in pieces {
        let lo = if piece.role == Role::Pawn { 8 } else { 0 };
        let hi = if piece.role == Role::Pawn { 56 } else { 64 };
        let sq = Square::new(rng.gen_range(lo..hi));
        if board.piece_at(sq).is_some() {
            return None;
        }
        board.put(sq, piece);
    }
    let turn = if rng.gen_bool(0.5) { Color::White } else { Color::Black };
    Position::from_parts(board, turn, CastlingRights::NONE, None, 0, 1).ok()
}

fn kqkr() -> Vec<Piece> {
    vec![
        Piece::new(Color::White, Role::King),
        Piece::new(Color::Black, Role::King),
        Piece::new(Color::White, Role::Queen),
        Piece::new(Color::Black, Role::Rook),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn index_round_trip(seed in any::<u64>()) {
        let pieces = kqkr();
        if let Some(p) = place(seed, &pieces) {
            let ix = tables().set.get(sig("KQvKR")).unwrap().indexer();
            let i = ix.index_of(&p);
            prop_assert!(i < ix.size());
            prop_assert_eq!(ix.deindex(i).unwrap(), p.canonicalize().unwrap().0);
            for t in Transform::ALL {
                prop_assert_eq!(ix.index_of(&t.apply(&p)), i);
            }
        }
    }

    #[test]
    fn some_move_preserves_the_value(seed in any::<u64>()) {
        if let Some(p) = place(seed, &kqkr()) {
            if p.has_legal_move() {
                let l = tables().set.label_moves(&p).unwrap();
                prop_assert!(l.b < l.n);
                prop_assert_eq!(l.labels.iter().map(|x| x.child_value_for_mover).max().unwrap(), l.parent);
            }
        }
    }
}

//! Blunder-rate curves, the quantal-response fit and per-position skill
//! profiles.

mod curve;

pub use curve::{AggregateCurve, BinStats, Dim};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Instance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("no instances")]
    Empty,
    #[error("no instance carries {0}")]
    NoTime(&'static str),
    #[error("curve has {0} populated bins, need at least 3")]
    TooFewBins(usize),
    #[error("every bin rate is 0 or every bin rate is 1")]
    Degenerate,
    #[error("{found} instances, need {needed}")]
    TooFewInstances { found: usize, needed: usize },
    #[error("instances span a single rating bin")]
    SingleRatingBin,
}

/// Default edges of the time-left bins, in seconds.
pub const TIME_EDGES: [f64; 8] = [0.0, 2.0, 5.0, 8.0, 12.0, 20.0, 42.0, 58.0];
pub const RATING_WIDTH: f64 = 100.0;
/// Instances a position needs before it gets its own rating curve.
pub const POSITION_THRESHOLD: usize = 1000;

/// Predicted blunder rate for a player `c` times likelier to pick any
/// given non-blunder than any given blunder.
pub fn gamma_value(beta: f64, c: f64) -> f64 {
    // Same as β / (c - (c - 1)β), but exact at c = 1 and at β = 1.
    beta / (beta + c * (1.0 - beta))
}

fn nonempty(instances: &[Instance]) -> Result<(), AnalyticsError> {
    if instances.is_empty() {
        Err(AnalyticsError::Empty)
    } else {
        Ok(())
    }
}

/// r(n, b): blunder rate per exact move and blunder count.
pub fn rate_grid(instances: &[Instance]) -> Result<AggregateCurve, AnalyticsError> {
    nonempty(instances)?;
    let mut c = AggregateCurve::new(vec![Dim::exact("n"), Dim::exact("b")]);
    for i in instances {
        c.add(&[i.n as f64, i.b as f64], i.is_blunder, i.beta());
    }
    Ok(c)
}

/// r(β) with bins of the given width.
pub fn rate_by_beta(instances: &[Instance], width: f64) -> Result<AggregateCurve, AnalyticsError> {
    nonempty(instances)?;
    let mut c = AggregateCurve::new(vec![Dim::width("beta", width)]);
    for i in instances {
        c.add(&[i.beta()], i.is_blunder, i.beta());
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub c: f64,
    /// Count-weighted squared error at `c`.
    pub residual: f64,
    /// (mean β, rate, count) per bin.
    pub bins: Vec<(f64, f64, u64)>,
}

fn weighted_sse(bins: &[(f64, f64, u64)], c: f64) -> f64 {
    bins.iter()
        .map(|&(beta, rate, n)| n as f64 * (rate - gamma_value(beta, c)).powi(2))
        .sum()
}

/// Best `c` in [1, 1e4] for a curve, minimizing the count-weighted squared
/// error between bin rates and γ_c at each bin's mean β. Golden-section
/// search over log c.
pub fn fit_gamma(curve: &AggregateCurve) -> Result<GammaFit, AnalyticsError> {
    let bins: Vec<(f64, f64, u64)> = curve
        .bins
        .values()
        .filter(|b| b.count > 0)
        .map(|b| (b.mean_beta(), b.rate(), b.count))
        .collect();
    if bins.len() < 3 {
        return Err(AnalyticsError::TooFewBins(bins.len()));
    }
    if bins.iter().all(|b| b.1 == 0.0) || bins.iter().all(|b| b.1 == 1.0) {
        return Err(AnalyticsError::Degenerate);
    }
    let f = |lc: f64| weighted_sse(&bins, lc.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1e4f64.ln());
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let c = ((lo + hi) / 2.0).exp();
    Ok(GammaFit {
        c,
        residual: weighted_sse(&bins, c),
        bins,
    })
}

/// f(x): blunder rate by player rating.
pub fn rate_by_rating(instances: &[Instance], width: f64) -> Result<AggregateCurve, AnalyticsError> {
    nonempty(instances)?;
    let mut c = AggregateCurve::new(vec![Dim::width("elo", width)]);
    for i in instances {
        c.add(&[i.elo as f64], i.is_blunder, i.beta());
    }
    Ok(c)
}

/// f_β(x): rating curves per β rounded to the nearest 0.1.
pub fn rate_by_rating_beta(instances: &[Instance], width: f64) -> Result<AggregateCurve, AnalyticsError> {
    nonempty(instances)?;
    let mut c = AggregateCurve::new(vec![Dim::rounded("beta", 0.1), Dim::width("elo", width)]);
    for i in instances {
        c.add(&[i.beta(), i.elo as f64], i.is_blunder, i.beta());
    }
    Ok(c)
}

/// Rating curves for each fixed (n, b).
pub fn rate_by_rating_nb(instances: &[Instance], width: f64) -> Result<AggregateCurve, AnalyticsError> {
    nonempty(instances)?;
    let mut c = AggregateCurve::new(vec![Dim::exact("n"), Dim::exact("b"), Dim::width("elo", width)]);
    for i in instances {
        c.add(&[i.n as f64, i.b as f64, i.elo as f64], i.is_blunder, i.beta());
    }
    Ok(c)
}

/// Groups instances by canonical position, keeping positions with at
/// least `min` instances.
pub fn by_position(instances: &[Instance], min: usize) -> BTreeMap<&str, Vec<&Instance>> {
    let mut groups: BTreeMap<&str, Vec<&Instance>> = BTreeMap::new();
    for i in instances {
        groups.entry(i.canonical_fen.as_str()).or_default().push(i);
    }
    groups.retain(|_, v| v.len() >= min);
    groups
}

/// f_P(x): one rating curve per frequent position.
pub fn rate_by_rating_position(instances: &[Instance], width: f64, min: usize) -> Vec<(String, AggregateCurve)> {
    by_position(instances, min)
        .into_iter()
        .map(|(key, group)| {
            let mut c = AggregateCurve::new(vec![Dim::width("elo", width)]);
            for i in group {
                c.add(&[i.elo as f64], i.is_blunder, i.beta());
            }
            (key.to_string(), c)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkillClass {
    Monotone,
    Neutral,
    Anomalous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillProfile {
    pub canonical_key: String,
    pub instances: usize,
    /// Change in log-odds of a blunder per rating point.
    pub slope: f64,
    pub stderr: f64,
    pub z: f64,
    pub class: SkillClass,
    /// The logistic fit did not exist: all outcomes equal or perfectly
    /// separated by rating.
    pub separated: bool,
}

pub const SKILL_Z: f64 = 1.96;

/// Logistic regression of blunder on rating by Newton iterations. Returns
/// (slope, stderr) on the scale of `x`, or `None` under separation.
pub fn logistic_slope(x: &[f64], y: &[bool]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return None;
    }
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let (mut b0, mut b1) = (0.0f64, 0.0f64);
    let mut cov11 = f64::NAN;
    for _ in 0..100 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&zi, &yi) in z.iter().zip(y) {
            let p = 1.0 / (1.0 + (-(b0 + b1 * zi)).exp());
            let r = yi as u8 as f64 - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * zi;
            h00 += w;
            h01 += w * zi;
            h11 += w * zi * zi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 1e-12) {
            return None;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        b0 += d0;
        b1 += d1;
        cov11 = h00 / det;
        if !b1.is_finite() || b1.abs() > 30.0 || b0.abs() > 30.0 {
            return None;
        }
        if d0.abs().max(d1.abs()) < 1e-10 {
            return Some((b1 / sd, cov11.sqrt() / sd));
        }
    }
    Some((b1 / sd, cov11.sqrt() / sd))
}

/// Classifies how a position's blunder rate moves with rating.
pub fn classify_skill_profile(
    key: &str,
    instances: &[&Instance],
    threshold: usize,
) -> Result<SkillProfile, AnalyticsError> {
    if instances.len() < threshold {
        return Err(AnalyticsError::TooFewInstances { found: instances.len(), needed: threshold });
    }
    let rating_bins: BTreeSet<i64> = instances.iter().map(|i| Dim::width("elo", RATING_WIDTH).key(i.elo as f64)).collect();
    if rating_bins.len() < 2 {
        return Err(AnalyticsError::SingleRatingBin);
    }
    let x: Vec<f64> = instances.iter().map(|i| i.elo as f64).collect();
    let y: Vec<bool> = instances.iter().map(|i| i.is_blunder).collect();
    let fit = logistic_slope(&x, &y);
    let (slope, stderr, z, separated) = match fit {
        Some((s, e)) => (s, e, s / e, false),
        None => (0.0, f64::INFINITY, 0.0, true),
    };
    let class = if separated {
        SkillClass::Neutral
    } else if z < -SKILL_Z {
        SkillClass::Monotone
    } else if z > SKILL_Z {
        SkillClass::Anomalous
    } else {
        SkillClass::Neutral
    };
    Ok(SkillProfile {
        canonical_key: key.to_string(),
        instances: instances.len(),
        slope,
        stderr,
        z,
        class,
        separated,
    })
}

/// Profiles for every position with at least `threshold` instances.
pub fn skill_profiles(instances: &[Instance], threshold: usize) -> Vec<SkillProfile> {
    by_position(instances, threshold)
        .into_iter()
        .filter_map(|(key, group)| classify_skill_profile(key, &group, threshold).ok())
        .collect()
}

fn with_time(instances: &[Instance]) -> Result<impl Iterator<Item = (&Instance, f64)>, AnalyticsError> {
    if !instances.iter().any(|i| i.time_left.is_some()) {
        return Err(AnalyticsError::NoTime("time_left"));
    }
    Ok(instances.iter().filter_map(|i| i.time_left.map(|t| (i, t))))
}

/// g(t): blunder rate by seconds left on the mover's clock.
pub fn rate_by_time(instances: &[Instance], edges: &[f64]) -> Result<AggregateCurve, AnalyticsError> {
    let mut c = AggregateCurve::new(vec![Dim::edges("time_left", edges)]);
    for (i, t) in with_time(instances)? {
        c.add(&[t], i.is_blunder, i.beta());
    }
    Ok(c)
}

/// g_β(t) over players rated in `[lo, hi)`, β rounded to 0.1.
pub fn rate_by_time_beta(instances: &[Instance], edges: &[f64], lo: i32, hi: i32) -> Result<AggregateCurve, AnalyticsError> {
    let mut c = AggregateCurve::new(vec![Dim::rounded("beta", 0.1), Dim::edges("time_left", edges)]);
    for (i, t) in with_time(instances)? {
        if (lo..hi).contains(&i.elo) {
            c.add(&[i.beta(), t], i.is_blunder, i.beta());
        }
    }
    Ok(c)
}

/// g_{β,x}(t): time curves per rounded β and rating bin.
pub fn rate_by_time_beta_rating(instances: &[Instance], edges: &[f64], width: f64) -> Result<AggregateCurve, AnalyticsError> {
    let mut c = AggregateCurve::new(vec![
        Dim::rounded("beta", 0.1),
        Dim::width("elo", width),
        Dim::edges("time_left", edges),
    ]);
    for (i, t) in with_time(instances)? {
        c.add(&[i.beta(), i.elo as f64, t], i.is_blunder, i.beta());
    }
    Ok(c)
}

/// Default edges of the time-spent bins, in seconds.
pub const SPENT_EDGES: [f64; 6] = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Blunder rate by seconds spent on the move, stratified by time left and
/// rounded β.
pub fn rate_by_time_spent(
    instances: &[Instance],
    left_edges: &[f64],
    spent_edges: &[f64],
) -> Result<AggregateCurve, AnalyticsError> {
    if !instances.iter().any(|i| i.time_spent.is_some()) {
        return Err(AnalyticsError::NoTime("time_spent"));
    }
    let mut c = AggregateCurve::new(vec![
        Dim::edges("time_left", left_edges),
        Dim::rounded("beta", 0.1),
        Dim::edges("time_spent", spent_edges),
    ]);
    for i in instances {
        if let (Some(t), Some(s)) = (i.time_left, i.time_spent) {
            c.add(&[t, i.beta(), s], i.is_blunder, i.beta());
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A curve whose rates follow γ_c to about 1e-12.
    fn exact_curve(c: f64) -> AggregateCurve {
        let mut curve = AggregateCurve::new(vec![Dim::width("beta", 0.1)]);
        let count = 1_000_000_000_000u64;
        for k in 0..10 {
            let beta = k as f64 / 10.0 + 0.05;
            curve.bins.insert(
                vec![k],
                BinStats {
                    count,
                    blunders: (gamma_value(beta, c) * count as f64).round() as u64,
                    beta_sum: beta * count as f64,
                },
            );
        }
        curve
    }

    #[test]
    fn recovers_c_from_exact_curves() {
        for c in [2.0, 15.0, 100.0, 1.0] {
            let fit = fit_gamma(&exact_curve(c)).unwrap();
            assert!((fit.c - c).abs() / c < 1e-3, "{c} {}", fit.c);
        }
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_value(0.37, 1.0), 0.37);
        assert_eq!(gamma_value(1.0, 15.0), 1.0);
        assert!((gamma_value(0.9, 15.0) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn degenerate_curves_are_rejected() {
        let mut zero = exact_curve(15.0);
        zero.bins.values_mut().for_each(|b| b.blunders = 0);
        assert_eq!(fit_gamma(&zero), Err(AnalyticsError::Degenerate));
        let mut two = AggregateCurve::new(vec![Dim::width("beta", 0.1)]);
        two.add(&[0.2], true, 0.2);
        two.add(&[0.5], false, 0.5);
        assert_eq!(fit_gamma(&two), Err(AnalyticsError::TooFewBins(2)));
    }

    #[test]
    fn logistic_slope_signs() {
        let x: Vec<f64> = (0..2000).map(|i| 1000.0 + (i % 20) as f64 * 50.0).collect();
        // Deterministic pattern: blunders thin out with rating.
        let y: Vec<bool> = x.iter().enumerate().map(|(i, &r)| (i * 7919 % 1000) as f64 / 1000.0 < 0.5 - (r - 1000.0) / 3000.0).collect();
        let (s, e) = logistic_slope(&x, &y).unwrap();
        assert!(s < 0.0 && s / e < -SKILL_Z);
        assert_eq!(logistic_slope(&x, &vec![true; x.len()]), None);
        let separated: Vec<bool> = x.iter().map(|&r| r < 1500.0).collect();
        assert_eq!(logistic_slope(&x, &separated), None);
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// How one key coordinate maps back to a value range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dim {
    /// The key is the value itself.
    Exact { name: String },
    /// The key `k` covers `[k*width, (k+1)*width)`.
    Width { name: String, width: f64 },
    /// `k` rounds to the nearest multiple of `step`: value `k*step`.
    Rounded { name: String, step: f64 },
    /// The key indexes `[edges[k], edges[k+1])`; the last bin is open.
    Edges { name: String, edges: Vec<f64> },
}

impl Dim {
    pub fn exact(name: &str) -> Dim {
        Dim::Exact { name: name.into() }
    }

    pub fn width(name: &str, width: f64) -> Dim {
        Dim::Width { name: name.into(), width }
    }

    pub fn rounded(name: &str, step: f64) -> Dim {
        Dim::Rounded { name: name.into(), step }
    }

    pub fn edges(name: &str, edges: &[f64]) -> Dim {
        Dim::Edges { name: name.into(), edges: edges.to_vec() }
    }

    pub fn name(&self) -> &str {
        match self {
            Dim::Exact { name } | Dim::Width { name, .. } | Dim::Rounded { name, .. } | Dim::Edges { name, .. } => name,
        }
    }

    /// Key of a value along this dimension.
    pub fn key(&self, v: f64) -> i64 {
        match self {
            Dim::Exact { .. } => v as i64,
            // The nudge keeps exact multiples such as 0.3 / 0.1 in their own bin.
            Dim::Width { width, .. } => (v / width + 1e-9).floor() as i64,
            Dim::Rounded { step, .. } => (v / step).round() as i64,
            Dim::Edges { edges, .. } => edges.iter().rposition(|&e| v >= e).unwrap_or(0) as i64,
        }
    }

    fn label(&self, k: i64) -> String {
        match self {
            Dim::Exact { .. } => k.to_string(),
            Dim::Width { width: step, .. } | Dim::Rounded { step, .. } => {
                format!("{}", (k as f64 * step * 1e9).round() / 1e9)
            }
            Dim::Edges { edges, .. } => {
                let k = k as usize;
                match edges.get(k + 1) {
                    Some(hi) => format!("{}-{}", edges[k], hi),
                    None => format!("{}+", edges[k]),
                }
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            Dim::Exact { name } => format!("{name}=exact"),
            Dim::Width { name, width } => format!("{name}=width {width}"),
            Dim::Rounded { name, step } => format!("{name}=nearest {step}"),
            Dim::Edges { name, edges } => {
                let e: Vec<String> = edges.iter().map(|e| e.to_string()).collect();
                format!("{name}=edges [{}]", e.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub count: u64,
    pub blunders: u64,
    /// Sum of the blunder potential over the bin's instances.
    pub beta_sum: f64,
}

impl BinStats {
    pub fn rate(&self) -> f64 {
        self.blunders as f64 / self.count as f64
    }

    pub fn mean_beta(&self) -> f64 {
        self.beta_sum / self.count as f64
    }

    /// Binomial standard error of `rate` under the probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.count as f64).sqrt()
    }
}

/// Empirical blunder rates over a binned key space.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub dims: Vec<Dim>,
    pub bins: BTreeMap<Vec<i64>, BinStats>,
}

impl AggregateCurve {
    pub fn new(dims: Vec<Dim>) -> AggregateCurve {
        AggregateCurve { dims, bins: BTreeMap::new() }
    }

    /// Adds one instance at the given coordinate values.
    pub fn add(&mut self, values: &[f64], is_blunder: bool, beta: f64) {
        let key = self.dims.iter().zip(values).map(|(d, &v)| d.key(v)).collect();
        self.add_key(key, is_blunder, beta);
    }

    pub fn add_key(&mut self, key: Vec<i64>, is_blunder: bool, beta: f64) {
        let bin = self.bins.entry(key).or_default();
        bin.count += 1;
        bin.blunders += is_blunder as u64;
        bin.beta_sum += beta;
    }

    /// Folds in counts from a curve with the same binning.
    pub fn merge(&mut self, other: &AggregateCurve) {
        assert_eq!(self.dims, other.dims, "merging curves with different binning");
        for (k, b) in &other.bins {
            let e = self.bins.entry(k.clone()).or_default();
            e.count += b.count;
            e.blunders += b.blunders;
            e.beta_sum += b.beta_sum;
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.values().map(|b| b.count).sum()
    }

    pub fn get(&self, key: &[i64]) -> Option<&BinStats> {
        self.bins.get(key)
    }

    pub fn binning(&self) -> String {
        self.dims.iter().map(Dim::describe).collect::<Vec<_>>().join("; ")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# binning: {}\n", self.binning());
        for d in &self.dims {
            out.push_str(d.name());
            out.push(',');
        }
        out.push_str("count,blunders,rate,mean_beta\n");
        for (k, b) in &self.bins {
            for (d, &v) in self.dims.iter().zip(k) {
                out.push_str(&d.label(v));
                out.push(',');
            }
            let _ = writeln!(out, "{},{},{:.6},{:.6}", b.count, b.blunders, b.rate(), b.mean_beta());
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Row<'a> {
            key: &'a [i64],
            label: Vec<String>,
            count: u64,
            blunders: u64,
            rate: f64,
            mean_beta: f64,
        }
        let rows: Vec<Row> = self
            .bins
            .iter()
            .map(|(k, b)| Row {
                key: k,
                label: self.dims.iter().zip(k).map(|(d, &v)| d.label(v)).collect(),
                count: b.count,
                blunders: b.blunders,
                rate: b.rate(),
                mean_beta: b.mean_beta(),
            })
            .collect();
        serde_json::json!({ "binning": self.binning(), "dims": self.dims, "bins": rows })
    }
}

//! Configuration, report generation and rendering behind the command-line tool.
//!
//! Configs are flat `key = value` files; every report can be rendered as CSV
//! (with a versioned `# schema:` comment line) or JSON (embedding the config).

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{
    brute_force_nash, closed_form_nash, enumerate_nash, min_delta_no_ne, symmetric_ne_exact, symmetric_ne_interval,
    EquilibriumSet, MinDeltaReport, Regime, SymmetricNeInterval,
};
use crate::error::{ParamError, SweepError};
use crate::market::{Action, MarketParams, PriceGrid};
use crate::payoffs::{self, approx_eq};
use crate::stackelberg::{optimal_supplier_price, supplier_sweep, QGrid, SupplierSweep};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("{0} is required for this command")]
    Missing(&'static str),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

/// Spacing of the supplier quotes summed over in the equilibrium-count table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableQStep {
    /// Same as the row's price denomination.
    Delta,
    Fixed(f64),
}

/// Which equilibria a table row counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableCount {
    /// Profiles in which both manufacturers operate.
    Operating,
    /// Every pure equilibrium profile, including monopoly and shutdown.
    All,
}

/// How per-quote equilibrium counts are aggregated into one table entry:
/// summed over `q = 0, s, 2s, ... <= q_bar_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableProtocol {
    pub q_step: TableQStep,
    pub count: TableCount,
}

impl Default for TableProtocol {
    fn default() -> Self {
        Self { q_step: TableQStep::Delta, count: TableCount::Operating }
    }
}

impl TableProtocol {
    pub fn describe(&self) -> String {
        let step = match self.q_step {
            TableQStep::Delta => "delta".to_string(),
            TableQStep::Fixed(s) => fmt9(s),
        };
        let what = match self.count {
            TableCount::Operating => "operating",
            TableCount::All => "all",
        };
        format!("{what} profiles summed over q=0:{step}:q_bar_m")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: MarketParams,
    pub delta: f64,
    /// Denomination series for `ne-vs-q` and `supplier-sweep`; empty means `[delta]`.
    pub deltas: Vec<f64>,
    pub q: Option<f64>,
    /// Quotes traced by `min-delta` when `q` is unset.
    pub qs: Vec<f64>,
    pub q_step: Option<f64>,
    pub q_max: Option<f64>,
    pub halvings: u32,
    pub seed: u64,
    pub draws: usize,
    pub points: usize,
    pub protocol: TableProtocol,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: MarketParams::default(),
            delta: 4.0,
            deltas: Vec::new(),
            q: None,
            qs: vec![1.0, 5.0, 10.0],
            q_step: None,
            q_max: None,
            halvings: 8,
            seed: 0,
            draws: 200,
            points: 50,
            protocol: TableProtocol::default(),
        }
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value.trim().parse::<f64>().map_err(|e| bad(key, value, e))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), value: value.to_string(), reason: reason.to_string() }
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let p = &mut self.params;
        match key.trim() {
            "d_bar" => p.d_bar = parse_f64(key, value)?,
            "alpha" => p.alpha = parse_f64(key, value)?,
            "eps" => p.eps = parse_f64(key, value)?,
            "omega" => p.omega = parse_f64(key, value)?,
            "h" => p.h = parse_f64(key, value)?,
            "c_m" => p.c_m = parse_f64(key, value)?,
            "o_m" => p.o_m = parse_f64(key, value)?,
            "c_s" => p.c_s = parse_f64(key, value)?,
            "o_s" => p.o_s = parse_f64(key, value)?,
            "delta" => self.delta = parse_f64(key, value)?,
            "deltas" => self.deltas = parse_list(key, value)?,
            "q" => self.q = Some(parse_f64(key, value)?),
            "qs" => self.qs = parse_list(key, value)?,
            "q_step" => self.q_step = Some(parse_f64(key, value)?),
            "q_max" => self.q_max = Some(parse_f64(key, value)?),
            "halvings" => self.halvings = value.parse().map_err(|e| bad(key, value, e))?,
            "seed" => self.seed = value.parse().map_err(|e| bad(key, value, e))?,
            "draws" => self.draws = value.parse().map_err(|e| bad(key, value, e))?,
            "points" => self.points = value.parse().map_err(|e| bad(key, value, e))?,
            "protocol" => self.protocol = parse_protocol(value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax { line: 0, text: pair.to_string() })?;
        self.set(k, v)
    }

    /// Parses a config file body on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Checks the parameters and every numeric option.
    pub fn validate(mut self) -> Result<Self, ConfigError> {
        self.params = self.params.validate()?;
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(bad(key, &x.to_string(), "must be positive and finite"))
            }
        };
        positive("delta", self.delta)?;
        for &d in &self.deltas {
            positive("deltas", d)?;
        }
        for (key, x) in [("q_step", self.q_step), ("q_max", self.q_max)] {
            if let Some(x) = x {
                positive(key, x)?;
            }
        }
        for (key, x) in [("q", self.q)].into_iter().chain(self.qs.iter().map(|&x| ("qs", Some(x)))) {
            if let Some(x) = x {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(bad(key, &x.to_string(), "must be non-negative and finite"));
                }
            }
        }
        if let TableQStep::Fixed(s) = self.protocol.q_step {
            positive("protocol", s)?;
        }
        Ok(self)
    }

    /// Canonical `key = value` form; parses back to an equal config.
    pub fn to_kv(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        for (k, v) in [
            ("d_bar", p.d_bar),
            ("alpha", p.alpha),
            ("eps", p.eps),
            ("omega", p.omega),
            ("h", p.h),
            ("c_m", p.c_m),
            ("o_m", p.o_m),
            ("c_s", p.c_s),
            ("o_s", p.o_s),
            ("delta", self.delta),
        ] {
            let _ = writeln!(out, "{k} = {v:?}");
        }
        if !self.deltas.is_empty() {
            let _ = writeln!(out, "deltas = {}", self.deltas.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>().join(","));
        }
        for (k, v) in [("q", self.q), ("q_step", self.q_step), ("q_max", self.q_max)] {
            if let Some(v) = v {
                let _ = writeln!(out, "{k} = {v:?}");
            }
        }
        let _ = writeln!(out, "qs = {}", self.qs.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>().join(","));
        let _ = writeln!(out, "halvings = {}", self.halvings);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "draws = {}", self.draws);
        let _ = writeln!(out, "points = {}", self.points);
        let protocol = match (self.protocol.count, self.protocol.q_step) {
            (c, TableQStep::Delta) => format!("{}:delta", count_name(c)),
            (c, TableQStep::Fixed(s)) => format!("{}:{s:?}", count_name(c)),
        };
        let _ = writeln!(out, "protocol = {protocol}");
        out
    }

    /// Denomination series, falling back to the single `delta`.
    pub fn delta_series(&self) -> Vec<f64> {
        if self.deltas.is_empty() {
            vec![self.delta]
        } else {
            self.deltas.clone()
        }
    }

    /// Supplier-quote grid for one denomination, with the documented defaults.
    pub fn q_grid(&self, grid: &PriceGrid) -> QGrid {
        let default = QGrid::default_for(&self.params, grid);
        QGrid { q_step: self.q_step.unwrap_or(default.q_step), q_max: self.q_max.unwrap_or(default.q_max) }
    }
}

fn count_name(c: TableCount) -> &'static str {
    match c {
        TableCount::Operating => "operating",
        TableCount::All => "all",
    }
}

/// `operating:delta`, `all:0.5`, ...
fn parse_protocol(value: &str) -> Result<TableProtocol, ConfigError> {
    let (count, step) = value.split_once(':').unwrap_or((value, "delta"));
    let count = match count.trim() {
        "operating" => TableCount::Operating,
        "all" => TableCount::All,
        _ => return Err(bad("protocol", value, "count must be `operating` or `all`")),
    };
    let q_step = match step.trim() {
        "delta" => TableQStep::Delta,
        s => TableQStep::Fixed(parse_f64("protocol", s)?),
    };
    Ok(TableProtocol { q_step, count })
}

/// Fixed 9-significant-digit rendering (shortest form of the rounded value).
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { String::new() } else { format!("{x}") };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float formatting round-trips");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

fn fmt_price(grid: &PriceGrid, a: Action) -> String {
    grid.action_price(a).map(fmt9).unwrap_or_else(|| "n_o".to_string())
}

/// A rendered report: one table plus summary lines and an agreement flag.
#[derive(Debug, Clone)]
pub struct Report {
    pub schema: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Human-readable lines, printed on stderr by the CLI.
    pub summary: Vec<String>,
    pub json: serde_json::Value,
    /// False when an oracle comparison found a disagreement.
    pub agree: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Report {
    pub fn render(&self, format: Format, config: &ExperimentConfig) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => {
                let doc = serde_json::json!({
                    "schema": self.schema,
                    "config": config,
                    "summary": self.summary,
                    "report": self.json,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
        format!("# schema: {}\n{body}", self.schema)
    }
}

/// Parameters and derived thresholds of a config.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let p = &cfg.params;
    let grid = PriceGrid::for_market(p, cfg.delta)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for line in cfg.to_kv().lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            rows.push(vec![k.to_string(), v.to_string()]);
        }
    }
    let derived = [
        ("q_bar_m", payoffs::q_bar_m(p)),
        ("q_bar_s", payoffs::q_bar_s(p)),
        ("demand_ceiling", p.demand_ceiling()),
        ("max_index", grid.max_index() as f64),
    ];
    for (k, v) in derived {
        rows.push(vec![k.to_string(), fmt9(v)]);
    }
    let json: serde_json::Map<String, serde_json::Value> =
        derived.iter().map(|&(k, v)| (k.to_string(), serde_json::json!(v))).collect();
    let json = serde_json::Value::Object(json);
    Ok(Report {
        schema: "pricegame/validate/v1",
        header: vec!["key", "value"],
        rows,
        summary: vec!["config ok".to_string()],
        json,
        agree: true,
    })
}

/// Oracle versus closed-form equilibria at one quote.
#[derive(Debug, Clone, Serialize)]
pub struct NeComparison {
    pub q: f64,
    pub delta: f64,
    pub oracle: EquilibriumSet,
    pub closed_form: EquilibriumSet,
    pub interval: Option<SymmetricNeInterval>,
    pub only_oracle: Vec<(Action, Action)>,
    pub only_closed_form: Vec<(Action, Action)>,
    /// Disagreements on symmetric prices lying within tolerance of an interval end.
    pub boundary_ties: Vec<u32>,
    pub agree: bool,
}

/// Compares the exhaustive enumeration with the closed forms. Monopoly
/// profiles are not predicted in closed form and are left out of the diff.
pub fn compare_ne(params: &MarketParams, q: f64, grid: &PriceGrid) -> Result<NeComparison, ParamError> {
    let oracle = brute_force_nash(params, q, grid)?;
    let closed_form = closed_form_nash(params, q, grid);
    let interval = symmetric_ne_interval(params, q, grid).ok();
    let comparable = |set: &EquilibriumSet| {
        let mut v = set.profiles();
        v.retain(|&(a, b)| a.is_operating() == b.is_operating());
        v
    };
    let (ours, theirs) = (comparable(&oracle), comparable(&closed_form));
    let only_oracle: Vec<_> = ours.iter().filter(|x| !theirs.contains(x)).copied().collect();
    let only_closed_form: Vec<_> = theirs.iter().filter(|x| !ours.contains(x)).copied().collect();
    let at_boundary = |a: Action| match (a, &interval) {
        (Action::Price(l), Some(iv)) => approx_eq(grid.price(l), iv.s) || approx_eq(grid.price(l), iv.e),
        _ => false,
    };
    let mut boundary_ties = Vec::new();
    let mut agree = true;
    for &(a, b) in only_oracle.iter().chain(&only_closed_form) {
        if a == b && at_boundary(a) {
            boundary_ties.extend(a.index());
        } else {
            agree = false;
        }
    }
    Ok(NeComparison { q, delta: grid.delta(), oracle, closed_form, interval, only_oracle, only_closed_form, boundary_ties, agree })
}

pub fn cmd_ne_enumerate(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let q = cfg.q.ok_or(ConfigError::Missing("q"))?;
    let grid = PriceGrid::for_market(&cfg.params, cfg.delta)?;
    let cmp = compare_ne(&cfg.params, q, &grid)?;
    let mut rows = Vec::new();
    let mut push = |source: &str, set: &[(Action, Action)]| {
        for &(a, b) in set {
            let kind = match (a, b) {
                (Action::NoOperate, Action::NoOperate) => "shutdown",
                (x, y) if x == y => "symmetric",
                (x, y) if x.is_operating() && y.is_operating() => "asymmetric",
                _ => "monopoly",
            };
            rows.push(vec![source.to_string(), kind.to_string(), fmt_price(&grid, a), fmt_price(&grid, b)]);
        }
    };
    push("oracle", &cmp.oracle.profiles());
    push("closed_form", &cmp.closed_form.profiles());
    push("only_oracle", &cmp.only_oracle);
    push("only_closed_form", &cmp.only_closed_form);
    let sym: Vec<String> = cmp.oracle.symmetric.iter().map(|&l| fmt9(grid.price(l))).collect();
    let mut summary = vec![
        format!("regime {}", cmp.oracle.regime.as_str()),
        format!("symmetric operating equilibria {{{}}}", sym.join(", ")),
        format!("asymmetric equilibria {}", cmp.oracle.asymmetric.len()),
        format!("shutdown equilibrium {}", cmp.oracle.shutdown_ne),
    ];
    if let Some(iv) = &cmp.interval {
        summary.push(format!("interval [{}, {}]", fmt9(iv.s), fmt9(iv.e)));
    }
    summary.push(if cmp.agree { "oracle and closed form agree".into() } else { "DISAGREEMENT".into() });
    Ok(Report {
        schema: "pricegame/ne-enumerate/v1",
        header: vec!["source", "kind", "price_i", "price_j"],
        rows,
        summary,
        agree: cmp.agree,
        json: serde_json::to_value(&cmp).expect("serializable"),
    })
}

/// Rows of the equilibrium-count table: `(alpha, eps, delta, target)`.
pub const TABLE_ROWS: [(f64, f64, f64, usize); 8] = [
    (2.0, 0.9, 4.0, 49),
    (2.0, 0.9, 0.4, 32),
    (2.0, 0.54, 4.0, 6),
    (2.0, 0.54, 0.4, 12),
    (0.2, 0.9, 4.0, 557),
    (0.2, 0.9, 0.4, 262),
    (0.2, 0.54, 4.0, 142),
    (0.2, 0.54, 0.4, 31),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeCountRow {
    pub alpha: f64,
    pub eps: f64,
    pub delta: f64,
    pub protocol: String,
    pub ne_count: usize,
    pub target: usize,
}

/// Equilibrium count for one `(params, delta)` under `protocol`.
pub fn count_under_protocol(params: &MarketParams, delta: f64, protocol: &TableProtocol) -> Result<usize, ParamError> {
    let grid = PriceGrid::for_market(params, delta)?;
    let step = match protocol.q_step {
        TableQStep::Delta => delta,
        TableQStep::Fixed(s) => s,
    };
    let q_max = payoffs::q_bar_m(params);
    let n = if q_max < 0.0 { 0 } else { (q_max / step * (1.0 + 1e-12)).floor() as u64 + 1 };
    let counts = (0..n)
        .into_par_iter()
        .map(|k| {
            let set = enumerate_nash(params, k as f64 * step, &grid)?;
            Ok(match protocol.count {
                TableCount::Operating => set.operating_count(),
                TableCount::All => set.total_count(),
            })
        })
        .collect::<Result<Vec<_>, ParamError>>()?;
    Ok(counts.iter().sum())
}

pub fn ne_count_table(base: &MarketParams, protocol: &TableProtocol) -> Result<Vec<NeCountRow>, ParamError> {
    TABLE_ROWS
        .iter()
        .map(|&(alpha, eps, delta, target)| {
            let p = MarketParams { alpha, eps, ..*base }.validate()?;
            Ok(NeCountRow { alpha, eps, delta, protocol: protocol.describe(), ne_count: count_under_protocol(&p, delta, protocol)?, target })
        })
        .collect()
}

/// Qualitative ordering: each low-`alpha` row exceeds its high-`alpha`
/// partner and each high-`eps` row exceeds its low-`eps` partner.
/// Returns the violated `(larger, smaller)` row-index pairs.
pub fn table_ordering_violations(rows: &[NeCountRow]) -> Vec<(usize, usize)> {
    let find = |a: f64, e: f64, d: f64| rows.iter().position(|r| r.alpha == a && r.eps == e && r.delta == d);
    let mut bad = Vec::new();
    for &d in &[4.0, 0.4] {
        for &e in &[0.9, 0.54] {
            if let (Some(hi), Some(lo)) = (find(0.2, e, d), find(2.0, e, d)) {
                if rows[hi].ne_count <= rows[lo].ne_count {
                    bad.push((hi, lo));
                }
            }
        }
        for &a in &[2.0, 0.2] {
            if let (Some(hi), Some(lo)) = (find(a, 0.9, d), find(a, 0.54, d)) {
                if rows[hi].ne_count <= rows[lo].ne_count {
                    bad.push((hi, lo));
                }
            }
        }
    }
    bad
}

pub fn cmd_ne_count_table(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let rows = ne_count_table(&cfg.params, &cfg.protocol)?;
    let violations = table_ordering_violations(&rows);
    let mut summary = vec![format!("protocol: {}", cfg.protocol.describe())];
    summary.push(if violations.is_empty() {
        "ordering holds: low alpha above high alpha, high eps above low eps".to_string()
    } else {
        format!("ordering violated for row pairs {violations:?}")
    });
    Ok(Report {
        schema: "pricegame/ne-count-table/v1",
        header: vec!["alpha", "eps", "delta", "protocol", "ne_count", "target"],
        rows: rows
            .iter()
            .map(|r| {
                vec![fmt9(r.alpha), fmt9(r.eps), fmt9(r.delta), r.protocol.clone(), r.ne_count.to_string(), r.target.to_string()]
            })
            .collect(),
        summary,
        json: serde_json::json!({ "rows": rows, "ordering_violations": violations }),
        agree: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeVsQRow {
    pub q: f64,
    pub regime: Regime,
    /// Symmetric operating equilibrium prices, ascending.
    pub prices: Vec<f64>,
}

/// A rise in the symmetric count between consecutive quotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendException {
    pub q_prev: f64,
    pub q: f64,
    pub count_prev: usize,
    pub count: usize,
    /// Whether every price that entered sits within tolerance of an interval end.
    pub boundary_tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeVsQSeries {
    pub delta: f64,
    pub rows: Vec<NeVsQRow>,
    pub exceptions: Vec<TrendException>,
}

impl NeVsQSeries {
    /// Share of rows opening a count increase not explained by a boundary tie.
    pub fn exception_rate(&self) -> f64 {
        let n = self.exceptions.iter().filter(|e| !e.boundary_tie).count();
        if self.rows.is_empty() {
            0.0
        } else {
            n as f64 / self.rows.len() as f64
        }
    }
}

pub fn ne_vs_q(params: &MarketParams, grid: &PriceGrid, q_grid: &QGrid) -> Result<NeVsQSeries, ConfigError> {
    let qs = q_grid.points()?;
    let rows = qs
        .par_iter()
        .map(|&q| {
            let sym = symmetric_ne_exact(params, q, grid)?;
            let regime = crate::equilibria::classify_regime(params, q, grid);
            Ok(NeVsQRow { q, regime, prices: sym.iter().map(|&l| grid.price(l)).collect() })
        })
        .collect::<Result<Vec<_>, ParamError>>()?;
    let exceptions = rows
        .windows(2)
        .filter(|w| w[1].prices.len() > w[0].prices.len())
        .map(|w| {
            let entered: Vec<f64> = w[1].prices.iter().copied().filter(|x| !w[0].prices.contains(x)).collect();
            let boundary_tie = symmetric_ne_interval(params, w[1].q, grid)
                .map(|iv| entered.iter().all(|&x| approx_eq(x, iv.s) || approx_eq(x, iv.e)))
                .unwrap_or(false);
            TrendException { q_prev: w[0].q, q: w[1].q, count_prev: w[0].prices.len(), count: w[1].prices.len(), boundary_tie }
        })
        .collect();
    Ok(NeVsQSeries { delta: grid.delta(), rows, exceptions })
}

pub fn cmd_ne_vs_q(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let mut all = Vec::new();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for delta in cfg.delta_series() {
        let grid = PriceGrid::for_market(&cfg.params, delta)?;
        let series = ne_vs_q(&cfg.params, &grid, &cfg.q_grid(&grid))?;
        for r in &series.rows {
            let prices: Vec<String> = r.prices.iter().map(|&x| fmt9(x)).collect();
            rows.push(vec![fmt9(delta), fmt9(r.q), r.regime.as_str().to_string(), r.prices.len().to_string(), prices.join(" ")]);
        }
        let last = series.rows.iter().rposition(|r| !r.prices.is_empty());
        summary.push(format!(
            "delta {}: {} rows, last quote with an equilibrium {}, {} count increases (rate {})",
            fmt9(delta),
            series.rows.len(),
            last.map(|i| fmt9(series.rows[i].q)).unwrap_or_else(|| "none".into()),
            series.exceptions.len(),
            fmt9(series.exception_rate()),
        ));
        for e in &series.exceptions {
            summary.push(format!(
                "  increase q {} -> {}: {} -> {}{}",
                fmt9(e.q_prev),
                fmt9(e.q),
                e.count_prev,
                e.count,
                if e.boundary_tie { " (boundary tie)" } else { "" }
            ));
        }
        all.push(series);
    }
    Ok(Report {
        schema: "pricegame/ne-vs-q/v1",
        header: vec!["delta", "q", "regime", "count", "prices"],
        rows,
        summary,
        json: serde_json::to_value(&all).expect("serializable"),
        agree: true,
    })
}

pub fn cmd_supplier_sweep(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut all: Vec<(f64, SupplierSweep, Option<(f64, f64)>)> = Vec::new();
    for delta in cfg.delta_series() {
        let grid = PriceGrid::for_market(&cfg.params, delta)?;
        let sweep = supplier_sweep(&cfg.params, &grid, &cfg.q_grid(&grid))?;
        let threshold = sweep.partial_choking_threshold.map(fmt9).unwrap_or_default();
        for r in &sweep.rows {
            rows.push(vec![
                fmt9(delta),
                fmt9(r.q),
                r.regime.as_str().to_string(),
                r.ne_count.to_string(),
                if r.focal.exists { fmt9(r.focal.price) } else { String::new() },
                r.u_m.map(fmt9).unwrap_or_default(),
                r.u_s.map(fmt9).unwrap_or_default(),
                r.focal.exists.to_string(),
                threshold.clone(),
            ]);
        }
        let opt = optimal_supplier_price(&sweep.rows).ok();
        summary.push(match opt {
            Some((q, u)) => format!(
                "delta {}: best quote {} with supplier utility {}; partial choking from {}",
                fmt9(delta),
                fmt9(q),
                fmt9(u),
                if threshold.is_empty() { "never" } else { &threshold }
            ),
            None => format!("delta {}: no quote admits a symmetric equilibrium", fmt9(delta)),
        });
        all.push((delta, sweep, opt));
    }
    let json: Vec<_> = all
        .iter()
        .map(|(d, s, o)| serde_json::json!({ "delta": d, "sweep": s, "optimum": o }))
        .collect();
    Ok(Report {
        schema: "pricegame/supplier-sweep/v1",
        header: vec!["delta", "q", "regime", "ne_count", "focal_price", "u_m", "u_s", "feasible", "pc_threshold"],
        rows,
        summary,
        json: serde_json::Value::Array(json),
        agree: true,
    })
}

pub fn cmd_min_delta(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let qs = cfg.q.map(|q| vec![q]).unwrap_or_else(|| cfg.qs.clone());
    let reports: Vec<MinDeltaReport> =
        qs.iter().map(|&q| min_delta_no_ne(&cfg.params, q, cfg.delta, cfg.halvings)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for r in &reports {
        for t in &r.trace {
            rows.push(vec![
                fmt9(r.q),
                fmt9(t.delta),
                t.symmetric.to_string(),
                t.asymmetric.to_string(),
                t.operating().to_string(),
            ]);
        }
        summary.push(format!(
            "q {}: largest tested delta without an operating equilibrium {}",
            fmt9(r.q),
            r.largest_without_ne.map(fmt9).unwrap_or_else(|| "none".into())
        ));
    }
    Ok(Report {
        schema: "pricegame/min-delta/v1",
        header: vec!["q", "delta", "symmetric", "asymmetric", "operating"],
        rows,
        summary,
        json: serde_json::to_value(&reports).expect("serializable"),
        agree: true,
    })
}

/// Outcome of randomized oracle-versus-closed-form sampling.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleCheck {
    pub draws: usize,
    pub points: usize,
    pub largest_grid: u32,
    pub symmetric_disagreements: usize,
    pub boundary_ties: usize,
    pub asymmetric_disagreements: usize,
    /// Complete-choking points where the oracle found more than the shutdown profile.
    pub choking_disagreements: usize,
    pub asymmetric_found: usize,
    pub nonempty_symmetric: usize,
    pub choking_points: usize,
    /// First few disagreeing points, for diagnosis.
    pub examples: Vec<String>,
}

impl OracleCheck {
    pub fn clean(&self) -> bool {
        self.symmetric_disagreements == 0 && self.asymmetric_disagreements == 0 && self.choking_disagreements == 0
    }
}

/// One random parameter point satisfying every parameter invariant.
pub fn random_params(rng: &mut impl Rng) -> MarketParams {
    loop {
        let p = MarketParams {
            d_bar: rng.gen_range(2.0..20.0),
            alpha: rng.gen_range(0.1..3.0),
            eps: rng.gen_range(0.05..0.95),
            c_m: rng.gen_range(0.0..5.0),
            o_m: rng.gen_range(0.0..5.0),
            ..MarketParams::default()
        };
        if let Ok(p) = p.validate() {
            return p;
        }
    }
}

/// Samples `draws` parameter points and `points` `(q, delta)` pairs per draw,
/// with grids of at most about `max_grid` prices, and compares the closed
/// forms with the exhaustive enumeration.
pub fn oracle_check(seed: u64, draws: usize, points: usize, max_grid: u32) -> Result<OracleCheck, ParamError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(draws * points);
    for _ in 0..draws {
        let p = random_params(&mut rng);
        let q_hi = payoffs::q_bar_m(&p).max(0.1) * 1.1;
        for _ in 0..points {
            let target = rng.gen_range(20.0..(max_grid as f64 - 2.0).max(21.0));
            let delta = p.demand_ceiling() / target;
            jobs.push((p, rng.gen_range(0.0..q_hi), delta));
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(p, q, delta)| {
            let grid = PriceGrid::for_market(&p, delta)?;
            Ok((p, q, grid, compare_ne(&p, q, &grid)?))
        })
        .collect::<Result<Vec<_>, ParamError>>()?;
    let mut out = OracleCheck { draws, points: results.len(), ..OracleCheck::default() };
    for (p, q, grid, cmp) in results {
        out.largest_grid = out.largest_grid.max(grid.max_index());
        let sym_bad = cmp.only_oracle.iter().chain(&cmp.only_closed_form).filter(|(a, b)| a == b).count()
            - cmp.boundary_ties.len();
        out.boundary_ties += cmp.boundary_ties.len();
        out.symmetric_disagreements += sym_bad;
        out.asymmetric_disagreements += usize::from(cmp.oracle.asymmetric != cmp.closed_form.asymmetric);
        out.asymmetric_found += usize::from(!cmp.oracle.asymmetric.is_empty());
        out.nonempty_symmetric += usize::from(!cmp.oracle.symmetric.is_empty());
        if cmp.oracle.regime == Regime::CompleteChoking {
            out.choking_points += 1;
            let only_shutdown = cmp.oracle.shutdown_ne && cmp.oracle.total_count() == 1;
            out.choking_disagreements += usize::from(!only_shutdown);
        }
        if !cmp.agree && out.examples.len() < 5 {
            out.examples.push(format!("{p:?} q={q} delta={}", grid.delta()));
        }
    }
    Ok(out)
}

pub fn cmd_oracle_check(cfg: &ExperimentConfig) -> Result<Report, ConfigError> {
    let check = oracle_check(cfg.seed, cfg.draws, cfg.points, 500)?;
    let fields = [
        ("draws", check.draws),
        ("points", check.points),
        ("largest_grid", check.largest_grid as usize),
        ("symmetric_disagreements", check.symmetric_disagreements),
        ("boundary_ties", check.boundary_ties),
        ("asymmetric_disagreements", check.asymmetric_disagreements),
        ("choking_disagreements", check.choking_disagreements),
        ("asymmetric_found", check.asymmetric_found),
        ("nonempty_symmetric", check.nonempty_symmetric),
        ("choking_points", check.choking_points),
    ];
    let mut summary = vec![if check.clean() { "no disagreements".to_string() } else { "DISAGREEMENT".to_string() }];
    summary.extend(check.examples.iter().cloned());
    Ok(Report {
        schema: "pricegame/oracle-check/v1",
        header: vec!["metric", "value"],
        rows: fields.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]).collect(),
        summary,
        agree: check.clean(),
        json: serde_json::to_value(&check).expect("serializable"),
    })
}

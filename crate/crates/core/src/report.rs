//! Derived quantities and report output: functional de-rating, per
//! flip-flop vulnerability rankings, ranking overlap and FIT-weighted
//! failure rates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::campaign::{CampaignResult, Totals};
use crate::faults::FaultKind;
use crate::rng;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("FDR needs at least one injection")]
    NoInjections,
    #[error("{failures} failures exceed {injections} injections")]
    TooManyFailures { failures: u64, injections: u64 },
    #[error("cannot rank an empty flip-flop set")]
    EmptyFfSet,
    #[error("selection fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("FIT library line {line}: {message}")]
    BadFitLibrary { line: usize, message: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Functional de-rating: failures over injections, kept as the exact pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fdr {
    pub failures: u64,
    pub injections: u64,
}

impl Fdr {
    pub fn value(&self) -> f64 {
        self.failures as f64 / self.injections as f64
    }
}

impl fmt::Display for Fdr {
    /// At least four significant digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.value();
        if v == 0.0 {
            return f.write_str("0.0000");
        }
        let decimals = (3 - v.log10().floor() as i32).max(4) as usize;
        write!(f, "{v:.decimals$}")
    }
}

pub fn fdr(failures: u64, injections: u64) -> Result<Fdr, ReportError> {
    if injections == 0 {
        return Err(ReportError::NoInjections);
    }
    if failures > injections {
        return Err(ReportError::TooManyFailures {
            failures,
            injections,
        });
    }
    Ok(Fdr {
        failures,
        injections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    /// Failures among the injections that changed the flip-flop through a
    /// clock-tree transient.
    SetChanged,
    /// Failures among the upsets of the flip-flop.
    SeuUpset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    pub name: String,
    pub rate: f64,
    pub numerator: u64,
    pub denominator: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VulnerabilityRanking {
    pub mode: RankMode,
    pub fraction: f64,
    pub entries: Vec<RankEntry>,
}

impl VulnerabilityRanking {
    pub fn names(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }
}

/// Number of entries kept for a top-`fraction` selection: floor, at least 1.
pub fn top_count(fraction: f64, total: usize) -> usize {
    // The epsilon keeps e.g. 0.29 * 100 from flooring to 28.
    (((fraction * total as f64) + 1e-9).floor() as usize).clamp(1, total.max(1))
}

/// Ranks flip-flops by individual functional failure rate, descending, ties
/// by name, and keeps the top `fraction`.
pub fn rank_ffs(
    result: &CampaignResult,
    mode: RankMode,
    fraction: f64,
) -> Result<VulnerabilityRanking, ReportError> {
    if result.per_ff.is_empty() {
        return Err(ReportError::EmptyFfSet);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(ReportError::BadFraction(fraction));
    }
    let mut entries: Vec<RankEntry> = result
        .per_ff
        .iter()
        .map(|t| {
            let (numerator, denominator) = match mode {
                RankMode::SetChanged => (t.times_changed_and_failed, t.times_changed),
                RankMode::SeuUpset => (t.times_upset_and_failed, t.times_upset),
            };
            let rate = if denominator == 0 {
                0.0
            } else {
                numerator as f64 / denominator as f64
            };
            RankEntry {
                name: t.name.clone(),
                rate,
                numerator,
                denominator,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.rate.total_cmp(&a.rate).then_with(|| a.name.cmp(&b.name)));
    entries.truncate(top_count(fraction, result.per_ff.len()));
    Ok(VulnerabilityRanking {
        mode,
        fraction,
        entries,
    })
}

/// Shared names over the longer list's length.
pub fn overlap(a: &VulnerabilityRanking, b: &VulnerabilityRanking) -> f64 {
    let denom = a.entries.len().max(b.entries.len());
    if denom == 0 {
        return 0.0;
    }
    a.names().intersection(&b.names()).count() as f64 / denom as f64
}

/// FIT per cell class, failures per 10^9 device-hours.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitLibrary {
    pub fits: BTreeMap<String, f64>,
}

impl FitLibrary {
    pub const FLIPFLOP: &'static str = "flipflop";
    pub const CLOCK_BUFFER: &'static str = "clock_buffer";

    /// Parses `cell_class,fit` lines. A non-numeric first row is a header.
    pub fn parse_csv(text: &str) -> Result<Self, ReportError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut fits = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let bad = |message: String| ReportError::BadFitLibrary {
                line: i + 1,
                message,
            };
            let record = record.map_err(|e| bad(e.to_string()))?;
            if record.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", record.len())));
            }
            let value: f64 = match record[1].parse() {
                Ok(v) => v,
                Err(_) if i == 0 => continue,
                Err(_) => return Err(bad(format!("\"{}\" is not a number", &record[1]))),
            };
            if !(value >= 0.0 && value.is_finite()) {
                return Err(bad(format!("FIT {value} must be non-negative")));
            }
            fits.insert(record[0].to_string(), value);
        }
        Ok(FitLibrary { fits })
    }

    pub fn get(&self, class: &str) -> Option<f64> {
        self.fits.get(class).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    pub element_type: String,
    pub element_count: u64,
    pub avg_fdr: f64,
    pub fit: f64,
    /// `element_count * avg_fdr * fit` before flooring.
    pub exact_rate: f64,
    pub failure_rate: u64,
}

/// Functional failure rate = floor(element_count * avg_fdr * fit).
pub fn combine_fit(element_type: &str, element_count: u64, avg_fdr: f64, fit: f64) -> RateSummary {
    let exact = element_count as f64 * avg_fdr * fit;
    // Relative slack so an exact integer product is not floored below itself.
    let failure_rate = (exact * (1.0 + 1e-12)).floor().max(0.0) as u64;
    RateSummary {
        element_type: element_type.to_string(),
        element_count,
        avg_fdr,
        fit,
        exact_rate: exact,
        failure_rate,
    }
}

/// Round to two decimals, the precision of a printed average FDR.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Mean, range and sample standard deviation over several campaigns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spread {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev_sample: f64,
}

pub fn spread(values: &[f64]) -> Option<Spread> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Some(Spread {
        n,
        mean,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        stddev_sample: var.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Text,
}

/// One named campaign in a report.
#[derive(Debug, Clone)]
pub struct LabeledCampaign {
    pub label: String,
    pub result: CampaignResult,
}

impl LabeledCampaign {
    pub fn is_set(&self) -> bool {
        self.result
            .outcomes
            .iter()
            .any(|o| matches!(o.spec.kind, FaultKind::SetOnBuffer(_)))
    }

    pub fn rank_mode(&self) -> RankMode {
        if self.is_set() {
            RankMode::SetChanged
        } else {
            RankMode::SeuUpset
        }
    }
}

/// Everything one report is made from.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    /// Arbitrary configuration echo, copied into the summary.
    pub config: Value,
    pub campaigns: Vec<LabeledCampaign>,
    pub top_fraction: f64,
    pub fit: Option<FitLibrary>,
}

/// A named output document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub name: String,
    pub contents: String,
}

struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn render(&self, format: Format) -> Document {
        match format {
            Format::Csv => {
                let mut out = self.header.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|v| match v {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                Document {
                    name: format!("{}.csv", self.name),
                    contents: out,
                }
            }
            Format::Text => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        Value::Object(
                            self.header
                                .iter()
                                .zip(row)
                                .map(|(h, v)| (h.to_string(), v.clone()))
                                .collect(),
                        )
                    })
                    .collect();
                Document {
                    name: format!("{}.json", self.name),
                    contents: serde_json::to_string_pretty(&rows).expect("table serializes") + "\n",
                }
            }
        }
    }
}

/// Fixed six-decimal rounding so float cells render identically everywhere.
fn num(x: f64) -> Value {
    let r = (x * 1e6).round() / 1e6;
    json!(r)
}

fn per_injection(total: u64, t: &Totals) -> Value {
    if t.injected == 0 {
        Value::Null
    } else {
        num(total as f64 / t.injected as f64)
    }
}

fn fdr_value(failures: u64, injected: u64) -> Value {
    fdr(failures, injected)
        .map(|f| num(f.value()))
        .unwrap_or(Value::Null)
}

/// Renders the report documents. Output depends only on the bundle.
pub fn emit(bundle: &ReportBundle, format: Format) -> Result<Vec<Document>, ReportError> {
    let mut totals = Table::new(
        "totals",
        &[
            "campaign",
            "kind",
            "targets",
            "injected",
            "reached",
            "changed",
            "unchanged",
            "failures",
            "reached_per_injection",
            "changed_per_injection",
            "unchanged_per_injection",
            "fdr",
        ],
    );
    let mut per_target = Table::new(
        "per_target",
        &[
            "campaign", "target", "injected", "reached", "changed", "failures", "fdr",
        ],
    );
    let mut ranking = Table::new(
        "ranking",
        &[
            "campaign",
            "mode",
            "rank",
            "ff",
            "rate",
            "numerator",
            "denominator",
        ],
    );
    let mut per_ff = Table::new(
        "per_ff",
        &[
            "campaign",
            "ff",
            "times_reached",
            "times_changed",
            "times_changed_and_failed",
            "times_upset",
            "times_upset_and_failed",
        ],
    );
    let mut aggregate = Table::new(
        "aggregate",
        &["kind", "metric", "n", "mean", "min", "max", "stddev_sample"],
    );
    let mut overlap_table = Table::new("overlap", &["campaign_a", "campaign_b", "overlap"]);
    let mut rates = Table::new(
        "rates",
        &[
            "element_type",
            "element_count",
            "avg_fdr",
            "fit",
            "functional_failure_rate",
            "avg_fdr_full",
            "failure_rate_full",
        ],
    );

    let mut rankings = Vec::new();
    for c in &bundle.campaigns {
        let r = &c.result;
        let t = &r.totals;
        let kind = if c.is_set() { "set" } else { "seu" };
        totals.rows.push(vec![
            json!(c.label),
            json!(kind),
            json!(r.per_target.len()),
            json!(t.injected),
            json!(t.reached),
            json!(t.changed),
            json!(t.unchanged),
            json!(t.failures),
            per_injection(t.reached, t),
            per_injection(t.changed, t),
            per_injection(t.unchanged, t),
            fdr_value(t.failures, t.injected),
        ]);
        for tt in &r.per_target {
            per_target.rows.push(vec![
                json!(c.label),
                json!(tt.target),
                json!(tt.injected),
                json!(tt.reached),
                json!(tt.changed),
                json!(tt.failures),
                fdr_value(tt.failures, tt.injected),
            ]);
        }
        for f in &r.per_ff {
            per_ff.rows.push(vec![
                json!(c.label),
                json!(f.name),
                json!(f.times_reached),
                json!(f.times_changed),
                json!(f.times_changed_and_failed),
                json!(f.times_upset),
                json!(f.times_upset_and_failed),
            ]);
        }
        if !r.per_ff.is_empty() {
            let rk = rank_ffs(r, c.rank_mode(), bundle.top_fraction)?;
            for (i, e) in rk.entries.iter().enumerate() {
                ranking.rows.push(vec![
                    json!(c.label),
                    json!(rk.mode),
                    json!(i + 1),
                    json!(e.name),
                    num(e.rate),
                    json!(e.numerator),
                    json!(e.denominator),
                ]);
            }
            rankings.push((c.label.as_str(), rk));
        }
    }

    for (i, (la, ra)) in rankings.iter().enumerate() {
        for (lb, rb) in &rankings[i + 1..] {
            overlap_table
                .rows
                .push(vec![json!(la), json!(lb), num(overlap(ra, rb))]);
        }
    }

    let set_fdrs = campaign_fdrs(bundle, true);
    let seu_fdrs = campaign_fdrs(bundle, false);
    for (kind, values) in [("set", &set_fdrs), ("seu", &seu_fdrs)] {
        let failures: Vec<f64> = bundle
            .campaigns
            .iter()
            .filter(|c| c.is_set() == (kind == "set") && c.result.totals.injected > 0)
            .map(|c| c.result.totals.failures as f64)
            .collect();
        for (metric, vals) in [("failures", &failures), ("fdr", values)] {
            if let Some(s) = spread(vals) {
                aggregate.rows.push(vec![
                    json!(kind),
                    json!(metric),
                    json!(s.n),
                    num(s.mean),
                    num(s.min),
                    num(s.max),
                    num(s.stddev_sample),
                ]);
            }
        }
    }

    if let Some(lib) = &bundle.fit {
        let mut push = |element_type: &str, count: u64, avg: f64, fit: f64| {
            let table = combine_fit(element_type, count, round2(avg), fit);
            let full = combine_fit(element_type, count, avg, fit);
            rates.rows.push(vec![
                json!(element_type),
                json!(count),
                num(table.avg_fdr),
                num(fit),
                json!(table.failure_rate),
                num(avg),
                num(full.exact_rate),
            ]);
        };
        if let (Some(fit), Some(first)) = (
            lib.get(FitLibrary::FLIPFLOP),
            bundle.campaigns.iter().find(|c| !c.is_set()),
        ) {
            if let Some(s) = spread(&seu_fdrs) {
                push("flipflops", first.result.per_ff.len() as u64, s.mean, fit);
            }
        }
        if let (Some(fit), Some(first)) = (
            lib.get(FitLibrary::CLOCK_BUFFER),
            bundle.campaigns.iter().find(|c| c.is_set()),
        ) {
            if let Some(s) = spread(&set_fdrs) {
                push(
                    "clock_network",
                    first.result.per_target.len() as u64,
                    s.mean,
                    fit,
                );
            }
        }
    }

    let summary = json!({
        "config": bundle.config,
        "prng": rng::PRNG_NAME,
        "top_fraction": bundle.top_fraction,
        "fit_library": bundle.fit.as_ref().map(|f| &f.fits),
        "campaigns": bundle.campaigns.iter().map(|c| json!({
            "label": c.label,
            "kind": if c.is_set() { "set" } else { "seu" },
            "config": c.result.config,
            "totals": c.result.totals,
            "fdr": fdr(c.result.totals.failures, c.result.totals.injected)
                .map(|f| f.to_string())
                .ok(),
        })).collect::<Vec<_>>(),
    });

    let mut docs: Vec<Document> = [
        totals,
        per_target,
        per_ff,
        ranking,
        overlap_table,
        aggregate,
        rates,
    ]
    .iter()
    .map(|t| t.render(format))
    .collect();
    docs.push(Document {
        name: "summary.json".into(),
        contents: serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    });
    Ok(docs)
}

fn campaign_fdrs(bundle: &ReportBundle, set: bool) -> Vec<f64> {
    bundle
        .campaigns
        .iter()
        .filter(|c| c.is_set() == set)
        .filter_map(|c| fdr(c.result.totals.failures, c.result.totals.injected).ok())
        .map(|f| f.value())
        .collect()
}

/// Writes documents into `dir`, creating it if needed.
pub fn write_documents(dir: &Path, docs: &[Document]) -> Result<(), ReportError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for d in docs {
        let path = dir.join(&d.name);
        fs::write(&path, &d.contents).map_err(io(&path))?;
    }
    Ok(())
}

//! JSON and CSV file formats.

use std::fmt::Write as _;

use fairslot::audit::{AuditRecord, FairnessReport, Witness};
use fairslot::feasibility::MatchingDistribution;
use fairslot::payments::Payment;
use fairslot::welfare::WelfareResult;
use fairslot::{AllocationMatrix, AuctionInstance, Error, Family, MechanismConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub values: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub k: usize,
}

impl InstanceFile {
    pub fn validate(self) -> Result<AuctionInstance, Error> {
        AuctionInstance::new(self.values, self.alpha, self.beta, self.k)
    }
}

impl From<&AuctionInstance> for InstanceFile {
    fn from(inst: &AuctionInstance) -> Self {
        Self { values: inst.values().to_vec(), alpha: inst.alpha().to_vec(), beta: inst.beta().to_vec(), k: inst.k() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: String,
    pub ell: f64,
}

impl ConfigFile {
    pub fn validate(&self) -> Result<MechanismConfig, String> {
        let family: Family = self.family.parse().map_err(|e| format!("{e}"))?;
        MechanismConfig::new(family, self.ell).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    /// Advertisers by slots.
    pub matrix: Vec<Vec<f64>>,
    /// `a^{(0)}, …, a^{(k)}`, each of length `n`.
    pub cumulative: Vec<Vec<f64>>,
}

impl From<&AllocationMatrix> for MatrixFile {
    fn from(m: &AllocationMatrix) -> Self {
        Self { matrix: m.rows(), cumulative: m.cumulative().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingFile {
    pub weights: Vec<f64>,
    /// Slot per advertiser, `-1` when not shown.
    pub assignments: Vec<Vec<i64>>,
}

fn slot_or_unshown(dist: &MatchingDistribution, perm: &[usize]) -> Vec<i64> {
    perm.iter().map(|&c| if c < dist.shown { c as i64 } else { -1 }).collect()
}

impl From<&MatchingDistribution> for MatchingFile {
    fn from(d: &MatchingDistribution) -> Self {
        Self { weights: d.weights.clone(), assignments: d.assignments.iter().map(|p| slot_or_unshown(d, p)).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFile {
    pub seed: u64,
    pub assignment: Vec<i64>,
}

impl SampleFile {
    pub fn new(seed: u64, dist: &MatchingDistribution, perm: &[usize]) -> Self {
        Self { seed, assignment: slot_or_unshown(dist, perm) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentReport {
    pub advertiser: usize,
    pub allocation: f64,
    pub payment: f64,
    pub pieces: usize,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_click_price: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_payment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_delta: Option<f64>,
}

impl PaymentReport {
    pub fn new(advertiser: usize, p: &Payment) -> Self {
        Self {
            advertiser,
            allocation: p.allocation,
            payment: p.payment,
            pieces: p.pieces,
            method: p.method.as_str().to_string(),
            per_click_price: p.per_click_price(),
            oracle_payment: None,
            oracle_delta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditJson {
    pub lambda_effective: Option<f64>,
    pub lambda_values: Option<f64>,
    pub records: Vec<AuditRecordJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRecordJson {
    pub definition: String,
    pub measured: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub witness: serde_json::Value,
}

/// `λ = ∞` has no JSON number; it is written as `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn witness_json(w: &Witness) -> serde_json::Value {
    use serde_json::json;
    match w {
        Witness::None => serde_json::Value::Null,
        Witness::Entry { advertiser, slot } => json!({"advertiser": advertiser, "slot": slot}),
        Witness::Prefix { advertiser, slots } => json!({"advertiser": advertiser, "prefix_slots": slots}),
        Witness::Weighted { advertiser, h } => json!({"advertiser": advertiser, "h": h}),
        Witness::Subset { column, members, positive } => {
            json!({"column": column, "subset": members, "sign": if *positive { "+" } else { "-" }})
        }
        Witness::HeteroPrefix { prefix, slots, order } => {
            json!({"prefix": prefix, "prefix_slots": slots, "order": order})
        }
    }
}

/// Compact single-field rendering for CSV.
pub fn witness_text(w: &Witness) -> String {
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    match w {
        Witness::None => String::new(),
        Witness::Entry { advertiser, slot } => format!("i={advertiser};j={slot}"),
        Witness::Prefix { advertiser, slots } => format!("i={advertiser};p={slots}"),
        Witness::Weighted { advertiser, .. } => format!("i={advertiser};h=given"),
        Witness::Subset { column, members, positive } => {
            let col = column.map_or(String::new(), |j| format!("j={j};"));
            format!("{col}S={};sign={}", list(members), if *positive { "+" } else { "-" })
        }
        Witness::HeteroPrefix { prefix, slots, order } => {
            format!("i={prefix};j={slots};order={}", list(order))
        }
    }
}

pub fn audit_json(report: &FairnessReport) -> AuditJson {
    AuditJson {
        lambda_effective: finite(report.lambda_effective),
        lambda_values: finite(report.lambda_values),
        records: report.records.iter().map(record_json).collect(),
    }
}

fn record_json(r: &AuditRecord) -> AuditRecordJson {
    AuditRecordJson {
        definition: r.metric.as_str().to_string(),
        measured: r.measured,
        bound: r.bound,
        satisfied: r.satisfied,
        witness: witness_json(&r.witness),
    }
}

/// Full-precision float for CSV: 17 significant digits, `.` decimal point.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub const AUDIT_HEADER: &str = "definition,witness,measured,bound,satisfied";

pub fn audit_csv(report: &FairnessReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# lambda_effective={} lambda_values={}", fmt_f64(report.lambda_effective), fmt_f64(report.lambda_values));
    let _ = writeln!(out, "{AUDIT_HEADER}");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.metric.as_str(),
            witness_text(&r.witness),
            fmt_f64(r.measured),
            fmt_f64(r.bound),
            r.satisfied
        );
    }
    out
}

pub const WELFARE_HEADER: &str = "n,k,ell,family,trial,alg,opt,ratio,bound,applicable";

pub fn welfare_row(n: usize, k: usize, ell: f64, family: Family, trial: usize, w: &WelfareResult) -> String {
    format!(
        "{n},{k},{},{},{trial},{},{},{},{},{}",
        fmt_f64(ell),
        family.as_str(),
        fmt_f64(w.alg),
        fmt_f64(w.opt),
        fmt_f64(w.ratio),
        fmt_f64(w.bound),
        w.applicable
    )
}

pub const STABILITY_HEADER: &str = "n,k,ell,family,trial,lambda,metric,measured,bound,satisfied";

/// What `--validate-output` recognised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Instance,
    Config,
    Matrix,
    Matching,
    Sample,
    Payments,
    AuditJson,
    AuditCsv,
    WelfareCsv,
    StabilityCsv,
}

impl OutputKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputKind::Instance => "instance",
            OutputKind::Config => "config",
            OutputKind::Matrix => "matrix",
            OutputKind::Matching => "matching",
            OutputKind::Sample => "sample",
            OutputKind::Payments => "payments",
            OutputKind::AuditJson => "audit_json",
            OutputKind::AuditCsv => "audit_csv",
            OutputKind::WelfareCsv => "welfare_csv",
            OutputKind::StabilityCsv => "stability_csv",
        }
    }
}

/// Recognises and checks any file this crate writes.
pub fn validate_output(text: &str) -> Result<OutputKind, String> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        validate_json(trimmed)
    } else {
        validate_csv(text)
    }
}

fn validate_json(text: &str) -> Result<OutputKind, String> {
    if let Ok(f) = serde_json::from_str::<InstanceFile>(text) {
        f.validate().map_err(|e| e.to_string())?;
        return Ok(OutputKind::Instance);
    }
    if let Ok(c) = serde_json::from_str::<ConfigFile>(text) {
        c.validate()?;
        return Ok(OutputKind::Config);
    }
    if let Ok(m) = serde_json::from_str::<MatrixFile>(text) {
        let k = m.cumulative.len().checked_sub(1).ok_or("empty cumulative list")?;
        AllocationMatrix::from_rows(&m.matrix, k, 1e-9).map_err(|e| e.to_string())?;
        return Ok(OutputKind::Matrix);
    }
    if let Ok(m) = serde_json::from_str::<MatchingFile>(text) {
        if m.weights.len() != m.assignments.len() {
            return Err("weights and assignments differ in length".into());
        }
        if (m.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err("weights do not sum to 1".into());
        }
        return Ok(OutputKind::Matching);
    }
    if serde_json::from_str::<SampleFile>(text).is_ok() {
        return Ok(OutputKind::Sample);
    }
    if let Ok(p) = serde_json::from_str::<Vec<PaymentReport>>(text) {
        if p.iter().any(|r| !(r.payment >= 0.0) || !r.allocation.is_finite()) {
            return Err("payment must be finite and non-negative".into());
        }
        return Ok(OutputKind::Payments);
    }
    if serde_json::from_str::<AuditJson>(text).is_ok() {
        return Ok(OutputKind::AuditJson);
    }
    Err("JSON does not match any known output schema".into())
}

fn validate_csv(text: &str) -> Result<OutputKind, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header = lines.next().ok_or("empty CSV")?;
    let (kind, numeric): (OutputKind, &[usize]) = match header {
        AUDIT_HEADER => (OutputKind::AuditCsv, &[2, 3]),
        WELFARE_HEADER => (OutputKind::WelfareCsv, &[0, 1, 2, 4, 5, 6, 7, 8]),
        STABILITY_HEADER => (OutputKind::StabilityCsv, &[0, 1, 2, 4, 5, 7, 8]),
        _ => return Err(format!("unknown CSV header {header:?}")),
    };
    let width = header.split(',').count();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(format!("row {row} has {} fields, expected {width}", fields.len()));
        }
        for &c in numeric {
            fields[c].parse::<f64>().map_err(|_| format!("row {row} column {c} is not a number"))?;
        }
        fields[width - 1].parse::<bool>().map_err(|_| format!("row {row} last column is not a boolean"))?;
    }
    Ok(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 181.0 / 42.0, 1e-300, 0.0, 123456789.125] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY).parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn recognises_instances() {
        let t = r#"{"values": [1, 2], "alpha": [1, 1], "beta": [1.0, 0.5], "k": 2}"#;
        assert_eq!(validate_output(t), Ok(OutputKind::Instance));
        let bad = r#"{"values": [1, 2], "alpha": [1, 1], "beta": [0.5, 1.0], "k": 2}"#;
        assert!(validate_output(bad).is_err());
        assert_eq!(validate_output(r#"{"family": "pa", "ell": 2}"#), Ok(OutputKind::Config));
    }

    #[test]
    fn rejects_ragged_csv() {
        let t = format!("{WELFARE_HEADER}\n1,1,1,ipa,0,1,1,1,1,true\n1,2\n");
        assert!(validate_output(&t).is_err());
        let t = format!("# sweep: {{}}\n{WELFARE_HEADER}\n");
        assert_eq!(validate_output(&t), Ok(OutputKind::WelfareCsv));
    }
}

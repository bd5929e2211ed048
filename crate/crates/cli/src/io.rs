use std::collections::HashMap;
use std::path::Path;

use pdx_itr_core::math::Matrix;
use pdx_itr_core::model::{FeatureMatrix, PdxDataset, ResponseRecord, TreatmentId};
use pdx_itr_core::outcomes::{compute_bar, compute_ttd, VolumeTrajectory};
use pdx_itr_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which outcome drives the analysis; the other one rides along as the
/// companion used by bivariate screening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    NegBar,
    LogTtd,
}

impl ResponseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseKind::NegBar => "neg_bar",
            ResponseKind::LogTtd => "log_ttd",
        }
    }
}

impl std::str::FromStr for ResponseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neg_bar" => Ok(ResponseKind::NegBar),
            "log_ttd" => Ok(ResponseKind::LogTtd),
            _ => Err(format!("unknown response kind `{s}` (expected neg_bar or log_ttd)")),
        }
    }
}

fn tsv_reader(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().delimiter(b'\t').from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    CliError::input(path, line, e.to_string())
}

fn parse_number(path: &Path, line: u64, column: &str, raw: &str) -> CliResult<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::input(path, line, format!("column `{column}`: `{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::input(
            path,
            line,
            format!("column `{column}`: non-finite value"),
        ));
    }
    Ok(v)
}

fn parse_optional(path: &Path, line: u64, column: &str, raw: &str) -> CliResult<Option<f64>> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") {
        Ok(None)
    } else {
        parse_number(path, line, column, t).map(Some)
    }
}

/// Reads a features TSV: header `line_id` then feature names, one line per row.
pub fn read_features(path: &Path) -> CliResult<FeatureMatrix> {
    let mut rdr = tsv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(CliError::input(
            path,
            1,
            "expected `line_id` followed by at least one feature column",
        ));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        ids.push(row[0].to_string());
        for (name, raw) in names.iter().zip(row.iter().skip(1)) {
            values.push(parse_number(path, line, name, raw)?);
        }
    }
    if ids.is_empty() {
        return Err(CliError::input(path, 1, "no data rows"));
    }
    let m = Matrix::from_vec(ids.len(), names.len(), values)?;
    Ok(FeatureMatrix::new(ids, names, m)?)
}

pub fn write_features(features: &FeatureMatrix) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    let mut header = vec!["line_id".to_string()];
    header.extend(features.feature_names().iter().cloned());
    w.write_record(&header).map_err(to_runtime)?;
    for (i, id) in features.line_ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(features.values().row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(to_runtime)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

fn to_runtime(e: csv::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Responses loaded from either file layout, with treatments in order of
/// first appearance.
#[derive(Debug, Clone)]
pub struct Responses {
    pub treatments: Vec<String>,
    /// (line_id, treatment, neg_bar, log_ttd) per mouse.
    pub mice: Vec<(String, String, Option<f64>, Option<f64>)>,
}

impl Responses {
    /// Records for `kind`; mice without that outcome are skipped.
    pub fn records(&self, kind: ResponseKind) -> Vec<ResponseRecord> {
        self.mice
            .iter()
            .filter_map(|(line, t, bar, ttd)| {
                let (primary, companion) = match kind {
                    ResponseKind::NegBar => (*bar, *ttd),
                    ResponseKind::LogTtd => (*ttd, *bar),
                };
                let rec = ResponseRecord::new(line.clone(), t.clone(), primary?);
                Some(match companion {
                    Some(c) => rec.with_companion(c),
                    None => rec,
                })
            })
            .collect()
    }

    pub fn dataset(&self, features: FeatureMatrix, kind: ResponseKind, untreated: &str) -> CliResult<PdxDataset> {
        if !self.treatments.iter().any(|t| t == untreated) {
            return Err(CliError::Config(format!(
                "untreated arm `{untreated}` does not appear in the responses"
            )));
        }
        let treatments = self
            .treatments
            .iter()
            .map(|t| {
                if t == untreated {
                    TreatmentId::untreated(t.clone())
                } else {
                    TreatmentId::new(t.clone())
                }
            })
            .collect();
        Ok(PdxDataset::new(features, treatments, self.records(kind))?)
    }
}

/// Reads a responses TSV, either raw caliper measurements
/// (`line_id, treatment, day, major_mm, minor_mm`) or precomputed outcomes
/// (`line_id, treatment, neg_bar, log_ttd`).
pub fn read_responses(path: &Path) -> CliResult<Responses> {
    let mut rdr = tsv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(li), Some(ti)) = (col("line_id"), col("treatment")) else {
        return Err(CliError::input(
            path,
            1,
            "header must contain `line_id` and `treatment`",
        ));
    };
    let mut treatments: Vec<String> = Vec::new();
    let mut note = |t: &str| {
        if !treatments.iter().any(|x| x == t) {
            treatments.push(t.to_string());
        }
    };
    if let (Some(di), Some(ai), Some(bi)) = (col("day"), col("major_mm"), col("minor_mm")) {
        // group measurements per mouse, keeping first-appearance order
        let mut order: Vec<(String, String, u64)> = Vec::new();
        let mut series: HashMap<(String, String), Vec<[f64; 3]>> = HashMap::new();
        for row in rdr.records() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let key = (row[li].to_string(), row[ti].to_string());
            let point = [
                parse_number(path, line, "day", &row[di])?,
                parse_number(path, line, "major_mm", &row[ai])?,
                parse_number(path, line, "minor_mm", &row[bi])?,
            ];
            if !series.contains_key(&key) {
                note(&key.1);
                order.push((key.0.clone(), key.1.clone(), line));
            }
            series.entry(key).or_default().push(point);
        }
        let mut mice = Vec::new();
        for (l, t, line) in order {
            let pts = &series[&(l.clone(), t.clone())];
            let days = pts.iter().map(|p| p[0]).collect();
            let axes: Vec<(f64, f64)> = pts.iter().map(|p| (p[1], p[2])).collect();
            let traj = VolumeTrajectory::from_axes(days, &axes)
                .map_err(|e| CliError::input(path, line, format!("line `{l}`, treatment `{t}`: {e}")))?;
            let bar = match compute_bar(&traj) {
                Ok(b) => Some(-b),
                Err(CoreError::InsufficientFollowUp { .. }) => {
                    log::warn!(
                        "{}:{line}: line `{l}`, treatment `{t}` lacks follow-up for BAR",
                        path.display()
                    );
                    None
                }
                Err(e) => return Err(CliError::input(path, line, e.to_string())),
            };
            let ttd = compute_ttd(&traj)
                .map_err(|e| CliError::input(path, line, e.to_string()))?
                .log_days;
            mice.push((l, t, bar, Some(ttd)));
        }
        Ok(Responses { treatments, mice })
    } else if let (Some(bi), Some(di)) = (col("neg_bar"), col("log_ttd")) {
        let mut mice = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            note(&row[ti]);
            mice.push((
                row[li].to_string(),
                row[ti].to_string(),
                parse_optional(path, line, "neg_bar", &row[bi])?,
                parse_optional(path, line, "log_ttd", &row[di])?,
            ));
        }
        Ok(Responses { treatments, mice })
    } else {
        Err(CliError::input(
            path,
            1,
            "expected columns `day, major_mm, minor_mm` or `neg_bar, log_ttd`",
        ))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into())
}

/// Precomputed-outcome TSV for `records` whose primary response is `kind`.
pub fn write_responses(records: &[ResponseRecord], kind: ResponseKind) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(["line_id", "treatment", "neg_bar", "log_ttd"])
        .map_err(to_runtime)?;
    for r in records {
        let (bar, ttd) = match kind {
            ResponseKind::NegBar => (Some(r.response), r.companion),
            ResponseKind::LogTtd => (r.companion, Some(r.response)),
        };
        w.write_record([r.line_id.as_str(), r.treatment.as_str(), &fmt_opt(bar), &fmt_opt(ttd)])
            .map_err(to_runtime)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

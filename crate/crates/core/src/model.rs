//! Multi-treatment study data: genomic features per line and one response
//! per (line, treatment) mouse.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreatmentId {
    pub id: String,
    pub is_untreated: bool,
}

impl TreatmentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            is_untreated: false,
        }
    }

    pub fn untreated(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            is_untreated: true,
        }
    }
}

/// One mouse: the summarized response of `line_id` to `treatment`.
///
/// `response` is the analysis outcome (-BAR or log TTD). `companion` holds
/// the other outcome kind when available; supervised screening uses the
/// pair as a bivariate response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub line_id: String,
    pub treatment: String,
    pub response: f64,
    #[serde(default)]
    pub companion: Option<f64>,
}

impl ResponseRecord {
    pub fn new(line_id: impl Into<String>, treatment: impl Into<String>, response: f64) -> Self {
        Self {
            line_id: line_id.into(),
            treatment: treatment.into(),
            response,
            companion: None,
        }
    }

    pub fn with_companion(mut self, companion: f64) -> Self {
        self.companion = Some(companion);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Platform {
    Rna,
    Cn,
    Mut,
}

impl Platform {
    pub fn suffix(self) -> &'static str {
        match self {
            Platform::Rna => "rna",
            Platform::Cn => "cn",
            Platform::Mut => "mut",
        }
    }
}

/// Splits `GENE.platform` into its gene and platform parts.
pub fn parse_feature_name(name: &str) -> Option<(&str, Platform)> {
    let (gene, suffix) = name.rsplit_once('.')?;
    if gene.is_empty() {
        return None;
    }
    let platform = match suffix {
        "rna" => Platform::Rna,
        "cn" => Platform::Cn,
        "mut" => Platform::Mut,
        _ => return None,
    };
    Some((gene, platform))
}

/// Lines × features numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    line_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Matrix,
}

impl FeatureMatrix {
    pub fn new(line_ids: Vec<String>, feature_names: Vec<String>, values: Matrix) -> Result<Self> {
        if values.rows() != line_ids.len() {
            return Err(Error::WidthMismatch {
                expected: line_ids.len(),
                got: values.rows(),
            });
        }
        if values.cols() != feature_names.len() {
            return Err(Error::WidthMismatch {
                expected: feature_names.len(),
                got: values.cols(),
            });
        }
        Ok(Self {
            line_ids,
            feature_names,
            values,
        })
    }

    pub fn line_ids(&self) -> &[String] {
        &self.line_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_lines(&self) -> usize {
        self.line_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn select_features(&self, idx: &[usize]) -> Self {
        Self {
            line_ids: self.line_ids.clone(),
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            values: self.values.select_cols(idx),
        }
    }

    pub fn select_lines(&self, idx: &[usize]) -> Self {
        Self {
            line_ids: idx.iter().map(|&i| self.line_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values: self.values.select_rows(idx),
        }
    }

    /// Keeps the named features, in the given order.
    pub fn select_named(&self, names: &[String]) -> Result<Self> {
        let index: BTreeMap<&str, usize> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.as_str(), j))
            .collect();
        let idx = names
            .iter()
            .map(|n| {
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::InvalidInput(format!("unknown feature `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_features(&idx))
    }

    pub fn line_index(&self, line_id: &str) -> Option<usize> {
        self.line_ids.iter().position(|l| l == line_id)
    }
}

/// Treatment-major response table: entry `[i][j]` is line `j` under
/// treatment `i`, `None` where that mouse does not exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub treatments: Vec<TreatmentId>,
    pub line_ids: Vec<String>,
    pub response: Vec<Vec<Option<f64>>>,
    pub companion: Vec<Vec<Option<f64>>>,
}

impl ResponseMatrix {
    pub fn n_treatments(&self) -> usize {
        self.treatments.len()
    }

    pub fn n_lines(&self) -> usize {
        self.line_ids.len()
    }

    pub fn applied(&self, treatment: usize, line: usize) -> bool {
        self.response[treatment][line].is_some()
    }

    pub fn untreated_index(&self) -> Option<usize> {
        self.treatments.iter().position(|t| t.is_untreated)
    }

    /// Number of treatments applied to each line (p_j).
    pub fn applied_per_line(&self) -> Vec<usize> {
        (0..self.n_lines())
            .map(|j| (0..self.n_treatments()).filter(|&i| self.applied(i, j)).count())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdxDataset {
    features: FeatureMatrix,
    treatments: Vec<TreatmentId>,
    records: Vec<ResponseRecord>,
}

/// A single invariant violation. `line`/`treatment` locate it when it is
/// record-specific.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub line: Option<String>,
    pub treatment: Option<String>,
    pub message: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match (&self.line, &self.treatment) {
            (Some(l), Some(t)) => write!(f, "line `{l}`, treatment `{t}`: {}", self.message),
            (Some(l), None) => write!(f, "line `{l}`: {}", self.message),
            (None, Some(t)) => write!(f, "treatment `{t}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl PdxDataset {
    /// Builds a dataset and rejects it if any invariant is violated.
    pub fn new(features: FeatureMatrix, treatments: Vec<TreatmentId>, records: Vec<ResponseRecord>) -> Result<Self> {
        let d = Self::from_parts(features, treatments, records);
        let violations = validate_dataset(&d);
        if let Some(first) = violations.first() {
            if violations.len() == 1 {
                return Err(Error::Validation(first.to_string()));
            }
            return Err(Error::Validation(format!(
                "{first} (and {} more)",
                violations.len() - 1
            )));
        }
        Ok(d)
    }

    /// Builds a dataset without validation.
    pub fn from_parts(features: FeatureMatrix, treatments: Vec<TreatmentId>, records: Vec<ResponseRecord>) -> Self {
        Self {
            features,
            treatments,
            records,
        }
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn treatments(&self) -> &[TreatmentId] {
        &self.treatments
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    /// Number of lines (m).
    pub fn m(&self) -> usize {
        self.features.n_lines()
    }

    /// Number of treatments (P).
    pub fn p(&self) -> usize {
        self.treatments.len()
    }

    pub fn untreated(&self) -> Option<&TreatmentId> {
        self.treatments.iter().find(|t| t.is_untreated)
    }

    /// Lines × treatments applied mask.
    pub fn applied(&self) -> Vec<Vec<bool>> {
        let li = self.line_lookup();
        let ti = self.treatment_lookup();
        let mut mask = alloc::vec![alloc::vec![false; self.p()]; self.m()];
        for r in &self.records {
            if let (Some(&j), Some(&i)) = (li.get(r.line_id.as_str()), ti.get(r.treatment.as_str())) {
                mask[j][i] = true;
            }
        }
        mask
    }

    /// True when every record carries a companion outcome.
    pub fn has_companion(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.companion.is_some())
    }

    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        if features.line_ids() != self.features.line_ids() {
            return Err(Error::InvalidInput(
                "replacement features must keep the line order".into(),
            ));
        }
        Ok(Self {
            features,
            treatments: self.treatments.clone(),
            records: self.records.clone(),
        })
    }

    pub fn with_records(&self, records: Vec<ResponseRecord>) -> Self {
        Self {
            features: self.features.clone(),
            treatments: self.treatments.clone(),
            records,
        }
    }

    /// Keeps the given lines (by row index) and their records.
    pub fn select_lines(&self, idx: &[usize]) -> Self {
        let features = self.features.select_lines(idx);
        let keep: BTreeSet<&str> = features.line_ids().iter().map(String::as_str).collect();
        let records = self
            .records
            .iter()
            .filter(|r| keep.contains(r.line_id.as_str()))
            .cloned()
            .collect();
        Self {
            features,
            treatments: self.treatments.clone(),
            records,
        }
    }

    /// Keeps the given treatments (by index) and their records.
    pub fn select_treatments(&self, idx: &[usize]) -> Self {
        let treatments: Vec<TreatmentId> = idx.iter().map(|&i| self.treatments[i].clone()).collect();
        let keep: BTreeSet<&str> = treatments.iter().map(|t| t.id.as_str()).collect();
        let records = self
            .records
            .iter()
            .filter(|r| keep.contains(r.treatment.as_str()))
            .cloned()
            .collect();
        Self {
            features: self.features.clone(),
            treatments,
            records,
        }
    }

    fn line_lookup(&self) -> BTreeMap<&str, usize> {
        self.features
            .line_ids()
            .iter()
            .enumerate()
            .map(|(j, l)| (l.as_str(), j))
            .collect()
    }

    fn treatment_lookup(&self) -> BTreeMap<&str, usize> {
        self.treatments
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect()
    }
}

/// Rearranges records into a treatment × line table.
pub fn assemble_response_matrix(dataset: &PdxDataset) -> Result<ResponseMatrix> {
    let li = dataset.line_lookup();
    let ti = dataset.treatment_lookup();
    let p = dataset.p();
    let m = dataset.m();
    let mut response = alloc::vec![alloc::vec![None; m]; p];
    let mut companion = alloc::vec![alloc::vec![None; m]; p];
    for r in dataset.records() {
        let j = *li
            .get(r.line_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("unknown line `{}`", r.line_id)))?;
        let i = *ti
            .get(r.treatment.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("unknown treatment `{}`", r.treatment)))?;
        if response[i][j].is_some() {
            return Err(Error::DuplicateRecord {
                line: r.line_id.clone(),
                treatment: r.treatment.clone(),
            });
        }
        response[i][j] = Some(r.response);
        companion[i][j] = r.companion;
    }
    Ok(ResponseMatrix {
        treatments: dataset.treatments().to_vec(),
        line_ids: dataset.features().line_ids().to_vec(),
        response,
        companion,
    })
}

/// Every invariant violation, ordered by (line, treatment).
pub fn validate_dataset(dataset: &PdxDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let global = |msg: String| Violation {
        line: None,
        treatment: None,
        message: msg,
    };

    if dataset.p() < 2 {
        out.push(global(format!("P >= 2 required, found {}", dataset.p())));
    }
    if dataset.m() < 2 {
        out.push(global(format!("m >= 2 required, found {}", dataset.m())));
    }
    let untreated = dataset.treatments().iter().filter(|t| t.is_untreated).count();
    if untreated != 1 {
        out.push(global(format!("exactly one untreated arm required, found {untreated}")));
    }

    let mut seen = BTreeSet::new();
    for t in dataset.treatments() {
        if !seen.insert(t.id.as_str()) {
            out.push(Violation {
                line: None,
                treatment: Some(t.id.clone()),
                message: "duplicate treatment id".into(),
            });
        }
    }

    let feats = dataset.features();
    let mut seen = BTreeSet::new();
    for name in feats.feature_names() {
        if !seen.insert(name.as_str()) {
            out.push(global(format!("duplicate feature name `{name}`")));
        }
        if parse_feature_name(name).is_none() {
            out.push(global(format!(
                "feature `{name}` lacks a .rna/.cn/.mut platform suffix"
            )));
        }
    }
    let mut seen = BTreeSet::new();
    for (j, line) in feats.line_ids().iter().enumerate() {
        if !seen.insert(line.as_str()) {
            out.push(Violation {
                line: Some(line.clone()),
                treatment: None,
                message: "duplicate line id".into(),
            });
        }
        if feats.values().row(j).iter().any(|v| !v.is_finite()) {
            out.push(Violation {
                line: Some(line.clone()),
                treatment: None,
                message: "non-finite feature value".into(),
            });
        }
    }

    let li = dataset.line_lookup();
    let ti = dataset.treatment_lookup();
    let mut pairs = BTreeSet::new();
    let mut lines_with_records = BTreeSet::new();
    for r in dataset.records() {
        let locate = |msg: &str| Violation {
            line: Some(r.line_id.clone()),
            treatment: Some(r.treatment.clone()),
            message: msg.to_string(),
        };
        if !li.contains_key(r.line_id.as_str()) {
            out.push(locate("record references an unknown line"));
        } else {
            lines_with_records.insert(r.line_id.as_str());
        }
        if !ti.contains_key(r.treatment.as_str()) {
            out.push(locate("record references an unknown treatment"));
        }
        if !r.response.is_finite() {
            out.push(locate("non-finite response"));
        }
        if r.companion.is_some_and(|c| !c.is_finite()) {
            out.push(locate("non-finite companion response"));
        }
        if !pairs.insert((r.line_id.as_str(), r.treatment.as_str())) {
            out.push(locate("duplicate (line, treatment) record"));
        }
    }
    for line in feats.line_ids() {
        if !lines_with_records.contains(line.as_str()) {
            out.push(Violation {
                line: Some(line.clone()),
                treatment: None,
                message: "line has no response records".into(),
            });
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn features(lines: &[&str]) -> FeatureMatrix {
        let n = lines.len();
        FeatureMatrix::new(
            lines.iter().map(|s| s.to_string()).collect(),
            vec!["A.rna".into(), "A.cn".into()],
            Matrix::from_vec(n, 2, (0..2 * n).map(|v| v as f64).collect()).unwrap(),
        )
        .unwrap()
    }

    fn two_by_two(records: Vec<ResponseRecord>) -> PdxDataset {
        PdxDataset::from_parts(
            features(&["L1", "L2"]),
            vec![TreatmentId::untreated("untreated"), TreatmentId::new("T1")],
            records,
        )
    }

    #[test]
    fn dense_two_by_two() {
        let d = two_by_two(vec![
            ResponseRecord::new("L1", "untreated", 1.0),
            ResponseRecord::new("L2", "untreated", 2.0),
            ResponseRecord::new("L1", "T1", 3.0),
            ResponseRecord::new("L2", "T1", 4.0),
        ]);
        assert!(validate_dataset(&d).is_empty());
        let r = assemble_response_matrix(&d).unwrap();
        assert_eq!(r.response, vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]]);
    }

    #[test]
    fn missing_entry_is_absent() {
        let d = two_by_two(vec![
            ResponseRecord::new("L1", "untreated", 1.0),
            ResponseRecord::new("L2", "untreated", 2.0),
            ResponseRecord::new("L1", "T1", 3.0),
        ]);
        let r = assemble_response_matrix(&d).unwrap();
        assert_eq!(r.response[1][1], None);
        assert_eq!(r.applied_per_line(), vec![2, 1]);
        assert_eq!(d.applied(), vec![vec![true, true], vec![true, false]]);
    }

    #[test]
    fn duplicate_record_is_an_error() {
        let d = two_by_two(vec![
            ResponseRecord::new("L1", "untreated", 1.0),
            ResponseRecord::new("L1", "untreated", 1.5),
            ResponseRecord::new("L2", "T1", 4.0),
        ]);
        assert!(matches!(
            assemble_response_matrix(&d),
            Err(Error::DuplicateRecord { .. })
        ));
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("duplicate"));
    }

    #[test]
    fn non_finite_response_is_named() {
        let d = two_by_two(vec![
            ResponseRecord::new("L1", "untreated", 1.0),
            ResponseRecord::new("L2", "T1", f64::NAN),
        ]);
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].line.as_deref(), Some("L2"));
        assert_eq!(v[0].treatment.as_deref(), Some("T1"));
    }

    #[test]
    fn zero_treatments_violates_p() {
        let d = PdxDataset::from_parts(features(&["L1", "L2"]), vec![], vec![]);
        let v = validate_dataset(&d);
        assert!(v.iter().any(|x| x.message.contains("P >= 2")));
        assert!(PdxDataset::new(features(&["L1", "L2"]), vec![], vec![]).is_err());
    }

    #[test]
    fn violations_are_sorted_by_location() {
        let d = two_by_two(vec![
            ResponseRecord::new("L2", "T1", f64::INFINITY),
            ResponseRecord::new("L1", "T1", f64::NAN),
        ]);
        let v = validate_dataset(&d);
        let lines: Vec<_> = v.iter().map(|x| x.line.clone()).collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
    }

    #[test]
    fn feature_suffix_parsing() {
        assert_eq!(parse_feature_name("TP53.rna"), Some(("TP53", Platform::Rna)));
        assert_eq!(parse_feature_name("HLA.A.cn"), Some(("HLA.A", Platform::Cn)));
        assert_eq!(parse_feature_name("TP53"), None);
        assert_eq!(parse_feature_name("TP53.xyz"), None);
    }
}

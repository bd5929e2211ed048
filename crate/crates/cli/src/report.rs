use std::path::{Path, PathBuf};

use pdx_itr_core::evaluation::ValueReport;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{write_artifact, write_atomic};
use crate::io::ResponseKind;

/// Outcome of one (response, method, L_sup) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: String,
    pub response: ResponseKind,
    pub method: String,
    pub l_sup: Option<usize>,
    pub report: Option<ValueReport>,
    pub error: Option<String>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    cell: &'a str,
    response: &'a str,
    method: &'a str,
    l_sup: Option<usize>,
    folds: Option<usize>,
    folds_evaluated: Option<usize>,
    seed: Option<u64>,
    v_bar: Option<f64>,
    sd: Option<f64>,
    v_obs: Option<f64>,
    v_opt: Option<f64>,
    p_opt: Option<f64>,
    p_obs: Option<f64>,
    status: &'a str,
    error: &'a str,
}

#[derive(Serialize)]
struct MethodRow<'a> {
    response: &'a str,
    method: &'a str,
    l_sup: Option<usize>,
    p_opt: Option<f64>,
    p_obs: Option<f64>,
    v_bar: f64,
    sd: f64,
}

#[derive(Serialize)]
struct FoldRow<'a> {
    response: &'a str,
    l_sup: Option<usize>,
    method: &'a str,
    fold: usize,
    value: f64,
    v_opt: f64,
    p_opt: Option<f64>,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

/// One row per cell, failed cells included with their error.
pub fn summary_csv(cells: &[CellReport]) -> CliResult<Vec<u8>> {
    csv_bytes(cells.iter().map(|c| {
        let r = c.report.as_ref();
        SummaryRow {
            cell: &c.cell,
            response: c.response.as_str(),
            method: &c.method,
            l_sup: c.l_sup,
            folds: r.map(|r| r.folds),
            folds_evaluated: r.map(|r| r.fold_results.len()),
            seed: r.map(|r| r.seed),
            v_bar: r.map(|r| r.v_bar),
            sd: r.map(|r| r.sd),
            v_obs: r.map(|r| r.v_obs),
            v_opt: r.map(|r| r.v_opt),
            p_opt: r.and_then(|r| r.p_opt),
            p_obs: r.and_then(|r| r.p_obs),
            status: if r.is_some() { "ok" } else { "failed" },
            error: c.error.as_deref().unwrap_or(""),
        }
    }))
}

/// Long format for P_opt by method, one row per successful cell.
pub fn p_opt_by_method_csv(cells: &[CellReport]) -> CliResult<Vec<u8>> {
    let mut ok: Vec<(&CellReport, &ValueReport)> = cells.iter().filter_map(|c| Some((c, c.report.as_ref()?))).collect();
    ok.sort_by(|a, b| (a.0.response, &a.0.method, a.0.l_sup).cmp(&(b.0.response, &b.0.method, b.0.l_sup)));
    csv_bytes(ok.into_iter().map(|(c, r)| MethodRow {
        response: c.response.as_str(),
        method: &c.method,
        l_sup: c.l_sup,
        p_opt: r.p_opt,
        p_obs: r.p_obs,
        v_bar: r.v_bar,
        sd: r.sd,
    }))
}

/// Long format for P_opt across L_sup, one row per evaluated fold.
pub fn p_opt_by_lsup_csv(cells: &[CellReport]) -> CliResult<Vec<u8>> {
    let mut ok: Vec<(&CellReport, &ValueReport)> = cells.iter().filter_map(|c| Some((c, c.report.as_ref()?))).collect();
    ok.sort_by(|a, b| (a.0.response, a.0.l_sup, &a.0.method).cmp(&(b.0.response, b.0.l_sup, &b.0.method)));
    csv_bytes(ok.into_iter().flat_map(|(c, r)| {
        r.fold_results.iter().map(move |f| FoldRow {
            response: c.response.as_str(),
            l_sup: c.l_sup,
            method: &c.method,
            fold: f.fold,
            value: f.value,
            v_opt: f.v_opt,
            p_opt: (f.v_opt != 0.0).then(|| f.value / f.v_opt),
        })
    }))
}

pub const REPORTS_FORMAT: &str = "cell-reports";

/// Writes the JSON reports and every CSV view; returns the paths written.
pub fn write_reports(dir: &Path, cells: &[CellReport]) -> CliResult<Vec<PathBuf>> {
    let json = dir.join("reports.json");
    write_artifact(&json, REPORTS_FORMAT, &cells)?;
    let mut written = vec![json];
    for (name, bytes) in [
        ("reports.csv", summary_csv(cells)?),
        ("plot_p_opt_by_method.csv", p_opt_by_method_csv(cells)?),
        ("plot_p_opt_by_lsup.csv", p_opt_by_lsup_csv(cells)?),
    ] {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pdx_itr_core::evaluation::{FoldResult, TuningPoint};

    fn sample() -> Vec<CellReport> {
        let fr = |fold, value| FoldResult {
            fold,
            chosen: TuningPoint {
                c1: 0,
                c2: Some(1),
                lambda: None,
            },
            value,
            v_obs: 0.5,
            v_opt: 2.0,
            n_lines: 4,
        };
        let report = ValueReport::from_folds("ql1".into(), Some(5), 7, 2, vec![fr(0, 1.0), fr(1, 1.5)], Vec::new());
        vec![
            CellReport {
                cell: "neg_bar__ql1__lsup-5".into(),
                response: ResponseKind::NegBar,
                method: "ql1".into(),
                l_sup: Some(5),
                report: Some(report),
                error: None,
            },
            CellReport {
                cell: "neg_bar__rf__lsup-5".into(),
                response: ResponseKind::NegBar,
                method: "rf".into(),
                l_sup: Some(5),
                report: None,
                error: Some("boom".into()),
            },
        ]
    }

    #[test]
    fn summary_has_a_row_per_cell() {
        let text = String::from_utf8(summary_csv(&sample()).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(",ok,"));
        assert!(lines[2].ends_with("failed,boom"));
    }

    #[test]
    fn fold_view_skips_failed_cells() {
        let text = String::from_utf8(p_opt_by_lsup_csv(&sample()).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().ends_with(",0.75"));
    }
}

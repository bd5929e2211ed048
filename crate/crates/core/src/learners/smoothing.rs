use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::learners::forest::{fit_random_forest, ForestParams};
use crate::math::Matrix;
use crate::model::PdxDataset;

/// Replaces each observed response with a random-forest fit on the line's
/// features plus a one-hot treatment indicator. Which (line, treatment)
/// pairs are observed does not change.
pub fn smooth_outcomes(dataset: &PdxDataset, params: &ForestParams, seed: u64) -> Result<PdxDataset> {
    let feats = dataset.features();
    let p = feats.n_features();
    let k = dataset.treatments().len();
    let records = dataset.records();
    let mut data = Vec::with_capacity(records.len() * (p + k));
    let mut y = Vec::with_capacity(records.len());
    for rec in records {
        let line = feats
            .line_index(&rec.line_id)
            .ok_or_else(|| Error::Validation(alloc::format!("unknown line {}", rec.line_id)))?;
        let t = dataset
            .treatments()
            .iter()
            .position(|t| t.id == rec.treatment)
            .ok_or_else(|| Error::Validation(alloc::format!("unknown treatment {}", rec.treatment)))?;
        data.extend_from_slice(feats.values().row(line));
        data.extend((0..k).map(|j| if j == t { 1.0 } else { 0.0 }));
        y.push(rec.response);
    }
    let x = Matrix::from_vec(records.len(), p + k, data)?;
    let forest = fit_random_forest(&x, &y, params, seed)?;
    let smoothed = records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut r = rec.clone();
            r.response = forest.predict_row(x.row(i));
            r
        })
        .collect();
    Ok(dataset.with_records(smoothed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureMatrix, ResponseRecord, TreatmentId};
    use crate::rng;
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;

    fn dataset(m: usize, seed: u64, constant: bool) -> (PdxDataset, Vec<f64>) {
        let mut r = rng::seeded(seed);
        let lines: Vec<String> = (0..m).map(|i| format!("L{i}")).collect();
        let x: Vec<f64> = (0..m * 2).map(|_| rng::normal(&mut r)).collect();
        let fm = FeatureMatrix::new(
            lines.clone(),
            vec!["G1.rna".into(), "G2.rna".into()],
            Matrix::from_vec(m, 2, x.clone()).unwrap(),
        )
        .unwrap();
        let treatments = vec![
            TreatmentId::untreated("untreated"),
            TreatmentId::new("A"),
            TreatmentId::new("B"),
        ];
        let mut recs = Vec::new();
        let mut truth = Vec::new();
        for (i, l) in lines.iter().enumerate() {
            for (t, tr) in treatments.iter().enumerate() {
                let mu = if constant { 2.5 } else { x[2 * i] + t as f64 };
                let noise = if constant { 0.0 } else { rng::normal(&mut r) };
                recs.push(ResponseRecord::new(l.clone(), tr.id.clone(), mu + noise));
                truth.push(mu);
            }
        }
        (PdxDataset::new(fm, treatments, recs).unwrap(), truth)
    }

    #[test]
    fn constant_outcomes_stay_constant() {
        let (d, _) = dataset(12, 1, true);
        let s = smooth_outcomes(&d, &ForestParams::default(), 4).unwrap();
        assert!(s.records().iter().all(|r| r.response == 2.5));
    }

    #[test]
    fn smoothing_moves_toward_the_truth() {
        let (d, truth) = dataset(150, 2, false);
        let params = ForestParams {
            feature_fraction: 1.0,
            min_leaf: 10,
            ..Default::default()
        };
        let s = smooth_outcomes(&d, &params, 5).unwrap();
        let mse = |recs: &[ResponseRecord]| {
            recs.iter()
                .zip(&truth)
                .map(|(r, t)| (r.response - t) * (r.response - t))
                .sum::<f64>()
                / truth.len() as f64
        };
        assert!(mse(s.records()) < mse(d.records()));
        let keys = |d: &PdxDataset| {
            d.records()
                .iter()
                .map(|r| (r.line_id.clone(), r.treatment.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(keys(&s), keys(&d));
    }
}

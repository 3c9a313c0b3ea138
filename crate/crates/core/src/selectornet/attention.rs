//! Per-sample feature attention.
//!
//! For each step, the selection `S1 + S2` is scaled by that step's
//! contribution `Σ_f x_dec[f]`; the overall attention is the sum over steps.

use std::io::Write;
use std::path::Path;

use super::model::StepTrace;
use crate::error::{DataError, Error, Result};
use crate::numeric::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub feature_names: Vec<String>,
    /// One `B x F` matrix per step.
    pub per_step: Vec<Matrix>,
    /// `B x F`, the sum of `per_step`.
    pub total: Matrix,
}

pub fn attention(traces: &[StepTrace]) -> Result<AttentionReport> {
    let first = traces.first().ok_or(Error::Empty("attention traces"))?;
    let (b, f) = first.s1.shape();
    let mut total = Matrix::zeros(b, f);
    let mut per_step = Vec::with_capacity(traces.len());
    for t in traces {
        t.s1.ensure_same_shape(&first.s1, "attention")?;
        t.s2.ensure_same_shape(&first.s1, "attention")?;
        t.x_dec.ensure_same_shape(&first.s1, "attention")?;
        let contribution = t.x_dec.row_sums();
        let mut step = t.s1.add(&t.s2)?;
        for (r, c) in contribution.iter().enumerate() {
            step.row_mut(r).iter_mut().for_each(|v| *v *= c);
        }
        total.add_assign(&step)?;
        per_step.push(step);
    }
    Ok(AttentionReport {
        feature_names: (0..f).map(|i| format!("f{i}")).collect(),
        per_step,
        total,
    })
}

impl AttentionReport {
    pub fn with_feature_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.total.cols() {
            return Err(Error::Width {
                what: "feature name",
                expected: self.total.cols(),
                found: names.len(),
            });
        }
        self.feature_names = names.to_vec();
        Ok(self)
    }

    /// Mean of `|attn_all|` per feature over samples.
    pub fn mean_abs(&self) -> Vec<f64> {
        let n = self.total.rows().max(1) as f64;
        let mut out = vec![0.0; self.total.cols()];
        for r in 0..self.total.rows() {
            for (o, v) in out.iter_mut().zip(self.total.row(r)) {
                *o += v.abs();
            }
        }
        out.iter_mut().for_each(|v| *v /= n);
        out
    }

    /// One row per sample, one column per feature, header of feature names.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.feature_names)?;
        for r in 0..self.total.rows() {
            w.write_record(self.total.row(r).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv(path: &Path) -> Result<(Vec<String>, Matrix)> {
        let mut r = csv::Reader::from_path(path)?;
        let names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .zip(&names)
                .map(|(v, n)| {
                    v.parse::<f64>().map_err(|_| {
                        Error::Data(DataError::NotNumeric {
                            row: i + 1,
                            column: n.clone(),
                            value: v.to_owned(),
                        })
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok((names, Matrix::from_rows(&rows)?))
    }
}

//! Tabular datasets: CSV ingestion, subsetting and min-max normalization.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{DataError, Error, Result};
use crate::numeric::Matrix;

pub const LABEL_COLUMN: &str = "label";
pub const ID_COLUMN: &str = "id";
pub const EMBED_PREFIX: &str = "emb_";
/// Columns ending in this suffix are bookkeeping flags, not model inputs.
pub const FLAG_SUFFIX: &str = "_valid";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    /// `n x F`
    pub features: Matrix,
    /// 1 = positive class.
    pub labels: Vec<f64>,
    /// `n x E`; zero columns when the file has no embedding.
    pub embed: Matrix,
    pub ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Matrix,
        labels: Vec<f64>,
        embed: Matrix,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = features.rows();
        if feature_names.len() != features.cols() {
            return Err(Error::Width {
                what: "feature name",
                expected: features.cols(),
                found: feature_names.len(),
            });
        }
        if labels.len() != n || embed.rows() != n || ids.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::Precondition(format!(
                "dataset parts disagree on row count ({n} feature rows, {} labels, {} embedding rows)",
                labels.len(),
                embed.rows()
            )));
        }
        for (row, y) in labels.iter().enumerate() {
            if *y != 0.0 && *y != 1.0 {
                return Err(DataError::LabelDomain {
                    row: row + 1,
                    value: y.to_string(),
                }
                .into());
            }
        }
        Ok(Self {
            feature_names,
            features,
            labels,
            embed,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.cols()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().sum::<f64>() / self.len() as f64
    }

    /// Accuracy of always predicting the more frequent class.
    pub fn majority_rate(&self) -> f64 {
        let p = self.positive_rate();
        p.max(1.0 - p)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            embed: self.embed.select_rows(indices),
            ids: self.ids.as_ref().map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    /// Appends feature columns on the right.
    pub fn with_extra_features(&self, names: Vec<String>, values: Matrix) -> Result<Dataset> {
        let mut feature_names = self.feature_names.clone();
        feature_names.extend(names);
        Dataset::new(
            feature_names,
            self.features.hcat(&values)?,
            self.labels.clone(),
            self.embed.clone(),
            self.ids.clone(),
        )
    }

    pub fn without_embedding(&self) -> Dataset {
        Dataset {
            embed: Matrix::zeros(self.len(), 0),
            ..self.clone()
        }
    }

    /// Writes `id?, features..., emb_*, label`, preceded by `# ` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = Vec::new();
        if self.ids.is_some() {
            header.push(ID_COLUMN.into());
        }
        header.extend(self.feature_names.iter().cloned());
        header.extend((0..self.embed_dim()).map(|i| format!("{EMBED_PREFIX}{i}")));
        header.push(LABEL_COLUMN.into());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            if let Some(ids) = &self.ids {
                rec.push(ids[r].clone());
            }
            rec.extend(self.features.row(r).iter().map(|v| v.to_string()));
            rec.extend(self.embed.row(r).iter().map(|v| v.to_string()));
            rec.push((self.labels[r] as u8).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, comments)
    }
}

/// Reads a feature CSV. Lines starting with `#` are comments.
///
/// With a `schema`, exactly those feature columns are read, in schema order.
/// Without one, every column other than `id`, `label`, `emb_*` and `*_valid`
/// is a feature, in file order.
pub fn load_dataset(path: &Path, schema: Option<&[String]>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?, schema)
}

pub fn read_dataset<R: Read>(input: R, schema: Option<&[String]>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| header.iter().position(|h| h == name);

    let label_col = find(LABEL_COLUMN).ok_or_else(|| DataError::MissingColumn(LABEL_COLUMN.into()))?;
    let id_col = find(ID_COLUMN);

    let feature_cols: Vec<usize> = match schema {
        Some(names) => names
            .iter()
            .map(|n| find(n).ok_or_else(|| DataError::MissingColumn(n.clone())))
            .collect::<Result<_, _>>()?,
        None => (0..header.len())
            .filter(|&i| {
                let h = &header[i];
                i != label_col
                    && Some(i) != id_col
                    && !h.starts_with(EMBED_PREFIX)
                    && !h.ends_with(FLAG_SUFFIX)
            })
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(DataError::Schema("no feature columns".into()).into());
    }

    let mut embed_cols = Vec::new();
    while let Some(c) = find(&format!("{EMBED_PREFIX}{}", embed_cols.len())) {
        embed_cols.push(c);
    }
    if let Some(stray) = header
        .iter()
        .filter(|h| h.starts_with(EMBED_PREFIX))
        .find(|h| !embed_cols.iter().any(|&c| &header[c] == *h))
    {
        return Err(DataError::Schema(format!(
            "embedding column {stray:?} is not part of a contiguous emb_0.. sequence"
        ))
        .into());
    }

    let mut features = Vec::new();
    let mut embed = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(DataError::RowWidth {
                row,
                expected: header.len(),
                found: rec.len(),
            }
            .into());
        }
        let num = |c: usize| -> Result<f64> {
            rec[c].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                DataError::NotNumeric {
                    row,
                    column: header[c].clone(),
                    value: rec[c].to_owned(),
                }
                .into()
            })
        };
        for &c in &feature_cols {
            features.push(num(c)?);
        }
        for &c in &embed_cols {
            embed.push(num(c)?);
        }
        let label = match rec[label_col].parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => v,
            _ => {
                return Err(DataError::LabelDomain {
                    row,
                    value: rec[label_col].to_owned(),
                }
                .into())
            }
        };
        labels.push(label);
        if let Some(c) = id_col {
            ids.push(rec[c].to_owned());
        }
    }
    let n = labels.len();
    Dataset::new(
        feature_cols.iter().map(|&c| header[c].clone()).collect(),
        Matrix::from_vec(n, feature_cols.len(), features)?,
        labels,
        Matrix::from_vec(n, embed_cols.len(), embed)?,
        id_col.map(|_| ids),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormPolicy {
    /// Min/max over every row.
    Global,
    /// Min/max over the training rows only.
    TrainFold,
}

impl NormPolicy {
    pub fn name(self) -> &'static str {
        match self {
            NormPolicy::Global => "global",
            NormPolicy::TrainFold => "train_fold",
        }
    }
}

impl std::str::FromStr for NormPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "global" => Ok(NormPolicy::Global),
            "train_fold" => Ok(NormPolicy::TrainFold),
            other => Err(format!("unknown normalization policy {other:?}; expected global or train_fold")),
        }
    }
}

impl std::fmt::Display for NormPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-feature min-max statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub feature_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub policy: NormPolicy,
}

impl NormStats {
    pub fn fit(ds: &Dataset, rows: &[usize], policy: NormPolicy) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("normalization fit set"));
        }
        let f = ds.feature_dim();
        let mut min = vec![f64::INFINITY; f];
        let mut max = vec![f64::NEG_INFINITY; f];
        for &r in rows {
            for (c, &v) in ds.features.row(r).iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok(Self {
            feature_names: ds.feature_names.clone(),
            min,
            max,
            policy,
        })
    }

    /// `(k - min) / (max - min)` clamped to `[0, 1]`; constant features map to 0.
    pub fn scale(&self, c: usize, k: f64) -> f64 {
        let span = self.max[c] - self.min[c];
        if span <= 0.0 {
            return 0.0;
        }
        ((k - self.min[c]) / span).clamp(0.0, 1.0)
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.feature_dim() != self.min.len() {
            return Err(Error::Width {
                what: "feature",
                expected: self.min.len(),
                found: ds.feature_dim(),
            });
        }
        let mut features = ds.features.clone();
        for r in 0..features.rows() {
            for (c, v) in features.row_mut(r).iter_mut().enumerate() {
                *v = self.scale(c, *v);
            }
        }
        Ok(Dataset {
            features,
            ..ds.clone()
        })
    }

    /// Columns `feature,min,max`, preceded by a `# policy = ...` comment.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "# policy = {}", self.policy)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["feature", "min", "max"])?;
        for (i, name) in self.feature_names.iter().enumerate() {
            w.write_record([name.clone(), self.min[i].to_string(), self.max[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let policy = text
            .lines()
            .find_map(|l| l.strip_prefix("# policy = "))
            .map(|p| p.trim().parse::<NormPolicy>())
            .transpose()
            .map_err(DataError::Schema)?
            .unwrap_or(NormPolicy::TrainFold);
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let (mut names, mut min, mut max) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |c: usize, col: &str| -> Result<f64> {
                rec.get(c).and_then(|v| v.parse().ok()).ok_or_else(|| {
                    DataError::NotNumeric {
                        row: i + 1,
                        column: col.into(),
                        value: rec.get(c).unwrap_or("").into(),
                    }
                    .into()
                })
            };
            names.push(rec.get(0).unwrap_or("").to_owned());
            min.push(parse(1, "min")?);
            max.push(parse(2, "max")?);
        }
        Ok(Self {
            feature_names: names,
            min,
            max,
            policy,
        })
    }

    /// Reorders a dataset's columns to match these statistics before applying them.
    pub fn apply_by_name(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.feature_names == self.feature_names {
            return self.apply(ds);
        }
        let cols: Vec<usize> = self
            .feature_names
            .iter()
            .map(|n| {
                ds.feature_names
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::from(DataError::MissingColumn(n.clone())))
            })
            .collect::<Result<_>>()?;
        let mut data = Vec::with_capacity(ds.len() * cols.len());
        for r in 0..ds.len() {
            data.extend(cols.iter().map(|&c| ds.features.get(r, c)));
        }
        let reordered = Dataset {
            feature_names: self.feature_names.clone(),
            features: Matrix::from_vec(ds.len(), cols.len(), data)?,
            ..ds.clone()
        };
        self.apply(&reordered)
    }
}

/// Min-max scales every feature. `Global` fits on all rows and ignores `fit_rows`.
pub fn normalize(ds: &Dataset, policy: NormPolicy, fit_rows: &[usize]) -> Result<(Dataset, NormStats)> {
    let all: Vec<usize>;
    let rows = match policy {
        NormPolicy::Global => {
            all = (0..ds.len()).collect();
            &all[..]
        }
        NormPolicy::TrainFold => fit_rows,
    };
    let stats = NormStats::fit(ds, rows, policy)?;
    Ok((stats.apply(ds)?, stats))
}

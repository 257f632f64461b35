//! Tabular data model: schemas, datasets, CSV ingestion, the synthetic
//! COMPAS-like generator, train/test splits and standardization statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Continuous,
    /// Integer-coded in declaration order: `categories[k]` is stored as `k`.
    Categorical { categories: Vec<String> },
}

impl FeatureKind {
    pub fn cardinality(&self) -> Option<usize> {
        match self {
            FeatureKind::Continuous => None,
            FeatureKind::Categorical { categories } => Some(categories.len()),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    sensitive_index: usize,
    uncorrelated_indices: Vec<usize>,
    label_name: String,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<Feature>,
        sensitive_index: usize,
        uncorrelated_indices: Vec<usize>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        let label_name = label_name.into();
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            if let Some(card) = f.kind.cardinality() {
                if card < 2 {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` needs at least 2 categories, got {card}",
                        f.name
                    )));
                }
                let distinct: HashSet<_> = match &f.kind {
                    FeatureKind::Categorical { categories } => categories.iter().collect(),
                    FeatureKind::Continuous => unreachable!(),
                };
                if distinct.len() != card {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` repeats a category",
                        f.name
                    )));
                }
            }
        }
        if seen.contains(label_name.as_str()) {
            return Err(Error::Schema(format!(
                "label `{label_name}` collides with a feature name"
            )));
        }
        if sensitive_index >= features.len() {
            return Err(Error::Schema(format!(
                "sensitive index {sensitive_index} out of range for {} features",
                features.len()
            )));
        }
        let mut unc_seen = HashSet::new();
        for &u in &uncorrelated_indices {
            if u >= features.len() {
                return Err(Error::Schema(format!("uncorrelated index {u} out of range")));
            }
            if u == sensitive_index {
                return Err(Error::Schema(format!(
                    "feature `{}` cannot be both sensitive and uncorrelated",
                    features[u].name
                )));
            }
            if !unc_seen.insert(u) {
                return Err(Error::Schema(format!("uncorrelated index {u} listed twice")));
            }
        }
        Ok(Self {
            features,
            sensitive_index,
            uncorrelated_indices,
            label_name,
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive_index
    }

    pub fn uncorrelated_indices(&self) -> &[usize] {
        &self.uncorrelated_indices
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Same features, different label name. Used for OOD training sets.
    pub fn relabeled(&self, label_name: &str) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.sensitive_index,
            self.uncorrelated_indices.clone(),
            label_name,
        )
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| Error::Schema(format!("parse error: {e}")))?;
        file.into_schema()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SchemaFile {
            label: self.label_name.clone(),
            sensitive: self.features[self.sensitive_index].name.clone(),
            uncorrelated: self
                .uncorrelated_indices
                .iter()
                .map(|&i| self.features[i].name.clone())
                .collect(),
            features: self
                .features
                .iter()
                .map(|f| FeatureEntry {
                    name: f.name.clone(),
                    kind: match f.kind {
                        FeatureKind::Continuous => "continuous".into(),
                        FeatureKind::Categorical { .. } => "categorical".into(),
                    },
                    categories: match &f.kind {
                        FeatureKind::Continuous => None,
                        FeatureKind::Categorical { categories } => Some(categories.clone()),
                    },
                })
                .collect(),
        };
        toml::to_string(&file).expect("schema serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// On-disk schema layout (TOML).
#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    label: String,
    sensitive: String,
    #[serde(default)]
    uncorrelated: Vec<String>,
    features: Vec<FeatureEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureEntry {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

impl SchemaFile {
    fn into_schema(self) -> Result<FeatureSchema> {
        let mut features = Vec::with_capacity(self.features.len());
        for entry in self.features {
            let kind = match (entry.kind.as_str(), entry.categories) {
                ("continuous", None) => FeatureKind::Continuous,
                ("continuous", Some(_)) => {
                    return Err(Error::Schema(format!(
                        "continuous feature `{}` must not declare categories",
                        entry.name
                    )))
                }
                ("categorical", Some(categories)) => FeatureKind::Categorical { categories },
                ("categorical", None) => {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` is missing `categories`",
                        entry.name
                    )))
                }
                (other, _) => {
                    return Err(Error::Schema(format!(
                        "feature `{}` has unknown kind `{other}`",
                        entry.name
                    )))
                }
            };
            features.push(Feature {
                name: entry.name,
                kind,
            });
        }
        let find = |name: &str| {
            features
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| Error::Schema(format!("unknown feature `{name}`")))
        };
        let sensitive = find(&self.sensitive)?;
        let uncorrelated = self
            .uncorrelated
            .iter()
            .map(|n| find(n))
            .collect::<Result<Vec<_>>>()?;
        FeatureSchema::new(features, sensitive, uncorrelated, self.label)
    }
}

/// Row-major numeric table with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(schema: Arc<FeatureSchema>, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let width = schema.width();
        if width == 0 {
            return Err(Error::Data("schema has no features".into()));
        }
        if values.len() != labels.len() * width {
            return Err(Error::Data(format!(
                "{} values do not form {} rows of width {width}",
                values.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("row {i}: label {} is not 0/1", labels[i])));
        }
        for (r, row) in values.chunks_exact(width).enumerate() {
            for (j, (&v, f)) in row.iter().zip(schema.features()).enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!("row {r}, feature {j}: non-finite value")));
                }
                if let Some(card) = f.kind.cardinality() {
                    if v.fract() != 0.0 || v < 0.0 || v >= card as f64 {
                        return Err(Error::Data(format!(
                            "row {r}, feature `{}`: {v} is not a category code below {card}",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(Self {
            schema,
            values,
            labels,
        })
    }

    pub fn from_rows(schema: Arc<FeatureSchema>, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(schema, values, labels)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<FeatureSchema> {
        Arc::clone(&self.schema)
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.width())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let w = self.width();
        let mut values = Vec::with_capacity(indices.len() * w);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema_arc(),
            values,
            labels,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header: Vec<&str> = self.schema.feature_names();
        header.push(self.schema.label_name());
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for (row, &label) in self.rows().zip(&self.labels) {
            let mut record: Vec<String> = row
                .iter()
                .zip(self.schema.features())
                .map(|(&v, f)| match &f.kind {
                    FeatureKind::Continuous => format!("{v}"),
                    FeatureKind::Categorical { categories } => categories[v as usize].clone(),
                })
                .collect();
            record.push(label.to_string());
            w.write_record(&record).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Load a CSV whose header names every schema feature plus the label column.
/// Categorical cells hold category names and are coded by schema order.
pub fn load_csv(path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema = FeatureSchema::load(schema_path)?;
    load_csv_with_schema(path, Arc::new(schema))
}

pub fn load_csv_with_schema(path: impl AsRef<Path>, schema: Arc<FeatureSchema>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let header = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    let col_of = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Cell {
                path: path.to_path_buf(),
                row: 0,
                column: name.to_string(),
                message: "missing column".into(),
            })
    };
    let feature_cols = schema
        .features()
        .iter()
        .map(|f| col_of(&f.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = col_of(schema.label_name())?;
    let cat_lookup: Vec<Option<BTreeMap<&str, usize>>> = schema
        .features()
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Continuous => None,
            FeatureKind::Categorical { categories } => Some(
                categories
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (c.as_str(), k))
                    .collect(),
            ),
        })
        .collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // 1-based data row; the header is row 0
        let row_no = i + 1;
        let record = record.map_err(|e| csv_io(path, e))?;
        let cell_err = |column: &str, message: String| Error::Cell {
            path: path.to_path_buf(),
            row: row_no,
            column: column.to_string(),
            message,
        };
        for ((f, &col), lookup) in schema.features().iter().zip(&feature_cols).zip(&cat_lookup) {
            let cell = record
                .get(col)
                .ok_or_else(|| cell_err(&f.name, "row is too short".into()))?;
            let v = match lookup {
                None => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| cell_err(&f.name, format!("cannot parse `{cell}` as a number")))?;
                    if !v.is_finite() {
                        return Err(cell_err(&f.name, format!("non-finite value `{cell}`")));
                    }
                    v
                }
                Some(map) => *map
                    .get(cell)
                    .ok_or_else(|| cell_err(&f.name, format!("unknown category `{cell}`")))?
                    as f64,
            };
            values.push(v);
        }
        let label_cell = record
            .get(label_col)
            .ok_or_else(|| cell_err(schema.label_name(), "row is too short".into()))?;
        let label = match label_cell {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(cell_err(
                    schema.label_name(),
                    format!("label `{other}` is not 0 or 1"),
                ))
            }
        };
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Cell {
            path: path.to_path_buf(),
            row: 1,
            column: String::new(),
            message: "file has no data rows".into(),
        });
    }
    Dataset::new(schema, values, labels)
}

/// Parameters of the synthetic COMPAS stand-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub n_noise_features: usize,
    /// Probability that the label equals the sensitive attribute, in (0.5, 1].
    pub bias_strength: f64,
    pub n_uncorrelated: usize,
    pub seed: u64,
    /// Pairwise correlation of the continuous noise features, in [0, 1).
    /// They share one latent factor, so real rows lie near a line that
    /// perturbation noise knocks them off of.
    #[serde(default = "default_noise_correlation")]
    pub noise_correlation: f64,
    /// Grid step the first `quantized_noise` noise features are rounded
    /// to; 0 leaves them continuous.
    #[serde(default = "default_noise_resolution")]
    pub noise_resolution: f64,
    #[serde(default = "default_quantized_noise")]
    pub quantized_noise: usize,
}

pub const DEFAULT_NOISE_RESOLUTION: f64 = 0.5;

pub const DEFAULT_QUANTIZED_NOISE: usize = 6;

fn default_quantized_noise() -> usize {
    DEFAULT_QUANTIZED_NOISE
}

fn default_noise_resolution() -> f64 {
    DEFAULT_NOISE_RESOLUTION
}

pub const DEFAULT_NOISE_CORRELATION: f64 = 0.995;

fn default_noise_correlation() -> f64 {
    DEFAULT_NOISE_CORRELATION
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_rows: 2000,
            n_noise_features: 12,
            bias_strength: 0.9,
            n_uncorrelated: 1,
            seed: 0,
            noise_correlation: DEFAULT_NOISE_CORRELATION,
            noise_resolution: DEFAULT_NOISE_RESOLUTION,
            quantized_noise: DEFAULT_QUANTIZED_NOISE,
        }
    }
}

pub fn synthetic_schema(n_noise_features: usize, n_uncorrelated: usize) -> Result<FeatureSchema> {
    let binary = || FeatureKind::Categorical {
        categories: vec!["0".into(), "1".into()],
    };
    let mut features: Vec<Feature> = (1..=n_noise_features)
        .map(|i| Feature {
            name: format!("noise_{i}"),
            kind: FeatureKind::Continuous,
        })
        .collect();
    let sensitive = features.len();
    features.push(Feature {
        name: "sensitive".into(),
        kind: binary(),
    });
    let uncorrelated: Vec<usize> = (0..n_uncorrelated).map(|k| sensitive + 1 + k).collect();
    for k in 1..=n_uncorrelated {
        features.push(Feature {
            name: format!("unrelated_{k}"),
            kind: binary(),
        });
    }
    FeatureSchema::new(features, sensitive, uncorrelated, "label")
}

/// Binary sensitive attribute (fair coin) with `label == sensitive` at rate
/// `bias_strength`, standard-normal noise features independent of the label,
/// and fair-coin unrelated columns independent of everything.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset> {
    if config.n_rows < 10 {
        return Err(Error::Data(format!("n_rows must be >= 10, got {}", config.n_rows)));
    }
    if !(config.bias_strength > 0.5 && config.bias_strength <= 1.0) {
        return Err(Error::Data(format!(
            "bias_strength must lie in (0.5, 1], got {}",
            config.bias_strength
        )));
    }
    if !(0.0..1.0).contains(&config.noise_correlation) {
        return Err(Error::Data(format!(
            "noise_correlation must lie in [0, 1), got {}",
            config.noise_correlation
        )));
    }
    if !(config.noise_resolution >= 0.0 && config.noise_resolution.is_finite()) {
        return Err(Error::Data(format!(
            "noise_resolution must be finite and >= 0, got {}",
            config.noise_resolution
        )));
    }
    let h = config.noise_resolution;
    let schema = Arc::new(synthetic_schema(config.n_noise_features, config.n_uncorrelated)?);
    let width = schema.width();
    let loading = config.noise_correlation.sqrt();
    let idio = (1.0 - config.noise_correlation).sqrt();
    let mut rng = seed::rng(config.seed);
    let mut values = Vec::with_capacity(config.n_rows * width);
    let mut labels = Vec::with_capacity(config.n_rows);
    for _ in 0..config.n_rows {
        let latent: f64 = rng.sample(StandardNormal);
        for k in 0..config.n_noise_features {
            let e: f64 = rng.sample(StandardNormal);
            let v = loading * latent + idio * e;
            values.push(if h > 0.0 && k < config.quantized_noise { (v / h).round() * h } else { v });
        }
        let sensitive = rng.random_bool(0.5) as u8;
        values.push(sensitive as f64);
        for _ in 0..config.n_uncorrelated {
            values.push(rng.random_bool(0.5) as u8 as f64);
        }
        let agree = config.bias_strength >= 1.0 || rng.random_bool(config.bias_strength);
        labels.push(if agree { sensitive } else { 1 - sensitive });
    }
    Dataset::new(schema, values, labels)
}

/// Shuffle with `seed` and cut off `round(n * test_fraction)` rows (at least
/// one on each side) as the test set.
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Data(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.n_rows();
    if n < 2 {
        return Err(Error::Data(format!("cannot split a dataset of {n} rows")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let (test_idx, train_idx) = idx.split_at(n_test);
    Ok((dataset.select(train_idx), dataset.select(test_idx)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureStats {
    Continuous { mean: f64, std: f64 },
    /// `frequencies[k]` is the empirical share of code `k`.
    Categorical { frequencies: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    features: Vec<FeatureStats>,
}

impl StandardizationStats {
    pub fn new(features: Vec<FeatureStats>) -> Result<Self> {
        for (j, fs) in features.iter().enumerate() {
            match fs {
                FeatureStats::Continuous { mean, std } => {
                    if !(std.is_finite() && *std > 0.0 && mean.is_finite()) {
                        return Err(Error::Data(format!("feature {j}: std must be > 0")));
                    }
                }
                FeatureStats::Categorical { frequencies } => {
                    let total: f64 = frequencies.iter().sum();
                    if (total - 1.0).abs() > 1e-9 || frequencies.iter().any(|&p| p < 0.0) {
                        return Err(Error::Data(format!(
                            "feature {j}: frequencies must be non-negative and sum to 1"
                        )));
                    }
                }
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[FeatureStats] {
        &self.features
    }

    pub fn width(&self) -> usize {
        self.features.len()
    }

    /// Z-score for continuous features, the raw code for categoricals.
    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        match &self.features[j] {
            FeatureStats::Continuous { mean, std } => (v - mean) / std,
            FeatureStats::Categorical { .. } => v,
        }
    }
}

pub fn fit_standardization(dataset: &Dataset) -> Result<StandardizationStats> {
    let n = dataset.n_rows();
    if n < 2 {
        return Err(Error::Data(format!(
            "standardization needs at least 2 rows, got {n}"
        )));
    }
    let mut features = Vec::with_capacity(dataset.width());
    for (j, f) in dataset.schema().features().iter().enumerate() {
        let col = dataset.column(j);
        let stats = match &f.kind {
            FeatureKind::Continuous => {
                let mean = col.iter().sum::<f64>() / n as f64;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
                let std = var.sqrt();
                if std <= 1e-12 * mean.abs().max(1.0) {
                    return Err(Error::Data(format!(
                        "continuous feature `{}` is constant (std = 0)",
                        f.name
                    )));
                }
                FeatureStats::Continuous { mean, std }
            }
            FeatureKind::Categorical { categories } => {
                let mut counts = vec![0usize; categories.len()];
                for v in col {
                    counts[v as usize] += 1;
                }
                FeatureStats::Categorical {
                    frequencies: counts.iter().map(|&c| c as f64 / n as f64).collect(),
                }
            }
        };
        features.push(stats);
    }
    Ok(StandardizationStats { features })
}

/// The row minimizing total Euclidean distance (z-scored continuous,
/// raw-coded categoricals) to every other row.
pub fn medoid(dataset: &Dataset, stats: &StandardizationStats) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::Data("medoid of an empty dataset".into()));
    }
    let scaled: Vec<Vec<f64>> = dataset
        .rows()
        .map(|r| r.iter().enumerate().map(|(j, &v)| stats.scale_value(j, v)).collect())
        .collect();
    let n = scaled.len();
    let mut totals = vec![0.0; n];
    for i in 0..n {
        for k in (i + 1)..n {
            let d = scaled[i]
                .iter()
                .zip(&scaled[k])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            totals[i] += d;
            totals[k] += d;
        }
    }
    let best = (0..n)
        .min_by(|&a, &b| totals[a].total_cmp(&totals[b]).then(a.cmp(&b)))
        .expect("non-empty");
    Ok(dataset.row(best).to_vec())
}

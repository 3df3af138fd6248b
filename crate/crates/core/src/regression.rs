//! Design-matrix assembly, OLS inference and the nested-model likelihood-ratio
//! test used to attribute repetition scores to architecture, training data,
//! test data and train-by-test interactions.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SummaryRecord, HUMAN};
use crate::special::{self, DistributionError};

#[derive(Debug, Error, PartialEq)]
pub enum RegressionError {
    #[error("no observations")]
    Empty,
    #[error("reference {group} label {label:?} does not occur in the data")]
    UnknownReference { group: &'static str, label: String },
    #[error("record {0:?} has no train_dataset")]
    MissingTrainDataset(String),
    #[error("design is rank deficient; offending columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("{rows} rows cannot identify {params} parameters")]
    InsufficientRows { rows: usize, params: usize },
    #[error("nested model columns are not a strict subset of the full model's")]
    NotNested,
    #[error("fits have different row counts ({full} vs {nested})")]
    RowMismatch { full: usize, nested: usize },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// How the train-dataset group is encoded for human-written rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanTrainEncoding {
    /// Train indicators all zero, no interaction terms.
    #[default]
    Reference,
    /// Treat the test dataset as the training dataset.
    SameAsTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionSpec {
    pub reference_architecture: String,
    pub reference_train: String,
    pub reference_test: String,
    pub include_interactions: bool,
    pub confidence_level: f64,
    pub lr_critical_value: f64,
    pub human_train_encoding: HumanTrainEncoding,
    /// Preferred ordering of architecture columns; unlisted labels follow sorted.
    pub architecture_order: Vec<String>,
    /// Preferred ordering of dataset columns; unlisted labels follow sorted.
    pub dataset_order: Vec<String>,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            reference_architecture: HUMAN.to_string(),
            reference_train: "CNN/DailyMail".to_string(),
            reference_test: "CNN/DailyMail".to_string(),
            include_interactions: true,
            confidence_level: 0.95,
            lr_critical_value: 0.001,
            human_train_encoding: HumanTrainEncoding::Reference,
            architecture_order: Vec::new(),
            dataset_order: Vec::new(),
        }
    }
}

/// One regression row: categorical labels, raw length and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub architecture: String,
    pub train_dataset: Option<String>,
    pub test_dataset: String,
    pub length_tokens: usize,
    pub response: f64,
}

impl Observation {
    pub fn from_record(record: &SummaryRecord, response: f64) -> Self {
        Self {
            id: record.id.clone(),
            architecture: record.architecture.clone(),
            train_dataset: record.train_dataset.clone(),
            test_dataset: record.test_dataset.clone(),
            length_tokens: record.length_tokens(),
            response,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Column {
    Intercept,
    Length,
    Architecture { label: String },
    Train { label: String },
    Test { label: String },
    Interaction { train: String, test: String },
}

impl Column {
    pub fn name(&self) -> String {
        match self {
            Column::Intercept => "Intercept".into(),
            Column::Length => "Length of Summary".into(),
            Column::Architecture { label } => label.clone(),
            Column::Train { label } => format!("Train {label}"),
            Column::Test { label } => format!("Test {label}"),
            Column::Interaction { train, test } => format!("{train} - {test}"),
        }
    }

    pub fn is_interaction(&self) -> bool {
        matches!(self, Column::Interaction { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub columns: Vec<Column>,
    pub x: DMatrix<f64>,
    pub response: DVector<f64>,
    pub length_mean: f64,
    pub length_sd: f64,
}

impl DesignMatrix {
    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(Column::name).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols()
    }

    /// The same design with every interaction column removed.
    pub fn without_interactions(&self) -> DesignMatrix {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&j| !self.columns[j].is_interaction())
            .collect();
        DesignMatrix {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            x: self.x.select_columns(&keep),
            response: self.response.clone(),
            length_mean: self.length_mean,
            length_sd: self.length_sd,
        }
    }

    /// Non-intercept columns whose entries are all equal.
    pub fn constant_columns(&self) -> Vec<String> {
        (0..self.n_params())
            .filter(|&j| self.columns[j] != Column::Intercept)
            .filter(|&j| {
                let col = self.x.column(j);
                col.iter().all(|&v| v == col[0])
            })
            .map(|j| self.columns[j].name())
            .collect()
    }
}

fn ordered_levels(labels: BTreeSet<&str>, reference: &str, preferred: &[String]) -> Vec<String> {
    let mut out: Vec<String> = preferred
        .iter()
        .filter(|p| p.as_str() != reference && labels.contains(p.as_str()))
        .cloned()
        .collect();
    for label in labels {
        if label != reference && !out.iter().any(|o| o == label) {
            out.push(label.to_string());
        }
    }
    out
}

/// Assembles the one-hot design: intercept, z-scored length, non-reference
/// architecture, train and test indicators, then (optionally) every
/// non-reference train x test interaction in train-major order.
pub fn build_design_matrix(
    observations: &[Observation],
    spec: &RegressionSpec,
) -> Result<DesignMatrix, RegressionError> {
    if observations.is_empty() {
        return Err(RegressionError::Empty);
    }
    let is_human = |o: &Observation| o.architecture == spec.reference_architecture;
    let train_of = |o: &Observation| -> Result<Option<String>, RegressionError> {
        if is_human(o) {
            return Ok(match spec.human_train_encoding {
                HumanTrainEncoding::Reference => None,
                HumanTrainEncoding::SameAsTest => Some(o.test_dataset.clone()),
            });
        }
        match &o.train_dataset {
            Some(t) => Ok(Some(t.clone())),
            None => Err(RegressionError::MissingTrainDataset(o.id.clone())),
        }
    };
    let trains: Vec<Option<String>> = observations
        .iter()
        .map(train_of)
        .collect::<Result<_, _>>()?;

    let arch_labels: BTreeSet<&str> = observations.iter().map(|o| o.architecture.as_str()).collect();
    let train_labels: BTreeSet<&str> = trains.iter().flatten().map(String::as_str).collect();
    let test_labels: BTreeSet<&str> = observations.iter().map(|o| o.test_dataset.as_str()).collect();

    let archs = ordered_levels(
        arch_labels.clone(),
        &spec.reference_architecture,
        &spec.architecture_order,
    );
    let train_levels = ordered_levels(train_labels.clone(), &spec.reference_train, &spec.dataset_order);
    let test_levels = ordered_levels(test_labels.clone(), &spec.reference_test, &spec.dataset_order);

    let mut columns = vec![Column::Intercept, Column::Length];
    columns.extend(archs.iter().map(|l| Column::Architecture { label: l.clone() }));
    columns.extend(train_levels.iter().map(|l| Column::Train { label: l.clone() }));
    columns.extend(test_levels.iter().map(|l| Column::Test { label: l.clone() }));
    if spec.include_interactions {
        for train in &train_levels {
            for test in &test_levels {
                columns.push(Column::Interaction {
                    train: train.clone(),
                    test: test.clone(),
                });
            }
        }
    }

    let n = observations.len();
    let lengths: Vec<f64> = observations.iter().map(|o| o.length_tokens as f64).collect();
    let mean = lengths.iter().sum::<f64>() / n as f64;
    let sd = (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64).sqrt();

    let x = DMatrix::from_fn(n, columns.len(), |i, j| {
        let o = &observations[i];
        let train = trains[i].as_deref();
        let hit = match &columns[j] {
            Column::Intercept => true,
            Column::Length => {
                return if sd > 0.0 { (lengths[i] - mean) / sd } else { 0.0 };
            }
            Column::Architecture { label } => o.architecture == *label,
            Column::Train { label } => train == Some(label.as_str()),
            Column::Test { label } => o.test_dataset == *label,
            Column::Interaction { train: a, test: b } => {
                train == Some(a.as_str()) && o.test_dataset == *b
            }
        };
        if hit {
            1.0
        } else {
            0.0
        }
    });
    let response = DVector::from_iterator(n, observations.iter().map(|o| o.response));
    let design = DesignMatrix {
        columns,
        x,
        response,
        length_mean: mean,
        length_sd: sd,
    };

    // a group observed at a single non-reference level shows up as a
    // constant column and is reported by the fit as rank deficiency
    let references = [
        ("architecture", &spec.reference_architecture, &arch_labels),
        ("train", &spec.reference_train, &train_labels),
        ("test", &spec.reference_test, &test_labels),
    ];
    for (group, label, present) in references {
        if present.len() >= 2 && !present.contains(label.as_str()) {
            return Err(RegressionError::UnknownReference {
                group,
                label: label.clone(),
            });
        }
    }
    let constant = design.constant_columns();
    if !constant.is_empty() {
        log::warn!("constant design columns: {}", constant.join(", "));
    }
    Ok(design)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub rss: f64,
    pub n_rows: usize,
    pub n_params: usize,
    pub degrees_of_freedom: usize,
    pub confidence_level: f64,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Tolerance on `|R_jj| / ||x_j||` below which column j is treated as lying
/// in the span of the columns before it.
const RANK_TOL: f64 = 1e-9;

/// Ordinary least squares through a Householder QR factorization.
pub fn ols_fit(design: &DesignMatrix, confidence_level: f64) -> Result<RegressionFit, RegressionError> {
    let (n, p) = (design.n_rows(), design.n_params());
    if n <= p {
        return Err(RegressionError::InsufficientRows { rows: n, params: p });
    }
    let qr = design.x.clone().qr();
    let r = qr.r();
    let constant = design.constant_columns();
    let deficient: Vec<String> = (0..p)
        .filter(|&j| {
            let norm = design.x.column(j).norm();
            norm == 0.0
                || r[(j, j)].abs() <= RANK_TOL * norm
                || constant.contains(&design.columns[j].name())
        })
        .map(|j| design.columns[j].name())
        .collect();
    if !deficient.is_empty() {
        return Err(RegressionError::RankDeficient(deficient));
    }

    let mut qty = design.response.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| RegressionError::RankDeficient(design.column_names()))?;
    let residuals = &design.response - &design.x * &beta;
    let rss = residuals.norm_squared();

    let df = n - p;
    let sigma2 = rss / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| RegressionError::RankDeficient(design.column_names()))?;
    let crit = special::t_two_sided_critical(1.0 - confidence_level, df as f64)?;

    let mut fit = RegressionFit {
        column_names: design.column_names(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: Vec::with_capacity(p),
        t_statistics: Vec::with_capacity(p),
        p_values: Vec::with_capacity(p),
        ci_lower: Vec::with_capacity(p),
        ci_upper: Vec::with_capacity(p),
        rss,
        n_rows: n,
        n_params: p,
        degrees_of_freedom: df,
        confidence_level,
        residuals: residuals.iter().copied().collect(),
    };
    for j in 0..p {
        let coef = beta[j];
        let se = (sigma2 * r_inv.row(j).norm_squared()).sqrt();
        let t = if se > 0.0 {
            coef / se
        } else if coef == 0.0 {
            0.0
        } else {
            coef.signum() * f64::INFINITY
        };
        fit.standard_errors.push(se);
        fit.t_statistics.push(t);
        fit.p_values.push(special::t_two_sided_p(t, df as f64)?);
        fit.ci_lower.push(coef - crit * se);
        fit.ci_upper.push(coef + crit * se);
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrTestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub reject: bool,
}

/// Gaussian-likelihood ratio test `n ln(RSS_nested / RSS_full)` against a
/// chi-square with one degree of freedom per dropped column.
pub fn likelihood_ratio_test(
    full: &RegressionFit,
    nested: &RegressionFit,
    critical_value: f64,
) -> Result<LrTestResult, RegressionError> {
    if full.n_rows != nested.n_rows {
        return Err(RegressionError::RowMismatch {
            full: full.n_rows,
            nested: nested.n_rows,
        });
    }
    let full_cols: BTreeSet<&str> = full.column_names.iter().map(String::as_str).collect();
    let nested_cols: BTreeSet<&str> = nested.column_names.iter().map(String::as_str).collect();
    if !nested_cols.is_subset(&full_cols) || nested_cols.len() >= full_cols.len() {
        return Err(RegressionError::NotNested);
    }
    let df = full.n_params - nested.n_params;
    let ratio = nested.rss / full.rss;
    // rss_full <= rss_nested holds up to rounding
    let statistic = if ratio.is_nan() {
        0.0
    } else {
        (full.n_rows as f64 * ratio.ln()).max(0.0)
    };
    let p_value = special::chi_square_sf(statistic, df as f64)?;
    Ok(LrTestResult {
        statistic,
        df,
        p_value,
        reject: p_value < critical_value,
    })
}

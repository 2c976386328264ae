//! Importance (usefulness) source: the level set and the Markov chain that
//! drives the meta-value attached to each update.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const ROW_SUM_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-9;

/// Ordered set of importance levels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ImportanceLevels(Vec<f64>);

impl ImportanceLevels {
    /// Levels `i / (count - 1)` for `i = 0..count`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid(format!(
                "uniform importance levels need count >= 2, got {count}"
            )));
        }
        let denom = (count - 1) as f64;
        Ok(Self((0..count).map(|i| i as f64 / denom).collect()))
    }

    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("importance level set is empty"));
        }
        for (i, &v) in levels.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("level {i} = {v} outside [0, 1]")));
            }
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "importance levels must be strictly increasing",
            ));
        }
        Ok(Self(levels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Index of the level equal to `v` within `1e-9`.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.0.iter().position(|&x| (x - v).abs() <= 1e-9)
    }

    /// Two-decimal rendering used in reports ("0.11", "0.56", ...).
    pub fn display(&self, index: usize) -> String {
        format_level(self.0[index])
    }
}

pub(crate) fn format_level(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".to_string()
    } else {
        s.to_string()
    }
}

impl TryFrom<Vec<f64>> for ImportanceLevels {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ImportanceLevels> for Vec<f64> {
    fn from(l: ImportanceLevels) -> Self {
        l.0
    }
}

/// A single problem found by [`ImportanceChain::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChainViolation {
    Shape { rows: usize, expected: usize },
    Range { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

/// Finite importance levels plus a row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceChain {
    levels: ImportanceLevels,
    matrix: Vec<Vec<f64>>,
    #[serde(skip)]
    cumulative: Vec<Vec<f64>>,
}

impl ImportanceChain {
    /// Builds a chain and rejects it if [`validate`](Self::validate) reports anything.
    pub fn new(levels: ImportanceLevels, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let violations = Self::check(levels.len(), &matrix);
        if let Some(first) = violations.first() {
            return Err(Error::invalid(format!(
                "invalid transition matrix ({} violations, first: {first:?})",
                violations.len()
            )));
        }
        Ok(Self::from_parts(levels, matrix))
    }

    /// Builds without validation; useful for reporting on a bad matrix.
    pub fn new_unchecked(levels: ImportanceLevels, matrix: Vec<Vec<f64>>) -> Self {
        Self::from_parts(levels, matrix)
    }

    fn from_parts(levels: ImportanceLevels, matrix: Vec<Vec<f64>>) -> Self {
        let cumulative = matrix
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, &p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self {
            levels,
            matrix,
            cumulative,
        }
    }

    /// Every transition has probability `1 / |levels|`.
    pub fn uniform(levels: ImportanceLevels) -> Self {
        let k = levels.len();
        let p = 1.0 / k as f64;
        Self::from_parts(levels, vec![vec![p; k]; k])
    }

    pub fn levels(&self) -> &ImportanceLevels {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.matrix[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.matrix[from]
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<ChainViolation>> {
        let v = Self::check(self.levels.len(), &self.matrix);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    fn check(k: usize, matrix: &[Vec<f64>]) -> Vec<ChainViolation> {
        let mut out = Vec::new();
        if matrix.len() != k {
            out.push(ChainViolation::Shape {
                rows: matrix.len(),
                expected: k,
            });
        }
        for (r, row) in matrix.iter().enumerate() {
            if row.len() != k {
                out.push(ChainViolation::Shape {
                    rows: row.len(),
                    expected: k,
                });
                continue;
            }
            for (c, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) || p.is_nan() {
                    out.push(ChainViolation::Range {
                        row: r,
                        col: c,
                        value: p,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL || sum.is_nan() {
                out.push(ChainViolation::RowSum { row: r, sum });
            }
        }
        out
    }

    /// Draws the successor of `current`.
    pub fn sample_next<R: Rng + ?Sized>(&self, current: usize, rng: &mut R) -> Result<usize> {
        if current >= self.len() {
            return Err(Error::invalid(format!(
                "level index {current} out of range 0..{}",
                self.len()
            )));
        }
        Ok(self.next_from_uniform(current, rng.gen::<f64>()))
    }

    /// Inverse-CDF step: successor of `current` for a uniform draw `u`.
    pub(crate) fn next_from_uniform(&self, current: usize, u: f64) -> usize {
        let cdf = &self.cumulative[current];
        // Skip zero-probability tails so round-off never lands on them.
        let last = self.matrix[current]
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(cdf.len() - 1);
        cdf[..last].iter().position(|&c| u < c).unwrap_or(last)
    }

    /// Unique stationary distribution via a dense linear solve.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let k = self.len();
        let p = DMatrix::from_fn(k, k, |i, j| self.matrix[i][j]);
        let a = p.transpose() - DMatrix::<f64>::identity(k, k);
        let dimension = linalg::null_space_dim(&a, RANK_TOL);
        if dimension != 1 {
            return Err(Error::NoUniqueStationary { dimension });
        }
        linalg::stationary_of(&p)
            .map(|v| v.iter().copied().collect())
            .ok_or(Error::NoUniqueStationary { dimension: 0 })
    }
}

/// Chain description as it appears in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainSpec {
    Uniform {
        count: usize,
    },
    Explicit {
        levels: Vec<f64>,
        matrix: Vec<Vec<f64>>,
    },
}

impl ChainSpec {
    pub fn build(&self) -> Result<ImportanceChain> {
        match self {
            ChainSpec::Uniform { count } => {
                Ok(ImportanceChain::uniform(ImportanceLevels::uniform(*count)?))
            }
            ChainSpec::Explicit { levels, matrix } => {
                ImportanceChain::new(ImportanceLevels::new(levels.clone())?, matrix.clone())
            }
        }
    }

    /// Parses and builds a chain from its JSON form.
    pub fn parse_json(text: &str) -> Result<ImportanceChain> {
        let spec: ChainSpec =
            serde_json::from_str(text).map_err(|e| Error::config("chain", e.to_string()))?;
        spec.build()
            .map_err(|e| Error::config("chain", e.to_string()))
    }
}

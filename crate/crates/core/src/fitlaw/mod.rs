//! Regression of PID-family control laws on trajectory data.
//!
//! The model is `a_k = kp e_k + ki S_k + kd de_k` with `e_k = p* - p_k`,
//! `de_k = v* - v_k` and `S_k` the plain running sum of `e` up to and
//! including sample `k`. Because that sum carries no `dt` factor, a fitted
//! `ki` equals the continuous-time `ki` times the sample interval. No bias
//! column is ever added.

mod design;
mod metrics;
mod ridge;

pub use design::{build_design, DesignMatrix};
pub use metrics::{aggregate, r_squared, rms_error, Aggregate};
pub use ridge::ridge_solve;

use std::fmt;
use std::str::FromStr;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::segment::{SegmentError, Segmentation};
use crate::trialdata::{reference_state, ReferenceState, Trial, TrialError};

/// Largest error magnitude accepted by the exponential metric.
pub const EXP_ERROR_LIMIT: f64 = 50.0;

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("invalid control law: {0}")]
    InvalidSpec(String),
    #[error("non-finite regressor: {0}")]
    NonFinite(String),
    #[error("singular system: lambda is 0 and the design is rank deficient")]
    SingularSystem,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("target has zero variance")]
    DegenerateTarget,
    #[error("phase {phase} has {n} samples for {columns} columns")]
    PhaseTooShort {
        phase: usize,
        n: usize,
        columns: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    P,
    I,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Linear,
    Polynomial,
    Exponential,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Linear => "linear",
            Metric::Polynomial => "polynomial",
            Metric::Exponential => "exponential",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = FitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Metric::Linear),
            "polynomial" | "poly" => Ok(Metric::Polynomial),
            "exponential" | "exp" => Ok(Metric::Exponential),
            other => Err(FitError::InvalidSpec(format!("unknown metric {other:?}"))),
        }
    }
}

/// Reading of the derivative columns under the polynomial metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyDerivative {
    /// `d/dt e^n = n e^(n-1) de`.
    #[default]
    ChainRule,
    /// `de^n`.
    ErrorRatePowers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLawSpec {
    terms: Vec<Term>,
    pub metric: Metric,
    pub lambda: f64,
    #[serde(default)]
    pub poly_derivative: PolyDerivative,
}

pub const DEFAULT_LAMBDA: f64 = 0.01;

impl ControlLawSpec {
    pub fn new(terms: &[Term], metric: Metric, lambda: f64) -> Result<Self, FitError> {
        let mut terms = terms.to_vec();
        terms.sort();
        terms.dedup();
        let spec = Self {
            terms,
            metric,
            lambda,
            poly_derivative: PolyDerivative::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parses a law name such as `"PD"` or `"pid"`.
    pub fn parse(law: &str, metric: Metric, lambda: f64) -> Result<Self, FitError> {
        let terms = law
            .trim()
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'P' => Ok(Term::P),
                'I' => Ok(Term::I),
                'D' => Ok(Term::D),
                _ => Err(FitError::InvalidSpec(format!("unknown law {law:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(&terms, metric, lambda)
    }

    pub fn with_poly_derivative(mut self, mode: PolyDerivative) -> Self {
        self.poly_derivative = mode;
        self
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.terms.is_empty() {
            return Err(FitError::InvalidSpec("no terms selected".into()));
        }
        if self.metric != Metric::Linear && self.has(Term::I) {
            return Err(FitError::InvalidSpec(format!(
                "the {} metric is defined for P and D terms only",
                self.metric
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(FitError::InvalidSpec(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn has(&self, term: Term) -> bool {
        self.terms.contains(&term)
    }

    /// Law name, e.g. `"PID"`.
    pub fn law(&self) -> String {
        self.terms
            .iter()
            .map(|t| match t {
                Term::P => 'P',
                Term::I => 'I',
                Term::D => 'D',
            })
            .collect()
    }

    /// Law and metric, e.g. `"PD/polynomial"`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.law(), self.metric)
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![];
        for term in &self.terms {
            let prefix = match term {
                Term::P => "kp",
                Term::I => "ki",
                Term::D => "kd",
            };
            match self.metric {
                Metric::Linear => names.push(prefix.to_string()),
                Metric::Polynomial => {
                    names.extend([7, 5, 3, 1].iter().map(|n| format!("{prefix}_e{n}")))
                }
                Metric::Exponential => names.push(format!("{prefix}_exp")),
            }
        }
        names
    }
}

/// Named coefficients in column order; serialised as a JSON object.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains(pub Vec<(String, f64)>);

impl Gains {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|(_, v)| *v).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }
}

impl Serialize for Gains {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Gains {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Ordered;

        impl<'de> Visitor<'de> for Ordered {
            type Value = Gains;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of coefficient names to numbers")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Gains, A::Error> {
                let mut out = Vec::with_capacity(map.size_hint().unwrap_or(0));
                while let Some(entry) = map.next_entry::<String, f64>()? {
                    out.push(entry);
                }
                Ok(Gains(out))
            }
        }

        deserializer.deserialize_map(Ordered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Mass-normalised coefficients.
    pub gains: Gains,
    pub rms: f64,
    pub r2: f64,
    pub n_samples: usize,
    pub reference: ReferenceState,
    pub warnings: Vec<String>,
}

fn negative_gain_warnings(gains: &Gains) -> Vec<String> {
    gains
        .0
        .iter()
        .filter(|(_, v)| *v < 0.0)
        .map(|(n, v)| format!("negative coefficient {n} = {v}"))
        .collect()
}

/// Solves a design and scores the fit on its (unaugmented) rows.
pub fn fit_design(
    design: &DesignMatrix,
    lambda: f64,
    reference: ReferenceState,
) -> Result<FitResult, FitError> {
    let coefficients = ridge_solve(design, lambda)?;
    let predicted = predict(design, &coefficients)?;
    let rms = rms_error(&predicted, design.target())?;
    let r2 = r_squared(&predicted, design.target())?;
    let gains = Gains(
        design
            .column_names()
            .iter()
            .cloned()
            .zip(coefficients)
            .collect(),
    );
    Ok(FitResult {
        warnings: negative_gain_warnings(&gains),
        gains,
        rms,
        r2,
        n_samples: design.n_rows(),
        reference,
    })
}

/// Fits the whole trial with the reference taken from its last sample.
pub fn fit_trial(trial: &Trial, spec: &ControlLawSpec) -> Result<FitResult, FitError> {
    spec.validate()?;
    let reference = reference_state(trial)?;
    let design = build_design(trial, spec, &reference, 0.0)?;
    fit_design(&design, spec.lambda, reference)
}

/// Row-wise dot product of the design with `coefficients`.
pub fn predict(design: &DesignMatrix, coefficients: &[f64]) -> Result<Vec<f64>, FitError> {
    if coefficients.len() != design.n_cols() {
        return Err(FitError::DimensionMismatch {
            expected: design.n_cols(),
            got: coefficients.len(),
        });
    }
    let x = design.matrix();
    Ok((0..design.n_rows())
        .map(|i| {
            (0..design.n_cols())
                .map(|j| x[(i, j)] * coefficients[j])
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub label: String,
    pub start: usize,
    pub end: usize,
    #[serde(flatten)]
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub phases: Vec<PhaseFit>,
    pub aggregate: Aggregate,
}

impl SegmentFit {
    pub fn warnings(&self) -> Vec<String> {
        self.phases
            .iter()
            .flat_map(|p| {
                p.fit
                    .warnings
                    .iter()
                    .map(move |w| format!("{}: {w}", p.label))
            })
            .collect()
    }
}

/// Fits every phase independently. The integral column of a phase starts
/// from the error accumulated over all earlier samples, and every phase uses
/// the whole trial's last sample as reference.
pub fn fit_segments(
    trial: &Trial,
    seg: &Segmentation,
    spec: &ControlLawSpec,
) -> Result<SegmentFit, FitError> {
    spec.validate()?;
    let reference = reference_state(trial)?;
    let ranges = seg.phase_ranges(trial.len())?;
    let columns = spec.column_names().len();
    let e: Vec<f64> = trial
        .position()
        .iter()
        .map(|p| reference.p_star - p)
        .collect();

    let mut phases = Vec::with_capacity(ranges.len());
    let mut accumulated = 0.0;
    for (i, (&(start, end), label)) in ranges.iter().zip(&seg.phase_labels).enumerate() {
        let n = end - start;
        if n < columns {
            return Err(FitError::PhaseTooShort {
                phase: i,
                n,
                columns,
            });
        }
        let part = trial.slice(start, end)?;
        let design = build_design(&part, spec, &reference, accumulated)?;
        let fit = fit_design(&design, spec.lambda, reference)?;
        accumulated += e[start..end].iter().sum::<f64>();
        phases.push(PhaseFit {
            label: label.clone(),
            start,
            end,
            fit,
        });
    }
    let parts: Vec<(usize, f64, f64)> = phases
        .iter()
        .map(|p| (p.fit.n_samples, p.fit.rms, p.fit.r2))
        .collect();
    Ok(SegmentFit {
        aggregate: aggregate(&parts)?,
        phases,
    })
}

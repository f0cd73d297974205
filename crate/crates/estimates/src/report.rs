use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Comparisons allow the empirical value to exceed the bound by this many standard errors.
pub const DEFAULT_SE_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Empirical,
    AnalyticBound,
    Fitted,
    Parameter,
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub label: String,
    #[serde(with = "float")]
    pub value: f64,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

/// One asserted inequality `empirical ≤ bound + k·se` (or `≥ bound − k·se`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label: String,
    #[serde(with = "float")]
    pub empirical: f64,
    pub standard_error: f64,
    pub relation: Relation,
    #[serde(with = "float")]
    pub bound: f64,
    pub se_multiplier: f64,
    #[serde(with = "float")]
    pub margin: f64,
    pub holds: bool,
}

impl Comparison {
    pub fn new(label: impl Into<String>, empirical: f64, se: f64, relation: Relation, bound: f64, k: f64) -> Self {
        let margin = match relation {
            Relation::AtMost => bound + k * se - empirical,
            Relation::AtLeast => empirical + k * se - bound,
        };
        Self {
            label: label.into(),
            empirical,
            standard_error: se,
            relation,
            bound,
            se_multiplier: k,
            margin,
            holds: margin >= 0.0,
        }
    }

    pub fn at_most(label: impl Into<String>, empirical: f64, se: f64, bound: f64) -> Self {
        Self::new(label, empirical, se, Relation::AtMost, bound, DEFAULT_SE_MULTIPLIER)
    }

    pub fn at_least(label: impl Into<String>, empirical: f64, se: f64, bound: f64) -> Self {
        Self::new(label, empirical, se, Relation::AtLeast, bound, DEFAULT_SE_MULTIPLIER)
    }

    /// Re-derives `holds` from the stored numbers.
    pub fn recompute(&self) -> bool {
        Self::new("", self.empirical, self.standard_error, self.relation, self.bound, self.se_multiplier).holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    BoundRespected,
    BoundViolated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::BoundRespected => "bound-respected",
            Verdict::BoundViolated => "bound-violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub theorem_ref: String,
    pub parameter_snapshot: Value,
    pub sample_count: usize,
    pub quantities: Vec<Quantity>,
    pub comparisons: Vec<Comparison>,
    /// Smallest comparison margin; positive means every comparison holds with room.
    #[serde(with = "float")]
    pub margin: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconclusive_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str, theorem_ref: &str, parameter_snapshot: Value, sample_count: usize) -> Self {
        Self {
            name: name.into(),
            theorem_ref: theorem_ref.into(),
            parameter_snapshot,
            sample_count,
            quantities: Vec::new(),
            comparisons: Vec::new(),
            margin: f64::INFINITY,
            verdict: Verdict::BoundRespected,
            inconclusive_reason: None,
            notes: Vec::new(),
        }
    }

    pub fn quantity(&mut self, label: impl Into<String>, value: f64, provenance: Provenance, se: Option<f64>) {
        self.quantities.push(Quantity { label: label.into(), value, provenance, standard_error: se });
    }

    pub fn empirical(&mut self, label: impl Into<String>, value: f64, se: f64) {
        self.quantity(label, value, Provenance::Empirical, Some(se));
    }

    pub fn bound(&mut self, label: impl Into<String>, value: f64) {
        self.quantity(label, value, Provenance::AnalyticBound, None);
    }

    pub fn parameter(&mut self, label: impl Into<String>, value: f64) {
        self.quantity(label, value, Provenance::Parameter, None);
    }

    pub fn compare(&mut self, c: Comparison) {
        self.comparisons.push(c);
        self.refresh();
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Marks the report inconclusive; the first reason is kept.
    pub fn inconclusive(&mut self, reason: impl Into<String>) {
        if self.inconclusive_reason.is_none() {
            self.inconclusive_reason = Some(reason.into());
        }
        self.refresh();
    }

    pub fn get(&self, label: &str) -> Option<&Quantity> {
        self.quantities.iter().find(|q| q.label == label)
    }

    pub fn comparison(&self, label: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.label == label)
    }

    /// Verdict implied by the stored comparisons and inconclusive reason.
    pub fn recompute_verdict(&self) -> Verdict {
        if self.inconclusive_reason.is_some() {
            Verdict::Inconclusive
        } else if self.comparisons.iter().all(Comparison::recompute) {
            Verdict::BoundRespected
        } else {
            Verdict::BoundViolated
        }
    }

    fn refresh(&mut self) {
        self.margin = self.comparisons.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        self.verdict = self.recompute_verdict();
    }

    /// One flat row per comparison (or a single row when there are none).
    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let row = |c: Option<&Comparison>| SummaryRow {
            experiment: self.name.clone(),
            verdict: self.verdict.as_str().into(),
            sample_count: self.sample_count,
            comparison: c.map(|c| c.label.clone()).unwrap_or_default(),
            empirical: c.map(|c| c.empirical),
            standard_error: c.map(|c| c.standard_error),
            relation: c.map(|c| match c.relation {
                Relation::AtMost => "at-most".into(),
                Relation::AtLeast => "at-least".into(),
            }),
            bound: c.map(|c| c.bound),
            se_multiplier: c.map(|c| c.se_multiplier),
            margin: c.map(|c| c.margin),
            holds: c.map(|c| c.holds),
        };
        if self.comparisons.is_empty() {
            vec![row(None)]
        } else {
            self.comparisons.iter().map(|c| row(Some(c))).collect()
        }
    }
}

/// Flat CSV record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub verdict: String,
    pub sample_count: usize,
    pub comparison: String,
    pub empirical: Option<f64>,
    pub standard_error: Option<f64>,
    pub relation: Option<String>,
    pub bound: Option<f64>,
    pub se_multiplier: Option<f64>,
    pub margin: Option<f64>,
    pub holds: Option<bool>,
}

/// Non-finite floats are written as the strings "inf", "-inf" and "nan"
/// because JSON has no literal for them.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("unexpected float literal {other:?}"))),
            },
        }
    }
}

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// A single hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Choice(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Choice(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Choice(s) => f.write_str(s),
        }
    }
}

/// A point in a search space, keyed by dimension name.
pub type Point = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamSpec {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    Int { lo: i64, hi: i64, log: bool },
    Categorical { choices: Vec<String> },
    /// `dim` independent uniform(0, 1) coordinates named `name[i]`, read
    /// back through [`SearchSpace::simplex_weights`].
    Simplex { dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub spec: ParamSpec,
}

/// One scalar coordinate after simplex expansion.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dimension {
    pub name: String,
    pub kind: DimKind,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum DimKind {
    /// Continuous in an internal coordinate: identity or log.
    Continuous { lo: f64, hi: f64, log: bool },
    Integer { lo: i64, hi: i64, log: bool },
    Categorical { choices: Vec<String> },
}

impl DimKind {
    /// Bounds of the internal continuous coordinate.
    pub fn internal_bounds(&self) -> (f64, f64) {
        match *self {
            DimKind::Continuous { lo, hi, log } => {
                if log {
                    (lo.ln(), hi.ln())
                } else {
                    (lo, hi)
                }
            }
            DimKind::Integer { lo, hi, log } => {
                let (a, b) = (lo as f64 - 0.5, hi as f64 + 0.5);
                if log {
                    (a.ln(), b.ln())
                } else {
                    (a, b)
                }
            }
            DimKind::Categorical { ref choices } => (0.0, choices.len() as f64),
        }
    }

    pub fn to_internal(&self, v: &ParamValue) -> Option<f64> {
        match self {
            DimKind::Continuous { log, .. } | DimKind::Integer { log, .. } => {
                let x = v.as_f64()?;
                Some(if *log { x.ln() } else { x })
            }
            DimKind::Categorical { choices } => match v {
                ParamValue::Choice(s) => choices.iter().position(|c| c == s).map(|i| i as f64),
                _ => None,
            },
        }
    }

    pub fn from_internal(&self, x: f64) -> ParamValue {
        match *self {
            DimKind::Continuous { lo, hi, log } => {
                let v = if log { x.exp() } else { x };
                ParamValue::Real(v.clamp(lo, hi))
            }
            DimKind::Integer { lo, hi, log } => {
                let v = if log { x.exp() } else { x };
                ParamValue::Int((v.round() as i64).clamp(lo, hi))
            }
            DimKind::Categorical { ref choices } => {
                let i = (x as usize).min(choices.len() - 1);
                ParamValue::Choice(choices[i].clone())
            }
        }
    }

    pub fn validate(&self, v: &ParamValue) -> bool {
        match (self, v) {
            (DimKind::Continuous { lo, hi, .. }, ParamValue::Real(x)) => {
                x.is_finite() && *x >= *lo && *x <= *hi
            }
            (DimKind::Continuous { lo, hi, .. }, ParamValue::Int(x)) => {
                (*x as f64) >= *lo && (*x as f64) <= *hi
            }
            (DimKind::Integer { lo, hi, .. }, ParamValue::Int(x)) => x >= lo && x <= hi,
            (DimKind::Categorical { choices }, ParamValue::Choice(s)) => choices.contains(s),
            _ => false,
        }
    }

    pub fn sample_prior(&self, rng: &mut Rng) -> ParamValue {
        match self {
            DimKind::Categorical { choices } => {
                ParamValue::Choice(choices[rng.random_range(0..choices.len())].clone())
            }
            _ => {
                let (a, b) = self.internal_bounds();
                self.from_internal(a + rng.random::<f64>() * (b - a))
            }
        }
    }
}

/// Ordered hyperparameter domains.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    params: Vec<Param>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn add(mut self, name: impl Into<String>, spec: ParamSpec) -> Result<Self> {
        let name = name.into();
        let bad = |m: &str| Err(Error::HyperParam(format!("parameter `{name}`: {m}")));
        match &spec {
            ParamSpec::Uniform { lo, hi } if !(lo < hi) => return bad("lo must be < hi"),
            ParamSpec::LogUniform { lo, hi } if !(*lo > 0.0 && lo < hi) => {
                return bad("log domain needs 0 < lo < hi")
            }
            ParamSpec::Int { lo, hi, .. } if lo >= hi => return bad("lo must be < hi"),
            ParamSpec::Int { lo, log: true, .. } if *lo < 1 => return bad("log integer needs lo >= 1"),
            ParamSpec::Categorical { choices } if choices.is_empty() => return bad("no choices"),
            ParamSpec::Simplex { dim } if *dim < 2 => return bad("simplex dim must be >= 2"),
            _ => {}
        }
        if self.params.iter().any(|p| p.name == name) {
            return bad("declared twice");
        }
        self.params.push(Param { name, spec });
        Ok(self)
    }

    pub fn uniform(self, name: &str, lo: f64, hi: f64) -> Result<Self> {
        self.add(name, ParamSpec::Uniform { lo, hi })
    }

    pub fn log_uniform(self, name: &str, lo: f64, hi: f64) -> Result<Self> {
        self.add(name, ParamSpec::LogUniform { lo, hi })
    }

    pub fn int(self, name: &str, lo: i64, hi: i64, log: bool) -> Result<Self> {
        self.add(name, ParamSpec::Int { lo, hi, log })
    }

    pub fn categorical<S: Into<String>>(self, name: &str, choices: impl IntoIterator<Item = S>) -> Result<Self> {
        self.add(
            name,
            ParamSpec::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn simplex(self, name: &str, dim: usize) -> Result<Self> {
        self.add(name, ParamSpec::Simplex { dim })
    }

    pub fn simplex_coordinate(name: &str, i: usize) -> String {
        format!("{name}[{i}]")
    }

    pub(crate) fn dimensions(&self) -> Vec<Dimension> {
        let mut dims = Vec::new();
        for p in &self.params {
            match &p.spec {
                ParamSpec::Uniform { lo, hi } => dims.push(Dimension {
                    name: p.name.clone(),
                    kind: DimKind::Continuous { lo: *lo, hi: *hi, log: false },
                }),
                ParamSpec::LogUniform { lo, hi } => dims.push(Dimension {
                    name: p.name.clone(),
                    kind: DimKind::Continuous { lo: *lo, hi: *hi, log: true },
                }),
                ParamSpec::Int { lo, hi, log } => dims.push(Dimension {
                    name: p.name.clone(),
                    kind: DimKind::Integer { lo: *lo, hi: *hi, log: *log },
                }),
                ParamSpec::Categorical { choices } => dims.push(Dimension {
                    name: p.name.clone(),
                    kind: DimKind::Categorical { choices: choices.clone() },
                }),
                ParamSpec::Simplex { dim } => {
                    for i in 0..*dim {
                        dims.push(Dimension {
                            name: Self::simplex_coordinate(&p.name, i),
                            kind: DimKind::Continuous { lo: 0.0, hi: 1.0, log: false },
                        });
                    }
                }
            }
        }
        dims
    }

    /// Checks that `point` assigns a valid value to exactly the space's dimensions.
    pub fn validate(&self, point: &Point) -> Result<()> {
        let dims = self.dimensions();
        for d in &dims {
            let v = point
                .get(&d.name)
                .ok_or_else(|| Error::HyperParam(format!("missing value for `{}`", d.name)))?;
            if !d.kind.validate(v) {
                return Err(Error::HyperParam(format!("value {v} out of domain for `{}`", d.name)));
            }
        }
        if let Some(extra) = point.keys().find(|k| !dims.iter().any(|d| &d.name == *k)) {
            return Err(Error::HyperParam(format!("unknown parameter `{extra}`")));
        }
        Ok(())
    }

    pub fn sample_prior(&self, rng: &mut Rng) -> Point {
        self.dimensions()
            .into_iter()
            .map(|d| {
                let v = d.kind.sample_prior(rng);
                (d.name, v)
            })
            .collect()
    }

    /// Normalised weights `a_i / sum_j a_j` of simplex parameter `name`.
    /// An all-zero raw vector maps to uniform weights.
    pub fn simplex_weights(&self, point: &Point, name: &str) -> Result<Vec<f64>> {
        let dim = self
            .params
            .iter()
            .find_map(|p| match (&p.spec, p.name == name) {
                (ParamSpec::Simplex { dim }, true) => Some(*dim),
                _ => None,
            })
            .ok_or_else(|| Error::HyperParam(format!("no simplex parameter `{name}`")))?;
        let raw: Vec<f64> = (0..dim)
            .map(|i| {
                point
                    .get(&Self::simplex_coordinate(name, i))
                    .and_then(ParamValue::as_f64)
                    .ok_or_else(|| Error::HyperParam(format!("missing simplex coordinate {i}")))
            })
            .collect::<Result<_>>()?;
        Ok(normalize_simplex(&raw))
    }
}

/// `a_i / sum_j a_j`, clamping negatives to zero; uniform when the sum is zero.
pub fn normalize_simplex(raw: &[f64]) -> Vec<f64> {
    let clean: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clean.iter().sum();
    if total > 0.0 && total.is_finite() {
        clean.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

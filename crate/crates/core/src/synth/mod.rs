//! Synthesizer family: a uniform fit/sample interface over four statistical
//! generators, each with a declared hyperparameter space.

pub mod copula;
pub mod gmm;
pub mod histogram;
pub mod joint;
pub mod kde;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::seed;
use crate::tpe::{ParamValue, Point, SearchSpace};

use copula::CopulaModel;
use histogram::HistogramModel;
use joint::JointModel;
use kde::KdeModel;

pub const MODEL_FORMAT: &str = "goatmix-synthesizer";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    GaussianCopula,
    JointMixture,
    Histogram,
    #[serde(rename = "KDEPerturb")]
    KdePerturb,
}

impl Method {
    /// Fixed method order used for mixture weights.
    pub const ALL: [Method; 4] = [
        Method::GaussianCopula,
        Method::JointMixture,
        Method::Histogram,
        Method::KdePerturb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GaussianCopula => "GaussianCopula",
            Method::JointMixture => "JointMixture",
            Method::Histogram => "Histogram",
            Method::KdePerturb => "KDEPerturb",
        }
    }

    pub fn index(self) -> usize {
        Method::ALL.iter().position(|&m| m == self).unwrap()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Hyperparameter assignment for one method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperParams(pub Point);

impl HyperParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.get(name)
    }

    fn int(&self, name: &str) -> i64 {
        match self.0.get(name) {
            Some(ParamValue::Int(v)) => *v,
            Some(ParamValue::Real(v)) => v.round() as i64,
            _ => unreachable!("validated parameter `{name}`"),
        }
    }

    fn real(&self, name: &str) -> f64 {
        self.0
            .get(name)
            .and_then(ParamValue::as_f64)
            .unwrap_or_else(|| unreachable!("validated parameter `{name}`"))
    }

    fn choice_int(&self, name: &str) -> i64 {
        match self.0.get(name) {
            Some(ParamValue::Choice(s)) => s.parse().expect("numeric choice"),
            Some(ParamValue::Int(v)) => *v,
            _ => unreachable!("validated parameter `{name}`"),
        }
    }
}

impl From<Point> for HyperParams {
    fn from(p: Point) -> Self {
        Self(p)
    }
}

/// Tunable domains of `method`. With `freeze_copula`, the Gaussian copula
/// has no tunable parameters and always selects its marginal component
/// counts by BIC.
pub fn search_space(method: Method, freeze_copula: bool) -> SearchSpace {
    let space = SearchSpace::new();
    let built = match method {
        Method::GaussianCopula if freeze_copula => Ok(space),
        Method::GaussianCopula => space.int("max_components", 1, 5, false),
        Method::JointMixture => space
            .int("n_components", 1, 30, true)
            .and_then(|s| s.log_uniform("covariance_ridge", 1e-6, 1e-1))
            .and_then(|s| s.categorical("em_iterations", ["50", "100", "200"])),
        Method::Histogram => space.int("bins", 5, 128, true),
        Method::KdePerturb => space
            .log_uniform("bandwidth_scale", 0.01, 1.0)
            .and_then(|s| s.uniform("flip_prob", 0.0, 0.2)),
    };
    built.expect("static search space")
}

/// Looks up a method by name; fails for anything outside the family.
pub fn search_space_by_name(name: &str, freeze_copula: bool) -> Result<SearchSpace> {
    Ok(search_space(name.parse()?, freeze_copula))
}

/// The untuned configuration of each method.
pub fn default_params(method: Method) -> HyperParams {
    let p = HyperParams::new();
    match method {
        Method::GaussianCopula => p.with("max_components", ParamValue::Int(5)),
        Method::JointMixture => p
            .with("n_components", ParamValue::Int(20))
            .with("covariance_ridge", ParamValue::Real(1e-3))
            .with("em_iterations", ParamValue::Choice("100".into())),
        Method::Histogram => p.with("bins", ParamValue::Int(32)),
        Method::KdePerturb => p
            .with("bandwidth_scale", ParamValue::Real(0.1))
            .with("flip_prob", ParamValue::Real(0.05)),
    }
}

/// Fills unspecified parameters from the defaults and validates the result
/// against the full (unfrozen) search space.
pub fn resolve_params(method: Method, theta: &HyperParams) -> Result<HyperParams> {
    let mut full = default_params(method);
    for (k, v) in &theta.0 {
        full.0.insert(k.clone(), v.clone());
    }
    search_space(method, false)
        .validate(&full.0)
        .map_err(|e| Error::HyperParam(format!("{method}: {e}")))?;
    Ok(full)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Also fit one sub-model per label class for conditional sampling.
    pub conditional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Copula(CopulaModel),
    Joint(JointModel),
    Histogram(HistogramModel),
    Kde(KdeModel),
}

impl Model {
    fn fit(method: Method, data: &Dataset, theta: &HyperParams, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        match method {
            Method::GaussianCopula => {
                let k = theta.int("max_components") as usize;
                Model::Copula(CopulaModel::fit(data, k, &mut rng))
            }
            Method::JointMixture => Model::Joint(JointModel::fit(
                data,
                theta.int("n_components") as usize,
                theta.real("covariance_ridge"),
                theta.choice_int("em_iterations") as usize,
                &mut rng,
            )),
            Method::Histogram => Model::Histogram(HistogramModel::fit(data, theta.int("bins") as usize)),
            Method::KdePerturb => Model::Kde(KdeModel::fit(
                data,
                theta.real("bandwidth_scale"),
                theta.real("flip_prob"),
            )),
        }
    }

    fn sample(&self, schema: &Schema, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        match self {
            Model::Copula(m) => m.sample(schema, n, &mut rng),
            Model::Joint(m) => m.sample(n, &mut rng),
            Model::Histogram(m) => m.sample(n, &mut rng),
            Model::Kde(m) => m.sample(n, &mut rng),
        }
    }

    fn converged(&self) -> bool {
        match self {
            Model::Copula(m) => m.converged(),
            Model::Joint(m) => m.converged(),
            _ => true,
        }
    }
}

/// A trained synthesizer. Immutable; sampling is a pure function of the
/// requested size and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSynthesizer {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub params: HyperParams,
    pub schema: Arc<Schema>,
    pub seed: u64,
    /// False when some EM fit hit its iteration cap before converging.
    pub converged: bool,
    pub model: Model,
    /// Per-class sub-models, present when fitted with conditional support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_models: Option<Vec<Option<Model>>>,
}

pub fn fit(method: Method, train: &Dataset, theta: &HyperParams, seed: u64) -> Result<FittedSynthesizer> {
    fit_with(method, train, theta, seed, FitOptions::default())
}

pub fn fit_with(
    method: Method,
    train: &Dataset,
    theta: &HyperParams,
    seed: u64,
    opts: FitOptions,
) -> Result<FittedSynthesizer> {
    let params = resolve_params(method, theta)?;
    if train.n_rows() < 2 {
        return Err(Error::data(format!(
            "cannot fit {method} on {} row(s)",
            train.n_rows()
        )));
    }
    let model = Model::fit(method, train, &params, seed);
    let mut converged = model.converged();
    let class_models = if opts.conditional {
        let subs: Vec<Option<Model>> = (0..2u8)
            .map(|c| {
                let part = train.filter_class(c);
                (!part.is_empty())
                    .then(|| Model::fit(method, &part, &params, seed::derive_seed(seed, &[c as u64 + 1])))
            })
            .collect();
        converged &= subs.iter().flatten().all(Model::converged);
        Some(subs)
    } else {
        None
    };
    if !converged {
        log::warn!("{method}: EM reached its iteration cap before converging");
    }
    Ok(FittedSynthesizer {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_FORMAT_VERSION,
        method,
        params,
        schema: train.schema_arc().clone(),
        seed,
        converged,
        model,
        class_models,
    })
}

/// Largest-remainder allocation of `n` rows to the given shares: floors
/// first, then one extra row to the largest fractional parts, ties to the
/// lower index.
pub fn largest_remainder(shares: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

impl FittedSynthesizer {
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        if n == 0 {
            return Dataset::empty(self.schema.clone());
        }
        let cells = self.model.sample(&self.schema, n, seed);
        Dataset::from_cells_unchecked(self.schema.clone(), cells)
    }

    /// Samples exactly the largest-remainder allocation of `n` rows per
    /// label class, each class from its own sub-model.
    pub fn sample_conditional(&self, n: usize, class_shares: &BTreeMap<u8, f64>, seed: u64) -> Result<Dataset> {
        let subs = self
            .class_models
            .as_ref()
            .ok_or_else(|| Error::config("synthesizer was fitted without conditional support"))?;
        if let Some(c) = class_shares.keys().find(|&&c| c > 1) {
            return Err(Error::config(format!("unknown label class {c}")));
        }
        let total: f64 = class_shares.values().sum();
        if class_shares.values().any(|&s| !(0.0..=1.0).contains(&s)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("class shares must lie in [0, 1] and sum to 1"));
        }
        let shares = [
            class_shares.get(&0).copied().unwrap_or(0.0),
            class_shares.get(&1).copied().unwrap_or(0.0),
        ];
        let counts = largest_remainder(&shares, n);
        let label = self.schema.label_index();
        let mut cells = Vec::with_capacity(n * self.schema.n_cols());
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let model = subs[c]
                .as_ref()
                .ok_or_else(|| Error::data(format!("label class {c} absent from training data")))?;
            let mut part = model.sample(&self.schema, count, seed::derive_seed(seed, &[c as u64]));
            let w = self.schema.n_cols();
            for row in part.chunks_exact_mut(w) {
                row[label] = c as f64;
            }
            cells.extend(part);
        }
        Ok(Dataset::from_cells_unchecked(self.schema.clone(), cells))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: FittedSynthesizer = serde_json::from_str(text)?;
        if s.format != MODEL_FORMAT || s.version != MODEL_FORMAT_VERSION {
            return Err(Error::config(format!(
                "unsupported model format {} v{}",
                s.format, s.version
            )));
        }
        Ok(s)
    }
}

/// Anything that can emit rows of a fixed schema on demand. Implemented by
/// fitted synthesizers; mixtures are composed over this interface.
pub trait Generator: Send + Sync {
    fn name(&self) -> String;
    fn schema(&self) -> &Arc<Schema>;
    fn generate(&self, n: usize, seed: u64) -> Result<Dataset>;
}

impl Generator for FittedSynthesizer {
    fn name(&self) -> String {
        self.method.to_string()
    }

    fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        Ok(self.sample(n, seed))
    }
}

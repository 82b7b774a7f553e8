//! Scenario configuration files.
//!
//! A scenario is a JSON object; see `scenarios/` for bundled examples. Relative
//! file paths inside a config are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingSet;
use crate::diagnostics::PoleVerdict;
use crate::dynamics::{self, EnsembleState, RhsPath, SimParams};
use crate::error::{LoheError, Result};
use crate::freeflow::{FreeFlowOp, DEFAULT_SSP_TIMES, DEFAULT_SSP_TOL};
use crate::matrix::MatC;
use crate::rng::{operator_rng, random_skew_hermitian};
use crate::tensor::{MultiShape, TensorC, TensorJson, C64};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub(crate) fn default_schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn one() -> usize {
    1
}

fn default_drift_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub id: String,
    pub seed: u64,
    /// Per-axis sizes; empty for scalar (rank-0) members.
    pub dims: Vec<usize>,
    pub n: usize,
    /// Coupling strengths keyed by bitmask string, e.g. `{"00": 1.0, "01": 0.5}`.
    pub couplings: BTreeMap<String, f64>,
    #[serde(default)]
    pub free_flow: FreeFlowSpec,
    /// Present only to give a clear error: heterogeneous free flows are not supported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_flows: Option<serde_json::Value>,
    pub init: InitSpec,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default = "default_drift_tolerance")]
    pub drift_tolerance: f64,
    #[serde(default)]
    pub rhs_path: RhsPath,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub ssp: SspSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

/// A matrix given inline as rows of `[re, im]` pairs, or as a tensor JSON file of shape `[r, c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    File { file: PathBuf },
    Rows(Vec<Vec<[f64; 2]>>),
}

impl MatrixSource {
    pub fn load(&self, base: &Path) -> Result<MatC> {
        match self {
            MatrixSource::File { file } => MatC::from_tensor(&TensorC::load_json(base.join(file))?),
            MatrixSource::Rows(rows) => {
                let rows: Vec<Vec<C64>> = rows
                    .iter()
                    .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
                    .collect();
                MatC::from_rows(&rows)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FreeFlowSpec {
    #[default]
    None,
    Kuramoto {
        nu: f64,
    },
    Sphere {
        omega: MatrixSource,
    },
    Matrix {
        h: MatrixSource,
    },
    /// The matricized `D × D` operator.
    Raw {
        matrix: MatrixSource,
    },
    /// Random skew-Hermitian operator with Frobenius norm `scale·√D`, drawn from the seed.
    Random {
        scale: f64,
    },
}

impl FreeFlowSpec {
    pub fn build(&self, shape: &MultiShape, seed: u64, base: &Path) -> Result<Option<FreeFlowOp>> {
        let op = match self {
            FreeFlowSpec::None => return Ok(None),
            FreeFlowSpec::Kuramoto { nu } => FreeFlowOp::kuramoto(*nu)?,
            FreeFlowSpec::Sphere { omega } => FreeFlowOp::sphere(&omega.load(base)?)?,
            FreeFlowSpec::Matrix { h } => FreeFlowOp::lohe_matrix(&h.load(base)?)?,
            FreeFlowSpec::Raw { matrix } => FreeFlowOp::from_matrix(shape, matrix.load(base)?)?,
            FreeFlowSpec::Random { scale } => FreeFlowOp::from_matrix(
                shape,
                random_skew_hermitian(shape.size(), *scale, &mut operator_rng(seed)),
            )?,
        };
        if op.shape() != shape {
            return Err(LoheError::Config(format!(
                "free_flow acts on shape {:?} but dims is {:?}",
                op.shape().dims(),
                shape.dims()
            )));
        }
        Ok(Some(op))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// I.i.d. uniform on the unit sphere.
    Random,
    /// Normalized `T* + spread·G_j` around a random centre.
    Clustered { spread: f64 },
    /// Clustered with the spread tuned to hit an initial diameter.
    ClusteredDiameter { diameter: f64 },
    /// `n_plus` copies of a random unit tensor followed by copies of its negative.
    Bipolar { n_plus: usize },
    /// JSON array of tensors in the tensor file format.
    File { file: PathBuf },
}

impl InitSpec {
    pub fn build(&self, shape: &MultiShape, n: usize, seed: u64, base: &Path) -> Result<EnsembleState> {
        match self {
            InitSpec::Random => dynamics::random_ensemble(shape, n, seed),
            InitSpec::Clustered { spread } => dynamics::clustered_ensemble(shape, n, *spread, seed),
            InitSpec::ClusteredDiameter { diameter } => {
                dynamics::clustered_with_diameter(shape, n, *diameter, seed)
            }
            InitSpec::Bipolar { n_plus } => dynamics::bipolar_ensemble(shape, n, *n_plus, seed),
            InitSpec::File { file } => {
                let path = base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| LoheError::io(&path, e))?;
                let raw: Vec<TensorJson> = serde_json::from_str(&text)?;
                let tensors = raw
                    .into_iter()
                    .map(TensorC::try_from)
                    .collect::<Result<Vec<_>>>()?;
                if tensors.len() != n {
                    return Err(LoheError::Config(format!(
                        "init file has {} members but n = {n}",
                        tensors.len()
                    )));
                }
                let state = EnsembleState::new(tensors, 0.0)?;
                if state.shape() != shape {
                    return Err(LoheError::ShapeMismatch {
                        expected: shape.dims().to_vec(),
                        found: state.shape().dims().to_vec(),
                    });
                }
                Ok(state)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFitSpec {
    pub t_start: f64,
    /// Pass iff the fitted slope is at most this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksSpec {
    /// Max allowed `|‖T_j(t)‖ − ‖T_j(0)‖|`; skipped when renormalizing.
    pub conservation_tol: f64,
    /// Max allowed increase of V between consecutive records; skipped unless all couplings are non-negative.
    pub monotonicity_tol: f64,
    /// Max allowed dissipation residual over interior records, if set.
    pub dissipation_tol: Option<f64>,
    pub classify: bool,
    /// Required verdict, if set.
    pub expect: Option<PoleVerdict>,
    pub decay_fit: Option<DecayFitSpec>,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            conservation_tol: 1e-8,
            monotonicity_tol: 1e-9,
            dissipation_tol: None,
            classify: true,
            expect: None,
            decay_fit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SspSpec {
    /// Sample times for the consistency residual.
    pub times: Vec<f64>,
    pub tol: f64,
    pub split_verify: bool,
    pub split_horizon: f64,
    pub split_dt: f64,
    pub split_tol: f64,
}

impl Default for SspSpec {
    fn default() -> Self {
        Self {
            times: DEFAULT_SSP_TIMES.to_vec(),
            tol: DEFAULT_SSP_TOL,
            split_verify: false,
            split_horizon: 10.0,
            split_dt: 1e-3,
            split_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// File names inside the output directory; default `<id>.csv` and `<id>.verdict.json`.
    pub csv: Option<String>,
    pub verdict: Option<String>,
}

impl ScenarioConfig {
    /// Parses JSON, reporting the failing field path and line on error.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            LoheError::Config(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LoheError::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            LoheError::Config(msg) => LoheError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(LoheError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.free_flows.is_some() {
            return Err(LoheError::Config(
                "per-member free flows (`free_flows`) are not supported; all members share one `free_flow`"
                    .into(),
            ));
        }
        if self.n == 0 {
            return Err(LoheError::Config("n must be at least 1".into()));
        }
        self.shape()?;
        self.coupling_set()?;
        if self.ssp.times.is_empty() {
            return Err(LoheError::Config("ssp.times must not be empty".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<MultiShape> {
        MultiShape::new(self.dims.clone())
    }

    pub fn coupling_set(&self) -> Result<CouplingSet> {
        CouplingSet::from_key_map(self.dims.len(), &self.couplings)
    }

    pub fn sim_params(&self, base: &Path) -> Result<SimParams> {
        let shape = self.shape()?;
        let mut p = SimParams::new(self.coupling_set()?)
            .with_dt(self.dt)
            .with_horizon(self.horizon)
            .with_stride(self.sample_stride)
            .with_renormalize(self.renormalize)
            .with_drift_tolerance(self.drift_tolerance)
            .with_rhs_path(self.rhs_path);
        if let Some(a) = self.free_flow.build(&shape, self.seed, base)? {
            p = p.with_free_flow(a);
        }
        p.validate(&shape)?;
        Ok(p)
    }

    pub fn initial_state(&self, base: &Path) -> Result<EnsembleState> {
        self.init.build(&self.shape()?, self.n, self.seed, base)
    }

    pub fn csv_name(&self) -> String {
        self.outputs.csv.clone().unwrap_or_else(|| format!("{}.csv", self.id))
    }

    pub fn verdict_name(&self) -> String {
        self.outputs
            .verdict
            .clone()
            .unwrap_or_else(|| format!("{}.verdict.json", self.id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "id": "t",
        "seed": 3,
        "dims": [2, 2],
        "n": 4,
        "couplings": {"00": 1.0, "11": 0.1},
        "init": {"kind": "clustered", "spread": 0.2},
        "dt": 0.01,
        "horizon": 1.0
    }"#;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = ScenarioConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(cfg.schema_version, 1);
        assert_eq!(cfg.sample_stride, 1);
        assert_eq!(cfg.free_flow, FreeFlowSpec::None);
        assert!(cfg.checks.classify);
        let again = ScenarioConfig::from_json_str(&cfg.to_json_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("\"dt\": 0.01", "\"dt\": \"fast\"");
        let err = ScenarioConfig::from_json_str(&bad).unwrap_err().to_string();
        assert!(err.contains("dt") && err.contains("line"), "{err}");

        let bad = MINIMAL.replace("\"spread\": 0.2", "\"sprd\": 0.2");
        let err = ScenarioConfig::from_json_str(&bad).unwrap_err().to_string();
        assert!(err.contains("init"), "{err}");

        let bad = MINIMAL.replace("\"11\"", "\"111\"");
        assert!(ScenarioConfig::from_json_str(&bad).is_err());
    }

    #[test]
    fn rejects_per_member_free_flows() {
        let bad = MINIMAL.replace("\"n\": 4,", "\"n\": 4, \"free_flows\": [{\"kind\": \"none\"}],");
        let err = ScenarioConfig::from_json_str(&bad).unwrap_err().to_string();
        assert!(err.contains("per-member"), "{err}");
    }

    #[test]
    fn builds_free_flows() {
        let base = Path::new(".");
        let shape = MultiShape::new(vec![2, 2]).unwrap();
        let h = FreeFlowSpec::Matrix {
            h: MatrixSource::Rows(vec![vec![[1.0, 0.0], [0.0, 0.5]], vec![[0.0, -0.5], [-1.0, 0.0]]]),
        };
        assert!(h.build(&shape, 0, base).unwrap().is_some());
        let wrong = FreeFlowSpec::Kuramoto { nu: 1.0 };
        assert!(wrong.build(&shape, 0, base).is_err());
        let r1 = FreeFlowSpec::Random { scale: 1.0 }.build(&shape, 5, base).unwrap();
        let r2 = FreeFlowSpec::Random { scale: 1.0 }.build(&shape, 5, base).unwrap();
        assert_eq!(r1, r2);
    }
}

//! Scenario execution, verdicts, and the command implementations behind the `lohe` binary.

pub mod commands;
pub mod config;
pub mod plot;
pub mod sweep;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    classify_poles, decay_rate_fit, ClassifyOptions, PoleAssignment, PoleVerdict,
    CSV_SCHEMA_VERSION,
};
use crate::dynamics::{simulate, Trajectory};
use crate::error::Result;
use crate::freeflow::{ssp_check, SspReport, SSP_DIM_CAP};

pub use config::ScenarioConfig;

pub const VERDICT_SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the worker thread count for sweeps.
pub const THREADS_ENV: &str = "LOHE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl CheckResult {
    /// Passes iff `measured <= threshold`.
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: measured <= threshold,
            measured,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub records: usize,
    pub final_time: f64,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssp: Option<SspReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<PoleAssignment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_slope: Option<f64>,
    pub all_pass: bool,
}

/// Builds the initial state and parameters from `cfg`, integrates, and evaluates the configured checks.
pub fn run_scenario(cfg: &ScenarioConfig, base: &Path) -> Result<(Trajectory, RunVerdict)> {
    let params = cfg.sim_params(base)?;
    let init = cfg.initial_state(base)?;
    let traj = simulate(&init, &params, &mut [])?;
    let mut checks = Vec::new();
    let spec = &cfg.checks;

    if !cfg.renormalize {
        let drift = traj.records.iter().map(|r| r.norm_drift_max).fold(0.0, f64::max);
        checks.push(CheckResult::at_most("conservation", drift, spec.conservation_tol));
    }
    if params.couplings.all_nonnegative() {
        let rise = traj
            .records
            .windows(2)
            .map(|w| w[1].v - w[0].v)
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most("monotonicity", rise, spec.monotonicity_tol));
    }
    if let Some(tol) = spec.dissipation_tol {
        let n = traj.records.len();
        let worst = if n >= 3 {
            traj.records[1..n - 1]
                .iter()
                .map(|r| r.diss_residual)
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        checks.push(CheckResult {
            name: "dissipation_identity".into(),
            pass: worst <= tol,
            measured: worst,
            threshold: tol,
        });
    }

    let classification = if spec.classify {
        let opts = ClassifyOptions::default();
        let pa = classify_poles(&traj.final_state, opts)?;
        if let Some(expected) = spec.expect {
            checks.push(CheckResult {
                name: format!("classification_{}", verdict_name(expected)),
                pass: pa.verdict == expected,
                measured: pa.max_residual(),
                threshold: opts.threshold,
            });
        }
        Some(pa)
    } else {
        None
    };

    let decay_slope = match &spec.decay_fit {
        Some(fit) => {
            let slope = decay_rate_fit(&traj.records, fit.t_start)?;
            if let Some(max) = fit.max_slope {
                checks.push(CheckResult::at_most("decay_rate", slope, max));
            }
            Some(slope)
        }
        None => None,
    };

    let ssp = match &params.free_flow {
        Some(a) if a.shape().size() <= SSP_DIM_CAP && !params.couplings.is_empty() => {
            Some(ssp_check(a, &params.couplings, &cfg.ssp.times, cfg.ssp.tol)?)
        }
        _ => None,
    };

    let all_pass = checks.iter().all(|c| c.pass);
    let verdict = RunVerdict {
        schema_version: VERDICT_SCHEMA_VERSION,
        csv_schema_version: CSV_SCHEMA_VERSION,
        scenario: cfg.id.clone(),
        seed: cfg.seed,
        records: traj.records.len(),
        final_time: traj.final_state.time(),
        checks,
        ssp,
        classification,
        decay_slope,
        all_pass,
    };
    Ok((traj, verdict))
}

/// Thread count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

pub fn verdict_name(v: PoleVerdict) -> &'static str {
    match v {
        PoleVerdict::Complete => "COMPLETE",
        PoleVerdict::Bipolar => "BIPOLAR",
        PoleVerdict::Unresolved => "UNRESOLVED",
    }
}

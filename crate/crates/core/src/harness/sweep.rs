//! One- or two-parameter grids over a base scenario.
//!
//! Axes are given as `name=v1,v2,...` with `name` one of `spread`, `diameter`,
//! `kappa.<key>`, `n`, `seed`, `dt`, `horizon`. The first axis varies slowest.
//! Points run in parallel; rows come back in grid order.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{InitSpec, ScenarioConfig};
use super::{run_scenario, verdict_name};
use crate::coupling::CouplingIndex;
use crate::error::{LoheError, Result};

pub const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum AxisParam {
    Spread,
    Diameter,
    Kappa(CouplingIndex),
    N,
    Seed,
    Dt,
    Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub label: String,
    pub param: AxisParam,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |why: &str| LoheError::Config(format!("axis `{spec}`: {why}"));
        let (name, values) = spec.split_once('=').ok_or_else(|| bad("expected name=v1,v2,..."))?;
        let name = name.trim();
        let param = match name {
            "spread" => AxisParam::Spread,
            "diameter" => AxisParam::Diameter,
            "n" => AxisParam::N,
            "seed" => AxisParam::Seed,
            "dt" => AxisParam::Dt,
            "horizon" => AxisParam::Horizon,
            other => match other.strip_prefix("kappa.") {
                Some(key) => AxisParam::Kappa(CouplingIndex::parse(key)?),
                None => return Err(bad("unknown parameter")),
            },
        };
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("values must be numbers")))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(bad("no values"));
        }
        Ok(Self {
            label: name.to_string(),
            param,
            values,
        })
    }

    fn apply(&self, cfg: &mut ScenarioConfig, value: f64) -> Result<()> {
        let integer = || -> Result<u64> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as u64)
            } else {
                Err(LoheError::Config(format!("{} must be a non-negative integer", self.label)))
            }
        };
        match &self.param {
            AxisParam::Spread => cfg.init = InitSpec::Clustered { spread: value },
            AxisParam::Diameter => cfg.init = InitSpec::ClusteredDiameter { diameter: value },
            AxisParam::Kappa(i) => {
                if i.rank() != cfg.dims.len() {
                    return Err(LoheError::RankMismatch {
                        expected: cfg.dims.len(),
                        found: i.rank(),
                    });
                }
                cfg.couplings.insert(i.key(), value);
            }
            AxisParam::N => cfg.n = integer()? as usize,
            AxisParam::Seed => cfg.seed = integer()?,
            AxisParam::Dt => cfg.dt = value,
            AxisParam::Horizon => cfg.horizon = value,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub outcome: Option<SweepOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub verdict: String,
    pub plus_count: usize,
    pub r_final: f64,
    pub v_final: f64,
    pub dmax_final: f64,
    pub max_pole_residual: f64,
    pub all_pass: bool,
}

pub fn run_sweep(base_cfg: &ScenarioConfig, base_dir: &Path, axes: &[Axis]) -> Result<Vec<SweepRow>> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(LoheError::Config("sweep needs one or two axes".into()));
    }
    let mut grid: Vec<Vec<f64>> = vec![vec![]];
    for axis in axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    let rows = grid
        .into_par_iter()
        .enumerate()
        .map(|(point, values)| {
            let mut cfg = base_cfg.clone();
            let result = axes
                .iter()
                .zip(&values)
                .try_for_each(|(a, &v)| a.apply(&mut cfg, v))
                .and_then(|_| cfg.validate())
                .and_then(|_| run_scenario(&cfg, base_dir));
            let (outcome, error) = match result {
                Ok((traj, verdict)) => {
                    let last = traj.records.last().expect("at least the initial record");
                    let pa = verdict.classification.as_ref();
                    (
                        Some(SweepOutcome {
                            verdict: pa.map_or("-", |p| verdict_name(p.verdict)).to_string(),
                            plus_count: pa.map_or(0, |p| p.plus_count()),
                            r_final: last.r,
                            v_final: last.v,
                            dmax_final: last.dmax,
                            max_pole_residual: pa.map_or(f64::NAN, |p| p.max_residual()),
                            all_pass: verdict.all_pass,
                        }),
                        None,
                    )
                }
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                point,
                values,
                seed: cfg.seed,
                outcome,
                error,
            }
        })
        .collect();
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], axes: &[Axis], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["schema_version".to_string(), "point".to_string()];
    header.extend(axes.iter().map(|a| a.label.clone()));
    header.extend(
        [
            "seed",
            "verdict",
            "plus_count",
            "R_final",
            "V_final",
            "Dmax_final",
            "max_pole_residual",
            "all_pass",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![SWEEP_SCHEMA_VERSION.to_string(), r.point.to_string()];
        rec.extend(r.values.iter().map(f64::to_string));
        rec.push(r.seed.to_string());
        match &r.outcome {
            Some(o) => rec.extend([
                o.verdict.clone(),
                o.plus_count.to_string(),
                o.r_final.to_string(),
                o.v_final.to_string(),
                o.dmax_final.to_string(),
                o.max_pole_residual.to_string(),
                o.all_pass.to_string(),
                String::new(),
            ]),
            None => {
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(r.error.clone().unwrap_or_default());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| LoheError::io("<sweep csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let a = Axis::parse("kappa.01=0.5, 1").unwrap();
        assert_eq!(a.param, AxisParam::Kappa(CouplingIndex::parse("01").unwrap()));
        assert_eq!(a.values, vec![0.5, 1.0]);
        assert!(Axis::parse("temperature=1").is_err());
        assert!(Axis::parse("spread").is_err());
        assert!(Axis::parse("spread=a").is_err());
    }
}

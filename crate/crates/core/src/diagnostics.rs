//! Ensemble functionals, the variance dissipation identity, and pole classification.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingIndex, CouplingSet};
use crate::dynamics::{centroid, EnsembleState};
use crate::error::{LoheError, Result};
use crate::reshape;
use crate::tensor::{ensemble_diameter, frobenius_inner, TensorC};

pub const CSV_SCHEMA_VERSION: u32 = 1;
const FIXED_COLUMNS: [&str; 8] = [
    "t",
    "R",
    "V",
    "Dmax",
    "F",
    "diss_total",
    "diss_residual",
    "norm_drift_max",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// ‖T_c‖_F
    pub r: f64,
    pub v: f64,
    pub dmax: f64,
    pub f: f64,
    /// dV/dt predicted by the dissipation identity; ≤ 0 when all couplings are non-negative.
    pub diss_total: f64,
    /// |centred finite-difference dV/dt − diss_total|, NaN until filled from neighbouring records.
    pub diss_residual: f64,
    pub norm_drift_max: f64,
    /// `(1/N) Σ_j ‖M(T_c)M(T_j)† − M(T_j)M(T_c)†‖²` for each active coupling, in bitmask order.
    pub diss: Vec<(CouplingIndex, f64)>,
}

pub fn order_parameter(s: &EnsembleState) -> f64 {
    centroid(s).frobenius_norm()
}

/// `(1/N) Σ_j ‖T_j − T_c‖²`
pub fn variance(s: &EnsembleState) -> f64 {
    let tc = centroid(s);
    let total: f64 = s
        .tensors()
        .iter()
        .map(|t| {
            t.entries()
                .iter()
                .zip(tc.entries())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    total / s.len() as f64
}

/// `max_j ‖T_j − T_c‖`
pub fn max_radius(s: &EnsembleState) -> f64 {
    let tc = centroid(s);
    s.tensors()
        .iter()
        .map(|t| t.distance(&tc).expect("same shape"))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dissipation {
    /// `−Σ_i κ_i · per_coupling[i]`
    pub total: f64,
    /// Non-negative `(1/N) Σ_j ‖commutator‖²` per active coupling, in bitmask order.
    pub per_coupling: Vec<(CouplingIndex, f64)>,
}

pub fn dissipation(s: &EnsembleState, couplings: &CouplingSet) -> Result<Dissipation> {
    if couplings.rank() != s.shape().rank() {
        return Err(LoheError::RankMismatch {
            expected: s.shape().rank(),
            found: couplings.rank(),
        });
    }
    let tc = centroid(s);
    let n = s.len() as f64;
    let mut total = 0.0;
    let mut per_coupling = Vec::new();
    for (i, kappa) in couplings.active() {
        let plan = reshape::plan(s.shape(), i)?;
        let mc = reshape::matricize(&tc, &plan)?;
        let mut sum = 0.0;
        for t in s.tensors() {
            let mj = reshape::matricize(t, &plan)?;
            let x = mc.mul_adjoint(&mj)?.sub(&mj.mul_adjoint(&mc)?);
            sum += x.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let norm = sum / n;
        total -= kappa * norm;
        per_coupling.push((i, norm));
    }
    Ok(Dissipation {
        total,
        per_coupling,
    })
}

/// Diagnostics for one state; `initial_norms` are the reference norms for the drift column.
pub fn record(
    s: &EnsembleState,
    couplings: &CouplingSet,
    initial_norms: &[f64],
) -> Result<DiagnosticsRecord> {
    let diss = dissipation(s, couplings)?;
    let norm_drift_max = s
        .norms()
        .iter()
        .zip(initial_norms)
        .map(|(n, n0)| (n - n0).abs())
        .fold(0.0, f64::max);
    Ok(DiagnosticsRecord {
        t: s.time(),
        r: order_parameter(s),
        v: variance(s),
        dmax: ensemble_diameter(s.tensors())?,
        f: max_radius(s),
        diss_total: diss.total,
        diss_residual: f64::NAN,
        norm_drift_max,
        diss: diss.per_coupling,
    })
}

/// Derivative at `x[at]` of the quadratic through three points.
fn three_point_slope(x: [f64; 3], y: [f64; 3], at: usize) -> f64 {
    let p = x[at];
    let mut d = 0.0;
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        let denom = (x[k] - x[a]) * (x[k] - x[b]);
        d += y[k] * ((p - x[a]) + (p - x[b])) / denom;
    }
    d
}

/// Residual at the centre record of `window` between the centred difference of V and the dissipation.
pub fn dissipation_residual(window: &[DiagnosticsRecord]) -> Result<f64> {
    if window.len() < 3 {
        return Err(LoheError::WindowTooShort {
            needed: 3,
            got: window.len(),
        });
    }
    let c = window.len() / 2;
    let (a, b) = (&window[c - 1], &window[c + 1]);
    let fd = three_point_slope([a.t, window[c].t, b.t], [a.v, window[c].v, b.v], 1);
    Ok((fd - window[c].diss_total).abs())
}

/// Fills `diss_residual` for every record; the first and last use one-sided three-point differences.
pub fn fill_dissipation_residuals(records: &mut [DiagnosticsRecord]) {
    let n = records.len();
    if n < 3 {
        return;
    }
    for k in 0..n {
        let (start, at) = match k {
            0 => (0, 0),
            k if k == n - 1 => (n - 3, 2),
            k => (k - 1, 1),
        };
        let w = &records[start..start + 3];
        let slope = three_point_slope([w[0].t, w[1].t, w[2].t], [w[0].v, w[1].v, w[2].v], at);
        records[k].diss_residual = (slope - records[k].diss_total).abs();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PoleVerdict {
    Complete,
    Bipolar,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleAssignment {
    pub b: Vec<i8>,
    pub a: Vec<i8>,
    pub r_inf: f64,
    /// `|r_inf − |Σ a_k| / N|`
    pub r_gap: f64,
    /// `‖T_j − a_j T_1‖` at the final time.
    pub residuals: Vec<f64>,
    pub verdict: PoleVerdict,
}

impl PoleAssignment {
    pub fn plus_count(&self) -> usize {
        self.a.iter().filter(|&&x| x > 0).count()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Distance to the nearer pole, relative to ‖T_1‖.
    pub threshold: f64,
    /// Required ratio between the distances to the two poles.
    pub separation: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            separation: 10.0,
        }
    }
}

/// `b_j = sign Re⟨T_c, T_j⟩`, `a_j = b_1 b_j`. When `T_c` is too small for the
/// sign to mean anything (balanced bipolar states), `b_j` falls back to the
/// nearer of `±T_1` with `b_1 = +1`.
pub fn classify_poles(s: &EnsembleState, opts: ClassifyOptions) -> Result<PoleAssignment> {
    let tc = centroid(s);
    let ts = s.tensors();
    let t1 = &ts[0];
    let scale = t1.frobenius_norm();
    let r = tc.frobenius_norm();
    let nearest = |t: &TensorC| -> Result<(i8, f64, f64)> {
        let plus = t.distance(t1)?;
        let minus = t.add(t1)?.frobenius_norm();
        Ok(if plus <= minus {
            (1, plus, minus)
        } else {
            (-1, minus, plus)
        })
    };
    let mut b = Vec::with_capacity(ts.len());
    for t in ts {
        let c = frobenius_inner(&tc, t)?.re / t.norm_sqr();
        // At a pole configuration |c_j| = R/‖T_1‖.
        let sign = if r > opts.threshold * scale && c.abs() > 0.5 * r / scale {
            if c > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        };
        b.push(sign);
    }
    if b.contains(&0) {
        for (bj, t) in b.iter_mut().zip(ts) {
            *bj = nearest(t)?.0;
        }
    }
    let a: Vec<i8> = b.iter().map(|&bj| b[0] * bj).collect();
    let mut residuals = Vec::with_capacity(ts.len());
    let mut resolved = true;
    for (t, &aj) in ts.iter().zip(&a) {
        let res = t.sub(&t1.scale_real(aj as f64))?.frobenius_norm();
        let (pole, near, far) = nearest(t)?;
        if pole != aj || near >= opts.threshold * scale || far < opts.separation * near {
            resolved = false;
        }
        residuals.push(res);
    }
    let n = ts.len() as f64;
    let predicted = a.iter().map(|&x| x as f64).sum::<f64>().abs() / n;
    let verdict = if !resolved {
        PoleVerdict::Unresolved
    } else if a.iter().all(|&x| x == 1) {
        PoleVerdict::Complete
    } else {
        PoleVerdict::Bipolar
    };
    Ok(PoleAssignment {
        b,
        a,
        r_inf: r,
        r_gap: (r - predicted * scale).abs(),
        residuals,
        verdict,
    })
}

/// Least-squares slope of `ln Dmax(t)` over records with `t ≥ t_start`, stopping at the first diameter below 1e-14.
pub fn decay_rate_fit(records: &[DiagnosticsRecord], t_start: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= t_start)
        .take_while(|r| r.dmax >= 1e-14)
        .map(|r| (r.t, r.dmax.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(LoheError::WindowTooShort {
            needed: 2,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LoheError::param("t_start", "fit window has a single time"));
    }
    Ok(sxy / sxx)
}

pub fn csv_header(couplings: &CouplingSet) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(couplings.active().map(|(i, _)| format!("diss_{}", i.key())))
        .collect()
}

/// One row per record, columns as in [`csv_header`].
pub fn write_csv<W: Write>(
    records: &[DiagnosticsRecord],
    couplings: &CouplingSet,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(couplings))?;
    for r in records {
        let mut row = vec![
            r.t.to_string(),
            r.r.to_string(),
            r.v.to_string(),
            r.dmax.to_string(),
            r.f.to_string(),
            r.diss_total.to_string(),
            r.diss_residual.to_string(),
            r.norm_drift_max.to_string(),
        ];
        row.extend(r.diss.iter().map(|(_, x)| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| LoheError::io("<csv output>", e))?;
    Ok(())
}

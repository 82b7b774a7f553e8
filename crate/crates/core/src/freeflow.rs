//! Free-flow operators and the solution splitting property.
//!
//! A rank-2m operator `A` is stored matricized: `Â[offset(α), offset(β)] = A[α, β]`,
//! so contracting `A` with a tensor is a matrix–vector product and `A^n` is a
//! matrix power.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingIndex, CouplingSet};
use crate::dynamics::{EnsembleState, Rk4, SimParams};
use crate::error::{LoheError, Result};
use crate::expm::expm;
use crate::matrix::MatC;
use crate::tensor::{MultiShape, TensorC, C64};

/// Largest per-member size `D` accepted by [`ssp_residual`]; the residual has `D⁴` entries.
pub const SSP_DIM_CAP: usize = 8;
pub const DEFAULT_SSP_TIMES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
pub const DEFAULT_SSP_TOL: f64 = 1e-10;

const SKEW_WARN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FreeFlowOp {
    shape: MultiShape,
    matrix: MatC,
}

impl FreeFlowOp {
    /// Accepts any `D × D` matrix and keeps its skew-Hermitian part `(M − M†)/2`.
    pub fn from_matrix(shape: &MultiShape, m: MatC) -> Result<Self> {
        let d = shape.size();
        if m.rows() != d || m.cols() != d {
            return Err(LoheError::MatrixDims {
                expected_rows: d,
                expected_cols: d,
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        if !m.is_finite() {
            return Err(LoheError::NonFinite("free-flow operator"));
        }
        let skew = m.sub(&m.adjoint()).scale_real(0.5);
        let discarded = m.sub(&skew).frobenius_norm();
        if discarded > SKEW_WARN_TOL {
            log::warn!(
                "free-flow operator is not skew-Hermitian; discarded Hermitian part of norm {discarded:.3e}"
            );
        }
        Ok(Self {
            shape: shape.clone(),
            matrix: skew,
        })
    }

    pub fn zero(shape: &MultiShape) -> Self {
        let d = shape.size();
        Self {
            shape: shape.clone(),
            matrix: MatC::zeros(d, d),
        }
    }

    /// Rank 0: `A = iν`.
    pub fn kuramoto(nu: f64) -> Result<Self> {
        if !nu.is_finite() {
            return Err(LoheError::NonFinite("natural frequency"));
        }
        let m = MatC::from_col_major(1, 1, vec![C64::new(0.0, nu)])?;
        Self::from_matrix(&MultiShape::scalar(), m)
    }

    /// Rank 1 on `R^d ⊂ C^d`: `A = Ω` with `Ω` real antisymmetric.
    pub fn sphere(omega: &MatC) -> Result<Self> {
        if omega.data().iter().any(|z| z.im != 0.0) {
            return Err(LoheError::param("omega", "must be real"));
        }
        if omega.add(&omega.transpose()).frobenius_norm() > SKEW_WARN_TOL {
            return Err(LoheError::param("omega", "must be antisymmetric"));
        }
        Self::from_matrix(&MultiShape::new(vec![omega.rows()])?, omega.clone())
    }

    /// Rank 2 on `d × d` matrices: `A·U = −iH·U` with `H` Hermitian, i.e. `Â = I ⊗ (−iH)`.
    pub fn lohe_matrix(h: &MatC) -> Result<Self> {
        if !h.is_square() {
            return Err(LoheError::param("h", "must be square"));
        }
        if h.sub(&h.adjoint()).frobenius_norm() > SKEW_WARN_TOL {
            return Err(LoheError::param("h", "must be Hermitian"));
        }
        let d = h.rows();
        let a = MatC::identity(d).kron(&h.scale(C64::new(0.0, -1.0)));
        Self::from_matrix(&MultiShape::new(vec![d, d])?, a)
    }

    /// Reads the matricized `D × D` form, stored in the tensor JSON format as shape `[D, D]`.
    pub fn load_json(path: impl AsRef<Path>, state_shape: &MultiShape) -> Result<Self> {
        let t = TensorC::load_json(path)?;
        Self::from_matrix(state_shape, MatC::from_tensor(&t)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        self.matrix.to_tensor().save_json(path)
    }

    pub fn shape(&self) -> &MultiShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn matrix(&self) -> &MatC {
        &self.matrix
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.data().iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn apply(&self, t: &TensorC) -> Result<TensorC> {
        self.check_shape(t)?;
        Ok(TensorC::from_raw(self.shape.clone(), self.matrix.apply(t.entries())))
    }

    fn check_shape(&self, t: &TensorC) -> Result<()> {
        if t.shape() != &self.shape {
            return Err(LoheError::ShapeMismatch {
                expected: self.shape.dims().to_vec(),
                found: t.shape().dims().to_vec(),
            });
        }
        Ok(())
    }
}

/// `e^{Ât}` with a per-time cache that can be shared across threads.
#[derive(Debug)]
pub struct FlowExp {
    base: FreeFlowOp,
    cache: RwLock<HashMap<u64, Arc<MatC>>>,
}

impl FlowExp {
    pub fn new(base: FreeFlowOp) -> Self {
        Self {
            base,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn base(&self) -> &FreeFlowOp {
        &self.base
    }

    pub fn at(&self, t: f64) -> Result<Arc<MatC>> {
        let key = t.to_bits();
        if let Some(m) = self.cache.read().expect("flow cache poisoned").get(&key) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(tensor_exp(&self.base, t)?);
        let mut cache = self.cache.write().expect("flow cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(m)))
    }
}

pub fn tensor_exp(a: &FreeFlowOp, t: f64) -> Result<MatC> {
    if !t.is_finite() {
        return Err(LoheError::NonFinite("flow time"));
    }
    expm(&a.matrix.scale_real(t))
}

/// `e^{At} T0`, the exact solution of the free flow.
pub fn free_flow_solve(a: &FreeFlowOp, t0: &TensorC, t: f64) -> Result<TensorC> {
    a.check_shape(t0)?;
    let e = tensor_exp(a, t)?;
    Ok(TensorC::from_raw(t0.shape().clone(), e.apply(t0.entries())))
}

/// Offsets of the mixed multi-indices `β_{*i}` and `β_{*(1−i)}` for every pair `(β0, β1)`,
/// laid out at `β0 + D·β1`.
pub(crate) fn mixed_offsets(shape: &MultiShape, i: CouplingIndex) -> (Vec<usize>, Vec<usize>) {
    let d = shape.size();
    let strides = shape.strides();
    let coords: Vec<Vec<usize>> = (0..d).map(|o| shape.unravel(o).coords).collect();
    let mut same = Vec::with_capacity(d * d);
    let mut swapped = Vec::with_capacity(d * d);
    for b1 in 0..d {
        for b0 in 0..d {
            let (mut s, mut w) = (0, 0);
            for (k, &stride) in strides.iter().enumerate() {
                let (x0, x1) = (coords[b0][k], coords[b1][k]);
                if i.bit(k) == 0 {
                    s += stride * x0;
                    w += stride * x1;
                } else {
                    s += stride * x1;
                    w += stride * x0;
                }
            }
            same.push(s);
            swapped.push(w);
        }
    }
    (same, swapped)
}

/// Frobenius norm over `(α0, α1, γ0, γ1)` of
/// `Σ_β e^{−At}[α0,β0] e^{At}[β_i,γ_i] e^{−At}[α1,β1] e^{At}[β_{1−i},γ_{1−i}] − δ(α0,γ0) δ(γ1,α1)`.
pub fn ssp_residual(a: &FreeFlowOp, i: CouplingIndex, t: f64) -> Result<f64> {
    if i.rank() != a.rank() {
        return Err(LoheError::RankMismatch {
            expected: a.rank(),
            found: i.rank(),
        });
    }
    let d = a.shape.size();
    if d > SSP_DIM_CAP {
        return Err(LoheError::ResidualTooLarge {
            dim: d,
            entries: (d as u128).pow(4),
            cap: SSP_DIM_CAP,
        });
    }
    let e = tensor_exp(a, t)?;
    let em = tensor_exp(a, -t)?;
    let (bi, bc) = mixed_offsets(&a.shape, i);
    let zero = C64::new(0.0, 0.0);
    let mut w = vec![zero; d * d];
    let mut u = vec![zero; d * d];
    let mut sum_sq = 0.0;
    // For each (γ0, γ1): w[β0,β1] = E[β_i,γ_i] E[β_{1−i},γ_{1−i}], then contract β0 and β1 with E⁻.
    for g in 0..d * d {
        let (gi, gc) = (bi[g], bc[g]);
        for (b, wb) in w.iter_mut().enumerate() {
            *wb = e.get(bi[b], gi) * e.get(bc[b], gc);
        }
        // u[α0 + D·β1] = Σ_β0 E⁻[α0,β0] w[β0 + D·β1]
        u.fill(zero);
        for b1 in 0..d {
            for b0 in 0..d {
                let x = w[b0 + d * b1];
                for a0 in 0..d {
                    u[a0 + d * b1] += em.get(a0, b0) * x;
                }
            }
        }
        let (g0, g1) = (g % d, g / d);
        for a1 in 0..d {
            for a0 in 0..d {
                let mut r = zero;
                for b1 in 0..d {
                    r += em.get(a1, b1) * u[a0 + d * b1];
                }
                if a0 == g0 && a1 == g1 {
                    r -= 1.0;
                }
                sum_sq += r.norm_sqr();
            }
        }
    }
    Ok(sum_sq.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SspEntry {
    pub index: CouplingIndex,
    pub kappa: f64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SspReport {
    pub times: Vec<f64>,
    pub tol: f64,
    pub entries: Vec<SspEntry>,
}

impl SspReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Samples the consistency residual at `times` for every active coupling. This
/// is a numerical check at finitely many times, not a proof for all `t`.
pub fn ssp_check(
    a: &FreeFlowOp,
    couplings: &CouplingSet,
    times: &[f64],
    tol: f64,
) -> Result<SspReport> {
    if times.is_empty() {
        return Err(LoheError::param("times", "need at least one sample time"));
    }
    if couplings.rank() != a.rank() {
        return Err(LoheError::RankMismatch {
            expected: a.rank(),
            found: couplings.rank(),
        });
    }
    let entries = couplings
        .active()
        .map(|(index, kappa)| {
            let residuals = times
                .iter()
                .map(|&t| ssp_residual(a, index, t))
                .collect::<Result<Vec<_>>>()?;
            let max_residual = residuals.iter().copied().fold(0.0, f64::max);
            Ok(SspEntry {
                index,
                kappa,
                residuals,
                max_residual,
                pass: max_residual <= tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SspReport {
        times: times.to_vec(),
        tol,
        entries,
    })
}

/// Integrates the full model and the coupling-only model side by side from
/// `init` and returns `max_j max_t ‖T_j(t) − e^{At} S_j(t)‖_F`, the maximum
/// taken over at most ~1000 evenly spaced step times including the last.
pub fn split_verify(
    a: &FreeFlowOp,
    couplings: &CouplingSet,
    init: &EnsembleState,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let full = SimParams::new(couplings.clone())
        .with_free_flow(a.clone())
        .with_dt(dt)
        .with_horizon(horizon);
    let bare = SimParams::new(couplings.clone()).with_dt(dt).with_horizon(horizon);
    let shape = init.shape().clone();
    full.validate(&shape)?;
    let n = init.len();
    let d = shape.size();
    let mut rk_full = Rk4::new(&shape, n, &full)?;
    let mut rk_bare = Rk4::new(&shape, n, &bare)?;
    let mut y_full: Vec<C64> = init.tensors().iter().flat_map(|t| t.entries().to_vec()).collect();
    let mut y_bare = y_full.clone();
    let steps = full.steps();
    let stride = steps.div_ceil(1000).max(1);
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        rk_full.step(&mut y_full, dt);
        rk_bare.step(&mut y_bare, dt);
        if k % stride != 0 && k != steps {
            continue;
        }
        if !y_full.iter().chain(&y_bare).all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LoheError::NonFinite("split trajectory"));
        }
        let e = tensor_exp(a, k as f64 * dt)?;
        for (tf, sb) in y_full.chunks_exact(d).zip(y_bare.chunks_exact(d)) {
            let pushed = e.apply(sb);
            let dist = tf
                .iter()
                .zip(&pushed)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(dist);
        }
    }
    Ok(worst)
}

//! The Lohe tensor ODE
//!
//! ```text
//! dT_j/dt = A·T_j + Σ_i κ_i ( T_c[α_{*i}] conj(T_j[α_{*1}]) T_j[α_{*(1-i)}]
//!                           − T_j[α_{*i}] conj(T_c[α_{*1}]) T_j[α_{*(1-i)}] )
//! ```
//!
//! with one skew-Hermitian free flow `A` shared by all members, integrated by
//! the classical fixed-step fourth-order Runge–Kutta scheme.

use crate::coupling::{CouplingIndex, CouplingSet};
use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{LoheError, Result};
use crate::freeflow::FreeFlowOp;
use crate::matrix::MatC;
use crate::reshape::{self, cubic_fast, CouplingScratch};
use crate::rng::{member_rng, random_unit_tensor, scenario_rng, standard_complex_tensor};
use crate::tensor::{contract_cubic, inner_slices, MultiShape, TensorC, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    tensors: Vec<TensorC>,
    time: f64,
}

impl EnsembleState {
    pub fn new(tensors: Vec<TensorC>, time: f64) -> Result<Self> {
        let first = tensors.first().ok_or(LoheError::EmptyEnsemble)?;
        for t in &tensors[1..] {
            first.check_same_shape(t)?;
        }
        if tensors.iter().any(|t| !t.is_finite()) {
            return Err(LoheError::NonFinite("ensemble state"));
        }
        Ok(Self { tensors, time })
    }

    pub fn tensors(&self) -> &[TensorC] {
        &self.tensors
    }

    pub fn into_tensors(self) -> Vec<TensorC> {
        self.tensors
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn shape(&self) -> &MultiShape {
        self.tensors[0].shape()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.tensors.iter().map(TensorC::frobenius_norm).collect()
    }

    fn flat(&self) -> Vec<C64> {
        self.tensors.iter().flat_map(|t| t.entries().iter().copied()).collect()
    }

    fn from_flat(shape: &MultiShape, flat: &[C64], time: f64) -> Self {
        let d = shape.size();
        let tensors = flat
            .chunks_exact(d)
            .map(|chunk| TensorC::from_raw(shape.clone(), chunk.to_vec()))
            .collect();
        Self { tensors, time }
    }
}

/// Which contraction routine evaluates the coupling terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsPath {
    /// Matricized matrix products.
    #[default]
    Fast,
    /// Direct index loops; the reference semantics.
    Naive,
}

#[derive(Debug, Clone)]
pub struct SimParams {
    pub free_flow: Option<FreeFlowOp>,
    pub couplings: CouplingSet,
    pub dt: f64,
    pub horizon: f64,
    pub renormalize: bool,
    pub drift_tolerance: f64,
    pub sample_stride: usize,
    pub rhs_path: RhsPath,
}

impl SimParams {
    pub fn new(couplings: CouplingSet) -> Self {
        Self {
            free_flow: None,
            couplings,
            dt: 1e-3,
            horizon: 1.0,
            renormalize: false,
            drift_tolerance: 1e-6,
            sample_stride: 1,
            rhs_path: RhsPath::Fast,
        }
    }

    pub fn with_free_flow(mut self, a: FreeFlowOp) -> Self {
        self.free_flow = Some(a);
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn with_drift_tolerance(mut self, tol: f64) -> Self {
        self.drift_tolerance = tol;
        self
    }

    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn with_rhs_path(mut self, path: RhsPath) -> Self {
        self.rhs_path = path;
        self
    }

    pub fn steps(&self) -> usize {
        if self.horizon <= 0.0 {
            0
        } else {
            (self.horizon / self.dt).round() as usize
        }
    }

    pub fn validate(&self, shape: &MultiShape) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(LoheError::param("dt", "must be finite and positive"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(LoheError::param("horizon", "must be finite and non-negative"));
        }
        if self.horizon > 0.0 && self.dt > self.horizon {
            return Err(LoheError::param("dt", "must not exceed the horizon"));
        }
        if self.drift_tolerance.is_nan() || self.drift_tolerance <= 0.0 {
            return Err(LoheError::param("drift_tolerance", "must be positive"));
        }
        if self.sample_stride == 0 {
            return Err(LoheError::param("sample_stride", "must be at least 1"));
        }
        if self.couplings.rank() != shape.rank() {
            return Err(LoheError::RankMismatch {
                expected: shape.rank(),
                found: self.couplings.rank(),
            });
        }
        if let Some(a) = &self.free_flow {
            if a.shape() != shape {
                return Err(LoheError::ShapeMismatch {
                    expected: shape.dims().to_vec(),
                    found: a.shape().dims().to_vec(),
                });
            }
        }
        Ok(())
    }
}

/// T_c = (1/N) Σ_j T_j.
pub fn centroid(s: &EnsembleState) -> TensorC {
    let mut data = vec![C64::new(0.0, 0.0); s.shape().size()];
    centroid_into(&s.flat(), s.len(), &mut data);
    TensorC::from_raw(s.shape().clone(), data)
}

fn centroid_into(flat: &[C64], n: usize, out: &mut [C64]) {
    out.fill(C64::new(0.0, 0.0));
    for member in flat.chunks_exact(out.len()) {
        for (o, &z) in out.iter_mut().zip(member) {
            *o += z;
        }
    }
    let inv = 1.0 / n as f64;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

/// Right-hand side evaluator with reusable buffers. Not shared across threads;
/// build one per thread.
pub(crate) struct RhsEngine {
    n: usize,
    shape: MultiShape,
    free_flow: Option<MatC>,
    fast_terms: Vec<(f64, CouplingScratch)>,
    naive_terms: Vec<(f64, CouplingIndex)>,
    centroid: Vec<C64>,
    check_scale: f64,
}

impl RhsEngine {
    pub(crate) fn new(shape: &MultiShape, n: usize, p: &SimParams) -> Result<Self> {
        p.validate(shape)?;
        let mut fast_terms = Vec::new();
        let mut naive_terms = Vec::new();
        for (i, kappa) in p.couplings.active() {
            match p.rhs_path {
                RhsPath::Fast => {
                    fast_terms.push((kappa, CouplingScratch::new(reshape::plan(shape, i)?)))
                }
                RhsPath::Naive => naive_terms.push((kappa, i)),
            }
        }
        let free_flow = p.free_flow.as_ref().map(|a| a.matrix().clone());
        let check_scale = free_flow.as_ref().map_or(0.0, |m| m.norm_1())
            + p.couplings.active().map(|(_, k)| 2.0 * k.abs()).sum::<f64>();
        Ok(Self {
            n,
            shape: shape.clone(),
            free_flow,
            fast_terms,
            naive_terms,
            centroid: vec![C64::new(0.0, 0.0); shape.size()],
            check_scale,
        })
    }

    pub(crate) fn eval(&mut self, y: &[C64], out: &mut [C64]) {
        let d = self.shape.size();
        centroid_into(y, self.n, &mut self.centroid);
        for (_, scratch) in self.fast_terms.iter_mut() {
            scratch.load_centroid(&self.centroid);
        }
        let tc = if self.naive_terms.is_empty() {
            None
        } else {
            Some(TensorC::from_raw(self.shape.clone(), self.centroid.clone()))
        };
        for (tj, dj) in y.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            match &self.free_flow {
                Some(a) => dj.copy_from_slice(&a.apply(tj)),
                None => dj.fill(C64::new(0.0, 0.0)),
            }
            for (kappa, scratch) in self.fast_terms.iter_mut() {
                scratch.add_coupling(tj, *kappa, dj);
            }
            if let Some(tc) = &tc {
                let tjt = TensorC::from_raw(self.shape.clone(), tj.to_vec());
                for &(kappa, i) in &self.naive_terms {
                    let gain = contract_cubic(tc, &tjt, &tjt, i).expect("validated shapes");
                    let loss = contract_cubic(&tjt, tc, &tjt, i).expect("validated shapes");
                    for ((o, g), l) in dj.iter_mut().zip(gain.entries()).zip(loss.entries()) {
                        *o += (g - l) * kappa;
                    }
                }
            }
            if cfg!(debug_assertions) {
                // d‖T_j‖²/dt = 2 Re⟨T_j, dT_j/dt⟩ vanishes identically.
                let norm_sq: f64 = tj.iter().map(|z| z.norm_sqr()).sum();
                let tc_norm: f64 = self.centroid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let scale = norm_sq * self.check_scale * (1.0 + tc_norm * norm_sq.sqrt()) * d as f64;
                let re = inner_slices(tj, dj).re;
                debug_assert!(
                    re.abs() <= 1e-13 * scale.max(1.0),
                    "norm-conservation defect {re:e} (scale {scale:e})"
                );
            }
        }
    }
}

/// dT_j/dt for every member. Uses the matricized fast path unless `p.rhs_path` is `Naive`.
pub fn rhs(s: &EnsembleState, p: &SimParams) -> Result<Vec<TensorC>> {
    let mut engine = RhsEngine::new(s.shape(), s.len(), p)?;
    let y = s.flat();
    let mut out = vec![C64::new(0.0, 0.0); y.len()];
    engine.eval(&y, &mut out);
    Ok(EnsembleState::from_flat(s.shape(), &out, s.time()).into_tensors())
}

/// Single coupling term `cubic(tc, tj, tj, i) − cubic(tj, tc, tj, i)` through the public contraction API.
pub fn coupling_term(tc: &TensorC, tj: &TensorC, i: CouplingIndex) -> Result<TensorC> {
    cubic_fast(tc, tj, tj, i)?.sub(&cubic_fast(tj, tc, tj, i)?)
}

/// Fixed-step RK4 driver over a flat `N·D` state buffer.
pub(crate) struct Rk4 {
    engine: RhsEngine,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    pub(crate) fn new(shape: &MultiShape, n: usize, p: &SimParams) -> Result<Self> {
        let engine = RhsEngine::new(shape, n, p)?;
        let len = n * shape.size();
        let z = vec![C64::new(0.0, 0.0); len];
        Ok(Self {
            engine,
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        })
    }

    pub(crate) fn step(&mut self, y: &mut [C64], dt: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.engine.eval(y, k1);
        for ((t, &a), &b) in self.tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *t = a + b * (0.5 * dt);
        }
        self.engine.eval(&self.tmp, k2);
        for ((t, &a), &b) in self.tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *t = a + b * (0.5 * dt);
        }
        self.engine.eval(&self.tmp, k3);
        for ((t, &a), &b) in self.tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *t = a + b * dt;
        }
        self.engine.eval(&self.tmp, k4);
        let w = dt / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
    }
}

/// Advance by one `dt`. Applies renormalization or the drift check exactly as [`simulate`] does.
pub fn step(s: &EnsembleState, p: &SimParams) -> Result<EnsembleState> {
    let mut rk = Rk4::new(s.shape(), s.len(), p)?;
    let mut y = s.flat();
    let targets = s.norms();
    rk.step(&mut y, p.dt);
    let next = s.time() + p.dt;
    post_step(&mut y, s.shape().size(), &targets, p, next)?;
    Ok(EnsembleState::from_flat(s.shape(), &y, next))
}

fn post_step(y: &mut [C64], d: usize, targets: &[f64], p: &SimParams, time: f64) -> Result<()> {
    if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(LoheError::NonFinite("integrated state"));
    }
    if p.renormalize {
        for (member, &target) in y.chunks_exact_mut(d).zip(targets) {
            let norm: f64 = member.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                let s = target / norm;
                for z in member.iter_mut() {
                    *z *= s;
                }
            }
        }
        return Ok(());
    }
    let drift = max_drift(y, d, targets);
    if drift > p.drift_tolerance {
        return Err(LoheError::NormDrift {
            time,
            drift,
            tolerance: p.drift_tolerance,
        });
    }
    Ok(())
}

fn max_drift(y: &[C64], d: usize, targets: &[f64]) -> f64 {
    y.chunks_exact(d)
        .zip(targets)
        .map(|(m, &t)| (m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - t).abs())
        .fold(0.0, f64::max)
}

/// Receives every sampled record together with the state it was computed from.
pub trait Observer {
    fn observe(&mut self, state: &EnsembleState, record: &DiagnosticsRecord) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&EnsembleState, &DiagnosticsRecord) -> Result<()>,
{
    fn observe(&mut self, state: &EnsembleState, record: &DiagnosticsRecord) -> Result<()> {
        self(state, record)
    }
}

/// Keeps every sampled state.
#[derive(Debug, Default)]
pub struct StateRecorder {
    pub states: Vec<EnsembleState>,
}

impl Observer for StateRecorder {
    fn observe(&mut self, state: &EnsembleState, _record: &DiagnosticsRecord) -> Result<()> {
        self.states.push(state.clone());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub initial: EnsembleState,
    pub final_state: EnsembleState,
}

/// Integrates from `init` to `p.horizon`, emitting a record at step 0, every
/// `p.sample_stride` steps, and at the last step. Sample times are `k·dt`.
/// Records passed to observers carry a NaN dissipation residual; the returned
/// trajectory has it filled from neighbouring samples.
pub fn simulate(
    init: &EnsembleState,
    p: &SimParams,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    let shape = init.shape().clone();
    let d = shape.size();
    let n = init.len();
    let mut rk = Rk4::new(&shape, n, p)?;
    let targets = init.norms();
    let steps = p.steps();
    let t0 = init.time();

    let mut records = Vec::with_capacity(steps / p.sample_stride + 2);
    let mut emit = |state: &EnsembleState, records: &mut Vec<DiagnosticsRecord>| -> Result<()> {
        let rec = diagnostics::record(state, &p.couplings, &targets)?;
        for obs in observers.iter_mut() {
            obs.observe(state, &rec)?;
        }
        records.push(rec);
        Ok(())
    };
    emit(init, &mut records)?;

    let mut y = init.flat();
    for k in 1..=steps {
        rk.step(&mut y, p.dt);
        let time = t0 + k as f64 * p.dt;
        post_step(&mut y, d, &targets, p, time)?;
        if k % p.sample_stride == 0 || k == steps {
            emit(&EnsembleState::from_flat(&shape, &y, time), &mut records)?;
        }
    }
    diagnostics::fill_dissipation_residuals(&mut records);
    Ok(Trajectory {
        records,
        initial: init.clone(),
        final_state: EnsembleState::from_flat(&shape, &y, t0 + steps as f64 * p.dt),
    })
}

/// `M(T_j)† M(T_j)` for each member (DC × DC), conserved by the single-coupling model for `i`.
pub fn fundamental_invariant(s: &EnsembleState, i: CouplingIndex) -> Result<Vec<MatC>> {
    let plan = reshape::plan(s.shape(), i)?;
    s.tensors()
        .iter()
        .map(|t| {
            let m = reshape::matricize(t, &plan)?;
            m.adjoint().matmul(&m)
        })
        .collect()
}

/// N i.i.d. members uniform on the unit Frobenius sphere.
pub fn random_ensemble(shape: &MultiShape, n: usize, seed: u64) -> Result<EnsembleState> {
    if n == 0 {
        return Err(LoheError::EmptyEnsemble);
    }
    let tensors = (0..n)
        .map(|j| random_unit_tensor(shape, &mut member_rng(seed, j)))
        .collect();
    EnsembleState::new(tensors, 0.0)
}

/// `T_j = normalize(T* + spread·G_j)` with a random unit centre `T*` and unit-norm Gaussian directions `G_j`.
pub fn clustered_ensemble(
    shape: &MultiShape,
    n: usize,
    spread: f64,
    seed: u64,
) -> Result<EnsembleState> {
    if n == 0 {
        return Err(LoheError::EmptyEnsemble);
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(LoheError::param("spread", "must be finite and non-negative"));
    }
    let centre = random_unit_tensor(shape, &mut scenario_rng(seed));
    let tensors = (0..n)
        .map(|j| {
            let g = random_unit_tensor(shape, &mut member_rng(seed, j));
            let mut t = centre.clone();
            t.axpy(C64::new(spread, 0.0), &g)?;
            t.normalized()
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleState::new(tensors, 0.0)
}

/// Clustered ensemble whose diameter is `target` (to 1e-9 relative), found by bisection on the spread.
pub fn clustered_with_diameter(
    shape: &MultiShape,
    n: usize,
    target: f64,
    seed: u64,
) -> Result<EnsembleState> {
    if n < 2 || !(target > 0.0 && target < 2.0) {
        return Err(LoheError::param("target", "need N >= 2 and 0 < diameter < 2"));
    }
    let diam = |eps: f64| -> Result<f64> {
        crate::tensor::ensemble_diameter(clustered_ensemble(shape, n, eps, seed)?.tensors())
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while diam(hi)? < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(LoheError::param("target", "diameter not reachable by this seed"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if diam(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-12 * hi {
            break;
        }
    }
    clustered_ensemble(shape, n, 0.5 * (lo + hi), seed)
}

/// `n_plus` copies of a random unit `T` followed by `N − n_plus` copies of `−T`.
pub fn bipolar_ensemble(
    shape: &MultiShape,
    n: usize,
    n_plus: usize,
    seed: u64,
) -> Result<EnsembleState> {
    if n == 0 {
        return Err(LoheError::EmptyEnsemble);
    }
    if n_plus > n {
        return Err(LoheError::param("n_plus", format!("{n_plus} exceeds N = {n}")));
    }
    let t = random_unit_tensor(shape, &mut scenario_rng(seed));
    let neg = t.scale_real(-1.0);
    let tensors = (0..n)
        .map(|j| if j < n_plus { t.clone() } else { neg.clone() })
        .collect();
    EnsembleState::new(tensors, 0.0)
}

/// Unnormalized Gaussian ensemble; used where the unit-norm assumption is deliberately broken.
pub fn gaussian_ensemble(shape: &MultiShape, n: usize, seed: u64) -> Result<EnsembleState> {
    let tensors = (0..n)
        .map(|j| standard_complex_tensor(shape, &mut member_rng(seed, j)))
        .collect();
    EnsembleState::new(tensors, 0.0)
}

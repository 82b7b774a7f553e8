//! The Kuramoto, Lohe sphere and Lohe matrix models in their native form, and
//! their embeddings into the tensor model.
//!
//! Coupling constants between native `κ` and tensor `κ_i`:
//!
//! | kind     | rank | free flow        | couplings          |
//! |----------|------|------------------|--------------------|
//! | kuramoto | 0    | `iν`             | `κ_"" = κ/2`       |
//! | sphere   | 1    | `Ω`              | `κ_0 = κ`          |
//! | matrix   | 2    | `I ⊗ (−iH)`      | `κ_01 = κ/2`       |
//!
//! For rank 0 the coupling term is `κ_"" (T_c |T_j|² − T_j² conj(T_c))`; with
//! `T_j = e^{iθ_j}` this is `i T_j · 2κ_"" Im(T_c e^{−iθ_j})`, which is why the
//! Kuramoto constant is halved.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingIndex, CouplingSet};
use crate::dynamics::{EnsembleState, Rk4, SimParams};
use crate::error::{LoheError, Result};
use crate::freeflow::FreeFlowOp;
use crate::matrix::MatC;
use crate::rng::{member_rng, random_hermitian, random_real_skew, random_unitary, scenario_rng};
use crate::tensor::{frobenius_inner, MultiShape, TensorC, C64};

const UNIT_TOL: f64 = 1e-10;
/// Integrated states drift off the unit sphere at the level of the integrator error.
const PROJECT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReductionKind {
    Kuramoto,
    Sphere,
    #[serde(rename = "lohe-matrix", alias = "matrix")]
    Matrix,
}

impl ReductionKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "kuramoto" => Ok(Self::Kuramoto),
            "sphere" => Ok(Self::Sphere),
            "lohe-matrix" | "matrix" => Ok(Self::Matrix),
            other => Err(LoheError::param(
                "kind",
                format!("unknown model `{other}`; expected kuramoto, sphere or lohe-matrix"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Kuramoto => "kuramoto",
            Self::Sphere => "sphere",
            Self::Matrix => "lohe-matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NativeParams {
    Kuramoto { nu: f64, kappa: f64 },
    Sphere { omega: MatC, kappa: f64 },
    Matrix { h: MatC, kappa: f64 },
}

impl NativeParams {
    pub fn kind(&self) -> ReductionKind {
        match self {
            Self::Kuramoto { .. } => ReductionKind::Kuramoto,
            Self::Sphere { .. } => ReductionKind::Sphere,
            Self::Matrix { .. } => ReductionKind::Matrix,
        }
    }

    pub fn kappa(&self) -> f64 {
        match self {
            Self::Kuramoto { kappa, .. } | Self::Sphere { kappa, .. } | Self::Matrix { kappa, .. } => {
                *kappa
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NativeState {
    Phases(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
    Matrices(Vec<MatC>),
}

impl NativeState {
    pub fn len(&self) -> usize {
        match self {
            Self::Phases(v) => v.len(),
            Self::Vectors(v) => v.len(),
            Self::Matrices(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A native model together with its tensor-model counterpart.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub params: NativeParams,
    pub shape: MultiShape,
    pub free_flow: FreeFlowOp,
    pub couplings: CouplingSet,
    /// Tensor κ divided by native κ.
    pub kappa_factor: f64,
}

impl Reduction {
    pub fn new(params: NativeParams) -> Result<Self> {
        let kappa = params.kappa();
        if !kappa.is_finite() {
            return Err(LoheError::NonFinite("native coupling"));
        }
        let (free_flow, index, factor) = match &params {
            NativeParams::Kuramoto { nu, .. } => (FreeFlowOp::kuramoto(*nu)?, CouplingIndex::zeros(0), 0.5),
            NativeParams::Sphere { omega, .. } => (FreeFlowOp::sphere(omega)?, CouplingIndex::zeros(1), 1.0),
            NativeParams::Matrix { h, .. } => (FreeFlowOp::lohe_matrix(h)?, CouplingIndex::parse("01")?, 0.5),
        };
        let shape = free_flow.shape().clone();
        let couplings = CouplingSet::new(shape.rank()).with(index, factor * kappa);
        Ok(Self {
            params,
            shape,
            free_flow,
            couplings,
            kappa_factor: factor,
        })
    }

    pub fn kind(&self) -> ReductionKind {
        self.params.kind()
    }

    /// Named preset with seeded operator: `kuramoto` (N=3), `sphere` (N=4, d=3), `lohe-matrix` (N=3, d=2).
    pub fn preset(kind: ReductionKind, kappa: f64, seed: u64) -> Result<(Self, NativeState)> {
        let mut rng = scenario_rng(seed);
        let (params, n) = match kind {
            ReductionKind::Kuramoto => (NativeParams::Kuramoto { nu: 0.8, kappa }, 3),
            ReductionKind::Sphere => (
                NativeParams::Sphere {
                    omega: random_real_skew(3, 1.0, &mut rng),
                    kappa,
                },
                4,
            ),
            ReductionKind::Matrix => (
                NativeParams::Matrix {
                    h: random_hermitian(2, 1.0, &mut rng),
                    kappa,
                },
                3,
            ),
        };
        let red = Self::new(params)?;
        let init = red.random_native_state(n, seed)?;
        Ok((red, init))
    }

    /// Uniform phases, unit vectors, or random unitaries, one member stream each.
    pub fn random_native_state(&self, n: usize, seed: u64) -> Result<NativeState> {
        if n == 0 {
            return Err(LoheError::EmptyEnsemble);
        }
        Ok(match &self.params {
            NativeParams::Kuramoto { .. } => NativeState::Phases(
                (0..n)
                    .map(|j| member_rng(seed, j).random_range(-PI..PI))
                    .collect(),
            ),
            NativeParams::Sphere { omega, .. } => NativeState::Vectors(
                (0..n)
                    .map(|j| {
                        let t = crate::rng::random_unit_tensor(
                            &MultiShape::new(vec![omega.rows()]).expect("positive dim"),
                            &mut member_rng(seed, j),
                        );
                        let v: Vec<f64> = t.entries().iter().map(|z| z.re).collect();
                        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        v.iter().map(|x| x / norm).collect()
                    })
                    .collect(),
            ),
            NativeParams::Matrix { h, .. } => NativeState::Matrices(
                (0..n)
                    .map(|j| random_unitary(h.rows(), &mut member_rng(seed, j)))
                    .collect(),
            ),
        })
    }

    pub fn sim_params(&self, dt: f64, horizon: f64) -> SimParams {
        SimParams::new(self.couplings.clone())
            .with_free_flow(self.free_flow.clone())
            .with_dt(dt)
            .with_horizon(horizon)
    }

    pub fn embed(&self, s: &NativeState) -> Result<EnsembleState> {
        let tensors = match (&self.params, s) {
            (NativeParams::Kuramoto { .. }, NativeState::Phases(th)) => {
                if th.iter().any(|t| !t.is_finite()) {
                    return Err(LoheError::NonFinite("phase"));
                }
                th.iter().map(|&t| TensorC::scalar(C64::from_polar(1.0, t))).collect()
            }
            (NativeParams::Sphere { .. }, NativeState::Vectors(xs)) => xs
                .iter()
                .map(|x| {
                    if x.len() != self.shape.size() {
                        return Err(LoheError::ShapeMismatch {
                            expected: self.shape.dims().to_vec(),
                            found: vec![x.len()],
                        });
                    }
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > UNIT_TOL {
                        return Err(LoheError::param("state", format!("vector norm {norm} is not 1")));
                    }
                    TensorC::from_real(&self.shape, x)
                })
                .collect::<Result<Vec<_>>>()?,
            (NativeParams::Matrix { .. }, NativeState::Matrices(us)) => us
                .iter()
                .map(|u| {
                    check_unitary(u, self.shape.dims()[0], UNIT_TOL)?;
                    Ok(u.to_tensor())
                })
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(LoheError::param("state", "native state does not match the model kind")),
        };
        EnsembleState::new(tensors, 0.0)
    }

    /// Inverse of [`Reduction::embed`]; phases come back in (−π, π].
    pub fn project(&self, s: &EnsembleState) -> Result<NativeState> {
        if s.shape() != &self.shape {
            return Err(LoheError::ShapeMismatch {
                expected: self.shape.dims().to_vec(),
                found: s.shape().dims().to_vec(),
            });
        }
        Ok(match self.params {
            NativeParams::Kuramoto { .. } => NativeState::Phases(
                s.tensors()
                    .iter()
                    .map(|t| {
                        let z = t.entries()[0];
                        if (z.norm() - 1.0).abs() > PROJECT_TOL {
                            return Err(LoheError::param("state", "scalar is not unit-modulus"));
                        }
                        Ok(z.arg())
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            NativeParams::Sphere { .. } => NativeState::Vectors(
                s.tensors()
                    .iter()
                    .map(|t| {
                        if (t.frobenius_norm() - 1.0).abs() > PROJECT_TOL {
                            return Err(LoheError::param("state", "vector is not unit-norm"));
                        }
                        Ok(t.entries().iter().map(|z| z.re).collect())
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            NativeParams::Matrix { .. } => NativeState::Matrices(
                s.tensors()
                    .iter()
                    .map(|t| {
                        let u = MatC::from_tensor(t)?;
                        check_unitary(&u, u.rows(), PROJECT_TOL)?;
                        Ok(u)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        })
    }
}

fn check_unitary(u: &MatC, d: usize, tol: f64) -> Result<()> {
    if u.rows() != d || u.cols() != d {
        return Err(LoheError::MatrixDims {
            expected_rows: d,
            expected_cols: d,
            rows: u.rows(),
            cols: u.cols(),
        });
    }
    let defect = u.adjoint().matmul(u)?.sub(&MatC::identity(d)).frobenius_norm();
    if defect > tol {
        return Err(LoheError::param("state", format!("matrix is not unitary (defect {defect:.3e})")));
    }
    Ok(())
}

/// The native right-hand sides, written out literally.
pub fn native_rhs(params: &NativeParams, s: &NativeState) -> Result<NativeState> {
    match (params, s) {
        (NativeParams::Kuramoto { nu, kappa }, NativeState::Phases(th)) => {
            let n = th.len() as f64;
            Ok(NativeState::Phases(
                th.iter()
                    .map(|&tj| nu + kappa / n * th.iter().map(|&tk| (tk - tj).sin()).sum::<f64>())
                    .collect(),
            ))
        }
        (NativeParams::Sphere { omega, kappa }, NativeState::Vectors(xs)) => {
            let d = omega.rows();
            if xs.iter().any(|x| x.len() != d) {
                return Err(LoheError::param("state", format!("vectors must have length {d}")));
            }
            let n = xs.len() as f64;
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let out = xs
                .iter()
                .map(|xj| {
                    let mut dx: Vec<f64> = (0..d)
                        .map(|r| (0..d).map(|c| omega.get(r, c).re * xj[c]).sum())
                        .collect();
                    for xk in xs {
                        let (jj, kj) = (dot(xj, xj), dot(xk, xj));
                        for r in 0..d {
                            dx[r] += kappa / n * (jj * xk[r] - kj * xj[r]);
                        }
                    }
                    dx
                })
                .collect();
            Ok(NativeState::Vectors(out))
        }
        (NativeParams::Matrix { h, kappa }, NativeState::Matrices(us)) => {
            let n = us.len() as f64;
            let minus_ih = h.scale(C64::new(0.0, -1.0));
            let out = us
                .iter()
                .map(|uj| {
                    let mut du = minus_ih.matmul(uj)?;
                    for uk in us {
                        let term = uk.sub(&uj.mul_adjoint(uk)?.matmul(uj)?);
                        du = du.add(&term.scale_real(kappa / (2.0 * n)));
                    }
                    Ok(du)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(NativeState::Matrices(out))
        }
        _ => Err(LoheError::param("state", "native state does not match the model kind")),
    }
}

fn axpy_state(y: &NativeState, k: &NativeState, h: f64) -> NativeState {
    match (y, k) {
        (NativeState::Phases(a), NativeState::Phases(b)) => {
            NativeState::Phases(a.iter().zip(b).map(|(x, d)| x + h * d).collect())
        }
        (NativeState::Vectors(a), NativeState::Vectors(b)) => NativeState::Vectors(
            a.iter()
                .zip(b)
                .map(|(x, d)| x.iter().zip(d).map(|(p, q)| p + h * q).collect())
                .collect(),
        ),
        (NativeState::Matrices(a), NativeState::Matrices(b)) => NativeState::Matrices(
            a.iter().zip(b).map(|(x, d)| x.add(&d.scale_real(h))).collect(),
        ),
        _ => unreachable!("rhs preserves the state kind"),
    }
}

/// One classical RK4 step of the native model.
pub fn native_step(params: &NativeParams, y: &NativeState, dt: f64) -> Result<NativeState> {
    let k1 = native_rhs(params, y)?;
    let k2 = native_rhs(params, &axpy_state(y, &k1, dt / 2.0))?;
    let k3 = native_rhs(params, &axpy_state(y, &k2, dt / 2.0))?;
    let k4 = native_rhs(params, &axpy_state(y, &k3, dt))?;
    let mut out = axpy_state(y, &k1, dt / 6.0);
    out = axpy_state(&out, &k2, dt / 3.0);
    out = axpy_state(&out, &k3, dt / 3.0);
    Ok(axpy_state(&out, &k4, dt / 6.0))
}

/// Max over members of the distance between two native states; phases are compared on the circle.
pub fn native_distance(a: &NativeState, b: &NativeState) -> Result<f64> {
    let mismatch = || LoheError::param("state", "native states differ in kind or size");
    if a.len() != b.len() {
        return Err(mismatch());
    }
    Ok(match (a, b) {
        (NativeState::Phases(x), NativeState::Phases(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| (C64::from_polar(1.0, p - q)).arg().abs())
            .fold(0.0, f64::max),
        (NativeState::Vectors(x), NativeState::Vectors(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max),
        (NativeState::Matrices(x), NativeState::Matrices(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| p.sub(q).frobenius_norm())
            .fold(0.0, f64::max),
        _ => return Err(mismatch()),
    })
}

/// Integrates the native model and the embedded tensor model side by side
/// with the same step and returns the largest projected deviation over all steps.
pub fn cross_validate(red: &Reduction, init: &NativeState, horizon: f64, dt: f64) -> Result<f64> {
    let p = red.sim_params(dt, horizon);
    let ens = red.embed(init)?;
    p.validate(ens.shape())?;
    let mut rk = Rk4::new(ens.shape(), ens.len(), &p)?;
    let mut y: Vec<C64> = ens.tensors().iter().flat_map(|t| t.entries().to_vec()).collect();
    let mut native = init.clone();
    let d = red.shape.size();
    let mut worst: f64 = 0.0;
    for k in 1..=p.steps() {
        rk.step(&mut y, dt);
        native = native_step(&red.params, &native, dt)?;
        let tensors = y
            .chunks_exact(d)
            .map(|c| TensorC::from_vec(&red.shape, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let projected = red.project(&EnsembleState::new(tensors, k as f64 * dt)?)?;
        worst = worst.max(native_distance(&projected, &native)?);
    }
    Ok(worst)
}

/// `−(κ/N) Σ_j 4R² sin²(φ − θ_j)` with `T_c = R e^{iφ}`; `κ` is the tensor coupling, half the native one.
pub fn kuramoto_dissipation(phases: &[f64], kappa: f64) -> f64 {
    let n = phases.len() as f64;
    let zc: C64 = phases.iter().map(|&t| C64::from_polar(1.0, t)).sum::<C64>() / n;
    let (r, phi) = (zc.norm(), zc.arg());
    -kappa / n * phases.iter().map(|&t| 4.0 * r * r * (phi - t).sin().powi(2)).sum::<f64>()
}

/// `−(κ_0/N) Σ (2‖T_j‖²‖T_c‖² − 2 Re⟨T_j,T_c⟩²) − (κ_1/N) Σ 4 (Im⟨T_j,T_c⟩)²` on a rank-1 ensemble.
pub fn sphere_dissipation(s: &EnsembleState, kappa0: f64, kappa1: f64) -> Result<f64> {
    let tc = crate::dynamics::centroid(s);
    let n = s.len() as f64;
    let mut total = 0.0;
    for t in s.tensors() {
        let ip = frobenius_inner(t, &tc)?;
        total -= kappa0 / n * (2.0 * t.norm_sqr() * tc.norm_sqr() - 2.0 * (ip * ip).re);
        total -= kappa1 / n * 4.0 * ip.im * ip.im;
    }
    Ok(total)
}

/// Rank-2 closed forms: `κ_00`/`κ_11` as in the vector case on the flattened matrices,
/// `κ_01 ‖T_cT_j† − T_jT_c†‖²`, `κ_10 ‖T_c†T_j − T_j†T_c‖²`, each averaged over members.
pub fn matrix_dissipation(s: &EnsembleState, couplings: &CouplingSet) -> Result<f64> {
    if s.shape().rank() != 2 || couplings.rank() != 2 {
        return Err(LoheError::RankMismatch {
            expected: 2,
            found: s.shape().rank(),
        });
    }
    let tc = crate::dynamics::centroid(s);
    let mc = MatC::from_tensor(&tc)?;
    let n = s.len() as f64;
    let k = |key: &str| couplings.get(CouplingIndex::parse(key).expect("valid key"));
    let mut total = 0.0;
    for t in s.tensors() {
        let mj = MatC::from_tensor(t)?;
        let ip = frobenius_inner(t, &tc)?;
        let x01 = mc.mul_adjoint(&mj)?.sub(&mj.mul_adjoint(&mc)?);
        let x10 = mc.adjoint().matmul(&mj)?.sub(&mj.adjoint().matmul(&mc)?);
        total -= k("00") / n * (2.0 * t.norm_sqr() * tc.norm_sqr() - 2.0 * (ip * ip).re);
        total -= k("11") / n * 4.0 * ip.im * ip.im;
        total -= k("01") / n * x01.frobenius_norm().powi(2);
        total -= k("10") / n * x10.frobenius_norm().powi(2);
    }
    Ok(total)
}

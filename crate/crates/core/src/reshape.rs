//! Matricization of rank-m tensors along a coupling index, and the
//! matrix-product fast path for cubic contractions.
//!
//! For `i ∈ {0,1}^m`, the axes with `i_k = 0` (ascending) become the row
//! group and the axes with `i_k = 1` (ascending) the column group. Both
//! groups are flattened first-index-fastest, the same mixed-radix rule as
//! [`crate::tensor::linear_offset`]. When `i` is already in standard form
//! (all zeros before all ones) the matrix is the tensor buffer reinterpreted.
//!
//! With this layout the cubic contraction
//! `D[α_{*0}] = A[α_{*i}] conj(B[α_{*1}]) C[α_{*(1-i)}]` becomes
//! `M(D) = M(A) · M(B)† · M(C)`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::coupling::CouplingIndex;
use crate::error::{LoheError, Result};
use crate::matrix::{gemm, gemm_hn, gemm_nh, MatC};
use crate::tensor::{MultiShape, TensorC, C64};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReshapePlan {
    shape: MultiShape,
    index: CouplingIndex,
    zero_axes: Vec<usize>,
    one_axes: Vec<usize>,
    permutation: Vec<usize>,
    rows: usize,
    cols: usize,
    /// `gather[p]` is the tensor offset stored at column-major matrix position `p`.
    gather: Vec<usize>,
    identity: bool,
}

impl ReshapePlan {
    /// Builds a plan without consulting the cache.
    pub fn build(shape: &MultiShape, index: CouplingIndex) -> Result<Self> {
        let m = shape.rank();
        if index.rank() != m {
            return Err(LoheError::RankMismatch {
                expected: m,
                found: index.rank(),
            });
        }
        let zero_axes: Vec<usize> = (0..m).filter(|&k| index.bit(k) == 0).collect();
        let one_axes: Vec<usize> = (0..m).filter(|&k| index.bit(k) == 1).collect();
        let permutation: Vec<usize> = zero_axes.iter().chain(&one_axes).copied().collect();
        let dims = shape.dims();
        let rows: usize = zero_axes.iter().map(|&k| dims[k]).product();
        let cols: usize = one_axes.iter().map(|&k| dims[k]).product();
        let identity = permutation.iter().enumerate().all(|(slot, &axis)| slot == axis);

        let strides = shape.strides();
        let size = shape.size();
        let mut gather = vec![0usize; size];
        // Walk the permuted multi-index in first-slot-fastest order; the running
        // matrix position is then simply 0, 1, 2, …
        let perm_dims: Vec<usize> = permutation.iter().map(|&k| dims[k]).collect();
        let mut coords = vec![0usize; m];
        for slot in gather.iter_mut() {
            *slot = permutation
                .iter()
                .zip(&coords)
                .map(|(&axis, &c)| c * strides[axis])
                .sum();
            for (c, &d) in coords.iter_mut().zip(&perm_dims) {
                *c += 1;
                if *c < d {
                    break;
                }
                *c = 0;
            }
        }
        debug_assert_eq!(rows * cols, size);

        Ok(Self {
            shape: shape.clone(),
            index,
            zero_axes,
            one_axes,
            permutation,
            rows,
            cols,
            gather,
            identity,
        })
    }

    pub fn shape(&self) -> &MultiShape {
        &self.shape
    }

    pub fn index(&self) -> CouplingIndex {
        self.index
    }

    /// I0, ascending.
    pub fn zero_axes(&self) -> &[usize] {
        &self.zero_axes
    }

    /// I1, ascending.
    pub fn one_axes(&self) -> &[usize] {
        &self.one_axes
    }

    /// Slot `k` ↦ original axis.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// DR = Π_{k ∈ I0} d_k.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// DC = Π_{k ∈ I1} d_k.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub(crate) fn gather_into(&self, src: &[C64], dst: &mut [C64]) {
        if self.identity {
            dst.copy_from_slice(src);
        } else {
            for (d, &g) in dst.iter_mut().zip(&self.gather) {
                *d = src[g];
            }
        }
    }

    /// `dst[gather[p]] += scale · src[p]`
    pub(crate) fn scatter_add(&self, src: &[C64], scale: f64, dst: &mut [C64]) {
        if self.identity {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        } else {
            for (&s, &g) in src.iter().zip(&self.gather) {
                dst[g] += s * scale;
            }
        }
    }
}

type PlanKey = (Vec<usize>, usize, u32);

fn plan_cache() -> &'static RwLock<HashMap<PlanKey, Arc<ReshapePlan>>> {
    static CACHE: OnceLock<RwLock<HashMap<PlanKey, Arc<ReshapePlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Cached plan for `(shape, i)`. Concurrent first insertions race benignly: the
/// first writer's plan is kept and returned to everyone.
pub fn plan(shape: &MultiShape, index: CouplingIndex) -> Result<Arc<ReshapePlan>> {
    let key = (shape.dims().to_vec(), index.rank(), index.mask());
    if let Some(p) = plan_cache()
        .read()
        .unwrap_or_else(|e| e.into_inner())
        .get(&key)
    {
        return Ok(Arc::clone(p));
    }
    let built = Arc::new(ReshapePlan::build(shape, index)?);
    let mut cache = plan_cache().write().unwrap_or_else(|e| e.into_inner());
    Ok(Arc::clone(cache.entry(key).or_insert(built)))
}

pub fn matricize(t: &TensorC, p: &ReshapePlan) -> Result<MatC> {
    if t.shape() != &p.shape {
        return Err(LoheError::ShapeMismatch {
            expected: p.shape.dims().to_vec(),
            found: t.shape().dims().to_vec(),
        });
    }
    let mut data = vec![C64::new(0.0, 0.0); t.len()];
    p.gather_into(t.entries(), &mut data);
    MatC::from_col_major(p.rows, p.cols, data)
}

pub fn dematricize(mat: &MatC, p: &ReshapePlan) -> Result<TensorC> {
    if mat.rows() != p.rows || mat.cols() != p.cols {
        return Err(LoheError::MatrixDims {
            expected_rows: p.rows,
            expected_cols: p.cols,
            rows: mat.rows(),
            cols: mat.cols(),
        });
    }
    let mut data = vec![C64::new(0.0, 0.0); p.shape.size()];
    if p.identity {
        data.copy_from_slice(mat.data());
    } else {
        for (&z, &g) in mat.data().iter().zip(&p.gather) {
            data[g] = z;
        }
    }
    Ok(TensorC::from_raw(p.shape.clone(), data))
}

/// `dematricize(M(a) · M(b)† · M(c))`, equal to [`crate::tensor::contract_cubic`] up to roundoff.
pub fn cubic_fast(a: &TensorC, b: &TensorC, c: &TensorC, i: CouplingIndex) -> Result<TensorC> {
    a.check_same_shape(b)?;
    a.check_same_shape(c)?;
    let p = plan(a.shape(), i)?;
    let ma = matricize(a, &p)?;
    let mb = matricize(b, &p)?;
    let mc = matricize(c, &p)?;
    let prod = if p.rows <= p.cols {
        ma.mul_adjoint(&mb)?.matmul(&mc)?
    } else {
        ma.matmul(&mb.adjoint().matmul(&mc)?)?
    };
    dematricize(&prod, &p)
}

/// `X = M(tc)·M(tj)† − M(tj)·M(tc)†`, the DR×DR anti-Hermitian commutator that
/// drives both the coupling term and the variance dissipation.
pub fn commutator(tc: &TensorC, tj: &TensorC, i: CouplingIndex) -> Result<MatC> {
    tc.check_same_shape(tj)?;
    let p = plan(tc.shape(), i)?;
    let mc = matricize(tc, &p)?;
    let mj = matricize(tj, &p)?;
    Ok(mc.mul_adjoint(&mj)?.sub(&mj.mul_adjoint(&mc)?))
}

/// Scratch buffers for allocation-free evaluation of one coupling term.
#[derive(Debug, Clone)]
pub(crate) struct CouplingScratch {
    plan: Arc<ReshapePlan>,
    mc: Vec<C64>,
    mj: Vec<C64>,
    small_a: Vec<C64>,
    small_b: Vec<C64>,
    out: Vec<C64>,
}

impl CouplingScratch {
    pub(crate) fn new(plan: Arc<ReshapePlan>) -> Self {
        let (r, c) = (plan.rows, plan.cols);
        let small = if r <= c { r * r } else { c * c };
        Self {
            mc: vec![C64::new(0.0, 0.0); r * c],
            mj: vec![C64::new(0.0, 0.0); r * c],
            small_a: vec![C64::new(0.0, 0.0); small],
            small_b: vec![C64::new(0.0, 0.0); small],
            out: vec![C64::new(0.0, 0.0); r * c],
            plan,
        }
    }

    /// Loads `M(tc)`; reused across all members within one right-hand-side evaluation.
    pub(crate) fn load_centroid(&mut self, tc: &[C64]) {
        self.plan.gather_into(tc, &mut self.mc);
    }

    /// `dst += κ · [cubic(tc, tj, tj) − cubic(tj, tc, tj)]` using the loaded centroid.
    pub(crate) fn add_coupling(&mut self, tj: &[C64], kappa: f64, dst: &mut [C64]) {
        let (r, c) = (self.plan.rows, self.plan.cols);
        self.plan.gather_into(tj, &mut self.mj);
        let zero = C64::new(0.0, 0.0);
        self.out.fill(zero);
        self.small_a.fill(zero);
        self.small_b.fill(zero);
        if r <= c {
            // X = Mc Mj† − Mj Mc†, out = X Mj
            gemm_nh(&self.mc, r, c, &self.mj, r, &mut self.small_a);
            for row in 0..r {
                for col in 0..r {
                    let v = self.small_a[row + r * col] - self.small_a[col + r * row].conj();
                    self.small_b[row + r * col] = v;
                }
            }
            gemm(&self.small_b, r, r, &self.mj, c, &mut self.out);
        } else {
            // out = Mc (Mj† Mj) − Mj (Mc† Mj)
            gemm_hn(&self.mj, r, c, &self.mj, c, &mut self.small_a);
            gemm_hn(&self.mc, r, c, &self.mj, c, &mut self.small_b);
            gemm(&self.mc, r, c, &self.small_a, c, &mut self.out);
            for z in self.small_b.iter_mut() {
                *z = -*z;
            }
            gemm(&self.mj, r, c, &self.small_b, c, &mut self.out);
        }
        self.plan.scatter_add(&self.out, kappa, dst);
    }
}

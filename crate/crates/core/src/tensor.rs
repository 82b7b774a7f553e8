//! Dense rank-m complex tensors.
//!
//! Entries are stored first-index-fastest: the multi-index `(α_0, …, α_{m-1})`
//! (0-based; the mathematical 1-based `α_k` maps to `α_k - 1`) lives at
//! offset `Σ_k α_k · Π_{l<k} d_l`. Rank 0 is a scalar with a single entry.
//!
//! The JSON form is
//! `{"schema_version": 1, "shape": [d_1, …, d_m], "entries": [[re, im], …]}`
//! with entries in the same canonical order.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingIndex;
use crate::error::{LoheError, Result};

pub type C64 = Complex64;

pub const TENSOR_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiShape {
    dims: Vec<usize>,
    size: usize,
}

impl MultiShape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.contains(&0) {
            return Err(LoheError::InvalidShape {
                dims,
                reason: "every dimension must be at least 1".into(),
            });
        }
        if dims.len() > crate::coupling::MAX_RANK {
            return Err(LoheError::InvalidShape {
                dims,
                reason: format!("rank above {}", crate::coupling::MAX_RANK),
            });
        }
        let size = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| LoheError::InvalidShape {
                dims: dims.clone(),
                reason: "total size overflows".into(),
            })?;
        Ok(Self { dims, size })
    }

    pub fn scalar() -> Self {
        Self {
            dims: Vec::new(),
            size: 1,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// D = Π d_k (1 for rank 0).
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = Vec::with_capacity(self.dims.len());
        let mut acc = 1;
        for &d in &self.dims {
            strides.push(acc);
            acc *= d;
        }
        strides
    }

    /// Inverse of [`linear_offset`].
    pub fn unravel(&self, mut offset: usize) -> MultiIndex {
        let mut coords = Vec::with_capacity(self.dims.len());
        for &d in &self.dims {
            coords.push(offset % d);
            offset /= d;
        }
        MultiIndex { coords }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub coords: Vec<usize>,
}

impl MultiIndex {
    pub fn new(coords: impl Into<Vec<usize>>) -> Self {
        Self {
            coords: coords.into(),
        }
    }
}

pub fn linear_offset(idx: &MultiIndex, shape: &MultiShape) -> Result<usize> {
    let oob = || LoheError::IndexOutOfBounds {
        coords: idx.coords.clone(),
        dims: shape.dims.clone(),
    };
    if idx.coords.len() != shape.rank() {
        return Err(oob());
    }
    let mut offset = 0;
    let mut stride = 1;
    for (&c, &d) in idx.coords.iter().zip(&shape.dims) {
        if c >= d {
            return Err(oob());
        }
        offset += c * stride;
        stride *= d;
    }
    Ok(offset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorC {
    shape: MultiShape,
    data: Vec<C64>,
}

impl TensorC {
    pub fn zeros(shape: &MultiShape) -> Self {
        Self {
            shape: shape.clone(),
            data: vec![C64::new(0.0, 0.0); shape.size()],
        }
    }

    pub fn from_vec(shape: &MultiShape, data: Vec<C64>) -> Result<Self> {
        if data.len() != shape.size() {
            return Err(LoheError::InvalidShape {
                dims: shape.dims.clone(),
                reason: format!("expected {} entries, got {}", shape.size(), data.len()),
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LoheError::NonFinite("tensor entries"));
        }
        Ok(Self {
            shape: shape.clone(),
            data,
        })
    }

    pub fn from_real(shape: &MultiShape, data: &[f64]) -> Result<Self> {
        Self::from_vec(shape, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn scalar(z: C64) -> Self {
        Self {
            shape: MultiShape::scalar(),
            data: vec![z],
        }
    }

    /// Unit basis tensor with a single 1 at `offset`.
    pub fn basis(shape: &MultiShape, offset: usize) -> Result<Self> {
        if offset >= shape.size() {
            return Err(LoheError::IndexOutOfBounds {
                coords: vec![offset],
                dims: shape.dims.clone(),
            });
        }
        let mut t = Self::zeros(shape);
        t.data[offset] = C64::new(1.0, 0.0);
        Ok(t)
    }

    pub(crate) fn from_raw(shape: MultiShape, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.size(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &MultiShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, idx: &MultiIndex) -> Result<C64> {
        Ok(self.data[linear_offset(idx, &self.shape)?])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|&z| z * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|&z| z * s).collect())
    }

    pub fn add(&self, other: &TensorC) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_raw(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &TensorC) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_raw(
            self.shape.clone(),
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `self += s · other`
    pub fn axpy(&mut self, s: C64, other: &TensorC) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Rescale to unit Frobenius norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.frobenius_norm();
        if n == 0.0 || !n.is_finite() {
            return Err(LoheError::param("tensor", "cannot normalize a zero or non-finite tensor"));
        }
        Ok(self.scale_real(1.0 / n))
    }

    pub fn distance(&self, other: &TensorC) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &TensorC) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub(crate) fn check_same_shape(&self, other: &TensorC) -> Result<()> {
        if self.shape != other.shape {
            return Err(LoheError::ShapeMismatch {
                expected: self.shape.dims.clone(),
                found: other.shape.dims.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            schema_version: TENSOR_SCHEMA_VERSION,
            shape: self.shape.dims.clone(),
            entries: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path.as_ref(), text).map_err(|e| LoheError::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| LoheError::io(&path, e))?;
        let json: TensorJson = serde_json::from_str(&text)?;
        TensorC::try_from(json)
    }
}

/// Serialized tensor: shape header, then `[re, im]` pairs in canonical layout order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorJson {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub shape: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
}

fn default_schema() -> u32 {
    TENSOR_SCHEMA_VERSION
}

impl TryFrom<TensorJson> for TensorC {
    type Error = LoheError;

    fn try_from(json: TensorJson) -> Result<Self> {
        if json.schema_version != TENSOR_SCHEMA_VERSION {
            return Err(LoheError::Config(format!(
                "unsupported tensor schema_version {}",
                json.schema_version
            )));
        }
        let shape = MultiShape::new(json.shape)?;
        TensorC::from_vec(
            &shape,
            json.entries.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        )
    }
}

impl Serialize for TensorC {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TensorC {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = TensorJson::deserialize(d)?;
        TensorC::try_from(json).map_err(serde::de::Error::custom)
    }
}

/// ⟨a, b⟩_F = Σ_α conj(a_α) b_α, conjugate-linear in the first argument.
pub fn frobenius_inner(a: &TensorC, b: &TensorC) -> Result<C64> {
    a.check_same_shape(b)?;
    Ok(inner_slices(&a.data, &b.data))
}

#[inline]
pub(crate) fn inner_slices(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// D(T) = max_{i,j} ‖T_i − T_j‖_F.
pub fn ensemble_diameter(ts: &[TensorC]) -> Result<f64> {
    let first = ts.first().ok_or(LoheError::EmptyEnsemble)?;
    let mut max = 0.0f64;
    for (i, a) in ts.iter().enumerate() {
        first.check_same_shape(a)?;
        for b in &ts[i + 1..] {
            max = max.max(a.distance(b)?);
        }
    }
    Ok(max)
}

/// Naive cubic contraction `D[α_{*0}] = a[α_{*i}] · conj(b[α_{*1}]) · c[α_{*(1-i)}]`,
/// summing over the `α_{*1}` multi-index. This loop is the reference definition;
/// [`crate::reshape::cubic_fast`] is checked against it.
pub fn contract_cubic(a: &TensorC, b: &TensorC, c: &TensorC, i: CouplingIndex) -> Result<TensorC> {
    a.check_same_shape(b)?;
    a.check_same_shape(c)?;
    let shape = a.shape();
    if i.rank() != shape.rank() {
        return Err(LoheError::RankMismatch {
            expected: shape.rank(),
            found: i.rank(),
        });
    }
    let size = shape.size();
    let strides = shape.strides();
    let mut out = vec![C64::new(0.0, 0.0); size];
    for (o0, slot) in out.iter_mut().enumerate() {
        let free = shape.unravel(o0);
        let mut acc = C64::new(0.0, 0.0);
        for o1 in 0..size {
            let summed = shape.unravel(o1);
            let mut off_i = 0;
            let mut off_ci = 0;
            for k in 0..shape.rank() {
                let (x, y) = if i.bit(k) == 0 {
                    (free.coords[k], summed.coords[k])
                } else {
                    (summed.coords[k], free.coords[k])
                };
                off_i += x * strides[k];
                off_ci += y * strides[k];
            }
            acc += a.data[off_i] * b.data[o1].conj() * c.data[off_ci];
        }
        *slot = acc;
    }
    Ok(TensorC::from_raw(shape.clone(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_complex_tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(d: &[usize]) -> MultiShape {
        MultiShape::new(d.to_vec()).unwrap()
    }

    #[test]
    fn offsets_match_examples() {
        let s = shape(&[2, 3]);
        assert_eq!(linear_offset(&MultiIndex::new([0, 0]), &s).unwrap(), 0);
        assert_eq!(linear_offset(&MultiIndex::new([1, 0]), &s).unwrap(), 1);
        assert_eq!(linear_offset(&MultiIndex::new([1, 2]), &s).unwrap(), 5);
    }

    #[test]
    fn offset_bijection_by_enumeration() {
        let s = shape(&[2, 3]);
        let mut seen = [false; 6];
        for a in 0..2 {
            for b in 0..3 {
                let o = linear_offset(&MultiIndex::new([a, b]), &s).unwrap();
                assert!(!seen[o]);
                seen[o] = true;
                assert_eq!(s.unravel(o).coords, vec![a, b]);
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn offset_bijection_exhaustive_up_to_4096() {
        let shapes: Vec<Vec<usize>> = vec![
            vec![],
            vec![4096],
            vec![64, 64],
            vec![16, 16, 16],
            vec![2, 3, 5, 7, 9],
            vec![8, 8, 8, 8],
            vec![1, 4, 1, 3],
        ];
        for dims in shapes {
            let s = shape(&dims);
            assert!(s.size() <= 4096);
            let mut seen = vec![false; s.size()];
            for o in 0..s.size() {
                let idx = s.unravel(o);
                let back = linear_offset(&idx, &s).unwrap();
                assert_eq!(back, o);
                assert!(!seen[back]);
                seen[back] = true;
            }
        }
    }

    #[test]
    fn offset_out_of_bounds() {
        let s = shape(&[2, 3]);
        assert!(linear_offset(&MultiIndex::new([2, 0]), &s).is_err());
        assert!(linear_offset(&MultiIndex::new([0]), &s).is_err());
    }

    #[test]
    fn scalar_shape_has_size_one() {
        let s = MultiShape::scalar();
        assert_eq!(s.size(), 1);
        assert_eq!(linear_offset(&MultiIndex::new(vec![]), &s).unwrap(), 0);
        assert!(MultiShape::new(vec![2, 0]).is_err());
    }

    #[test]
    fn inner_product_basis() {
        let s = shape(&[3]);
        let e0 = TensorC::basis(&s, 0).unwrap();
        let e1 = TensorC::basis(&s, 1).unwrap();
        assert_eq!(frobenius_inner(&e0, &e0).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(frobenius_inner(&e0, &e1).unwrap(), C64::new(0.0, 0.0));
        assert!(frobenius_inner(&e0, &TensorC::zeros(&shape(&[2]))).is_err());
    }

    #[test]
    fn inner_product_matches_triple_loop() {
        let s = shape(&[2, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = standard_complex_tensor(&s, &mut rng);
        let b = standard_complex_tensor(&s, &mut rng);
        let mut oracle = C64::new(0.0, 0.0);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let idx = MultiIndex::new([x, y, z]);
                    oracle += a.get(&idx).unwrap().conj() * b.get(&idx).unwrap();
                }
            }
        }
        let got = frobenius_inner(&a, &b).unwrap();
        assert!((got - oracle).norm() < 1e-14);
        let swapped = frobenius_inner(&b, &a).unwrap();
        assert!((got - swapped.conj()).norm() < 1e-15);
    }

    #[test]
    fn diameter_examples() {
        let s = shape(&[2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = standard_complex_tensor(&s, &mut rng).normalized().unwrap();
        assert_eq!(ensemble_diameter(&[t.clone(), t.clone(), t.clone()]).unwrap(), 0.0);
        let d = ensemble_diameter(&[t.clone(), t.scale_real(-1.0)]).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
        assert!(matches!(ensemble_diameter(&[]), Err(LoheError::EmptyEnsemble)));

        let ts: Vec<_> = (0..3)
            .map(|_| standard_complex_tensor(&s, &mut rng).normalized().unwrap())
            .collect();
        let pairwise = [
            ts[0].distance(&ts[1]).unwrap(),
            ts[0].distance(&ts[2]).unwrap(),
            ts[1].distance(&ts[2]).unwrap(),
        ];
        let oracle = pairwise.iter().cloned().fold(0.0, f64::max);
        assert_eq!(ensemble_diameter(&ts).unwrap(), oracle);
    }

    #[test]
    fn cubic_rank_one_closed_forms() {
        let s = shape(&[3]);
        let e0 = TensorC::basis(&s, 0).unwrap();
        let i0 = CouplingIndex::parse("0").unwrap();
        let i1 = CouplingIndex::parse("1").unwrap();
        assert_eq!(contract_cubic(&e0, &e0, &e0, i0).unwrap(), e0);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = standard_complex_tensor(&s, &mut rng);
        let b = standard_complex_tensor(&s, &mut rng);
        let c = standard_complex_tensor(&s, &mut rng);
        // i = (1): ⟨b, a⟩ · c
        let expect = c.scale(frobenius_inner(&b, &a).unwrap());
        let got = contract_cubic(&a, &b, &c, i1).unwrap();
        assert!(got.max_abs_diff(&expect).unwrap() < 1e-14);
        // i = (0): a · ⟨b, c⟩
        let expect = a.scale(frobenius_inner(&b, &c).unwrap());
        let got = contract_cubic(&a, &b, &c, i0).unwrap();
        assert!(got.max_abs_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn cubic_extreme_indices_reduce_to_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dims in [vec![2, 3], vec![2, 2, 2], vec![3, 1, 2]] {
            let s = shape(&dims);
            let a = standard_complex_tensor(&s, &mut rng);
            let b = standard_complex_tensor(&s, &mut rng);
            let c = standard_complex_tensor(&s, &mut rng);
            let m = s.rank();
            let ones = contract_cubic(&a, &b, &c, CouplingIndex::ones(m)).unwrap();
            let expect = c.scale(frobenius_inner(&b, &a).unwrap());
            assert!(ones.max_abs_diff(&expect).unwrap() < 1e-13);
            let zeros = contract_cubic(&a, &b, &c, CouplingIndex::zeros(m)).unwrap();
            let expect = a.scale(frobenius_inner(&b, &c).unwrap());
            assert!(zeros.max_abs_diff(&expect).unwrap() < 1e-13);
        }
    }

    #[test]
    fn cubic_rank_mismatch() {
        let s = shape(&[2, 2]);
        let t = TensorC::zeros(&s);
        assert!(matches!(
            contract_cubic(&t, &t, &t, CouplingIndex::parse("0").unwrap()),
            Err(LoheError::RankMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let s = shape(&[2]);
        assert!(TensorC::from_vec(&s, vec![C64::new(f64::NAN, 0.0), C64::new(0.0, 0.0)]).is_err());
        assert!(TensorC::from_vec(&s, vec![C64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = shape(&[2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = standard_complex_tensor(&s, &mut rng);
        let text = serde_json::to_string(&t).unwrap();
        let back: TensorC = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        let bad = r#"{"shape":[2],"entries":[[1,0]]}"#;
        assert!(serde_json::from_str::<TensorC>(bad).is_err());
    }
}

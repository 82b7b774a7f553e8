//! Seeded random generation.
//!
//! A single 64-bit seed drives everything. Each ensemble member `j` draws from
//! its own ChaCha8 stream (`stream = j + 1`) keyed by that seed, so initial data
//! does not depend on evaluation order or thread count. Stream 0 is used for
//! scenario-level draws such as the cluster centre; randomly generated free-flow
//! operators use the last stream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::MatC;
use crate::tensor::{MultiShape, TensorC, C64};

pub fn scenario_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

pub fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64 + 1);
    rng
}

/// Stream reserved for randomly generated free-flow operators.
pub fn operator_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

/// Standard complex Gaussian: real and imaginary parts i.i.d. N(0, 1/2).
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn standard_complex_tensor<R: Rng + ?Sized>(shape: &MultiShape, rng: &mut R) -> TensorC {
    let data = (0..shape.size()).map(|_| standard_complex(rng)).collect();
    TensorC::from_raw(shape.clone(), data)
}

/// Uniform on the unit Frobenius sphere.
pub fn random_unit_tensor<R: Rng + ?Sized>(shape: &MultiShape, rng: &mut R) -> TensorC {
    loop {
        let t = standard_complex_tensor(shape, rng);
        if let Ok(n) = t.normalized() {
            return n;
        }
    }
}

pub fn random_complex_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MatC {
    let data = (0..n * n).map(|_| standard_complex(rng)).collect();
    MatC::from_col_major(n, n, data).expect("square data")
}

/// (G − G†)/2 for complex Gaussian G, rescaled to spectral-ish scale `scale` (Frobenius norm / √n).
pub fn random_skew_hermitian<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> MatC {
    let g = random_complex_matrix(n, rng);
    let mut s = g.sub(&g.adjoint()).scale_real(0.5);
    let f = s.frobenius_norm();
    if f > 0.0 {
        s = s.scale_real(scale * (n as f64).sqrt() / f);
    }
    s
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> MatC {
    random_skew_hermitian(n, scale, rng).scale(C64::new(0.0, 1.0))
}

/// Real antisymmetric matrix with entries N(0, scale²) above the diagonal.
pub fn random_real_skew<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> MatC {
    let mut m = MatC::zeros(n, n);
    for c in 0..n {
        for r in 0..c {
            let x: f64 = rng.sample::<f64, _>(StandardNormal) * scale;
            m.set(r, c, C64::new(x, 0.0));
            m.set(c, r, C64::new(-x, 0.0));
        }
    }
    m
}

/// Haar-ish random unitary: exponential of a random skew-Hermitian matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MatC {
    crate::expm::expm(&random_skew_hermitian(n, 2.0, rng)).expect("finite input")
}

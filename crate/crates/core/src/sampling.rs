//! Deterministic low-discrepancy sampling used by validators and searches.

use alloc::vec::Vec;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101,
    103, 107, 109, 113, 127, 131,
];

/// Radical inverse of `index` in `base`, in `[0, 1)`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// The `index`-th point (1-based skip) of the Halton sequence in `[0,1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| radical_inverse(index + 1, PRIMES[d % PRIMES.len()]))
        .collect()
}

/// Maps a Halton point to `[lo, hi]^dim`.
pub fn halton_box(index: u64, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    halton(index, dim).into_iter().map(|u| lo + (hi - lo) * u).collect()
}

/// Roughly uniform point on the unit sphere in `R^dim` (Box-Muller on Halton pairs).
pub fn sphere_point(index: u64, dim: usize) -> Vec<f64> {
    let u = halton(index, 2 * dim);
    let mut v: Vec<f64> = (0..dim)
        .map(|i| {
            let a = u[2 * i].max(1e-12);
            let b = u[2 * i + 1];
            libm::sqrt(-2.0 * libm::log(a)) * libm::cos(2.0 * core::f64::consts::PI * b)
        })
        .collect();
    let n = crate::linalg::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    } else if dim > 0 {
        v[0] = 1.0;
    }
    v
}

/// Small deterministic generator for tests and randomized reparameterizations.
#[derive(Debug, Clone)]
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

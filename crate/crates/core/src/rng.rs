//! Counter-based Gaussian noise.
//!
//! Every standard normal used by the simulator is a pure function of
//! `(master_seed, path_index, j)` where `j` is the index of the draw inside
//! the path. No generator state is shared between paths, so ensembles can
//! be split across workers in any order and still produce the same bits.
//!
//! The construction is fixed:
//!
//! 1. `mix64` is the SplitMix64 finalizer
//!    (`z ^= z >> 30; z *= 0xbf58476d1ce4e5b9; z ^= z >> 27;
//!    z *= 0x94d049bb133111eb; z ^= z >> 31`).
//! 2. The path key is
//!    `mix64(mix64(seed ^ 0x6a09e667f3bcc909) ^ path.wrapping_mul(0x9e3779b97f4a7c15))`.
//! 3. The raw 64-bit word `n` of a path is `mix64(key + (n + 1)·0x9e3779b97f4a7c15)`,
//!    i.e. random access into a SplitMix64 sequence seeded with the key.
//! 4. Normals come in Box–Muller pairs. Pair `p` uses words `2p` and `2p+1`:
//!    `u1 = ((w0 >> 11) + 1)·2^-53 ∈ (0, 1]`, `u2 = (w1 >> 11)·2^-53`,
//!    `ρ = sqrt(-2 ln u1)`. Draw `j = 2p` is `ρ cos(2π u2)` and draw
//!    `j = 2p + 1` is `ρ sin(2π u2)`.

use core::f64::consts::PI;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const SEED_SALT: u64 = 0x6a09_e667_f3bc_c909;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Normal draws for one path.
#[derive(Clone, Copy, Debug)]
pub struct NoiseStream {
    key: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let key = mix64(mix64(master_seed ^ SEED_SALT) ^ path_index.wrapping_mul(GOLDEN_GAMMA));
        NoiseStream { key }
    }

    #[inline]
    pub fn word(&self, n: u64) -> u64 {
        mix64(self.key.wrapping_add(n.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform on `[0, 1)` built from word `n`.
    #[inline]
    pub fn uniform(&self, n: u64) -> f64 {
        (self.word(n) >> 11) as f64 * TWO_POW_M53
    }

    /// Both members of Box–Muller pair `p`.
    #[inline]
    pub fn normal_pair(&self, p: u64) -> (f64, f64) {
        let u1 = ((self.word(2 * p) >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.word(2 * p + 1) >> 11) as f64 * TWO_POW_M53;
        let rho = libm::sqrt(-2.0 * libm::log(u1));
        let (s, c) = libm::sincos(2.0 * PI * u2);
        (rho * c, rho * s)
    }

    /// Standard normal draw `j`.
    #[inline]
    pub fn normal(&self, j: u64) -> f64 {
        let (a, b) = self.normal_pair(j / 2);
        if j % 2 == 0 {
            a
        } else {
            b
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn splitmix_finalizer_reference() {
        // First output of the reference SplitMix64 generator seeded with 0
        // is mix64(0x9e3779b97f4a7c15).
        assert_eq!(mix64(GOLDEN_GAMMA), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn pinned_first_normals_for_seed_zero() {
        let s = NoiseStream::new(0, 0);
        let got: Vec<u64> = (0..4).map(|j| s.normal(j).to_bits()).collect();
        assert_eq!(got, PINNED_SEED0);
    }

    // Frozen from the first run and matched by an independent
    // reimplementation (-0.2288, 1.3395, -1.6954, -1.6496); any change to
    // the mixer or the transform breaks reproducibility.
    const PINNED_SEED0: [u64; 4] = [13820783646632883605, 4608711469404600528, 13833686386919783090, 13833480014775696399];

    #[test]
    fn pair_members_match_single_draws() {
        let s = NoiseStream::new(42, 7);
        for p in 0..10 {
            let (a, b) = s.normal_pair(p);
            assert_eq!(a.to_bits(), s.normal(2 * p).to_bits());
            assert_eq!(b.to_bits(), s.normal(2 * p + 1).to_bits());
        }
    }

    #[test]
    fn moments_are_standard() {
        let s = NoiseStream::new(1, 3);
        let n = 200_000u64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for j in 0..n {
            let z = s.normal(j);
            m1 += z;
            m2 += z * z;
        }
        let mean = m1 / n as f64;
        let var = m2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn streams_differ_between_paths_and_seeds() {
        let a = NoiseStream::new(0, 0).normal(0);
        let b = NoiseStream::new(0, 1).normal(0);
        let c = NoiseStream::new(1, 0).normal(0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}

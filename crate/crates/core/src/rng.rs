//! Splittable, counter-style random streams.
//!
//! A [`Stream`] is a 64-bit key. Child streams are derived by mixing the
//! parent key with a label, so the random numbers used for trial `t`, or for
//! a particular beam-pair measurement inside that trial, depend only on the
//! key path and never on the order in which work is scheduled. Serial and
//! parallel runs therefore draw identical numbers.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Label of the channel-realization substream of a trial.
pub const LABEL_CHANNEL: u64 = 0x6368_616e_6e65_6c00;
/// Label of the measurement-noise substream of a trial.
pub const LABEL_NOISE: u64 = 0x6e6f_6973_6500_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn root(seed: u64) -> Self {
        Self {
            key: mix64(seed ^ 0x5851_f42d_4c95_7f2d),
        }
    }

    /// Deterministic child stream; does not advance or mutate `self`.
    pub fn derive(&self, label: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(label.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Generator seeded from this stream's key.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }

    /// One CN(0, 1) value fixed by the key, by the polar method on two
    /// hashed words. Much cheaper than seeding a generator for a single draw.
    pub fn complex_normal(&self) -> Complex64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let a = mix64(self.key ^ 0x243f_6a88_85a3_08d3);
        let b = mix64(self.key.wrapping_add(0x1319_8a2e_0370_7344));
        let u1 = ((a >> 11) as f64 + 0.5) * SCALE;
        let u2 = (b >> 11) as f64 * SCALE;
        // |z|² ~ Exp(1) with a uniform phase.
        Complex64::from_polar((-u1.ln()).sqrt(), std::f64::consts::TAU * u2)
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Circularly-symmetric complex Gaussian with unit variance, CN(0, 1).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

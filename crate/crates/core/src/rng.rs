//! Counter-based seeding.
//!
//! Every stochastic routine takes a [`SeedStream`], a `(master seed, stream id)`
//! pair mapped onto a ChaCha8 key and stream. Child streams are derived by
//! hashing a label into the stream id, so independent runs, iterations and
//! particles never share generator state and results do not depend on the
//! order in which work is scheduled.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Handle from which a reproducible generator is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub master: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        SeedStream { master, stream: 0 }
    }

    /// Derive an independent child stream identified by `id`.
    pub fn child(&self, id: u64) -> Self {
        let stream = splitmix64(self.stream ^ splitmix64(id.wrapping_add(0xA076_1D64_78BD_642F)));
        SeedStream {
            master: self.master,
            stream,
        }
    }

    /// Derive a child stream from a textual label (e.g. an estimator name).
    pub fn named(&self, label: &str) -> Self {
        // FNV-1a; stable across platforms and releases.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        self.child(h)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

/// Uniform draw on the open interval (0, 1); exact zeros are rejected.
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Uniform angle strictly inside (-pi/2, pi/2).
pub fn open_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = PI * (open_unit(rng) - 0.5);
        if u.abs() < std::f64::consts::FRAC_PI_2 && u.cos() > 0.0 {
            return u;
        }
    }
}

/// Unit-mean exponential variate by inverse CDF.
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -open_unit(rng).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = SeedStream::new(7);
        let a: Vec<u64> = (0..4).map(|_| 0).scan(s.child(1).rng(), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(s.child(1).rng(), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(s.child(2).rng(), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(s.child(1), s.named("1"));
    }

    #[test]
    fn open_draws_stay_inside() {
        let mut rng = SeedStream::new(3).rng();
        for _ in 0..10_000 {
            let u = open_angle(&mut rng);
            assert!(u.abs() < std::f64::consts::FRAC_PI_2);
            let v = unit_exponential(&mut rng);
            assert!(v > 0.0 && v.is_finite());
        }
    }
}

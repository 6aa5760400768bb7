//! Counter-addressable Gaussian noise.
//!
//! Every trajectory owns a ChaCha8 stream selected by its index, and every
//! integrator step starts at a fixed offset inside that stream. The noise
//! used at (seed, trajectory, step, channel) is therefore fixed by those four
//! numbers alone and does not depend on which worker runs the trajectory or
//! in which order.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Words of keystream reserved for one step (2^24 = 16M words). A step needs
/// a few words per channel, so blocks never overlap in practice.
const STEP_SHIFT: u32 = 24;

#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    traj: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, traj: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(traj);
        rng.set_word_pos(0);
        Self { rng, traj }
    }

    pub fn trajectory(&self) -> u64 {
        self.traj
    }

    /// Positions the stream at the start of `step`; channels are then drawn in order.
    #[inline]
    pub fn seek_step(&mut self, step: u64) {
        self.rng.set_word_pos((step as u128) << STEP_SHIFT);
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Complex increment with `<|dW|^2> = dt`: `sqrt(dt/2) (xi_1 + i xi_2)`.
    #[inline]
    pub fn complex_increment(&mut self, dt: f64) -> Complex64 {
        let s = (0.5 * dt).sqrt();
        let re = self.normal();
        let im = self.normal();
        Complex64::new(s * re, s * im)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_address_same_values() {
        let mut a = NoiseStream::new(7, 3);
        let mut b = NoiseStream::new(7, 3);
        // consume a different amount before seeking
        for _ in 0..17 {
            a.normal();
        }
        a.seek_step(42);
        b.seek_step(42);
        for _ in 0..10 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn streams_differ_by_trajectory_and_step() {
        let mut a = NoiseStream::new(7, 0);
        let mut b = NoiseStream::new(7, 1);
        a.seek_step(0);
        b.seek_step(0);
        assert_ne!(a.normal(), b.normal());
        a.seek_step(1);
        let x = a.normal();
        a.seek_step(2);
        assert_ne!(x, a.normal());
    }

    #[test]
    fn complex_increment_variance() {
        let mut s = NoiseStream::new(1, 0);
        let dt = 0.05;
        let n = 200_000;
        let mut acc = 0.0;
        let mut re2 = 0.0;
        for _ in 0..n {
            let z = s.complex_increment(dt);
            acc += z.norm_sqr();
            re2 += z.re * z.re;
        }
        let mean = acc / n as f64;
        // E|dW|^2 = dt, standard error dt/sqrt(n)
        assert!((mean - dt).abs() < 5.0 * dt / (n as f64).sqrt());
        assert!((re2 / n as f64 - dt / 2.0).abs() < 5.0 * dt / (n as f64).sqrt());
    }
}

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};

use crate::error::{Error, Result};

/// Counter-based random stream identified by `(seed, stream_id)`.
///
/// Two values built from the same pair produce bitwise-identical sequences,
/// independent of which thread consumes them. Cloning copies the position in
/// the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh, independent stream for a named sub-task (chain `k`, proposal
    /// draws, bootstrap resampling, ...). Deterministic in `(seed, stream_id,
    /// tag)` and independent of how much of `self` has been consumed.
    pub fn substream(&self, tag: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x51_7c_c1_b7))), self.stream_id)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Uniform on the open interval (0, 1).
pub fn draw_uniform(rng: &mut SeededRng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn draw_standard_normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn draw_student_t(nu: f64, rng: &mut SeededRng) -> Result<f64> {
    let dist = StudentT::new(nu)
        .map_err(|_| Error::domain(alloc::format!("student t requires nu > 0, got {nu}")))?;
    Ok(dist.sample(rng))
}

/// Gamma variate with the given shape and *rate*.
pub fn draw_gamma(shape: f64, rate: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain("gamma requires shape > 0 and finite rate > 0"));
    }
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|_| Error::domain("invalid gamma parameters"))?;
    Ok(dist.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = SeededRng::new(42, 3);
            (0..16).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = SeededRng::new(42, 3);
            (0..16).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = SeededRng::new(42, 4);
            (0..16).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn substreams_ignore_consumption() {
        let fresh = SeededRng::new(9, 1);
        let mut used = fresh.clone();
        for _ in 0..100 {
            used.next_u64();
        }
        let mut s1 = fresh.substream(5);
        let mut s2 = used.substream(5);
        assert_eq!(s1.next_u64(), s2.next_u64());
        assert_ne!(fresh.substream(5).next_u64(), fresh.substream(6).next_u64());
    }

    #[test]
    fn uniform_is_open() {
        let mut r = SeededRng::new(1, 0);
        for _ in 0..10_000 {
            let u = draw_uniform(&mut r);
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn moment_checks_at_one_million() {
        const N: usize = 1_000_000;
        let mut r = SeededRng::new(2024, 0);
        let z: Vec<f64> = (0..N).map(|_| draw_standard_normal(&mut r)).collect();
        let (m, _) = mean_var(&z);
        assert!(m.abs() < 0.004, "normal mean {m}");

        let t: Vec<f64> = (0..N).map(|_| draw_student_t(10.0, &mut r).unwrap()).collect();
        let (_, v) = mean_var(&t);
        // Var(s^2) ≈ (mu4 - sigma^4) / N with mu4 = 3 nu^2 / ((nu-2)(nu-4)) = 6.25
        let se = ((6.25 - 1.25f64 * 1.25) / N as f64).sqrt();
        assert!((v - 1.25).abs() < 3.0 * se, "t10 variance {v} (se {se})");

        let g: Vec<f64> = (0..N).map(|_| draw_gamma(2.0, 2.0, &mut r).unwrap()).collect();
        let (m, _) = mean_var(&g);
        let se = (0.5f64 / N as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "gamma mean {m}");
    }

    #[test]
    fn invalid_parameters() {
        let mut r = SeededRng::new(0, 0);
        assert!(draw_student_t(0.0, &mut r).is_err());
        assert!(draw_gamma(-1.0, 1.0, &mut r).is_err());
        assert!(draw_gamma(1.0, 0.0, &mut r).is_err());
    }
}

//! Counter-based 64-bit random numbers with named substreams.
//!
//! The k-th output of a stream keyed by `key` is `mix(key + (k + 1) * GOLDEN)`
//! where `mix` is the SplitMix64 finalizer. Streams are therefore random
//! access, platform independent and need no external state. A substream is
//! derived by hashing a label into the parent key, so every simulated variable
//! can own an independent stream that does not shift when another variable
//! draws more or fewer numbers.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a, used to turn labels into key material.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Combine a key with further material into a new key.
#[inline]
pub fn derive_key(key: u64, material: u64) -> u64 {
    mix64(key ^ mix64(material.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed),
            counter: 0,
            spare_normal: None,
        }
    }

    /// Independent stream identified by `label` under this stream's key.
    /// Does not consume state of `self`.
    pub fn substream(&self, label: &str) -> Self {
        Self {
            key: derive_key(self.key, fnv1a(label.as_bytes())),
            counter: 0,
            spare_normal: None,
        }
    }

    /// Independent stream identified by an integer.
    pub fn substream_index(&self, index: u64) -> Self {
        Self {
            key: derive_key(self.key, index),
            counter: 0,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (bound > 0), via widening multiply.
    pub fn below(&mut self, bound: u64) -> u64 {
        ((u128::from(self.next_u64()) * u128::from(bound)) >> 64) as u64
    }

    pub fn bernoulli(&mut self, p: f64) -> f64 {
        if self.uniform() < p {
            1.0
        } else {
            0.0
        }
    }

    /// Standard normal by Box-Muller; the second variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Exponential with rate 1 by inverse CDF.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

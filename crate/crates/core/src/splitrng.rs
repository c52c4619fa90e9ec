//! Counter-based splittable random numbers.
//!
//! A [`Key`] is a 128-bit value. Everything random in the toolkit is derived
//! from one by running the Threefry-2x64 block function (20 rounds) over
//! counters, so derivation never touches shared state: keys can be copied into
//! any number of workers and always produce the same streams.
//!
//! Derived keys use disjoint counter domains (the high counter word), which
//! keeps `split`, `fold_in` and the sampling streams from colliding: for a fixed
//! key the block function is a bijection on the 128-bit counter.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const SKEIN_PARITY: u64 = 0x1BD1_1BDA_A9FC_1A22;
const ROTATIONS: [u32; 8] = [16, 42, 12, 31, 16, 32, 24, 21];

const DOMAIN_SEED: u64 = 0x5EED_0000_0000_0001;
const DOMAIN_SPLIT: u64 = 0x5EED_0000_0000_0002;
const DOMAIN_FOLD: u64 = 0x5EED_0000_0000_0003;
const DOMAIN_STREAM: u64 = 0x5EED_0000_0000_0004;

/// Threefry-2x64 with 20 rounds.
pub fn threefry2x64(key: [u64; 2], counter: [u64; 2]) -> [u64; 2] {
    let ks = [key[0], key[1], SKEIN_PARITY ^ key[0] ^ key[1]];
    let mut x0 = counter[0].wrapping_add(ks[0]);
    let mut x1 = counter[1].wrapping_add(ks[1]);
    for round in 0..20 {
        x0 = x0.wrapping_add(x1);
        x1 = x1.rotate_left(ROTATIONS[round % 8]) ^ x0;
        if round % 4 == 3 {
            let s = round / 4 + 1;
            x0 = x0.wrapping_add(ks[s % 3]);
            x1 = x1.wrapping_add(ks[(s + 1) % 3]).wrapping_add(s as u64);
        }
    }
    [x0, x1]
}

/// Splittable seed handle. Plain value, no hidden state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Key {
    pub hi: u64,
    pub lo: u64,
}

impl Key {
    fn block(self, counter: [u64; 2]) -> [u64; 2] {
        threefry2x64([self.hi, self.lo], counter)
    }

    fn from_block(b: [u64; 2]) -> Key {
        Key { hi: b[0], lo: b[1] }
    }

    /// Sequential draws from this key. Two streams built from the same key
    /// produce the same values.
    pub fn stream(self) -> KeyStream {
        KeyStream { key: self, counter: 0, buffered: None }
    }
}

/// Deterministic mapping from a seed to a [`Key`]; injective in `seed`.
pub fn new_key(seed: u64) -> Key {
    Key::from_block(threefry2x64([0, 0], [seed, DOMAIN_SEED]))
}

/// `n` child keys. `split(k, n)` is a prefix of `split(k, n + 1)`.
pub fn split(key: Key, n: usize) -> Result<Vec<Key>> {
    if n == 0 {
        return Err(Error::InvalidArgument("split requires n >= 1".into()));
    }
    Ok((0..n as u64).map(|i| Key::from_block(key.block([i, DOMAIN_SPLIT]))).collect())
}

/// Derives a key from `key` and an integer, e.g. an iteration number.
pub fn fold_in(key: Key, data: u64) -> Key {
    Key::from_block(key.block([data, DOMAIN_FOLD]))
}

/// Uniform variates in `[lo, hi)`.
pub fn uniform(key: Key, shape: &[usize], lo: f32, hi: f32) -> Result<Tensor> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("uniform requires lo < hi, got [{lo}, {hi})")));
    }
    let mut stream = key.stream();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| stream.uniform_in(lo, hi)).collect();
    Tensor::from_vec(shape, data)
}

/// Standard normal variates, Box-Muller on consecutive uniform pairs.
pub fn normal(key: Key, shape: &[usize]) -> Tensor {
    let mut stream = key.stream();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| stream.normal()).collect();
    Tensor::from_vec(shape, data).expect("shape product matches data length")
}

/// Sequential reader over the counter stream of one key.
///
/// Word `i` of the stream is half of block `i / 2`, so the sequence is a pure
/// function of the key.
#[derive(Clone, Debug)]
pub struct KeyStream {
    key: Key,
    counter: u64,
    buffered: Option<f32>,
}

impl KeyStream {
    pub fn next_u64(&mut self) -> u64 {
        let block = self.key.block([self.counter / 2, DOMAIN_STREAM]);
        let word = block[(self.counter % 2) as usize];
        self.counter += 1;
        word
    }

    /// 24-bit uniform in `[0, 1)`.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 * (1.0 / (1u64 << 24) as f32)
    }

    /// 53-bit uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f32, hi: f32) -> f32 {
        let v = lo + (hi - lo) * self.next_f32();
        if v >= hi {
            hi.next_down().max(lo)
        } else {
            v
        }
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire multiply-shift reduction.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller. Each uniform pair yields two variates;
    /// the second is buffered for the next call.
    pub fn normal(&mut self) -> f32 {
        if let Some(z) = self.buffered.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.buffered = Some((r * theta.sin()) as f32);
        (r * theta.cos()) as f32
    }
}

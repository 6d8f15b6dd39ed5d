//! Reproducible randomness shared by every chain.
//!
//! An [`RngStream`] is a value: a root seed plus the path of branch labels
//! that leads to it in a spawn tree. Drawing never mutates the stream; call
//! [`RngStream::generator`] to get a ChaCha8 generator keyed by the stream.
//! Because the key depends only on `(seed, path)`, work scheduled on any
//! number of threads reproduces the same draws as long as each unit of work
//! is handed its own split.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ProductDistribution, SpinVector, SubsetIndex};

/// Generator type handed out by [`RngStream::generator`].
pub type StreamRng = ChaCha8Rng;

const LANE_A: u64 = 0x9E37_79B9_7F4A_7C15;
const LANE_B: u64 = 0xD1B5_4A32_D192_ED03;

/// Coordinates per parallel chunk in [`sample_product`]; fixed so that the
/// chunking never depends on the worker count.
const PRODUCT_CHUNK: usize = 4096;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: Vec<u64>,
    digest: [u64; 2],
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            path: Vec::new(),
            digest: [mix64(seed ^ LANE_A), mix64(seed.rotate_left(17) ^ LANE_B)],
        }
    }

    /// Child stream keyed by `(seed, path ++ [branch])`. The parent is untouched.
    pub fn split(&self, branch: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(branch);
        let tag = path.len() as u64;
        let a = mix64(self.digest[0] ^ mix64(branch.wrapping_add(LANE_A).wrapping_add(tag)));
        let b = mix64(
            self.digest[1].rotate_left(23)
                ^ mix64(branch.wrapping_mul(LANE_B) ^ tag.rotate_left(40)),
        );
        Self {
            seed: self.seed,
            path,
            digest: [a, b],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        let words = [
            mix64(self.digest[0] ^ LANE_B),
            mix64(self.digest[1] ^ LANE_A),
            mix64(self.digest[0].wrapping_add(self.digest[1])),
            mix64(self.digest[0] ^ self.digest[1].rotate_left(32) ^ 0x5851_F42D_4C95_7F2D),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        key
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> StreamRng {
        ChaCha8Rng::from_seed(self.key())
    }

    /// Generator positioned at the `index`-th 64-bit output of this stream.
    /// Random access lets parallel workers fill disjoint ranges of one stream.
    pub fn generator_at(&self, index: u64) -> StreamRng {
        let mut g = self.generator();
        g.set_word_pos(2 * index as u128);
        g
    }
}

/// Uniform double in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in the open interval `(0, 1)`.
#[inline]
pub fn open_unit_f64(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// How [`sample_subset_with`] draws a uniform `s`-subset of `[m]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SubsetMethod {
    /// Partial Fisher–Yates; touches only `O(s)` slots of a virtual index array.
    #[default]
    FisherYates,
    /// One random key per index, keep the `s` smallest. Keys are generated in
    /// parallel, which is the form that parallelizes to polylog depth.
    RandomKeys,
}

/// Uniform `s`-subset of `[m]` drawn with partial Fisher–Yates.
pub fn sample_subset(rng: &RngStream, m: usize, s: usize) -> Result<SubsetIndex> {
    sample_subset_with(rng, m, s, SubsetMethod::FisherYates)
}

pub fn sample_subset_with(
    rng: &RngStream,
    m: usize,
    s: usize,
    method: SubsetMethod,
) -> Result<SubsetIndex> {
    if s == 0 || s > m {
        return Err(Error::InvalidSubset { m, s });
    }
    let members = match method {
        SubsetMethod::FisherYates => fisher_yates_members(&mut rng.generator(), m, s),
        SubsetMethod::RandomKeys => random_key_members(rng, m, s),
    };
    SubsetIndex::new(m, members)
}

/// Partial Fisher–Yates over the virtual array `a[i] = i`, storing only the
/// displaced slots. Output is sorted.
pub(crate) fn fisher_yates_members<R: Rng + ?Sized>(rng: &mut R, m: usize, s: usize) -> Vec<usize> {
    debug_assert!(s >= 1 && s <= m);
    if s == m {
        return (0..m).collect();
    }
    if s > 64 {
        let mut a: Vec<usize> = (0..m).collect();
        for i in 0..s {
            let j = rng.random_range(i..m);
            a.swap(i, j);
        }
        a.truncate(s);
        a.sort_unstable();
        return a;
    }
    let mut displaced: Vec<(usize, usize)> = Vec::with_capacity(2 * s);
    let lookup = |d: &[(usize, usize)], i: usize| {
        d.iter()
            .rev()
            .find(|&&(k, _)| k == i)
            .map_or(i, |&(_, v)| v)
    };
    let mut out = Vec::with_capacity(s);
    for i in 0..s {
        let j = rng.random_range(i..m);
        let ai = lookup(&displaced, i);
        let aj = lookup(&displaced, j);
        displaced.push((j, ai));
        out.push(aj);
    }
    out.sort_unstable();
    out
}

fn random_key_members(rng: &RngStream, m: usize, s: usize) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = (0..m)
        .collect::<Vec<_>>()
        .par_chunks(PRODUCT_CHUNK)
        .flat_map_iter(|chunk| {
            let mut g = rng.generator_at(chunk[0] as u64);
            chunk
                .iter()
                .map(move |&i| (g.next_u64(), i))
                .collect::<Vec<_>>()
        })
        .collect();
    if s < m {
        keyed.select_nth_unstable(s - 1);
        keyed.truncate(s);
    }
    let mut members: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    members.sort_unstable();
    members
}

/// Independent draw from a product law. Coordinate `i` consumes output `i` of
/// the stream, so the result does not depend on how the work is chunked.
pub fn sample_product(rng: &RngStream, q: &ProductDistribution) -> SpinVector {
    let p_plus = q.plus_probabilities();
    let mut values = vec![0i8; p_plus.len()];
    let fill = |(c, out): (usize, &mut [i8])| {
        let start = c * PRODUCT_CHUNK;
        let mut g = rng.generator_at(start as u64);
        for (k, v) in out.iter_mut().enumerate() {
            *v = if unit_f64(g.next_u64()) < p_plus[start + k] {
                1
            } else {
                -1
            };
        }
    };
    if values.len() > PRODUCT_CHUNK {
        values
            .par_chunks_mut(PRODUCT_CHUNK)
            .enumerate()
            .for_each(fill);
    } else {
        values.chunks_mut(PRODUCT_CHUNK).enumerate().for_each(fill);
    }
    SpinVector::from_parts_unchecked(q.indices().to_vec(), values)
}

/// Sequential product draw into a ±1.0 buffer, used on hot paths.
#[inline]
pub(crate) fn fill_product<R: RngCore + ?Sized>(rng: &mut R, p_plus: &[f64], out: &mut [f64]) {
    for (o, &p) in out.iter_mut().zip(p_plus) {
        *o = if unit_f64(rng.next_u64()) < p {
            1.0
        } else {
            -1.0
        };
    }
}

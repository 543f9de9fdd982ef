//! Counter-based random streams.
//!
//! Every draw is addressed by a key `(seed, stream, replicate, step, particle)`
//! hashed into the state of a SplitMix64 generator, so a draw never depends on
//! which thread produced it or in what order. The IPS and the mean-field
//! system read the same key for the same `(step, particle)`, which is how the
//! synchronous coupling shares Brownian increments.

use rand::Rng;
use rand_core::RngCore;
use rand_distr::StandardNormal;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent uses of a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    InitialPositions = 1,
    Increments = 2,
    PicardInitial = 3,
    PicardIncrements = 4,
    Excursion = 5,
    CovarianceSamples = 6,
    Suite = 7,
    ClassCheck = 8,
    Pilot = 9,
}

/// SplitMix64; small, fast, and seeded directly from a key hash.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn from_state(state: u64) -> Self {
        Self { state }
    }

    /// Generator for the key `(seed, stream, a, b, c)`.
    pub fn keyed(seed: u64, stream: Stream, a: u64, b: u64, c: u64) -> Self {
        let mut h = mix64(seed ^ GOLDEN);
        for part in [stream as u64, a, b, c] {
            h = mix64(h ^ part.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019));
        }
        Self { state: h }
    }
}

impl RngCore for SplitMix64 {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Fills `out` with `dim` standard normals for key `(stream, replicate, step, particle)`.
#[inline]
pub fn fill_normals(
    seed: u64,
    stream: Stream,
    replicate: u64,
    step: u64,
    particle: u64,
    out: &mut [f64],
) {
    let mut rng = SplitMix64::keyed(seed, stream, replicate, step, particle);
    for o in out.iter_mut() {
        *o = rng.sample(StandardNormal);
    }
}

/// Shared Brownian increment source for one replicate.
///
/// With `substeps = s`, the normal used at coarse step `k` is
/// `Σ_{i<s} z(k·s + i) / √s`, i.e. the same Brownian path a run with step
/// `dt/s` and `substeps = 1` would see. This keeps dt-refinement studies on
/// a common path.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSource {
    pub seed: u64,
    pub stream: Stream,
    pub replicate: u64,
    pub substeps: u32,
}

impl NoiseSource {
    pub fn new(seed: u64, stream: Stream, replicate: u64) -> Self {
        Self {
            seed,
            stream,
            replicate,
            substeps: 1,
        }
    }

    pub fn with_substeps(mut self, substeps: u32) -> Self {
        self.substeps = substeps.max(1);
        self
    }

    /// Normals for one particle at one step.
    #[inline]
    pub fn particle(&self, step: u64, particle: u64, out: &mut [f64]) {
        if self.substeps == 1 {
            fill_normals(self.seed, self.stream, self.replicate, step, particle, out);
            return;
        }
        let s = self.substeps as u64;
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..s {
            let mut rng = SplitMix64::keyed(self.seed, self.stream, self.replicate, step * s + i, particle);
            for o in out.iter_mut() {
                *o += rng.sample::<f64, _>(StandardNormal);
            }
        }
        let norm = 1.0 / (s as f64).sqrt();
        out.iter_mut().for_each(|o| *o *= norm);
    }

    /// Row-major `n_particles × dim` block for one step.
    pub fn step_block(&self, step: u64, n_particles: usize, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_particles * dim];
        for (j, row) in out.chunks_mut(dim).enumerate() {
            self.particle(step, j as u64, row);
        }
        out
    }
}

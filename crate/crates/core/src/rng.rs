//! Keyed counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha12 stream selected by
//! `(seed, domain, stream id)`. ChaCha is a counter-mode cipher, so any stream
//! can be opened independently of the others and the result never depends on
//! the order in which streams are consumed or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Which part of the pipeline a stream belongs to. Different domains never
/// share key material even for equal seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Speckle,
    EmpiricalSample,
    ChannelNoise,
    Sampler,
    Test,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Speckle => 0x7370_6563_6b6c_6531,
            Domain::EmpiricalSample => 0x656d_7069_7269_6331,
            Domain::ChannelNoise => 0x6368_616e_6e6f_6931,
            Domain::Sampler => 0x7361_6d70_6c65_7231,
            Domain::Test => 0x7465_7374_7465_7374,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Packs a sample index and a step into one 64-bit stream id.
pub fn stream_id(index: u64, step: u64) -> u64 {
    (index << 32) | (step & 0xffff_ffff)
}

/// Opens the stream `(seed, domain, stream)`.
pub fn stream(seed: u64, domain: Domain, stream: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let mut state = seed ^ domain.tag();
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Fills `out` with i.i.d. standard normal draws from the given stream.
pub fn fill_standard_normal(seed: u64, domain: Domain, id: u64, out: &mut [f64]) {
    let mut rng = stream(seed, domain, id);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

//! Counter-derived random streams.
//!
//! Every frame of a sweep gets its own ChaCha stream addressed by
//! `(seed, point, frame)`, so results do not depend on which worker drew which frame.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key material for a family of streams; one family per `(seed, point)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(seed: u64, point: u64) -> Self {
        let mut state = seed ^ point.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self(key)
    }

    /// Independent stream number `index` under this key.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        rng
    }
}

/// Stream for frame `frame` of sweep point `point`.
pub fn frame_stream(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    StreamKey::new(seed, point).stream(frame)
}

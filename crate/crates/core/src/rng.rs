//! Per-trial random streams.
//!
//! A trial is identified by one `u64` seed. The seed feeds three independent
//! ChaCha streams: arm draws, reward draws, and the policy's own randomness
//! (tie-breaking). Policy randomness therefore never shifts the environment's
//! draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ARM_STREAM: u64 = 0;
const REWARD_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;

/// Environment streams: which arm a box pulls, and what that arm pays.
#[derive(Debug, Clone)]
pub struct EnvRng {
    pub arm: ChaCha8Rng,
    pub reward: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct TrialRng {
    pub env: EnvRng,
    pub policy: ChaCha8Rng,
}

impl TrialRng {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        TrialRng {
            env: EnvRng {
                arm: stream(ARM_STREAM),
                reward: stream(REWARD_STREAM),
            },
            policy: stream(POLICY_STREAM),
        }
    }
}

//! Deterministic, stream-splittable randomness.
//!
//! Every random quantity in a simulation is drawn from a
//! `(seed, stream_id)` pair backed by a counter-based generator, so that
//! identical pairs produce bit-identical sequences across runs and
//! platforms, and distinct stream ids are statistically independent.
//! Workers, the server's index draws, and trials all get disjoint
//! streams; see [`StreamLayout`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// A seed from which any number of independent streams can be opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Open the generator for one stream id.
    pub fn stream(&self, stream_id: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id);
        rng
    }
}

/// Stream-id assignment for a multi-trial, multi-worker simulation:
/// `stream_id = trial * (N + 2) + slot`, with slots `0..N` for the
/// workers, `N` for the server's index draws, and `N + 1` spare. This
/// makes streams disjoint across both trials and workers.
#[derive(Debug, Clone, Copy)]
pub struct StreamLayout {
    pub n_workers: usize,
}

impl StreamLayout {
    pub fn new(n_workers: usize) -> Self {
        Self { n_workers }
    }

    fn base(&self, trial: u64) -> u64 {
        trial * (self.n_workers as u64 + 2)
    }

    pub fn worker(&self, trial: u64, worker: usize) -> u64 {
        debug_assert!(worker < self.n_workers);
        self.base(trial) + worker as u64
    }

    pub fn server(&self, trial: u64) -> u64 {
        self.base(trial) + self.n_workers as u64
    }

    pub fn spare(&self, trial: u64) -> u64 {
        self.base(trial) + self.n_workers as u64 + 1
    }
}

/// The open streams used by one trial of a simulation.
pub struct TrialStreams {
    pub workers: Vec<StreamRng>,
    pub server: StreamRng,
}

impl TrialStreams {
    pub fn open(source: &RandomSource, n_workers: usize, trial: u64) -> Self {
        let layout = StreamLayout::new(n_workers);
        TrialStreams {
            workers: (0..n_workers)
                .map(|w| source.stream(layout.worker(trial, w)))
                .collect(),
            server: source.stream(layout.server(trial)),
        }
    }
}

//! Multiple-circle detection on noisy images.
//!
//! The pipeline turns an image into a binary edge map, samples a small
//! fraction of the edge points, and treats every non-collinear triplet of
//! samples as a candidate circle. A learning automaton holds one action
//! per candidate and runs a reward/inaction update loop: actions are drawn
//! by roulette selection, scored by how much of their rasterized perimeter
//! lands on edge pixels, and reinforced accordingly. After the loop, the
//! probability distribution is mined in descending order for all circles
//! that are sufficiently distinct from one another.
//!
//! Everything downstream of a `(input, config, seed)` triple is
//! deterministic: one seed drives edge-point sampling, triplet sampling,
//! and roulette draws through independent, documented RNG streams.
//!
//! Modules:
//! - [`image`]: grayscale/RGB buffers, PNM and PNG codecs.
//! - [`edges`]: Canny edge extraction and edge-point sampling.
//! - [`geometry`]: triplet-to-circle fit, midpoint rasterization,
//!   circle mismatch measures.
//! - [`automaton`]: action-set construction and the learning loop.
//! - [`detector`]: end-to-end detection and result extraction.
//! - [`synth`]: synthetic ground-truth scenes and noise injection.
//! - [`bench`]: accuracy metrics and the repeatable benchmark harness.

pub mod automaton;
pub mod bench;
pub mod detector;
pub mod edges;
mod error;
pub mod geometry;
pub mod image;
pub mod synth;

pub use error::{Error, Result};

pub use automaton::{
    build_action_set, lri_update, reinforcement, run_learning, select_action, ActionSet,
    ActionSetConfig, BetaCache, LearningConfig, ProbabilityVector,
};
pub use bench::{
    error_score, match_circles, multiple_error, run_benchmark, success_rate, BenchInput,
    BenchReport, BenchSuite, EntryReport, MatchOutcome, MetricConfig, TruthCircle,
};
pub use detector::{
    detect_edge_map, detect_image, extract_circles, render_overlay, DetectedCircle,
    DetectionResult, DetectorConfig,
};
pub use edges::{detect_edges, sample_edge_points, EdgeConfig, EdgeMap, SampledPoints};
pub use geometry::{
    circle_from_triplet, distinctiveness, distinctiveness_threshold, rasterize_circle,
    CandidateCircle, PerimeterSet,
};
pub use image::{GrayImage, RgbImage};
pub use synth::{add_salt_pepper, generate_scene, realize_scene, CircleStyle, GroundTruthScene, SceneSpec};

/// One u64 seed reproduces an entire run. Each consumer of randomness
/// draws from its own fixed ChaCha stream so the stages cannot perturb
/// each other's sequences when draw counts change.
pub(crate) mod seeding {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) const SAMPLING: u64 = 0;
    pub(crate) const TRIPLETS: u64 = 1;
    pub(crate) const ROULETTE: u64 = 2;
    pub(crate) const SCENE: u64 = 10;
    pub(crate) const NOISE: u64 = 11;

    pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }
}

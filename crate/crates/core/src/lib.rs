//! Fallback maneuver selection for autonomous surface vessels.
//!
//! When an anomaly alert is raised, the vessel proposes short straight
//! maneuvers that stay on visible water with pixel clearance from obstacles,
//! numbers them on the camera image, asks a vision-language model to pick one
//! (or station-keeping) and executes the choice while the operator can take
//! over with a joystick at any time.
//!
//! Geometry, clearance, simulation and monitoring are generic over the scalar
//! ([`Real`], implemented for `f32` and `f64`); the aliases below fix it for
//! the common cases. Evaluation and the live session work in `f64`.

// `!(x >= 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod candidates;
pub mod error;
pub mod eval;
pub mod frames;
pub mod linalg;
pub mod monitor;
pub mod scalar;
pub mod scenario;
pub mod selector;
pub mod session;
pub mod sim;
pub mod suite;
pub mod water;

pub use candidates::{generate_candidates, Candidate, CandidateSet, SamplingParams};
pub use error::{Error, Result};
pub use eval::{build_consensus, risk_relief, wilson_interval, Consensus, RaterData};
pub use frames::{project_body_to_pixel, BodyPoint, CameraModel, NavPose, PixelPoint, WorldPoint};
pub use monitor::{anomaly_score, calibrate_threshold, EmbeddingCache, Monitor, Verdict};
pub use scalar::Real;
pub use scenario::{load_corpus, load_scenario, Scenario};
pub use selector::{aggregate_votes, parse_decision, select_fb1, select_fbn, Decision};
pub use session::{Session, SessionConfig, SessionScene};
pub use sim::{blend_override, step, update_alpha, SimState, Wrench};
pub use suite::{run_offline_suite, SuiteConfig};
pub use water::{clearance_map, Mask, WaterGrid};

pub type CameraModelF32 = CameraModel<f32>;
pub type CameraModelF64 = CameraModel<f64>;
pub type NavPoseF32 = NavPose<f32>;
pub type NavPoseF64 = NavPose<f64>;
pub type WaterGridF32 = WaterGrid<f32>;
pub type WaterGridF64 = WaterGrid<f64>;
pub type CandidateSetF32 = CandidateSet<f32>;
pub type CandidateSetF64 = CandidateSet<f64>;
pub type SimStateF32 = SimState<f32>;
pub type SimStateF64 = SimState<f64>;
pub type EmbeddingCacheF32 = EmbeddingCache<f32>;
pub type EmbeddingCacheF64 = EmbeddingCache<f64>;

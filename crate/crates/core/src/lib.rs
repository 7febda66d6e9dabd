//! posefuse: kinematic fusion of independently estimated body poses, hand
//! poses, and 2D keypoints into geometrically consistent whole-body pose
//! sequences.
//!
//! The engine is estimator-agnostic: any source of body-model pose
//! parameters, any hand estimator emitting a global wrist rotation plus 15
//! finger rotations, and any 2D keypoint detector can feed it through the
//! sequence file format. The pipeline stages are
//!
//! 1. **mirror** left hands emitted in mirrored right-hand coordinates,
//! 2. **convert** finger rotations into the body model's rest pose space,
//! 3. **elbow solve** (+ optional forearm **twist**): a closed-form elbow
//!    rotation that makes the forearm chain hit the estimated global wrist
//!    rotation exactly,
//! 4. **refine** the shoulder against confidence-weighted 2D keypoints,
//! 5. **smooth** the sequence by banded multi-order derivative minimization.
//!
//! The [`metrics`] module provides the matching evaluation suite
//! (Procrustes-aligned point error, jitter, frame-to-frame wrist
//! displacement), and [`synth`] generates seeded synthetic ground truth with
//! a controllable corruption model for end-to-end validation.

pub mod error;
pub mod hand;
pub mod io;
pub mod kinematics;
pub mod metrics;
pub mod pipeline;
pub mod refine;
pub mod smooth;
pub mod so3;
pub mod synth;

pub mod guide;

pub use error::{Error, Result};
pub use hand::{HandEstimate, HandMeanPose, IntegrateOptions};
pub use io::{FrameBundle, PipelineConfig, Sequence, StageToggles};
pub use kinematics::{BodyPose, KinematicTree, LandmarkId, Side, WorldState};
pub use metrics::{RegionMask, SimilarityTransform};
pub use refine::{Keypoint2D, PosePrior, RefineConfig, WeakPerspectiveCamera};
pub use smooth::{SmoothConfig, Trajectory};
pub use so3::{AxisAngle, Rotation};
pub use synth::{CorruptionSpec, SynthSpec};

//! Synthetic ground-truth generator and corruption model, the independent
//! oracle for end-to-end validation.
//!
//! # Portable randomness
//!
//! All sampling runs on [`SplitMix64`], a 64-bit Weyl-sequence generator
//! with a fixed output mix, so identical specs produce bit-identical
//! sequences on every platform. Derived distributions are fully specified:
//!
//! - uniform `[0, 1)`: take the top 53 bits, `(x >> 11) * 2^-53`
//! - standard normal: Box-Muller using two uniforms, cosine branch only
//! - unit sphere direction: three normals, normalized
//!
//! Draw order is part of the contract and is documented on [`generate`].
//! Rotation noise composes `exp(noise)` onto the clean rotation, where
//! `noise` has a uniformly random axis and an `|N(0, sigma)|` angle. A
//! corruption with `sigma == 0` (or dropout 0) still consumes its draws but
//! applies nothing, so outputs stay bit-identical to the clean values while
//! the stream stays aligned across sigma choices.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{HandEstimate, HandMeanPose};
use crate::io::{FrameBundle, Sequence};
use crate::kinematics::{forward_kinematics, BodyPose, KinematicTree, LandmarkId, Side};
use crate::refine::{project, Keypoint2D, WeakPerspectiveCamera};
use crate::so3::{AxisAngle, Rotation};

/// SplitMix64: `state += 0x9E3779B97F4A7C15`, output = mixed state.
///
/// Reference outputs (first draws): seed 0 -> `0xe220a8397b1dcdaf`,
/// seed 1234567 -> `0x599ed017fb08fc85` (checked in tests).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (cosine branch; two draws consumed).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1], keeps ln finite
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform direction on the unit sphere (three normals, normalized).
    pub fn next_unit_vector(&mut self) -> Vector3<f64> {
        loop {
            let v = Vector3::new(self.next_normal(), self.next_normal(), self.next_normal());
            let n = v.norm();
            if n > 1e-12 {
                return v / n;
            }
        }
    }
}

/// How keypoint confidences are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceModel {
    Constant(f64),
    Uniform { min: f64, max: f64 },
}

impl Default for ConfidenceModel {
    fn default() -> Self {
        ConfidenceModel::Constant(1.0)
    }
}

impl ConfidenceModel {
    fn sample(&self, rng: &mut SplitMix64) -> f64 {
        match self {
            ConfidenceModel::Constant(c) => c.clamp(0.0, 1.0),
            ConfidenceModel::Uniform { min, max } => {
                (min + (max - min) * rng.next_f64()).clamp(0.0, 1.0)
            }
        }
    }
}

/// Noise applied to produce the corrupted inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSpec {
    pub shoulder_noise_sigma: f64,
    pub elbow_noise_sigma: f64,
    pub hand_pose_noise_sigma: f64,
    pub keypoint_noise_sigma: f64,
    pub confidence: ConfidenceModel,
    pub hand_dropout: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec {
            shoulder_noise_sigma: 0.0,
            elbow_noise_sigma: 0.0,
            hand_pose_noise_sigma: 0.0,
            keypoint_noise_sigma: 0.0,
            confidence: ConfidenceModel::default(),
            hand_dropout: 0.0,
        }
    }
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            self.shoulder_noise_sigma,
            self.elbow_noise_sigma,
            self.hand_pose_noise_sigma,
            self.keypoint_noise_sigma,
        ];
        if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument(
                "noise sigmas must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.hand_dropout) {
            return Err(Error::InvalidArgument(format!(
                "hand dropout must lie in [0, 1], got {}",
                self.hand_dropout
            )));
        }
        Ok(())
    }
}

/// One joint's sinusoidal motion: the local rotation vector at frame `t` is
/// `amplitude * sin(2*pi*frequency*t + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointMotion {
    pub joint: String,
    pub amplitude: [f64; 3],
    /// cycles per frame
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub frames: usize,
    /// Skeleton; defaults to the bundled synthetic human.
    pub tree: Option<KinematicTree>,
    /// Per-joint sinusoids; absent joints stay at rest. `None` draws a
    /// default motion from the seed (see [`default_motion`]).
    pub motion: Option<Vec<JointMotion>>,
    pub camera: WeakPerspectiveCamera,
    pub boundaries: Vec<usize>,
    /// Mean finger pose baked into emitted hand estimates, so that
    /// subtracting the same mean during conversion recovers the truth.
    pub hand_mean: Option<HandMeanPose>,
    pub corruption: CorruptionSpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            frames: 150,
            tree: None,
            motion: None,
            camera: WeakPerspectiveCamera {
                scale: 500.0,
                translation: Vector2::new(640.0, 360.0),
            },
            boundaries: Vec::new(),
            hand_mean: None,
            corruption: CorruptionSpec::default(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 frames, got {}",
                self.frames
            )));
        }
        self.corruption.validate()?;
        self.camera.validate()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let spec: SynthSpec =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Default seeded motion: gentle sinusoids on the spine, collars, arms, and
/// fingers. Frequencies sit well inside the smoother's passband so the
/// noiseless pipeline round trip stays within tolerance even with the
/// smoothing stage enabled.
pub fn default_motion(tree: &KinematicTree, seed: u64) -> Vec<JointMotion> {
    let mut rng = SplitMix64::new(seed ^ 0x6d6f_7469_6f6e); // "motion"
    let mut out = Vec::new();
    let arm_amp = 0.22;
    let finger_amp = 0.12;
    for (j, joint) in tree.joints().iter().enumerate() {
        let is_hand =
            tree.hand_joints(Side::Left).contains(&j) || tree.hand_joints(Side::Right).contains(&j);
        let amp = if is_hand {
            finger_amp
        } else if joint.name.contains("shoulder")
            || joint.name.contains("elbow")
            || joint.name.contains("wrist")
            || joint.name.contains("collar")
        {
            arm_amp
        } else if joint.name.contains("spine") || joint.name == "neck" {
            0.05
        } else {
            continue;
        };
        let dir = rng.next_unit_vector();
        let scale = amp * (0.5 + 0.5 * rng.next_f64());
        out.push(JointMotion {
            joint: joint.name.clone(),
            amplitude: [dir.x * scale, dir.y * scale, dir.z * scale],
            frequency: 5e-5 + 1e-4 * rng.next_f64(),
            phase: 2.0 * std::f64::consts::PI * rng.next_f64(),
        });
    }
    out
}

pub struct SynthOutput {
    pub ground_truth: Sequence,
    pub corrupted: Sequence,
}

/// Signing-like sample pose: mild random rotations everywhere, elbows bent
/// 1.0..1.5 rad about an axis in the y/z plane, upper arms lifted out of
/// the image plane. With a front-facing weak-perspective camera this makes
/// all three shoulder degrees of freedom observable from arm keypoints,
/// which a straight, in-plane arm does not (the twist about the arm axis
/// moves nothing the camera can see).
pub fn sample_signing_pose(tree: &KinematicTree, rng: &mut SplitMix64) -> BodyPose {
    let mut pose = BodyPose::rest(tree);
    for a in pose.local_rotations.iter_mut() {
        *a = AxisAngle::from_vector(rng.next_unit_vector() * (rng.next_f64() * 0.3));
    }
    let lm = tree.landmarks();
    for (shoulder, elbow, sign) in [
        (lm.l_shoulder, lm.l_elbow, 1.0f64),
        (lm.r_shoulder, lm.r_elbow, -1.0f64),
    ] {
        let lift = 0.5 + 0.4 * rng.next_f64();
        pose.local_rotations[shoulder] = AxisAngle::from_vector(
            pose.local_rotations[shoulder].vector() + Vector3::new(0.0, sign * lift, 0.0),
        );
        let bend = 1.0 + 0.5 * rng.next_f64();
        let mix = rng.next_f64();
        let axis = Vector3::new(0.0, mix, sign * (1.0 - mix)).normalize();
        pose.local_rotations[elbow] = AxisAngle::from_vector(axis * bend);
    }
    pose
}

fn gt_pose(tree: &KinematicTree, motion: &[(usize, JointMotion)], t: usize) -> BodyPose {
    let mut pose = BodyPose::rest(tree);
    for (index, m) in motion {
        let value = (2.0 * std::f64::consts::PI * m.frequency * t as f64 + m.phase).sin();
        pose.local_rotations[*index] = AxisAngle::new(
            m.amplitude[0] * value,
            m.amplitude[1] * value,
            m.amplitude[2] * value,
        );
    }
    pose
}

/// Rotation noise: uniform axis, `|N(0, sigma)|` angle, composed on the
/// left. Always consumes its draws; applies nothing when `sigma == 0`.
fn noise_rotation(rng: &mut SplitMix64, sigma: f64, clean: &AxisAngle) -> AxisAngle {
    let dir = rng.next_unit_vector();
    let angle = (rng.next_normal() * sigma).abs();
    if sigma == 0.0 {
        return *clean;
    }
    let noise = Rotation::from_axis_angle(&AxisAngle::from_vector(dir * angle))
        .expect("finite noise vector");
    let clean_rot = Rotation::from_axis_angle(clean).expect("finite clean rotation");
    noise.compose(&clean_rot).to_axis_angle()
}

fn noise_pixels(rng: &mut SplitMix64, sigma: f64, clean: Vector2<f64>) -> Vector2<f64> {
    let jitter = Vector2::new(rng.next_normal(), rng.next_normal());
    if sigma == 0.0 {
        clean
    } else {
        clean + jitter * sigma
    }
}

/// Builds the hand estimate a detector would emit for `side`: the exact
/// ground-truth wrist world rotation, finger rotations with the mean pose
/// re-added (plus noise), and left hands pre-mirrored with
/// `source_mirrored = true`.
fn emit_hand(
    rng: &mut SplitMix64,
    tree: &KinematicTree,
    gt: &BodyPose,
    gt_world: &crate::kinematics::WorldState,
    side: Side,
    mean: &HandMeanPose,
    corruption: &CorruptionSpec,
) -> HandEstimate {
    let (_, _, wrist) = tree.landmarks().arm(side);
    let fingers: Vec<AxisAngle> = tree
        .hand_joints(side)
        .iter()
        .zip(mean.entries())
        .map(|(&j, m)| {
            let with_mean = gt.local_rotations[j] + *m;
            noise_rotation(rng, corruption.hand_pose_noise_sigma, &with_mean)
        })
        .collect();
    let native = HandEstimate {
        handedness: side,
        wrist_global: gt_world.rotations[wrist],
        finger_rotations: fingers,
        hand_shape: vec![0.0; 10],
        translation: gt_world.positions[wrist],
        source_mirrored: false,
    };
    if side == Side::Left {
        // exactly what mirror_hand undoes (sign flips, bit-exact involution)
        HandEstimate {
            wrist_global: native.wrist_global.mirror_conjugate(),
            finger_rotations: native
                .finger_rotations
                .iter()
                .map(|a| a.mirror_yz())
                .collect(),
            source_mirrored: true,
            ..native
        }
    } else {
        native
    }
}

/// Generates a smooth ground-truth sequence and its corrupted counterpart.
///
/// Draw order per frame, in frame order: left shoulder, right shoulder,
/// left elbow, right elbow rotation noise; per side (left then right) the
/// hand dropout draw then 15 finger noises; then per landmark (the
/// [`LandmarkId::ALL`] order) two pixel noises and the confidence draw.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let tree = spec
        .tree
        .clone()
        .unwrap_or_else(KinematicTree::synthetic_human);
    let motion_list = spec
        .motion
        .clone()
        .unwrap_or_else(|| default_motion(&tree, spec.seed));
    let mut motion = Vec::with_capacity(motion_list.len());
    for m in motion_list {
        let index = tree.joint_index(&m.joint).ok_or_else(|| {
            Error::InvalidArgument(format!("motion references unknown joint {}", m.joint))
        })?;
        motion.push((index, m));
    }
    let mean = spec.hand_mean.clone().unwrap_or_else(HandMeanPose::zero);
    let corruption = &spec.corruption;
    let mut rng = SplitMix64::new(spec.seed);

    let mut gt_frames = Vec::with_capacity(spec.frames);
    let mut corrupted_frames = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let gt = gt_pose(&tree, &motion, t);
        let gt_world = forward_kinematics(&tree, &gt)?;

        // body noise on shoulders then elbows
        let mut noisy = gt.clone();
        let lm = tree.landmarks();
        for joint in [lm.l_shoulder, lm.r_shoulder] {
            noisy.local_rotations[joint] = noise_rotation(
                &mut rng,
                corruption.shoulder_noise_sigma,
                &gt.local_rotations[joint],
            );
        }
        for joint in [lm.l_elbow, lm.r_elbow] {
            noisy.local_rotations[joint] = noise_rotation(
                &mut rng,
                corruption.elbow_noise_sigma,
                &gt.local_rotations[joint],
            );
        }

        let mut hands = [None, None];
        for (slot, side) in [(0, Side::Left), (1, Side::Right)] {
            let dropped = rng.next_f64() < corruption.hand_dropout;
            let est = emit_hand(&mut rng, &tree, &gt, &gt_world, side, &mean, corruption);
            if !dropped {
                hands[slot] = Some(est);
            }
        }

        let keypoints: Vec<Keypoint2D> = LandmarkId::ALL
            .into_iter()
            .map(|id| {
                let clean = project(&gt_world.positions[lm.index(id)], &spec.camera);
                let position = noise_pixels(&mut rng, corruption.keypoint_noise_sigma, clean);
                let confidence = corruption.confidence.sample(&mut rng);
                Keypoint2D::new(id, position, confidence)
            })
            .collect();

        gt_frames.push(FrameBundle {
            body: gt,
            left_hand: None,
            right_hand: None,
            keypoints: vec![],
            camera: Some(spec.camera),
        });
        let [left_hand, right_hand] = hands;
        corrupted_frames.push(FrameBundle {
            body: noisy,
            left_hand,
            right_hand,
            keypoints,
            camera: Some(spec.camera),
        });
    }

    let make_sequence = |frames: Vec<FrameBundle>| Sequence {
        tree: tree.clone(),
        frames,
        boundaries: spec.boundaries.clone(),
        metadata: serde_json::Map::new(),
    };
    Ok(SynthOutput {
        ground_truth: make_sequence(gt_frames),
        corrupted: make_sequence(corrupted_frames),
    })
}

/// Applies only the corruption stage to an existing sequence: shoulder and
/// elbow rotation noise, finger noise on present hand estimates, keypoint
/// pixel noise with resampled confidences, and hand dropout. Draw order per
/// frame matches [`generate`].
pub fn corrupt(seq: &Sequence, corruption: &CorruptionSpec, seed: u64) -> Result<Sequence> {
    corruption.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut out = seq.clone();
    let lm = *seq.tree.landmarks();
    for frame in out.frames.iter_mut() {
        for joint in [lm.l_shoulder, lm.r_shoulder] {
            frame.body.local_rotations[joint] = noise_rotation(
                &mut rng,
                corruption.shoulder_noise_sigma,
                &frame.body.local_rotations[joint],
            );
        }
        for joint in [lm.l_elbow, lm.r_elbow] {
            frame.body.local_rotations[joint] = noise_rotation(
                &mut rng,
                corruption.elbow_noise_sigma,
                &frame.body.local_rotations[joint],
            );
        }
        for side in Side::BOTH {
            let dropped = rng.next_f64() < corruption.hand_dropout;
            if let Some(est) = frame.hand(side).cloned() {
                if dropped {
                    frame.set_hand(side, None);
                    continue;
                }
                let mut est = est;
                est.finger_rotations = est
                    .finger_rotations
                    .iter()
                    .map(|a| noise_rotation(&mut rng, corruption.hand_pose_noise_sigma, a))
                    .collect();
                frame.set_hand(side, Some(est));
            }
        }
        for kp in frame.keypoints.iter_mut() {
            kp.position = noise_pixels(&mut rng, corruption.keypoint_noise_sigma, kp.position);
            kp.confidence = corruption.confidence.sample(&mut rng);
        }
    }
    Ok(out)
}

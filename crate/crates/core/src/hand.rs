//! Hand-body integration: converts hand-estimator output into body-model
//! hand pose, mirrors left hands emitted in right-hand coordinates, and
//! solves the elbow rotation that makes the forearm chain hit a target
//! global wrist orientation exactly.
//!
//! The elbow solve is closed form. With the forearm-twist stage disabled,
//! substituting the solved elbow into forward kinematics reproduces the
//! target wrist world rotation to machine precision; the optional twist term
//! re-applies the component of the wrist correction that lies along the
//! forearm axis.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{forearm_axis, forward_kinematics, BodyPose, KinematicTree, Side};
use crate::so3::{AxisAngle, Rotation};

/// One hand's estimate in an estimator-agnostic form: global wrist rotation
/// (world frame), 15 finger joint rotations, and passthrough shape and
/// translation. `source_mirrored` marks a left hand that the estimator
/// emitted as a mirrored right hand.
#[derive(Debug, Clone, PartialEq)]
pub struct HandEstimate {
    pub handedness: Side,
    pub wrist_global: Rotation,
    pub finger_rotations: Vec<AxisAngle>,
    pub hand_shape: Vec<f64>,
    pub translation: Vector3<f64>,
    pub source_mirrored: bool,
}

impl HandEstimate {
    pub fn validate(&self) -> Result<()> {
        if self.finger_rotations.len() != 15 {
            return Err(Error::InvalidArgument(format!(
                "hand estimate has {} finger rotations, expected 15",
                self.finger_rotations.len()
            )));
        }
        if !self.finger_rotations.iter().all(|a| a.is_finite())
            || !self.translation.iter().all(|c| c.is_finite())
        {
            return Err(Error::InvalidArgument(
                "hand estimate contains non-finite values".into(),
            ));
        }
        Ok(())
    }
}

/// Mean finger pose subtracted during coordinate conversion (15 axis-angle
/// entries). A zero mean is the identity conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<AxisAngle>", into = "Vec<AxisAngle>")]
pub struct HandMeanPose(Vec<AxisAngle>);

impl TryFrom<Vec<AxisAngle>> for HandMeanPose {
    type Error = Error;
    fn try_from(entries: Vec<AxisAngle>) -> Result<Self> {
        HandMeanPose::new(entries)
    }
}

impl From<HandMeanPose> for Vec<AxisAngle> {
    fn from(mean: HandMeanPose) -> Vec<AxisAngle> {
        mean.0
    }
}

impl HandMeanPose {
    pub fn new(entries: Vec<AxisAngle>) -> Result<Self> {
        if entries.len() != 15 {
            return Err(Error::InvalidArgument(format!(
                "hand mean pose has {} entries, expected 15",
                entries.len()
            )));
        }
        if !entries.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidArgument(
                "hand mean pose contains non-finite values".into(),
            ));
        }
        Ok(HandMeanPose(entries))
    }

    /// All-zero mean: conversion becomes the identity. Ships as the test
    /// default; real model means are user-supplied.
    pub fn zero() -> Self {
        HandMeanPose(vec![AxisAngle::zero(); 15])
    }

    pub fn entries(&self) -> &[AxisAngle] {
        &self.0
    }

    /// Loads a JSON array of 15 `[x, y, z]` axis-angle triples.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

/// Element-wise axis-angle subtraction `finger - mean` per joint, removing
/// the estimator's pose bias so the rotations live in the body model's rest
/// pose space.
pub fn convert_hand_pose(
    finger_rotations: &[AxisAngle],
    mean: &HandMeanPose,
) -> Result<Vec<AxisAngle>> {
    if finger_rotations.len() != mean.entries().len() {
        return Err(Error::InvalidArgument(format!(
            "finger rotation count {} does not match mean pose count {}",
            finger_rotations.len(),
            mean.entries().len()
        )));
    }
    Ok(finger_rotations
        .iter()
        .zip(mean.entries())
        .map(|(f, m)| *f - *m)
        .collect())
}

/// Recovers a proper left hand from a mirrored-right-hand estimate by
/// conjugating the wrist rotation and all 15 finger rotations with the
/// YZ-plane reflection, then clears `source_mirrored`.
///
/// Errors with [`Error::InvalidState`] unless the estimate is a left hand
/// flagged `source_mirrored` (double application is rejected).
pub fn mirror_hand(est: &HandEstimate) -> Result<HandEstimate> {
    if !est.source_mirrored {
        return Err(Error::InvalidState(
            "estimate is not flagged source_mirrored; nothing to undo".into(),
        ));
    }
    if est.handedness != Side::Left {
        return Err(Error::InvalidState(
            "only left hands are emitted as mirrored right hands".into(),
        ));
    }
    est.validate()?;
    Ok(HandEstimate {
        handedness: est.handedness,
        wrist_global: est.wrist_global.mirror_conjugate(),
        finger_rotations: est.finger_rotations.iter().map(|a| a.mirror_yz()).collect(),
        hand_shape: est.hand_shape.clone(),
        translation: est.translation,
        source_mirrored: false,
    })
}

/// Closed-form elbow rotation that aligns the forearm chain with a target
/// global wrist rotation:
///
/// `R_elbow = R_shoulder_world^T * R_target_wrist * R_wrist_local^T`
///
/// so that `R_shoulder_world * R_elbow * R_wrist_local == R_target_wrist`
/// to machine precision (the wrist's own local rotation is held fixed).
pub fn solve_elbow(
    shoulder_world: &Rotation,
    target_wrist: &Rotation,
    wrist_local: &Rotation,
) -> Rotation {
    shoulder_world
        .inverse()
        .compose(target_wrist)
        .compose(&wrist_local.inverse())
}

/// Left-composes the exponential of the twist vector with the solved elbow:
/// `exp(a_twist) * R_elbow_new`.
pub fn apply_twist(a_twist: &AxisAngle, elbow_new: &Rotation) -> Result<Rotation> {
    Ok(Rotation::from_axis_angle(a_twist)?.compose(elbow_new))
}

/// Which parts of the integration stage run. Twist requires the elbow solve.
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub convert: bool,
    pub elbow_solve: bool,
    pub twist: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            convert: true,
            elbow_solve: true,
            twist: true,
        }
    }
}

impl IntegrateOptions {
    pub fn validate(&self) -> Result<()> {
        if self.twist && !self.elbow_solve {
            return Err(Error::InvalidConfig(
                "twist requires the elbow solve".into(),
            ));
        }
        Ok(())
    }
}

/// Full integration of one hand estimate into a body pose.
///
/// Replaces the 15 hand-joint local rotations with the converted finger
/// rotations and the elbow local rotation with the closed-form solution
/// (plus the optional forearm twist). All other joints are carried over
/// bit for bit. The twist vector is the projection of
/// `log(R_wrist_world_current^T * R_target)` onto the pre-update forearm
/// axis.
///
/// The estimate must already be un-mirrored (`source_mirrored == false`).
pub fn integrate_hand(
    tree: &KinematicTree,
    pose: &BodyPose,
    est: &HandEstimate,
    mean: &HandMeanPose,
    opts: &IntegrateOptions,
) -> Result<BodyPose> {
    opts.validate()?;
    est.validate()?;
    if est.source_mirrored {
        return Err(Error::InvalidState(
            "estimate is still mirrored; apply mirror_hand first".into(),
        ));
    }
    let side = est.handedness;
    let mut out = pose.clone();

    if opts.convert {
        let converted = convert_hand_pose(&est.finger_rotations, mean)?;
        let hand_joints = tree.hand_joints(side);
        if hand_joints.len() != converted.len() {
            return Err(Error::InvalidArgument(format!(
                "tree lists {} {side} hand joints, estimate has {}",
                hand_joints.len(),
                converted.len()
            )));
        }
        for (&joint, rot) in hand_joints.iter().zip(converted) {
            out.local_rotations[joint] = rot;
        }
    }

    if opts.elbow_solve {
        // All chain quantities come from the pre-update pose.
        let world = forward_kinematics(tree, pose)?;
        let (shoulder, elbow, wrist) = tree.landmarks().arm(side);
        let wrist_local = Rotation::from_axis_angle(&pose.local_rotations[wrist])?;
        let mut elbow_new =
            solve_elbow(&world.rotations[shoulder], &est.wrist_global, &wrist_local);
        if opts.twist {
            let a_rel = world.rotations[wrist]
                .inverse()
                .compose(&est.wrist_global)
                .to_axis_angle();
            let axis = forearm_axis(tree, &world, side)?;
            let (a_twist, _swing) = a_rel.swing_twist_split(&axis)?;
            elbow_new = apply_twist(&a_twist, &elbow_new)?;
        }
        out.local_rotations[elbow] = elbow_new.to_axis_angle();
    }

    Ok(out)
}

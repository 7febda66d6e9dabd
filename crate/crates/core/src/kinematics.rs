//! Articulated skeleton representation and forward kinematics.
//!
//! A [`KinematicTree`] stores joints in topological order (parent index
//! strictly below child index) with rest offsets in meters. A [`BodyPose`]
//! holds per-joint local rotations plus global orientation, root translation,
//! and opaque shape/expression coefficients. [`forward_kinematics`] produces
//! world-space joint orientations and positions.
//!
//! The global orientation is folded in ahead of the root's local rotation:
//! `R_world(root) = R(global_orient) * R_local(root)`, and the root world
//! position equals the pose translation.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{AxisAngle, Rotation};

/// Body side selector for arm chains and hand estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => write!(f, "left"),
            Side::Right => write!(f, "right"),
        }
    }
}

/// Identifier for the 2D-supervised landmarks (shoulder/elbow/wrist pairs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkId {
    LShoulder,
    LElbow,
    LWrist,
    RShoulder,
    RElbow,
    RWrist,
}

impl LandmarkId {
    pub const ALL: [LandmarkId; 6] = [
        LandmarkId::LShoulder,
        LandmarkId::LElbow,
        LandmarkId::LWrist,
        LandmarkId::RShoulder,
        LandmarkId::RElbow,
        LandmarkId::RWrist,
    ];

    pub fn side(&self) -> Side {
        match self {
            LandmarkId::LShoulder | LandmarkId::LElbow | LandmarkId::LWrist => Side::Left,
            LandmarkId::RShoulder | LandmarkId::RElbow | LandmarkId::RWrist => Side::Right,
        }
    }

    /// The three landmarks of one arm, in shoulder/elbow/wrist order.
    pub fn arm(side: Side) -> [LandmarkId; 3] {
        match side {
            Side::Left => [
                LandmarkId::LShoulder,
                LandmarkId::LElbow,
                LandmarkId::LWrist,
            ],
            Side::Right => [
                LandmarkId::RShoulder,
                LandmarkId::RElbow,
                LandmarkId::RWrist,
            ],
        }
    }
}

/// One joint: display name, parent index (`None` for the root), and the
/// translation from the parent joint in the rest pose, in meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
}

impl Joint {
    pub fn rest_offset(&self) -> Vector3<f64> {
        Vector3::from(self.offset)
    }
}

/// Landmark joint indices referenced by 2D supervision and the arm chains.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Landmarks {
    pub l_shoulder: usize,
    pub l_elbow: usize,
    pub l_wrist: usize,
    pub r_shoulder: usize,
    pub r_elbow: usize,
    pub r_wrist: usize,
}

impl Landmarks {
    pub fn index(&self, id: LandmarkId) -> usize {
        match id {
            LandmarkId::LShoulder => self.l_shoulder,
            LandmarkId::LElbow => self.l_elbow,
            LandmarkId::LWrist => self.l_wrist,
            LandmarkId::RShoulder => self.r_shoulder,
            LandmarkId::RElbow => self.r_elbow,
            LandmarkId::RWrist => self.r_wrist,
        }
    }

    /// (shoulder, elbow, wrist) joint indices of one side.
    pub fn arm(&self, side: Side) -> (usize, usize, usize) {
        match side {
            Side::Left => (self.l_shoulder, self.l_elbow, self.l_wrist),
            Side::Right => (self.r_shoulder, self.r_elbow, self.r_wrist),
        }
    }
}

/// Per-side hand joint index lists (15 joints each, in the same order as
/// hand-estimate finger rotations).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandJoints {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl HandJoints {
    pub fn side(&self, side: Side) -> &[usize] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawTree {
    joints: Vec<Joint>,
    landmarks: Landmarks,
    hand_joints: HandJoints,
}

/// Articulated skeleton: topologically ordered joints with rest offsets,
/// named arm landmarks, and per-side hand joint lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct KinematicTree {
    joints: Vec<Joint>,
    landmarks: Landmarks,
    hand_joints: HandJoints,
}

impl TryFrom<RawTree> for KinematicTree {
    type Error = Error;
    fn try_from(raw: RawTree) -> Result<Self> {
        KinematicTree::from_parts(raw.joints, raw.landmarks, raw.hand_joints)
    }
}

impl From<KinematicTree> for RawTree {
    fn from(tree: KinematicTree) -> RawTree {
        RawTree {
            joints: tree.joints,
            landmarks: tree.landmarks,
            hand_joints: tree.hand_joints,
        }
    }
}

impl KinematicTree {
    /// Builds and validates a tree.
    ///
    /// Checks topological order (parent strictly below child, exactly one
    /// root at index 0), the shoulder->elbow->wrist parent chains, and that
    /// each side lists exactly 15 hand joints descending from its wrist.
    pub fn from_parts(
        joints: Vec<Joint>,
        landmarks: Landmarks,
        hand_joints: HandJoints,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidArgument("tree has no joints".into()));
        }
        for (j, joint) in joints.iter().enumerate() {
            if joint.offset.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "joint {} ({}) has a non-finite rest offset",
                    j, joint.name
                )));
            }
            match joint.parent {
                None if j != 0 => {
                    return Err(Error::InvalidArgument(format!(
                        "joint {} ({}) has no parent but is not the root",
                        j, joint.name
                    )));
                }
                Some(p) if p >= j => {
                    return Err(Error::InvalidArgument(format!(
                        "joint {} ({}) has parent {} out of topological order",
                        j, joint.name, p
                    )));
                }
                Some(_) if j == 0 => {
                    return Err(Error::InvalidArgument("root joint has a parent".into()));
                }
                _ => {}
            }
        }
        let tree = KinematicTree {
            joints,
            landmarks,
            hand_joints,
        };
        let n = tree.len();
        for id in LandmarkId::ALL {
            if tree.landmarks.index(id) >= n {
                return Err(Error::InvalidArgument(format!(
                    "landmark {id:?} index out of range"
                )));
            }
        }
        for side in Side::BOTH {
            let (shoulder, elbow, wrist) = tree.landmarks.arm(side);
            if tree.joints[elbow].parent != Some(shoulder)
                || tree.joints[wrist].parent != Some(elbow)
            {
                return Err(Error::InvalidArgument(format!(
                    "{side} shoulder->elbow->wrist is not a parent chain"
                )));
            }
            let hand = tree.hand_joints.side(side);
            if hand.len() != 15 {
                return Err(Error::InvalidArgument(format!(
                    "{side} hand lists {} joints, expected 15",
                    hand.len()
                )));
            }
            for &h in hand {
                if h >= n {
                    return Err(Error::InvalidArgument(format!(
                        "{side} hand joint index {h} out of range"
                    )));
                }
                if !tree.is_descendant(h, wrist) {
                    return Err(Error::InvalidArgument(format!(
                        "{side} hand joint {h} ({}) is not a descendant of the wrist",
                        tree.joints[h].name
                    )));
                }
            }
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn landmarks(&self) -> &Landmarks {
        &self.landmarks
    }

    pub fn hand_joints(&self, side: Side) -> &[usize] {
        self.hand_joints.side(side)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Joint indices that belong to neither hand (the "body" group).
    pub fn body_joints(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|j| !self.hand_joints.left.contains(j) && !self.hand_joints.right.contains(j))
            .collect()
    }

    fn is_descendant(&self, joint: usize, ancestor: usize) -> bool {
        let mut cur = self.joints[joint].parent;
        while let Some(p) = cur {
            if p == ancestor {
                return true;
            }
            cur = self.joints[p].parent;
        }
        false
    }

    /// Bundled synthetic human skeleton: a 22-joint body (pelvis through
    /// wrists) plus 15 finger joints per hand, with plausible rest offsets
    /// in meters and arms extended along +/-x.
    pub fn synthetic_human() -> KinematicTree {
        let j = |name: &str, parent: Option<usize>, offset: [f64; 3]| Joint {
            name: name.to_string(),
            parent,
            offset,
        };
        let mut joints = vec![
            j("pelvis", None, [0.0, 0.0, 0.0]),
            j("l_hip", Some(0), [0.08, -0.08, 0.0]),
            j("r_hip", Some(0), [-0.08, -0.08, 0.0]),
            j("spine1", Some(0), [0.0, 0.11, 0.0]),
            j("l_knee", Some(1), [0.0, -0.38, 0.0]),
            j("r_knee", Some(2), [0.0, -0.38, 0.0]),
            j("spine2", Some(3), [0.0, 0.12, 0.0]),
            j("l_ankle", Some(4), [0.0, -0.40, 0.0]),
            j("r_ankle", Some(5), [0.0, -0.40, 0.0]),
            j("spine3", Some(6), [0.0, 0.12, 0.0]),
            j("l_foot", Some(7), [0.0, -0.05, 0.12]),
            j("r_foot", Some(8), [0.0, -0.05, 0.12]),
            j("neck", Some(9), [0.0, 0.12, 0.0]),
            j("l_collar", Some(9), [0.05, 0.08, 0.0]),
            j("r_collar", Some(9), [-0.05, 0.08, 0.0]),
            j("head", Some(12), [0.0, 0.12, 0.0]),
            j("l_shoulder", Some(13), [0.12, 0.02, 0.0]),
            j("r_shoulder", Some(14), [-0.12, 0.02, 0.0]),
            j("l_elbow", Some(16), [0.26, 0.0, 0.0]),
            j("r_elbow", Some(17), [-0.26, 0.0, 0.0]),
            j("l_wrist", Some(18), [0.25, 0.0, 0.0]),
            j("r_wrist", Some(19), [-0.25, 0.0, 0.0]),
        ];
        // 15 finger joints per hand, three segments per finger, in
        // index/middle/pinky/ring/thumb order (matching hand estimates).
        type FingerSpec = (&'static str, [f64; 3], [f64; 3], [f64; 3]);
        let fingers: [FingerSpec; 5] = [
            (
                "index",
                [0.090, 0.0, 0.020],
                [0.035, 0.0, 0.0],
                [0.025, 0.0, 0.0],
            ),
            (
                "middle",
                [0.095, 0.0, 0.000],
                [0.040, 0.0, 0.0],
                [0.028, 0.0, 0.0],
            ),
            (
                "pinky",
                [0.080, 0.0, -0.035],
                [0.030, 0.0, 0.0],
                [0.020, 0.0, 0.0],
            ),
            (
                "ring",
                [0.090, 0.0, -0.018],
                [0.035, 0.0, 0.0],
                [0.025, 0.0, 0.0],
            ),
            (
                "thumb",
                [0.030, -0.010, 0.035],
                [0.040, 0.0, 0.010],
                [0.030, 0.0, 0.005],
            ),
        ];
        let mut left = Vec::with_capacity(15);
        let mut right = Vec::with_capacity(15);
        for (side, wrist, sign, out) in [
            ("l", 20usize, 1.0f64, &mut left),
            ("r", 21usize, -1.0f64, &mut right),
        ] {
            for (finger, o1, o2, o3) in fingers {
                let mut parent = wrist;
                for (seg, o) in [(1usize, o1), (2, o2), (3, o3)] {
                    let idx = joints.len();
                    joints.push(j(
                        &format!("{side}_{finger}{seg}"),
                        Some(parent),
                        [sign * o[0], o[1], o[2]],
                    ));
                    out.push(idx);
                    parent = idx;
                }
            }
        }
        let landmarks = Landmarks {
            l_shoulder: 16,
            l_elbow: 18,
            l_wrist: 20,
            r_shoulder: 17,
            r_elbow: 19,
            r_wrist: 21,
        };
        KinematicTree::from_parts(joints, landmarks, HandJoints { left, right })
            .expect("bundled skeleton is valid")
    }
}

/// Per-frame pose parameters: per-joint local rotations, global orientation,
/// root translation, and opaque shape/expression coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyPose {
    pub local_rotations: Vec<AxisAngle>,
    pub global_orient: AxisAngle,
    pub translation: Vector3<f64>,
    #[serde(default = "default_coeffs")]
    pub shape: Vec<f64>,
    #[serde(default = "default_coeffs")]
    pub expression: Vec<f64>,
}

fn default_coeffs() -> Vec<f64> {
    vec![0.0; 10]
}

impl BodyPose {
    /// Rest pose for `tree`: all rotations zero, translation at the origin.
    pub fn rest(tree: &KinematicTree) -> BodyPose {
        BodyPose {
            local_rotations: vec![AxisAngle::zero(); tree.len()],
            global_orient: AxisAngle::zero(),
            translation: Vector3::zeros(),
            shape: default_coeffs(),
            expression: default_coeffs(),
        }
    }

    pub fn validate_for(&self, tree: &KinematicTree) -> Result<()> {
        if self.local_rotations.len() != tree.len() {
            return Err(Error::InvalidArgument(format!(
                "pose has {} local rotations, tree has {} joints",
                self.local_rotations.len(),
                tree.len()
            )));
        }
        if !self.local_rotations.iter().all(|a| a.is_finite())
            || !self.global_orient.is_finite()
            || !self.translation.iter().all(|c| c.is_finite())
        {
            return Err(Error::InvalidArgument(
                "pose contains non-finite values".into(),
            ));
        }
        Ok(())
    }
}

/// World-space joint orientations and positions produced by FK.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub rotations: Vec<Rotation>,
    pub positions: Vec<Vector3<f64>>,
}

/// Composes local rotations and rest offsets down the tree.
///
/// `R_world(j) = R_world(parent(j)) * R_local(j)` with the global orientation
/// folded in at the root, and
/// `p(j) = p(parent(j)) + R_world(parent(j)) * offset(j)` with the root at
/// the pose translation.
pub fn forward_kinematics(tree: &KinematicTree, pose: &BodyPose) -> Result<WorldState> {
    pose.validate_for(tree)?;
    let n = tree.len();
    let mut rotations = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for (j, joint) in tree.joints().iter().enumerate() {
        let local = Rotation::from_axis_angle(&pose.local_rotations[j])?;
        match joint.parent {
            None => {
                let orient = Rotation::from_axis_angle(&pose.global_orient)?;
                rotations.push(orient.compose(&local));
                positions.push(pose.translation);
            }
            Some(p) => {
                let parent_rot: Rotation = rotations[p];
                rotations.push(parent_rot.compose(&local));
                positions.push(positions[p] + parent_rot.rotate(&joint.rest_offset()));
            }
        }
    }
    Ok(WorldState {
        rotations,
        positions,
    })
}

/// World rotation of a single joint: the composition of local rotations along
/// its ancestor chain (equals the FK result for that joint).
pub fn chain_world_rotation(
    tree: &KinematicTree,
    pose: &BodyPose,
    joint: usize,
) -> Result<Rotation> {
    if joint >= tree.len() {
        return Err(Error::InvalidArgument(format!(
            "joint index {joint} out of range ({} joints)",
            tree.len()
        )));
    }
    pose.validate_for(tree)?;
    let mut chain = vec![joint];
    let mut cur = joint;
    while let Some(p) = tree.joints()[cur].parent {
        chain.push(p);
        cur = p;
    }
    let mut world = Rotation::from_axis_angle(&pose.global_orient)?;
    for &j in chain.iter().rev() {
        world = world.compose(&Rotation::from_axis_angle(&pose.local_rotations[j])?);
    }
    Ok(world)
}

/// Unit vector from the elbow to the wrist in world space.
///
/// Errors with [`Error::DegenerateGeometry`] when the two joints are closer
/// than 1e-6 m.
pub fn forearm_axis(tree: &KinematicTree, world: &WorldState, side: Side) -> Result<Vector3<f64>> {
    let (_, elbow, wrist) = tree.landmarks().arm(side);
    let d = world.positions[wrist] - world.positions[elbow];
    let n = d.norm();
    if n <= 1e-6 {
        return Err(Error::DegenerateGeometry(format!(
            "{side} elbow and wrist world positions coincide (distance {n:.3e} m)"
        )));
    }
    Ok(d / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SplitMix64;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    // A minimal valid tree cannot drop the arm chains, so tests that need
    // a tiny chain use the bundled skeleton and address joints directly.

    pub(crate) fn random_pose(tree: &KinematicTree, rng: &mut SplitMix64, scale: f64) -> BodyPose {
        let mut pose = BodyPose::rest(tree);
        pose.global_orient =
            AxisAngle::from_vector(rng.next_unit_vector() * (rng.next_f64() * scale));
        pose.translation = rng.next_unit_vector() * rng.next_f64();
        for a in pose.local_rotations.iter_mut() {
            *a = AxisAngle::from_vector(rng.next_unit_vector() * (rng.next_f64() * scale));
        }
        pose
    }

    #[test]
    fn identity_pose_accumulates_offsets() {
        let tree = KinematicTree::synthetic_human();
        let pose = BodyPose::rest(&tree);
        let world = forward_kinematics(&tree, &pose).unwrap();
        for (j, joint) in tree.joints().iter().enumerate() {
            let expected = match joint.parent {
                None => Vector3::zeros(),
                Some(p) => world.positions[p] + joint.rest_offset(),
            };
            assert_eq!(world.positions[j], expected);
        }
        // l_wrist = collar + shoulder + elbow + wrist offsets down the chain
        let lw = tree.landmarks().l_wrist;
        assert_relative_eq!(
            world.positions[lw],
            Vector3::new(
                0.05 + 0.12 + 0.26 + 0.25,
                0.11 + 0.12 + 0.12 + 0.08 + 0.02,
                0.0
            ),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rotated_root_moves_child_by_hand_computation() {
        // root rotated 90 degrees about z, child offset (0, 1, 0):
        // the child lands at root + (-1, 0, 0)
        let child = Joint {
            name: "b".into(),
            parent: Some(0),
            offset: [0.0, 1.0, 0.0],
        };
        // bypass full-tree validation: drive the recursion directly
        let root_position = Vector3::new(0.5, 0.5, 0.5);
        let root_rot = Rotation::from_axis_angle(&AxisAngle::new(0.0, 0.0, FRAC_PI_2)).unwrap();
        let child_position = root_position + root_rot.rotate(&child.rest_offset());
        assert_relative_eq!(
            child_position,
            Vector3::new(0.5 - 1.0, 0.5, 0.5),
            epsilon = 1e-12
        );

        // and the same result through the real FK on the bundled tree:
        let tree = KinematicTree::synthetic_human();
        let mut pose = BodyPose::rest(&tree);
        pose.global_orient = AxisAngle::new(0.0, 0.0, FRAC_PI_2);
        let world = forward_kinematics(&tree, &pose).unwrap();
        // pelvis -> l_hip offset (0.08, -0.08, 0) rotates to (0.08, 0.08, 0)
        assert_relative_eq!(
            world.positions[1],
            Vector3::new(0.08, 0.08, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn wrist_world_rotation_matches_chain_product() {
        let tree = KinematicTree::synthetic_human();
        let mut rng = SplitMix64::new(77);
        for _ in 0..20 {
            let pose = random_pose(&tree, &mut rng, 1.0);
            let world = forward_kinematics(&tree, &pose).unwrap();
            let wrist = tree.landmarks().l_wrist;
            // independent chain product, written out joint by joint
            let mut chain = Vec::new();
            let mut cur = Some(wrist);
            while let Some(j) = cur {
                chain.push(j);
                cur = tree.joints()[j].parent;
            }
            let mut m = *Rotation::from_axis_angle(&pose.global_orient)
                .unwrap()
                .matrix();
            for &j in chain.iter().rev() {
                m *= Rotation::from_axis_angle(&pose.local_rotations[j])
                    .unwrap()
                    .matrix();
            }
            assert!((world.rotations[wrist].matrix() - m).norm() < 1e-12);
            // chain_world_rotation agrees with full FK
            let direct = chain_world_rotation(&tree, &pose, wrist).unwrap();
            assert!(world.rotations[wrist].geodesic_distance(&direct) < 1e-12);
        }
    }

    #[test]
    fn chain_world_rotation_degenerate_cases() {
        let tree = KinematicTree::synthetic_human();
        let mut pose = BodyPose::rest(&tree);
        pose.global_orient = AxisAngle::new(0.3, 0.0, 0.4);
        // root with identity locals: world rotation is R(global_orient)
        let root = chain_world_rotation(&tree, &pose, 0).unwrap();
        let orient = Rotation::from_axis_angle(&pose.global_orient).unwrap();
        assert!(root.geodesic_distance(&orient) < 1e-15);
        // joint with identity ancestors: own local composed with R(orient)
        let elbow = tree.landmarks().l_elbow;
        pose.local_rotations[elbow] = AxisAngle::new(0.0, 0.5, 0.0);
        let got = chain_world_rotation(&tree, &pose, elbow).unwrap();
        let expected =
            orient.compose(&Rotation::from_axis_angle(&pose.local_rotations[elbow]).unwrap());
        assert!(got.geodesic_distance(&expected) < 1e-15);
        // out-of-range index
        assert!(chain_world_rotation(&tree, &pose, tree.len()).is_err());
    }

    #[test]
    fn forearm_axis_at_rest_matches_wrist_offset() {
        let tree = KinematicTree::synthetic_human();
        let world = forward_kinematics(&tree, &BodyPose::rest(&tree)).unwrap();
        let axis = forearm_axis(&tree, &world, Side::Left).unwrap();
        assert_relative_eq!(axis, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let axis = forearm_axis(&tree, &world, Side::Right).unwrap();
        assert_relative_eq!(axis, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(axis.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn forearm_axis_degenerate_geometry() {
        let tree = KinematicTree::synthetic_human();
        let mut world = forward_kinematics(&tree, &BodyPose::rest(&tree)).unwrap();
        let (_, elbow, wrist) = tree.landmarks().arm(Side::Left);
        world.positions[wrist] = world.positions[elbow];
        assert!(matches!(
            forearm_axis(&tree, &world, Side::Left),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn fk_rejects_length_mismatch() {
        let tree = KinematicTree::synthetic_human();
        let mut pose = BodyPose::rest(&tree);
        pose.local_rotations.pop();
        assert!(matches!(
            forward_kinematics(&tree, &pose),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rigid_invariance_under_global_rotation() {
        let tree = KinematicTree::synthetic_human();
        let mut rng = SplitMix64::new(1234);
        let pose = random_pose(&tree, &mut rng, 0.8);
        let world = forward_kinematics(&tree, &pose).unwrap();

        let q = AxisAngle::new(0.4, -0.3, 0.9);
        let q_rot = Rotation::from_axis_angle(&q).unwrap();
        let mut rotated = pose.clone();
        let orient = Rotation::from_axis_angle(&pose.global_orient).unwrap();
        rotated.global_orient = q_rot.compose(&orient).to_axis_angle();
        let world_q = forward_kinematics(&tree, &rotated).unwrap();

        let root = pose.translation;
        for j in 0..tree.len() {
            let expected_pos = root + q_rot.rotate(&(world.positions[j] - root));
            assert_relative_eq!(world_q.positions[j], expected_pos, epsilon = 1e-10);
            let expected_rot = q_rot.compose(&world.rotations[j]);
            assert!(world_q.rotations[j].geodesic_distance(&expected_rot) < 1e-10);
        }
    }

    #[test]
    fn translation_equivariance() {
        let tree = KinematicTree::synthetic_human();
        let mut rng = SplitMix64::new(99);
        let pose = random_pose(&tree, &mut rng, 0.8);
        let world = forward_kinematics(&tree, &pose).unwrap();
        let t = Vector3::new(1.5, -2.0, 0.25);
        let mut moved = pose.clone();
        moved.translation += t;
        let world_t = forward_kinematics(&tree, &moved).unwrap();
        // reassociating the additions costs at most a few ulps
        for j in 0..tree.len() {
            assert_relative_eq!(
                world_t.positions[j],
                world.positions[j] + t,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn tree_validation_catches_bad_structures() {
        let tree = KinematicTree::synthetic_human();
        let raw: RawTree = tree.clone().into();

        let mut bad = raw.clone();
        bad.joints[5].parent = Some(40); // out of topological order
        assert!(KinematicTree::from_parts(bad.joints, bad.landmarks, bad.hand_joints).is_err());

        let mut bad = raw.clone();
        bad.landmarks.l_elbow = bad.landmarks.l_shoulder; // chain broken
        assert!(KinematicTree::from_parts(bad.joints, bad.landmarks, bad.hand_joints).is_err());

        let mut bad = raw.clone();
        bad.hand_joints.left.pop(); // 14 joints
        assert!(KinematicTree::from_parts(bad.joints, bad.landmarks, bad.hand_joints).is_err());

        let mut bad = raw;
        bad.hand_joints.right[0] = 3; // spine joint, not a wrist descendant
        assert!(KinematicTree::from_parts(bad.joints, bad.landmarks, bad.hand_joints).is_err());
    }

    #[test]
    fn tree_json_round_trip() {
        let tree = KinematicTree::synthetic_human();
        let json = serde_json::to_string(&tree).unwrap();
        let back: KinematicTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), tree.len());
        assert_eq!(back.landmarks().l_wrist, tree.landmarks().l_wrist);
    }
}

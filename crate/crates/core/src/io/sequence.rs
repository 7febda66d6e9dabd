//! Pose-sequence files and raw point-set files.
//!
//! A sequence file carries a schema version, the kinematic tree (inline or
//! as a path relative to the file), per-frame bundles (body pose, optional
//! hand estimates, 2D keypoints, camera), signer-segment boundaries, and
//! free-form metadata.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::HandEstimate;
use crate::kinematics::{BodyPose, KinematicTree, Side};
use crate::refine::{Keypoint2D, WeakPerspectiveCamera};
use crate::smooth::segment_bounds;
use crate::so3::{AxisAngle, Rotation};

pub const SEQUENCE_VERSION: u32 = 1;

/// One frame of estimator output: body pose, optional per-side hand
/// estimates, 2D keypoints, and the frame's camera.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub body: BodyPose,
    pub left_hand: Option<HandEstimate>,
    pub right_hand: Option<HandEstimate>,
    pub keypoints: Vec<Keypoint2D>,
    pub camera: Option<WeakPerspectiveCamera>,
}

impl FrameBundle {
    pub fn hand(&self, side: Side) -> Option<&HandEstimate> {
        match side {
            Side::Left => self.left_hand.as_ref(),
            Side::Right => self.right_hand.as_ref(),
        }
    }

    pub fn set_hand(&mut self, side: Side, est: Option<HandEstimate>) {
        match side {
            Side::Left => self.left_hand = est,
            Side::Right => self.right_hand = est,
        }
    }
}

/// An in-memory pose sequence with its skeleton.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub tree: KinematicTree,
    pub frames: Vec<FrameBundle>,
    pub boundaries: Vec<usize>,
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl Sequence {
    pub fn validate(&self) -> Result<()> {
        if !self.frames.is_empty() {
            segment_bounds(self.frames.len(), &self.boundaries)?;
        }
        for (i, frame) in self.frames.iter().enumerate() {
            frame
                .body
                .validate_for(&self.tree)
                .map_err(|e| Error::InvalidArgument(format!("frame {i}: {e}")))?;
            for side in Side::BOTH {
                if let Some(est) = frame.hand(side) {
                    est.validate().map_err(|e| {
                        Error::InvalidArgument(format!("frame {i} {side} hand: {e}"))
                    })?;
                    if est.handedness != side {
                        return Err(Error::InvalidArgument(format!(
                            "frame {i}: {side} slot holds a {} hand",
                            est.handedness
                        )));
                    }
                }
            }
            if let Some(cam) = &frame.camera {
                cam.validate()
                    .map_err(|e| Error::InvalidArgument(format!("frame {i}: {e}")))?;
            }
        }
        Ok(())
    }

    /// World joint positions per frame (meters), via forward kinematics.
    pub fn joint_positions(&self) -> Result<Vec<Vec<Vector3<f64>>>> {
        self.frames
            .iter()
            .map(|f| {
                crate::kinematics::forward_kinematics(&self.tree, &f.body).map(|w| w.positions)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Wire schema
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeRef {
    Path(String),
    Inline(KinematicTree),
}

/// Hand estimate as stored on disk; handedness is implied by the map key.
#[derive(Serialize, Deserialize)]
struct HandRecord {
    wrist_global: Rotation,
    finger_rotations: Vec<AxisAngle>,
    #[serde(default = "zeros10")]
    hand_shape: Vec<f64>,
    #[serde(default)]
    translation: [f64; 3],
    #[serde(default)]
    source_mirrored: bool,
}

fn zeros10() -> Vec<f64> {
    vec![0.0; 10]
}

impl HandRecord {
    fn into_estimate(self, side: Side) -> HandEstimate {
        HandEstimate {
            handedness: side,
            wrist_global: self.wrist_global,
            finger_rotations: self.finger_rotations,
            hand_shape: self.hand_shape,
            translation: Vector3::from(self.translation),
            source_mirrored: self.source_mirrored,
        }
    }

    fn from_estimate(est: &HandEstimate) -> HandRecord {
        HandRecord {
            wrist_global: est.wrist_global,
            finger_rotations: est.finger_rotations.clone(),
            hand_shape: est.hand_shape.clone(),
            translation: [est.translation.x, est.translation.y, est.translation.z],
            source_mirrored: est.source_mirrored,
        }
    }
}

#[derive(Default, Serialize, Deserialize)]
struct HandsRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<HandRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<HandRecord>,
}

impl HandsRecord {
    fn is_empty(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    body: BodyPose,
    #[serde(default, skip_serializing_if = "HandsRecord::is_empty")]
    hands: HandsRecord,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    keypoints: Vec<Keypoint2D>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera: Option<WeakPerspectiveCamera>,
}

#[derive(Serialize, Deserialize)]
struct SequenceFile {
    version: u32,
    tree: TreeRef,
    frames: Vec<FrameRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    boundaries: Vec<usize>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    metadata: serde_json::Map<String, serde_json::Value>,
}

fn check_version(value: &serde_json::Value, path: &str) -> Result<()> {
    let version = value
        .get("version")
        .ok_or_else(|| Error::parse(path, "missing `version` field"))?;
    match version.as_u64() {
        Some(v) if v as u32 == SEQUENCE_VERSION => Ok(()),
        Some(v) => Err(Error::Version(format!(
            "{path} declares version {v}, this build reads version {SEQUENCE_VERSION}"
        ))),
        None => Err(Error::parse(path, "`version` is not an integer")),
    }
}

/// Loads and validates a sequence file. A tree given as a path is resolved
/// relative to the sequence file's directory.
pub fn load_sequence(path: impl AsRef<Path>) -> Result<Sequence> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(&shown, e))?;
    check_version(&value, &shown)?;
    let file: SequenceFile = serde_json::from_value(value).map_err(|e| Error::parse(&shown, e))?;

    let tree = match file.tree {
        TreeRef::Inline(tree) => tree,
        TreeRef::Path(rel) => {
            let tree_path = path.parent().unwrap_or(Path::new(".")).join(&rel);
            let tree_text = std::fs::read_to_string(&tree_path)?;
            serde_json::from_str(&tree_text)
                .map_err(|e| Error::parse(tree_path.display().to_string(), e))?
        }
    };

    let frames = file
        .frames
        .into_iter()
        .map(|record| FrameBundle {
            body: record.body,
            left_hand: record.hands.left.map(|h| h.into_estimate(Side::Left)),
            right_hand: record.hands.right.map(|h| h.into_estimate(Side::Right)),
            keypoints: record
                .keypoints
                .into_iter()
                .map(|kp| Keypoint2D::new(kp.joint, kp.position, kp.confidence))
                .collect(),
            camera: record.camera,
        })
        .collect();

    let seq = Sequence {
        tree,
        frames,
        boundaries: file.boundaries,
        metadata: file.metadata,
    };
    seq.validate().map_err(|e| Error::parse(&shown, e))?;
    Ok(seq)
}

/// Writes a sequence with the tree inlined, pretty-printed.
pub fn save_sequence(seq: &Sequence, path: impl AsRef<Path>) -> Result<()> {
    seq.validate()?;
    let file = SequenceFile {
        version: SEQUENCE_VERSION,
        tree: TreeRef::Inline(seq.tree.clone()),
        frames: seq
            .frames
            .iter()
            .map(|frame| FrameRecord {
                body: frame.body.clone(),
                hands: HandsRecord {
                    left: frame.left_hand.as_ref().map(HandRecord::from_estimate),
                    right: frame.right_hand.as_ref().map(HandRecord::from_estimate),
                },
                keypoints: frame.keypoints.clone(),
                camera: frame.camera,
            })
            .collect(),
        boundaries: seq.boundaries.clone(),
        metadata: seq.metadata.clone(),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::parse(path.as_ref().display().to_string(), e))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Raw per-frame point sets (meters), for evaluating arbitrary point clouds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointsFile {
    pub version: u32,
    /// `frames x points` nested `[x, y, z]` triples, meters.
    pub points: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    pub boundaries: Vec<usize>,
}

impl PointsFile {
    pub fn to_vectors(&self) -> Vec<Vec<Vector3<f64>>> {
        self.points
            .iter()
            .map(|frame| frame.iter().map(|p| Vector3::from(*p)).collect())
            .collect()
    }
}

pub fn load_points(path: impl AsRef<Path>) -> Result<PointsFile> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse(&shown, e))?;
    check_version(&value, &shown)?;
    let file: PointsFile = serde_json::from_value(value).map_err(|e| Error::parse(&shown, e))?;
    if let Some(first) = file.points.first() {
        if file.points.iter().any(|f| f.len() != first.len()) {
            return Err(Error::parse(&shown, "frames have differing point counts"));
        }
        segment_bounds(file.points.len(), &file.boundaries).map_err(|e| Error::parse(&shown, e))?;
    }
    Ok(file)
}

pub fn save_points(points: &PointsFile, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(points)
        .map_err(|e| Error::parse(path.as_ref().display().to_string(), e))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::LandmarkId;
    use nalgebra::Vector2;

    fn minimal_sequence() -> Sequence {
        let tree = KinematicTree::synthetic_human();
        let body = BodyPose::rest(&tree);
        Sequence {
            tree,
            frames: vec![FrameBundle {
                body,
                left_hand: None,
                right_hand: None,
                keypoints: vec![],
                camera: None,
            }],
            boundaries: vec![],
            metadata: serde_json::Map::new(),
        }
    }

    #[test]
    fn minimal_one_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        let seq = minimal_sequence();
        save_sequence(&seq, &path).unwrap();
        let back = load_sequence(&path).unwrap();
        assert_eq!(back.frames.len(), 1);
        assert_eq!(back.frames[0].body, seq.frames[0].body);
        assert!(back.frames[0].left_hand.is_none());
    }

    #[test]
    fn missing_hands_key_is_valid() {
        let tree = KinematicTree::synthetic_human();
        let json = serde_json::json!({
            "version": 1,
            "tree": tree,
            "frames": [{
                "body": BodyPose::rest(&tree),
                "keypoints": [
                    {"joint": "l_wrist", "position": [12.0, 34.0], "confidence": 0.75}
                ],
                "camera": {"scale": 500.0, "translation": [640.0, 360.0]}
            }]
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        let seq = load_sequence(&path).unwrap();
        assert!(seq.frames[0].left_hand.is_none());
        assert_eq!(seq.frames[0].keypoints[0].joint, LandmarkId::LWrist);
        assert_eq!(
            seq.frames[0].keypoints[0].position,
            Vector2::new(12.0, 34.0)
        );
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        std::fs::write(&path, r#"{"version": 99, "tree": "x", "frames": []}"#).unwrap();
        assert!(matches!(load_sequence(&path), Err(Error::Version(_))));
    }

    #[test]
    fn schema_violation_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, r#"{"version": 1, "frames": "nope"}"#).unwrap();
        match load_sequence(&path) {
            Err(Error::Parse { path: p, .. }) => assert!(p.contains("broken.json")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn tree_by_path_resolves_relative() {
        let dir = tempfile::tempdir().unwrap();
        let tree = KinematicTree::synthetic_human();
        std::fs::write(
            dir.path().join("tree.json"),
            serde_json::to_string(&tree).unwrap(),
        )
        .unwrap();
        let json = serde_json::json!({
            "version": 1,
            "tree": "tree.json",
            "frames": [{"body": BodyPose::rest(&tree)}]
        });
        let path = dir.path().join("seq.json");
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        let seq = load_sequence(&path).unwrap();
        assert_eq!(seq.tree.len(), tree.len());
    }

    #[test]
    fn confidence_clamped_on_load() {
        let tree = KinematicTree::synthetic_human();
        let json = serde_json::json!({
            "version": 1,
            "tree": tree,
            "frames": [{
                "body": BodyPose::rest(&tree),
                "keypoints": [
                    {"joint": "r_elbow", "position": [0.0, 0.0], "confidence": 7.5}
                ]
            }]
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.json");
        std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
        let seq = load_sequence(&path).unwrap();
        assert_eq!(seq.frames[0].keypoints[0].confidence, 1.0);
    }

    #[test]
    fn points_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("points.json");
        let file = PointsFile {
            version: 1,
            points: vec![vec![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]; 4],
            boundaries: vec![2],
        };
        save_points(&file, &path).unwrap();
        let back = load_points(&path).unwrap();
        assert_eq!(back.points, file.points);
        assert_eq!(back.boundaries, vec![2]);
    }
}

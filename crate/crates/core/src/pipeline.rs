//! Pipeline orchestration: per-frame hand integration and shoulder
//! refinement, sequence-level smoothing, and evaluation assembly.
//!
//! Stage order per frame is mirror, convert, elbow solve (+ twist), then
//! refine; smoothing runs once over the whole sequence afterwards. Frames
//! whose hand stages fail (for example a degenerate forearm) pass through
//! unfused for that side; the failure is collected with its frame index and
//! recorded in the output metadata under `frame_errors`. Identical inputs
//! and config produce identical outputs.

use std::time::Instant;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::hand::{integrate_hand, mirror_hand, HandMeanPose, IntegrateOptions};
use crate::io::{FrameBundle, GroupJitter, MetricsReport, PipelineConfig, Sequence, Timing};
use crate::kinematics::{KinematicTree, Side};
use crate::metrics::{
    deviation_trace, jitter, jitter_trace, pa_mpvpe, rte, RegionErrors, RegionMask,
};
use crate::refine::{optimize_shoulder, DeviationPrior};
use crate::smooth::{poses_from_trajectory, smooth_sequence, trajectory_from_poses};

/// A per-frame, per-side failure that degraded gracefully.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameIssue {
    pub frame: usize,
    pub side: Option<Side>,
    pub message: String,
}

pub struct PipelineOutput {
    pub sequence: Sequence,
    pub frame_issues: Vec<FrameIssue>,
}

/// Runs the configured stages over a sequence, resolving the hand mean pose
/// and tree override from the config's paths.
pub fn run_pipeline(seq: &Sequence, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let mean = match &cfg.hand_mean {
        Some(path) => HandMeanPose::load(path)?,
        None => HandMeanPose::zero(),
    };
    let tree = match &cfg.tree {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Some(
                serde_json::from_str::<KinematicTree>(&text)
                    .map_err(|e| Error::parse(path.display().to_string(), e))?,
            )
        }
        None => None,
    };
    run_pipeline_with(seq, cfg, &mean, tree.as_ref())
}

/// [`run_pipeline`] with the mean pose (and optional tree override) already
/// in memory.
pub fn run_pipeline_with(
    seq: &Sequence,
    cfg: &PipelineConfig,
    mean: &HandMeanPose,
    tree_override: Option<&KinematicTree>,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    seq.validate()?;
    let stages = cfg.stages;
    let tree = tree_override.unwrap_or(&seq.tree);
    if tree_override.is_some() {
        for (i, frame) in seq.frames.iter().enumerate() {
            frame
                .body
                .validate_for(tree)
                .map_err(|e| Error::InvalidConfig(format!("tree override, frame {i}: {e}")))?;
        }
    }

    let total_start = Instant::now();
    let mut issues = Vec::new();
    let mut frames: Vec<FrameBundle> = Vec::with_capacity(seq.frames.len());

    let integrate_opts = IntegrateOptions {
        convert: stages.convert,
        elbow_solve: stages.elbow_solve,
        twist: stages.twist,
    };
    let hand_stages_on = stages.convert || stages.elbow_solve;

    for (i, input) in seq.frames.iter().enumerate() {
        let frame_start = Instant::now();
        let mut frame = input.clone();

        for side in Side::BOTH {
            let Some(est) = frame.hand(side).cloned() else {
                continue;
            };
            let est = if stages.mirror && est.source_mirrored && est.handedness == Side::Left {
                match mirror_hand(&est) {
                    Ok(unmirrored) => unmirrored,
                    Err(e) => {
                        issues.push(FrameIssue {
                            frame: i,
                            side: Some(side),
                            message: e.to_string(),
                        });
                        continue;
                    }
                }
            } else {
                est
            };
            if hand_stages_on {
                match integrate_hand(tree, &frame.body, &est, mean, &integrate_opts) {
                    Ok(pose) => frame.body = pose,
                    Err(e) => {
                        issues.push(FrameIssue {
                            frame: i,
                            side: Some(side),
                            message: e.to_string(),
                        });
                        continue;
                    }
                }
            }
            frame.set_hand(side, Some(est));
        }

        if stages.refine && !frame.keypoints.is_empty() {
            if let Some(camera) = frame.camera {
                let prior = DeviationPrior::anchored_at(&frame.body);
                match optimize_shoulder(
                    tree,
                    &frame.body,
                    &frame.keypoints,
                    &camera,
                    &prior,
                    &cfg.refine,
                    i,
                ) {
                    Ok(pose) => frame.body = pose,
                    Err(e) => issues.push(FrameIssue {
                        frame: i,
                        side: None,
                        message: e.to_string(),
                    }),
                }
            } else {
                issues.push(FrameIssue {
                    frame: i,
                    side: None,
                    message: "refine enabled but the frame has no camera".into(),
                });
            }
        }

        log::debug!(
            "frame {i}: {:.6} s/frame",
            frame_start.elapsed().as_secs_f64()
        );
        frames.push(frame);
    }

    if stages.smooth && !frames.is_empty() {
        let poses: Vec<_> = frames.iter().map(|f| f.body.clone()).collect();
        let traj = trajectory_from_poses(tree, &poses, &seq.boundaries)?;
        let smoothed = smooth_sequence(&traj, &cfg.smooth)?;
        let back = poses_from_trajectory(tree, &smoothed, &poses)?;
        for (frame, pose) in frames.iter_mut().zip(back) {
            frame.body = pose;
        }
    }

    log::debug!(
        "pipeline: {} frames in {:.3} s",
        frames.len(),
        total_start.elapsed().as_secs_f64()
    );

    let mut metadata = seq.metadata.clone();
    if !issues.is_empty() {
        metadata.insert(
            "frame_errors".to_string(),
            serde_json::Value::Array(
                issues
                    .iter()
                    .map(|issue| {
                        serde_json::json!({
                            "frame": issue.frame,
                            "side": issue.side.map(|s| s.to_string()),
                            "message": issue.message,
                        })
                    })
                    .collect(),
            ),
        );
    }

    Ok(PipelineOutput {
        sequence: Sequence {
            tree: tree.clone(),
            frames,
            boundaries: seq.boundaries.clone(),
            metadata,
        },
        frame_issues: issues,
    })
}

/// Evaluation bundle: the report plus per-frame traces for plotting.
pub struct Evaluation {
    pub report: MetricsReport,
    pub jitter_trace: Vec<Option<f64>>,
    pub deviation_trace: Vec<Option<f64>>,
}

fn subset(frames: &[Vec<Vector3<f64>>], indices: &[usize]) -> Vec<Vec<Vector3<f64>>> {
    frames
        .iter()
        .map(|f| indices.iter().map(|&i| f[i]).collect())
        .collect()
}

/// Metrics over raw point sets in meters. PA-MPVPE is computed per frame per
/// region and averaged over frames; jitter groups come from the mask (hands
/// = left + right). `wrists` names the two point indices used for the
/// frame-to-frame displacement (skipped when absent).
pub fn evaluate_points(
    pred_m: &[Vec<Vector3<f64>>],
    gt_m: &[Vec<Vector3<f64>>],
    boundaries: &[usize],
    mask: &RegionMask,
    wrists: Option<(usize, usize)>,
) -> Result<Evaluation> {
    if pred_m.len() != gt_m.len() {
        return Err(Error::InvalidArgument(format!(
            "prediction has {} frames, ground truth {}",
            pred_m.len(),
            gt_m.len()
        )));
    }
    if pred_m.is_empty() {
        return Err(Error::InvalidArgument("no frames to evaluate".into()));
    }
    let to_mm = |frames: &[Vec<Vector3<f64>>]| -> Vec<Vec<Vector3<f64>>> {
        frames
            .iter()
            .map(|f| f.iter().map(|p| p * 1000.0).collect())
            .collect()
    };
    let pred = to_mm(pred_m);
    let gt = to_mm(gt_m);
    let n_points = gt[0].len();
    if pred.iter().chain(gt.iter()).any(|f| f.len() != n_points) {
        return Err(Error::InvalidArgument(
            "frames have differing point counts".into(),
        ));
    }
    mask.validate(n_points)?;

    // per-frame Procrustes alignment, averaged over frames
    let mut sums = RegionErrors::default();
    let add = |slot: &mut Option<f64>, value: Option<f64>| {
        if let Some(v) = value {
            *slot = Some(slot.unwrap_or(0.0) + v);
        }
    };
    for (p, g) in pred.iter().zip(&gt) {
        let errs = pa_mpvpe(p, g, mask)?;
        add(&mut sums.body, errs.body);
        add(&mut sums.left_hand, errs.left_hand);
        add(&mut sums.right_hand, errs.right_hand);
    }
    let n = pred.len() as f64;
    let pa = RegionErrors {
        body: sums.body.map(|v| v / n),
        left_hand: sums.left_hand.map(|v| v / n),
        right_hand: sums.right_hand.map(|v| v / n),
    };

    let hands_idx: Vec<usize> = mask
        .left_hand
        .iter()
        .chain(mask.right_hand.iter())
        .copied()
        .collect();
    let jitter_of = |indices: &[usize]| -> Result<Option<f64>> {
        if indices.is_empty() {
            return Ok(None);
        }
        jitter(&subset(&pred, indices), boundaries).map(Some)
    };
    let group_jitter = GroupJitter {
        hands: jitter_of(&hands_idx)?,
        body: jitter_of(&mask.body)?,
    };

    let rte_value = match wrists {
        Some((l, r)) => {
            let wrist_frames: Vec<[Vector3<f64>; 2]> = pred.iter().map(|f| [f[l], f[r]]).collect();
            Some(rte(&wrist_frames, boundaries)?)
        }
        None => None,
    };

    Ok(Evaluation {
        report: MetricsReport {
            pa_mpvpe: pa,
            jitter: group_jitter,
            rte: rte_value,
            frames: pred.len(),
            timing: Timing::default(),
        },
        jitter_trace: jitter_trace(&pred, boundaries)?,
        deviation_trace: deviation_trace(&pred, boundaries)?,
    })
}

/// Metrics over two pose sequences: joint positions via forward kinematics,
/// regions derived from the tree unless a mask is given, wrists from the
/// tree landmarks. Boundaries come from the ground truth.
pub fn evaluate_sequences(
    pred: &Sequence,
    gt: &Sequence,
    mask: Option<&RegionMask>,
) -> Result<Evaluation> {
    let derived = RegionMask::from_tree(&gt.tree);
    let mask = mask.unwrap_or(&derived);
    let lm = gt.tree.landmarks();
    evaluate_points(
        &pred.joint_positions()?,
        &gt.joint_positions()?,
        &gt.boundaries,
        mask,
        Some((lm.l_wrist, lm.r_wrist)),
    )
}

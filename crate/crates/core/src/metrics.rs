//! Evaluation metrics: Procrustes-aligned per-point error, jitter (third
//! finite difference of position), frame-to-frame wrist displacement, and
//! per-frame deviation traces.
//!
//! All functions are unit-preserving: distances come back in whatever length
//! unit the positions carry. The report layer feeds millimeters, matching
//! the conventional mm / mm-per-frame^3 presentation. Finite-difference
//! windows never span a segment boundary.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::KinematicTree;
use crate::smooth::segment_bounds;
use crate::so3::Rotation;

/// Least-squares similarity transform `p -> scale * R * p + t`.
#[derive(Debug, Clone, Copy)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) * self.scale + self.translation
    }
}

/// Named point-index sets for per-region reporting.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RegionMask {
    #[serde(default)]
    pub body: Vec<usize>,
    #[serde(default)]
    pub left_hand: Vec<usize>,
    #[serde(default)]
    pub right_hand: Vec<usize>,
}

impl RegionMask {
    pub fn regions(&self) -> [(&'static str, &Vec<usize>); 3] {
        [
            ("body", &self.body),
            ("left_hand", &self.left_hand),
            ("right_hand", &self.right_hand),
        ]
    }

    pub fn validate(&self, point_count: usize) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, indices) in self.regions() {
            for &i in indices {
                if i >= point_count {
                    return Err(Error::InvalidArgument(format!(
                        "region {name} references point {i} of {point_count}"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!(
                        "point {i} appears in more than one region"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Region mask over joint positions of `tree`: hand joints per side,
    /// everything else as body.
    pub fn from_tree(tree: &KinematicTree) -> RegionMask {
        RegionMask {
            body: tree.body_joints(),
            left_hand: tree.hand_joints(crate::kinematics::Side::Left).to_vec(),
            right_hand: tree.hand_joints(crate::kinematics::Side::Right).to_vec(),
        }
    }
}

/// Per-region aligned error; regions without points are omitted.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegionErrors {
    pub body: Option<f64>,
    pub left_hand: Option<f64>,
    pub right_hand: Option<f64>,
}

/// Optimal similarity transform aligning `source` onto `target` in the
/// least-squares sense, with the reflection disallowed (the smallest
/// singular direction is flipped when the rotation determinant would be
/// negative).
///
/// Requires at least 3 point pairs and a source/target configuration of
/// rank >= 2 (not all collinear).
pub fn procrustes_align(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "point counts differ: {} vs {}",
            source.len(),
            target.len()
        )));
    }
    let n = source.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "procrustes alignment needs at least 3 points, got {n}"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mu_s: Vector3<f64> = source.iter().sum::<Vector3<f64>>() * inv_n;
    let mu_t: Vector3<f64> = target.iter().sum::<Vector3<f64>>() * inv_n;

    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        let ds = s - mu_s;
        let dt = t - mu_t;
        cov += dt * ds.transpose();
        var_s += ds.norm_squared();
    }
    cov *= inv_n;
    var_s *= inv_n;

    let svd = cov.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::NumericalFailure("svd failed".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NumericalFailure("svd failed".into()))?;
    let d = svd.singular_values;
    if d[0] <= 0.0 || d[1] <= 1e-9 * d[0] {
        return Err(Error::DegenerateGeometry(
            "point configuration has rank < 2 (collinear or coincident)".into(),
        ));
    }

    // reflection guard
    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if (u * v_t).determinant() < 0.0 {
        sign[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&sign) * v_t;
    let scale = (d[0] * sign[0] + d[1] * sign[1] + d[2] * sign[2]) / var_s;
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "optimal similarity scale is not positive".into(),
        ));
    }
    let rotation = Rotation::from_matrix(rotation)
        .map_err(|e| Error::NumericalFailure(format!("procrustes rotation invalid: {e}")))?;
    let translation = mu_t - rotation.rotate(&mu_s) * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Mean Euclidean distance between paired points.
pub fn mean_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).sum::<f64>() / a.len() as f64
}

/// Procrustes-aligned mean per-point error, per region: each region's
/// prediction is aligned to the ground truth by its own optimal similarity
/// transform before distances are averaged. Empty regions are omitted.
pub fn pa_mpvpe(
    pred: &[Vector3<f64>],
    gt: &[Vector3<f64>],
    mask: &RegionMask,
) -> Result<RegionErrors> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidArgument(format!(
            "point counts differ: {} vs {}",
            pred.len(),
            gt.len()
        )));
    }
    mask.validate(pred.len())?;
    let mut out = RegionErrors::default();
    for (name, indices) in mask.regions() {
        if indices.is_empty() {
            continue;
        }
        let p: Vec<Vector3<f64>> = indices.iter().map(|&i| pred[i]).collect();
        let g: Vec<Vector3<f64>> = indices.iter().map(|&i| gt[i]).collect();
        let transform = procrustes_align(&p, &g)?;
        let aligned: Vec<Vector3<f64>> = p.iter().map(|v| transform.apply(v)).collect();
        let err = mean_distance(&aligned, &g);
        match name {
            "body" => out.body = Some(err),
            "left_hand" => out.left_hand = Some(err),
            _ => out.right_hand = Some(err),
        }
    }
    Ok(out)
}

fn check_frames(positions: &[Vec<Vector3<f64>>]) -> Result<usize> {
    let Some(first) = positions.first() else {
        return Err(Error::InvalidArgument("no frames".into()));
    };
    let n = first.len();
    if positions.iter().any(|f| f.len() != n) {
        return Err(Error::InvalidArgument(
            "frames have differing point counts".into(),
        ));
    }
    Ok(n)
}

/// Mean magnitude of the third finite difference of position, over all
/// masked windows and joints. Each window's jerk is the Euclidean norm of
/// the per-joint third difference; norms are averaged afterwards.
///
/// Errors with [`Error::UndefinedMetric`] when no segment fits a window.
#[allow(clippy::needless_range_loop)]
pub fn jitter(positions: &[Vec<Vector3<f64>>], boundaries: &[usize]) -> Result<f64> {
    let joints = check_frames(positions)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (s, e) in segment_bounds(positions.len(), boundaries)? {
        for t in s..e.saturating_sub(3) {
            for j in 0..joints {
                let d = positions[t + 3][j] - positions[t + 2][j] * 3.0 + positions[t + 1][j] * 3.0
                    - positions[t][j];
                sum += d.norm();
            }
            count += joints;
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "every segment is shorter than the 4-frame jerk window".into(),
        ));
    }
    Ok(sum / count as f64)
}

/// Per-frame jitter trace: the joint-mean jerk magnitude of the window
/// ending at each frame (`None` for the first three frames of a segment).
#[allow(clippy::needless_range_loop)]
pub fn jitter_trace(
    positions: &[Vec<Vector3<f64>>],
    boundaries: &[usize],
) -> Result<Vec<Option<f64>>> {
    let joints = check_frames(positions)?;
    let mut out = vec![None; positions.len()];
    for (s, e) in segment_bounds(positions.len(), boundaries)? {
        for t in (s + 3)..e {
            let mut sum = 0.0;
            for j in 0..joints {
                let d = positions[t][j] - positions[t - 1][j] * 3.0 + positions[t - 2][j] * 3.0
                    - positions[t - 3][j];
                sum += d.norm();
            }
            out[t] = Some(sum / joints as f64);
        }
    }
    Ok(out)
}

/// Mean frame-to-frame displacement over both wrists and all masked
/// consecutive frame pairs.
#[allow(clippy::needless_range_loop)]
pub fn rte(wrists: &[[Vector3<f64>; 2]], boundaries: &[usize]) -> Result<f64> {
    if wrists.is_empty() {
        return Err(Error::InvalidArgument("no frames".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (s, e) in segment_bounds(wrists.len(), boundaries)? {
        for t in s..e.saturating_sub(1) {
            for w in 0..2 {
                sum += (wrists[t + 1][w] - wrists[t][w]).norm();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::UndefinedMetric(
            "every segment is shorter than 2 frames".into(),
        ));
    }
    Ok(sum / count as f64)
}

/// Per-frame mean point displacement from the previous frame (`None` at
/// segment starts).
pub fn deviation_trace(
    points: &[Vec<Vector3<f64>>],
    boundaries: &[usize],
) -> Result<Vec<Option<f64>>> {
    let n = check_frames(points)?;
    let mut out = vec![None; points.len()];
    for (s, e) in segment_bounds(points.len(), boundaries)? {
        for t in (s + 1)..e {
            let sum: f64 = (0..n)
                .map(|j| (points[t][j] - points[t - 1][j]).norm())
                .sum();
            out[t] = Some(sum / n as f64);
        }
    }
    Ok(out)
}

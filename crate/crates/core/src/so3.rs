//! Rotation algebra on SO(3): axis-angle conversions, composition, geodesic
//! distance, swing-twist decomposition, and mirror conjugation.
//!
//! A [`Rotation`] is a 3x3 orthonormal matrix with determinant +1. An
//! [`AxisAngle`] is the tangent-space encoding: a 3-vector whose direction is
//! the rotation axis and whose Euclidean norm is the angle in radians; the
//! zero vector encodes the identity.
//!
//! # Conventions
//!
//! - The log map ([`Rotation::to_axis_angle`]) returns angles in `[0, pi]`.
//!   At exactly `pi` the axis sign is ambiguous; the sign is chosen so that
//!   the first nonzero axis component is positive.
//! - Below an angle of `1e-7` both exp and log switch to second-order Taylor
//!   expansions, so the maps stay smooth through the identity.
//! - Swing-twist splitting is a Euclidean projection of the axis-angle
//!   vector onto the given axis, not a quaternion factorization. The two
//!   agree to first order; for small angles (< 0.3 rad) they match within
//!   5e-3 (covered by tests against a quaternion oracle).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angle below which exp/log use their Taylor expansions.
const TAYLOR_ANGLE: f64 = 1e-7;
/// Distance from pi below which the log map switches to the symmetric-part
/// branch (the skew part loses precision as sin(theta) -> 0).
const NEAR_PI_MARGIN: f64 = 1e-3;
/// Orthonormality defect accepted by [`Rotation::from_matrix`].
const ORTHONORMAL_TOL: f64 = 1e-6;
/// Defect above which results are snapped back onto SO(3).
const DRIFT_TOL: f64 = 1e-12;

/// Axis-angle rotation vector (radians times unit axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AxisAngle(Vector3<f64>);

impl AxisAngle {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AxisAngle(Vector3::new(x, y, z))
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        AxisAngle(v)
    }

    pub fn zero() -> Self {
        AxisAngle(Vector3::zeros())
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    /// Rotation angle in radians (the vector norm, always >= 0).
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    /// Unit rotation axis, or `None` for the zero vector.
    pub fn axis(&self) -> Option<Vector3<f64>> {
        let n = self.0.norm();
        if n == 0.0 {
            None
        } else {
            Some(self.0 / n)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Equivalent vector with the angle wrapped into `[0, pi]`.
    ///
    /// Adds multiples of `2*pi` along the axis and flips the axis when the
    /// wrapped angle lands in `(pi, 2*pi)`.
    pub fn canonicalized(&self) -> AxisAngle {
        let theta = self.angle();
        if theta <= std::f64::consts::PI {
            return *self;
        }
        let axis = self.0 / theta;
        let mut wrapped = theta % (2.0 * std::f64::consts::PI);
        let mut dir = axis;
        if wrapped > std::f64::consts::PI {
            wrapped = 2.0 * std::f64::consts::PI - wrapped;
            dir = -axis;
        }
        AxisAngle(dir * wrapped)
    }

    /// Reflects the encoded rotation across the YZ plane: `(x, y, z)` maps to
    /// `(x, -y, -z)`. Equals `Rotation::mirror_conjugate` in vector form and
    /// is exact (sign flips only).
    pub fn mirror_yz(&self) -> AxisAngle {
        AxisAngle(Vector3::new(self.0.x, -self.0.y, -self.0.z))
    }

    /// Splits the vector into its component along `axis` (twist) and the
    /// orthogonal remainder (swing): `twist = axis * (self . axis)`,
    /// `swing = self - twist`.
    ///
    /// `axis` must be a unit vector within 1e-9. The decomposition is exact
    /// vector arithmetic: `twist + swing == self` bitwise.
    pub fn swing_twist_split(&self, axis: &Vector3<f64>) -> Result<(AxisAngle, AxisAngle)> {
        let n = axis.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "swing-twist axis must be unit length (norm = {n})"
            )));
        }
        let twist = axis * self.0.dot(axis);
        let swing = self.0 - twist;
        Ok((AxisAngle(twist), AxisAngle(swing)))
    }
}

impl std::ops::Add for AxisAngle {
    type Output = AxisAngle;
    fn add(self, rhs: AxisAngle) -> AxisAngle {
        AxisAngle(self.0 + rhs.0)
    }
}

impl std::ops::Sub for AxisAngle {
    type Output = AxisAngle;
    fn sub(self, rhs: AxisAngle) -> AxisAngle {
        AxisAngle(self.0 - rhs.0)
    }
}

/// Element of SO(3), stored as a 3x3 orthonormal matrix with det +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

/// Skew-symmetric cross-product matrix: `hat(w) * v == w x v`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Max-abs entry of `m^T m - I`.
fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    let d = m.transpose() * m - Matrix3::identity();
    d.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Nearest rotation matrix to `m` (polar factor via SVD).
fn snap_to_so3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd of 3x3 always yields u");
    let vt = svd.v_t.expect("svd of 3x3 always yields v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // flip the least-significant singular direction
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * vt;
    }
    r
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates `m` as a rotation matrix and wraps it.
    ///
    /// Matrices with an orthonormality defect above 1e-6 or a non-positive
    /// determinant are rejected; small drift (above 1e-12) is snapped back
    /// onto SO(3) so stored matrices always satisfy the type invariants.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "rotation matrix has non-finite entries".into(),
            ));
        }
        let defect = orthonormality_defect(&m);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not orthonormal (defect {defect:.3e} > {ORTHONORMAL_TOL:.0e})"
            )));
        }
        if m.determinant() < 0.0 {
            return Err(Error::InvalidArgument(
                "matrix has negative determinant (reflection, not rotation)".into(),
            ));
        }
        if defect > DRIFT_TOL {
            Ok(Rotation(snap_to_so3(&m)))
        } else {
            Ok(Rotation(m))
        }
    }

    /// Wraps `m` without validation. The caller guarantees the invariants.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Rodrigues exponential map.
    pub fn from_axis_angle(a: &AxisAngle) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidArgument(
                "axis-angle vector has non-finite entries".into(),
            ));
        }
        let v = a.vector();
        let theta_sq = v.norm_squared();
        let (sin_factor, cos_factor) = if theta_sq < TAYLOR_ANGLE * TAYLOR_ANGLE {
            // sin(t)/t = 1 - t^2/6, (1 - cos(t))/t^2 = 1/2 - t^2/24
            (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
        } else {
            let theta = theta_sq.sqrt();
            (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
        };
        let k = hat(&v);
        Ok(Rotation(
            Matrix3::identity() + k * sin_factor + k * k * cos_factor,
        ))
    }

    /// Matrix log map. Angle lands in `[0, pi]`.
    ///
    /// At exactly `pi` the axis sign is ambiguous; the convention is
    /// "first nonzero axis component positive".
    pub fn to_axis_angle(&self) -> AxisAngle {
        let m = &self.0;
        // skew part carries sin(theta) * axis; symmetric part carries cos
        let v = vee(&(m - m.transpose())) * 0.5;
        let s = v.norm();
        let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        let theta = s.atan2(c);

        if theta < TAYLOR_ANGLE {
            // theta/sin(theta) = 1 + theta^2/6 + O(theta^4)
            return AxisAngle(v * (1.0 + theta * theta / 6.0));
        }
        if theta > std::f64::consts::PI - NEAR_PI_MARGIN {
            // Near pi the skew part degrades; recover the axis from the
            // symmetric part instead: (S - I)/(1 - cos) + I == axis*axis^T.
            let sym = (m + m.transpose()) * 0.5;
            let w = Matrix3::identity() + (sym - Matrix3::identity()) / (1.0 - c);
            let i = (0..3)
                .max_by(|&a, &b| w[(a, a)].partial_cmp(&w[(b, b)]).unwrap())
                .unwrap();
            let ai = w[(i, i)].max(0.0).sqrt();
            let mut axis = Vector3::new(w[(0, i)] / ai, w[(1, i)] / ai, w[(2, i)] / ai);
            axis[i] = ai;
            axis.normalize_mut();
            // Pick the sign: follow the skew part while it is meaningful
            // (its entries are exact to ~1e-16, so the sign survives down to
            // tiny magnitudes), fall back to the documented convention at pi
            // itself where the ambiguity is genuine.
            if s > 1e-13 {
                if axis.dot(&v) < 0.0 {
                    axis = -axis;
                }
            } else if let Some(first) = axis.iter().find(|c| c.abs() > 1e-12) {
                if *first < 0.0 {
                    axis = -axis;
                }
            }
            return AxisAngle(axis * theta);
        }
        AxisAngle(v * (theta / s))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Inverse rotation (the transpose).
    pub fn inverse(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Matrix product `self * other`, snapped back onto SO(3) when the
    /// orthonormality drift exceeds 1e-12.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let m = self.0 * other.0;
        if orthonormality_defect(&m) > DRIFT_TOL {
            Rotation(snap_to_so3(&m))
        } else {
            Rotation(m)
        }
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Angle of `self^T * other`, in `[0, pi]`.
    pub fn geodesic_distance(&self, other: &Rotation) -> f64 {
        self.inverse().compose(other).to_axis_angle().angle()
    }

    /// Conjugation by the YZ-plane reflection `M = diag(-1, 1, 1)`:
    /// returns `M * R * M^T`, which is again a proper rotation.
    ///
    /// Entry-wise this flips the signs of the four entries coupling the x
    /// axis to y/z, so the operation is an exact involution.
    pub fn mirror_conjugate(&self) -> Rotation {
        let m = &self.0;
        Rotation(Matrix3::new(
            m[(0, 0)],
            -m[(0, 1)],
            -m[(0, 2)],
            -m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            -m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ))
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.0;
        let rows: [[f64; 3]; 3] = [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ];
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(deserializer)?;
        let m = Matrix3::new(
            rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
            rows[2][1], rows[2][2],
        );
        Rotation::from_matrix(m).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl std::ops::Mul for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        self.compose(rhs)
    }
}

/// Right Jacobian of the exponential map: `exp(a + d) ~ exp(a) * exp(Jr(a) d)`
/// for small `d`. Used for analytic gradients through rotation parameters.
pub fn right_jacobian(a: &AxisAngle) -> Matrix3<f64> {
    let v = a.vector();
    let theta_sq = v.norm_squared();
    let k = hat(&v);
    if theta_sq < TAYLOR_ANGLE * TAYLOR_ANGLE {
        return Matrix3::identity() - k * 0.5 + k * k * (1.0 / 6.0);
    }
    let theta = theta_sq.sqrt();
    let a1 = (1.0 - theta.cos()) / theta_sq;
    let a2 = (theta - theta.sin()) / (theta_sq * theta);
    Matrix3::identity() - k * a1 + k * k * a2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Deterministic axis-angle samples spanning the full angle range.
    fn sample_axis_angles(n: usize, seed: u64) -> Vec<AxisAngle> {
        let mut rng = crate::synth::SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                let dir = rng.next_unit_vector();
                let angle = rng.next_f64() * (PI - 1e-6);
                AxisAngle::from_vector(dir * angle)
            })
            .collect()
    }

    /// Quaternion-based exponential map, independent of the Rodrigues path.
    fn quaternion_exp(a: &AxisAngle) -> Matrix3<f64> {
        let q = nalgebra::UnitQuaternion::from_scaled_axis(a.vector());
        *q.to_rotation_matrix().matrix()
    }

    #[test]
    fn exp_identity() {
        let r = Rotation::from_axis_angle(&AxisAngle::zero()).unwrap();
        assert_eq!(r.matrix(), &Matrix3::identity());
    }

    #[test]
    fn exp_quarter_turn_about_x() {
        let r = Rotation::from_axis_angle(&AxisAngle::new(FRAC_PI_2, 0.0, 0.0)).unwrap();
        let mapped = r.rotate(&Vector3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(mapped, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn exp_matches_quaternion_oracle() {
        for a in sample_axis_angles(10_000, 0x5eed_0001) {
            let r = Rotation::from_axis_angle(&a).unwrap();
            let q = quaternion_exp(&a);
            let diff = (r.matrix() - q).norm();
            assert!(diff < 1e-12, "exp mismatch {diff:e} at angle {}", a.angle());
        }
    }

    #[test]
    fn exp_rejects_non_finite() {
        assert!(Rotation::from_axis_angle(&AxisAngle::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(Rotation::from_axis_angle(&AxisAngle::new(0.0, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn log_identity() {
        let a = Rotation::identity().to_axis_angle();
        assert_eq!(a.vector(), Vector3::zeros());
    }

    #[test]
    fn log_pi_about_z_uses_sign_convention() {
        let r = Rotation::from_axis_angle(&AxisAngle::new(0.0, 0.0, PI)).unwrap();
        let a = r.to_axis_angle();
        // first nonzero axis component positive: axis is +z
        assert_relative_eq!(a.vector(), Vector3::new(0.0, 0.0, PI), epsilon = 1e-9);

        let r = Rotation::from_axis_angle(&AxisAngle::new(0.0, 0.0, -PI)).unwrap();
        let a = r.to_axis_angle();
        assert_relative_eq!(a.vector(), Vector3::new(0.0, 0.0, PI), epsilon = 1e-9);
    }

    #[test]
    fn log_round_trip_10k() {
        for a in sample_axis_angles(10_000, 0x5eed_0002) {
            let r = Rotation::from_axis_angle(&a).unwrap();
            let back = Rotation::from_axis_angle(&r.to_axis_angle()).unwrap();
            let d = r.geodesic_distance(&back);
            assert!(d < 1e-10, "round trip drift {d:e} at angle {}", a.angle());
        }
    }

    #[test]
    fn log_round_trip_near_pi() {
        // exercise both sides of the near-pi branch switch
        for &delta in &[1e-2f64, 2e-3, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10, 0.0] {
            let mut rng = crate::synth::SplitMix64::new(delta.to_bits());
            for _ in 0..50 {
                let a = AxisAngle::from_vector(rng.next_unit_vector() * (PI - delta));
                let r = Rotation::from_axis_angle(&a).unwrap();
                let back = Rotation::from_axis_angle(&r.to_axis_angle()).unwrap();
                assert!(r.geodesic_distance(&back) < 1e-10, "delta {delta:e}");
                assert!(r.to_axis_angle().angle() <= PI + 1e-12);
            }
        }
    }

    #[test]
    fn from_matrix_rejects_non_orthonormal() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 1e-3;
        assert!(matches!(
            Rotation::from_matrix(m),
            Err(Error::InvalidArgument(_))
        ));
        let reflection = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        assert!(Rotation::from_matrix(reflection).is_err());
    }

    #[test]
    fn from_matrix_snaps_small_drift() {
        let base = Rotation::from_axis_angle(&AxisAngle::new(0.3, -0.2, 0.9)).unwrap();
        let mut m = *base.matrix();
        m[(0, 0)] += 3e-8;
        let r = Rotation::from_matrix(m).unwrap();
        assert!(orthonormality_defect(r.matrix()) <= 1e-12);
    }

    #[test]
    fn compose_identity_and_inverse() {
        let r = Rotation::from_axis_angle(&AxisAngle::new(0.4, 0.1, -0.7)).unwrap();
        let id = r.compose(&Rotation::identity());
        assert_eq!(id.matrix(), r.matrix());
        let prod = r.compose(&r.inverse());
        let defect = (prod.matrix() - Matrix3::identity()).norm();
        assert!(defect < 1e-12);
    }

    #[test]
    fn geodesic_known_angle() {
        let r = Rotation::from_axis_angle(&AxisAngle::new(0.0, FRAC_PI_2, 0.0)).unwrap();
        assert_relative_eq!(
            Rotation::identity().geodesic_distance(&r),
            FRAC_PI_2,
            epsilon = 1e-12
        );
        assert_eq!(r.geodesic_distance(&r), 0.0);
    }

    #[test]
    fn swing_twist_parallel_and_perpendicular() {
        let f = Vector3::new(1.0, 0.0, 0.0);
        let (twist, swing) = AxisAngle::new(2.0, 0.0, 0.0).swing_twist_split(&f).unwrap();
        assert_eq!(twist.vector(), Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(swing.vector(), Vector3::zeros());

        let (twist, swing) = AxisAngle::new(0.0, 0.7, -0.2)
            .swing_twist_split(&f)
            .unwrap();
        assert_eq!(twist.vector(), Vector3::zeros());
        assert_eq!(swing.vector(), Vector3::new(0.0, 0.7, -0.2));
    }

    #[test]
    fn swing_twist_mixed_case() {
        let f = Vector3::new(1.0, 0.0, 0.0);
        let (twist, swing) = AxisAngle::new(1.0, 1.0, 0.0).swing_twist_split(&f).unwrap();
        assert_eq!(twist.vector(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(swing.vector(), Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn swing_twist_rejects_non_unit_axis() {
        let f = Vector3::new(2.0, 0.0, 0.0);
        assert!(AxisAngle::new(1.0, 0.0, 0.0).swing_twist_split(&f).is_err());
    }

    #[test]
    fn mirror_involution_and_identity() {
        assert_eq!(
            Rotation::identity().mirror_conjugate().matrix(),
            &Matrix3::identity()
        );
        for a in sample_axis_angles(100, 0x5eed_0003) {
            let r = Rotation::from_axis_angle(&a).unwrap();
            assert_eq!(r.mirror_conjugate().mirror_conjugate().matrix(), r.matrix());
        }
    }

    #[test]
    fn mirror_matches_explicit_matrix_product() {
        let m = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        for a in sample_axis_angles(200, 0x5eed_0004) {
            let r = Rotation::from_axis_angle(&a).unwrap();
            let explicit = m * r.matrix() * m.transpose();
            assert_relative_eq!(*r.mirror_conjugate().matrix(), explicit, epsilon = 0.0);
        }
        // rot(theta about y) -> rot(-theta about y)
        let r = Rotation::from_axis_angle(&AxisAngle::new(0.0, 0.8, 0.0)).unwrap();
        let expected = Rotation::from_axis_angle(&AxisAngle::new(0.0, -0.8, 0.0)).unwrap();
        assert!(r.mirror_conjugate().geodesic_distance(&expected) < 1e-12);
    }

    #[test]
    fn mirror_vector_rule_matches_conjugation() {
        for a in sample_axis_angles(200, 0x5eed_0005) {
            let via_matrix = Rotation::from_axis_angle(&a).unwrap().mirror_conjugate();
            let via_vector = Rotation::from_axis_angle(&a.mirror_yz()).unwrap();
            assert!(via_matrix.geodesic_distance(&via_vector) < 1e-12);
        }
    }

    #[test]
    fn canonicalize_wraps_large_angles() {
        let a = AxisAngle::new(0.0, 0.0, 1.5 * PI).canonicalized();
        assert_relative_eq!(
            a.vector(),
            Vector3::new(0.0, 0.0, -0.5 * PI),
            epsilon = 1e-12
        );
        assert!(a.angle() <= PI);
        let small = AxisAngle::new(0.1, 0.2, 0.3);
        assert_eq!(small.canonicalized().vector(), small.vector());
    }

    #[test]
    fn right_jacobian_matches_finite_difference() {
        let h = 1e-6;
        for a in sample_axis_angles(50, 0x5eed_0006) {
            let jr = right_jacobian(&a);
            let base = Rotation::from_axis_angle(&a).unwrap();
            for k in 0..3 {
                let mut d = Vector3::zeros();
                d[k] = h;
                let moved =
                    Rotation::from_axis_angle(&AxisAngle::from_vector(a.vector() + d)).unwrap();
                // exp(a + h e_k) ~ exp(a) * exp(h * Jr e_k)
                let predicted = base.compose(
                    &Rotation::from_axis_angle(&AxisAngle::from_vector(jr.column(k) * h)).unwrap(),
                );
                assert!(moved.geodesic_distance(&predicted) < 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_round_trip(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0) {
            let a = AxisAngle::new(x, y, z).canonicalized();
            prop_assume!(a.angle() < PI - 1e-6);
            let r = Rotation::from_axis_angle(&a).unwrap();
            let back = Rotation::from_axis_angle(&r.to_axis_angle()).unwrap();
            prop_assert!(r.geodesic_distance(&back) < 1e-10);
        }

        #[test]
        fn prop_compose_associative(
            a in -1.5f64..1.5, b in -1.5f64..1.5, c in -1.5f64..1.5,
            d in -1.5f64..1.5, e in -1.5f64..1.5, f in -1.5f64..1.5,
        ) {
            let r1 = Rotation::from_axis_angle(&AxisAngle::new(a, b, c)).unwrap();
            let r2 = Rotation::from_axis_angle(&AxisAngle::new(d, e, f)).unwrap();
            let r3 = Rotation::from_axis_angle(&AxisAngle::new(b, f, a)).unwrap();
            let lhs = r1.compose(&r2).compose(&r3);
            let rhs = r1.compose(&r2.compose(&r3));
            prop_assert!((lhs.matrix() - rhs.matrix()).norm() < 1e-12);
        }

        #[test]
        fn prop_geodesic_symmetric(
            a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
            d in -2.0f64..2.0, e in -2.0f64..2.0, f in -2.0f64..2.0,
        ) {
            let r1 = Rotation::from_axis_angle(&AxisAngle::new(a, b, c)).unwrap();
            let r2 = Rotation::from_axis_angle(&AxisAngle::new(d, e, f)).unwrap();
            let fwd = r1.geodesic_distance(&r2);
            let rev = r2.geodesic_distance(&r1);
            prop_assert!((fwd - rev).abs() < 1e-10);
        }

        #[test]
        fn prop_swing_twist_decomposition(
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
        ) {
            let axis = Vector3::new(ax, ay, az);
            prop_assume!(axis.norm() > 1e-3);
            let axis = axis.normalize();
            let a = AxisAngle::new(x, y, z);
            let (twist, swing) = a.swing_twist_split(&axis).unwrap();
            // exact by definition: swing is literally a - twist
            prop_assert_eq!(swing.vector(), a.vector() - twist.vector());
            // re-adding the parts can round by one ulp per component
            let recomposed = (twist + swing).vector();
            for k in 0..3 {
                let tol = f64::EPSILON * a.vector()[k].abs().max(twist.vector()[k].abs());
                prop_assert!((recomposed[k] - a.vector()[k]).abs() <= tol);
            }
            prop_assert!(twist.vector().cross(&axis).norm() < 1e-12 * (1.0 + a.angle()));
            prop_assert!(swing.vector().dot(&axis).abs() < 1e-12 * (1.0 + a.angle()));
        }
    }
}

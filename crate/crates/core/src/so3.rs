//! SO(3) utilities: the hat map, projection onto the rotation group, and the
//! geodesic rotation distance.

use nalgebra::{Matrix3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on orthogonality (`|R'R - I|_F`) and on `det(R) - 1` for a
/// matrix to count as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Relative singular-value threshold below which a matrix is treated as
/// singular when projecting onto SO(3).
pub const PROJECTION_SINGULAR_TOL: f64 = 1e-12;

/// Skew-symmetric matrix of `v`, satisfying `hat(v) * w == v.cross(&w)`.
#[rustfmt::skip]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(
        0.0,  -v.z,   v.y,
        v.z,   0.0,  -v.x,
       -v.y,   v.x,   0.0,
    )
}

/// A 3x3 matrix validated to lie on SO(3).
///
/// Construction goes through [`Rotation::try_from_matrix`] or
/// [`project_so3`], so a held value always satisfies the orthogonality and
/// determinant invariants to [`ROTATION_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix after checking the SO(3) invariants.
    pub fn try_from_matrix(m: Mat3) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteMatrix);
        }
        let ortho = (m.transpose() * m - Mat3::identity()).norm();
        if ortho > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!(
                "matrix is not orthogonal (|R'R - I| = {ortho:.3e})"
            )));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidRotation(format!(
                "matrix has determinant {det}, expected +1"
            )));
        }
        Ok(Rotation(m))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let r = nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Rotation(r.into_inner())
    }

    /// Haar-uniform random rotation, from a normalized 4-component Gaussian
    /// quaternion.
    pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let q = nalgebra::Quaternion::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let u = nalgebra::UnitQuaternion::from_quaternion(q);
        Rotation(u.to_rotation_matrix().into_inner())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation angle away from the identity, in [0, pi].
    pub fn angle(&self) -> f64 {
        geodesic_distance(&Rotation::identity(), self)
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Singular value decomposition of a 3x3 matrix with the singular values
/// sorted in decreasing order: returns `(U, s, V)` with `m = U * diag(s) * V'`.
pub(crate) fn sorted_svd3(m: &Mat3) -> Result<(Mat3, Vec3, Mat3)> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let svd = (*m).svd(true, true);
    let u0 = svd.u.expect("SVD with compute_u");
    let v0 = svd.v_t.expect("SVD with compute_v").transpose();
    let sv = svd.singular_values;

    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite singular values"));
    let s = Vec3::new(sv[idx[0]], sv[idx[1]], sv[idx[2]]);
    let u = Mat3::from_columns(&[
        u0.column(idx[0]).into_owned(),
        u0.column(idx[1]).into_owned(),
        u0.column(idx[2]).into_owned(),
    ]);
    let v = Mat3::from_columns(&[
        v0.column(idx[0]).into_owned(),
        v0.column(idx[1]).into_owned(),
        v0.column(idx[2]).into_owned(),
    ]);
    Ok((u, s, v))
}

/// Special-orthogonal factor `U * diag(1, 1, det(UV')) * V'`, the rotation
/// closest in Frobenius norm to the matrix the SVD came from. The sign
/// correction lands on the last (smallest) singular direction.
pub(crate) fn orientation_from_svd(u: &Mat3, v: &Mat3) -> Mat3 {
    let sign = (u * v.transpose()).determinant().signum();
    let mut uc = *u;
    uc.column_mut(2).scale_mut(sign);
    uc * v.transpose()
}

/// Orthogonal projection of `m` onto SO(3): the rotation maximizing
/// `trace(R' m)`, equivalently the nearest rotation in Frobenius norm.
pub fn project_so3(m: &Mat3) -> Result<Rotation> {
    let (u, s, v) = sorted_svd3(m)?;
    if s[0] <= 0.0 || s[2] < PROJECTION_SINGULAR_TOL * s[0] {
        return Err(Error::SingularInput(if s[0] <= 0.0 { 0.0 } else { s[2] / s[0] }));
    }
    Ok(Rotation(orientation_from_svd(&u, &v)))
}

/// Geodesic distance on SO(3): the angle of the relative rotation, in [0, pi].
///
/// The arccos argument is clamped to [-1, 1] to guard against roundoff.
pub fn geodesic_distance(a: &Rotation, b: &Rotation) -> f64 {
    let c = ((a.0.transpose() * b.0).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}

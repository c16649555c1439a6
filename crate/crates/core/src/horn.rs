//! Closed-form weighted rigid alignment via SVD, used as the oracle and
//! baseline for the dynamical solver.

use crate::error::{Error, Result};
use crate::model::{weighted_centroid, Pose, ProblemInstance};
use crate::so3::{orientation_from_svd, sorted_svd3, Mat3, Rotation};

/// Global minimizer of `sum_i (1/sigma_i^2) |y_i - R x_i - t|^2`.
///
/// The rotation comes from the SVD of the weighted cross-covariance with the
/// determinant sign correction on the smallest singular direction, and the
/// translation follows from the weighted centroids.
pub fn horn_solve(instance: &ProblemInstance) -> Result<Pose> {
    let weights = instance.weights();
    let model_centroid = weighted_centroid(instance.model_points(), &weights);
    let scene_centroid = weighted_centroid(instance.scene_points(), &weights);

    let mut cross = Mat3::zeros();
    for ((xp, yp), &w) in instance
        .model_points()
        .iter()
        .zip(instance.scene_points())
        .zip(&weights)
    {
        let x = xp - model_centroid;
        let y = yp - scene_centroid;
        cross += w * y * x.transpose();
    }

    let (u, s, v) = sorted_svd3(&cross)?;
    // Orientation needs two well-defined singular directions; rank <= 1 means
    // the model is degenerate (already rejected by instance validation).
    if s[0] <= 0.0 || s[1] <= 1e-12 * s[0] {
        return Err(Error::DegenerateCloud);
    }
    let rotation = Rotation::try_from_matrix(orientation_from_svd(&u, &v))?;
    let translation = scene_centroid - rotation.matrix() * model_centroid;
    Ok(Pose {
        rotation,
        translation,
    })
}

/// The weighted least-squares objective at a pose.
pub fn objective_value(instance: &ProblemInstance, pose: &Pose) -> f64 {
    let r = pose.rotation.matrix();
    let mut total = 0.0;
    for i in 0..instance.len() {
        let s = instance.sigmas()[i];
        let residual = instance.scene_points()[i] - r * instance.model_points()[i] - pose.translation;
        total += residual.norm_squared() / (s * s);
    }
    total
}

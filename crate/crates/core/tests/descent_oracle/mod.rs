//! Independent root finder for the torque-balance equation, used as an
//! oracle against the SVD enumeration. Levenberg-Marquardt on the residual
//! `tau(R) = sum_i k_i x_i cross (R' y_i)` over the rotation's tangent
//! space, with finite-difference Jacobians; it shares nothing with the
//! enumeration route it checks.

use springreg::{BodyModel, Mat3, Rotation, Vec3};

fn torque(model: &BodyModel, r: &Mat3) -> Vec3 {
    let rt = r.transpose();
    let mut tau = Vec3::zeros();
    for i in 0..model.n {
        tau += model.spring_constants[i]
            * model.model_offsets[i].cross(&(rt * model.scene_centered[i]));
    }
    tau
}

fn retract(r: &Mat3, delta: &Vec3) -> Mat3 {
    r * nalgebra::Rotation3::new(*delta).into_inner()
}

/// Descends `|tau(R)|` from `start`; returns the final rotation and its
/// residual norm. Stops on convergence, step stagnation, or the iteration
/// cap; callers decide whether the endpoint counts as a root.
pub fn descend_torque_residual(model: &BodyModel, start: Rotation) -> (Rotation, f64) {
    let mut r = *start.matrix();
    let mut tau = torque(model, &r);
    let mut lambda = 1e-3;
    let fd_step = 1e-6;

    for _ in 0..150 {
        if tau.norm() == 0.0 {
            break;
        }
        let mut jac = Mat3::zeros();
        for axis in 0..3 {
            let mut d = Vec3::zeros();
            d[axis] = fd_step;
            let plus = torque(model, &retract(&r, &d));
            let minus = torque(model, &retract(&r, &(-d)));
            jac.set_column(axis, &((plus - minus) / (2.0 * fd_step)));
        }
        let jtj = jac.transpose() * jac;
        let jt_tau = jac.transpose() * tau;

        let mut accepted = false;
        for _ in 0..40 {
            let damped = jtj + lambda * Mat3::identity() * jtj.trace().max(1e-300) / 3.0;
            let Some(step) = damped.try_inverse().map(|inv| -(inv * jt_tau)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = retract(&r, &step);
            let candidate_tau = torque(model, &candidate);
            if candidate_tau.norm() < tau.norm() {
                r = candidate;
                tau = candidate_tau;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }

    let rotation = springreg::project_so3(&r).expect("descent stayed on SO(3)");
    (rotation, torque(model, rotation.matrix()).norm())
}

//! Equilibrium enumeration and local-stability certification.
//!
//! At any equilibrium the center of mass sits on the scene centroid, both
//! velocities vanish, and the attitude makes the spring torques balance.
//! The balancing rotations are the critical points of the weighted
//! orthogonal Procrustes objective: with `H = sum_i k_i y_i x_i'` and SVD
//! `H = U S V'`, they are `U D V'` over the four diagonal sign matrices `D`
//! whose determinant matches `det(U) det(V)`. Each candidate is certified by
//! its torque residual and classified by the eigenvalues of the
//! finite-difference Jacobian of the dynamics on the 18-dimensional
//! embedding: any eigenvalue with positive real part certifies local
//! instability. A count of zero is reported as "no instability certificate",
//! not as a proof of stability.
//!
//! Clouds with symmetry make the singular values of `H` collide and the
//! equilibria form continua; those configurations are rejected by the
//! enumerator and handled by the explicit triangle/square constructors.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{simulate, state_derivative_flat, total_torque, SimConfig, Trajectory};
use crate::error::{Error, Result};
use crate::model::{BodyModel, ProblemInstance, State};
use crate::so3::{geodesic_distance, sorted_svd3, Mat3, Rotation, Vec3};

/// Relative torque-residual tolerance for certifying a candidate rotation as
/// an equilibrium.
pub const CERTIFICATION_TOL: f64 = 1e-6;

/// Eigenvalue real parts above this fraction of the spectral radius count as
/// instability certificates; keeps the near-zero embedding-constraint
/// eigenvalues out of the count.
pub const INSTABILITY_THRESHOLD_REL: f64 = 1e-6;

/// Relative singular-value separation below which the correspondence matrix
/// counts as degenerate (symmetric cloud).
pub const SPECTRUM_GAP_TOL: f64 = 1e-9;

/// An equilibrium attitude with its instability evidence. The implied state
/// has the center of mass on the scene centroid and zero velocities.
#[derive(Debug, Clone)]
pub struct EquilibriumCertificate {
    pub rotation: Rotation,
    /// `|sum_i k_i x_i cross (R' y_i)|` at the equilibrium state.
    pub torque_residual: f64,
    /// Finite-difference Jacobian of the dynamics at the equilibrium.
    pub jacobian: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Number of eigenvalues strictly in the right half plane.
    pub unstable_count: usize,
    /// Geodesic distance to the closed-form optimal rotation.
    pub rotation_error_vs_horn: f64,
}

impl EquilibriumCertificate {
    /// The full 18-dimensional equilibrium state.
    pub fn state(&self) -> State {
        State::at_rest(Vec3::zeros(), self.rotation)
    }
}

/// Spring-weighted correspondence matrix `sum_i k_i y_i x_i'` of the
/// centered clouds; its SVD generates the equilibrium rotations.
pub fn correspondence_matrix(model: &BodyModel) -> Mat3 {
    let mut h = Mat3::zeros();
    for i in 0..model.n {
        h += model.spring_constants[i] * model.scene_centered[i] * model.model_offsets[i].transpose();
    }
    h
}

/// Natural torque magnitude `sum_i k_i |x_i| |y_i|`, the scale residuals are
/// measured against.
pub fn torque_scale(model: &BodyModel) -> f64 {
    let mut scale = 0.0;
    for i in 0..model.n {
        scale += model.spring_constants[i]
            * model.model_offsets[i].norm()
            * model.scene_centered[i].norm();
    }
    scale
}

fn static_torque_norm(model: &BodyModel, rotation: &Rotation) -> f64 {
    total_torque(model, &State::at_rest(Vec3::zeros(), *rotation)).norm()
}

/// Enumerates the equilibrium set of a generic (non-symmetric) cloud.
///
/// Returns one certificate per retained candidate, sorted by
/// `unstable_count`. Fails with [`Error::DegenerateSpectrum`] when the
/// correspondence matrix has repeated or zero singular values; use the
/// symmetry constructors to study those configurations.
pub fn enumerate_equilibria(model: &BodyModel) -> Result<Vec<EquilibriumCertificate>> {
    let h = correspondence_matrix(model);
    let (u, s, v) = sorted_svd3(&h)?;
    let gap = [(s[0] - s[1]) / s[0], (s[1] - s[2]) / s[0], s[2] / s[0]]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if s[0] <= 0.0 || gap < SPECTRUM_GAP_TOL {
        return Err(Error::DegenerateSpectrum {
            gap: if s[0] > 0.0 { gap } else { 0.0 },
        });
    }

    let det_positive = (u * v.transpose()).determinant() > 0.0;
    // Sign triples with the product fixed by det(UV'); the one keeping the
    // largest singular values positive is the Procrustes optimum.
    let sign_sets: [[f64; 3]; 4] = if det_positive {
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    } else {
        [
            [1.0, 1.0, -1.0],
            [1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0],
            [-1.0, -1.0, -1.0],
        ]
    };
    let optimal = Rotation::try_from_matrix(
        u * Mat3::from_diagonal(&Vec3::from_column_slice(&sign_sets[0])) * v.transpose(),
    )?;

    let scale = torque_scale(model);
    let mut certificates = Vec::with_capacity(4);
    for signs in sign_sets {
        let candidate = Rotation::try_from_matrix(
            u * Mat3::from_diagonal(&Vec3::from_column_slice(&signs)) * v.transpose(),
        )?;
        let torque_residual = static_torque_norm(model, &candidate);
        if torque_residual > CERTIFICATION_TOL * scale {
            continue;
        }
        let state = State::at_rest(Vec3::zeros(), candidate);
        let jac = jacobian(model, &state, default_jacobian_epsilon(&state));
        let eigenvalues: Vec<Complex<f64>> = jac.complex_eigenvalues().iter().copied().collect();
        let unstable_count = count_unstable(&eigenvalues);
        certificates.push(EquilibriumCertificate {
            rotation: candidate,
            torque_residual,
            jacobian: jac,
            eigenvalues,
            unstable_count,
            rotation_error_vs_horn: geodesic_distance(&candidate, &optimal),
        });
    }
    certificates.sort_by_key(|c| c.unstable_count);
    Ok(certificates)
}

/// Step size for the finite-difference Jacobian at a state.
pub fn default_jacobian_epsilon(state: &State) -> f64 {
    1e-6 * (1.0 + state.flatten().amax())
}

/// Central finite-difference Jacobian of the dynamics on the flattened
/// embedding. Rotation entries are perturbed raw, with no re-projection; the
/// derivative formula is smooth there.
pub fn jacobian(model: &BodyModel, state: &State, epsilon: f64) -> DMatrix<f64> {
    let s0 = state.flatten();
    let mut a = DMatrix::zeros(18, 18);
    for j in 0..18 {
        let mut plus = s0;
        plus[j] += epsilon;
        let mut minus = s0;
        minus[j] -= epsilon;
        let column =
            (state_derivative_flat(model, &plus) - state_derivative_flat(model, &minus))
                / (2.0 * epsilon);
        for i in 0..18 {
            a[(i, j)] = column[i];
        }
    }
    a
}

/// Counts eigenvalues strictly in the right half plane, with the threshold
/// taken relative to the spectral radius.
pub fn count_unstable(eigenvalues: &[Complex<f64>]) -> usize {
    let radius = eigenvalues.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let threshold = INSTABILITY_THRESHOLD_REL * radius;
    eigenvalues.iter().filter(|e| e.re > threshold).count()
}

fn rot_z(theta: f64) -> Mat3 {
    *Rotation::from_axis_angle(&Vec3::z(), theta).matrix()
}

/// Regular n-gon pair in the z = 0 plane: the scene has circumradius `l` and
/// first vertex at angle `phase`; the model is the scene rotated in-plane by
/// `theta` and then mirrored about the y axis. Equal sigmas of 1.
fn regular_polygon_pair(n: usize, l: f64, theta: f64, phase: f64) -> ProblemInstance {
    assert!(l > 0.0, "circumradius must be positive");
    let rot = rot_z(theta);
    let mut scene = Vec::with_capacity(n);
    let mut model = Vec::with_capacity(n);
    for j in 0..n {
        let angle = phase + std::f64::consts::TAU * j as f64 / n as f64;
        let y = l * Vec3::new(angle.cos(), angle.sin(), 0.0);
        let x = rot * y;
        scene.push(y);
        model.push(Vec3::new(-x.x, x.y, x.z));
    }
    ProblemInstance::with_uniform_sigma(model, scene, 1.0)
        .expect("regular polygon is a valid instance")
}

/// Equilateral triangle pair realizing a torque-balanced configuration for
/// every `theta`: the scene triangle has its first vertex on the +y axis and
/// the model is the rotated copy mirrored about the axis through that vertex.
/// `l` is the vertex-to-center distance.
pub fn make_equilateral_triangle(l: f64, theta: f64) -> ProblemInstance {
    regular_polygon_pair(3, l, theta, std::f64::consts::FRAC_PI_2)
}

/// Square analogue of [`make_equilateral_triangle`]; the mirror axis bisects
/// the edge between the first two vertices.
pub fn make_square(l: f64, theta: f64) -> ProblemInstance {
    regular_polygon_pair(4, l, theta, std::f64::consts::FRAC_PI_4)
}

/// Torque norm at the static configuration: centroids coincident, identity
/// attitude, zero velocities.
pub fn symmetry_torque_residual(instance: &ProblemInstance) -> Result<f64> {
    let model = BodyModel::build(instance, 1.0)?;
    Ok(static_torque_norm(&model, &Rotation::identity()))
}

/// Restarts the simulation from an equilibrium after kicking the six
/// velocity coordinates with a random vector of norm
/// `config.perturbation_scale`; a zero scale leaves the state untouched.
pub fn escape_and_resimulate<R: Rng + ?Sized>(
    model: &BodyModel,
    cert: &EquilibriumCertificate,
    config: &SimConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut state = cert.state();
    if config.perturbation_scale > 0.0 {
        let mut kick = [0.0f64; 6];
        loop {
            for k in &mut kick {
                *k = rng.sample(StandardNormal);
            }
            let norm = kick.iter().map(|k| k * k).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for k in &mut kick {
                    *k *= config.perturbation_scale / norm;
                }
                break;
            }
        }
        state.com_velocity += Vec3::new(kick[0], kick[1], kick[2]);
        state.angular_velocity += Vec3::new(kick[3], kick[4], kick[5]);
    }
    simulate(model, &state, config)
}

/// Kick size used by the studies: 1e-3 of the cloud scale.
pub fn default_perturbation_scale(model: &BodyModel) -> f64 {
    1e-3 * model.cloud_scale()
}

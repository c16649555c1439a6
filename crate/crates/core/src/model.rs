//! Problem data, the physical body model derived from it, and the dynamical
//! state.
//!
//! A [`ProblemInstance`] is the raw registration input: two corresponding
//! clouds and per-correspondence noise levels. [`BodyModel::build`] turns it
//! into the simulated system: particles of mass `1/sigma_i^2` joined to the
//! scene by springs of stiffness `2/sigma_i^2`, both clouds re-expressed
//! around the mass-weighted scene centroid, and the rigid-body inertia about
//! the model's own centroid.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::so3::{hat, Mat3, Rotation, Vec3};

/// Relative singular-value threshold for the rank-2 check on the centered
/// model cloud.
pub const RANK_TOL: f64 = 1e-9;

/// Flattened dynamical state: `[com; vec(R) column-major; v; omega]`.
pub type StateVector = SVector<f64, 18>;

/// A registration problem: corresponding model/scene points plus the noise
/// standard deviation of each correspondence.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    model_points: Vec<Vec3>,
    scene_points: Vec<Vec3>,
    sigmas: Vec<f64>,
}

impl ProblemInstance {
    /// Validates lengths, finiteness, positive sigmas, and that the centered
    /// model spans at least a plane (three noncollinear points).
    pub fn new(model_points: Vec<Vec3>, scene_points: Vec<Vec3>, sigmas: Vec<f64>) -> Result<Self> {
        if model_points.len() != scene_points.len() {
            return Err(Error::LengthMismatch {
                model: model_points.len(),
                scene: scene_points.len(),
            });
        }
        if sigmas.len() != model_points.len() {
            return Err(Error::SigmaLengthMismatch {
                got: sigmas.len(),
                expected: model_points.len(),
            });
        }
        if model_points.len() < 3 {
            return Err(Error::TooFewPoints(model_points.len()));
        }
        for (cloud, points) in [("model", &model_points), ("scene", &scene_points)] {
            if let Some(index) = points.iter().position(|p| !p.iter().all(|x| x.is_finite())) {
                return Err(Error::NonFinitePoint { cloud, index });
            }
        }
        if let Some(index) = sigmas.iter().position(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::NonPositiveSigma {
                index,
                value: sigmas[index],
            });
        }

        let instance = ProblemInstance {
            model_points,
            scene_points,
            sigmas,
        };
        if instance.centered_model_rank() < 2 {
            return Err(Error::DegenerateCloud);
        }
        Ok(instance)
    }

    pub fn with_uniform_sigma(model: Vec<Vec3>, scene: Vec<Vec3>, sigma: f64) -> Result<Self> {
        let n = model.len();
        Self::new(model, scene, vec![sigma; n])
    }

    pub fn len(&self) -> usize {
        self.model_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_points.is_empty()
    }

    pub fn model_points(&self) -> &[Vec3] {
        &self.model_points
    }

    pub fn scene_points(&self) -> &[Vec3] {
        &self.scene_points
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Mass weights `1/sigma_i^2`.
    pub fn weights(&self) -> Vec<f64> {
        self.sigmas.iter().map(|s| 1.0 / (s * s)).collect()
    }

    fn centered_model_rank(&self) -> usize {
        let weights = self.weights();
        let centroid = weighted_centroid(&self.model_points, &weights);
        let mut data = nalgebra::DMatrix::zeros(3, self.model_points.len());
        for (j, p) in self.model_points.iter().enumerate() {
            data.set_column(j, &(p - centroid));
        }
        let sv = data.singular_values();
        let smax = sv.max();
        if smax <= 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
    }
}

pub(crate) fn weighted_centroid(points: &[Vec3], weights: &[f64]) -> Vec3 {
    let total: f64 = weights.iter().sum();
    let mut c = Vec3::zeros();
    for (p, &w) in points.iter().zip(weights) {
        c += w * p;
    }
    c / total
}

/// A rigid transform answer, expressed in the frame the problem was given in.
#[derive(Debug, Clone, Copy)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.matrix() * p + self.translation
    }
}

/// The immutable physical system built from a [`ProblemInstance`].
///
/// All coordinates are re-expressed after shifting both clouds by the
/// mass-weighted scene centroid (recorded in `scene_shift`), so the scene
/// centroid sits at the origin. Invariants: the mass-weighted sums of
/// `model_offsets` and `scene_centered` vanish, and `inertia` is the
/// symmetric positive definite matrix `-sum_i m_i hat(x_i)^2` of the offsets.
#[derive(Debug, Clone)]
pub struct BodyModel {
    /// Number of correspondences.
    pub n: usize,
    /// Particle masses, `1/sigma_i^2`.
    pub masses: Vec<f64>,
    /// Spring coefficients, `2/sigma_i^2`.
    pub spring_constants: Vec<f64>,
    /// Total mass of the moving cloud.
    pub total_mass: f64,
    /// Scene points relative to the mass-weighted scene centroid.
    pub scene_centered: Vec<Vec3>,
    /// Model points relative to their own mass-weighted centroid; constant
    /// body-frame offsets.
    pub model_offsets: Vec<Vec3>,
    /// Model centroid at t = 0, in the centered scene frame.
    pub model_centroid_initial: Vec3,
    /// Inertia matrix of the moving cloud about its centroid.
    pub inertia: Mat3,
    /// Viscous damping coefficient.
    pub damping: f64,
    /// The shift applied to both clouds (the original mass-weighted scene
    /// centroid); lets answers be mapped back to the caller's frame.
    pub scene_shift: Vec3,
    inertia_inv: Mat3,
}

impl BodyModel {
    /// Builds the spring-mass system for `instance` with damping `mu`.
    pub fn build(instance: &ProblemInstance, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "damping must be positive and finite, got {mu}"
            )));
        }
        let n = instance.len();
        let masses = instance.weights();
        let spring_constants: Vec<f64> = masses.iter().map(|m| 2.0 * m).collect();
        let total_mass: f64 = masses.iter().sum();

        let scene_shift = weighted_centroid(instance.scene_points(), &masses);
        let scene_centered: Vec<Vec3> = instance
            .scene_points()
            .iter()
            .map(|y| y - scene_shift)
            .collect();
        let model_shifted: Vec<Vec3> = instance
            .model_points()
            .iter()
            .map(|x| x - scene_shift)
            .collect();
        let model_centroid_initial = weighted_centroid(&model_shifted, &masses);
        let model_offsets: Vec<Vec3> = model_shifted
            .iter()
            .map(|x| x - model_centroid_initial)
            .collect();

        let mut inertia = Mat3::zeros();
        for (x, &m) in model_offsets.iter().zip(&masses) {
            let h = hat(x);
            inertia -= m * h * h;
        }
        // Positive definiteness holds whenever the instance passed the rank
        // check; Cholesky doubles as the verification.
        let chol = inertia
            .cholesky()
            .ok_or(Error::DegenerateCloud)?;
        let inertia_inv = chol.inverse();

        Ok(BodyModel {
            n,
            masses,
            spring_constants,
            total_mass,
            scene_centered,
            model_offsets,
            model_centroid_initial,
            inertia,
            damping: mu,
            scene_shift,
            inertia_inv,
        })
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    /// Mass-weighted RMS radius of the centered scene; the natural length
    /// scale of the problem.
    pub fn cloud_scale(&self) -> f64 {
        let mut sq = 0.0;
        for (y, &m) in self.scene_centered.iter().zip(&self.masses) {
            sq += m * y.norm_squared();
        }
        (sq / self.total_mass).sqrt()
    }
}

/// Instantaneous dynamical state of the moving cloud.
#[derive(Debug, Clone, Copy)]
pub struct State {
    /// Center-of-mass position, scene frame.
    pub com_position: Vec3,
    /// Body-to-scene attitude.
    pub rotation: Rotation,
    /// Center-of-mass velocity, scene frame.
    pub com_velocity: Vec3,
    /// Angular velocity, body frame.
    pub angular_velocity: Vec3,
}

impl State {
    /// State at rest with the given placement.
    pub fn at_rest(com_position: Vec3, rotation: Rotation) -> Self {
        State {
            com_position,
            rotation,
            com_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }

    /// Flattens to `[com; vec(R) column-major; v; omega]`.
    pub fn flatten(&self) -> StateVector {
        let mut s = StateVector::zeros();
        s.fixed_rows_mut::<3>(0).copy_from(&self.com_position);
        let r = self.rotation.matrix();
        for (k, x) in r.iter().enumerate() {
            s[3 + k] = *x; // nalgebra stores column-major
        }
        s.fixed_rows_mut::<3>(12).copy_from(&self.com_velocity);
        s.fixed_rows_mut::<3>(15).copy_from(&self.angular_velocity);
        s
    }

    /// Inverse of [`State::flatten`]; fails if the rotation block is not a
    /// valid rotation.
    pub fn unflatten(s: &StateVector) -> Result<Self> {
        let rotation = Rotation::try_from_matrix(rotation_block(s))?;
        Ok(State {
            com_position: s.fixed_rows::<3>(0).into_owned(),
            rotation,
            com_velocity: s.fixed_rows::<3>(12).into_owned(),
            angular_velocity: s.fixed_rows::<3>(15).into_owned(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }
}

/// Raw (unvalidated) rotation block of a flattened state.
pub(crate) fn rotation_block(s: &StateVector) -> Mat3 {
    Mat3::from_column_slice(&s.as_slice()[3..12])
}

/// Reads the rigid-transform answer out of a state, mapped back to the frame
/// of the original (unshifted) problem.
pub fn pose_from_state(state: &State, model: &BodyModel) -> Pose {
    let r = state.rotation.matrix();
    let centered = state.com_position - r * model.model_centroid_initial;
    let translation = centered + model.scene_shift - r * model.scene_shift;
    Pose {
        rotation: state.rotation,
        translation,
    }
}

/// At-rest state whose pose in the original frame equals `pose`; inverse of
/// [`pose_from_state`] up to the zeroed velocities.
pub fn state_from_pose(pose: &Pose, model: &BodyModel) -> State {
    let r = pose.rotation.matrix();
    let centered = pose.translation - model.scene_shift + r * model.scene_shift;
    State::at_rest(r * model.model_centroid_initial + centered, pose.rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect()
    }

    fn random_instance(seed: u64, n: usize, sigma: f64) -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_points(&mut rng, n);
        let scene = random_points(&mut rng, n);
        ProblemInstance::with_uniform_sigma(model, scene, sigma).unwrap()
    }

    #[test]
    fn octahedron_inertia_is_four_identity() {
        let model = vec![
            Vec3::x(),
            -Vec3::x(),
            Vec3::y(),
            -Vec3::y(),
            Vec3::z(),
            -Vec3::z(),
        ];
        let scene = model.clone();
        let instance = ProblemInstance::with_uniform_sigma(model, scene, 1.0).unwrap();
        let body = BodyModel::build(&instance, 1.0).unwrap();
        assert_relative_eq!(body.inertia, 4.0 * Mat3::identity(), epsilon = 1e-12);
        assert_relative_eq!(body.total_mass, 6.0);
    }

    #[test]
    fn centered_sums_vanish() {
        let instance = random_instance(1, 10, 0.01);
        let body = BodyModel::build(&instance, 1.0).unwrap();
        let mut mx = Vec3::zeros();
        let mut my = Vec3::zeros();
        for i in 0..body.n {
            mx += body.masses[i] * body.model_offsets[i];
            my += body.masses[i] * body.scene_centered[i];
        }
        let tol = 1e-12 * body.total_mass * body.cloud_scale().max(1.0);
        assert!(mx.norm() <= tol, "model offsets not centered: {}", mx.norm());
        assert!(my.norm() <= tol, "scene not centered: {}", my.norm());
    }

    /// Independent elementwise inertia assembly from hat(x)^2 = xx' - |x|^2 I.
    #[test]
    fn inertia_matches_bruteforce_expansion() {
        let instance = random_instance(2, 10, 0.01);
        let body = BodyModel::build(&instance, 1.0).unwrap();
        let mut oracle = Mat3::zeros();
        for (x, &m) in body.model_offsets.iter().zip(&body.masses) {
            oracle += m * (x.norm_squared() * Mat3::identity() - x * x.transpose());
        }
        assert_relative_eq!(body.inertia, oracle, epsilon = 1e-12 * oracle.norm());
        assert_relative_eq!(
            body.inertia_inv() * body.inertia,
            Mat3::identity(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn build_invariant_under_pretranslation() {
        let instance = random_instance(3, 8, 0.05);
        let d = Vec3::new(10.0, -4.0, 2.5);
        let shifted = ProblemInstance::new(
            instance.model_points().iter().map(|p| p + d).collect(),
            instance.scene_points().iter().map(|p| p + d).collect(),
            instance.sigmas().to_vec(),
        )
        .unwrap();
        let a = BodyModel::build(&instance, 1.0).unwrap();
        let b = BodyModel::build(&shifted, 1.0).unwrap();
        for i in 0..a.n {
            assert!((a.model_offsets[i] - b.model_offsets[i]).norm() <= 1e-12);
            assert!((a.scene_centered[i] - b.scene_centered[i]).norm() <= 1e-12);
        }
        assert!((a.inertia - b.inertia).norm() <= 1e-12 * a.inertia.norm());
        assert_relative_eq!(b.scene_shift, a.scene_shift + d, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_instances() {
        let p = vec![Vec3::x(), Vec3::y(), Vec3::z()];
        assert!(matches!(
            ProblemInstance::with_uniform_sigma(p.clone(), p[..2].to_vec(), 1.0),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            ProblemInstance::with_uniform_sigma(p[..2].to_vec(), p[..2].to_vec(), 1.0),
            Err(Error::TooFewPoints(2))
        ));
        assert!(matches!(
            ProblemInstance::with_uniform_sigma(p.clone(), p.clone(), -1.0),
            Err(Error::NonPositiveSigma { .. })
        ));
        // collinear model
        let line = vec![Vec3::zeros(), Vec3::x(), 2.0 * Vec3::x()];
        assert!(matches!(
            ProblemInstance::with_uniform_sigma(line, p, 1.0),
            Err(Error::DegenerateCloud)
        ));
    }

    #[test]
    fn pose_from_initial_state_is_identity() {
        let instance = random_instance(4, 10, 0.01);
        let body = BodyModel::build(&instance, 1.0).unwrap();
        let state = State::at_rest(body.model_centroid_initial, Rotation::identity());
        let pose = pose_from_state(&state, &body);
        assert!(pose.translation.norm() <= 1e-12);
        for x in instance.model_points() {
            assert_relative_eq!(pose.apply(x), *x, epsilon = 1e-12);
        }
    }

    #[test]
    fn pose_state_roundtrip() {
        let instance = random_instance(5, 10, 0.01);
        let body = BodyModel::build(&instance, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..20 {
            let pose = Pose {
                rotation: Rotation::sample_uniform(&mut rng),
                translation: Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
            };
            let state = state_from_pose(&pose, &body);
            let back = pose_from_state(&state, &body);
            assert!((back.translation - pose.translation).norm() <= 1e-12);
            assert_eq!(back.rotation.matrix(), pose.rotation.matrix());
        }
    }

    proptest! {
        #[test]
        fn flatten_unflatten_roundtrip(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let state = State {
                com_position: Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
                rotation: Rotation::sample_uniform(&mut rng),
                com_velocity: Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
                angular_velocity: Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)),
            };
            let back = State::unflatten(&state.flatten()).unwrap();
            prop_assert!((back.flatten() - state.flatten()).norm() == 0.0);
        }
    }
}

//! Rigid 3D point-cloud registration with known correspondences, solved by
//! simulating a damped virtual-spring system.
//!
//! The scene cloud is held fixed and the model cloud moves as a rigid body
//! of particles, pulled by one spring per correspondence and slowed by
//! viscous damping. The spring potential equals the weighted least-squares
//! registration objective, so the damped dynamics descend toward its
//! critical points and the globally optimal alignment is an equilibrium.
//!
//! Alongside the simulator ([`dynamics`]) the crate ships:
//!
//! - [`horn`]: the closed-form weighted SVD alignment, the baseline and
//!   oracle against which the dynamics are checked;
//! - [`equilibria`]: enumeration of all equilibrium attitudes of a generic
//!   instance, eigenvalue-based local-instability certificates, the
//!   symmetric configurations whose equilibria form continua, and
//!   perturbed restarts that escape unstable equilibria;
//! - [`robust`]: a saturated-spring variant implementing truncated least
//!   squares for data with outliers, including its documented stall mode;
//! - [`harness`]: seeded Monte Carlo studies with deterministic CSV output;
//! - [`io`]: the plain-text cloud file format used by the CLI.

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod harness;
pub mod horn;
pub mod io;
pub mod model;
pub mod robust;
pub mod so3;

pub use error::{Error, Result};
pub use model::{
    pose_from_state, state_from_pose, BodyModel, Pose, ProblemInstance, State, StateVector,
};
pub use so3::{geodesic_distance, hat, project_so3, Mat3, Rotation, Vec3};

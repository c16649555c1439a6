//! The spring-damper rigid-body dynamics: forces, torques, the state
//! derivative, energies, and the explicit-Euler simulation loop.
//!
//! The moving cloud is a rigid set of particles pulled toward the static
//! scene by one spring per correspondence and slowed by viscous damping.
//! Newton-Euler gives the equations of motion; the total energy decreases
//! along every trajectory at the rate `-mu (M |v|^2 + w' J w)`, so the
//! system settles into its equilibrium set. Integration follows a fixed-step
//! explicit Euler update with the rotation re-projected onto SO(3) after
//! every step, stopping once the full 18-dimensional state derivative norm
//! falls under a threshold.

use crate::error::{Error, Result};
use crate::model::{rotation_block, BodyModel, State, StateVector};
use crate::so3::{hat, project_so3, Mat3, Rotation, Vec3};

/// Integration settings.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Fixed time step, seconds.
    pub dt: f64,
    /// Stop once `|ds/dt|` (all 18 coordinates) falls below this.
    pub stop_threshold: f64,
    /// Step budget.
    pub max_steps: usize,
    /// Velocity kick magnitude used when restarting from an equilibrium;
    /// zero means no kick.
    pub perturbation_scale: f64,
    /// Trajectory sampling stride.
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            stop_threshold: 1e-4,
            max_steps: 200_000,
            perturbation_scale: 0.0,
            record_every: 10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.stop_threshold.is_finite() && self.stop_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "stop_threshold = {} must be positive",
                self.stop_threshold
            )));
        }
        if self.max_steps == 0 || self.record_every == 0 {
            return Err(Error::InvalidConfig(
                "max_steps and record_every must be at least 1".into(),
            ));
        }
        if self.dt * self.max_steps as f64 > 1e7 {
            return Err(Error::InvalidConfig(format!(
                "dt * max_steps = {:.3e} s exceeds the runaway guard of 1e7 s",
                self.dt * self.max_steps as f64
            )));
        }
        if !(self.perturbation_scale.is_finite() && self.perturbation_scale >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "perturbation_scale = {} must be nonnegative",
                self.perturbation_scale
            )));
        }
        Ok(())
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// Derivative norm fell below the stop threshold.
    Converged,
    /// Step budget exhausted.
    MaxSteps,
    /// Every spring saturated while the body was essentially at rest
    /// (saturated-spring variant only).
    Stalled,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::Converged => "converged",
            TerminationReason::MaxSteps => "max_steps",
            TerminationReason::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

/// Energy bookkeeping at one state.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// Analytic dissipation rate `-mu (M |v|^2 + w' J w)`; nonpositive.
    pub rate: f64,
}

/// One recorded trajectory point.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub step: usize,
    pub time: f64,
    pub state: State,
    pub energy: EnergyReport,
}

/// Recorded simulation output. Samples are taken every `record_every` steps
/// plus the final state; times increase strictly.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub termination: TerminationReason,
    pub steps: usize,
    pub final_state: State,
    pub final_derivative_norm: f64,
}

impl Trajectory {
    pub fn final_sample(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory records at least the final state")
    }
}

fn spring_force_sum(model: &BodyModel, r: &Mat3, com: &Vec3) -> Vec3 {
    let mut f = Vec3::zeros();
    for i in 0..model.n {
        f += model.spring_constants[i]
            * (model.scene_centered[i] - r * model.model_offsets[i] - com);
    }
    f
}

fn torque_sum(model: &BodyModel, r: &Mat3, com: &Vec3, omega: &Vec3) -> Vec3 {
    let rt = r.transpose();
    let mut tau = Vec3::zeros();
    for i in 0..model.n {
        let x = &model.model_offsets[i];
        tau += model.spring_constants[i] * x.cross(&(rt * (model.scene_centered[i] - com)));
        tau -= model.damping * model.masses[i] * x.cross(&omega.cross(x));
    }
    tau
}

/// Net force on the moving cloud, scene frame: the spring pulls minus the
/// translational damping drag. The rotational part of the damping cancels in
/// the sum because the offsets are centered.
pub fn total_force(model: &BodyModel, state: &State) -> Vec3 {
    spring_force_sum(model, state.rotation.matrix(), &state.com_position)
        - model.damping * model.total_mass * state.com_velocity
}

/// Net torque about the center of mass, body frame.
pub fn total_torque(model: &BodyModel, state: &State) -> Vec3 {
    torque_sum(
        model,
        state.rotation.matrix(),
        &state.com_position,
        &state.angular_velocity,
    )
}

fn pack_derivative(v: &Vec3, rdot: &Mat3, vdot: &Vec3, wdot: &Vec3) -> StateVector {
    let mut ds = StateVector::zeros();
    ds.fixed_rows_mut::<3>(0).copy_from(v);
    for (k, x) in rdot.iter().enumerate() {
        ds[3 + k] = *x;
    }
    ds.fixed_rows_mut::<3>(12).copy_from(vdot);
    ds.fixed_rows_mut::<3>(15).copy_from(wdot);
    ds
}

fn derivative_at(model: &BodyModel, r: &Mat3, com: &Vec3, v: &Vec3, omega: &Vec3) -> StateVector {
    let force = spring_force_sum(model, r, com) - model.damping * model.total_mass * v;
    let torque = torque_sum(model, r, com, omega);
    let rdot = r * hat(omega);
    let vdot = force / model.total_mass;
    let wdot = model.inertia_inv() * (torque - omega.cross(&(model.inertia * omega)));
    pack_derivative(v, &rdot, &vdot, &wdot)
}

/// Full state derivative `[v; vec(R hat(w)); f/M; J^-1 (tau - w x J w)]`.
pub fn state_derivative(model: &BodyModel, state: &State) -> StateVector {
    derivative_at(
        model,
        state.rotation.matrix(),
        &state.com_position,
        &state.com_velocity,
        &state.angular_velocity,
    )
}

/// State derivative evaluated on the raw 18-dimensional embedding.
///
/// The rotation block is taken as an arbitrary 3x3 matrix; the formulas are
/// polynomial in its entries, which is what finite-difference Jacobians need.
pub fn state_derivative_flat(model: &BodyModel, s: &StateVector) -> StateVector {
    let r = rotation_block(s);
    derivative_at(
        model,
        &r,
        &s.fixed_rows::<3>(0).into_owned(),
        &s.fixed_rows::<3>(12).into_owned(),
        &s.fixed_rows::<3>(15).into_owned(),
    )
}

/// Kinetic and potential energy plus the analytic dissipation rate.
pub fn energies(model: &BodyModel, state: &State) -> EnergyReport {
    let v2 = state.com_velocity.norm_squared();
    let w = &state.angular_velocity;
    let wjw = w.dot(&(model.inertia * w));
    let kinetic = 0.5 * model.total_mass * v2 + 0.5 * wjw;

    let r = state.rotation.matrix();
    let mut potential = 0.0;
    for i in 0..model.n {
        let residual = model.scene_centered[i] - r * model.model_offsets[i] - state.com_position;
        potential += 0.5 * model.spring_constants[i] * residual.norm_squared();
    }

    EnergyReport {
        kinetic,
        potential,
        total: kinetic + potential,
        rate: -model.damping * (model.total_mass * v2 + wjw),
    }
}

fn euler_update(state: &State, ds: &StateVector, dt: f64) -> Result<State> {
    let raw = state.rotation.matrix() + dt * rotation_block(ds);
    let rotation = project_so3(&raw)?;
    Ok(State {
        com_position: state.com_position + dt * ds.fixed_rows::<3>(0),
        rotation,
        com_velocity: state.com_velocity + dt * ds.fixed_rows::<3>(12),
        angular_velocity: state.angular_velocity + dt * ds.fixed_rows::<3>(15),
    })
}

/// One explicit Euler step from the pre-step derivative, with the updated
/// rotation projected back onto SO(3).
pub fn step(model: &BodyModel, state: &State, dt: f64) -> Result<State> {
    let ds = state_derivative(model, state);
    euler_update(state, &ds, dt)
}

/// Rest state: the model sits where it was given, axes aligned with the
/// scene frame.
pub fn initial_state(model: &BodyModel) -> State {
    State::at_rest(model.model_centroid_initial, Rotation::identity())
}

/// Integrates until the derivative norm drops below `config.stop_threshold`
/// or the step budget runs out.
pub fn simulate(model: &BodyModel, initial: &State, config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut state = *initial;
    let mut samples = Vec::new();
    let mut step_idx = 0usize;
    loop {
        let ds = state_derivative(model, &state);
        let dnorm = ds.norm();
        if !dnorm.is_finite() {
            return Err(Error::NonFiniteState { step: step_idx });
        }
        let time = step_idx as f64 * config.dt;
        if dnorm < config.stop_threshold {
            samples.push(TrajectorySample {
                step: step_idx,
                time,
                state,
                energy: energies(model, &state),
            });
            return Ok(Trajectory {
                samples,
                termination: TerminationReason::Converged,
                steps: step_idx,
                final_state: state,
                final_derivative_norm: dnorm,
            });
        }
        if step_idx >= config.max_steps {
            samples.push(TrajectorySample {
                step: step_idx,
                time,
                state,
                energy: energies(model, &state),
            });
            return Ok(Trajectory {
                samples,
                termination: TerminationReason::MaxSteps,
                steps: step_idx,
                final_state: state,
                final_derivative_norm: dnorm,
            });
        }
        if step_idx.is_multiple_of(config.record_every) {
            samples.push(TrajectorySample {
                step: step_idx,
                time,
                state,
                energy: energies(model, &state),
            });
        }
        state = euler_update(&state, &ds, config.dt)?;
        if !state.is_finite() {
            return Err(Error::NonFiniteState { step: step_idx + 1 });
        }
        step_idx += 1;
    }
}

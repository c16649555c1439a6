//! Saturated-spring registration for data with outliers.
//!
//! Each spring's potential contribution is clamped at `cbar^2`, which turns
//! the quadratic objective into a truncated least-squares one. Equivalently
//! the spring coefficient becomes piecewise: `2/beta_i^2` while the weighted
//! squared stretch stays within `cbar^2 beta_i^2`, zero beyond. Damping acts
//! on every particle regardless of its spring's state.
//!
//! A body whose springs are all saturated feels no spring force; started at
//! rest it never moves. The simulation detects that and terminates with
//! [`TerminationReason::Stalled`] instead of looping to the step budget.

use crate::dynamics::{EnergyReport, SimConfig, TerminationReason};
use crate::error::{Error, Result};
use crate::model::{BodyModel, ProblemInstance, State, StateVector};
use crate::so3::{hat, project_so3, Mat3, Vec3};

/// The saturated-spring system: a quadratic body model plus per-spring noise
/// scales and the shared saturation level.
#[derive(Debug, Clone)]
pub struct RobustSpringModel {
    pub base: BodyModel,
    /// Per-spring noise scales; the active coefficient is `2/beta_i^2`.
    pub betas: Vec<f64>,
    /// Saturation level: each spring contributes at most `cbar^2` of
    /// potential energy.
    pub cbar: f64,
}

impl RobustSpringModel {
    /// Builds the model with `beta_i = sigma_i`.
    pub fn new(instance: &ProblemInstance, mu: f64, cbar: f64) -> Result<Self> {
        Self::with_betas(instance, mu, cbar, instance.sigmas().to_vec())
    }

    pub fn with_betas(
        instance: &ProblemInstance,
        mu: f64,
        cbar: f64,
        betas: Vec<f64>,
    ) -> Result<Self> {
        if !(cbar.is_finite() && cbar > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "saturation level cbar = {cbar} must be positive"
            )));
        }
        if betas.len() != instance.len() {
            return Err(Error::SigmaLengthMismatch {
                got: betas.len(),
                expected: instance.len(),
            });
        }
        if let Some(index) = betas.iter().position(|&b| !(b.is_finite() && b > 0.0)) {
            return Err(Error::NonPositiveSigma {
                index,
                value: betas[index],
            });
        }
        Ok(RobustSpringModel {
            base: BodyModel::build(instance, mu)?,
            betas,
            cbar,
        })
    }

    /// Spring coefficient of spring `i` at the given squared residual:
    /// `2/beta_i^2` while `residual_sq <= cbar^2 beta_i^2` (boundary
    /// included), zero beyond.
    pub fn active_spring_coefficient(&self, residual_sq: f64, i: usize) -> f64 {
        let beta_sq = self.betas[i] * self.betas[i];
        if residual_sq <= self.cbar * self.cbar * beta_sq {
            2.0 / beta_sq
        } else {
            0.0
        }
    }

    /// Saturated potential `sum_i min(|r_i|^2 / beta_i^2, cbar^2)`.
    pub fn potential(&self, state: &State) -> f64 {
        let r = state.rotation.matrix();
        let cbar_sq = self.cbar * self.cbar;
        let mut total = 0.0;
        for i in 0..self.base.n {
            let residual =
                self.base.scene_centered[i] - r * self.base.model_offsets[i] - state.com_position;
            let beta_sq = self.betas[i] * self.betas[i];
            total += (residual.norm_squared() / beta_sq).min(cbar_sq);
        }
        total
    }

    /// Number of springs currently inside their saturation radius.
    pub fn active_spring_count(&self, state: &State) -> usize {
        let r = state.rotation.matrix();
        (0..self.base.n)
            .filter(|&i| {
                let residual = self.base.scene_centered[i]
                    - r * self.base.model_offsets[i]
                    - state.com_position;
                self.active_spring_coefficient(residual.norm_squared(), i) > 0.0
            })
            .count()
    }

    /// Net force (scene frame) and torque (body frame) with saturated
    /// springs cut; damping always applies.
    pub fn force_torque(&self, state: &State) -> (Vec3, Vec3) {
        self.force_torque_at(
            state.rotation.matrix(),
            &state.com_position,
            &state.com_velocity,
            &state.angular_velocity,
        )
    }

    fn force_torque_at(&self, r: &Mat3, com: &Vec3, v: &Vec3, omega: &Vec3) -> (Vec3, Vec3) {
        let model = &self.base;
        let rt = r.transpose();
        let mut force = Vec3::zeros();
        let mut torque = Vec3::zeros();
        for i in 0..model.n {
            let residual = model.scene_centered[i] - r * model.model_offsets[i] - com;
            let k = self.active_spring_coefficient(residual.norm_squared(), i);
            let x = &model.model_offsets[i];
            force += k * residual;
            torque += k * x.cross(&(rt * (model.scene_centered[i] - com)));
            torque -= model.damping * model.masses[i] * x.cross(&omega.cross(x));
        }
        force -= model.damping * model.total_mass * v;
        (force, torque)
    }

    /// Kinetic, saturated potential, and the analytic dissipation rate.
    pub fn energies(&self, state: &State) -> EnergyReport {
        let model = &self.base;
        let v2 = state.com_velocity.norm_squared();
        let w = &state.angular_velocity;
        let wjw = w.dot(&(model.inertia * w));
        let kinetic = 0.5 * model.total_mass * v2 + 0.5 * wjw;
        let potential = self.potential(state);
        EnergyReport {
            kinetic,
            potential,
            total: kinetic + potential,
            rate: -model.damping * (model.total_mass * v2 + wjw),
        }
    }

    fn derivative(&self, state: &State) -> StateVector {
        let model = &self.base;
        let (force, torque) = self.force_torque(state);
        let r = state.rotation.matrix();
        let omega = &state.angular_velocity;
        let rdot = r * hat(omega);
        let vdot = force / model.total_mass;
        let wdot = model.inertia_inv() * (torque - omega.cross(&(model.inertia * omega)));
        let mut ds = StateVector::zeros();
        ds.fixed_rows_mut::<3>(0).copy_from(&state.com_velocity);
        for (k, x) in rdot.iter().enumerate() {
            ds[3 + k] = *x;
        }
        ds.fixed_rows_mut::<3>(12).copy_from(&vdot);
        ds.fixed_rows_mut::<3>(15).copy_from(&wdot);
        ds
    }

    /// Same loop as the quadratic simulation, with the piecewise spring
    /// coefficient and per-sample active-spring counts. Detects the
    /// all-saturated stall.
    pub fn simulate(&self, initial: &State, config: &SimConfig) -> Result<RobustTrajectory> {
        config.validate()?;
        let mut state = *initial;
        let mut samples = Vec::new();
        let mut step_idx = 0usize;
        loop {
            let active = self.active_spring_count(&state);
            let ds = self.derivative(&state);
            let dnorm = ds.norm();
            if !dnorm.is_finite() {
                return Err(Error::NonFiniteState { step: step_idx });
            }
            let time = step_idx as f64 * config.dt;
            let velocity_norm = (state.com_velocity.norm_squared()
                + state.angular_velocity.norm_squared())
            .sqrt();

            let termination = if active == 0 && velocity_norm < config.stop_threshold {
                Some(TerminationReason::Stalled)
            } else if dnorm < config.stop_threshold {
                Some(TerminationReason::Converged)
            } else if step_idx >= config.max_steps {
                Some(TerminationReason::MaxSteps)
            } else {
                None
            };
            if let Some(termination) = termination {
                samples.push(self.sample(step_idx, time, state, active));
                return Ok(RobustTrajectory {
                    samples,
                    termination,
                    steps: step_idx,
                    final_state: state,
                    final_derivative_norm: dnorm,
                });
            }

            if step_idx.is_multiple_of(config.record_every) {
                samples.push(self.sample(step_idx, time, state, active));
            }
            let raw = state.rotation.matrix() + config.dt * Mat3::from_column_slice(&ds.as_slice()[3..12]);
            state = State {
                com_position: state.com_position + config.dt * ds.fixed_rows::<3>(0),
                rotation: project_so3(&raw)?,
                com_velocity: state.com_velocity + config.dt * ds.fixed_rows::<3>(12),
                angular_velocity: state.angular_velocity + config.dt * ds.fixed_rows::<3>(15),
            };
            if !state.is_finite() {
                return Err(Error::NonFiniteState { step: step_idx + 1 });
            }
            step_idx += 1;
        }
    }

    fn sample(&self, step: usize, time: f64, state: State, active_springs: usize) -> RobustSample {
        RobustSample {
            step,
            time,
            state,
            energy: self.energies(&state),
            active_springs,
        }
    }
}

/// One recorded point of a saturated-spring run.
#[derive(Debug, Clone, Copy)]
pub struct RobustSample {
    pub step: usize,
    pub time: f64,
    pub state: State,
    pub energy: EnergyReport,
    pub active_springs: usize,
}

/// Recorded saturated-spring simulation output.
#[derive(Debug, Clone)]
pub struct RobustTrajectory {
    pub samples: Vec<RobustSample>,
    pub termination: TerminationReason,
    pub steps: usize,
    pub final_state: State,
    pub final_derivative_norm: f64,
}

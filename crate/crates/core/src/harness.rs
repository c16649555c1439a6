//! Seeded Monte Carlo studies: instance generation, the equilibria and
//! simulation experiments, and their CSV outputs.
//!
//! Every run draws from its own ChaCha stream derived from `(seed,
//! run_index)`, so runs are reproducible individually and identical whether
//! executed serially or in parallel. CSV files contain only deterministic
//! columns; rerunning a study with the same config produces byte-identical
//! output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{initial_state, simulate, SimConfig, TerminationReason, Trajectory};
use crate::equilibria::{enumerate_equilibria, EquilibriumCertificate};
use crate::error::{Error, Result};
use crate::horn::{horn_solve, objective_value};
use crate::model::{pose_from_state, weighted_centroid, BodyModel, Pose, ProblemInstance};
use crate::so3::{geodesic_distance, Rotation, Vec3};

/// Seed used by the studies unless overridden; pinned so the shipped
/// experiment outputs are reproducible.
pub const DEFAULT_SEED: u64 = 42;

/// Configuration of a Monte Carlo study.
#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub n_points: usize,
    pub sigma: f64,
    pub seed: u64,
    pub mu: f64,
    pub sim: SimConfig,
    /// Directory for runs.csv / eigenvalues.csv / energy_trace.csv; nothing
    /// is written when absent.
    pub out_dir: Option<PathBuf>,
}

impl MonteCarloConfig {
    /// 50 runs of 20 points at sigma 0.01.
    pub fn equilibria_defaults() -> Self {
        MonteCarloConfig {
            runs: 50,
            n_points: 20,
            sigma: 0.01,
            seed: DEFAULT_SEED,
            mu: 1.0,
            sim: SimConfig::default(),
            out_dir: None,
        }
    }

    /// 100 runs of 20 points at sigma 0.01.
    pub fn simulation_defaults() -> Self {
        MonteCarloConfig {
            runs: 100,
            ..Self::equilibria_defaults()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.n_points < 3 {
            return Err(Error::InvalidConfig(format!(
                "n_points = {} must be at least 3",
                self.n_points
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma = {} must be nonnegative",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// A generated problem together with its ground truth in the shifted frame
/// the instance is expressed in.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: ProblemInstance,
    pub ground_truth: Pose,
}

/// Independent per-run generator stream.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn standard_vec3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Draws one instance: standard Gaussian model points, a Haar-uniform
/// rotation, a Gaussian translation, isotropic noise of the configured
/// sigma, then both clouds shifted by the scene centroid. The ground truth
/// is adjusted to the shifted frame.
pub fn generate_instance(config: &MonteCarloConfig, run_index: u64) -> GeneratedInstance {
    let mut rng = run_rng(config.seed, run_index);
    let n = config.n_points;

    let model: Vec<Vec3> = (0..n).map(|_| standard_vec3(&mut rng)).collect();
    let rotation = Rotation::sample_uniform(&mut rng);
    let translation = standard_vec3(&mut rng);
    let scene: Vec<Vec3> = model
        .iter()
        .map(|x| rotation.matrix() * x + translation + config.sigma * standard_vec3(&mut rng))
        .collect();

    // equal sigmas, so the mass-weighted centroid is the plain mean
    let weights = vec![1.0; n];
    let shift = weighted_centroid(&scene, &weights);
    let model_shifted: Vec<Vec3> = model.iter().map(|x| x - shift).collect();
    let scene_shifted: Vec<Vec3> = scene.iter().map(|y| y - shift).collect();
    let ground_truth = Pose {
        rotation,
        translation: translation + rotation.matrix() * shift - shift,
    };

    let sigma = if config.sigma > 0.0 { config.sigma } else { 1.0 };
    GeneratedInstance {
        instance: ProblemInstance::with_uniform_sigma(model_shifted, scene_shifted, sigma)
            .expect("generated instance is valid"),
        ground_truth,
    }
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub horn_pose: Pose,
    /// Final simulated pose (simulation study only).
    pub sim_pose: Option<Pose>,
    /// Geodesic rotation error: simulation vs closed form, or the optimal
    /// certificate vs closed form for the equilibria study.
    pub rotation_error: f64,
    pub steps: usize,
    pub termination: Option<TerminationReason>,
    /// Right-half-plane eigenvalue count per certified equilibrium, sorted.
    pub unstable_counts: Vec<usize>,
    pub wall: Duration,
    /// First check this run failed, if any.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// All records of a study plus the data behind the figure CSVs.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub records: Vec<RunRecord>,
    /// (run, equilibrium index, re, im) for every Jacobian eigenvalue.
    pub eigenvalues: Vec<(usize, usize, f64, f64)>,
    /// Full energy trace of the first run (simulation study).
    pub energy_trace: Option<Trajectory>,
}

impl StudyReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(RunRecord::passed)
    }

    pub fn failures(&self) -> Vec<String> {
        self.records
            .iter()
            .filter_map(|r| r.failure.as_ref().map(|f| format!("run {}: {f}", r.run)))
            .collect()
    }
}

const SPURIOUS_ANGLE_TOL: f64 = 1e-6;

fn check_equilibria_run(
    certs: &[EquilibriumCertificate],
    horn: &Pose,
) -> Option<String> {
    if certs.len() != 4 {
        return Some(format!("expected 4 equilibria, found {}", certs.len()));
    }
    let counts: Vec<usize> = certs.iter().map(|c| c.unstable_count).collect();
    if counts != [0, 1, 2, 3] {
        return Some(format!("unstable counts {counts:?}, expected [0, 1, 2, 3]"));
    }
    let optimal_err = geodesic_distance(&certs[0].rotation, &horn.rotation);
    if optimal_err > SPURIOUS_ANGLE_TOL {
        return Some(format!(
            "optimal equilibrium differs from the closed form by {optimal_err:.3e} rad"
        ));
    }
    for cert in &certs[1..] {
        let err = geodesic_distance(&cert.rotation, &horn.rotation);
        if (err - std::f64::consts::PI).abs() > SPURIOUS_ANGLE_TOL {
            return Some(format!("spurious rotation error {err} is not a half turn"));
        }
    }
    None
}

/// Enumerates and classifies the equilibria of `config.runs` random
/// instances, asserting the expected structure per run. Failing runs are
/// recorded, not dropped.
pub fn run_equilibria_study(config: &MonteCarloConfig) -> Result<StudyReport> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.runs);
    let mut eigenvalues = Vec::new();

    for run in 0..config.runs {
        let started = Instant::now();
        let generated = generate_instance(config, run as u64);
        let horn = horn_solve(&generated.instance)?;
        let model = BodyModel::build(&generated.instance, config.mu)?;

        let (certs, failure) = match enumerate_equilibria(&model) {
            Ok(certs) => {
                let failure = check_equilibria_run(&certs, &horn);
                (certs, failure)
            }
            Err(e) => (Vec::new(), Some(format!("enumeration failed: {e}"))),
        };
        for (idx, cert) in certs.iter().enumerate() {
            for eig in &cert.eigenvalues {
                eigenvalues.push((run, idx, eig.re, eig.im));
            }
        }
        let rotation_error = certs
            .first()
            .map(|c| geodesic_distance(&c.rotation, &horn.rotation))
            .unwrap_or(f64::NAN);

        records.push(RunRecord {
            run,
            seed: config.seed,
            horn_pose: horn,
            sim_pose: None,
            rotation_error,
            steps: 0,
            termination: None,
            unstable_counts: certs.iter().map(|c| c.unstable_count).collect(),
            wall: started.elapsed(),
            failure,
        });
    }

    let report = StudyReport {
        records,
        eigenvalues,
        energy_trace: None,
    };
    if let Some(dir) = &config.out_dir {
        write_equilibria_outputs(dir, &report)?;
    }
    Ok(report)
}

/// Half a degree, the acceptance bound on simulation-vs-closed-form rotation
/// error.
pub const SIM_ROTATION_TOL: f64 = 0.5 * std::f64::consts::PI / 180.0;

fn check_simulation_run(
    traj: &Trajectory,
    horn_objective: f64,
    rotation_error: f64,
    dt: f64,
) -> Option<String> {
    if traj.termination != TerminationReason::Converged {
        return Some(format!("terminated with {}", traj.termination));
    }
    if rotation_error > SIM_ROTATION_TOL {
        return Some(format!(
            "rotation error {:.4} deg exceeds 0.5 deg",
            rotation_error.to_degrees()
        ));
    }
    // dissipation: the analytic rate is nonpositive and the recorded total
    // energy may only rise by the explicit-Euler artifact
    let max_rate = traj
        .samples
        .iter()
        .map(|s| s.energy.rate.abs())
        .fold(0.0, f64::max);
    let max_total = traj.samples.iter().map(|s| s.energy.total).fold(0.0, f64::max);
    let slack = 10.0 * dt * max_rate + 1e-9 * (1.0 + max_total);
    for pair in traj.samples.windows(2) {
        if pair[0].energy.rate > 0.0 {
            return Some(format!("positive analytic energy rate {}", pair[0].energy.rate));
        }
        if pair[1].energy.total > pair[0].energy.total + slack {
            return Some(format!(
                "energy rose from {} to {} at step {}",
                pair[0].energy.total, pair[1].energy.total, pair[1].step
            ));
        }
    }
    let final_potential = traj.samples.last().expect("samples").energy.potential;
    if (final_potential - horn_objective).abs() > 0.01 * (1.0 + horn_objective) {
        return Some(format!(
            "final potential {final_potential} is not within 1% of the optimum {horn_objective}"
        ));
    }
    None
}

/// Simulates `config.runs` random instances from rest and compares against
/// the closed form, checking convergence, rotation error, and dissipation.
pub fn run_simulation_study(config: &MonteCarloConfig) -> Result<StudyReport> {
    config.validate()?;
    let sim = config.sim.clone();
    let mut records = Vec::with_capacity(config.runs);
    let mut energy_trace = None;

    for run in 0..config.runs {
        let started = Instant::now();
        let generated = generate_instance(config, run as u64);
        let horn = horn_solve(&generated.instance)?;
        let horn_objective = objective_value(&generated.instance, &horn);
        let model = BodyModel::build(&generated.instance, config.mu)?;

        let (record, traj) = match simulate(&model, &initial_state(&model), &sim) {
            Ok(traj) => {
                let pose = pose_from_state(&traj.final_state, &model);
                let rotation_error = geodesic_distance(&pose.rotation, &horn.rotation);
                let failure =
                    check_simulation_run(&traj, horn_objective, rotation_error, sim.dt);
                (
                    RunRecord {
                        run,
                        seed: config.seed,
                        horn_pose: horn,
                        sim_pose: Some(pose),
                        rotation_error,
                        steps: traj.steps,
                        termination: Some(traj.termination),
                        unstable_counts: Vec::new(),
                        wall: started.elapsed(),
                        failure,
                    },
                    Some(traj),
                )
            }
            Err(e) => (
                RunRecord {
                    run,
                    seed: config.seed,
                    horn_pose: horn,
                    sim_pose: None,
                    rotation_error: f64::NAN,
                    steps: 0,
                    termination: None,
                    unstable_counts: Vec::new(),
                    wall: started.elapsed(),
                    failure: Some(format!("simulation failed: {e}")),
                },
                None,
            ),
        };
        if run == 0 {
            energy_trace = traj;
        }
        records.push(record);
    }

    let report = StudyReport {
        records,
        eigenvalues: Vec::new(),
        energy_trace,
    };
    if let Some(dir) = &config.out_dir {
        write_simulation_outputs(dir, &report)?;
    }
    Ok(report)
}

fn runs_csv(records: &[RunRecord], study: &str) -> String {
    let mut out = String::from(
        "run,seed,study,rotation_error_rad,steps,termination,equilibria_count,unstable_counts,passed\n",
    );
    for r in records {
        let termination = r
            .termination
            .map(|t| t.to_string())
            .unwrap_or_default();
        let counts = r
            .unstable_counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("|");
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{},{},{},{}",
            r.run,
            r.seed,
            study,
            r.rotation_error,
            r.steps,
            termination,
            r.unstable_counts.len(),
            counts,
            r.passed()
        );
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_equilibria_outputs(dir: &Path, report: &StudyReport) -> Result<()> {
    write_file(dir, "runs.csv", &runs_csv(&report.records, "equilibria"))?;
    let mut eigen = String::from("run,equilibrium_index,re,im\n");
    for (run, idx, re, im) in &report.eigenvalues {
        let _ = writeln!(eigen, "{run},{idx},{re:e},{im:e}");
    }
    write_file(dir, "eigenvalues.csv", &eigen)
}

fn write_simulation_outputs(dir: &Path, report: &StudyReport) -> Result<()> {
    write_file(dir, "runs.csv", &runs_csv(&report.records, "simulation"))?;
    let mut trace = String::from("step,time,Vk,Vp,V,Vdot\n");
    if let Some(traj) = &report.energy_trace {
        for s in &traj.samples {
            let _ = writeln!(
                trace,
                "{},{:e},{:e},{:e},{:e},{:e}",
                s.step, s.time, s.energy.kinetic, s.energy.potential, s.energy.total, s.energy.rate
            );
        }
    }
    write_file(dir, "energy_trace.csv", &trace)
}

//! Command-line driver: closed-form alignment, spring-dynamics simulation,
//! equilibrium certification, symmetry probes, saturated-spring runs, and
//! the Monte Carlo studies.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use springreg::dynamics::{initial_state, simulate, SimConfig, Trajectory};
use springreg::equilibria::{
    enumerate_equilibria, make_equilateral_triangle, make_square, symmetry_torque_residual,
    torque_scale,
};
use springreg::harness::{
    run_equilibria_study, run_simulation_study, MonteCarloConfig, DEFAULT_SEED,
};
use springreg::horn::{horn_solve, objective_value};
use springreg::io::load_instance;
use springreg::robust::{RobustSpringModel, RobustTrajectory};
use springreg::{geodesic_distance, pose_from_state, BodyModel, Error, Pose, ProblemInstance};

#[derive(Parser)]
#[command(
    name = "springreg",
    version,
    about = "Rigid point-cloud registration by simulating a damped virtual-spring system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form weighted alignment (SVD baseline)
    Horn {
        /// Model cloud file (x y z [sigma] per line)
        #[arg(long)]
        model: PathBuf,
        /// Scene cloud file, corresponding line by line
        #[arg(long)]
        scene: PathBuf,
        /// Emit machine-readable JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Integrate the spring dynamics from rest until convergence
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Viscous damping coefficient
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Integration time step, seconds
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Stop once the state-derivative norm falls below this
        #[arg(long, default_value_t = 1e-4)]
        stop: f64,
        #[arg(long, default_value_t = 200_000)]
        max_steps: usize,
        /// Write the sampled trajectory to this CSV file
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Enumerate the equilibria and certify local instability
    Equilibria {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Torque residuals of the symmetric triangle/square configurations
    Symmetry {
        #[arg(long, value_enum)]
        shape: Shape,
        /// Evaluate a single in-plane angle
        #[arg(long)]
        theta: Option<f64>,
        /// Evaluate this many seeded random angles instead
        #[arg(long, default_value_t = 0)]
        samples: usize,
        /// Vertex-to-center distance
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Saturated-spring registration for data with outliers
    Robust {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Saturation level: each spring's potential is clamped at cbar^2
        #[arg(long)]
        cbar: f64,
        /// Override every per-spring noise scale (default: the sigmas)
        #[arg(long)]
        beta: Option<f64>,
        /// List each correspondence's final residual and active flag
        #[arg(long)]
        outlier_report: bool,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Seeded Monte Carlo studies with CSV outputs
    Montecarlo {
        #[arg(long, value_enum)]
        study: Study,
        /// Number of runs (default: 50 for equilibria, 100 for simulation)
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Output directory for runs.csv and the figure data
        #[arg(long, default_value = "mc_out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Triangle,
    Square,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Equilibria,
    Simulation,
}

fn rotation_rows(pose: &Pose) -> Vec<Vec<f64>> {
    let r = pose.rotation.matrix();
    (0..3).map(|i| (0..3).map(|j| r[(i, j)]).collect()).collect()
}

fn pose_json(pose: &Pose) -> serde_json::Value {
    json!({
        "rotation": rotation_rows(pose),
        "translation": [pose.translation.x, pose.translation.y, pose.translation.z],
    })
}

fn trajectory_csv(traj: &Trajectory, horn: &Pose) -> String {
    let mut out = String::from("step,time,Vk,Vp,V,Vdot,rot_err_vs_horn_rad,com_norm\n");
    for s in &traj.samples {
        let err = geodesic_distance(&s.state.rotation, &horn.rotation);
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.step,
            s.time,
            s.energy.kinetic,
            s.energy.potential,
            s.energy.total,
            s.energy.rate,
            err,
            s.state.com_position.norm()
        );
    }
    out
}

fn robust_csv(traj: &RobustTrajectory, horn: &Pose) -> String {
    let mut out =
        String::from("step,time,Vk,Vp,V,Vdot,rot_err_vs_horn_rad,com_norm,active_springs\n");
    for s in &traj.samples {
        let err = geodesic_distance(&s.state.rotation, &horn.rotation);
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            s.step,
            s.time,
            s.energy.kinetic,
            s.energy.potential,
            s.energy.total,
            s.energy.rate,
            err,
            s.state.com_position.norm(),
            s.active_springs
        );
    }
    out
}

fn write_text_file(path: &PathBuf, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        context: format!("writing {}", path.display()),
        source: e,
    })
}

fn cmd_horn(model: PathBuf, scene: PathBuf, as_json: bool) -> Result<ExitCode, Error> {
    let instance = load_instance(&model, &scene)?;
    let pose = horn_solve(&instance)?;
    let objective = objective_value(&instance, &pose);
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "pose": pose_json(&pose),
                "objective": objective,
            }))
            .expect("valid json")
        );
    } else {
        let r = pose.rotation.matrix();
        println!("rotation (row-major):");
        for i in 0..3 {
            println!("  {:+.12} {:+.12} {:+.12}", r[(i, 0)], r[(i, 1)], r[(i, 2)]);
        }
        let t = pose.translation;
        println!("translation: {:+.12} {:+.12} {:+.12}", t.x, t.y, t.z);
        println!("objective: {objective:e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(
    model_path: PathBuf,
    scene_path: PathBuf,
    mu: f64,
    dt: f64,
    stop: f64,
    max_steps: usize,
    csv: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let instance = load_instance(&model_path, &scene_path)?;
    let horn = horn_solve(&instance)?;
    let model = BodyModel::build(&instance, mu)?;
    let config = SimConfig {
        dt,
        stop_threshold: stop,
        max_steps,
        ..SimConfig::default()
    };
    let traj = simulate(&model, &initial_state(&model), &config)?;
    let pose = pose_from_state(&traj.final_state, &model);
    if let Some(path) = csv {
        write_text_file(&path, &trajectory_csv(&traj, &horn))?;
    }
    let energy = traj.final_sample().energy;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "pose": pose_json(&pose),
            "termination": traj.termination.to_string(),
            "steps": traj.steps,
            "final_energy": {
                "kinetic": energy.kinetic,
                "potential": energy.potential,
                "total": energy.total,
                "rate": energy.rate,
            },
            "final_derivative_norm": traj.final_derivative_norm,
            "rotation_error_vs_horn_rad": geodesic_distance(&pose.rotation, &horn.rotation),
        }))
        .expect("valid json")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_equilibria(
    model_path: PathBuf,
    scene_path: PathBuf,
    as_json: bool,
) -> Result<ExitCode, Error> {
    let instance = load_instance(&model_path, &scene_path)?;
    let model = BodyModel::build(&instance, 1.0)?;
    let certs = enumerate_equilibria(&model)?;
    let scale = torque_scale(&model);
    if as_json {
        let list: Vec<serde_json::Value> = certs
            .iter()
            .map(|c| {
                let rows: Vec<Vec<f64>> = (0..3)
                    .map(|i| (0..3).map(|j| c.rotation.matrix()[(i, j)]).collect())
                    .collect();
                json!({
                    "rotation": rows,
                    "torque_residual": c.torque_residual,
                    "torque_residual_rel": c.torque_residual / scale,
                    "unstable_count": c.unstable_count,
                    "rotation_error_vs_horn_rad": c.rotation_error_vs_horn,
                    "eigenvalues": c.eigenvalues.iter()
                        .map(|e| json!({"re": e.re, "im": e.im}))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({ "certificates": list })).expect("valid json")
        );
    } else {
        for (idx, c) in certs.iter().enumerate() {
            println!(
                "equilibrium {idx}: unstable_count={} torque_residual={:.3e} \
                 rotation_error_vs_horn={:.6} rad",
                c.unstable_count, c.torque_residual, c.rotation_error_vs_horn
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_symmetry(
    shape: Shape,
    theta: Option<f64>,
    samples: usize,
    l: f64,
    seed: u64,
) -> Result<ExitCode, Error> {
    if theta.is_none() && samples == 0 {
        return Err(Error::InvalidConfig(
            "provide --theta or a positive --samples".into(),
        ));
    }
    let build = |theta: f64| -> ProblemInstance {
        match shape {
            Shape::Triangle => make_equilateral_triangle(l, theta),
            Shape::Square => make_square(l, theta),
        }
    };
    let k = 2.0; // constructions use sigma = 1
    let mut angles = Vec::new();
    if let Some(theta) = theta {
        angles.push(theta);
    }
    if samples > 0 {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        angles.extend((0..samples).map(|_| rng.random_range(0.0..std::f64::consts::TAU)));
    }
    println!("theta,torque_residual,residual_over_kl2");
    for theta in angles {
        let residual = symmetry_torque_residual(&build(theta))?;
        println!("{theta:e},{residual:e},{:e}", residual / (k * l * l));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_robust(
    model_path: PathBuf,
    scene_path: PathBuf,
    cbar: f64,
    beta: Option<f64>,
    outlier_report: bool,
    mu: f64,
    csv: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let instance = load_instance(&model_path, &scene_path)?;
    let horn = horn_solve(&instance)?;
    let robust = match beta {
        Some(beta) => {
            RobustSpringModel::with_betas(&instance, mu, cbar, vec![beta; instance.len()])?
        }
        None => RobustSpringModel::new(&instance, mu, cbar)?,
    };
    let traj = robust.simulate(&initial_state(&robust.base), &SimConfig::default())?;
    let pose = pose_from_state(&traj.final_state, &robust.base);
    if let Some(path) = csv {
        write_text_file(&path, &robust_csv(&traj, &horn))?;
    }
    let energy = traj.samples.last().expect("samples").energy;
    let mut summary = json!({
        "pose": pose_json(&pose),
        "termination": traj.termination.to_string(),
        "steps": traj.steps,
        "final_energy": {
            "kinetic": energy.kinetic,
            "potential": energy.potential,
            "total": energy.total,
            "rate": energy.rate,
        },
        "active_springs": robust.active_spring_count(&traj.final_state),
        "total_springs": instance.len(),
    });
    if outlier_report {
        let r = traj.final_state.rotation.matrix();
        let points: Vec<serde_json::Value> = (0..robust.base.n)
            .map(|i| {
                let residual = robust.base.scene_centered[i]
                    - r * robust.base.model_offsets[i]
                    - traj.final_state.com_position;
                let active = robust.active_spring_coefficient(residual.norm_squared(), i) > 0.0;
                json!({"index": i, "residual": residual.norm(), "active": active})
            })
            .collect();
        summary["points"] = json!(points);
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("valid json"));
    Ok(ExitCode::SUCCESS)
}

fn cmd_montecarlo(
    study: Study,
    runs: Option<usize>,
    points: usize,
    sigma: f64,
    seed: u64,
    out: PathBuf,
) -> Result<ExitCode, Error> {
    let mut config = match study {
        Study::Equilibria => MonteCarloConfig::equilibria_defaults(),
        Study::Simulation => MonteCarloConfig::simulation_defaults(),
    };
    if let Some(runs) = runs {
        config.runs = runs;
    }
    config.n_points = points;
    config.sigma = sigma;
    config.seed = seed;
    config.out_dir = Some(out.clone());

    let (name, report) = match study {
        Study::Equilibria => ("equilibria", run_equilibria_study(&config)?),
        Study::Simulation => ("simulation", run_simulation_study(&config)?),
    };
    let failures = report.failures();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "study": name,
            "runs": report.records.len(),
            "passed": report.all_passed(),
            "failures": failures,
            "out_dir": out.display().to_string(),
        }))
        .expect("valid json")
    );
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn run() -> Result<ExitCode, Error> {
    match Cli::parse().command {
        Command::Horn { model, scene, json } => cmd_horn(model, scene, json),
        Command::Simulate {
            model,
            scene,
            mu,
            dt,
            stop,
            max_steps,
            csv,
        } => cmd_simulate(model, scene, mu, dt, stop, max_steps, csv),
        Command::Equilibria { model, scene, json } => cmd_equilibria(model, scene, json),
        Command::Symmetry {
            shape,
            theta,
            samples,
            l,
            seed,
        } => cmd_symmetry(shape, theta, samples, l, seed),
        Command::Robust {
            model,
            scene,
            cbar,
            beta,
            outlier_report,
            mu,
            csv,
        } => cmd_robust(model, scene, cbar, beta, outlier_report, mu, csv),
        Command::Montecarlo {
            study,
            runs,
            points,
            sigma,
            seed,
            out,
        } => cmd_montecarlo(study, runs, points, sigma, seed, out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

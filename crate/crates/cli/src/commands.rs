//! One function per subcommand. Each writes its CSV files into the output
//! directory and returns a JSON summary for the manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use muskat::csv::{self as out, write_table, Field};
use muskat::evolution::{Evolution, SimulationConfig, SimulationStatus};
use muskat::linear::{
    compare_with_spectrum, discrete_linearization, fit_decay_rate, flat_multiplier_checks, lambda_spectrum,
    measure_growth_rates,
};
use muskat::moving_frame::{bottom_velocity_gap, frame_residuals, to_moving_frame};
use muskat::steady::{branch_point_eigenvalues, branch_stability, continue_branch, detect_bifurcation_points};
use muskat::{
    classify_parabolicity, flat_multiplier_oracle, simulate, BoundaryData, InterfaceState, Multiplier, SteadyProblem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Config, ConfigError, InitialKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Integrate the interface equation and write the trajectory.
    Simulate,
    /// Write the flat-interface growth rates `λ_m`.
    Spectrum,
    /// Compare a finite-difference Jacobian at the flat state with `λ_m`.
    JacobianCheck,
    /// Locate bifurcation points and continue one steady branch.
    Bifurcate,
    /// Continue a steady branch and attach linearized eigenvalues.
    BranchStability,
    /// Simulate, shift to a moving frame and check its boundary conditions.
    MovingFrame,
    /// Compare discrete flat multipliers with their closed forms.
    OracleCheck,
    /// Measure short-time growth rates on ill-posed parameters.
    IllposedDemo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::JacobianCheck => "jacobian-check",
            Command::Bifurcate => "bifurcate",
            Command::BranchStability => "branch-stability",
            Command::MovingFrame => "moving-frame",
            Command::OracleCheck => "oracle-check",
            Command::IllposedDemo => "illposed-demo",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] muskat::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    /// A check ran to completion and failed.
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("interface blew up at t = {t} (max|f| = {max_abs})")]
    BlowUp { t: f64, max_abs: f64 },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(e) => match e {
                muskat::Error::InvalidParams(_) | muskat::Error::ThresholdUndefined => 2,
                muskat::Error::IllPosed | muskat::Error::Inadmissible { .. } => 4,
                _ => 3,
            },
            RunError::Io(_) => 1,
            RunError::CheckFailed(_) => 3,
            RunError::BlowUp { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Numerical(muskat::Error::IllPosed) => "ill-posed",
            RunError::Numerical(muskat::Error::Inadmissible { .. }) | RunError::BlowUp { .. } => "blow-up",
            RunError::Numerical(_) => "numerical",
            RunError::Io(_) => "io",
            RunError::CheckFailed(_) => "check-failed",
        }
    }
}

/// Files written and the summary for the manifest. `failure` is set when the
/// run produced its artifacts but must still exit nonzero.
pub struct Outcome {
    pub outputs: Vec<String>,
    pub summary: Value,
    pub failure: Option<RunError>,
}

struct Ctx<'a> {
    command: Command,
    config: &'a Config,
    dir: &'a Path,
    outputs: Vec<String>,
}

impl Ctx<'_> {
    fn comments(&self) -> Vec<String> {
        vec![
            format!("muskat {} {}", self.command.name(), env!("CARGO_PKG_VERSION")),
            self.config.to_toml(),
        ]
    }

    fn csv<F>(&mut self, name: &str, write: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut BufWriter<File>, &[String]) -> std::io::Result<()>,
    {
        let path: PathBuf = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w, &self.comments())?;
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

fn initial_state(config: &Config, grid: &muskat::SpectralGrid) -> Result<InterfaceState, RunError> {
    let init = &config.initial;
    let state = match init.kind {
        InitialKind::Flat => InterfaceState::from_fn(grid, |_| init.amplitude)?,
        InitialKind::Cosine => InterfaceState::cos_mode(grid, init.mode, init.amplitude)?,
        InitialKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let terms: Vec<(f64, f64, f64)> = (1..=init.random_modes)
                .map(|m| (m as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let norm: f64 = terms.iter().map(|t| t.1.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            InterfaceState::from_fn(grid, |x| {
                init.amplitude * terms.iter().map(|(m, a, p)| a * (m * x + p).cos()).sum::<f64>() / norm
            })?
        }
    };
    Ok(state)
}

fn evolution(config: &Config, boundary: BoundaryData) -> Result<Evolution, RunError> {
    Ok(Evolution::new(config.spectral_grid()?, config.fluid_params()?, boundary, config.solver)?)
}

pub fn run(command: Command, config: &Config, dir: &Path) -> Result<Outcome, RunError> {
    let mut ctx = Ctx {
        command,
        config,
        dir,
        outputs: Vec::new(),
    };
    let (summary, failure) = match command {
        Command::Simulate => run_simulate(&mut ctx)?,
        Command::Spectrum => run_spectrum(&mut ctx)?,
        Command::JacobianCheck => run_jacobian(&mut ctx)?,
        Command::Bifurcate => run_branch(&mut ctx, false)?,
        Command::BranchStability => run_branch(&mut ctx, true)?,
        Command::MovingFrame => run_moving_frame(&mut ctx)?,
        Command::OracleCheck => run_oracle(&mut ctx)?,
        Command::IllposedDemo => run_illposed(&mut ctx)?,
    };
    Ok(Outcome {
        outputs: ctx.outputs,
        summary,
        failure,
    })
}

type Step = Result<(Value, Option<RunError>), RunError>;

fn blow_up(status: &SimulationStatus) -> Option<RunError> {
    match *status {
        SimulationStatus::Completed => None,
        SimulationStatus::BlowUp { t, max_abs } => Some(RunError::BlowUp { t, max_abs }),
    }
}

fn run_simulate(ctx: &mut Ctx) -> Step {
    let config = ctx.config;
    let grid = config.spectral_grid()?;
    let sim = SimulationConfig {
        initial: initial_state(config, &grid)?,
        grid,
        params: config.fluid_params()?,
        boundary: config.boundary.clone(),
        dt: config.time.dt,
        final_time: config.time.final_time,
        stepper: config.time.stepper,
        output_stride: config.time.output_stride,
        allow_illposed: config.time.allow_illposed,
        solver: config.solver,
    };
    let traj = simulate(&sim)?;
    let m_out = config.output.modes;
    ctx.csv("trajectory.csv", |w, c| out::write_trajectory(w, c, &traj, m_out))?;
    let last = traj.last();
    let mut summary = json!({
        "status": traj.status,
        "dt": traj.dt,
        "steps": traj.steps,
        "final_time": last.t,
        "final_mean": last.mean,
        "final_sup_norm": last.sup_norm,
    });
    if config.initial.kind == InitialKind::Cosine {
        let window = config.analysis.decay_window.map(|[a, b]| (a, b));
        if let Ok(fit) = fit_decay_rate(&traj, config.initial.mode as u32, window) {
            summary["mode_fit"] = json!(fit);
        }
    }
    Ok((summary, blow_up(&traj.status)))
}

fn run_spectrum(ctx: &mut Ctx) -> Step {
    let params = ctx.config.fluid_params()?;
    let c2 = ctx.config.boundary.c2();
    let spectrum = lambda_spectrum(&params, c2, ctx.config.analysis.m_max)?;
    ctx.csv("spectrum.csv", |w, c| out::write_spectrum(w, c, &spectrum))?;
    let unstable: Vec<u32> = spectrum.iter().filter(|e| e.lambda > 0.0).map(|e| e.m).collect();
    Ok((
        json!({
            "parabolicity": classify_parabolicity(&params, c2),
            "c2": c2,
            "unstable_modes": unstable,
        }),
        None,
    ))
}

fn run_jacobian(ctx: &mut Ctx) -> Step {
    let config = ctx.config;
    let evo = evolution(config, config.boundary.clone())?;
    let zero = InterfaceState::zeros(evo.grid());
    let m_max = config.resolved_m_max()? as usize;
    let jac = discrete_linearization(&evo, &zero, 0.0, m_max, config.analysis.jacobian_eps)?;
    let c2 = config.boundary.c2();
    let report = compare_with_spectrum(&jac, evo.params(), c2);
    let rows: Vec<Vec<String>> = report
        .diagonal
        .iter()
        .map(|&(m, measured, lambda)| {
            let mut row = vec![m.cell()];
            row.extend([measured, lambda, (measured - lambda).abs()].iter().map(Field::cell));
            row
        })
        .collect();
    ctx.csv("jacobian.csv", |w, c| {
        write_table(w, c, &["m", "measured", "lambda", "abs_error"], rows)
    })?;
    let failure = (!report.passes()).then(|| {
        RunError::CheckFailed(format!(
            "diagonal excess {:.3e}, off-diagonal {:.3e}",
            report.max_diagonal_excess, report.max_off_diagonal
        ))
    });
    Ok((
        json!({
            "max_diagonal_excess": report.max_diagonal_excess,
            "max_off_diagonal": report.max_off_diagonal,
            "passes": report.passes(),
        }),
        failure,
    ))
}

fn run_oracle(ctx: &mut Ctx) -> Step {
    let config = ctx.config;
    let evo = evolution(config, config.boundary.clone())?;
    let checks = flat_multiplier_checks(&evo, config.resolved_m_max()?, config.analysis.derivative_eps)?;
    let tol = config.analysis.tolerance;
    // a vanishing closed form is compared in absolute terms
    let error = |c: &muskat::linear::MultiplierCheck| {
        if c.oracle == 0.0 {
            c.discrete.abs()
        } else {
            c.relative_error()
        }
    };
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                format!("{:?}", c.multiplier),
                c.m.to_string(),
                c.discrete.cell(),
                c.oracle.cell(),
                error(c).cell(),
            ]
        })
        .collect();
    ctx.csv("multipliers.csv", |w, c| {
        write_table(w, c, &["multiplier", "m", "discrete", "oracle", "error"], rows)
    })?;
    let worst = checks.iter().map(error).fold(0.0, f64::max);
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| error(c) > tol)
        .map(|c| format!("{:?}(m={})", c.multiplier, c.m))
        .collect();
    let failure = (!failed.is_empty()).then(|| RunError::CheckFailed(format!("multipliers off: {}", failed.join(", "))));
    Ok((json!({ "worst_error": worst, "tolerance": tol, "checks": checks.len() }), failure))
}

fn run_branch(ctx: &mut Ctx, with_eigenvalues: bool) -> Step {
    let config = ctx.config;
    let cont = &config.continuation;
    let params = config.fluid_params()?;
    let problem = SteadyProblem::new(config.spectral_grid()?, params.varpi())?;
    let points = detect_bifurcation_points(&problem, cont.detect_up_to)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.l.cell(), p.gamma.cell(), p.bracket.0.cell(), p.bracket.1.cell()])
        .collect();
    ctx.csv("bifurcation_points.csv", |w, c| {
        write_table(w, c, &["l", "gamma", "bracket_lo", "bracket_hi"], rows)
    })?;

    let mut branch = continue_branch(&problem, cont.branch, &cont.settings())?;
    let mut summary = json!({
        "branch": cont.branch,
        "points": branch.points.len(),
        "stop": branch.status,
    });
    match branch.fit_gamma_expansion(cont.fit_window[0], cont.fit_window[1]) {
        Ok((c0, c2, c4)) => summary["gamma_fit"] = json!({ "c0": c0, "c2": c2, "c4": c4 }),
        Err(e) => summary["gamma_fit"] = json!({ "error": e.to_string() }),
    }
    let name = format!("branch_l{}.csv", cont.branch);
    if with_eigenvalues {
        let evo = evolution(config, config.boundary.clone())?;
        let eigen = config.resolved_eigen()?;
        let stride = cont.eigen_stride.max(1);
        for (i, p) in branch.points.iter_mut().enumerate() {
            if i % stride == 0 {
                p.eigenvalues = branch_point_eigenvalues(&problem, &evo, p, &eigen)?;
            }
        }
        let entries = branch_stability(&branch, &evo);
        ctx.csv(&name, |w, c| out::write_branch(w, c, &branch))?;
        let stability_name = format!("stability_l{}.csv", cont.branch);
        ctx.csv(&stability_name, |w, c| out::write_stability(w, c, &entries))?;
        summary["max_leading_eigenvalue"] = json!(entries.iter().map(|e| e.leading).fold(f64::NEG_INFINITY, f64::max));
    } else {
        ctx.csv(&name, |w, c| out::write_branch(w, c, &branch))?;
    }
    Ok((summary, None))
}

fn run_moving_frame(ctx: &mut Ctx) -> Step {
    let config = ctx.config;
    if config.boundary != BoundaryData::default() {
        return Err(ConfigError::Invalid(
            "moving-frame sets g1 = moving_frame.c and g2 = 0; leave [boundary] unset".into(),
        )
        .into());
    }
    let frame = config.moving_frame_config();
    let params = config.fluid_params()?;
    let grid = config.spectral_grid()?;
    let sim = SimulationConfig {
        initial: initial_state(config, &grid)?,
        grid,
        params,
        boundary: frame.lab_boundary(),
        dt: config.time.dt,
        final_time: config.time.final_time,
        stepper: config.time.stepper,
        output_stride: config.time.output_stride,
        allow_illposed: config.time.allow_illposed,
        solver: config.solver,
    };
    let traj = simulate(&sim)?;
    let moving = to_moving_frame(&traj, &frame, &params)?;
    let m_out = config.output.modes;
    ctx.csv("moving_trajectory.csv", |w, c| out::write_moving_trajectory(w, c, &moving, m_out))?;

    let evo = evolution(config, frame.lab_boundary())?;
    let stride = config.moving_frame.residual_stride.max(1);
    let mut rows = Vec::new();
    let mut worst = 0.0_f64;
    for p in moving.points.iter().step_by(stride) {
        let r = frame_residuals(&evo, &frame, p.t, p.displacement())?;
        let gap = bottom_velocity_gap(&evo, &frame, p.t, p.displacement())?;
        worst = worst.max(r.max());
        rows.push(vec![
            p.t,
            r.top_flux,
            r.bottom_dirichlet,
            r.jump,
            r.kinematic_plus,
            r.kinematic_minus,
            gap,
        ]);
    }
    ctx.csv("frame_residuals.csv", |w, c| {
        write_table(
            w,
            c,
            &["t", "top_flux", "bottom_dirichlet", "jump", "kinematic_plus", "kinematic_minus", "bottom_velocity_gap"],
            rows,
        )
    })?;
    let tol = config.moving_frame.residual_tolerance;
    let failure = blow_up(&traj.status).or_else(|| {
        (worst > tol).then(|| RunError::CheckFailed(format!("frame residual {worst:.3e} above {tol:.1e}")))
    });
    Ok((
        json!({
            "status": traj.status,
            "bottom_constant": frame.bottom_constant(&params)?,
            "max_residual": worst,
            "tolerance": tol,
        }),
        failure,
    ))
}

fn run_illposed(ctx: &mut Ctx) -> Step {
    let config = ctx.config;
    let evo = evolution(config, config.boundary.clone())?;
    let fits = measure_growth_rates(&evo, &config.illposed.modes, &config.illposed.probe())?;
    ctx.csv("growth.csv", |w, c| out::write_decay_fits(w, c, &fits))?;
    let c2 = config.boundary.c2();
    let comparison: Vec<Value> = fits
        .iter()
        .map(|f| {
            let lambda = flat_multiplier_oracle(Multiplier::Lambda, f.mode as i64, evo.params(), c2);
            json!({ "mode": f.mode, "rate": f.rate, "lambda": lambda, "relative_error": (f.rate - lambda).abs() / lambda.abs() })
        })
        .collect();
    Ok((
        json!({
            "parabolicity": classify_parabolicity(evo.params(), c2),
            "modes": comparison,
        }),
        None,
    ))
}

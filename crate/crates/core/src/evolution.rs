//! The right-hand side `Φ(t, f) = Φ₁(f) + Φ₂(t, f)` and time integration of
//! `∂ₜf = Φ(t, f)`.
//!
//! ```text
//! Φ₁(f)    = -G(f)⁻¹ B₊(f) S₃(f)
//! Φ₂(t, f) = -G(f)⁻¹ [B₊(f) S₁(f) tr T₁(f) g₁ + B₊(f) S₂(f) g₂]
//! ```
//!
//! `T₁(f)` and `S₁(f)` reproduce constants, so only the non-constant part of
//! `g₁` is propagated. The three upper-strip solves are merged into one by
//! linearity, and `G(f)` is inverted once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{flat_multiplier_oracle, EllipticSolver, MixedBvp, Multiplier, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{
    check_admissible, classify_parabolicity, BoundaryData, FluidParams, InterfaceState,
    Parabolicity, SpectralGrid,
};
use crate::operators::Side;

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    /// Implicit Euler on the flat multiplier, explicit Euler on the rest.
    Imex1,
    /// Crank–Nicolson on the flat multiplier, Adams–Bashforth 2 on the rest.
    /// The first step is an `Imex1` step.
    Imex2,
    /// Classical fourth-order Runge–Kutta on the full right-hand side.
    ExplicitRk4,
}

impl Stepper {
    /// Nominal order of accuracy.
    pub fn order(self) -> u32 {
        match self {
            Stepper::Imex1 => 1,
            Stepper::Imex2 => 2,
            Stepper::ExplicitRk4 => 4,
        }
    }
}

/// Right-hand side evaluator bound to a grid, fluid parameters and boundary data.
#[derive(Debug, Clone)]
pub struct Evolution {
    solver: EllipticSolver,
    boundary: BoundaryData,
}

impl Evolution {
    pub fn new(
        grid: SpectralGrid,
        params: FluidParams,
        boundary: BoundaryData,
        settings: SolverSettings,
    ) -> Result<Self> {
        Ok(Self {
            solver: EllipticSolver::new(grid, params, settings)?,
            boundary,
        })
    }

    pub fn from_solver(solver: EllipticSolver, boundary: BoundaryData) -> Self {
        Self { solver, boundary }
    }

    pub fn solver(&self) -> &EllipticSolver {
        &self.solver
    }
    pub fn grid(&self) -> &SpectralGrid {
        self.solver.grid()
    }
    pub fn params(&self) -> &FluidParams {
        self.solver.params()
    }
    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    /// Replace the fluid parameters, keeping factorizations when possible.
    pub fn with_params(&self, params: FluidParams) -> Result<Self> {
        Ok(Self {
            solver: self.solver.with_params(params)?,
            boundary: self.boundary.clone(),
        })
    }

    fn g1_fluctuation(&self, t: f64) -> Option<Vec<f64>> {
        if self.boundary.g1_is_spatially_constant() {
            return None;
        }
        let g1 = self.boundary.g1(t, self.grid().x_nodes());
        let mean = g1.iter().sum::<f64>() / g1.len() as f64;
        Some(g1.iter().map(|v| v - mean).collect())
    }

    fn compose(&self, f: &InterfaceState, interface: Vec<f64>, top: Vec<f64>) -> Result<Vec<f64>> {
        let solver = &self.solver;
        let ops = solver.prepare(f)?;
        let v = solver.solve(&ops, &MixedBvp::homogeneous(Side::Plus, interface, top))?;
        let flux = solver.flux_plus(&ops, &v);
        let q = solver.invert_g(&ops, &flux)?;
        let neg: Vec<f64> = q.iter().map(|v| -v).collect();
        Ok(self.grid().fourier().dealias(&neg))
    }

    /// `Φ(t, f)` on the grid, dealiased.
    pub fn rhs_phi(&self, t: f64, f: &InterfaceState) -> Result<Vec<f64>> {
        self.grid().check_len(f.values().len(), "interface")?;
        check_admissible(f.values())?;
        let ops = self.solver.prepare(f)?;
        let mut interface = self.solver.s3_datum(&ops);
        if let Some(g1) = self.g1_fluctuation(t) {
            let tr = self.solver.solve_t(&ops, &vec![0.0; g1.len()], &g1)?.trace();
            interface.iter_mut().zip(&tr).for_each(|(a, b)| *a += b);
        }
        let g2 = self.boundary.g2(t, self.grid().x_nodes());
        self.compose(f, interface, g2)
    }

    /// `Φ₁(f) = -G(f)⁻¹ B₊(f) S₃(f)`.
    pub fn phi1(&self, f: &InterfaceState) -> Result<Vec<f64>> {
        check_admissible(f.values())?;
        let ops = self.solver.prepare(f)?;
        let datum = self.solver.s3_datum(&ops);
        self.compose(f, datum, vec![0.0; self.grid().nx()])
    }

    /// `Φ₂(t, f)`.
    pub fn phi2(&self, t: f64, f: &InterfaceState) -> Result<Vec<f64>> {
        check_admissible(f.values())?;
        let nx = self.grid().nx();
        let interface = match self.g1_fluctuation(t) {
            Some(g1) => {
                let ops = self.solver.prepare(f)?;
                self.solver.solve_t(&ops, &vec![0.0; nx], &g1)?.trace()
            }
            None => vec![0.0; nx],
        };
        let g2 = self.boundary.g2(t, self.grid().x_nodes());
        self.compose(f, interface, g2)
    }

    /// Flat multiplier `λ_m` for every DFT slot, using the spatial mean of
    /// `g₂(0)`.
    pub fn flat_multipliers(&self) -> Vec<f64> {
        let fourier = self.grid().fourier();
        let c2 = self.boundary.c2();
        (0..fourier.len())
            .map(|k| flat_multiplier_oracle(Multiplier::Lambda, fourier.wavenumber(k), self.params(), c2))
            .collect()
    }

    /// Default time step: `0.5 / max|λ_m|` over the resolved modes, where for
    /// the IMEX schemes only the part of `λ_m` without surface tension counts.
    pub fn default_dt(&self, stepper: Stepper) -> f64 {
        let params = match stepper {
            Stepper::ExplicitRk4 => *self.params(),
            _ => self.params().with_surface_tension(0.0).unwrap_or(*self.params()),
        };
        let c2 = self.boundary.c2();
        let cut = self.grid().fourier().dealias_cutoff() as i64;
        let max = (1..=cut)
            .map(|m| flat_multiplier_oracle(Multiplier::Lambda, m, &params, c2).abs())
            .fold(0.0, f64::max);
        if max == 0.0 {
            0.1
        } else {
            (0.5 / max).min(0.1)
        }
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub grid: SpectralGrid,
    pub params: FluidParams,
    pub boundary: BoundaryData,
    pub initial: InterfaceState,
    /// Time step; the default of [`Evolution::default_dt`] when `None`.
    pub dt: Option<f64>,
    pub final_time: f64,
    pub stepper: Stepper,
    /// Record every `output_stride`-th step (the final state is always kept).
    pub output_stride: usize,
    pub allow_illposed: bool,
    pub solver: SolverSettings,
}

/// One recorded state with scalar diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: InterfaceState,
    pub mean: f64,
    pub sup_norm: f64,
    /// Root-mean-square of `f - mean(f)`.
    pub rms_fluctuation: f64,
}

impl TrajectoryPoint {
    pub fn new(t: f64, state: InterfaceState) -> Self {
        let mean = state.mean();
        let n = state.values().len() as f64;
        let rms_fluctuation =
            (state.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self {
            t,
            mean,
            sup_norm: state.sup_norm(),
            rms_fluctuation,
            state,
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SimulationStatus {
    Completed,
    /// A step produced `max|f| ≥ 0.99` at time `t`; the trajectory ends at the
    /// last admissible state.
    BlowUp { t: f64, max_abs: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub status: SimulationStatus,
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has at least the initial point")
    }
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

/// Per-run integrator state.
pub struct Integrator<'a> {
    evolution: &'a Evolution,
    stepper: Stepper,
    dt: f64,
    lambda: Vec<f64>,
    previous_remainder: Option<Vec<Complex64>>,
}

impl<'a> Integrator<'a> {
    pub fn new(evolution: &'a Evolution, stepper: Stepper, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let lambda = evolution.flat_multipliers();
        if stepper != Stepper::ExplicitRk4 {
            let theta = if stepper == Stepper::Imex1 { 1.0 } else { 0.5 };
            if let Some(l) = lambda.iter().find(|&&l| (1.0 - theta * dt * l).abs() < 1e-12) {
                return Err(Error::Singular {
                    context: format!("implicit factor 1 - dt·λ with λ = {l}"),
                    condition: f64::INFINITY,
                });
            }
        }
        Ok(Self {
            evolution,
            stepper,
            dt,
            lambda,
            previous_remainder: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Fourier coefficients of `Φ(t, f) - λ∘f`.
    fn remainder(&self, t: f64, f: &InterfaceState) -> Result<Vec<Complex64>> {
        let phi = self.evolution.rhs_phi(t, f)?;
        let mut c = self.evolution.grid().fourier().forward(&phi);
        for ((ck, &fk), &l) in c.iter_mut().zip(f.coeffs()).zip(&self.lambda) {
            *ck -= fk * l;
        }
        Ok(c)
    }

    fn add_scaled(&self, f: &InterfaceState, k: &[f64], h: f64) -> Result<InterfaceState> {
        let values = f.values().iter().zip(k).map(|(a, b)| a + h * b).collect();
        InterfaceState::from_values(self.evolution.grid(), values)
    }

    /// Advance from `(t, f)` by one step.
    pub fn step(&mut self, t: f64, f: &InterfaceState) -> Result<InterfaceState> {
        let dt = self.dt;
        let grid = self.evolution.grid();
        match self.stepper {
            Stepper::ExplicitRk4 => {
                let e = self.evolution;
                let k1 = e.rhs_phi(t, f)?;
                let k2 = e.rhs_phi(t + 0.5 * dt, &self.add_scaled(f, &k1, 0.5 * dt)?)?;
                let k3 = e.rhs_phi(t + 0.5 * dt, &self.add_scaled(f, &k2, 0.5 * dt)?)?;
                let k4 = e.rhs_phi(t + dt, &self.add_scaled(f, &k3, dt)?)?;
                let values = (0..f.values().len())
                    .map(|i| f.values()[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect();
                InterfaceState::from_values(grid, values)
            }
            Stepper::Imex1 | Stepper::Imex2 => {
                let n = self.remainder(t, f)?;
                let coeffs: Vec<Complex64> = match (&self.previous_remainder, self.stepper) {
                    (Some(prev), Stepper::Imex2) => f
                        .coeffs()
                        .iter()
                        .zip(&n)
                        .zip(prev)
                        .zip(&self.lambda)
                        .map(|(((&a, &nk), &pk), &l)| {
                            (a * (1.0 + 0.5 * dt * l) + dt * (1.5 * nk - 0.5 * pk)) / (1.0 - 0.5 * dt * l)
                        })
                        .collect(),
                    _ => f
                        .coeffs()
                        .iter()
                        .zip(&n)
                        .zip(&self.lambda)
                        .map(|((&a, &nk), &l)| (a + dt * nk) / (1.0 - dt * l))
                        .collect(),
                };
                self.previous_remainder = Some(n);
                InterfaceState::from_coeffs(grid, &coeffs)
            }
        }
    }
}

/// Integrate with a prepared evaluator. The step is shrunk so that an
/// integer number of steps lands exactly on `final_time`.
pub fn integrate(
    evolution: &Evolution,
    initial: &InterfaceState,
    dt: f64,
    final_time: f64,
    stepper: Stepper,
    output_stride: usize,
) -> Result<Trajectory> {
    evolution.grid().check_len(initial.values().len(), "initial interface")?;
    check_admissible(initial.values())?;
    if !(final_time > 0.0 && final_time.is_finite()) {
        return Err(Error::InvalidInput(format!("final time must be positive, got {final_time}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let steps = (final_time / dt - 1e-9).ceil().max(1.0) as usize;
    let dt = final_time / steps as f64;
    let stride = output_stride.max(1);
    let mut integrator = Integrator::new(evolution, stepper, dt)?;
    let mut points = vec![TrajectoryPoint::new(0.0, initial.clone())];
    let mut f = initial.clone();
    for n in 0..steps {
        let t = n as f64 * dt;
        match integrator.step(t, &f) {
            Ok(next) => f = next,
            Err(Error::Inadmissible { max_abs, .. }) => {
                if points.last().map(|p| p.t) != Some(t) {
                    points.push(TrajectoryPoint::new(t, f));
                }
                return Ok(Trajectory {
                    points,
                    status: SimulationStatus::BlowUp {
                        t: t + dt,
                        max_abs,
                    },
                    dt,
                    steps: n,
                });
            }
            Err(e) => return Err(e),
        }
        if (n + 1) % stride == 0 || n + 1 == steps {
            points.push(TrajectoryPoint::new((n + 1) as f64 * dt, f.clone()));
        }
    }
    Ok(Trajectory {
        points,
        status: SimulationStatus::Completed,
        dt,
        steps,
    })
}

/// Run a configured simulation. Ill-posed parameters are refused unless
/// `allow_illposed` is set.
pub fn simulate(config: &SimulationConfig) -> Result<Trajectory> {
    if !config.allow_illposed
        && classify_parabolicity(&config.params, config.boundary.c2()) == Parabolicity::IllPosed
    {
        return Err(Error::IllPosed);
    }
    let evolution = Evolution::new(
        config.grid.clone(),
        config.params,
        config.boundary.clone(),
        config.solver,
    )?;
    let dt = config.dt.unwrap_or_else(|| evolution.default_dt(config.stepper));
    integrate(
        &evolution,
        &config.initial,
        dt,
        config.final_time,
        config.stepper,
        config.output_stride,
    )
}

/// Exact flat solution `f(t) = -(k/μ₊) ∫₀ᵗ mean g₂`.
pub fn flat_solution(params: &FluidParams, boundary: &BoundaryData, t: f64) -> f64 {
    -params.permeability() / params.viscosity_plus() * boundary.g2_mean_integral(t)
}

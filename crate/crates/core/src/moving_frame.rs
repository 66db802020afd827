//! Frame moving upward with velocity `V` for equal viscosities.
//!
//! With `h(t) = f(t) + tV` and, in moving coordinates `Y = y + tV`,
//!
//! ```text
//! v±(t, x, Y) = u±(x, Y - tV) - (μV/k) Y ± (ϖV/2) t
//! ```
//!
//! the lab-frame problem with `g₁ = c`, `g₂ = 0` becomes a problem on the
//! translated strip with top flux `-(k/μ)∂_Y v₊ = V`, bottom datum
//! `v₋ = C - (μV²/k + ϖV/2) t`, jump `v₊ - v₋ = γκ(h) + ϖh` and kinematic
//! condition `∂ₜh + (k/μ)√(1+h'²) ∂_ν v± = 0`, where `C = c + μV/k`.
//! Potentials are rebuilt from the lab-frame solves; nothing is solved on the
//! moving domain.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{simulate, Evolution, SimulationConfig, SimulationStatus, Stepper, Trajectory};
use crate::linear::{fit_amplitudes, fit_decay_rate, DecayFit};
use crate::model::{curvature, BoundaryData, FluidParams, InterfaceState, SpectralGrid};
use crate::operators::{flux_raw, Side, StripField};
use crate::elliptic::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingFrameConfig {
    /// Frame velocity `V ≥ 0`.
    pub velocity: f64,
    /// Lab-frame potential on the bottom wall.
    pub c: f64,
}

impl MovingFrameConfig {
    pub fn new(velocity: f64, c: f64) -> Result<Self> {
        if !(velocity >= 0.0 && velocity.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidParams(format!(
                "frame velocity must be finite and nonnegative, got {velocity}"
            )));
        }
        Ok(Self { velocity, c })
    }

    /// Common viscosity `μ = μ₊ = μ₋`.
    pub fn shared_viscosity(params: &FluidParams) -> Result<f64> {
        let (mp, mm) = (params.viscosity_plus(), params.viscosity_minus());
        if mp != mm {
            return Err(Error::InvalidParams(format!(
                "moving frame needs equal viscosities, got {mm} below and {mp} above"
            )));
        }
        Ok(mp)
    }

    /// `C = c + μV/k`.
    pub fn bottom_constant(&self, params: &FluidParams) -> Result<f64> {
        let mu = Self::shared_viscosity(params)?;
        Ok(self.c + mu * self.velocity / params.permeability())
    }

    /// Dirichlet datum on the moving bottom wall, `C - (μV²/k + ϖV/2) t`.
    pub fn bottom_datum(&self, params: &FluidParams, t: f64) -> Result<f64> {
        let mu = Self::shared_viscosity(params)?;
        let v = self.velocity;
        let drift = mu * v * v / params.permeability() + 0.5 * params.varpi() * v;
        Ok(self.bottom_constant(params)? - drift * t)
    }

    /// Lab-frame boundary data the transform applies to: `g₁ = c`, `g₂ = 0`.
    pub fn lab_boundary(&self) -> BoundaryData {
        BoundaryData::constant(self.c, 0.0)
    }

    fn check_boundary(&self, boundary: &BoundaryData, grid: &SpectralGrid, t: f64) -> Result<()> {
        let x = grid.x_nodes();
        let g1_ok = boundary.g1(t, x).iter().all(|&g| (g - self.c).abs() <= 1e-14 * (1.0 + self.c.abs()));
        let g2_ok = boundary.g2(t, x).iter().all(|&g| g == 0.0);
        if !(g1_ok && g2_ok) {
            return Err(Error::InvalidInput(format!(
                "moving frame needs g1 = {} and g2 = 0",
                self.c
            )));
        }
        Ok(())
    }
}

/// One state seen from the moving frame. `h = f + offset` is stored as the
/// pair, so `h - tV` returns `f` unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingFramePoint {
    pub t: f64,
    /// `tV`.
    pub offset: f64,
    lab: InterfaceState,
    pub bottom_datum: f64,
}

impl MovingFramePoint {
    /// `h - tV`, identical to the lab-frame interface.
    pub fn displacement(&self) -> &InterfaceState {
        &self.lab
    }

    pub fn h_values(&self) -> Vec<f64> {
        self.lab.values().iter().map(|v| v + self.offset).collect()
    }

    /// Fourier coefficients of `h`; only the mean differs from `f`.
    pub fn h_coeffs(&self) -> Vec<Complex64> {
        let mut c = self.lab.coeffs().to_vec();
        c[0] += self.offset;
        c
    }

    pub fn h_mean(&self) -> f64 {
        self.lab.mean() + self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingTrajectory {
    pub config: MovingFrameConfig,
    pub points: Vec<MovingFramePoint>,
    pub status: SimulationStatus,
}

/// Rigid shift of a lab-frame trajectory.
pub fn to_moving_frame(traj: &Trajectory, cfg: &MovingFrameConfig, params: &FluidParams) -> Result<MovingTrajectory> {
    MovingFrameConfig::shared_viscosity(params)?;
    let points = traj
        .points
        .iter()
        .map(|p| {
            Ok(MovingFramePoint {
                t: p.t,
                offset: p.t * cfg.velocity,
                lab: p.state.clone(),
                bottom_datum: cfg.bottom_datum(params, p.t)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MovingTrajectory {
        config: *cfg,
        points,
        status: traj.status.clone(),
    })
}

/// Moving-frame potentials on the reference strips, with `∂ₜh`.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingPotentials {
    pub t: f64,
    pub plus: StripField,
    pub minus: StripField,
    pub dh_dt: Vec<f64>,
}

/// Rebuild `v±` at time `t` from the lab-frame solves at `f`.
pub fn moving_potentials(
    evolution: &Evolution,
    cfg: &MovingFrameConfig,
    t: f64,
    f: &InterfaceState,
) -> Result<MovingPotentials> {
    let params = evolution.params();
    let mu = MovingFrameConfig::shared_viscosity(params)?;
    let grid = evolution.grid();
    cfg.check_boundary(evolution.boundary(), grid, t)?;
    let solver = evolution.solver();
    let phi = evolution.rhs_phi(t, f)?;
    let ops = solver.prepare(f)?;
    let nx = grid.nx();
    let q: Vec<f64> = phi.iter().map(|v| -v).collect();
    let u_minus = solver.solve_t(&ops, &q, &vec![cfg.c; nx])?;
    let u_plus = solver.solve_s(&ops, &vec![0.0; nx], &u_minus.trace())?;

    let v = cfg.velocity;
    let slope = mu * v / params.permeability();
    let shift = 0.5 * params.varpi() * v * t;
    let fv = f.values();
    let lift = |u: &StripField, side: Side| -> StripField {
        let eta = side.y_nodes(grid);
        let vals = DMatrix::from_fn(nx, eta.len(), |i, j| {
            let y_lab = eta[j] + (1.0 - side.sign() * eta[j]) * fv[i];
            u.values()[(i, j)] - slope * (y_lab + t * v) + side.sign() * shift
        });
        StripField::from_matrix(side, vals)
    };
    Ok(MovingPotentials {
        t,
        plus: lift(&u_plus, Side::Plus),
        minus: lift(&u_minus, Side::Minus),
        dh_dt: phi.iter().map(|p| p + v).collect(),
    })
}

/// Max-norm residuals of the moving-frame boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameResiduals {
    /// `-(k/μ)∂_Y v₊ - V` on the top wall.
    pub top_flux: f64,
    /// `v₋ - C + (μV²/k + ϖV/2)t` on the bottom wall.
    pub bottom_dirichlet: f64,
    /// `v₊ - v₋ - γκ(h) - ϖh` on the interface.
    pub jump: f64,
    /// `∂ₜh + (k/μ)√(1+h'²)∂_ν v₊`.
    pub kinematic_plus: f64,
    pub kinematic_minus: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        [
            self.top_flux,
            self.bottom_dirichlet,
            self.jump,
            self.kinematic_plus,
            self.kinematic_minus,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn max_abs<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Evaluate every moving-frame condition at `(t, h = f + tV)`.
pub fn frame_residuals(
    evolution: &Evolution,
    cfg: &MovingFrameConfig,
    t: f64,
    f: &InterfaceState,
) -> Result<FrameResiduals> {
    let pot = moving_potentials(evolution, cfg, t, f)?;
    let params = evolution.params();
    let grid = evolution.grid();
    let mu = MovingFrameConfig::shared_viscosity(params)?;
    let k = params.permeability();
    let n = grid.vertical_nodes();
    let ops = evolution.solver().prepare(f)?;
    let v = cfg.velocity;
    let fv = f.values();

    let d1 = grid.d1();
    let row_dy = |field: &StripField, j: usize, i: usize| -> f64 {
        (0..n).map(|c| d1[(j, c)] * field.values()[(i, c)]).sum()
    };
    // reference top strip: y = η + (1 - η) f, so ∂_y = ∂_η / (1 - f)
    let top_flux = max_abs((0..grid.nx()).map(|i| -(k / mu) * row_dy(&pot.plus, n - 1, i) / (1.0 - fv[i]) - v));
    let datum = cfg.bottom_datum(params, t)?;
    let bottom_dirichlet = max_abs(pot.minus.outer_trace().into_iter().map(|b| b - datum));

    let kappa = curvature(grid, f);
    let gamma = params.surface_tension();
    let varpi = params.varpi();
    let jump = max_abs(
        pot.plus
            .trace()
            .iter()
            .zip(pot.minus.trace())
            .enumerate()
            .map(|(i, (p, m))| p - m - gamma * kappa[i] - varpi * (fv[i] + t * v)),
    );
    let flux_p = flux_raw(grid, ops.coefficients(Side::Plus), pot.plus.values());
    let flux_m = flux_raw(grid, ops.coefficients(Side::Minus), pot.minus.values());
    Ok(FrameResiduals {
        top_flux,
        bottom_dirichlet,
        jump,
        kinematic_plus: max_abs(pot.dh_dt.iter().zip(&flux_p).map(|(a, b)| a + b)),
        kinematic_minus: max_abs(pot.dh_dt.iter().zip(&flux_m).map(|(a, b)| a + b)),
    })
}

/// `sup_x |⟨v⃗₋, ν⟩ - V|` on the bottom wall in the moving frame, where
/// `v⃗₋ = -(k/μ)∇v₋`.
pub fn bottom_velocity_gap(
    evolution: &Evolution,
    cfg: &MovingFrameConfig,
    t: f64,
    f: &InterfaceState,
) -> Result<f64> {
    let pot = moving_potentials(evolution, cfg, t, f)?;
    let params = evolution.params();
    let mu = MovingFrameConfig::shared_viscosity(params)?;
    let k = params.permeability();
    let grid = evolution.grid();
    let n = grid.vertical_nodes();
    let d1 = grid.d1();
    let fv = f.values();
    Ok(max_abs((0..grid.nx()).map(|i| {
        let d: f64 = (0..n).map(|c| d1[(0, c)] * pot.minus.values()[(i, c)]).sum();
        // lower strip: y = η + (1 + η) f, so ∂_y = ∂_η / (1 + f)
        -(k / mu) * d / (1.0 + fv[i]) - cfg.velocity
    })))
}

/// Run controls for [`traveling_decay_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayCheckSettings {
    pub final_time: f64,
    pub dt: Option<f64>,
    pub stepper: Stepper,
    pub output_stride: usize,
    pub mode: u32,
    pub window: Option<(f64, f64)>,
    pub solver: SolverSettings,
}

impl Default for DecayCheckSettings {
    fn default() -> Self {
        Self {
            final_time: 4.0,
            dt: None,
            stepper: Stepper::Imex2,
            output_stride: 5,
            mode: 1,
            window: None,
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TravelingDecay {
    /// Fit of `|â_m(h - tV)|`.
    pub moving: DecayFit,
    /// Fit of `|â_m(f)|` on the lab trajectory.
    pub lab: DecayFit,
    pub trajectory: MovingTrajectory,
}

/// Simulate in the lab frame, shift, and fit the decay of `h - tV`.
pub fn traveling_decay_check(
    grid: &SpectralGrid,
    f0: &InterfaceState,
    cfg: &MovingFrameConfig,
    params: &FluidParams,
    settings: &DecayCheckSettings,
) -> Result<TravelingDecay> {
    MovingFrameConfig::shared_viscosity(params)?;
    if params.surface_tension() <= params.varpi() {
        return Err(Error::InvalidParams(format!(
            "decay needs surface tension above the density jump, got {} <= {}",
            params.surface_tension(),
            params.varpi()
        )));
    }
    let config = SimulationConfig {
        grid: grid.clone(),
        params: *params,
        boundary: cfg.lab_boundary(),
        initial: f0.clone(),
        dt: settings.dt,
        final_time: settings.final_time,
        stepper: settings.stepper,
        output_stride: settings.output_stride,
        allow_illposed: false,
        solver: settings.solver,
    };
    let traj = simulate(&config)?;
    let moving = to_moving_frame(&traj, cfg, params)?;
    let samples: Vec<(f64, f64)> = moving
        .points
        .iter()
        .map(|p| (p.t, p.displacement().coeff(settings.mode as i64).norm()))
        .collect();
    Ok(TravelingDecay {
        moving: fit_amplitudes(&samples, settings.mode, settings.window)?,
        lab: fit_decay_rate(&traj, settings.mode, settings.window)?,
        trajectory: moving,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::integrate;

    fn setup(gamma: f64, varpi: f64) -> (SpectralGrid, FluidParams) {
        let grid = SpectralGrid::new(16, 16).unwrap();
        let params = FluidParams::with_varpi(1.0, 1.0, 1.0, varpi, gamma).unwrap();
        (grid, params)
    }

    #[test]
    fn constants_and_validation() {
        let (_, params) = setup(1.0, 0.5);
        let cfg = MovingFrameConfig::new(0.0, 0.3).unwrap();
        assert_eq!(cfg.bottom_constant(&params).unwrap(), 0.3);
        assert_eq!(cfg.bottom_datum(&params, 7.0).unwrap(), 0.3);
        let p2 = FluidParams::with_varpi(2.0, 3.0, 3.0, 0.5, 1.0).unwrap();
        let cfg = MovingFrameConfig::new(0.4, 0.3).unwrap();
        assert!((cfg.bottom_constant(&p2).unwrap() - (0.3 + 3.0 * 0.4 / 2.0)).abs() < 1e-15);
        let drift = 3.0 * 0.16 / 2.0 + 0.25 * 0.4;
        assert!((cfg.bottom_datum(&p2, 2.0).unwrap() - (0.9 - 2.0 * drift)).abs() < 1e-14);
        assert!(MovingFrameConfig::new(-1.0, 0.0).is_err());
        let uneven = FluidParams::with_varpi(1.0, 2.0, 1.0, 0.5, 1.0).unwrap();
        assert!(cfg.bottom_constant(&uneven).is_err());
    }

    #[test]
    fn flat_equilibrium_travels_rigidly() {
        let (grid, params) = setup(1.0, 0.5);
        let cfg = MovingFrameConfig::new(0.7, 0.2).unwrap();
        let evo = Evolution::new(grid.clone(), params, cfg.lab_boundary(), SolverSettings::default()).unwrap();
        let traj = integrate(&evo, &InterfaceState::zeros(&grid), 0.1, 1.0, Stepper::Imex1, 2).unwrap();
        let moving = to_moving_frame(&traj, &cfg, &params).unwrap();
        for p in &moving.points {
            assert!(p.h_values().iter().all(|&h| h == p.t * 0.7));
            assert_eq!(p.displacement().sup_norm(), 0.0);
        }
        let r = frame_residuals(&evo, &cfg, 0.5, &InterfaceState::zeros(&grid)).unwrap();
        assert!(r.max() < 1e-12, "{r:?}");
        assert!(bottom_velocity_gap(&evo, &cfg, 0.5, &InterfaceState::zeros(&grid)).unwrap() < 1e-12);
    }

    #[test]
    fn curved_state_satisfies_frame_conditions() {
        let grid = SpectralGrid::new(32, 16).unwrap();
        let params = FluidParams::with_varpi(1.0, 1.0, 1.0, 0.3, 0.8).unwrap();
        let cfg = MovingFrameConfig::new(1.3, -0.4).unwrap();
        let evo = Evolution::new(grid.clone(), params, cfg.lab_boundary(), SolverSettings::default()).unwrap();
        let f = InterfaceState::from_fn(&grid, |x| 0.1 * x.cos() - 0.05 * (2.0 * x).sin()).unwrap();
        let r = frame_residuals(&evo, &cfg, 2.5, &f).unwrap();
        assert!(r.max() < 1e-9, "{r:?}");
        assert!(bottom_velocity_gap(&evo, &cfg, 2.5, &f).unwrap() > 1e-4);
        let wrong = Evolution::new(grid, params, BoundaryData::constant(0.0, 0.1), SolverSettings::default()).unwrap();
        assert!(frame_residuals(&wrong, &cfg, 0.0, &f).is_err());
    }

    #[test]
    fn zero_velocity_is_identity() {
        let (grid, params) = setup(1.0, 0.5);
        let cfg = MovingFrameConfig::new(0.0, 0.0).unwrap();
        let f0 = InterfaceState::cos_mode(&grid, 1, 1e-3).unwrap();
        let evo = Evolution::new(grid, params, cfg.lab_boundary(), SolverSettings::default()).unwrap();
        let traj = integrate(&evo, &f0, 0.05, 0.5, Stepper::Imex2, 5).unwrap();
        let moving = to_moving_frame(&traj, &cfg, &params).unwrap();
        for (p, q) in moving.points.iter().zip(&traj.points) {
            assert_eq!(p.h_coeffs(), q.state.coeffs());
            assert_eq!(p.displacement(), &q.state);
        }
    }
}

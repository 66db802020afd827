//! Flat linearized spectrum, finite-difference Jacobians of `Φ`, and rate
//! fits on trajectories.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic::{flat_multiplier_oracle, Multiplier};
use crate::error::{Error, Result};
use crate::evolution::{integrate, Evolution, Stepper, Trajectory};
use crate::model::{FluidParams, InterfaceState, SpectralGrid};

/// Growth rate `λ_m` of mode `m` about the flat interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub m: u32,
    pub lambda: f64,
}

/// `λ_m` for `0 ≤ m ≤ m_max`.
pub fn lambda_spectrum(params: &FluidParams, c2: f64, m_max: u32) -> Result<Vec<SpectrumEntry>> {
    if m_max < 1 {
        return Err(Error::InvalidInput("m_max must be at least 1".into()));
    }
    Ok((0..=m_max)
        .map(|m| SpectrumEntry {
            m,
            lambda: flat_multiplier_oracle(Multiplier::Lambda, m as i64, params, c2),
        })
        .collect())
}

/// `dλ_m/dγ = -k m³ tanh(m) / (μ₊ + μ₋ tanh²m)`.
pub fn lambda_gamma_derivative(params: &FluidParams, m: u32) -> f64 {
    let am = m as f64;
    let t = am.tanh();
    -params.permeability() * am.powi(3) * t / (params.viscosity_plus() + params.viscosity_minus() * t * t)
}

/// Lower end of the admissible decay-rate window for `γ > ϖ`, `c₂ = 0`:
/// `tanh(1) k (γ - ϖ) / (μ₊ + μ₋ tanh 1)`.
pub fn decay_window_bound(params: &FluidParams) -> f64 {
    let t = 1.0_f64.tanh();
    t * params.permeability() * (params.surface_tension() - params.varpi())
        / (params.viscosity_plus() + params.viscosity_minus() * t)
}

/// Real Fourier basis `[1, cos x, sin x, cos 2x, sin 2x, …]` up to `m_max`.
fn basis_function(grid: &SpectralGrid, index: usize) -> Vec<f64> {
    let m = index.div_ceil(2) as f64;
    grid.x_nodes()
        .iter()
        .map(|&x| match index {
            0 => 1.0,
            i if i % 2 == 1 => (m * x).cos(),
            _ => (m * x).sin(),
        })
        .collect()
}

/// Coordinates of `v` in the real basis up to `m_max`.
fn project(grid: &SpectralGrid, v: &[f64], m_max: usize) -> DVector<f64> {
    let c = grid.fourier().forward(v);
    let mut out = DVector::zeros(2 * m_max + 1);
    out[0] = c[0].re;
    for m in 1..=m_max {
        let cm = c[grid.fourier().slot(m as i64)];
        out[2 * m - 1] = 2.0 * cm.re;
        out[2 * m] = -2.0 * cm.im;
    }
    out
}

fn perturbed(grid: &SpectralGrid, f: &InterfaceState, dir: &[f64], h: f64) -> Result<InterfaceState> {
    InterfaceState::from_values(
        grid,
        f.values().iter().zip(dir).map(|(a, b)| a + h * b).collect(),
    )
}

/// Central difference `(Φ(f + εe) - Φ(f - εe)) / 2ε` in direction `e`.
pub fn directional_derivative<F>(
    grid: &SpectralGrid,
    rhs: F,
    f: &InterfaceState,
    direction: &[f64],
    eps: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&InterfaceState) -> Result<Vec<f64>>,
{
    let plus = rhs(&perturbed(grid, f, direction, eps)?)?;
    let minus = rhs(&perturbed(grid, f, direction, -eps)?)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
}

/// Five-point difference, fourth order in `ε`.
pub fn directional_derivative_richardson<F>(
    grid: &SpectralGrid,
    rhs: F,
    f: &InterfaceState,
    direction: &[f64],
    eps: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&InterfaceState) -> Result<Vec<f64>>,
{
    let d1 = directional_derivative(grid, &rhs, f, direction, eps)?;
    let d2 = directional_derivative(grid, &rhs, f, direction, 2.0 * eps)?;
    Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * a - b) / 3.0).collect())
}

/// Central-difference Jacobian of `Φ(t, ·)` at `f` in the real Fourier basis
/// `[1, cos x, sin x, …, cos m_max x, sin m_max x]`. Columns are computed in
/// parallel.
pub fn discrete_linearization(
    evolution: &Evolution,
    f: &InterfaceState,
    t: f64,
    m_max: usize,
    eps: f64,
) -> Result<DMatrix<f64>> {
    let grid = evolution.grid();
    if m_max == 0 || m_max > grid.fourier().dealias_cutoff() {
        return Err(Error::InvalidInput(format!(
            "m_max must lie in 1..={}, got {m_max}",
            grid.fourier().dealias_cutoff()
        )));
    }
    let size = 2 * m_max + 1;
    let columns: Vec<DVector<f64>> = (0..size)
        .into_par_iter()
        .map(|j| {
            let dir = basis_function(grid, j);
            let d = directional_derivative(grid, |g| evolution.rhs_phi(t, g), f, &dir, eps)?;
            Ok(project(grid, &d, m_max))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&columns))
}

/// Jacobian restricted to the even zero-mean subspace spanned by
/// `cos x, …, cos(m_max x)`.
pub fn even_linearization(
    evolution: &Evolution,
    f: &InterfaceState,
    m_max: usize,
    eps: f64,
) -> Result<DMatrix<f64>> {
    let grid = evolution.grid();
    if m_max == 0 || m_max > grid.fourier().dealias_cutoff() {
        return Err(Error::InvalidInput(format!(
            "m_max must lie in 1..={}, got {m_max}",
            grid.fourier().dealias_cutoff()
        )));
    }
    let columns: Vec<DVector<f64>> = (1..=m_max)
        .into_par_iter()
        .map(|m| {
            let dir = basis_function(grid, 2 * m - 1);
            let d = directional_derivative(grid, |g| evolution.rhs_phi(0.0, g), f, &dir, eps)?;
            let p = project(grid, &d, m_max);
            Ok(DVector::from_iterator(m_max, (1..=m_max).map(|l| p[2 * l - 1])))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&columns))
}

/// One discrete flat multiplier next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiplierCheck {
    pub multiplier: Multiplier,
    pub m: u32,
    pub discrete: f64,
    pub oracle: f64,
}

impl MultiplierCheck {
    pub fn relative_error(&self) -> f64 {
        (self.discrete - self.oracle).abs() / self.oracle.abs()
    }
}

/// Measure `tr T₂(0)`, `B₊S₁(0)`, `B₊S₁(0)trT₂(0)` and `G(0)` by solving
/// with `cos(mx)` data, and `∂Φ₁(0)`, `∂_fΦ₂(0, 0)` by five-point
/// differences with step `eps`, for `1 ≤ m ≤ m_max`.
pub fn flat_multiplier_checks(evolution: &Evolution, m_max: u32, eps: f64) -> Result<Vec<MultiplierCheck>> {
    let grid = evolution.grid();
    if m_max == 0 || m_max as usize > grid.fourier().dealias_cutoff() {
        return Err(Error::InvalidInput(format!(
            "m_max must lie in 1..={}, got {m_max}",
            grid.fourier().dealias_cutoff()
        )));
    }
    let solver = evolution.solver();
    let zero = InterfaceState::zeros(grid);
    let ops = solver.prepare(&zero)?;
    let params = evolution.params();
    let c2 = evolution.boundary().c2();
    let per_mode: Vec<Vec<MultiplierCheck>> = (1..=m_max)
        .into_par_iter()
        .map(|m| {
            let dir = basis_function(grid, 2 * m as usize - 1);
            let coeff = |v: &[f64]| project(grid, v, m as usize)[2 * m as usize - 1];
            let phi1 = directional_derivative_richardson(grid, |g| evolution.phi1(g), &zero, &dir, eps)?;
            let phi2 = directional_derivative_richardson(grid, |g| evolution.phi2(0.0, g), &zero, &dir, eps)?;
            let measured = [
                (Multiplier::T2Trace, coeff(&solver.t2_trace(&ops, &dir)?)),
                (Multiplier::S1Flux, coeff(&solver.s1_flux(&ops, &dir)?)),
                (Multiplier::Coupling, coeff(&solver.s1_flux(&ops, &solver.t2_trace(&ops, &dir)?)?)),
                (Multiplier::G, coeff(&solver.apply_g(&ops, &dir)?)),
                (Multiplier::Phi1Lin, coeff(&phi1)),
                (Multiplier::Phi2Lin, coeff(&phi2)),
            ];
            Ok(measured
                .into_iter()
                .map(|(multiplier, discrete)| MultiplierCheck {
                    multiplier,
                    m,
                    discrete,
                    oracle: flat_multiplier_oracle(multiplier, m as i64, params, c2),
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_mode.into_iter().flatten().collect())
}

/// Summary of a Jacobian compared against the flat spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JacobianReport {
    /// `(m, measured diagonal, λ_m)` for each mode, cosine entries.
    pub diagonal: Vec<(u32, f64, f64)>,
    pub max_diagonal_excess: f64,
    pub max_off_diagonal: f64,
}

impl JacobianReport {
    /// Diagonal entries within `max(1e-6, 1e-4|λ|)` and couplings at most `1e-6`.
    pub fn passes(&self) -> bool {
        self.max_diagonal_excess <= 0.0 && self.max_off_diagonal <= 1e-6
    }
}

/// Compare a real-basis Jacobian at the flat state with `λ_m`.
pub fn compare_with_spectrum(jac: &DMatrix<f64>, params: &FluidParams, c2: f64) -> JacobianReport {
    let size = jac.nrows();
    let m_max = (size - 1) / 2;
    let mut diagonal = Vec::new();
    let mut excess = f64::NEG_INFINITY;
    for i in 0..size {
        let m = i.div_ceil(2) as u32;
        let lambda = flat_multiplier_oracle(Multiplier::Lambda, m as i64, params, c2);
        let tol = (1e-4 * lambda.abs()).max(1e-6);
        excess = excess.max((jac[(i, i)] - lambda).abs() - tol);
        if i % 2 == 1 || i == 0 {
            diagonal.push((m, jac[(i, i)], lambda));
        }
    }
    let mut off = 0.0_f64;
    for i in 0..size {
        for j in 0..size {
            if i != j {
                off = off.max(jac[(i, j)].abs());
            }
        }
    }
    debug_assert_eq!(diagonal.len(), m_max + 1);
    JacobianReport {
        diagonal,
        max_diagonal_excess: excess,
        max_off_diagonal: off,
    }
}

/// Log-linear fit of `|a_m(t)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub mode: u32,
    /// Signed growth rate, the slope of `ln|a_m|`; negative for decay.
    pub rate: f64,
    pub window_start: f64,
    pub window_end: f64,
    /// Root-mean-square residual of the fit in `ln|a_m|`.
    pub residual: f64,
}

impl DecayFit {
    /// `-rate`, positive for decaying modes.
    pub fn decay_rate(&self) -> f64 {
        -self.rate
    }
}

/// Amplitudes below this are treated as underflow and end the fit window.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

/// Least-squares fit of `ln|a_m(t)|` against `t` over `window` (whole
/// trajectory if `None`).
pub fn fit_decay_rate(traj: &Trajectory, mode: u32, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let samples: Vec<(f64, f64)> = traj
        .points
        .iter()
        .map(|p| (p.t, p.state.coeff(mode as i64).norm()))
        .collect();
    fit_amplitudes(&samples, mode, window)
}

/// Fit from `(t, |a|)` samples.
pub fn fit_amplitudes(samples: &[(f64, f64)], mode: u32, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let (t0, t1) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut pts = Vec::new();
    for &(t, a) in samples.iter().filter(|(t, _)| *t >= t0 && *t <= t1) {
        if !(a > AMPLITUDE_FLOOR) {
            break;
        }
        pts.push((t, a.ln()));
    }
    if pts.is_empty() {
        return Err(Error::FitRejected(format!("mode {mode} has zero amplitude")));
    }
    if pts.len() < 3 {
        return Err(Error::FitRejected(format!(
            "mode {mode}: only {} samples above the amplitude floor",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>();
    if sxx == 0.0 {
        return Err(Error::FitRejected("degenerate time window".into()));
    }
    let rate = sxy / sxx;
    let intercept = my - rate * mt;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - rate * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        mode,
        rate,
        window_start: pts[0].0,
        window_end: pts[pts.len() - 1].0,
        residual,
    })
}

/// Settings of the short-horizon growth measurement used on ill-posed
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthProbe {
    pub amplitude: f64,
    pub horizon: f64,
    /// Steps per unit of `1/λ_m`.
    pub steps_per_efold: f64,
    pub samples: usize,
}

impl Default for GrowthProbe {
    fn default() -> Self {
        Self {
            amplitude: 1e-6,
            horizon: 1.0,
            steps_per_efold: 40.0,
            samples: 20,
        }
    }
}

/// Integrate `amplitude · cos(mx)` with RK4 over a short horizon for each
/// mode and fit the growth of `a_m`.
pub fn measure_growth_rates(evolution: &Evolution, modes: &[u32], probe: &GrowthProbe) -> Result<Vec<DecayFit>> {
    let c2 = evolution.boundary().c2();
    modes
        .par_iter()
        .map(|&m| {
            let lambda = flat_multiplier_oracle(Multiplier::Lambda, m as i64, evolution.params(), c2);
            let f0 = InterfaceState::cos_mode(evolution.grid(), m as usize, probe.amplitude)?;
            let steps = ((probe.horizon * lambda.abs().max(1.0) * probe.steps_per_efold).ceil() as usize)
                .max(probe.samples);
            let stride = (steps / probe.samples).max(1);
            let steps = stride * probe.samples;
            let traj = integrate(
                evolution,
                &f0,
                probe.horizon / steps as f64,
                probe.horizon,
                Stepper::ExplicitRk4,
                stride,
            )?;
            fit_decay_rate(&traj, m, None)
        })
        .collect()
}

//! Physical parameters, boundary data, the interface representation and the
//! closed-form parameter diagnostics.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{chebyshev_diff_matrix, chebyshev_nodes, Fourier};

/// States with `max|f|` at or above this value are rejected.
pub const ADMISSIBILITY_LIMIT: f64 = 0.99;

/// Noise threshold for the marginal parabolicity case.
pub const MARGINAL_TOLERANCE: f64 = 1e-14;

/// Physical constants of the two-fluid system. The density-jump constant
/// `varpi = g (rho_plus - rho_minus)` is always recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluidParams {
    permeability: f64,
    viscosity_minus: f64,
    viscosity_plus: f64,
    density_minus: f64,
    density_plus: f64,
    gravity: f64,
    surface_tension: f64,
}

impl FluidParams {
    pub fn new(
        permeability: f64,
        viscosity_minus: f64,
        viscosity_plus: f64,
        density_minus: f64,
        density_plus: f64,
        gravity: f64,
        surface_tension: f64,
    ) -> Result<Self> {
        let all = [
            permeability,
            viscosity_minus,
            viscosity_plus,
            density_minus,
            density_plus,
            gravity,
            surface_tension,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite value".into()));
        }
        if permeability <= 0.0 {
            return Err(Error::InvalidParams("permeability must be > 0".into()));
        }
        if viscosity_minus <= 0.0 || viscosity_plus <= 0.0 {
            return Err(Error::InvalidParams("viscosities must be > 0".into()));
        }
        if gravity < 0.0 {
            return Err(Error::InvalidParams("gravity must be >= 0".into()));
        }
        if surface_tension < 0.0 {
            return Err(Error::InvalidParams("surface tension must be >= 0".into()));
        }
        Ok(Self {
            permeability,
            viscosity_minus,
            viscosity_plus,
            density_minus,
            density_plus,
            gravity,
            surface_tension,
        })
    }

    /// Parameters with unit gravity and densities chosen so that the density
    /// jump equals `varpi`.
    pub fn with_varpi(
        permeability: f64,
        viscosity_minus: f64,
        viscosity_plus: f64,
        varpi: f64,
        surface_tension: f64,
    ) -> Result<Self> {
        Self::new(
            permeability,
            viscosity_minus,
            viscosity_plus,
            (-varpi).max(0.0),
            varpi.max(0.0),
            1.0,
            surface_tension,
        )
    }

    pub fn with_surface_tension(self, surface_tension: f64) -> Result<Self> {
        Self::new(
            self.permeability,
            self.viscosity_minus,
            self.viscosity_plus,
            self.density_minus,
            self.density_plus,
            self.gravity,
            surface_tension,
        )
    }

    pub fn permeability(&self) -> f64 {
        self.permeability
    }
    pub fn viscosity_minus(&self) -> f64 {
        self.viscosity_minus
    }
    pub fn viscosity_plus(&self) -> f64 {
        self.viscosity_plus
    }
    pub fn density_minus(&self) -> f64 {
        self.density_minus
    }
    pub fn density_plus(&self) -> f64 {
        self.density_plus
    }
    pub fn gravity(&self) -> f64 {
        self.gravity
    }
    pub fn surface_tension(&self) -> f64 {
        self.surface_tension
    }

    /// Density-jump constant `g (rho_plus - rho_minus)`.
    pub fn varpi(&self) -> f64 {
        self.gravity * (self.density_plus - self.density_minus)
    }

    /// `mu_minus / mu_plus`.
    pub fn viscosity_ratio(&self) -> f64 {
        self.viscosity_minus / self.viscosity_plus
    }
}

/// One separable term `A cos(m x) cos(w t + phase)` of a boundary perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTerm {
    pub amplitude: f64,
    #[serde(default)]
    pub mode: u32,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

impl PerturbationTerm {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.amplitude * (self.mode as f64 * x).cos() * (self.frequency * t + self.phase).cos()
    }

    /// `∫_0^t` of the term at a fixed `x`.
    fn time_integral(&self, t: f64, x: f64) -> f64 {
        let space = self.amplitude * (self.mode as f64 * x).cos();
        if self.frequency == 0.0 {
            space * self.phase.cos() * t
        } else {
            space * ((self.frequency * t + self.phase).sin() - self.phase.sin()) / self.frequency
        }
    }
}

/// Dirichlet data `g1` on the bottom wall and flux data `g2` on the top wall,
/// each a mean plus a sum of separable periodic terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryData {
    #[serde(default)]
    pub g1_mean: f64,
    #[serde(default)]
    pub g2_mean: f64,
    #[serde(default)]
    pub g1_perturbation: Vec<PerturbationTerm>,
    #[serde(default)]
    pub g2_perturbation: Vec<PerturbationTerm>,
}

impl BoundaryData {
    pub fn constant(g1: f64, g2: f64) -> Self {
        Self {
            g1_mean: g1,
            g2_mean: g2,
            ..Self::default()
        }
    }

    pub fn g1(&self, t: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&x| self.g1_mean + self.g1_perturbation.iter().map(|p| p.eval(t, x)).sum::<f64>())
            .collect()
    }

    pub fn g2(&self, t: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&x| self.g2_mean + self.g2_perturbation.iter().map(|p| p.eval(t, x)).sum::<f64>())
            .collect()
    }

    /// Spatial mean of `g1(0, ·)`.
    pub fn c1(&self) -> f64 {
        self.g1_mean
            + self
                .g1_perturbation
                .iter()
                .filter(|p| p.mode == 0)
                .map(|p| p.eval(0.0, 0.0))
                .sum::<f64>()
    }

    /// Spatial mean of `g2(0, ·)`.
    pub fn c2(&self) -> f64 {
        self.g2_mean
            + self
                .g2_perturbation
                .iter()
                .filter(|p| p.mode == 0)
                .map(|p| p.eval(0.0, 0.0))
                .sum::<f64>()
    }

    pub fn g1_is_spatially_constant(&self) -> bool {
        self.g1_perturbation
            .iter()
            .all(|p| p.mode == 0 || p.amplitude == 0.0)
    }

    pub fn g2_is_spatially_constant(&self) -> bool {
        self.g2_perturbation
            .iter()
            .all(|p| p.mode == 0 || p.amplitude == 0.0)
    }

    /// `∫_0^t` of the spatial mean of `g2`.
    pub fn g2_mean_integral(&self, t: f64) -> f64 {
        self.g2_mean * t
            + self
                .g2_perturbation
                .iter()
                .filter(|p| p.mode == 0)
                .map(|p| p.time_integral(t, 0.0))
                .sum::<f64>()
    }
}

/// Collocation grid: `2M` uniform nodes in `x` and `N` Chebyshev–Lobatto
/// nodes on each strip. Both strips have unit height and share the vertical
/// differentiation matrices.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    num_modes: usize,
    vertical_nodes: usize,
    x_nodes: Vec<f64>,
    y_plus: Vec<f64>,
    y_minus: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    fourier: Fourier,
}

impl SpectralGrid {
    pub fn new(num_modes: usize, vertical_nodes: usize) -> Result<Self> {
        if num_modes < 2 || !num_modes.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!(
                "num_modes must be an even integer >= 2, got {num_modes}"
            )));
        }
        if vertical_nodes < 8 {
            return Err(Error::InvalidParams(format!(
                "vertical_nodes must be >= 8, got {vertical_nodes}"
            )));
        }
        let n = 2 * num_modes;
        let x_nodes = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let xi = chebyshev_nodes(vertical_nodes);
        let y_plus = xi.iter().map(|&s| 0.5 * (s + 1.0)).collect();
        let y_minus = xi.iter().map(|&s| 0.5 * (s - 1.0)).collect();
        let d1 = chebyshev_diff_matrix(&xi) * 2.0;
        let d2 = &d1 * &d1;
        Ok(Self {
            num_modes,
            vertical_nodes,
            x_nodes,
            y_plus,
            y_minus,
            d1,
            d2,
            fourier: Fourier::new(num_modes),
        })
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }
    pub fn vertical_nodes(&self) -> usize {
        self.vertical_nodes
    }
    /// Number of `x` nodes, `2M`.
    pub fn nx(&self) -> usize {
        2 * self.num_modes
    }
    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }
    pub fn y_plus(&self) -> &[f64] {
        &self.y_plus
    }
    pub fn y_minus(&self) -> &[f64] {
        &self.y_minus
    }
    /// `d/dy` on either strip.
    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }
    /// `d²/dy²` on either strip.
    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }
    pub fn fourier(&self) -> &Fourier {
        &self.fourier
    }

    pub fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.nx() {
            return Err(Error::GridMismatch {
                expected: format!("{} samples of {what}", self.nx()),
                found: len.to_string(),
            });
        }
        Ok(())
    }
}

/// Periodic interface `y = f(x)` held as grid samples together with its
/// Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceState {
    num_modes: usize,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

pub(crate) fn check_admissible(values: &[f64]) -> Result<()> {
    let max_abs = sup_norm(values);
    if !max_abs.is_finite() || max_abs >= ADMISSIBILITY_LIMIT {
        return Err(Error::Inadmissible {
            max_abs,
            limit: ADMISSIBILITY_LIMIT,
        });
    }
    Ok(())
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| {
        if v.is_nan() {
            f64::NAN
        } else {
            m.max(v.abs())
        }
    })
}

impl InterfaceState {
    /// Build from grid samples; rejects inadmissible states.
    pub fn from_values(grid: &SpectralGrid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len(), "interface")?;
        check_admissible(&values)?;
        let coeffs = grid.fourier().forward(&values);
        Ok(Self {
            num_modes: grid.num_modes(),
            values,
            coeffs,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &SpectralGrid, f: F) -> Result<Self> {
        Self::from_values(grid, grid.x_nodes().iter().map(|&x| f(x)).collect())
    }

    /// Build from DFT-ordered coefficients. The samples are the real part of
    /// the synthesis and the stored coefficients are recomputed from them, so
    /// Hermitian symmetry holds to rounding.
    pub fn from_coeffs(grid: &SpectralGrid, coeffs: &[Complex64]) -> Result<Self> {
        grid.check_len(coeffs.len(), "coefficients")?;
        Self::from_values(grid, grid.fourier().inverse(coeffs))
    }

    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self {
            num_modes: grid.num_modes(),
            values: vec![0.0; grid.nx()],
            coeffs: vec![Complex64::new(0.0, 0.0); grid.nx()],
        }
    }

    /// `amplitude · cos(m x)`.
    pub fn cos_mode(grid: &SpectralGrid, m: usize, amplitude: f64) -> Result<Self> {
        Self::from_fn(grid, |x| amplitude * (m as f64 * x).cos())
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// DFT-ordered coefficients.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    /// Coefficient `a_m` for `|m| ≤ M`.
    pub fn coeff(&self, m: i64) -> Complex64 {
        let n = 2 * self.num_modes as i64;
        self.coeffs[m.rem_euclid(n) as usize]
    }
    /// Spatial mean, `a_0`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
    /// Root-mean-square over the grid.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }
    pub fn derivative(&self, grid: &SpectralGrid, order: u32) -> Vec<f64> {
        let f = grid.fourier();
        f.inverse(&f.differentiate_coeffs(&self.coeffs, order))
    }

    /// Trigonometric interpolant at an arbitrary `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let m_max = self.num_modes as i64;
        let mut sum = self.coeffs[0].re;
        for m in 1..m_max {
            let c = self.coeff(m);
            sum += 2.0 * (c * Complex64::from_polar(1.0, m as f64 * x)).re;
        }
        sum + self.coeff(m_max).re * (m_max as f64 * x).cos()
    }
}

/// Parabolicity class of the linearized flat-interface problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Parabolicity {
    WellPosed,
    IllPosed,
    Marginal,
}

/// Surface tension makes the problem parabolic; without it, the sign of
/// `varpi + c2 (mu_minus/mu_plus - 1)` decides.
pub fn classify_parabolicity(params: &FluidParams, c2: f64) -> Parabolicity {
    if params.surface_tension() > 0.0 {
        return Parabolicity::WellPosed;
    }
    let expr = params.varpi() + c2 * (params.viscosity_ratio() - 1.0);
    if expr < -MARGINAL_TOLERANCE {
        Parabolicity::WellPosed
    } else if expr > MARGINAL_TOLERANCE {
        Parabolicity::IllPosed
    } else {
        Parabolicity::Marginal
    }
}

/// Threshold normal velocity `g k (rho_minus - rho_plus) / (mu_plus - mu_minus)`
/// for the lower fluid displacing the upper one without fingering.
pub fn optimal_velocity(params: &FluidParams) -> Result<f64> {
    let dmu = params.viscosity_plus() - params.viscosity_minus();
    if dmu == 0.0 {
        return Err(Error::ThresholdUndefined);
    }
    Ok(params.gravity() * params.permeability() * (params.density_minus() - params.density_plus())
        / dmu)
}

/// Pointwise curvature `f'' / (1 + f'^2)^{3/2}` with spectral derivatives,
/// dealiased.
pub fn curvature(grid: &SpectralGrid, f: &InterfaceState) -> Vec<f64> {
    let d1 = f.derivative(grid, 1);
    let d2 = f.derivative(grid, 2);
    let kappa: Vec<f64> = d1
        .iter()
        .zip(&d2)
        .map(|(&p, &q)| q / (1.0 + p * p).powf(1.5))
        .collect();
    grid.fourier().dealias(&kappa)
}

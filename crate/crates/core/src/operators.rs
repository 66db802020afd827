//! Pulled-back Laplacians `A±(f)`, the boundary operators `B±(f)` and `B(f)`,
//! and the graph diffeomorphisms between the moving domains and the fixed
//! reference strips.
//!
//! With `s = +1` on the upper strip `[0, 1]` and `s = -1` on the lower strip
//! `[-1, 0]`, the map `(x, y) ↦ (x, y + (1 - s y) f(x))` straightens the
//! interface onto `y = 0` while keeping the outer wall fixed. Writing
//! `w = 1 - s y` and `d = 1 - s f`, the pulled-back Laplacian is
//!
//! ```text
//! A(f) = ∂xx - 2 w f'/d ∂xy + (w² f'² + 1)/d² ∂yy - w (d f'' + 2 s f'²)/d² ∂y
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{check_admissible, FluidParams, InterfaceState, SpectralGrid};

/// Which reference strip a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Upper strip `[0, 1]`.
    Plus,
    /// Lower strip `[-1, 0]`.
    Minus,
}

impl Side {
    /// The sign `s` in `1 - s y` and `1 - s f`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    /// Column index of the interface `y = 0`.
    pub fn interface_index(self, n: usize) -> usize {
        match self {
            Side::Plus => 0,
            Side::Minus => n - 1,
        }
    }

    /// Column index of the fixed outer wall.
    pub fn outer_index(self, n: usize) -> usize {
        match self {
            Side::Plus => n - 1,
            Side::Minus => 0,
        }
    }

    pub fn y_nodes(self, grid: &SpectralGrid) -> &[f64] {
        match self {
            Side::Plus => grid.y_plus(),
            Side::Minus => grid.y_minus(),
        }
    }

    fn contains(self, y: f64) -> bool {
        const SLACK: f64 = 1e-14;
        match self {
            Side::Plus => (-SLACK..=1.0 + SLACK).contains(&y),
            Side::Minus => (-1.0 - SLACK..=SLACK).contains(&y),
        }
    }
}

/// Samples of a potential on a reference strip: rows are `x` nodes, columns
/// are `y` nodes (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct StripField {
    side: Side,
    values: DMatrix<f64>,
}

impl StripField {
    pub fn new(grid: &SpectralGrid, side: Side, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != grid.nx() || values.ncols() != grid.vertical_nodes() {
            return Err(Error::GridMismatch {
                expected: format!("{}x{}", grid.nx(), grid.vertical_nodes()),
                found: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("strip field has non-finite values".into()));
        }
        Ok(Self { side, values })
    }

    pub(crate) fn from_matrix(side: Side, values: DMatrix<f64>) -> Self {
        Self { side, values }
    }

    pub fn zeros(grid: &SpectralGrid, side: Side) -> Self {
        Self {
            side,
            values: DMatrix::zeros(grid.nx(), grid.vertical_nodes()),
        }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64>(grid: &SpectralGrid, side: Side, f: F) -> Self {
        let ys = side.y_nodes(grid);
        let xs = grid.x_nodes();
        Self {
            side,
            values: DMatrix::from_fn(grid.nx(), grid.vertical_nodes(), |i, j| f(xs[i], ys[j])),
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Values on the interface `y = 0` (`tr`).
    pub fn trace(&self) -> Vec<f64> {
        let j = self.side.interface_index(self.values.ncols());
        self.values.column(j).iter().copied().collect()
    }

    /// Values on the fixed outer wall (`tr₁` on the upper strip).
    pub fn outer_trace(&self) -> Vec<f64> {
        let j = self.side.outer_index(self.values.ncols());
        self.values.column(j).iter().copied().collect()
    }

    /// `∂y` at every node.
    pub fn dy(&self, grid: &SpectralGrid) -> DMatrix<f64> {
        &self.values * grid.d1().transpose()
    }

    /// `∂x` at every node.
    pub fn dx(&self, grid: &SpectralGrid) -> DMatrix<f64> {
        grid.fourier().differentiate_columns(&self.values, 1)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }
}

/// Pointwise coefficients of `A±(f)` and of the boundary operators.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCoefficients {
    pub side: Side,
    /// Coefficient of `∂xx` (identically one).
    pub xx: DMatrix<f64>,
    pub xy: DMatrix<f64>,
    pub yy: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// `B±(f) = flux_dy · tr ∂y + flux_dx · tr ∂x`, including `k/μ±`.
    pub flux_dy: Vec<f64>,
    pub flux_dx: Vec<f64>,
    /// `B(f) = top_dy · tr₁ ∂y`; only meaningful on the upper strip.
    pub top_dy: Vec<f64>,
}

impl OperatorCoefficients {
    /// Smallest `∂yy` coefficient; positive on admissible interfaces.
    pub fn min_yy(&self) -> f64 {
        self.yy.min()
    }
}

/// Evaluate the operator coefficients from `f`, `f'`, `f''` (spectral).
pub fn assemble_coefficients(
    grid: &SpectralGrid,
    f: &InterfaceState,
    side: Side,
    params: &FluidParams,
) -> Result<OperatorCoefficients> {
    grid.check_len(f.values().len(), "interface")?;
    check_admissible(f.values())?;
    let s = side.sign();
    let f0 = f.values();
    let f1 = f.derivative(grid, 1);
    let f2 = f.derivative(grid, 2);
    let ys = side.y_nodes(grid);
    let (nx, ny) = (grid.nx(), grid.vertical_nodes());

    let mut xy = DMatrix::zeros(nx, ny);
    let mut yy = DMatrix::zeros(nx, ny);
    let mut yc = DMatrix::zeros(nx, ny);
    for i in 0..nx {
        let d = 1.0 - s * f0[i];
        let d2 = d * d;
        for (j, &y) in ys.iter().enumerate() {
            let w = 1.0 - s * y;
            xy[(i, j)] = -2.0 * w * f1[i] / d;
            yy[(i, j)] = (w * w * f1[i] * f1[i] + 1.0) / d2;
            yc[(i, j)] = -w * (d * f2[i] + 2.0 * s * f1[i] * f1[i]) / d2;
        }
    }
    let mobility = match side {
        Side::Plus => params.permeability() / params.viscosity_plus(),
        Side::Minus => params.permeability() / params.viscosity_minus(),
    };
    let flux_dy = (0..nx)
        .map(|i| mobility * (1.0 + f1[i] * f1[i]) / (1.0 - s * f0[i]))
        .collect();
    let flux_dx = f1.iter().map(|&p| -mobility * p).collect();
    let top_dy = match side {
        Side::Plus => f0.iter().map(|&v| 1.0 / (1.0 - v)).collect(),
        Side::Minus => vec![0.0; nx],
    };
    Ok(OperatorCoefficients {
        side,
        xx: DMatrix::from_element(nx, ny, 1.0),
        xy,
        yy,
        y: yc,
        flux_dy,
        flux_dx,
        top_dy,
    })
}

/// Pointwise action of `A±(f)` at every node of the strip.
pub fn apply_a(grid: &SpectralGrid, coeffs: &OperatorCoefficients, v: &StripField) -> Result<StripField> {
    if v.side != coeffs.side {
        return Err(Error::GridMismatch {
            expected: format!("{:?} strip", coeffs.side),
            found: format!("{:?} strip", v.side),
        });
    }
    StripField::new(grid, v.side, v.values.clone())?;
    Ok(StripField::from_matrix(v.side, apply_a_raw(grid, coeffs, &v.values)))
}

pub(crate) fn apply_a_raw(
    grid: &SpectralGrid,
    coeffs: &OperatorCoefficients,
    v: &DMatrix<f64>,
) -> DMatrix<f64> {
    let fourier = grid.fourier();
    let vxx = fourier.differentiate_columns(v, 2);
    let vy = v * grid.d1().transpose();
    let vyy = v * grid.d2().transpose();
    let vxy = fourier.differentiate_columns(&vy, 1);
    let mut out = vxx.component_mul(&coeffs.xx);
    out += vxy.component_mul(&coeffs.xy);
    out += vyy.component_mul(&coeffs.yy);
    out += vy.component_mul(&coeffs.y);
    out
}

/// `B±(f) v` on the interface.
pub fn apply_flux(grid: &SpectralGrid, coeffs: &OperatorCoefficients, v: &StripField) -> Vec<f64> {
    flux_raw(grid, coeffs, &v.values)
}

pub(crate) fn flux_raw(grid: &SpectralGrid, coeffs: &OperatorCoefficients, v: &DMatrix<f64>) -> Vec<f64> {
    let n = grid.vertical_nodes();
    let j = coeffs.side.interface_index(n);
    let trace: Vec<f64> = v.column(j).iter().copied().collect();
    let dx = grid.fourier().derivative(&trace, 1);
    let drow = grid.d1().row(j);
    (0..grid.nx())
        .map(|i| {
            let dy: f64 = (0..n).map(|k| drow[k] * v[(i, k)]).sum();
            coeffs.flux_dy[i] * dy + coeffs.flux_dx[i] * dx[i]
        })
        .collect()
}

/// `B(f) v` on the top wall of the upper strip.
pub fn apply_top_flux(grid: &SpectralGrid, coeffs: &OperatorCoefficients, v: &StripField) -> Vec<f64> {
    top_flux_raw(grid, coeffs, &v.values)
}

pub(crate) fn top_flux_raw(grid: &SpectralGrid, coeffs: &OperatorCoefficients, v: &DMatrix<f64>) -> Vec<f64> {
    let n = grid.vertical_nodes();
    let drow = grid.d1().row(n - 1);
    (0..grid.nx())
        .map(|i| {
            let dy: f64 = (0..n).map(|k| drow[k] * v[(i, k)]).sum();
            coeffs.top_dy[i] * dy
        })
        .collect()
}

/// Direction of the coordinate map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapDirection {
    /// Reference strip to moving domain, `φ_f`.
    Push,
    /// Moving domain to reference strip, `ψ_f = φ_f⁻¹`.
    Pull,
}

/// Apply `φ_f` or its inverse to a single point.
pub fn map_coordinates(
    f: &InterfaceState,
    side: Side,
    direction: MapDirection,
    point: (f64, f64),
) -> Result<(f64, f64)> {
    check_admissible(f.values())?;
    let (x, y) = point;
    let fx = f.eval(x);
    let s = side.sign();
    match direction {
        MapDirection::Push => {
            if !side.contains(y) {
                return Err(Error::InvalidInput(format!(
                    "y = {y} is outside the {side:?} reference strip"
                )));
            }
            Ok((x, y + (1.0 - s * y) * fx))
        }
        MapDirection::Pull => {
            let inside = match side {
                Side::Plus => y >= fx - 1e-14 && y <= 1.0 + 1e-14,
                Side::Minus => y >= -1.0 - 1e-14 && y <= fx + 1e-14,
            };
            if !inside {
                return Err(Error::InvalidInput(format!(
                    "point ({x}, {y}) is outside the {side:?} fluid domain"
                )));
            }
            Ok((x, (y - fx) / (1.0 - s * fx)))
        }
    }
}

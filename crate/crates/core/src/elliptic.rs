//! Mixed boundary value problems on the reference strips, the solution
//! operators `T₁, T₂` (lower strip) and `S₁, S₂, S₃` (upper strip), and the
//! interface operator `G(f) = id - B₊(f) S₁(f) tr T₂(f)`.
//!
//! Each strip problem is collocated on the full `2M × N` grid. The flat
//! operator `L(0)` is diagonal in Fourier modes and is factorized once per
//! `|m|`; it solves the flat problem directly and serves as a left
//! preconditioner for GMRES when `f ≠ 0`.

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresSettings};
use crate::model::{curvature, FluidParams, InterfaceState, SpectralGrid};
use crate::operators::{
    apply_a_raw, assemble_coefficients, flux_raw, top_flux_raw, OperatorCoefficients, Side,
    StripField,
};

/// Tolerances of the elliptic layer.
///
/// Residuals are measured after left preconditioning by `L(0)⁻¹`, relative
/// to the preconditioned right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub g_tolerance: f64,
    /// Residual still accepted when GMRES stagnates.
    pub accept_tolerance: f64,
    pub max_iterations: usize,
    pub g_max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-14,
            g_tolerance: 1e-13,
            accept_tolerance: 1e-9,
            max_iterations: 300,
            g_max_iterations: 200,
            restart: 60,
        }
    }
}

/// Data of one strip problem. On the lower strip the interface carries the
/// flux condition `B₋(f)v = interface` and the bottom wall the Dirichlet
/// value `outer`; on the upper strip the interface carries the Dirichlet
/// value and the top wall the flux condition `B(f)v = outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedBvp {
    pub side: Side,
    /// Right-hand side of `A±(f)v = rhs` at interior nodes; zero if `None`.
    pub interior: Option<DMatrix<f64>>,
    pub interface: Vec<f64>,
    pub outer: Vec<f64>,
}

impl MixedBvp {
    pub fn homogeneous(side: Side, interface: Vec<f64>, outer: Vec<f64>) -> Self {
        Self {
            side,
            interior: None,
            interface,
            outer,
        }
    }
}

/// Operator coefficients of both strips frozen at one interface.
#[derive(Debug, Clone)]
pub struct FrozenOperators {
    f: InterfaceState,
    plus: OperatorCoefficients,
    minus: OperatorCoefficients,
    flat: bool,
}

impl FrozenOperators {
    pub fn interface(&self) -> &InterfaceState {
        &self.f
    }
    pub fn coefficients(&self, side: Side) -> &OperatorCoefficients {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }
    pub fn is_flat(&self) -> bool {
        self.flat
    }
}

/// Per-`|m|` LU factors of the flat collocation operator of one strip.
#[derive(Debug, Clone)]
struct ModeFactors {
    lu: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl ModeFactors {
    fn new(grid: &SpectralGrid, side: Side, flux_scale: f64) -> Result<Self> {
        let n = grid.vertical_nodes();
        let d1 = grid.d1();
        let d2 = grid.d2();
        let mut lu = Vec::with_capacity(grid.num_modes() + 1);
        for m in 0..=grid.num_modes() {
            let mut a = DMatrix::zeros(n, n);
            a[(0, 0)] = 1.0;
            for i in 1..n - 1 {
                for j in 0..n {
                    a[(i, j)] = d2[(i, j)];
                }
                a[(i, i)] -= (m * m) as f64;
            }
            for j in 0..n {
                a[(n - 1, j)] = flux_scale * d1[(n - 1, j)];
            }
            let factor = a.clone().lu();
            let u = factor.u();
            let diag = u.diagonal();
            let (lo, hi) = diag
                .iter()
                .fold((f64::INFINITY, 0.0_f64), |(lo, hi), d| (lo.min(d.abs()), hi.max(d.abs())));
            if lo <= 1e-13 * hi {
                return Err(Error::Singular {
                    context: format!("flat {side:?} strip operator, mode {m}"),
                    condition: hi / lo,
                });
            }
            lu.push(factor);
        }
        Ok(Self { lu })
    }
}

/// Elliptic solver bound to one grid and one set of fluid parameters.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    grid: SpectralGrid,
    params: FluidParams,
    settings: SolverSettings,
    plus: ModeFactors,
    minus: ModeFactors,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

impl EllipticSolver {
    pub fn new(grid: SpectralGrid, params: FluidParams, settings: SolverSettings) -> Result<Self> {
        let mobility_minus = params.permeability() / params.viscosity_minus();
        let plus = ModeFactors::new(&grid, Side::Plus, 1.0)?;
        let minus = ModeFactors::new(&grid, Side::Minus, mobility_minus)?;
        Ok(Self {
            grid,
            params,
            settings,
            plus,
            minus,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn params(&self) -> &FluidParams {
        &self.params
    }
    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    /// Same factorizations with a different surface tension or density jump.
    /// Only `k/μ₋` enters the flat operators, so they are reused.
    pub fn with_params(&self, params: FluidParams) -> Result<Self> {
        let same_flat = params.permeability() == self.params.permeability()
            && params.viscosity_minus() == self.params.viscosity_minus();
        if !same_flat {
            return Self::new(self.grid.clone(), params, self.settings);
        }
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    /// Evaluate the operator coefficients of both strips at `f`.
    pub fn prepare(&self, f: &InterfaceState) -> Result<FrozenOperators> {
        let plus = assemble_coefficients(&self.grid, f, Side::Plus, &self.params)?;
        let minus = assemble_coefficients(&self.grid, f, Side::Minus, &self.params)?;
        Ok(FrozenOperators {
            flat: f.values().iter().all(|&v| v == 0.0),
            f: f.clone(),
            plus,
            minus,
        })
    }

    /// Collocation operator `L(f)`: Dirichlet row at column 0, flux row at
    /// column `N-1`, `A±(f)` in between.
    fn apply_l(&self, coeffs: &OperatorCoefficients, v: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.grid.vertical_nodes();
        let mut out = apply_a_raw(&self.grid, coeffs, v);
        out.set_column(0, &v.column(0));
        let flux = match coeffs.side {
            Side::Minus => flux_raw(&self.grid, coeffs, v),
            Side::Plus => top_flux_raw(&self.grid, coeffs, v),
        };
        out.set_column(n - 1, &DVector::from_vec(flux));
        out
    }

    /// `L(0)⁻¹ r`, mode by mode.
    fn precondition(&self, side: Side, r: &DMatrix<f64>) -> DMatrix<f64> {
        let fourier = self.grid.fourier();
        let factors = match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        };
        let mut hat = fourier.forward_columns(r);
        let n = self.grid.vertical_nodes();
        for k in 0..self.grid.nx() {
            let m = fourier.wavenumber(k).unsigned_abs() as usize;
            let lu = &factors.lu[m];
            let mut re = DVector::from_iterator(n, hat.row(k).iter().map(|c| c.re));
            let mut im = DVector::from_iterator(n, hat.row(k).iter().map(|c| c.im));
            lu.solve_mut(&mut re);
            lu.solve_mut(&mut im);
            for j in 0..n {
                hat[(k, j)] = Complex64::new(re[j], im[j]);
            }
        }
        fourier.inverse_columns(&hat)
    }

    fn rhs_matrix(&self, bvp: &MixedBvp) -> Result<DMatrix<f64>> {
        let grid = &self.grid;
        grid.check_len(bvp.interface.len(), "interface data")?;
        grid.check_len(bvp.outer.len(), "outer boundary data")?;
        let n = grid.vertical_nodes();
        let mut b = match &bvp.interior {
            Some(rhs) => {
                if rhs.nrows() != grid.nx() || rhs.ncols() != n {
                    return Err(Error::GridMismatch {
                        expected: format!("{}x{}", grid.nx(), n),
                        found: format!("{}x{}", rhs.nrows(), rhs.ncols()),
                    });
                }
                rhs.clone()
            }
            None => DMatrix::zeros(grid.nx(), n),
        };
        let (dirichlet, flux) = match bvp.side {
            Side::Minus => (&bvp.outer, &bvp.interface),
            Side::Plus => (&bvp.interface, &bvp.outer),
        };
        b.set_column(0, &DVector::from_column_slice(dirichlet));
        b.set_column(n - 1, &DVector::from_column_slice(flux));
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite boundary data".into()));
        }
        Ok(b)
    }

    /// Solve one mixed boundary value problem at the frozen interface.
    pub fn solve(&self, ops: &FrozenOperators, bvp: &MixedBvp) -> Result<StripField> {
        let b = self.rhs_matrix(bvp)?;
        Ok(StripField::from_matrix(bvp.side, self.solve_raw(ops, bvp.side, &b, "strip problem")?))
    }

    fn solve_raw(
        &self,
        ops: &FrozenOperators,
        side: Side,
        b: &DMatrix<f64>,
        context: &str,
    ) -> Result<DMatrix<f64>> {
        let pb = self.precondition(side, b);
        if ops.flat {
            return Ok(pb);
        }
        let coeffs = ops.coefficients(side);
        let (rows, cols) = pb.shape();
        let apply = |v: &[f64]| -> Vec<f64> {
            let vm = DMatrix::from_column_slice(rows, cols, v);
            self.precondition(side, &self.apply_l(coeffs, &vm))
                .as_slice()
                .to_vec()
        };
        let settings = GmresSettings {
            tolerance: self.settings.tolerance,
            accept: self.settings.accept_tolerance,
            max_iterations: self.settings.max_iterations,
            restart: self.settings.restart,
        };
        let out = gmres(apply, pb.as_slice(), pb.as_slice().to_vec(), &settings);
        if !out.converged {
            return Err(Error::NotConverged {
                context: format!("{context} ({side:?} strip)"),
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        Ok(DMatrix::from_vec(rows, cols, out.solution))
    }

    /// Preconditioned relative residual `‖L⁻¹(0)(L(f)v - b)‖∞ / ‖v‖∞`.
    pub fn residual(&self, ops: &FrozenOperators, bvp: &MixedBvp, v: &StripField) -> Result<f64> {
        let b = self.rhs_matrix(bvp)?;
        let r = self.apply_l(ops.coefficients(bvp.side), v.values()) - b;
        let pr = self.precondition(bvp.side, &r);
        let scale = v.max_abs().max(f64::MIN_POSITIVE);
        Ok(pr.amax() / scale)
    }

    /// `T(f, q, h) = T₁(f)h + T₂(f)q` on the lower strip.
    pub fn solve_t(&self, ops: &FrozenOperators, q: &[f64], h: &[f64]) -> Result<StripField> {
        self.solve(ops, &MixedBvp::homogeneous(Side::Minus, q.to_vec(), h.to_vec()))
    }

    /// `S(f, q, h) = S₁(f)h + S₂(f)q + S₃(f)` on the upper strip, where
    /// `S₃` carries the Dirichlet datum `γκ(f) + ϖf`.
    pub fn solve_s(&self, ops: &FrozenOperators, q: &[f64], h: &[f64]) -> Result<StripField> {
        let datum = self.s3_datum(ops);
        let interface = h.iter().zip(&datum).map(|(a, b)| a + b).collect();
        self.solve(ops, &MixedBvp::homogeneous(Side::Plus, interface, q.to_vec()))
    }

    /// `γκ(f) + ϖf`.
    pub fn s3_datum(&self, ops: &FrozenOperators) -> Vec<f64> {
        let f = &ops.f;
        let gamma = self.params.surface_tension();
        let varpi = self.params.varpi();
        let kappa = if gamma != 0.0 {
            curvature(&self.grid, f)
        } else {
            vec![0.0; self.grid.nx()]
        };
        kappa
            .iter()
            .zip(f.values())
            .map(|(k, v)| gamma * k + varpi * v)
            .collect()
    }

    /// `B₊(f)` applied to an upper-strip field.
    pub fn flux_plus(&self, ops: &FrozenOperators, v: &StripField) -> Vec<f64> {
        flux_raw(&self.grid, &ops.plus, v.values())
    }

    /// `B₋(f)` applied to a lower-strip field.
    pub fn flux_minus(&self, ops: &FrozenOperators, v: &StripField) -> Vec<f64> {
        flux_raw(&self.grid, &ops.minus, v.values())
    }

    /// `tr T₂(f) q`.
    pub fn t2_trace(&self, ops: &FrozenOperators, q: &[f64]) -> Result<Vec<f64>> {
        let zero = vec![0.0; q.len()];
        Ok(self.solve_t(ops, q, &zero)?.trace())
    }

    /// `B₊(f) S₁(f) h`.
    pub fn s1_flux(&self, ops: &FrozenOperators, h: &[f64]) -> Result<Vec<f64>> {
        let zero = vec![0.0; h.len()];
        let v = self.solve(ops, &MixedBvp::homogeneous(Side::Plus, h.to_vec(), zero))?;
        Ok(self.flux_plus(ops, &v))
    }

    /// `G(f) q = q - B₊(f) S₁(f) tr T₂(f) q`.
    pub fn apply_g(&self, ops: &FrozenOperators, q: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(q.len(), "interface function")?;
        let coupled = self.s1_flux(ops, &self.t2_trace(ops, q)?)?;
        Ok(q.iter().zip(&coupled).map(|(a, b)| a - b).collect())
    }

    /// Fourier multiplier of `G(0)`, used as preconditioner.
    fn g_diagonal_inverse(&self, p: &[f64]) -> Vec<f64> {
        let fourier = self.grid.fourier();
        let ratio = self.params.viscosity_ratio();
        let mut c = fourier.forward(p);
        for (k, ck) in c.iter_mut().enumerate() {
            let t = (fourier.wavenumber(k) as f64).tanh();
            *ck /= 1.0 + ratio * t * t;
        }
        fourier.inverse(&c)
    }

    /// Solve `G(f) q = p` by GMRES preconditioned with the diagonal of `G(0)`.
    pub fn invert_g(&self, ops: &FrozenOperators, p: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(p.len(), "interface function")?;
        let pp = self.g_diagonal_inverse(p);
        if max_abs(&pp) == 0.0 {
            return Ok(vec![0.0; p.len()]);
        }
        // GMRES needs an infallible operator; the first inner failure is kept.
        let failure = std::cell::RefCell::new(None);
        let apply = |q: &[f64]| -> Vec<f64> {
            match self.apply_g(ops, q) {
                Ok(gq) => self.g_diagonal_inverse(&gq),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    vec![0.0; q.len()]
                }
            }
        };
        let settings = GmresSettings {
            tolerance: self.settings.g_tolerance,
            accept: self.settings.accept_tolerance,
            max_iterations: self.settings.g_max_iterations,
            restart: self.settings.g_max_iterations,
        };
        let out = gmres(apply, &pp, pp.clone(), &settings);
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        if !out.converged {
            return Err(Error::NotConverged {
                context: "interface operator inversion".into(),
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        Ok(out.solution)
    }
}

/// Flat-interface Fourier multipliers in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Multiplier {
    /// `tr T₂(0)`: `(μ₋/k) tanh(m)/m`, equal to `μ₋/k` at `m = 0`.
    T2Trace,
    /// `B₊(0) S₁(0)`: `-(k/μ₊) m tanh(m)`.
    S1Flux,
    /// `B₊(0) S₁(0) tr T₂(0)`: `-(μ₋/μ₊) tanh²(m)`.
    Coupling,
    /// `G(0)`: `1 + (μ₋/μ₊) tanh²(m)`.
    G,
    /// `∂Φ₁(0)`.
    Phi1Lin,
    /// `∂_f Φ₂(0, 0)` for constant boundary data with mean flux `c2`.
    Phi2Lin,
    /// `∂_f Φ(0, 0)`, the sum of the two previous ones.
    Lambda,
}

impl Multiplier {
    pub const ALL: [Multiplier; 7] = [
        Multiplier::T2Trace,
        Multiplier::S1Flux,
        Multiplier::Coupling,
        Multiplier::G,
        Multiplier::Phi1Lin,
        Multiplier::Phi2Lin,
        Multiplier::Lambda,
    ];
}

/// Closed-form value of a flat multiplier at wavenumber `m`.
pub fn flat_multiplier_oracle(name: Multiplier, m: i64, params: &FluidParams, c2: f64) -> f64 {
    let k = params.permeability();
    let mu_p = params.viscosity_plus();
    let mu_m = params.viscosity_minus();
    let am = m.unsigned_abs() as f64;
    let t = am.tanh();
    let denom = mu_p + mu_m * t * t;
    match name {
        Multiplier::T2Trace => {
            if m == 0 {
                mu_m / k
            } else {
                mu_m / k * t / am
            }
        }
        Multiplier::S1Flux => -k / mu_p * am * t,
        Multiplier::Coupling => -mu_m / mu_p * t * t,
        Multiplier::G => 1.0 + mu_m / mu_p * t * t,
        Multiplier::Phi1Lin => {
            k * am * t * (params.varpi() - params.surface_tension() * am * am) / denom
        }
        Multiplier::Phi2Lin => (mu_m / mu_p - 1.0) * k * am * t * c2 / denom,
        Multiplier::Lambda => {
            flat_multiplier_oracle(Multiplier::Phi1Lin, m, params, c2)
                + flat_multiplier_oracle(Multiplier::Phi2Lin, m, params, c2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solver(m: usize, n: usize, params: FluidParams) -> EllipticSolver {
        EllipticSolver::new(SpectralGrid::new(m, n).unwrap(), params, SolverSettings::default()).unwrap()
    }

    fn params() -> FluidParams {
        FluidParams::with_varpi(1.0, 2.0, 1.0, -0.5, 0.1).unwrap()
    }

    fn cos_mode(grid: &SpectralGrid, m: f64) -> Vec<f64> {
        grid.x_nodes().iter().map(|&x| (m * x).cos()).collect()
    }

    fn mode_coefficient(grid: &SpectralGrid, v: &[f64], m: i64) -> f64 {
        2.0 * grid.fourier().forward(v)[grid.fourier().slot(m)].re
    }

    #[test]
    fn flat_t_solutions() {
        let s = solver(16, 24, params());
        let ops = s.prepare(&InterfaceState::zeros(s.grid())).unwrap();
        let nx = s.grid().nx();
        let c = 0.7;
        let v = s.solve_t(&ops, &vec![c; nx], &vec![0.0; nx]).unwrap();
        let exact = StripField::from_fn(s.grid(), Side::Minus, |_, y| 2.0 * c * (1.0 + y));
        assert!((v.values() - exact.values()).amax() < 1e-12);

        let v = s.solve_t(&ops, &vec![0.0; nx], &vec![c; nx]).unwrap();
        assert!(v.values().iter().all(|&a| (a - c).abs() < 1e-12));

        let tr = s.t2_trace(&ops, &cos_mode(s.grid(), 2.0)).unwrap();
        let got = mode_coefficient(s.grid(), &tr, 2);
        assert_relative_eq!(got, 2.0 * 0.4820137900, max_relative = 1e-9);
    }

    #[test]
    fn flat_s_solutions() {
        let p = FluidParams::with_varpi(1.0, 2.0, 1.0, 0.3, 0.2).unwrap();
        let s = solver(16, 24, p);
        let ops = s.prepare(&InterfaceState::zeros(s.grid())).unwrap();
        let nx = s.grid().nx();
        assert!(s.s3_datum(&ops).iter().all(|&d| d == 0.0));
        let v = s.solve_s(&ops, &vec![0.0; nx], &vec![0.0; nx]).unwrap();
        assert_eq!(v.max_abs(), 0.0);

        let m = 3.0;
        let v = s.solve_s(&ops, &vec![0.0; nx], &cos_mode(s.grid(), m)).unwrap();
        let exact = StripField::from_fn(s.grid(), Side::Plus, |x, y| {
            (m * (1.0 - y)).cosh() / m.cosh() * (m * x).cos()
        });
        assert!((v.values() - exact.values()).amax() < 1e-12);

        let v = s.solve_s(&ops, &vec![1.3; nx], &vec![0.0; nx]).unwrap();
        let exact = StripField::from_fn(s.grid(), Side::Plus, |_, y| 1.3 * y);
        assert!((v.values() - exact.values()).amax() < 1e-12);
    }

    #[test]
    fn flat_g_multiplier() {
        let s = solver(16, 24, params());
        let ops = s.prepare(&InterfaceState::zeros(s.grid())).unwrap();
        let q = cos_mode(s.grid(), 1.0);
        let gq = s.apply_g(&ops, &q).unwrap();
        let t1 = 1.0_f64.tanh();
        assert_relative_eq!(mode_coefficient(s.grid(), &gq, 1), 1.0 + 2.0 * t1 * t1, max_relative = 1e-12);
        assert_relative_eq!(1.0 + 2.0 * t1 * t1, 2.160051, max_relative = 1e-6);
        let c = vec![0.4; s.grid().nx()];
        let gc = s.apply_g(&ops, &c).unwrap();
        assert!(gc.iter().all(|&v| (v - 0.4).abs() < 1e-12));

        let p = cos_mode(s.grid(), 3.0);
        let q = s.invert_g(&ops, &p).unwrap();
        let expect = 1.0 / flat_multiplier_oracle(Multiplier::G, 3, s.params(), 0.0);
        assert_relative_eq!(mode_coefficient(s.grid(), &q, 3), expect, max_relative = 1e-10);
        assert!(q.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn curved_solve_has_small_residual_and_is_linear() {
        let s = solver(16, 24, params());
        let f = InterfaceState::from_fn(s.grid(), |x| 0.3 * x.cos() + 0.1 * (2.0 * x).sin()).unwrap();
        let ops = s.prepare(&f).unwrap();
        let q = cos_mode(s.grid(), 2.0);
        let h: Vec<f64> = s.grid().x_nodes().iter().map(|&x| 0.5 + x.sin()).collect();
        let bvp = MixedBvp::homogeneous(Side::Minus, q.clone(), h.clone());
        let v = s.solve(&ops, &bvp).unwrap();
        assert!(s.residual(&ops, &bvp, &v).unwrap() < 1e-10);

        let zero = vec![0.0; q.len()];
        let v1 = s.solve_t(&ops, &zero, &h).unwrap();
        let v2 = s.solve_t(&ops, &q, &zero).unwrap();
        let sum = v1.values() + v2.values();
        assert!((sum - v.values()).amax() < 1e-11);

        // constants are reproduced by T₁ and S₁ for any f
        let c = vec![0.8; q.len()];
        let t1 = s.solve_t(&ops, &zero, &c).unwrap();
        assert!(t1.values().iter().all(|&a| (a - 0.8).abs() < 1e-11));
        let s1 = s.solve(&ops, &MixedBvp::homogeneous(Side::Plus, c, zero)).unwrap();
        assert!(s1.values().iter().all(|&a| (a - 0.8).abs() < 1e-11));
    }

    #[test]
    fn curved_solution_is_pullback_of_harmonic_function() {
        // u = cos(2X) cosh(2(Y+1)) solves Δu = 0 with u = cos(2X) on the bottom
        let s = solver(32, 28, params());
        let f = InterfaceState::from_fn(s.grid(), |x| 0.2 * x.cos()).unwrap();
        let ops = s.prepare(&f).unwrap();
        let exact = StripField::from_fn(s.grid(), Side::Minus, |x, y| {
            let yy = y + (1.0 + y) * f.eval(x);
            (2.0 * x).cos() * (2.0 * (yy + 1.0)).cosh()
        });
        let q = s.flux_minus(&ops, &exact);
        let h = cos_mode(s.grid(), 2.0);
        let v = s.solve_t(&ops, &q, &h).unwrap();
        assert!((v.values() - exact.values()).amax() < 1e-9);
    }

    #[test]
    fn invert_g_round_trip_on_curved_interface() {
        let s = solver(16, 24, params());
        let f = InterfaceState::from_fn(s.grid(), |x| 0.25 * x.cos() - 0.1 * (3.0 * x).cos()).unwrap();
        let ops = s.prepare(&f).unwrap();
        let q: Vec<f64> = s.grid().x_nodes().iter().map(|&x| x.sin() + 0.3 * (2.0 * x).cos()).collect();
        let p = s.apply_g(&ops, &q).unwrap();
        let back = s.invert_g(&ops, &p).unwrap();
        let err = back.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn oracle_values() {
        let p = FluidParams::with_varpi(1.0, 1.0, 1.0, -1.0, 0.0).unwrap();
        assert_relative_eq!(
            flat_multiplier_oracle(Multiplier::Lambda, 1, &p, 0.0),
            -0.4820138,
            max_relative = 1e-6
        );
        assert_eq!(flat_multiplier_oracle(Multiplier::Lambda, 0, &p, 0.0), 0.0);
        assert_eq!(flat_multiplier_oracle(Multiplier::G, 0, &p, 0.0), 1.0);
    }
}

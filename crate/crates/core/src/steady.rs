//! Steady fingers: even zero-mean solutions of
//! `γ f''/(1+f'²)^{3/2} + ϖ f = const`, their bifurcation from the flat
//! branch at `γ̄_l = ϖ/l²`, and pseudo-arclength continuation in `γ`.
//!
//! Differentiating removes the constant and gives the odd residual
//!
//! ```text
//! Υ(γ, f) = γ f'''/(1+f'²)^{3/2} - 3γ f' f''²/(1+f'²)^{5/2} + ϖ f'
//! ```
//!
//! The continuation solves the equivalent compact form `F(γ, f) = f + A⁻¹ g`
//! with `A = d³/dx³` and `g = -3f'f''²/(1+f'²) + (ϖ/γ) f'(1+f'²)^{3/2}`.
//! On the cosine/sine pairing `A⁻¹ sin(mx) = cos(mx)/m³`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::Evolution;
use crate::linear::{even_linearization, lambda_gamma_derivative};
use crate::model::{check_admissible, InterfaceState, SpectralGrid, ADMISSIBILITY_LIMIT};

/// Discretized steady problem on the cosine modes `1..=K`, `K = 2M/3`.
#[derive(Debug, Clone)]
pub struct SteadyProblem {
    grid: SpectralGrid,
    varpi: f64,
    num_coeffs: usize,
}

impl SteadyProblem {
    pub fn new(grid: SpectralGrid, varpi: f64) -> Result<Self> {
        if !(varpi > 0.0 && varpi.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "steady fingers need a positive density jump, got {varpi}"
            )));
        }
        let num_coeffs = grid.fourier().dealias_cutoff();
        Ok(Self {
            grid,
            varpi,
            num_coeffs,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }
    pub fn varpi(&self) -> f64 {
        self.varpi
    }
    /// Number of cosine coefficients `K`.
    pub fn num_coeffs(&self) -> usize {
        self.num_coeffs
    }

    fn check(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.num_coeffs {
            return Err(Error::GridMismatch {
                expected: format!("{} cosine coefficients", self.num_coeffs),
                found: coeffs.len().to_string(),
            });
        }
        Ok(())
    }

    /// Grid samples of `Σ a_j cos(jx)`.
    pub fn values(&self, coeffs: &[f64]) -> Vec<f64> {
        let fourier = self.grid.fourier();
        let mut c = vec![Complex64::new(0.0, 0.0); fourier.len()];
        for (j, &a) in coeffs.iter().enumerate() {
            let m = j as i64 + 1;
            c[fourier.slot(m)] += 0.5 * a;
            c[fourier.slot(-m)] += 0.5 * a;
        }
        fourier.inverse(&c)
    }

    pub fn interface(&self, coeffs: &[f64]) -> Result<InterfaceState> {
        self.check(coeffs)?;
        InterfaceState::from_values(&self.grid, self.values(coeffs))
    }

    /// Sine coefficients `b_m`, `1 ≤ m ≤ K`, of `v = Σ b_m sin(mx)`.
    fn sine_coeffs(&self, v: &[f64]) -> Vec<f64> {
        let fourier = self.grid.fourier();
        let c = fourier.forward(v);
        (1..=self.num_coeffs as i64)
            .map(|m| -2.0 * c[fourier.slot(m)].im)
            .collect()
    }

    fn derivatives(&self, coeffs: &[f64]) -> Result<[Vec<f64>; 3]> {
        self.check(coeffs)?;
        let values = self.values(coeffs);
        check_admissible(&values)?;
        let fourier = self.grid.fourier();
        let c = fourier.forward(&values);
        let d = |order| fourier.inverse(&fourier.differentiate_coeffs(&c, order));
        Ok([d(1), d(2), d(3)])
    }

    /// `Υ(γ, f)` projected on `sin(mx)`, `1 ≤ m ≤ K`.
    pub fn upsilon_residual(&self, gamma: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        let [d1, d2, d3] = self.derivatives(coeffs)?;
        let varpi = self.varpi;
        let v: Vec<f64> = (0..d1.len())
            .map(|i| {
                let w = 1.0 + d1[i] * d1[i];
                gamma * d3[i] / w.powf(1.5) - 3.0 * gamma * d1[i] * d2[i] * d2[i] / w.powf(2.5)
                    + varpi * d1[i]
            })
            .collect();
        Ok(self.sine_coeffs(&v))
    }

    /// `F(γ, f)` on the cosine modes. Rejects `γ ≤ 0`.
    pub fn f_residual(&self, gamma: f64, coeffs: &[f64]) -> Result<Vec<f64>> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("surface tension must be positive, got {gamma}")));
        }
        let [d1, d2, _] = self.derivatives(coeffs)?;
        let ratio = self.varpi / gamma;
        let g: Vec<f64> = (0..d1.len())
            .map(|i| {
                let w = 1.0 + d1[i] * d1[i];
                -3.0 * d1[i] * d2[i] * d2[i] / w + ratio * d1[i] * w.powf(1.5)
            })
            .collect();
        let gs = self.sine_coeffs(&g);
        Ok(coeffs
            .iter()
            .zip(&gs)
            .enumerate()
            .map(|(j, (&a, &b))| a + b / ((j + 1) as f64).powi(3))
            .collect())
    }

    /// Cosine-`l` coefficient of `∂_f F(γ, 0) cos(lx)`, evaluated through the
    /// discrete operators (spectral `d/dx`, then `A⁻¹`).
    pub fn f_linear_multiplier(&self, gamma: f64, l: usize) -> Result<f64> {
        if l == 0 || l > self.num_coeffs {
            return Err(Error::InvalidInput(format!("mode {l} outside 1..={}", self.num_coeffs)));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParams(format!("surface tension must be positive, got {gamma}")));
        }
        let mut e = vec![0.0; self.num_coeffs];
        e[l - 1] = 1.0;
        let h = self.values(&e);
        let dh = self.grid.fourier().derivative(&h, 1);
        let g: Vec<f64> = dh.iter().map(|d| self.varpi / gamma * d).collect();
        Ok(1.0 + self.sine_coeffs(&g)[l - 1] / (l as f64).powi(3))
    }

    /// Max-norm of `F` and of `Υ`.
    pub fn residual_norms(&self, gamma: f64, coeffs: &[f64]) -> Result<(f64, f64)> {
        let norm = |v: Vec<f64>| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        Ok((
            norm(self.f_residual(gamma, coeffs)?),
            norm(self.upsilon_residual(gamma, coeffs)?),
        ))
    }

    /// Central-difference Jacobian of `F` with respect to `(a_1..a_K, γ)`.
    fn jacobian(&self, gamma: f64, coeffs: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.num_coeffs;
        let h = 1e-6;
        let mut jac = DMatrix::zeros(k, k + 1);
        let mut a = coeffs.to_vec();
        for j in 0..k {
            a[j] = coeffs[j] + h;
            let p = self.f_residual(gamma, &a)?;
            a[j] = coeffs[j] - h;
            let m = self.f_residual(gamma, &a)?;
            a[j] = coeffs[j];
            for i in 0..k {
                jac[(i, j)] = (p[i] - m[i]) / (2.0 * h);
            }
        }
        let hg = h * gamma.max(1e-3);
        let p = self.f_residual(gamma + hg, coeffs)?;
        let m = self.f_residual(gamma - hg, coeffs)?;
        for i in 0..k {
            jac[(i, k)] = (p[i] - m[i]) / (2.0 * hg);
        }
        Ok(jac)
    }
}

/// A detected bifurcation point on the flat branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationPoint {
    pub l: usize,
    /// Closed form `ϖ/l²`.
    pub gamma: f64,
    /// Final bisection bracket of the sign change of the `l`-th multiplier.
    pub bracket: (f64, f64),
}

/// `γ̄_l = ϖ/l²` for `1 ≤ l ≤ l_max`, each confirmed by bisecting the sign
/// change of the discrete `F`-linearization multiplier on
/// `[ϖ/(l+½)², ϖ/(l-½)²]` down to width `1e-12`.
pub fn detect_bifurcation_points(problem: &SteadyProblem, l_max: usize) -> Result<Vec<BifurcationPoint>> {
    let varpi = problem.varpi();
    (1..=l_max)
        .map(|l| {
            let lf = l as f64;
            let mut lo = varpi / (lf + 0.5).powi(2);
            let mut hi = varpi / (lf - 0.5).powi(2);
            let f_lo = problem.f_linear_multiplier(lo, l)?;
            let f_hi = problem.f_linear_multiplier(hi, l)?;
            if f_lo.signum() == f_hi.signum() {
                return Err(Error::InvalidInput(format!("no sign change of multiplier {l}")));
            }
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let f_mid = problem.f_linear_multiplier(mid, l)?;
                if f_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if f_mid.signum() == f_lo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(BifurcationPoint {
                l,
                gamma: varpi / (lf * lf),
                bracket: (lo, hi),
            })
        })
        .collect()
}

/// Step control of the pseudo-arclength continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSettings {
    /// Amplitude of the first point, fixed while it is corrected.
    pub eps0: f64,
    pub ds_initial: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Halving below this arclength ends the branch.
    pub ds_abort: f64,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
    pub max_points: usize,
    /// Stop once `|ε|` exceeds this.
    pub eps_max: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            eps0: 1e-3,
            ds_initial: 1e-3,
            ds_min: 1e-4,
            ds_max: 5e-2,
            ds_abort: 1e-8,
            newton_tolerance: 1e-10,
            newton_max_iterations: 25,
            max_points: 200,
            eps_max: 0.5,
        }
    }
}

/// One corrected point of a branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint {
    pub gamma: f64,
    /// Cosine coefficients `a_1..a_K`.
    pub coeffs: Vec<f64>,
    /// Coefficient of `cos(lx)`.
    pub epsilon: f64,
    pub sup_norm: f64,
    /// Max-norm of `F` at the point.
    pub residual: f64,
    /// `dγ/dε` from the branch tangent.
    pub dgamma_deps: f64,
    /// Eigenvalues of the evolution linearization on the even subspace,
    /// sorted by decreasing real part; empty until computed.
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum BranchStatus {
    MaxPoints,
    EpsilonLimit,
    /// The next point would leave the admissible set.
    Inadmissible,
    /// Newton failed even after halving the step below `ds_abort`.
    NewtonFailure { ds: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub l: usize,
    pub varpi: f64,
    pub points: Vec<BranchPoint>,
    pub status: BranchStatus,
}

struct Newton {
    x: DVector<f64>,
    iterations: usize,
    residual: f64,
}

fn split(x: &DVector<f64>) -> (Vec<f64>, f64) {
    let k = x.len() - 1;
    (x.rows(0, k).iter().copied().collect(), x[k])
}

/// Newton on `F = 0` with the `l`-th coefficient frozen.
fn correct_fixed_amplitude(
    problem: &SteadyProblem,
    l: usize,
    mut x: DVector<f64>,
    settings: &ContinuationSettings,
) -> Result<Newton> {
    let k = problem.num_coeffs();
    for it in 0..=settings.newton_max_iterations {
        let (a, gamma) = split(&x);
        let r = DVector::from_vec(problem.f_residual(gamma, &a)?);
        let rn = r.amax();
        if rn <= settings.newton_tolerance {
            return Ok(Newton {
                x,
                iterations: it,
                residual: rn,
            });
        }
        if it == settings.newton_max_iterations {
            break;
        }
        let jac = problem.jacobian(gamma, &a)?;
        // unknowns: every column except the frozen amplitude
        let cols: Vec<usize> = (0..=k).filter(|&j| j != l - 1).collect();
        let sub = DMatrix::from_fn(k, k, |i, j| jac[(i, cols[j])]);
        let dx = sub.lu().solve(&(-&r)).ok_or_else(|| Error::Singular {
            context: "first branch point".into(),
            condition: f64::INFINITY,
        })?;
        for (j, &c) in cols.iter().enumerate() {
            x[c] += dx[j];
        }
    }
    Err(Error::NotConverged {
        context: "first branch point".into(),
        iterations: settings.newton_max_iterations,
        residual: f64::NAN,
    })
}

/// Pseudo-arclength corrector from the predictor `x`.
fn correct_arclength(
    problem: &SteadyProblem,
    mut x: DVector<f64>,
    anchor: &DVector<f64>,
    tangent: &DVector<f64>,
    ds: f64,
    settings: &ContinuationSettings,
) -> Result<Newton> {
    let k = problem.num_coeffs();
    for it in 0..=settings.newton_max_iterations {
        let (a, gamma) = split(&x);
        let r = DVector::from_vec(problem.f_residual(gamma, &a)?);
        let arc = tangent.dot(&(&x - anchor)) - ds;
        let rn = r.amax().max(arc.abs());
        if rn <= settings.newton_tolerance {
            return Ok(Newton {
                x,
                iterations: it,
                residual: r.amax(),
            });
        }
        if it == settings.newton_max_iterations || !rn.is_finite() {
            break;
        }
        let jac = problem.jacobian(gamma, &a)?;
        let mut aug = DMatrix::zeros(k + 1, k + 1);
        aug.view_mut((0, 0), (k, k + 1)).copy_from(&jac);
        aug.row_mut(k).copy_from(&tangent.transpose());
        let mut rhs = DVector::zeros(k + 1);
        rhs.rows_mut(0, k).copy_from(&(-&r));
        rhs[k] = -arc;
        let dx = aug.lu().solve(&rhs).ok_or_else(|| Error::Singular {
            context: "arclength corrector".into(),
            condition: f64::INFINITY,
        })?;
        x += dx;
    }
    Err(Error::NotConverged {
        context: "arclength corrector".into(),
        iterations: settings.newton_max_iterations,
        residual: f64::NAN,
    })
}

/// Unit tangent: kernel of the `K × (K+1)` Jacobian, oriented along `reference`.
fn tangent(problem: &SteadyProblem, x: &DVector<f64>, reference: &DVector<f64>) -> Result<DVector<f64>> {
    let k = problem.num_coeffs();
    let (a, gamma) = split(x);
    let jac = problem.jacobian(gamma, &a)?;
    let mut aug = DMatrix::zeros(k + 1, k + 1);
    aug.view_mut((0, 0), (k, k + 1)).copy_from(&jac);
    aug.row_mut(k).copy_from(&reference.transpose());
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let t = aug.lu().solve(&rhs).ok_or_else(|| Error::Singular {
        context: "branch tangent".into(),
        condition: f64::INFINITY,
    })?;
    let t = t.normalize();
    Ok(if t.dot(reference) < 0.0 { -t } else { t })
}

fn make_point(problem: &SteadyProblem, l: usize, x: &DVector<f64>, t: &DVector<f64>, residual: f64) -> BranchPoint {
    let k = problem.num_coeffs();
    let (coeffs, gamma) = split(x);
    let sup_norm = problem.values(&coeffs).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    BranchPoint {
        gamma,
        epsilon: coeffs[l - 1],
        sup_norm,
        residual,
        dgamma_deps: t[k] / t[l - 1],
        coeffs,
        eigenvalues: Vec::new(),
    }
}

/// Trace the branch bifurcating at `γ̄_l` towards increasing `ε`.
pub fn continue_branch(problem: &SteadyProblem, l: usize, settings: &ContinuationSettings) -> Result<Branch> {
    let k = problem.num_coeffs();
    if l == 0 || 4 * l > problem.grid().num_modes() {
        return Err(Error::InvalidInput(format!(
            "branch index must lie in 1..={}, got {l}",
            problem.grid().num_modes() / 4
        )));
    }
    let varpi = problem.varpi();
    let eps0 = settings.eps0;
    let gamma_bar = varpi / (l * l) as f64;

    let mut x = DVector::zeros(k + 1);
    x[l - 1] = eps0;
    x[k] = gamma_bar + 0.375 * varpi * eps0 * eps0;
    let first = correct_fixed_amplitude(problem, l, x, settings)?;
    let mut x = first.x;
    let mut direction = DVector::zeros(k + 1);
    direction[l - 1] = 1.0;
    let mut t = tangent(problem, &x, &direction)?;
    let mut points = vec![make_point(problem, l, &x, &t, first.residual)];

    let mut ds = settings.ds_initial.clamp(settings.ds_min, settings.ds_max);
    let status = loop {
        if points.len() >= settings.max_points {
            break BranchStatus::MaxPoints;
        }
        if points.last().is_some_and(|p| p.epsilon.abs() >= settings.eps_max) {
            break BranchStatus::EpsilonLimit;
        }
        let predictor = &x + &t * ds;
        let attempt = correct_arclength(problem, predictor, &x, &t, ds, settings);
        match attempt {
            Ok(newton) => {
                let (coeffs, _) = split(&newton.x);
                let sup = problem.values(&coeffs).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if sup >= ADMISSIBILITY_LIMIT {
                    break BranchStatus::Inadmissible;
                }
                let t_new = tangent(problem, &newton.x, &t)?;
                x = newton.x;
                t = t_new;
                points.push(make_point(problem, l, &x, &t, newton.residual));
                if newton.iterations <= 3 {
                    ds = (ds * 1.5).min(settings.ds_max);
                }
            }
            Err(Error::Inadmissible { .. }) => break BranchStatus::Inadmissible,
            Err(Error::NotConverged { .. }) | Err(Error::Singular { .. }) => {
                ds *= 0.5;
                if ds < settings.ds_abort {
                    break BranchStatus::NewtonFailure { ds };
                }
            }
            Err(e) => return Err(e),
        }
    };
    Ok(Branch {
        l,
        varpi,
        points,
        status,
    })
}

impl Branch {
    /// Least-squares fit `γ = c₀ + c₂ ε² + c₄ ε⁴` over points with
    /// `ε ∈ [lo, hi]`; returns `(c₀, c₂, c₄)`.
    pub fn fit_gamma_expansion(&self, lo: f64, hi: f64) -> Result<(f64, f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.epsilon.abs() >= lo && p.epsilon.abs() <= hi)
            .map(|p| (p.epsilon, p.gamma))
            .collect();
        if pts.len() < 4 {
            return Err(Error::FitRejected(format!(
                "only {} branch points with ε in [{lo}, {hi}]",
                pts.len()
            )));
        }
        let a = DMatrix::from_fn(pts.len(), 3, |i, j| pts[i].0.powi(2 * j as i32));
        let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
        let sol = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * b))
            .ok_or_else(|| Error::FitRejected("singular normal equations".into()))?;
        Ok((sol[0], sol[1], sol[2]))
    }

    /// Mirror image `(γ, -f)` of a point.
    pub fn reflect(point: &BranchPoint) -> BranchPoint {
        BranchPoint {
            coeffs: point.coeffs.iter().map(|a| -a).collect(),
            epsilon: -point.epsilon,
            dgamma_deps: -point.dgamma_deps,
            ..point.clone()
        }
    }
}

/// Settings for eigenvalues along a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSettings {
    /// Cosine modes kept in the linearization.
    pub modes: usize,
    pub eps: f64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self { modes: 16, eps: 1e-6 }
    }
}

/// Eigenvalues of the even linearization of `Φ` at a branch point, with the
/// surface tension of the point. `evolution` supplies every other parameter.
pub fn branch_point_eigenvalues(
    problem: &SteadyProblem,
    evolution: &Evolution,
    point: &BranchPoint,
    settings: &EigenSettings,
) -> Result<Vec<Complex64>> {
    let params = evolution.params().with_surface_tension(point.gamma)?;
    let evo = evolution.with_params(params)?;
    let f = problem.interface(&point.coeffs)?;
    let jac = even_linearization(&evo, &f, settings.modes, settings.eps)?;
    let mut eig: Vec<Complex64> = jac.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(eig)
}

/// Stability data of one branch point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEntry {
    pub epsilon: f64,
    pub gamma: f64,
    pub leading: f64,
    /// Eigenvalue closest to zero (the critical one for `l = 1`).
    pub critical: f64,
    /// `-ε γ'(ε) λ'(γ̄₁) / μ(ε)` for `l = 1`.
    pub exchange_ratio: Option<f64>,
}

/// Leading eigenvalues and, for `l = 1`, the exchange-of-stability ratio.
/// Points without eigenvalues are skipped.
pub fn branch_stability(branch: &Branch, evolution: &Evolution) -> Vec<StabilityEntry> {
    let slope = lambda_gamma_derivative(evolution.params(), 1);
    branch
        .points
        .iter()
        .filter(|p| !p.eigenvalues.is_empty())
        .map(|p| {
            let leading = p.eigenvalues[0].re;
            let critical = p
                .eigenvalues
                .iter()
                .min_by(|a, b| a.norm().total_cmp(&b.norm()))
                .map(|c| c.re)
                .unwrap_or(f64::NAN);
            let exchange_ratio = (branch.l == 1).then(|| -p.epsilon * p.dgamma_deps * slope / critical);
            StabilityEntry {
                epsilon: p.epsilon,
                gamma: p.gamma,
                leading,
                critical,
                exchange_ratio,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(varpi: f64) -> SteadyProblem {
        SteadyProblem::new(SpectralGrid::new(32, 8).unwrap(), varpi).unwrap()
    }

    #[test]
    fn residuals_vanish_at_flat_state() {
        let p = problem(1.0);
        let zero = vec![0.0; p.num_coeffs()];
        assert!(p.upsilon_residual(0.7, &zero).unwrap().iter().all(|&v| v == 0.0));
        assert!(p.f_residual(0.7, &zero).unwrap().iter().all(|&v| v == 0.0));
        assert!(p.f_residual(0.0, &zero).is_err());
        assert!(SteadyProblem::new(SpectralGrid::new(8, 8).unwrap(), 0.0).is_err());
    }

    #[test]
    fn upsilon_linearization() {
        let p = problem(1.0);
        let (gamma, l, eps) = (0.3, 3, 1e-7);
        let mut a = vec![0.0; p.num_coeffs()];
        a[l - 1] = eps;
        let r = p.upsilon_residual(gamma, &a).unwrap();
        let lf = l as f64;
        assert_relative_eq!(r[l - 1] / eps, gamma * lf.powi(3) - lf, max_relative = 1e-9);
    }

    #[test]
    fn residuals_are_odd_in_f() {
        let p = problem(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..p.num_coeffs())
            .map(|j| if j < 6 { rng.gen_range(-0.05..0.05) } else { 0.0 })
            .collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let u = p.upsilon_residual(0.4, &a).unwrap();
        let un = p.upsilon_residual(0.4, &neg).unwrap();
        let f = p.f_residual(0.4, &a).unwrap();
        let fnn = p.f_residual(0.4, &neg).unwrap();
        for i in 0..u.len() {
            assert!((u[i] + un[i]).abs() < 1e-14);
            assert!((f[i] + fnn[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn multiplier_and_bifurcation_points() {
        let p = problem(1.0);
        assert_relative_eq!(p.f_linear_multiplier(0.5, 2).unwrap(), 1.0 - 1.0 / 2.0, max_relative = 1e-13);
        let pts = detect_bifurcation_points(&p, 4).unwrap();
        let expect = [1.0, 0.25, 1.0 / 9.0, 1.0 / 16.0];
        for (bp, e) in pts.iter().zip(expect) {
            assert!(bp.bracket.0 <= e + 1e-15 && e - 1e-15 <= bp.bracket.1);
            assert!(bp.bracket.1 - bp.bracket.0 <= 1e-12);
        }
        let p4 = problem(4.0);
        assert_eq!(detect_bifurcation_points(&p4, 2).unwrap()[1].gamma, 1.0);
        for l in 1..=5 {
            assert!(p.f_linear_multiplier(0.37, l).unwrap().abs() > 1e-3);
        }
    }

    #[test]
    fn branch_onset_and_harmonic_scaling() {
        let p = problem(1.0);
        let settings = ContinuationSettings {
            ds_max: 0.01,
            eps_max: 0.08,
            ..ContinuationSettings::default()
        };
        let b1 = continue_branch(&p, 1, &settings).unwrap();
        let first = &b1.points[0];
        assert_relative_eq!(first.gamma - 1.0, 0.375 * 1e-6, max_relative = 1e-3);
        assert_eq!(b1.status, BranchStatus::EpsilonLimit);
        for pt in &b1.points {
            assert!(pt.residual <= 1e-9);
            let (_, ups) = p.residual_norms(pt.gamma, &pt.coeffs).unwrap();
            assert!(ups <= 1e-8, "{ups}");
            let r = Branch::reflect(pt);
            assert!(p.residual_norms(r.gamma, &r.coeffs).unwrap().0 <= 1e-9);
        }
        // γ_2(ε) = γ_1(2ε)/4: compare against the l = 2 branch
        let tight = ContinuationSettings {
            newton_tolerance: 1e-13,
            ..settings
        };
        let b2 = continue_branch(&p, 2, &tight).unwrap();
        let (_, c2, _) = b2.fit_gamma_expansion(0.005, 0.04).unwrap();
        assert_relative_eq!(c2, 0.375, max_relative = 0.01);
        for pt in b2.points.iter().filter(|q| q.epsilon < 0.035) {
            let k = p.num_coeffs();
            let mut x = DVector::zeros(k + 1);
            x[0] = 2.0 * pt.epsilon;
            x[k] = 4.0 * pt.gamma;
            let g1 = correct_fixed_amplitude(&p, 1, x, &tight).unwrap().x[k];
            assert!((pt.gamma - g1 / 4.0).abs() < 1e-11, "{} {}", pt.gamma, g1 / 4.0);
        }
    }
}

//! Discretization primitives: Fourier collocation in `x` and Chebyshev–Lobatto
//! collocation in `y`.
//!
//! Periodic functions are sampled at `2M` uniform nodes `x_j = 2πj/(2M)`.
//! Coefficients use the DFT ordering: entry `k` holds mode `k` for `k ≤ M`
//! and mode `k - 2M` above that, normalized so that `f(x_j) = Σ c_k e^{ikx_j}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// FFT plans and spectral operations on the periodic `x` grid.
#[derive(Clone)]
pub struct Fourier {
    num_modes: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier")
            .field("num_modes", &self.num_modes)
            .finish()
    }
}

impl Fourier {
    pub fn new(num_modes: usize) -> Self {
        let mut planner = FftPlanner::new();
        let n = 2 * num_modes;
        Self {
            num_modes,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    /// Number of grid points, `2M`.
    pub fn len(&self) -> usize {
        2 * self.num_modes
    }

    pub fn is_empty(&self) -> bool {
        self.num_modes == 0
    }

    /// Signed wavenumber of DFT slot `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let n = self.len();
        if k <= self.num_modes {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// DFT slot holding wavenumber `m` (`|m| ≤ M`).
    pub fn slot(&self, m: i64) -> usize {
        let n = self.len() as i64;
        m.rem_euclid(n) as usize
    }

    /// Largest retained wavenumber under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        2 * self.num_modes / 3
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.len();
        assert_eq!(values.len(), n, "grid length mismatch");
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Real part of the synthesis; callers keep coefficients Hermitian.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "coefficient length mismatch");
        let mut buf = coeffs.to_vec();
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Multiplier of `d^order/dx^order` at slot `k`. The Nyquist slot is
    /// dropped for odd orders so that real data stays real.
    pub fn derivative_multiplier(&self, k: usize, order: u32) -> Complex64 {
        let m = self.wavenumber(k);
        if order % 2 == 1 && m.unsigned_abs() as usize == self.num_modes {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, m as f64).powu(order)
    }

    pub fn differentiate_coeffs(&self, coeffs: &[Complex64], order: u32) -> Vec<Complex64> {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * self.derivative_multiplier(k, order))
            .collect()
    }

    pub fn derivative(&self, values: &[f64], order: u32) -> Vec<f64> {
        let c = self.forward(values);
        self.inverse(&self.differentiate_coeffs(&c, order))
    }

    /// Zero every mode with `|m| > 2M/3`.
    pub fn dealias_coeffs(&self, coeffs: &mut [Complex64]) {
        let cut = self.dealias_cutoff() as u64;
        for (k, c) in coeffs.iter_mut().enumerate() {
            if self.wavenumber(k).unsigned_abs() > cut {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn dealias(&self, values: &[f64]) -> Vec<f64> {
        let mut c = self.forward(values);
        self.dealias_coeffs(&mut c);
        self.inverse(&c)
    }

    /// Apply a per-slot multiplier to every column of `field` (rows are
    /// `x` nodes). Columns are transformed in one batched FFT call.
    pub fn apply_columns<F>(&self, field: &DMatrix<f64>, multiplier: F) -> DMatrix<f64>
    where
        F: Fn(usize) -> Complex64,
    {
        let n = self.len();
        assert_eq!(field.nrows(), n, "field rows must equal the x grid size");
        let mut buf: Vec<Complex64> = field
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        let mults: Vec<Complex64> = (0..n).map(|k| multiplier(k) * scale).collect();
        for chunk in buf.chunks_mut(n) {
            for (c, m) in chunk.iter_mut().zip(&mults) {
                *c *= m;
            }
        }
        self.inverse.process(&mut buf);
        DMatrix::from_iterator(n, field.ncols(), buf.iter().map(|c| c.re))
    }

    /// Column-wise `x` derivative of a strip field.
    pub fn differentiate_columns(&self, field: &DMatrix<f64>, order: u32) -> DMatrix<f64> {
        self.apply_columns(field, |k| self.derivative_multiplier(k, order))
    }

    /// Column-wise forward transform; returns a `2M × ncols` complex matrix.
    pub fn forward_columns(&self, field: &DMatrix<f64>) -> DMatrix<Complex64> {
        let n = self.len();
        let mut buf: Vec<Complex64> = field
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        DMatrix::from_vec(n, field.ncols(), buf)
    }

    pub fn inverse_columns(&self, coeffs: &DMatrix<Complex64>) -> DMatrix<f64> {
        let n = self.len();
        let mut buf = coeffs.as_slice().to_vec();
        self.inverse.process(&mut buf);
        DMatrix::from_iterator(n, coeffs.ncols(), buf.iter().map(|c| c.re))
    }
}

/// Chebyshev–Lobatto nodes on `[-1, 1]`, ascending.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let last = (n - 1) as f64;
    (0..n).map(|j| -(PI * j as f64 / last).cos()).collect()
}

/// First-derivative collocation matrix on the given Chebyshev–Lobatto nodes.
/// Diagonal entries use the negative-sum identity.
pub fn chebyshev_diff_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let c = |i: usize| {
        let base = if i == 0 || i == n - 1 { 2.0 } else { 1.0 };
        if i.is_multiple_of(2) {
            base
        } else {
            -base
        }
    };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = c(i) / c(j) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_round_trip_and_derivative() {
        let fourier = Fourier::new(16);
        let n = fourier.len();
        let x: Vec<f64> = (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|&x| (3.0 * x).sin() + 0.5 * (x).cos()).collect();
        let back = fourier.inverse(&fourier.forward(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let df = fourier.derivative(&f, 1);
        for (j, &xj) in x.iter().enumerate() {
            let exact = 3.0 * (3.0 * xj).cos() - 0.5 * xj.sin();
            assert!((df[j] - exact).abs() < 1e-12);
        }
        let d3 = fourier.derivative(&f, 3);
        for (j, &xj) in x.iter().enumerate() {
            let exact = -27.0 * (3.0 * xj).cos() + 0.5 * xj.sin();
            assert!((d3[j] - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn dealias_removes_high_modes() {
        let fourier = Fourier::new(12);
        let n = fourier.len();
        let f: Vec<f64> = (0..n)
            .map(|j| {
                let x = 2.0 * PI * j as f64 / n as f64;
                x.cos() + (10.0 * x).cos()
            })
            .collect();
        let g = fourier.dealias(&f);
        for (j, v) in g.iter().enumerate() {
            let x = 2.0 * PI * j as f64 / n as f64;
            assert!((v - x.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn chebyshev_differentiates_polynomials_exactly() {
        let nodes = chebyshev_nodes(9);
        let d = chebyshev_diff_matrix(&nodes);
        let p: Vec<f64> = nodes.iter().map(|&x| x.powi(5) - 2.0 * x * x).collect();
        for i in 0..nodes.len() {
            let dp: f64 = (0..nodes.len()).map(|j| d[(i, j)] * p[j]).sum();
            let exact = 5.0 * nodes[i].powi(4) - 4.0 * nodes[i];
            assert!((dp - exact).abs() < 1e-12, "{dp} vs {exact}");
        }
    }
}

//! Restarted GMRES for the preconditioned systems of the elliptic layer.

/// Stopping rule and limits for [`gmres`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresSettings {
    /// Converged once the residual is below `tolerance · reference`, where
    /// `reference` is the norm of the right-hand side.
    pub tolerance: f64,
    /// On stagnation a residual below `accept · reference` is still accepted.
    pub accept: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final residual relative to the right-hand side norm.
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` starting from `x0`. `apply` computes `A v`; any
/// preconditioning is folded into `apply` and `b` by the caller.
///
/// Arnoldi uses modified Gram–Schmidt with one reorthogonalization pass.
/// The true residual is recomputed at every restart.
pub fn gmres<F>(apply: F, b: &[f64], x0: Vec<f64>, settings: &GmresSettings) -> GmresOutcome
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = norm(b);
    let mut x = x0;
    if b_norm == 0.0 {
        return GmresOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let target = settings.tolerance * b_norm;
    let restart = settings.restart.max(1);
    let mut iterations = 0;
    let mut best = f64::INFINITY;

    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        let stagnated = beta >= 0.5 * best;
        best = best.min(beta);
        if beta <= target || iterations >= settings.max_iterations || (stagnated && iterations > 0) {
            let rel = beta / b_norm;
            return GmresOutcome {
                solution: x,
                iterations,
                relative_residual: rel,
                converged: beta <= target || (stagnated && rel <= settings.accept),
            };
        }

        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..restart {
            if iterations >= settings.max_iterations {
                break;
            }
            iterations += 1;
            let mut w = apply(&basis[k]);
            for _ in 0..2 {
                for (j, vj) in basis.iter().enumerate() {
                    let c = dot(&w, vj);
                    h[j][k] += c;
                    w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let w_norm = norm(&w);
            h[k + 1][k] = w_norm;

            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;

            if g[k + 1].abs() <= target || w_norm <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }

        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&basis) {
            x.iter_mut().zip(vi).for_each(|(xj, vj)| *xj += yi * vj);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn settings() -> GmresSettings {
        GmresSettings {
            tolerance: 1e-13,
            accept: 1e-9,
            max_iterations: 200,
            restart: 30,
        }
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 4.0 } else { 0.3 * rng.gen_range(-1.0..1.0) / n as f64 * 5.0 })
                    .collect()
            })
            .collect();
        let exact: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let apply = |v: &[f64]| -> Vec<f64> { a.iter().map(|row| dot(row, v)).collect() };
        let b = apply(&exact);
        let out = gmres(apply, &b, vec![0.0; n], &settings());
        assert!(out.converged);
        for (x, e) in out.solution.iter().zip(&exact) {
            assert!((x - e).abs() < 1e-11);
        }
    }

    #[test]
    fn restarts_still_converge() {
        let n = 40;
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let left = if i > 0 { v[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                    3.0 * v[i] - left - 0.5 * right
                })
                .collect()
        };
        let b = vec![1.0; n];
        let s = GmresSettings {
            restart: 5,
            ..settings()
        };
        let out = gmres(apply, &b, vec![0.0; n], &s);
        assert!(out.converged, "{out:?}");
        let r: Vec<f64> = apply(&out.solution).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&r) < 1e-11);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let out = gmres(|v: &[f64]| v.to_vec(), &[0.0; 4], vec![1.0; 4], &settings());
        assert_eq!(out.solution, vec![0.0; 4]);
        assert!(out.converged);
    }
}

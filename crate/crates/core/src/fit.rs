//! Small dense least-squares toolbox: a Levenberg–Marquardt driver with a
//! forward-difference Jacobian, plus closed-form linear fits.
//!
//! The problems in this crate are tiny (≤ 7 parameters, ≤ a few thousand
//! residuals), so a self-contained solver with normal equations and partial
//! pivoting is both sufficient and easy to audit.

use crate::error::{CoreError, Result};

/// Options for [`levenberg_marquardt`].
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative decrease of χ² falls below this.
    pub ftol: f64,
    /// Stop when the relative step size falls below this.
    pub xtol: f64,
    /// Initial damping factor.
    pub lambda0: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-12,
            xtol: 1e-12,
            lambda0: 1e-3,
        }
    }
}

/// Result of a Levenberg–Marquardt fit.
#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// 1σ parameter uncertainties from the scaled covariance
    /// (JᵀJ)⁻¹ · χ²/(n−p).
    pub uncertainties: Vec<f64>,
    /// Final sum of squared (weighted) residuals.
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl LmFit {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof > 0 {
            self.chi2 / self.dof as f64
        } else {
            f64::NAN
        }
    }
}

/// Minimizes Σ rᵢ(p)² over p. `residuals` writes the residual vector for the
/// given parameters into its output slice (weights folded in by the caller).
///
/// Errors with [`CoreError::FitNonConvergence`] when the damping loop cannot
/// make progress within the iteration budget.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    p0: &[f64],
    n_residuals: usize,
    opts: &LmOptions,
) -> Result<LmFit>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let np = p0.len();
    assert!(np > 0 && n_residuals >= np, "underdetermined fit");

    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_residuals];
    let mut r_trial = vec![0.0; n_residuals];
    let mut jac = vec![0.0; n_residuals * np];

    residuals(&p, &mut r);
    let mut chi2 = norm2(&r);
    if !chi2.is_finite() {
        return Err(CoreError::DegenerateFit(
            "non-finite residuals at initial parameters".into(),
        ));
    }

    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        numeric_jacobian(&mut residuals, &p, &r, &mut jac, n_residuals);

        // Normal equations: (JᵀJ + λ diag(JᵀJ)) δ = −Jᵀr
        let jtj = mat_at_a(&jac, n_residuals, np);
        let jtr = mat_at_b(&jac, &r, n_residuals, np);

        let mut stepped = false;
        for _ in 0..24 {
            let mut a = jtj.clone();
            for k in 0..np {
                let d = jtj[k * np + k];
                a[k * np + k] = d + lambda * d.max(1e-300);
            }
            let mut rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            if solve_inplace(&mut a, &mut rhs, np).is_err() {
                lambda *= 10.0;
                continue;
            }

            let trial: Vec<f64> = p.iter().zip(&rhs).map(|(pi, di)| pi + di).collect();
            residuals(&trial, &mut r_trial);
            let chi2_trial = norm2(&r_trial);

            if chi2_trial.is_finite() && chi2_trial < chi2 {
                let rel_dchi = (chi2 - chi2_trial) / chi2.max(1e-300);
                let rel_step = rhs
                    .iter()
                    .zip(&p)
                    .map(|(d, pi)| (d / pi.abs().max(1e-300)).abs())
                    .fold(0.0, f64::max);
                p = trial;
                std::mem::swap(&mut r, &mut r_trial);
                chi2 = chi2_trial;
                lambda = (lambda * 0.3).max(1e-14);
                stepped = true;
                if rel_dchi < opts.ftol || rel_step < opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }

        if converged {
            break;
        }
        if !stepped {
            // Cannot decrease χ² in any damped direction: stationary point.
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(CoreError::FitNonConvergence {
            iterations,
            residual: chi2.sqrt(),
        });
    }

    // Covariance at the solution (unit damping removed).
    numeric_jacobian(&mut residuals, &p, &r, &mut jac, n_residuals);
    let jtj = mat_at_a(&jac, n_residuals, np);
    let dof = n_residuals.saturating_sub(np);
    let scale = if dof > 0 { chi2 / dof as f64 } else { 1.0 };
    let cov = invert(&jtj, np);
    let uncertainties = match cov {
        Some(c) => (0..np)
            .map(|k| (c[k * np + k].max(0.0) * scale).sqrt())
            .collect(),
        None => vec![f64::NAN; np],
    };

    Ok(LmFit {
        params: p,
        uncertainties,
        chi2,
        dof,
        iterations,
        converged,
    })
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Forward-difference Jacobian; step scaled to each parameter.
fn numeric_jacobian<F>(f: &mut F, p: &[f64], r0: &[f64], jac: &mut [f64], n: usize)
where
    F: FnMut(&[f64], &mut [f64]),
{
    let np = p.len();
    let mut pp = p.to_vec();
    let mut rp = vec![0.0; n];
    for k in 0..np {
        let h = 1e-7 * p[k].abs().max(1e-9);
        pp[k] = p[k] + h;
        f(&pp, &mut rp);
        pp[k] = p[k];
        for i in 0..n {
            jac[i * np + k] = (rp[i] - r0[i]) / h;
        }
    }
}

fn mat_at_a(jac: &[f64], n: usize, np: usize) -> Vec<f64> {
    let mut out = vec![0.0; np * np];
    for i in 0..n {
        let row = &jac[i * np..(i + 1) * np];
        for a in 0..np {
            for b in a..np {
                out[a * np + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..np {
        for b in 0..a {
            out[a * np + b] = out[b * np + a];
        }
    }
    out
}

fn mat_at_b(jac: &[f64], r: &[f64], n: usize, np: usize) -> Vec<f64> {
    let mut out = vec![0.0; np];
    for i in 0..n {
        let row = &jac[i * np..(i + 1) * np];
        for a in 0..np {
            out[a] += row[a] * r[i];
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; `a` is n×n row-major.
fn solve_inplace(a: &mut [f64], b: &mut [f64], n: usize) -> std::result::Result<(), ()> {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return Err(());
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in (col + 1)..n {
            let f = a[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = b[col];
        for k in (col + 1)..n {
            v -= a[col * n + k] * b[k];
        }
        b[col] = v / a[col * n + col];
    }
    Ok(())
}

fn invert(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0; n * n];
    for col in 0..n {
        let mut a = m.to_vec();
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        solve_inplace(&mut a, &mut e, n).ok()?;
        for row in 0..n {
            out[row * n + col] = e[row];
        }
    }
    Some(out)
}

/// Weighted straight-line fit y = a + b·x. Returns ((a, b), (σ_a, σ_b)).
/// Weights are 1/σᵢ²; pass `None` for an unweighted fit with uncertainties
/// scaled by the residual variance.
pub fn line_fit(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<((f64, f64), (f64, f64))> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(CoreError::TooFewSamples { needed: 3, got: n });
    }
    let wi = |i: usize| w.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let wv = wi(i);
        sw += wv;
        sx += wv * x[i];
        sy += wv * y[i];
        sxx += wv * x[i] * x[i];
        sxy += wv * x[i] * y[i];
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(CoreError::DegenerateFit("singular line fit".into()));
    }
    let a = (sxx * sy - sx * sxy) / det;
    let b = (sw * sxy - sx * sy) / det;

    let mut var_a = sxx / det;
    let mut var_b = sw / det;
    if w.is_none() {
        // Scale by residual variance when no per-point errors are given.
        let mut ss = 0.0;
        for i in 0..n {
            let r = y[i] - a - b * x[i];
            ss += r * r;
        }
        let s2 = ss / (n as f64 - 2.0);
        var_a *= s2;
        var_b *= s2;
    }
    Ok(((a, b), (var_a.sqrt(), var_b.sqrt())))
}

/// Least-squares fit of y ≈ c + a·sin(φ) + b·cos(φ) on the given phases.
/// Returns (amplitude √(a²+b²), phase atan2(b, a), mean c, amplitude σ).
/// `sigma_y` is the common per-point standard deviation used for the
/// amplitude uncertainty.
pub fn sinusoid_fit(phases: &[f64], y: &[f64], sigma_y: f64) -> Result<(f64, f64, f64, f64)> {
    let n = phases.len();
    if n < 4 || y.len() != n {
        return Err(CoreError::TooFewSamples { needed: 4, got: n });
    }
    // Normal equations for the 3-parameter linear model.
    let mut m = [0.0f64; 9];
    let mut rhs = [0.0f64; 3];
    for i in 0..n {
        let basis = [1.0, phases[i].sin(), phases[i].cos()];
        for a in 0..3 {
            for b in 0..3 {
                m[a * 3 + b] += basis[a] * basis[b];
            }
            rhs[a] += basis[a] * y[i];
        }
    }
    let mut a = m.to_vec();
    let mut bv = rhs.to_vec();
    solve_inplace(&mut a, &mut bv, 3)
        .map_err(|_| CoreError::DegenerateFit("singular sinusoid fit".into()))?;
    let (c, sa, ca) = (bv[0], bv[1], bv[2]);
    let amp = (sa * sa + ca * ca).sqrt();
    let phase = ca.atan2(sa);
    // Var(a) = Var(b) ≈ 2σ²/n on an even phase grid.
    let sigma_amp = sigma_y * (2.0 / n as f64).sqrt();
    Ok((amp, phase, c, sigma_amp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lm_recovers_exponential_decay() {
        // y = A exp(-k x), noiseless: parameters recovered to high precision.
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let truth = [2.5, 0.7];
        let ys: Vec<f64> = xs.iter().map(|&x| truth[0] * (-truth[1] * x).exp()).collect();
        let fit = levenberg_marquardt(
            |p, r| {
                for (i, &x) in xs.iter().enumerate() {
                    r[i] = p[0] * (-p[1] * x).exp() - ys[i];
                }
            },
            &[1.0, 0.2],
            xs.len(),
            &LmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.params[0], truth[0], max_relative = 1e-7);
        assert_relative_eq!(fit.params[1], truth[1], max_relative = 1e-7);
    }

    #[test]
    fn lm_uncertainties_match_noise_scale() {
        // Constant model fitted to noisy data: σ_mean = σ/√n.
        let n = 400;
        let ys: Vec<f64> = (0..n)
            .map(|i| 5.0 + if i % 2 == 0 { 0.1 } else { -0.1 })
            .collect();
        let fit = levenberg_marquardt(
            |p, r| {
                for i in 0..n {
                    r[i] = p[0] - ys[i];
                }
            },
            &[4.0],
            n,
            &LmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(fit.params[0], 5.0, max_relative = 1e-9);
        let expected = 0.1 / (n as f64).sqrt();
        assert_relative_eq!(fit.uncertainties[0], expected, max_relative = 0.05);
    }

    #[test]
    fn line_fit_exact_on_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let ((a, b), _) = line_fit(&x, &y, None).unwrap();
        assert_relative_eq!(a, 3.0, epsilon = 1e-12);
        assert_relative_eq!(b, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn sinusoid_fit_recovers_amplitude_and_phase() {
        let n = 64;
        let phases: Vec<f64> = (0..n)
            .map(|i| (i as f64 + 0.5) / n as f64 * std::f64::consts::TAU)
            .collect();
        let y: Vec<f64> = phases.iter().map(|&p| 1.0 + 0.25 * (p + 0.4).sin()).collect();
        let (amp, phase, mean, _) = sinusoid_fit(&phases, &y, 0.0).unwrap();
        assert_relative_eq!(amp, 0.25, max_relative = 1e-9);
        assert_relative_eq!(phase, 0.4, epsilon = 1e-9);
        assert_relative_eq!(mean, 1.0, epsilon = 1e-9);
    }
}

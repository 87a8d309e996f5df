//! Damped Gauss–Newton (Levenberg–Marquardt) for models with a handful of
//! parameters and analytic Jacobians.

use crate::error::{Error, Result};

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LsqSolution {
    pub params: Vec<f64>,
    /// One-sigma errors from the covariance `s²(JᵀJ)⁻¹`.
    pub errors: Vec<f64>,
    /// `‖r‖₂` of the weighted residuals.
    pub residual_norm: f64,
}

/// Minimizes `Σ r_i(p)²`. `model(p, residuals, jacobian_rows)` fills the
/// residual vector and the row-major Jacobian `∂r_i/∂p_j`.
pub(crate) fn levenberg_marquardt<F>(n_res: usize, p0: &[f64], mut model: F) -> Result<LsqSolution>
where
    F: FnMut(&[f64], &mut [f64], &mut [f64]),
{
    let np = p0.len();
    if n_res < np {
        return Err(Error::InsufficientData(format!(
            "{n_res} residuals for {np} parameters"
        )));
    }
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_res];
    let mut jac = vec![0.0; n_res * np];
    model(&p, &mut r, &mut jac);
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    if !cost.is_finite() {
        return Err(Error::Analysis("non-finite residual at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut r_try = vec![0.0; n_res];
    let mut jac_try = vec![0.0; n_res * np];
    for _ in 0..500 {
        let (jtj, jtr) = normal_equations(&jac, &r, np);
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..np {
                a[i * np + i] += lambda * jtj[i * np + i].max(1e-300);
            }
            let Some(step) = solve(&a, &jtr.iter().map(|x| -x).collect::<Vec<_>>(), np) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            model(&trial, &mut r_try, &mut jac_try);
            let c: f64 = r_try.iter().map(|x| x * x).sum();
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                let small_step = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, x)| s.abs() <= 1e-12 * x.abs().max(1e-300));
                p = trial;
                std::mem::swap(&mut r, &mut r_try);
                std::mem::swap(&mut jac, &mut jac_try);
                cost = c;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if rel < 1e-15 || small_step || cost == 0.0 {
                    return finish(p, &r, &jac, np);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return finish(p, &r, &jac, np);
        }
    }
    finish(p, &r, &jac, np)
}

fn finish(p: Vec<f64>, r: &[f64], jac: &[f64], np: usize) -> Result<LsqSolution> {
    let cost: f64 = r.iter().map(|x| x * x).sum();
    let dof = r.len().saturating_sub(np);
    let (jtj, _) = normal_equations(jac, r, np);
    let s2 = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let mut errors = vec![0.0; np];
    if let Some(cov) = invert(&jtj, np) {
        for (i, e) in errors.iter_mut().enumerate() {
            *e = (s2 * cov[i * np + i]).max(0.0).sqrt();
        }
    } else {
        return Err(Error::Analysis(
            "singular normal matrix: parameters are not identifiable".into(),
        ));
    }
    Ok(LsqSolution {
        params: p,
        errors,
        residual_norm: cost.sqrt(),
    })
}

fn normal_equations(jac: &[f64], r: &[f64], np: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; np * np];
    let mut jtr = vec![0.0; np];
    for (i, ri) in r.iter().enumerate() {
        let row = &jac[i * np..(i + 1) * np];
        for a in 0..np {
            jtr[a] += row[a] * ri;
            for b in 0..np {
                jtj[a * np + b] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

/// Gaussian elimination with partial pivoting.
fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a, &e, n)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

/// Ordinary least squares for `y ≈ Σ_j c_j·basis_j(x)`; returns the coefficients.
pub(crate) fn linear_lsq(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let np = rows.first()?.len();
    let mut jtj = vec![0.0; np * np];
    let mut jty = vec![0.0; np];
    for (row, yi) in rows.iter().zip(y) {
        for a in 0..np {
            jty[a] += row[a] * yi;
            for b in 0..np {
                jtj[a * np + b] += row[a] * row[b];
            }
        }
    }
    solve(&jtj, &jty, np)
}

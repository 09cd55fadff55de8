//! Levenberg-Marquardt least squares for the small fixed models used in the
//! analysis pipeline (decaying cosine, complex Lorentzian line).

use crate::error::{Error, Result};

/// Outcome of an LM run.
#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// 1-sigma standard errors from the scaled inverse normal matrix.
    pub stderr: Vec<f64>,
    /// Euclidean norm of the residual vector at the solution.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Model callback: fill `resid` with (model - data) and `jac[(i, k)]` with
/// d resid_i / d param_k at `params`.
pub trait LmModel {
    fn eval(&self, params: &[f64], resid: &mut [f64], jac: &mut [Vec<f64>]);
    fn n_resid(&self) -> usize;
}

fn solve_sym(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[p][k].abs() {
                p = i;
            }
        }
        if a[p][k].abs() < 1e-300 {
            return None;
        }
        a.swap(p, k);
        b.swap(p, k);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * b[j];
        }
        b[i] = s / a[i][i];
    }
    Some(b)
}

/// Run Levenberg-Marquardt from `init`. Returns best-effort parameters with
/// `converged = false` when the iteration stalls without meeting tolerance.
pub fn levenberg_marquardt(model: &dyn LmModel, init: &[f64], max_iter: usize) -> Result<LmResult> {
    let np = init.len();
    let nr = model.n_resid();
    if nr < np {
        return Err(Error::FitFailure(format!(
            "{nr} residuals for {np} parameters"
        )));
    }
    let mut params = init.to_vec();
    let mut resid = vec![0.0; nr];
    let mut jac = vec![vec![0.0; np]; nr];
    model.eval(&params, &mut resid, &mut jac);
    let mut chi2: f64 = resid.iter().map(|r| r * r).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it + 1;
        // normal equations with Marquardt scaling
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for i in 0..nr {
            for k in 0..np {
                jtr[k] += jac[i][k] * resid[i];
                for l in k..np {
                    jtj[k][l] += jac[i][k] * jac[i][l];
                }
            }
        }
        for k in 0..np {
            for l in 0..k {
                jtj[k][l] = jtj[l][k];
            }
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[k][k] += lambda * (jtj[k][k].max(1e-30));
            }
            let Some(step) = solve_sym(a, jtr.clone()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p - s).collect();
            let mut tr_resid = vec![0.0; nr];
            let mut tr_jac = vec![vec![0.0; np]; nr];
            model.eval(&trial, &mut tr_resid, &mut tr_jac);
            let tr_chi2: f64 = tr_resid.iter().map(|r| r * r).sum();
            if tr_chi2.is_finite() && tr_chi2 <= chi2 {
                let rel = (chi2 - tr_chi2) / chi2.max(1e-300);
                params = trial;
                resid = tr_resid;
                jac = tr_jac;
                chi2 = tr_chi2;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-13 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged || !improved {
            converged = converged || chi2 == 0.0 || !improved && lambda > 1e12 && chi2 < 1e-20;
            break;
        }
    }

    // covariance: sigma^2 (J^T J)^-1 with sigma^2 = chi2 / (n - p)
    let dof = (nr.saturating_sub(np)).max(1) as f64;
    let sigma2 = chi2 / dof;
    let mut jtj = vec![vec![0.0; np]; np];
    for i in 0..nr {
        for k in 0..np {
            for l in k..np {
                jtj[k][l] += jac[i][k] * jac[i][l];
            }
        }
    }
    for k in 0..np {
        for l in 0..k {
            jtj[k][l] = jtj[l][k];
        }
    }
    let mut stderr = vec![f64::NAN; np];
    // invert via solves against unit vectors
    let mut ok = true;
    let mut inv_diag = vec![0.0; np];
    for k in 0..np {
        let mut e = vec![0.0; np];
        e[k] = 1.0;
        match solve_sym(jtj.clone(), e) {
            Some(col) => inv_diag[k] = col[k],
            None => {
                ok = false;
                break;
            }
        }
    }
    if ok {
        for k in 0..np {
            stderr[k] = (sigma2 * inv_diag[k].max(0.0)).sqrt();
        }
    }

    Ok(LmResult {
        params,
        stderr,
        residual_norm: chi2.sqrt(),
        converged,
        iterations,
    })
}

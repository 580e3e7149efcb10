//! Small dense Levenberg-Marquardt for the few-parameter root finds used by
//! the distance sweeps and the quotient shooting solver.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative central-difference step for the Jacobian.
    pub fd_step: f64,
    /// Stop once the residual norm drops below this.
    pub residual_tol: f64,
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            fd_step: 1e-6,
            residual_tol: 1e-13,
            step_tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], h_rel: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let h = h_rel * x[k].abs().max(1.0);
        probe[k] = x[k] + h;
        let plus = f(&probe);
        probe[k] = x[k] - h;
        let minus = f(&probe);
        probe[k] = x[k];
        let col: Vec<f64> = match (plus, minus) {
            (Some(p), Some(q)) => p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Some(p), None) => p.iter().zip(r0).map(|(a, b)| (a - b) / h).collect(),
            (None, Some(q)) => r0.iter().zip(&q).map(|(a, b)| (a - b) / h).collect(),
            (None, None) => vec![0.0; m],
        };
        for (i, v) in col.into_iter().enumerate() {
            jac[(i, k)] = v;
        }
    }
    jac
}

/// Minimizes `|f(x)|^2`. `f` returns `None` where it is undefined (e.g. a
/// shot that left the disc); such points are rejected like uphill steps.
/// Returns `None` if `f(x0)` itself is undefined.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], opts: &LmOptions) -> Option<LmResult>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut cost = norm(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < opts.max_iterations && cost > opts.residual_tol {
        iterations += 1;
        let jac = jacobian(&f, &x, &r, opts.fd_step);
        let rv = DVector::from_column_slice(&r);
        let jt = jac.transpose();
        let normal = &jt * &jac;
        let grad = &jt * rv;
        let mut improved = false;
        while lambda < 1e14 {
            let mut damped = normal.clone();
            for i in 0..x.len() {
                damped[(i, i)] += lambda * normal[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some(rt) = f(&trial) {
                let ct = norm(&rt);
                if ct < cost {
                    let small = step.norm() <= opts.step_tol * (norm(&x) + opts.step_tol);
                    x = trial;
                    r = rt;
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = !small;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Some(LmResult {
        x,
        residual_norm: cost,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_rosenbrock_style_root() {
        let f = |x: &[f64]| Some(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let r = levenberg_marquardt(f, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!(r.residual_norm < 1e-12);
        assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn undefined_start_is_none() {
        assert!(levenberg_marquardt(|_| None, &[0.0], &LmOptions::default()).is_none());
    }

    #[test]
    fn rank_deficient_problem_still_converges() {
        // residual depends on x0 + x1 only
        let f = |x: &[f64]| Some(vec![x[0] + x[1] - 2.0]);
        let r = levenberg_marquardt(f, &[0.3, 0.1], &LmOptions::default()).unwrap();
        assert!(r.residual_norm < 1e-12);
    }
}

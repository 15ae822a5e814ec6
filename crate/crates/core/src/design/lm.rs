//! Levenberg–Marquardt for small dense residual systems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once `max |r_i|` falls below this.
    pub target: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            target: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// `max |r_i|` at `x`.
    pub max_residual: f64,
    pub iterations: usize,
}

/// Minimizes `||r(x)||^2` where `model(x)` returns `(r, J)`.
///
/// `project` maps a trial point back onto the feasible set before it is
/// evaluated (e.g. clamping weights).
pub fn levenberg_marquardt<M, P>(x0: Vec<f64>, model: M, project: P, opts: LmOptions) -> LmOutcome
where
    M: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
    P: Fn(&mut [f64]),
{
    let mut x = x0;
    project(&mut x);
    let (mut r, mut j) = model(&x);
    let mut cost = r.norm_squared();
    let mut lambda = opts.initial_damping;
    let n = x.len();
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if r.amax() <= opts.target || !cost.is_finite() {
            break;
        }
        iterations += 1;
        let jt = j.transpose();
        let jtj = &jt * &j;
        let grad = &jt * &r;
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial);
            let (tr, tj) = model(&trial);
            let tcost = tr.norm_squared();
            if tcost.is_finite() && tcost < cost {
                x = trial;
                r = tr;
                j = tj;
                cost = tcost;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    LmOutcome {
        max_residual: r.amax(),
        x,
        iterations,
    }
}

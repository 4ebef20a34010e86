//! Levenberg–Marquardt for small dense nonlinear least-squares problems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
    /// Stop when the scaled gradient falls below this.
    pub gtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 200, ftol: 1e-15, xtol: 1e-15, gtol: 1e-15 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: DVector<f64>,
    /// `½‖r‖²` at `x`.
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn half_norm2(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Minimise `½‖r(x)‖²`. Steps are accepted only when they lower the cost,
/// so the returned cost never exceeds the initial one.
pub fn levenberg_marquardt<R, J>(x0: DVector<f64>, residuals: R, jacobian: J, opts: &LmOptions) -> LmReport
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = x0;
    let mut r = residuals(&x);
    let initial_cost = half_norm2(&r);
    let mut cost = initial_cost;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    if !cost.is_finite() || cost == 0.0 || x.is_empty() {
        let converged = cost == 0.0 || x.is_empty();
        return LmReport { x, cost, initial_cost, iterations, converged };
    }

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&x);
        let jtj = jac.tr_mul(&jac);
        let g = jac.tr_mul(&r);
        // unidentified directions get a tiny positive scale so the damped system stays definite
        let floor = jtj.diagonal().max().max(1e-300) * 1e-12;
        let scale: DVector<f64> = jtj.diagonal().map(|d| d.max(floor));
        let gnorm = g.iter().zip(scale.iter()).map(|(gi, si)| gi.abs() / si.sqrt()).fold(0.0, f64::max);
        if gnorm <= opts.gtol * (2.0 * cost).sqrt() {
            converged = true;
            break;
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * scale[k];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let trial = &x + &step;
            let r_trial = residuals(&trial);
            let c_trial = half_norm2(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let reduction = (cost - c_trial) / cost;
                let small_step = step.norm() <= opts.xtol * (x.norm() + opts.xtol);
                x = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-12);
                if reduction <= opts.ftol || small_step || cost == 0.0 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // no descent left at working precision
                converged = true;
                break 'outer;
            }
        }
    }
    LmReport { x, cost, initial_cost, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let res = |x: &DVector<f64>| DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let jac = |x: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0]);
        let rep = levenberg_marquardt(DVector::from_vec(vec![-1.2, 1.0]), res, jac, &LmOptions::default());
        assert!(rep.converged);
        assert!((rep.x[0] - 1.0).abs() < 1e-10 && (rep.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_fit() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.5 * (-1.3 * t).exp()).collect();
        let res = |x: &DVector<f64>| DVector::from_iterator(20, ts.iter().zip(&ys).map(|(t, y)| x[0] * (-x[1] * t).exp() - y));
        let jac = |x: &DVector<f64>| {
            DMatrix::from_fn(20, 2, |i, k| {
                let e = (-x[1] * ts[i]).exp();
                if k == 0 { e } else { -x[0] * ts[i] * e }
            })
        };
        let rep = levenberg_marquardt(DVector::from_vec(vec![1.0, 0.5]), res, jac, &LmOptions::default());
        assert!((rep.x[0] - 2.5).abs() < 1e-10 && (rep.x[1] - 1.3).abs() < 1e-10);
        assert!(rep.cost <= rep.initial_cost);
    }

    #[test]
    fn rank_deficient_direction_is_left_alone() {
        // only x0 + x1 is identified
        let res = |x: &DVector<f64>| DVector::from_vec(vec![x[0] + x[1] - 3.0]);
        let jac = |_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let rep = levenberg_marquardt(DVector::from_vec(vec![0.0, 0.0]), res, jac, &LmOptions::default());
        assert!((rep.x[0] + rep.x[1] - 3.0).abs() < 1e-12);
    }
}

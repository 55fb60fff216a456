//! Finite-difference verification of tape gradients.
//!
//! Central differences per coordinate against the analytic adjoint, with the
//! relative error `|analytic - numeric| / max(1, |analytic|, |numeric|)`
//! maximized over all coordinates.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::{Tape, Var};

/// Checks the gradient of a scalar function of one matrix argument.
pub fn grad_check<F>(f: F, point: &Matrix, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    grad_check_multi(|tape, vars| f(tape, vars[0]), core::slice::from_ref(point), step)
}

/// Checks the gradient of a scalar function of several matrix arguments,
/// returning the max relative error over every coordinate of every argument.
pub fn grad_check_multi<F>(f: F, points: &[Matrix], step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = points.iter().map(|p| tape.param(p.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let base = scalar_value(&tape, root)?;
    if !base.is_finite() {
        return Err(Error::NonFinite { op: "grad_check" });
    }
    let grads = tape.backward(root)?;

    let eval = |perturbed: &[Matrix]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|p| t.param(p.clone())).collect();
        let r = f(&mut t, &vs)?;
        let v = scalar_value(&t, r)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { op: "grad_check" });
        }
        Ok(v)
    };

    let mut max_rel = 0.0f64;
    for (pi, point) in points.iter().enumerate() {
        let analytic = grads.get(vars[pi]).cloned();
        for i in 0..point.rows() {
            for j in 0..point.cols() {
                let mut work: Vec<Matrix> = points.to_vec();
                let orig = point.get(i, j);
                work[pi].set(i, j, orig + step);
                let fp = eval(&work)?;
                work[pi].set(i, j, orig - step);
                let fm = eval(&work)?;
                let numeric = (fp - fm) / (2.0 * step);
                let a = analytic.as_ref().map_or(0.0, |g| g.get(i, j));
                let rel = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
                if rel > max_rel {
                    max_rel = rel;
                }
            }
        }
    }
    Ok(max_rel)
}

fn scalar_value(tape: &Tape, v: Var) -> Result<f64> {
    let m = tape.value(v);
    if m.shape() != (1, 1) {
        return Err(Error::ShapeMismatch {
            op: "grad_check",
            lhs: m.shape(),
            rhs: (1, 1),
        });
    }
    Ok(m.get(0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quadratic_gradient_checks_out() {
        // f(x) = x^2 at x = 3: analytic gradient 6.
        let point = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        let err = grad_check(
            |tape, x| {
                let sq = tape.hadamard(x, x)?;
                Ok(tape.sum(sq))
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn relu_sum_away_from_kink_checks_out() {
        let point = Matrix::from_vec(1, 4, vec![1.5, -2.0, 0.75, -0.25]).unwrap();
        let err = grad_check(
            |tape, x| {
                let r = tape.relu(x);
                Ok(tape.sum(r))
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let point = Matrix::from_vec(1, 1, vec![1e308]).unwrap();
        let res = grad_check(
            |tape, x| {
                let sq = tape.hadamard(x, x)?;
                Ok(tape.sum(sq))
            },
            &point,
            1e-5,
        );
        assert!(matches!(res, Err(Error::NonFinite { .. })));
    }
}

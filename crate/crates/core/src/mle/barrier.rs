//! Log barrier `sum_i log(1 + 1/(v_i - u_i^T o))` for polyhedral constraints.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierKind {
    /// `U = -diag(z)`, `v = 0`.
    SignOnly,
    /// Arbitrary rows, e.g. SLOPE sign and ordering constraints.
    GeneralAffine,
}

/// The constraint set `{o : U o < v}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec {
    pub u: Matrix,
    pub v: Vector,
    pub kind: BarrierKind,
}

/// Barrier value with its gradient and Hessian.
#[derive(Debug, Clone)]
pub struct BarrierEval {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: Matrix,
}

impl BarrierSpec {
    pub fn new(u: Matrix, v: Vector, kind: BarrierKind) -> Result<Self> {
        if u.nrows() != v.len() {
            return Err(domain("constraint matrix and vector have different lengths"));
        }
        Ok(Self { u, v, kind })
    }

    /// Sign constraints `z_j o_j > 0`.
    pub fn sign(signs: &[f64]) -> Self {
        let k = signs.len();
        Self {
            u: Matrix::from_fn(k, k, |i, j| if i == j { -signs[i] } else { 0.0 }),
            v: Vector::zeros(k),
            kind: BarrierKind::SignOnly,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Slacks `v - U o`.
    pub fn slacks(&self, o: &Vector) -> Vector {
        &self.v - &self.u * o
    }

    pub fn is_feasible(&self, o: &Vector) -> bool {
        o.len() == self.dim() && self.slacks(o).iter().all(|s| *s > 0.0)
    }

    pub fn value(&self, o: &Vector) -> Result<f64> {
        let s = self.checked_slacks(o)?;
        Ok(s.iter().map(|s| (1.0 / s).ln_1p()).sum())
    }

    pub fn eval(&self, o: &Vector) -> Result<BarrierEval> {
        let s = self.checked_slacks(o)?;
        let k = self.dim();
        let mut value = 0.0;
        let mut gradient = Vector::zeros(k);
        let mut hessian = Matrix::zeros(k, k);
        for (i, &si) in s.iter().enumerate() {
            value += (1.0 / si).ln_1p();
            // d/ds log(1 + 1/s) = -1/(s(s+1)); ds/do = -u_i.
            let d1 = -1.0 / (si * (si + 1.0));
            let d2 = 1.0 / (si * si) - 1.0 / ((si + 1.0) * (si + 1.0));
            let row = self.u.row(i).transpose();
            gradient.axpy(-d1, &row, 1.0);
            hessian.ger(d2, &row, &row, 1.0);
        }
        Ok(BarrierEval {
            value,
            gradient,
            hessian,
        })
    }

    fn checked_slacks(&self, o: &Vector) -> Result<Vector> {
        if o.len() != self.dim() {
            return Err(domain("barrier argument has the wrong length"));
        }
        let s = self.slacks(o);
        if s.iter().any(|s| !(*s > 0.0)) {
            return Err(domain("point is outside the constraint set"));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_sign_barrier() {
        let b = BarrierSpec::sign(&[1.0]);
        let e = b.eval(&Vector::from_element(1, 1.0)).unwrap();
        assert!((e.value - 2f64.ln()).abs() < 1e-15);
        assert!((e.gradient[0] + 0.5).abs() < 1e-15);
        assert!((e.hessian[(0, 0)] - 0.75).abs() < 1e-15);
        assert!(b.eval(&Vector::from_element(1, -1.0)).is_err());
        assert!(b.eval(&Vector::from_element(1, 0.0)).is_err());
    }
}

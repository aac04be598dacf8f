//! Dense strictly convex QP: `min 1/2 x'Qx + c'x  s.t.  A x <= b`.
//!
//! Solved with the Goldfarb-Idnani dual active-set method from the `quadprog`
//! crate; the KKT residual of every solution is checked here.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("quadratic program is infeasible")]
    Infeasible,
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("KKT residual {residual:e} exceeds tolerance {tol:e}")]
    Numerical { residual: f64, tol: f64 },
}

/// Problem data in row-major dense storage.
#[derive(Clone, Debug)]
pub struct QuadraticProgram {
    n: usize,
    hessian: Vec<f64>,
    linear: Vec<f64>,
    rows: Vec<f64>,
    rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One non-negative multiplier per inequality.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

impl QuadraticProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            hessian: vec![0.0; n * n],
            linear: vec![0.0; n],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn hessian_mut(&mut self) -> &mut [f64] {
        &mut self.hessian
    }

    pub fn linear_mut(&mut self) -> &mut [f64] {
        &mut self.linear
    }

    pub fn add_hessian(&mut self, i: usize, j: usize, v: f64) {
        self.hessian[i * self.n + j] += v;
    }

    /// Adds `row . x <= rhs`.
    pub fn add_constraint(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n);
        self.rows.extend_from_slice(row);
        self.rhs.push(rhs);
    }

    /// Adds `lo <= x[i] <= hi`.
    pub fn add_bounds(&mut self, i: usize, lo: f64, hi: f64) {
        let mut row = vec![0.0; self.n];
        row[i] = 1.0;
        self.add_constraint(&row, hi);
        row[i] = -1.0;
        self.add_constraint(&row, -lo);
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut quad = 0.0;
        for i in 0..n {
            let qi: f64 = (0..n).map(|j| self.hessian[i * n + j] * x[j]).sum();
            quad += x[i] * qi;
        }
        0.5 * quad + self.linear.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest constraint violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .chunks_exact(self.n)
            .zip(&self.rhs)
            .map(|(r, b)| r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b)
            .fold(0.0, f64::max)
    }

    /// Scaled KKT residual: stationarity, primal and dual feasibility, complementarity.
    pub fn kkt_residual(&self, x: &[f64], lambda: &[f64]) -> f64 {
        let n = self.n;
        let mut grad: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.hessian[i * n + j] * x[j]).sum::<f64>())
            .collect();
        let qx_scale = grad.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (g, c) in grad.iter_mut().zip(&self.linear) {
            *g += c;
        }
        let mut complementarity = 0.0_f64;
        let mut primal = 0.0_f64;
        let mut dual = 0.0_f64;
        for ((row, b), l) in self.rows.chunks_exact(n).zip(&self.rhs).zip(lambda) {
            let ax: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let slack = b - ax;
            primal = primal.max(-slack / (1.0 + b.abs()));
            dual = dual.max(-l);
            complementarity = complementarity.max((l * slack).abs());
            for (g, a) in grad.iter_mut().zip(row) {
                *g += l * a;
            }
        }
        let c_scale = self.linear.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let stationarity =
            grad.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (1.0 + c_scale + qx_scale);
        let obj_scale = 1.0 + self.objective(x).abs();
        stationarity
            .max(primal)
            .max(dual / (1.0 + c_scale))
            .max(complementarity / obj_scale)
    }

    pub fn solve(&self, tol: f64) -> Result<QpSolution, QpError> {
        let mut q = self.hessian.clone();
        let sol = quadprog::solve_qp(&mut q, &self.linear, &self.rows, &self.rhs, 0, false)
            .map_err(|e| match e {
                quadprog::Error::Infeasible => QpError::Infeasible,
                quadprog::Error::NotPositiveDefinite => QpError::NotPositiveDefinite,
                other => panic!("inconsistent QP dimensions: {other}"),
            })?;
        let multipliers: Vec<f64> = sol.lagr.iter().map(|l| l.max(0.0)).collect();
        let kkt_residual = self.kkt_residual(&sol.sol, &multipliers);
        if !(kkt_residual <= tol) {
            return Err(QpError::Numerical {
                residual: kkt_residual,
                tol,
            });
        }
        Ok(QpSolution {
            objective: self.objective(&sol.sol),
            x: sol.sol,
            multipliers,
            kkt_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn crate_example() {
        // min 1/2 x^2 + 1/2 y^2 + x  s.t.  x + 2y >= 1
        let mut qp = QuadraticProgram::new(2);
        qp.add_hessian(0, 0, 1.0);
        qp.add_hessian(1, 1, 1.0);
        qp.linear_mut()[0] = 1.0;
        qp.add_constraint(&[-1.0, -2.0], -1.0);
        let s = qp.solve(1e-9).unwrap();
        assert_abs_diff_eq!(s.x[0], -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 0.8, epsilon = 1e-12);
        assert!(s.multipliers[0] > 0.0);
        assert!(s.kkt_residual < 1e-12);
    }

    #[test]
    fn box_bounds_clip_unconstrained_minimum() {
        let mut qp = QuadraticProgram::new(3);
        for i in 0..3 {
            qp.add_hessian(i, i, 2.0);
            qp.linear_mut()[i] = -2.0 * (i as f64 + 1.0);
            qp.add_bounds(i, -1.5, 1.5);
        }
        let s = qp.solve(1e-9).unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[2], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let mut qp = QuadraticProgram::new(1);
        qp.add_hessian(0, 0, 1.0);
        qp.add_constraint(&[1.0], -1.0);
        qp.add_constraint(&[-1.0], -1.0);
        assert_eq!(qp.solve(1e-9).unwrap_err(), QpError::Infeasible);
    }
}

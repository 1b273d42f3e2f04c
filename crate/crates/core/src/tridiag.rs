//! Tridiagonal factorization and the rank-two corner correction used for
//! non-separated boundary rows.

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-300;

/// LU factors of a tridiagonal matrix (Thomas algorithm, no pivoting).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    /// Modified super-diagonal `c'_i = c_i / denom_i`.
    upper_mod: Vec<f64>,
    denom: Vec<f64>,
}

impl TridiagonalLu {
    /// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused),
    /// `upper[i]` multiplies `x[i+1]` (`upper[n-1]` unused).
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut upper_mod = vec![0.0; n];
        let mut denom = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let d = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * prev_upper
            };
            if !d.is_finite() || d.abs() < PIVOT_FLOOR {
                return None;
            }
            denom[i] = d;
            prev_upper = if i + 1 < n { upper[i] / d } else { 0.0 };
            upper_mod[i] = prev_upper;
        }
        Some(TridiagonalLu {
            lower: lower.to_vec(),
            upper_mod,
            denom,
        })
    }

    pub fn len(&self) -> usize {
        self.denom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.denom.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}

/// Tridiagonal matrix plus the two corner entries `(0, n-1)` and `(n-1, 0)`,
/// solved as a rank-two Woodbury update of the tridiagonal core.
#[derive(Debug, Clone)]
pub struct BorderedSolver {
    core: TridiagonalLu,
    top_right: f64,
    bottom_left: f64,
    correction: Option<Correction>,
}

#[derive(Debug, Clone)]
struct Correction {
    /// `T⁻¹ e_0` and `T⁻¹ e_{n-1}`.
    z0: Vec<f64>,
    z1: Vec<f64>,
    /// Inverse of the 2x2 capacitance matrix `I + Vᵀ Z`.
    cap_inv: [[f64; 2]; 2],
}

impl BorderedSolver {
    pub fn new(
        lower: &[f64],
        diag: &[f64],
        upper: &[f64],
        top_right: f64,
        bottom_left: f64,
    ) -> Option<Self> {
        let core = TridiagonalLu::factor(lower, diag, upper)?;
        let n = diag.len();
        let correction = if top_right == 0.0 && bottom_left == 0.0 {
            None
        } else {
            let mut z0 = vec![0.0; n];
            z0[0] = 1.0;
            core.solve_in_place(&mut z0);
            let mut z1 = vec![0.0; n];
            z1[n - 1] = 1.0;
            core.solve_in_place(&mut z1);
            // M = T + e_0 (p e_{n-1})ᵀ + e_{n-1} (q e_0)ᵀ with U = [e_0, e_{n-1}].
            let cap = [
                [1.0 + top_right * z0[n - 1], top_right * z1[n - 1]],
                [bottom_left * z0[0], 1.0 + bottom_left * z1[0]],
            ];
            let det = cap[0][0] * cap[1][1] - cap[0][1] * cap[1][0];
            if !det.is_finite() || det.abs() < 1e-14 {
                return None;
            }
            let cap_inv = [
                [cap[1][1] / det, -cap[0][1] / det],
                [-cap[1][0] / det, cap[0][0] / det],
            ];
            Some(Correction { z0, z1, cap_inv })
        };
        Some(BorderedSolver {
            core,
            top_right,
            bottom_left,
            correction,
        })
    }

    pub fn len(&self) -> usize {
        self.core.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.is_empty()
    }

    pub fn solve(&self, rhs: &[f64], dt: f64) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: rhs.len(),
            });
        }
        let mut y = rhs.to_vec();
        self.core.solve_in_place(&mut y);
        if let Some(c) = &self.correction {
            let vy = [self.top_right * y[n - 1], self.bottom_left * y[0]];
            let w0 = c.cap_inv[0][0] * vy[0] + c.cap_inv[0][1] * vy[1];
            let w1 = c.cap_inv[1][0] * vy[0] + c.cap_inv[1][1] * vy[1];
            for i in 0..n {
                y[i] -= c.z0[i] * w0 + c.z1[i] * w1;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular { dt });
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(lower: &[f64], diag: &[f64], upper: &[f64], tr: f64, bl: f64) -> Vec<Vec<f64>> {
        let n = diag.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = diag[i];
            if i > 0 {
                m[i][i - 1] = lower[i];
            }
            if i + 1 < n {
                m[i][i + 1] = upper[i];
            }
        }
        m[0][n - 1] += tr;
        m[n - 1][0] += bl;
        m
    }

    fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn thomas_solves_simple_system() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let lu = TridiagonalLu::factor(&lower, &diag, &upper).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let m = dense(&lower, &diag, &upper, 0.0, 0.0);
        let mut b = matvec(&m, &x);
        lu.solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn bordered_matches_dense_residual() {
        let n = 9;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.5 + 0.1 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.7 + 0.02 * i as f64).collect();
        for (tr, bl) in [(0.4, -0.2), (0.0, 0.9), (-1.1, 0.0)] {
            let s = BorderedSolver::new(&lower, &diag, &upper, tr, bl).unwrap();
            let m = dense(&lower, &diag, &upper, tr, bl);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let x = s.solve(&b, 0.1).unwrap();
            let r = matvec(&m, &x);
            for (ri, bi) in r.iter().zip(&b) {
                assert!((ri - bi).abs() < 1e-12, "{ri} vs {bi}");
            }
        }
    }

    #[test]
    fn singular_core_rejected() {
        assert!(TridiagonalLu::factor(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0]).is_none());
    }
}

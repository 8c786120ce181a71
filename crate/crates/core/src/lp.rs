//! Nonnegative feasibility: find `λ >= 0` with `A·λ = d`.
//!
//! The primary route is a dense phase-I simplex with Bland's rule. For small
//! column counts a basis enumeration (Carathéodory: a feasible system has a
//! feasible solution supported on linearly independent columns) re-checks
//! every infeasible verdict.

use nalgebra::{DMatrix, DVector};

/// Column count up to which infeasible simplex verdicts are re-checked.
pub const ENUMERATION_LIMIT: usize = 8;

const PIVOT_EPS: f64 = 1e-11;

/// Result of a feasibility query.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    /// Nonnegative certificate, present iff `‖A·λ − d‖∞ <= tol`.
    pub certificate: Option<DVector<f64>>,
    /// Best `‖A·λ − d‖₁` reached by phase I; 0 when `d` lies in the cone.
    pub infeasibility: f64,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.certificate.is_some()
    }
}

/// Sup-norm residual `‖A·λ − d‖∞`.
pub fn residual(a: &DMatrix<f64>, lambda: &DVector<f64>, d: &DVector<f64>) -> f64 {
    (a * lambda - d).amax()
}

/// Decides feasibility of `A·λ = d, λ >= 0` with sup-norm residual tolerance `tol`.
pub fn nonneg_solve(a: &DMatrix<f64>, d: &DVector<f64>, tol: f64) -> Feasibility {
    assert_eq!(a.nrows(), d.len(), "row count of A must match d");
    let (lambda, infeasibility) = phase_one(a, d);
    if residual(a, &lambda, d) <= tol {
        return Feasibility {
            certificate: Some(lambda),
            infeasibility: 0.0,
        };
    }
    if a.ncols() <= ENUMERATION_LIMIT {
        if let Some(l) = basis_enumeration(a, d, tol) {
            return Feasibility {
                certificate: Some(l),
                infeasibility: 0.0,
            };
        }
    }
    Feasibility {
        certificate: None,
        infeasibility,
    }
}

/// Phase-I simplex minimizing the sum of artificial variables.
///
/// Returns the basic solution for the structural columns and the final
/// artificial sum.
pub fn phase_one(a: &DMatrix<f64>, d: &DVector<f64>) -> (DVector<f64>, f64) {
    let (m, n) = a.shape();
    let width = n + m + 1;
    let rhs = width - 1;
    let mut t = DMatrix::<f64>::zeros(m, width);
    for i in 0..m {
        let sign = if d[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, rhs)] = sign * d[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iter = 50 * (m + n + 1);
    for _ in 0..max_iter {
        // reduced-cost improvement of structural column j is the sum over
        // rows whose basic variable is artificial
        let entering = (0..n).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let gain: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[(i, j)]).sum();
            gain > PIVOT_EPS
        });
        let Some(j) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let piv = t[(i, j)];
            if piv > PIVOT_EPS {
                let ratio = t[(i, rhs)] / piv;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-15 || (ratio <= br + 1e-15 && basis[i] < basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        // bounded below by zero, so an improving column always has a positive pivot
        let Some((r, _)) = leave else { break };
        pivot(&mut t, r, j);
        basis[r] = j;
    }

    let mut lambda = DVector::zeros(n);
    let mut art = 0.0;
    for (i, &b) in basis.iter().enumerate() {
        let v = t[(i, rhs)];
        if b < n {
            lambda[b] = v.max(0.0);
        } else {
            art += v.abs();
        }
    }
    (lambda, art)
}

fn pivot(t: &mut DMatrix<f64>, r: usize, c: usize) {
    let p = t[(r, c)];
    let width = t.ncols();
    for j in 0..width {
        t[(r, j)] /= p;
    }
    for i in 0..t.nrows() {
        if i == r {
            continue;
        }
        let f = t[(i, c)];
        if f != 0.0 {
            for j in 0..width {
                let v = t[(r, j)];
                t[(i, j)] -= f * v;
            }
        }
    }
}

/// Searches all linearly independent column subsets for a nonnegative
/// solution. Exponential in the column count; intended for small cones and
/// as an oracle independent of the simplex path.
pub fn basis_enumeration(a: &DMatrix<f64>, d: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    if d.amax() <= tol {
        return Some(DVector::zeros(n));
    }
    let max_size = n.min(m);
    let mut subsets: Vec<u32> = (1u32..(1u32 << n))
        .filter(|s| (s.count_ones() as usize) <= max_size)
        .collect();
    subsets.sort_by_key(|s| (s.count_ones(), *s));
    for s in subsets {
        let cols: Vec<usize> = (0..n).filter(|&j| s & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(m, cols.len(), |i, c| a[(i, cols[c])]);
        let svd = sub.clone().svd(true, true);
        if svd.singular_values.iter().any(|&sv| sv <= 1e-10) {
            continue;
        }
        let Ok(x) = svd.solve(d, 1e-12) else { continue };
        if x.iter().any(|&v| v < -tol) {
            continue;
        }
        let mut lambda = DVector::zeros(n);
        for (c, &j) in cols.iter().enumerate() {
            lambda[j] = x[c].max(0.0);
        }
        if residual(a, &lambda, d) <= tol {
            return Some(lambda);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn long_generators() -> DMatrix<f64> {
        DMatrix::from_column_slice(3, 2, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0])
    }

    #[test]
    fn generator_is_member() {
        let e = long_generators();
        let f = nonneg_solve(&e, &DVector::from_vec(vec![1.0, -1.0, 0.0]), 1e-9);
        assert_eq!(f.certificate.unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn sum_of_generators() {
        let e = long_generators();
        let f = nonneg_solve(&e, &DVector::from_vec(vec![1.0, 0.0, -1.0]), 1e-9);
        let l = f.certificate.unwrap();
        assert!((l[0] - 1.0).abs() < 1e-12 && (l[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_generator_rejected() {
        let e = long_generators();
        let d = DVector::from_vec(vec![-1.0, 1.0, 0.0]);
        let f = nonneg_solve(&e, &d, 1e-9);
        assert!(!f.is_feasible());
        assert!(f.infeasibility > 0.5);
        assert!(basis_enumeration(&e, &d, 1e-9).is_none());
    }

    #[test]
    fn redundant_generators() {
        // six link-space style generators spanning a five-dimensional space
        let e = DMatrix::from_fn(4, 5, |i, j| match (i, j) {
            (0, 0) | (1, 1) | (2, 2) | (3, 3) => 1.0,
            (1, 0) | (2, 1) | (3, 2) | (0, 3) => -1.0,
            (0, 4) => 1.0,
            (2, 4) => -1.0,
            _ => 0.0,
        });
        let d = DVector::from_vec(vec![2.0, 0.0, -2.0, 0.0]);
        let f = nonneg_solve(&e, &d, 1e-9);
        let l = f.certificate.unwrap();
        assert!(residual(&e, &l, &d) <= 1e-9);
        assert!(l.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn zero_is_always_member() {
        let e = long_generators();
        let f = nonneg_solve(&e, &DVector::zeros(3), 1e-9);
        assert!(f.is_feasible());
        let empty = DMatrix::<f64>::zeros(3, 0);
        assert!(nonneg_solve(&empty, &DVector::zeros(3), 1e-9).is_feasible());
        assert!(
            !nonneg_solve(&empty, &DVector::from_vec(vec![1.0, -1.0, 0.0]), 1e-9).is_feasible()
        );
    }
}

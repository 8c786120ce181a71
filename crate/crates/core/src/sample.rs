//! Random points on the simplex and in generator cones.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Uniform sample from the `(k−1)`-simplex (Dirichlet(1, …, 1)).
pub fn dirichlet<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::from_fn(k, |_, _| {
        let x: f64 = Exp1.sample(rng);
        x
    });
    let s = v.sum();
    v /= s;
    v
}

/// Dirichlet sample squeezed so that every component is at least `floor`.
pub fn interior<R: Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> DVector<f64> {
    assert!(
        floor * (k as f64) < 1.0,
        "floor too large for {k} components"
    );
    let free = 1.0 - floor * k as f64;
    dirichlet(k, rng).map(|x| floor + free * x)
}

/// A point `n' = n + s·E·λ` with random `λ >= 0`, scaled so that `n'` stays
/// nonnegative. `n' − n` lies in the cone by construction.
pub fn ordered_above<R: Rng + ?Sized>(
    n: &DVector<f64>,
    generators: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    if generators.ncols() == 0 {
        return n.clone();
    }
    let lambda = DVector::from_fn(generators.ncols(), |_, _| rng.random::<f64>());
    let d = generators * lambda;
    // largest step keeping every component >= 0
    let mut s_max = 1.0f64;
    for (x, dx) in n.iter().zip(d.iter()) {
        if *dx < 0.0 {
            s_max = s_max.min(-x / dx);
        }
    }
    let s = s_max * rng.random_range(0.05..0.95);
    let mut out = n + d * s;
    out.iter_mut().for_each(|x| *x = x.max(0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interior_respects_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = interior(5, 1e-3, &mut rng);
            assert!(n.min() >= 1e-3);
            assert!((n.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ordered_pairs_stay_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = DMatrix::from_column_slice(3, 2, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        for _ in 0..200 {
            let n = dirichlet(3, &mut rng);
            let n2 = ordered_above(&n, &e, &mut rng);
            assert!(n2.min() >= 0.0);
            assert!((n2.sum() - 1.0).abs() < 1e-12);
        }
    }
}

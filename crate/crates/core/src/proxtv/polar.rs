use super::TvOperator;
use crate::error::{Error, Result};
use crate::krylov::conjugate_gradient;

/// Dual gauge of the TV ball, `||D (D^T D)^+ x0||_inf` with `x0 = x - mean(x)`.
///
/// Only the zero-mean part of `x` lies in the range of `D^T`; the mean is
/// dropped. The pseudo-inverse is applied by conjugate gradients on the graph
/// Laplacian inside the zero-mean subspace.
pub fn tv_polar(op: &TvOperator, x: &[f64], tol: f64) -> Result<f64> {
    let n = op.n_cells();
    if x.len() != n {
        return Err(Error::ShapeMismatch {
            what: "TV polar argument",
            expected: n,
            got: x.len(),
        });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let scale = centered.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let remove_mean = |v: &mut [f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|x| *x -= m);
    };
    let mut edges = vec![0.0; op.n_edges()];
    let laplacian = |v: &[f64], out: &mut [f64]| {
        let mut e = vec![0.0; op.n_edges()];
        op.d_unchecked(v, &mut e);
        op.dt_unchecked(&e, out);
    };
    let mut z = vec![0.0; n];
    conjugate_gradient(laplacian, remove_mean, &centered, &mut z, tol, 20 * n + 100)?;
    op.d_unchecked(&z, &mut edges);
    Ok(edges.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Grid;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_d(op: &TvOperator) -> DMatrix<f64> {
        let (n, m) = (op.n_cells(), op.n_edges());
        let mut d = DMatrix::zeros(m, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for (i, v) in op.d(&e).into_iter().enumerate() {
                d[(i, j)] = v;
            }
        }
        d
    }

    fn oracle(op: &TvOperator, x: &[f64]) -> f64 {
        // || (D^T)^+ x ||_inf through the SVD pseudo-inverse of D^T
        let dt = dense_d(op).transpose();
        let pinv = dt.pseudo_inverse(1e-12).unwrap();
        let y = pinv * nalgebra::DVector::from_column_slice(x);
        y.amax()
    }

    #[test]
    fn matches_dense_pseudo_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [4, 6] {
            let op = TvOperator::new(Grid::unit_square(n).unwrap());
            for _ in 0..10 {
                let mut x: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mean = x.iter().sum::<f64>() / x.len() as f64;
                x.iter_mut().for_each(|v| *v -= mean);
                let got = tv_polar(&op, &x, 1e-13).unwrap();
                let want = oracle(&op, &x);
                assert!((got - want).abs() <= 1e-8 * want.max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn known_preimage() {
        let op = TvOperator::new(Grid::unit_square(4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z: Vec<f64> = (0..op.n_edges()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = op.dt(&z);
        let got = tv_polar(&op, &x, 1e-13).unwrap();
        assert!((got - oracle(&op, &x)).abs() < 1e-8);
    }

    #[test]
    fn constant_input_is_zero() {
        let op = TvOperator::new(Grid::unit_square(5).unwrap());
        assert_eq!(tv_polar(&op, &[3.0; 25], 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn positively_homogeneous() {
        let op = TvOperator::new(Grid::unit_square(5).unwrap());
        let x: Vec<f64> = (0..25).map(|i| ((i * 7) % 11) as f64).collect();
        let base = tv_polar(&op, &x, 1e-12).unwrap();
        for a in [-3.0, 0.5, 2.0] {
            let xs: Vec<f64> = x.iter().map(|v| a * v).collect();
            let got = tv_polar(&op, &xs, 1e-12).unwrap();
            assert!((got - a.abs() * base).abs() < 1e-9 * base);
        }
    }

    #[test]
    fn duality_bound() {
        // <x, f> <= tau * polar(x) for zero-mean x and any f with TV(f) <= tau
        let op = TvOperator::new(Grid::unit_square(6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut x: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = x.iter().sum::<f64>() / 36.0;
            x.iter_mut().for_each(|v| *v -= mean);
            let f: Vec<f64> = (0..36).map(|_| rng.random_range(0.0..1.0)).collect();
            let tau = op.tv(&f);
            let inner: f64 = x.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert!(inner <= tau * tv_polar(&op, &x, 1e-12).unwrap() + 1e-10);
        }
    }
}

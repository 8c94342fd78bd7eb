use super::{GroupElement, QuadraticSpace};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random element of the Lie algebra: `X = B - G^{-1} B^T G` for uniform `B`,
/// rescaled to `|X|_F = scale`.
pub fn lie_algebra_sample(space: &QuadraticSpace, seed: u64, scale: f64) -> DMatrix<f64> {
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let x = &b - space.adjoint(&b);
    let norm = x.norm();
    if scale == 0.0 || norm == 0.0 {
        return DMatrix::zeros(d, d);
    }
    x * (scale / norm)
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor core.
pub fn expm(x: &DMatrix<f64>) -> DMatrix<f64> {
    let d = x.nrows();
    let norm1 = (0..d)
        .map(|j| x.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0i32;
    if norm1 > 0.25 {
        s = (norm1 / 0.25).log2().ceil() as i32;
    }
    let y = x / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(d, d);
    let mut term = id.clone();
    let mut sum = id;
    for k in 1..=18 {
        term = &term * &y / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(X)` for `X` in the Lie algebra, reprojected onto the group.
pub fn group_exp(space: &QuadraticSpace, x: &DMatrix<f64>, tol: f64) -> Result<GroupElement> {
    let d = space.dim();
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Input(format!("generator must be {d}x{d}")));
    }
    let skew = (x.transpose() * space.gram() + space.gram() * x).norm();
    if skew > 1e-9 * x.norm().max(1.0) {
        return Err(Error::Input(format!("generator is not in the Lie algebra (residual {skew:.3e})")));
    }
    GroupElement::new_reprojected(space.clone(), expm(x), tol)
}

/// `log(P)` for unipotent `P`, as the terminating series in `P - I`.
pub fn log_unipotent(p: &DMatrix<f64>) -> DMatrix<f64> {
    let d = p.nrows();
    let n = p - DMatrix::<f64>::identity(d, d);
    let mut power = n.clone();
    let mut out = DMatrix::zeros(d, d);
    for k in 1..=d {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out += &power * (sign / k as f64);
        power = &power * &n;
    }
    out
}

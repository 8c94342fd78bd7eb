//! Linear algebra over R^{2,n+1}: the form, group membership, spectra,
//! Jordan decomposition, normal forms and isotropic invariant subspaces.

mod expm;
pub(crate) mod isotropic;
mod jordan;
pub(crate) mod spectrum;

pub use expm::{expm, group_exp, lie_algebra_sample, log_unipotent};
pub use isotropic::{
    hyperbolic_normal_form, invariant_isotropic_plane, isotropic_fixed_rays, IsotropicPlane, IsotropicRay,
};
pub use jordan::{classify_matrix, jordan_decompose, JordanParts, MatrixClass};
pub use spectrum::{eigendecompose, Cluster, SpectralData};

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    Diagonal,
    Split,
}

/// R^{n+3} with a signature (2, n+1) form in a fixed basis.
///
/// Diagonal mode uses `-x^2 - y^2 + |z|^2` with coordinates `(x, y, z_1..z_{n+1})`.
/// Split mode uses `2xy + 2zt + w_1^2 + ... + w_{n-1}^2` with coordinates
/// `(x, y, z, t, w_1..w_{n-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpace {
    n: usize,
    mode: BasisMode,
    gram: DMatrix<f64>,
}

impl QuadraticSpace {
    /// Panics if `n == 0`.
    pub fn new(n: usize, mode: BasisMode) -> Self {
        assert!(n >= 1, "sphere dimension must be at least 1");
        let d = n + 3;
        let mut gram = DMatrix::zeros(d, d);
        match mode {
            BasisMode::Diagonal => {
                for i in 0..d {
                    gram[(i, i)] = if i < 2 { -1.0 } else { 1.0 };
                }
            }
            BasisMode::Split => {
                for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
                    gram[(i, j)] = 1.0;
                }
                for i in 4..d {
                    gram[(i, i)] = 1.0;
                }
            }
        }
        QuadraticSpace { n, mode, gram }
    }

    pub fn diagonal(n: usize) -> Self {
        Self::new(n, BasisMode::Diagonal)
    }

    pub fn split(n: usize) -> Self {
        Self::new(n, BasisMode::Split)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 3
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// In both modes the Gram matrix is an involution, so `G^{-1} = G`.
    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn form(&self, v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
        if v.len() != self.dim() || w.len() != self.dim() {
            return Err(Error::Input(format!(
                "vector length {} / {} does not match ambient dimension {}",
                v.len(),
                w.len(),
                self.dim()
            )));
        }
        Ok(self.form_unchecked(v.as_slice(), w.as_slice()))
    }

    pub(crate) fn form_unchecked(&self, v: &[f64], w: &[f64]) -> f64 {
        match self.mode {
            BasisMode::Diagonal => -v[0] * w[0] - v[1] * w[1] + dot(&v[2..], &w[2..]),
            BasisMode::Split => {
                v[0] * w[1] + v[1] * w[0] + v[2] * w[3] + v[3] * w[2] + dot(&v[4..], &w[4..])
            }
        }
    }

    pub fn quad(&self, v: &DVector<f64>) -> Result<f64> {
        self.form(v, v)
    }

    /// Columns are the basis vectors of `self` written in diagonal coordinates,
    /// so `B^T G_diag B = G_self`.
    pub fn basis_in_diagonal(&self) -> DMatrix<f64> {
        let d = self.dim();
        match self.mode {
            BasisMode::Diagonal => DMatrix::identity(d, d),
            BasisMode::Split => {
                let mut b = DMatrix::zeros(d, d);
                let s = FRAC_1_SQRT_2;
                b[(0, 0)] = s;
                b[(2, 0)] = s;
                b[(0, 1)] = -s;
                b[(2, 1)] = s;
                b[(1, 2)] = s;
                b[(3, 2)] = s;
                b[(1, 3)] = -s;
                b[(3, 3)] = s;
                for i in 4..d {
                    b[(i, i)] = 1.0;
                }
                b
            }
        }
    }

    /// `G^{-1} X^T G`, the adjoint with respect to the form.
    pub fn adjoint(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.gram * x.transpose() * &self.gram
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(residual <= tol * max(1, |A|_F^2), residual)` with `residual = |A^T G A - G|_F`.
pub fn is_group_member(space: &QuadraticSpace, mat: &DMatrix<f64>, tol: f64) -> Result<(bool, f64)> {
    let d = space.dim();
    if mat.nrows() != d || mat.ncols() != d {
        return Err(Error::Input(format!(
            "matrix is {}x{}, expected {d}x{d}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    if mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    let r = form_residual(space, mat);
    let scale = mat.norm_squared().max(1.0);
    Ok((r <= tol * scale, r))
}

fn form_residual(space: &QuadraticSpace, mat: &DMatrix<f64>) -> f64 {
    (mat.transpose() * space.gram() * mat - space.gram()).norm()
}

/// One or more Newton steps `X <- X (3I - G^{-1} X^T G X) / 2` towards the group.
pub fn reproject(space: &QuadraticSpace, mat: &DMatrix<f64>) -> DMatrix<f64> {
    let d = space.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let mut x = mat.clone();
    let mut res = form_residual(space, &x);
    for _ in 0..30 {
        if res <= 1e-12 * x.norm_squared().max(1.0) {
            break;
        }
        let m = space.adjoint(&x) * &x;
        let next = &x * (&id * 3.0 - m) * 0.5;
        let r = form_residual(space, &next);
        if !(r < res) {
            break;
        }
        x = next;
        res = r;
    }
    x
}

/// An element of O(2,n+1) together with its membership residual and
/// time-orientation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    space: QuadraticSpace,
    mat: DMatrix<f64>,
    form_residual: f64,
    top: bool,
}

impl GroupElement {
    /// Admits `mat` if it preserves the form within `tol` (relative to `|A|_F^2`).
    pub fn new(space: QuadraticSpace, mat: DMatrix<f64>, tol: f64) -> Result<Self> {
        let (ok, r) = is_group_member(&space, &mat, tol)?;
        if !ok {
            return Err(Error::Input(format!("matrix does not preserve the form (residual {r:.3e})")));
        }
        let top = orientation_sign(&space, &mat)?;
        Ok(GroupElement { space, mat, form_residual: r, top })
    }

    /// Reprojects `mat` onto the group before admitting it.
    pub fn new_reprojected(space: QuadraticSpace, mat: DMatrix<f64>, tol: f64) -> Result<Self> {
        let m = reproject(&space, &mat);
        Self::new(space, m, tol)
    }

    fn trusted(space: QuadraticSpace, mat: DMatrix<f64>, top: bool) -> Self {
        let form_residual = form_residual(&space, &mat);
        GroupElement { space, mat, form_residual, top }
    }

    pub fn identity(space: QuadraticSpace) -> Self {
        let d = space.dim();
        Self::trusted(space, DMatrix::identity(d, d), true)
    }

    pub fn space(&self) -> &QuadraticSpace {
        &self.space
    }

    pub fn mat(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn form_residual(&self) -> f64 {
        self.form_residual
    }

    /// True when the element preserves the time orientation.
    pub fn top(&self) -> bool {
        self.top
    }

    fn check_space(&self, other: &GroupElement) {
        assert_eq!(self.space, other.space, "group elements live in different spaces");
    }

    /// Product `self * other`, reprojected.
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        self.check_space(other);
        let m = reproject(&self.space, &(&self.mat * &other.mat));
        Self::trusted(self.space.clone(), m, self.top == other.top)
    }

    /// Exact inverse `G^{-1} A^T G`.
    pub fn inverse(&self) -> GroupElement {
        Self::trusted(self.space.clone(), self.space.adjoint(&self.mat), self.top)
    }

    pub fn powi(&self, k: i64) -> GroupElement {
        let mut base = if k < 0 { self.inverse() } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = GroupElement::identity(self.space.clone());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// `chi * self * chi^{-1}`.
    pub fn conjugate_by(&self, chi: &GroupElement) -> GroupElement {
        chi.mul(self).mul(&chi.inverse())
    }

    /// The same transformation written in the diagonal basis.
    pub fn to_diagonal(&self) -> GroupElement {
        self.to_mode(BasisMode::Diagonal)
    }

    pub fn to_mode(&self, mode: BasisMode) -> GroupElement {
        if self.space.mode == mode {
            return self.clone();
        }
        let target = QuadraticSpace::new(self.space.n, mode);
        // v_diag = B_self v_self, v_target = B_target^{-1} v_diag
        let b_self = self.space.basis_in_diagonal();
        let b_tgt = target.basis_in_diagonal();
        let diag = QuadraticSpace::diagonal(self.space.n);
        let b_tgt_inv = target.gram() * b_tgt.transpose() * diag.gram();
        let c = &b_tgt_inv * &b_self;
        let c_inv = self.space.gram() * b_self.transpose() * diag.gram() * &b_tgt;
        let m = reproject(&target, &(&c * &self.mat * &c_inv));
        Self::trusted(target, m, self.top)
    }

    /// Frobenius distance to the identity.
    pub fn distance_to_identity(&self) -> f64 {
        let d = self.space.dim();
        (&self.mat - DMatrix::<f64>::identity(d, d)).norm()
    }
}

/// Pushes the section tangent `d/dtheta` through the induced map at several
/// sample points and reads off the sign of its theta component.
pub fn is_time_orientation_preserving(a: &GroupElement) -> Result<bool> {
    orientation_sign(a.space(), a.mat())
}

fn orientation_sign(space: &QuadraticSpace, mat: &DMatrix<f64>) -> Result<bool> {
    let m = if space.mode() == BasisMode::Diagonal {
        mat.clone()
    } else {
        let b = space.basis_in_diagonal();
        let diag = QuadraticSpace::diagonal(space.n());
        let b_inv = space.gram() * b.transpose() * diag.gram();
        &b * mat * b_inv
    };
    let d = space.dim();
    const K: usize = 8;
    let mut pos = 0;
    let mut neg = 0;
    for j in 0..K {
        let theta = std::f64::consts::TAU * (j as f64 + 0.37) / K as f64;
        let mut p = DVector::zeros(d);
        let mut w = DVector::zeros(d);
        p[0] = theta.cos();
        p[1] = theta.sin();
        w[0] = -theta.sin();
        w[1] = theta.cos();
        let mut norm = 0.0;
        for i in 2..d {
            let c = ((j + 1) as f64 * (i as f64) * 0.7 + 0.3).cos();
            p[i] = c;
            norm += c * c;
        }
        let norm = norm.sqrt();
        for i in 2..d {
            p[i] /= norm;
        }
        let v = &m * &p;
        let u = &m * &w;
        let r2 = v[0] * v[0] + v[1] * v[1];
        let dtheta = (v[0] * u[1] - v[1] * u[0]) / r2;
        if !dtheta.is_finite() {
            return Err(Error::Degenerate("image left the null cone".into()));
        }
        if dtheta > 0.0 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    match (pos, neg) {
        (_, 0) => Ok(true),
        (0, _) => Ok(false),
        _ => Err(Error::Degenerate(format!(
            "time-orientation signs disagree across samples ({pos} positive, {neg} negative)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_examples() {
        let s = QuadraticSpace::diagonal(2);
        let mut v = DVector::zeros(5);
        v[0] = 1.0;
        v[2] = 1.0;
        assert_eq!(s.form(&v, &v).unwrap(), 0.0);
        let e3 = DVector::from_fn(5, |i, _| if i == 2 { 1.0 } else { 0.0 });
        assert_eq!(s.form(&e3, &e3).unwrap(), 1.0);
        let sp = QuadraticSpace::split(1);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let e2 = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(sp.form(&e1, &e2).unwrap(), 1.0);
        assert!(s.form(&e1, &e1).is_err());
    }

    #[test]
    fn split_basis_change_realizes_form() {
        for n in 1..5 {
            let sp = QuadraticSpace::split(n);
            let b = sp.basis_in_diagonal();
            let g = b.transpose() * QuadraticSpace::diagonal(n).gram() * &b;
            assert!((g - sp.gram()).norm() < 1e-15);
        }
    }

    #[test]
    fn gram_signature() {
        for mode in [BasisMode::Diagonal, BasisMode::Split] {
            let s = QuadraticSpace::new(3, mode);
            let eig = s.gram().clone().symmetric_eigenvalues();
            assert_eq!(eig.iter().filter(|x| **x < 0.0).count(), 2);
            assert_eq!(eig.iter().filter(|x| **x > 0.0).count(), 4);
        }
    }

    #[test]
    fn membership_examples() {
        let s = QuadraticSpace::diagonal(2);
        let id = DMatrix::<f64>::identity(5, 5);
        assert_eq!(is_group_member(&s, &id, 1e-9).unwrap(), (true, 0.0));
        let (ok, r) = is_group_member(&s, &(id.clone() * 2.0), 1e-9).unwrap();
        assert!(!ok);
        assert!((r - 3.0 * s.gram().norm()).abs() < 1e-12);
        let mut bad = id;
        bad[(0, 0)] = f64::NAN;
        assert!(is_group_member(&s, &bad, 1e-9).is_err());
    }

    #[test]
    fn orientation_examples() {
        let s = QuadraticSpace::diagonal(2);
        assert!(GroupElement::identity(s.clone()).top());
        let mut refl = DMatrix::<f64>::identity(5, 5);
        refl[(1, 1)] = -1.0;
        assert!(!GroupElement::new(s.clone(), refl, 1e-9).unwrap().top());
        let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
        let mut rot = DMatrix::<f64>::identity(5, 5);
        rot[(0, 0)] = c;
        rot[(0, 1)] = -sn;
        rot[(1, 0)] = sn;
        rot[(1, 1)] = c;
        assert!(GroupElement::new(s.clone(), rot, 1e-9).unwrap().top());
        // a reflection of one sphere axis keeps the time orientation
        let mut zr = DMatrix::<f64>::identity(5, 5);
        zr[(4, 4)] = -1.0;
        assert!(GroupElement::new(s, zr, 1e-9).unwrap().top());
    }

    #[test]
    fn reprojection_restores_membership() {
        let s = QuadraticSpace::diagonal(2);
        let x = lie_algebra_sample(&s, 3, 1.5);
        let a = expm(&x);
        let noisy = a.map(|v| v * (1.0 + 1e-7));
        let fixed = reproject(&s, &noisy);
        let (ok, r) = is_group_member(&s, &fixed, 1e-12).unwrap();
        assert!(ok, "residual {r}");
        assert!((&fixed - &a).norm() < 1e-6);
    }

    #[test]
    fn mode_round_trip() {
        let sp = QuadraticSpace::split(2);
        let mut h = DMatrix::<f64>::identity(5, 5);
        h[(0, 0)] = 2.0;
        h[(1, 1)] = 0.5;
        let g = GroupElement::new(sp, h.clone(), 1e-9).unwrap();
        assert!(g.top());
        let d = g.to_diagonal();
        assert!(is_group_member(d.space(), d.mat(), 1e-12).unwrap().0);
        let back = d.to_mode(BasisMode::Split);
        assert!((back.mat() - h).norm() < 1e-12);
    }

    #[test]
    fn inverse_and_powers() {
        let s = QuadraticSpace::diagonal(2);
        let a = group_exp(&s, &lie_algebra_sample(&s, 9, 1.0), 1e-9).unwrap();
        let id = a.mul(&a.inverse());
        assert!(id.distance_to_identity() < 1e-12);
        let p3 = a.powi(3);
        let direct = a.mat() * a.mat() * a.mat();
        assert!((p3.mat() - &direct).norm() < 1e-10 * direct.norm());
        assert!(a.powi(-2).mul(&a.powi(2)).distance_to_identity() < 1e-10);
    }
}

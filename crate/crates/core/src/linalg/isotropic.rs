use super::spectrum::{additive_jordan, kernel, kernel_complex, C64};
use super::{BasisMode, GroupElement, QuadraticSpace};
use crate::config::Tolerances;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::FRAC_1_SQRT_2;

/// A null eigendirection with positive eigenvalue, i.e. a fixed point on
/// the Einstein universe.
#[derive(Debug, Clone)]
pub struct IsotropicRay {
    /// Unit Euclidean norm, in the coordinates of the element's space.
    pub v: DVector<f64>,
    pub eigenvalue: f64,
    /// `|Av - lambda v| / |v|`.
    pub eig_residual: f64,
    /// `|Q(v)| / |v|^2`.
    pub null_residual: f64,
}

/// Section coordinates `(theta, z)` of a null vector given in `space`.
pub(crate) fn section_coords(space: &QuadraticSpace, v: &DVector<f64>) -> (f64, DVector<f64>) {
    let vd = if space.mode() == BasisMode::Diagonal { v.clone() } else { space.basis_in_diagonal() * v };
    let theta = vd[1].atan2(vd[0]);
    let z = vd.rows(2, vd.len() - 2).into_owned();
    let zn = z.norm();
    (theta, z / zn)
}

fn same_point(space: &QuadraticSpace, a: &DVector<f64>, b: &DVector<f64>) -> bool {
    let (ta, za) = section_coords(space, a);
    let (tb, zb) = section_coords(space, b);
    let dt = (ta - tb).sin().abs().max(((ta - tb).cos() - 1.0).abs());
    dt < 1e-6 && (za - zb).norm() < 1e-6
}

/// All isotropic eigendirections with positive eigenvalue, up to positive
/// scaling. Eigenspaces of dimension > 1 contribute a finite spanning family
/// of their null cone: null kernel vectors and the combinations
/// `u_-/sqrt|d_-| +- u_+/sqrt d_+` of negative and positive directions.
pub fn isotropic_fixed_rays(a: &GroupElement, tol: &Tolerances) -> Result<Vec<IsotropicRay>> {
    let space = a.space();
    let d = space.dim();
    let add = additive_jordan(a.mat(), tol)?;
    let scale = a.mat().norm().max(1.0);
    let mut out: Vec<IsotropicRay> = Vec::new();
    for c in &add.clusters {
        if c.mean.im != 0.0 || c.mean.re <= 0.0 {
            continue;
        }
        let mu = c.mean.re;
        let shifted = a.mat() - DMatrix::<f64>::identity(d, d) * mu;
        let (v, _) = kernel(&shifted, 1e-9 * scale, 1);
        let gv = v.transpose() * space.gram() * &v;
        let eig = gv.clone().symmetric_eigen();
        let k = v.ncols();
        let col = |i: usize| -> DVector<f64> { &v * eig.eigenvectors.column(i) };
        let zero_tol = 1e-8;
        let mut candidates: Vec<DVector<f64>> = Vec::new();
        let mut negs = Vec::new();
        let mut poss = Vec::new();
        for i in 0..k {
            let di = eig.eigenvalues[i];
            if di.abs() <= zero_tol {
                candidates.push(col(i));
            } else if di < 0.0 {
                negs.push(i);
            } else {
                poss.push(i);
            }
        }
        for &i in &negs {
            for &j in &poss {
                let a_ = col(i) / eig.eigenvalues[i].abs().sqrt();
                let b_ = col(j) / eig.eigenvalues[j].sqrt();
                candidates.push(&a_ + &b_);
                candidates.push(&a_ - &b_);
            }
        }
        for cand in candidates {
            for sign in [1.0, -1.0] {
                let w = &cand * sign;
                let w = &w / w.norm();
                let aw = a.mat() * &w;
                let lambda = w.dot(&aw);
                if lambda <= 0.0 {
                    continue;
                }
                let eig_residual = (&aw - &w * lambda).norm();
                let null_residual = space.form_unchecked(w.as_slice(), w.as_slice()).abs();
                if eig_residual > tol.fix * scale || null_residual > tol.fix {
                    continue;
                }
                if out.iter().any(|r| same_point(space, &r.v, &w)) {
                    continue;
                }
                out.push(IsotropicRay { v: w, eigenvalue: lambda, eig_residual, null_residual });
            }
        }
    }
    Ok(out)
}

/// A totally isotropic invariant 2-plane.
#[derive(Debug, Clone)]
pub struct IsotropicPlane {
    /// Euclidean-orthonormal spanning pair.
    pub basis: [DVector<f64>; 2],
    /// Set when the element acts trivially and the plane is a canonical choice.
    pub degenerate: bool,
    /// Largest of the isotropy and invariance defects.
    pub residual: f64,
}

/// Invariant totally isotropic 2-plane on which the element rotates: the
/// real span of a null eigenvector `a + ib` for a non-real eigenvalue.
///
/// Planes made of two real eigendirections are not reported. The identity
/// returns a canonical plane with `degenerate = true`.
pub fn invariant_isotropic_plane(a: &GroupElement, tol: &Tolerances) -> Result<Option<IsotropicPlane>> {
    let space = a.space();
    let d = space.dim();
    if a.distance_to_identity() <= tol.fix {
        let mut e = DVector::zeros(d);
        let mut f = DVector::zeros(d);
        e[0] = FRAC_1_SQRT_2;
        e[2] = FRAC_1_SQRT_2;
        f[1] = FRAC_1_SQRT_2;
        f[3] = FRAC_1_SQRT_2;
        let b = space.basis_in_diagonal();
        let binv = space.gram() * b.transpose() * QuadraticSpace::diagonal(space.n()).gram();
        let (e, f) = (&binv * e, &binv * f);
        let (e, f) = orthonormal_pair(&e, &f);
        return Ok(Some(IsotropicPlane { basis: [e, f], degenerate: true, residual: 0.0 }));
    }
    let add = additive_jordan(a.mat(), tol)?;
    let scale = a.mat().norm().max(1.0);
    let mc = a.mat().map(|x| C64::new(x, 0.0));
    let gc = space.gram().map(|x| C64::new(x, 0.0));
    for c in &add.clusters {
        if c.mean.im <= add.cluster_tol {
            continue;
        }
        let shifted = &mc - DMatrix::<C64>::identity(d, d) * c.mean;
        let v = kernel_complex(&shifted, 1e-8 * scale, 1);
        let on_circle = (c.mean.norm() - 1.0).abs() <= add.cluster_tol;
        let mut cands: Vec<DVector<C64>> = Vec::new();
        if !on_circle {
            for j in 0..v.ncols() {
                cands.push(v.column(j).into_owned());
            }
        } else {
            let h = v.adjoint() * &gc * &v;
            let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let k = v.ncols();
            for i in 0..k {
                for j in 0..k {
                    let (di, dj) = (eig.eigenvalues[i], eig.eigenvalues[j]);
                    if di < -1e-9 && dj > 1e-9 {
                        let wi = &v * eig.eigenvectors.column(i) * C64::new(1.0 / di.abs().sqrt(), 0.0);
                        let wj = &v * eig.eigenvectors.column(j) * C64::new(1.0 / dj.sqrt(), 0.0);
                        cands.push(wi + wj);
                    }
                }
            }
        }
        for w in cands {
            let re = w.map(|z| z.re);
            let im = w.map(|z| z.im);
            if re.norm() < 1e-6 || im.norm() < 1e-6 {
                continue;
            }
            let (e, f) = orthonormal_pair(&re, &im);
            let q = |x: &DVector<f64>, y: &DVector<f64>| space.form_unchecked(x.as_slice(), y.as_slice()).abs();
            let iso = q(&e, &e).max(q(&f, &f)).max(q(&e, &f));
            let mut inv = 0.0f64;
            for b in [&e, &f] {
                let ab = a.mat() * b;
                let proj = &e * e.dot(&ab) + &f * f.dot(&ab);
                inv = inv.max((ab - proj).norm() / scale);
            }
            let residual = iso.max(inv);
            if residual <= 1e-8 {
                return Ok(Some(IsotropicPlane { basis: [e, f], degenerate: false, residual }));
            }
        }
    }
    Ok(None)
}

fn orthonormal_pair(a: &DVector<f64>, b: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let e = a / a.norm();
    let f = b - &e * e.dot(b);
    let f = &f / f.norm();
    (e, f)
}

/// Basis (columns, in the coordinates of `h`'s space) in which `h` becomes
/// `diag(l1, 1/l1, l2, 1/l2, 1, ..., 1)` and the form becomes the split form.
pub fn hyperbolic_normal_form(h: &GroupElement, tol: &Tolerances) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let space = h.space();
    let d = space.dim();
    let add = additive_jordan(h.mat(), tol)?;
    let scale = h.mat().norm().max(1.0);
    let hyperbolic = add.nil.norm() <= tol.nilp * scale
        && add.eigenvalues.iter().all(|l| l.im.abs() <= add.cluster_tol && l.re > 0.0);
    if !hyperbolic {
        return Err(Error::Precondition("element is not hyperbolic".into()));
    }
    let split = QuadraticSpace::split(space.n());
    // already in normal form
    if space.mode() == BasisMode::Split {
        let m = h.mat();
        let off = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].abs())
            .fold(0.0, f64::max);
        let diag: Vec<f64> = (0..d).map(|i| m[(i, i)]).collect();
        let paired = (diag[0] * diag[1] - 1.0).abs() < 1e-12
            && (diag[2] * diag[3] - 1.0).abs() < 1e-12
            && diag[4..].iter().all(|x| (x - 1.0).abs() < 1e-12)
            && diag[0] >= diag[2]
            && diag[2] >= 1.0 - 1e-12;
        if off <= 1e-12 * scale && paired {
            return Ok((DMatrix::identity(d, d), diag));
        }
    }
    let g = space.gram();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut pairs: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    let eig_space = |mu: f64| -> DMatrix<f64> {
        let shifted = h.mat() - DMatrix::<f64>::identity(d, d) * mu;
        let mult = add
            .clusters
            .iter()
            .find(|c| (c.mean.re - mu).abs() < 1e-12)
            .map(|c| c.multiplicity())
            .unwrap_or(1);
        kernel(&shifted, 0.0, mult).0
    };
    let mut one_cluster = None;
    for c in &add.clusters {
        let mu = c.mean.re;
        if (mu - 1.0).abs() <= add.cluster_tol {
            one_cluster = Some(mu);
            continue;
        }
        if mu < 1.0 {
            continue;
        }
        let partner = add
            .clusters
            .iter()
            .min_by(|a, b| (a.mean.re - 1.0 / mu).abs().partial_cmp(&(b.mean.re - 1.0 / mu).abs()).unwrap())
            .expect("nonempty");
        let ve = eig_space(mu);
        let vf = eig_space(partner.mean.re);
        if ve.ncols() != vf.ncols() {
            return Err(Error::Degenerate("eigenvalue pairing failed".into()));
        }
        let pairing = ve.transpose() * g * &vf;
        let pinv = pairing.try_inverse().ok_or_else(|| Error::Degenerate("singular pairing".into()))?;
        let vf = vf * pinv.transpose();
        for j in 0..ve.ncols() {
            let mut e = ve.column(j).into_owned();
            let mut f = vf.column(j).into_owned();
            let big = e.iamax();
            if e[big] < 0.0 {
                e = -e;
                f = -f;
            }
            pairs.push((mu, e, f));
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (mu, e, f) in &pairs {
        cols.push(e.clone());
        cols.push(f.clone());
        vals.push(*mu);
        vals.push(1.0 / mu);
    }
    let npairs = pairs.len();
    if npairs > 2 {
        return Err(Error::Degenerate("more than two hyperbolic pairs".into()));
    }
    if let Some(mu1) = one_cluster {
        let v1 = eig_space(mu1);
        let g1 = v1.transpose() * g * &v1;
        let eig = g1.symmetric_eigen();
        let mut negs = Vec::new();
        let mut poss = Vec::new();
        for i in 0..v1.ncols() {
            let di = eig.eigenvalues[i];
            let u = &v1 * eig.eigenvectors.column(i) / di.abs().sqrt();
            if di < 0.0 {
                negs.push(u);
            } else {
                poss.push(u);
            }
        }
        if negs.len() + npairs != 2 {
            return Err(Error::Degenerate("eigenvalue-1 subspace has the wrong signature".into()));
        }
        let mut poss = poss.into_iter();
        for gn in negs {
            let gp = poss.next().ok_or_else(|| Error::Degenerate("missing positive direction".into()))?;
            cols.push((&gn + &gp) * FRAC_1_SQRT_2);
            cols.push((&gp - &gn) * FRAC_1_SQRT_2);
            vals.push(1.0);
            vals.push(1.0);
        }
        for w in poss {
            cols.push(w);
            vals.push(1.0);
        }
    }
    if cols.len() != d {
        return Err(Error::Degenerate("normal form basis is incomplete".into()));
    }
    let b = DMatrix::from_columns(&cols);
    let resid = (b.transpose() * g * &b - split.gram()).norm();
    if resid > tol.group.max(1e-9) * b.norm_squared().max(1.0) {
        return Err(Error::Degenerate(format!("split relations violated ({resid:.3e})")));
    }
    Ok((b, vals))
}

use super::spectrum::{additive_jordan, C64};
use super::{reproject, GroupElement};
use crate::config::Tolerances;
use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Commuting factors `A = E H P`: elliptic, hyperbolic and unipotent.
#[derive(Debug, Clone)]
pub struct JordanParts {
    pub elliptic: GroupElement,
    pub hyperbolic: GroupElement,
    pub parabolic: GroupElement,
    pub commutator_residual: f64,
    pub reconstruction_residual: f64,
    pub semisimple_defect: f64,
    pub cluster_tol: f64,
    pub warnings: Vec<String>,
}

/// Snapping an eigenvalue to 1 is reported only above roundoff level.
const SNAP_QUIET: f64 = 1e-10;

pub fn jordan_decompose(a: &GroupElement, tol: &Tolerances) -> Result<JordanParts> {
    let space = a.space().clone();
    let d = space.dim();
    let id = DMatrix::<f64>::identity(d, d);
    let add = additive_jordan(a.mat(), tol)?;
    let mut warnings = add.warnings.clone();
    let s_inv = add
        .s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Internal("semisimple part is singular".into()))?;
    let p = &id + &s_inv * &add.nil;
    let mut h = DMatrix::<C64>::zeros(d, d);
    let mut e = DMatrix::<C64>::zeros(d, d);
    let mut snapped: f64 = 0.0;
    for (c, proj) in add.clusters.iter().zip(&add.projectors) {
        let mut modulus = c.mean.norm();
        let mut phase = c.mean / modulus;
        // ties near 1 go to the factor already nearest the identity
        if (modulus - 1.0).abs() <= add.cluster_tol {
            snapped = snapped.max((modulus - 1.0).abs());
            modulus = 1.0;
        }
        if (phase - C64::new(1.0, 0.0)).norm() <= add.cluster_tol {
            snapped = snapped.max((phase - C64::new(1.0, 0.0)).norm());
            phase = C64::new(1.0, 0.0);
        }
        h += proj * C64::new(modulus, 0.0);
        e += proj * phase;
    }
    if snapped > SNAP_QUIET {
        warnings.push(format!("eigenvalue {snapped:.1e} from 1 assigned to the trivial factor"));
    }
    let h = reproject(&space, &h.map(|z| z.re));
    let e = reproject(&space, &e.map(|z| z.re));
    let p = reproject(&space, &p);
    let top_e = a.top();
    let elliptic = GroupElement::new(space.clone(), e, tol.group.max(1e-6))
        .map_err(|err| Error::Internal(format!("elliptic factor left the group: {err}")))?;
    let hyperbolic = GroupElement::new(space.clone(), h, tol.group.max(1e-6))
        .map_err(|err| Error::Internal(format!("hyperbolic factor left the group: {err}")))?;
    let parabolic = GroupElement::new(space.clone(), p, tol.group.max(1e-6))
        .map_err(|err| Error::Internal(format!("parabolic factor left the group: {err}")))?;
    if elliptic.top() != top_e || !hyperbolic.top() || !parabolic.top() {
        warnings.push("factor time orientation inconsistent with the input".into());
    }
    let (em, hm, pm) = (elliptic.mat(), hyperbolic.mat(), parabolic.mat());
    let comm = [
        (em * hm - hm * em).norm(),
        (em * pm - pm * em).norm(),
        (hm * pm - pm * hm).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let recon = (em * hm * pm - a.mat()).norm();
    Ok(JordanParts {
        elliptic,
        hyperbolic,
        parabolic,
        commutator_residual: comm,
        reconstruction_residual: recon,
        semisimple_defect: add.nil.norm(),
        cluster_tol: add.cluster_tol,
        warnings,
    })
}

/// Conjugacy type of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixClass {
    Elliptic,
    Hyperbolic,
    Parabolic,
    /// Which Jordan factors are nontrivial.
    Mixed { elliptic: bool, hyperbolic: bool, parabolic: bool },
}

impl MatrixClass {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixClass::Elliptic => "elliptic",
            MatrixClass::Hyperbolic => "hyperbolic",
            MatrixClass::Parabolic => "parabolic",
            MatrixClass::Mixed { .. } => "mixed",
        }
    }
}

const TRIVIAL_FACTOR: f64 = 1e-7;

/// Elliptic, hyperbolic, parabolic or mixed. The identity counts as elliptic.
pub fn classify_matrix(a: &GroupElement, tol: &Tolerances) -> Result<MatrixClass> {
    let parts = jordan_decompose(a, tol)?;
    Ok(classify_from_parts(a, &parts, tol))
}

pub(crate) fn classify_from_parts(a: &GroupElement, parts: &JordanParts, tol: &Tolerances) -> MatrixClass {
    let scale = a.mat().norm().max(1.0);
    let defect_ok = parts.semisimple_defect <= tol.nilp * scale;
    let ct = parts.cluster_tol;
    let e_triv = parts.elliptic.distance_to_identity() <= TRIVIAL_FACTOR;
    let h_triv = parts.hyperbolic.distance_to_identity() <= TRIVIAL_FACTOR;
    let p_triv = parts.parabolic.distance_to_identity() <= TRIVIAL_FACTOR * scale;
    let spec = super::spectrum::eigenvalues(a.mat()).unwrap_or_default();
    let unit = spec.iter().all(|l| (l.norm() - 1.0).abs() <= ct);
    let realpos = spec.iter().all(|l| l.im.abs() <= ct && l.re > 0.0);
    if defect_ok && unit {
        return MatrixClass::Elliptic;
    }
    if defect_ok && realpos {
        return MatrixClass::Hyperbolic;
    }
    if e_triv && h_triv {
        let d = a.space().dim();
        let m = a.mat() - DMatrix::<f64>::identity(d, d);
        let mut pw = m.clone();
        for _ in 1..d {
            pw = &pw * &m;
        }
        if pw.norm() <= tol.nilp * m.norm().max(1.0).powi(d as i32) {
            return MatrixClass::Parabolic;
        }
    }
    MatrixClass::Mixed { elliptic: !e_triv, hyperbolic: !h_triv, parabolic: !p_triv }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, group_exp, lie_algebra_sample, QuadraticSpace};

    fn rotation_boost(n: usize, alpha: f64, mu: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        // rotation in (z1, z2), boost in (x, z3); the planes are orthogonal
        let d = n + 3;
        let mut r = DMatrix::identity(d, d);
        r[(2, 2)] = alpha.cos();
        r[(2, 3)] = -alpha.sin();
        r[(3, 2)] = alpha.sin();
        r[(3, 3)] = alpha.cos();
        let mut b = DMatrix::identity(d, d);
        b[(0, 0)] = mu.cosh();
        b[(0, 4)] = mu.sinh();
        b[(4, 0)] = mu.sinh();
        b[(4, 4)] = mu.cosh();
        (r, b)
    }

    #[test]
    fn identity_decomposes_trivially() {
        let s = QuadraticSpace::diagonal(2);
        let parts = jordan_decompose(&GroupElement::identity(s.clone()), &Tolerances::default()).unwrap();
        for f in [&parts.elliptic, &parts.hyperbolic, &parts.parabolic] {
            assert!(f.distance_to_identity() < 1e-14);
        }
        assert_eq!(classify_matrix(&GroupElement::identity(s), &Tolerances::default()).unwrap(), MatrixClass::Elliptic);
    }

    #[test]
    fn recovers_commuting_rotation_and_boost() {
        let s = QuadraticSpace::diagonal(2);
        let (r, b) = rotation_boost(2, 0.8, 0.6);
        let a = GroupElement::new(s, &r * &b, 1e-9).unwrap();
        let tol = Tolerances::default();
        let parts = jordan_decompose(&a, &tol).unwrap();
        assert!((parts.elliptic.mat() - &r).norm() < 1e-8);
        assert!((parts.hyperbolic.mat() - &b).norm() < 1e-8);
        assert!(parts.parabolic.distance_to_identity() < 1e-8);
        assert!(parts.reconstruction_residual < 1e-8);
        assert!(parts.commutator_residual < 1e-8);
        assert_eq!(
            classify_matrix(&a, &tol).unwrap(),
            MatrixClass::Mixed { elliptic: true, hyperbolic: true, parabolic: false }
        );
    }

    #[test]
    fn unipotent_shear_is_its_own_parabolic_part() {
        let s = QuadraticSpace::split(2);
        let mut nmat = DMatrix::<f64>::zeros(5, 5);
        nmat[(2, 4)] = 0.7;
        nmat[(4, 3)] = -0.7;
        let p = expm(&nmat);
        let a = GroupElement::new(s, p.clone(), 1e-9).unwrap();
        let tol = Tolerances::default();
        let parts = jordan_decompose(&a, &tol).unwrap();
        assert!(parts.elliptic.distance_to_identity() < 1e-8);
        assert!(parts.hyperbolic.distance_to_identity() < 1e-8);
        assert!((parts.parabolic.mat() - p).norm() < 1e-8);
        assert_eq!(classify_matrix(&a, &tol).unwrap(), MatrixClass::Parabolic);
    }

    #[test]
    fn class_examples() {
        let tol = Tolerances::default();
        let s = QuadraticSpace::diagonal(2);
        let (r, _) = rotation_boost(2, 0.4, 0.0);
        let mut rxy = DMatrix::identity(5, 5);
        rxy[(0, 0)] = 0.4f64.cos();
        rxy[(0, 1)] = -0.4f64.sin();
        rxy[(1, 0)] = 0.4f64.sin();
        rxy[(1, 1)] = 0.4f64.cos();
        for m in [r, rxy] {
            assert_eq!(classify_matrix(&GroupElement::new(s.clone(), m, 1e-9).unwrap(), &tol).unwrap(), MatrixClass::Elliptic);
        }
        let sp = QuadraticSpace::split(2);
        let mut h = DMatrix::identity(5, 5);
        h[(0, 0)] = 3.0;
        h[(1, 1)] = 1.0 / 3.0;
        assert_eq!(classify_matrix(&GroupElement::new(sp, h, 1e-9).unwrap(), &tol).unwrap(), MatrixClass::Hyperbolic);
    }

    #[test]
    fn random_elements_satisfy_factor_criteria() {
        let tol = Tolerances::default();
        for n in 1..4 {
            let s = QuadraticSpace::diagonal(n);
            for seed in 0..15 {
                let a = group_exp(&s, &lie_algebra_sample(&s, 100 + seed, 2.0), 1e-9).unwrap();
                let parts = jordan_decompose(&a, &tol).unwrap();
                let an = a.mat().norm();
                assert!(parts.reconstruction_residual <= 1e-8 * an, "recon {}", parts.reconstruction_residual);
                assert!(parts.commutator_residual <= 1e-8 * an * an);
                let es = super::super::spectrum::eigenvalues(parts.elliptic.mat()).unwrap();
                assert!(es.iter().all(|l| (l.norm() - 1.0).abs() < 1e-6));
                let hs = super::super::spectrum::eigenvalues(parts.hyperbolic.mat()).unwrap();
                assert!(hs.iter().all(|l| l.im.abs() < 1e-6 && l.re > 0.0));
            }
        }
    }
}

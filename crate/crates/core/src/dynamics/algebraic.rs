use super::{Certificate, Classification, Confidence, Kind, Method};
use crate::config::{RunConfig, Tolerances};
use crate::eins::EinsHatPoint;
use crate::lift::LiftedConformal;
use crate::linalg::isotropic::section_coords;
use crate::linalg::spectrum::{additive_jordan, eigenvalues, C64};
use crate::linalg::{classify_matrix, isotropic_fixed_rays, jordan_decompose, log_unipotent, GroupElement, MatrixClass};
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::{PI, TAU};

/// Rotation angle in `(-pi, pi]` of an elliptic element on its invariant
/// negative-definite plane, signed by the time orientation.
pub fn elliptic_angle(e: &GroupElement, tol: &Tolerances) -> Result<f64> {
    let e = e.to_diagonal();
    let add = additive_jordan(e.mat(), tol)?;
    let g = e.space().gram().map(|x| C64::new(x, 0.0));
    for (c, p) in add.clusters.iter().zip(&add.projectors) {
        if c.mean.im < -add.cluster_tol {
            continue;
        }
        let h = p.adjoint() * &g * p;
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = h.symmetric_eigen();
        let thr = 1e-9 * p.norm_squared().max(1.0);
        let neg: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] < -thr).collect();
        if neg.is_empty() {
            continue;
        }
        if c.mean.im > add.cluster_tol {
            let v = p * eig.eigenvectors.column(neg[0]);
            let (a, b) = (v.map(|z| z.re), v.map(|z| z.im));
            // orientation of (a, -b) projected to the (x, y) plane
            let det = -a[0] * b[1] + a[1] * b[0];
            let beta = c.mean.arg();
            return Ok(if det > 0.0 { beta } else { -beta });
        }
        if neg.len() >= 2 {
            return Ok(if c.mean.re > 0.0 { 0.0 } else { PI });
        }
    }
    Err(Error::Degenerate("no negative-definite invariant plane found".into()))
}

fn log_positive(h: &GroupElement, tol: &Tolerances) -> Result<DMatrix<f64>> {
    let add = additive_jordan(h.mat(), tol)?;
    let d = h.space().dim();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for (c, p) in add.clusters.iter().zip(&add.projectors) {
        out += p * C64::new(c.mean.norm().ln(), 0.0);
    }
    Ok(out.map(|z| z.re))
}

fn spectrum_defect(a: &GroupElement) -> f64 {
    eigenvalues(a.mat())
        .map(|ev| ev.iter().map(|l| (l.norm() - 1.0).abs()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

fn non_escaping_kind(class: &MatrixClass, base: &GroupElement) -> Kind {
    if *class == MatrixClass::Elliptic && base.distance_to_identity() > 1e-12 {
        Kind::NonEscapingElliptic
    } else {
        Kind::NonEscapingFixedPoint
    }
}

/// Classifies a lift from its matrix: the fibre shift at a fixed point when
/// the base preserves an isotropic ray, otherwise the translation number of
/// the lifted elliptic factor.
pub fn classify_algebraic(phi: &LiftedConformal, cfg: &RunConfig) -> Result<Classification> {
    let tol = &cfg.tol;
    let base = phi.base();
    let class = classify_matrix(base, tol)?;
    let rays = isotropic_fixed_rays(base, tol)?;
    let mut notes = Vec::new();
    let make = |kind, confidence, certificate, notes| Classification {
        kind,
        confidence,
        method: Method::Algebraic,
        certificate,
        seed_verdicts: Vec::new(),
        drift: None,
        notes,
    };

    if !rays.is_empty() {
        let mut found: Vec<(EinsHatPoint, i64, f64)> = Vec::new();
        for r in &rays {
            let (theta, z) = section_coords(base.space(), &r.v);
            let p = EinsHatPoint { t: theta, z };
            let q = phi.evaluate(&p)?;
            let shift = q.t - p.t;
            let k = (shift / TAU).round();
            let res = ((shift - TAU * k).powi(2) + (&q.z - &p.z).norm_squared()).sqrt();
            found.push((p, k as i64, res));
        }
        found.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
        let consistent = found.iter().all(|f| f.1 == found[0].1);
        if !consistent {
            notes.push("fixed rays disagree on the fibre shift".into());
        }
        let (p, k, res) = found.swap_remove(0);
        let confidence =
            if consistent && res <= tol.fix { Confidence::CertifiedOnGrid } else { Confidence::Heuristic };
        let kind = match k {
            0 => non_escaping_kind(&class, base),
            k if k > 0 => Kind::FutureEscaping,
            _ => Kind::PastEscaping,
        };
        let cert = if kind == Kind::NonEscapingElliptic {
            Certificate::Elliptic {
                translation_number: 0.0,
                spectrum_defect: Some(spectrum_defect(base)),
                time_function_defect: None,
                distortion: None,
            }
        } else {
            Certificate::FixedPoint { point: p, residual: res, fibre_shift: k }
        };
        return Ok(make(kind, confidence, cert, notes));
    }

    let parts = jordan_decompose(base, tol)?;
    notes.extend(parts.warnings.iter().cloned());
    let alpha = elliptic_angle(&parts.elliptic, tol)?;
    let x = log_positive(&parts.hyperbolic, tol)? + log_unipotent(parts.parabolic.mat());
    let space = base.space();
    let x = (&x - space.adjoint(&x)) * 0.5;
    let hp = LiftedConformal::from_generator(space, &x, tol)?;
    let e_hat = phi.compose(&hp.inverse()?)?;
    let estimate = e_hat.translation_estimate(cfg.budgets.k_rot, 0)?;
    let w = ((estimate - alpha) / TAU).round();
    let tau = alpha + TAU * w;
    let angle_tol = tol.cluster;
    let mut certified = parts.warnings.is_empty() && (estimate - tau).abs() < PI / 2.0;
    let kind = if tau.abs() <= angle_tol {
        if tau != 0.0 {
            certified = false;
        }
        let k = non_escaping_kind(&class, base);
        if k == Kind::NonEscapingFixedPoint {
            notes.push("no isotropic fixed ray despite zero translation number".into());
            certified = false;
        }
        k
    } else if tau > 0.0 {
        Kind::FutureEscaping
    } else {
        Kind::PastEscaping
    };
    if tau.abs() > angle_tol && tau.abs() <= 10.0 * angle_tol {
        certified = false;
    }
    let cert = if kind.is_escaping() {
        Certificate::Rotation { translation_number: tau, elliptic_angle: alpha, winding: w as i64 }
    } else {
        Certificate::Elliptic {
            translation_number: tau,
            spectrum_defect: Some(spectrum_defect(base)),
            time_function_defect: None,
            distortion: None,
        }
    };
    let confidence = if certified { Confidence::CertifiedOnGrid } else { Confidence::Heuristic };
    Ok(make(kind, confidence, cert, notes))
}

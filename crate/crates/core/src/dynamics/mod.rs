//! Orbits on the cover, the escaping dichotomy, and everything built on it.

mod algebraic;
mod domain;
mod dynamic;

pub use algebraic::{classify_algebraic, elliptic_angle};
pub use domain::{fundamental_domain_index, invariant_achronal_boundary, AchronalBoundary, DomainIndex, FundamentalDomain};
pub use dynamic::{certify_escaping, classify_dynamic, seed_points, EscapeCheck};

use crate::eins::EinsHatPoint;
use crate::lift::LiftedConformal;
use crate::linalg::MatrixClass;
use crate::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Kind {
    NonEscapingElliptic,
    NonEscapingFixedPoint,
    FutureEscaping,
    PastEscaping,
}

impl Kind {
    pub fn is_escaping(self) -> bool {
        matches!(self, Kind::FutureEscaping | Kind::PastEscaping)
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::NonEscapingElliptic => "NonEscapingElliptic",
            Kind::NonEscapingFixedPoint => "NonEscapingFixedPoint",
            Kind::FutureEscaping => "FutureEscaping",
            Kind::PastEscaping => "PastEscaping",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    CertifiedOnGrid,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dynamic,
    Algebraic,
}

/// Long-horizon behaviour of a single orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedVerdict {
    Future,
    Past,
    Bounded,
    Undecided,
}

/// Evidence attached to a classification.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    /// Non-escaping with compact closure.
    Elliptic {
        translation_number: f64,
        /// Largest deviation of an eigenvalue modulus from 1 (algebraic).
        spectrum_defect: Option<f64>,
        /// `max |T(phi q) - T(q)|` for the orbit-averaged time function (dynamic).
        time_function_defect: Option<f64>,
        /// Range of distance ratios of nearby orbit pairs (dynamic).
        distortion: Option<[f64; 2]>,
    },
    /// A point of the cover moved by `2 pi fibre_shift`; fixed when the shift is 0.
    FixedPoint { point: EinsHatPoint, residual: f64, fibre_shift: i64 },
    /// `q << phi^j(q)` (or the reverse): the smallest grid margin exceeds
    /// `2 radius` by `safety`, where `radius` bounds the diamonds around grid
    /// points that cover a deck period.
    Escaping { j: i64, margin: f64, radius: f64, safety: f64, grid_points: usize },
    /// Translation number of the elliptic factor's lift.
    Rotation { translation_number: f64, elliptic_angle: f64, winding: i64 },
    /// Best available evidence for a heuristic verdict.
    Evidence { drift: f64, best_future_margin: f64, best_past_margin: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub kind: Kind,
    pub confidence: Confidence,
    pub method: Method,
    pub certificate: Certificate,
    pub seed_verdicts: Vec<SeedVerdict>,
    pub drift: Option<f64>,
    pub notes: Vec<String>,
}

impl Classification {
    pub fn certified(&self) -> bool {
        self.confidence == Confidence::CertifiedOnGrid
    }

    /// True when all per-seed verdicts coincide (vacuous without seeds).
    pub fn unanimous(&self) -> bool {
        self.seed_verdicts.windows(2).all(|w| w[0] == w[1])
    }

    /// Re-evaluates the certificate against `phi`.
    pub fn recheck(&self, phi: &LiftedConformal, cfg: &crate::RunConfig) -> Result<bool> {
        match &self.certificate {
            Certificate::FixedPoint { point, fibre_shift, .. } => {
                let q = phi.evaluate(point)?;
                let want = point.shifted(std::f64::consts::TAU * *fibre_shift as f64);
                Ok(q.distance(&want) <= cfg.tol.fix)
            }
            Certificate::Escaping { j, .. } => {
                let future = self.kind == Kind::FutureEscaping;
                let chk = certify_escaping(phi, *j as usize, future, cfg)?;
                Ok(chk.certified(cfg))
            }
            _ => Ok(true),
        }
    }
}

/// Essential iff non-escaping with a fixed point and a non-elliptic base.
pub fn is_essential(kind: Kind, base_class: &MatrixClass) -> (bool, &'static str) {
    if kind.is_escaping() {
        (false, "escaping")
    } else if *base_class == MatrixClass::Elliptic {
        (false, "elliptic")
    } else if kind == Kind::NonEscapingFixedPoint {
        (true, "non-escaping non-elliptic")
    } else {
        (false, "elliptic")
    }
}

/// Essentiality of a lift, via the algebraic classifier.
pub fn is_essential_lift(phi: &LiftedConformal, cfg: &crate::RunConfig) -> Result<(bool, &'static str)> {
    let c = classify_algebraic(phi, cfg)?;
    let m = crate::linalg::classify_matrix(phi.base(), &cfg.tol)?;
    Ok(is_essential(c.kind, &m))
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitTrace {
    pub points: Vec<EinsHatPoint>,
    pub t_values: Vec<f64>,
    /// Least-squares slope of `t_values` against the iterate index.
    pub drift: f64,
}

/// `p, phi(p), ..., phi^k_max(p)`.
pub fn orbit(phi: &LiftedConformal, p: &EinsHatPoint, k_max: usize) -> Result<OrbitTrace> {
    if k_max == 0 {
        return Err(crate::Error::Input("k_max must be at least 1".into()));
    }
    let mut points = Vec::with_capacity(k_max + 1);
    points.push(p.clone());
    for k in 0..k_max {
        let next = phi.evaluate(&points[k])?;
        points.push(next);
    }
    let t_values: Vec<f64> = points.iter().map(|q| q.t).collect();
    let drift = ls_slope(&t_values);
    Ok(OrbitTrace { points, t_values, drift })
}

pub(crate) fn ls_slope(ys: &[f64]) -> f64 {
    let m = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let xbar = (m - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / m;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xbar;
        num += dx * (y - ybar);
        den += dx * dx;
    }
    num / den
}

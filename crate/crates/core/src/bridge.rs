//! Timelike diamonds of the cover as conformal copies of Minkowski space,
//! and Minkowski conformal maps transported to lifted elements.

use crate::config::Tolerances;
use crate::eins::{margin, refocusing_sequence, sphere_frame, EinsHatPoint};
use crate::lift::{default_anchor, LiftedConformal};
use crate::linalg::{GroupElement, QuadraticSpace};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Points closer than this (in chronology margin) to the diamond boundary
/// are rejected by [`diamond_to_mink`].
pub const BOUNDARY_BAND: f64 = 1e-6;

/// A point `(T, X)` of Minkowski space `R^{1,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkPoint {
    pub t: f64,
    pub x: DVector<f64>,
}

impl MinkPoint {
    pub fn new(t: f64, x: DVector<f64>) -> Self {
        MinkPoint { t, x }
    }

    pub fn origin(n: usize) -> Self {
        MinkPoint { t: 0.0, x: DVector::zeros(n) }
    }

    /// `-T^2 + |X|^2`.
    pub fn square(&self) -> f64 {
        -self.t * self.t + self.x.norm_squared()
    }

    /// `other - self` is future timelike.
    pub fn precedes(&self, other: &MinkPoint) -> bool {
        other.t - self.t > (&other.x - &self.x).norm()
    }
}

/// The diamond between the apex `(t0, z0)` and its second refocusing point
/// `(t0 + 2 pi, z0)`, with an orthonormal frame whose first column is `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiamondChart {
    t0: f64,
    frame: DMatrix<f64>,
}

impl DiamondChart {
    pub fn new(apex: &EinsHatPoint) -> Self {
        DiamondChart { t0: apex.t, frame: sphere_frame(&apex.z) }
    }

    /// `frame` must be orthogonal; its first column is the pole.
    pub fn with_frame(t0: f64, frame: DMatrix<f64>) -> Result<Self> {
        let d = frame.nrows();
        if frame.ncols() != d || d < 2 {
            return Err(Error::Input("chart frame must be square of size n+1 >= 2".into()));
        }
        let defect = (frame.transpose() * &frame - DMatrix::<f64>::identity(d, d)).norm();
        if defect > 1e-10 {
            return Err(Error::Input(format!("chart frame is not orthogonal (defect {defect:.1e})")));
        }
        Ok(DiamondChart { t0, frame })
    }

    pub fn n(&self) -> usize {
        self.frame.nrows() - 1
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn pole(&self) -> DVector<f64> {
        self.frame.column(0).into_owned()
    }

    /// `p_k` of the apex; the diamond is `I(p_0, p_2)`.
    pub fn apex(&self, k: i64) -> EinsHatPoint {
        refocusing_sequence(&EinsHatPoint { t: self.t0, z: self.pole() }, k)
    }

    /// Image of the Minkowski origin.
    pub fn center(&self) -> EinsHatPoint {
        EinsHatPoint { t: self.t0 + PI, z: self.pole() }
    }

    /// Chart of `I(p_1, p_3)`, the image of this one under the refocusing map.
    pub fn next(&self) -> Self {
        DiamondChart { t0: self.t0 + PI, frame: -&self.frame }
    }

    /// Both chronology margins of `q` against the apexes.
    pub fn margins(&self, q: &EinsHatPoint) -> (f64, f64) {
        (margin(&self.apex(0), q), margin(q, &self.apex(2)))
    }

    pub fn contains(&self, q: &EinsHatPoint) -> bool {
        let (a, b) = self.margins(q);
        a > 0.0 && b > 0.0
    }

    /// Ambient matrix `R_xy(t0 + pi) + frame` carrying the standard chart
    /// (apex `(-pi, e_1)`) to this one.
    fn ambient(&self) -> DMatrix<f64> {
        let d = self.n() + 3;
        let a = self.t0 + PI;
        let mut c = DMatrix::zeros(d, d);
        c[(0, 0)] = a.cos();
        c[(0, 1)] = -a.sin();
        c[(1, 0)] = a.sin();
        c[(1, 1)] = a.cos();
        c.view_mut((2, 2), (d - 2, d - 2)).copy_from(&self.frame);
        c
    }
}

/// Null-coordinate compactification `t = atan v + atan u + t0 + pi`,
/// polar angle `atan v - atan u` from the pole, with `u, v = T -+ |X|`.
pub fn mink_to_diamond(chart: &DiamondChart, m: &MinkPoint) -> Result<EinsHatPoint> {
    let n = chart.n();
    if m.x.len() != n {
        return Err(Error::Input(format!("Minkowski point has {} spatial coordinates, expected {n}", m.x.len())));
    }
    if !m.t.is_finite() || m.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite Minkowski coordinate".into()));
    }
    let r = m.x.norm();
    let (u, v) = (m.t - r, m.t + r);
    let s = ((1.0 + u * u) * (1.0 + v * v)).sqrt();
    let mut w = DVector::zeros(n + 1);
    w[0] = (1.0 + u * v) / s;
    // sin(chi) * X / r without dividing by r
    w.rows_mut(1, n).copy_from(&(&m.x * (2.0 / s)));
    let z = &chart.frame * w;
    let z = &z / z.norm();
    Ok(EinsHatPoint { t: v.atan() + u.atan() + chart.t0 + PI, z })
}

/// Inverse of [`mink_to_diamond`] on the open diamond shrunk by [`BOUNDARY_BAND`].
pub fn diamond_to_mink(chart: &DiamondChart, q: &EinsHatPoint) -> Result<MinkPoint> {
    let n = chart.n();
    if q.z.len() != n + 1 {
        return Err(Error::Input("point dimension does not match the chart".into()));
    }
    let (a, b) = chart.margins(q);
    if a <= BOUNDARY_BAND || b <= BOUNDARY_BAND {
        return Err(Error::Domain(format!("point is not inside the diamond (margins {a:.3e}, {b:.3e})")));
    }
    let w = chart.frame.transpose() * &q.z;
    let tail = w.rows(1, n).into_owned();
    let chi = tail.norm().atan2(w[0]);
    let tau = q.t - chart.t0 - PI;
    let (ap, am) = ((tau + chi) / 2.0, (tau - chi) / 2.0);
    let den = 2.0 * ap.cos() * am.cos();
    Ok(MinkPoint { t: tau.sin() / den, x: tail / den })
}

/// Conformal maps of Minkowski space that extend to the diamond chain.
#[derive(Debug, Clone, PartialEq)]
pub enum MinkMap {
    /// `m -> m + a` with `a = (a_T, a_X)`.
    Translation(DVector<f64>),
    /// `m -> L m` with `L` in the orthochronous Lorentz group.
    Lorentz(DMatrix<f64>),
    /// `m -> c m`, `c > 0`.
    Homothety(f64),
}

impl MinkMap {
    pub fn apply(&self, m: &MinkPoint) -> MinkPoint {
        let v = to_vec(m);
        let out = match self {
            MinkMap::Translation(a) => v + a,
            MinkMap::Lorentz(l) => l * v,
            MinkMap::Homothety(c) => v * *c,
        };
        from_vec(&out)
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            MinkMap::Translation(a) if a.len() != n + 1 => {
                Err(Error::Input(format!("translation vector must have {} entries", n + 1)))
            }
            MinkMap::Translation(a) if a.iter().any(|x| !x.is_finite()) => {
                Err(Error::Input("non-finite translation vector".into()))
            }
            MinkMap::Lorentz(l) => {
                if l.nrows() != n + 1 || l.ncols() != n + 1 {
                    return Err(Error::Input(format!("Lorentz matrix must be {0}x{0}", n + 1)));
                }
                let eta = minkowski_gram(n);
                let defect = (l.transpose() * &eta * l - &eta).norm();
                if defect > 1e-9 * l.norm_squared().max(1.0) {
                    return Err(Error::Input(format!("matrix does not preserve the Minkowski form (defect {defect:.1e})")));
                }
                if l[(0, 0)] <= 0.0 {
                    return Err(Error::Precondition("Lorentz map reverses time orientation".into()));
                }
                Ok(())
            }
            MinkMap::Homothety(c) if !(c.is_finite() && *c > 0.0) => {
                Err(Error::Precondition("homothety factor must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

fn to_vec(m: &MinkPoint) -> DVector<f64> {
    let mut v = DVector::zeros(m.x.len() + 1);
    v[0] = m.t;
    v.rows_mut(1, m.x.len()).copy_from(&m.x);
    v
}

fn from_vec(v: &DVector<f64>) -> MinkPoint {
    MinkPoint { t: v[0], x: v.rows(1, v.len() - 1).into_owned() }
}

fn minkowski_gram(n: usize) -> DMatrix<f64> {
    let mut eta = DMatrix::identity(n + 1, n + 1);
    eta[(0, 0)] = -1.0;
    eta
}

/// Linear map of `R^{2,n+1}` inducing `map` through the standard embedding
/// `m -> N0 + (m.m) Ninf + m`, with `N0 = (e_x + e_z1)/2`,
/// `Ninf = (e_x - e_z1)/2` and `m` spread over `e_y, e_z2, ..`.
fn standard_matrix(n: usize, map: &MinkMap) -> DMatrix<f64> {
    let d = n + 3;
    // adapted basis: N0, Ninf, then the Minkowski directions
    let mut b = DMatrix::zeros(d, d);
    b[(0, 0)] = 0.5;
    b[(2, 0)] = 0.5;
    b[(0, 1)] = 0.5;
    b[(2, 1)] = -0.5;
    b[(1, 2)] = 1.0;
    for i in 0..n {
        b[(3 + i, 3 + i)] = 1.0;
    }
    let eta = minkowski_gram(n);
    let mut m = DMatrix::identity(d, d);
    match map {
        MinkMap::Translation(a) => {
            let ea = &eta * a;
            m.view_mut((2, 0), (n + 1, 1)).copy_from(a);
            m[(1, 0)] = a.dot(&ea);
            for j in 0..=n {
                m[(1, 2 + j)] = 2.0 * ea[j];
            }
        }
        MinkMap::Lorentz(l) => m.view_mut((2, 2), (n + 1, n + 1)).copy_from(l),
        MinkMap::Homothety(c) => {
            m[(0, 0)] = 1.0 / c;
            m[(1, 1)] = *c;
        }
    }
    let b_inv = b.clone().try_inverse().expect("adapted basis is invertible");
    b * m * b_inv
}

/// The lift fixing the chart apex whose action on the diamond is `map`
/// read through the chart.
pub fn transport(chart: &DiamondChart, map: &MinkMap, tol: &Tolerances) -> Result<LiftedConformal> {
    let n = chart.n();
    map.check(n)?;
    let c = chart.ambient();
    let mat = &c * standard_matrix(n, map) * c.transpose();
    let base = GroupElement::new_reprojected(QuadraticSpace::diagonal(n), mat, tol.group)?;
    let apex = chart.apex(0);
    let pinned = LiftedConformal::with_anchor(&base, apex.clone(), apex)?;
    let src = default_anchor(n);
    let dst = pinned.evaluate(&src)?;
    LiftedConformal::with_anchor(pinned.base(), src, dst)
}

/// The two maps of the non-subgroup construction together with their
/// fixed points `p0 = (0, z0)` and `q0 = (pi, z0)`.
#[derive(Debug, Clone)]
pub struct NonSubgroupExample {
    pub phi: LiftedConformal,
    pub psi: LiftedConformal,
    pub p0: EinsHatPoint,
    pub q0: EinsHatPoint,
    /// `|phi(p0) - p0|` and `|psi(q0) - q0|` in the product metric.
    pub residuals: [f64; 2],
}

impl NonSubgroupExample {
    pub fn product(&self) -> Result<LiftedConformal> {
        self.phi.compose(&self.psi)
    }
}

/// Unit time translations on the diamonds with apexes `(0, e_1)` and `(pi, e_1)`.
pub fn example_nonsubgroup(n: usize, tol: &Tolerances) -> Result<NonSubgroupExample> {
    if n == 0 {
        return Err(Error::Input("n must be at least 1".into()));
    }
    let mut a = DVector::zeros(n + 1);
    a[0] = 1.0;
    let map = MinkMap::Translation(a);
    let p0 = EinsHatPoint::on_axis(0.0, n);
    let q0 = EinsHatPoint::on_axis(PI, n);
    let phi = transport(&DiamondChart::new(&p0), &map, tol)?;
    let psi = transport(&DiamondChart::new(&q0), &map, tol)?;
    let residuals = [phi.evaluate(&p0)?.distance(&p0), psi.evaluate(&q0)?.distance(&q0)];
    Ok(NonSubgroupExample { phi, psi, p0, q0, residuals })
}

/// Off-conformal part of the pulled-back cover metric at `m`, relative to
/// the conformal factor, from a central-difference Jacobian with step `h`.
/// Returns `(residual, factor)`.
pub fn conformality_residual(chart: &DiamondChart, m: &MinkPoint, h: f64) -> Result<(f64, f64)> {
    let n = chart.n();
    let d = n + 1;
    let mut jac = DMatrix::zeros(n + 2, d);
    for j in 0..d {
        let mut plus = to_vec(m);
        let mut minus = plus.clone();
        plus[j] += h;
        minus[j] -= h;
        let p = mink_to_diamond(chart, &from_vec(&plus))?;
        let q = mink_to_diamond(chart, &from_vec(&minus))?;
        jac[(0, j)] = (p.t - q.t) / (2.0 * h);
        for i in 0..=n {
            jac[(1 + i, j)] = (p.z[i] - q.z[i]) / (2.0 * h);
        }
    }
    // the round metric is the Euclidean one restricted to the tangent space
    let mut g_cover = DMatrix::identity(n + 2, n + 2);
    g_cover[(0, 0)] = -1.0;
    let pulled = jac.transpose() * g_cover * &jac;
    let eta = minkowski_gram(n);
    let factor = pulled.dot(&eta) / d as f64;
    let res = (&pulled - &eta * factor).norm() / (factor.abs() * eta.norm());
    Ok((res, factor))
}

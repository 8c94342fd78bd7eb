//! The Einstein universe as projectivized null cone, its cover `R x S^n`,
//! and the causal order of the cover.

use crate::linalg::{BasisMode, GroupElement};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::{PI, TAU};

/// A point `(theta, z)` of the section `x^2 + y^2 + |z|^2 = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EinsPoint {
    pub theta: f64,
    pub z: DVector<f64>,
}

/// A point `(t, z)` of the cover `R x S^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EinsHatPoint {
    pub t: f64,
    pub z: DVector<f64>,
}

fn check_unit(z: &DVector<f64>) -> Result<()> {
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite sphere coordinate".into()));
    }
    if (z.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!("sphere point has norm {}", z.norm())));
    }
    Ok(())
}

impl EinsPoint {
    /// Renormalizes `z` after checking it is a unit vector within 1e-9.
    pub fn new(theta: f64, z: DVector<f64>) -> Result<Self> {
        check_unit(&z)?;
        let n = z.norm();
        Ok(EinsPoint { theta: theta.rem_euclid(TAU), z: z / n })
    }

    /// The ambient representative `(cos theta, sin theta, z)`.
    pub fn representative(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.z.len() + 2);
        v[0] = self.theta.cos();
        v[1] = self.theta.sin();
        v.rows_mut(2, self.z.len()).copy_from(&self.z);
        v
    }
}

impl EinsHatPoint {
    pub fn new(t: f64, z: DVector<f64>) -> Result<Self> {
        check_unit(&z)?;
        if !t.is_finite() {
            return Err(Error::Input("non-finite time coordinate".into()));
        }
        let n = z.norm();
        Ok(EinsHatPoint { t, z: z / n })
    }

    /// `(t, e_1)` where `e_1` is the first sphere axis.
    pub fn on_axis(t: f64, n: usize) -> Self {
        EinsHatPoint { t, z: axis(n, 0) }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        EinsHatPoint { t: self.t + dt, z: self.z.clone() }
    }

    /// Product-metric distance `sqrt(dt^2 + d_S(z, w)^2)`.
    pub fn distance(&self, other: &EinsHatPoint) -> f64 {
        let dt = self.t - other.t;
        let ds = sphere_distance(&self.z, &other.z);
        (dt * dt + ds * ds).sqrt()
    }
}

impl Serialize for EinsHatPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("EinsHatPoint", 2)?;
        st.serialize_field("t", &self.t)?;
        st.serialize_field("z", self.z.as_slice())?;
        st.end()
    }
}

/// Orthogonal `(n+1) x (n+1)` matrix whose first column is the unit vector `z0`;
/// the remaining columns span the tangent space at `z0`.
pub fn sphere_frame(z0: &DVector<f64>) -> DMatrix<f64> {
    let d = z0.len();
    let mut e1 = DVector::zeros(d);
    e1[0] = 1.0;
    let id = DMatrix::<f64>::identity(d, d);
    if z0[0] <= 0.0 {
        let w = &e1 - z0;
        &id - &w * w.transpose() * (2.0 / w.norm_squared())
    } else {
        let w = &e1 + z0;
        let mut h = &id - &w * w.transpose() * (2.0 / w.norm_squared());
        h.column_mut(0).neg_mut();
        h
    }
}

/// Estimated covering radius of `sphere_grid(n, count)`: the largest distance
/// from 20000 seeded random sphere points to the grid, inflated by 15%.
pub fn sphere_grid_cover(n: usize, count: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(n, count)) {
        return *v;
    }
    let grid = sphere_grid(n, count);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let mut v = vec![0.0; n + 1];
    for _ in 0..20_000 {
        for x in v.iter_mut() {
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            *x = (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos();
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let d = grid.iter().map(|z| sphere_distance_slice(z.as_slice(), &v)).fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    let r = 1.15 * worst;
    cache.lock().unwrap().insert((n, count), r);
    r
}

/// Unit vector along sphere axis `i` of `S^n`.
pub fn axis(n: usize, i: usize) -> DVector<f64> {
    let mut z = DVector::zeros(n + 1);
    z[i] = 1.0;
    z
}

/// Section point of a null vector given in diagonal coordinates.
pub fn normalize_to_section(v: &DVector<f64>, tol_fix: f64) -> Result<EinsPoint> {
    if v.len() < 4 {
        return Err(Error::Input("ambient vector too short".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite ambient vector".into()));
    }
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return Err(Error::Input("zero vector".into()));
    }
    let q = -v[0] * v[0] - v[1] * v[1] + v.rows(2, v.len() - 2).norm_squared();
    if q.abs() > tol_fix * n2 {
        return Err(Error::Input(format!("vector is off the null cone (Q/|v|^2 = {:.3e})", q / n2)));
    }
    Ok(section_unchecked(v.as_slice()))
}

pub(crate) fn section_unchecked(v: &[f64]) -> EinsPoint {
    let theta = v[1].atan2(v[0]).rem_euclid(TAU);
    let z = DVector::from_column_slice(&v[2..]);
    let zn = z.norm();
    EinsPoint { theta, z: z / zn }
}

pub fn project(p: &EinsHatPoint) -> EinsPoint {
    EinsPoint { theta: p.t.rem_euclid(TAU), z: p.z.clone() }
}

/// The induced action on the Einstein universe.
pub fn act_eins(a: &GroupElement, p: &EinsPoint) -> Result<EinsPoint> {
    let a = if a.space().mode() == BasisMode::Diagonal { a.clone() } else { a.to_diagonal() };
    if p.z.len() != a.space().n() + 1 {
        return Err(Error::Input("point and element have different dimensions".into()));
    }
    let v = a.mat() * p.representative();
    normalize_to_section(&v, 1e-6)
}

/// Geodesic distance on the round sphere, computed as `2 atan2(|a-b|, |a+b|)`
/// for accuracy near 0 and pi.
pub fn sphere_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    sphere_distance_slice(a.as_slice(), b.as_slice())
}

pub(crate) fn sphere_distance_slice(a: &[f64], b: &[f64]) -> f64 {
    let mut dm = 0.0;
    let mut dp = 0.0;
    for (x, y) in a.iter().zip(b) {
        dm += (x - y) * (x - y);
        dp += (x + y) * (x + y);
    }
    2.0 * dm.sqrt().atan2(dp.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Chronological,
    CausalNullBoundary,
    Unrelated,
}

/// Chronology certificate for the pair `(p, q)` in the future direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausalCert {
    pub relation: Relation,
    /// `t_q - t_p - d(z_p, z_q)`.
    pub margin: f64,
}

pub fn margin(p: &EinsHatPoint, q: &EinsHatPoint) -> f64 {
    (q.t - p.t) - sphere_distance(&p.z, &q.z)
}

pub fn chronological(p: &EinsHatPoint, q: &EinsHatPoint, eps_causal: f64) -> CausalCert {
    let m = margin(p, q);
    let relation = if m.abs() <= eps_causal {
        Relation::CausalNullBoundary
    } else if m > 0.0 {
        Relation::Chronological
    } else {
        Relation::Unrelated
    };
    CausalCert { relation, margin: m }
}

/// `(t + pi k, (-1)^k z)`: where the null geodesics leaving `p` meet again.
pub fn refocusing_sequence(p: &EinsHatPoint, k: i64) -> EinsHatPoint {
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    EinsHatPoint { t: p.t + PI * k as f64, z: &p.z * sign }
}

/// Every point of `{t = a}` chronologically precedes every point of `{t = b}`.
pub fn totally_timelike_connected(a: f64, b: f64) -> bool {
    b - a > PI
}

/// Deterministic, roughly uniform point set on `S^n`: equally spaced angles
/// for `n = 1`, a spherical Fibonacci lattice for `n = 2`, and a Kronecker
/// sequence pushed through Box-Muller and normalized for `n >= 3`.
pub fn sphere_grid(n: usize, count: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    match n {
        1 => {
            for i in 0..count {
                let a = TAU * i as f64 / count as f64;
                out.push(DVector::from_vec(vec![a.cos(), a.sin()]));
            }
        }
        2 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            for i in 0..count {
                let h = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let r = (1.0 - h * h).sqrt();
                let phi = golden * i as f64;
                out.push(DVector::from_vec(vec![h, r * phi.cos(), r * phi.sin()]));
            }
        }
        _ => {
            let dim = n + 1;
            let m = dim.div_ceil(2) * 2;
            // R_m generalized golden ratio
            let mut g = 2.0f64;
            for _ in 0..50 {
                g = (1.0 + g).powf(1.0 / (m as f64 + 1.0));
            }
            let alpha: Vec<f64> = (1..=m).map(|j| (1.0 / g.powi(j as i32)).fract()).collect();
            for i in 0..count {
                let u: Vec<f64> = alpha.iter().map(|a| (0.5 + a * (i + 1) as f64).fract()).collect();
                let mut v = Vec::with_capacity(m);
                for pair in u.chunks(2) {
                    let r = (-2.0 * (1.0 - pair[0]).max(1e-300).ln()).sqrt();
                    v.push(r * (TAU * pair[1]).cos());
                    v.push(r * (TAU * pair[1]).sin());
                }
                v.truncate(dim);
                let z = DVector::from_vec(v);
                let zn = z.norm();
                out.push(z / zn);
            }
        }
    }
    out
}

use super::{Certificate, Classification, Kind};
use crate::eins::{sphere_distance, sphere_distance_slice, EinsHatPoint};
use crate::lift::LiftedConformal;
use crate::{Error, Result};
use nalgebra::DVector;
use serde::Serialize;

/// The strip `M0 = J+(S0) ∩ I-(psi(S0))` between the slice `S0 = {t = 0}`
/// and its image under a future-escaping witness power `psi`.
#[derive(Debug, Clone)]
pub struct FundamentalDomain {
    psi: LiftedConformal,
    psi_inv: LiftedConformal,
    eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DomainIndex {
    /// The `i` with `psi^-i(q)` in `M0`.
    pub index: i64,
    /// Within `eps` of a strip boundary.
    pub boundary: bool,
}

impl FundamentalDomain {
    /// `psi` must satisfy `q << psi(q)` everywhere.
    pub fn from_witness(psi: LiftedConformal, eps_causal: f64) -> Result<Self> {
        let psi_inv = psi.inverse()?;
        Ok(FundamentalDomain { psi, psi_inv, eps: eps_causal })
    }

    /// Uses the power recorded in an escaping certificate, inverted for past escaping.
    pub fn new(phi: &LiftedConformal, c: &Classification, eps_causal: f64) -> Result<Self> {
        let j = match (&c.kind, &c.certificate) {
            (k, Certificate::Escaping { j, .. }) if k.is_escaping() => *j,
            _ => return Err(Error::Precondition("fundamental domains need an escaping certificate with a power".into())),
        };
        let j = if c.kind == Kind::FutureEscaping { j } else { -j };
        Self::from_witness(phi.power(j)?, eps_causal)
    }

    pub fn witness(&self) -> &LiftedConformal {
        &self.psi
    }

    /// `(t(q), -t(psi^-1 q))`; both are nonnegative exactly on `M0`.
    pub fn strip_margins(&self, q: &EinsHatPoint) -> Result<(f64, f64)> {
        Ok((q.t, -self.psi_inv.evaluate(q)?.t))
    }

    pub fn contains(&self, q: &EinsHatPoint) -> Result<bool> {
        let (a, b) = self.strip_margins(q)?;
        Ok(a >= 0.0 && b > 0.0)
    }

    fn s(&self, q: &EinsHatPoint, i: i64) -> Result<f64> {
        let p = if i >= 0 { self.psi_inv.power(i)? } else { self.psi.power(-i)? };
        Ok(p.evaluate(q)?.t)
    }

    /// `s(i) = t(psi^-i q)` decreases strictly in `i`; the index is the last
    /// `i` with `s(i) >= 0`, bracketed by doubling and then bisected.
    pub fn index(&self, q: &EinsHatPoint) -> Result<DomainIndex> {
        const CAP: i64 = 1 << 40;
        let (mut lo, mut hi);
        if self.s(q, 0)? >= 0.0 {
            lo = 0;
            hi = 1;
            while self.s(q, hi)? >= 0.0 {
                lo = hi;
                hi *= 2;
                if hi > CAP {
                    return Err(Error::Solver { what: "fundamental domain bracket".into(), iterations: 40 });
                }
            }
        } else {
            hi = 0;
            lo = -1;
            while self.s(q, lo)? < 0.0 {
                hi = lo;
                lo *= 2;
                if -lo > CAP {
                    return Err(Error::Solver { what: "fundamental domain bracket".into(), iterations: 40 });
                }
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.s(q, mid)? >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let boundary = self.s(q, lo)?.abs() <= self.eps || self.s(q, lo + 1)?.abs() <= self.eps;
        Ok(DomainIndex { index: lo, boundary })
    }
}

pub fn fundamental_domain_index(phi: &LiftedConformal, c: &Classification, q: &EinsHatPoint, eps_causal: f64) -> Result<DomainIndex> {
    FundamentalDomain::new(phi, c, eps_causal)?.index(q)
}

/// Graph `t = F(x)` of the boundary of `V = U_k I-(p_k)` truncated to `|k| <= k_range`.
#[derive(Debug, Clone)]
pub struct AchronalBoundary {
    pub orbit: Vec<EinsHatPoint>,
    pub grid: Vec<DVector<f64>>,
    pub values: Vec<f64>,
}

impl AchronalBoundary {
    /// `max_k [t_k - d(x, z_k)]`.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.orbit
            .iter()
            .map(|p| p.t - sphere_distance_slice(x.as_slice(), p.z.as_slice()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `|F(x) - F(y)| - d(x, y)` over grid pairs.
    pub fn lipschitz_excess(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.grid.len() {
            for j in i + 1..self.grid.len() {
                let e = (self.values[i] - self.values[j]).abs() - sphere_distance(&self.grid[i], &self.grid[j]);
                worst = worst.max(e);
            }
        }
        worst
    }

    /// Largest distance of `phi(x, F(x))` from the graph over the grid.
    pub fn invariance_defect(&self, phi: &LiftedConformal) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (x, f) in self.grid.iter().zip(&self.values) {
            let q = phi.evaluate(&EinsHatPoint { t: *f, z: x.clone() })?;
            worst = worst.max((q.t - self.eval(&q.z)).abs());
        }
        Ok(worst)
    }
}

/// For a non-escaping `phi`: the truncated invariant achronal boundary
/// through the orbit of `p`, tabulated on `grid`.
pub fn invariant_achronal_boundary(
    phi: &LiftedConformal,
    p: &EinsHatPoint,
    k_range: usize,
    grid: &[DVector<f64>],
) -> Result<AchronalBoundary> {
    let inv = phi.inverse()?;
    let mut orbit = Vec::with_capacity(2 * k_range + 1);
    orbit.push(p.clone());
    let (mut f, mut b) = (p.clone(), p.clone());
    for _ in 0..k_range {
        f = phi.evaluate(&f)?;
        b = inv.evaluate(&b)?;
        orbit.push(f.clone());
        orbit.push(b.clone());
    }
    let mut out = AchronalBoundary { orbit, grid: grid.to_vec(), values: Vec::new() };
    out.values = grid.iter().map(|x| out.eval(x)).collect();
    Ok(out)
}

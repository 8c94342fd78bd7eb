//! Elements of the cyclic extension: a matrix together with a choice of
//! lift to the cover `R x S^n`, realized by angle-unwrapping path lifting.

use crate::config::Tolerances;
use crate::eins::{act_eins, axis, project, sphere_distance_slice, EinsHatPoint, EinsPoint};
use crate::linalg::{classify_matrix, group_exp, BasisMode, GroupElement, MatrixClass, QuadraticSpace};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::{PI, TAU};

pub const DEFAULT_LIFT_STEP: f64 = 0.25;
pub const DEFAULT_MAX_DEPTH: usize = 40;
/// Anchor images within this distance below `2 pi` are read as lying just
/// below 0, so lifts of near-identity matrices get winding 0.
const WRAP_BAND: f64 = 1e-9;

/// A lift of a time-orientation preserving element of O(2,n+1) to the cover.
#[derive(Debug, Clone)]
pub struct LiftedConformal {
    base: GroupElement,
    anchor_src: EinsHatPoint,
    anchor_dst: EinsHatPoint,
    lift_step: f64,
    max_depth: usize,
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

fn canonical_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t > TAU - WRAP_BAND {
        t - TAU
    } else {
        t
    }
}

impl LiftedConformal {
    /// The lift whose anchor image has time in `[0, 2 pi) + 2 pi winding`.
    pub fn lift(base: &GroupElement, winding: i64) -> Result<Self> {
        if !base.top() {
            return Err(Error::Precondition("lifts require a time-orientation preserving element".into()));
        }
        let base = base.to_mode(BasisMode::Diagonal);
        let n = base.space().n();
        let src = EinsHatPoint::on_axis(0.0, n);
        let img = act_eins(&base, &project(&src))?;
        let t = canonical_angle(img.theta) + TAU * winding as f64;
        Ok(LiftedConformal {
            base,
            anchor_src: src,
            anchor_dst: EinsHatPoint { t, z: img.z },
            lift_step: DEFAULT_LIFT_STEP,
            max_depth: DEFAULT_MAX_DEPTH,
        })
    }

    /// The lift sending the anchor to the image with time closest to 0.
    pub fn nearest(base: &GroupElement) -> Result<Self> {
        let mut l = Self::lift(base, 0)?;
        l.anchor_dst.t = wrap(l.anchor_dst.t);
        Ok(l)
    }

    pub fn identity(n: usize) -> Self {
        Self::lift(&GroupElement::identity(QuadraticSpace::diagonal(n)), 0).expect("identity lifts")
    }

    /// The deck transformation `(t, z) -> (t + 2 pi, z)`.
    pub fn deck(n: usize) -> Self {
        Self::lift(&GroupElement::identity(QuadraticSpace::diagonal(n)), 1).expect("identity lifts")
    }

    /// Time-one map of the one-parameter group `exp(sX)` lifted continuously
    /// from the identity.
    pub fn from_generator(space: &QuadraticSpace, x: &DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let norm = x.norm();
        let m = if norm > 0.1 { (norm / 0.1).log2().ceil() as u32 } else { 0 };
        let small = group_exp(space, &(x / 2f64.powi(m as i32)), tol.group)?;
        let step = Self::nearest(&small)?;
        step.power(1i64 << m)
    }

    /// Explicit anchors; `anchor_dst` must lie over the image of `anchor_src`.
    pub fn with_anchor(base: &GroupElement, anchor_src: EinsHatPoint, anchor_dst: EinsHatPoint) -> Result<Self> {
        if !base.top() {
            return Err(Error::Precondition("lifts require a time-orientation preserving element".into()));
        }
        let base = base.to_mode(BasisMode::Diagonal);
        let img = act_eins(&base, &project(&anchor_src))?;
        let down = project(&anchor_dst);
        if !same_base_point(&img, &down, 1e-9) {
            return Err(Error::Input("anchor_dst does not lie over the image of anchor_src".into()));
        }
        Ok(LiftedConformal { base, anchor_src, anchor_dst, lift_step: DEFAULT_LIFT_STEP, max_depth: DEFAULT_MAX_DEPTH })
    }

    pub fn with_step(mut self, lift_step: f64, max_depth: usize) -> Self {
        self.lift_step = lift_step;
        self.max_depth = max_depth;
        self
    }

    pub fn base(&self) -> &GroupElement {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.space().n()
    }

    pub fn anchor_src(&self) -> &EinsHatPoint {
        &self.anchor_src
    }

    pub fn anchor_dst(&self) -> &EinsHatPoint {
        &self.anchor_dst
    }

    /// The integer `w` with `self == lift(base, w)` (for the default anchor).
    pub fn winding(&self) -> i64 {
        let img = self.image_theta_at(self.anchor_src.t, self.anchor_src.z.as_slice());
        let rel = self.anchor_dst.t - self.anchor_src.t.div_euclid(TAU) * TAU;
        ((rel - canonical_angle(img)) / TAU).round() as i64
    }

    fn image_theta_at(&self, t: f64, z: &[f64]) -> f64 {
        let mut w = vec![0.0; z.len() + 2];
        apply(self.base.mat(), t, z, &mut w);
        w[1].atan2(w[0])
    }

    /// Image of `p` under the lifted map.
    pub fn evaluate(&self, p: &EinsHatPoint) -> Result<EinsHatPoint> {
        let n1 = self.n() + 1;
        if p.z.len() != n1 {
            return Err(Error::Input("point has the wrong sphere dimension".into()));
        }
        let a = self.base.mat();
        let src = &self.anchor_src;
        let k = ((p.t - src.t) / TAU).floor();
        let t0 = p.t - TAU * k;
        let mut st = LiftState {
            tau: self.anchor_dst.t,
            theta: self.image_theta_at(src.t, src.z.as_slice()),
            buf: vec![0.0; n1 + 2],
            zb: vec![0.0; n1],
            step: self.lift_step,
            max_depth: self.max_depth,
            rate: 0.0,
        };
        // time leg
        let za = src.z.as_slice();
        let t_start = src.t;
        st.run(a, t0 - t_start, |s, out_z| {
            out_z.copy_from_slice(za);
            t_start + s
        })?;
        // great-circle leg(s) at t0
        let zp = p.z.as_slice();
        let omega = sphere_distance_slice(za, zp);
        if omega > 0.0 {
            if PI - omega < 1e-6 {
                let m = antipodal_waypoint(za);
                let w1 = sphere_distance_slice(za, m.as_slice());
                great_circle(&mut st, a, t0, za, m.as_slice(), w1)?;
                let w2 = sphere_distance_slice(m.as_slice(), zp);
                great_circle(&mut st, a, t0, m.as_slice(), zp, w2)?;
            } else {
                great_circle(&mut st, a, t0, za, zp, omega)?;
            }
        }
        let mut w = vec![0.0; n1 + 2];
        apply(a, t0, zp, &mut w);
        let theta_end = w[1].atan2(w[0]);
        let drift = wrap(st.tau - theta_end);
        if drift.abs() > 1e-8 + 1e-13 * st.tau.abs() {
            return Err(Error::Internal(format!("lift endpoint is off the fibre by {drift:.3e}")));
        }
        st.tau -= drift;
        let z = DVector::from_column_slice(&w[2..]);
        let zn = z.norm();
        Ok(EinsHatPoint { t: st.tau + TAU * k, z: z / zn })
    }

    /// `self o other`.
    pub fn compose(&self, other: &LiftedConformal) -> Result<LiftedConformal> {
        if self.base.space() != other.base.space() {
            return Err(Error::Input("lifts live over different spaces".into()));
        }
        let base = self.base.mul(&other.base);
        let anchor_dst = self.evaluate(&other.anchor_dst)?;
        Ok(LiftedConformal {
            base,
            anchor_src: other.anchor_src.clone(),
            anchor_dst,
            lift_step: self.lift_step.min(other.lift_step),
            max_depth: self.max_depth.max(other.max_depth),
        })
    }

    pub fn inverse(&self) -> Result<LiftedConformal> {
        let base = self.base.inverse();
        let src = &self.anchor_src;
        let q = act_eins(&base, &project(src))?;
        let q0 = EinsHatPoint { t: q.theta, z: q.z };
        let r = self.evaluate(&q0)?;
        let k = ((src.t - r.t) / TAU).round();
        Ok(LiftedConformal {
            base,
            anchor_src: src.clone(),
            anchor_dst: q0.shifted(TAU * k),
            lift_step: self.lift_step,
            max_depth: self.max_depth,
        })
    }

    /// `self^k` by repeated squaring.
    pub fn power(&self, k: i64) -> Result<LiftedConformal> {
        let mut base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = LiftedConformal::identity(self.n()).with_step(self.lift_step, self.max_depth);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.compose(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base)?;
            }
        }
        Ok(acc)
    }

    /// Conjugate `chi o self o chi^{-1}`.
    pub fn conjugate_by(&self, chi: &LiftedConformal) -> Result<LiftedConformal> {
        chi.compose(self)?.compose(&chi.inverse()?)
    }

    /// Time displacement `t(phi(p)) - t(p)`.
    pub fn displacement(&self, p: &EinsHatPoint) -> Result<f64> {
        Ok(self.evaluate(p)?.t - p.t)
    }

    /// Asymptotic time advance per iterate, for lifts of elliptic elements.
    ///
    /// A coarse average over `k_rot` iterates is refined by the displacement
    /// of the `2^24`-th power at a few base points.
    pub fn translation_number(&self, tol: &Tolerances, k_rot: usize) -> Result<f64> {
        if classify_matrix(&self.base, tol)? != MatrixClass::Elliptic {
            return Err(Error::Precondition("translation number needs an elliptic base".into()));
        }
        self.translation_estimate(k_rot, 24)
    }

    pub(crate) fn translation_estimate(&self, k_rot: usize, dyadic: u32) -> Result<f64> {
        let n = self.n();
        let seeds: Vec<EinsHatPoint> = (0..4)
            .map(|i| {
                let z = crate::eins::sphere_grid(n, 4)[i].clone();
                EinsHatPoint { t: 1.3 * i as f64, z }
            })
            .collect();
        let mut coarse = 0.0;
        let pk = self.power(k_rot as i64)?;
        for s in &seeds {
            coarse += pk.displacement(s)? / k_rot as f64;
        }
        coarse /= seeds.len() as f64;
        if dyadic == 0 {
            return Ok(coarse);
        }
        let big = self.power(1i64 << dyadic)?;
        let mut fine = 0.0;
        for s in &seeds {
            fine += big.displacement(s)?;
        }
        Ok(fine / seeds.len() as f64 / (1u64 << dyadic) as f64)
    }
}

fn same_base_point(a: &EinsPoint, b: &EinsPoint, tol: f64) -> bool {
    wrap(a.theta - b.theta).abs() <= tol && (&a.z - &b.z).norm() <= tol
}

/// `w = A (cos t, sin t, z)`.
#[inline]
pub(crate) fn apply(a: &DMatrix<f64>, t: f64, z: &[f64], w: &mut [f64]) {
    let d = w.len();
    let s = a.as_slice();
    let (c, sn) = (t.cos(), t.sin());
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = s[i] * c + s[d + i] * sn;
    }
    for (j, zj) in z.iter().enumerate() {
        let col = &s[(j + 2) * d..(j + 3) * d];
        for (wi, aij) in w.iter_mut().zip(col) {
            *wi += aij * zj;
        }
    }
}

fn antipodal_waypoint(za: &[f64]) -> DVector<f64> {
    let j = (0..za.len())
        .min_by(|&i, &k| za[i].abs().partial_cmp(&za[k].abs()).unwrap())
        .unwrap();
    let mut m = DVector::from_element(za.len(), 0.0);
    m[j] = 1.0;
    let zv = DVector::from_column_slice(za);
    let m = &m - &zv * zv.dot(&m);
    let mn = m.norm();
    m / mn
}

fn great_circle(st: &mut LiftState, a: &DMatrix<f64>, t0: f64, za: &[f64], zb: &[f64], omega: f64) -> Result<()> {
    let zav = DVector::from_column_slice(za);
    let zbv = DVector::from_column_slice(zb);
    let u = &zbv - &zav * omega.cos();
    let un = u.norm();
    let u = if un > 0.0 { u / un } else { u };
    st.run(a, omega, |s, out_z| {
        let (c, sn) = (s.cos(), s.sin());
        for i in 0..out_z.len() {
            out_z[i] = c * zav[i] + sn * u[i];
        }
        t0
    })
}

struct LiftState {
    tau: f64,
    theta: f64,
    buf: Vec<f64>,
    zb: Vec<f64>,
    step: f64,
    max_depth: usize,
    /// Last observed image angular speed per unit path length.
    rate: f64,
}

impl LiftState {
    /// Follows the image angle along a path of length `len` parametrized by
    /// arclength; `point(s, z)` writes the sphere part and returns the time.
    fn run<F: Fn(f64, &mut [f64]) -> f64>(&mut self, a: &DMatrix<f64>, len: f64, point: F) -> Result<()> {
        if len <= 0.0 {
            return Ok(());
        }
        let mut s = 0.0;
        let mut depth = 0usize;
        let mut h = self.next_step();
        while s < len {
            let s1 = (s + h).min(len);
            let t = point(s1, &mut self.zb);
            apply(a, t, &self.zb, &mut self.buf);
            let th = self.buf[1].atan2(self.buf[0]);
            let delta = wrap(th - self.theta);
            if delta.abs() < PI / 2.0 {
                self.tau += delta;
                self.theta = th;
                self.rate = delta.abs() / (s1 - s);
                s = s1;
                depth = 0;
                h = self.next_step();
            } else {
                depth += 1;
                if depth > self.max_depth {
                    return Err(Error::Continuation { depth, t });
                }
                h = (s1 - s) * 0.5;
            }
        }
        Ok(())
    }

    fn next_step(&self) -> f64 {
        if self.rate > 0.0 {
            self.step.min(0.4 / self.rate)
        } else {
            self.step
        }
    }
}

/// Fixed sphere axis used as the default anchor.
pub fn default_anchor(n: usize) -> EinsHatPoint {
    EinsHatPoint { t: 0.0, z: axis(n, 0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eins::{chronological, sphere_grid};
    use crate::linalg::lie_algebra_sample;

    fn rot_xy(n: usize, alpha: f64) -> GroupElement {
        let d = n + 3;
        let mut m = DMatrix::identity(d, d);
        m[(0, 0)] = alpha.cos();
        m[(0, 1)] = -alpha.sin();
        m[(1, 0)] = alpha.sin();
        m[(1, 1)] = alpha.cos();
        GroupElement::new(QuadraticSpace::diagonal(n), m, 1e-9).unwrap()
    }

    fn sphere_rot(n: usize, beta: f64) -> GroupElement {
        let d = n + 3;
        let mut m = DMatrix::identity(d, d);
        m[(2, 2)] = beta.cos();
        m[(2, 3)] = -beta.sin();
        m[(3, 2)] = beta.sin();
        m[(3, 3)] = beta.cos();
        GroupElement::new(QuadraticSpace::diagonal(n), m, 1e-9).unwrap()
    }

    fn pts(n: usize) -> Vec<EinsHatPoint> {
        sphere_grid(n, 12)
            .into_iter()
            .enumerate()
            .map(|(i, z)| EinsHatPoint { t: -7.0 + 1.37 * i as f64, z })
            .collect()
    }

    fn random_lift(n: usize, seed: u64, w: i64) -> LiftedConformal {
        let s = QuadraticSpace::diagonal(n);
        let x = lie_algebra_sample(&s, seed, 1.5);
        let l = LiftedConformal::from_generator(&s, &x, &Tolerances::default()).unwrap();
        l.compose(&LiftedConformal::deck(n).power(w).unwrap()).unwrap()
    }

    #[test]
    fn lift_examples() {
        let id = LiftedConformal::identity(2);
        assert_eq!(id.anchor_dst().t, 0.0);
        let deck = LiftedConformal::deck(2);
        assert!((deck.anchor_dst().t - TAU).abs() < 1e-15);
        let r = LiftedConformal::lift(&rot_xy(2, 1.0), 0).unwrap();
        assert!((r.anchor_dst().t - 1.0).abs() < 1e-15);
        assert!((&r.anchor_dst().z - axis(2, 0)).norm() < 1e-15);
        assert_eq!(r.winding(), 0);
        assert_eq!(LiftedConformal::lift(&rot_xy(2, 1.0), -3).unwrap().winding(), -3);
    }

    #[test]
    fn evaluate_examples() {
        let n = 2;
        let deck = LiftedConformal::deck(n);
        let r = LiftedConformal::lift(&rot_xy(n, 0.8), 0).unwrap();
        let s = LiftedConformal::lift(&sphere_rot(n, 2.0), 0).unwrap();
        let sm = sphere_rot(n, 2.0);
        for p in pts(n) {
            let q = deck.evaluate(&p).unwrap();
            assert!((q.t - p.t - TAU).abs() < 1e-12 && (&q.z - &p.z).norm() < 1e-12);
            let q = r.evaluate(&p).unwrap();
            assert!((q.t - p.t - 0.8).abs() < 1e-12 && (&q.z - &p.z).norm() < 1e-12);
            let q = s.evaluate(&p).unwrap();
            let rz = sm.mat().view((2, 2), (3, 3)) * &p.z;
            assert!((q.t - p.t).abs() < 1e-12 && (&q.z - rz).norm() < 1e-12);
        }
    }

    #[test]
    fn group_structure_examples() {
        let n = 2;
        let r = LiftedConformal::lift(&rot_xy(n, 2.5), 0).unwrap();
        let id = r.compose(&r.inverse().unwrap()).unwrap();
        assert!((id.anchor_dst().t - id.anchor_src().t).abs() < 1e-8);
        assert!((&id.anchor_dst().z - &id.anchor_src().z).norm() < 1e-8);
        let deck = LiftedConformal::deck(n);
        for k in [-3i64, 0, 1, 5] {
            let p = deck.power(k).unwrap();
            assert!((p.anchor_dst().t - TAU * k as f64).abs() < 1e-12);
        }
        let (a, b) = (2.5, 4.4);
        let ra = LiftedConformal::lift(&rot_xy(n, a), 0).unwrap();
        let rb = LiftedConformal::lift(&rot_xy(n, b), 0).unwrap();
        let c = ra.compose(&rb).unwrap();
        assert!((c.anchor_dst().t - (a + b)).abs() < 1e-12);
        assert_eq!(c.winding(), ((a + b) / TAU).floor() as i64);
    }

    #[test]
    fn projection_equivariance_and_homomorphism() {
        for n in 1..4 {
            let f = random_lift(n, 11 + n as u64, 1);
            let g = random_lift(n, 21 + n as u64, -2);
            let fg = f.compose(&g).unwrap();
            for p in pts(n) {
                let q = f.evaluate(&p).unwrap();
                let down = act_eins(f.base(), &project(&p)).unwrap();
                assert!(same_base_point(&project(&q), &down, 1e-8));
                let lhs = fg.evaluate(&p).unwrap();
                let rhs = f.evaluate(&g.evaluate(&p).unwrap()).unwrap();
                assert!(lhs.distance(&rhs) < 1e-7, "n={n} {}", lhs.distance(&rhs));
            }
        }
    }

    #[test]
    fn deck_is_central() {
        let deck = LiftedConformal::deck(2);
        let f = random_lift(2, 5, 0);
        let a = f.compose(&deck).unwrap();
        let b = deck.compose(&f).unwrap();
        for p in pts(2) {
            assert!(a.evaluate(&p).unwrap().distance(&b.evaluate(&p).unwrap()) < 1e-8);
        }
    }

    #[test]
    fn inverse_undoes_evaluation() {
        let f = random_lift(2, 8, 1);
        let fi = f.inverse().unwrap();
        for p in pts(2) {
            let back = fi.evaluate(&f.evaluate(&p).unwrap()).unwrap();
            assert!(back.distance(&p) < 1e-8);
        }
    }

    #[test]
    fn chronology_is_preserved() {
        let f = random_lift(2, 3, 0);
        let ps = pts(2);
        for p in &ps {
            for q in &ps {
                let before = chronological(p, q, 1e-9);
                if before.margin.abs() < 1e-8 {
                    continue;
                }
                let after = chronological(&f.evaluate(p).unwrap(), &f.evaluate(q).unwrap(), 1e-9);
                assert_eq!(before.relation, after.relation);
            }
        }
    }

    #[test]
    fn generator_lift_matches_rotation() {
        let s = QuadraticSpace::diagonal(2);
        let mut x = DMatrix::zeros(5, 5);
        x[(0, 1)] = -1.0;
        x[(1, 0)] = 1.0;
        // time-9 map of the rotation flow advances t by 9, not 9 - 2 pi
        let l = LiftedConformal::from_generator(&s, &(x * 9.0), &Tolerances::default()).unwrap();
        assert!((l.anchor_dst().t - 9.0).abs() < 1e-10);
    }

    #[test]
    fn translation_number_examples() {
        let tol = Tolerances::default();
        let deck = LiftedConformal::deck(2);
        assert!((deck.translation_number(&tol, 64).unwrap() - TAU).abs() < 1e-12);
        let s = LiftedConformal::lift(&sphere_rot(2, 1.3), 0).unwrap();
        assert!(s.translation_number(&tol, 64).unwrap().abs() < 1e-12);
        let r = LiftedConformal::lift(&rot_xy(2, 0.7), -1).unwrap();
        assert!((r.translation_number(&tol, 64).unwrap() - (0.7 - TAU)).abs() < 1e-9);
        let mut h = DMatrix::identity(5, 5);
        h[(0, 0)] = 2f64.cosh();
        h[(0, 2)] = 2f64.sinh();
        h[(2, 0)] = 2f64.sinh();
        h[(2, 2)] = 2f64.cosh();
        let b = GroupElement::new(QuadraticSpace::diagonal(2), h, 1e-9).unwrap();
        assert!(LiftedConformal::lift(&b, 0).unwrap().translation_number(&tol, 64).is_err());
    }

    #[test]
    fn antipodal_targets_are_handled() {
        let f = random_lift(2, 4, 0);
        let p = EinsHatPoint { t: 0.5, z: -axis(2, 0) };
        let q = f.evaluate(&p).unwrap();
        let down = act_eins(f.base(), &project(&p)).unwrap();
        assert!(same_base_point(&project(&q), &down, 1e-8));
    }
}

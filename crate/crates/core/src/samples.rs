//! Closed-form group elements and lifts used by the examples, the test
//! suites and the command line.

use crate::bridge::{example_nonsubgroup, transport, DiamondChart, MinkMap};
use crate::config::Tolerances;
use crate::eins::EinsHatPoint;
use crate::lift::LiftedConformal;
use crate::linalg::{group_exp, lie_algebra_sample, GroupElement, QuadraticSpace};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plane_rotation(d: usize, i: usize, j: usize, a: f64) -> DMatrix<f64> {
    let mut m = DMatrix::identity(d, d);
    m[(i, i)] = a.cos();
    m[(i, j)] = -a.sin();
    m[(j, i)] = a.sin();
    m[(j, j)] = a.cos();
    m
}

/// Rotation by `alpha` of the negative-definite `(x, y)` plane.
pub fn time_rotation(n: usize, alpha: f64) -> GroupElement {
    let m = plane_rotation(n + 3, 0, 1, alpha);
    GroupElement::new(QuadraticSpace::diagonal(n), m, 1e-9).expect("rotation preserves the form")
}

/// Rotation by `beta` of the `(z_1, z_2)` plane of the sphere.
pub fn sphere_rotation(n: usize, beta: f64) -> GroupElement {
    let m = plane_rotation(n + 3, 2, 3, beta);
    GroupElement::new(QuadraticSpace::diagonal(n), m, 1e-9).expect("rotation preserves the form")
}

/// `diag(e^s, e^-s, 1, ..)` in the split basis.
pub fn split_boost(n: usize, s: f64) -> GroupElement {
    let mut m = DMatrix::identity(n + 3, n + 3);
    m[(0, 0)] = s.exp();
    m[(1, 1)] = (-s).exp();
    GroupElement::new(QuadraticSpace::split(n), m, 1e-9).expect("boost preserves the form")
}

/// A product `A = E H P` of commuting factors with known parts.
#[derive(Debug, Clone)]
pub struct CommutingProduct {
    pub product: GroupElement,
    pub elliptic: GroupElement,
    pub hyperbolic: GroupElement,
    pub parabolic: GroupElement,
}

/// In the split basis `(x, y, z, t, w..)` a matrix `B` on `(x, z)` together
/// with `B^-T` on `(y, t)` preserves the form. Scalars, rotations and shears
/// of this kind give commuting hyperbolic, elliptic and unipotent factors;
/// a rotation of the `w` block joins in for `n >= 3`. The result is
/// conjugated by a random group element.
pub fn commuting_product(n: usize, seed: u64) -> Result<CommutingProduct> {
    let space = QuadraticSpace::split(n);
    let d = n + 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let paired = |b: &DMatrix<f64>| {
        let bit = b.clone().try_inverse().expect("invertible block").transpose();
        let mut m = DMatrix::identity(d, d);
        for (r, &i) in [0usize, 2].iter().enumerate() {
            for (c, &j) in [0usize, 2].iter().enumerate() {
                m[(i, j)] = b[(r, c)];
                m[(i + 1, j + 1)] = bit[(r, c)];
            }
        }
        m
    };
    let lambda = rng.random_range(1.2..3.0);
    let h = paired(&(DMatrix::identity(2, 2) * lambda));
    let (mut e, p);
    if rng.random::<bool>() {
        // rotation on (x, z); no room for a shear
        let beta = rng.random_range(0.3..2.8);
        e = paired(&plane_rotation(2, 0, 1, beta));
        p = DMatrix::identity(d, d);
    } else {
        let a = rng.random_range(0.3..1.5);
        p = paired(&DMatrix::from_row_slice(2, 2, &[1.0, a, 0.0, 1.0]));
        e = DMatrix::identity(d, d);
        if rng.random::<bool>() {
            for i in 0..4 {
                e[(i, i)] = -1.0;
            }
        }
    }
    if n >= 3 {
        let gamma = rng.random_range(0.3..2.8);
        e = plane_rotation(d, 4, 5, gamma) * e;
    }
    let g = group_exp(&space, &lie_algebra_sample(&space, rng.random(), 0.5), 1e-9)?;
    let gi = g.inverse();
    let conj = |m: &DMatrix<f64>| GroupElement::new_reprojected(space.clone(), g.mat() * m * gi.mat(), 1e-9);
    let (e, h, p) = (conj(&e)?, conj(&h)?, conj(&p)?);
    let product = GroupElement::new_reprojected(space.clone(), e.mat() * h.mat() * p.mat(), 1e-9)?;
    Ok(CommutingProduct { product, elliptic: e, hyperbolic: h, parabolic: p })
}

/// A shear times a boost whose eigenvalues sit `3 tol_cluster` away from 1,
/// so the spectral clusters nearly merge into one defective block.
pub fn near_defective(n: usize, tol: &Tolerances) -> GroupElement {
    let d = n + 3;
    let l = 1.0 + 3.0 * tol.cluster;
    let mut m = DMatrix::identity(d, d);
    m[(0, 0)] = l;
    m[(2, 2)] = l;
    m[(1, 1)] = 1.0 / l;
    m[(3, 3)] = 1.0 / l;
    // shear x += 0.5 z paired with t -= 0.5 y
    m[(0, 2)] = 0.5 * l;
    m[(3, 1)] = -0.5 / l;
    GroupElement::new(QuadraticSpace::split(n), m, 1e-9).expect("paired block preserves the form")
}

/// Names accepted by [`named_example`].
pub const EXAMPLE_NAMES: [&str; 4] = ["nonsubgroup", "deck", "homothety", "translation"];

/// The named constructions as labelled lifts: `nonsubgroup` yields the two
/// factors and their product, the others a single lift.
pub fn named_example(name: &str, n: usize, tol: &Tolerances) -> Result<Vec<(String, LiftedConformal)>> {
    if n == 0 {
        return Err(Error::Input("n must be at least 1".into()));
    }
    let chart = DiamondChart::new(&EinsHatPoint::on_axis(0.0, n));
    let mut unit_t = DVector::zeros(n + 1);
    unit_t[0] = 1.0;
    Ok(match name {
        "nonsubgroup" => {
            let ex = example_nonsubgroup(n, tol)?;
            let prod = ex.product()?;
            vec![("phi".into(), ex.phi), ("psi".into(), ex.psi), ("product".into(), prod)]
        }
        "deck" => vec![("deck".into(), LiftedConformal::deck(n))],
        "homothety" => vec![("homothety".into(), transport(&chart, &MinkMap::Homothety(2.0), tol)?)],
        "translation" => vec![("translation".into(), transport(&chart, &MinkMap::Translation(unit_t), tol)?)],
        other => return Err(Error::Input(format!("unknown example '{other}'"))),
    })
}

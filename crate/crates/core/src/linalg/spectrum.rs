use super::GroupElement;
use crate::config::Tolerances;
use crate::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

/// A group of numerically coincident eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub mean: C64,
    /// Indices into [`SpectralData::eigenvalues`].
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<C64>,
    pub clusters: Vec<Cluster>,
    /// Frobenius norm of the nilpotent part of `A = S + N`.
    pub semisimple_defect: f64,
    /// Cluster tolerance actually used (escalates past `tol.cluster` when
    /// a defective eigenvalue is split apart by roundoff).
    pub cluster_tol: f64,
    pub warnings: Vec<String>,
}

/// Eigenvalues, clusters and the semisimple defect of a group element.
pub fn eigendecompose(a: &GroupElement, tol: &Tolerances) -> Result<SpectralData> {
    let add = additive_jordan(a.mat(), tol)?;
    Ok(SpectralData {
        eigenvalues: add.eigenvalues,
        clusters: add.clusters,
        semisimple_defect: add.nil.norm(),
        cluster_tol: add.cluster_tol,
        warnings: add.warnings,
    })
}

pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let d = m.nrows();
    let mut eig: Vec<C64> = schur_eigenvalues(m)?;
    // Newton refinement of isolated eigenvalues on log det(A - lambda I).
    let mc = m.map(|x| C64::new(x, 0.0));
    let scale = m.norm().max(1.0);
    for i in 0..d {
        let lam = eig[i];
        if lam.im < 0.0 {
            continue;
        }
        let gap = (0..d)
            .filter(|&j| j != i)
            .map(|j| (eig[j] - lam).norm())
            .fold(f64::INFINITY, f64::min);
        if gap < 1e-4 * scale {
            continue;
        }
        let mut cur = lam;
        for _ in 0..2 {
            let shifted = &mc - DMatrix::<C64>::identity(d, d) * cur;
            let Some(inv) = shifted.try_inverse() else { break };
            let tr = inv.trace();
            if tr.norm() == 0.0 {
                break;
            }
            let step = C64::new(1.0, 0.0) / tr;
            if !(step.norm() < 0.1 * gap) {
                break;
            }
            cur += step;
        }
        if lam.im == 0.0 {
            cur.im = 0.0;
        }
        eig[i] = cur;
        if lam.im > 0.0 {
            if let Some(j) = (0..d).find(|&j| eig[j] == lam.conj()) {
                eig[j] = cur.conj();
            }
        }
    }
    Ok(eig)
}

/// Francis QR can stall on highly symmetric spectra; retry on orthogonally
/// conjugated copies, which have the same eigenvalues.
fn schur_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    const MAX_ITER: usize = 600;
    let d = m.nrows();
    for attempt in 0..6 {
        let eps = [f64::EPSILON, 1e-14, 1e-13][attempt % 3];
        let a = if attempt < 3 {
            m.clone()
        } else {
            let seed = DMatrix::from_fn(d, d, |i, j| ((i * 7 + j * 13 + attempt * 5) as f64 * 0.61).sin());
            let q = seed.qr().q();
            &q * m * q.transpose()
        };
        if let Some(schur) = nalgebra::linalg::Schur::try_new(a, eps, MAX_ITER) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::Solver { what: "real Schur iteration".into(), iterations: MAX_ITER })
}

pub(crate) fn cluster(eig: &[C64], tol: f64) -> Vec<Cluster> {
    let d = eig.len();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..d {
        for j in i + 1..d {
            if (eig[i] - eig[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut out: Vec<Cluster> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..d {
        let r = find(&mut parent, i);
        match roots.iter().position(|&x| x == r) {
            Some(k) => out[k].members.push(i),
            None => {
                roots.push(r);
                out.push(Cluster { mean: C64::new(0.0, 0.0), members: vec![i] });
            }
        }
    }
    for c in &mut out {
        let s: C64 = c.members.iter().map(|&i| eig[i]).sum();
        c.mean = s / c.members.len() as f64;
        if c.mean.im.abs() <= tol {
            // keep real clusters exactly real
            let all_real = c.members.iter().all(|&i| eig[i].im.abs() <= tol);
            if all_real {
                c.mean.im = 0.0;
            }
        }
    }
    // deterministic order: by real part, then imaginary part
    out.sort_by(|a, b| {
        a.mean
            .re
            .partial_cmp(&b.mean.re)
            .unwrap()
            .then(a.mean.im.partial_cmp(&b.mean.im).unwrap())
    });
    out
}

/// Spectral projector of each cluster by Hermite interpolation on the
/// cluster means: `p(A)` with `p = 1` to order `m_c` at `mu_c` and `p = 0`
/// to order `m_d` at every other cluster.
pub(crate) fn projectors(m: &DMatrix<f64>, clusters: &[Cluster]) -> Vec<DMatrix<C64>> {
    let d = m.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let mc = m.map(|x| C64::new(x, 0.0));
    if clusters.len() == 1 {
        return vec![id];
    }
    let mut out = Vec::with_capacity(clusters.len());
    for (ci, c) in clusters.iter().enumerate() {
        let mu = c.mean;
        let mc_deg = c.multiplicity();
        let mut chi = id.clone();
        // Taylor coefficients of 1/chi_c at mu, degree mc_deg - 1
        let mut coef = vec![C64::new(0.0, 0.0); mc_deg];
        coef[0] = C64::new(1.0, 0.0);
        for (di, other) in clusters.iter().enumerate() {
            if di == ci {
                continue;
            }
            let md = other.multiplicity();
            let shifted = &mc - &id * other.mean;
            for _ in 0..md {
                chi = &chi * &shifted;
            }
            // (x - mu_d)^{-md} = delta^{-md} sum_k binom(-md, k) (s/delta)^k, s = x - mu
            let delta = mu - other.mean;
            let mut series = vec![C64::new(0.0, 0.0); mc_deg];
            let base = delta.powi(-(md as i32));
            let mut b = 1.0f64;
            for (k, s) in series.iter_mut().enumerate() {
                if k > 0 {
                    b *= (-(md as f64) - (k as f64 - 1.0)) / k as f64;
                }
                *s = base * b / delta.powi(k as i32);
            }
            let mut prod = vec![C64::new(0.0, 0.0); mc_deg];
            for i in 0..mc_deg {
                for j in 0..mc_deg - i {
                    prod[i + j] += coef[i] * series[j];
                }
            }
            coef = prod;
        }
        let shifted = &mc - &id * mu;
        let mut h = DMatrix::<C64>::zeros(d, d);
        let mut pw = id.clone();
        for (k, ck) in coef.iter().enumerate() {
            if k > 0 {
                pw = &pw * &shifted;
            }
            h += &pw * *ck;
        }
        out.push(chi * h);
    }
    out
}

pub(crate) struct Additive {
    pub eigenvalues: Vec<C64>,
    pub clusters: Vec<Cluster>,
    pub projectors: Vec<DMatrix<C64>>,
    pub s: DMatrix<f64>,
    pub nil: DMatrix<f64>,
    pub cluster_tol: f64,
    pub warnings: Vec<String>,
}

const PROJECTOR_BOUND: f64 = 1e6;

/// Additive Jordan-Chevalley decomposition `A = S + N`.
///
/// Clusters are formed at `tol.cluster` first; if a cluster split by
/// roundoff produces ill-conditioned projectors the tolerance is escalated.
pub(crate) fn additive_jordan(m: &DMatrix<f64>, tol: &Tolerances) -> Result<Additive> {
    let d = m.nrows();
    let eig = eigenvalues(m)?;
    let mut schedule = vec![tol.cluster];
    for e in [1e-5, 1e-4, 1e-3, 1e-2] {
        if e > tol.cluster {
            schedule.push(e);
        }
    }
    let mut warnings = Vec::new();
    let mut chosen: Option<(f64, Vec<Cluster>, Vec<DMatrix<C64>>)> = None;
    let mut last = None;
    for &eps in &schedule {
        let clusters = cluster(&eig, eps);
        let proj = projectors(m, &clusters);
        if projectors_ok(&proj, d) {
            chosen = Some((eps, clusters, proj));
            break;
        }
        last = Some((eps, clusters, proj));
    }
    let (eps, clusters, proj) = match chosen {
        Some(c) => c,
        None => {
            let (eps, _, _) = last.expect("schedule is nonempty");
            warnings.push(format!("spectral projectors ill-conditioned up to cluster tolerance {eps:e}"));
            let clusters = cluster(&eig, eps);
            let proj = projectors(m, &clusters);
            (eps, clusters, proj)
        }
    };
    if eps > tol.cluster {
        warnings.push(format!("cluster tolerance escalated to {eps:e} (defective eigenvalue)"));
    }
    // clusters close to merging
    let mut closest = f64::INFINITY;
    for (i, a) in clusters.iter().enumerate() {
        for b in clusters.iter().skip(i + 1) {
            for &x in &a.members {
                for &y in &b.members {
                    closest = closest.min((eig[x] - eig[y]).norm());
                }
            }
        }
    }
    if closest <= 10.0 * eps {
        warnings.push(format!("clusters within {closest:.3e} of merging"));
    }
    let mut s = DMatrix::<C64>::zeros(d, d);
    for (c, p) in clusters.iter().zip(&proj) {
        s += p * c.mean;
    }
    let s = s.map(|z| z.re);
    let nil = m - &s;
    Ok(Additive { eigenvalues: eig, clusters, projectors: proj, s, nil, cluster_tol: eps, warnings })
}

fn projectors_ok(proj: &[DMatrix<C64>], d: usize) -> bool {
    let id = DMatrix::<C64>::identity(d, d);
    let mut sum = DMatrix::<C64>::zeros(d, d);
    for p in proj {
        let n = p.norm();
        if !n.is_finite() || n > PROJECTOR_BOUND {
            return false;
        }
        let idem = (p * p - p).norm();
        if idem > 1e-6 * n.max(1.0) * n.max(1.0) {
            return false;
        }
        sum += p;
    }
    (sum - id).norm() <= 1e-6
}

/// Orthonormal basis (columns) of the numerical kernel of `m`: right singular
/// vectors whose singular value is at most `thr`, but at least `min_dim` of them.
pub(crate) fn kernel(m: &DMatrix<f64>, thr: f64, min_dim: usize) -> (DMatrix<f64>, Vec<f64>) {
    let d = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[a].partial_cmp(&sv[b]).unwrap());
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (rank, &i) in idx.iter().enumerate() {
        if sv[i] <= thr || rank < min_dim {
            cols.push(vt.row(i).transpose());
            vals.push(sv[i]);
        }
    }
    if cols.is_empty() {
        return (DMatrix::zeros(d, 0), vals);
    }
    (DMatrix::from_columns(&cols), vals)
}

pub(crate) fn kernel_complex(m: &DMatrix<C64>, thr: f64, min_dim: usize) -> DMatrix<C64> {
    let d = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[a].partial_cmp(&sv[b]).unwrap());
    let mut cols: Vec<DVector<C64>> = Vec::new();
    for (rank, &i) in idx.iter().enumerate() {
        if sv[i] <= thr || rank < min_dim {
            cols.push(vt.row(i).adjoint());
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{group_exp, lie_algebra_sample, QuadraticSpace};

    fn rotation(d: usize, alpha: f64) -> DMatrix<f64> {
        let mut m = DMatrix::identity(d, d);
        m[(0, 0)] = alpha.cos();
        m[(0, 1)] = -alpha.sin();
        m[(1, 0)] = alpha.sin();
        m[(1, 1)] = alpha.cos();
        m
    }

    #[test]
    fn identity_spectrum() {
        let s = QuadraticSpace::diagonal(2);
        let sd = eigendecompose(&GroupElement::identity(s), &Tolerances::default()).unwrap();
        assert_eq!(sd.clusters.len(), 1);
        assert!(sd.eigenvalues.iter().all(|l| (*l - C64::new(1.0, 0.0)).norm() < 1e-14));
        assert_eq!(sd.semisimple_defect, 0.0);
    }

    #[test]
    fn split_boost_spectrum() {
        let s = QuadraticSpace::split(2);
        let mut h = DMatrix::identity(5, 5);
        h[(0, 0)] = 2.0;
        h[(1, 1)] = 0.5;
        let g = GroupElement::new(s, h, 1e-9).unwrap();
        let sd = eigendecompose(&g, &Tolerances::default()).unwrap();
        let mut re: Vec<f64> = sd.eigenvalues.iter().map(|l| l.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(re, vec![0.5, 1.0, 1.0, 1.0, 2.0]);
        assert_eq!(sd.clusters.len(), 3);
    }

    #[test]
    fn rotation_spectrum_matches_char_poly() {
        // the 2x2 block has characteristic polynomial l^2 - 2 cos(a) l + 1
        let s = QuadraticSpace::diagonal(2);
        let alpha = 0.9;
        let g = GroupElement::new(s, rotation(5, alpha), 1e-9).unwrap();
        let sd = eigendecompose(&g, &Tolerances::default()).unwrap();
        let roots = [C64::new(alpha.cos(), alpha.sin()), C64::new(alpha.cos(), -alpha.sin())];
        for r in roots {
            assert!(sd.eigenvalues.iter().any(|l| (*l - r).norm() < 1e-14));
        }
        assert_eq!(sd.eigenvalues.iter().filter(|l| (**l - C64::new(1.0, 0.0)).norm() < 1e-14).count(), 3);
        assert!(sd.semisimple_defect < 1e-14);
    }

    #[test]
    fn spectral_invariants_on_random_elements() {
        for n in 1..4 {
            let s = QuadraticSpace::diagonal(n);
            for seed in 0..20 {
                let a = group_exp(&s, &lie_algebra_sample(&s, seed, 2.0), 1e-9).unwrap();
                let sd = eigendecompose(&a, &Tolerances::default()).unwrap();
                let prod: f64 = sd.eigenvalues.iter().map(|l| l.norm()).product();
                let det = a.mat().determinant().abs();
                assert!((prod - det).abs() <= 1e-8 * det);
                for l in &sd.eigenvalues {
                    assert!(sd.eigenvalues.iter().any(|m| (*m - l.conj()).norm() < 1e-9));
                    let inv = C64::new(1.0, 0.0) / l;
                    assert!(sd.eigenvalues.iter().any(|m| (*m - inv).norm() < 1e-6));
                }
            }
        }
    }

    #[test]
    fn jordan_block_is_one_cluster() {
        // null rotation in split coordinates fixing the isotropic vector e_z
        let s = QuadraticSpace::split(2);
        let mut nmat = DMatrix::<f64>::zeros(5, 5);
        nmat[(2, 4)] = 1.0;
        nmat[(4, 3)] = -1.0;
        let p = crate::linalg::expm(&nmat);
        let shear = (&p - DMatrix::<f64>::identity(5, 5)).norm();
        let g = GroupElement::new(s, p, 1e-9).unwrap();
        let sd = eigendecompose(&g, &Tolerances::default()).unwrap();
        assert_eq!(sd.clusters.len(), 1);
        assert!((sd.semisimple_defect - shear).abs() < 1e-8);
    }
}

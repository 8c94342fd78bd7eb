use super::{ls_slope, Certificate, Classification, Confidence, Kind, Method, SeedVerdict};
use crate::config::RunConfig;
use crate::eins::{margin, sphere_frame, sphere_grid, sphere_grid_cover, EinsHatPoint};
use crate::lift::LiftedConformal;
use crate::{Diagnostics, Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

/// Dyadic powers are only followed while the base stays this well conditioned.
const NORM_CAP: f64 = 1e6;
const DYADIC_MAX: u32 = 24;
const PAIR_STEP: f64 = 1e-3;
const ELLIPTIC_RATIO: f64 = 1e3;
const NON_ELLIPTIC_RATIO: f64 = 1e4;
const MAX_FULL_CHECKS: usize = 6;

/// Deterministic seeds: sphere grid points paired with a golden-ratio
/// sequence of times in `[0, 2 pi)`.
pub fn seed_points(n: usize, count: usize) -> Vec<EinsHatPoint> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    sphere_grid(n, count)
        .into_iter()
        .enumerate()
        .map(|(i, z)| EinsHatPoint { t: TAU * (0.5 + g * i as f64).fract(), z })
        .collect()
}

struct SeedRun {
    verdict: SeedVerdict,
    window: f64,
    drift: f64,
    end: EinsHatPoint,
    step_residual: f64,
    fixed: bool,
    ratio: [f64; 2],
    time_defect: f64,
}

fn companion(q: &EinsHatPoint) -> EinsHatPoint {
    let f = sphere_frame(&q.z);
    let h = PAIR_STEP / 2f64.sqrt();
    let z = &q.z + f.column(1) * h;
    let zn = z.norm();
    EinsHatPoint { t: q.t + h, z: z / zn }
}

fn chord(a: &EinsHatPoint, b: &EinsHatPoint) -> f64 {
    let dt = a.t - b.t;
    (dt * dt + (&a.z - &b.z).norm_squared()).sqrt()
}

/// Powers `phi^(2^m)` beyond the orbit horizon, as long as they stay tame.
fn dyadic_powers(phi: &LiftedConformal, k_max: usize) -> Vec<(f64, LiftedConformal)> {
    let mut out = Vec::new();
    let mut p = phi.clone();
    for m in 1..=DYADIC_MAX {
        p = match p.compose(&p) {
            Ok(q) => q,
            Err(_) => break,
        };
        if p.base().mat().norm() > NORM_CAP {
            break;
        }
        let horizon = (1u64 << m) as f64;
        if horizon > k_max as f64 {
            out.push((horizon, p.clone()));
        }
    }
    out
}

fn run_seed(phi: &LiftedConformal, q0: &EinsHatPoint, dyadic: &[(f64, LiftedConformal)], cfg: &RunConfig) -> Result<SeedRun> {
    let b = &cfg.budgets;
    let mut q = q0.clone();
    let mut c = companion(q0);
    let d0 = chord(&q, &c);
    let mut ratio = [1.0f64, 1.0f64];
    let mut ts = Vec::with_capacity(b.k_max + 1);
    ts.push(q.t);
    let first = phi.evaluate(&q)?;
    let step_residual = first.distance(&q);
    let fixed = step_residual <= cfg.tol.fix;
    for k in 0..b.k_max {
        q = if k == 0 { first.clone() } else { phi.evaluate(&q)? };
        c = phi.evaluate(&c)?;
        let r = chord(&q, &c) / d0;
        ratio[0] = ratio[0].min(r);
        ratio[1] = ratio[1].max(r);
        ts.push(q.t);
    }
    let (lo, hi) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let net = ts[ts.len() - 1] - ts[0];
    let mut long = Vec::new();
    for (h, p) in dyadic {
        let qq = p.evaluate(q0)?;
        let cc = p.evaluate(&companion(q0))?;
        let r = chord(&qq, &cc) / d0;
        ratio[0] = ratio[0].min(r);
        ratio[1] = ratio[1].max(r);
        long.push((*h, qq.t - q0.t));
    }
    let window = (hi - lo).max(long.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max));
    let verdict = if window <= b.w_max {
        SeedVerdict::Bounded
    } else {
        let last = long.last().map(|(_, d)| *d).unwrap_or(net);
        if last > b.w_max {
            SeedVerdict::Future
        } else if last < -b.w_max {
            SeedVerdict::Past
        } else {
            SeedVerdict::Undecided
        }
    };
    let drift = match long.last() {
        Some((h, d)) => d / h,
        None => ls_slope(&ts[ts.len() / 2..]),
    };
    Ok(SeedRun {
        verdict,
        window,
        drift,
        end: q,
        step_residual,
        fixed,
        ratio,
        time_defect: net.abs() / b.k_max as f64,
    })
}

/// Escaping certificate for a fixed power `j` on the full deck-period grid.
#[derive(Debug, Clone)]
pub struct EscapeCheck {
    pub j: usize,
    pub future: bool,
    /// Smallest margin at the shifted grid points.
    pub min_margin: f64,
    pub radius: f64,
    /// `min_margin - 2 radius`.
    pub safety: f64,
    pub grid_points: usize,
}

impl EscapeCheck {
    pub fn certified(&self, cfg: &RunConfig) -> bool {
        self.min_margin > cfg.budgets.delta_margin && self.safety > 0.0
    }
}

/// Radius `r` such that the diamonds `I(g - r, g + r)` around the grid points
/// `g = (t_i, z_j)` cover the cover.
fn grid_radius(n: usize, cfg: &RunConfig) -> f64 {
    let b = &cfg.budgets;
    sphere_grid_cover(n, b.sphere_grid_size(n)) + PI / b.t_samples as f64
}

/// Checks `q << phi^j(q)` (future) or `phi^j(q) << q` (past) for all `q`.
///
/// Every point lies in a diamond `I(g-, g+)` with `g+- = g +- r` in time
/// around a grid point `g`. For such `q`, `q << g+` and `phi^j(g-) << phi^j(q)`,
/// so the future claim follows from `g+ << phi^j(g-)`, i.e. from the margin at
/// `g-` exceeding `2r`; the margin is deck-periodic, so one period of grid
/// times suffices. The past case is symmetric with `g+`.
pub fn certify_escaping(phi: &LiftedConformal, j: usize, future: bool, cfg: &RunConfig) -> Result<EscapeCheck> {
    let n = phi.n();
    let b = &cfg.budgets;
    let r = grid_radius(n, cfg);
    let zs = sphere_grid(n, b.sphere_grid_size(n));
    let shift = if future { -r } else { r };
    let points: Vec<EinsHatPoint> = (0..b.t_samples)
        .flat_map(|it| {
            let t = TAU * it as f64 / b.t_samples as f64 + shift;
            zs.iter().map(move |z| EinsHatPoint { t, z: z.clone() })
        })
        .collect();
    let psi = phi.power(j as i64)?;
    let min_margin = points
        .par_iter()
        .map(|q| {
            let img = psi.evaluate(q)?;
            Ok(if future { margin(q, &img) } else { margin(&img, q) })
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(EscapeCheck { j, future, min_margin, radius: r, safety: min_margin - 2.0 * r, grid_points: points.len() })
}

enum Search {
    Found(EscapeCheck),
    Conflict,
    NotFound { best_future: f64, best_past: f64 },
}

fn coarse_points(n: usize) -> Vec<EinsHatPoint> {
    let nz = if n == 1 { 32 } else { 64 };
    let nt = 8;
    let zs = sphere_grid(n, nz);
    let mut out = Vec::with_capacity(nt * nz);
    for it in 0..nt {
        let t = TAU * (it as f64 + 0.5) / nt as f64;
        for z in &zs {
            out.push(EinsHatPoint { t, z: z.clone() });
        }
    }
    out
}

/// Iterates a coarse grid and runs the full check at powers whose coarse
/// margin clears the certificate threshold; after a failed check the next
/// candidate power is at least 1.5 times larger.
fn escape_search(phi: &LiftedConformal, cfg: &RunConfig) -> Result<Search> {
    let b = &cfg.budgets;
    let need = (2.0 * grid_radius(phi.n(), cfg)).max(b.delta_margin);
    let base = coarse_points(phi.n());
    let mut cur = base.clone();
    let (mut best_f, mut best_p) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut checks = 0;
    let mut next_allowed = [1usize, 1usize];
    for j in 1..=b.j_max {
        cur = cur.par_iter().map(|q| phi.evaluate(q)).collect::<Result<_>>()?;
        let mf = base.iter().zip(&cur).map(|(q, r)| margin(q, r)).fold(f64::INFINITY, f64::min);
        let mp = base.iter().zip(&cur).map(|(q, r)| margin(r, q)).fold(f64::INFINITY, f64::min);
        best_f = best_f.max(mf);
        best_p = best_p.max(mp);
        if mf > b.delta_margin && mp > b.delta_margin {
            return Ok(Search::Conflict);
        }
        for (slot, (coarse, future)) in [(mf, true), (mp, false)].into_iter().enumerate() {
            if coarse > need && j >= next_allowed[slot] && checks < MAX_FULL_CHECKS {
                checks += 1;
                let chk = certify_escaping(phi, j, future, cfg)?;
                if chk.certified(cfg) {
                    let other = if future { best_p } else { best_f };
                    if other > b.delta_margin {
                        return Ok(Search::Conflict);
                    }
                    return Ok(Search::Found(chk));
                }
                next_allowed[slot] = (j * 3).div_ceil(2).max(j + 1);
            }
        }
    }
    Ok(Search::NotFound { best_future: best_f, best_past: best_p })
}

/// Damped Gauss-Newton for `phi(q) = q`, re-centred on the sphere each step.
fn refine_fixed_point(phi: &LiftedConformal, start: &EinsHatPoint, tol_fix: f64) -> Result<Option<(EinsHatPoint, f64)>> {
    let n1 = start.z.len();
    let resid = |q: &EinsHatPoint| -> Result<DVector<f64>> {
        let r = phi.evaluate(q)?;
        let mut v = DVector::zeros(n1 + 1);
        v[0] = r.t - q.t;
        v.rows_mut(1, n1).copy_from(&(&r.z - &q.z));
        Ok(v)
    };
    let mut q = start.clone();
    let mut r = resid(&q)?;
    let mut rn = r.norm();
    let mut lambda = 1e-3;
    for _ in 0..80 {
        if rn <= 0.5 * tol_fix {
            break;
        }
        let frame = sphere_frame(&q.z);
        let at = |y: &DVector<f64>| -> EinsHatPoint {
            let mut z = q.z.clone();
            for i in 1..n1 {
                z += frame.column(i) * y[i];
            }
            let zn = z.norm();
            EinsHatPoint { t: q.t + y[0], z: z / zn }
        };
        let h = 1e-7;
        let mut jac = DMatrix::zeros(n1 + 1, n1);
        for c in 0..n1 {
            let mut y = DVector::zeros(n1);
            y[c] = h;
            let rp = resid(&at(&y))?;
            y[c] = -h;
            let rm = resid(&at(&y))?;
            jac.set_column(c, &((rp - rm) / (2.0 * h)));
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..n1 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 4.0;
                continue;
            };
            let qn = at(&delta);
            let rnew = resid(&qn)?;
            if rnew.norm() < rn {
                q = qn;
                r = rnew;
                rn = r.norm();
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    Ok((rn <= tol_fix).then_some((q, rn)))
}

/// Classifies a lift from orbits alone: per-seed long-horizon verdicts, a
/// grid search for an escaping power, and for bounded orbits a distortion
/// test separating compact behaviour from a fixed point.
pub fn classify_dynamic(phi: &LiftedConformal, cfg: &RunConfig) -> Result<Classification> {
    cfg.validate()?;
    let b = &cfg.budgets;
    let n = phi.n();
    let seeds = seed_points(n, b.seeds);
    let dyadic = dyadic_powers(phi, b.k_max);
    let runs: Vec<SeedRun> = seeds.par_iter().map(|s| run_seed(phi, s, &dyadic, cfg)).collect::<Result<_>>()?;
    let verdicts: Vec<SeedVerdict> = runs.iter().map(|r| r.verdict).collect();
    let drift = runs.iter().map(|r| r.drift).fold(0.0, |a: f64, d| if d.abs() > a.abs() { d } else { a });
    let max_window = runs.iter().map(|r| r.window).fold(0.0, f64::max);
    let mut notes = Vec::new();
    if !verdicts.windows(2).all(|w| w[0] == w[1]) {
        notes.push("mixed per-seed verdicts".to_string());
    }
    let make = |kind, confidence, certificate, notes: Vec<String>| Classification {
        kind,
        confidence,
        method: Method::Dynamic,
        certificate,
        seed_verdicts: verdicts.clone(),
        drift: Some(drift),
        notes,
    };
    let diagnostics = |bf: f64, bp: f64, notes: Vec<String>| Diagnostics {
        best_future_margin: bf,
        best_past_margin: bp,
        drift,
        max_window,
        seed_verdicts: verdicts.iter().map(|v| format!("{v:?}").to_lowercase()).collect(),
        notes,
    };

    let all_bounded = verdicts.iter().all(|v| *v == SeedVerdict::Bounded);
    let mut search_best = None;
    if !all_bounded || drift.abs() > b.delta_drift {
        match escape_search(phi, cfg)? {
            Search::Found(chk) => {
                let kind = if chk.future { Kind::FutureEscaping } else { Kind::PastEscaping };
                let cert = Certificate::Escaping {
                    j: chk.j as i64,
                    margin: chk.min_margin,
                    radius: chk.radius,
                    safety: chk.safety,
                    grid_points: chk.grid_points,
                };
                return Ok(make(kind, Confidence::CertifiedOnGrid, cert, notes));
            }
            Search::Conflict => {
                notes.push("both escaping directions passed the coarse grid".into());
                return Err(Error::Indeterminate(Box::new(diagnostics(f64::NAN, f64::NAN, notes))));
            }
            Search::NotFound { best_future, best_past } if all_bounded => {
                search_best = Some((best_future, best_past));
            }
            Search::NotFound { best_future, best_past } => {
                let kind = if best_future > 0.0 && best_future >= best_past {
                    Some(Kind::FutureEscaping)
                } else if best_past > 0.0 {
                    Some(Kind::PastEscaping)
                } else if drift > b.delta_drift {
                    Some(Kind::FutureEscaping)
                } else if drift < -b.delta_drift {
                    Some(Kind::PastEscaping)
                } else {
                    None
                };
                let evidence = Certificate::Evidence { drift, best_future_margin: best_future, best_past_margin: best_past };
                return match kind {
                    Some(k) => {
                        notes.push("no grid certificate within the power budget".into());
                        Ok(make(k, Confidence::Heuristic, evidence, notes))
                    }
                    None => {
                        notes.push("unbounded orbits without a drift direction".into());
                        Err(Error::Indeterminate(Box::new(diagnostics(best_future, best_past, notes))))
                    }
                };
            }
        }
    }

    // bounded orbits
    if runs.iter().all(|r| r.fixed) {
        let cert = Certificate::FixedPoint { point: seeds[0].clone(), residual: runs[0].step_residual, fibre_shift: 0 };
        notes.push("every seed is fixed".into());
        return Ok(make(Kind::NonEscapingFixedPoint, Confidence::CertifiedOnGrid, cert, notes));
    }
    let rmin = runs.iter().map(|r| r.ratio[0]).fold(f64::INFINITY, f64::min);
    let rmax = runs.iter().map(|r| r.ratio[1]).fold(0.0, f64::max);
    let elliptic = rmin >= 1.0 / ELLIPTIC_RATIO && rmax <= ELLIPTIC_RATIO;
    let non_elliptic = rmin < 1.0 / NON_ELLIPTIC_RATIO || rmax > NON_ELLIPTIC_RATIO;
    let drift_ok = drift.abs() <= b.delta_drift;
    let elliptic_cert = || Certificate::Elliptic {
        translation_number: drift,
        spectrum_defect: None,
        time_function_defect: Some(runs.iter().map(|r| r.time_defect).fold(0.0, f64::max)),
        distortion: Some([rmin, rmax]),
    };
    if elliptic && drift_ok {
        return Ok(make(Kind::NonEscapingElliptic, Confidence::CertifiedOnGrid, elliptic_cert(), notes));
    }
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &c| {
        let ra = phi.evaluate(&runs[a].end).map(|q| q.distance(&runs[a].end)).unwrap_or(f64::INFINITY);
        let rc = phi.evaluate(&runs[c].end).map(|q| q.distance(&runs[c].end)).unwrap_or(f64::INFINITY);
        ra.partial_cmp(&rc).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(4) {
        if let Some((q, res)) = refine_fixed_point(phi, &runs[i].end, cfg.tol.fix)? {
            let conf = if non_elliptic { Confidence::CertifiedOnGrid } else { Confidence::Heuristic };
            if !non_elliptic {
                notes.push(format!("distortion range [{rmin:.3e}, {rmax:.3e}] is inconclusive"));
            }
            let cert = Certificate::FixedPoint { point: q, residual: res, fibre_shift: 0 };
            return Ok(make(Kind::NonEscapingFixedPoint, conf, cert, notes));
        }
    }
    notes.push("fixed-point refinement did not converge".into());
    if let Some((best_future, best_past)) = search_best {
        // a nonzero translation number rules out a fixed point
        let kind = if drift > 0.0 { Kind::FutureEscaping } else { Kind::PastEscaping };
        notes.push("bounded windows with nonzero drift; no grid certificate within the power budget".into());
        let evidence = Certificate::Evidence { drift, best_future_margin: best_future, best_past_margin: best_past };
        return Ok(make(kind, Confidence::Heuristic, evidence, notes));
    }
    if non_elliptic {
        let cert = Certificate::Evidence { drift, best_future_margin: f64::NAN, best_past_margin: f64::NAN };
        Ok(make(Kind::NonEscapingFixedPoint, Confidence::Heuristic, cert, notes))
    } else {
        Ok(make(Kind::NonEscapingElliptic, Confidence::Heuristic, elliptic_cert(), notes))
    }
}

//! Seeded random corpora of lifts, classified both ways.

use crate::config::RunConfig;
use crate::dynamics::{classify_algebraic, classify_dynamic, is_essential, Certificate, Classification, Kind};
use crate::lift::LiftedConformal;
use crate::linalg::{classify_matrix, lie_algebra_sample, MatrixClass, QuadraticSpace};
use crate::{Diagnostics, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// `exp(X)` lifted from the identity, followed by `deck_power` deck translations.
pub fn random_lift(n: usize, sample_seed: u64, scale: f64, deck_power: i64, cfg: &RunConfig) -> Result<LiftedConformal> {
    let space = QuadraticSpace::diagonal(n);
    let x = lie_algebra_sample(&space, sample_seed, scale);
    let l = LiftedConformal::from_generator(&space, &x, &cfg.tol)?;
    l.compose(&LiftedConformal::deck(n).power(deck_power)?)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleSpec {
    pub index: usize,
    pub sample_seed: u64,
    pub deck_power: i64,
}

/// Per-record seeds and deck powers in `-2..=2` (unless forced).
pub fn corpus_specs(count: usize, seed: u64, deck_power: Option<i64>) -> Vec<SampleSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|index| {
            let sample_seed = rng.random::<u64>();
            let w = rng.random_range(-2i64..=2);
            SampleSpec { index, sample_seed, deck_power: deck_power.unwrap_or(w) }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifierOutcome {
    pub result: Option<Classification>,
    pub error: Option<String>,
    /// [`Error::tag`] of the failure.
    pub error_kind: Option<&'static str>,
    pub diagnostics: Option<Diagnostics>,
}

impl ClassifierOutcome {
    fn from(r: Result<Classification>) -> Self {
        match r {
            Ok(c) => ClassifierOutcome { result: Some(c), error: None, error_kind: None, diagnostics: None },
            Err(Error::Indeterminate(d)) => ClassifierOutcome {
                result: None,
                error: Some("indeterminate".into()),
                error_kind: Some("indeterminate"),
                diagnostics: Some(*d),
            },
            Err(e) => {
                ClassifierOutcome { result: None, error: Some(e.to_string()), error_kind: Some(e.tag()), diagnostics: None }
            }
        }
    }

    pub fn certified(&self) -> Option<&Classification> {
        self.result.as_ref().filter(|c| c.certified())
    }

    pub fn indeterminate(&self) -> bool {
        self.diagnostics.is_some()
    }
}

/// Both classifiers, their agreement and essentiality for one lift.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub kind: Option<Kind>,
    pub base_class: Option<MatrixClass>,
    pub dynamic: ClassifierOutcome,
    pub algebraic: ClassifierOutcome,
    /// Present when both classifiers certified.
    pub agree: Option<bool>,
    pub essential: Option<bool>,
    pub essential_reason: Option<&'static str>,
    /// For essential records: a certificate fixed point re-evaluated within tolerance.
    pub fixed_point_verified: Option<bool>,
}

impl Report {
    pub fn mutually_certified(&self) -> bool {
        self.agree.is_some()
    }
}

pub fn classify_both(phi: &LiftedConformal, cfg: &RunConfig) -> Report {
    let dynamic = ClassifierOutcome::from(classify_dynamic(phi, cfg));
    let algebraic = ClassifierOutcome::from(classify_algebraic(phi, cfg));
    let base_class = classify_matrix(phi.base(), &cfg.tol).ok();
    let agree = match (dynamic.certified(), algebraic.certified()) {
        (Some(d), Some(a)) => Some(d.kind == a.kind),
        _ => None,
    };
    let pick = algebraic
        .certified()
        .or(dynamic.certified())
        .or(algebraic.result.as_ref())
        .or(dynamic.result.as_ref());
    let kind = pick.map(|c| c.kind);
    let (essential, essential_reason) = match (kind, &base_class) {
        (Some(k), Some(bc)) => {
            let (e, r) = is_essential(k, bc);
            (Some(e), Some(r))
        }
        _ => (None, None),
    };
    let fixed_point_verified = if essential == Some(true) {
        let cands = [algebraic.result.as_ref(), dynamic.result.as_ref()];
        Some(cands.iter().flatten().any(|c| {
            matches!(c.certificate, Certificate::FixedPoint { fibre_shift: 0, .. })
                && c.recheck(phi, cfg).unwrap_or(false)
        }))
    } else {
        None
    };
    Report { kind, base_class, dynamic, algebraic, agree, essential, essential_reason, fixed_point_verified }
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub spec: SampleSpec,
    pub report: Option<Report>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub count: usize,
    pub kinds: BTreeMap<String, usize>,
    pub mutually_certified: usize,
    pub agreement_rate: f64,
    pub indeterminate: usize,
    pub indeterminate_rate: f64,
    /// Certified dynamic records whose per-seed verdicts were not unanimous.
    pub mixed_verdicts: usize,
    pub essential: usize,
    pub errors: usize,
}

pub fn summarize(records: &[Record]) -> Summary {
    let mut s = Summary { count: records.len(), ..Default::default() };
    let mut agreed = 0;
    for r in records {
        let Some(rep) = &r.report else {
            s.errors += 1;
            continue;
        };
        let key = rep.kind.map(|k| k.name().to_string()).unwrap_or_else(|| "unclassified".into());
        *s.kinds.entry(key).or_default() += 1;
        if let Some(a) = rep.agree {
            s.mutually_certified += 1;
            agreed += a as usize;
        }
        if rep.dynamic.indeterminate() {
            s.indeterminate += 1;
        }
        if rep.dynamic.certified().is_some_and(|c| !c.unanimous()) {
            s.mixed_verdicts += 1;
        }
        if rep.essential == Some(true) {
            s.essential += 1;
        }
    }
    s.agreement_rate = if s.mutually_certified > 0 { agreed as f64 / s.mutually_certified as f64 } else { 1.0 };
    s.indeterminate_rate = if s.count > 0 { s.indeterminate as f64 / s.count as f64 } else { 0.0 };
    s
}

/// Classifies a seeded corpus; records come back in input order.
pub fn survey(count: usize, scale: f64, seed: u64, deck_power: Option<i64>, cfg: &RunConfig) -> Vec<Record> {
    corpus_specs(count, seed, deck_power)
        .into_par_iter()
        .map(|spec| match random_lift(cfg.n, spec.sample_seed, scale, spec.deck_power, cfg) {
            Ok(phi) => Record { spec, report: Some(classify_both(&phi, cfg)), error: None },
            Err(e) => Record { spec, report: None, error: Some(e.to_string()) },
        })
        .collect()
}

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub group: f64,
    pub nilp: f64,
    pub fix: f64,
    pub commute: f64,
    pub recon: f64,
    pub cluster: f64,
    pub causal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            group: 1e-9,
            nilp: 1e-8,
            fix: 1e-8,
            commute: 1e-8,
            recon: 1e-8,
            cluster: 1e-6,
            causal: 1e-9,
        }
    }
}

/// Iteration budgets and decision thresholds of the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub j_max: usize,
    pub k_max: usize,
    pub w_max: f64,
    pub delta_drift: f64,
    pub delta_margin: f64,
    pub k_rot: usize,
    pub seeds: usize,
    /// Sphere grid size used for escaping certificates; `None` picks the default for n.
    pub grid: Option<usize>,
    /// Number of time samples across one deck period in the certificate grid.
    pub t_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            j_max: 64,
            k_max: 512,
            w_max: 8.0 * PI,
            delta_drift: 1e-6,
            delta_margin: 1e-4,
            k_rot: 64,
            seeds: 16,
            grid: None,
            t_samples: 32,
        }
    }
}

impl Budgets {
    pub fn sphere_grid_size(&self, n: usize) -> usize {
        self.grid.unwrap_or(match n {
            1 => 128,
            2 => 512,
            _ => 1024,
        })
    }
}

/// Everything a run needs: dimension, tolerances, budgets and the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub seed: u64,
    pub tol: Tolerances,
    pub budgets: Budgets,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 2,
            seed: 0,
            tol: Tolerances::default(),
            budgets: Budgets::default(),
        }
    }
}

impl RunConfig {
    pub fn with_n(n: usize) -> Self {
        RunConfig { n, ..Default::default() }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let t = &self.tol;
        let all = [t.group, t.nilp, t.fix, t.commute, t.recon, t.cluster, t.causal];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(crate::Error::Input("tolerances must be positive".into()));
        }
        let b = &self.budgets;
        if self.n == 0 || b.j_max == 0 || b.k_max == 0 || b.k_rot == 0 || b.seeds == 0 || b.t_samples == 0 {
            return Err(crate::Error::Input("n and budgets must be at least 1".into()));
        }
        if !(b.w_max > 0.0 && b.delta_drift > 0.0 && b.delta_margin > 0.0) {
            return Err(crate::Error::Input("thresholds must be positive".into()));
        }
        Ok(())
    }
}

//! Seeded experiment grids producing plot-ready CSV.

use std::fmt::Write as _;

use fairslot::audit::{
    heterogeneous_pref_audit, ordered_vs_audit_all, tv_vs_audit, weak_vs_audit, AuditRecord,
};
use fairslot::oracles::{pair_generator, random_instance, PairStrategy};
use fairslot::welfare::{ipa_tight_instance, mechanism_welfare};
use fairslot::{generalized, Error, Family, MechanismConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, welfare_row, STABILITY_HEADER, WELFARE_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Random instances, mechanism welfare against the unfair optimum.
    Welfare,
    /// The IPA tight family with `k` high bids and `n − k` bids of `eps`, `ℓ = 1`.
    Tightness,
    /// Random instance pairs audited for weak, ordered, TV and heterogeneous stability.
    Stability,
}

fn default_ell() -> Vec<f64> {
    vec![1.0]
}

fn default_family() -> Vec<String> {
    vec!["ipa".into(), "pa".into()]
}

fn default_eps() -> f64 {
    0.5
}

fn default_lambda_max() -> f64 {
    16.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    #[serde(default = "default_ell")]
    pub ell: Vec<f64>,
    #[serde(default = "default_family")]
    pub family: Vec<String>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepError(pub String);

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<Error> for SweepError {
    fn from(e: Error) -> Self {
        SweepError(format!("{}: {e}", e.code()))
    }
}

struct Job {
    n: usize,
    k: usize,
    ell: f64,
    family: Family,
    trial: usize,
    seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed from the sweep seed and the grid coordinates.
fn trial_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |h, &p| splitmix(h ^ p))
}

impl SweepSpec {
    pub fn families(&self) -> Result<Vec<Family>, SweepError> {
        self.family
            .iter()
            .map(|f| f.parse().map_err(|_| SweepError(format!("unknown family {f:?}"))))
            .collect()
    }

    fn check(&self) -> Result<(), SweepError> {
        if self.n.is_empty() || self.k.is_empty() || self.ell.is_empty() {
            return Err(SweepError("grids over n, k and ell must be non-empty".into()));
        }
        if let Some(l) = self.ell.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(SweepError(format!("ell must be positive, got {l}")));
        }
        if !(self.lambda_max >= 1.0) {
            return Err(SweepError("lambda_max must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(SweepError("eps must lie in (0, 1)".into()));
        }
        self.families().map(|_| ())
    }

    /// Grid points in output order; combinations with `k > n` (or `n ≤ 2k` for the tight
    /// family) are skipped.
    fn jobs(&self) -> Result<Vec<Job>, SweepError> {
        let families = self.families()?;
        let mut jobs = Vec::new();
        if self.kind == SweepKind::Tightness {
            if self.trials == 0 {
                return Ok(jobs);
            }
            for &k in &self.k {
                for &n in &self.n {
                    if n > 2 * k {
                        jobs.push(Job { n, k, ell: 1.0, family: Family::Ipa, trial: 0, seed: 0 });
                    }
                }
            }
            return Ok(jobs);
        }
        for (fi, &family) in families.iter().enumerate() {
            for (li, &ell) in self.ell.iter().enumerate() {
                for &n in &self.n {
                    for &k in self.k.iter().filter(|&&k| k <= n) {
                        for trial in 0..self.trials {
                            let seed = trial_seed(self.seed, &[fi as u64, li as u64, n as u64, k as u64, trial as u64]);
                            jobs.push(Job { n, k, ell, family, trial, seed });
                        }
                    }
                }
            }
        }
        Ok(jobs)
    }
}

fn run_job(spec: &SweepSpec, job: &Job) -> Result<Vec<String>, SweepError> {
    let config = MechanismConfig::new(job.family, job.ell)?;
    match spec.kind {
        SweepKind::Tightness => {
            let inst = ipa_tight_instance(job.k, job.n, spec.eps)?;
            let w = mechanism_welfare(&inst, &config)?;
            Ok(vec![welfare_row(job.n, job.k, job.ell, job.family, job.trial, &w)])
        }
        SweepKind::Welfare => {
            let mut rng = ChaCha8Rng::seed_from_u64(job.seed);
            let inst = random_instance(&mut rng, job.n, job.k)?;
            let w = mechanism_welfare(&inst, &config)?;
            Ok(vec![welfare_row(job.n, job.k, job.ell, job.family, job.trial, &w)])
        }
        SweepKind::Stability => {
            let pair = pair_generator(job.seed, job.n, job.k, spec.lambda_max, PairStrategy::Random)?;
            let (m, m2) = (generalized(&pair.a, &config)?, generalized(&pair.b, &config)?);
            let mut records: Vec<(f64, AuditRecord)> = vec![
                (pair.lambda, weak_vs_audit(&m, &m2, pair.lambda, job.ell)?),
                (pair.lambda, ordered_vs_audit_all(&m, &m2, pair.lambda, job.ell)?),
            ];
            if let Some(worst) = tv_vs_audit(&m, &m2, pair.lambda, job.ell)?
                .into_iter()
                .max_by(|a, b| a.measured.total_cmp(&b.measured))
            {
                records.push((pair.lambda, worst));
            }
            let het = pair_generator(job.seed ^ 1, job.n, job.k, spec.lambda_max, PairStrategy::Heterogeneous)?;
            let (h, h2) = (generalized(&het.a, &config)?, generalized(&het.b, &config)?);
            records.push((het.lambda, heterogeneous_pref_audit(&h, &h2, het.a.alpha(), het.b.alpha(), het.lambda, job.ell)?));
            Ok(records
                .iter()
                .map(|(lambda, r)| {
                    format!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        job.n,
                        job.k,
                        fmt_f64(job.ell),
                        job.family.as_str(),
                        job.trial,
                        fmt_f64(*lambda),
                        r.metric.as_str(),
                        fmt_f64(r.measured),
                        fmt_f64(r.bound),
                        r.satisfied
                    )
                })
                .collect())
        }
    }
}

/// Thread cap from `FAIRSLOT_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("FAIRSLOT_THREADS").ok()?.trim().parse().ok().filter(|&t| t > 0)
}

/// Runs the sweep and returns the CSV text, including the `# sweep:` header line.
///
/// Rows come out in grid order whatever the thread count.
pub fn run_sweep(spec: &SweepSpec) -> Result<String, SweepError> {
    spec.check()?;
    let jobs = spec.jobs()?;
    let work = || -> Result<Vec<Vec<String>>, SweepError> { jobs.par_iter().map(|j| run_job(spec, j)).collect() };
    let rows = match thread_cap() {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| SweepError(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let mut out = String::new();
    let header = serde_json::to_string(spec).map_err(|e| SweepError(e.to_string()))?;
    let _ = writeln!(out, "# sweep: {header}");
    let _ = writeln!(
        out,
        "{}",
        match spec.kind {
            SweepKind::Stability => STABILITY_HEADER,
            _ => WELFARE_HEADER,
        }
    );
    for line in rows.into_iter().flatten() {
        let _ = writeln!(out, "{line}");
    }
    Ok(out)
}

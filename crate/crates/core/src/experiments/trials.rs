//! Repeated seeded trials across several solvers, with per-method aggregates.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write;
use std::time::Instant;

use ndarray::Array1;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generators::{gen_cs_instance, gen_nanopore_instance, NanoporeConfig, SyntheticCsConfig};
use super::metrics::{metric_f1, metric_nmse, metric_snr, DEFAULT_F1_THRESHOLD};
use crate::admm::{solve, AdmmConfig, Init, Problem};
use crate::error::{Error, Result};
use crate::linops::LinearMap;
use crate::penalties::PenaltySpec;
use crate::prox::Fidelity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// `y = Ax + ε` with Gaussian `A`; `L = I`.
    Cs(SyntheticCsConfig),
    /// Denoising (`A = I`) with `L` the first-difference operator.
    Nanopore(NanoporeConfig),
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        match self {
            Experiment::Cs(c) => c.validate(),
            Experiment::Nanopore(c) => c.validate(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Experiment {
        match self {
            Experiment::Cs(c) => Experiment::Cs(SyntheticCsConfig { seed, ..c.clone() }),
            Experiment::Nanopore(c) => Experiment::Nanopore(NanoporeConfig { seed, ..c.clone() }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Cs(_) => "cs",
            Experiment::Nanopore(_) => "nanopore",
        }
    }

    /// `ν²` used by the SID fidelity when a method does not set one.
    fn default_nu2(&self) -> Option<f64> {
        match self {
            Experiment::Cs(_) => None,
            Experiment::Nanopore(c) => Some(c.sigma_thermal * c.sigma_thermal),
        }
    }

    pub fn generate(&self) -> Result<Instance> {
        match self {
            Experiment::Cs(c) => {
                let inst = gen_cs_instance(c)?;
                let n = inst.x0.len();
                Ok(Instance::new(LinearMap::dense(inst.a), LinearMap::identity(n), inst.x0, inst.y))
            }
            Experiment::Nanopore(c) => {
                let inst = gen_nanopore_instance(c)?;
                let n = inst.x0.len();
                Ok(Instance::new(LinearMap::identity(n), LinearMap::first_difference(n), inst.x0, inst.y))
            }
        }
    }
}

/// A generated problem with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub a: LinearMap,
    pub l: LinearMap,
    pub x0: Array1<f64>,
    pub y: Array1<f64>,
    /// Hash of the bit patterns of `x0` and `y`.
    pub hash: u64,
}

impl Instance {
    pub fn new(a: LinearMap, l: LinearMap, x0: Array1<f64>, y: Array1<f64>) -> Self {
        let mut h = DefaultHasher::new();
        for v in x0.iter().chain(y.iter()) {
            v.to_bits().hash(&mut h);
        }
        Instance { a, l, x0, y, hash: h.finish() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FidelityKind {
    L2,
    L1,
    /// Shifted I-divergence; `nu2` defaults to the experiment's thermal
    /// variance. With `shift` the data term sees `y + ν²`, which makes
    /// `x = y` its unregularized minimizer (shifted-Poisson model).
    Sid {
        nu2: Option<f64>,
        #[serde(default = "default_true")]
        shift: bool,
    },
}

fn default_true() -> bool {
    true
}

impl FidelityKind {
    pub fn sid() -> Self {
        FidelityKind::Sid { nu2: None, shift: true }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FidelityKind::L2 => "l2",
            FidelityKind::L1 => "l1",
            FidelityKind::Sid { .. } => "sid",
        }
    }

    pub fn build(&self, y: Array1<f64>, experiment: &Experiment) -> Result<Fidelity> {
        match self {
            FidelityKind::L2 => Fidelity::squared_error(y),
            FidelityKind::L1 => Fidelity::absolute_error(y),
            FidelityKind::Sid { nu2, shift } => {
                let nu2 = nu2.or(experiment.default_nu2()).ok_or_else(|| {
                    Error::Config("the sid fidelity needs nu2 for this experiment".into())
                })?;
                let data = if *shift { y + nu2 } else { y };
                Fidelity::shifted_idiv(data, nu2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub label: String,
    pub penalty: PenaltySpec,
    pub fidelity: FidelityKind,
}

impl MethodSpec {
    /// Label of the form `penalty` or `penalty:fidelity` for non-L2 fits.
    pub fn new(penalty: PenaltySpec, fidelity: FidelityKind) -> Self {
        let label = match fidelity {
            FidelityKind::L2 => penalty.name().to_string(),
            f => format!("{}:{}", penalty.name(), f.name()),
        };
        MethodSpec { label, penalty, fidelity }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialPlan {
    pub experiment: Experiment,
    pub methods: Vec<MethodSpec>,
    pub trials: usize,
    pub master_seed: u64,
    pub admm: AdmmConfig,
    /// Start every solver from `x ~ N(0, I)` drawn from the trial seed
    /// instead of `admm.init`.
    pub random_init: bool,
    pub f1_threshold: f64,
    pub keep_traces: bool,
}

impl TrialPlan {
    pub fn new(experiment: Experiment, methods: Vec<MethodSpec>, trials: usize, master_seed: u64) -> Self {
        TrialPlan {
            experiment,
            methods,
            trials,
            master_seed,
            admm: AdmmConfig::default(),
            random_init: false,
            f1_threshold: DEFAULT_F1_THRESHOLD,
            keep_traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        self.admm.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if !(self.f1_threshold >= 0.0) || !self.f1_threshold.is_finite() {
            return Err(Error::Config(format!("f1 threshold must be >= 0, got {}", self.f1_threshold)));
        }
        for m in &self.methods {
            self.admm.resolve_mu(&m.penalty, 1.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub instance_hash: u64,
    pub snr_db: f64,
    pub f1: f64,
    pub nmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Solver failure message; metrics are NaN when set.
    pub error: Option<String>,
    pub lagrangian_trace: Option<Vec<f64>>,
}

/// Seed of trial `index`, drawn from stream `index` of the master generator.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Solves one instance with one method and scores the result.
pub fn run_method(
    instance: &Instance,
    method: &MethodSpec,
    plan: &TrialPlan,
    trial: usize,
    seed: u64,
) -> TrialReport {
    let start = Instant::now();
    let mut report = TrialReport {
        method: method.label.clone(),
        trial,
        seed,
        instance_hash: instance.hash,
        snr_db: f64::NAN,
        f1: f64::NAN,
        nmse: f64::NAN,
        iterations: 0,
        converged: false,
        wall_time_s: 0.0,
        error: None,
        lagrangian_trace: None,
    };
    let mut admm = plan.admm.clone();
    admm.record_lagrangian = plan.keep_traces;
    if plan.random_init {
        admm.init = Init::RandomNormal(seed.wrapping_add(1));
    }
    let outcome = method
        .fidelity
        .build(instance.y.clone(), &plan.experiment)
        .and_then(|f| Problem::new(instance.a.clone(), instance.l.clone(), f, method.penalty.clone()))
        .and_then(|p| solve(&p, &admm))
        .and_then(|res| {
            let x = res.x_hat.view();
            let x0 = instance.x0.view();
            Ok((metric_snr(x, x0)?, metric_f1(x, x0, plan.f1_threshold)?, metric_nmse(x, x0)?, res))
        });
    match outcome {
        Ok((snr, f1, nmse, res)) => {
            report.snr_db = snr;
            report.f1 = f1;
            report.nmse = nmse;
            report.iterations = res.iterations;
            report.converged = res.converged;
            if plan.keep_traces {
                report.lagrangian_trace = Some(res.lagrangian_trace);
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

/// Runs `plan.trials` independent trials on up to `jobs` threads. Every
/// method sees the same instance within a trial. Reports are ordered by
/// trial, then by method. Solver failures are recorded in the reports.
pub fn run_trials(plan: &TrialPlan, jobs: usize) -> Result<Vec<TrialReport>> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let per_trial: Vec<Result<Vec<TrialReport>>> = pool.install(|| {
        (0..plan.trials)
            .into_par_iter()
            .map(|t| {
                let seed = trial_seed(plan.master_seed, t);
                let instance = plan.experiment.with_seed(seed).generate()?;
                Ok(plan
                    .methods
                    .iter()
                    .map(|m| run_method(&instance, m, plan, t, seed))
                    .collect())
            })
            .collect()
    });
    let mut out = Vec::with_capacity(plan.trials * plan.methods.len());
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (`n - 1` denominator); 0 for a single value.
    pub std: f64,
}

impl Stats {
    /// NaN fields for an empty input.
    pub fn of(values: &[f64]) -> Stats {
        let n = values.len();
        if n == 0 {
            return Stats { mean: f64::NAN, median: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stats { mean, median, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub trials: usize,
    pub failed: usize,
    pub snr_db: Stats,
    pub f1: Stats,
    pub nmse: Stats,
    pub iterations: Stats,
}

/// Per-method statistics over the successful trials, in order of first appearance.
pub fn aggregate(reports: &[TrialReport]) -> Vec<Summary> {
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let mine: Vec<&TrialReport> = reports.iter().filter(|r| r.method == m).collect();
            let ok: Vec<&&TrialReport> = mine.iter().filter(|r| r.error.is_none()).collect();
            let col = |f: fn(&TrialReport) -> f64| Stats::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            Summary {
                method: m.to_string(),
                trials: mine.len(),
                failed: mine.len() - ok.len(),
                snr_db: col(|r| r.snr_db),
                f1: col(|r| r.f1),
                nmse: col(|r| r.nmse),
                iterations: col(|r| r.iterations as f64),
            }
        })
        .collect()
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Input(format!("csv output failed: {e}"))
}

pub const TRIAL_CSV_HEADER: [&str; 10] =
    ["method", "trial", "seed", "snr_db", "f1", "nmse", "iters", "wall_time_s", "converged", "error"];

/// One row per report. `wall_time_s` is the only nondeterministic column.
pub fn write_trials_csv<W: Write>(out: W, reports: &[TrialReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRIAL_CSV_HEADER).map_err(io_err)?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.snr_db.to_string(),
            r.f1.to_string(),
            r.nmse.to_string(),
            r.iterations.to_string(),
            r.wall_time_s.to_string(),
            r.converged.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Aggregate rows keyed by an optional sweep parameter. No timing columns,
/// so repeated runs with one master seed produce identical bytes.
pub fn write_summary_csv<W: Write>(out: W, param: Option<&str>, rows: &[(Option<f64>, Summary)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    if let Some(p) = param {
        header.push(p.to_string());
    }
    header.extend(["method", "trials", "failed"].map(String::from));
    for metric in ["snr_db", "f1", "nmse", "iters"] {
        for stat in ["mean", "median", "std"] {
            header.push(format!("{metric}_{stat}"));
        }
    }
    w.write_record(&header).map_err(io_err)?;
    for (value, s) in rows {
        let mut rec: Vec<String> = Vec::new();
        if param.is_some() {
            rec.push(value.map(|v| v.to_string()).unwrap_or_default());
        }
        rec.extend([s.method.clone(), s.trials.to_string(), s.failed.to_string()]);
        for st in [s.snr_db, s.f1, s.nmse, s.iterations] {
            rec.extend([st.mean, st.median, st.std].map(|v| v.to_string()));
        }
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_examples() {
        let s = Stats::of(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        // squared deviations 9 + 4 + 1 + 36 over n - 1 = 3
        assert!((s.std - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let one = Stats::of(&[7.0]);
        assert_eq!((one.mean, one.median, one.std), (7.0, 7.0, 0.0));
        assert!(Stats::of(&[]).mean.is_nan());
    }

    #[test]
    fn trial_seeds_differ_and_repeat() {
        assert_eq!(trial_seed(5, 3), trial_seed(5, 3));
        assert_ne!(trial_seed(5, 3), trial_seed(5, 4));
        assert_ne!(trial_seed(5, 3), trial_seed(6, 3));
    }

    #[test]
    fn method_labels() {
        let m = MethodSpec::new(PenaltySpec::Lop { lambda: 1.0, alpha: 2.0 }, FidelityKind::sid());
        assert_eq!(m.label, "lop:sid");
        assert_eq!(MethodSpec::new(PenaltySpec::L1 { lambda: 1.0 }, FidelityKind::L2).label, "l1");
    }

    #[test]
    fn aggregate_skips_failures() {
        let base = TrialReport {
            method: "a".into(),
            trial: 0,
            seed: 0,
            instance_hash: 0,
            snr_db: 10.0,
            f1: 1.0,
            nmse: 0.1,
            iterations: 5,
            converged: true,
            wall_time_s: 0.0,
            error: None,
            lagrangian_trace: None,
        };
        let failed = TrialReport { snr_db: f64::NAN, error: Some("boom".into()), ..base.clone() };
        let other = TrialReport { snr_db: 20.0, ..base.clone() };
        let s = aggregate(&[base, failed, other]);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].trials, s[0].failed), (3, 1));
        assert_eq!(s[0].snr_db.mean, 15.0);
    }

    #[test]
    fn sid_needs_nu2_for_cs() {
        let exp = Experiment::Cs(SyntheticCsConfig::default());
        let err = FidelityKind::sid().build(Array1::ones(3), &exp);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}

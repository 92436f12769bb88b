use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use blocksparse::experiments::{
    aggregate, metric_f1, metric_nmse, metric_snr, run_trials, write_summary_csv, write_trials_csv, Experiment,
    FidelityKind, MethodSpec, Summary, TrialPlan, TrialReport,
};
use blocksparse::{Error, Problem, Solver};
use ndarray::Array1;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::instance_io::{self, InstanceFile};

/// Parameter and data errors are the caller's fault; anything else happened
/// while computing.
pub fn classify(e: Error) -> CliError {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Shape { .. } | Error::Input(_) => CliError::config(e),
        Error::NonFinite { .. } | Error::Unsupported(_) => CliError::Solver(e.to_string()),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    files: Vec<String>,
}

struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), files: Vec::new() })
    }

    fn write_with<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    fn finish(mut self, command: &str, config: &RunConfig) -> Result<(), CliError> {
        let manifest = Manifest {
            tool: "blocksparse",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: config.seed,
            config,
            files: std::mem::take(&mut self.files),
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn io_other(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

pub fn generate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let experiment = config.experiment().with_seed(config.seed);
    let inst = experiment.generate().map_err(classify)?;
    let file = InstanceFile {
        experiment: Some(experiment.name().to_string()),
        nu2: match &experiment {
            Experiment::Nanopore(c) => Some(c.sigma_thermal * c.sigma_thermal),
            Experiment::Cs(_) => None,
        },
        a: inst.a,
        l: inst.l,
        x0: Some(inst.x0),
        y: inst.y,
    };
    let text = instance_io::render(&file)?;
    let mut dir = OutDir::create(out)?;
    dir.write_with("instance.txt", |w| w.write_all(text.as_bytes()))?;
    dir.finish("generate", config)
}

#[derive(Debug, Serialize)]
struct SolveReport {
    method: String,
    experiment: String,
    instance: String,
    seed: u64,
    n: usize,
    iterations: usize,
    converged: bool,
    final_lagrangian: Option<f64>,
    final_primal_residual: Option<f64>,
    snr_db: Option<f64>,
    f1: Option<f64>,
    nmse: Option<f64>,
    error: Option<String>,
}

fn write_vector(w: &mut impl Write, name: &str, v: &Array1<f64>) -> std::io::Result<()> {
    writeln!(w, "index,{name}")?;
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{i},{x}")?;
    }
    Ok(())
}

/// Runs one solver. A failure mid-run still writes the partial trace and a
/// report carrying the error, then returns [`CliError::Solver`].
pub fn solve(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let methods = config.parsed_methods()?;
    let [method]: [MethodSpec; 1] = methods
        .try_into()
        .map_err(|m: Vec<MethodSpec>| CliError::Config(format!("solve takes exactly one method, got {}", m.len())))?;

    let experiment = config.experiment().with_seed(config.seed);
    let (inst, source) = match &config.instance {
        Some(path) => (instance_io::read(path)?, path.display().to_string()),
        None => {
            let g = experiment.generate().map_err(classify)?;
            let file = InstanceFile { experiment: None, nu2: None, a: g.a, l: g.l, x0: Some(g.x0), y: g.y };
            (file, "generated".to_string())
        }
    };
    let fidelity_kind = match method.fidelity {
        FidelityKind::Sid { nu2: None, shift } if inst.nu2.is_some() => FidelityKind::Sid { nu2: inst.nu2, shift },
        f => f,
    };
    if let Some(x0) = &inst.x0 {
        if x0.len() != inst.a.cols() {
            return Err(CliError::Config(format!(
                "x0 has length {}, but A has {} columns",
                x0.len(),
                inst.a.cols()
            )));
        }
    }
    let fidelity = fidelity_kind.build(inst.y.clone(), &experiment).map_err(classify)?;
    let problem =
        Problem::new(inst.a.clone(), inst.l.clone(), fidelity, method.penalty.clone()).map_err(classify)?;
    let mut admm = config.admm.clone();
    admm.record_lagrangian = true;
    if config.random_init {
        admm.init = blocksparse::Init::RandomNormal(config.seed.wrapping_add(1));
    }

    let mut solver = Solver::new(&problem, admm).map_err(classify)?;
    let failure = solver.run().err();
    let res = solver.result();

    let mut report = SolveReport {
        method: method.label.clone(),
        experiment: inst.experiment.clone().unwrap_or_else(|| experiment.name().to_string()),
        instance: source,
        seed: config.seed,
        n: res.x_hat.len(),
        iterations: res.iterations,
        converged: res.converged,
        final_lagrangian: res.lagrangian_trace.last().copied(),
        final_primal_residual: res.primal_residuals.last().copied(),
        snr_db: None,
        f1: None,
        nmse: None,
        error: failure.as_ref().map(|e| e.to_string()),
    };
    if let (Some(x0), None) = (&inst.x0, &failure) {
        // a zero reference leaves SNR and NMSE undefined
        report.snr_db = metric_snr(res.x_hat.view(), x0.view()).ok();
        report.nmse = metric_nmse(res.x_hat.view(), x0.view()).ok();
        report.f1 = Some(metric_f1(res.x_hat.view(), x0.view(), config.f1_threshold).map_err(classify)?);
    }

    let mut dir = OutDir::create(out)?;
    dir.write_with("trace.csv", |w| {
        writeln!(w, "iter,lagrangian,primal_residual,cg_iterations")?;
        for (i, (&r, &cg)) in res.primal_residuals.iter().zip(&res.cg_iterations).enumerate() {
            let l = res.lagrangian_trace.get(i).map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{l},{r},{cg}", i + 1)?;
        }
        Ok(())
    })?;
    if failure.is_none() {
        dir.write_with("x_hat.csv", |w| write_vector(w, "x_hat", &res.x_hat))?;
        dir.write_with("sigma_hat.csv", |w| write_vector(w, "sigma_hat", &res.sigma_hat))?;
    }
    dir.write_json("report.json", &report)?;
    dir.finish("solve", config)?;
    match failure {
        Some(e) => Err(CliError::Solver(e.to_string())),
        None => Ok(()),
    }
}

fn plan_for(config: &RunConfig) -> Result<TrialPlan, CliError> {
    let mut plan = TrialPlan::new(config.experiment(), config.parsed_methods()?, config.trials, config.seed);
    plan.admm = config.admm.clone();
    plan.random_init = config.random_init;
    plan.f1_threshold = config.f1_threshold;
    plan.keep_traces = config.keep_traces;
    plan.validate().map_err(classify)?;
    Ok(plan)
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    method: &'a str,
    trial: usize,
    lagrangian: &'a [f64],
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    experiment: &'static str,
    master_seed: u64,
    trials: usize,
    param: Option<&'static str>,
    points: Vec<SummaryPoint<'a>>,
}

#[derive(Serialize)]
struct SummaryPoint<'a> {
    value: Option<f64>,
    summary: &'a Summary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    traces: Vec<TraceRecord<'a>>,
}

fn point<'a>(value: Option<f64>, summary: &'a Summary, reports: &'a [TrialReport]) -> SummaryPoint<'a> {
    let traces = reports
        .iter()
        .filter(|r| r.method == summary.method)
        .filter_map(|r| {
            r.lagrangian_trace
                .as_deref()
                .map(|l| TraceRecord { method: &r.method, trial: r.trial, lagrangian: l })
        })
        .collect();
    SummaryPoint { value, summary, traces }
}

pub fn bench(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let plan = plan_for(config)?;
    let reports = run_trials(&plan, config.jobs).map_err(classify)?;
    let summaries = aggregate(&reports);

    let mut dir = OutDir::create(out)?;
    dir.write_with("trials.csv", |w| write_trials_csv(w, &reports).map_err(io_other))?;
    let rows: Vec<(Option<f64>, Summary)> = summaries.iter().map(|s| (None, s.clone())).collect();
    dir.write_with("summary.csv", |w| write_summary_csv(w, None, &rows).map_err(io_other))?;
    let file = SummaryFile {
        experiment: plan.experiment.name(),
        master_seed: plan.master_seed,
        trials: plan.trials,
        param: None,
        points: summaries.iter().map(|s| point(None, s, &reports)).collect(),
    };
    dir.write_json("summary.json", &file)?;
    dir.finish("bench", config)?;
    fail_if_all_failed(&summaries)
}

pub fn sweep(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let spec = config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs --param and --values (or a \"sweep\" entry)".into()))?;
    // validate every point before computing any of them
    let plans: Vec<TrialPlan> = spec
        .values
        .iter()
        .map(|&v| config.with_sweep_value(spec.param, v).and_then(|c| plan_for(&c)))
        .collect::<Result<_, _>>()?;

    let mut dir = OutDir::create(out)?;
    let mut all_reports = Vec::with_capacity(plans.len());
    for (i, plan) in plans.iter().enumerate() {
        let reports = run_trials(plan, config.jobs).map_err(classify)?;
        dir.write_with(&format!("trials-{i:03}.csv"), |w| write_trials_csv(w, &reports).map_err(io_other))?;
        all_reports.push(reports);
    }
    let summaries: Vec<Vec<Summary>> = all_reports.iter().map(|r| aggregate(r)).collect();
    let rows: Vec<(Option<f64>, Summary)> = spec
        .values
        .iter()
        .zip(&summaries)
        .flat_map(|(&v, ss)| ss.iter().map(move |s| (Some(v), s.clone())))
        .collect();
    dir.write_with("summary.csv", |w| write_summary_csv(w, Some(spec.param.name()), &rows).map_err(io_other))?;
    let mut points = Vec::new();
    for ((&v, ss), reports) in spec.values.iter().zip(&summaries).zip(&all_reports) {
        points.extend(ss.iter().map(|s| point(Some(v), s, reports)));
    }
    let file = SummaryFile {
        experiment: config.experiment().name(),
        master_seed: config.seed,
        trials: config.trials,
        param: Some(spec.param.name()),
        points,
    };
    dir.write_json("summary.json", &file)?;
    dir.finish("sweep", config)?;
    fail_if_all_failed(&summaries.concat())
}

/// Individual trial failures are data; a run in which nothing succeeded is not.
fn fail_if_all_failed(summaries: &[Summary]) -> Result<(), CliError> {
    if summaries.iter().all(|s| s.failed == s.trials) {
        return Err(CliError::Solver("every trial failed; see the error column of the trial CSV".into()));
    }
    Ok(())
}

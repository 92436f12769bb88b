//! Run configuration: JSON file, then command-line flags on top.

use std::path::{Path, PathBuf};

use blocksparse::experiments::{Experiment, MethodSpec, NanoporeConfig, NoiseSpec, SyntheticCsConfig};
use blocksparse::AdmmConfig;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::method::{parse_method, PenaltyParams};

pub const DEFAULT_METHODS: [&str; 4] = ["l1", "lop", "loglop", "adalop"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Cs,
    Nanopore,
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    Alpha,
    Epsilon,
    Gamma,
    /// Number of measurements (CS).
    J,
    /// Fixed noise standard deviation (CS), thermal noise (nanopore).
    Sigma,
    /// Input SNR in dB (CS).
    SnrDb,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Alpha => "alpha",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Gamma => "gamma",
            SweepParam::J => "j",
            SweepParam::Sigma => "sigma",
            SweepParam::SnrDb => "snr_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub cs: SyntheticCsConfig,
    pub nanopore: NanoporeConfig,
    /// Method strings, see [`crate::method`].
    pub methods: Vec<String>,
    pub penalty: PenaltyParams,
    pub admm: AdmmConfig,
    pub trials: usize,
    /// Instance seed for `generate`/`solve`, master seed for `bench`/`sweep`.
    pub seed: u64,
    pub jobs: usize,
    pub random_init: bool,
    pub f1_threshold: f64,
    pub keep_traces: bool,
    pub sweep: Option<SweepSpec>,
    /// Instance file read by `solve` instead of generating one.
    pub instance: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentKind::Cs,
            cs: SyntheticCsConfig::default(),
            nanopore: NanoporeConfig::default(),
            methods: DEFAULT_METHODS.map(String::from).to_vec(),
            penalty: PenaltyParams::default(),
            admm: AdmmConfig::default(),
            trials: 20,
            seed: 0,
            jobs: 1,
            random_init: false,
            f1_threshold: blocksparse::experiments::DEFAULT_F1_THRESHOLD,
            keep_traces: false,
            sweep: None,
            instance: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn experiment(&self) -> Experiment {
        match self.experiment {
            ExperimentKind::Cs => Experiment::Cs(self.cs.clone()),
            ExperimentKind::Nanopore => Experiment::Nanopore(self.nanopore.clone()),
        }
    }

    pub fn parsed_methods(&self) -> Result<Vec<MethodSpec>, CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods selected".into()));
        }
        let methods: Vec<MethodSpec> =
            self.methods.iter().map(|m| parse_method(m, &self.penalty)).collect::<Result<_, _>>()?;
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].iter().any(|o| o.label == m.label) {
                return Err(CliError::Config(format!("method '{}' is listed twice", m.label)));
            }
        }
        Ok(methods)
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<(), CliError> {
        self.experiment().validate().map_err(CliError::config)?;
        self.admm.validate().map_err(CliError::config)?;
        for m in self.parsed_methods()? {
            m.penalty.validate(1).map_err(CliError::config)?;
            self.admm.resolve_mu(&m.penalty, 1.0).map_err(CliError::config)?;
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        if !(self.f1_threshold >= 0.0) || !self.f1_threshold.is_finite() {
            return Err(CliError::Config(format!("f1_threshold must be >= 0, got {}", self.f1_threshold)));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(CliError::Config("sweep needs at least one value".into()));
            }
            for &v in &s.values {
                self.with_sweep_value(s.param, v)?.validate_point()?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<(), CliError> {
        self.experiment().validate().map_err(CliError::config)?;
        for m in self.parsed_methods()? {
            m.penalty.validate(1).map_err(CliError::config)?;
            self.admm.resolve_mu(&m.penalty, 1.0).map_err(CliError::config)?;
        }
        Ok(())
    }

    /// Copy of the configuration with one sweep parameter set. Penalty
    /// values replace the shared parameters; a method's own `@key=value`
    /// override still wins.
    pub fn with_sweep_value(&self, param: SweepParam, value: f64) -> Result<RunConfig, CliError> {
        let mut c = self.clone();
        let cs_only = |name: &str| {
            CliError::Config(format!("sweep parameter '{name}' applies to the cs experiment only"))
        };
        match param {
            SweepParam::Lambda => c.penalty.lambda = value,
            SweepParam::Alpha => c.penalty.alpha = value,
            SweepParam::Epsilon => c.penalty.epsilon = value,
            SweepParam::Gamma => c.penalty.gamma = value,
            SweepParam::J => {
                if self.experiment != ExperimentKind::Cs {
                    return Err(cs_only("j"));
                }
                if !(value >= 1.0) || value.fract() != 0.0 || !value.is_finite() {
                    return Err(CliError::Config(format!("j must be a positive integer, got {value}")));
                }
                c.cs.j = value as usize;
            }
            SweepParam::Sigma => match self.experiment {
                ExperimentKind::Cs => c.cs.noise = NoiseSpec::Sigma(value),
                ExperimentKind::Nanopore => c.nanopore.sigma_thermal = value,
            },
            SweepParam::SnrDb => {
                if self.experiment != ExperimentKind::Cs {
                    return Err(cs_only("snr_db"));
                }
                c.cs.noise = NoiseSpec::SnrDb(value);
            }
        }
        Ok(c)
    }
}

fn parse_mu(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected 4 comma-separated values, got {}", v.len()))
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Config(format!("--values: '{t}': {e}"))))
        .collect()
}

/// Flags shared by every subcommand. Each one overrides the matching
/// configuration-file field.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $BLOCKSPARSE_OUT, else ./blocksparse-out].
    #[arg(long, global = true, env = "BLOCKSPARSE_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub experiment: Option<ExperimentKind>,
    /// Method string `penalty[:fidelity][@key=value,...]`; repeatable.
    #[arg(long = "method", global = true)]
    pub methods: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Worker threads for independent trials.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// SID shift; defaults to the squared thermal noise level.
    #[arg(long, global = true)]
    pub nu2: Option<f64>,
    /// Fit the SID term to `y` instead of `y + nu2`.
    #[arg(long, global = true)]
    pub no_sid_shift: bool,

    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Initial penalty parameters `mu1,mu2,mu3,mu4`.
    #[arg(long, global = true, value_parser = parse_mu)]
    pub mu: Option<[f64; 4]>,
    #[arg(long, global = true)]
    pub cg_tol: Option<f64>,
    #[arg(long, global = true)]
    pub cg_max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub bisect_tol: Option<f64>,
    #[arg(long, global = true)]
    pub stop_tol: Option<f64>,
    /// Start from x ~ N(0, I) drawn from each trial seed.
    #[arg(long, global = true)]
    pub random_init: bool,

    /// Signal length (both experiments).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Measurements (cs).
    #[arg(long, global = true)]
    pub j: Option<usize>,
    /// Input SNR in dB (cs).
    #[arg(long, global = true, conflicts_with_all = ["sigma", "noiseless"])]
    pub snr_db: Option<f64>,
    /// Noise standard deviation (cs) or thermal noise (nanopore).
    #[arg(long, global = true, conflicts_with = "noiseless")]
    pub sigma: Option<f64>,
    /// No observation noise.
    #[arg(long, global = true)]
    pub noiseless: bool,
    /// Shot-noise scale (nanopore).
    #[arg(long, global = true)]
    pub alpha_shot: Option<f64>,

    /// Relative support threshold for F1.
    #[arg(long, global = true)]
    pub f1_threshold: Option<f64>,
    /// Keep Lagrangian traces in `summary.json`.
    #[arg(long, global = true)]
    pub keep_traces: bool,
    /// Instance file for `solve`.
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub param: Option<SweepParam>,
    /// Comma-separated sweep values.
    #[arg(long, global = true)]
    pub values: Option<String>,
}

impl Overrides {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("blocksparse-out"))
    }

    /// Defaults, then the file, then flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(e) = self.experiment {
            c.experiment = e;
        }
        if !self.methods.is_empty() {
            c.methods = self.methods.clone();
        }
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            seed => seed,
            trials => trials,
            jobs => jobs,
            lambda => penalty.lambda,
            alpha => penalty.alpha,
            epsilon => penalty.epsilon,
            gamma => penalty.gamma,
            max_iter => admm.max_iter,
            rho => admm.rho,
            cg_tol => admm.cg_tol,
            cg_max_iter => admm.cg_max_iter,
            bisect_tol => admm.bisect_tol,
            stop_tol => admm.stop_tol,
            j => cs.j,
            f1_threshold => f1_threshold,
        );
        if let Some(v) = self.nu2 {
            c.penalty.nu2 = Some(v);
        }
        if self.no_sid_shift {
            c.penalty.sid_shift = false;
        }
        if let Some(mu) = self.mu {
            c.admm.mu_init = Some(mu);
        }
        if self.random_init {
            c.random_init = true;
        }
        if self.keep_traces {
            c.keep_traces = true;
        }
        if let Some(n) = self.n {
            c.cs.n = n;
            c.nanopore.n = n;
        }
        if let Some(s) = self.snr_db {
            c.cs.noise = NoiseSpec::SnrDb(s);
        }
        if let Some(s) = self.sigma {
            c.cs.noise = NoiseSpec::Sigma(s);
            c.nanopore.sigma_thermal = s;
        }
        if self.noiseless {
            c.cs.noise = NoiseSpec::Noiseless;
            c.nanopore.alpha_shot = None;
            c.nanopore.sigma_thermal = 0.0;
        }
        if let Some(a) = self.alpha_shot {
            c.nanopore.alpha_shot = Some(a);
        }
        if let Some(p) = &self.instance {
            c.instance = Some(p.clone());
        }
        let values = self.values.as_deref().map(parse_values).transpose()?;
        match (self.param, values) {
            (Some(param), Some(values)) => c.sweep = Some(SweepSpec { param, values }),
            (None, None) => {}
            (Some(param), None) => match &mut c.sweep {
                Some(s) => s.param = param,
                None => return Err(CliError::Config("--param needs --values".into())),
            },
            (None, Some(values)) => match &mut c.sweep {
                Some(s) => s.values = values,
                None => return Err(CliError::Config("--values needs --param".into())),
            },
        }
        c.validate()?;
        Ok(c)
    }
}

//! Synthetic compressive-sensing and nanopore-current instances.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One nonzero block of the ground truth. `start` is 0-based.
///
/// Entries follow a piecewise-linear ramp: `edge_ratio·peak` at both ends,
/// rising to `peak` at a random position, with `|peak|` drawn uniformly from
/// `amplitude`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub start: usize,
    pub length: usize,
    pub amplitude: [f64; 2],
}

/// Observation noise of the compressive-sensing model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Variance chosen so that `E‖ε‖² = ‖Ax0‖² / 10^(snr/10)`.
    SnrDb(f64),
    /// Fixed standard deviation.
    Sigma(f64),
    Noiseless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCsConfig {
    pub n: usize,
    pub j: usize,
    pub blocks: Vec<BlockSpec>,
    pub noise: NoiseSpec,
    pub edge_ratio: f64,
    /// Give each block a random sign.
    pub random_sign: bool,
    pub seed: u64,
}

impl Default for SyntheticCsConfig {
    fn default() -> Self {
        let block = |start, length| BlockSpec { start, length, amplitude: [1.0, 2.0] };
        SyntheticCsConfig {
            n: 250,
            j: 200,
            blocks: vec![block(20, 20), block(70, 30), block(135, 15), block(185, 25)],
            noise: NoiseSpec::SnrDb(40.0),
            edge_ratio: 0.5,
            random_sign: true,
            seed: 0,
        }
    }
}

impl SyntheticCsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.j == 0 {
            return Err(Error::Config("n and j must be positive".into()));
        }
        let mut spans: Vec<(usize, usize)> = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            if b.length == 0 || b.start + b.length > self.n {
                return Err(Error::Config(format!(
                    "block at {} of length {} does not fit in n = {}",
                    b.start, b.length, self.n
                )));
            }
            let [lo, hi] = b.amplitude;
            if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
                return Err(Error::Config(format!("block amplitude range must satisfy 0 < lo <= hi, got {:?}", b.amplitude)));
            }
            spans.push((b.start, b.start + b.length));
        }
        spans.sort_unstable();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::Config("blocks overlap".into()));
        }
        if !(self.edge_ratio > 0.0 && self.edge_ratio <= 1.0) {
            return Err(Error::Config(format!("edge_ratio must lie in (0, 1], got {}", self.edge_ratio)));
        }
        match self.noise {
            NoiseSpec::SnrDb(s) if s.is_nan() => Err(Error::Config("input SNR is NaN".into())),
            NoiseSpec::Sigma(s) if !(s >= 0.0) || !s.is_finite() => {
                Err(Error::Config(format!("noise sigma must be finite and >= 0, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsInstance {
    pub a: Array2<f64>,
    pub x0: Array1<f64>,
    pub y: Array1<f64>,
    pub noise_sigma: f64,
}

/// Draws `A` with i.i.d. `N(0,1)` entries, a block-sparse `x0` and
/// `y = Ax0 + ε`. Pure function of the config (including its seed).
pub fn gen_cs_instance(cfg: &SyntheticCsConfig) -> Result<CsInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = Array2::from_shape_simple_fn((cfg.j, cfg.n), || StandardNormal.sample(&mut rng));

    let mut x0 = Array1::zeros(cfg.n);
    for b in &cfg.blocks {
        let [lo, hi] = b.amplitude;
        let mut peak = if hi > lo { rng.random_range(lo..hi) } else { lo };
        if cfg.random_sign && rng.random_bool(0.5) {
            peak = -peak;
        }
        let at = rng.random_range(0..b.length);
        let edge = cfg.edge_ratio * peak;
        for i in 0..b.length {
            let value = if i <= at {
                if at == 0 { peak } else { edge + (peak - edge) * i as f64 / at as f64 }
            } else {
                peak + (edge - peak) * (i - at) as f64 / (b.length - 1 - at) as f64
            };
            x0[b.start + i] = value;
        }
    }

    let clean = a.dot(&x0);
    let noise_sigma = match cfg.noise {
        NoiseSpec::Noiseless => 0.0,
        NoiseSpec::SnrDb(s) if s == f64::INFINITY => 0.0,
        NoiseSpec::SnrDb(s) => (clean.dot(&clean) / cfg.j as f64 / 10f64.powf(s / 10.0)).sqrt(),
        NoiseSpec::Sigma(s) => s,
    };
    let y = if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        clean.mapv(|v| v + normal.sample(&mut rng))
    } else {
        clean
    };
    Ok(CsInstance { a, x0, y, noise_sigma })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NanoporeConfig {
    pub n: usize,
    pub baseline_pa: f64,
    pub depth_range: [f64; 2],
    pub dwell_shape: f64,
    pub dwell_scale: f64,
    /// Number of identical first-order low-pass stages.
    pub filter_order: usize,
    /// Time constant of each stage, in samples.
    pub tau_cap: f64,
    /// Shot-noise scale; `None` disables shot noise.
    pub alpha_shot: Option<f64>,
    pub sigma_thermal: f64,
    /// Observations are clipped from below to this value.
    pub clip_floor: f64,
    /// Upper bound on blockade events; `None` fills the trace.
    pub max_events: Option<usize>,
    pub seed: u64,
}

impl Default for NanoporeConfig {
    fn default() -> Self {
        NanoporeConfig {
            n: 1024,
            baseline_pa: 150.0,
            depth_range: [30.0, 100.0],
            dwell_shape: 2.0,
            dwell_scale: 20.0,
            filter_order: 4,
            tau_cap: 4.0,
            alpha_shot: Some(20.0),
            sigma_thermal: 5.0,
            clip_floor: 1e-3,
            max_events: None,
            seed: 0,
        }
    }
}

impl NanoporeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("baseline_pa", self.baseline_pa),
            ("dwell_shape", self.dwell_shape),
            ("dwell_scale", self.dwell_scale),
            ("clip_floor", self.clip_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        let [lo, hi] = self.depth_range;
        if !(lo >= 0.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::Config(format!("depth range must satisfy 0 <= lo <= hi, got {:?}", self.depth_range)));
        }
        if !(self.tau_cap >= 0.0) || !self.tau_cap.is_finite() {
            return Err(Error::Config(format!("tau_cap must be >= 0, got {}", self.tau_cap)));
        }
        if let Some(a) = self.alpha_shot {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("alpha_shot must be positive, got {a}")));
            }
        }
        if !(self.sigma_thermal >= 0.0) || !self.sigma_thermal.is_finite() {
            return Err(Error::Config(format!("sigma_thermal must be >= 0, got {}", self.sigma_thermal)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NanoporeInstance {
    /// Piecewise-constant blockade signal before filtering.
    pub x_clean: Array1<f64>,
    /// Filtered signal, the denoising target.
    pub x0: Array1<f64>,
    pub y: Array1<f64>,
    /// Traces discarded because the filtered signal was not strictly positive.
    pub regenerated: usize,
    /// Observations raised to `clip_floor`.
    pub clipped: usize,
}

const MAX_REGENERATE: usize = 1000;

/// Causal cascade of `order` first-order low-pass stages with pole
/// `exp(-1/tau)`, each started in steady state at the first sample.
pub fn lowpass_cascade(x: &Array1<f64>, order: usize, tau: f64) -> Array1<f64> {
    let pole = if tau > 0.0 { (-1.0 / tau).exp() } else { 0.0 };
    let mut out = x.clone();
    for _ in 0..order {
        let mut state = match out.first() {
            Some(&v) => v,
            None => return out,
        };
        for v in out.iter_mut() {
            state = pole * state + (1.0 - pole) * *v;
            *v = state;
        }
    }
    out
}

fn blockade_trace(cfg: &NanoporeConfig, rng: &mut ChaCha8Rng) -> Result<Array1<f64>> {
    let dwell = Gamma::new(cfg.dwell_shape, cfg.dwell_scale).map_err(|e| Error::Config(e.to_string()))?;
    let [lo, hi] = cfg.depth_range;
    let depth = Uniform::new_inclusive(lo, hi).map_err(|e| Error::Config(e.to_string()))?;
    let mut x = Array1::from_elem(cfg.n, cfg.baseline_pa);
    let mut pos = 0usize;
    let mut events = 0usize;
    let limit = cfg.max_events.unwrap_or(usize::MAX);
    // baseline and blockade segments alternate, starting on the baseline
    while pos < cfg.n && events < limit {
        let open: f64 = dwell.sample(rng);
        pos += open.round().max(1.0) as usize;
        let closed: f64 = dwell.sample(rng);
        let len = closed.round().max(1.0) as usize;
        let level = cfg.baseline_pa - depth.sample(rng);
        let end = (pos + len).min(cfg.n);
        if pos < end {
            x.slice_mut(ndarray::s![pos..end]).fill(level);
        }
        pos = end;
        events += 1;
    }
    Ok(x)
}

/// Blockade events on a baseline, low-pass filtered, observed through
/// `y = α·Poisson(x/α) + N(0, σ²)` and clipped from below.
pub fn gen_nanopore_instance(cfg: &NanoporeConfig) -> Result<NanoporeInstance> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut regenerated = 0;
    let (x_clean, x0) = loop {
        let clean = blockade_trace(cfg, &mut rng)?;
        let filtered = lowpass_cascade(&clean, cfg.filter_order, cfg.tau_cap);
        if filtered.iter().all(|&v| v > 0.0) {
            break (clean, filtered);
        }
        regenerated += 1;
        if regenerated >= MAX_REGENERATE {
            return Err(Error::Config(format!(
                "no strictly positive trace after {MAX_REGENERATE} attempts; depth range exceeds the baseline"
            )));
        }
    };

    let thermal = Normal::new(0.0, cfg.sigma_thermal).map_err(|e| Error::Config(e.to_string()))?;
    let mut clipped = 0;
    let mut y = Array1::zeros(cfg.n);
    for (yn, &xn) in y.iter_mut().zip(x0.iter()) {
        let shot = match cfg.alpha_shot {
            Some(a) => {
                let counts: f64 = Poisson::new(xn / a).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng);
                a * counts
            }
            None => xn,
        };
        let mut v = shot + thermal.sample(&mut rng);
        if v < cfg.clip_floor {
            v = cfg.clip_floor;
            clipped += 1;
        }
        *yn = v;
    }
    Ok(NanoporeInstance { x_clean, x0, y, regenerated, clipped })
}

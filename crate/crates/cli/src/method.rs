//! Method strings: `penalty[:fidelity][@key=value,...]`.
//!
//! `penalty` is one of `l1`, `lop`, `loglop`, `adalop`; `fidelity` is `l2`
//! (default), `l1` or `sid`. Keys after `@` override the shared penalty
//! parameters for this method only: `lambda`, `alpha`, `epsilon`, `gamma`,
//! `nu2`, `shift` (0 or 1).
//!
//! ```text
//! lop
//! adalop:sid@lambda=3,gamma=300
//! ```

use blocksparse::experiments::{FidelityKind, MethodSpec};
use blocksparse::PenaltySpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Penalty parameters shared by every selected method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyParams {
    pub lambda: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// SID shift; `None` takes the experiment's thermal variance.
    pub nu2: Option<f64>,
    /// Feed `y + ν²` to the SID fit.
    pub sid_shift: bool,
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams {
            lambda: 1.0,
            alpha: 40.0,
            epsilon: 1.0,
            gamma: 100.0,
            nu2: None,
            sid_shift: true,
        }
    }
}

fn parse_value(key: &str, raw: &str, spec: &str) -> Result<f64, CliError> {
    raw.parse::<f64>()
        .map_err(|_| CliError::Config(format!("method '{spec}': value of '{key}' is not a number: '{raw}'")))
}

pub fn parse_method(spec: &str, shared: &PenaltyParams) -> Result<MethodSpec, CliError> {
    let spec = spec.trim();
    let (head, overrides) = match spec.split_once('@') {
        Some((h, o)) => (h, Some(o)),
        None => (spec, None),
    };
    let (penalty_name, fidelity_name) = match head.split_once(':') {
        Some((p, f)) => (p, f),
        None => (head, "l2"),
    };

    let mut p = shared.clone();
    for pair in overrides.into_iter().flat_map(|o| o.split(',')) {
        let (key, raw) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("method '{spec}': expected key=value, got '{pair}'")))?;
        let value = parse_value(key, raw, spec)?;
        match key.trim() {
            "lambda" => p.lambda = value,
            "alpha" => p.alpha = value,
            "epsilon" => p.epsilon = value,
            "gamma" => p.gamma = value,
            "nu2" => p.nu2 = Some(value),
            "shift" if value == 0.0 || value == 1.0 => p.sid_shift = value == 1.0,
            "shift" => return Err(CliError::Config(format!("method '{spec}': shift must be 0 or 1"))),
            other => return Err(CliError::Config(format!("method '{spec}': unknown parameter '{other}'"))),
        }
    }

    let penalty = match penalty_name {
        "l1" => PenaltySpec::L1 { lambda: p.lambda },
        "lop" => PenaltySpec::Lop { lambda: p.lambda, alpha: p.alpha },
        "loglop" => PenaltySpec::LogLop { lambda: p.lambda, alpha: p.alpha, epsilon: p.epsilon },
        "adalop" => PenaltySpec::AdaLop { lambda: p.lambda, alpha: p.alpha, gamma: p.gamma, w0: None },
        other => {
            return Err(CliError::Config(format!(
                "unknown penalty '{other}' (expected l1, lop, loglop or adalop)"
            )))
        }
    };
    let fidelity = match fidelity_name {
        "l2" => FidelityKind::L2,
        "l1" => FidelityKind::L1,
        "sid" => FidelityKind::Sid { nu2: p.nu2, shift: p.sid_shift },
        other => return Err(CliError::Config(format!("unknown fidelity '{other}' (expected l2, l1 or sid)"))),
    };
    let mut method = MethodSpec::new(penalty, fidelity);
    if overrides.is_some() {
        method.label = spec.to_string();
    }
    Ok(method)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_names() {
        let shared = PenaltyParams::default();
        let m = parse_method("lop", &shared).unwrap();
        assert_eq!(m.penalty, PenaltySpec::Lop { lambda: 1.0, alpha: 40.0 });
        assert_eq!(m.fidelity, FidelityKind::L2);
        assert_eq!(m.label, "lop");
        let m = parse_method("adalop:sid", &shared).unwrap();
        assert_eq!(m.label, "adalop:sid");
        assert_eq!(m.fidelity, FidelityKind::Sid { nu2: None, shift: true });
    }

    #[test]
    fn overrides_apply_to_one_method() {
        let shared = PenaltyParams::default();
        let m = parse_method("adalop:sid@lambda=3,gamma=300,nu2=2", &shared).unwrap();
        assert_eq!(
            m.penalty,
            PenaltySpec::AdaLop { lambda: 3.0, alpha: 40.0, gamma: 300.0, w0: None }
        );
        assert_eq!(m.fidelity, FidelityKind::Sid { nu2: Some(2.0), shift: true });
        assert_eq!(m.label, "adalop:sid@lambda=3,gamma=300,nu2=2");
    }

    #[test]
    fn rejects_garbage() {
        let shared = PenaltyParams::default();
        for bad in ["tv", "lop:l3", "lop@lambda", "lop@lambda=x", "lop@beta=1", "lop:sid@shift=2"] {
            assert!(parse_method(bad, &shared).is_err(), "{bad}");
        }
    }
}

//! Experiment configuration: the JSON document, its resolution, and the echo.

use std::path::{Path, PathBuf};

use mhl_core::decomposition::MaskMode;
use mhl_core::filtration::FiltrationConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Inline filtration document or a path to one.
    pub filtration: Option<FiltrationSource>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub p_values: Option<Vec<f64>>,
    pub tol: Option<f64>,
    /// Explicit field for `decompose`.
    pub field: Option<FieldSpec>,
    pub mask_mode: Option<MaskMode>,
    pub restarts: Option<usize>,
    /// Pointwise `ℓ_r` exponents for `gradcheck`.
    pub x_norms: Option<Vec<f64>>,
    pub q: Option<f64>,
    pub c: Option<f64>,
    pub max_dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FiltrationSource {
    Path(PathBuf),
    Inline(FiltrationConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum FieldSpec {
    Zero {
        zero: bool,
    },
    /// `values[i][j]` lists the atom values of entry `(i, j)`.
    Values {
        values: Vec<Vec<Vec<f64>>>,
    },
}

/// The configuration after defaults and overrides, echoed into every summary.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: String,
    pub filtration: FiltrationConfig,
    pub trials: usize,
    pub seed: Option<u64>,
    pub p_values: Vec<f64>,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    pub mask_mode: MaskMode,
    pub restarts: usize,
    pub x_norms: Vec<f64>,
    pub q: f64,
    pub c: f64,
    pub max_dim: usize,
}

pub struct Defaults {
    pub filtration: FiltrationConfig,
    pub trials: usize,
    pub p_values: Vec<f64>,
    pub tol: f64,
}

impl Resolved {
    pub fn seed(&self) -> Result<u64, String> {
        self.seed.ok_or_else(|| format!("`{}` is randomized: pass --seed or set \"seed\" in the config", self.command))
    }
}

pub fn load(path: Option<&Path>) -> Result<(ExperimentConfig, PathBuf), String> {
    match path {
        None => Ok((ExperimentConfig::default(), PathBuf::from("."))),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            let cfg = serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", p.display()))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
            Ok((cfg, dir))
        }
    }
}

pub fn resolve(
    command: &str,
    cfg: ExperimentConfig,
    dir: &Path,
    seed: Option<u64>,
    defaults: Defaults,
) -> Result<Resolved, String> {
    let filtration = match cfg.filtration {
        None => defaults.filtration,
        Some(FiltrationSource::Inline(f)) => f,
        Some(FiltrationSource::Path(p)) => {
            let p = if p.is_absolute() { p } else { dir.join(p) };
            let text =
                std::fs::read_to_string(&p).map_err(|e| format!("cannot read filtration {}: {e}", p.display()))?;
            FiltrationConfig::from_json(&text).map_err(|e| format!("invalid filtration {}: {e}", p.display()))?
        }
    };
    let resolved = Resolved {
        command: command.to_string(),
        filtration,
        trials: cfg.trials.unwrap_or(defaults.trials),
        seed: seed.or(cfg.seed),
        p_values: cfg.p_values.unwrap_or(defaults.p_values),
        tol: cfg.tol.unwrap_or(defaults.tol),
        field: cfg.field,
        mask_mode: cfg.mask_mode.unwrap_or(MaskMode::Greedy),
        restarts: cfg.restarts.unwrap_or(32),
        x_norms: cfg.x_norms.unwrap_or_else(|| vec![2.0, 4.0]),
        q: cfg.q.unwrap_or(2.0),
        c: cfg.c.unwrap_or(0.5),
        max_dim: cfg.max_dim.unwrap_or(3),
    };
    if resolved.trials == 0 {
        return Err("trials must be positive".into());
    }
    if resolved.tol.is_nan() || resolved.tol <= 0.0 {
        return Err(format!("tolerance {} must be positive", resolved.tol));
    }
    if resolved.p_values.is_empty() || resolved.p_values.iter().any(|p| !p.is_finite() || *p <= 1.0) {
        return Err(format!("p values {:?} must be finite and exceed 1", resolved.p_values));
    }
    Ok(resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Defaults {
        Defaults { filtration: FiltrationConfig::coin(1, 1), trials: 3, p_values: vec![2.0], tol: 1e-6 }
    }

    #[test]
    fn flag_seed_overrides_config() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"seed": 1, "trials": 5}"#).unwrap();
        let r = resolve("constants", cfg, Path::new("."), Some(9), defaults()).unwrap();
        assert_eq!((r.seed, r.trials), (Some(9), 5));
    }

    #[test]
    fn randomized_commands_need_a_seed() {
        let r = resolve("probe", ExperimentConfig::default(), Path::new("."), None, defaults()).unwrap();
        assert!(r.seed().is_err());
    }

    #[test]
    fn field_specs_parse() {
        let z: FieldSpec = serde_json::from_str(r#"{"zero": true}"#).unwrap();
        assert!(matches!(z, FieldSpec::Zero { zero: true }));
        let v: FieldSpec = serde_json::from_str(r#"{"values": [[[1.0, 2.0]]]}"#).unwrap();
        assert!(matches!(v, FieldSpec::Values { .. }));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"trails": 3}"#).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        for doc in [r#"{"trials": 0}"#, r#"{"tol": -1}"#, r#"{"p_values": [1.0]}"#] {
            let cfg: ExperimentConfig = serde_json::from_str(doc).unwrap();
            assert!(resolve("probe", cfg, Path::new("."), None, defaults()).is_err(), "{doc}");
        }
    }
}

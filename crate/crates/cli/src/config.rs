//! Flat TOML experiment files, `--key=value` overrides, and their mapping
//! onto the library's experiment types.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use toml::{Table, Value};

use langevin_chaos::dynamics::SdeConfig;
use langevin_chaos::harness::{Observable, PicardSettings, RateExperimentConfig, SamplingSetup, ScalarLaw};
use langevin_chaos::linalg::SymMatrix;
use langevin_chaos::{GaussianSpec, Potential};

/// Loads a TOML config, or the `config` echo of a JSON run manifest.
pub fn load_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
        let config = manifest
            .get("config")
            .ok_or_else(|| anyhow!("manifest {} has no `config` entry", path.display()))?;
        return serde_json::from_value(config.clone()).context("manifest `config` is not a table");
    }
    text.parse::<Table>().with_context(|| format!("cannot parse {}", path.display()))
}

/// Sets `key` (dotted) to `raw`, read as a TOML value and falling back to a
/// bare string.
pub fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| anyhow!("empty override key"))?;
    let mut cursor = table;
    for part in parts {
        let entry = cursor.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Free-form label; only echoed through the manifest.
    #[allow(dead_code)]
    pub experiment: Option<String>,
    pub dim: Option<usize>,
    pub p: Option<f64>,
    pub j_values: Option<Vec<usize>>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub rho0: Rho0Section,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub excursion: ExcursionSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub cov: CovSection,
    #[serde(default)]
    pub suite: SuiteSection,
    #[serde(default)]
    pub dump: DumpSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: Option<String>,
    pub precision: Option<Vec<Vec<f64>>>,
    pub center: Option<Vec<f64>>,
    pub offset: Option<f64>,
    pub ell: Option<u32>,
    pub scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub cov_floor: Option<f64>,
    pub noise_substeps: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rho0Section {
    pub mean: Option<Vec<f64>>,
    pub cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    pub n_particles: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub dt_halving: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcursionSection {
    /// `trajectory` (stopping-time frequencies) or `iid` (sample-mean excursions).
    pub mode: Option<String>,
    pub r: Option<f64>,
    pub radius: Option<f64>,
    pub radius_factor: Option<f64>,
    pub pilot_particles: Option<usize>,
    pub law: Option<String>,
    pub value: Option<f64>,
    pub level: Option<f64>,
    pub level_offset: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub time: Option<f64>,
    pub observable: Option<String>,
    pub a: Option<Vec<f64>>,
    pub value: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovSection {
    pub sqrt: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    pub trials: Option<usize>,
    pub dim_max: Option<usize>,
    pub j_max: Option<usize>,
    pub radius: Option<f64>,
    pub ell: Option<u32>,
    pub radius_lo: Option<f64>,
    pub radius_hi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpSection {
    pub max_replicates: Option<u64>,
}

fn need<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone().ok_or_else(|| anyhow!("missing config key `{key}`"))
}

fn key_err(key: &str) -> impl FnOnce(langevin_chaos::Error) -> anyhow::Error + '_ {
    move |e| anyhow!("invalid `{key}`: {e}")
}

impl FileConfig {
    pub fn from_table(table: &Table) -> Result<Self> {
        // round-trip through text so parse errors carry the key path
        let text = toml::to_string(table).context("config is not representable as TOML")?;
        toml::from_str(&text).map_err(|e| anyhow!("invalid config: {}", e.message()).context(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn dim(&self) -> Result<usize> {
        let d = self
            .dim
            .or_else(|| self.rho0.mean.as_ref().map(Vec::len))
            .ok_or_else(|| anyhow!("missing config key `dim`"))?;
        if d == 0 {
            bail!("invalid `dim`: must be ≥ 1");
        }
        Ok(d)
    }

    pub fn p(&self) -> Result<f64> {
        need(&self.p, "p")
    }

    pub fn j_values(&self) -> Result<Vec<usize>> {
        let j = need(&self.j_values, "j_values")?;
        if j.len() < 3 {
            bail!("invalid `j_values`: need at least 3 entries");
        }
        if j.windows(2).any(|w| w[1] <= w[0]) {
            bail!("invalid `j_values`: must be strictly increasing");
        }
        Ok(j)
    }

    pub fn replicates(&self) -> Result<usize> {
        need(&self.replicates, "replicates")
    }

    pub fn potential(&self) -> Result<Potential> {
        let d = self.dim()?;
        let s = &self.potential;
        let center = s.center.clone().unwrap_or_else(|| vec![0.0; d]);
        if center.len() != d {
            bail!("invalid `potential.center`: expected {d} entries, got {}", center.len());
        }
        let offset = s.offset.unwrap_or(1.0);
        match s.kind.as_deref().unwrap_or("quadratic") {
            "quadratic" => {
                let precision = match &s.precision {
                    Some(rows) => SymMatrix::from_rows(rows).map_err(key_err("potential.precision"))?,
                    None => SymMatrix::identity(d),
                };
                if precision.dim() != d {
                    bail!("invalid `potential.precision`: expected {d}×{d}");
                }
                Potential::quadratic(precision, center, offset).map_err(key_err("potential"))
            }
            "even_power" => Potential::even_power(need(&s.ell, "potential.ell")?, s.scale.unwrap_or(1.0), center, offset)
                .map_err(key_err("potential")),
            other => bail!("invalid `potential.kind`: {other:?} (expected \"quadratic\" or \"even_power\")"),
        }
    }

    pub fn sde(&self) -> Result<SdeConfig> {
        let dt = need(&self.sde.dt, "sde.dt")?;
        let t_final = need(&self.sde.t_final, "sde.t_final")?;
        if !(dt < t_final) {
            bail!("invalid `sde.dt`: must be below `sde.t_final`");
        }
        let mut cfg = SdeConfig::new(dt, t_final, self.seed()).map_err(key_err("sde"))?;
        if let Some(f) = self.sde.cov_floor {
            cfg.cov_floor = f;
        }
        if let Some(s) = self.sde.noise_substeps {
            if s == 0 {
                bail!("invalid `sde.noise_substeps`: must be ≥ 1");
            }
            cfg.noise_substeps = s;
        }
        cfg.validate().map_err(key_err("sde"))?;
        Ok(cfg)
    }

    pub fn rho0(&self) -> Result<GaussianSpec> {
        let d = self.dim()?;
        let mean = self.rho0.mean.clone().unwrap_or_else(|| vec![0.0; d]);
        let cov = match &self.rho0.cov {
            Some(rows) => SymMatrix::from_rows(rows).map_err(key_err("rho0.cov"))?,
            None => SymMatrix::identity(d),
        };
        if mean.len() != d || cov.dim() != d {
            bail!("invalid `rho0`: mean and cov must have dimension {d}");
        }
        let spec = GaussianSpec::new(mean, cov).map_err(key_err("rho0"))?;
        spec.require_nondegenerate().map_err(key_err("rho0.cov"))?;
        Ok(spec)
    }

    pub fn picard(&self) -> PicardSettings {
        let def = PicardSettings::default();
        PicardSettings {
            n_particles: self.picard.n_particles.unwrap_or(def.n_particles),
            max_iter: self.picard.max_iter.unwrap_or(def.max_iter),
            tol: self.picard.tol.unwrap_or(def.tol),
        }
    }

    pub fn rate_experiment(&self) -> Result<RateExperimentConfig> {
        let cfg = RateExperimentConfig {
            potential: self.potential()?,
            p: self.p()?,
            j_values: self.j_values()?,
            replicates: self.replicates()?,
            sde: self.sde()?,
            rho0: self.rho0()?,
            picard: self.picard(),
        };
        if cfg.p < 2.0 {
            bail!("invalid `p`: chaos runs need p ≥ 2, got {}", cfg.p);
        }
        cfg.validate().map_err(key_err("config"))?;
        Ok(cfg)
    }

    pub fn scalar_law(&self) -> Result<ScalarLaw> {
        match self.excursion.law.as_deref().unwrap_or("abs_normal") {
            "abs_normal" => Ok(ScalarLaw::AbsNormal),
            "constant" => Ok(ScalarLaw::Constant {
                value: need(&self.excursion.value, "excursion.value")?,
            }),
            other => bail!("invalid `excursion.law`: {other:?} (expected \"abs_normal\" or \"constant\")"),
        }
    }

    pub fn observable(&self) -> Result<Observable> {
        match self.sampling.observable.as_deref().unwrap_or("squared_norm") {
            "squared_norm" => Ok(Observable::SquaredNorm),
            "linear" => {
                let d = self.dim()?;
                let a = self.sampling.a.clone().unwrap_or_else(|| vec![1.0; d]);
                if a.len() != d {
                    bail!("invalid `sampling.a`: expected {d} entries");
                }
                Ok(Observable::Linear { a })
            }
            "constant" => Ok(Observable::Constant {
                value: need(&self.sampling.value, "sampling.value")?,
            }),
            other => bail!("invalid `sampling.observable`: {other:?}"),
        }
    }

    pub fn sampling_setup(&self) -> Result<SamplingSetup> {
        let p = self.p()?;
        if !(p >= 1.0) {
            bail!("invalid `p`: must be ≥ 1");
        }
        Ok(SamplingSetup {
            potential: self.potential()?,
            observable: self.observable()?,
            time: need(&self.sampling.time, "sampling.time")?,
            p,
            replicates: self.replicates()?,
            sde: self.sde()?,
            rho0: self.rho0()?,
        })
    }
}

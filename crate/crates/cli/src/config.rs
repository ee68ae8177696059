//! Experiment config: one TOML file, optionally patched with `--set`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fsmwt_core::channels::{degraded_from, DiscreteWiretapChannel, FadingSpec, GaussianSpec};
use fsmwt_core::markov::StateChain;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Capacity,
    CapacityFeedback,
    Region,
    Codec,
    Sweep,
}

/// Delay as written in the config: an integer, or `"inf"` for the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelayValue {
    Finite(u64),
    Named(String),
}

impl DelayValue {
    pub fn resolve(&self) -> Result<Option<u64>, Failure> {
        match self {
            DelayValue::Finite(d) => Ok(Some(*d)),
            DelayValue::Named(s) if s == "inf" => Ok(None),
            DelayValue::Named(s) => Err(Failure::config(format!("d must be an integer >= 0 or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub u: Option<f64>,
    /// `g / b`; defaults to 1.
    pub c: Option<f64>,
    /// Row-stochastic kernel, used instead of `u`, `c`.
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingConfig {
    pub sigma2: Vec<f64>,
    pub sigma2_w: f64,
    pub p0: f64,
    pub g: Vec<f64>,
    pub l: Vec<f64>,
}

/// A discrete channel table, given inline or in a JSON file with the same
/// keys. Either `table[s][x][y][z]`, or a degraded pair `main[s][x][y]` and
/// `wiretap[y][z]`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub main: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wiretap: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub gaussian: Option<GaussianSpec>,
    pub fading: Option<FadingConfig>,
    pub discrete: Option<DiscreteConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub u: Vec<f64>,
    /// Delays `0..=d_max`.
    pub d_max: u64,
    #[serde(default = "yes")]
    pub include_limit: bool,
    /// Defaults to the channel's own `sigma2_w`.
    pub sigma2_w: Option<Vec<f64>>,
    #[serde(default = "no_feedback")]
    pub feedback: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub feedback: bool,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            points: default_points(),
            feedback: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    pub n: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Secret rate per delayed state. Without it the degraded scheme rates
    /// of the input law are used.
    pub secret: Option<Vec<f64>>,
    /// Binning rate per delayed state (defaults to zero).
    pub binning: Option<Vec<f64>>,
    /// Multiplies every rate; handy for backing off from the analytic point.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub feedback: bool,
    /// Key rate per delayed state; defaults to the per-state bounds.
    pub key_rate: Option<Vec<f64>>,
    /// `P(x | s~)`; uniform when absent.
    pub input: Option<Vec<Vec<f64>>>,
    /// One report per seed; defaults to the top-level seed.
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default = "default_delay")]
    pub d: DelayValue,
    pub channel: ChannelConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub region: RegionConfig,
    pub codec: Option<CodecConfig>,
}

fn yes() -> bool {
    true
}
fn no_feedback() -> Vec<bool> {
    vec![false]
}
fn default_points() -> usize {
    fsmwt_core::region::DEFAULT_REGION_POINTS
}
fn default_blocks() -> usize {
    1000
}
fn one() -> f64 {
    1.0
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_delay() -> DelayValue {
    DelayValue::Finite(1)
}

/// Parsed config plus where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    /// Directory that relative paths inside the config resolve against.
    pub base: PathBuf,
}

/// Reads `path`, applies `key=value` overrides and deserializes.
pub fn load(path: &Path, overrides: &[String]) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

/// `a.b.c=value`; the value is read as a TOML value, or as a bare string.
/// `inf` and `nan` stay strings so `d=inf` means the delay limit.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::config(format!("--set expects key=value, got {assignment:?}")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .filter(|v| v.as_float().is_none_or(f64::is_finite))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Failure::config(format!("bad --set key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Failure::config(format!("--set {key}: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON of the resolved config, first 16 hex digits.
    pub fn params_hash(&self) -> String {
        let canonical = serde_json::to_value(self).map(|v| v.to_string()).unwrap_or_default();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn delay(&self) -> Result<Option<u64>, Failure> {
        self.d.resolve()
    }

    pub fn chain(&self) -> Result<StateChain, Failure> {
        let c = &self.chain;
        match (&c.matrix, c.u) {
            (Some(_), Some(_)) => Err(Failure::config("chain: give either `matrix` or `u` (and `c`), not both")),
            (Some(m), None) => Ok(StateChain::from_rows(m)?),
            (None, Some(u)) => Ok(StateChain::two_state(u, c.c.unwrap_or(1.0))?),
            (None, None) => Ok(StateChain::trivial()),
        }
    }

    fn channel_count(&self) -> usize {
        let ch = &self.channel;
        usize::from(ch.gaussian.is_some()) + usize::from(ch.fading.is_some()) + usize::from(ch.discrete.is_some())
    }

    pub fn check_one_channel(&self) -> Result<(), Failure> {
        match self.channel_count() {
            1 => Ok(()),
            0 => Err(Failure::config("no channel given: add [channel.gaussian], [channel.fading] or [channel.discrete]")),
            _ => Err(Failure::config("more than one channel given; keep exactly one [channel.*] section")),
        }
    }

    /// The continuous channel, if the config has one; `fading` tells which.
    pub fn continuous(&self) -> Result<Option<(FadingSpec, bool)>, Failure> {
        self.check_one_channel()?;
        if let Some(g) = &self.channel.gaussian {
            g.validate()?;
            return Ok(Some((g.as_fading(), false)));
        }
        if let Some(f) = &self.channel.fading {
            let spec = FadingSpec {
                base: GaussianSpec {
                    sigma2: f.sigma2.clone(),
                    sigma2_w: f.sigma2_w,
                    p0: f.p0,
                },
                g: f.g.clone(),
                l: f.l.clone(),
            };
            spec.validate()?;
            return Ok(Some((spec, true)));
        }
        Ok(None)
    }

    pub fn discrete(&self, base: &Path) -> Result<Option<DiscreteWiretapChannel>, Failure> {
        self.check_one_channel()?;
        let Some(dc) = &self.channel.discrete else {
            return Ok(None);
        };
        let resolved = match &dc.file {
            Some(file) => {
                if dc.table.is_some() || dc.main.is_some() || dc.wiretap.is_some() {
                    return Err(Failure::config("[channel.discrete]: `file` excludes inline tables"));
                }
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Failure::config(format!("cannot read channel file {}: {e}", path.display())))?;
                let parsed: DiscreteConfig = serde_json::from_str(&text)
                    .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
                if parsed.file.is_some() {
                    return Err(Failure::config(format!("{}: nested `file` is not allowed", path.display())));
                }
                parsed
            }
            None => dc.clone(),
        };
        let ch = match (resolved.table, resolved.main, resolved.wiretap) {
            (Some(t), None, None) => DiscreteWiretapChannel::from_nested(&t)?.with_detected_witness(),
            (None, Some(m), Some(w)) => degraded_from(&m, &w)?,
            _ => {
                return Err(Failure::config(
                    "[channel.discrete] needs either `table` or both `main` and `wiretap`",
                ))
            }
        };
        Ok(Some(ch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_creates_sections_and_parses_values() {
        let mut t: toml::Table = toml::from_str("mode = \"capacity\"").unwrap();
        apply_override(&mut t, "chain.u=0.25").unwrap();
        apply_override(&mut t, "d=inf").unwrap();
        apply_override(&mut t, "sweep.u=[0.1, 0.2]").unwrap();
        assert_eq!(t["chain"]["u"].as_float(), Some(0.25));
        assert_eq!(t["d"].as_str(), Some("inf"));
        assert_eq!(t["sweep"]["u"].as_array().map(Vec::len), Some(2));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "mode.x=1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let parse = |s: &str| -> ExperimentConfig { toml::from_str(s).unwrap() };
        let a = parse("mode = \"capacity\"\n[channel.gaussian]\nsigma2=[1.0]\nsigma2_w=2.0\np0=1.0\n");
        let b = parse("mode = \"capacity\"\n[channel.gaussian]\nsigma2=[1.0]\nsigma2_w=3.0\np0=1.0\n");
        assert_eq!(a.params_hash(), a.clone().params_hash());
        assert_ne!(a.params_hash(), b.params_hash());
        assert_eq!(a.params_hash().len(), 16);
    }
}

//! Experiment configuration: a flat TOML file merged with overrides.
//!
//! ```toml
//! eta = [0.0, 1.0, "inf"]
//! sizes = [8, 10, 12, 14, 16]
//! filling = "1/2"
//! h_grid = "1e-5:1:25"     # start:stop:points-per-decade
//! densify = 4              # extra density within a decade around each coarse peak
//! tol = 1e-12
//! delta_h = "adaptive"     # or a positive number used as the first step
//! workers = 0              # 0 = all cores
//! seed = 1592629154
//! out = "out"
//! format = "csv"
//! timings = false
//! cfi = true
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::criticality::log_grid;
use crate::eigensolve::{SolverOptions, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::hamiltonian::Eta;
use crate::metrology::FisherOptions;

/// Excitations per site as a reduced fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Filling {
    pub num: u32,
    pub den: u32,
}

impl Filling {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::Config(format!(
                "filling {num}/{den} must lie in [0, 1]"
            )));
        }
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `n·L`, when it is an integer.
    pub fn excitations(self, sites: usize) -> Result<usize> {
        let total = sites as u64 * self.num as u64;
        if !total.is_multiple_of(self.den as u64) {
            return Err(Error::Config(format!(
                "filling {self} with L = {sites} gives N = {} (not an integer)",
                total as f64 / self.den as f64
            )));
        }
        Ok((total / self.den as u64) as usize)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Filling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Filling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("bad filling {s:?}; expected e.g. 1/2 or 0.25"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Filling::new(n, d);
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        // decimals: find the smallest denominator up to 64 that reproduces v
        (1..=64u32)
            .find_map(|d| {
                let n = (v * d as f64).round();
                ((n / d as f64 - v).abs() < 1e-12 && n >= 0.0).then(|| Filling::new(n as u32, d))
            })
            .unwrap_or_else(|| Err(bad()))
    }
}

impl Serialize for Filling {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Filling {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => v.to_string().parse().map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Logarithmic field grid `start..=stop` with `per_decade` points per decade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub per_decade: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        log_grid(self.start, self.stop, self.per_decade).map_err(|e| Error::Config(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if !(self.start > 0.0) {
            return Err(Error::Config(format!(
                "h_grid start must be > 0, got {}",
                self.start
            )));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(Error::Config(format!(
                "h_grid stop {} must be >= start {}",
                self.stop, self.start
            )));
        }
        if self.per_decade == 0 {
            return Err(Error::Config(
                "h_grid needs at least one point per decade".into(),
            ));
        }
        Ok(())
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{:?}:{}", self.start, self.stop, self.per_decade)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad h_grid {s:?}; expected start:stop:per_decade"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        let g = GridSpec {
            start: a.parse().map_err(|_| bad())?,
            stop: b.parse().map_err(|_| bad())?,
            per_decade: c.parse().map_err(|_| bad())?,
        };
        g.validate()?;
        Ok(g)
    }
}

impl Serialize for GridSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DeltaPolicy {
    #[default]
    Adaptive,
    /// Adaptive halving starting from this step.
    Seed(f64),
}

impl Serialize for DeltaPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DeltaPolicy::Adaptive => s.serialize_str("adaptive"),
            DeltaPolicy::Seed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for DeltaPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 && v.is_finite() => Ok(DeltaPolicy::Seed(v)),
            Raw::Text(s) if s == "adaptive" => Ok(DeltaPolicy::Adaptive),
            _ => Err(serde::de::Error::custom(
                "delta_h must be \"adaptive\" or a positive number",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format {other:?}; use csv or json"
            ))),
        }
    }
}

/// Partially specified configuration, as read from a file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub eta: Option<Vec<Eta>>,
    pub sizes: Option<Vec<usize>>,
    pub filling: Option<Filling>,
    pub h_grid: Option<GridSpec>,
    pub densify: Option<usize>,
    pub tol: Option<f64>,
    pub delta_h: Option<DeltaPolicy>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub timings: Option<bool>,
    pub cfi: Option<bool>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Values set in `over` win.
    pub fn merged(self, over: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            eta: over.eta.or(self.eta),
            sizes: over.sizes.or(self.sizes),
            filling: over.filling.or(self.filling),
            h_grid: over.h_grid.or(self.h_grid),
            densify: over.densify.or(self.densify),
            tol: over.tol.or(self.tol),
            delta_h: over.delta_h.or(self.delta_h),
            workers: over.workers.or(self.workers),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            timings: over.timings.or(self.timings),
            cfi: over.cfi.or(self.cfi),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let defaults = ExperimentConfig::default();
        let cfg = ExperimentConfig {
            eta: self.eta.unwrap_or(defaults.eta),
            sizes: self.sizes.unwrap_or(defaults.sizes),
            filling: self.filling.unwrap_or(defaults.filling),
            h_grid: self.h_grid.unwrap_or(defaults.h_grid),
            densify: self.densify.unwrap_or(defaults.densify),
            tol: self.tol.unwrap_or(defaults.tol),
            delta_h: self.delta_h.unwrap_or(defaults.delta_h),
            workers: self.workers.unwrap_or(defaults.workers),
            seed: self.seed.unwrap_or(defaults.seed),
            out: self.out.unwrap_or(defaults.out),
            format: self.format.unwrap_or(defaults.format),
            timings: self.timings.unwrap_or(defaults.timings),
            cfi: self.cfi.unwrap_or(defaults.cfi),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub eta: Vec<Eta>,
    pub sizes: Vec<usize>,
    pub filling: Filling,
    pub h_grid: GridSpec,
    pub densify: usize,
    pub tol: f64,
    pub delta_h: DeltaPolicy,
    pub workers: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub timings: bool,
    pub cfi: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            eta: vec![Eta::Finite(0.0)],
            sizes: vec![8, 10, 12, 14, 16],
            filling: Filling { num: 1, den: 2 },
            h_grid: GridSpec {
                start: 1e-5,
                stop: 1.0,
                per_decade: 25,
            },
            densify: 4,
            tol: 1e-12,
            delta_h: DeltaPolicy::Adaptive,
            workers: 0,
            seed: DEFAULT_SEED,
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
            timings: false,
            cfi: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta.is_empty() {
            return Err(Error::Config("eta list is empty".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::Config("size list is empty".into()));
        }
        for &l in &self.sizes {
            if !(2..=crate::basis::MAX_SITES).contains(&l) {
                return Err(Error::Config(format!(
                    "size {l} outside 2..={}",
                    crate::basis::MAX_SITES
                )));
            }
            self.filling.excitations(l)?;
        }
        self.h_grid.validate()?;
        if self.densify == 0 {
            return Err(Error::Config("densify must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        Ok(())
    }

    /// `(L, N)` pairs in size order.
    pub fn sectors(&self) -> Result<Vec<(usize, usize)>> {
        let mut sizes = self.sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
            .into_iter()
            .map(|l| Ok((l, self.filling.excitations(l)?)))
            .collect()
    }

    pub fn etas_sorted(&self) -> Vec<Eta> {
        let mut v = self.eta.clone();
        v.sort_by(|a, b| a.sort_key().total_cmp(&b.sort_key()));
        v.dedup_by(|a, b| a.sort_key() == b.sort_key());
        v
    }

    pub fn fisher_options(&self) -> FisherOptions {
        let d = FisherOptions::default();
        FisherOptions {
            solver: SolverOptions {
                tol: self.tol,
                seed: self.seed,
                ..d.solver
            },
            with_cfi: self.cfi,
            step_seed: match self.delta_h {
                DeltaPolicy::Adaptive => None,
                DeltaPolicy::Seed(v) => Some(v),
            },
            ..d
        }
    }

    pub fn worker_count(&self) -> usize {
        if self.workers == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            self.workers
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = r#"
            eta = [0.0, 1, "inf"]
            sizes = [8, 12]
            filling = "1/4"
            h_grid = "1e-3:1:10"
            densify = 2
            delta_h = 1e-5
            workers = 3
            seed = 7
            out = "x"
            format = "json"
        "#;
        let c = ConfigLayer::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(
            c.eta,
            vec![Eta::Finite(0.0), Eta::Finite(1.0), Eta::Infinite]
        );
        assert_eq!(c.filling, Filling { num: 1, den: 4 });
        assert_eq!(c.sectors().unwrap(), vec![(8, 2), (12, 3)]);
        assert_eq!(c.h_grid.per_decade, 10);
        assert_eq!(c.delta_h, DeltaPolicy::Seed(1e-5));
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.fisher_options().solver.seed, 7);
    }

    #[test]
    fn rejects_fractional_excitations() {
        let layer = ConfigLayer {
            sizes: Some(vec![10]),
            filling: Some("1/4".parse().unwrap()),
            ..Default::default()
        };
        assert!(matches!(layer.resolve(), Err(Error::Config(m)) if m.contains("2.5")));
    }

    #[test]
    fn rejects_bad_grid_and_keys() {
        assert!("0:1:25".parse::<GridSpec>().is_err());
        assert!("1e-5:1".parse::<GridSpec>().is_err());
        assert!(ConfigLayer::from_toml("colour = 3").is_err());
    }

    #[test]
    fn overrides_win() {
        let file = ConfigLayer {
            seed: Some(1),
            workers: Some(2),
            ..Default::default()
        };
        let cli = ConfigLayer {
            seed: Some(9),
            ..Default::default()
        };
        let c = file.merged(cli).resolve().unwrap();
        assert_eq!((c.seed, c.workers), (9, 2));
    }

    #[test]
    fn filling_forms() {
        assert_eq!(
            "0.125".parse::<Filling>().unwrap(),
            Filling { num: 1, den: 8 }
        );
        assert_eq!(
            "2/4".parse::<Filling>().unwrap(),
            Filling { num: 1, den: 2 }
        );
        assert!("3/2".parse::<Filling>().is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig {
            eta: vec![Eta::Infinite, Eta::Finite(0.3)],
            ..Default::default()
        };
        let text = toml::to_string(&c).unwrap();
        let back = ConfigLayer::from_toml(&text).unwrap().resolve().unwrap();
        assert_eq!(back, c);
    }
}

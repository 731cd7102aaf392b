//! Flat key=value config files. Every key mirrors a long flag name;
//! explicit flags win over config values, which win over defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!(
                    "config {} line {}: expected key=value",
                    path.display(),
                    idx + 1
                ))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Validation(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    /// flag > config > default.
    pub fn resolve<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.parse(key)?.unwrap_or(default)),
        }
    }

    /// flag > config > absent.
    pub fn resolve_opt<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parse(key),
        }
    }
}

/// "MxNxK" (or "M,N,K") Chimera shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologySpec {
    pub m: usize,
    pub n_cells: usize,
    pub k: usize,
}

impl FromStr for TopologySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
        if parts.len() != 3 {
            return Err(format!("expected MxNxK, got {s:?}"));
        }
        let parse = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        Ok(TopologySpec {
            m: parse(parts[0])?,
            n_cells: parse(parts[1])?,
            k: parse(parts[2])?,
        })
    }
}

/// "lo,hi" open interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec(pub f64, pub f64);

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
        let lo = lo.trim().parse::<f64>().map_err(|e| e.to_string())?;
        let hi = hi.trim().parse::<f64>().map_err(|e| e.to_string())?;
        Ok(RangeSpec(lo, hi))
    }
}

/// "lo:hi:n" evenly spaced grid, or an explicit comma list.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec(pub Vec<f64>);

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            if parts.len() != 3 {
                return Err(format!("expected lo:hi:n, got {s:?}"));
            }
            let lo = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
            let hi = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
            let n = parts[2].trim().parse::<usize>().map_err(|e| e.to_string())?;
            if n < 1 {
                return Err("grid needs at least one point".into());
            }
            if n == 1 {
                return Ok(GridSpec(vec![lo]));
            }
            Ok(GridSpec(
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect(),
            ))
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
                .collect::<Result<Vec<f64>, String>>()
                .map(GridSpec)
        }
    }
}

/// Comma-separated node id list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdList(pub Vec<usize>);

impl FromStr for IdList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(IdList(Vec::new()));
        }
        s.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<usize>, String>>()
            .map(IdList)
    }
}

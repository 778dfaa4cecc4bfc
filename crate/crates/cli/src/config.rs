//! Run configuration: key = value files, flag overrides, grid specs, and
//! the canonical parameter record hashed into every output header.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

/// Driver-level error, carrying the process exit code contract:
/// 2 for configuration problems, 4 when a library precondition is violated,
/// 3 for runtime numerical or I/O failures.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute { op: &'static str, source: genscatter_core::Error },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute { source, .. } => {
                if source.is_precondition() {
                    4
                } else {
                    3
                }
            }
            CliError::Io(_) => 3,
        }
    }

    /// Tag a library error with the operation it interrupted.
    pub fn compute(op: &'static str) -> impl Fn(genscatter_core::Error) -> CliError {
        move |source| CliError::Compute { op, source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Compute { op, source } => write!(f, "{op} failed: {source}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// A value that can arrive through a flag or a config file and is written
/// back out in one canonical spelling (the form that is hashed).
pub trait ParamValue: Sized {
    fn parse_param(s: &str) -> Result<Self, String>;
    fn canonical(&self) -> String;
}

macro_rules! impl_param_via_fromstr {
    ($($t:ty),*) => {$(
        impl ParamValue for $t {
            fn parse_param(s: &str) -> Result<Self, String> {
                s.parse::<$t>().map_err(|e| format!("invalid value `{s}`: {e}"))
            }
            fn canonical(&self) -> String {
                format!("{self}")
            }
        }
    )*};
}

impl_param_via_fromstr!(f64, u32, u64, usize);

impl ParamValue for String {
    fn parse_param(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
    fn canonical(&self) -> String {
        self.clone()
    }
}

/// Grid spacing rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spacing::Linear => write!(f, "linear"),
            Spacing::Log => write!(f, "log"),
        }
    }
}

/// A sweep grid `min:max:count:{linear,log}` with at most 10^6 points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, count: usize, spacing: Spacing) -> Result<Self, String> {
        if !min.is_finite() || !max.is_finite() {
            return Err(format!("grid endpoints must be finite, got {min}:{max}"));
        }
        if count == 0 || count > 1_000_000 {
            return Err(format!("grid count must be in 1..=1000000, got {count}"));
        }
        if min > max {
            return Err(format!("grid needs min <= max, got {min}:{max}"));
        }
        if count > 1 && min == max {
            return Err(format!("grid with {count} points needs min < max"));
        }
        if spacing == Spacing::Log && min <= 0.0 {
            return Err(format!("log grid needs min > 0, got {min}"));
        }
        Ok(Self { min, max, count, spacing })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| match self.spacing {
                Spacing::Linear => self.min + (self.max - self.min) * i as f64 / n,
                Spacing::Log => {
                    (self.min.ln() + (self.max / self.min).ln() * i as f64 / n).exp()
                }
            })
            .collect()
    }
}

impl ParamValue for GridSpec {
    fn parse_param(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!(
                "grid `{s}` must be min:max:count:spacing with spacing in {{linear, log}}"
            ));
        }
        let min = parts[0].parse::<f64>().map_err(|e| format!("grid min `{}`: {e}", parts[0]))?;
        let max = parts[1].parse::<f64>().map_err(|e| format!("grid max `{}`: {e}", parts[1]))?;
        let count =
            parts[2].parse::<usize>().map_err(|e| format!("grid count `{}`: {e}", parts[2]))?;
        let spacing = match parts[3] {
            "linear" => Spacing::Linear,
            "log" => Spacing::Log,
            other => return Err(format!("grid spacing `{other}` must be linear or log")),
        };
        Self::new(min, max, count, spacing)
    }

    fn canonical(&self) -> String {
        format!("{}:{}:{}:{}", self.min, self.max, self.count, self.spacing)
    }
}

/// Comma-separated positive scales, e.g. `1e2,1e3,1e4`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleList(pub Vec<f64>);

impl ParamValue for ScaleList {
    fn parse_param(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let v = part.parse::<f64>().map_err(|e| format!("scale `{part}`: {e}"))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("scales must be positive and finite, got {v}"));
            }
            out.push(v);
        }
        if out.is_empty() || out.len() > 1_000_000 {
            return Err(format!("need 1..=1000000 scales, got {}", out.len()));
        }
        Ok(Self(out))
    }

    fn canonical(&self) -> String {
        self.0.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone)]
struct FileEntry {
    line: usize,
    value: String,
}

/// Parsed `key = value` config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, FileEntry>,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, FileEntry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin} line {line}: expected key = value"))
            })?;
            let key = key.trim();
            if key.is_empty()
                || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
            {
                return Err(CliError::Config(format!(
                    "{origin} line {line}: key `{key}` must be lowercase-with-dashes"
                )));
            }
            if let Some(prev) = entries.get(key) {
                return Err(CliError::Config(format!(
                    "{origin} line {line}: duplicate key `{key}` (first set at line {})",
                    prev.line
                )));
            }
            entries.insert(key.to_string(), FileEntry { line, value: value.trim().to_string() });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Resolves each parameter as flag > config file > default, recording the
/// canonical value so the run can be hashed and echoed into output headers.
pub struct Resolver {
    file: ConfigFile,
    used: BTreeSet<String>,
    record: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: ConfigFile) -> Self {
        Self { file, used: BTreeSet::new(), record: BTreeMap::new() }
    }

    fn lookup<T: ParamValue>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: Option<T>,
    ) -> Result<T, CliError> {
        self.used.insert(key.to_string());
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(entry) = self.file.entries.get(key) {
            return T::parse_param(&entry.value).map_err(|e| {
                CliError::Config(format!("config line {}: field `{key}`: {e}", entry.line))
            });
        }
        default.ok_or_else(|| {
            CliError::Config(format!("missing required parameter `{key}` (flag or config file)"))
        })
    }

    /// Resolve and record a parameter that shapes the computation.
    pub fn param<T: ParamValue>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: Option<T>,
    ) -> Result<T, CliError> {
        let v = self.lookup(key, flag, default)?;
        self.record.insert(key.to_string(), v.canonical());
        Ok(v)
    }

    /// Resolve a parameter that must not influence the output bytes
    /// (destination path, serialization format): looked up but not recorded.
    pub fn ephemeral<T: ParamValue>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: Option<T>,
    ) -> Result<T, CliError> {
        self.lookup(key, flag, default)
    }

    /// Parse a textual flag value (grids, scale lists) ahead of resolution.
    pub fn flag_text<T: ParamValue>(key: &str, flag: Option<&str>) -> Result<Option<T>, CliError> {
        flag.map(|s| {
            T::parse_param(s).map_err(|e| CliError::Config(format!("flag --{key}: {e}")))
        })
        .transpose()
    }

    /// Reject config keys no parameter asked for, then freeze the canonical
    /// record into header metadata with its FNV-1a hash.
    pub fn finalize(self, command: &str) -> Result<BTreeMap<String, String>, CliError> {
        let unknown: Vec<String> = self
            .file
            .entries
            .iter()
            .filter(|(k, _)| !self.used.contains(*k))
            .map(|(k, e)| format!("`{k}` (line {})", e.line))
            .collect();
        if !unknown.is_empty() {
            return Err(CliError::Config(format!(
                "unknown config key(s) for {command}: {}",
                unknown.join(", ")
            )));
        }
        let mut canon = format!("{command}\n");
        for (k, v) in &self.record {
            canon.push_str(&format!("{k}={v}\n"));
        }
        let mut meta = BTreeMap::new();
        meta.insert("command".to_string(), command.to_string());
        meta.insert("config_hash".to_string(), format!("{:016x}", fnv1a64(canon.as_bytes())));
        for (k, v) in self.record {
            meta.insert(format!("param.{k}"), v);
        }
        Ok(meta)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses_and_emits_points() {
        let g = GridSpec::parse_param("0.1:10:3:log").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 3);
        assert!((pts[0] - 0.1).abs() < 1e-15);
        assert!((pts[1] - 1.0).abs() < 1e-12);
        assert!((pts[2] - 10.0).abs() < 1e-12);
        assert_eq!(g.canonical(), "0.1:10:3:log");

        let lin = GridSpec::parse_param("0:1:5:linear").unwrap().points();
        assert_eq!(lin, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(GridSpec::parse_param("2:2:1:linear").unwrap().points(), vec![2.0]);
    }

    #[test]
    fn grid_spec_rejects_bad_input() {
        for bad in [
            "1:2:3",
            "1:2:3:cubic",
            "2:1:3:linear",
            "0:1:0:linear",
            "0:1:1000001:linear",
            "0:1:2:log",
            "1:1:2:linear",
            "nan:1:2:linear",
        ] {
            assert!(GridSpec::parse_param(bad).is_err(), "{bad} should be rejected");
        }
    }

    #[test]
    fn scale_list_round_trips() {
        let s = ScaleList::parse_param("1e2, 1e3,1e4").unwrap();
        assert_eq!(s.0, vec![100.0, 1000.0, 10000.0]);
        assert_eq!(s.canonical(), "100,1000,10000");
        assert!(ScaleList::parse_param("").is_err());
        assert!(ScaleList::parse_param("1,-2").is_err());
    }

    #[test]
    fn config_file_diagnostics_carry_lines() {
        let err = ConfigFile::parse("z = 1\nz = 2\n", "test").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("first set at line 1"), "{err}");
        let err = ConfigFile::parse("bad line\n", "test").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = ConfigFile::parse("Camel = 1\n", "test").unwrap_err();
        assert!(err.to_string().contains("lowercase"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn resolver_precedence_and_hash_stability() {
        let file = ConfigFile::parse("z = 2\nlmax = 1\n", "test").unwrap();
        let mut r = Resolver::new(file.clone());
        let z: f64 = r.param("z", Some(3.0), Some(1.0)).unwrap();
        let lmax: u32 = r.param("lmax", None, Some(5)).unwrap();
        assert_eq!(z, 3.0);
        assert_eq!(lmax, 1);
        let meta = r.finalize("demo").unwrap();
        assert_eq!(meta["param.z"], "3");
        assert_eq!(meta["param.lmax"], "1");

        // The hash depends only on the resolved record, not on its source.
        let mut r2 = Resolver::new(ConfigFile::default());
        let _: f64 = r2.param("z", Some(3.0), None).unwrap();
        let _: u32 = r2.param("lmax", Some(1), None).unwrap();
        let meta2 = r2.finalize("demo").unwrap();
        assert_eq!(meta["config_hash"], meta2["config_hash"]);

        // Unknown keys are rejected with their location.
        let mut r3 = Resolver::new(file);
        let _: f64 = r3.param("z", None, Some(1.0)).unwrap();
        let err = r3.finalize("demo").unwrap_err();
        assert!(err.to_string().contains("`lmax` (line 2)"), "{err}");
    }

    #[test]
    fn ephemeral_values_do_not_enter_the_hash() {
        let mut a = Resolver::new(ConfigFile::default());
        let _: f64 = a.param("z", Some(1.0), None).unwrap();
        let _: String = a.ephemeral("output", Some("a.csv".to_string()), None).unwrap();
        let mut b = Resolver::new(ConfigFile::default());
        let _: f64 = b.param("z", Some(1.0), None).unwrap();
        let _: String = b.ephemeral("output", Some("b.csv".to_string()), None).unwrap();
        assert_eq!(
            a.finalize("demo").unwrap()["config_hash"],
            b.finalize("demo").unwrap()["config_hash"]
        );
    }
}

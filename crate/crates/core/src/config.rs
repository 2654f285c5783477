//! Pipeline configuration: a TOML file, overridden by command-line flags.
//!
//! Every key is optional; an empty file yields the defaults. Layout:
//!
//! ```toml
//! source = "frames/"          # path, device index, or "dataset:ROOT"
//! threads = 4
//! seed = 42
//! scale = 1.0                 # input reduction factor, (0, 1]
//! output_dir = "out"
//! dump_masks = true
//! dump_layers = false
//! report_formats = ["json", "csv"]
//!
//! [background]
//! mode = "sample-consensus"   # or "frame-diff"
//! diff_threshold = 15
//! samples = 20
//! match_threshold = 25
//! hamming_threshold = 4
//! min_matches = 2
//! p_replace = 0.01
//! p_neighbor = 0.003
//! jitter = 8
//! lsbp_margin = 4
//!
//! [neuron]
//! tau_m = 10.0
//! resistance = 1.0
//! e_leak = -70.0
//! v_reset = -70.0
//! v_min = -70.0
//! v_threshold = -55.0
//! t_ref = 2.0
//! dt = 10.0
//!
//! [snn]
//! c = 17.5
//! substeps = 1
//! w_p2i = 8.0
//! w_syn = 1555.0
//!
//! [filter]
//! mode = "average"            # or "median"
//! width = 3
//! height = 3
//! border = "zero"             # or "replicate"
//! threshold = 128.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postfilter::FilterConfig;
use crate::snn::{NeuronParams, SynapseWeights, DEFAULT_CONVERSION};
use crate::subtraction::{BsConfig, BsMode, ConsensusParams};

/// Where frames come from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Source {
    Device(u32),
    Video(PathBuf),
    Sequence(PathBuf),
    Dataset(PathBuf),
}

impl Source {
    /// Parses `N` / `device:N`, `video:PATH`, `sequence:PATH`,
    /// `dataset:PATH`, or a bare path (a directory is an image sequence, a
    /// file is a video).
    pub fn parse(s: &str) -> Result<Source, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty source".into());
        }
        if let Ok(n) = s.parse::<u32>() {
            return Ok(Source::Device(n));
        }
        if let Some((kind, rest)) = s.split_once(':') {
            let path = PathBuf::from(rest);
            match kind {
                "device" => {
                    return rest
                        .parse()
                        .map(Source::Device)
                        .map_err(|_| format!("bad device index `{rest}`"))
                }
                "video" => return Ok(Source::Video(path)),
                "sequence" => return Ok(Source::Sequence(path)),
                "dataset" => return Ok(Source::Dataset(path)),
                _ => {}
            }
        }
        let path = PathBuf::from(s);
        Ok(if path.is_dir() {
            Source::Sequence(path)
        } else {
            Source::Video(path)
        })
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            Source::Device(_) => None,
            Source::Video(p) | Source::Sequence(p) | Source::Dataset(p) => Some(p),
        }
    }
}

impl TryFrom<String> for Source {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        Source::parse(&s)
    }
}

impl From<Source> for String {
    fn from(s: Source) -> String {
        s.to_string()
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Device(n) => write!(f, "device:{n}"),
            Source::Video(p) => write!(f, "video:{}", p.display()),
            Source::Sequence(p) => write!(f, "sequence:{}", p.display()),
            Source::Dataset(p) => write!(f, "dataset:{}", p.display()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// The `[background]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    pub mode: BsMode,
    pub diff_threshold: u8,
    pub samples: usize,
    pub match_threshold: u8,
    pub hamming_threshold: u32,
    pub min_matches: usize,
    pub p_replace: f64,
    pub p_neighbor: f64,
    pub jitter: u8,
    pub lsbp_margin: u8,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        let bs = BsConfig::default();
        let c = bs.consensus;
        BackgroundSection {
            mode: bs.mode,
            diff_threshold: bs.diff_threshold,
            samples: c.samples,
            match_threshold: c.match_threshold,
            hamming_threshold: c.hamming_threshold,
            min_matches: c.min_matches,
            p_replace: c.p_replace,
            p_neighbor: c.p_neighbor,
            jitter: c.jitter,
            lsbp_margin: c.lsbp_margin,
        }
    }
}

impl BackgroundSection {
    pub fn to_bs_config(&self) -> BsConfig {
        BsConfig {
            mode: self.mode,
            diff_threshold: self.diff_threshold,
            consensus: ConsensusParams {
                samples: self.samples,
                match_threshold: self.match_threshold,
                hamming_threshold: self.hamming_threshold,
                min_matches: self.min_matches,
                p_replace: self.p_replace,
                p_neighbor: self.p_neighbor,
                jitter: self.jitter,
                lsbp_margin: self.lsbp_margin,
            },
        }
    }
}

/// The `[snn]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnnSection {
    /// Intensity-to-current conversion constant.
    pub c: f64,
    /// Timesteps simulated per frame.
    pub substeps: usize,
    pub w_p2i: f64,
    pub w_syn: f64,
}

impl Default for SnnSection {
    fn default() -> Self {
        let w = SynapseWeights::default();
        SnnSection {
            c: DEFAULT_CONVERSION,
            substeps: 1,
            w_p2i: w.p2i,
            w_syn: w.syn,
        }
    }
}

impl SnnSection {
    pub fn weights(&self) -> SynapseWeights {
        SynapseWeights {
            p2i: self.w_p2i,
            syn: self.w_syn,
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source: Option<Source>,
    pub threads: usize,
    pub seed: u64,
    pub scale: f64,
    pub output_dir: Option<PathBuf>,
    pub dump_masks: bool,
    pub dump_layers: bool,
    pub report_formats: Vec<ReportFormat>,
    pub background: BackgroundSection,
    pub neuron: NeuronParams,
    pub snn: SnnSection,
    pub filter: FilterConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            source: None,
            threads: default_threads(),
            seed: 42,
            scale: 1.0,
            output_dir: None,
            dump_masks: false,
            dump_layers: false,
            report_formats: vec![ReportFormat::Json, ReportFormat::Csv],
            background: BackgroundSection::default(),
            neuron: NeuronParams::default(),
            snn: SnnSection::default(),
            filter: FilterConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Every invariant violation, one message per problem, naming the
    /// offending fields.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.threads == 0 {
            out.push("threads must be at least 1".into());
        }
        if !(self.scale.is_finite() && self.scale > 0.0 && self.scale <= 1.0) {
            out.push(format!("scale ({}) must lie in (0, 1]", self.scale));
        }
        out.extend(
            self.background
                .to_bs_config()
                .consensus
                .violations("background."),
        );
        out.extend(self.neuron.violations("neuron."));
        if !self.snn.c.is_finite() {
            out.push(format!("snn.c ({}) must be finite", self.snn.c));
        }
        if self.snn.substeps == 0 {
            out.push("snn.substeps must be at least 1".into());
        }
        out.extend(self.snn.weights().violations("snn.w_"));
        out.extend(self.filter.violations("filter."));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Parses TOML text without overrides or validation.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<PipelineConfig> {
        toml::from_str(text).map_err(|e| parse_error(&e, text, origin))
    }
}

fn parse_error(e: &toml::de::Error, text: &str, origin: &Path) -> Error {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    Error::ConfigParse {
        path: origin.to_path_buf(),
        line,
        column,
        message: e.message().to_string(),
    }
}

/// A `key=value` override. Dotted keys address tables
/// (`neuron.v_threshold=-50`); values are TOML literals, and anything that
/// does not parse as one is taken as a string. `source` and `output_dir`
/// are always strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl Override {
    pub fn new(key: impl Into<String>, value: impl fmt::Display) -> Self {
        Override {
            key: key.into(),
            value: value.to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Override, String> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("override `{s}` is not of the form key=value"))?;
        Ok(Override::new(k.trim(), v.trim()))
    }

    fn toml_value(&self) -> toml::Value {
        // these hold strings even when they look like numbers (`source=0`)
        if matches!(self.key.as_str(), "source" | "output_dir") {
            return toml::Value::String(self.value.trim_matches('"').to_string());
        }
        let doc = format!("v = {}", self.value);
        match doc.parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("key parsed"),
            Err(_) => toml::Value::String(self.value.clone()),
        }
    }
}

/// Reads `path` (if any), applies `overrides` in order, and validates.
pub fn load_config(path: Option<&Path>, overrides: &[Override]) -> Result<PipelineConfig> {
    let (text, origin) = match path {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    Error::NotFound(p.to_path_buf())
                } else {
                    Error::io(p, e)
                }
            })?,
            p.to_path_buf(),
        ),
        None => (String::new(), PathBuf::from("<defaults>")),
    };
    // parse once on its own so file errors carry line numbers
    let from_file = PipelineConfig::from_toml_str(&text, &origin)?;
    let cfg = if overrides.is_empty() {
        from_file
    } else {
        let mut table: toml::Table = text.parse().map_err(|e| parse_error(&e, &text, &origin))?;
        for o in overrides {
            set_dotted(&mut table, &o.key, o.toml_value())
                .map_err(|m| Error::InvalidConfig(vec![m]))?;
        }
        let merged = toml::to_string(&table).expect("table serialises");
        toml::from_str(&merged).map_err(|e| {
            Error::InvalidConfig(vec![format!(
                "after applying overrides: {}",
                e.message()
            )])
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| format!("empty override key `{key}`"))?;
    let mut cursor = table;
    for part in parts {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| format!("override `{key}`: `{part}` is not a table"))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.toml");
        std::fs::write(&p, "").unwrap();
        let cfg = load_config(Some(&p), &[]).unwrap();
        let expected = PipelineConfig {
            threads: cfg.threads,
            ..Default::default()
        };
        assert_eq!(cfg, expected);
        assert_eq!(cfg.snn.c, 17.5);
        assert_eq!(cfg.snn.w_syn, 1555.0);
        assert_eq!(cfg.background.mode, BsMode::SampleConsensus);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[snn]\nc = 10\n").unwrap();
        assert_eq!(load_config(Some(&p), &[]).unwrap().snn.c, 10.0);
        let cfg = load_config(Some(&p), &[Override::new("snn.c", 17.5)]).unwrap();
        assert_eq!(cfg.snn.c, 17.5);
    }

    #[test]
    fn threshold_below_reset_names_both_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "[neuron]\nv_threshold = -70.0\nv_reset = -70.0\n").unwrap();
        let err = load_config(Some(&p), &[]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("neuron.v_threshold") && msg.contains("neuron.v_reset"), "{msg}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("broken.toml");
        std::fs::write(&p, "seed = 1\n\n[snn]\nc = \"many\"\n").unwrap();
        match load_config(Some(&p), &[]).unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
        std::fs::write(&p, "seed = 1\nbogus = 2\n").unwrap();
        match load_config(Some(&p), &[]).unwrap_err() {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn multiple_violations_are_listed() {
        let err = load_config(
            None,
            &[
                Override::new("threads", 0),
                Override::new("filter.width", 4),
                Override::new("snn.substeps", 0),
            ],
        )
        .unwrap_err();
        match err {
            Error::InvalidConfig(v) => {
                assert_eq!(v.len(), 3, "{v:?}");
                assert!(v.iter().any(|m| m.contains("filter.width")));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn string_overrides_and_sources() {
        let cfg = load_config(
            None,
            &[
                Override::new("background.mode", "frame-diff"),
                Override::new("source", "3"),
            ],
        )
        .unwrap();
        assert_eq!(cfg.background.mode, BsMode::FrameDiff);
        assert_eq!(cfg.source, Some(Source::Device(3)));
        assert_eq!(Source::parse("dataset:/x").unwrap(), Source::Dataset("/x".into()));
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            Source::parse(dir.path().to_str().unwrap()).unwrap(),
            Source::Sequence(dir.path().to_path_buf())
        );
        assert!(Override::parse("novalue").is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        assert!(matches!(
            load_config(Some(Path::new("/no/such.toml")), &[]),
            Err(Error::NotFound(_))
        ));
    }
}

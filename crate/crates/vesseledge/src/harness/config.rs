//! Scenario configuration: a single versioned text file of
//! `key = value` pairs grouped in `[section]`s. Defaults mirror the system
//! defaults (30 s windows, boost 4 over a 3-window history, fractions
//! 0.1-0.5); everything else must be explicit. Unknown keys are errors,
//! not warnings.

use std::fmt;
use std::path::PathBuf;

use crate::wire::ChannelSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Message(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Message(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Message(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Nmea,
    Csv,
}

impl std::str::FromStr for InputFormat {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "nmea" => Ok(InputFormat::Nmea),
            "csv" => Ok(InputFormat::Csv),
            other => err(format!("unknown input format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dr,
    BwcDr,
    BwcDrA,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Dr => "DR",
            Algorithm::BwcDr => "BWC-DR",
            Algorithm::BwcDrA => "BWC-DR-A",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "dr" => Ok(Algorithm::Dr),
            "bwc-dr" => Ok(Algorithm::BwcDr),
            "bwc-dr-a" => Ok(Algorithm::BwcDrA),
            other => err(format!("unknown algorithm {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub format: InputFormat,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// Training CSV.
    pub train: Option<PathBuf>,
    /// Calibration holdout CSV; falls back to the training stream, then
    /// to the replay input.
    pub calibrate: Option<PathBuf>,
    /// Saved model to load instead of training.
    pub path: Option<PathBuf>,
    pub calibrate_quantile: f64,
    pub cell_size_deg: f64,
    pub components: usize,
    pub em_iterations: usize,
    pub min_cell_samples: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            train: None,
            calibrate: None,
            path: None,
            calibrate_quantile: 1.0,
            cell_size_deg: 0.01,
            components: 3,
            em_iterations: 25,
            min_cell_samples: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub window_seconds: u32,
    pub fractions: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub boost_factor: f64,
    pub history_windows: usize,
    pub budget_floor: usize,
    pub dr_threshold_m: f64,
    pub stale_after_s: i64,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        Self {
            window_seconds: 30,
            fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            algorithms: vec![Algorithm::BwcDr, Algorithm::BwcDrA],
            boost_factor: 4.0,
            history_windows: 3,
            budget_floor: 1,
            dr_threshold_m: 50.0,
            stale_after_s: 600,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSpec {
    pub far_edge_id: u16,
    pub near_addr: String,
    /// Status heartbeat period in windows; 0 disables intermediate
    /// snapshots (the store is always persisted at shutdown).
    pub snapshot_every_windows: u32,
}

impl Default for LiveSpec {
    fn default() -> Self {
        Self {
            far_edge_id: 0,
            near_addr: "127.0.0.1:9900".into(),
            snapshot_every_windows: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub input: InputSpec,
    pub model: ModelSpec,
    pub pipeline: PipelineSpec,
    pub channel: ChannelSpec,
    pub live: LiveSpec,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub dump_json: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn with_input(format: InputFormat, path: PathBuf) -> Self {
        Self {
            input: InputSpec { format, path },
            model: ModelSpec::default(),
            pipeline: PipelineSpec::default(),
            channel: ChannelSpec::default(),
            live: LiveSpec::default(),
            out_dir: PathBuf::from("out"),
            seed: 42,
            dump_json: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for f in &self.pipeline.fractions {
            if !(*f > 0.0 && *f <= 1.0) {
                return err(format!("fraction {f} outside (0, 1]"));
            }
        }
        if self.pipeline.fractions.is_empty() {
            return err("at least one fraction required");
        }
        if self.pipeline.algorithms.is_empty() {
            return err("at least one algorithm required");
        }
        if self.pipeline.boost_factor.is_nan() || self.pipeline.boost_factor <= 0.0 {
            return err(format!(
                "boost factor {} must be positive",
                self.pipeline.boost_factor
            ));
        }
        if self.pipeline.window_seconds == 0 {
            return err("window_seconds must be positive");
        }
        if self.channel.bitrate_bps.is_nan() || self.channel.bitrate_bps <= 0.0 {
            return err("channel bitrate must be positive");
        }
        Ok(())
    }

    /// Renders the effective configuration back to the file syntax; the
    /// manifest embeds this snapshot.
    pub fn to_text(&self) -> String {
        let fractions = self
            .pipeline
            .fractions
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let algorithms = self
            .pipeline
            .algorithms
            .iter()
            .map(|a| a.name().to_ascii_lowercase())
            .collect::<Vec<_>>()
            .join(", ");
        let mut out = format!("version = {CONFIG_VERSION}\n\n[input]\n");
        out.push_str(&format!(
            "format = {}\npath = {}\n\n",
            match self.input.format {
                InputFormat::Nmea => "nmea",
                InputFormat::Csv => "csv",
            },
            self.input.path.display()
        ));
        out.push_str("[model]\n");
        if let Some(t) = &self.model.train {
            out.push_str(&format!("train = {}\n", t.display()));
        }
        if let Some(c) = &self.model.calibrate {
            out.push_str(&format!("calibrate = {}\n", c.display()));
        }
        if let Some(p) = &self.model.path {
            out.push_str(&format!("path = {}\n", p.display()));
        }
        out.push_str(&format!(
            "calibrate_quantile = {}\ncell_size_deg = {}\ncomponents = {}\nem_iterations = {}\nmin_cell_samples = {}\n\n",
            self.model.calibrate_quantile,
            self.model.cell_size_deg,
            self.model.components,
            self.model.em_iterations,
            self.model.min_cell_samples
        ));
        out.push_str(&format!(
            "[pipeline]\nwindow_seconds = {}\nfractions = {}\nalgorithms = {}\nboost_factor = {}\nhistory_windows = {}\nbudget_floor = {}\ndr_threshold_m = {}\nstale_after_s = {}\n\n",
            self.pipeline.window_seconds,
            fractions,
            algorithms,
            self.pipeline.boost_factor,
            self.pipeline.history_windows,
            self.pipeline.budget_floor,
            self.pipeline.dr_threshold_m,
            self.pipeline.stale_after_s
        ));
        out.push_str(&format!(
            "[channel]\nbitrate_bps = {}\nlatency_s = {}\nqueue_bytes = {}\n\n",
            self.channel.bitrate_bps, self.channel.latency_s, self.channel.queue_bytes
        ));
        out.push_str(&format!(
            "[live]\nfar_edge_id = {}\nnear_addr = {}\nsnapshot_every_windows = {}\n\n",
            self.live.far_edge_id, self.live.near_addr, self.live.snapshot_every_windows
        ));
        out.push_str(&format!(
            "[run]\nout_dir = {}\nseed = {}\n",
            self.out_dir.display(),
            self.seed
        ));
        if let Some(d) = &self.dump_json {
            out.push_str(&format!("dump_json = {}\n", d.display()));
        }
        out
    }
}

/// Parses the config file text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    // defaults that must be overridden: input section is mandatory
    let mut format: Option<InputFormat> = None;
    let mut path: Option<PathBuf> = None;
    let mut config = ScenarioConfig::with_input(InputFormat::Csv, PathBuf::new());
    let mut section = String::new();
    let mut version_seen = false;

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Message(format!("line {lineno}: bad section")))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Message(format!("line {lineno}: expected key = value")))?;
        let key = key.trim();
        let value = value.trim();

        if section.is_empty() {
            if key == "version" {
                let v: u32 = value
                    .parse()
                    .map_err(|_| ConfigError::Message(format!("bad version {value:?}")))?;
                if v != CONFIG_VERSION {
                    return err(format!("unsupported config version {v}"));
                }
                version_seen = true;
                continue;
            }
            return err(format!("line {lineno}: key {key:?} outside any section"));
        }
        apply_key(&mut config, &mut format, &mut path, &section, key, value).map_err(
            |ConfigError::Message(m)| ConfigError::Message(format!("line {lineno}: {m}")),
        )?;
    }

    if !version_seen {
        return err("missing version key");
    }
    config.input = InputSpec {
        format: format.ok_or_else(|| ConfigError::Message("missing input.format".into()))?,
        path: path.ok_or_else(|| ConfigError::Message("missing input.path".into()))?,
    };
    config.validate()?;
    Ok(config)
}

/// Applies one `section.key=value` override on top of a parsed config.
pub fn apply_override(config: &mut ScenarioConfig, spec: &str) -> Result<(), ConfigError> {
    let (key_path, value) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Message(format!("override {spec:?}: expected key=value")))?;
    let (section, key) = key_path
        .trim()
        .split_once('.')
        .ok_or_else(|| ConfigError::Message(format!("override {spec:?}: expected section.key")))?;
    let mut format = Some(config.input.format);
    let mut path = Some(config.input.path.clone());
    apply_key(config, &mut format, &mut path, section, key, value.trim())?;
    config.input = InputSpec {
        format: format.unwrap(),
        path: path.unwrap(),
    };
    config.validate()
}

fn apply_key(
    config: &mut ScenarioConfig,
    format: &mut Option<InputFormat>,
    path: &mut Option<PathBuf>,
    section: &str,
    key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
        value
            .parse()
            .map_err(|_| ConfigError::Message(format!("bad value {value:?} for {key}")))
    }
    match (section, key) {
        ("input", "format") => *format = Some(value.parse()?),
        ("input", "path") => *path = Some(PathBuf::from(value)),
        ("model", "train") => config.model.train = Some(PathBuf::from(value)),
        ("model", "calibrate") => config.model.calibrate = Some(PathBuf::from(value)),
        ("model", "path") => config.model.path = Some(PathBuf::from(value)),
        ("model", "calibrate_quantile") => config.model.calibrate_quantile = num(key, value)?,
        ("model", "cell_size_deg") => config.model.cell_size_deg = num(key, value)?,
        ("model", "components") => config.model.components = num(key, value)?,
        ("model", "em_iterations") => config.model.em_iterations = num(key, value)?,
        ("model", "min_cell_samples") => config.model.min_cell_samples = num(key, value)?,
        ("pipeline", "window_seconds") => config.pipeline.window_seconds = num(key, value)?,
        ("pipeline", "fractions") => {
            let mut out = Vec::new();
            for part in value.split(',') {
                out.push(num::<f64>(key, part.trim())?);
            }
            config.pipeline.fractions = out;
        }
        ("pipeline", "algorithms") => {
            let mut out = Vec::new();
            for part in value.split(',') {
                out.push(part.trim().parse()?);
            }
            config.pipeline.algorithms = out;
        }
        ("pipeline", "boost_factor") => config.pipeline.boost_factor = num(key, value)?,
        ("pipeline", "history_windows") => config.pipeline.history_windows = num(key, value)?,
        ("pipeline", "budget_floor") => config.pipeline.budget_floor = num(key, value)?,
        ("pipeline", "dr_threshold_m") => config.pipeline.dr_threshold_m = num(key, value)?,
        ("pipeline", "stale_after_s") => config.pipeline.stale_after_s = num(key, value)?,
        ("channel", "bitrate_bps") => config.channel.bitrate_bps = num(key, value)?,
        ("channel", "latency_s") => config.channel.latency_s = num(key, value)?,
        ("channel", "queue_bytes") => config.channel.queue_bytes = num(key, value)?,
        ("live", "far_edge_id") => config.live.far_edge_id = num(key, value)?,
        ("live", "near_addr") => config.live.near_addr = value.to_string(),
        ("live", "snapshot_every_windows") => config.live.snapshot_every_windows = num(key, value)?,
        ("run", "out_dir") => config.out_dir = PathBuf::from(value),
        ("run", "seed") => config.seed = num(key, value)?,
        ("run", "dump_json") => config.dump_json = Some(PathBuf::from(value)),
        (s, k) => return err(format!("unknown key {s}.{k}")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
version = 1

[input]
format = csv
path = data/day.csv

[model]
train = data/train.csv
calibrate_quantile = 1.0

[pipeline]
window_seconds = 30
fractions = 0.1, 0.25, 0.5
algorithms = bwc-dr, bwc-dr-a
boost_factor = 4
history_windows = 3

[channel]
bitrate_bps = 9600

[run]
out_dir = out
seed = 7
";

    #[test]
    fn parses_sample() {
        let cfg = parse_config(SAMPLE).unwrap();
        assert_eq!(cfg.input.format, InputFormat::Csv);
        assert_eq!(cfg.input.path, PathBuf::from("data/day.csv"));
        assert_eq!(cfg.pipeline.fractions, vec![0.1, 0.25, 0.5]);
        assert_eq!(
            cfg.pipeline.algorithms,
            vec![Algorithm::BwcDr, Algorithm::BwcDrA]
        );
        assert_eq!(cfg.pipeline.boost_factor, 4.0);
        assert_eq!(cfg.channel.bitrate_bps, 9600.0);
        assert_eq!(cfg.seed, 7);
        // defaults fill the rest
        assert_eq!(cfg.pipeline.window_seconds, 30);
        assert_eq!(cfg.pipeline.budget_floor, 1);
        assert_eq!(cfg.live.far_edge_id, 0);
    }

    #[test]
    fn missing_version_rejected() {
        let bad = SAMPLE.replace("version = 1", "");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn wrong_version_rejected() {
        let bad = SAMPLE.replace("version = 1", "version = 9");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = format!("{SAMPLE}\n[pipeline]\nwhatever = 1\n");
        let e = parse_config(&bad).unwrap_err();
        assert!(e.to_string().contains("unknown key"), "{e}");
    }

    #[test]
    fn fraction_out_of_range_rejected() {
        let bad = SAMPLE.replace("fractions = 0.1, 0.25, 0.5", "fractions = 0.0, 0.5");
        assert!(parse_config(&bad).is_err());
        let bad = SAMPLE.replace("fractions = 0.1, 0.25, 0.5", "fractions = 1.5");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = parse_config(SAMPLE).unwrap();
        apply_override(&mut cfg, "pipeline.window_seconds=60").unwrap();
        assert_eq!(cfg.pipeline.window_seconds, 60);
        apply_override(&mut cfg, "run.seed=99").unwrap();
        assert_eq!(cfg.seed, 99);
        apply_override(&mut cfg, "pipeline.fractions=0.3,1.0").unwrap();
        assert_eq!(cfg.pipeline.fractions, vec![0.3, 1.0]);
        assert!(apply_override(&mut cfg, "nope.key=1").is_err());
        assert!(apply_override(&mut cfg, "pipeline.fractions=2.0").is_err());
    }

    #[test]
    fn snapshot_text_reparses_identically() {
        let cfg = parse_config(SAMPLE).unwrap();
        let text = cfg.to_text();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = format!("# leading comment\n{SAMPLE}\n# trailing\n\n");
        assert!(parse_config(&text).is_ok());
    }
}

//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! encoder.d0 = 16
//! encoder.position_weight = 0.25
//! anchor.mode = compact          # or: random
//! anchor.seed = 0
//! stop.threshold = 0.025
//! layer.1.t = 8
//! layer.1.k = 4                  # or: dynamic
//! layer.1.tau = 1.0
//! layer.1.projection = identity  # or: orthogonal:<seed>
//! ```
//!
//! Layers are numbered from 1 without gaps; `t`, `k` and `tau` are required
//! for each. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::affinity::Projection;
use crate::encoder::EncoderConfig;
use crate::error::{CocaError, Result};
use crate::hierarchy::LayerConfig;
use crate::sbc::{AnchorMode, StopPolicy, DEFAULT_STOP_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub layers: Vec<LayerConfig>,
    pub anchor: AnchorMode,
    /// Threshold used by layers with `k = dynamic`.
    pub stop_threshold: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            layers: Vec::new(),
            anchor: AnchorMode::Compact,
            stop_threshold: DEFAULT_STOP_THRESHOLD,
            output_dir: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| CocaError::config(format!("{key}: cannot parse {value:?}")))
}

#[derive(Default)]
struct LayerDraft {
    t: Option<usize>,
    k: Option<Option<usize>>,
    tau: Option<f64>,
    groups: Option<usize>,
    projection: Option<Projection>,
    smoothing_radius: Option<usize>,
    smoothing_strength: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut drafts: BTreeMap<usize, LayerDraft> = BTreeMap::new();
        let mut anchor_mode: Option<String> = None;
        let mut anchor_seed = 0u64;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CocaError::config(format!("line {}: expected key = value", lineno + 1)))?;
            let enc = &mut cfg.encoder;
            match key {
                "encoder.d0" => enc.d0 = parse_value(key, value)?,
                "encoder.color_weight" => enc.color_weight = parse_value(key, value)?,
                "encoder.position_weight" => enc.position_weight = parse_value(key, value)?,
                "encoder.smoothing_radius" => enc.smoothing_radius = parse_value(key, value)?,
                "encoder.smoothing_strength" => enc.smoothing_strength = parse_value(key, value)?,
                "encoder.projection_seed" => enc.projection_seed = parse_value(key, value)?,
                "anchor.mode" => anchor_mode = Some(value.to_string()),
                "anchor.seed" => anchor_seed = parse_value(key, value)?,
                "stop.threshold" => cfg.stop_threshold = parse_value(key, value)?,
                "output.dir" => cfg.output_dir = Some(PathBuf::from(value)),
                _ => {
                    let rest =
                        key.strip_prefix("layer.").ok_or_else(|| CocaError::config(format!("unknown key {key:?}")))?;
                    let (idx, field) =
                        rest.split_once('.').ok_or_else(|| CocaError::config(format!("unknown key {key:?}")))?;
                    let idx: usize = parse_value(key, idx)?;
                    let d = drafts.entry(idx).or_default();
                    match field {
                        "t" => d.t = Some(parse_value(key, value)?),
                        "k" if value == "dynamic" => d.k = Some(None),
                        "k" => d.k = Some(Some(parse_value(key, value)?)),
                        "tau" => d.tau = Some(parse_value(key, value)?),
                        "groups" => d.groups = Some(parse_value(key, value)?),
                        "projection" => d.projection = Some(parse_projection(key, value)?),
                        "smoothing_radius" => d.smoothing_radius = Some(parse_value(key, value)?),
                        "smoothing_strength" => d.smoothing_strength = Some(parse_value(key, value)?),
                        _ => return Err(CocaError::config(format!("unknown key {key:?}"))),
                    }
                }
            }
        }
        cfg.anchor = match anchor_mode.as_deref() {
            None | Some("compact") => AnchorMode::Compact,
            Some("random") => AnchorMode::Random { seed: anchor_seed },
            Some(other) => return Err(CocaError::config(format!("anchor.mode: unknown mode {other:?}"))),
        };
        for (pos, (idx, d)) in drafts.into_iter().enumerate() {
            if idx != pos + 1 {
                return Err(CocaError::config(format!("layers must be numbered 1.. without gaps; found layer {idx}")));
            }
            let missing = |f: &str| CocaError::config(format!("layer.{idx}.{f} is required"));
            let stop = match d.k.ok_or_else(|| missing("k"))? {
                Some(k) => StopPolicy::Fixed(k),
                None => StopPolicy::Dynamic { threshold: cfg.stop_threshold },
            };
            let mut layer =
                LayerConfig::new(d.t.ok_or_else(|| missing("t"))?, stop, d.tau.ok_or_else(|| missing("tau"))?);
            layer.groups = d.groups.unwrap_or(1);
            layer.projection = d.projection.unwrap_or_default();
            layer.smoothing_radius = d.smoothing_radius.unwrap_or(0);
            layer.smoothing_strength = d.smoothing_strength.unwrap_or(0.0);
            cfg.layers.push(layer);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CocaError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.layers.is_empty() {
            return Err(CocaError::config("at least one layer is required"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate().map_err(|e| CocaError::config(format!("layer {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Same configuration with a different anchor mode.
    pub fn with_anchor(&self, anchor: AnchorMode) -> Self {
        Self { anchor, ..self.clone() }
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let e = &self.encoder;
        let mut s = String::new();
        let _ = writeln!(s, "encoder.d0 = {}", e.d0);
        let _ = writeln!(s, "encoder.color_weight = {:?}", e.color_weight);
        let _ = writeln!(s, "encoder.position_weight = {:?}", e.position_weight);
        let _ = writeln!(s, "encoder.smoothing_radius = {}", e.smoothing_radius);
        let _ = writeln!(s, "encoder.smoothing_strength = {:?}", e.smoothing_strength);
        let _ = writeln!(s, "encoder.projection_seed = {}", e.projection_seed);
        match self.anchor {
            AnchorMode::Compact => s.push_str("anchor.mode = compact\n"),
            AnchorMode::Random { seed } => {
                let _ = writeln!(s, "anchor.mode = random\nanchor.seed = {seed}");
            }
        }
        let _ = writeln!(s, "stop.threshold = {:?}", self.stop_threshold);
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(s, "output.dir = {}", dir.display());
        }
        for (i, l) in self.layers.iter().enumerate() {
            let n = i + 1;
            let _ = writeln!(s, "layer.{n}.t = {}", l.t);
            match l.stop {
                StopPolicy::Fixed(k) => {
                    let _ = writeln!(s, "layer.{n}.k = {k}");
                }
                StopPolicy::Dynamic { .. } => {
                    let _ = writeln!(s, "layer.{n}.k = dynamic");
                }
            }
            let _ = writeln!(s, "layer.{n}.tau = {:?}", l.tau);
            let _ = writeln!(s, "layer.{n}.groups = {}", l.groups);
            match l.projection {
                Projection::Identity => {
                    let _ = writeln!(s, "layer.{n}.projection = identity");
                }
                Projection::SeededOrthogonal(seed) => {
                    let _ = writeln!(s, "layer.{n}.projection = orthogonal:{seed}");
                }
            }
            let _ = writeln!(s, "layer.{n}.smoothing_radius = {}", l.smoothing_radius);
            let _ = writeln!(s, "layer.{n}.smoothing_strength = {:?}", l.smoothing_strength);
        }
        s
    }
}

fn parse_projection(key: &str, value: &str) -> Result<Projection> {
    if value == "identity" {
        return Ok(Projection::Identity);
    }
    match value.strip_prefix("orthogonal:") {
        Some(seed) => Ok(Projection::SeededOrthogonal(parse_value(key, seed)?)),
        None => Err(CocaError::config(format!("{key}: expected identity or orthogonal:<seed>, got {value:?}"))),
    }
}

//! Pipeline configuration: a flat `key = value` file whose keys are exactly
//! the fields below. Command-line flags set the same keys afterwards.

use std::path::{Path, PathBuf};

use crate::adapt::{default_noise_window, DEFAULT_N_SAMPLE};
use crate::baseline::DEFAULT_LP_CUTOFF_HZ;
use crate::error::{Error, Result};
use crate::io::KeyValues;
use crate::model::RoiSpec;

pub const CONFIG_KEYS: [&str; 8] = [
    "q",
    "noise_window",
    "roi",
    "q_grid",
    "n_sample",
    "seed",
    "lp_cutoff_hz",
    "background_path",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QSetting {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSetting {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub q: QSetting,
    pub noise_window: WindowSetting,
    pub roi: Option<RoiSpec>,
    /// Explicit candidate grid; `None` selects the noise-anchored default.
    pub q_grid: Option<Vec<f64>>,
    pub n_sample: usize,
    pub seed: u64,
    pub lp_cutoff_hz: f64,
    pub background_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            q: QSetting::Auto,
            noise_window: WindowSetting::Auto,
            roi: None,
            q_grid: None,
            n_sample: DEFAULT_N_SAMPLE,
            seed: 0,
            lp_cutoff_hz: DEFAULT_LP_CUTOFF_HZ,
            background_path: None,
        }
    }
}

fn positive_f64(key: &str, v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|e| format!("{key}: {e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{key}: {v} must be finite and > 0"))
    }
}

pub fn parse_grid(v: &str) -> std::result::Result<Vec<f64>, String> {
    let grid = v
        .split(',')
        .map(|s| positive_f64("q_grid", s.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err("q_grid: empty".into());
    }
    Ok(grid)
}

impl PipelineConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let value = value.trim();
        match key {
            "q" => {
                self.q = if value == "auto" {
                    QSetting::Auto
                } else {
                    QSetting::Fixed(positive_f64("q", value)?)
                }
            }
            "noise_window" => {
                self.noise_window = if value == "auto" {
                    WindowSetting::Auto
                } else {
                    let w: usize = value.parse().map_err(|e| format!("noise_window: {e}"))?;
                    if w == 0 {
                        return Err("noise_window: must be positive".into());
                    }
                    WindowSetting::Fixed(w)
                }
            }
            "roi" => self.roi = Some(value.parse()?),
            "q_grid" => {
                self.q_grid = if value == "auto" {
                    None
                } else {
                    Some(parse_grid(value)?)
                }
            }
            "n_sample" => {
                let n: usize = value.parse().map_err(|e| format!("n_sample: {e}"))?;
                if n == 0 {
                    return Err("n_sample: must be positive".into());
                }
                self.n_sample = n;
            }
            "seed" => self.seed = value.parse().map_err(|e| format!("seed: {e}"))?,
            "lp_cutoff_hz" => self.lp_cutoff_hz = positive_f64("lp_cutoff_hz", value)?,
            "background_path" => {
                self.background_path = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            other => return Err(format!("unknown configuration key '{other}'")),
        }
        Ok(())
    }

    pub fn from_key_values(kv: &KeyValues, origin: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for key in kv.keys() {
            let value = kv.get(key).expect("key listed");
            cfg.set(key, value).map_err(|m| Error::format(origin, m))?;
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::from_key_values(&KeyValues::read(path)?, path)?;
        // relative background paths are taken relative to the config file
        if let Some(bg) = &cfg.background_path {
            if bg.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.background_path = Some(dir.join(bg));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push(
            "q",
            match self.q {
                QSetting::Auto => "auto".to_string(),
                QSetting::Fixed(q) => q.to_string(),
            },
        );
        kv.push(
            "noise_window",
            match self.noise_window {
                WindowSetting::Auto => "auto".to_string(),
                WindowSetting::Fixed(w) => w.to_string(),
            },
        );
        if let Some(roi) = self.roi {
            kv.push("roi", roi);
        }
        kv.push(
            "q_grid",
            match &self.q_grid {
                None => "auto".to_string(),
                Some(g) => g.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            },
        );
        kv.push("n_sample", self.n_sample);
        kv.push("seed", self.seed);
        kv.push("lp_cutoff_hz", self.lp_cutoff_hz);
        if let Some(bg) = &self.background_path {
            kv.push("background_path", bg.display());
        }
        kv
    }

    pub fn noise_window_for(&self, nt: usize) -> usize {
        match self.noise_window {
            WindowSetting::Auto => default_noise_window(nt),
            WindowSetting::Fixed(w) => w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_and_overrides() {
        let text = "q = auto\nnoise_window = 32\nroi = 100:200\nq_grid = 1e-6, 1e-4,1e-2\nn_sample = 8\nseed = 42\nlp_cutoff_hz = 4e6\n";
        let kv = KeyValues::parse(text, Path::new("c")).unwrap();
        let mut cfg = PipelineConfig::from_key_values(&kv, Path::new("c")).unwrap();
        assert_eq!(cfg.q, QSetting::Auto);
        assert_eq!(cfg.noise_window_for(512), 32);
        assert_eq!(cfg.roi, Some(RoiSpec::new(100, 200).unwrap()));
        assert_eq!(cfg.q_grid, Some(vec![1e-6, 1e-4, 1e-2]));
        assert_eq!((cfg.n_sample, cfg.seed, cfg.lp_cutoff_hz), (8, 42, 4e6));
        cfg.set("q", "0.003").unwrap();
        assert_eq!(cfg.q, QSetting::Fixed(0.003));
    }

    #[test]
    fn rendering_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.set("roi", "10:90").unwrap();
        cfg.set("q_grid", "0.5,0.25").unwrap();
        let kv = cfg.to_key_values();
        let back = PipelineConfig::from_key_values(&kv, Path::new("c")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.set("q", "-1").is_err());
        assert!(cfg.set("q_grid", "1e-3,0").is_err());
        assert!(cfg.set("n_sample", "0").is_err());
        assert!(cfg.set("noise_window", "0").is_err());
        assert!(cfg.set("colour", "red").is_err());
        assert!(cfg.set("roi", "9:3").is_err());
    }
}

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{ModelSize, BPS_PER_GBPS};
use crate::routing::DEFAULT_ROUNDING_TRIALS;

/// Model sizes in MB of the architectures used in the experiments.
pub const MODEL_CATALOG: [(&str, f64); 4] = [
    ("VGG16", 528.0),
    ("ResNet152", 232.0),
    ("Xception", 88.0),
    ("DenseNet121", 33.0),
];

pub fn model_size_mb(name: &str) -> Option<f64> {
    MODEL_CATALOG
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, mb)| mb)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Named(String),
    SizeMb(f64),
}

impl ModelChoice {
    pub fn megabytes(&self) -> Result<f64> {
        match self {
            ModelChoice::Named(n) => {
                model_size_mb(n).ok_or_else(|| Error::Config(format!("unknown model '{n}'")))
            }
            ModelChoice::SizeMb(mb) => Ok(*mb),
        }
    }

    pub fn size(&self) -> Result<ModelSize> {
        ModelSize::from_megabytes(self.megabytes()?).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One simulated network and round. Defaults reproduce the reference setup:
/// a 3×3 grid of edge nodes with 150 m coverage in a 500 m square, 1000
/// users, ResNet152, 1 Gb/s fronthaul and backhaul, 2 Gb/s at the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub area_m: f64,
    pub grid: (usize, usize),
    pub radius_m: f64,
    pub num_users: usize,
    pub model: ModelChoice,
    pub bfr_gbps: f64,
    pub bbk_gbps: f64,
    pub wd_gbps: f64,
    pub wu_gbps: f64,
    pub allow_direct_cloud: bool,
    pub seed: u64,
    pub trials: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_m: 500.0,
            grid: (3, 3),
            radius_m: 150.0,
            num_users: 1000,
            model: ModelChoice::Named("ResNet152".into()),
            bfr_gbps: 1.0,
            bbk_gbps: 1.0,
            wd_gbps: 2.0,
            wu_gbps: 2.0,
            allow_direct_cloud: true,
            seed: 0,
            trials: DEFAULT_ROUNDING_TRIALS,
        }
    }
}

impl ScenarioConfig {
    pub fn num_edges(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn bfr_bps(&self) -> f64 {
        self.bfr_gbps * BPS_PER_GBPS
    }

    pub fn bbk_bps(&self) -> f64 {
        self.bbk_gbps * BPS_PER_GBPS
    }

    pub fn wd_bps(&self) -> f64 {
        self.wd_gbps * BPS_PER_GBPS
    }

    pub fn wu_bps(&self) -> f64 {
        self.wu_gbps * BPS_PER_GBPS
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_m", self.area_m),
            ("radius_m", self.radius_m),
            ("bfr_gbps", self.bfr_gbps),
            ("bbk_gbps", self.bbk_gbps),
            ("wd_gbps", self.wd_gbps),
            ("wu_gbps", self.wu_gbps),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{key} must be positive, got {v}")));
            }
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(Error::Config("grid needs at least one row and column".into()));
        }
        if self.num_users == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.model.size()?;
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are skipped; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let err = |what: &str| Error::Config(format!("line {}: {key}: {what}", lineno + 1));
            let float = || value.parse::<f64>().map_err(|_| err("expected a number"));
            if seen.iter().any(|s| s == key) {
                return Err(err("repeated key"));
            }
            seen.push(key.to_string());
            match key {
                "area_m" => cfg.area_m = float()?,
                "grid" => cfg.grid = parse_grid(value).ok_or_else(|| err("expected RxC or N"))?,
                "radius_m" => cfg.radius_m = float()?,
                "K" => cfg.num_users = value.parse().map_err(|_| err("expected an integer"))?,
                "model" => cfg.model = ModelChoice::Named(value.to_string()),
                "D_mb" => cfg.model = ModelChoice::SizeMb(float()?),
                "bfr_gbps" => cfg.bfr_gbps = float()?,
                "bbk_gbps" => cfg.bbk_gbps = float()?,
                "wd_gbps" => cfg.wd_gbps = float()?,
                "wu_gbps" => cfg.wu_gbps = float()?,
                "allow_direct_cloud" => {
                    cfg.allow_direct_cloud = match value {
                        "true" | "1" | "yes" => true,
                        "false" | "0" | "no" => false,
                        _ => return Err(err("expected true or false")),
                    }
                }
                "seed" => cfg.seed = value.parse().map_err(|_| err("expected an integer"))?,
                "trials" => cfg.trials = value.parse().map_err(|_| err("expected an integer"))?,
                _ => return Err(err("unknown key")),
            }
        }
        if seen.iter().any(|s| s == "model") && seen.iter().any(|s| s == "D_mb") {
            return Err(Error::Config("set either model or D_mb, not both".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Stable text form used for scenario hashing and as a config file.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let model = match &self.model {
            ModelChoice::Named(n) => format!("model = {n}"),
            ModelChoice::SizeMb(mb) => format!("D_mb = {mb}"),
        };
        let _ = writeln!(s, "area_m = {}", self.area_m);
        let _ = writeln!(s, "grid = {}x{}", self.grid.0, self.grid.1);
        let _ = writeln!(s, "radius_m = {}", self.radius_m);
        let _ = writeln!(s, "K = {}", self.num_users);
        let _ = writeln!(s, "{model}");
        let _ = writeln!(s, "bfr_gbps = {}", self.bfr_gbps);
        let _ = writeln!(s, "bbk_gbps = {}", self.bbk_gbps);
        let _ = writeln!(s, "wd_gbps = {}", self.wd_gbps);
        let _ = writeln!(s, "wu_gbps = {}", self.wu_gbps);
        let _ = writeln!(s, "allow_direct_cloud = {}", self.allow_direct_cloud);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "trials = {}", self.trials);
        s
    }

    /// 64-bit FNV-1a of the canonical config, as 16 hex digits.
    pub fn scenario_id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_config_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

fn parse_grid(v: &str) -> Option<(usize, usize)> {
    match v.split_once(['x', 'X']) {
        Some((r, c)) => Some((r.trim().parse().ok()?, c.trim().parse().ok()?)),
        None => {
            let n: usize = v.parse().ok()?;
            Some((n, n))
        }
    }
}

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::AdversaryStrategy;
use crate::error::{Error, Result};
use crate::pipeline::Centering;
use crate::stage1::Stage1Config;
use crate::stage2::{Stage2Config, MAX_CONFIG_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1EpsSweep,
    Fig2DimMisspec,
    Fig2NoiseSweep,
    Fig2Runtime,
    Fig4Heatmap,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig1EpsSweep,
        Preset::Fig2DimMisspec,
        Preset::Fig2NoiseSweep,
        Preset::Fig2Runtime,
        Preset::Fig4Heatmap,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1EpsSweep => "fig1_eps_sweep",
            Preset::Fig2DimMisspec => "fig2_dim_misspec",
            Preset::Fig2NoiseSweep => "fig2_noise_sweep",
            Preset::Fig2Runtime => "fig2_runtime",
            Preset::Fig4Heatmap => "fig4_heatmap",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RansacPlus,
    ClassicRansac,
    /// Sees the inlier mask; a reference point, not an estimator.
    OraclePca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::RansacPlus => "ransac_plus",
            Method::ClassicRansac => "classic_ransac",
            Method::OraclePca => "oracle_pca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::RansacPlus, Method::ClassicRansac, Method::OraclePca]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

/// Classic RANSAC settings shared by every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSettings {
    /// Search dimension relative to the planted one: `r = r* + r_offset`.
    pub r_offset: i64,
    pub max_iters: usize,
    pub consensus_fraction: f64,
    /// Fixed inlier cutoff; the noise-derived default when absent.
    pub dist_threshold: Option<f64>,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        BaselineSettings {
            r_offset: 0,
            max_iters: crate::baselines::DEFAULT_MAX_ITERS,
            consensus_fraction: crate::baselines::DEFAULT_CONSENSUS_FRACTION,
            dist_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub d: usize,
    pub n: usize,
    pub r_stars: Vec<usize>,
    pub epsilons: Vec<f64>,
    /// Noise traces; the covariance is `(σ²/d)·I`.
    pub sigma2s: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub output_path: Option<PathBuf>,
    /// Common eigenvalue of the clean covariance.
    pub gamma: f64,
    pub adversary: AdversaryStrategy,
    /// Corruption fraction handed to the estimator; the cell's true ε when absent.
    pub assumed_epsilon: Option<f64>,
    pub center: Centering,
    /// Write wall-clock columns. Off makes output byte-reproducible.
    pub timings: bool,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub baseline: BaselineSettings,
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub r_star: usize,
    pub epsilon: f64,
    pub sigma2: f64,
}

impl ExperimentSpec {
    pub fn preset(preset: Preset) -> Self {
        let base = ExperimentSpec {
            preset,
            d: 100,
            n: 500,
            r_stars: vec![10],
            epsilons: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            sigma2s: vec![0.0],
            trials: 20,
            master_seed: 0,
            methods: vec![Method::RansacPlus, Method::ClassicRansac],
            output_path: None,
            gamma: 1.0,
            adversary: AdversaryStrategy::orthogonal_rank2(),
            assumed_epsilon: None,
            center: Centering::None,
            timings: true,
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            baseline: BaselineSettings::default(),
        };
        match preset {
            Preset::Fig1EpsSweep => base,
            Preset::Fig2DimMisspec => ExperimentSpec {
                epsilons: vec![0.0, 0.1, 0.2, 0.3],
                baseline: BaselineSettings {
                    r_offset: 1,
                    ..BaselineSettings::default()
                },
                ..base
            },
            Preset::Fig2NoiseSweep => ExperimentSpec {
                epsilons: vec![0.2],
                sigma2s: vec![0.0, 1e-4, 4e-4, 1.6e-3, 6.4e-3, 2.56e-2],
                ..base
            },
            Preset::Fig2Runtime => ExperimentSpec {
                d: 1000,
                r_stars: vec![5, 10, 20, 40],
                epsilons: vec![0.2],
                trials: 3,
                stage2: Stage2Config {
                    t_cap: 20_000,
                    ..Stage2Config::default()
                },
                ..base
            },
            Preset::Fig4Heatmap => ExperimentSpec {
                epsilons: vec![0.0, 0.075, 0.15, 0.225, 0.3],
                sigma2s: vec![0.0, 0.0125, 0.025, 0.0375, 0.05],
                methods: vec![Method::RansacPlus],
                ..base
            },
            Preset::Custom => ExperimentSpec {
                epsilons: vec![0.1],
                methods: vec![Method::RansacPlus],
                ..base
            },
        }
    }

    /// Grid in canonical order: `r*` outermost, then `ε`, then `σ²`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &r_star in &self.r_stars {
            for &epsilon in &self.epsilons {
                for &sigma2 in &self.sigma2s {
                    cells.push(Cell {
                        index: cells.len(),
                        r_star,
                        epsilon,
                        sigma2,
                    });
                }
            }
        }
        cells
    }

    pub fn record_count(&self) -> usize {
        self.r_stars.len() * self.epsilons.len() * self.sigma2s.len() * self.trials * self.methods.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.r_stars.is_empty() || self.epsilons.is_empty() || self.sigma2s.is_empty() {
            return bad("grids must be non-empty".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.n < 2 || self.d < 2 {
            return bad(format!("need d >= 2 and n >= 2, got d = {}, n = {}", self.d, self.n));
        }
        if let Some(&r) = self.r_stars.iter().find(|&&r| r == 0 || r >= self.d) {
            return bad(format!("r* = {r} outside 1..d"));
        }
        for &eps in self.epsilons.iter().chain(&self.assumed_epsilon) {
            if !(eps >= 0.0) {
                return bad(format!("invalid epsilon {eps}"));
            }
            if eps > MAX_CONFIG_EPSILON {
                return Err(Error::EpsilonTooLarge(eps));
            }
        }
        if let Some(&s) = self.sigma2s.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return bad(format!("invalid sigma2 {s}"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.baseline.max_iters == 0 {
            return bad("baseline max_iters must be >= 1".into());
        }
        if !(self.baseline.consensus_fraction > 0.0 && self.baseline.consensus_fraction <= 1.0) {
            return bad("baseline consensus_fraction must lie in (0, 1]".into());
        }
        self.stage1.validate()?;
        let mut stage2 = self.stage2.clone();
        stage2.epsilon = 0.0;
        stage2.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_names_roundtrip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fig9".parse::<Preset>().is_err());
    }

    #[test]
    fn preset_row_counts() {
        assert_eq!(ExperimentSpec::preset(Preset::Fig1EpsSweep).record_count(), 200);
        assert_eq!(ExperimentSpec::preset(Preset::Fig4Heatmap).record_count(), 500);
        let rt = ExperimentSpec::preset(Preset::Fig2Runtime);
        assert_eq!((rt.d, rt.n, rt.epsilons.clone()), (1000, 500, vec![0.2]));
    }

    #[test]
    fn cells_in_canonical_order() {
        let mut spec = ExperimentSpec::preset(Preset::Custom);
        spec.r_stars = vec![2, 3];
        spec.epsilons = vec![0.0, 0.1];
        spec.sigma2s = vec![0.0, 0.5];
        let cells = spec.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!((cells[1].r_star, cells[1].epsilon, cells[1].sigma2), (2, 0.0, 0.5));
        assert_eq!((cells[2].r_star, cells[2].epsilon, cells[2].sigma2), (2, 0.1, 0.0));
        assert_eq!(cells[7].index, 7);
    }

    #[test]
    fn every_preset_validates() {
        for p in Preset::ALL {
            ExperimentSpec::preset(p).validate().unwrap();
        }
        let mut spec = ExperimentSpec::preset(Preset::Custom);
        spec.epsilons = vec![0.7];
        assert!(matches!(spec.validate(), Err(Error::EpsilonTooLarge(_))));
    }
}

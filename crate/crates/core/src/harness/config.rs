//! Line-based `key = value` experiment configs.
//!
//! ```text
//! # comments start with '#'
//! [experiment]
//! preset = fig1_eps_sweep
//! epsilon = 0, 0.1, 0.2
//!
//! [stage2]
//! t_cap = 50000
//! ```
//!
//! The preset is applied first, whatever its position, and every other key
//! overrides it. Lists are comma-separated.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datagen::AdversaryStrategy;
use crate::error::{Error, Result};
use crate::pipeline::Centering;
use crate::stage1::Stage1Config;
use crate::stage2::{Stage2Config, MAX_CONFIG_EPSILON};

use super::spec::{BaselineSettings, ExperimentSpec, Method, Preset};

const SECTIONS: [&str; 4] = ["experiment", "stage1", "stage2", "baseline"];

struct Entry {
    section: &'static str,
    key: String,
    value: String,
    line: usize,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    let mut seen: HashMap<(&'static str, String), usize> = HashMap::new();
    let mut section: Option<&'static str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, format!("malformed section header '{content}'")))?
                .trim();
            section = Some(
                SECTIONS
                    .into_iter()
                    .find(|s| *s == name)
                    .ok_or_else(|| config_err(line, format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_err(line, format!("expected 'key = value', got '{content}'")));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(config_err(line, "missing key before '='"));
        }
        let Some(section) = section else {
            return Err(config_err(
                line,
                format!("key '{key}' appears before any section header"),
            ));
        };
        if let Some(first) = seen.insert((section, key.clone()), line) {
            return Err(config_err(
                line,
                format!("duplicate key '{key}' in [{section}] (lines {first} and {line})"),
            ));
        }
        entries.push(Entry {
            section,
            key,
            value,
            line,
        });
    }
    Ok(entries)
}

fn scalar<T: FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| config_err(e.line, format!("cannot parse '{}' as a value for '{}'", e.value, e.key)))
}

fn list<T: FromStr>(e: &Entry) -> Result<Vec<T>> {
    let items: Vec<&str> = e.value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(config_err(e.line, format!("empty item in list for '{}'", e.key)));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse()
                .map_err(|_| config_err(e.line, format!("cannot parse '{s}' in list for '{}'", e.key)))
        })
        .collect()
}

fn named<T: FromStr<Err = Error>>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|err: Error| config_err(e.line, err.to_string()))
}

fn list_named<T: FromStr<Err = Error>>(e: &Entry) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|err: Error| config_err(e.line, err.to_string()))
        })
        .collect()
}

fn optional<T: FromStr>(e: &Entry) -> Result<Option<T>> {
    if e.value.eq_ignore_ascii_case("none") || e.value.is_empty() {
        Ok(None)
    } else {
        scalar(e).map(Some)
    }
}

struct AdversaryParts {
    kind: String,
    rank: usize,
    scale: f64,
}

impl AdversaryParts {
    fn from(strategy: &AdversaryStrategy) -> Self {
        let (kind, rank, scale) = match strategy {
            AdversaryStrategy::None => ("none", 2, 10.0),
            AdversaryStrategy::OrthogonalLowRank { rank, scale } => ("orthogonal_low_rank", *rank, *scale),
            AdversaryStrategy::InlierMimic { scale } => ("inlier_mimic", 2, *scale),
            AdversaryStrategy::PointMass { magnitude, .. } => ("point_mass", 2, *magnitude),
        };
        AdversaryParts {
            kind: kind.into(),
            rank,
            scale,
        }
    }

    fn build(&self, line: usize) -> Result<AdversaryStrategy> {
        Ok(match self.kind.as_str() {
            "none" => AdversaryStrategy::None,
            "orthogonal_low_rank" => AdversaryStrategy::OrthogonalLowRank {
                rank: self.rank,
                scale: self.scale,
            },
            "inlier_mimic" => AdversaryStrategy::InlierMimic { scale: self.scale },
            "point_mass" => AdversaryStrategy::PointMass {
                direction: None,
                magnitude: self.scale,
            },
            other => return Err(config_err(line, format!("unknown adversary '{other}'"))),
        })
    }
}

fn apply(spec: &mut ExperimentSpec, adversary: &mut AdversaryParts, e: &Entry) -> Result<()> {
    match (e.section, e.key.as_str()) {
        ("experiment", "preset") => {}
        ("experiment", "d") => spec.d = scalar(e)?,
        ("experiment", "n") => spec.n = scalar(e)?,
        ("experiment", "r_star") => spec.r_stars = list(e)?,
        ("experiment", "epsilon") => spec.epsilons = list(e)?,
        ("experiment", "sigma2") => spec.sigma2s = list(e)?,
        ("experiment", "trials") => spec.trials = scalar(e)?,
        ("experiment", "seed") => spec.master_seed = scalar(e)?,
        ("experiment", "methods") => spec.methods = list_named::<Method>(e)?,
        ("experiment", "output") => spec.output_path = Some(PathBuf::from(&e.value)),
        ("experiment", "gamma") => spec.gamma = scalar(e)?,
        ("experiment", "adversary") => adversary.kind = e.value.clone(),
        ("experiment", "adversary_rank") => adversary.rank = scalar(e)?,
        ("experiment", "adversary_scale") => adversary.scale = scalar(e)?,
        ("experiment", "center") => {
            spec.center = match e.value.as_str() {
                "none" => Centering::None,
                "pairwise_difference" => Centering::PairwiseDifference,
                other => return Err(config_err(e.line, format!("unknown centering '{other}'"))),
            }
        }
        ("experiment", "timings") => spec.timings = scalar(e)?,
        ("stage1", "c") => spec.stage1.c = scalar(e)?,
        ("stage1", "t0") => spec.stage1.t0 = scalar(e)?,
        ("stage1", "eta_floor") => spec.stage1.eta_floor_rel = scalar(e)?,
        ("stage1", "rank_tol") => spec.stage1.rank_tol = scalar(e)?,
        ("stage1", "r_star_hint") => spec.stage1.r_star_hint = optional(e)?,
        ("stage1", "initial_b") => spec.stage1.initial_b = scalar(e)?,
        ("stage2", "c_prime") => spec.stage2.c_prime = scalar(e)?,
        ("stage2", "delta") => spec.stage2.delta = scalar(e)?,
        ("stage2", "epsilon") => {
            let eps: f64 = scalar(e)?;
            if eps > MAX_CONFIG_EPSILON {
                return Err(Error::EpsilonTooLarge(eps));
            }
            spec.assumed_epsilon = Some(eps);
        }
        ("stage2", "t_cap") => spec.stage2.t_cap = scalar(e)?,
        ("stage2", "b") => spec.stage2.b_override = optional(e)?,
        ("stage2", "normalize") => spec.stage2.normalize_spectra = scalar(e)?,
        ("baseline", "r_offset") => spec.baseline.r_offset = scalar(e)?,
        ("baseline", "max_iters") => spec.baseline.max_iters = scalar(e)?,
        ("baseline", "consensus_fraction") => spec.baseline.consensus_fraction = scalar(e)?,
        ("baseline", "dist_threshold") => spec.baseline.dist_threshold = optional(e)?,
        (section, key) => return Err(config_err(e.line, format!("unknown key '{key}' in [{section}]"))),
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let entries = tokenize(text)?;
    let preset = match entries.iter().find(|e| e.section == "experiment" && e.key == "preset") {
        Some(e) => named::<Preset>(e)?,
        None => Preset::Custom,
    };
    let mut spec = ExperimentSpec::preset(preset);
    let mut adversary = AdversaryParts::from(&spec.adversary);
    let mut adversary_line = None;
    for e in &entries {
        apply(&mut spec, &mut adversary, e)?;
        if e.section == "experiment" && e.key.starts_with("adversary") {
            adversary_line = Some(e.line);
        }
    }
    if let Some(line) = adversary_line {
        spec.adversary = adversary.build(line)?;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

/// Every accepted key with its default, for `--help`.
pub fn config_reference() -> String {
    let s1 = Stage1Config::default();
    let s2 = Stage2Config::default();
    let b = BaselineSettings::default();
    let custom = ExperimentSpec::preset(Preset::Custom);
    format!(
        "CONFIG KEYS (defaults in parentheses; the preset supplies grid defaults)\n\
         [experiment]\n  \
           preset ({})  d ({})  n ({})  r_star ({:?})  epsilon ({:?})  sigma2 ({:?})\n  \
           trials ({})  seed ({})  methods (ransac_plus | classic_ransac | oracle_pca)\n  \
           output  gamma ({})  adversary (orthogonal_low_rank | inlier_mimic | point_mass | none)\n  \
           adversary_rank (2)  adversary_scale (10)  center (none | pairwise_difference)  timings (true)\n\
         [stage1]\n  \
           c ({})  t0 ({})  eta_floor ({:e})  rank_tol ({:e})  r_star_hint (none)  initial_b ({})\n\
         [stage2]\n  \
           c_prime ({})  delta ({})  epsilon (the cell's true fraction; at most {})\n  \
           t_cap ({})  b (none)  normalize ({})\n\
         [baseline]\n  \
           r_offset ({})  max_iters ({})  consensus_fraction ({})  dist_threshold (max(floor, sqrt(tr) + 5 sqrt(norm)))",
        custom.preset,
        custom.d,
        custom.n,
        custom.r_stars,
        custom.epsilons,
        custom.sigma2s,
        custom.trials,
        custom.master_seed,
        custom.gamma,
        s1.c,
        s1.t0,
        s1.eta_floor_rel,
        s1.rank_tol,
        s1.initial_b,
        s2.c_prime,
        s2.delta,
        MAX_CONFIG_EPSILON,
        s2.t_cap,
        s2.normalize_spectra,
        b.r_offset,
        b.max_iters,
        b.consensus_fraction,
    )
}

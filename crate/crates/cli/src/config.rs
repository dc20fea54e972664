//! Flat `key = value` run configuration.
//!
//! A configuration starts from a figure preset (`fig3` unless a `figure`
//! key or a positional figure id says otherwise) and applies entries in
//! order: config file, then `--set` overrides, then `--seed`/`--trials`.
//! Later entries win. List values are comma separated.

use std::collections::BTreeMap;

use beamalign_core::channel::{ChannelSpec, DegreeRange};
use beamalign_core::codebook::Synthesis;
use beamalign_core::experiment::{
    figure_preset, format_f64, CodebookSpec, Scenario, ScheduleKind, Strategy, SweepSpec,
};

use crate::CliError;

pub const KEYS: [&str; 27] = [
    "figure",
    "strategies",
    "snr_db",
    "budgets",
    "n_tot",
    "cdf_budgets",
    "trials",
    "seed",
    "synthesis",
    "schedule",
    "channel",
    "aod_deg",
    "aoa_deg",
    "k_factor_db",
    "mean_paths",
    "tx_elements",
    "tx_sector_deg",
    "tx_levels",
    "rx_elements",
    "rx_sector_deg",
    "rx_levels",
    "level_pairs",
    "gain",
    "n_min",
    "n_max",
    "tol",
    "strategy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    SinglePath,
    LosRician,
    NlosMultipath,
}

impl ChannelKind {
    fn name(self) -> &'static str {
        match self {
            Self::SinglePath => "single_path",
            Self::LosRician => "los_rician",
            Self::NlosMultipath => "nlos_multipath",
        }
    }
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub figure: Option<String>,
    pub strategies: Vec<Strategy>,
    pub snrs_db: Vec<f64>,
    pub budgets: Vec<usize>,
    pub cdf_budgets: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub synthesis: Synthesis,
    pub schedule: ScheduleKind,
    pub channel: ChannelKind,
    pub aod_deg: (f64, f64),
    pub aoa_deg: (f64, f64),
    pub k_factor_db: f64,
    pub mean_paths: f64,
    pub tx: CodebookSpec,
    pub rx: CodebookSpec,
    pub level_pairs: usize,
    pub gain: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub tol: f64,
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid value `{value}` for `{key}`: {why}"))
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| bad(key, value, e))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| bad(key, s, e)))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(items)
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64), CliError> {
    match parse_list::<f64>(key, value)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(bad(key, value, "expected two numbers `lo,hi`")),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl Plan {
    pub fn from_figure(id: &str) -> Result<Self, CliError> {
        let p = figure_preset(id).map_err(|_| {
            CliError::Config(format!("unknown figure `{id}`"))
        })?;
        let (channel, aod, aoa, k_factor_db, mean_paths) = match p.scenario.channel {
            ChannelSpec::SinglePath { aod, aoa } => (ChannelKind::SinglePath, aod, aoa, 13.2, 1.8),
            ChannelSpec::LosRician {
                aod,
                aoa,
                k_factor_db,
            } => (ChannelKind::LosRician, aod, aoa, k_factor_db, 1.8),
            ChannelSpec::NlosMultipath {
                aod,
                aoa,
                k_factor_db,
                mean_paths,
            } => (ChannelKind::NlosMultipath, aod, aoa, k_factor_db, mean_paths),
        };
        Ok(Self {
            figure: Some(id.to_string()),
            strategies: p.strategies,
            snrs_db: p.snrs_db,
            budgets: p.budgets,
            cdf_budgets: p.cdf_budgets,
            trials: p.trials,
            seed: p.seed,
            synthesis: p.scenario.synthesis,
            schedule: p.scenario.schedule,
            channel,
            aod_deg: (aod.lo, aod.hi),
            aoa_deg: (aoa.lo, aoa.hi),
            k_factor_db,
            mean_paths,
            tx: p.scenario.tx,
            rx: p.scenario.rx,
            level_pairs: 8,
            gain: 16.0,
            n_min: 1,
            n_max: 100,
            tol: 1e-10,
        })
    }

    /// Builds a plan from ordered entries. `figure` overrides any `figure`
    /// entry.
    pub fn resolve(entries: &[(String, String)], figure: Option<&str>) -> Result<Self, CliError> {
        for (k, _) in entries {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
        }
        let id = figure.map(str::to_string).or_else(|| {
            entries
                .iter()
                .rev()
                .find(|(k, _)| k == "figure")
                .map(|(_, v)| v.trim().to_string())
        });
        let mut plan = Self::from_figure(id.as_deref().unwrap_or("fig3"))?;
        plan.figure = id;
        for (k, v) in entries {
            if k != "figure" {
                plan.set(k, v)?;
            }
        }
        plan.validate()?;
        Ok(plan)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "strategies" | "strategy" => self.strategies = parse_list(key, value)?,
            "snr_db" => self.snrs_db = parse_list(key, value)?,
            "budgets" => self.budgets = parse_list(key, value)?,
            "n_tot" => self.budgets = vec![parse_one(key, value)?],
            "cdf_budgets" => {
                self.cdf_budgets = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    parse_list(key, value)?
                }
            }
            "trials" => self.trials = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "synthesis" => self.synthesis = parse_one(key, value)?,
            "schedule" => {
                self.schedule = match value.trim() {
                    "fixed_receiver" => ScheduleKind::FixedReceiver,
                    "joint_descent" => ScheduleKind::JointDescent,
                    "first_level" => ScheduleKind::FirstLevel,
                    _ => return Err(bad(key, value, "expected fixed_receiver, joint_descent or first_level")),
                }
            }
            "channel" => {
                self.channel = match value.trim() {
                    "single_path" => ChannelKind::SinglePath,
                    "los_rician" => ChannelKind::LosRician,
                    "nlos_multipath" => ChannelKind::NlosMultipath,
                    _ => return Err(bad(key, value, "expected single_path, los_rician or nlos_multipath")),
                }
            }
            "aod_deg" => self.aod_deg = parse_pair(key, value)?,
            "aoa_deg" => self.aoa_deg = parse_pair(key, value)?,
            "k_factor_db" => self.k_factor_db = parse_one(key, value)?,
            "mean_paths" => self.mean_paths = parse_one(key, value)?,
            "tx_elements" => self.tx.num_elements = parse_one(key, value)?,
            "tx_sector_deg" => self.tx.sector_deg = parse_pair(key, value)?,
            "tx_levels" => self.tx.level_sizes = parse_list(key, value)?,
            "rx_elements" => self.rx.num_elements = parse_one(key, value)?,
            "rx_sector_deg" => self.rx.sector_deg = parse_pair(key, value)?,
            "rx_levels" => self.rx.level_sizes = parse_list(key, value)?,
            "level_pairs" => self.level_pairs = parse_one(key, value)?,
            "gain" => self.gain = parse_one(key, value)?,
            "n_min" => self.n_min = parse_one(key, value)?,
            "n_max" => self.n_max = parse_one(key, value)?,
            "tol" => self.tol = parse_one(key, value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        let err = |m: &str| Err(CliError::Config(m.to_string()));
        if self.trials == 0 {
            return err("`trials` must be at least 1");
        }
        if self.budgets.windows(2).any(|w| w[1] < w[0]) {
            return err("`budgets` must be sorted ascending");
        }
        if self.snrs_db.iter().any(|s| !s.is_finite()) {
            return err("`snr_db` values must be finite");
        }
        if self.n_min == 0 || self.n_max < self.n_min {
            return err("`n_min` must be at least 1 and not above `n_max`");
        }
        if self.mean_paths <= 0.0 || !self.mean_paths.is_finite() {
            return err("`mean_paths` must be a positive number");
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let aod = DegreeRange::new(self.aod_deg.0, self.aod_deg.1)?;
        let aoa = DegreeRange::new(self.aoa_deg.0, self.aoa_deg.1)?;
        let channel = match self.channel {
            ChannelKind::SinglePath => ChannelSpec::SinglePath { aod, aoa },
            ChannelKind::LosRician => ChannelSpec::LosRician {
                aod,
                aoa,
                k_factor_db: self.k_factor_db,
            },
            ChannelKind::NlosMultipath => ChannelSpec::NlosMultipath {
                aod,
                aoa,
                k_factor_db: self.k_factor_db,
                mean_paths: self.mean_paths,
            },
        };
        Ok(Scenario {
            tx: self.tx.clone(),
            rx: self.rx.clone(),
            synthesis: self.synthesis,
            channel,
            schedule: self.schedule,
        })
    }

    /// One sweep per strategy and SNR, strategies outermost.
    pub fn specs(&self) -> Vec<SweepSpec> {
        self.strategies
            .iter()
            .flat_map(|&strategy| {
                self.snrs_db.iter().map(move |&snr_db| SweepSpec {
                    strategy,
                    snr_db,
                    budgets: self.budgets.clone(),
                    trials: self.trials,
                    base_seed: self.seed,
                })
            })
            .collect()
    }

    /// Every key with its resolved value; feeding these back through
    /// [`Plan::resolve`] gives the same plan.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let f = |x: &f64| format_f64(*x);
        let pair = |p: (f64, f64)| format!("{},{}", f(&p.0), f(&p.1));
        let u = |x: &usize| x.to_string();
        let mut m = BTreeMap::new();
        if let Some(id) = &self.figure {
            m.insert("figure", id.clone());
        }
        m.insert("strategies", join(&self.strategies, |s| s.name().to_string()));
        m.insert("snr_db", join(&self.snrs_db, f));
        m.insert("budgets", join(&self.budgets, u));
        m.insert("cdf_budgets", join(&self.cdf_budgets, u));
        m.insert("trials", self.trials.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert(
            "synthesis",
            match self.synthesis {
                Synthesis::Ideal => "ideal",
                Synthesis::Deactivation => "deactivation",
            }
            .to_string(),
        );
        m.insert(
            "schedule",
            match self.schedule {
                ScheduleKind::FixedReceiver => "fixed_receiver",
                ScheduleKind::JointDescent => "joint_descent",
                ScheduleKind::FirstLevel => "first_level",
            }
            .to_string(),
        );
        m.insert("channel", self.channel.name().to_string());
        m.insert("aod_deg", pair(self.aod_deg));
        m.insert("aoa_deg", pair(self.aoa_deg));
        m.insert("k_factor_db", f(&self.k_factor_db));
        m.insert("mean_paths", f(&self.mean_paths));
        m.insert("tx_elements", self.tx.num_elements.to_string());
        m.insert("tx_sector_deg", pair(self.tx.sector_deg));
        m.insert("tx_levels", join(&self.tx.level_sizes, u));
        m.insert("rx_elements", self.rx.num_elements.to_string());
        m.insert("rx_sector_deg", pair(self.rx.sector_deg));
        m.insert("rx_levels", join(&self.rx.level_sizes, u));
        m.insert("level_pairs", self.level_pairs.to_string());
        m.insert("gain", f(&self.gain));
        m.insert("n_min", self.n_min.to_string());
        m.insert("n_max", self.n_max.to_string());
        m.insert("tol", f(&self.tol));
        m
    }
}

/// Reads a configuration file. Text files hold `key = value` lines with `#`
/// comments. A file starting with `{` is JSON: either a run manifest, whose
/// `config` object is used, or a flat object of keys.
pub fn parse_config_text(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    if text.trim_start().starts_with('{') {
        return parse_config_json(text, origin);
    }
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{origin}:{}: expected `key = value`, got `{line}`", i + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_config_json(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{origin}: invalid JSON: {e}")))?;
    let obj = match value.get("config") {
        Some(c) => c,
        None => &value,
    };
    let map = obj
        .as_object()
        .ok_or_else(|| CliError::Config(format!("{origin}: expected a JSON object")))?;
    map.iter()
        .map(|(k, v)| {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => {
                    return Err(CliError::Config(format!(
                        "{origin}: unsupported value {other} for `{k}`"
                    )))
                }
            };
            Ok((k.clone(), s))
        })
        .collect()
}

/// Splits a `--set` argument.
pub fn parse_override(arg: &str) -> Result<(String, String), CliError> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Config(format!("override `{arg}` is not of the form key=value")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn entries_round_trip() {
        for id in ["fig2", "fig3", "fig5", "fig7"] {
            let plan = Plan::resolve(&entries(&[("trials", "17"), ("snr_db", "-7.3")]), Some(id)).unwrap();
            let echo: Vec<(String, String)> = plan
                .entries()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
            let back = Plan::resolve(&echo, None).unwrap();
            assert_eq!(plan, back);
        }
    }

    #[test]
    fn later_entries_win() {
        let plan = Plan::resolve(
            &entries(&[("figure", "fig4"), ("n_tot", "640"), ("budgets", "16,32"), ("trials", "5")]),
            None,
        )
        .unwrap();
        assert_eq!(plan.budgets, vec![16, 32]);
        assert_eq!(plan.channel, ChannelKind::LosRician);
        assert_eq!(plan.trials, 5);
    }

    #[test]
    fn errors_name_the_token() {
        let e = Plan::resolve(&entries(&[("bogus", "1")]), None).unwrap_err();
        assert!(e.to_string().contains("bogus"));
        let e = Plan::resolve(&entries(&[("trials", "many")]), None).unwrap_err();
        assert!(e.to_string().contains("many"));
        let e = Plan::resolve(&[], Some("fig9")).unwrap_err();
        assert!(e.to_string().contains("fig9"));
        assert!(parse_override("snr_db").is_err());
    }

    #[test]
    fn text_and_json_configs() {
        let t = parse_config_text("# run\nfigure = fig6\nsnr_db=-15 # panel a\n\n", "cfg").unwrap();
        assert_eq!(t, entries(&[("figure", "fig6"), ("snr_db", "-15")]));
        let j = parse_config_text(r#"{"config": {"trials": 10, "budgets": [16, 32]}}"#, "m.json").unwrap();
        assert_eq!(j, entries(&[("budgets", "16,32"), ("trials", "10")]));
        assert!(parse_config_text("no equals sign", "cfg").unwrap_err().to_string().contains("cfg:1"));
    }
}

//! Run configuration: a flat dotted-key text format.
//!
//! The grammar is one `key = value` pair per line; `#` starts a comment;
//! blank lines are ignored. Keys are dotted paths (`pps.c3`,
//! `scenario.k_sigma`). Unknown keys are hard errors, missing keys keep
//! their defaults, so a config file only needs the values an experiment
//! changes. This makes parameter sweeps trivially diffable.

use std::path::PathBuf;

use thiserror::Error;

use crate::fem::{NewtonConfig, RegionTable};
use crate::material::{GrowthMode, ModelOptions, RegionParams};
use crate::mesh::{MeshConfig, Region};
use crate::protocol::ScenarioSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("key `{key}`: {constraint}")]
    Validation { key: String, constraint: String },
}

/// Everything one simulation run needs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub regions: RegionTable,
    pub scenario: ScenarioSpec,
    pub newton: NewtonConfig,
    pub opts: ModelOptions,
    pub out_dir: PathBuf,
    /// VTK snapshot cadence in days; 0 disables snapshots.
    pub snapshot_every_days: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshConfig::default(),
            regions: RegionTable::defaults(),
            scenario: ScenarioSpec::preset(1),
            newton: NewtonConfig::default(),
            opts: ModelOptions::default(),
            out_dir: PathBuf::from("out"),
            snapshot_every_days: 0.0,
        }
    }
}

impl RunConfig {
    /// Default configuration with one of the three scenario presets.
    pub fn for_scenario(id: u8) -> Self {
        RunConfig {
            scenario: ScenarioSpec::preset(id),
            ..RunConfig::default()
        }
    }

    /// Parse a config document on top of `self` (later keys win).
    pub fn apply(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: stripped.to_string(),
            })?;
            self.set(key.trim(), value.trim(), line)?;
        }
        self.validate()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.apply(text)?;
        Ok(config)
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            message,
        };
        let f = || -> Result<f64, ConfigError> {
            value.parse().map_err(|e| bad(format!("not a number: {e}")))
        };
        let n = || -> Result<usize, ConfigError> {
            value.parse().map_err(|e| bad(format!("not an integer: {e}")))
        };
        let b = || -> Result<bool, ConfigError> {
            value.parse().map_err(|_| bad("expected true or false".into()))
        };
        match key {
            "mesh.inner_radius_m" => self.mesh.inner_radius = f()?,
            "mesh.thickness_m" => self.mesh.thickness = f()?,
            "mesh.sector_deg" => self.mesh.sector_deg = f()?,
            "mesh.lc_boundary_deg" => self.mesh.lc_boundary_deg = f()?,
            "mesh.pps_boundary_deg" => self.mesh.pps_boundary_deg = f()?,
            "mesh.divisions_lc" => self.mesh.divisions[0] = n()?,
            "mesh.divisions_pps" => self.mesh.divisions[1] = n()?,
            "mesh.divisions_ps" => self.mesh.divisions[2] = n()?,
            "mesh.layers" => self.mesh.layers = n()?,
            "scenario.k_sigma" => self.scenario.k_sigma = f()?,
            "scenario.growth_mode" => {
                self.scenario.growth_mode = match value {
                    "transmural" => GrowthMode::Transmural,
                    "mass_density" => GrowthMode::MassDensity,
                    other => {
                        return Err(bad(format!(
                            "unknown growth mode `{other}` (transmural | mass_density)"
                        )))
                    }
                }
            }
            "scenario.duration_days" => self.scenario.duration_days = f()?,
            "scenario.dt_days" => self.scenario.dt_days = f()?,
            "scenario.weakening_factor" => self.scenario.weakening_factor = f()?,
            "scenario.weakened_regions" => {
                self.scenario.weakened_regions = parse_regions(value).map_err(bad)?
            }
            "scenario.gr_regions" => {
                self.scenario.gr_regions = parse_regions(value).map_err(bad)?
            }
            "scenario.output_every_days" => self.scenario.output_every_days = f()?,
            "solver.tol_r" => self.newton.tol_r = f()?,
            "solver.tol_u" => self.newton.tol_u = f()?,
            "solver.max_iterations" => self.newton.max_iterations = n()?,
            "solver.max_halvings" => self.newton.max_halvings = n()?,
            "model.eq12_sign" => {
                let s = f()?;
                if s != 1.0 && s != -1.0 {
                    return Err(bad("must be 1 or -1".into()));
                }
                self.opts.eq12_sign = s;
            }
            "model.sigma_h_mass_specific" => self.opts.sigma_h_mass_specific = b()?,
            "model.tension_gate" => self.opts.tension_gate = b()?,
            "output.dir" => self.out_dir = PathBuf::from(value),
            "output.snapshot_every_days" => self.snapshot_every_days = f()?,
            _ => {
                if let Some((region, field)) = key.split_once('.') {
                    let params = match region {
                        "lc" => &mut self.regions.lc,
                        "pps" => &mut self.regions.pps,
                        "ps" => &mut self.regions.ps,
                        _ => {
                            return Err(ConfigError::UnknownKey {
                                line,
                                key: key.to_string(),
                            })
                        }
                    };
                    set_region_field(params, field, value)
                        .map_err(|message| match message {
                            SetFieldError::Unknown => ConfigError::UnknownKey {
                                line,
                                key: key.to_string(),
                            },
                            SetFieldError::Bad(message) => bad(message),
                        })?;
                } else {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mesh.validate().map_err(|e| ConfigError::Validation {
            key: "mesh".into(),
            constraint: e.to_string(),
        })?;
        for (name, params) in [
            ("lc", &self.regions.lc),
            ("pps", &self.regions.pps),
            ("ps", &self.regions.ps),
        ] {
            params.validate().map_err(|e| ConfigError::Validation {
                key: name.into(),
                constraint: e.to_string(),
            })?;
        }
        self.scenario
            .validate()
            .map_err(|e| ConfigError::Validation {
                key: "scenario".into(),
                constraint: e.to_string(),
            })?;
        if self.snapshot_every_days < 0.0 {
            return Err(ConfigError::Validation {
                key: "output.snapshot_every_days".into(),
                constraint: "must be >= 0".into(),
            });
        }
        Ok(())
    }

    /// Serialize the full effective configuration as a parseable document.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("mesh.inner_radius_m", fmt_f64(self.mesh.inner_radius));
        kv("mesh.thickness_m", fmt_f64(self.mesh.thickness));
        kv("mesh.sector_deg", fmt_f64(self.mesh.sector_deg));
        kv("mesh.lc_boundary_deg", fmt_f64(self.mesh.lc_boundary_deg));
        kv("mesh.pps_boundary_deg", fmt_f64(self.mesh.pps_boundary_deg));
        kv("mesh.divisions_lc", self.mesh.divisions[0].to_string());
        kv("mesh.divisions_pps", self.mesh.divisions[1].to_string());
        kv("mesh.divisions_ps", self.mesh.divisions[2].to_string());
        kv("mesh.layers", self.mesh.layers.to_string());
        for (name, p) in [
            ("lc", &self.regions.lc),
            ("pps", &self.regions.pps),
            ("ps", &self.regions.ps),
        ] {
            kv(&format!("{name}.c1"), fmt_f64(p.c1));
            kv(&format!("{name}.bulk_k"), fmt_f64(p.bulk_k));
            kv(&format!("{name}.c3"), fmt_f64(p.c3));
            kv(&format!("{name}.c4"), fmt_f64(p.c4));
            kv(&format!("{name}.rho0_m"), fmt_f64(p.rho0_m));
            kv(&format!("{name}.rho0_fm"), fmt_f64(p.rho0_fm0));
            kv(&format!("{name}.rho0_fc"), fmt_f64(p.rho0_fc0));
            kv(&format!("{name}.turnover_days"), fmt_f64(p.turnover_days));
            kv(&format!("{name}.lambda_h"), fmt_f64(p.lambda_h));
        }
        kv("scenario.k_sigma", fmt_f64(self.scenario.k_sigma));
        kv(
            "scenario.growth_mode",
            match self.scenario.growth_mode {
                GrowthMode::Transmural => "transmural".into(),
                GrowthMode::MassDensity => "mass_density".into(),
            },
        );
        kv(
            "scenario.duration_days",
            fmt_f64(self.scenario.duration_days),
        );
        kv("scenario.dt_days", fmt_f64(self.scenario.dt_days));
        kv(
            "scenario.weakening_factor",
            fmt_f64(self.scenario.weakening_factor),
        );
        kv(
            "scenario.weakened_regions",
            fmt_regions(&self.scenario.weakened_regions),
        );
        kv("scenario.gr_regions", fmt_regions(&self.scenario.gr_regions));
        kv(
            "scenario.output_every_days",
            fmt_f64(self.scenario.output_every_days),
        );
        kv("solver.tol_r", fmt_f64(self.newton.tol_r));
        kv("solver.tol_u", fmt_f64(self.newton.tol_u));
        kv(
            "solver.max_iterations",
            self.newton.max_iterations.to_string(),
        );
        kv("solver.max_halvings", self.newton.max_halvings.to_string());
        kv("model.eq12_sign", fmt_f64(self.opts.eq12_sign));
        kv(
            "model.sigma_h_mass_specific",
            self.opts.sigma_h_mass_specific.to_string(),
        );
        kv("model.tension_gate", self.opts.tension_gate.to_string());
        kv("output.dir", self.out_dir.display().to_string());
        kv(
            "output.snapshot_every_days",
            fmt_f64(self.snapshot_every_days),
        );
        out
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{v}")
}

fn fmt_regions(regions: &[Region]) -> String {
    regions
        .iter()
        .map(|r| match r {
            Region::Lc => "lc",
            Region::Pps => "pps",
            Region::Ps => "ps",
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_regions(value: &str) -> Result<Vec<Region>, String> {
    value
        .split(',')
        .map(|s| match s.trim() {
            "lc" => Ok(Region::Lc),
            "pps" => Ok(Region::Pps),
            "ps" => Ok(Region::Ps),
            other => Err(format!("unknown region `{other}` (lc | pps | ps)")),
        })
        .collect()
}

enum SetFieldError {
    Unknown,
    Bad(String),
}

fn set_region_field(
    params: &mut RegionParams,
    field: &str,
    value: &str,
) -> Result<(), SetFieldError> {
    let v: f64 = value
        .parse()
        .map_err(|e| SetFieldError::Bad(format!("not a number: {e}")))?;
    match field {
        "c1" => params.c1 = v,
        "bulk_k" => params.bulk_k = v,
        "c3" => params.c3 = v,
        "c4" => params.c4 = v,
        "rho0_m" => params.rho0_m = v,
        "rho0_fm" => params.rho0_fm0 = v,
        "rho0_fc" => params.rho0_fc0 = v,
        "turnover_days" => params.turnover_days = v,
        "lambda_h" => params.lambda_h = v,
        _ => return Err(SetFieldError::Unknown),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_table_defaults() {
        let config = RunConfig::parse("").unwrap();
        assert_eq!(config.scenario.k_sigma, 2e-4);
        assert_eq!(config.scenario.growth_mode, GrowthMode::Transmural);
        assert_eq!(config.regions.pps.c1, 10.0);
        assert_eq!(config.regions.pps.c3, 360.0);
        assert_eq!(config.regions.lc.rho0_fm0, 450.0);
        assert_eq!(config.mesh.layers, 30);
    }

    #[test]
    fn defaults_match_published_parameter_table() {
        // (key, value) fixture transcribed from the parameter table
        let fixture = [
            ("lc.c1", 5.0),
            ("lc.bulk_k", 174.0),
            ("lc.c3", 180.0),
            ("lc.c4", 11.0),
            ("lc.rho0_m", 500.0),
            ("lc.rho0_fm", 450.0),
            ("lc.rho0_fc", 50.0),
            ("lc.turnover_days", 100.0),
            ("lc.lambda_h", 1.01),
            ("pps.c1", 10.0),
            ("pps.bulk_k", 348.0),
            ("pps.c3", 360.0),
            ("pps.c4", 11.0),
            ("pps.rho0_m", 500.0),
            ("pps.rho0_fm", 50.0),
            ("pps.rho0_fc", 450.0),
            ("pps.turnover_days", 100.0),
            ("pps.lambda_h", 1.01),
            ("ps.c1", 10.0),
            ("ps.bulk_k", 348.0),
            ("ps.c3", 360.0),
            ("ps.c4", 11.0),
            ("ps.rho0_m", 500.0),
            ("ps.rho0_fm", 250.0),
            ("ps.rho0_fc", 250.0),
            ("ps.turnover_days", 100.0),
            ("ps.lambda_h", 1.01),
        ];
        let doc = RunConfig::default().to_document();
        for (key, value) in fixture {
            let line = doc
                .lines()
                .find(|l| l.starts_with(&format!("{key} = ")))
                .unwrap_or_else(|| panic!("missing key {key}"));
            let got: f64 = line.split(" = ").nth(1).unwrap().parse().unwrap();
            assert_eq!(got, value, "{key}");
        }
    }

    #[test]
    fn defaults_round_trip() {
        let doc = RunConfig::default().to_document();
        let reparsed = RunConfig::parse(&doc).unwrap();
        assert_eq!(doc, reparsed.to_document());
    }

    #[test]
    fn scenario_3_equivalent_from_keys() {
        let config = RunConfig::parse(
            "scenario.k_sigma = 2e-3\nscenario.growth_mode = mass_density\n",
        )
        .unwrap();
        let preset = ScenarioSpec::preset(3);
        assert_eq!(config.scenario.k_sigma, preset.k_sigma);
        assert_eq!(config.scenario.growth_mode, preset.growth_mode);
    }

    #[test]
    fn unknown_key_is_hard_error_with_line() {
        let err = RunConfig::parse("\n# comment\npps.c9 = 4\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 3);
                assert_eq!(key, "pps.c9");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn negative_c4_fails_validation() {
        let err = RunConfig::parse("pps.c4 = -1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { .. }), "{err}");
    }

    #[test]
    fn syntax_and_value_errors_carry_line_numbers() {
        match RunConfig::parse("pps.c1\n").unwrap_err() {
            ConfigError::Syntax { line: 1, .. } => {}
            other => panic!("wrong error: {other}"),
        }
        match RunConfig::parse("\npps.c1 = soft\n").unwrap_err() {
            ConfigError::BadValue { line: 2, .. } => {}
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn comments_and_overrides() {
        let config = RunConfig::parse(
            "pps.c1 = 7 # inline comment\npps.c1 = 8\nmesh.layers = 4\n",
        )
        .unwrap();
        assert_eq!(config.regions.pps.c1, 8.0);
        assert_eq!(config.mesh.layers, 4);
    }
}

//! Run configuration: flat `[section] key = value` text, experiment presets,
//! and the mapping onto `ProblemSpec`/`CharGrid` parameters.
//!
//! The format is line-oriented and diffable on purpose: every preset
//! serializes to the full key set, `parse(serialize(c)) == c`, and parse
//! errors carry the offending line or key.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::background::{
    foliation_radius, BackgroundFamily, BackgroundSpec, HCoeffFamily, LCoeffFamily, LCondition,
    WeakWaveParams,
};
use crate::coeffs::CoeffTensor;
use crate::solver::{InitialData, ProblemSpec, RadialProfile};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing required key [{section}] {key}")]
    Missing { section: String, key: String },
    #[error("key {key}: {message}")]
    BadValue { key: String, message: String },
    #[error("cannot serialize: {0}")]
    Unserializable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Freewave,
    Nullform,
    JohnBlowup,
    Stability,
    LinearMode,
    Picard,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Freewave,
        Preset::Nullform,
        Preset::JohnBlowup,
        Preset::Stability,
        Preset::LinearMode,
        Preset::Picard,
        Preset::Custom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Freewave => "freewave",
            Preset::Nullform => "nullform",
            Preset::JohnBlowup => "john_blowup",
            Preset::Stability => "stability",
            Preset::LinearMode => "linear_mode",
            Preset::Picard => "picard",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|p| p.name() == s)
    }
}

/// Evolution vs Picard-iteration driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMode {
    Evolve,
    Picard { n_max: usize, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub t_max: f64,
    pub h: f64,
    /// None = auto: R resolves to t0 + R0 from the weak-wave constants
    pub r_match: Option<f64>,
    pub ell: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// spacing of diagnostic times τ; must be a multiple of 2h to land on
    /// lattice diagonals
    pub tau_stride: f64,
    /// p exponents for the weighted-flux columns and identity checks
    pub p_list: Vec<f64>,
    /// run the lemma-suite checks at every diagnostic time
    pub checks: bool,
    /// decay-rate parameter α used by the weighted diagnostics
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub mode: RunMode,
    pub problem: ProblemSpec,
    pub grid: GridConfig,
    pub diagnostics: Diagnostics,
    pub output_dir: String,
    pub seed: u64,
}

fn bump_data() -> InitialData {
    InitialData {
        phi0: RadialProfile::Bump { amp: 1.0, power: 4 },
        phi1: RadialProfile::Zero,
        r0: 2.0,
    }
}

impl RunConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let base = RunConfig {
            preset,
            mode: RunMode::Evolve,
            problem: ProblemSpec::linear(bump_data(), 1.0),
            grid: GridConfig { t_max: 50.0, h: 0.05, r_match: None, ell: 0 },
            diagnostics: Diagnostics {
                tau_stride: 1.0,
                p_list: vec![1.0, 1.5],
                checks: true,
                alpha: 0.25,
            },
            output_dir: "out".into(),
            seed: 7,
        };
        match preset {
            Preset::Freewave | Preset::Custom | Preset::LinearMode => {
                let mut c = base;
                if preset == Preset::LinearMode {
                    c.grid.ell = 1;
                }
                c
            }
            Preset::Nullform => {
                let mut c = base;
                c.problem.a = CoeffTensor::q0();
                c.problem.epsilon = 1e-3;
                c.grid = GridConfig { t_max: 200.0, h: 0.02, r_match: None, ell: 0 };
                c.diagnostics.tau_stride = 2.0;
                c
            }
            Preset::JohnBlowup => {
                let mut c = base;
                c.problem.a = CoeffTensor::e00();
                c.problem.epsilon = 5.0;
                // positive velocity bump: the forcing first damps, then the
                // dispersed wave feeds the quadratic growth and the run
                // diverges near t* ~ 1.8 — while the identical data under a
                // null form stay global (e^phi linearizes that case to a
                // free wave 1 + chi with chi >= 0)
                c.problem.data = InitialData {
                    phi0: RadialProfile::Zero,
                    phi1: RadialProfile::Bump { amp: 1.0, power: 2 },
                    r0: 2.0,
                };
                c.grid = GridConfig { t_max: 4.0, h: 0.02, r_match: Some(2.0), ell: 0 };
                c.diagnostics.checks = false;
                c
            }
            Preset::Stability => {
                let mut c = base;
                c.problem.a = CoeffTensor::q0();
                c.problem.b = CoeffTensor::q0().scale(-2.0);
                c.problem.epsilon = 1e-3;
                c.problem.background = BackgroundSpec {
                    family: BackgroundFamily::FreeWave { amp: 0.5 },
                    // constants verified against the closed form: sup of the
                    // commuted gradients is just under 1, so C0 = 2 leaves a
                    // factor-2 margin and (1+t0)^α δα ≥ C0 holds
                    weak_wave: WeakWaveParams {
                        delta: 8.0,
                        alpha: 0.25,
                        t0: 10.0,
                        r1: 2.0,
                        c0: 2.0,
                    },
                    l_family: LCoeffFamily::None,
                    l_condition: LCondition::Lcond1,
                    h_family: HCoeffFamily::None,
                };
                c.grid = GridConfig { t_max: 200.0, h: 0.02, r_match: None, ell: 0 };
                c.diagnostics.tau_stride = 2.0;
                c
            }
            Preset::Picard => {
                let mut c = base;
                c.problem.a = CoeffTensor::q0();
                c.problem.epsilon = 1e-3;
                c.grid = GridConfig { t_max: 50.0, h: 0.04, r_match: None, ell: 0 };
                c.mode = RunMode::Picard { n_max: 10, tol: 1e-13 };
                c
            }
        }
    }

    /// The matching radius: explicit, or t0 + R0 in auto mode.
    pub fn r_match(&self) -> f64 {
        self.grid
            .r_match
            .unwrap_or_else(|| foliation_radius(&self.problem.background.weak_wave, self.problem.data.r0))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = parse_keyvals(text)?;
        let preset_val = map
            .get("run.preset")
            .ok_or_else(|| ConfigError::Missing { section: "run".into(), key: "preset".into() })?;
        let preset = Preset::parse(&preset_val.0).ok_or_else(|| ConfigError::Parse {
            line: preset_val.1,
            message: format!("unknown preset `{}`", preset_val.0),
        })?;

        if preset == Preset::Custom {
            for (section, key) in
                [("problem", "epsilon"), ("grid", "T"), ("grid", "h"), ("diagnostics", "alpha")]
            {
                if !map.contains_key(&format!("{section}.{key}")) {
                    return Err(ConfigError::Missing {
                        section: section.into(),
                        key: key.into(),
                    });
                }
            }
        }

        let mut c = RunConfig::for_preset(preset);
        for (full_key, (value, line)) in &map {
            apply_key(&mut c, full_key, value, *line)?;
        }
        Ok(c)
    }

    pub fn serialize(&self) -> Result<String, ConfigError> {
        let p = &self.problem;
        let bg = &p.background;
        let (mode, picard_keys) = match self.mode {
            RunMode::Evolve => ("evolve".to_string(), String::new()),
            RunMode::Picard { n_max, tol } => {
                ("picard".to_string(), format!("picard_n_max = {n_max}\npicard_tol = {tol}\n"))
            }
        };
        let out = format!(
            "[run]\n\
             preset = {preset}\n\
             mode = {mode}\n\
             {picard_keys}\
             output_dir = {output_dir}\n\
             seed = {seed}\n\
             \n[problem]\n\
             a = {a}\n\
             b = {b}\n\
             epsilon = {eps}\n\
             cubic = {cubic}\n\
             \n[data]\n\
             phi0 = {phi0}\n\
             phi1 = {phi1}\n\
             r0 = {r0}\n\
             \n[background]\n\
             family = {family}\n\
             l = {l}\n\
             l_condition = {lcond}\n\
             h_coeff = {hc}\n\
             delta = {delta}\n\
             alpha = {bga}\n\
             t0 = {t0}\n\
             r1 = {r1}\n\
             c0 = {c0}\n\
             \n[grid]\n\
             T = {t_max}\n\
             h = {h}\n\
             R = {r}\n\
             ell = {ell}\n\
             \n[diagnostics]\n\
             tau_stride = {stride}\n\
             p_list = {plist}\n\
             checks = {checks}\n\
             alpha = {alpha}\n",
            preset = self.preset.name(),
            output_dir = self.output_dir,
            seed = self.seed,
            a = show_tensor(&p.a),
            b = show_tensor(&p.b),
            eps = p.epsilon,
            cubic = p.cubic_coefficient,
            phi0 = show_profile(&p.data.phi0)?,
            phi1 = show_profile(&p.data.phi1)?,
            r0 = p.data.r0,
            family = show_family(&bg.family)?,
            l = match &bg.l_family {
                LCoeffFamily::None => "none".to_string(),
                LCoeffFamily::Power { amplitude, exponent } => format!("power:{amplitude},{exponent}"),
            },
            lcond = match bg.l_condition {
                LCondition::Lcond1 => "lcond1",
                LCondition::Lcond2 => "lcond2",
            },
            hc = match &bg.h_family {
                HCoeffFamily::None => "none".to_string(),
                HCoeffFamily::Power { amplitude, exponent } => format!("power:{amplitude},{exponent}"),
            },
            delta = bg.weak_wave.delta,
            bga = bg.weak_wave.alpha,
            t0 = bg.weak_wave.t0,
            r1 = bg.weak_wave.r1,
            c0 = bg.weak_wave.c0,
            t_max = self.grid.t_max,
            h = self.grid.h,
            r = match self.grid.r_match {
                None => "auto".to_string(),
                Some(r) => format!("{r}"),
            },
            ell = self.grid.ell,
            stride = self.diagnostics.tau_stride,
            plist = self
                .diagnostics
                .p_list
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(","),
            checks = if self.diagnostics.checks { "on" } else { "off" },
            alpha = self.diagnostics.alpha,
        );
        Ok(out)
    }
}

type KeyMap = BTreeMap<String, (String, usize)>;

fn parse_keyvals(text: &str) -> Result<KeyMap, ConfigError> {
    let mut map = KeyMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("unterminated section header `{s}`"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("expected `key = value`, got `{s}`"),
        })?;
        if section.is_empty() {
            return Err(ConfigError::Parse {
                line,
                message: "key outside any [section]".into(),
            });
        }
        let full = format!("{section}.{}", key.trim());
        if map.insert(full.clone(), (value.trim().to_string(), line)).is_some() {
            return Err(ConfigError::Parse { line, message: format!("duplicate key `{full}`") });
        }
    }
    Ok(map)
}

fn num(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("key `{key}`: expected a number, got `{value}`"),
    })
}

fn parse_args(key: &str, rest: &str, n: usize, line: usize) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = rest.split(',').collect();
    if parts.len() != n {
        return Err(ConfigError::Parse {
            line,
            message: format!("key `{key}`: expected {n} comma-separated numbers, got `{rest}`"),
        });
    }
    parts.iter().map(|p| num(key, p.trim(), line)).collect()
}

fn parse_profile(key: &str, value: &str, line: usize) -> Result<RadialProfile, ConfigError> {
    if value == "zero" {
        return Ok(RadialProfile::Zero);
    }
    if let Some(rest) = value.strip_prefix("bump:") {
        let a = parse_args(key, rest, 2, line)?;
        if a[1] < 1.0 || a[1].fract() != 0.0 {
            return Err(ConfigError::Parse {
                line,
                message: format!("key `{key}`: bump power must be a positive integer"),
            });
        }
        return Ok(RadialProfile::Bump { amp: a[0], power: a[1] as u32 });
    }
    if let Some(rest) = value.strip_prefix("freewave_velocity:") {
        let a = parse_args(key, rest, 2, line)?;
        return Ok(RadialProfile::FreeWaveVelocity { amp: a[0], t_off: a[1] });
    }
    if let Some(rest) = value.strip_prefix("freewave:") {
        let a = parse_args(key, rest, 2, line)?;
        return Ok(RadialProfile::FreeWaveField { amp: a[0], t_off: a[1] });
    }
    Err(ConfigError::Parse {
        line,
        message: format!("key `{key}`: unknown profile `{value}`"),
    })
}

fn show_profile(p: &RadialProfile) -> Result<String, ConfigError> {
    Ok(match p {
        RadialProfile::Zero => "zero".into(),
        RadialProfile::Bump { amp, power } => format!("bump:{amp},{power}"),
        RadialProfile::FreeWaveField { amp, t_off } => format!("freewave:{amp},{t_off}"),
        RadialProfile::FreeWaveVelocity { amp, t_off } => format!("freewave_velocity:{amp},{t_off}"),
        RadialProfile::Sampled { .. } => {
            return Err(ConfigError::Unserializable("sampled data profiles".into()))
        }
    })
}

fn show_family(f: &BackgroundFamily) -> Result<String, ConfigError> {
    Ok(match f {
        BackgroundFamily::None => "none".into(),
        BackgroundFamily::StaticProfile { amplitude, exponent } => {
            format!("static:{amplitude},{exponent}")
        }
        BackgroundFamily::FreeWave { amp } => format!("freewave:{amp}"),
        BackgroundFamily::CustomTable(_) => {
            return Err(ConfigError::Unserializable("custom background tables".into()))
        }
    })
}

fn show_tensor(t: &CoeffTensor) -> String {
    if *t == CoeffTensor::zero() {
        "zero".into()
    } else if *t == CoeffTensor::q0() {
        "q0".into()
    } else if *t == CoeffTensor::e00() {
        "e00".into()
    } else {
        t.to_row_major_string()
    }
}

fn parse_tensor(key: &str, value: &str, line: usize) -> Result<CoeffTensor, ConfigError> {
    // accept the named forms plus a scaled form `<spec>*<factor>`
    let (spec, factor) = match value.rsplit_once('*') {
        Some((s, f)) if !s.trim().is_empty() => (s.trim(), num(key, f.trim(), line)?),
        _ => (value, 1.0),
    };
    let t = CoeffTensor::parse(spec).map_err(|e| ConfigError::Parse {
        line,
        message: format!("key `{key}`: {e}"),
    })?;
    Ok(t.scale(factor))
}

fn parse_power_family(key: &str, value: &str, line: usize) -> Result<Option<(f64, f64)>, ConfigError> {
    if value == "none" {
        return Ok(None);
    }
    if let Some(rest) = value.strip_prefix("power:") {
        let a = parse_args(key, rest, 2, line)?;
        return Ok(Some((a[0], a[1])));
    }
    Err(ConfigError::Parse {
        line,
        message: format!("key `{key}`: expected `none` or `power:amp,exp`, got `{value}`"),
    })
}

/// Entry point for programmatic overrides (sweeps); reports line 0.
pub(crate) fn apply_key_public(
    c: &mut RunConfig,
    full_key: &str,
    value: &str,
) -> Result<(), ConfigError> {
    apply_key(c, full_key, value, 0)
}

fn apply_key(c: &mut RunConfig, full_key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
    let bad = |message: String| ConfigError::Parse { line, message };
    match full_key {
        "run.preset" => {} // handled by the caller
        "run.mode" => match value {
            "evolve" => c.mode = RunMode::Evolve,
            "picard" => {
                if !matches!(c.mode, RunMode::Picard { .. }) {
                    c.mode = RunMode::Picard { n_max: 10, tol: 1e-13 };
                }
            }
            _ => return Err(bad(format!("unknown mode `{value}`"))),
        },
        "run.picard_n_max" => {
            let n = num(full_key, value, line)? as usize;
            match &mut c.mode {
                RunMode::Picard { n_max, .. } => *n_max = n,
                RunMode::Evolve => c.mode = RunMode::Picard { n_max: n, tol: 1e-13 },
            }
        }
        "run.picard_tol" => {
            let t = num(full_key, value, line)?;
            match &mut c.mode {
                RunMode::Picard { tol, .. } => *tol = t,
                RunMode::Evolve => c.mode = RunMode::Picard { n_max: 10, tol: t },
            }
        }
        "run.output_dir" => c.output_dir = value.to_string(),
        "run.seed" => {
            c.seed = value.parse::<u64>().map_err(|_| {
                ConfigError::Parse { line, message: format!("seed must be an integer, got `{value}`") }
            })?;
        }
        "problem.a" => c.problem.a = parse_tensor(full_key, value, line)?,
        "problem.b" => c.problem.b = parse_tensor(full_key, value, line)?,
        "problem.epsilon" => c.problem.epsilon = num(full_key, value, line)?,
        "problem.cubic" => c.problem.cubic_coefficient = num(full_key, value, line)?,
        "data.phi0" => c.problem.data.phi0 = parse_profile(full_key, value, line)?,
        "data.phi1" => c.problem.data.phi1 = parse_profile(full_key, value, line)?,
        "data.r0" => c.problem.data.r0 = num(full_key, value, line)?,
        "background.family" => {
            c.problem.background.family = if value == "none" {
                BackgroundFamily::None
            } else if let Some(rest) = value.strip_prefix("static:") {
                let a = parse_args(full_key, rest, 2, line)?;
                BackgroundFamily::StaticProfile { amplitude: a[0], exponent: a[1] }
            } else if let Some(rest) = value.strip_prefix("freewave:") {
                let a = parse_args(full_key, rest, 1, line)?;
                BackgroundFamily::FreeWave { amp: a[0] }
            } else {
                return Err(bad(format!("unknown background family `{value}`")));
            };
        }
        "background.l" => {
            c.problem.background.l_family = match parse_power_family(full_key, value, line)? {
                None => LCoeffFamily::None,
                Some((amplitude, exponent)) => LCoeffFamily::Power { amplitude, exponent },
            };
        }
        "background.l_condition" => {
            c.problem.background.l_condition = match value {
                "lcond1" => LCondition::Lcond1,
                "lcond2" => LCondition::Lcond2,
                _ => return Err(bad(format!("unknown l_condition `{value}`"))),
            };
        }
        "background.h_coeff" => {
            c.problem.background.h_family = match parse_power_family(full_key, value, line)? {
                None => HCoeffFamily::None,
                Some((amplitude, exponent)) => HCoeffFamily::Power { amplitude, exponent },
            };
        }
        "background.delta" => c.problem.background.weak_wave.delta = num(full_key, value, line)?,
        "background.alpha" => c.problem.background.weak_wave.alpha = num(full_key, value, line)?,
        "background.t0" => c.problem.background.weak_wave.t0 = num(full_key, value, line)?,
        "background.r1" => c.problem.background.weak_wave.r1 = num(full_key, value, line)?,
        "background.c0" => c.problem.background.weak_wave.c0 = num(full_key, value, line)?,
        "grid.T" => c.grid.t_max = num(full_key, value, line)?,
        "grid.h" => c.grid.h = num(full_key, value, line)?,
        "grid.R" => {
            c.grid.r_match = if value == "auto" { None } else { Some(num(full_key, value, line)?) };
        }
        "grid.ell" => {
            c.grid.ell = value.parse::<u32>().map_err(|_| {
                ConfigError::Parse { line, message: format!("ell must be a small integer, got `{value}`") }
            })?;
        }
        "diagnostics.tau_stride" => c.diagnostics.tau_stride = num(full_key, value, line)?,
        "diagnostics.p_list" => {
            let vals: Result<Vec<f64>, _> =
                value.split(',').map(|p| num(full_key, p.trim(), line)).collect();
            c.diagnostics.p_list = vals?;
        }
        "diagnostics.checks" => {
            c.diagnostics.checks = match value {
                "on" => true,
                "off" => false,
                _ => return Err(bad(format!("checks must be on/off, got `{value}`"))),
            };
        }
        "diagnostics.alpha" => c.diagnostics.alpha = num(full_key, value, line)?,
        _ => return Err(bad(format!("unknown key `{full_key}`"))),
    }
    Ok(())
}

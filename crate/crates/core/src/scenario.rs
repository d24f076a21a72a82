//! Scenario files: a strict `key = value` text format with units spelled
//! out in the key names, plus the canonical serializer used for
//! reproducible round-trips.
//!
//! Unknown keys, duplicate keys, missing required keys, unit violations
//! and terminals on the wrong half-space are all rejected with the
//! offending line. Angles are degrees in files, radians internally.
//!
//! ```text
//! # minimal scenario
//! layout.rows = 1
//! layout.cols = 1
//! ```
//!
//! Every other key falls back to the reference desk setup (8x4 array at
//! 2.6 GHz, transmitter 0.8 m above the top face, receivers 4 m away).

use crate::channel::AntennaPattern;
use crate::element::{parse_pair_list, CalibrationCurves, ElementState};
use crate::error::{Error, Result};
use crate::geometry::{ArrayLayout, Side, TerminalPosition};
use crate::link::{Scenario, Terminal};
use std::collections::HashMap;
use std::path::Path;

/// Environment variable naming a calibration file used when the scenario
/// does not override the tables inline.
pub const CALIBRATION_ENV_VAR: &str = "STAR_RIS_CALIBRATION";

/// Antenna pattern as written in a scenario file: `isotropic`,
/// `cosine <q>` (lossless peak 2(q+1)) or `cosine <q> <peak>`.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternSpec {
    Isotropic,
    Cosine {
        exponent: f64,
        peak_gain: Option<f64>,
    },
}

impl PatternSpec {
    pub fn to_pattern(&self) -> Result<AntennaPattern> {
        match *self {
            PatternSpec::Isotropic => Ok(AntennaPattern::Isotropic),
            PatternSpec::Cosine {
                exponent,
                peak_gain: None,
            } => AntennaPattern::cosine_auto(exponent),
            PatternSpec::Cosine {
                exponent,
                peak_gain: Some(peak),
            } => AntennaPattern::cosine_with_peak(exponent, peak),
        }
    }

    fn parse(value: &str, line: usize, key: &str) -> Result<Self> {
        let mut parts = value.split_whitespace();
        match parts.next() {
            Some("isotropic") => {
                if parts.next().is_some() {
                    return Err(Error::parse(
                        line,
                        format!("{key}: `isotropic` takes no parameters"),
                    ));
                }
                Ok(PatternSpec::Isotropic)
            }
            Some("cosine") => {
                let q: f64 = parts
                    .next()
                    .ok_or_else(|| {
                        Error::parse(line, format!("{key}: `cosine` needs an exponent"))
                    })?
                    .parse()
                    .map_err(|_| {
                        Error::parse(line, format!("{key}: cosine exponent is not a number"))
                    })?;
                let peak = match parts.next() {
                    None => None,
                    Some(p) => Some(p.parse().map_err(|_| {
                        Error::parse(line, format!("{key}: cosine peak gain is not a number"))
                    })?),
                };
                if parts.next().is_some() {
                    return Err(Error::parse(
                        line,
                        format!("{key}: too many parameters for `cosine`"),
                    ));
                }
                Ok(PatternSpec::Cosine {
                    exponent: q,
                    peak_gain: peak,
                })
            }
            other => Err(Error::parse(
                line,
                format!(
                    "{key}: unknown pattern `{}`, expected `isotropic` or `cosine <q> [peak]`",
                    other.unwrap_or("")
                ),
            )),
        }
    }

    fn render(&self) -> String {
        match *self {
            PatternSpec::Isotropic => "isotropic".into(),
            PatternSpec::Cosine {
                exponent,
                peak_gain: None,
            } => format!("cosine {exponent:?}"),
            PatternSpec::Cosine {
                exponent,
                peak_gain: Some(p),
            } => format!("cosine {exponent:?} {p:?}"),
        }
    }
}

/// Terminal placement, exactly as written in the file.
///
/// Spherical coordinates are face-relative: the zenith is measured from
/// the outward normal of the terminal's own face, so valid zeniths lie in
/// [0, 90) degrees on both sides.
#[derive(Debug, Clone, PartialEq)]
pub enum PositionSpec {
    Spherical {
        range_m: f64,
        zenith_deg: f64,
        azimuth_deg: f64,
    },
    Cartesian {
        x_m: f64,
        y_m: f64,
        z_m: f64,
    },
}

/// One terminal: a placement plus an antenna pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSpec {
    pub position: PositionSpec,
    pub pattern: PatternSpec,
}

impl TerminalSpec {
    fn spherical(range_m: f64, zenith_deg: f64, azimuth_deg: f64) -> Self {
        Self {
            position: PositionSpec::Spherical {
                range_m,
                zenith_deg,
                azimuth_deg,
            },
            pattern: PatternSpec::Isotropic,
        }
    }

    fn to_terminal(&self, side: Side, prefix: &str) -> Result<Terminal> {
        let position = match self.position {
            PositionSpec::Spherical {
                range_m,
                zenith_deg,
                azimuth_deg,
            } => {
                if !(range_m > 0.0) {
                    return Err(Error::parse(
                        0,
                        format!("{prefix}.range_m must be positive, got {range_m}"),
                    ));
                }
                if !(0.0..90.0).contains(&zenith_deg) {
                    return Err(Error::parse(
                        0,
                        format!("{prefix}.zenith_deg must lie in [0, 90), got {zenith_deg}"),
                    ));
                }
                let zenith = zenith_deg.to_radians();
                let azimuth = azimuth_deg.to_radians();
                let (sin_z, cos_z) = zenith.sin_cos();
                let (sin_a, cos_a) = azimuth.sin_cos();
                TerminalPosition::from_cartesian(
                    range_m * sin_z * cos_a,
                    range_m * sin_z * sin_a,
                    side.z_sign() * range_m * cos_z,
                )
            }
            PositionSpec::Cartesian { x_m, y_m, z_m } => {
                let ok = match side {
                    Side::Reflect => z_m > 0.0,
                    Side::Transmit => z_m < 0.0,
                };
                if !ok {
                    return Err(Error::parse(
                        0,
                        format!(
                            "{prefix}.z_m = {z_m}: terminal must lie on the {} half-space (z {} 0)",
                            side.label(),
                            if side == Side::Reflect { ">" } else { "<" },
                        ),
                    ));
                }
                TerminalPosition::from_cartesian(x_m, y_m, z_m)
            }
        };
        Ok(Terminal::new(position, self.pattern.to_pattern()?))
    }
}

/// Declarative scenario description: the file contents, unit-for-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub rows: usize,
    pub cols: usize,
    pub pitch_x_m: f64,
    pub pitch_y_m: f64,
    pub frequency_hz: f64,
    pub tx_power_w: f64,
    pub tx: TerminalSpec,
    pub rx_t: TerminalSpec,
    pub rx_r: TerminalSpec,
    pub element_pattern: PatternSpec,
    pub bits: u32,
    pub bias_v: f64,
    pub pa_ma: f64,
    pub efficiency: f64,
    pub jitter_deg: f64,
    pub noise_rx_t_w: f64,
    pub noise_rx_r_w: f64,
    pub seed: u64,
    pub calibration_pa_ma_db: Option<Vec<(f64, f64)>>,
    pub calibration_split_v_frac: Option<Vec<(f64, f64)>>,
}

impl ScenarioFile {
    /// The reference desk setup: 8x4 array (8 columns, 58 mm pitch) at
    /// 2.6 GHz, transmitter 0.8 m above the top face, transmission
    /// receiver 4 m behind, reflection receiver 4 m out at 45 degrees,
    /// 1-bit phases with the equal power split and a saturated amplifier.
    pub fn reference() -> Self {
        Self {
            rows: 4,
            cols: 8,
            pitch_x_m: 0.058,
            pitch_y_m: 0.058,
            frequency_hz: 2.6e9,
            tx_power_w: 1.0,
            tx: TerminalSpec::spherical(0.8, 0.0, 0.0),
            rx_t: TerminalSpec::spherical(4.0, 0.0, 0.0),
            rx_r: TerminalSpec::spherical(4.0, 45.0, 0.0),
            element_pattern: PatternSpec::Cosine {
                exponent: 1.0,
                peak_gain: None,
            },
            bits: 1,
            bias_v: 11.0,
            pa_ma: 20.0,
            efficiency: 0.8,
            jitter_deg: 0.0,
            noise_rx_t_w: 1e-12,
            noise_rx_r_w: 1e-12,
            seed: 0,
            calibration_pa_ma_db: None,
            calibration_split_v_frac: None,
        }
    }

    /// Derive the immutable runtime scenario; `fallback_calibration`
    /// applies when the file carries no inline tables.
    pub fn build(
        &self,
        fallback_calibration: Option<&CalibrationCurves>,
    ) -> Result<ParsedScenario> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::parse(
                0,
                format!(
                    "layout.rows/layout.cols must be at least 1, got {}x{}",
                    self.rows, self.cols
                ),
            ));
        }
        let calibration = match (&self.calibration_pa_ma_db, &self.calibration_split_v_frac) {
            (None, None) => fallback_calibration.cloned().unwrap_or_default(),
            (pa, split) => {
                let base = fallback_calibration.cloned().unwrap_or_default();
                CalibrationCurves::new(
                    pa.clone().unwrap_or_else(|| base.pa_table().to_vec()),
                    split.clone().unwrap_or_else(|| base.split_table().to_vec()),
                )?
            }
        };
        let scenario = Scenario {
            layout: ArrayLayout::new(self.rows, self.cols, self.pitch_x_m, self.pitch_y_m)?,
            carrier_frequency: self.frequency_hz,
            tx: self.tx.to_terminal(Side::Reflect, "tx")?,
            rx_t: self.rx_t.to_terminal(Side::Transmit, "rx_t")?,
            rx_r: self.rx_r.to_terminal(Side::Reflect, "rx_r")?,
            element_pattern: self.element_pattern.to_pattern()?,
            tx_power: self.tx_power_w,
            noise_power_t: self.noise_rx_t_w,
            noise_power_r: self.noise_rx_r_w,
            calibration,
        };
        scenario.validate()?;
        let template = ElementState {
            phase_code_t: 0,
            phase_code_r: 0,
            bits: self.bits,
            bias_voltage: self.bias_v,
            pa_current_ma: self.pa_ma,
            efficiency: self.efficiency,
        };
        template.validate()?;
        if !(self.jitter_deg >= 0.0) {
            return Err(Error::parse(
                0,
                format!(
                    "element.jitter_deg must be nonnegative, got {}",
                    self.jitter_deg
                ),
            ));
        }
        Ok(ParsedScenario {
            file: self.clone(),
            scenario,
            element_template: template,
            jitter_deg: self.jitter_deg,
            seed: self.seed,
        })
    }
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self::reference()
    }
}

/// A fully validated scenario plus the run settings that live beside it
/// in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScenario {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub element_template: ElementState,
    pub jitter_deg: f64,
    pub seed: u64,
}

impl ParsedScenario {
    /// Uniform per-element control words from the file's element section.
    pub fn states(&self) -> Vec<ElementState> {
        self.scenario.uniform_states(&self.element_template)
    }
}

/// Parse a scenario from a file, honoring the calibration environment
/// variable for table defaults.
pub fn parse_scenario(path: &Path) -> Result<ParsedScenario> {
    let text = std::fs::read_to_string(path)?;
    let env_calibration = load_env_calibration()?;
    parse_scenario_str_with(&text, env_calibration.as_ref())
}

/// Calibration tables named by `STAR_RIS_CALIBRATION`, if any.
pub fn load_env_calibration() -> Result<Option<CalibrationCurves>> {
    match std::env::var_os(CALIBRATION_ENV_VAR) {
        None => Ok(None),
        Some(p) => CalibrationCurves::from_file(Path::new(&p)).map(Some),
    }
}

/// Parse a scenario from text with the built-in calibration defaults.
pub fn parse_scenario_str(text: &str) -> Result<ParsedScenario> {
    parse_scenario_str_with(text, None)
}

pub fn parse_scenario_str_with(
    text: &str,
    fallback_calibration: Option<&CalibrationCurves>,
) -> Result<ParsedScenario> {
    let mut keys: HashMap<String, (String, usize)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(line_no, format!("expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if let Some((_, first_line)) = keys.get(&key) {
            return Err(Error::parse(
                line_no,
                format!("duplicate key `{key}` (first set at line {first_line})"),
            ));
        }
        keys.insert(key, (value, line_no));
    }

    let mut keys = KeySet { map: keys };
    let defaults = ScenarioFile::reference();

    let rows = keys.require_usize("layout.rows")?;
    let cols = keys.require_usize("layout.cols")?;
    let file = ScenarioFile {
        rows,
        cols,
        pitch_x_m: keys.f64_or("layout.pitch_x_m", defaults.pitch_x_m, Constraint::Positive)?,
        pitch_y_m: keys.f64_or("layout.pitch_y_m", defaults.pitch_y_m, Constraint::Positive)?,
        frequency_hz: keys.f64_or(
            "carrier.frequency_hz",
            defaults.frequency_hz,
            Constraint::Positive,
        )?,
        tx_power_w: keys.f64_or("tx.power_w", defaults.tx_power_w, Constraint::Positive)?,
        tx: keys.terminal("tx", &defaults.tx)?,
        rx_t: keys.terminal("rx_t", &defaults.rx_t)?,
        rx_r: keys.terminal("rx_r", &defaults.rx_r)?,
        element_pattern: keys.pattern_or("element.pattern", &defaults.element_pattern)?,
        bits: keys.u32_or("element.bits", defaults.bits)?,
        bias_v: keys.f64_or("element.bias_v", defaults.bias_v, Constraint::Any)?,
        pa_ma: keys.f64_or("element.pa_ma", defaults.pa_ma, Constraint::NonNegative)?,
        efficiency: keys.f64_or(
            "element.efficiency",
            defaults.efficiency,
            Constraint::Positive,
        )?,
        jitter_deg: keys.f64_or(
            "element.jitter_deg",
            defaults.jitter_deg,
            Constraint::NonNegative,
        )?,
        noise_rx_t_w: keys.f64_or("noise.rx_t_w", defaults.noise_rx_t_w, Constraint::Positive)?,
        noise_rx_r_w: keys.f64_or("noise.rx_r_w", defaults.noise_rx_r_w, Constraint::Positive)?,
        seed: keys.u64_or("seed", defaults.seed)?,
        calibration_pa_ma_db: keys.pair_list("calibration.pa_ma_db")?,
        calibration_split_v_frac: keys.pair_list("calibration.split_v_frac")?,
    };
    keys.reject_unknown()?;
    file.build(fallback_calibration)
}

enum Constraint {
    Any,
    Positive,
    NonNegative,
}

struct KeySet {
    map: HashMap<String, (String, usize)>,
}

impl KeySet {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn require_usize(&mut self, key: &str) -> Result<usize> {
        let (value, line) = self
            .take(key)
            .ok_or_else(|| Error::parse(0, format!("missing required key `{key}`")))?;
        let v: usize = value
            .parse()
            .map_err(|_| Error::parse(line, format!("{key}: `{value}` is not a count")))?;
        if v < 1 {
            return Err(Error::parse(line, format!("{key} must be at least 1")));
        }
        Ok(v)
    }

    fn f64_or(&mut self, key: &str, default: f64, constraint: Constraint) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((value, line)) => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(line, format!("{key}: `{value}` is not a number")))?;
                match constraint {
                    Constraint::Any => {}
                    Constraint::Positive => {
                        if !(v > 0.0) {
                            return Err(Error::parse(
                                line,
                                format!("{key} must be positive, got {value}"),
                            ));
                        }
                    }
                    Constraint::NonNegative => {
                        if !(v >= 0.0) {
                            return Err(Error::parse(
                                line,
                                format!("{key} must be nonnegative, got {value}"),
                            ));
                        }
                    }
                }
                Ok(v)
            }
        }
    }

    fn u32_or(&mut self, key: &str, default: u32) -> Result<u32> {
        match self.take(key) {
            None => Ok(default),
            Some((value, line)) => value
                .parse()
                .map_err(|_| Error::parse(line, format!("{key}: `{value}` is not an integer"))),
        }
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some((value, line)) => value
                .parse()
                .map_err(|_| Error::parse(line, format!("{key}: `{value}` is not an integer"))),
        }
    }

    fn pattern_or(&mut self, key: &str, default: &PatternSpec) -> Result<PatternSpec> {
        match self.take(key) {
            None => Ok(default.clone()),
            Some((value, line)) => PatternSpec::parse(&value, line, key),
        }
    }

    fn pair_list(&mut self, key: &str) -> Result<Option<Vec<(f64, f64)>>> {
        match self.take(key) {
            None => Ok(None),
            Some((value, line)) => parse_pair_list(&value, line).map(Some),
        }
    }

    /// Terminal block under `prefix.` — either spherical
    /// (range_m/zenith_deg/azimuth_deg) or cartesian (x_m/y_m/z_m), plus
    /// an optional pattern.
    fn terminal(&mut self, prefix: &str, default: &TerminalSpec) -> Result<TerminalSpec> {
        let range = self.take(&format!("{prefix}.range_m"));
        let zenith = self.take(&format!("{prefix}.zenith_deg"));
        let azimuth = self.take(&format!("{prefix}.azimuth_deg"));
        let x = self.take(&format!("{prefix}.x_m"));
        let y = self.take(&format!("{prefix}.y_m"));
        let z = self.take(&format!("{prefix}.z_m"));
        let pattern = self.pattern_or(&format!("{prefix}.pattern"), &default.pattern)?;

        let spherical_given = range.is_some() || zenith.is_some() || azimuth.is_some();
        let cartesian_given = x.is_some() || y.is_some() || z.is_some();
        if spherical_given && cartesian_given {
            let line = [&range, &zenith, &azimuth, &x, &y, &z]
                .iter()
                .filter_map(|o| o.as_ref().map(|(_, l)| *l))
                .min()
                .unwrap_or(0);
            return Err(Error::parse(
                line,
                format!("{prefix}: mixing spherical and cartesian position keys"),
            ));
        }

        let parse_f64 = |slot: Option<(String, usize)>, key: String| -> Result<Option<f64>> {
            match slot {
                None => Ok(None),
                Some((value, line)) => value
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::parse(line, format!("{key}: `{value}` is not a number"))),
            }
        };

        if cartesian_given {
            let missing = |name: &str| {
                Error::parse(
                    0,
                    format!("{prefix}.{name} is required when any cartesian key is given"),
                )
            };
            let x = parse_f64(x, format!("{prefix}.x_m"))?.ok_or_else(|| missing("x_m"))?;
            let y = parse_f64(y, format!("{prefix}.y_m"))?.ok_or_else(|| missing("y_m"))?;
            let z = parse_f64(z, format!("{prefix}.z_m"))?.ok_or_else(|| missing("z_m"))?;
            return Ok(TerminalSpec {
                position: PositionSpec::Cartesian {
                    x_m: x,
                    y_m: y,
                    z_m: z,
                },
                pattern,
            });
        }
        if spherical_given {
            let (d_range, d_zenith, d_azimuth) = match default.position {
                PositionSpec::Spherical {
                    range_m,
                    zenith_deg,
                    azimuth_deg,
                } => (range_m, zenith_deg, azimuth_deg),
                PositionSpec::Cartesian { .. } => (1.0, 0.0, 0.0),
            };
            let range = parse_f64(range, format!("{prefix}.range_m"))?.unwrap_or(d_range);
            let zenith = parse_f64(zenith, format!("{prefix}.zenith_deg"))?.unwrap_or(d_zenith);
            let azimuth = parse_f64(azimuth, format!("{prefix}.azimuth_deg"))?.unwrap_or(d_azimuth);
            return Ok(TerminalSpec {
                position: PositionSpec::Spherical {
                    range_m: range,
                    zenith_deg: zenith,
                    azimuth_deg: azimuth,
                },
                pattern,
            });
        }
        Ok(TerminalSpec {
            position: default.position.clone(),
            pattern,
        })
    }

    fn reject_unknown(&self) -> Result<()> {
        if let Some((key, (_, line))) = self.map.iter().min_by_key(|(_, (_, line))| *line) {
            return Err(Error::parse(*line, format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

/// Canonical text form of a scenario: every key written explicitly, floats
/// in shortest round-trip notation. Parsing the output reproduces the
/// input `ScenarioFile` exactly.
pub fn serialize_scenario(file: &ScenarioFile) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("layout.rows", file.rows.to_string());
    push("layout.cols", file.cols.to_string());
    push("layout.pitch_x_m", format!("{:?}", file.pitch_x_m));
    push("layout.pitch_y_m", format!("{:?}", file.pitch_y_m));
    push("carrier.frequency_hz", format!("{:?}", file.frequency_hz));
    push("tx.power_w", format!("{:?}", file.tx_power_w));
    for (prefix, term) in [("tx", &file.tx), ("rx_t", &file.rx_t), ("rx_r", &file.rx_r)] {
        match term.position {
            PositionSpec::Spherical {
                range_m,
                zenith_deg,
                azimuth_deg,
            } => {
                push(&format!("{prefix}.range_m"), format!("{range_m:?}"));
                push(&format!("{prefix}.zenith_deg"), format!("{zenith_deg:?}"));
                push(&format!("{prefix}.azimuth_deg"), format!("{azimuth_deg:?}"));
            }
            PositionSpec::Cartesian { x_m, y_m, z_m } => {
                push(&format!("{prefix}.x_m"), format!("{x_m:?}"));
                push(&format!("{prefix}.y_m"), format!("{y_m:?}"));
                push(&format!("{prefix}.z_m"), format!("{z_m:?}"));
            }
        }
        push(&format!("{prefix}.pattern"), term.pattern.render());
    }
    push("element.pattern", file.element_pattern.render());
    push("element.bits", file.bits.to_string());
    push("element.bias_v", format!("{:?}", file.bias_v));
    push("element.pa_ma", format!("{:?}", file.pa_ma));
    push("element.efficiency", format!("{:?}", file.efficiency));
    push("element.jitter_deg", format!("{:?}", file.jitter_deg));
    push("noise.rx_t_w", format!("{:?}", file.noise_rx_t_w));
    push("noise.rx_r_w", format!("{:?}", file.noise_rx_r_w));
    push("seed", file.seed.to_string());
    if let Some(t) = &file.calibration_pa_ma_db {
        push("calibration.pa_ma_db", render_pairs(t));
    }
    if let Some(t) = &file.calibration_split_v_frac {
        push("calibration.split_v_frac", render_pairs(t));
    }
    out
}

fn render_pairs(pairs: &[(f64, f64)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a:?}:{b:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

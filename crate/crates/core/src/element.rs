//! Per-element model of the active STAR-RIS unit: adjustable
//! transmission/reflection power split, amplifier gain vs. supply current,
//! m-bit phase codebooks, optional phase jitter, and the per-element
//! scattering amplitude toward each receiver.

use crate::channel::{effective_aperture, AntennaPattern};
use crate::error::{Error, Result};
use crate::geometry::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Largest supported phase resolution. Codes are stored in a `u16`.
pub const MAX_PHASE_BITS: u32 = 12;

/// Default radiation efficiency budget of one element.
pub const DEFAULT_EFFICIENCY: f64 = 0.8;

/// Varactor bias that yields the equal power split.
pub const DEFAULT_BIAS_V: f64 = 11.0;

/// Amplifier supply current at which the gain saturates.
pub const DEFAULT_PA_MA: f64 = 20.0;

/// Phase of codebook entry `code` for an m-bit shifter: code * 2pi / 2^m.
pub fn codebook_phase(code: u16, bits: u32) -> f64 {
    debug_assert!((1..=MAX_PHASE_BITS).contains(&bits));
    debug_assert!((code as u32) < (1u32 << bits));
    code as f64 * TAU / (1u64 << bits) as f64
}

/// All 2^m codebook phases in code order.
pub fn codebook(bits: u32) -> Vec<f64> {
    (0..(1u32 << bits) as u16)
        .map(|c| codebook_phase(c, bits))
        .collect()
}

/// Nearest-codebook quantization of an ideal phase.
///
/// Returns the code whose phase has minimum circular distance to
/// `ideal_phase`; exact ties go to the numerically smaller code, so the
/// tie at the wrap-around (halfway between the last code and code 0)
/// resolves to code 0.
pub fn quantize_phase(ideal_phase: f64, bits: u32) -> Result<u16> {
    if !(1..=MAX_PHASE_BITS).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "phase resolution must be 1..={MAX_PHASE_BITS} bits, got {bits}"
        )));
    }
    let levels = 1u32 << bits;
    let step = TAU / levels as f64;
    let wrapped = ideal_phase.rem_euclid(TAU);
    let x = wrapped / step; // in [0, levels)
    let lo = x.floor();
    let frac = x - lo;
    let code = if frac > 0.5 {
        lo as u32 + 1
    } else if frac < 0.5 {
        lo as u32
    } else {
        let a = lo as u32 % levels;
        let b = (lo as u32 + 1) % levels;
        a.min(b)
    };
    Ok((code % levels) as u16)
}

/// Circular distance between two phases, in [0, pi].
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Control word of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementState {
    /// Phase code applied to the transmission path.
    pub phase_code_t: u16,
    /// Phase code applied to the reflection path.
    pub phase_code_r: u16,
    /// Phase shifter resolution in bits.
    pub bits: u32,
    /// Varactor bias voltage controlling the power split (V).
    pub bias_voltage: f64,
    /// Power amplifier supply current (mA).
    pub pa_current_ma: f64,
    /// Overall radiation efficiency budget eta_n in (0, 1].
    pub efficiency: f64,
}

impl ElementState {
    /// State with both codes at 0, equal split bias, saturated amplifier
    /// and the default efficiency budget.
    pub fn new(bits: u32) -> Result<Self> {
        let s = Self {
            phase_code_t: 0,
            phase_code_r: 0,
            bits,
            bias_voltage: DEFAULT_BIAS_V,
            pa_current_ma: DEFAULT_PA_MA,
            efficiency: DEFAULT_EFFICIENCY,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PHASE_BITS).contains(&self.bits) {
            return Err(Error::InvalidParameter(format!(
                "phase resolution must be 1..={MAX_PHASE_BITS} bits, got {}",
                self.bits
            )));
        }
        let levels = 1u32 << self.bits;
        if (self.phase_code_t as u32) >= levels || (self.phase_code_r as u32) >= levels {
            return Err(Error::InvalidParameter(format!(
                "phase codes ({}, {}) out of range for {} bits",
                self.phase_code_t, self.phase_code_r, self.bits
            )));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "efficiency must lie in (0, 1], got {}",
                self.efficiency
            )));
        }
        if !(self.pa_current_ma >= 0.0 && self.pa_current_ma <= 20.0) {
            return Err(Error::InvalidParameter(format!(
                "pa current must lie in [0, 20] mA, got {}",
                self.pa_current_ma
            )));
        }
        Ok(())
    }

    pub fn code(&self, side: Side) -> u16 {
        match side {
            Side::Transmit => self.phase_code_t,
            Side::Reflect => self.phase_code_r,
        }
    }

    pub fn set_code(&mut self, side: Side, code: u16) {
        match side {
            Side::Transmit => self.phase_code_t = code,
            Side::Reflect => self.phase_code_r = code,
        }
    }

    /// Codebook phase currently applied on `side`.
    pub fn phase(&self, side: Side) -> f64 {
        codebook_phase(self.code(side), self.bits)
    }
}

/// Measured hardware curves: amplifier gain vs. supply current and power
/// split vs. varactor bias.
///
/// The gain table interpolates piecewise-linearly in (mA, dB) space and
/// clamps outside its domain. The split table stores (V, transmit
/// fraction eta_t/eta_n) anchors; interpolation between anchors is linear
/// in the dB ratio 10*log10(eta_t/eta_r).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurves {
    pa_gain_ma_db: Vec<(f64, f64)>,
    split_v_frac: Vec<(f64, f64)>,
}

impl Default for CalibrationCurves {
    fn default() -> Self {
        // pa: measured array gain anchors; split: ~8 dB bidirectional
        // port ratio with the equal split at 11 V
        Self {
            pa_gain_ma_db: vec![(0.0, 0.0), (5.0, 4.0), (10.0, 10.0), (20.0, 12.0)],
            split_v_frac: vec![(2.0, 0.863), (11.0, 0.5), (20.0, 0.137)],
        }
    }
}

impl CalibrationCurves {
    pub fn new(pa_gain_ma_db: Vec<(f64, f64)>, split_v_frac: Vec<(f64, f64)>) -> Result<Self> {
        let c = Self {
            pa_gain_ma_db,
            split_v_frac,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.pa_gain_ma_db.is_empty() {
            return Err(Error::InvalidParameter("pa gain table is empty".into()));
        }
        if self.pa_gain_ma_db[0] != (0.0, 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pa gain table must start at the (0 mA, 0 dB) passive baseline, got {:?}",
                self.pa_gain_ma_db[0]
            )));
        }
        for w in self.pa_gain_ma_db.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter(
                    "pa gain table currents must be strictly increasing".into(),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidParameter(
                    "pa gain table must be nondecreasing in dB".into(),
                ));
            }
        }
        if self.split_v_frac.len() < 2 {
            return Err(Error::InvalidParameter(
                "split table needs at least two anchors".into(),
            ));
        }
        for &(_, f) in &self.split_v_frac {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "split fractions must lie strictly inside (0, 1), got {f}"
                )));
            }
        }
        let increasing = self.split_v_frac[1].1 > self.split_v_frac[0].1;
        for w in self.split_v_frac.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParameter(
                    "split table biases must be strictly increasing".into(),
                ));
            }
            let ok = if increasing {
                w[1].1 > w[0].1
            } else {
                w[1].1 < w[0].1
            };
            if !ok {
                return Err(Error::InvalidParameter(
                    "split table fractions must be strictly monotone".into(),
                ));
            }
        }
        if self.split_ratio_span_db() < 6.0 {
            return Err(Error::InvalidParameter(format!(
                "split table ratio range must span at least 6 dB end-to-end, got {:.2} dB",
                self.split_ratio_span_db()
            )));
        }
        Ok(())
    }

    /// Amplifier gain in dB at `current_ma`, clamped to the table domain.
    pub fn pa_gain_db(&self, current_ma: f64) -> f64 {
        interp_clamped(&self.pa_gain_ma_db, current_ma).0
    }

    /// Amplifier gain as a linear power factor.
    pub fn pa_gain_linear(&self, current_ma: f64) -> f64 {
        10f64.powf(self.pa_gain_db(current_ma) / 10.0)
    }

    /// Transmit fraction eta_t/eta_n at `bias_v`. The second value flags
    /// a bias outside the calibrated range (clamped to the endpoint).
    pub fn split_fraction(&self, bias_v: f64) -> (f64, bool) {
        // exact anchors return anchor fractions bit-exactly
        for &(v, f) in &self.split_v_frac {
            if bias_v == v {
                return (f, false);
            }
        }
        let first = self.split_v_frac[0];
        let last = *self.split_v_frac.last().expect("validated non-empty");
        if bias_v < first.0 {
            return (first.1, true);
        }
        if bias_v > last.0 {
            return (last.1, true);
        }
        // linear in the dB ratio domain between the bracketing anchors
        for w in self.split_v_frac.windows(2) {
            let (v0, f0) = w[0];
            let (v1, f1) = w[1];
            if bias_v < v1 {
                let t = (bias_v - v0) / (v1 - v0);
                let db = ratio_db(f0) + t * (ratio_db(f1) - ratio_db(f0));
                return (fraction_from_ratio_db(db), false);
            }
        }
        (last.1, false)
    }

    /// End-to-end dynamic range of the port ratio eta_t/eta_r in dB.
    pub fn split_ratio_span_db(&self) -> f64 {
        let first = ratio_db(self.split_v_frac[0].1);
        let last = ratio_db(self.split_v_frac.last().expect("non-empty").1);
        (first - last).abs()
    }

    /// Calibrated bias range (V).
    pub fn bias_range(&self) -> (f64, f64) {
        (
            self.split_v_frac[0].0,
            self.split_v_frac.last().expect("non-empty").0,
        )
    }

    /// Raw (mA, dB) gain anchors.
    pub fn pa_table(&self) -> &[(f64, f64)] {
        &self.pa_gain_ma_db
    }

    /// Raw (V, fraction) split anchors.
    pub fn split_table(&self) -> &[(f64, f64)] {
        &self.split_v_frac
    }

    /// Load tables from a key = value text file.
    ///
    /// Recognized keys: `pa_gain.ma_db` (comma-separated `mA:dB` pairs)
    /// and `split.v_frac` (comma-separated `V:fraction` pairs). Unknown
    /// keys are rejected.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_tables(&text)
    }

    pub fn from_str_tables(text: &str) -> Result<Self> {
        let mut pa: Option<Vec<(f64, f64)>> = None;
        let mut split: Option<Vec<(f64, f64)>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "pa_gain.ma_db" => {
                    if pa.is_some() {
                        return Err(Error::parse(line_no, "duplicate key `pa_gain.ma_db`"));
                    }
                    pa = Some(parse_pair_list(value, line_no)?);
                }
                "split.v_frac" => {
                    if split.is_some() {
                        return Err(Error::parse(line_no, "duplicate key `split.v_frac`"));
                    }
                    split = Some(parse_pair_list(value, line_no)?);
                }
                other => {
                    return Err(Error::parse(
                        line_no,
                        format!("unknown calibration key `{other}`"),
                    ));
                }
            }
        }
        let defaults = Self::default();
        Self::new(
            pa.unwrap_or(defaults.pa_gain_ma_db),
            split.unwrap_or(defaults.split_v_frac),
        )
    }
}

/// Parse a `x:y, x:y, ...` anchor list.
pub(crate) fn parse_pair_list(value: &str, line_no: usize) -> Result<Vec<(f64, f64)>> {
    value
        .split(',')
        .map(|chunk| {
            let chunk = chunk.trim();
            let (a, b) = chunk.split_once(':').ok_or_else(|| {
                Error::parse(line_no, format!("expected `x:y` anchor, got `{chunk}`"))
            })?;
            let x: f64 = a.trim().parse().map_err(|_| {
                Error::parse(line_no, format!("anchor x `{}` is not a number", a.trim()))
            })?;
            let y: f64 = b.trim().parse().map_err(|_| {
                Error::parse(line_no, format!("anchor y `{}` is not a number", b.trim()))
            })?;
            Ok((x, y))
        })
        .collect()
}

fn ratio_db(frac: f64) -> f64 {
    10.0 * (frac / (1.0 - frac)).log10()
}

fn fraction_from_ratio_db(db: f64) -> f64 {
    let r = 10f64.powf(db / 10.0);
    r / (1.0 + r)
}

/// Piecewise-linear interpolation with endpoint clamping; exact anchor
/// inputs return the anchor value bit-exactly.
fn interp_clamped(table: &[(f64, f64)], x: f64) -> (f64, bool) {
    let first = table[0];
    let last = *table.last().expect("table non-empty");
    if x <= first.0 {
        return (first.1, x < first.0);
    }
    if x >= last.0 {
        return (last.1, x > last.0);
    }
    for w in table.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x == x0 {
            return (y0, false);
        }
        if x < x1 {
            let t = (x - x0) / (x1 - x0);
            return (y0 + t * (y1 - y0), false);
        }
        if x == x1 {
            return (y1, false);
        }
    }
    (last.1, false)
}

/// Power-domain split of the element's efficiency budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCoefficients {
    /// Fraction of the budget radiated through the surface.
    pub eta_t: f64,
    /// Fraction radiated back from the surface.
    pub eta_r: f64,
    /// Set when the bias fell outside the calibrated range and was clamped.
    pub clamped: bool,
}

/// Split the efficiency budget `eta_n` at the given bias.
///
/// The pair is constructed by two complementary subtractions so that
/// `eta_t + eta_r == eta_n` holds bit-exactly for every input.
pub fn split_coefficients(
    bias_v: f64,
    eta_n: f64,
    curves: &CalibrationCurves,
) -> Result<SplitCoefficients> {
    if !(eta_n > 0.0 && eta_n <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "efficiency budget must lie in (0, 1], got {eta_n}"
        )));
    }
    let (frac, clamped) = curves.split_fraction(bias_v);
    let eta_t_raw = eta_n * frac;
    let eta_r = eta_n - eta_t_raw;
    let eta_t = eta_n - eta_r;
    Ok(SplitCoefficients {
        eta_t,
        eta_r,
        clamped,
    })
}

/// Complex response of one element toward both receivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementResponse {
    /// Scattering amplitude toward the transmission receiver (m^2 scale).
    pub sigma_t: f64,
    /// Scattering amplitude toward the reflection receiver (m^2 scale).
    pub sigma_r: f64,
    /// Controlled phase on the transmission path (rad).
    pub phase_t: f64,
    /// Controlled phase on the reflection path (rad).
    pub phase_r: f64,
}

impl ElementResponse {
    pub fn compute(
        state: &ElementState,
        incident_zenith: f64,
        depart_zenith_t: f64,
        depart_zenith_r: f64,
        wavelength: f64,
        element_pattern: &AntennaPattern,
        curves: &CalibrationCurves,
    ) -> Result<Self> {
        let t = element_rcs(
            state,
            incident_zenith,
            depart_zenith_t,
            wavelength,
            element_pattern,
            Side::Transmit,
            curves,
        )?;
        let r = element_rcs(
            state,
            incident_zenith,
            depart_zenith_r,
            wavelength,
            element_pattern,
            Side::Reflect,
            curves,
        )?;
        Ok(Self {
            sigma_t: t.sigma,
            sigma_r: r.sigma,
            phase_t: t.phase,
            phase_r: r.phase,
        })
    }
}

/// One side of an [`ElementResponse`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideResponse {
    pub sigma: f64,
    pub phase: f64,
}

/// Raw scattering-amplitude kernel:
/// sqrt(eta_side) * mu_in * mu_out * sqrt(A_in * A_out * G_n).
pub fn rcs_amplitude(
    eta_side: f64,
    mu_in: f64,
    mu_out: f64,
    aperture_in: f64,
    aperture_out: f64,
    pa_gain_linear: f64,
) -> f64 {
    eta_side.sqrt() * mu_in * mu_out * (aperture_in * aperture_out * pa_gain_linear).sqrt()
}

/// Scattering amplitude and controlled phase of one element toward the
/// receiver on `side`.
///
/// The element's angular rolloff enters once, through the amplitude
/// pattern at the incident and departure zeniths; the apertures are the
/// boresight effective areas of the element pattern. The amplifier gain
/// lives entirely inside the returned amplitude.
pub fn element_rcs(
    state: &ElementState,
    incident_zenith: f64,
    depart_zenith: f64,
    wavelength: f64,
    element_pattern: &AntennaPattern,
    side: Side,
    curves: &CalibrationCurves,
) -> Result<SideResponse> {
    state.validate()?;
    let split = split_coefficients(state.bias_voltage, state.efficiency, curves)?;
    let eta_side = match side {
        Side::Transmit => split.eta_t,
        Side::Reflect => split.eta_r,
    };
    let aperture = effective_aperture(element_pattern.peak_gain(), wavelength);
    let sigma = rcs_amplitude(
        eta_side,
        element_pattern.amplitude(incident_zenith),
        element_pattern.amplitude(depart_zenith),
        aperture,
        aperture,
        curves.pa_gain_linear(state.pa_current_ma),
    );
    Ok(SideResponse {
        sigma,
        phase: state.phase(side),
    })
}

/// Add a reproducible uniform phase error in [-bound, +bound] degrees.
pub fn phase_jitter(code_phase: f64, jitter_bound_deg: f64, seed: u64) -> f64 {
    if jitter_bound_deg <= 0.0 {
        return code_phase;
    }
    let bound = jitter_bound_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    code_phase + rng.random_range(-bound..=bound)
}

/// Jitter a whole phase vector from a single seed (one draw per element).
pub fn jittered_phases(phases: &[f64], jitter_bound_deg: f64, seed: u64) -> Vec<f64> {
    if jitter_bound_deg <= 0.0 {
        return phases.to_vec();
    }
    let bound = jitter_bound_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    phases
        .iter()
        .map(|&p| p + rng.random_range(-bound..=bound))
        .collect()
}
